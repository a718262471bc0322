//! Experiment report: one row per evaluated scene, written as CSV
//! (RFC 4180) and JSON. Wall-clock timings go to a separate sidecar file so
//! the report itself is byte-identical across reruns with the same seed.

use crate::error::CliResult;
use serde::Serialize;
use sparsar::metrics::PSNR_CAP_DB;
use std::path::Path;

/// Metrics for one scene.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ReportRow {
    pub scene_id: String,
    pub pattern: String,
    pub budget: f64,
    pub ssim: f64,
    pub undersampled_psnr_db: f64,
    pub reconstruction_psnr_db: f64,
    pub psnr_gain_db: f64,
}

/// A per-scene pipeline failure (the run continues past these).
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RowError {
    pub scene_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub errors: Vec<RowError>,
}

/// Cap an infinite PSNR at the sentinel used in reports.
pub fn cap_psnr(db: f64) -> f64 {
    if db.is_finite() {
        db
    } else {
        PSNR_CAP_DB
    }
}

impl Report {
    pub fn mean_reconstruction_psnr(&self) -> f64 {
        if self.rows.is_empty() {
            return f64::NAN;
        }
        self.rows.iter().map(|r| r.reconstruction_psnr_db).sum::<f64>() / self.rows.len() as f64
    }

    pub fn mean_ssim(&self) -> f64 {
        if self.rows.is_empty() {
            return f64::NAN;
        }
        self.rows.iter().map(|r| r.ssim).sum::<f64>() / self.rows.len() as f64
    }

    /// Write `report.csv` (RFC 4180 via the csv crate).
    pub fn write_csv(&self, path: &Path) -> CliResult<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut writer = csv::Writer::from_path(path).map_err(csv_io)?;
        writer
            .write_record([
                "scene_id",
                "pattern",
                "budget",
                "ssim",
                "undersampled_psnr_db",
                "reconstruction_psnr_db",
                "psnr_gain_db",
            ])
            .map_err(csv_io)?;
        for row in &self.rows {
            writer
                .write_record([
                    row.scene_id.clone(),
                    row.pattern.clone(),
                    format!("{:.6}", row.budget),
                    format!("{:.6}", row.ssim),
                    format!("{:.6}", row.undersampled_psnr_db),
                    format!("{:.6}", row.reconstruction_psnr_db),
                    format!("{:.6}", row.psnr_gain_db),
                ])
                .map_err(csv_io)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Write `report.json`.
    pub fn write_json(&self, path: &Path) -> CliResult<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(file, self).map_err(|e| crate::error::CliError::Io(e.into()))?;
        Ok(())
    }

    /// Human-readable table on stdout.
    pub fn print_table(&self) {
        println!(
            "{:<12} {:<10} {:>7} {:>8} {:>12} {:>12} {:>8}",
            "scene", "pattern", "budget", "ssim", "under(dB)", "recon(dB)", "gain(dB)"
        );
        for r in &self.rows {
            println!(
                "{:<12} {:<10} {:>7.3} {:>8.4} {:>12.2} {:>12.2} {:>8.2}",
                r.scene_id,
                r.pattern.split(':').next().unwrap_or(&r.pattern),
                r.budget,
                r.ssim,
                r.undersampled_psnr_db,
                r.reconstruction_psnr_db,
                r.psnr_gain_db
            );
        }
        for e in &self.errors {
            eprintln!("scene {} failed: {}", e.scene_id, e.message);
        }
    }
}

fn csv_io(e: csv::Error) -> crate::error::CliError {
    crate::error::CliError::Io(std::io::Error::other(e))
}

/// Wall-clock sidecar: kept out of the report so reruns stay byte-identical.
pub fn write_timings(path: &Path, timings: &[(String, f64)]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut writer = csv::Writer::from_path(path).map_err(csv_io)?;
    writer.write_record(["scene_id", "wall_ms"]).map_err(csv_io)?;
    for (id, ms) in timings {
        writer.write_record([id.clone(), format!("{ms:.3}")]).map_err(csv_io)?;
    }
    writer.flush()?;
    Ok(())
}
