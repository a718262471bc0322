//! Config-driven pipeline: scenes -> pattern -> echoes -> reconstruction ->
//! metrics, reports, and image artifacts.
//!
//! Echoes are produced by the forward operator model at the configured
//! sampling pattern, so a full-budget uniform run reproduces the scene back
//! through the operator pair to numerical precision and every deviation in
//! the report comes from undersampling and reconstruction quality.

use crate::config::{ExperimentConfig, PatternKind, ReconKind, SceneSource};
use crate::error::{CliError, CliResult};
use crate::imageio::{export_image, ingest_image};
use crate::report::{cap_psnr, Report, ReportRow, RowError};
use crate::scene::{derive_seed, scene_from_amplitude, synthetic_scene};
use sparsar::metrics::{magnitude_pair, psnr, ssim_default, DYNAMIC_RANGE};
use sparsar::operators::{csa_image, csa_inverse, make_csa_filters, CsaFilters, NuftPlan};
use sparsar::recon::{
    ista_baseline, ista_step_bound, load_model_file, modl_reconstruct, DenoiserModel, ModlConfig,
};
use sparsar::sampling::{
    interval_histogram, jittered_uniform_pattern, poisson_disk_pattern, staggered_pattern,
    uniform_pattern, Aperture, SamplingPattern,
};
use sparsar::sar::{default_fast_time_grid, ReflectivityMap, DEFAULT_REFERENCE_RANGE};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

/// Seed domains for decorrelated per-purpose randomness.
pub const SEED_DOMAIN_TEST_SCENE: u64 = 1;
pub const SEED_DOMAIN_TRAIN_SCENE: u64 = 2;
pub const SEED_DOMAIN_PATTERN: u64 = 3;

/// Which artifacts a run produces.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub write_images: bool,
    pub write_report: bool,
    pub reconstruct: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { write_images: true, write_report: true, reconstruct: true }
    }
}

/// Fixed operator-world context derived from a config.
pub struct Pipeline {
    pub config: ExperimentConfig,
    pub fast_time_grid: Vec<f64>,
    pub filters: CsaFilters,
    pub aperture: Aperture,
}

impl Pipeline {
    pub fn new(config: ExperimentConfig) -> CliResult<Self> {
        let n = config.scene.size;
        let grid = default_fast_time_grid(&config.sar, n, DEFAULT_REFERENCE_RANGE);
        // Filters depend on the Doppler and range grids only, not on the
        // pattern, so one set serves every pattern at this raster.
        let probe = uniform_pattern(Aperture::new(0.0, n as f64 / config.sar.prf)?, n)?;
        let plan = NuftPlan::new(probe.positions(), n, config.sar.prf)?;
        let filters = make_csa_filters(&config.sar, &plan, &grid, DEFAULT_REFERENCE_RANGE)?;
        let aperture = Aperture::new(0.0, n as f64 / config.sar.prf)?;
        Ok(Pipeline { config, fast_time_grid: grid, filters, aperture })
    }

    pub fn min_spacing(&self) -> f64 {
        self.config.pattern.min_spacing_fraction * self.config.sar.nominal_pri()
    }

    /// Build the configured sampling pattern at the configured budget.
    pub fn build_pattern(&self) -> CliResult<SamplingPattern> {
        let budget = self.config.budget_pulses();
        let seed = derive_seed(self.config.seed, SEED_DOMAIN_PATTERN, 0);
        build_pattern_kind(
            &self.config.pattern.kind,
            self.aperture,
            budget,
            self.min_spacing(),
            self.config.pattern.staggered_spread,
            seed,
        )
    }

    /// The i-th evaluation scene.
    pub fn test_scene(&self, index: usize) -> CliResult<ReflectivityMap> {
        let seed = derive_seed(self.config.seed, SEED_DOMAIN_TEST_SCENE, index as u64);
        self.scene_with_seed(seed)
    }

    /// The i-th training scene (decorrelated from the evaluation set).
    pub fn train_scene(&self, index: usize) -> CliResult<ReflectivityMap> {
        let seed = derive_seed(self.config.seed, SEED_DOMAIN_TRAIN_SCENE, index as u64);
        self.scene_with_seed(seed)
    }

    fn scene_with_seed(&self, seed: u64) -> CliResult<ReflectivityMap> {
        let n = self.config.scene.size;
        match &self.config.scene.source {
            SceneSource::Synthetic { tier } => {
                Ok(synthetic_scene(&self.config.sar, n, *tier, seed))
            }
            SceneSource::Image { path } => {
                let amplitude = ingest_image(path, (n, n))?;
                Ok(scene_from_amplitude(&self.config.sar, &amplitude, seed))
            }
        }
    }

    /// Reconstruct one echo according to the configured method.
    pub fn reconstruct(
        &self,
        plan: &NuftPlan,
        echo: &sparsar::sar::EchoMatrix,
        mf_image: &ReflectivityMap,
        model: &Option<(DenoiserModel, f64)>,
    ) -> CliResult<ReflectivityMap> {
        match self.config.recon.kind {
            ReconKind::Mf => Ok(mf_image.clone()),
            ReconKind::Ista => {
                let step = ista_step_bound(&self.filters, plan)?;
                Ok(ista_baseline(
                    echo,
                    &self.filters,
                    plan,
                    self.config.recon.ista_lambda,
                    step,
                    self.config.recon.ista_iterations,
                )?)
            }
            ReconKind::Modl => {
                let (model, lambda) = match model {
                    Some((m, l)) => (m.clone(), *l),
                    // Zero residual weights make the denoiser the identity;
                    // the reconstruction is then plain regularized CG.
                    None => (
                        DenoiserModel::zeros(
                            self.config.training.depth,
                            self.config.training.width,
                            true,
                        )?,
                        self.config.recon.lambda,
                    ),
                };
                let modl_config = ModlConfig {
                    unroll_count: self.config.recon.unrolls,
                    cg_iterations: self.config.recon.cg_iterations,
                    cg_tolerance: 1e-10,
                    lambda,
                };
                Ok(modl_reconstruct(echo, &self.filters, plan, &model, &modl_config)?)
            }
        }
    }
}

/// Build a pattern of the given kind at an explicit budget and seed.
pub fn build_pattern_kind(
    kind: &PatternKind,
    aperture: Aperture,
    budget: usize,
    min_spacing: f64,
    staggered_spread: f64,
    seed: u64,
) -> CliResult<SamplingPattern> {
    let pattern = match kind {
        PatternKind::Uniform => uniform_pattern(aperture, budget)?,
        PatternKind::Poisson => poisson_disk_pattern(aperture, budget, min_spacing, seed)?,
        PatternKind::Staggered => {
            let mean = aperture.length() / (budget as f64 + 1.0);
            staggered_pattern(
                aperture,
                budget,
                mean * (1.0 - staggered_spread),
                mean * (1.0 + staggered_spread),
            )?
        }
        PatternKind::Learned(path) => {
            let file = std::fs::File::open(path).map_err(|e| CliError::Config {
                line: None,
                message: format!("cannot read pattern '{}': {e}", path.display()),
            })?;
            SamplingPattern::read_csv(std::io::BufReader::new(file), aperture, min_spacing)?
        }
    };
    Ok(pattern)
}

/// Initial trainable pattern: uniform plus small seeded jitter.
pub fn initial_trainable_pattern(pipeline: &Pipeline) -> CliResult<SamplingPattern> {
    let budget = pipeline.config.budget_pulses();
    let seed = derive_seed(pipeline.config.seed, SEED_DOMAIN_PATTERN, 1);
    Ok(jittered_uniform_pattern(
        pipeline.aperture,
        budget,
        pipeline.min_spacing(),
        pipeline.config.pattern.jitter,
        seed,
    )?)
}

/// Run the configured experiment end to end, writing artifacts under
/// `config.out_dir` per `options`, and return the assembled report.
pub fn run_experiment(config: ExperimentConfig, options: RunOptions) -> CliResult<Report> {
    let pipeline = Pipeline::new(config)?;
    let out = pipeline.config.out_dir.clone();
    std::fs::create_dir_all(&out)?;
    let pattern = pipeline.build_pattern()?;
    let plan = NuftPlan::new(
        pattern.positions(),
        pipeline.config.scene.size,
        pipeline.config.sar.prf,
    )?;

    // Pattern artifacts: positions CSV and the gap histogram CSV.
    let file = std::fs::File::create(out.join("pattern.csv"))?;
    pattern.write_csv(std::io::BufWriter::new(file))?;
    write_interval_histogram(&pattern, &out.join("intervals.csv"))?;

    let model = match &pipeline.config.recon.weights {
        Some(path) => Some(load_model_file(path)?),
        None => None,
    };

    let mut report = Report::default();
    let mut timings: Vec<(String, f64)> = Vec::new();
    for index in 0..pipeline.config.scene.count {
        let scene_id = format!("scene_{index:03}");
        let started = Instant::now();
        let result = run_one_scene(&pipeline, &plan, index, &scene_id, &model, options);
        let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
        timings.push((scene_id.clone(), elapsed_ms));
        match result {
            Ok(Some(row)) => report.rows.push(row),
            Ok(None) => {}
            Err(e) => report.errors.push(RowError { scene_id, message: e.to_string() }),
        }
    }

    if options.write_report {
        report.write_csv(&out.join("report.csv"))?;
        report.write_json(&out.join("report.json"))?;
        crate::report::write_timings(&out.join("timing.csv"), &timings)?;
    }
    Ok(report)
}

fn run_one_scene(
    pipeline: &Pipeline,
    plan: &NuftPlan,
    index: usize,
    scene_id: &str,
    model: &Option<(DenoiserModel, f64)>,
    options: RunOptions,
) -> CliResult<Option<ReportRow>> {
    let out = &pipeline.config.out_dir;
    let scene = pipeline.test_scene(index)?;
    let echo = csa_inverse(&pipeline.filters, plan, &scene)?;
    let mf_image = csa_image(&pipeline.filters, plan, &echo)?;
    if options.write_images {
        export_image(&scene, &out.join(format!("{scene_id}_truth.pgm")), -40.0)?;
        export_image(&mf_image, &out.join(format!("{scene_id}_mf.pgm")), -40.0)?;
        let echo_map = ReflectivityMap::new(echo.data.clone(), 1.0, 1.0)?;
        export_image(&echo_map, &out.join(format!("{scene_id}_echo.pgm")), -40.0)?;
    }
    if !options.reconstruct {
        return Ok(None);
    }
    let recon = pipeline.reconstruct(plan, &echo, &mf_image, model)?;
    if options.write_images {
        export_image(&recon, &out.join(format!("{scene_id}_recon.pgm")), -40.0)?;
    }
    let (mf_mag, truth_mag) = magnitude_pair(&mf_image, &scene)?;
    let (recon_mag, _) = magnitude_pair(&recon, &scene)?;
    let undersampled = cap_psnr(psnr(&mf_mag, &truth_mag, DYNAMIC_RANGE)?);
    let reconstruction = cap_psnr(psnr(&recon_mag, &truth_mag, DYNAMIC_RANGE)?);
    Ok(Some(ReportRow {
        scene_id: scene_id.to_string(),
        pattern: pipeline.config.pattern.kind.name(),
        budget: pipeline.config.pattern.budget,
        ssim: ssim_default(&recon_mag, &truth_mag)?,
        undersampled_psnr_db: undersampled,
        reconstruction_psnr_db: reconstruction,
        psnr_gain_db: reconstruction - undersampled,
    }))
}

fn write_interval_histogram(pattern: &SamplingPattern, path: &Path) -> CliResult<()> {
    let (edges, counts) = interval_histogram(pattern, 16)?;
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "bin_start,bin_end,count")?;
    for (i, count) in counts.iter().enumerate() {
        writeln!(f, "{:.12e},{:.12e},{count}", edges[i], edges[i + 1])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SceneTier;

    fn small_config(dir: &str) -> ExperimentConfig {
        let mut config = ExperimentConfig::default();
        config.scene.size = 16;
        config.scene.count = 2;
        config.scene.source = SceneSource::Synthetic { tier: SceneTier::Sparse };
        config.recon.kind = ReconKind::Mf;
        config.pattern.budget = 1.0;
        config.out_dir = std::env::temp_dir().join(dir);
        config
    }

    #[test]
    fn full_budget_mf_roundtrip_is_near_lossless() {
        let config = small_config("sparsar_exp_lossless");
        let report = run_experiment(config, RunOptions::default()).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.errors.is_empty());
        for row in &report.rows {
            assert!(row.reconstruction_psnr_db >= 80.0, "psnr {}", row.reconstruction_psnr_db);
        }
    }

    #[test]
    fn undersampling_lowers_the_mf_baseline() {
        let full = run_experiment(small_config("sparsar_exp_full"), RunOptions::default()).unwrap();
        let mut half_config = small_config("sparsar_exp_half");
        half_config.pattern.budget = 0.5;
        let half = run_experiment(half_config, RunOptions::default()).unwrap();
        for (f, h) in full.rows.iter().zip(half.rows.iter()) {
            assert!(
                h.undersampled_psnr_db < f.undersampled_psnr_db,
                "half-budget MF should degrade: {} vs {}",
                h.undersampled_psnr_db,
                f.undersampled_psnr_db
            );
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let config = small_config("sparsar_exp_det");
        run_experiment(config.clone(), RunOptions::default()).unwrap();
        let csv1 = std::fs::read(config.out_dir.join("report.csv")).unwrap();
        let json1 = std::fs::read(config.out_dir.join("report.json")).unwrap();
        run_experiment(config.clone(), RunOptions::default()).unwrap();
        let csv2 = std::fs::read(config.out_dir.join("report.csv")).unwrap();
        let json2 = std::fs::read(config.out_dir.join("report.json")).unwrap();
        assert_eq!(csv1, csv2);
        assert_eq!(json1, json2);
    }

    #[test]
    fn report_rows_keep_gain_consistent() {
        let mut config = small_config("sparsar_exp_gain");
        config.pattern.budget = 0.5;
        config.recon.kind = ReconKind::Modl;
        config.recon.unrolls = 2;
        config.recon.cg_iterations = 5;
        let report = run_experiment(config, RunOptions::default()).unwrap();
        for row in &report.rows {
            assert!(
                (row.psnr_gain_db - (row.reconstruction_psnr_db - row.undersampled_psnr_db)).abs()
                    < 1e-9
            );
        }
    }
}
