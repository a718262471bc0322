//! Grayscale image ingestion (PGM P5 / PNG) and dB-scaled PGM export.

use crate::error::{CliError, CliResult};
use ndarray::Array2;
use sparsar::sar::ReflectivityMap;
use std::io::Write;
use std::path::Path;

fn bad_format(msg: impl Into<String>) -> CliError {
    CliError::Config { line: None, message: msg.into() }
}

/// Parse an 8-bit binary PGM (P5). Values are rescaled so the header's
/// maxval maps to 255.
pub fn read_pgm(path: &Path) -> CliResult<Array2<f64>> {
    let bytes = std::fs::read(path)?;
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> CliResult<String> {
        // Skip whitespace and '#' comments.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad_format(format!("{}: truncated PGM header", path.display())));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token(&bytes)?;
    if magic != "P5" {
        return Err(bad_format(format!("{}: not a P5 PGM (magic '{magic}')", path.display())));
    }
    let width: usize = token(&bytes)?
        .parse()
        .map_err(|e| bad_format(format!("{}: bad width: {e}", path.display())))?;
    let height: usize = token(&bytes)?
        .parse()
        .map_err(|e| bad_format(format!("{}: bad height: {e}", path.display())))?;
    let maxval: usize = token(&bytes)?
        .parse()
        .map_err(|e| bad_format(format!("{}: bad maxval: {e}", path.display())))?;
    if maxval == 0 || maxval > 255 {
        return Err(bad_format(format!(
            "{}: only 8-bit PGM supported (maxval {maxval})",
            path.display()
        )));
    }
    // Exactly one whitespace byte separates header and raster.
    pos += 1;
    let needed = width * height;
    if bytes.len() < pos + needed {
        return Err(bad_format(format!(
            "{}: raster truncated ({} bytes, need {})",
            path.display(),
            bytes.len() - pos,
            needed
        )));
    }
    let scale = 255.0 / maxval as f64;
    let data = Array2::from_shape_fn((height, width), |(r, c)| {
        bytes[pos + r * width + c] as f64 * scale
    });
    Ok(data)
}

fn read_png(path: &Path) -> CliResult<Array2<f64>> {
    let img = image::open(path)
        .map_err(|e| bad_format(format!("{}: {e}", path.display())))?
        .into_luma8();
    let (w, h) = img.dimensions();
    Ok(Array2::from_shape_fn((h as usize, w as usize), |(r, c)| {
        img.get_pixel(c as u32, r as u32).0[0] as f64
    }))
}

/// Load an 8-bit grayscale image (PGM P5 or PNG by extension) and fit it to
/// `target` (rows, cols) by center cropping and/or zero padding. For odd
/// differences the extra row/column is taken from (or added at) the
/// bottom/right.
pub fn ingest_image(path: &Path, target: (usize, usize)) -> CliResult<Array2<f64>> {
    let raw = match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => read_pgm(path)?,
        Some("png") => read_png(path)?,
        other => {
            return Err(bad_format(format!(
                "{}: unsupported image extension {other:?} (pgm|png)",
                path.display()
            )))
        }
    };
    Ok(center_fit(&raw, target))
}

/// Center crop/pad to the target shape.
pub fn center_fit(src: &Array2<f64>, target: (usize, usize)) -> Array2<f64> {
    let (sh, sw) = src.dim();
    let (th, tw) = target;
    let mut out = Array2::zeros(target);
    let copy_h = sh.min(th);
    let copy_w = sw.min(tw);
    let src_r0 = (sh - copy_h) / 2;
    let src_c0 = (sw - copy_w) / 2;
    let dst_r0 = (th - copy_h) / 2;
    let dst_c0 = (tw - copy_w) / 2;
    for r in 0..copy_h {
        for c in 0..copy_w {
            out[[dst_r0 + r, dst_c0 + c]] = src[[src_r0 + r, src_c0 + c]];
        }
    }
    out
}

/// Write an 8-bit binary PGM.
pub fn write_pgm(path: &Path, data: &Array2<u8>) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let (h, w) = data.dim();
    let mut f = std::fs::File::create(path)?;
    write!(f, "P5\n{w} {h}\n255\n")?;
    let mut bytes = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            bytes.push(data[[r, c]]);
        }
    }
    f.write_all(&bytes)?;
    Ok(())
}

/// Map magnitudes to 8-bit grayscale: dB relative to the peak, clipped at
/// `db_floor` (negative), linearly mapped onto [0, 255]. An all-zero image
/// renders black.
pub fn magnitude_to_gray(mag: &Array2<f64>, db_floor: f64) -> Array2<u8> {
    let peak = mag.iter().cloned().fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return Array2::zeros(mag.dim());
    }
    mag.mapv(|v| {
        if v <= 0.0 {
            return 0u8;
        }
        let db = 20.0 * (v / peak).log10();
        let clipped = db.max(db_floor);
        ((clipped - db_floor) / (-db_floor) * 255.0).round().clamp(0.0, 255.0) as u8
    })
}

/// Export a complex image as a dB-scaled PGM (default floor -40 dB).
pub fn export_image(image: &ReflectivityMap, path: &Path, db_floor: f64) -> CliResult<()> {
    if !image.data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(CliError::Pipeline(sparsar::Error::NonFinite("image for export".into())));
    }
    if !(db_floor < 0.0) {
        return Err(bad_format(format!("db_floor must be negative, got {db_floor}")));
    }
    let mag = image.data.mapv(|z| z.norm());
    write_pgm(path, &magnitude_to_gray(&mag, db_floor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use sparsar::sar::SarParams;

    #[test]
    fn pgm_roundtrip_and_rescale() {
        let dir = std::env::temp_dir().join("sparsar_imageio_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.pgm");
        let data = Array2::from_shape_fn((4, 6), |(r, c)| ((r * 6 + c) * 10) as u8);
        write_pgm(&path, &data).unwrap();
        let back = read_pgm(&path).unwrap();
        assert_eq!(back.dim(), (4, 6));
        for (a, b) in back.iter().zip(data.iter()) {
            assert_eq!(*a, *b as f64);
        }
        // maxval != 255 rescales to a 255 peak
        std::fs::write(dir.join("half.pgm"), b"P5\n2 1\n100\n\x64\x32").unwrap();
        let img = read_pgm(&dir.join("half.pgm")).unwrap();
        assert!((img[[0, 0]] - 255.0).abs() < 1e-12);
        assert!((img[[0, 1]] - 127.5).abs() < 1e-12);
    }

    #[test]
    fn corrupt_pgm_is_rejected() {
        let dir = std::env::temp_dir().join("sparsar_imageio_test");
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("bad.pgm"), b"P6\n2 2\n255\n0000").unwrap();
        assert!(read_pgm(&dir.join("bad.pgm")).is_err());
        std::fs::write(dir.join("short.pgm"), b"P5\n4 4\n255\n00").unwrap();
        assert!(read_pgm(&dir.join("short.pgm")).is_err());
    }

    #[test]
    fn center_fit_crops_and_pads() {
        let src = Array2::from_shape_fn((4, 4), |(r, c)| (r * 4 + c) as f64);
        // Pad 4x4 -> 6x6: original sits at offset (1, 1).
        let padded = center_fit(&src, (6, 6));
        assert_eq!(padded[[0, 0]], 0.0);
        assert_eq!(padded[[1, 1]], src[[0, 0]]);
        assert_eq!(padded[[4, 4]], src[[3, 3]]);
        // Crop 4x4 -> 2x2: keeps the central block starting at (1, 1).
        let cropped = center_fit(&src, (2, 2));
        assert_eq!(cropped[[0, 0]], src[[1, 1]]);
        assert_eq!(cropped[[1, 1]], src[[2, 2]]);
    }

    #[test]
    fn export_mapping_hits_exact_gray_levels() {
        // Two-level image: peak -> 255; -20 dB value with floor -40 dB ->
        // exactly half scale.
        let p = SarParams::default();
        let mut data = Array2::zeros((2, 2));
        data[[0, 0]] = Complex64::new(1.0, 0.0);
        data[[0, 1]] = Complex64::new(0.1, 0.0);
        let mag = data.mapv(|z: Complex64| z.norm());
        let gray = magnitude_to_gray(&mag, -40.0);
        assert_eq!(gray[[0, 0]], 255);
        assert_eq!(gray[[0, 1]], 128); // round(255/2)
        assert_eq!(gray[[1, 0]], 0);
        // Single peak renders a single white pixel.
        let map = ReflectivityMap::new(data, p.azimuth_spacing(), p.range_spacing()).unwrap();
        let dir = std::env::temp_dir().join("sparsar_imageio_test");
        export_image(&map, &dir.join("peak.pgm"), -40.0).unwrap();
        let back = read_pgm(&dir.join("peak.pgm")).unwrap();
        assert_eq!(back[[0, 0]], 255.0);
        // All-zero image renders black.
        let zero = ReflectivityMap::new(Array2::zeros((2, 2)), 1.0, 1.0).unwrap();
        export_image(&zero, &dir.join("zero.pgm"), -40.0).unwrap();
        let back = read_pgm(&dir.join("zero.pgm")).unwrap();
        assert!(back.iter().all(|&v| v == 0.0));
    }
}
