//! Plain-text experiment configuration: `key = value` lines under
//! `[section]` headers, no nesting. Parse errors carry line numbers.

use crate::error::CliError;
use sparsar::sar::SarParams;
use std::path::{Path, PathBuf};

/// Scene sparsity tiers of the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneTier {
    Sparse,
    Medium,
    Dense,
}

impl SceneTier {
    pub fn name(&self) -> &'static str {
        match self {
            SceneTier::Sparse => "sparse",
            SceneTier::Medium => "medium",
            SceneTier::Dense => "dense",
        }
    }
}

/// Where test/training scenes come from.
#[derive(Debug, Clone)]
pub enum SceneSource {
    Synthetic { tier: SceneTier },
    /// Grayscale image (PGM P5 or PNG); a seeded random phase per pixel
    /// turns it into a complex scene.
    Image { path: PathBuf },
}

/// Azimuth sampling pattern selection.
#[derive(Debug, Clone)]
pub enum PatternKind {
    Uniform,
    Poisson,
    Staggered,
    /// Positions loaded from a pattern CSV.
    Learned(PathBuf),
}

impl PatternKind {
    pub fn name(&self) -> String {
        match self {
            PatternKind::Uniform => "uniform".into(),
            PatternKind::Poisson => "poisson".into(),
            PatternKind::Staggered => "staggered".into(),
            PatternKind::Learned(p) => format!("learned:{}", p.display()),
        }
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        match text {
            "uniform" => Ok(PatternKind::Uniform),
            "poisson" => Ok(PatternKind::Poisson),
            "staggered" => Ok(PatternKind::Staggered),
            other => {
                if let Some(path) = other.strip_prefix("learned:") {
                    Ok(PatternKind::Learned(PathBuf::from(path)))
                } else {
                    Err(format!(
                        "unknown pattern '{other}' (expected uniform|poisson|staggered|learned:PATH)"
                    ))
                }
            }
        }
    }
}

/// Reconstruction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconKind {
    Mf,
    Ista,
    Modl,
}

impl ReconKind {
    pub fn name(&self) -> &'static str {
        match self {
            ReconKind::Mf => "mf",
            ReconKind::Ista => "ista",
            ReconKind::Modl => "modl",
        }
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        match text {
            "mf" => Ok(ReconKind::Mf),
            "ista" => Ok(ReconKind::Ista),
            "modl" => Ok(ReconKind::Modl),
            other => Err(format!("unknown recon '{other}' (expected mf|ista|modl)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub source: SceneSource,
    /// Square raster side; azimuth and range cells.
    pub size: usize,
    /// Number of evaluation scenes.
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct PatternConfig {
    pub kind: PatternKind,
    /// Azimuth budget as a fraction of the full grid, in (0, 1].
    pub budget: f64,
    /// Minimum spacing as a fraction of the nominal PRI.
    pub min_spacing_fraction: f64,
    /// Initialization jitter for trainable patterns, fraction of the stride.
    pub jitter: f64,
    /// Staggered ramp half-spread as a fraction of the mean PRI.
    pub staggered_spread: f64,
}

#[derive(Debug, Clone)]
pub struct ReconConfig {
    pub kind: ReconKind,
    pub unrolls: usize,
    pub cg_iterations: usize,
    pub lambda: f64,
    /// Optional weight container produced by `train`.
    pub weights: Option<PathBuf>,
    pub ista_lambda: f64,
    pub ista_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub train_count: usize,
    pub lr_weights: f64,
    pub lr_lambda: f64,
    /// Pattern learning rate as a fraction of the nominal PRI.
    pub lr_pattern_fraction: f64,
    pub depth: usize,
    pub width: usize,
    /// "reconstruction" or "echo-path".
    pub echo_path_gradients: bool,
}

/// Everything one experiment needs; defaults describe a small synthetic run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub sar: SarParams,
    pub scene: SceneConfig,
    pub pattern: PatternConfig,
    pub recon: ReconConfig,
    pub training: TrainingConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            out_dir: PathBuf::from("out"),
            sar: SarParams::default(),
            scene: SceneConfig {
                source: SceneSource::Synthetic { tier: SceneTier::Sparse },
                size: 32,
                count: 4,
            },
            pattern: PatternConfig {
                kind: PatternKind::Uniform,
                budget: 0.5,
                min_spacing_fraction: 0.1,
                jitter: 0.1,
                staggered_spread: 0.4,
            },
            recon: ReconConfig {
                kind: ReconKind::Modl,
                unrolls: 5,
                cg_iterations: 10,
                lambda: 1.0,
                weights: None,
                ista_lambda: 0.5,
                ista_iterations: 200,
            },
            training: TrainingConfig {
                epochs: 200,
                train_count: 8,
                lr_weights: 1e-3,
                lr_lambda: 1e-3,
                lr_pattern_fraction: 1e-4,
                depth: 4,
                width: 16,
                echo_path_gradients: false,
            },
        }
    }
}

fn config_err(line: usize, message: impl Into<String>) -> CliError {
    CliError::Config { line: Some(line), message: message.into() }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| config_err(line, format!("invalid value for '{key}': {e}")))
}

impl ExperimentConfig {
    /// Parse a config file's text; unknown sections or keys are errors.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut config = ExperimentConfig::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(lineno, "unterminated section header"))?;
                section = name.trim().to_string();
                match section.as_str() {
                    "run" | "sar" | "scene" | "pattern" | "recon" | "training" | "output" => {}
                    other => return Err(config_err(lineno, format!("unknown section '[{other}]'"))),
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(lineno, "expected 'key = value'"))?;
            let key = key.trim();
            let value = value.trim();
            config.apply(lineno, &section, key, value)?;
        }
        config.sar = config
            .sar
            .clone()
            .validated()
            .map_err(|e| CliError::Config { line: None, message: e.to_string() })?;
        config.validate()?;
        Ok(config)
    }

    /// Load from a path (missing file is a config error).
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    fn apply(&mut self, line: usize, section: &str, key: &str, value: &str) -> Result<(), CliError> {
        match (section, key) {
            ("run", "seed") => self.seed = parse_value(line, key, value)?,
            ("run", "budget") => self.pattern.budget = parse_value(line, key, value)?,
            ("run", "pattern") => {
                self.pattern.kind = PatternKind::parse(value).map_err(|e| config_err(line, e))?
            }
            ("run", "recon") => {
                self.recon.kind = ReconKind::parse(value).map_err(|e| config_err(line, e))?
            }
            ("output", "dir") => self.out_dir = PathBuf::from(value),
            ("sar", _) => self.apply_sar(line, key, value)?,
            ("scene", "source") => match value {
                "synthetic" => {
                    if !matches!(self.scene.source, SceneSource::Synthetic { .. }) {
                        self.scene.source = SceneSource::Synthetic { tier: SceneTier::Sparse };
                    }
                }
                "image" => self.scene.source = SceneSource::Image { path: PathBuf::new() },
                other => {
                    return Err(config_err(line, format!("unknown scene source '{other}'")));
                }
            },
            ("scene", "tier") => {
                let tier = match value {
                    "sparse" => SceneTier::Sparse,
                    "medium" => SceneTier::Medium,
                    "dense" => SceneTier::Dense,
                    other => return Err(config_err(line, format!("unknown tier '{other}'"))),
                };
                self.scene.source = SceneSource::Synthetic { tier };
            }
            ("scene", "image") => self.scene.source = SceneSource::Image { path: PathBuf::from(value) },
            ("scene", "size") => self.scene.size = parse_value(line, key, value)?,
            ("scene", "count") => self.scene.count = parse_value(line, key, value)?,
            ("pattern", "min_spacing_fraction") => {
                self.pattern.min_spacing_fraction = parse_value(line, key, value)?
            }
            ("pattern", "jitter") => self.pattern.jitter = parse_value(line, key, value)?,
            ("pattern", "staggered_spread") => {
                self.pattern.staggered_spread = parse_value(line, key, value)?
            }
            ("recon", "unrolls") => self.recon.unrolls = parse_value(line, key, value)?,
            ("recon", "cg_iterations") => self.recon.cg_iterations = parse_value(line, key, value)?,
            ("recon", "lambda") => self.recon.lambda = parse_value(line, key, value)?,
            ("recon", "weights") => self.recon.weights = Some(PathBuf::from(value)),
            ("recon", "ista_lambda") => self.recon.ista_lambda = parse_value(line, key, value)?,
            ("recon", "ista_iterations") => {
                self.recon.ista_iterations = parse_value(line, key, value)?
            }
            ("training", "epochs") => self.training.epochs = parse_value(line, key, value)?,
            ("training", "train_count") => self.training.train_count = parse_value(line, key, value)?,
            ("training", "lr_weights") => self.training.lr_weights = parse_value(line, key, value)?,
            ("training", "lr_lambda") => self.training.lr_lambda = parse_value(line, key, value)?,
            ("training", "lr_pattern_fraction") => {
                self.training.lr_pattern_fraction = parse_value(line, key, value)?
            }
            ("training", "depth") => self.training.depth = parse_value(line, key, value)?,
            ("training", "width") => self.training.width = parse_value(line, key, value)?,
            ("training", "grad_mode") => {
                self.training.echo_path_gradients = match value {
                    "reconstruction" => false,
                    "echo-path" => true,
                    other => {
                        return Err(config_err(
                            line,
                            format!("unknown grad_mode '{other}' (reconstruction|echo-path)"),
                        ))
                    }
                }
            }
            _ => {
                return Err(config_err(
                    line,
                    format!("unknown key '{key}' in section '[{section}]'"),
                ))
            }
        }
        Ok(())
    }

    fn apply_sar(&mut self, line: usize, key: &str, value: &str) -> Result<(), CliError> {
        let v: f64 = parse_value(line, key, value)?;
        match key {
            "carrier_frequency" => {
                self.sar.carrier_frequency = v;
                self.sar.wavelength = self.sar.speed_of_light / v;
            }
            "range_bandwidth" => self.sar.range_bandwidth = v,
            "range_sampling_rate" => self.sar.range_sampling_rate = v,
            "pulse_duration" => self.sar.pulse_duration = v,
            "range_chirp_rate" => self.sar.range_chirp_rate = v,
            "doppler_rate" => self.sar.doppler_rate = v,
            "prf" => self.sar.prf = v,
            "platform_velocity" => self.sar.platform_velocity = v,
            "platform_height" => self.sar.platform_height = v,
            "antenna_length_azimuth" => self.sar.antenna_length_azimuth = v,
            other => return Err(config_err(line, format!("unknown sar parameter '{other}'"))),
        }
        Ok(())
    }

    /// Structural checks after parsing and overrides.
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config { line: None, message: msg });
        if !(self.pattern.budget > 0.0 && self.pattern.budget <= 1.0) {
            return fail(format!("budget fraction must be in (0, 1], got {}", self.pattern.budget));
        }
        if self.scene.size < 8 {
            return fail(format!("scene size must be >= 8, got {}", self.scene.size));
        }
        if self.scene.count == 0 {
            return fail("scene count must be >= 1".into());
        }
        if let SceneSource::Image { path } = &self.scene.source {
            if !path.exists() {
                return fail(format!("scene image '{}' does not exist", path.display()));
            }
        }
        if let PatternKind::Learned(path) = &self.pattern.kind {
            if !path.exists() {
                return fail(format!("learned pattern '{}' does not exist", path.display()));
            }
        }
        if let Some(weights) = &self.recon.weights {
            if !weights.exists() {
                return fail(format!("weights '{}' do not exist", weights.display()));
            }
        }
        Ok(())
    }

    /// Budget in pulses for the configured raster.
    pub fn budget_pulses(&self) -> usize {
        ((self.scene.size as f64 * self.pattern.budget).round() as usize).max(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_text() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.scene.size, 32);
    }

    #[test]
    fn full_config_roundtrip() {
        let text = "\
[run]
seed = 7
budget = 0.25
pattern = poisson
recon = ista

[sar]
prf = 250.0

[scene]
tier = dense
size = 64
count = 3

[recon]
ista_lambda = 0.9

[output]
dir = results
";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.seed, 7);
        assert!((c.pattern.budget - 0.25).abs() < 1e-15);
        assert!(matches!(c.pattern.kind, PatternKind::Poisson));
        assert_eq!(c.recon.kind, ReconKind::Ista);
        assert_eq!(c.sar.prf, 250.0);
        assert_eq!(c.scene.size, 64);
        assert_eq!(c.out_dir, PathBuf::from("results"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "[run]\nseed = 1\nbogus_key = 3\n";
        match ExperimentConfig::parse(text) {
            Err(CliError::Config { line: Some(3), .. }) => {}
            other => panic!("expected line-3 config error, got {other:?}"),
        }
        let text = "[run]\nseed = notanumber\n";
        match ExperimentConfig::parse(text) {
            Err(CliError::Config { line: Some(2), .. }) => {}
            other => panic!("expected line-2 config error, got {other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# header comment\n\n[run]\nseed = 5 # trailing\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.seed, 5);
    }

    #[test]
    fn budget_bounds_are_enforced() {
        assert!(ExperimentConfig::parse("[run]\nbudget = 1.5\n").is_err());
        assert!(ExperimentConfig::parse("[run]\nbudget = 0.0\n").is_err());
    }
}
