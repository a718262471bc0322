//! The `train` subcommand: joint optimization of the sampling pattern,
//! denoiser weights, and regularization weight on synthetic (or image-fed)
//! scenes, with checkpoint and loss-history artifacts.

use crate::config::{ExperimentConfig, PatternKind};
use crate::error::CliResult;
use crate::experiment::{initial_trainable_pattern, Pipeline};
use crate::scene::derive_seed;
use sparsar::recon::{save_model_file, DenoiserModel};
use sparsar::sampling::SamplingPattern;
use sparsar::training::{
    train_joint, EchoSource, LearningRates, LossRecord, PatternGradMode, TrainSample, TrainSetup,
    TrainState,
};
use std::io::Write;

const SEED_DOMAIN_MODEL: u64 = 4;

pub struct TrainOutcome {
    pub state: TrainState,
    pub records: Vec<LossRecord>,
}

/// Build the training context shared by the CLI and the acceptance study.
pub fn training_setup(pipeline: &Pipeline) -> TrainSetup {
    TrainSetup {
        params: pipeline.config.sar.clone(),
        filters: pipeline.filters.clone(),
        fast_time_grid: pipeline.fast_time_grid.clone(),
        doppler_bins: pipeline.config.scene.size,
        unroll_count: pipeline.config.recon.unrolls,
        cg_iterations: pipeline.config.recon.cg_iterations,
        cg_tolerance: 1e-10,
        grad_mode: if pipeline.config.training.echo_path_gradients {
            PatternGradMode::WithEchoPath
        } else {
            PatternGradMode::ReconstructionOnly
        },
    }
}

/// Training samples from the train-scene seed domain (decorrelated from the
/// evaluation scenes).
pub fn training_dataset(pipeline: &Pipeline) -> CliResult<Vec<TrainSample>> {
    let mut dataset = Vec::with_capacity(pipeline.config.training.train_count);
    for i in 0..pipeline.config.training.train_count {
        let scene = pipeline.train_scene(i)?;
        dataset.push(TrainSample { target: scene.clone(), source: EchoSource::Operator { scene } });
    }
    Ok(dataset)
}

/// Initial state: jittered-uniform pattern when the pattern itself is
/// trainable and the config asks for uniform, otherwise the configured
/// pattern; fresh seeded denoiser weights.
pub fn initial_state(pipeline: &Pipeline, rates: &LearningRates) -> CliResult<TrainState> {
    let pattern: SamplingPattern =
        if matches!(pipeline.config.pattern.kind, PatternKind::Uniform) && rates.pattern > 0.0 {
            initial_trainable_pattern(pipeline)?
        } else {
            pipeline.build_pattern()?
        };
    let model_seed = derive_seed(pipeline.config.seed, SEED_DOMAIN_MODEL, 0);
    let model = DenoiserModel::residual_cnn(
        pipeline.config.training.depth,
        pipeline.config.training.width,
        model_seed,
    )?;
    Ok(TrainState::new(pattern, model, pipeline.config.recon.lambda, pipeline.config.seed)?)
}

pub fn learning_rates(config: &ExperimentConfig) -> LearningRates {
    LearningRates {
        weights: config.training.lr_weights,
        lambda: config.training.lr_lambda,
        pattern: config.training.lr_pattern_fraction * config.sar.nominal_pri(),
    }
}

/// Run the configured training and write `model.bin`, `pattern.csv`, and
/// `loss_history.csv` under the output directory.
pub fn run_training(config: ExperimentConfig) -> CliResult<TrainOutcome> {
    let pipeline = Pipeline::new(config)?;
    let out = pipeline.config.out_dir.clone();
    std::fs::create_dir_all(&out)?;
    let setup = training_setup(&pipeline);
    let dataset = training_dataset(&pipeline)?;
    let rates = learning_rates(&pipeline.config);
    let state = initial_state(&pipeline, &rates)?;
    let (state, records) = train_joint(&setup, &dataset, state, pipeline.config.training.epochs, &rates)?;

    save_model_file(out.join("model.bin"), &state.model, state.lambda())?;
    let file = std::fs::File::create(out.join("pattern.csv"))?;
    state.pattern.write_csv(std::io::BufWriter::new(file))?;
    let mut f = std::fs::File::create(out.join("loss_history.csv"))?;
    writeln!(f, "epoch,sample_index,loss")?;
    for r in &records {
        writeln!(f, "{},{},{:.12e}", r.epoch, r.sample_index, r.loss)?;
    }

    let per_epoch = dataset.len().max(1);
    let first_epoch: f64 =
        records.iter().take(per_epoch).map(|r| r.loss).sum::<f64>() / per_epoch as f64;
    let last_epoch: f64 = records.iter().rev().take(per_epoch).map(|r| r.loss).sum::<f64>()
        / per_epoch as f64;
    println!(
        "trained {} epochs x {} samples: epoch-mean loss {first_epoch:.4e} -> {last_epoch:.4e}, lambda {:.4}",
        pipeline.config.training.epochs,
        per_epoch,
        state.lambda()
    );
    Ok(TrainOutcome { state, records })
}
