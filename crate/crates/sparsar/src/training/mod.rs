//! Joint optimization of the sampling pattern, denoiser weights, and the
//! regularization weight.
//!
//! The unrolled reconstruction is differentiated analytically. The
//! data-consistency solve uses the converged-solve identity: the gradient
//! through `x = (H H* + lambda I)^{-1} rhs` is another CG solve on the same
//! operator, and the operator's own dependence on the sample times is
//! recovered by replaying each transform application with its upstream
//! gradient (see [`pattern_gradient`]). Echo regeneration also depends on
//! the pattern; whether that dependence contributes gradients is selected by
//! [`PatternGradMode`] (default: reconstruction path only).

mod adam;
mod fd;

pub use fd::finite_difference_check;

use crate::error::{Error, Result};
use crate::operators::{
    csa_image_raw_with_tape, csa_image_vjp, csa_inverse_raw_with_tape, csa_inverse_vjp,
    csa_inverse, normal_apply_raw, nuft_forward_position_grad, nuift_inverse_position_grad,
    CsaFilters, NuftEvent, NuftKind, NuftPlan,
};
use crate::recon::{
    backward_network, cg_solve, channels_to_complex, complex_to_channels, forward_network,
    DenoiserModel, ModelGrads, ModlConfig,
};
use crate::sampling::{project_constraints, SamplingPattern};
use crate::sar::{scene_echo, EchoMatrix, ReflectivityMap, SarParams};
use ndarray::{Array1, Array2};
use num_complex::Complex64;

/// Whether pattern gradients flow only through the reconstruction operators
/// or also through the echo generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternGradMode {
    /// Differentiate the reconstruction only; the measured echo is treated
    /// as fixed data (the default).
    ReconstructionOnly,
    /// Additionally differentiate the echo's dependence on the pulse times.
    WithEchoPath,
}

/// How a training sample turns the current pattern into raw data.
#[derive(Debug, Clone)]
pub enum EchoSource {
    /// Forward-model data: the echo is the inverse imaging operator applied
    /// to the stored complex scene.
    Operator { scene: ReflectivityMap },
    /// Physical superposition data simulated from the scene's point
    /// scatterers (noiseless).
    Physical { scene: ReflectivityMap },
}

impl EchoSource {
    pub fn scene(&self) -> &ReflectivityMap {
        match self {
            EchoSource::Operator { scene } | EchoSource::Physical { scene } => scene,
        }
    }

    /// Generate the echo at the given plan's sample times.
    pub fn generate(&self, setup: &TrainSetup, plan: &NuftPlan) -> Result<EchoMatrix> {
        match self {
            EchoSource::Operator { scene } => csa_inverse(&setup.filters, plan, scene),
            EchoSource::Physical { scene } => scene_echo(
                &setup.params,
                scene,
                plan.positions(),
                &setup.fast_time_grid,
                0.0,
                0,
            ),
        }
    }

    /// Position gradient of the echo generation: contracts the loss gradient
    /// at the echo with the per-row time derivative of the generated data.
    fn position_vjp(
        &self,
        setup: &TrainSetup,
        plan: &NuftPlan,
        g_echo: &Array2<Complex64>,
    ) -> Result<Array1<f64>> {
        match self {
            EchoSource::Operator { scene } => {
                let (_, tape) = csa_inverse_raw_with_tape(&setup.filters, plan, &scene.data)?;
                let (_, event) = csa_inverse_vjp(&setup.filters, plan, &tape, g_echo)?;
                pattern_gradient(plan, &[event])
            }
            EchoSource::Physical { scene } => {
                let params = &setup.params;
                let grid = &setup.fast_time_grid;
                let t0 = grid[0];
                let mut grad = Array1::zeros(plan.sample_count());
                for (m, &eta) in plan.positions().iter().enumerate() {
                    let mut acc = 0.0;
                    for a in 0..scene.azimuth_cells() {
                        for r in 0..scene.range_cells() {
                            let amp = scene.data[[a, r]];
                            if amp == Complex64::new(0.0, 0.0) {
                                continue;
                            }
                            let (x, r0) = crate::sar::cell_geometry(params, t0, a, r);
                            for (k, &tau) in grid.iter().enumerate() {
                                let ds =
                                    amp * crate::sar::echo_sample_eta_derivative(params, x, r0, eta, tau);
                                acc += (g_echo[[m, k]].conj() * ds).re;
                            }
                        }
                    }
                    grad[m] = acc;
                }
                Ok(grad)
            }
        }
    }
}

/// One training sample: the reconstruction target and the echo generator.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub target: ReflectivityMap,
    pub source: EchoSource,
}

/// Fixed context shared by every training step.
#[derive(Debug, Clone)]
pub struct TrainSetup {
    pub params: SarParams,
    pub filters: CsaFilters,
    pub fast_time_grid: Vec<f64>,
    pub doppler_bins: usize,
    pub unroll_count: usize,
    pub cg_iterations: usize,
    pub cg_tolerance: f64,
    pub grad_mode: PatternGradMode,
}

impl TrainSetup {
    pub fn plan_for(&self, pattern: &SamplingPattern) -> Result<NuftPlan> {
        NuftPlan::new(pattern.positions(), self.doppler_bins, self.params.prf)
    }

    /// Reconstruction config at a given regularization weight.
    pub fn modl_config(&self, lambda: f64) -> ModlConfig {
        ModlConfig {
            unroll_count: self.unroll_count,
            cg_iterations: self.cg_iterations,
            cg_tolerance: self.cg_tolerance,
            lambda,
        }
    }
}

/// Adam accumulators, one set per parameter group.
#[derive(Debug, Clone)]
pub struct Moments {
    pub weights_m: ModelGrads,
    pub weights_v: ModelGrads,
    pub pattern_m: Vec<f64>,
    pub pattern_v: Vec<f64>,
    pub rho_m: f64,
    pub rho_v: f64,
    pub step_count: usize,
}

/// Everything the joint optimization updates.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub pattern: SamplingPattern,
    pub model: DenoiserModel,
    /// log(lambda); the exponential keeps the regularization weight positive.
    pub lambda_rho: f64,
    pub moments: Moments,
    pub epoch: usize,
    pub seed: u64,
}

impl TrainState {
    pub fn new(pattern: SamplingPattern, model: DenoiserModel, lambda: f64, seed: u64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        model.validate()?;
        let moments = Moments {
            weights_m: ModelGrads::zeros_like(&model),
            weights_v: ModelGrads::zeros_like(&model),
            pattern_m: vec![0.0; pattern.budget()],
            pattern_v: vec![0.0; pattern.budget()],
            rho_m: 0.0,
            rho_v: 0.0,
            step_count: 0,
        };
        Ok(TrainState { pattern, model, lambda_rho: lambda.ln(), moments, epoch: 0, seed })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda_rho.exp()
    }
}

/// Per-step learning rates; a zero rate freezes its parameter group.
#[derive(Debug, Clone, Copy)]
pub struct LearningRates {
    pub weights: f64,
    pub lambda: f64,
    pub pattern: f64,
}

impl LearningRates {
    /// Crate defaults: 1e-3 for weights and lambda, 1e-4 of the nominal PRI
    /// for the pattern positions.
    pub fn defaults(params: &SarParams) -> Self {
        LearningRates { weights: 1e-3, lambda: 1e-3, pattern: 1e-4 * params.nominal_pri() }
    }
}

/// Gradients of the loss with respect to every trainable parameter.
#[derive(Debug, Clone)]
pub struct GradBundle {
    pub d_pattern: Array1<f64>,
    pub d_weights: ModelGrads,
    /// Gradient with respect to lambda itself (not rho).
    pub d_lambda: f64,
}

impl GradBundle {
    pub fn is_finite(&self) -> bool {
        self.d_lambda.is_finite()
            && self.d_pattern.iter().all(|v| v.is_finite())
            && self
                .d_weights
                .layers
                .iter()
                .all(|l| l.d_weights.iter().all(|v| v.is_finite()) && l.d_bias.iter().all(|v| v.is_finite()))
    }
}

/// One loss-history row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub sample_index: usize,
    pub loss: f64,
}

/// Squared Frobenius distance summed over real and imaginary parts; batch
/// averaging is the caller's business.
pub fn mse_loss(reconstruction: &ReflectivityMap, target: &ReflectivityMap) -> Result<f64> {
    if reconstruction.data.dim() != target.data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "mse_loss: {:?} vs {:?}",
            reconstruction.data.dim(),
            target.data.dim()
        )));
    }
    Ok(reconstruction
        .data
        .iter()
        .zip(target.data.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum())
}

fn re_inner(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Backpropagate a loss gradient through a converged data-consistency solve:
/// the Jacobian of `(H H* + lambda I)^{-1}` is itself, so the result is one
/// more CG solve applied to the upstream gradient.
pub fn cg_backprop<F>(
    apply_normal: F,
    upstream: &Array2<Complex64>,
    iterations: usize,
    tol: f64,
) -> Result<Array2<Complex64>>
where
    F: FnMut(&Array2<Complex64>) -> Array2<Complex64>,
{
    cg_solve(apply_normal, upstream, iterations, tol)
}

/// Exact gradients of the denoiser's conv/ReLU/residual composition: returns
/// the per-layer weight gradients and the gradient at the input image.
pub fn denoiser_backprop(
    model: &DenoiserModel,
    input: &ReflectivityMap,
    upstream: &Array2<Complex64>,
) -> Result<(ModelGrads, Array2<Complex64>)> {
    model.validate()?;
    if input.data.dim() != upstream.dim() {
        return Err(Error::DimensionMismatch(format!(
            "denoiser_backprop: input {:?} vs upstream {:?}",
            input.data.dim(),
            upstream.dim()
        )));
    }
    let x0 = complex_to_channels(&input.data);
    let (_, cache) = forward_network(model, &x0);
    let g_out = complex_to_channels(upstream);
    if model.residual {
        let d_net = g_out.mapv(|v| -v);
        let (grads, g_net_in) = backward_network(model, &cache, &d_net);
        let g_input = &g_out + &g_net_in;
        Ok((grads, channels_to_complex(&g_input)))
    } else {
        let (grads, g_net_in) = backward_network(model, &cache, &g_out);
        Ok((grads, channels_to_complex(&g_net_in)))
    }
}

/// Accumulate the loss gradient with respect to every sample time over the
/// recorded nonuniform-transform applications.
pub fn pattern_gradient(plan: &NuftPlan, events: &[NuftEvent]) -> Result<Array1<f64>> {
    let mut grad = Array1::zeros(plan.sample_count());
    for event in events {
        let term = match event.kind {
            NuftKind::Forward => nuft_forward_position_grad(plan, &event.input, &event.upstream)?,
            NuftKind::Inverse => nuift_inverse_position_grad(plan, &event.input, &event.upstream)?,
        };
        grad += &term;
    }
    Ok(grad)
}

struct ModlStates {
    b0: Array2<Complex64>,
    sigmas: Vec<Array2<Complex64>>,
    zs: Vec<Array2<Complex64>>,
}

fn modl_forward(
    setup: &TrainSetup,
    plan: &NuftPlan,
    model: &DenoiserModel,
    lambda: f64,
    echo_data: &Array2<Complex64>,
) -> Result<(ModlStates, crate::operators::ImageTape)> {
    let (b0, tape) = csa_image_raw_with_tape(&setup.filters, plan, echo_data)?;
    let mut sigmas = vec![b0.clone()];
    let mut zs = Vec::with_capacity(setup.unroll_count);
    for n in 0..setup.unroll_count {
        let stacked = complex_to_channels(&sigmas[n]);
        let (net, _) = forward_network(model, &stacked);
        let combined = if model.residual { &stacked - &net } else { net };
        let z = channels_to_complex(&combined);
        let rhs = &b0 + &z.mapv(|v| v * lambda);
        let sigma = cg_solve(
            |x| normal_apply_raw(&setup.filters, plan, lambda, x).expect("validated dims"),
            &rhs,
            setup.cg_iterations,
            setup.cg_tolerance,
        )?;
        zs.push(z);
        sigmas.push(sigma);
    }
    Ok((ModlStates { b0, sigmas, zs }, tape))
}

/// Forward + backward pass of the unrolled reconstruction for one sample.
///
/// Returns the loss, the gradients for all parameter groups, and the
/// reconstruction itself. `echo_data` must have been generated at the plan's
/// sample times; under [`PatternGradMode::WithEchoPath`] the source is
/// consulted again for the echo-generation gradient.
pub fn modl_loss_and_grads(
    setup: &TrainSetup,
    plan: &NuftPlan,
    model: &DenoiserModel,
    lambda: f64,
    echo_data: &Array2<Complex64>,
    target: &ReflectivityMap,
    source: &EchoSource,
) -> Result<(f64, GradBundle, ReflectivityMap)> {
    model.validate()?;
    let k = setup.unroll_count;
    let (states, b0_tape) = modl_forward(setup, plan, model, lambda, echo_data)?;
    let sigma_k = &states.sigmas[k];
    if sigma_k.dim() != target.data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "reconstruction {:?} vs target {:?}",
            sigma_k.dim(),
            target.data.dim()
        )));
    }
    let loss: f64 = sigma_k
        .iter()
        .zip(target.data.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();

    let mut g: Array2<Complex64> =
        ndarray::Zip::from(sigma_k).and(&target.data).map_collect(|a, b| (a - b) * 2.0);
    let mut d_weights = ModelGrads::zeros_like(model);
    let mut d_lambda = 0.0;
    let mut events: Vec<NuftEvent> = Vec::with_capacity(2 * k + 1);
    let mut g_b0: Array2<Complex64> = Array2::zeros(states.b0.dim());
    let spacings = (setup.filters.azimuth_spacing(), setup.filters.range_spacing());

    for n in (0..k).rev() {
        let u = cg_solve(
            |x| normal_apply_raw(&setup.filters, plan, lambda, x).expect("validated dims"),
            &g,
            setup.cg_iterations,
            setup.cg_tolerance,
        )?;
        // dA/dlambda = I and d(rhs)/dlambda = z_n.
        let diff = &states.zs[n] - &states.sigmas[n + 1];
        d_lambda += re_inner(&u, &diff);
        // Operator derivative: replay A at sigma_{n+1} with upstream -u.
        let minus_u = u.mapv(|z| -z);
        let (synth, inv_tape) =
            csa_inverse_raw_with_tape(&setup.filters, plan, &states.sigmas[n + 1])?;
        let (_, img_tape) = csa_image_raw_with_tape(&setup.filters, plan, &synth)?;
        let (g_echo_syn, ev_img) = csa_image_vjp(&setup.filters, plan, &img_tape, &minus_u)?;
        let (_, ev_inv) = csa_inverse_vjp(&setup.filters, plan, &inv_tape, &g_echo_syn)?;
        events.push(ev_img);
        events.push(ev_inv);
        g_b0 += &u;
        // rhs = b0 + lambda z_n: gradient into the denoiser output.
        let gz = u.mapv(|z| z * lambda);
        let input = ReflectivityMap::new(states.sigmas[n].clone(), spacings.0, spacings.1)?;
        let (grads_n, g_in) = denoiser_backprop(model, &input, &gz)?;
        d_weights.accumulate(&grads_n);
        g = g_in;
    }
    // sigma_0 = b0 feeds the first denoiser; b0 also feeds every rhs.
    g_b0 += &g;
    let (g_echo, ev_b0) = csa_image_vjp(&setup.filters, plan, &b0_tape, &g_b0)?;
    events.push(ev_b0);
    let mut d_pattern = pattern_gradient(plan, &events)?;
    if setup.grad_mode == PatternGradMode::WithEchoPath {
        d_pattern += &source.position_vjp(setup, plan, &g_echo)?;
    }
    let recon = ReflectivityMap::new(sigma_k.clone(), spacings.0, spacings.1)?;
    Ok((loss, GradBundle { d_pattern, d_weights, d_lambda }, recon))
}

fn state_diagnostic(state: &TrainState, loss: f64) -> String {
    let positions = state.pattern.positions();
    let weight_max = state
        .model
        .layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    format!(
        "loss = {loss}, lambda = {}, pattern in [{}, {}], max |weight| = {weight_max}",
        state.lambda(),
        positions.first().unwrap(),
        positions.last().unwrap()
    )
}

/// Run the joint optimization: per epoch and sample, regenerate the echo at
/// the current pattern, reconstruct, backpropagate, take an adaptive-moment
/// step on every unfrozen parameter group, and project the pattern back onto
/// its constraints. Fully deterministic.
pub fn train_joint(
    setup: &TrainSetup,
    dataset: &[TrainSample],
    state: TrainState,
    epochs: usize,
    rates: &LearningRates,
) -> Result<(TrainState, Vec<LossRecord>)> {
    if dataset.is_empty() {
        return Err(Error::InvalidParameter("dataset must be non-empty".into()));
    }
    let mut state = state;
    let mut records = Vec::with_capacity(epochs * dataset.len());
    for epoch_offset in 0..epochs {
        let epoch = state.epoch + epoch_offset;
        for (sample_index, sample) in dataset.iter().enumerate() {
            let plan = setup.plan_for(&state.pattern)?;
            let echo = sample.source.generate(setup, &plan)?;
            let lambda = state.lambda();
            let (loss, grads, _) = modl_loss_and_grads(
                setup,
                &plan,
                &state.model,
                lambda,
                &echo.data,
                &sample.target,
                &sample.source,
            )?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    sample: sample_index,
                    diagnostic: state_diagnostic(&state, loss),
                });
            }
            records.push(LossRecord { epoch, sample_index, loss });
            apply_step(&mut state, &grads, rates)?;
        }
    }
    state.epoch += epochs;
    Ok((state, records))
}

fn apply_step(state: &mut TrainState, grads: &GradBundle, rates: &LearningRates) -> Result<()> {
    let any = rates.weights > 0.0 || rates.lambda > 0.0 || rates.pattern > 0.0;
    if !any {
        return Ok(());
    }
    state.moments.step_count += 1;
    let t = state.moments.step_count;
    if rates.weights > 0.0 {
        for (li, layer) in state.model.layers.iter_mut().enumerate() {
            adam::update(
                layer.weights.as_slice_mut().expect("standard layout"),
                grads.d_weights.layers[li].d_weights.as_slice().expect("standard layout"),
                state.moments.weights_m.layers[li].d_weights.as_slice_mut().unwrap(),
                state.moments.weights_v.layers[li].d_weights.as_slice_mut().unwrap(),
                t,
                rates.weights,
            );
            adam::update(
                layer.bias.as_slice_mut().expect("standard layout"),
                grads.d_weights.layers[li].d_bias.as_slice().expect("standard layout"),
                state.moments.weights_m.layers[li].d_bias.as_slice_mut().unwrap(),
                state.moments.weights_v.layers[li].d_bias.as_slice_mut().unwrap(),
                t,
                rates.weights,
            );
        }
    }
    if rates.lambda > 0.0 {
        // Chain rule through lambda = exp(rho).
        let g_rho = grads.d_lambda * state.lambda();
        let mut rho = [state.lambda_rho];
        let mut m = [state.moments.rho_m];
        let mut v = [state.moments.rho_v];
        adam::update(&mut rho, &[g_rho], &mut m, &mut v, t, rates.lambda);
        state.lambda_rho = rho[0];
        state.moments.rho_m = m[0];
        state.moments.rho_v = v[0];
    }
    if rates.pattern > 0.0 {
        let mut positions = state.pattern.positions().to_vec();
        let grad: Vec<f64> = grads.d_pattern.iter().cloned().collect();
        adam::update(
            &mut positions,
            &grad,
            &mut state.moments.pattern_m,
            &mut state.moments.pattern_v,
            t,
            rates.pattern,
        );
        state.pattern =
            project_constraints(&positions, state.pattern.aperture(), state.pattern.min_spacing())?;
    }
    Ok(())
}
