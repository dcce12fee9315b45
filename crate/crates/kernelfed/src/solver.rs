//! Projected gradient ascent on the dual of the elastic-net margin problem.
//!
//! The dual variable carries one nonnegative multiplier per training sample.
//! Each ascent step rebuilds the thresholded coefficient field at the current
//! multipliers, evaluates the margin residuals, and moves the multipliers in
//! the residual direction with projection onto the nonnegative orthant:
//!
//! `lambda(t+1) = [lambda(t) + eta * (1 - eps - y_n f(x_n)) / N]_+`
//!
//! At the optimum, complementary slackness makes the positive multipliers
//! flag exactly the samples whose margin constraints are active; those are
//! the critical samples an agent transmits.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{cross_gram, QuadratureGrid};
use crate::model::{alpha_bar, threshold, CoefficientField, Hyperparams, LabeledSample};

/// How the ascent initializes the dual variable when no explicit start is given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaInit {
    /// Every entry starts at `1 - epsilon`. Deterministic, the default.
    Uniform,
    /// Entries drawn uniformly from `(0, 1)` with the given seed.
    Seeded(u64),
}

/// Extra knobs for [`ascend_with`].
#[derive(Debug, Clone)]
pub struct AscendOptions {
    /// Explicit starting multipliers; overrides `init`.
    pub lambda0: Option<Vec<f64>>,
    pub init: LambdaInit,
    /// Record per-iteration dual value, gradient norm, and support size.
    pub record_trajectory: bool,
}

impl Default for AscendOptions {
    fn default() -> Self {
        Self { lambda0: None, init: LambdaInit::Uniform, record_trajectory: false }
    }
}

/// One row of the solver trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub dual_value: f64,
    pub grad_norm: f64,
    pub support_cells: usize,
}

/// Final multipliers plus how the ascent got there.
#[derive(Debug, Clone)]
pub struct DualState {
    pub lambda: Vec<f64>,
    pub iters_run: usize,
    pub final_grad_norm: f64,
    /// Present when trajectory recording was requested; one record per
    /// gradient evaluation, including the final state.
    pub trajectory: Option<Vec<IterationRecord>>,
}

/// Everything a solved problem produces.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub dual_state: DualState,
    /// The thresholded coefficient field at the final multipliers.
    pub alpha_star: CoefficientField,
    /// Samples with multipliers above the critical tolerance.
    pub critical_indices: Vec<usize>,
    pub dual_value: f64,
    /// Elastic net of `alpha_star`.
    pub primal_value: f64,
    /// `max_n lambda_n * |1 - eps - y_n f(x_n)|` at the final state.
    pub slackness_residual: f64,
    /// Whether the projected-gradient norm fell below `grad_tol`.
    pub converged: bool,
}

/// Numerical certificates for the convergence theory.
#[derive(Debug, Clone, Copy)]
pub struct TheoryBound {
    /// Kernel leakage across partitions: the largest kernel value between a
    /// sample and a support cell owned by a different partition.
    pub xi: f64,
    /// Smallest eigenvalue of the masked Gram matrix.
    pub mu: f64,
    /// Measure of the support of the thresholded global field.
    pub support_measure: f64,
    /// `2 xi m L / N^2`.
    pub decomposition_gap_bound: f64,
}

/// Outcome of the strong-concavity check.
#[derive(Debug, Clone, Copy)]
pub struct ConcavityCertificate {
    pub mu: f64,
    /// Set when the optimal support was empty, in which case `mu` is 0.
    pub empty_support: bool,
}

/// Default tolerance separating transmitted multipliers from projection zeros.
pub fn default_critical_tol(lambda: &[f64]) -> f64 {
    let max = lambda.iter().cloned().fold(0.0f64, f64::max);
    1e-6 * max.max(1.0)
}

/// Indices with `lambda_n > tol`.
pub fn critical_samples(result: &SolveResult, tol: f64) -> Vec<usize> {
    result
        .dual_state
        .lambda
        .iter()
        .enumerate()
        .filter(|(_, l)| **l > tol)
        .map(|(n, _)| n)
        .collect()
}

/// Precomputed kernel rows for one solve. Owned by a single solver instance.
struct Workspace<'a> {
    samples: &'a [LabeledSample],
    grid: &'a Arc<QuadratureGrid>,
    /// `n x num_cells`, row-major.
    rows: Vec<f64>,
    cells: usize,
}

impl<'a> Workspace<'a> {
    fn new(samples: &'a [LabeledSample], grid: &'a Arc<QuadratureGrid>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("solver needs at least one sample"));
        }
        let cells = grid.num_cells();
        let mut rows = vec![0.0; samples.len() * cells];
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != grid.dim() {
                return Err(Error::DimensionMismatch { expected: grid.dim(), got: s.x.len() });
            }
            grid.kernel_row_into(&s.x, &mut rows[i * cells..(i + 1) * cells]);
        }
        Ok(Self { samples, grid, rows, cells })
    }

    fn row(&self, n: usize) -> &[f64] {
        &self.rows[n * self.cells..(n + 1) * self.cells]
    }

    /// `abar_j = (1/N) sum_n lambda_n y_n k(x_n, s_j; w_j)`.
    fn alpha_bar_into(&self, lambda: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let n = self.samples.len() as f64;
        for (i, s) in self.samples.iter().enumerate() {
            let l = lambda[i];
            if l == 0.0 {
                continue;
            }
            let coeff = l * s.y / n;
            for (o, k) in out.iter_mut().zip(self.row(i)) {
                *o += coeff * k;
            }
        }
    }

    /// Thresholds `abar` in place into `astar` and returns the support indices.
    fn threshold_into(&self, abar: &[f64], gamma: f64, astar: &mut [f64], support: &mut Vec<u32>) {
        let two_gamma = 2.0 * gamma;
        support.clear();
        for (j, (&b, a)) in abar.iter().zip(astar.iter_mut()).enumerate() {
            if b * b > two_gamma {
                *a = b;
                support.push(j as u32);
            } else {
                *a = 0.0;
            }
        }
    }

    /// `f(x_n)` for every sample, given the thresholded values and support.
    fn f_values_into(&self, astar: &[f64], support: &[u32], out: &mut [f64]) {
        let cw = self.grid.cell_weight();
        if support.is_empty() {
            out.fill(0.0);
            return;
        }
        for (n, o) in out.iter_mut().enumerate() {
            let row = self.row(n);
            let mut acc = 0.0;
            for &j in support {
                let j = j as usize;
                acc += astar[j] * row[j];
            }
            *o = acc * cw;
        }
    }

    /// Dual value from the thresholded field:
    /// `sum over support of (gamma - abar^2 / 2) * cw + (1 - eps)/N * sum lambda`.
    fn dual_value_from_field(
        &self,
        lambda: &[f64],
        abar: &[f64],
        support: &[u32],
        hp: &Hyperparams,
    ) -> f64 {
        let cw = self.grid.cell_weight();
        let mut quad = 0.0;
        for &j in support {
            let b = abar[j as usize];
            quad += gamma_minus_half_sq(b, hp.gamma);
        }
        let n = self.samples.len() as f64;
        let linear = (1.0 - hp.epsilon) / n * lambda.iter().sum::<f64>();
        quad * cw + linear
    }
}

#[inline]
fn gamma_minus_half_sq(b: f64, gamma: f64) -> f64 {
    gamma - 0.5 * b * b
}

fn projected_grad_norm(lambda: &[f64], grad: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&l, &g) in lambda.iter().zip(grad.iter()) {
        if l > 0.0 || g > 0.0 {
            acc += g * g;
        }
    }
    acc.sqrt()
}

/// Gradient of the dual function: entry `n` is `(1 - eps - y_n f(x_n)) / N`
/// with `f` evaluated at the thresholded field for these multipliers.
pub fn dual_gradient(
    lambda: &[f64],
    samples: &[LabeledSample],
    grid: &Arc<QuadratureGrid>,
    hp: &Hyperparams,
) -> Result<Vec<f64>> {
    hp.validate()?;
    validate_lambda(lambda, samples.len())?;
    let ws = Workspace::new(samples, grid)?;
    let mut abar = vec![0.0; ws.cells];
    let mut astar = vec![0.0; ws.cells];
    let mut support = Vec::new();
    ws.alpha_bar_into(lambda, &mut abar);
    ws.threshold_into(&abar, hp.gamma, &mut astar, &mut support);
    let mut f = vec![0.0; samples.len()];
    ws.f_values_into(&astar, &support, &mut f);
    let n = samples.len() as f64;
    Ok(samples
        .iter()
        .zip(f.iter())
        .map(|(s, &fv)| (1.0 - hp.epsilon - s.y * fv) / n)
        .collect())
}

/// The dual function as the closed-form quadratic: the support mask is taken
/// from the thresholded field at `lambda`, the Gram matrix is assembled over
/// that mask, and the value is
/// `-lambda' Q lambda / 2 + (1-eps)/N * sum lambda + gamma * m(support)`.
pub fn dual_value(
    lambda: &[f64],
    samples: &[LabeledSample],
    grid: &Arc<QuadratureGrid>,
    hp: &Hyperparams,
) -> Result<f64> {
    hp.validate()?;
    validate_lambda(lambda, samples.len())?;
    let bar = alpha_bar(lambda, samples, grid)?;
    let star = threshold(&bar, hp.gamma);
    let mask = star.support_mask();
    let q = assemble_q(samples, grid, &mask, samples.len())?;
    let n = samples.len() as f64;
    let mut quad = 0.0;
    for i in 0..samples.len() {
        for j in 0..samples.len() {
            quad += lambda[i] * q[(i, j)] * lambda[j];
        }
    }
    let linear = (1.0 - hp.epsilon) / n * lambda.iter().sum::<f64>();
    Ok(-0.5 * quad + linear + hp.gamma * star.support_measure())
}

/// The label-signed Gram matrix over the masked cells, entrywise `cross_gram`.
pub fn assemble_q(
    samples: &[LabeledSample],
    grid: &Arc<QuadratureGrid>,
    mask: &[bool],
    n_total: usize,
) -> Result<DMatrix<f64>> {
    let n = samples.len();
    let mut q = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = cross_gram(
                &samples[i].x,
                &samples[j].x,
                samples[i].y,
                samples[j].y,
                grid,
                mask,
                n_total,
            )?;
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
    }
    Ok(q)
}

fn validate_lambda(lambda: &[f64], n: usize) -> Result<()> {
    if lambda.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: lambda.len() });
    }
    if let Some(bad) = lambda.iter().find(|l| **l < 0.0 || !l.is_finite()) {
        return Err(Error::invalid(format!("dual variables must be nonnegative, got {bad}")));
    }
    Ok(())
}

/// Runs projected gradient ascent with default options.
pub fn ascend(
    samples: &[LabeledSample],
    grid: &Arc<QuadratureGrid>,
    hp: &Hyperparams,
) -> Result<SolveResult> {
    ascend_with(samples, grid, hp, &AscendOptions::default())
}

/// Runs at most `max_iters` projected ascent steps, stopping early when the
/// projected-gradient norm (full gradient on entries with `lambda_n > 0`,
/// positive part elsewhere) falls below `grad_tol`.
pub fn ascend_with(
    samples: &[LabeledSample],
    grid: &Arc<QuadratureGrid>,
    hp: &Hyperparams,
    opts: &AscendOptions,
) -> Result<SolveResult> {
    hp.validate()?;
    let ws = Workspace::new(samples, grid)?;
    let n = samples.len();

    let mut lambda = match &opts.lambda0 {
        Some(l0) => {
            validate_lambda(l0, n)?;
            l0.clone()
        }
        None => match opts.init {
            LambdaInit::Uniform => vec![1.0 - hp.epsilon; n],
            LambdaInit::Seeded(seed) => {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| rng.random::<f64>()).collect()
            }
        },
    };

    let mut abar = vec![0.0; ws.cells];
    let mut astar = vec![0.0; ws.cells];
    let mut support: Vec<u32> = Vec::new();
    let mut f = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut trajectory = opts.record_trajectory.then(Vec::new);

    let mut iters_run = 0usize;
    let mut converged = false;
    let mut final_grad_norm;

    loop {
        ws.alpha_bar_into(&lambda, &mut abar);
        ws.threshold_into(&abar, hp.gamma, &mut astar, &mut support);
        ws.f_values_into(&astar, &support, &mut f);
        let nf = n as f64;
        for ((g, s), &fv) in grad.iter_mut().zip(samples.iter()).zip(f.iter()) {
            *g = (1.0 - hp.epsilon - s.y * fv) / nf;
        }
        let pg = projected_grad_norm(&lambda, &grad);
        if let Some(tr) = trajectory.as_mut() {
            tr.push(IterationRecord {
                iteration: iters_run,
                dual_value: ws.dual_value_from_field(&lambda, &abar, &support, hp),
                grad_norm: pg,
                support_cells: support.len(),
            });
        }
        if !pg.is_finite() {
            return Err(Error::SolverDiverged {
                iteration: iters_run,
                detail: "gradient norm is not finite".into(),
            });
        }
        final_grad_norm = pg;
        if pg < hp.grad_tol {
            converged = true;
            break;
        }
        if iters_run >= hp.max_iters {
            break;
        }
        for (l, &g) in lambda.iter_mut().zip(grad.iter()) {
            *l = (*l + hp.eta * g).max(0.0);
        }
        iters_run += 1;
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::SolverDiverged {
                iteration: iters_run,
                detail: "dual variable is not finite".into(),
            });
        }
    }

    // The loop leaves abar/astar/f/grad evaluated at the final lambda.
    let alpha_star = CoefficientField::new(grid.clone(), astar.clone())?;
    let dual = ws.dual_value_from_field(&lambda, &abar, &support, hp);
    let primal = alpha_star.elastic_net(hp.gamma);
    let slackness = lambda
        .iter()
        .zip(samples.iter())
        .zip(f.iter())
        .map(|((&l, s), &fv)| l * (1.0 - hp.epsilon - s.y * fv).abs())
        .fold(0.0f64, f64::max);
    let tol = default_critical_tol(&lambda);
    let state = DualState { lambda, iters_run, final_grad_norm, trajectory };
    let critical = state
        .lambda
        .iter()
        .enumerate()
        .filter(|(_, l)| **l > tol)
        .map(|(i, _)| i)
        .collect();

    Ok(SolveResult {
        dual_state: state,
        alpha_star,
        critical_indices: critical,
        dual_value: dual,
        primal_value: primal,
        slackness_residual: slackness,
        converged,
    })
}

/// Smallest eigenvalue of the Gram matrix over the optimal support.
pub fn strong_concavity_certificate(
    result: &SolveResult,
    samples: &[LabeledSample],
    grid: &Arc<QuadratureGrid>,
    _hp: &Hyperparams,
) -> Result<ConcavityCertificate> {
    let mask = result.alpha_star.support_mask();
    if !mask.iter().any(|&m| m) {
        return Ok(ConcavityCertificate { mu: 0.0, empty_support: true });
    }
    let q = assemble_q(samples, grid, &mask, samples.len())?;
    let eig = q.symmetric_eigen();
    let mu = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(ConcavityCertificate { mu, empty_support: false })
}

/// Global dual variable in the weighting used by the decomposition bound:
/// the block for agent `i` is `(N / N_i) * lambda_i`.
pub fn decomposition_lambda(agent_lambdas: &[&[f64]]) -> Vec<f64> {
    let n_total: usize = agent_lambdas.iter().map(|l| l.len()).sum();
    let mut out = Vec::with_capacity(n_total);
    for lam in agent_lambdas {
        let scale = n_total as f64 / lam.len() as f64;
        out.extend(lam.iter().map(|&v| scale * v));
    }
    out
}

/// Measured decomposition gap `|g(lambda) - sum_i g_i(lambda_i)|` together
/// with the bound `2 xi m L / N^2`.
///
/// `agent_boxes` gives each agent's subspace as `(lo, hi)`; this is the
/// partition metadata used to attribute support cells and compute the
/// leakage constant `xi`.
pub fn decomposition_gap(
    agent_results: &[SolveResult],
    agent_samples: &[Vec<LabeledSample>],
    agent_boxes: &[(Vec<f64>, Vec<f64>)],
    global_lambda: &[f64],
    grid: &Arc<QuadratureGrid>,
    hp: &Hyperparams,
) -> Result<(f64, TheoryBound)> {
    let k = agent_results.len();
    if k == 0 {
        return Err(Error::invalid("decomposition gap needs at least one agent"));
    }
    if agent_samples.len() != k || agent_boxes.len() != k {
        return Err(Error::invalid(
            "partition metadata missing: agent results, samples, and boxes must align",
        ));
    }
    let all_samples: Vec<LabeledSample> =
        agent_samples.iter().flat_map(|s| s.iter().cloned()).collect();
    let n_total = all_samples.len();
    if global_lambda.len() != n_total {
        return Err(Error::DimensionMismatch { expected: n_total, got: global_lambda.len() });
    }

    let g_global = dual_value(global_lambda, &all_samples, grid, hp)?;
    let mut g_sum = 0.0;
    for (res, samples) in agent_results.iter().zip(agent_samples.iter()) {
        g_sum += dual_value(&res.dual_state.lambda, samples, grid, hp)?;
    }
    let gap = (g_global - g_sum).abs();

    // Support of the global thresholded field at the assembled multipliers.
    let bar = alpha_bar(global_lambda, &all_samples, grid)?;
    let star = threshold(&bar, hp.gamma);
    let support_measure = star.support_measure();
    let mask = star.support_mask();

    // xi: largest kernel value between a sample and a support cell owned by
    // another partition. A cell belongs to the first box containing its
    // center, or the nearest box when none contains it.
    let owner_of = |s: &[f64]| -> usize {
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for (i, (lo, hi)) in agent_boxes.iter().enumerate() {
            let mut dist2 = 0.0;
            for d in 0..s.len() {
                let v = s[d].clamp(lo[d], hi[d]) - s[d];
                dist2 += v * v;
            }
            if dist2 == 0.0 {
                return i;
            }
            if dist2 < best_dist {
                best_dist = dist2;
                best = i;
            }
        }
        best
    };
    let mut xi = 0.0f64;
    for (j, &on) in mask.iter().enumerate() {
        if !on {
            continue;
        }
        let owner = owner_of(grid.center(j));
        for (i, samples) in agent_samples.iter().enumerate() {
            if i == owner {
                continue;
            }
            for s in samples {
                let v = crate::grid::gaussian(&s.x, grid.center(j), grid.cell_width(j));
                xi = xi.max(v);
            }
        }
    }

    // L = sum over ordered pairs i != j of (N^2 / (N_i N_j)) lambda_i' J lambda_j.
    let sums: Vec<f64> =
        agent_results.iter().map(|r| r.dual_state.lambda.iter().sum::<f64>()).collect();
    let sizes: Vec<f64> = agent_samples.iter().map(|s| s.len() as f64).collect();
    let nf = n_total as f64;
    let mut l_term = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                l_term += nf * nf / (sizes[i] * sizes[j]) * sums[i] * sums[j];
            }
        }
    }
    let bound = 2.0 * xi * support_measure * l_term / (nf * nf);

    let q = assemble_q(&all_samples, grid, &mask, n_total)?;
    let mu = if mask.iter().any(|&m| m) {
        q.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };

    Ok((gap, TheoryBound { xi, mu, support_measure, decomposition_gap_bound: bound }))
}

/// Writes a recorded trajectory as CSV: iteration, dual value, gradient norm,
/// support cell count.
pub fn write_trace_csv<W: Write>(trace: &[IterationRecord], mut out: W) -> Result<()> {
    writeln!(out, "iteration,dual_value,grad_norm,support_cells")?;
    for r in trace {
        writeln!(out, "{},{},{},{}", r.iteration, r.dual_value, r.grad_norm, r.support_cells)?;
    }
    Ok(())
}
