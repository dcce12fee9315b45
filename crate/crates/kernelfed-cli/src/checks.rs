//! Numerical validation of the optimality theory: complementary slackness,
//! gradient correctness, critical-sample redundancy, the dual decomposition
//! bound, weak duality, and the thresholding law. The `check` subcommand and
//! the acceptance suite both run these.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use kernelfed::datasets::{generate_synthetic, SyntheticSpec};
use kernelfed::grid::{KernelFamily, QuadratureGrid};
use kernelfed::model::alpha_bar;
use kernelfed::solver::{
    ascend, ascend_with, assemble_q, decomposition_gap, decomposition_lambda, dual_gradient,
    dual_value, AscendOptions, SolveResult,
};
use kernelfed::{Error, Hyperparams, LabeledSample, Result};

/// Outcome of one validation check.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the check's metric.
    pub worst: f64,
    pub detail: String,
}

impl CheckReport {
    pub fn line(&self) -> String {
        format!(
            "{}: {} ({})",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

/// Step size safely below the curvature of the dual: `0.9 / max row sum` of
/// the full-support Gram matrix, which dominates every masked Gram.
fn safe_eta(samples: &[LabeledSample], grid: &Arc<QuadratureGrid>) -> Result<f64> {
    let full = vec![true; grid.num_cells()];
    let q = assemble_q(samples, grid, &full, samples.len())?;
    let n = samples.len();
    let bound = (0..n)
        .map(|i| (0..n).map(|j| q[(i, j)].abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    Ok((0.9 / bound).min(50.0))
}

/// A feasible one-dimensional two-cluster instance: negative samples around
/// `-c`, positive around `+c`, with a clear margin between the classes.
fn cluster_instance(
    rng: &mut ChaCha8Rng,
    n_total: usize,
    gamma: f64,
) -> Result<(Vec<LabeledSample>, Arc<QuadratureGrid>, Hyperparams)> {
    let c = rng.random_range(2.5..4.0);
    let n_left = (n_total / 2).max(1);
    let mut samples = Vec::with_capacity(n_total);
    for _ in 0..n_left {
        samples.push(LabeledSample::new(vec![-c + rng.random_range(-1.0..1.0)], -1.0)?);
    }
    for _ in 0..n_total - n_left {
        samples.push(LabeledSample::new(vec![c + rng.random_range(-1.0..1.0)], 1.0)?);
    }
    let family = KernelFamily::new(vec![1.0])?;
    let grid =
        Arc::new(QuadratureGrid::new(vec![-c - 4.0], vec![c + 4.0], 96, family)?);
    let eta = safe_eta(&samples, &grid)?;
    let hp = Hyperparams::new(gamma, 0.1, eta, 400_000, 1e-11)?;
    Ok((samples, grid, hp))
}

/// Complementary slackness `max_n lambda_n |1 - eps - y_n f(x_n)| <= 1e-3`
/// on every converged run of a mixed family of instances.
pub fn check_slackness(seed: u64, instances: usize) -> Result<CheckReport> {
    let outcomes: Vec<Result<(bool, f64)>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            if i % 4 == 3 {
                // Small two-dimensional synthetic task.
                let mut spec = SyntheticSpec::with_defaults(24, seed.wrapping_add(1000 + i as u64));
                spec.test_n = 10;
                let ds = generate_synthetic(&spec)?;
                let all = ds.all_samples();
                let family = KernelFamily::new(vec![2.0, 4.0])?;
                let grid = Arc::new(QuadratureGrid::from_point_cloud(
                    all.iter().map(|s| s.x.as_slice()),
                    12,
                    family,
                )?);
                let eta = safe_eta(&all, &grid)?;
                let hp = Hyperparams::new(0.0, 0.1, eta, 400_000, 1e-9)?;
                let res = ascend(&all, &grid, &hp)?;
                Ok((res.converged, res.slackness_residual))
            } else {
                let gamma = [0.0, 1e-4, 1e-3][i % 3];
                let n = rng.random_range(4..=16);
                let (samples, grid, hp) = cluster_instance(&mut rng, n, gamma)?;
                let res = ascend(&samples, &grid, &hp)?;
                Ok((res.converged, res.slackness_residual))
            }
        })
        .collect();

    let mut worst = 0.0f64;
    let mut converged_runs = 0usize;
    for o in outcomes {
        let (converged, slack) = o?;
        if converged {
            converged_runs += 1;
            worst = worst.max(slack);
        }
    }
    let passed = converged_runs >= instances / 2 && worst <= 1e-3;
    Ok(CheckReport {
        name: "complementary-slackness",
        passed,
        worst,
        detail: format!("{converged_runs}/{instances} runs converged, max residual {worst:.3e}"),
    })
}

/// Central finite differences of the dual value against the analytic
/// gradient, entrywise within 1e-4, on random configurations that keep every
/// cell away from the thresholding boundary.
pub fn check_gradient_fd(seed: u64, points: usize) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delta = 1e-5;
    let mut accepted = 0usize;
    let mut worst = 0.0f64;
    let mut attempts = 0usize;
    while accepted < points {
        attempts += 1;
        if attempts > points * 50 {
            return Err(Error::invalid(
                "could not find enough boundary-free configurations",
            ));
        }
        let n = rng.random_range(3..=6);
        let gamma = [0.0, 0.01, 0.05][attempts % 3];
        let samples: Vec<LabeledSample> = (0..n)
            .map(|_| {
                LabeledSample::new(
                    vec![rng.random_range(-2.5..2.5)],
                    if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                )
            })
            .collect::<Result<_>>()?;
        let family = KernelFamily::new(vec![rng.random_range(0.7..1.4)])?;
        let grid = Arc::new(QuadratureGrid::new(vec![-6.0], vec![6.0], 64, family)?);
        let hp = Hyperparams::new(gamma, 0.1, 0.1, 10, 1e-8)?;
        let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..4.0)).collect();

        // Skip configurations with any cell near the threshold boundary:
        // a perturbation of size delta/N must not flip the support.
        let bar = alpha_bar(&lambda, &samples, &grid)?;
        if bar.values().iter().any(|&b| (b * b - 2.0 * gamma).abs() < 1e-5) {
            continue;
        }

        let analytic = dual_gradient(&lambda, &samples, &grid, &hp)?;
        for i in 0..n {
            let mut plus = lambda.clone();
            plus[i] += delta;
            let mut minus = lambda.clone();
            minus[i] -= delta;
            let fd = (dual_value(&plus, &samples, &grid, &hp)?
                - dual_value(&minus, &samples, &grid, &hp)?)
                / (2.0 * delta);
            worst = worst.max((fd - analytic[i]).abs());
        }
        accepted += 1;
    }
    Ok(CheckReport {
        name: "gradient-fd",
        passed: worst <= 1e-4,
        worst,
        detail: format!("{accepted} configurations, max entrywise deviation {worst:.3e}"),
    })
}

/// Deleting any single non-critical sample and re-solving must leave the
/// thresholded field unchanged within 1e-6 cellwise.
pub fn check_prop2(seed: u64, instances: usize) -> Result<CheckReport> {
    let outcomes: Vec<Result<f64>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7919 * i as u64));
            let gamma = [0.0, 0.0, 1e-4, 1e-3][i % 4];
            let n = rng.random_range(5..=20);
            let (samples, grid, hp) = cluster_instance(&mut rng, n, gamma)?;
            let base = ascend(&samples, &grid, &hp)?;
            if !base.converged {
                return Err(Error::invalid(format!("instance {i} did not converge")));
            }
            let critical: std::collections::HashSet<usize> =
                base.critical_indices.iter().cloned().collect();
            let mut worst = 0.0f64;
            for n_out in 0..samples.len() {
                if critical.contains(&n_out) {
                    continue;
                }
                let reduced: Vec<LabeledSample> = samples
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != n_out)
                    .map(|(_, s)| s.clone())
                    .collect();
                let again = ascend(&reduced, &grid, &hp)?;
                if !again.converged {
                    return Err(Error::invalid(format!(
                        "instance {i} re-solve without sample {n_out} did not converge"
                    )));
                }
                let diff = base
                    .alpha_star
                    .values()
                    .iter()
                    .zip(again.alpha_star.values())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                worst = worst.max(diff);
            }
            Ok(worst)
        })
        .collect();

    let mut worst = 0.0f64;
    for o in outcomes {
        worst = worst.max(o?);
    }
    Ok(CheckReport {
        name: "critical-sample-redundancy",
        passed: worst <= 1e-6,
        worst,
        detail: format!("{instances} instances, max cellwise field change {worst:.3e}"),
    })
}

/// Measured `|g(lambda) - sum_i g_i(lambda_i)|` against the decomposition
/// bound on far-separated two-agent instances.
pub fn check_lemma3(seed: u64, instances: usize) -> Result<CheckReport> {
    let outcomes: Vec<Result<(f64, f64)>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(104729 * i as u64));
            let gamma = [0.0, 1e-3][i % 2];
            // Separation of at least ten kernel widths (w = 1).
            let separation = 10.0 + rng.random_range(0.0..3.0);
            let cluster = |center: f64, count: usize, rng: &mut ChaCha8Rng| {
                (0..count)
                    .map(|_| {
                        let mag = rng.random_range(0.5..1.5);
                        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                        LabeledSample::new(vec![center + side * mag], side)
                    })
                    .collect::<Result<Vec<_>>>()
            };
            let left = cluster(0.0, rng.random_range(3..=6), &mut rng)?;
            let right = cluster(separation, rng.random_range(3..=6), &mut rng)?;
            let family = KernelFamily::new(vec![1.0])?;
            let grid = Arc::new(QuadratureGrid::new(
                vec![-4.0],
                vec![separation + 4.0],
                (16.0 * (separation + 8.0)) as usize / 2,
                family,
            )?);
            // Each agent solves its own subproblem, whose Gram scales with
            // 1/N_i^2; both step sizes must be safe.
            let eta = safe_eta(&left, &grid)?.min(safe_eta(&right, &grid)?);
            let hp = Hyperparams::new(gamma, 0.1, eta, 400_000, 1e-11)?;
            let r1 = ascend(&left, &grid, &hp)?;
            let r2 = ascend(&right, &grid, &hp)?;
            if !(r1.converged && r2.converged) {
                return Err(Error::invalid(format!("lemma3 instance {i} did not converge")));
            }
            let lam = decomposition_lambda(&[
                &r1.dual_state.lambda,
                &r2.dual_state.lambda,
            ]);
            let boxes = vec![
                (vec![-4.0], vec![separation / 2.0]),
                (vec![separation / 2.0], vec![separation + 4.0]),
            ];
            let (gap, bound) = decomposition_gap(
                &[r1, r2],
                &[left, right],
                &boxes,
                &lam,
                &grid,
                &hp,
            )?;
            Ok((gap, bound.decomposition_gap_bound))
        })
        .collect();

    let mut worst_ratio = 0.0f64;
    let mut all_within = true;
    for o in outcomes {
        let (gap, bound) = o?;
        all_within &= gap <= bound;
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(gap / bound);
        } else {
            all_within &= gap == 0.0;
        }
    }
    Ok(CheckReport {
        name: "decomposition-bound",
        passed: all_within,
        worst: worst_ratio,
        detail: format!("{instances} instances, worst gap/bound ratio {worst_ratio:.3e}"),
    })
}

/// Every dual iterate sits below the elastic net of the final thresholded
/// field (verified feasible) plus 1e-6, across a family of recorded runs.
pub fn check_weak_duality(seed: u64, instances: usize) -> Result<CheckReport> {
    let outcomes: Vec<Result<f64>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(31 * i as u64));
            let gamma = [0.0, 1e-4, 1e-3][i % 3];
            let n = rng.random_range(4..=14);
            let (samples, grid, hp) = cluster_instance(&mut rng, n, gamma)?;
            let opts = AscendOptions { record_trajectory: true, ..Default::default() };
            let res = ascend_with(&samples, &grid, &hp, &opts)?;
            if !res.converged {
                return Err(Error::invalid(format!("weak-duality instance {i} did not converge")));
            }
            // The final thresholded field must be primal feasible before it
            // can cap the dual.
            for s in &samples {
                let f = res.alpha_star.evaluate(&s.x)?;
                if s.y * f < 1.0 - hp.epsilon - 1e-7 {
                    return Err(Error::invalid(format!(
                        "instance {i}: final field infeasible, margin {}",
                        s.y * f
                    )));
                }
            }
            let cap = res.primal_value;
            let worst = res
                .dual_state
                .trajectory
                .as_ref()
                .expect("trajectory recorded")
                .iter()
                .map(|r| r.dual_value - cap)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(worst)
        })
        .collect();

    let mut worst = f64::NEG_INFINITY;
    for o in outcomes {
        worst = worst.max(o?);
    }
    Ok(CheckReport {
        name: "weak-duality",
        passed: worst <= 1e-6,
        worst,
        detail: format!(
            "{instances} recorded runs, max dual-minus-primal excess {worst:.3e}"
        ),
    })
}

/// Every nonzero cell of every emitted thresholded field satisfies
/// `value^2 > 2 gamma`, across solves at several sparsity levels.
pub fn check_threshold_law(seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked_fields = 0usize;
    let mut nonzero_cells = 0usize;

    let mut verify = |res: &SolveResult, gamma: f64| -> Result<()> {
        for &v in res.alpha_star.values() {
            if v != 0.0 {
                nonzero_cells += 1;
                if !(v * v > 2.0 * gamma) {
                    return Err(Error::invalid(format!(
                        "thresholding law violated: value {v} at gamma {gamma}"
                    )));
                }
            }
        }
        checked_fields += 1;
        Ok(())
    };

    for gamma in [0.0, 1e-4, 0.01, 1.0, 25.0, 200.0] {
        let n = rng.random_range(6..=16);
        let (samples, grid, hp_base) = cluster_instance(&mut rng, n, gamma)?;
        let hp = Hyperparams::new(gamma, hp_base.epsilon, hp_base.eta, 20_000, 1e-9)?;
        let res = ascend(&samples, &grid, &hp)?;
        verify(&res, gamma)?;
    }
    // A couple of two-dimensional synthetic solves.
    for gamma in [0.0, 25.0] {
        let mut spec = SyntheticSpec::with_defaults(40, seed.wrapping_add(5));
        spec.test_n = 10;
        let ds = generate_synthetic(&spec)?;
        let all = ds.all_samples();
        let family = KernelFamily::new(vec![1.5, 3.0])?;
        let grid = Arc::new(QuadratureGrid::from_point_cloud(
            all.iter().map(|s| s.x.as_slice()),
            14,
            family,
        )?);
        let hp = Hyperparams::new(gamma, 0.01, 0.5, 2000, 1e-8)?;
        let res = ascend(&all, &grid, &hp)?;
        verify(&res, gamma)?;
    }

    Ok(CheckReport {
        name: "thresholding-law",
        passed: true,
        worst: 0.0,
        detail: format!(
            "{checked_fields} fields checked, {nonzero_cells} nonzero cells all strict"
        ),
    })
}

/// Runs the whole suite. `quick` shrinks the instance counts.
pub fn run_all(seed: u64, quick: bool) -> Result<Vec<CheckReport>> {
    let (slack_n, fd_n, prop2_n, lemma3_n, weak_n) =
        if quick { (4, 20, 8, 5, 4) } else { (10, 100, 50, 20, 9) };
    Ok(vec![
        check_slackness(seed, slack_n)?,
        check_gradient_fd(seed, fd_n)?,
        check_prop2(seed, prop2_n)?,
        check_lemma3(seed, lemma3_n)?,
        check_weak_duality(seed, weak_n)?,
        check_threshold_law(seed)?,
    ])
}
