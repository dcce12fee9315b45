//! Coefficient-function models over the quadrature grid.
//!
//! A classifier is a coefficient field `alpha(s, w)` on the grid; its
//! decision function is the quadrature sum `f(x) = sum_j alpha_j k(x, s_j; w_j) dw`.
//! Sparsity comes from hard thresholding: a cell survives only when its
//! smoothed value satisfies `alpha_bar^2 > 2 gamma`.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{KernelFamily, QuadratureGrid};

/// A feature vector with its binary class label in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl LabeledSample {
    pub fn new(x: Vec<f64>, y: f64) -> Result<Self> {
        if y != 1.0 && y != -1.0 {
            return Err(Error::invalid(format!("label must be -1 or +1, got {y}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("features must be finite"));
        }
        Ok(Self { x, y })
    }
}

/// Solver hyperparameters shared by the agent, server, and centralized problems.
///
/// Note that large `gamma` shrinks the support of the thresholded field and
/// with it the strong-concavity parameter of the dual, so ascent needs more
/// iterations to make progress.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Hyperparams {
    /// Sparsity weight of the elastic-net objective, `>= 0`.
    pub gamma: f64,
    /// Margin slack in `[0, 1]`; constraints read `y f(x) >= 1 - epsilon`.
    pub epsilon: f64,
    /// Ascent step size, `> 0`.
    pub eta: f64,
    /// Iteration cap `T >= 1`.
    pub max_iters: usize,
    /// Early-stop threshold on the projected-gradient norm.
    pub grad_tol: f64,
}

impl Hyperparams {
    pub fn new(
        gamma: f64,
        epsilon: f64,
        eta: f64,
        max_iters: usize,
        grad_tol: f64,
    ) -> Result<Self> {
        let hp = Self { gamma, epsilon, eta, max_iters, grad_tol };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid(format!("eta must be positive, got {}", self.eta)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::invalid(format!(
                "grad_tol must be positive, got {}",
                self.grad_tol
            )));
        }
        Ok(())
    }
}

/// Values of the coefficient function on the grid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    grid: Arc<QuadratureGrid>,
    values: Vec<f64>,
}

impl CoefficientField {
    pub fn new(grid: Arc<QuadratureGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.num_cells(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zero(grid: Arc<QuadratureGrid>) -> Self {
        let n = grid.num_cells();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of nonzero cells; the representation cost of the model.
    pub fn support_cells(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    /// Measure of the support: cell weight times nonzero-cell count.
    pub fn support_measure(&self) -> f64 {
        self.grid.cell_weight() * self.support_cells() as f64
    }

    pub fn support_mask(&self) -> Vec<bool> {
        self.values.iter().map(|v| *v != 0.0).collect()
    }

    /// The decision function `f(x)`: quadrature of `alpha(s,w) k(x,s;w)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.grid.dim() {
            return Err(Error::DimensionMismatch { expected: self.grid.dim(), got: x.len() });
        }
        let mut acc = 0.0;
        for (j, &v) in self.values.iter().enumerate() {
            if v != 0.0 {
                acc += v * crate::grid::gaussian(x, self.grid.center(j), self.grid.cell_width(j));
            }
        }
        Ok(acc * self.grid.cell_weight())
    }

    /// Class prediction by the sign of `f(x)`; ties at zero go to `+1`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(if self.evaluate(x)? >= 0.0 { 1.0 } else { -1.0 })
    }

    /// Fraction of samples whose label matches the prediction.
    pub fn accuracy(&self, samples: &[LabeledSample]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::invalid("accuracy over an empty sample set"));
        }
        let mut hits = 0usize;
        for s in samples {
            if self.predict(&s.x)? == s.y {
                hits += 1;
            }
        }
        Ok(hits as f64 / samples.len() as f64)
    }

    /// Elastic-net objective `integral of alpha^2 / 2 + gamma * [alpha != 0]`.
    pub fn elastic_net(&self, gamma: f64) -> f64 {
        let mut acc = 0.0;
        for &v in &self.values {
            if v != 0.0 {
                acc += 0.5 * v * v + gamma;
            }
        }
        acc * self.grid.cell_weight()
    }
}

/// The smoothed coefficient field `alpha_bar(s,w) = (1/N) sum_n lambda_n y_n k(x_n, s; w)`.
pub fn alpha_bar(
    lambda: &[f64],
    samples: &[LabeledSample],
    grid: &Arc<QuadratureGrid>,
) -> Result<CoefficientField> {
    if lambda.len() != samples.len() {
        return Err(Error::DimensionMismatch { expected: samples.len(), got: lambda.len() });
    }
    if samples.is_empty() {
        return Err(Error::invalid("alpha_bar needs at least one sample"));
    }
    if let Some(bad) = lambda.iter().find(|l| **l < 0.0 || !l.is_finite()) {
        return Err(Error::invalid(format!("dual variables must be nonnegative, got {bad}")));
    }
    let n = samples.len() as f64;
    let mut values = vec![0.0; grid.num_cells()];
    let mut row = vec![0.0; grid.num_cells()];
    for (s, &l) in samples.iter().zip(lambda.iter()) {
        if s.x.len() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), got: s.x.len() });
        }
        if l == 0.0 {
            continue;
        }
        grid.kernel_row_into(&s.x, &mut row);
        let coeff = l * s.y / n;
        for (v, k) in values.iter_mut().zip(row.iter()) {
            *v += coeff * k;
        }
    }
    CoefficientField::new(grid.clone(), values)
}

/// Hard thresholding: keep `alpha_bar` where `alpha_bar^2 > 2 gamma`, else zero.
///
/// The inequality is strict, so a value sitting exactly on the boundary maps
/// to zero.
pub fn threshold(bar: &CoefficientField, gamma: f64) -> CoefficientField {
    let two_gamma = 2.0 * gamma;
    let values =
        bar.values.iter().map(|&v| if v * v > two_gamma { v } else { 0.0 }).collect();
    CoefficientField { grid: bar.grid.clone(), values }
}

// --- flat text serialization ---------------------------------------------
//
// One header line carrying the grid parameters, then one line per nonzero
// cell: the cell's center coordinates, its width, and the value. Floats are
// printed with Rust's shortest round-trip formatting, so save followed by
// load reproduces every bit.

const MODEL_MAGIC: &str = "kernelfed-model";

fn join_floats(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad float '{t}' in model header")))
        })
        .collect()
}

impl CoefficientField {
    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        let g = &self.grid;
        writeln!(
            out,
            "{MODEL_MAGIC} v1 dim={} res={} lo={} hi={} widths={}",
            g.dim(),
            g.resolution(),
            join_floats(g.box_lo()),
            join_floats(g.box_hi()),
            join_floats(g.family().widths()),
        )?;
        for (j, &v) in self.values.iter().enumerate() {
            if v != 0.0 {
                let center = join_floats(g.center(j)).replace(',', " ");
                writeln!(out, "{center} {} {}", g.cell_width(j), v)?;
            }
        }
        Ok(())
    }

    pub fn load<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, detail: "empty model file".into() })??;
        let mut dim = None;
        let mut res = None;
        let mut lo = None;
        let mut hi = None;
        let mut widths = None;
        let mut tokens = header.split_whitespace();
        if tokens.next() != Some(MODEL_MAGIC) {
            return Err(Error::Parse { line: 1, detail: "not a kernelfed model file".into() });
        }
        for tok in tokens {
            if let Some((key, val)) = tok.split_once('=') {
                match key {
                    "dim" => dim = val.parse::<usize>().ok(),
                    "res" => res = val.parse::<usize>().ok(),
                    "lo" => lo = Some(parse_floats(val)?),
                    "hi" => hi = Some(parse_floats(val)?),
                    "widths" => widths = Some(parse_floats(val)?),
                    _ => {}
                }
            }
        }
        let (dim, res, lo, hi, widths) = match (dim, res, lo, hi, widths) {
            (Some(d), Some(r), Some(lo), Some(hi), Some(w)) => (d, r, lo, hi, w),
            _ => {
                return Err(Error::Parse { line: 1, detail: "incomplete model header".into() })
            }
        };
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::Parse { line: 1, detail: "header box/dim mismatch".into() });
        }
        let grid = Arc::new(QuadratureGrid::new(lo, hi, res, KernelFamily::new(widths)?)?);
        let mut values = vec![0.0; grid.num_cells()];

        let spacings: Vec<f64> = (0..dim)
            .map(|d| (grid.box_hi()[d] - grid.box_lo()[d]) / res as f64)
            .collect();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != dim + 2 {
                return Err(Error::Parse {
                    line: lineno + 2,
                    detail: format!("expected {} fields, got {}", dim + 2, toks.len()),
                });
            }
            let nums: Vec<f64> = toks
                .iter()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| Error::Parse {
                        line: lineno + 2,
                        detail: format!("bad float '{t}'"),
                    })
                })
                .collect::<Result<_>>()?;
            let (center, rest) = nums.split_at(dim);
            let (w, value) = (rest[0], rest[1]);

            // Recover the cell index from the center coordinates.
            let mut cell = 0usize;
            for d in 0..dim {
                let i = ((center[d] - grid.box_lo()[d]) / spacings[d] - 0.5).round();
                if !(0.0..res as f64).contains(&i) {
                    return Err(Error::Parse {
                        line: lineno + 2,
                        detail: format!("center coordinate {} outside the grid box", center[d]),
                    });
                }
                cell = cell * res + i as usize;
            }
            let layer = grid
                .family()
                .widths()
                .iter()
                .position(|&fw| fw == w)
                .ok_or_else(|| Error::Parse {
                    line: lineno + 2,
                    detail: format!("width {w} not in the grid family"),
                })?;
            values[layer * grid.cells_per_layer() + cell] = value;
        }
        CoefficientField::new(grid, values)
    }

    pub fn save_to_path(&self, path: &std::path::Path) -> Result<()> {
        let mut buf = Vec::new();
        self.save(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load_from_path(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::load(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::KernelFamily;

    fn grid_1d(lo: f64, hi: f64, res: usize, widths: Vec<f64>) -> Arc<QuadratureGrid> {
        Arc::new(
            QuadratureGrid::new(vec![lo], vec![hi], res, KernelFamily::new(widths).unwrap())
                .unwrap(),
        )
    }

    fn grid_2d(res: usize) -> Arc<QuadratureGrid> {
        Arc::new(
            QuadratureGrid::new(
                vec![-3.0, -3.0],
                vec![3.0, 3.0],
                res,
                KernelFamily::new(vec![1.0]).unwrap(),
            )
            .unwrap(),
        )
    }

    #[test]
    fn sample_label_validation() {
        assert!(LabeledSample::new(vec![0.0], 1.0).is_ok());
        assert!(LabeledSample::new(vec![0.0], -1.0).is_ok());
        assert!(LabeledSample::new(vec![0.0], 0.5).is_err());
        assert!(LabeledSample::new(vec![f64::NAN], 1.0).is_err());
    }

    #[test]
    fn hyperparams_validation() {
        assert!(Hyperparams::new(25.0, 0.01, 0.1, 1000, 1e-5).is_ok());
        assert!(Hyperparams::new(25.0, 1.0, 0.1, 1000, 1e-5).is_ok());
        assert!(Hyperparams::new(-1.0, 0.0, 0.1, 1000, 1e-5).is_err());
        assert!(Hyperparams::new(0.0, 1.5, 0.1, 1000, 1e-5).is_err());
        assert!(Hyperparams::new(0.0, 0.0, 0.0, 1000, 1e-5).is_err());
        assert!(Hyperparams::new(0.0, 0.0, 0.1, 0, 1e-5).is_err());
        assert!(Hyperparams::new(0.0, 0.0, 0.1, 10, 0.0).is_err());
    }

    #[test]
    fn alpha_bar_zero_lambda_is_zero_field() {
        let grid = grid_2d(5);
        let samples = vec![
            LabeledSample::new(vec![0.0, 0.0], 1.0).unwrap(),
            LabeledSample::new(vec![1.0, 1.0], -1.0).unwrap(),
        ];
        let bar = alpha_bar(&[0.0, 0.0], &samples, &grid).unwrap();
        assert!(bar.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn alpha_bar_single_sample_equals_kernel_row() {
        let grid = grid_2d(5);
        let samples = vec![LabeledSample::new(vec![0.3, -0.2], 1.0).unwrap()];
        let bar = alpha_bar(&[1.0], &samples, &grid).unwrap();
        let row = grid.kernel_row(&[0.3, -0.2]).unwrap();
        for (v, k) in bar.values().iter().zip(row.iter()) {
            assert!((v - k).abs() < 1e-15);
        }
    }

    #[test]
    fn alpha_bar_cancels_at_equidistant_cell() {
        // Two opposite-label samples mirrored around the grid center: the
        // cell at the midpoint sees equal kernels and cancels exactly.
        let grid = grid_1d(-2.0, 2.0, 4, vec![1.0]);
        // Centers: -1.5, -0.5, 0.5, 1.5. Midpoint of samples below is -0.5... use 0.5:
        let samples = vec![
            LabeledSample::new(vec![0.0], 1.0).unwrap(),
            LabeledSample::new(vec![1.0], -1.0).unwrap(),
        ];
        let bar = alpha_bar(&[1.0, 1.0], &samples, &grid).unwrap();
        // Cell center 0.5 is equidistant from 0.0 and 1.0.
        assert!(bar.values()[2].abs() < 1e-16);
    }

    #[test]
    fn alpha_bar_rejects_negative_lambda() {
        let grid = grid_2d(3);
        let samples = vec![LabeledSample::new(vec![0.0, 0.0], 1.0).unwrap()];
        assert!(alpha_bar(&[-0.1], &samples, &grid).is_err());
    }

    #[test]
    fn threshold_examples() {
        let grid = grid_1d(0.0, 3.0, 3, vec![1.0]);
        let bar = CoefficientField::new(grid.clone(), vec![-3.0, 1.0, 3.0]).unwrap();

        // gamma = 0 keeps every nonzero cell.
        let t0 = threshold(&bar, 0.0);
        assert_eq!(t0.values(), bar.values());

        // gamma = 4 needs alpha^2 > 8: keeps -3 and 3, drops 1.
        let t4 = threshold(&bar, 4.0);
        assert_eq!(t4.values(), &[-3.0, 0.0, 3.0]);

        // Uniform 0.1 against gamma = 25 dies entirely (0.01 < 50).
        let small = CoefficientField::new(grid, vec![0.1, 0.1, 0.1]).unwrap();
        assert!(threshold(&small, 25.0).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn threshold_boundary_maps_to_zero() {
        let grid = grid_1d(0.0, 1.0, 1, vec![1.0]);
        // alpha^2 == 2 gamma exactly: strict inequality drops it.
        let bar = CoefficientField::new(grid, vec![2.0]).unwrap();
        let out = threshold(&bar, 2.0);
        assert_eq!(out.values(), &[0.0]);
    }

    #[test]
    fn threshold_idempotent_and_strict() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let grid = grid_2d(6);
        for _ in 0..10 {
            let values: Vec<f64> =
                (0..grid.num_cells()).map(|_| rng.random_range(-4.0..4.0)).collect();
            let bar = CoefficientField::new(grid.clone(), values).unwrap();
            let gamma = rng.random_range(0.0..5.0);
            let once = threshold(&bar, gamma);
            let twice = threshold(&once, gamma);
            assert_eq!(once.values(), twice.values());
            for &v in once.values() {
                assert!(v == 0.0 || v * v > 2.0 * gamma);
            }
            // Support can only shrink.
            for (o, b) in once.values().iter().zip(bar.values().iter()) {
                assert!(*o == 0.0 || o == b);
            }
        }
    }

    #[test]
    fn evaluate_zero_field_and_single_cell() {
        let grid = grid_2d(5);
        let zero = CoefficientField::zero(grid.clone());
        assert_eq!(zero.evaluate(&[0.7, 0.7]).unwrap(), 0.0);

        let mut values = vec![0.0; grid.num_cells()];
        values[7] = 2.5;
        let field = CoefficientField::new(grid.clone(), values).unwrap();
        let x = [0.2, -0.4];
        let expected = 2.5
            * crate::grid::gaussian(&x, grid.center(7), grid.cell_width(7))
            * grid.cell_weight();
        assert!((field.evaluate(&x).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn evaluate_matches_kernel_self_integral() {
        // alpha_bar with a single unit-lambda sample at the origin makes
        // f(0) the quadrature of k(0,s)^2 / N; in one dimension the exact
        // value is w * sqrt(pi). Oracle: independent trapezoid quadrature.
        let grid = grid_1d(-8.0, 8.0, 1600, vec![1.0]);
        let samples = vec![LabeledSample::new(vec![0.0], 1.0).unwrap()];
        let bar = alpha_bar(&[1.0], &samples, &grid).unwrap();
        let got = bar.evaluate(&[0.0]).unwrap();

        let closed = std::f64::consts::PI.sqrt();
        let n = 400_000;
        let (lo, hi) = (-8.0, 8.0);
        let h = (hi - lo) / n as f64;
        let f = |s: f64| (-(s * s)).exp(); // k(0,s;1)^2 = exp(-s^2)
        let mut oracle = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            oracle += f(lo + i as f64 * h);
        }
        oracle *= h;

        assert!((oracle - closed).abs() < 1e-10);
        assert!((got - closed).abs() < 1e-6, "got {got}, closed form {closed}");
    }

    #[test]
    fn evaluate_is_linear_in_the_field() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let grid = grid_2d(6);
        for _ in 0..10 {
            let v1: Vec<f64> =
                (0..grid.num_cells()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v2: Vec<f64> =
                (0..grid.num_cells()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a: f64 = rng.random_range(-3.0..3.0);
            let combo: Vec<f64> =
                v1.iter().zip(v2.iter()).map(|(p, q)| a * p + q).collect();
            let f1 = CoefficientField::new(grid.clone(), v1).unwrap();
            let f2 = CoefficientField::new(grid.clone(), v2).unwrap();
            let fc = CoefficientField::new(grid.clone(), combo).unwrap();
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let lhs = fc.evaluate(&x).unwrap();
            let rhs = a * f1.evaluate(&x).unwrap() + f2.evaluate(&x).unwrap();
            let scale = lhs.abs().max(rhs.abs()).max(1e-30);
            assert!((lhs - rhs).abs() / scale < 1e-10);
        }
    }

    #[test]
    fn elastic_net_examples() {
        let grid = grid_1d(0.0, 2.0, 2, vec![1.0]);
        let cw = grid.cell_weight();

        let zero = CoefficientField::zero(grid.clone());
        assert_eq!(zero.elastic_net(5.0), 0.0);

        let one = CoefficientField::new(grid.clone(), vec![3.0, 0.0]).unwrap();
        let gamma = 2.0;
        assert!((one.elastic_net(gamma) - (0.5 * 9.0 + gamma) * cw).abs() < 1e-15);

        // Quadratic homogeneity at gamma = 0.
        let v = CoefficientField::new(grid.clone(), vec![1.5, -0.5]).unwrap();
        let v2 = CoefficientField::new(grid, vec![3.0, -1.0]).unwrap();
        assert!((v2.elastic_net(0.0) - 4.0 * v.elastic_net(0.0)).abs() < 1e-12);
    }

    #[test]
    fn elastic_net_dominates_l2_part() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let grid = grid_2d(4);
        for _ in 0..10 {
            let values: Vec<f64> =
                (0..grid.num_cells()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let field = CoefficientField::new(grid.clone(), values).unwrap();
            let gamma = rng.random_range(0.0..3.0);
            let l2_half: f64 =
                0.5 * field.values().iter().map(|v| v * v).sum::<f64>() * grid.cell_weight();
            assert!(field.elastic_net(gamma) >= l2_half - 1e-12);
            if gamma == 0.0 {
                assert!((field.elastic_net(gamma) - l2_half).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn predict_tie_rule_and_signs() {
        let grid = grid_1d(-1.0, 1.0, 2, vec![1.0]);
        let zero = CoefficientField::zero(grid.clone());
        assert_eq!(zero.predict(&[0.3]).unwrap(), 1.0);

        let pos = CoefficientField::new(grid.clone(), vec![1.0, 1.0]).unwrap();
        assert_eq!(pos.predict(&[0.0]).unwrap(), 1.0);

        let neg = CoefficientField::new(grid, vec![-1.0, -1.0]).unwrap();
        assert_eq!(neg.predict(&[0.0]).unwrap(), -1.0);
    }

    #[test]
    fn serialization_round_trips_bit_exact() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let grid = Arc::new(
            QuadratureGrid::new(
                vec![-1.638712, 0.31],
                vec![2.71828, 3.9],
                7,
                KernelFamily::new(vec![0.7321, 1.9]).unwrap(),
            )
            .unwrap(),
        );
        let values: Vec<f64> = (0..grid.num_cells())
            .map(|_| {
                if rng.random_bool(0.2) {
                    rng.random_range(-5.0..5.0) * rng.random_range(0.001..1000.0)
                } else {
                    0.0
                }
            })
            .collect();
        let field = CoefficientField::new(grid, values).unwrap();

        let mut buf = Vec::new();
        field.save(&mut buf).unwrap();
        let loaded = CoefficientField::load(std::io::Cursor::new(&buf)).unwrap();

        assert_eq!(loaded.grid().box_lo(), field.grid().box_lo());
        assert_eq!(loaded.grid().box_hi(), field.grid().box_hi());
        assert_eq!(loaded.grid().family(), field.grid().family());
        assert_eq!(loaded.values(), field.values());

        // Saving the loaded model reproduces the bytes.
        let mut buf2 = Vec::new();
        loaded.save(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }
}
