//! Gaussian kernel family and the quadrature lattice over center/width space.
//!
//! Models live on a discretization of `S x W`: the compact center set `S`
//! (an axis-aligned box in `R^p`) is cut into a uniform lattice, and the
//! width set `W` is a finite list of kernel widths treated as a counting
//! measure. Integrals over `S x W` become weighted sums over lattice cells.

use crate::error::{Error, Result};

/// The family of Gaussian kernels `k(x, s; w) = exp(-||x-s||^2 / (2 w^2))`,
/// indexed by a finite set of widths.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelFamily {
    widths: Vec<f64>,
}

impl KernelFamily {
    /// Widths must be strictly positive, sorted ascending, with no duplicates.
    pub fn new(widths: Vec<f64>) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::invalid("kernel family needs at least one width"));
        }
        for &w in &widths {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::invalid(format!("kernel width must be positive, got {w}")));
            }
        }
        for pair in widths.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::invalid(
                    "kernel widths must be sorted ascending without duplicates",
                ));
            }
        }
        Ok(Self { widths })
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn max_width(&self) -> f64 {
        *self.widths.last().expect("non-empty by construction")
    }
}

/// `exp(-||x-s||^2 / (2 w^2))` without argument validation.
#[inline]
pub(crate) fn gaussian(x: &[f64], s: &[f64], w: f64) -> f64 {
    let mut sq = 0.0;
    for (a, b) in x.iter().zip(s.iter()) {
        let d = a - b;
        sq += d * d;
    }
    (-sq / (2.0 * w * w)).exp()
}

/// Evaluates the Gaussian kernel `k(x, s; w)`.
///
/// Symmetric in `x` and `s`; equals 1 exactly when `x == s`.
pub fn eval_kernel(x: &[f64], s: &[f64], w: f64) -> Result<f64> {
    if x.len() != s.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: s.len() });
    }
    if !(w > 0.0) {
        return Err(Error::invalid(format!("kernel width must be positive, got {w}")));
    }
    Ok(gaussian(x, s, w))
}

/// Uniform quadrature lattice over `S x W`.
///
/// Cells are ordered width-major: all lattice points of the first width,
/// then the second, and so on. Within a width layer the lattice is
/// row-major over the spatial dimensions. Every cell carries the same
/// weight, the product of the per-dimension spacings; the width axis
/// contributes a unit counting weight.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadratureGrid {
    box_lo: Vec<f64>,
    box_hi: Vec<f64>,
    resolution: usize,
    family: KernelFamily,
    cell_weight: f64,
    /// Flattened cell centers, `num_cells x dim`, row-major.
    centers: Vec<f64>,
    /// Kernel width of each cell.
    cell_widths: Vec<f64>,
}

impl QuadratureGrid {
    pub fn new(
        box_lo: Vec<f64>,
        box_hi: Vec<f64>,
        resolution: usize,
        family: KernelFamily,
    ) -> Result<Self> {
        let dim = box_lo.len();
        if dim == 0 {
            return Err(Error::invalid("grid box must have at least one dimension"));
        }
        if box_hi.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: box_hi.len() });
        }
        if resolution == 0 {
            return Err(Error::invalid("grid resolution must be at least 1"));
        }
        for d in 0..dim {
            if !(box_lo[d] < box_hi[d]) {
                return Err(Error::invalid(format!(
                    "grid box degenerate in dimension {d}: [{}, {}]",
                    box_lo[d], box_hi[d]
                )));
            }
        }

        let spacings: Vec<f64> =
            (0..dim).map(|d| (box_hi[d] - box_lo[d]) / resolution as f64).collect();
        let cell_weight: f64 = spacings.iter().product();

        let per_layer = resolution.pow(dim as u32);
        let num_cells = per_layer * family.widths().len();
        let mut centers = Vec::with_capacity(num_cells * dim);
        let mut cell_widths = Vec::with_capacity(num_cells);
        for &w in family.widths() {
            // Midpoint lattice: center of cell i along dimension d is
            // lo_d + (i + 1/2) * spacing_d.
            let mut idx = vec![0usize; dim];
            for _ in 0..per_layer {
                for d in 0..dim {
                    centers.push(box_lo[d] + (idx[d] as f64 + 0.5) * spacings[d]);
                }
                cell_widths.push(w);
                for d in (0..dim).rev() {
                    idx[d] += 1;
                    if idx[d] < resolution {
                        break;
                    }
                    idx[d] = 0;
                }
            }
        }

        Ok(Self { box_lo, box_hi, resolution, family, cell_weight, centers, cell_widths })
    }

    /// Grid whose box is the bounding box of `points` inflated by twice the
    /// largest kernel width on every side. Coefficient mass outside that box
    /// is negligible because models are sums of kernels centered at samples.
    pub fn from_point_cloud<'a, I>(points: I, resolution: usize, family: KernelFamily) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut iter = points.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::invalid("cannot build a grid around zero points"))?;
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for p in iter {
            if p.len() != lo.len() {
                return Err(Error::DimensionMismatch { expected: lo.len(), got: p.len() });
            }
            for d in 0..lo.len() {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let margin = 2.0 * family.max_width();
        for d in 0..lo.len() {
            lo[d] -= margin;
            hi[d] += margin;
        }
        Self::new(lo, hi, resolution, family)
    }

    pub fn dim(&self) -> usize {
        self.box_lo.len()
    }

    pub fn box_lo(&self) -> &[f64] {
        &self.box_lo
    }

    pub fn box_hi(&self) -> &[f64] {
        &self.box_hi
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn num_cells(&self) -> usize {
        self.cell_widths.len()
    }

    pub fn cells_per_layer(&self) -> usize {
        self.resolution.pow(self.dim() as u32)
    }

    /// Quadrature weight shared by every cell.
    pub fn cell_weight(&self) -> f64 {
        self.cell_weight
    }

    pub fn center(&self, cell: usize) -> &[f64] {
        let d = self.dim();
        &self.centers[cell * d..(cell + 1) * d]
    }

    pub fn cell_width(&self, cell: usize) -> f64 {
        self.cell_widths[cell]
    }

    /// `k(x, s_j; w_j)` for every cell `j`.
    pub fn kernel_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let d = self.dim();
        Ok(self
            .cell_widths
            .iter()
            .enumerate()
            .map(|(j, &w)| gaussian(x, &self.centers[j * d..(j + 1) * d], w))
            .collect())
    }

    /// Writes `k(x, s_j; w_j)` into `out`, which must have `num_cells` entries.
    pub(crate) fn kernel_row_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.num_cells());
        let d = self.dim();
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = gaussian(x, &self.centers[j * d..(j + 1) * d], self.cell_widths[j]);
        }
    }
}

/// One entry of the dual quadratic form: the label-signed Gram value
///
/// `(y_n y_m / n_total^2) * integral over masked cells of k(x_n,s;w) k(x_m,s;w)`.
///
/// The mask selects the support cells over which the integral runs.
pub fn cross_gram(
    x_n: &[f64],
    x_m: &[f64],
    y_n: f64,
    y_m: f64,
    grid: &QuadratureGrid,
    support_mask: &[bool],
    n_total: usize,
) -> Result<f64> {
    if support_mask.len() != grid.num_cells() {
        return Err(Error::DimensionMismatch {
            expected: grid.num_cells(),
            got: support_mask.len(),
        });
    }
    if n_total == 0 {
        return Err(Error::invalid("n_total must be at least 1"));
    }
    if x_n.len() != grid.dim() || x_m.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: if x_n.len() != grid.dim() { x_n.len() } else { x_m.len() },
        });
    }
    let d = grid.dim();
    let mut acc = 0.0;
    for (j, &on) in support_mask.iter().enumerate() {
        if on {
            let s = &grid.centers[j * d..(j + 1) * d];
            let w = grid.cell_widths[j];
            acc += gaussian(x_n, s, w) * gaussian(x_m, s, w);
        }
    }
    let n = n_total as f64;
    Ok(y_n * y_m / (n * n) * acc * grid.cell_weight())
}
