//! Backstepping kernels on the triangle `0 <= xi <= x <= 1`.
//!
//! The direct kernels `K` map the Riemann variables `(u, v)` to the target
//! variables `(alpha, beta)`; the inverse kernels `L` map them back. Both
//! are computed by marching a Goursat system along characteristics, and
//! `L` can also be recovered from `K` through a Volterra equation.

mod gains;
mod goursat;
mod picard;
mod volterra;

pub use gains::{compute_gains, GainProfile};
pub use goursat::{solve_direct_kernels, solve_inverse_kernels_goursat, KernelCoefficients};
pub use picard::{picard_fg_oracle, PicardOptions, PicardSolution};
pub use volterra::invert_kernels_volterra;

use crate::error::Result;
use crate::model::UniformGrid;

/// Square lattice with spacing `1/n` restricted to the lower triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriangularGrid {
    pub n: usize,
}

impl TriangularGrid {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "triangular grid needs at least one interval");
        Self { n }
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node_count(&self) -> usize {
        (self.n + 1) * (self.n + 2) / 2
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i <= self.n);
        i * (i + 1) / 2 + j
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    /// All `(i, j)` index pairs in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> {
        let n = self.n;
        (0..=n).flat_map(|i| (0..=i).map(move |j| (i, j)))
    }
}

/// One scalar function sampled on a [`TriangularGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    grid: TriangularGrid,
    values: Vec<f64>,
}

impl KernelField {
    pub fn zeros(grid: TriangularGrid) -> Self {
        Self::filled(grid, 0.0)
    }

    pub fn filled(grid: TriangularGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.node_count()],
        }
    }

    pub fn grid(&self) -> TriangularGrid {
        self.grid
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.grid.index(i, j);
        self.values[k] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Samples `K(1, xi_j)` for `j = 0..=n`.
    pub fn last_row(&self) -> Vec<f64> {
        let n = self.grid.n;
        (0..=n).map(|j| self.get(n, j)).collect()
    }

    pub fn max_abs_diff(&self, other: &KernelField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Piecewise-linear interpolation on the triangulation obtained by
    /// cutting every lattice square along its main diagonal. Points are
    /// clamped into the triangle first.
    pub fn at(&self, x: f64, xi: f64) -> f64 {
        let n = self.grid.n;
        let nf = n as f64;
        let x = x.clamp(0.0, 1.0);
        let xi = xi.clamp(0.0, x);
        let tx = x * nf;
        let ty = xi * nf;
        let i = (tx.floor() as usize).min(n - 1);
        let j = (ty.floor() as usize).min(i).min(n - 1);
        let fx = tx - i as f64;
        let fy = (ty - j as f64).min(if j == i { fx } else { 1.0 });
        if fy <= fx {
            (1.0 - fx) * self.get(i, j)
                + (fx - fy) * self.get(i + 1, j)
                + fy * self.get(i + 1, j + 1)
        } else {
            (1.0 - fy) * self.get(i, j)
                + (fy - fx) * self.get(i, j + 1)
                + fx * self.get(i + 1, j + 1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// `K`, entries `uu, uv, vu, vv`.
    Direct,
    /// `L`, entries `alpha_alpha, alpha_beta, beta_alpha, beta_beta`.
    Inverse,
}

impl KernelKind {
    pub fn labels(self) -> [&'static str; 4] {
        match self {
            KernelKind::Direct => ["uu", "uv", "vu", "vv"],
            KernelKind::Inverse => ["alpha_alpha", "alpha_beta", "beta_alpha", "beta_beta"],
        }
    }
}

/// The four entries of a 2x2 kernel matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    pub kind: KernelKind,
    pub fields: [KernelField; 4],
}

impl KernelSet {
    pub fn zeros(kind: KernelKind, grid: TriangularGrid) -> Self {
        let z = KernelField::zeros(grid);
        Self {
            kind,
            fields: [z.clone(), z.clone(), z.clone(), z],
        }
    }

    pub fn grid(&self) -> TriangularGrid {
        self.fields[0].grid()
    }

    #[inline]
    pub fn matrix(&self, i: usize, j: usize) -> [f64; 4] {
        [
            self.fields[0].get(i, j),
            self.fields[1].get(i, j),
            self.fields[2].get(i, j),
            self.fields[3].get(i, j),
        ]
    }

    #[inline]
    pub fn matrix_at(&self, x: f64, xi: f64) -> [f64; 4] {
        [
            self.fields[0].at(x, xi),
            self.fields[1].at(x, xi),
            self.fields[2].at(x, xi),
            self.fields[3].at(x, xi),
        ]
    }

    pub fn max_abs_diff(&self, other: &KernelSet) -> f64 {
        self.fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    /// Applies `w(x) + sign * int_0^x M(x, xi) w(xi) dxi` on `grid` with
    /// the trapezoidal rule. `sign = -1` with `K` is the direct backstepping
    /// transform, `sign = +1` with `L` the inverse.
    fn volterra_map(
        &self,
        first: &[f64],
        second: &[f64],
        grid: UniformGrid,
        sign: f64,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        grid.check(first.len())?;
        grid.check(second.len())?;
        let h = grid.dx();
        let mut out_a = Vec::with_capacity(grid.len());
        let mut out_b = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let x = grid.node(i);
            let (mut ia, mut ib) = (0.0, 0.0);
            for k in 0..=i {
                if i == 0 {
                    break;
                }
                let w = if k == 0 || k == i { 0.5 * h } else { h };
                let m = self.matrix_at(x, grid.node(k));
                ia += w * (m[0] * first[k] + m[1] * second[k]);
                ib += w * (m[2] * first[k] + m[3] * second[k]);
            }
            out_a.push(first[i] + sign * ia);
            out_b.push(second[i] + sign * ib);
        }
        Ok((out_a, out_b))
    }

    /// `gamma = w - int_0^x K w`.
    pub fn apply_direct(
        &self,
        u: &[f64],
        v: &[f64],
        grid: UniformGrid,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        self.volterra_map(u, v, grid, -1.0)
    }

    /// `w = gamma + int_0^x L gamma`.
    pub fn apply_inverse(
        &self,
        alpha: &[f64],
        beta: &[f64],
        grid: UniformGrid,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        self.volterra_map(alpha, beta, grid, 1.0)
    }
}
