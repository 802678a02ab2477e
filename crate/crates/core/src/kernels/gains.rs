use super::KernelSet;
use crate::error::{CraneError, Result};
use crate::model::{DerivedConstants, UniformGrid};

/// Feedback gains derived from the last row `L(1, .)` of the inverse kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct GainProfile {
    pub grid: UniformGrid,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub a0: f64,
    pub b0: f64,
    pub mu: f64,
    /// `L_aa(1,x) + L_ba(1,x)`, equal to `-(a lambda)_x`.
    pub alpha_row: Vec<f64>,
    /// `L_ab(1,x) + L_bb(1,x)`, equal to `(b lambda)_x`.
    pub beta_row: Vec<f64>,
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]))
}

fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Computes `a`, `b`, `a0 = b0` and `mu` with the trapezoidal rule on the
/// kernel grid.
pub fn compute_gains(l: &KernelSet, dc: &DerivedConstants) -> GainProfile {
    let tri = l.grid();
    let grid = UniformGrid::new(tri.n);
    let h = grid.dx();
    let rows: Vec<Vec<f64>> = l.fields.iter().map(|f| f.last_row()).collect();
    let alpha_row: Vec<f64> = rows[0].iter().zip(&rows[2]).map(|(p, q)| p + q).collect();
    let beta_row: Vec<f64> = rows[1].iter().zip(&rows[3]).map(|(p, q)| p + q).collect();

    let a0 = 1.0 + trapezoid(&alpha_row, h);
    let b0 = a0;
    let mu = 2.0 + trapezoid(&alpha_row, h) + trapezoid(&beta_row, h);

    let ca = cumulative_trapezoid(&alpha_row, h);
    let cb = cumulative_trapezoid(&beta_row, h);
    let (mut a, mut b) = (
        Vec::with_capacity(grid.len()),
        Vec::with_capacity(grid.len()),
    );
    for i in 0..grid.len() {
        let lam = dc.lambda(grid.node(i));
        a.push((a0 - ca[i]) / lam);
        b.push((b0 + cb[i]) / lam);
    }
    GainProfile {
        grid,
        a,
        b,
        a0,
        b0,
        mu,
        alpha_row,
        beta_row,
    }
}

impl GainProfile {
    /// Linear interpolation of a sampled profile at `x`.
    fn interp(&self, values: &[f64], x: f64) -> f64 {
        let n = self.grid.n;
        let t = (x.clamp(0.0, 1.0) * n as f64).min(n as f64);
        let i = (t.floor() as usize).min(n - 1);
        let w = t - i as f64;
        (1.0 - w) * values[i] + w * values[i + 1]
    }

    /// Returns a copy with every profile sampled on `target`.
    pub fn resample(&self, target: UniformGrid) -> Result<GainProfile> {
        if target.n == 0 {
            return Err(CraneError::InvalidParameter {
                field: "n_x".into(),
                rule: "spatial grid needs at least one interval".into(),
            });
        }
        let pick = |v: &[f64]| {
            target
                .nodes()
                .iter()
                .map(|&x| self.interp(v, x))
                .collect::<Vec<_>>()
        };
        Ok(GainProfile {
            grid: target,
            a: pick(&self.a),
            b: pick(&self.b),
            a0: self.a0,
            b0: self.b0,
            mu: self.mu,
            alpha_row: pick(&self.alpha_row),
            beta_row: pick(&self.beta_row),
        })
    }
}
