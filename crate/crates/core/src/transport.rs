//! First-order transport of the target variables.
//!
//! `beta` travels toward `x = 0` and is fed at `x = 1`; `alpha` travels
//! toward `x = 1` and is fed at `x = 0` by `alpha(0,t) = beta(0,t)`.

use crate::error::{CraneError, Result};
use crate::model::{DerivedConstants, UniformGrid};

/// Returns `max(lambda) dt / dx = lambda(0) dt / dx`, rejecting values above one.
pub fn cfl_check(dt: f64, dx: f64, dc: &DerivedConstants) -> Result<f64> {
    if !(dt > 0.0 && dx > 0.0) {
        return Err(CraneError::InvalidParameter {
            field: "dt".into(),
            rule: "dt and dx must be positive".into(),
        });
    }
    let ratio = dc.lambda0.max(dc.lambda1) * dt / dx;
    if ratio > 1.0 {
        return Err(CraneError::Cfl { ratio });
    }
    Ok(ratio)
}

/// `alpha`, `beta` on the spatial grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFrame {
    pub t: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl FieldFrame {
    pub fn zeros(grid: UniformGrid, t: f64) -> Self {
        Self {
            t,
            alpha: vec![0.0; grid.len()],
            beta: vec![0.0; grid.len()],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.alpha
            .iter()
            .chain(&self.beta)
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `beta_i <- beta_i + lambda_i dt/dx (beta_{i+1} - beta_i)` for `i < n`,
/// and `beta_n <- boundary`.
pub fn beta_downwind_step(
    beta: &[f64],
    boundary: f64,
    dt: f64,
    grid: UniformGrid,
    dc: &DerivedConstants,
) -> Result<Vec<f64>> {
    grid.check(beta.len())?;
    let r = dt / grid.dx();
    let n = grid.n;
    let mut out = Vec::with_capacity(beta.len());
    for i in 0..n {
        out.push(beta[i] + dc.lambda(grid.node(i)) * r * (beta[i + 1] - beta[i]));
    }
    out.push(boundary);
    Ok(out)
}

/// `alpha_0 <- beta_0` (already updated), then
/// `alpha_i <- alpha_i - lambda_i dt/dx (alpha_i - alpha_{i-1})` for `i > 0`.
pub fn alpha_upwind_step(
    alpha: &[f64],
    beta_at_zero: f64,
    dt: f64,
    grid: UniformGrid,
    dc: &DerivedConstants,
) -> Result<Vec<f64>> {
    grid.check(alpha.len())?;
    let r = dt / grid.dx();
    let mut out = Vec::with_capacity(alpha.len());
    out.push(beta_at_zero);
    for i in 1..alpha.len() {
        out.push(alpha[i] - dc.lambda(grid.node(i)) * r * (alpha[i] - alpha[i - 1]));
    }
    Ok(out)
}

/// One full transport step in the fixed order: boundary value for `beta`,
/// downwind sweep, boundary coupling, upwind sweep.
pub fn transport_step(
    frame: &FieldFrame,
    beta_boundary: f64,
    dt: f64,
    grid: UniformGrid,
    dc: &DerivedConstants,
) -> Result<FieldFrame> {
    let beta = beta_downwind_step(&frame.beta, beta_boundary, dt, grid, dc)?;
    let alpha = alpha_upwind_step(&frame.alpha, beta[0], dt, grid, dc)?;
    Ok(FieldFrame {
        t: frame.t + dt,
        alpha,
        beta,
    })
}

/// Samples on `t_k = t0 + k dt`, linearly interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Self {
        Self { t0, dt, values }
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.values.len().saturating_sub(1) as f64 * self.dt
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        let slack = 1e-9 * self.dt;
        if self.values.is_empty() || t < self.t0 - slack || t > self.end() + slack {
            return Err(CraneError::HistoryGap {
                t,
                start: self.t0,
                end: self.end(),
            });
        }
        let last = self.values.len() - 1;
        if last == 0 {
            return Ok(self.values[0]);
        }
        let u = ((t - self.t0) / self.dt).clamp(0.0, last as f64);
        let k = (u.floor() as usize).min(last - 1);
        let w = u - k as f64;
        Ok((1.0 - w) * self.values[k] + w * self.values[k + 1])
    }
}

/// Exact `beta(x,t)`: the initial profile carried along the characteristic
/// while it has not yet reached `x = 1`, the boundary input afterwards.
pub fn characteristic_beta(
    x: f64,
    t: f64,
    beta0: impl Fn(f64) -> f64,
    phi_dot: &TimeSeries,
    mu: f64,
    dc: &DerivedConstants,
) -> Result<f64> {
    let (c1, c2) = (dc.c1, dc.c2);
    let travel = dc.big_lambda(1.0) - dc.big_lambda(x);
    if t < travel {
        let foot = if c2 == 0.0 {
            x + c1 * t
        } else {
            ((c2 * x).exp() + c1 * c2 * t).ln() / c2
        };
        Ok(beta0(foot.min(1.0)))
    } else {
        Ok(phi_dot.at(t - travel)? / mu)
    }
}

/// Exact `alpha(x,t)`: the initial profile while the characteristic has not
/// yet left `x = 0`, the recorded `beta(0,.)` trace afterwards.
pub fn characteristic_alpha(
    x: f64,
    t: f64,
    alpha0: impl Fn(f64) -> f64,
    beta_at_zero: impl Fn(f64) -> Result<f64>,
    dc: &DerivedConstants,
) -> Result<f64> {
    let (c1, c2) = (dc.c1, dc.c2);
    let travel = dc.big_lambda(x);
    if t < travel {
        let foot = if c2 == 0.0 {
            x - c1 * t
        } else {
            ((c2 * x).exp() - c1 * c2 * t).ln() / c2
        };
        Ok(alpha0(foot.max(0.0)))
    } else {
        beta_at_zero(t - travel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CraneParams;
    use proptest::prelude::*;

    fn dc() -> DerivedConstants {
        CraneParams::default().derived()
    }

    #[test]
    fn cfl_examples() {
        let r = cfl_check(0.01, 0.05, &dc()).unwrap();
        assert!((r - 0.9038).abs() < 1e-3);
        match cfl_check(0.02, 0.05, &dc()) {
            Err(CraneError::Cfl { ratio }) => assert!((ratio - 1.808).abs() < 1e-3),
            other => panic!("{other:?}"),
        }
        assert!(cfl_check(1e-12, 0.05, &dc()).unwrap() < 1e-9);
    }

    #[test]
    fn zero_fields_stay_zero() {
        let grid = UniformGrid::new(20);
        let f = FieldFrame::zeros(grid, 0.0);
        let next = transport_step(&f, 0.0, 0.01, grid, &dc()).unwrap();
        assert_eq!(next.max_abs(), 0.0);
        assert!((next.t - 0.01).abs() < 1e-15);
    }

    #[test]
    fn history_interpolation() {
        let h = TimeSeries::new(0.0, 0.5, vec![0.0, 1.0, 4.0]);
        assert_eq!(h.at(0.25).unwrap(), 0.5);
        assert_eq!(h.at(1.0).unwrap(), 4.0);
        assert!(matches!(h.at(1.5), Err(CraneError::HistoryGap { .. })));
        assert!(h.at(-0.1).is_err());
    }

    #[test]
    fn characteristic_branches() {
        let dc = dc();
        let hist = TimeSeries::new(
            0.0,
            0.01,
            (0..200).map(|k| (k as f64 * 0.01).sin()).collect(),
        );
        let b0 = |x: f64| x * x;
        let mu = 2.4;
        assert!((characteristic_beta(0.3, 0.0, b0, &hist, mu, &dc).unwrap() - 0.09).abs() < 1e-14);
        for &t in &[0.0, 0.37, 1.2] {
            let v = characteristic_beta(1.0, t, b0, &hist, mu, &dc).unwrap();
            assert!((v - hist.at(t).unwrap() / mu).abs() < 1e-12);
        }
        let a0 = |x: f64| 1.0 + x;
        let trace = |t: f64| Ok(t.cos());
        assert!((characteristic_alpha(0.4, 0.0, a0, trace, &dc).unwrap() - 1.4).abs() < 1e-14);
        assert_eq!(
            characteristic_alpha(0.0, 0.7, a0, trace, &dc).unwrap(),
            0.7_f64.cos()
        );
    }

    proptest! {
        #[test]
        fn constants_are_preserved(c in -10.0..10.0f64) {
            let grid = UniformGrid::new(20);
            let dc = dc();
            let frame = FieldFrame { t: 0.0, alpha: vec![c; 21], beta: vec![c; 21] };
            let next = transport_step(&frame, c, 0.01, grid, &dc).unwrap();
            prop_assert!(next.alpha.iter().chain(&next.beta).all(|&v| v == c));
        }
    }
}
