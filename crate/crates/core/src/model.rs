//! Physical crane parameters, the arclength/normalized-coordinate maps and
//! the pointwise Riemann-invariant transforms.
//!
//! Arclength `s` and the normalized coordinate `x` both live on `[0, 1]`.
//! The change of variables turns the variable-tension cable equation into
//! `z_tt = lambda(x)^2 z_xx` with `lambda(x) = C1 exp(-C2 x)`.

use crate::error::{CraneError, Result};

/// Tolerance used when deciding that `nu1 == nu2 / (2 - nu2)`.
pub const HOMOGENEITY_TOLERANCE: f64 = 1e-9;

/// Physical constants of the crane and the two exponents of the
/// finite-time-stable ODE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CraneParams {
    /// Load mass [kg].
    pub m: f64,
    /// Cable linear density [kg/m].
    pub rho: f64,
    /// Gravity [m/s^2].
    pub g: f64,
    /// Platform mass [kg].
    pub platform_mass: f64,
    /// Exponent applied to `phi` (also written zeta).
    pub nu1: f64,
    /// Exponent applied to `phi_dot` (also written psi).
    pub nu2: f64,
}

impl Default for CraneParams {
    fn default() -> Self {
        let nu2 = 0.5;
        Self {
            m: 2.0,
            rho: 2.0,
            g: 9.81,
            platform_mass: 10.0,
            nu1: nu2 / (2.0 - nu2),
            nu2,
        }
    }
}

impl CraneParams {
    pub fn new(m: f64, rho: f64, g: f64, platform_mass: f64, nu1: f64, nu2: f64) -> Result<Self> {
        let p = Self {
            m,
            rho,
            g,
            platform_mass,
            nu1,
            nu2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("m", self.m),
            ("rho", self.rho),
            ("g", self.g),
            ("M", self.platform_mass),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(
                    field,
                    format!("{field} must be positive and finite (got {value})"),
                ));
            }
        }
        if !(self.nu2 > 0.0 && self.nu2 < 1.0) {
            return Err(invalid("nu2", "nu2 must lie in (0,1)".to_string()));
        }
        let lower = self.homogeneous_nu1();
        if !self.nu1.is_finite() || self.nu1 < lower - HOMOGENEITY_TOLERANCE {
            return Err(invalid(
                "nu1",
                format!("nu1 must satisfy nu1 >= nu2/(2-nu2) = {lower}"),
            ));
        }
        Ok(())
    }

    /// The value of `nu1` that makes the ODE vector field homogeneous.
    pub fn homogeneous_nu1(&self) -> f64 {
        self.nu2 / (2.0 - self.nu2)
    }

    pub fn is_homogeneous(&self) -> bool {
        (self.nu1 - self.homogeneous_nu1()).abs() <= HOMOGENEITY_TOLERANCE
    }

    /// Cable tension `d(s) = g s + g m / rho`.
    pub fn tension(&self, s: f64) -> Result<f64> {
        check_unit("s", s)?;
        Ok(self.g * s + self.g * self.m / self.rho)
    }

    pub fn derived(&self) -> DerivedConstants {
        DerivedConstants::from_params(self)
    }
}

fn invalid(field: &str, rule: String) -> CraneError {
    CraneError::InvalidParameter {
        field: field.to_string(),
        rule,
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(CraneError::Domain {
            name,
            value,
            lo: 0.0,
            hi: 1.0,
        })
    }
}

/// Constants derived from [`CraneParams`]; `lambda(x) = c1 * exp(-c2 * x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// `J = (1/g) ln(1 + rho/m)`.
    pub j: f64,
    pub c1: f64,
    pub c2: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    rho_over_m: f64,
    tension0: f64,
}

impl DerivedConstants {
    pub fn from_params(p: &CraneParams) -> Self {
        let rho_over_m = p.rho / p.m;
        let j = rho_over_m.ln_1p() / p.g;
        let tension0 = p.g * p.m / p.rho;
        let c1 = 1.0 / (j * tension0.sqrt());
        let c2 = p.g * j / 2.0;
        Self {
            j,
            c1,
            c2,
            lambda0: c1,
            lambda1: c1 * (-c2).exp(),
            rho_over_m,
            tension0,
        }
    }

    /// Constants for an arbitrary constant-coefficient or exponential wave
    /// speed; used to build degenerate test problems (`c2 = 0`).
    pub fn from_wave_speed(c1: f64, c2: f64) -> Self {
        Self {
            j: f64::NAN,
            c1,
            c2,
            lambda0: c1,
            lambda1: c1 * (-c2).exp(),
            rho_over_m: f64::NAN,
            tension0: f64::NAN,
        }
    }

    /// Normalized coordinate `x(s) = ln(1 + (rho/m) s) / ln(1 + rho/m)`.
    pub fn s_to_x(&self, s: f64) -> Result<f64> {
        check_unit("s", s)?;
        Ok((self.rho_over_m * s).ln_1p() / self.rho_over_m.ln_1p())
    }

    /// Inverse of [`s_to_x`](Self::s_to_x).
    pub fn x_to_s(&self, x: f64) -> Result<f64> {
        check_unit("x", x)?;
        Ok((x * self.rho_over_m.ln_1p()).exp_m1() / self.rho_over_m)
    }

    /// Derivative of [`x_to_s`](Self::x_to_s).
    pub fn ds_dx(&self, x: f64) -> f64 {
        let k = self.rho_over_m.ln_1p();
        k * (k * x).exp() / self.rho_over_m
    }

    /// Tension expressed in the normalized coordinate, `d(s(x))`.
    pub fn tension_in_x(&self, x: f64) -> f64 {
        self.tension0 * (2.0 * self.c2 * x).exp()
    }

    pub fn wave_speed(&self, x: f64) -> Result<f64> {
        check_unit("x", x)?;
        Ok(self.lambda(x))
    }

    /// Unchecked `lambda(x)`; callers guarantee `x` lies in `[0, 1]`.
    #[inline]
    pub fn lambda(&self, x: f64) -> f64 {
        self.c1 * (-self.c2 * x).exp()
    }

    #[inline]
    pub fn lambda_prime(&self, x: f64) -> f64 {
        -self.c2 * self.lambda(x)
    }

    /// `Lambda(x) = int_0^x dy / lambda(y)`, the travel time from 0 to `x`.
    pub fn big_lambda(&self, x: f64) -> f64 {
        if self.c2 == 0.0 {
            x / self.c1
        } else {
            (self.c2 * x).exp_m1() / (self.c1 * self.c2)
        }
    }

    pub fn big_lambda_inv(&self, y: f64) -> f64 {
        if self.c2 == 0.0 {
            y * self.c1
        } else {
            (self.c1 * self.c2 * y).ln_1p() / self.c2
        }
    }
}

/// Uniform grid with `n` intervals on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformGrid {
    pub n: usize,
}

impl UniformGrid {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "grid needs at least one interval");
        Self { n }
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }

    pub(crate) fn check(&self, len: usize) -> Result<()> {
        if len == self.len() {
            Ok(())
        } else {
            Err(CraneError::Shape {
                expected: self.len(),
                actual: len,
            })
        }
    }
}

/// `(z_t, z_x) -> (u, v)` with `u = (z_t - lambda z_x)/sqrt(lambda)` and
/// `v = (z_t + lambda z_x)/sqrt(lambda)`.
pub fn riemann_forward(
    z_t: &[f64],
    z_x: &[f64],
    grid: UniformGrid,
    dc: &DerivedConstants,
) -> Result<(Vec<f64>, Vec<f64>)> {
    grid.check(z_t.len())?;
    grid.check(z_x.len())?;
    let (mut u, mut v) = (
        Vec::with_capacity(grid.len()),
        Vec::with_capacity(grid.len()),
    );
    for (i, (&zt, &zx)) in z_t.iter().zip(z_x).enumerate() {
        let lam = dc.lambda(grid.node(i));
        let root = lam.sqrt();
        u.push((zt - lam * zx) / root);
        v.push((zt + lam * zx) / root);
    }
    Ok((u, v))
}

/// Inverse of [`riemann_forward`].
pub fn riemann_inverse(
    u: &[f64],
    v: &[f64],
    grid: UniformGrid,
    dc: &DerivedConstants,
) -> Result<(Vec<f64>, Vec<f64>)> {
    grid.check(u.len())?;
    grid.check(v.len())?;
    let (mut z_t, mut z_x) = (
        Vec::with_capacity(grid.len()),
        Vec::with_capacity(grid.len()),
    );
    for (i, (&ui, &vi)) in u.iter().zip(v).enumerate() {
        let lam = dc.lambda(grid.node(i));
        let root = lam.sqrt();
        let (d, s) = (root * ui, root * vi);
        z_t.push((s + d) / 2.0);
        z_x.push((s - d) / (2.0 * lam));
    }
    Ok((z_t, z_x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nominal() -> (CraneParams, DerivedConstants) {
        let p = CraneParams::default();
        (p, p.derived())
    }

    #[test]
    fn tension_values() {
        let (p, _) = nominal();
        assert!((p.tension(0.0).unwrap() - 9.81).abs() < 1e-12);
        assert!((p.tension(1.0).unwrap() - 19.62).abs() < 1e-12);
        assert!((p.tension(0.5).unwrap() - 14.715).abs() < 1e-12);
        assert!(matches!(p.tension(1.5), Err(CraneError::Domain { .. })));
    }

    #[test]
    fn coordinate_map_values() {
        let (_, dc) = nominal();
        assert_eq!(dc.s_to_x(0.0).unwrap(), 0.0);
        assert!((dc.s_to_x(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((dc.s_to_x(0.5).unwrap() - 0.584963).abs() < 1e-6);
        assert!((dc.x_to_s(0.584963).unwrap() - 0.5).abs() < 1e-6);
        assert_eq!(dc.x_to_s(0.0).unwrap(), 0.0);
        assert!((dc.x_to_s(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(dc.s_to_x(-0.1).is_err());
        assert!(dc.x_to_s(1.1).is_err());
    }

    #[test]
    fn round_trip_coordinate_maps() {
        let (_, dc) = nominal();
        let worst = (0..1000)
            .map(|k| k as f64 / 999.0)
            .map(|s| (dc.x_to_s(dc.s_to_x(s).unwrap()).unwrap() - s).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn ds_dx_matches_finite_differences() {
        let (_, dc) = nominal();
        let h = 1e-6;
        for k in 1..10 {
            let x = k as f64 / 10.0;
            let fd = (dc.x_to_s(x + h).unwrap() - dc.x_to_s(x - h).unwrap()) / (2.0 * h);
            assert!((dc.ds_dx(x) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn wave_speed_values() {
        let (_, dc) = nominal();
        // J = ln2 / 9.81, C1 = 1/(J sqrt(9.81)), lambda(1) = lambda(0)/sqrt(2)
        let j = std::f64::consts::LN_2 / 9.81;
        let c1 = 1.0 / (j * 9.81f64.sqrt());
        assert!((dc.j - j).abs() < 1e-15);
        assert!((dc.wave_speed(0.0).unwrap() - c1).abs() < 1e-12);
        assert!((dc.wave_speed(0.0).unwrap() - 4.51892).abs() < 1e-3);
        assert!((dc.wave_speed(1.0).unwrap() - c1 / 2f64.sqrt()).abs() < 1e-12);
        assert!((dc.wave_speed(1.0).unwrap() - 3.19537).abs() < 1e-3);
        for k in 0..=10 {
            let x = k as f64 / 10.0;
            let identity = dc.lambda(x) * dc.j * dc.tension_in_x(x).sqrt();
            assert!((identity - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wave_speed_derivative_matches_finite_differences() {
        let (_, dc) = nominal();
        let h = 1e-5;
        for k in 1..100 {
            let x = k as f64 / 100.0;
            let fd = (dc.lambda(x + h) - dc.lambda(x - h)) / (2.0 * h);
            assert!((fd - dc.lambda_prime(x)).abs() < 1e-6);
            assert!(dc.lambda(x) > 0.0 && dc.lambda(x) < dc.lambda(x - h));
        }
    }

    #[test]
    fn tension_in_x_matches_composition() {
        let (p, dc) = nominal();
        for k in 0..=100 {
            let x = k as f64 / 100.0;
            let direct = p.tension(dc.x_to_s(x).unwrap()).unwrap();
            assert!((dc.tension_in_x(x) - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn big_lambda_against_quadrature() {
        let (_, dc) = nominal();
        assert_eq!(dc.big_lambda(0.0), 0.0);
        let expected = (2f64.sqrt() - 1.0) / (dc.c1 * dc.c2);
        assert!((dc.big_lambda(1.0) - expected).abs() < 1e-14);
        assert!((dc.big_lambda(1.0) - 0.264491).abs() < 5e-5);
        for &x in &[0.1, 0.37, 0.8, 1.0] {
            let panels = 10_000;
            let h = x / panels as f64;
            let mut quad = 0.5 * (1.0 / dc.lambda(0.0) + 1.0 / dc.lambda(x));
            for i in 1..panels {
                quad += 1.0 / dc.lambda(i as f64 * h);
            }
            quad *= h;
            assert!((quad - dc.big_lambda(x)).abs() < 1e-8);
            assert!((dc.big_lambda_inv(dc.big_lambda(x)) - x).abs() < 1e-14);
        }
    }

    #[test]
    fn riemann_transforms() {
        let (_, dc) = nominal();
        let grid = UniformGrid::new(20);
        let zeros = vec![0.0; grid.len()];
        let (u, v) = riemann_forward(&zeros, &zeros, grid, &dc).unwrap();
        assert!(u.iter().chain(&v).all(|&w| w == 0.0));

        let ones = vec![1.0; grid.len()];
        let (u, v) = riemann_forward(&ones, &zeros, grid, &dc).unwrap();
        for i in 0..grid.len() {
            let expected = 1.0 / dc.lambda(grid.node(i)).sqrt();
            assert!((u[i] - expected).abs() < 1e-15 && (v[i] - expected).abs() < 1e-15);
        }

        let c = 0.7;
        let (zt, zx) =
            riemann_inverse(&vec![c; grid.len()], &vec![c; grid.len()], grid, &dc).unwrap();
        for i in 0..grid.len() {
            assert!(zx[i].abs() < 1e-15);
            assert!((zt[i] - c * dc.lambda(grid.node(i)).sqrt()).abs() < 1e-14);
        }

        assert!(matches!(
            riemann_forward(&ones[..5], &zeros, grid, &dc),
            Err(CraneError::Shape { .. })
        ));
    }

    #[test]
    fn parameter_validation() {
        assert!(CraneParams::new(2.0, 2.0, 9.81, 10.0, 1.0 / 3.0, 0.5).is_ok());
        assert!(CraneParams::new(2.0, 2.0, 9.81, 10.0, 0.5, 0.5).is_ok());
        let err = CraneParams::new(2.0, 2.0, 9.81, 10.0, 1.0 / 3.0, 1.5).unwrap_err();
        assert!(err.to_string().contains("nu2 must lie in (0,1)"));
        assert!(CraneParams::new(2.0, 2.0, 9.81, 10.0, 0.2, 0.5).is_err());
        assert!(CraneParams::new(-1.0, 2.0, 9.81, 10.0, 1.0 / 3.0, 0.5).is_err());
        assert!(CraneParams::default().is_homogeneous());
    }
}
