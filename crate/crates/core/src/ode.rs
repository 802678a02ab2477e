//! The planar finite-time-stable ODE
//! `phi'' + sign(phi')|phi'|^nu2 + sign(phi)|phi|^nu1 = 0`
//! and its homogeneity-preserving implicit discretization.
//!
//! With `nu1 = nu2 / (2 - nu2)` the vector field is homogeneous of degree
//! `-1` with respect to the dilation `d(s) = diag(e^{r1 s}, e^{r2 s})`.
//! The state is mapped to `z = Phi(x)`, where the Euclidean norm of `z`
//! equals the homogeneous norm of `x`, and the implicit Euler step is
//! applied to the transformed field `F~`, which depends only on the
//! direction of `z`.

use std::f64::consts::PI;

use crate::error::{CraneError, Result};
use crate::model::HOMOGENEITY_TOLERANCE;

/// States with Euclidean norm below this are replaced by exact zero.
pub const SNAP_TO_ZERO: f64 = 1e-12;
/// `T0` is the first time after which `max(|phi|, |phi_dot|)` stays below this.
pub const SETTLING_THRESHOLD: f64 = 1e-9;
/// Substeps per time step of the explicit fallback integrator.
pub const FALLBACK_SUBSTEPS: usize = 100;

/// Number of directions scanned when solving the implicit step. Even, so
/// that the scan is symmetric under `z -> -z`.
const DIRECTION_SAMPLES: usize = 2000;
const BISECTION_STEPS: usize = 200;

#[inline]
pub fn signed_pow(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(p)
    }
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub nu1: f64,
    pub nu2: f64,
}

impl Exponents {
    pub fn new(nu1: f64, nu2: f64) -> Result<Self> {
        if !(nu2 > 0.0 && nu2 < 1.0) {
            return Err(CraneError::InvalidParameter {
                field: "nu2".into(),
                rule: "nu2 must lie in (0,1)".into(),
            });
        }
        if !(nu1 >= nu2 / (2.0 - nu2) - HOMOGENEITY_TOLERANCE) {
            return Err(CraneError::InvalidParameter {
                field: "nu1".into(),
                rule: format!(
                    "nu1 must satisfy nu1 >= nu2/(2-nu2) = {}",
                    nu2 / (2.0 - nu2)
                ),
            });
        }
        Ok(Self { nu1, nu2 })
    }

    /// The homogeneous pair `(nu2 / (2 - nu2), nu2)`.
    pub fn homogeneous(nu2: f64) -> Result<Self> {
        Self::new(nu2 / (2.0 - nu2), nu2)
    }

    pub fn is_homogeneous(&self) -> bool {
        (self.nu1 - self.nu2 / (2.0 - self.nu2)).abs() <= HOMOGENEITY_TOLERANCE
    }
}

/// The first-order form `(x2, -[x1]^nu1 - [x2]^nu2)`.
pub fn haimo_field(x: [f64; 2], ex: Exponents) -> [f64; 2] {
    [x[1], -signed_pow(x[0], ex.nu1) - signed_pow(x[1], ex.nu2)]
}

/// Weights of the dilation under which the field has degree `-1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilationParams {
    pub r1: f64,
    pub r2: f64,
    pub nu_d: f64,
}

impl DilationParams {
    pub fn new(nu2: f64) -> Self {
        Self {
            r1: (2.0 - nu2) / (1.0 - nu2),
            r2: 1.0 / (1.0 - nu2),
            nu_d: -1.0,
        }
    }

    pub fn dilate(&self, s: f64, x: [f64; 2]) -> [f64; 2] {
        [(self.r1 * s).exp() * x[0], (self.r2 * s).exp() * x[1]]
    }
}

/// Returns `(||x||_d, s_x)` where `s_x` solves `|d(-s) x| = 1`.
pub fn homogeneous_norm(x: [f64; 2], dp: &DilationParams) -> Result<(f64, f64)> {
    if x == [0.0, 0.0] {
        return Err(CraneError::UndefinedNorm);
    }
    // Decreasing in s; the squared form avoids a square root per step.
    let h = |s: f64| {
        (-2.0 * dp.r1 * s).exp() * x[0] * x[0] + (-2.0 * dp.r2 * s).exp() * x[1] * x[1] - 1.0
    };
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    while h(lo) < 0.0 {
        lo *= 2.0;
    }
    while h(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo < 1e-15 {
            break;
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    Ok((s.exp(), s))
}

/// `z = ||x||_d d(-ln ||x||_d) x`, with `Phi(0) = 0`.
pub fn transform_forward(x: [f64; 2], dp: &DilationParams) -> [f64; 2] {
    match homogeneous_norm(x, dp) {
        Ok((_, s)) => {
            let y = dp.dilate(-s, x);
            [s.exp() * y[0], s.exp() * y[1]]
        }
        Err(_) => [0.0, 0.0],
    }
}

/// `x = d(ln |z|) z / |z|`, with `Phi^{-1}(0) = 0`.
pub fn transform_inverse(z: [f64; 2], dp: &DilationParams) -> [f64; 2] {
    let r = norm(z);
    if r == 0.0 {
        return [0.0, 0.0];
    }
    dp.dilate(r.ln(), [z[0] / r, z[1] / r])
}

/// The transformed field `F~(e)` for a unit vector `e`; it is extended to
/// all nonzero `z` as a function of the direction only.
pub fn transformed_field(e: [f64; 2], ex: Exponents, dp: &DilationParams) -> [f64; 2] {
    let f = haimo_field(e, ex);
    let ege = dp.r1 * e[0] * e[0] + dp.r2 * e[1] * e[1];
    let ef = (e[0] * f[0] + e[1] * f[1]) / ege;
    [
        (1.0 - dp.r1) * e[0] * ef + f[0],
        (1.0 - dp.r2) * e[1] * ef + f[1],
    ]
}

/// Solves `z_next = z + dt F~(z_next)`.
///
/// Because `F~` only depends on the direction of its argument, writing
/// `z_next = rho e(theta)` reduces the problem to finding angles for which
/// `z + dt F~(e)` is a positive multiple of `e`. All such angles are
/// located by a sign scan of the cross product followed by bisection; the
/// root nearest to `z` is returned. When no direction qualifies, the only
/// solution is the origin.
pub fn implicit_step(z: [f64; 2], dt: f64, ex: Exponents) -> Result<[f64; 2]> {
    if !(dt > 0.0) {
        return Err(CraneError::InvalidParameter {
            field: "dt".into(),
            rule: "dt must be positive".into(),
        });
    }
    if !ex.is_homogeneous() {
        return Err(CraneError::InvalidParameter {
            field: "nu1".into(),
            rule: "the implicit scheme requires nu1 = nu2/(2-nu2)".into(),
        });
    }
    if norm(z) < SNAP_TO_ZERO {
        return Ok([0.0, 0.0]);
    }
    let dp = DilationParams::new(ex.nu2);
    let probe = |theta: f64| {
        let e = [theta.cos(), theta.sin()];
        let f = transformed_field(e, ex, &dp);
        let w = [z[0] + dt * f[0], z[1] + dt * f[1]];
        (e[0] * w[1] - e[1] * w[0], e[0] * w[0] + e[1] * w[1], e)
    };

    let step = 2.0 * PI / DIRECTION_SAMPLES as f64;
    let mut best: Option<[f64; 2]> = None;
    let mut best_dist = f64::INFINITY;
    let mut prev = probe(0.0).0;
    for k in 0..DIRECTION_SAMPLES {
        let (a, b) = (k as f64 * step, (k + 1) as f64 * step);
        let next = probe(b).0;
        let bracketed = prev == 0.0 || prev.signum() != next.signum();
        let cross_lo = prev;
        prev = next;
        if !bracketed {
            continue;
        }
        let (mut lo, mut hi) = (a, b);
        if cross_lo != 0.0 {
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if probe(mid).0.signum() == cross_lo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let (_, radius, e) = probe(lo);
        if radius <= 0.0 {
            continue;
        }
        let candidate = [radius * e[0], radius * e[1]];
        let dist = norm([candidate[0] - z[0], candidate[1] - z[1]]);
        if dist < best_dist {
            best_dist = dist;
            best = Some(candidate);
        }
    }
    Ok(match best {
        Some(c) if norm(c) >= SNAP_TO_ZERO => c,
        _ => [0.0, 0.0],
    })
}

/// Residual `|z_next - z - dt F~(z_next)|` of the implicit relation.
pub fn implicit_residual(z: [f64; 2], z_next: [f64; 2], dt: f64, ex: Exponents) -> f64 {
    let r = norm(z_next);
    if r == 0.0 {
        return f64::NAN;
    }
    let f = transformed_field(
        [z_next[0] / r, z_next[1] / r],
        ex,
        &DilationParams::new(ex.nu2),
    );
    norm([z_next[0] - z[0] - dt * f[0], z_next[1] - z[1] - dt * f[1]])
}

/// The bracketed expression whose strict negativity for `z2 != 0` makes
/// `V(z) = |z|^2` a strict Lyapunov function off the `z1` axis.
pub fn strict_negativity_check(z: [f64; 2], ex: Exponents) -> Result<f64> {
    if z[1] == 0.0 {
        return Err(CraneError::Degenerate("z2 = 0"));
    }
    let r = norm(z);
    let (e1, e2) = (z[0] / r, z[1] / r);
    Ok(e2 * (e1 - signed_pow(e1, ex.nu1) - signed_pow(e2, ex.nu2)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiState {
    pub t: f64,
    pub phi: f64,
    pub phi_dot: f64,
}

impl PhiState {
    pub fn new(t: f64, phi: f64, phi_dot: f64) -> Self {
        Self { t, phi, phi_dot }
    }

    pub fn magnitude(&self) -> f64 {
        self.phi.abs().max(self.phi_dot.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Homogeneity-preserving implicit Euler in transformed coordinates.
    ImplicitHomogeneous,
    /// Classical Runge-Kutta with [`FALLBACK_SUBSTEPS`] substeps per step.
    ExplicitRk4,
}

impl Integrator {
    pub fn for_exponents(ex: Exponents) -> Self {
        if ex.is_homogeneous() {
            Integrator::ImplicitHomogeneous
        } else {
            Integrator::ExplicitRk4
        }
    }
}

pub fn rk4_step(x: [f64; 2], h: f64, ex: Exponents) -> [f64; 2] {
    let add = |a: [f64; 2], k: [f64; 2], s: f64| [a[0] + s * k[0], a[1] + s * k[1]];
    let k1 = haimo_field(x, ex);
    let k2 = haimo_field(add(x, k1, h / 2.0), ex);
    let k3 = haimo_field(add(x, k2, h / 2.0), ex);
    let k4 = haimo_field(add(x, k3, h), ex);
    [
        x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Advances `(phi, phi_dot)` one step at a time on the grid `t_k = t0 + k dt`.
#[derive(Debug, Clone)]
pub struct PhiStepper {
    ex: Exponents,
    dp: DilationParams,
    dt: f64,
    t0: f64,
    k: usize,
    integrator: Integrator,
    x: [f64; 2],
    /// Transformed state, kept between steps to avoid re-solving the norm.
    z: [f64; 2],
}

impl PhiStepper {
    pub fn new(initial: PhiState, dt: f64, ex: Exponents) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(CraneError::InvalidParameter {
                field: "dt".into(),
                rule: "dt must be positive".into(),
            });
        }
        let dp = DilationParams::new(ex.nu2);
        let x = [initial.phi, initial.phi_dot];
        let integrator = Integrator::for_exponents(ex);
        let z = match integrator {
            Integrator::ImplicitHomogeneous => transform_forward(x, &dp),
            Integrator::ExplicitRk4 => x,
        };
        Ok(Self {
            ex,
            dp,
            dt,
            t0: initial.t,
            k: 0,
            integrator,
            x,
            z,
        })
    }

    pub fn integrator(&self) -> Integrator {
        self.integrator
    }

    pub fn state(&self) -> PhiState {
        PhiState::new(self.t0 + self.k as f64 * self.dt, self.x[0], self.x[1])
    }

    pub fn step(&mut self) -> Result<PhiState> {
        match self.integrator {
            Integrator::ImplicitHomogeneous => {
                self.z = implicit_step(self.z, self.dt, self.ex)?;
                self.x = transform_inverse(self.z, &self.dp);
            }
            Integrator::ExplicitRk4 => {
                let h = self.dt / FALLBACK_SUBSTEPS as f64;
                for _ in 0..FALLBACK_SUBSTEPS {
                    self.x = rk4_step(self.x, h, self.ex);
                }
                if norm(self.x) < SNAP_TO_ZERO {
                    self.x = [0.0, 0.0];
                }
            }
        }
        self.k += 1;
        Ok(self.state())
    }
}

#[derive(Debug, Clone)]
pub struct PhiTrajectory {
    pub states: Vec<PhiState>,
    pub integrator: Integrator,
    /// First time after which the state stays below [`SETTLING_THRESHOLD`].
    pub settling_time: Option<f64>,
}

/// Number of steps of size `dt` needed to reach `t_end`.
pub fn step_count(dt: f64, t_end: f64) -> usize {
    let n = t_end / dt;
    let r = n.round();
    if (n - r).abs() < 1e-9 * r.max(1.0) {
        r as usize
    } else {
        n.ceil() as usize
    }
}

/// First sample time after which `magnitude` stays below `threshold`.
pub fn settling_time<T>(
    samples: &[T],
    time: impl Fn(&T) -> f64,
    magnitude: impl Fn(&T) -> f64,
    threshold: f64,
) -> Option<f64> {
    let last_above = samples.iter().rposition(|s| !(magnitude(s) < threshold));
    match last_above {
        None => samples.first().map(&time),
        Some(k) if k + 1 < samples.len() => Some(time(&samples[k + 1])),
        Some(_) => None,
    }
}

pub fn integrate_phi(
    initial: PhiState,
    dt: f64,
    t_end: f64,
    ex: Exponents,
) -> Result<PhiTrajectory> {
    let mut stepper = PhiStepper::new(initial, dt, ex)?;
    let steps = step_count(dt, t_end - initial.t);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(stepper.state());
    for _ in 0..steps {
        states.push(stepper.step()?);
    }
    let settling = settling_time(&states, |s| s.t, PhiState::magnitude, SETTLING_THRESHOLD);
    Ok(PhiTrajectory {
        states,
        integrator: stepper.integrator(),
        settling_time: settling,
    })
}
