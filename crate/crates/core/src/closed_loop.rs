//! Closed-loop simulation in target coordinates.
//!
//! The state `(phi, phi_dot, alpha, beta)` is evolved directly: the ODE
//! drives `beta(1,t) = phi_dot(t) / mu`, and the transport schemes carry
//! the fields. Platform position, cable profile and the control signals
//! are reconstructed from that state at every step.

use crate::error::{CraneError, Result};
use crate::kernels::{GainProfile, KernelSet};
use crate::model::{riemann_forward, riemann_inverse, CraneParams, DerivedConstants, UniformGrid};
use crate::ode::{
    settling_time, signed_pow, step_count, Exponents, PhiState, PhiStepper, SETTLING_THRESHOLD,
};
use crate::transport::{cfl_check, transport_step, FieldFrame};

/// Maximum mismatch accepted in `y0(1) = Xp0` and `y1(1) = Xp1`.
pub const COMPATIBILITY_TOLERANCE: f64 = 1e-9;
/// Default threshold for the extinction time `T1`.
pub const DEFAULT_T1_THRESHOLD: f64 = 1e-4;

/// A function of arclength given by samples, linear in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    s: Vec<f64>,
    values: Vec<f64>,
}

impl Profile {
    /// Samples must be strictly increasing in `s` and span `[0, 1]`.
    pub fn new(s: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let bad = |msg: &str| Err(CraneError::IncompatibleInitialData(msg.to_string()));
        if s.len() != values.len() {
            return Err(CraneError::Shape {
                expected: s.len(),
                actual: values.len(),
            });
        }
        if s.len() < 3 {
            return bad("a profile needs at least three samples");
        }
        if s.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("profile abscissae must be strictly increasing");
        }
        if s[0].abs() > 1e-12 || (s[s.len() - 1] - 1.0).abs() > 1e-12 {
            return bad("profile must span s in [0, 1]");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return bad("profile values must be finite");
        }
        Ok(Self { s, values })
    }

    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let n = values.len().saturating_sub(1).max(1);
        let s = (0..values.len()).map(|k| k as f64 / n as f64).collect();
        Self::new(s, values)
    }

    pub fn constant(value: f64, nodes: usize) -> Self {
        Self::uniform(vec![value; nodes.max(3)]).expect("constant profile is valid")
    }

    pub fn samples(&self) -> (&[f64], &[f64]) {
        (&self.s, &self.values)
    }

    fn segment(&self, s: f64) -> usize {
        let k = self.s.partition_point(|&v| v <= s);
        k.clamp(1, self.s.len() - 1) - 1
    }

    pub fn at(&self, s: f64) -> f64 {
        let k = self.segment(s);
        let w = ((s - self.s[k]) / (self.s[k + 1] - self.s[k])).clamp(0.0, 1.0);
        (1.0 - w) * self.values[k] + w * self.values[k + 1]
    }

    /// Derivative at sample `k` from the quadratic through three neighbours.
    fn nodal_slope(&self, k: usize) -> f64 {
        let last = self.s.len() - 1;
        let c = k.clamp(1, last - 1);
        let (x0, x1, x2) = (self.s[c - 1], self.s[c], self.s[c + 1]);
        let (y0, y1, y2) = (self.values[c - 1], self.values[c], self.values[c + 1]);
        let x = self.s[k];
        let d01 = (y1 - y0) / (x1 - x0);
        let d12 = (y2 - y1) / (x2 - x1);
        let d012 = (d12 - d01) / (x2 - x0);
        d01 + d012 * ((x - x0) + (x - x1))
    }

    /// `dy/ds` interpolated linearly between nodal estimates.
    pub fn slope(&self, s: f64) -> f64 {
        let k = self.segment(s);
        let w = ((s - self.s[k]) / (self.s[k + 1] - self.s[k])).clamp(0.0, 1.0);
        (1.0 - w) * self.nodal_slope(k) + w * self.nodal_slope(k + 1)
    }

    fn max_abs_slope(&self) -> f64 {
        (0..self.s.len())
            .map(|k| self.nodal_slope(k).abs())
            .fold(0.0, f64::max)
    }
}

/// Physical initial state of cable and platform.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub y0: Profile,
    pub y1: Profile,
    pub xp0: f64,
    pub xp1: f64,
}

impl InitialData {
    /// Cable at rest, hanging straight below a platform at `xp0`.
    pub fn rigid(xp0: f64, nodes: usize) -> Self {
        Self {
            y0: Profile::constant(xp0, nodes),
            y1: Profile::constant(0.0, nodes),
            xp0,
            xp1: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let top = self.y0.at(1.0);
        if (top - self.xp0).abs() > COMPATIBILITY_TOLERANCE {
            return Err(CraneError::IncompatibleInitialData(format!(
                "y0(1) = {top} must equal Xp0 = {}",
                self.xp0
            )));
        }
        let top_v = self.y1.at(1.0);
        if (top_v - self.xp1).abs() > COMPATIBILITY_TOLERANCE {
            return Err(CraneError::IncompatibleInitialData(format!(
                "y1(1) = {top_v} must equal Xp1 = {}",
                self.xp1
            )));
        }
        let slope = self.y0.nodal_slope(0);
        let tol = (0.05 * self.y0.max_abs_slope()).max(1e-3);
        if slope.abs() > tol {
            return Err(CraneError::IncompatibleInitialData(format!(
                "y0 slope at s = 0 is {slope}, expected 0 (free end)"
            )));
        }
        Ok(())
    }
}

/// Coefficients of the integrated-by-parts form of `int (a alpha_tt + b beta_tt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlCoefficients {
    /// `(a lambda)_x`.
    pub a_prime: Vec<f64>,
    /// `(b lambda)_x`.
    pub b_prime: Vec<f64>,
    /// `((a lambda)_x lambda)_x`.
    pub p: Vec<f64>,
    /// `((b lambda)_x lambda)_x`.
    pub q: Vec<f64>,
}

fn derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len() - 1;
    (0..=n)
        .map(|i| {
            if i == 0 {
                (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
            } else if i == n {
                (3.0 * values[n] - 4.0 * values[n - 1] + values[n - 2]) / (2.0 * h)
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]))
}

fn interp(values: &[f64], grid: UniformGrid, x: f64) -> f64 {
    let t = (x * grid.n as f64).clamp(0.0, grid.n as f64);
    let i = (t.floor() as usize).min(grid.n - 1);
    let w = t - i as f64;
    (1.0 - w) * values[i] + w * values[i + 1]
}

fn resample(values: &[f64], from: UniformGrid, to: UniformGrid) -> Vec<f64> {
    to.nodes()
        .iter()
        .map(|&x| interp(values, from, x))
        .collect()
}

impl ControlCoefficients {
    /// Derivatives are taken on the fine gain grid, then resampled.
    pub fn new(fine: &GainProfile, target: UniformGrid, dc: &DerivedConstants) -> Self {
        let g = fine.grid;
        let h = g.dx();
        let a_prime: Vec<f64> = fine.alpha_row.iter().map(|v| -v).collect();
        let b_prime = fine.beta_row.clone();
        let lam: Vec<f64> = g.nodes().iter().map(|&x| dc.lambda(x)).collect();
        let al: Vec<f64> = a_prime.iter().zip(&lam).map(|(a, l)| a * l).collect();
        let bl: Vec<f64> = b_prime.iter().zip(&lam).map(|(b, l)| b * l).collect();
        let p = derivative(&al, h);
        let q = derivative(&bl, h);
        Self {
            a_prime: resample(&a_prime, g, target),
            b_prime: resample(&b_prime, g, target),
            p: resample(&p, g, target),
            q: resample(&q, g, target),
        }
    }
}

/// Everything a run needs that does not change in time.
#[derive(Debug, Clone)]
pub struct LoopSetup {
    pub params: CraneParams,
    pub dc: DerivedConstants,
    pub exponents: Exponents,
    pub kernels_k: KernelSet,
    pub kernels_l: KernelSet,
    /// Gains on the transport grid.
    pub gains: GainProfile,
    pub control: ControlCoefficients,
    pub grid: UniformGrid,
    /// Arclength grid for the reconstructed cable.
    pub s_grid: UniformGrid,
    pub dt: f64,
    pub cfl_ratio: f64,
}

impl LoopSetup {
    pub fn new(
        params: CraneParams,
        kernels_k: KernelSet,
        kernels_l: KernelSet,
        fine_gains: &GainProfile,
        grid: UniformGrid,
        dt: f64,
    ) -> Result<Self> {
        params.validate()?;
        let dc = params.derived();
        let cfl_ratio = cfl_check(dt, grid.dx(), &dc)?;
        if grid.n < 2 {
            return Err(CraneError::InvalidParameter {
                field: "n_x".into(),
                rule: "transport grid needs n_x >= 2".into(),
            });
        }
        Ok(Self {
            params,
            dc,
            exponents: Exponents::new(params.nu1, params.nu2)?,
            kernels_k,
            kernels_l,
            gains: fine_gains.resample(grid)?,
            control: ControlCoefficients::new(fine_gains, grid, &dc),
            grid,
            s_grid: grid,
            dt,
            cfl_ratio,
        })
    }

    fn weighted_integral(&self, alpha: &[f64], beta: &[f64]) -> f64 {
        let w: Vec<f64> = (0..self.grid.len())
            .map(|i| self.gains.a[i] * alpha[i] + self.gains.b[i] * beta[i])
            .collect();
        trapezoid(&w, self.grid.dx())
    }
}

/// Evolving state of one run.
#[derive(Debug, Clone)]
pub struct LoopState {
    pub phi: PhiState,
    pub frame: FieldFrame,
    pub xp: f64,
    stepper: PhiStepper,
}

/// Maps physical initial data to `(phi, phi_dot)` and `(alpha, beta)`.
pub fn initialize(setup: &LoopSetup, init: &InitialData) -> Result<LoopState> {
    init.validate()?;
    let dc = &setup.dc;
    let grid = setup.grid;
    let xs = grid.nodes();
    let mut z1 = Vec::with_capacity(xs.len());
    let mut z0x = Vec::with_capacity(xs.len());
    for &x in &xs {
        let s = dc.x_to_s(x)?;
        z1.push(init.y1.at(s));
        z0x.push(init.y0.slope(s) * dc.ds_dx(x));
    }
    let (u, v) = riemann_forward(&z1, &z0x, grid, dc)?;
    let (alpha, beta) = setup.kernels_k.apply_direct(&u, &v, grid)?;
    let phi0 = 2.0 * init.xp0 / dc.lambda1.sqrt() + setup.weighted_integral(&alpha, &beta);
    let phi1 = setup.gains.mu * beta[grid.n];
    let phi = PhiState::new(0.0, phi0, phi1);
    let stepper = PhiStepper::new(phi, setup.dt, setup.exponents)?;
    let frame = FieldFrame {
        t: 0.0,
        alpha,
        beta,
    };
    let xp = reconstruct_platform(setup, phi0, &frame);
    Ok(LoopState {
        phi,
        frame,
        xp,
        stepper,
    })
}

/// `Xp = (sqrt(lambda(1))/2) (phi - int (a alpha + b beta))`.
pub fn reconstruct_platform(setup: &LoopSetup, phi: f64, frame: &FieldFrame) -> f64 {
    0.5 * setup.dc.lambda1.sqrt() * (phi - setup.weighted_integral(&frame.alpha, &frame.beta))
}

/// Advances the ODE, feeds `beta(1,t) = phi_dot / mu`, transports the
/// fields and recomputes the platform position.
pub fn step(setup: &LoopSetup, state: &mut LoopState) -> Result<()> {
    let phi = state.stepper.step()?;
    let frame = transport_step(
        &state.frame,
        phi.phi_dot / setup.gains.mu,
        setup.dt,
        setup.grid,
        &setup.dc,
    )?;
    state.frame = FieldFrame { t: phi.t, ..frame };
    state.phi = phi;
    state.xp = reconstruct_platform(setup, phi.phi, &state.frame);
    Ok(())
}

/// Inverse backstepping, inverse Riemann transform, integration of `z_x`
/// downward from `z(1) = Xp`, and resampling at the arclength nodes.
pub fn reconstruct_cable(setup: &LoopSetup, frame: &FieldFrame, xp: f64) -> Result<Vec<f64>> {
    let grid = setup.grid;
    let (u, v) = setup
        .kernels_l
        .apply_inverse(&frame.alpha, &frame.beta, grid)?;
    let (_, z_x) = riemann_inverse(&u, &v, grid, &setup.dc)?;
    let n = grid.n;
    let h = grid.dx();
    let mut z = vec![0.0; n + 1];
    z[n] = xp;
    for i in (0..n).rev() {
        z[i] = z[i + 1] - 0.5 * h * (z_x[i] + z_x[i + 1]);
    }
    setup
        .s_grid
        .nodes()
        .iter()
        .map(|&s| Ok(interp(&z, grid, setup.dc.s_to_x(s)?)))
        .collect()
}

/// `U` from the feedback law and `V = M U - (m + rho) g theta` with
/// `theta = y_s(1)`.
pub fn control_signals(
    setup: &LoopSetup,
    phi: &PhiState,
    frame: &FieldFrame,
    cable: &[f64],
) -> (f64, f64) {
    let grid = setup.grid;
    let dc = &setup.dc;
    let n = grid.n;
    let h = grid.dx();
    let (alpha, beta) = (&frame.alpha, &frame.beta);
    let c = &setup.control;
    let g = &setup.gains;

    let body: Vec<f64> = (0..=n)
        .map(|i| c.p[i] * alpha[i] + c.q[i] * beta[i])
        .collect();
    let lam = |i: usize| dc.lambda(grid.node(i));
    let edge = |i: usize| c.a_prime[i] * lam(i) * alpha[i] + c.b_prime[i] * lam(i) * beta[i];

    let ax = derivative(alpha, h);
    let bx = derivative(beta, h);
    let flux = |i: usize| {
        let alpha_t = -lam(i) * ax[i];
        let beta_t = lam(i) * bx[i];
        -g.a[i] * lam(i) * alpha_t + g.b[i] * lam(i) * beta_t
    };

    let integral = trapezoid(&body, h) - (edge(n) - edge(0)) + (flux(n) - flux(0));
    let ex = setup.exponents;
    let u = -0.5
        * dc.lambda1.sqrt()
        * (integral + signed_pow(phi.phi_dot, ex.nu2) + signed_pow(phi.phi, ex.nu1));

    let ds = setup.s_grid.dx();
    let m = cable.len() - 1;
    let theta = (3.0 * cable[m] - 4.0 * cable[m - 1] + cable[m - 2]) / (2.0 * ds);
    let p = &setup.params;
    let v = p.platform_mass * u - (p.m + p.rho) * p.g * theta;
    (u, v)
}

/// Observed settling times of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settling {
    /// Extinction of `(phi, phi_dot)` at the ODE threshold.
    pub t0: Option<f64>,
    /// Extinction of fields, platform and cable at the requested threshold.
    pub t1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub x_nodes: Vec<f64>,
    pub s_nodes: Vec<f64>,
    pub phi: Vec<PhiState>,
    pub frames: Vec<FieldFrame>,
    pub xp: Vec<f64>,
    pub cable: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub settling: Settling,
}

impl SimulationResult {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.phi.iter().map(|s| s.t)
    }

    /// `max(|alpha|, |beta|, |Xp|, |y|)` at step `k`.
    pub fn magnitude(&self, k: usize) -> f64 {
        let cable = self.cable[k].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        self.frames[k].max_abs().max(self.xp[k].abs()).max(cable)
    }
}

pub fn detect_settling(result: &SimulationResult, threshold: f64) -> Settling {
    let idx: Vec<usize> = (0..result.phi.len()).collect();
    let t0 = settling_time(
        &result.phi,
        |s| s.t,
        PhiState::magnitude,
        SETTLING_THRESHOLD,
    );
    let t1 = settling_time(
        &idx,
        |&k| result.phi[k].t,
        |&k| result.magnitude(k),
        threshold,
    );
    Settling { t0, t1 }
}

/// Runs the closed loop from `init` up to `t_end`.
pub fn simulate(
    setup: &LoopSetup,
    init: &InitialData,
    t_end: f64,
    threshold: f64,
) -> Result<SimulationResult> {
    let mut state = initialize(setup, init)?;
    let steps = step_count(setup.dt, t_end);
    let mut result = SimulationResult {
        x_nodes: setup.grid.nodes(),
        s_nodes: setup.s_grid.nodes(),
        phi: Vec::with_capacity(steps + 1),
        frames: Vec::with_capacity(steps + 1),
        xp: Vec::with_capacity(steps + 1),
        cable: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
        v: Vec::with_capacity(steps + 1),
        settling: Settling { t0: None, t1: None },
    };
    for k in 0..=steps {
        if k > 0 {
            step(setup, &mut state)?;
        }
        let cable = reconstruct_cable(setup, &state.frame, state.xp)?;
        let (u, v) = control_signals(setup, &state.phi, &state.frame, &cable);
        result.phi.push(state.phi);
        result.frames.push(state.frame.clone());
        result.xp.push(state.xp);
        result.cable.push(cable);
        result.u.push(u);
        result.v.push(v);
    }
    result.settling = detect_settling(&result, threshold);
    Ok(result)
}
