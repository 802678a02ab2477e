//! Property suite behind `crane check`.
//!
//! Each check recomputes a quantity end to end and compares it with a fixed
//! reference value, a closed form or an independent numerical route.
//! Random inputs come from a seeded generator, so a run is reproducible.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::closed_loop::{simulate, InitialData, LoopSetup, DEFAULT_T1_THRESHOLD};
use crate::config::RunConfig;
use crate::error::Result;
use crate::kernels::{
    compute_gains, invert_kernels_volterra, solve_direct_kernels, solve_inverse_kernels_goursat,
    KernelCoefficients, KernelSet, TriangularGrid,
};
use crate::model::{riemann_forward, riemann_inverse, CraneParams, DerivedConstants, UniformGrid};
use crate::ode::{
    homogeneous_norm, integrate_phi, rk4_step, strict_negativity_check, transform_forward,
    transform_inverse, DilationParams, Exponents, PhiState,
};
use crate::pipeline::run_pipeline;
use crate::transport::{
    characteristic_alpha, characteristic_beta, transport_step, FieldFrame, TimeSeries,
};

const SEED: u64 = 0x5eed_c7a1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("{tag} {}: {}", self.name, self.detail)
    }
}

fn goursat_pair(n: usize, dc: DerivedConstants) -> Result<(KernelSet, KernelSet)> {
    let c = KernelCoefficients::new(dc);
    let grid = TriangularGrid::new(n);
    Ok((
        solve_direct_kernels(grid, &c)?,
        solve_inverse_kernels_goursat(grid, &c)?,
    ))
}

pub fn kernel_boundary_values() -> Result<CheckOutcome> {
    let dc = CraneParams::default().derived();
    let start = Instant::now();
    let (_, l) = goursat_pair(200, dc)?;
    let secs = start.elapsed().as_secs_f64();
    let n = 200;
    let lab = l.fields[1].get(n, n);
    let laa_11 = l.fields[0].get(n, n);
    let laa_10 = l.fields[0].get(n, 0);
    let ok = (lab - dc.c2 / 4.0).abs() < 1e-12
        && (laa_11 - 0.1407).abs() <= 0.003
        && (laa_10 - 0.0787).abs() <= 0.002
        && secs < 30.0;
    Ok(CheckOutcome::new(
        "kernel boundary values",
        ok,
        format!("L_ab(1,1)={lab:.7} L_aa(1,1)={laa_11:.6} L_aa(1,0)={laa_10:.6} in {secs:.2}s"),
    ))
}

pub fn gain_mu() -> Result<CheckOutcome> {
    let dc = CraneParams::default().derived();
    let (_, l) = goursat_pair(200, dc)?;
    let mu = compute_gains(&l, &dc).mu;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut min_mu = f64::INFINITY;
    for _ in 0..20 {
        let p = CraneParams {
            m: rng.gen_range(0.5..=5.0),
            rho: rng.gen_range(0.5..=5.0),
            g: rng.gen_range(1.0..=20.0),
            ..CraneParams::default()
        };
        let dc = p.derived();
        let (_, l) = goursat_pair(60, dc)?;
        min_mu = min_mu.min(compute_gains(&l, &dc).mu);
    }
    let ok = (mu - 2.379).abs() <= 0.02 && min_mu >= 2.0;
    Ok(CheckOutcome::new(
        "gain mu",
        ok,
        format!("mu={mu:.5}, min over 20 sampled parameter sets={min_mu:.5}"),
    ))
}

pub fn kernel_symmetry_positivity() -> Result<CheckOutcome> {
    let dc = CraneParams::default().derived();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [50, 100, 200] {
        let (_, l) = goursat_pair(n, dc)?;
        let dx = 1.0 / n as f64;
        let d1 = l.fields[0].max_abs_diff(&l.fields[3]);
        let d2 = l.fields[1].max_abs_diff(&l.fields[2]);
        let min = l
            .fields
            .iter()
            .map(|f| f.min())
            .fold(f64::INFINITY, f64::min);
        ok &= d1 < 5.0 * dx && d2 < 5.0 * dx && min >= 0.0;
        parts.push(format!("n={n}: {d1:.2e} {d2:.2e} min={min:.2e}"));
    }
    Ok(CheckOutcome::new(
        "kernel symmetry and positivity",
        ok,
        parts.join("; "),
    ))
}

pub fn volterra_cross_check() -> Result<CheckOutcome> {
    let dc = CraneParams::default().derived();
    let mut errs = Vec::new();
    for n in [100, 200] {
        let (k, l) = goursat_pair(n, dc)?;
        errs.push(invert_kernels_volterra(&k).max_abs_diff(&l));
    }
    let ratio = errs[1] / errs[0];
    Ok(CheckOutcome::new(
        "Volterra vs Goursat",
        (0.35..=0.65).contains(&ratio),
        format!(
            "err100={:.3e} err200={:.3e} ratio={ratio:.3}",
            errs[0], errs[1]
        ),
    ))
}

pub fn ode_settling() -> Result<CheckOutcome> {
    let ex = Exponents::homogeneous(0.5)?;
    let dt = 0.01;
    let traj = integrate_phi(PhiState::new(0.0, 0.5594, 0.0), dt, 6.0, ex)?;
    let t0 = traj.settling_time.unwrap_or(f64::NAN);
    let h = dt / 100.0;
    let mut x = [0.5594, 0.0];
    let (mut dev, mut dev_dot) = (0.0_f64, 0.0_f64);
    for s in traj.states.iter().skip(1) {
        for _ in 0..100 {
            x = rk4_step(x, h, ex);
        }
        if s.t < t0 {
            dev = dev.max((s.phi - x[0]).abs());
            dev_dot = dev_dot.max((s.phi_dot - x[1]).abs());
        }
    }
    let ok = (t0 - 4.23).abs() <= 0.15 && dev < 5e-3;
    Ok(CheckOutcome::new(
        "ODE settling",
        ok,
        format!("T0={t0:.2}; before T0, max |phi - fine RK4|={dev:.3e} (limit 5e-3), max |phi_dot - fine RK4|={dev_dot:.3e}"),
    ))
}

pub fn strict_negativity() -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 6);
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    for nu2 in [0.5, 0.2, 0.35, 0.7, 0.9] {
        let ex = Exponents::homogeneous(nu2)?;
        for _ in 0..100_000 {
            let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
            let z1 = rng.gen_range(-1.0..1.0) * scale;
            let mut z2 = rng.gen_range(-1.0..1.0) * scale;
            if z2 == 0.0 {
                z2 = scale;
            }
            let v = strict_negativity_check([z1, z2], ex)?;
            worst = worst.max(v);
            ok &= v < 0.0;
        }
    }
    Ok(CheckOutcome::new(
        "strict negativity",
        ok,
        format!("5 x 100000 states, largest bracket product {worst:.3e}"),
    ))
}

/// Max error of the pure-decay transport run against the characteristic
/// solution over `t in [0, 1]`.
pub fn pure_decay_error(n_x: usize, dt: f64, dc: &DerivedConstants) -> Result<f64> {
    let grid = UniformGrid::new(n_x);
    let pi = std::f64::consts::PI;
    let beta0 = |x: f64| (pi * x).sin().powi(2);
    let alpha0 = |x: f64| (pi * x).sin().powi(2) * (1.0 + x);
    let nodes = grid.nodes();
    let mut frame = FieldFrame {
        t: 0.0,
        alpha: nodes.iter().map(|&x| alpha0(x)).collect(),
        beta: nodes.iter().map(|&x| beta0(x)).collect(),
    };
    let quiet = TimeSeries::new(0.0, dt, vec![0.0; (2.0 / dt) as usize + 2]);
    let mu = 2.0;
    let steps = (1.0 / dt).round() as usize;
    let mut err = 0.0_f64;
    for _ in 0..steps {
        frame = transport_step(&frame, 0.0, dt, grid, dc)?;
        let t = frame.t;
        for (i, &x) in nodes.iter().enumerate() {
            let b = characteristic_beta(x, t, beta0, &quiet, mu, dc)?;
            let a = characteristic_alpha(
                x,
                t,
                alpha0,
                |s| characteristic_beta(0.0, s, beta0, &quiet, mu, dc),
                dc,
            )?;
            err = err
                .max((frame.beta[i] - b).abs())
                .max((frame.alpha[i] - a).abs());
        }
    }
    Ok(err)
}

pub fn transport_convergence() -> Result<CheckOutcome> {
    let dc = CraneParams::default().derived();
    let e1 = pure_decay_error(20, 0.01, &dc)?;
    let e2 = pure_decay_error(40, 0.005, &dc)?;
    let ratio = e2 / e1;
    Ok(CheckOutcome::new(
        "transport convergence",
        (0.35..=0.65).contains(&ratio),
        format!("err(20,0.01)={e1:.3e} err(40,0.005)={e2:.3e} ratio={ratio:.3}"),
    ))
}

pub fn closed_loop_reproduction() -> Result<CheckOutcome> {
    let cfg = RunConfig::default();
    let start = Instant::now();
    let dc = cfg.params.derived();
    let (k, l) = goursat_pair(cfg.kernel_n, dc)?;
    let gains = compute_gains(&l, &dc);
    let setup = LoopSetup::new(cfg.params, k, l, &gains, UniformGrid::new(cfg.n_x), cfg.dt)?;
    let init = InitialData::rigid(0.5, cfg.n_x + 1);
    let r = simulate(&setup, &init, cfg.t_end, DEFAULT_T1_THRESHOLD)?;
    let secs = start.elapsed().as_secs_f64();
    let t0 = r.settling.t0.unwrap_or(f64::NAN);
    let t1 = r.settling.t1.unwrap_or(f64::NAN);
    let late = r
        .phi
        .iter()
        .enumerate()
        .filter(|(_, s)| s.t >= 5.0 - 1e-9)
        .map(|(k, _)| r.cable[k].iter().fold(r.xp[k].abs(), |m, v| m.max(v.abs())))
        .fold(0.0_f64, f64::max);
    let ok =
        (t1 - 4.76).abs() <= 0.2 && (t1 - t0 - 0.529).abs() <= 0.1 && late < 1e-2 && secs < 60.0;
    Ok(CheckOutcome::new(
        "closed-loop reproduction",
        ok,
        format!(
            "T0={t0:.2} T1={t1:.2} T1-T0={:.3} late max={late:.2e} in {secs:.2}s",
            t1 - t0
        ),
    ))
}

pub fn round_trips() -> Result<CheckOutcome> {
    let dc = CraneParams::default().derived();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 9);
    let mut sx = 0.0_f64;
    for _ in 0..1000 {
        let s: f64 = rng.gen_range(0.0..=1.0);
        sx = sx.max((dc.x_to_s(dc.s_to_x(s)?)? - s).abs());
    }
    let grid = UniformGrid::new(100);
    let mut riemann = 0.0_f64;
    for _ in 0..1000 {
        let zt: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let zx: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (u, v) = riemann_forward(&zt, &zx, grid, &dc)?;
        let (a, b) = riemann_inverse(&u, &v, grid, &dc)?;
        for i in 0..grid.len() {
            riemann = riemann.max((a[i] - zt[i]).abs()).max((b[i] - zx[i]).abs());
        }
    }
    let (k, l) = goursat_pair(100, dc)?;
    let mut back = 0.0_f64;
    for _ in 0..1000 {
        let c: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let field =
            |x: f64, o: usize| c[o] + c[o + 1] * (3.0 * x).sin() + c[o + 2] * (2.0 * x).cos();
        let u: Vec<f64> = grid.nodes().iter().map(|&x| field(x, 0)).collect();
        let v: Vec<f64> = grid.nodes().iter().map(|&x| field(x, 3)).collect();
        let (al, be) = k.apply_direct(&u, &v, grid)?;
        let (u2, v2) = l.apply_inverse(&al, &be, grid)?;
        for i in 0..grid.len() {
            back = back.max((u2[i] - u[i]).abs()).max((v2[i] - v[i]).abs());
        }
    }
    let dp = DilationParams::new(0.5);
    let mut phi = 0.0_f64;
    for _ in 0..1000 {
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        let x = [
            rng.gen_range(-1.0..1.0) * scale,
            rng.gen_range(-1.0..1.0) * scale,
        ];
        let y = transform_inverse(transform_forward(x, &dp), &dp);
        let (norm, _) = homogeneous_norm(x, &dp)?;
        phi = phi.max((y[0] - x[0]).abs().max((y[1] - x[1]).abs()) / norm.max(1.0));
    }
    let dx = grid.dx();
    let ok = sx < 1e-12 && riemann < 1e-12 && back < dx && phi < 1e-8;
    Ok(CheckOutcome::new(
        "transform round trips",
        ok,
        format!("s<->x {sx:.1e}, Riemann {riemann:.1e}, backstepping {back:.2e} (dx={dx}), Phi {phi:.1e}"),
    ))
}

pub fn determinism(scratch: &Path) -> Result<CheckOutcome> {
    let cfg = RunConfig {
        t_end: 1.0,
        kernel_n: 60,
        ..RunConfig::default()
    };
    let (a, b) = (scratch.join("run_a"), scratch.join("run_b"));
    let (_, files_a) = run_pipeline(&cfg, &a)?;
    let (_, files_b) = run_pipeline(&cfg, &b)?;
    let mut same = files_a.len() == files_b.len();
    for (fa, fb) in files_a.iter().zip(&files_b) {
        let read = |p: &Path| std::fs::read(p).map_err(|e| crate::CraneError::io(p, e));
        same &= read(fa)? == read(fb)?;
    }
    Ok(CheckOutcome::new(
        "determinism",
        same,
        format!("{} files compared byte for byte", files_a.len()),
    ))
}

pub type CheckFn = fn(&Path) -> Result<CheckOutcome>;

/// Every check in order. The path receives scratch output of the
/// determinism runs.
pub const SUITE: &[(&str, CheckFn)] = &[
    ("kernel boundary values", |_| kernel_boundary_values()),
    ("gain mu", |_| gain_mu()),
    ("kernel symmetry and positivity", |_| {
        kernel_symmetry_positivity()
    }),
    ("Volterra vs Goursat", |_| volterra_cross_check()),
    ("ODE settling", |_| ode_settling()),
    ("strict negativity", |_| strict_negativity()),
    ("transport convergence", |_| transport_convergence()),
    ("closed-loop reproduction", |_| closed_loop_reproduction()),
    ("transform round trips", |_| round_trips()),
    ("determinism", determinism),
];
