//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Reference values are either published figures or are recomputed here
//! from first principles (wave speed from the tension law, a private RK4,
//! closed-form characteristics, the unsimplified Lyapunov condition), so
//! they do not share code paths with the library routines under test.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crane_core::closed_loop::{simulate, InitialData, LoopSetup, DEFAULT_T1_THRESHOLD};
use crane_core::kernels::{
    compute_gains, invert_kernels_volterra, solve_direct_kernels, solve_inverse_kernels_goursat,
    KernelCoefficients, KernelSet, TriangularGrid,
};
use crane_core::model::{riemann_forward, riemann_inverse, CraneParams, UniformGrid};
use crane_core::ode::{
    homogeneous_norm, integrate_phi, strict_negativity_check, transform_forward, transform_inverse,
    DilationParams, Exponents, PhiState,
};
use crane_core::transport::{transport_step, FieldFrame};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

/// Wave speed in the normalized coordinate, from `d(s) = g s + g m / rho`
/// and `x(s) = ln(1 + rho s / m) / ln(1 + rho / m)`.
fn physical_lambda(p: &CraneParams, x: f64) -> f64 {
    let k = (1.0 + p.rho / p.m).ln();
    let s = ((x * k).exp() - 1.0) * p.m / p.rho;
    let speed_s = (p.g * s + p.g * p.m / p.rho).sqrt();
    let dx_ds = (p.rho / p.m) / ((1.0 + p.rho * s / p.m) * k);
    speed_s * dx_ds
}

/// `(C1, C2)` with `lambda(x) = C1 exp(-C2 x)`.
fn physical_constants(p: &CraneParams) -> (f64, f64) {
    let l0 = physical_lambda(p, 0.0);
    (l0, (l0 / physical_lambda(p, 1.0)).ln())
}

fn kernels(n: usize, p: &CraneParams) -> (KernelSet, KernelSet) {
    let c = KernelCoefficients::new(p.derived());
    let grid = TriangularGrid::new(n);
    (
        solve_direct_kernels(grid, &c).unwrap(),
        solve_inverse_kernels_goursat(grid, &c).unwrap(),
    )
}

/// `2 + int_0^1 (L_aa + L_ab + L_ba + L_bb)(1, xi) dxi` by the trapezoid rule.
fn mu_by_trapezoid(l: &KernelSet) -> f64 {
    let n = l.grid().n;
    let h = 1.0 / n as f64;
    let row = |j: usize| l.fields.iter().map(|f| f.get(n, j)).sum::<f64>();
    let inner: f64 = (1..n).map(row).sum();
    2.0 + h * (inner + 0.5 * (row(0) + row(n)))
}

fn criterion_1() -> Outcome {
    let p = CraneParams::default();
    let (_, c2) = physical_constants(&p);
    let start = Instant::now();
    let (_, l) = kernels(200, &p);
    let secs = start.elapsed().as_secs_f64();
    let lab = l.fields[1].get(200, 200);
    let laa_11 = l.fields[0].get(200, 200);
    let laa_10 = l.fields[0].get(200, 0);
    let ok = (c2 / 4.0 - 0.0866434).abs() < 1e-7
        && (lab - c2 / 4.0).abs() < 1e-12
        && (laa_11 - 0.1407).abs() <= 0.003
        && (laa_10 - 0.0787).abs() <= 0.002
        && secs < 30.0;
    (
        ok,
        format!("L_ab(1,1)={lab:.7} (C2/4={:.7}), L_aa(1,1)={laa_11:.6}, L_aa(1,0)={laa_10:.6}, {secs:.2}s", c2 / 4.0),
    )
}

fn criterion_2() -> Outcome {
    let p = CraneParams::default();
    let (_, l) = kernels(200, &p);
    let mu = mu_by_trapezoid(&l);
    let lib_mu = compute_gains(&l, &p.derived()).mu;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut min_mu = f64::INFINITY;
    for _ in 0..40 {
        let q = CraneParams {
            m: rng.gen_range(0.5..=5.0),
            rho: rng.gen_range(0.5..=5.0),
            g: rng.gen_range(1.0..=20.0),
            ..CraneParams::default()
        };
        let (_, l) = kernels(50, &q);
        min_mu = min_mu.min(mu_by_trapezoid(&l));
    }
    let ok = (mu - 2.379).abs() <= 0.02 && (mu - lib_mu).abs() < 1e-12 && min_mu >= 2.0;
    (
        ok,
        format!(
            "mu={mu:.5} (library {lib_mu:.5}), min mu over 40 sampled parameter sets={min_mu:.5}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let p = CraneParams::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [50, 100, 200] {
        let (_, l) = kernels(n, &p);
        let dx = 1.0 / n as f64;
        let grid = l.grid();
        let (mut d1, mut d2, mut min) = (0.0_f64, 0.0_f64, f64::INFINITY);
        for (i, j) in grid.nodes() {
            let [aa, ab, ba, bb] = l.matrix(i, j);
            d1 = d1.max((aa - bb).abs());
            d2 = d2.max((ab - ba).abs());
            min = min.min(aa.min(ab).min(ba).min(bb));
        }
        ok &= d1 < 5.0 * dx && d2 < 5.0 * dx && min >= 0.0;
        parts.push(format!(
            "n={n}: |Laa-Lbb|={d1:.1e} |Lab-Lba|={d2:.1e} min={min:.4}"
        ));
    }
    (ok, parts.join("; "))
}

fn criterion_4() -> Outcome {
    let p = CraneParams::default();
    let err = |n: usize| {
        let (k, l) = kernels(n, &p);
        invert_kernels_volterra(&k).max_abs_diff(&l)
    };
    let (e1, e2) = (err(100), err(200));
    let ratio = e2 / e1;
    let ok = (0.35..=0.65).contains(&ratio) && e2 < 1.0 / 200.0;
    (
        ok,
        format!("max|L_volterra - L_goursat|: n=100 {e1:.3e}, n=200 {e2:.3e}, ratio {ratio:.3}"),
    )
}

fn haimo(x: [f64; 2], nu1: f64, nu2: f64) -> [f64; 2] {
    let sp = |v: f64, e: f64| v.signum() * v.abs().powf(e);
    [x[1], -sp(x[0], nu1) - sp(x[1], nu2)]
}

fn rk4(x: [f64; 2], h: f64, nu1: f64, nu2: f64) -> [f64; 2] {
    let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
    let k1 = haimo(x, nu1, nu2);
    let k2 = haimo(add(x, k1, h / 2.0), nu1, nu2);
    let k3 = haimo(add(x, k2, h / 2.0), nu1, nu2);
    let k4 = haimo(add(x, k3, h), nu1, nu2);
    [
        x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

fn criterion_5() -> Outcome {
    let ex = Exponents::homogeneous(0.5).unwrap();
    let dt = 0.01;
    let traj = integrate_phi(PhiState::new(0.0, 0.5594, 0.0), dt, 6.0, ex).unwrap();
    let t0 = traj.settling_time.unwrap_or(f64::NAN);
    let h = dt / 100.0;
    let mut x = [0.5594, 0.0];
    let (mut dev, mut dev_dot) = (0.0_f64, 0.0_f64);
    for s in &traj.states[1..] {
        for _ in 0..100 {
            x = rk4(x, h, 1.0 / 3.0, 0.5);
        }
        if s.t < t0 {
            dev = dev.max((s.phi - x[0]).abs());
            dev_dot = dev_dot.max((s.phi_dot - x[1]).abs());
        }
    }
    let ok = (t0 - 4.23).abs() <= 0.15 && dev < 5e-3;
    (
        ok,
        format!("T0={t0:.2} (4.23 +- 0.15); before T0 max|phi - RK4(dt/100)|={dev:.3e} (limit 5e-3), max|phi_dot - RK4|={dev_dot:.3e}"),
    )
}

/// `z^T [ (I - G) z z^T / (z^T G z) + I ] F(z / |z|)` with `P = I`.
fn lyapunov_derivative(z: [f64; 2], nu1: f64, nu2: f64) -> f64 {
    let r1 = (2.0 - nu2) / (1.0 - nu2);
    let r2 = 1.0 / (1.0 - nu2);
    let r = z[0].hypot(z[1]);
    let f = haimo([z[0] / r, z[1] / r], nu1, nu2);
    let zgz = r1 * z[0] * z[0] + r2 * z[1] * z[1];
    let ztf = z[0] * f[0] + z[1] * f[1];
    let m = [
        (1.0 - r1) * z[0] * ztf / zgz + f[0],
        (1.0 - r2) * z[1] * ztf / zgz + f[1],
    ];
    z[0] * m[0] + z[1] * m[1]
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pairs = [0.5, 0.15, 0.3, 0.75, 0.95].map(|nu2: f64| (nu2, nu2 / (2.0 - nu2)));
    let mut ok = true;
    let (mut worst, mut sign_mismatch) = (f64::NEG_INFINITY, 0usize);
    for (nu2, nu1) in pairs {
        let ex = Exponents::new(nu1, nu2).unwrap();
        for _ in 0..100_000 {
            let scale = 10f64.powf(rng.gen_range(-4.0..4.0));
            let z1 = rng.gen_range(-1.0..1.0) * scale;
            let z2 = loop {
                let v: f64 = rng.gen_range(-1.0..1.0);
                if v != 0.0 {
                    break v * scale;
                }
            };
            let bracket = strict_negativity_check([z1, z2], ex).unwrap();
            let full = lyapunov_derivative([z1, z2], nu1, nu2);
            worst = worst.max(bracket);
            ok &= bracket < 0.0;
            sign_mismatch += usize::from(full >= 0.0);
        }
    }
    ok &= sign_mismatch == 0;
    (
        ok,
        format!("5 exponent pairs x 100000 states: largest bracket {worst:.3e}, non-negative full derivatives {sign_mismatch}"),
    )
}

/// Closed-form pure-decay solution on `lambda = c1 exp(-c2 x)` with zero
/// input at `x = 1`.
struct Characteristics {
    c1: f64,
    c2: f64,
}

impl Characteristics {
    fn travel(&self, x: f64) -> f64 {
        ((self.c2 * x).exp() - 1.0) / (self.c1 * self.c2)
    }

    fn position(&self, tau: f64) -> f64 {
        (1.0 + self.c1 * self.c2 * tau).ln() / self.c2
    }

    fn beta(&self, x: f64, t: f64, beta0: &dyn Fn(f64) -> f64) -> f64 {
        let tau = self.travel(x) + t;
        if tau >= self.travel(1.0) {
            0.0
        } else {
            beta0(self.position(tau))
        }
    }

    fn alpha(
        &self,
        x: f64,
        t: f64,
        alpha0: &dyn Fn(f64) -> f64,
        beta0: &dyn Fn(f64) -> f64,
    ) -> f64 {
        let tau = self.travel(x) - t;
        if tau >= 0.0 {
            alpha0(self.position(tau))
        } else {
            self.beta(0.0, -tau, beta0)
        }
    }
}

fn transport_error(n_x: usize, dt: f64) -> f64 {
    let p = CraneParams::default();
    let dc = p.derived();
    let (c1, c2) = physical_constants(&p);
    let exact = Characteristics { c1, c2 };
    let pi = std::f64::consts::PI;
    let beta0 = |x: f64| (pi * x).sin().powi(2);
    let alpha0 = |x: f64| (pi * x).sin().powi(2) * (1.0 + x);
    let grid = UniformGrid::new(n_x);
    let xs = grid.nodes();
    let mut frame = FieldFrame {
        t: 0.0,
        alpha: xs.iter().map(|&x| alpha0(x)).collect(),
        beta: xs.iter().map(|&x| beta0(x)).collect(),
    };
    let mut err = 0.0_f64;
    for k in 1..=(1.0 / dt).round() as usize {
        frame = transport_step(&frame, 0.0, dt, grid, &dc).unwrap();
        let t = k as f64 * dt;
        for (i, &x) in xs.iter().enumerate() {
            err = err
                .max((frame.beta[i] - exact.beta(x, t, &beta0)).abs())
                .max((frame.alpha[i] - exact.alpha(x, t, &alpha0, &beta0)).abs());
        }
    }
    err
}

fn criterion_7() -> Outcome {
    let (e1, e2) = (transport_error(20, 0.01), transport_error(40, 0.005));
    let ratio = e2 / e1;
    (
        (0.35..=0.65).contains(&ratio),
        format!("sup error over t in [0,1]: (20, 0.01) {e1:.4e}, (40, 0.005) {e2:.4e}, ratio {ratio:.3}"),
    )
}

fn criterion_8() -> Outcome {
    let p = CraneParams::default();
    let (c1, c2) = physical_constants(&p);
    let crossing = 2.0 * (c2.exp() - 1.0) / (c1 * c2);
    let start = Instant::now();
    let (k, l) = kernels(200, &p);
    let gains = compute_gains(&l, &p.derived());
    let setup = LoopSetup::new(p, k, l, &gains, UniformGrid::new(20), 0.01).unwrap();
    let r = simulate(
        &setup,
        &InitialData::rigid(0.5, 21),
        6.0,
        DEFAULT_T1_THRESHOLD,
    )
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let t0 = r.settling.t0.unwrap_or(f64::NAN);
    let t1 = r.settling.t1.unwrap_or(f64::NAN);
    let mut late = 0.0_f64;
    for (k, s) in r.phi.iter().enumerate() {
        if s.t >= 5.0 - 1e-9 {
            late = r.cable[k]
                .iter()
                .fold(late.max(r.xp[k].abs()), |m, v| m.max(v.abs()));
        }
    }
    let ok = (crossing - 0.529).abs() < 5e-4
        && (t1 - 4.76).abs() <= 0.2
        && (t1 - t0 - 0.529).abs() <= 0.1
        && late < 1e-2
        && secs < 60.0;
    (
        ok,
        format!(
            "T0={t0:.2}, T1={t1:.2}, T1-T0={:.3} (2 Lambda(1)={crossing:.4}), max(|Xp|,|y|) for t>=5: {late:.1e}, {secs:.2}s",
            t1 - t0
        ),
    )
}

fn criterion_9() -> Outcome {
    let p = CraneParams::default();
    let dc = p.derived();
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    let mut sx = 0.0_f64;
    for k in 0..1000 {
        let s = k as f64 / 999.0;
        sx = sx.max((dc.x_to_s(dc.s_to_x(s).unwrap()).unwrap() - s).abs());
    }

    let grid = UniformGrid::new(100);
    let rand_vec = |rng: &mut ChaCha8Rng| {
        (0..grid.len())
            .map(|_| rng.gen_range(-5.0..5.0))
            .collect::<Vec<f64>>()
    };
    let mut riemann = 0.0_f64;
    for _ in 0..1000 {
        let (zt, zx) = (rand_vec(&mut rng), rand_vec(&mut rng));
        let (u, v) = riemann_forward(&zt, &zx, grid, &dc).unwrap();
        let (a, b) = riemann_inverse(&u, &v, grid, &dc).unwrap();
        for i in 0..grid.len() {
            riemann = riemann.max((a[i] - zt[i]).abs()).max((b[i] - zx[i]).abs());
        }
    }

    let (k, l) = kernels(100, &p);
    let mut back = 0.0_f64;
    for _ in 0..1000 {
        let c: [f64; 8] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let field = |x: f64, o: usize| {
            c[o] + c[o + 1] * x + c[o + 2] * (2.0 * x).sin() + c[o + 3] * (3.0 * x).cos()
        };
        let u: Vec<f64> = grid.nodes().iter().map(|&x| field(x, 0)).collect();
        let v: Vec<f64> = grid.nodes().iter().map(|&x| field(x, 4)).collect();
        let (al, be) = k.apply_direct(&u, &v, grid).unwrap();
        let (u2, v2) = l.apply_inverse(&al, &be, grid).unwrap();
        for i in 0..grid.len() {
            back = back.max((u2[i] - u[i]).abs()).max((v2[i] - v[i]).abs());
        }
    }

    let dp = DilationParams::new(0.5);
    let mut phi = 0.0_f64;
    let mut norm_gap = 0.0_f64;
    for _ in 0..1000 {
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        let x = [
            rng.gen_range(-1.0..1.0) * scale,
            rng.gen_range(-1.0..1.0) * scale,
        ];
        let z = transform_forward(x, &dp);
        let y = transform_inverse(z, &dp);
        let (nd, _) = homogeneous_norm(x, &dp).unwrap();
        phi = phi.max((y[0] - x[0]).abs().max((y[1] - x[1]).abs()) / x[0].abs().max(x[1].abs()));
        norm_gap = norm_gap.max((z[0].hypot(z[1]) - nd).abs() / nd);
    }

    let dx = grid.dx();
    let ok = sx < 1e-12 && riemann < 1e-12 && back < dx && phi < 1e-8 && norm_gap < 1e-8;
    (
        ok,
        format!(
            "s<->x {sx:.1e}, Riemann {riemann:.1e}, backstepping {back:.2e} (dx {dx}), Phi {phi:.1e} (relative), |Phi(x)| vs ||x||_d {norm_gap:.1e}"
        ),
    )
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_crane"))
            .args(["simulate", "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        out
    };
    let (a, b) = (run("a"), run("b"));
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let read = |d: &Path, n: &std::ffi::OsStr| std::fs::read(d.join(n)).unwrap();
    let differing: Vec<_> = names
        .iter()
        .filter(|n| read(&a, n) != read(&b, n))
        .collect();
    (
        names.len() == 9 && differing.is_empty(),
        format!(
            "{} CSV files from two CLI runs, {} differing",
            names.len(),
            differing.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("kernel boundary values", criterion_1),
        ("gain mu and its lower bound", criterion_2),
        ("kernel symmetry and positivity", criterion_3),
        ("Volterra vs Goursat inverse kernels", criterion_4),
        ("ODE settling and fine-step oracle", criterion_5),
        ("strict negativity", criterion_6),
        ("transport convergence", criterion_7),
        ("closed-loop settling", criterion_8),
        ("transform round trips", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let (ok, detail) = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        println!(
            "{} criterion {} ({name}): {detail}",
            if ok { "PASS" } else { "FAIL" },
            k + 1
        );
        failed += usize::from(!ok);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
