//! Kernels, gains and the closed-loop run, plus their CSV artifacts.
//!
//! | file            | columns                       |
//! |-----------------|-------------------------------|
//! | `kernels_K.csv` | `x,xi,value,field`            |
//! | `kernels_L.csv` | `x,xi,value,field`            |
//! | `gains.csv`     | `x,a,b,a0,b0,mu`              |
//! | `phi.csv`       | `t,phi,phi_dot`               |
//! | `fields.csv`    | `t,x,alpha,beta`              |
//! | `platform.csv`  | `t,xp`                        |
//! | `cable.csv`     | `t,s,y`                       |
//! | `control.csv`   | `t,U,V`                       |
//! | `summary.csv`   | `quantity,value`              |
//!
//! Numbers are written in shortest round-trip form, so identical inputs
//! give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use crate::closed_loop::{simulate, LoopSetup, SimulationResult};
use crate::config::RunConfig;
use crate::error::{CraneError, Result};
use crate::kernels::{
    compute_gains, solve_direct_kernels, solve_inverse_kernels_goursat, GainProfile,
    KernelCoefficients, KernelSet, TriangularGrid,
};
use crate::model::UniformGrid;
use crate::transport::cfl_check;

/// Formats a float so that parsing the text gives back the same bits.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone)]
pub struct KernelStage {
    pub k: KernelSet,
    pub l: KernelSet,
    /// Gains on the kernel grid.
    pub gains: GainProfile,
}

pub fn compute_kernels(cfg: &RunConfig) -> Result<KernelStage> {
    let dc = cfg.params.derived();
    let coeffs = KernelCoefficients::new(dc);
    let grid = TriangularGrid::new(cfg.kernel_n);
    let k = solve_direct_kernels(grid, &coeffs)?;
    let l = solve_inverse_kernels_goursat(grid, &coeffs)?;
    let gains = compute_gains(&l, &dc);
    Ok(KernelStage { k, l, gains })
}

pub fn run_simulation(cfg: &RunConfig, stage: &KernelStage) -> Result<SimulationResult> {
    let setup = LoopSetup::new(
        cfg.params,
        stage.k.clone(),
        stage.l.clone(),
        &stage.gains,
        UniformGrid::new(cfg.n_x),
        cfg.dt,
    )?;
    simulate(
        &setup,
        &cfg.initial_data()?,
        cfg.t_end,
        cfg.settling_threshold,
    )
}

/// Headline numbers of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mu: f64,
    pub a0: f64,
    pub cfl_ratio: f64,
    pub t0_observed: Option<f64>,
    pub t1_observed: Option<f64>,
}

impl Summary {
    fn rows(&self, with_settling: bool) -> Vec<(&'static str, String)> {
        let mut rows = vec![
            ("mu", fmt_f64(self.mu)),
            ("a0", fmt_f64(self.a0)),
            ("cfl_ratio", fmt_f64(self.cfl_ratio)),
        ];
        if with_settling {
            rows.push(("T0_observed", fmt_opt(self.t0_observed)));
            rows.push(("T1_observed", fmt_opt(self.t1_observed)));
        }
        rows
    }
}

struct Sink {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Sink {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CraneError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| CraneError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

fn kernel_rows(set: &KernelSet) -> Vec<[String; 4]> {
    let grid = set.grid();
    let labels = set.kind.labels();
    let mut rows = Vec::with_capacity(4 * grid.node_count());
    for (f, field) in set.fields.iter().enumerate() {
        for (i, j) in grid.nodes() {
            rows.push([
                fmt_f64(grid.coord(i)),
                fmt_f64(grid.coord(j)),
                fmt_f64(field.get(i, j)),
                labels[f].to_string(),
            ]);
        }
    }
    rows
}

fn write_kernel_files(sink: &mut Sink, stage: &KernelStage) -> Result<()> {
    sink.write(
        "kernels_K.csv",
        &["x", "xi", "value", "field"],
        kernel_rows(&stage.k),
    )?;
    sink.write(
        "kernels_L.csv",
        &["x", "xi", "value", "field"],
        kernel_rows(&stage.l),
    )?;
    let g = &stage.gains;
    sink.write(
        "gains.csv",
        &["x", "a", "b", "a0", "b0", "mu"],
        (0..g.grid.len()).map(|i| [g.grid.node(i), g.a[i], g.b[i], g.a0, g.b0, g.mu].map(fmt_f64)),
    )
}

fn write_summary(sink: &mut Sink, summary: &Summary, with_settling: bool) -> Result<()> {
    sink.write(
        "summary.csv",
        &["quantity", "value"],
        summary
            .rows(with_settling)
            .into_iter()
            .map(|(k, v)| [k.to_string(), v]),
    )
}

fn base_summary(cfg: &RunConfig, stage: &KernelStage) -> Result<Summary> {
    Ok(Summary {
        mu: stage.gains.mu,
        a0: stage.gains.a0,
        cfl_ratio: cfl_check(
            cfg.dt,
            UniformGrid::new(cfg.n_x).dx(),
            &cfg.params.derived(),
        )?,
        t0_observed: None,
        t1_observed: None,
    })
}

/// Kernel and gain stage only. Returns the files written.
pub fn run_kernels_stage(cfg: &RunConfig, out: &Path) -> Result<(Summary, Vec<PathBuf>)> {
    cfg.validate()?;
    let stage = compute_kernels(cfg)?;
    let summary = base_summary(cfg, &stage)?;
    let mut sink = Sink::new(out)?;
    write_kernel_files(&mut sink, &stage)?;
    write_summary(&mut sink, &summary, false)?;
    Ok((summary, sink.written))
}

/// Full pipeline: kernels, gains, closed-loop simulation and all artifacts.
pub fn run_pipeline(cfg: &RunConfig, out: &Path) -> Result<(Summary, Vec<PathBuf>)> {
    cfg.validate()?;
    let stage = compute_kernels(cfg)?;
    let result = run_simulation(cfg, &stage)?;
    let mut summary = base_summary(cfg, &stage)?;
    summary.t0_observed = result.settling.t0;
    summary.t1_observed = result.settling.t1;

    let mut sink = Sink::new(out)?;
    write_kernel_files(&mut sink, &stage)?;
    let r = &result;
    sink.write(
        "phi.csv",
        &["t", "phi", "phi_dot"],
        r.phi.iter().map(|s| [s.t, s.phi, s.phi_dot].map(fmt_f64)),
    )?;
    sink.write(
        "fields.csv",
        &["t", "x", "alpha", "beta"],
        r.frames.iter().zip(&r.phi).flat_map(|(f, s)| {
            r.x_nodes
                .iter()
                .enumerate()
                .map(move |(i, &x)| [s.t, x, f.alpha[i], f.beta[i]].map(fmt_f64))
        }),
    )?;
    sink.write(
        "platform.csv",
        &["t", "xp"],
        r.phi
            .iter()
            .zip(&r.xp)
            .map(|(s, &xp)| [s.t, xp].map(fmt_f64)),
    )?;
    sink.write(
        "cable.csv",
        &["t", "s", "y"],
        r.cable.iter().zip(&r.phi).flat_map(|(y, st)| {
            r.s_nodes
                .iter()
                .zip(y)
                .map(move |(&s, &v)| [st.t, s, v].map(fmt_f64))
        }),
    )?;
    sink.write(
        "control.csv",
        &["t", "U", "V"],
        r.phi
            .iter()
            .enumerate()
            .map(|(k, s)| [s.t, r.u[k], r.v[k]].map(fmt_f64)),
    )?;
    write_summary(&mut sink, &summary, true)?;
    Ok((summary, sink.written))
}
