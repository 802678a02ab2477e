//! Characteristic fixed-point construction of the symmetric inverse kernels.
//!
//! Writing `f = L_aa = L_bb` and `g = L_ab = L_ba`, both satisfy transport
//! equations along the characteristics of `lambda`. In the variable
//! `Lambda(x) = int_0^x 1/lambda` these are straight lines, and integrating
//! along them gives
//!
//! ```text
//! f(x,xi) = e^{C2 xi} [ g(x0,0) + int_0^{Lambda(xi)} e^{-C2 xi(s)} m(x(s)) g(x(s),xi(s)) ds ]
//! g(x,xi) = e^{C2 (xi - y0)} [ C + int_0^S e^{-C2 (xi(s) - y0)} m(x(s)) f(x(s),xi(s)) ds ]
//! ```
//!
//! with `m = C2 lambda / 2`, `C = C2 / 4`, `x0` the foot of the
//! upward characteristic on `xi = 0` and `y0` the foot of the downward
//! one on the diagonal. The value of `f` or `g` at a node only depends on
//! nodes whose characteristic distance `Lambda(x) - Lambda(xi)` is not
//! larger, so the fixed point is computed band by band in that distance.

use super::{KernelField, TriangularGrid};
use crate::error::{CraneError, Result};
use crate::model::DerivedConstants;

#[derive(Debug, Clone, Copy)]
pub struct PicardOptions {
    /// Stop when successive iterates differ by less than this in max norm.
    pub tol: f64,
    /// Total number of sweeps allowed over all bands.
    pub max_iter: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub f: KernelField,
    pub g: KernelField,
    pub iterations: usize,
    /// Band width in characteristic distance that was finally used.
    pub band_width: f64,
}

const MIN_BAND_FRACTION: f64 = 1.0 / 1024.0;

struct Operator<'a> {
    dc: &'a DerivedConstants,
    /// Target spacing of quadrature nodes in the `Lambda` variable.
    ds: f64,
}

impl Operator<'_> {
    fn weight(&self, x: f64) -> f64 {
        self.dc.c2 * self.dc.lambda(x) / 2.0
    }

    fn panels(&self, length: f64) -> usize {
        ((length / self.ds).ceil() as usize).max(1)
    }

    fn f_at(&self, x: f64, xi: f64, g: &KernelField) -> f64 {
        let dc = self.dc;
        let c2 = dc.c2;
        let lx = dc.big_lambda(x);
        let lxi = dc.big_lambda(xi);
        let l0 = (lx - lxi).max(0.0);
        let x0 = dc.big_lambda_inv(l0);
        let panels = self.panels(lxi);
        let h = lxi / panels as f64;
        let mut integral = 0.0;
        for p in 0..=panels {
            let s = p as f64 * h;
            let xs = dc.big_lambda_inv(l0 + s);
            let xis = dc.big_lambda_inv(s);
            let w = if p == 0 || p == panels { 0.5 * h } else { h };
            integral += w * (-c2 * xis).exp() * self.weight(xs) * g.at(xs, xis);
        }
        (c2 * xi).exp() * (g.at(x0, 0.0) + integral)
    }

    fn g_at(&self, x: f64, xi: f64, f: &KernelField) -> f64 {
        let dc = self.dc;
        let c2 = dc.c2;
        let lx = dc.big_lambda(x);
        let lxi = dc.big_lambda(xi);
        let mid = 0.5 * (lx + lxi);
        let y0 = dc.big_lambda_inv(mid);
        let span = (0.5 * (lx - lxi)).max(0.0);
        let panels = self.panels(span);
        let h = span / panels as f64;
        let mut integral = 0.0;
        for p in 0..=panels {
            let s = p as f64 * h;
            let xs = dc.big_lambda_inv(mid + s);
            let xis = dc.big_lambda_inv(mid - s);
            let w = if p == 0 || p == panels { 0.5 * h } else { h };
            integral += w * (-c2 * (xis - y0)).exp() * self.weight(xs) * f.at(xs, xis);
        }
        (c2 * (xi - y0)).exp() * (c2 / 4.0 + integral)
    }
}

/// Builds `(f, g)` by Picard iteration of the characteristic integral
/// operator on bands of characteristic distance, followed by a global
/// polishing pass. The band width starts at `Lambda(1)/8` and is halved
/// whenever an iteration fails to contract.
pub fn picard_fg_oracle(
    grid: TriangularGrid,
    dc: &DerivedConstants,
    opts: PicardOptions,
) -> Result<PicardSolution> {
    if !(opts.tol > 0.0) {
        return Err(CraneError::InvalidParameter {
            field: "tol".into(),
            rule: "tolerance must be positive".into(),
        });
    }
    let total = dc.big_lambda(1.0);
    let mut width = total / 8.0;
    let mut used = 0;
    loop {
        match attempt(grid, dc, opts, width, &mut used)? {
            Some((f, g)) => {
                return Ok(PicardSolution {
                    f,
                    g,
                    iterations: used,
                    band_width: width,
                })
            }
            None => {
                width /= 2.0;
                if width < total * MIN_BAND_FRACTION {
                    return Err(CraneError::NonConvergence {
                        what: "Picard kernel iteration",
                        iterations: used,
                        residual: f64::NAN,
                    });
                }
            }
        }
    }
}

/// One pass over all bands with a fixed width. Returns `None` if some band
/// stopped contracting.
fn attempt(
    grid: TriangularGrid,
    dc: &DerivedConstants,
    opts: PicardOptions,
    width: f64,
    used: &mut usize,
) -> Result<Option<(KernelField, KernelField)>> {
    let c = dc.c2 / 4.0;
    let op = Operator {
        dc,
        ds: grid.dx() / dc.lambda0,
    };
    let mut f = KernelField::filled(grid, c);
    let mut g = KernelField::filled(grid, c);

    let total = dc.big_lambda(1.0);
    let band_count = if width > 0.0 {
        ((total / width).ceil() as usize).max(1)
    } else {
        1
    };
    let mut bands: Vec<Vec<(usize, usize)>> = vec![Vec::new(); band_count];
    for (i, j) in grid.nodes() {
        let d = dc.big_lambda(grid.coord(i)) - dc.big_lambda(grid.coord(j));
        let b = if width > 0.0 {
            ((d / width).ceil() as usize).saturating_sub(1)
        } else {
            0
        };
        bands[b.min(band_count - 1)].push((i, j));
    }
    let everything: Vec<(usize, usize)> = grid.nodes().collect();

    for nodes in bands.iter().chain(std::iter::once(&everything)) {
        let mut previous = f64::INFINITY;
        let mut sweeps = 0;
        loop {
            if *used >= opts.max_iter {
                return Err(CraneError::NonConvergence {
                    what: "Picard kernel iteration",
                    iterations: *used,
                    residual: previous,
                });
            }
            *used += 1;
            sweeps += 1;
            // g is refreshed first so that f sees the current g.
            let mut diff: f64 = 0.0;
            let new_g: Vec<f64> = nodes
                .iter()
                .map(|&(i, j)| op.g_at(grid.coord(i), grid.coord(j), &f))
                .collect();
            for (k, &(i, j)) in nodes.iter().enumerate() {
                diff = diff.max((new_g[k] - g.get(i, j)).abs());
                g.set(i, j, new_g[k]);
            }
            let new_f: Vec<f64> = nodes
                .iter()
                .map(|&(i, j)| op.f_at(grid.coord(i), grid.coord(j), &g))
                .collect();
            for (k, &(i, j)) in nodes.iter().enumerate() {
                diff = diff.max((new_f[k] - f.get(i, j)).abs());
                f.set(i, j, new_f[k]);
            }
            if !diff.is_finite() {
                return Ok(None);
            }
            if diff < opts.tol {
                break;
            }
            if sweeps > 2 && diff > previous {
                return Ok(None);
            }
            previous = diff;
        }
    }
    Ok(Some((f, g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{solve_inverse_kernels_goursat, KernelCoefficients};
    use crate::model::CraneParams;

    #[test]
    fn boundary_identities_and_positivity() {
        let dc = CraneParams::default().derived();
        let grid = TriangularGrid::new(20);
        let sol = picard_fg_oracle(grid, &dc, PicardOptions::default()).unwrap();
        for i in 0..=grid.n {
            assert!((sol.g.get(i, i) - dc.c2 / 4.0).abs() < 1e-14);
            assert!((sol.f.get(i, 0) - sol.g.get(i, 0)).abs() < 1e-9);
        }
        assert!(sol.f.min() > 0.0 && sol.g.min() > 0.0);
    }

    #[test]
    fn agrees_with_goursat_march_to_first_order() {
        let dc = CraneParams::default().derived();
        let mut errors = Vec::new();
        for n in [20, 40] {
            let grid = TriangularGrid::new(n);
            let sol = picard_fg_oracle(grid, &dc, PicardOptions::default()).unwrap();
            let l = solve_inverse_kernels_goursat(grid, &KernelCoefficients::new(dc)).unwrap();
            let e = sol
                .f
                .max_abs_diff(&l.fields[0])
                .max(sol.g.max_abs_diff(&l.fields[1]));
            assert!(e < 2.0 * grid.dx(), "n={n} err={e}");
            errors.push(e);
        }
        assert!(errors[1] < 0.7 * errors[0], "{errors:?}");
    }

    #[test]
    fn zero_decay_gives_zero_kernels() {
        let dc = DerivedConstants::from_wave_speed(2.0, 0.0);
        let sol = picard_fg_oracle(TriangularGrid::new(10), &dc, PicardOptions::default()).unwrap();
        assert!(sol
            .f
            .values()
            .iter()
            .chain(sol.g.values())
            .all(|&v| v == 0.0));
    }

    #[test]
    fn iteration_budget_is_enforced() {
        let dc = CraneParams::default().derived();
        let opts = PicardOptions {
            tol: 1e-14,
            max_iter: 3,
        };
        let err = picard_fg_oracle(TriangularGrid::new(10), &dc, opts).unwrap_err();
        assert!(matches!(err, CraneError::NonConvergence { .. }));
    }
}
