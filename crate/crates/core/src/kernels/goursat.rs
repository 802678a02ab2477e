use super::{KernelField, KernelKind, KernelSet, TriangularGrid};
use crate::error::{CraneError, Result};
use crate::model::DerivedConstants;

const DIVERGENCE_BOUND: f64 = 1e6;

/// Coefficients of the `2x2` hyperbolic system
/// `w_t = diag(-eps1, eps2) w_x + [[0, c1], [c2, 0]] w`, `u(0) = q v(0)`.
///
/// For the crane `eps1 = eps2 = lambda`, `c1 = -lambda'/2 = -c2`, `q = 1`.
#[derive(Debug, Clone, Copy)]
pub struct KernelCoefficients {
    pub dc: DerivedConstants,
}

impl KernelCoefficients {
    pub fn new(dc: DerivedConstants) -> Self {
        Self { dc }
    }

    pub fn eps1(&self, x: f64) -> f64 {
        self.dc.lambda(x)
    }

    pub fn eps2(&self, x: f64) -> f64 {
        self.dc.lambda(x)
    }

    pub fn eps1_prime(&self, x: f64) -> f64 {
        self.dc.lambda_prime(x)
    }

    pub fn eps2_prime(&self, x: f64) -> f64 {
        self.dc.lambda_prime(x)
    }

    pub fn c1(&self, x: f64) -> f64 {
        -self.dc.lambda_prime(x) / 2.0
    }

    pub fn c2(&self, x: f64) -> f64 {
        self.dc.lambda_prime(x) / 2.0
    }

    pub fn q(&self) -> f64 {
        1.0
    }
}

/// One first-order Goursat system of four coupled kernel equations
/// `a_k(x) F_x + b_k(xi) F_xi = rhs_k(x, xi, F)`.
///
/// Entries 0 and 3 travel with `b_k > 0` and take data on `xi = 0`;
/// entries 1 and 2 travel with `b_k < 0` and take data on `xi = x`.
trait GoursatSystem {
    fn speed_x(&self, k: usize, x: f64) -> f64;
    /// Signed speed along `xi`.
    fn speed_xi(&self, k: usize, xi: f64) -> f64;
    fn rhs(&self, k: usize, x: f64, xi: f64, v: &[f64; 4]) -> f64;
    /// Data on the diagonal for entries 1 and 2.
    fn diagonal(&self, k: usize, x: f64) -> f64;
    /// `F_0(x,0) = ratio(0) F_1(x,0)` and `F_3(x,0) = ratio(3) F_2(x,0)`.
    fn bottom_ratio(&self, k: usize) -> f64;
}

struct DirectSystem(KernelCoefficients);

impl GoursatSystem for DirectSystem {
    fn speed_x(&self, k: usize, x: f64) -> f64 {
        if k < 2 {
            self.0.eps1(x)
        } else {
            self.0.eps2(x)
        }
    }

    fn speed_xi(&self, k: usize, xi: f64) -> f64 {
        match k {
            0 => self.0.eps1(xi),
            1 => -self.0.eps2(xi),
            2 => -self.0.eps1(xi),
            _ => self.0.eps2(xi),
        }
    }

    fn rhs(&self, k: usize, _x: f64, xi: f64, v: &[f64; 4]) -> f64 {
        let c = &self.0;
        match k {
            0 => -c.eps1_prime(xi) * v[0] - c.c2(xi) * v[1],
            1 => c.eps2_prime(xi) * v[1] - c.c1(xi) * v[0],
            2 => c.eps1_prime(xi) * v[2] + c.c2(xi) * v[3],
            _ => -c.eps2_prime(xi) * v[3] + c.c1(xi) * v[2],
        }
    }

    fn diagonal(&self, k: usize, x: f64) -> f64 {
        let c = &self.0;
        let sum = c.eps1(x) + c.eps2(x);
        if k == 1 {
            c.c1(x) / sum
        } else {
            -c.c2(x) / sum
        }
    }

    fn bottom_ratio(&self, k: usize) -> f64 {
        let c = &self.0;
        if k == 0 {
            c.eps2(0.0) / (c.q() * c.eps1(0.0))
        } else {
            c.q() * c.eps1(0.0) / c.eps2(0.0)
        }
    }
}

struct InverseSystem(DerivedConstants);

impl GoursatSystem for InverseSystem {
    fn speed_x(&self, _k: usize, x: f64) -> f64 {
        self.0.lambda(x)
    }

    fn speed_xi(&self, k: usize, xi: f64) -> f64 {
        if k == 0 || k == 3 {
            self.0.lambda(xi)
        } else {
            -self.0.lambda(xi)
        }
    }

    fn rhs(&self, k: usize, x: f64, xi: f64, v: &[f64; 4]) -> f64 {
        let lp_xi = self.0.lambda_prime(xi);
        let half_lp_x = self.0.lambda_prime(x) / 2.0;
        match k {
            0 => -lp_xi * v[0] - half_lp_x * v[2],
            1 => lp_xi * v[1] - half_lp_x * v[3],
            2 => lp_xi * v[2] - half_lp_x * v[0],
            _ => -lp_xi * v[3] - half_lp_x * v[1],
        }
    }

    fn diagonal(&self, _k: usize, x: f64) -> f64 {
        -self.0.lambda_prime(x) / (4.0 * self.0.lambda(x))
    }

    fn bottom_ratio(&self, _k: usize) -> f64 {
        1.0
    }
}

/// Solves the Goursat system for the direct kernels `K`.
pub fn solve_direct_kernels(
    grid: TriangularGrid,
    coeffs: &KernelCoefficients,
) -> Result<KernelSet> {
    march(grid, &DirectSystem(*coeffs), KernelKind::Direct)
}

/// Solves the Goursat system for the inverse kernels `L` directly.
pub fn solve_inverse_kernels_goursat(
    grid: TriangularGrid,
    coeffs: &KernelCoefficients,
) -> Result<KernelSet> {
    march(grid, &InverseSystem(coeffs.dc), KernelKind::Inverse)
}

const PLUS: [usize; 2] = [0, 3];
const MINUS: [usize; 2] = [1, 2];

fn gather(fields: &[KernelField; 4], i: usize, j: usize) -> [f64; 4] {
    [
        fields[0].get(i, j),
        fields[1].get(i, j),
        fields[2].get(i, j),
        fields[3].get(i, j),
    ]
}

fn lerp(a: &[f64; 4], b: &[f64; 4], w: f64) -> [f64; 4] {
    std::array::from_fn(|k| (1.0 - w) * a[k] + w * b[k])
}

/// Linear interpolation in `xi` along column `i`, `xi` clamped to `[0, x_i]`.
fn column_value(fields: &[KernelField; 4], grid: TriangularGrid, i: usize, xi: f64) -> [f64; 4] {
    if i == 0 {
        return gather(fields, 0, 0);
    }
    let t = (xi * grid.n as f64).clamp(0.0, i as f64);
    let j = (t.floor() as usize).min(i - 1);
    let w = t - j as f64;
    lerp(&gather(fields, i, j), &gather(fields, i, j + 1), w)
}

/// First-order march in increasing `x`. At every node the characteristic
/// is traced back one column (or to the boundary it crosses first), all
/// four entries are interpolated there, and the ODE along the
/// characteristic is advanced with one explicit step.
fn march(grid: TriangularGrid, sys: &dyn GoursatSystem, kind: KernelKind) -> Result<KernelSet> {
    if grid.n < 2 {
        return Err(CraneError::InvalidParameter {
            field: "kernel_n".into(),
            rule: "kernel grid needs n >= 2".into(),
        });
    }
    let n = grid.n;
    let h = grid.dx();
    let mut set = KernelSet::zeros(kind, grid);
    {
        let f = &mut set.fields;
        for k in MINUS {
            f[k].set(0, 0, sys.diagonal(k, 0.0));
        }
        let v = gather(f, 0, 0);
        f[0].set(0, 0, sys.bottom_ratio(0) * v[1]);
        f[3].set(0, 0, sys.bottom_ratio(3) * v[2]);
    }

    let advance = |k: usize, back: &[f64; 4], xb: f64, xib: f64, step: f64| -> f64 {
        back[k] + step * sys.rhs(k, xb, xib, back) / sys.speed_x(k, xb)
    };

    for i in 1..=n {
        let x = grid.coord(i);
        let f = &mut set.fields;

        // Entries travelling upward whose characteristic stays inside the
        // previous column; includes the diagonal node.
        let mut deferred = Vec::new();
        for j in 1..=i {
            let xi = grid.coord(j);
            for k in PLUS {
                let slope = sys.speed_xi(k, xi) / sys.speed_x(k, x);
                let xib = xi - slope * h;
                if xib < 0.0 {
                    deferred.push((j, k, slope));
                    continue;
                }
                let back = column_value(f, grid, i - 1, xib.min(x - h));
                let value = advance(k, &back, x - h, xib.min(x - h), h);
                f[k].set(i, j, value);
            }
        }

        // Entries travelling downward from the diagonal.
        for k in MINUS {
            f[k].set(i, i, sys.diagonal(k, x));
        }
        for j in 0..i {
            let xi = grid.coord(j);
            for k in MINUS {
                let slope = -sys.speed_xi(k, xi) / sys.speed_x(k, x);
                let xib = xi + slope * h;
                let value = if xib <= x - h {
                    let back = column_value(f, grid, i - 1, xib);
                    advance(k, &back, x - h, xib, h)
                } else {
                    // The characteristic leaves through the diagonal.
                    let step = (x - xi) / (1.0 + slope);
                    let xb = x - step;
                    let w = ((xb - (x - h)) / h).clamp(0.0, 1.0);
                    let mut back = lerp(&gather(f, i - 1, i - 1), &gather(f, i, i), w);
                    back[k] = sys.diagonal(k, xb);
                    advance(k, &back, xb, xb, step)
                };
                f[k].set(i, j, value);
            }
        }

        f[0].set(i, 0, sys.bottom_ratio(0) * f[1].get(i, 0));
        f[3].set(i, 0, sys.bottom_ratio(3) * f[2].get(i, 0));

        // Upward characteristics that cross xi = 0 between columns i-1 and i.
        for (j, k, slope) in deferred {
            let step = grid.coord(j) / slope;
            let xb = x - step;
            let w = ((xb - (x - h)) / h).clamp(0.0, 1.0);
            let back = lerp(&gather(f, i - 1, 0), &gather(f, i, 0), w);
            let value = advance(k, &back, xb, 0.0, step);
            f[k].set(i, j, value);
        }

        for j in 0..=i {
            for field in f.iter() {
                let value = field.get(i, j);
                if !value.is_finite() || value.abs() > DIVERGENCE_BOUND {
                    return Err(CraneError::Divergence {
                        x,
                        xi: grid.coord(j),
                        magnitude: value.abs(),
                    });
                }
            }
        }
    }
    Ok(set)
}
