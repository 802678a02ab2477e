use super::{KernelKind, KernelSet};

fn mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

/// Recovers `L` from `K` through
/// `L(x, xi) = K(x, xi) + int_xi^x K(x, s) L(s, xi) ds`.
///
/// Each `xi`-column is marched upward in `x` with the trapezoidal rule;
/// the implicit endpoint term leaves a 2x2 linear solve per node.
pub fn invert_kernels_volterra(k: &KernelSet) -> KernelSet {
    let grid = k.grid();
    let h = grid.dx();
    let mut l = KernelSet::zeros(KernelKind::Inverse, grid);
    for j in 0..=grid.n {
        for i in j..=grid.n {
            let mut acc = k.matrix(i, j);
            if i > j {
                for s in j..i {
                    let w = if s == j { 0.5 * h } else { h };
                    let p = mul(k.matrix(i, s), l.matrix(s, j));
                    for q in 0..4 {
                        acc[q] += w * p[q];
                    }
                }
                let kd = k.matrix(i, i);
                let a = [
                    1.0 - 0.5 * h * kd[0],
                    -0.5 * h * kd[1],
                    -0.5 * h * kd[2],
                    1.0 - 0.5 * h * kd[3],
                ];
                let det = a[0] * a[3] - a[1] * a[2];
                let inv = [a[3] / det, -a[1] / det, -a[2] / det, a[0] / det];
                acc = mul(inv, acc);
            }
            for (q, field) in l.fields.iter_mut().enumerate() {
                field.set(i, j, acc[q]);
            }
        }
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{KernelField, TriangularGrid};

    #[test]
    fn constant_kernel_matches_closed_form() {
        // K = [[0, c], [0, 0]] is nilpotent, so L = K exactly.
        let grid = TriangularGrid::new(16);
        let mut k = KernelSet::zeros(KernelKind::Direct, grid);
        k.fields[1] = KernelField::filled(grid, 0.7);
        let l = invert_kernels_volterra(&k);
        assert!(
            l.max_abs_diff(&KernelSet {
                kind: KernelKind::Inverse,
                ..k.clone()
            }) < 1e-15
        );
    }

    #[test]
    fn scalar_constant_kernel_grows_exponentially() {
        // K = c I gives L = c exp(c (x - xi)) I.
        let c = 0.8;
        let grid = TriangularGrid::new(200);
        let mut k = KernelSet::zeros(KernelKind::Direct, grid);
        k.fields[0] = KernelField::filled(grid, c);
        k.fields[3] = KernelField::filled(grid, c);
        let l = invert_kernels_volterra(&k);
        for (i, j) in grid.nodes() {
            let exact = c * (c * (grid.coord(i) - grid.coord(j))).exp();
            assert!((l.fields[0].get(i, j) - exact).abs() < 1e-5);
            assert_eq!(l.fields[1].get(i, j), 0.0);
        }
    }
}
