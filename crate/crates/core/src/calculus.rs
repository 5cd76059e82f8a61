//! Staggered finite differences on the periodic grid.
//!
//! `gradient` maps cell values to faces, `divergence` maps faces back to
//! cells, and their composition is the classical 3-point (1D) or 5-point
//! (2D) Laplacian.

use crate::error::{Error, Result};
use crate::grid::{FaceField, Field, Grid};
use crate::par::map_cells;

/// Forward difference `(f[i + e_a] - f[i]) / dx` on every face.
pub fn gradient(f: &Field) -> FaceField {
    let g = *f.grid();
    let inv_dx = 1.0 / g.dx();
    let vals = f.values();
    let axes = (0..g.dim())
        .map(|a| {
            map_cells(g.len(), |i| (vals[g.shift(i, a, 1)] - vals[i]) * inv_dx)
        })
        .collect();
    FaceField::from_raw(g, axes)
}

/// Backward difference of face values, summed over axes.
pub fn divergence(flux: &FaceField) -> Field {
    let g = *flux.grid();
    let inv_dx = 1.0 / g.dx();
    let axes = flux.axes();
    let vals = map_cells(g.len(), |i| {
        let mut s = 0.0;
        for (a, fa) in axes.iter().enumerate() {
            s += fa[i] - fa[g.shift(i, a, -1)];
        }
        s * inv_dx
    });
    Field::from_raw(g, vals)
}

/// Direct application of the standard Laplacian stencil.
pub fn laplacian(f: &Field) -> Field {
    let g = *f.grid();
    let inv_dx2 = 1.0 / (g.dx() * g.dx());
    let v = f.values();
    let vals = map_cells(g.len(), |i| {
        let mut s = 0.0;
        for a in 0..g.dim() {
            s += v[g.shift(i, a, 1)] - 2.0 * v[i] + v[g.shift(i, a, -1)];
        }
        s * inv_dx2
    });
    Field::from_raw(g, vals)
}

/// Centered gradient `(f[i + e_a] - f[i - e_a]) / (2 dx)` per axis, stored at
/// cell centers.
pub fn centered_gradient(f: &Field) -> Vec<Vec<f64>> {
    let g = *f.grid();
    let inv = 0.5 / g.dx();
    let v = f.values();
    (0..g.dim())
        .map(|a| map_cells(g.len(), |i| (v[g.shift(i, a, 1)] - v[g.shift(i, a, -1)]) * inv))
        .collect()
}

/// Cellwise dot product of centered gradients, `<grad f, grad h>_c`.
pub fn centered_dot(f: &Field, h: &Field) -> Result<Field> {
    f.same_grid(h)?;
    let gf = centered_gradient(f);
    let gh = centered_gradient(h);
    let g = *f.grid();
    let vals = map_cells(g.len(), |i| {
        gf.iter().zip(&gh).map(|(a, b)| a[i] * b[i]).sum()
    });
    Ok(Field::from_raw(g, vals))
}

/// Discrete `sum_i a_i b_i dx^d`.
pub fn inner(a: &Field, b: &Field) -> Result<f64> {
    a.same_grid(b)?;
    let s: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
    Ok(s * a.grid().cell_volume())
}

/// Discrete `sum_faces F . G dx^d`.
pub fn face_inner(f: &FaceField, h: &FaceField) -> Result<f64> {
    if f.grid() != h.grid() {
        return Err(Error::GridMismatch);
    }
    let s: f64 = f
        .axes()
        .iter()
        .zip(h.axes())
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y))
        .sum();
    Ok(s * f.grid().cell_volume())
}

/// Symbol of the negative discrete Laplacian for frequency index `k` on one
/// axis: `(4 / dx^2) sin^2(pi k / N)`.
pub fn laplacian_symbol_1d(grid: &Grid, k: usize) -> f64 {
    let s = (std::f64::consts::PI * k as f64 / grid.n() as f64).sin();
    4.0 * s * s / (grid.dx() * grid.dx())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, GridSpec};
    use proptest::prelude::*;

    fn grid(d: usize) -> Grid {
        make_grid(GridSpec::new(d, 1.5, 16)).unwrap()
    }

    fn field_from(g: Grid, raw: &[f64]) -> Field {
        Field::from_values(g, raw.iter().cycle().take(g.len()).copied().collect()).unwrap()
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        for d in [1, 2] {
            let g = grid(d);
            assert_eq!(gradient(&Field::constant(g, 3.7)).max_abs(), 0.0);
            assert_eq!(divergence(&FaceField::constant(g, -2.0)).max_abs(), 0.0);
        }
    }

    #[test]
    fn gradient_of_linear_data() {
        let g = grid(1);
        let a = 0.8;
        let f = Field::from_fn(g, |x| a * x[0]);
        let grad = gradient(&f);
        let n = g.n();
        for i in 0..n - 1 {
            assert!((grad.axis(0)[i] - a).abs() < 1e-12);
        }
        // wrap face jumps from +L back to -L
        let jump = (f[0] - f[n - 1]) / g.dx();
        assert!((grad.axis(0)[n - 1] - jump).abs() < 1e-12);
        assert!(jump < 0.0);
    }

    proptest! {
        #[test]
        fn div_grad_is_the_stencil(raw in prop::collection::vec(-5.0f64..5.0, 16..64), d in 1usize..3) {
            let g = grid(d);
            let f = field_from(g, &raw);
            let composed = divergence(&gradient(&f));
            // oracle: explicit neighbour loop
            let n = g.n();
            let h2 = g.dx() * g.dx();
            for idx in 0..g.len() {
                let [i, j] = g.unflatten(idx);
                let v = |ii: usize, jj: usize| f[g.flatten([ii % n, jj % n])];
                let mut s = v(i + 1, j) - 2.0 * v(i, j) + v(i + n - 1, j);
                if d == 2 {
                    s += v(i, j + 1) - 2.0 * v(i, j) + v(i, j + n - 1);
                }
                let expect = s / h2;
                prop_assert!((composed[idx] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            }
        }

        #[test]
        fn summation_by_parts(raw_f in prop::collection::vec(-3.0f64..3.0, 16..40),
                              raw_w in prop::collection::vec(-3.0f64..3.0, 16..40),
                              d in 1usize..3) {
            let g = grid(d);
            let f = field_from(g, &raw_f);
            let flux = gradient(&field_from(g, &raw_w));
            let lhs = inner(&divergence(&flux), &f).unwrap();
            let rhs = -face_inner(&flux, &gradient(&f)).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn symbol_matches_stencil_on_a_mode() {
        let g = grid(1);
        let k = 3;
        let f = Field::from_fn(g, |x| {
            (2.0 * std::f64::consts::PI * k as f64 * (x[0] + g.half_width()) / (2.0 * g.half_width())).cos()
        });
        let lap = laplacian(&f);
        let lam = laplacian_symbol_1d(&g, k);
        for i in 0..g.len() {
            assert!((lap[i] + lam * f[i]).abs() < 1e-11);
        }
    }
}
