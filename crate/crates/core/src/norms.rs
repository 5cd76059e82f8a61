//! Norms, moments and the translation (shift) modulus.

use crate::error::{Error, Result};
use crate::grid::Field;

/// Exponent of an `L^q` norm; `Inf` is the max norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Inf,
}

impl Exponent {
    pub fn new(q: f64) -> Result<Self> {
        if q.is_infinite() && q > 0.0 {
            Ok(Exponent::Inf)
        } else if q >= 1.0 {
            Ok(Exponent::Finite(q))
        } else {
            Err(Error::InvalidParameter(format!("norm exponent must be >= 1, got {q}")))
        }
    }
}

#[inline]
fn pow_abs(x: f64, q: f64) -> f64 {
    if q == 1.0 {
        x.abs()
    } else if q == 2.0 {
        x * x
    } else {
        x.abs().powf(q)
    }
}

/// `(sum |f_i|^q dx^d)^(1/q)`, or `max |f_i|` for `q = inf`.
pub fn lq_norm(f: &Field, q: f64) -> Result<f64> {
    Ok(match Exponent::new(q)? {
        Exponent::Inf => f.max_abs(),
        Exponent::Finite(q) => {
            let s: f64 = f.values().iter().map(|&x| pow_abs(x, q)).sum();
            (s * f.grid().cell_volume()).powf(1.0 / q)
        }
    })
}

/// Trapezoidal time weights for snapshots at `times`.
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for k in 1..n {
        let h = times[k] - times[k - 1];
        w[k - 1] += 0.5 * h;
        w[k] += 0.5 * h;
    }
    w
}

/// Space-time `L^q` norm over snapshots at the given times (trapezoid in
/// time, midpoint in space).
pub fn lq_spacetime_norm(snapshots: &[Field], times: &[f64], q: f64) -> Result<f64> {
    if snapshots.len() != times.len() {
        return Err(Error::ShapeMismatch {
            expected: times.len(),
            got: snapshots.len(),
        });
    }
    Ok(match Exponent::new(q)? {
        Exponent::Inf => snapshots.iter().map(Field::max_abs).fold(0.0, f64::max),
        Exponent::Finite(q) => {
            let w = trapezoid_weights(times);
            let s: f64 = snapshots
                .iter()
                .zip(&w)
                .map(|(f, wk)| {
                    wk * f.values().iter().map(|&x| pow_abs(x, q)).sum::<f64>()
                        * f.grid().cell_volume()
                })
                .sum();
            s.powf(1.0 / q)
        }
    })
}

/// `sum f_i |x_i|^2 dx^d`.
pub fn second_moment(f: &Field) -> f64 {
    let g = f.grid();
    let s: f64 = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v * g.radius_sq(i))
        .sum();
    s * g.cell_volume()
}

/// `dt dx^d sum_t sum_i |p(t, x_i + y) - p(t, x_i)|` with `y = shift * dx`,
/// wrapped periodically. The whole box plays the role of the compact set.
pub fn shift_modulus(snapshots: &[Field], dt: f64, shift: &[isize]) -> Result<f64> {
    let Some(first) = snapshots.first() else {
        return Ok(0.0);
    };
    let g = *first.grid();
    if shift.len() != g.dim() {
        return Err(Error::ShapeMismatch {
            expected: g.dim(),
            got: shift.len(),
        });
    }
    if shift.iter().any(|s| s.unsigned_abs() >= g.n() / 2) {
        return Err(Error::InvalidParameter(format!(
            "shift {shift:?} must be shorter than half the box"
        )));
    }
    let mut total = 0.0;
    for p in snapshots {
        if *p.grid() != g {
            return Err(Error::GridMismatch);
        }
        let v = p.values();
        for i in 0..g.len() {
            let mut j = i;
            for (a, &s) in shift.iter().enumerate() {
                j = g.shift(j, a, s);
            }
            total += (v[j] - v[i]).abs();
        }
    }
    Ok(total * dt * g.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Grid, GridSpec};
    use proptest::prelude::*;

    fn grid(d: usize) -> Grid {
        make_grid(GridSpec::new(d, 2.0, 16)).unwrap()
    }

    fn indicator(g: Grid, idx: usize) -> Field {
        let mut v = vec![0.0; g.len()];
        v[idx] = 1.0;
        Field::from_values(g, v).unwrap()
    }

    #[test]
    fn single_cell_l1() {
        for d in [1, 2] {
            let g = grid(d);
            let f = indicator(g, 5);
            assert!((lq_norm(&f, 1.0).unwrap() - g.cell_volume()).abs() < 1e-15);
            assert_eq!(lq_norm(&f, f64::INFINITY).unwrap(), 1.0);
        }
    }

    #[test]
    fn uniform_l2() {
        let g = grid(1);
        let c = 0.6;
        let n = lq_norm(&Field::constant(g, c), 2.0).unwrap();
        assert!((n - c * (2.0 * g.half_width()).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rejects_small_exponent() {
        assert!(lq_norm(&Field::zeros(grid(1)), 0.5).is_err());
    }

    #[test]
    fn l4_matches_compensated_sum() {
        // Kahan-summed oracle over a deterministic pseudo-random field.
        let g = make_grid(GridSpec::new(2, 1.0, 64)).unwrap();
        let f = Field::from_fn(g, |x| ((x[0] * 37.1).sin() * (x[1] * 11.3 + 0.4).cos()).powi(3));
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for &v in f.values() {
            let y = v.powi(4) - c;
            let t = s + y;
            c = (t - s) - y;
            s = t;
        }
        let oracle = (s * g.cell_volume()).powf(0.25);
        let got = lq_norm(&f, 4.0).unwrap();
        assert!((got - oracle).abs() <= 1e-13 * oracle);
    }

    #[test]
    fn moments() {
        let g = grid(2);
        assert_eq!(second_moment(&Field::zeros(g)), 0.0);
        let idx = g.flatten([3, 11]);
        let expect = g.radius_sq(idx) * g.cell_volume();
        assert!((second_moment(&indicator(g, idx)) - expect).abs() < 1e-15);
    }

    #[test]
    fn gaussian_second_moment_against_fine_quadrature() {
        let w = 0.35f64;
        let bump = |x: f64| (-(x - 0.3) * (x - 0.3) / (w * w)).exp();
        let g = make_grid(GridSpec::new(1, 3.0, 128)).unwrap();
        let got = second_moment(&Field::from_fn(g, |x| bump(x[0])));
        // composite Simpson on a 20001-point mesh
        let m = 20000;
        let h = 6.0 / m as f64;
        let mut s = 0.0;
        for k in 0..=m {
            let x = -3.0 + k as f64 * h;
            let c = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            s += c * bump(x) * x * x;
        }
        let oracle = s * h / 3.0;
        assert!((got - oracle).abs() < 0.01 * oracle, "{got} vs {oracle}");
    }

    #[test]
    fn shift_modulus_examples() {
        let g = grid(1);
        let dt = 0.1;
        let flat = vec![Field::constant(g, 2.0); 3];
        for s in 1..8 {
            assert_eq!(shift_modulus(&flat, dt, &[s]).unwrap(), 0.0);
        }
        let spike = vec![indicator(g, 4)];
        assert_eq!(shift_modulus(&spike, dt, &[0]).unwrap(), 0.0);
        let m = shift_modulus(&spike, dt, &[1]).unwrap();
        assert!((m - 2.0 * g.cell_volume() * dt).abs() < 1e-15);
        assert!(shift_modulus(&spike, dt, &[8]).is_err());
    }

    #[test]
    fn spacetime_norm_of_constant_history() {
        let g = grid(1);
        let snaps = vec![Field::constant(g, 1.0); 5];
        let times = [0.0, 0.25, 0.5, 0.75, 1.0];
        let n = lq_spacetime_norm(&snaps, &times, 2.0).unwrap();
        assert!((n - (2.0 * g.half_width()).sqrt()).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn shift_modulus_symmetric(raw in prop::collection::vec(0.0f64..4.0, 256), s0 in -7isize..8, s1 in -7isize..8) {
            let g = grid(2);
            let f = Field::from_values(g, raw).unwrap();
            let snaps = [f];
            let a = shift_modulus(&snaps, 0.3, &[s0, s1]).unwrap();
            let b = shift_modulus(&snaps, 0.3, &[-s0, -s1]).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
        }
    }
}
