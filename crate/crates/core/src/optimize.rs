//! One-dimensional minimisation: a coarse log-spaced grid followed by
//! golden-section refinement around the best grid point.

use crate::error::{numerical, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Outcome of [`grid_golden`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    /// The grid minimum sat on an endpoint of the search interval.
    pub boundary_hit: bool,
    /// Grid index of the best grid point.
    pub grid_index: usize,
    pub evaluations: usize,
}

/// Golden-section search for a minimum of `f` on `[a, b]`, stopping when the
/// bracket is narrower than `tol`. Returns `(x, f(x), evaluations)` for the
/// best point evaluated.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64, usize) {
    let mut eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    let mut evaluations = 2;
    let (mut best_x, mut best_f) = if fc <= fd { (c, fc) } else { (d, fd) };
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c);
            if fc < best_f {
                best_x = c;
                best_f = fc;
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d);
            if fd < best_f {
                best_x = d;
                best_f = fd;
            }
        }
        evaluations += 1;
    }
    (best_x, best_f, evaluations)
}

/// `points` log-spaced values covering `[lo, hi]` (both ends included).
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            if i + 1 == points {
                hi
            } else if i == 0 {
                lo
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

/// Minimises `f` over `[lo, hi]` (both positive): evaluates a log-spaced grid
/// of `grid_points`, then refines with golden-section search in log
/// coordinates between the neighbours of the best grid point until the
/// bracket is narrower than `rel_tol` (relative width in x).
pub fn grid_golden<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    grid_points: usize,
    rel_tol: f64,
) -> Result<Minimum> {
    let grid = log_grid(lo, hi, grid_points);
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| *v < values[b]) {
            best = Some(i);
        }
    }
    let Some(k) = best else {
        return numerical(format!(
            "criterion is non-finite at every grid point on [{lo:.4e}, {hi:.4e}]"
        ));
    };
    let left = grid[k.saturating_sub(1)];
    let right = grid[(k + 1).min(grid_points - 1)];
    let (t, ft, evals) = golden_section(|t: f64| f(t.exp()), left.ln(), right.ln(), rel_tol);
    let (x, value) = if ft < values[k] {
        (t.exp(), ft)
    } else {
        (grid[k], values[k])
    };
    Ok(Minimum {
        x,
        value,
        boundary_hit: k == 0 || k + 1 == grid_points,
        grid_index: k,
        evaluations: grid_points + evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_quadratic_minimum() {
        let (x, fx, _) = golden_section(|x| (x - 0.2).powi(2), -1.0, 1.0, 1e-9);
        assert!((x - 0.2).abs() < 1e-8);
        assert!(fx < 1e-15);
    }

    #[test]
    fn grid_golden_interior_and_boundary() {
        let m = grid_golden(|x: f64| (x.ln() - 0.3f64.ln()).powi(2), 0.01, 10.0, 25, 1e-6).unwrap();
        assert!(!m.boundary_hit);
        assert!((m.x / 0.3 - 1.0).abs() < 1e-5);

        let b = grid_golden(|x: f64| x, 0.01, 10.0, 25, 1e-6).unwrap();
        assert!(b.boundary_hit);
        assert_eq!(b.grid_index, 0);
        assert!(b.x >= 0.01 && b.x < 0.02);
    }

    #[test]
    fn grid_golden_skips_non_finite_and_errors_when_all_are() {
        let m = grid_golden(
            |x: f64| if x < 1.0 { f64::NAN } else { (x - 2.0).powi(2) },
            0.1,
            10.0,
            25,
            1e-6,
        )
        .unwrap();
        assert!((m.x - 2.0).abs() < 1e-4);
        assert!(grid_golden(|_| f64::NAN, 0.1, 10.0, 25, 1e-6).is_err());
    }

    #[test]
    fn log_grid_hits_endpoints() {
        let g = log_grid(0.5, 8.0, 5);
        assert_eq!(g[0], 0.5);
        assert_eq!(g[4], 8.0);
        assert!((g[2] - 2.0).abs() < 1e-12);
    }
}
