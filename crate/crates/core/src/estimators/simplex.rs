//! Nelder–Mead minimisation with the standard coefficients.

pub struct SimplexResult<const D: usize> {
    pub x: [f64; D],
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimises `f` from `x0` with initial edge lengths `step`. Stops when the
/// spread of function values falls below `rel_tol·|f_best|` (or `rel_tol`
/// near zero) or after `max_iter` iterations.
pub fn minimize<const D: usize, F: FnMut(&[f64; D]) -> f64>(
    mut f: F,
    x0: [f64; D],
    step: [f64; D],
    rel_tol: f64,
    max_iter: usize,
) -> SimplexResult<D> {
    let mut pts: Vec<([f64; D], f64)> = Vec::with_capacity(D + 1);
    pts.push((x0, f(&x0)));
    for i in 0..D {
        let mut x = x0;
        x[i] += step[i];
        let fx = f(&x);
        pts.push((x, fx));
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (pts[0].1, pts[D].1);
        if best.is_finite() && (worst - best).abs() <= rel_tol * best.abs().max(1.0) {
            converged = true;
            break;
        }
        iterations += 1;
        let mut c = [0.0; D];
        for (x, _) in &pts[..D] {
            for i in 0..D {
                c[i] += x[i] / D as f64;
            }
        }
        let along = |t: f64| -> [f64; D] {
            let mut x = [0.0; D];
            for i in 0..D {
                x[i] = c[i] + t * (pts[D].0[i] - c[i]);
            }
            x
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < pts[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            pts[D] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < pts[D - 1].1 {
            pts[D] = (xr, fr);
        } else {
            let (xc, fc) = if fr < pts[D].1 {
                let x = along(-0.5);
                (x, f(&x))
            } else {
                let x = along(0.5);
                (x, f(&x))
            };
            if fc < pts[D].1.min(fr) {
                pts[D] = (xc, fc);
            } else {
                let x0 = pts[0].0;
                for p in pts.iter_mut().skip(1) {
                    for i in 0..D {
                        p.0[i] = x0[i] + 0.5 * (p.0[i] - x0[i]);
                    }
                    p.1 = f(&p.0);
                }
            }
        }
    }
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    SimplexResult {
        x: pts[0].0,
        fx: pts[0].1,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let r = minimize(
            |x: &[f64; 2]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            [-1.2, 1.0],
            [0.5, 0.5],
            1e-14,
            2000,
        );
        assert!(r.converged);
        assert!(
            (r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3,
            "{:?}",
            r.x
        );
    }

    #[test]
    fn respects_iteration_cap() {
        let r = minimize(
            |x: &[f64; 3]| x.iter().map(|v| v * v).sum(),
            [5.0, 5.0, 5.0],
            [1.0; 3],
            0.0,
            10,
        );
        assert!(!r.converged);
        assert_eq!(r.iterations, 10);
    }

    #[test]
    fn infinite_region_is_avoided() {
        let r = minimize(
            |x: &[f64; 1]| {
                if x[0] < 0.0 {
                    f64::INFINITY
                } else {
                    (x[0] - 0.3).powi(2)
                }
            },
            [1.0],
            [0.5],
            1e-12,
            500,
        );
        assert!((r.x[0] - 0.3).abs() < 1e-4);
    }
}
