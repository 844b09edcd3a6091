//! Derivative-free Nelder–Mead simplex minimisation.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Objective criterion: `(f_worst - f_best) <= tolerance * |f_best|`.
    pub tolerance: f64,
    /// Coordinate criterion: every vertex within `x_tolerance * (1 + |x_best|)`
    /// of the best one, per coordinate. Both criteria must hold.
    pub x_tolerance: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_iterations: 2000, tolerance: 1e-10, x_tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimises `f` starting from a simplex built by stepping `steps[k]` along
/// each coordinate from `x0`. Non-finite objective values are treated as `+inf`.
pub fn minimize<F>(f: F, x0: &[f64], steps: &[f64], opts: SimplexOptions) -> SimplexResult
where
    F: Fn(&[f64]) -> f64,
{
    let dim = x0.len();
    assert_eq!(dim, steps.len(), "one step per coordinate");
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for k in 0..dim {
        let mut v = x0.to_vec();
        v[k] += steps[k];
        let fv = eval(&v);
        simplex.push((v, fv));
    }

    let mut iterations = 0;
    let mut converged = false;
    loop {
        simplex.sort_by(|l, r| l.1.total_cmp(&r.1));
        if has_converged(&simplex, &opts) {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> =
            (0..dim).map(|k| simplex[..dim].iter().map(|v| v.0[k]).sum::<f64>() / dim as f64).collect();
        let along =
            |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[dim].0).map(|(c, w)| c + t * (c - w)).collect() };

        let best = simplex[0].1;
        let second_worst = simplex[dim - 1].1;
        let worst = simplex[dim].1;

        let xr = along(REFLECT);
        let fr = eval(&xr);
        if fr < best {
            let xe = along(REFLECT * EXPAND);
            let fe = eval(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < second_worst {
            simplex[dim] = (xr, fr);
            continue;
        }
        // contraction, outside when the reflection helped at all
        let (xc, fc) = if fr < worst {
            let xc = along(REFLECT * CONTRACT);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-CONTRACT);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < fr.min(worst) {
            simplex[dim] = (xc, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            for (x, a) in vertex.0.iter_mut().zip(&anchor) {
                *x = a + SHRINK * (*x - a);
            }
            vertex.1 = eval(&vertex.0);
        }
    }

    let (x, f) = simplex.swap_remove(0);
    SimplexResult { x, f, iterations, converged }
}

fn has_converged(sorted: &[(Vec<f64>, f64)], opts: &SimplexOptions) -> bool {
    let best = sorted[0].1;
    let worst = sorted[sorted.len() - 1].1;
    if !best.is_finite() {
        return false;
    }
    let anchor = &sorted[0].0;
    let within = |tol: f64| {
        sorted[1..].iter().all(|(v, _)| v.iter().zip(anchor).all(|(x, a)| (x - a).abs() <= tol * (1.0 + a.abs())))
    };
    // a simplex collapsed to floating-point resolution cannot make progress
    if within(4.0 * f64::EPSILON) {
        return true;
    }
    worst - best <= opts.tolerance * best.abs() && within(opts.x_tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimises_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions { max_iterations: 5000, tolerance: 1e-14, x_tolerance: 1e-12 };
        let mut r = minimize(rosen, &[-1.2, 1.0], &[0.1, 0.1], opts);
        // one restart from the best vertex, as fits do
        r = minimize(rosen, &r.x.clone(), &[0.01, 0.01], opts);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5, "{:?}", r.x);
        assert!((r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn reports_budget_exhaustion() {
        let bowl = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() + 1.0;
        let r = minimize(
            bowl,
            &[10.0, -10.0, 5.0],
            &[1.0, 1.0, 1.0],
            SimplexOptions { max_iterations: 3, ..Default::default() },
        );
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn handles_infinite_regions() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 2.0).powi(2) + 1.0 };
        let r = minimize(f, &[0.5], &[1.0], SimplexOptions::default());
        assert!((r.x[0] - 2.0).abs() < 1e-4);
    }
}
