//! Box-constrained Nelder–Mead.
//!
//! Trial points are projected onto the box. Unbounded coordinates (periodic
//! angles) are left free and wrapped by the caller.

pub(crate) struct Options<'a> {
    /// Stop when the objective spread is below `f_tol * max(1, |f_best|)` ...
    pub f_tol: f64,
    /// ... and every vertex lies within `x_tol[i]` of the best one in coordinate `i`.
    pub x_tol: &'a [f64],
    pub max_iters: usize,
    /// Fresh simplices built around the optimum after first convergence.
    pub restarts: usize,
}

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
}

pub(crate) fn clamp_into(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

pub(crate) fn minimize<F>(mut f: F, x0: &[f64], steps: &[f64], lo: &[f64], hi: &[f64], opts: &Options) -> Outcome
where
    F: FnMut(&[f64]) -> f64,
{
    let mut x = x0.to_vec();
    clamp_into(&mut x, lo, hi);
    let mut fx = f(&x);
    let mut budget = opts.max_iters;
    let mut converged = false;
    for _ in 0..=opts.restarts {
        let (bx, bf, iters, ok) = run(&mut f, &x, fx, steps, lo, hi, opts, budget);
        budget = budget.saturating_sub(iters);
        let improved = bf < fx;
        x = bx;
        fx = bf;
        converged = ok;
        if !ok || !improved || budget == 0 {
            break;
        }
    }
    Outcome { x, f: fx, converged }
}

#[allow(clippy::too_many_arguments)]
fn run<F>(
    f: &mut F,
    x0: &[f64],
    f0: f64,
    steps: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &Options,
    budget: usize,
) -> (Vec<f64>, f64, usize, bool)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut vals: Vec<f64> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    vals.push(f0);
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += steps[i];
        // step away from a bound rather than collapsing onto it
        if p[i] > hi[i] {
            p[i] = x0[i] - steps[i];
        }
        clamp_into(&mut p, lo, hi);
        vals.push(f(&p));
        pts.push(p);
    }

    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];
    let mut iters = 0;
    let mut converged = false;
    while iters < budget {
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        let (best, worst, second) = (order[0], order[n], order[n - 1]);
        if done(&pts, &vals, best, opts) {
            converged = true;
            break;
        }
        iters += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&pts[i]) {
                *c += v / n as f64;
            }
        }
        let along = |coef: f64, out: &mut Vec<f64>, pts: &[Vec<f64>]| {
            for j in 0..n {
                out[j] = centroid[j] + coef * (pts[worst][j] - centroid[j]);
            }
            clamp_into(out, lo, hi);
        };

        along(-1.0, &mut trial, &pts);
        let fr = f(&trial);
        if fr < vals[best] {
            along(-2.0, &mut trial2, &pts);
            let fe = f(&trial2);
            if fe < fr {
                pts[worst].copy_from_slice(&trial2);
                vals[worst] = fe;
            } else {
                pts[worst].copy_from_slice(&trial);
                vals[worst] = fr;
            }
            continue;
        }
        if fr < vals[second] {
            pts[worst].copy_from_slice(&trial);
            vals[worst] = fr;
            continue;
        }
        let (coef, bar) = if fr < vals[worst] {
            (-0.5, fr)
        } else {
            (0.5, vals[worst])
        };
        along(coef, &mut trial2, &pts);
        let fc = f(&trial2);
        if fc < bar {
            pts[worst].copy_from_slice(&trial2);
            vals[worst] = fc;
            continue;
        }
        let anchor = pts[best].clone();
        for &i in &order[1..] {
            for j in 0..n {
                pts[i][j] = anchor[j] + 0.5 * (pts[i][j] - anchor[j]);
            }
            vals[i] = f(&pts[i]);
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)))
        .unwrap_or(0);
    (pts.swap_remove(best), vals[best], iters, converged)
}

fn done(pts: &[Vec<f64>], vals: &[f64], best: usize, opts: &Options) -> bool {
    let fb = vals[best];
    let spread = vals.iter().fold(0.0f64, |acc, v| acc.max(v - fb));
    if !(spread <= opts.f_tol * fb.abs().max(1.0)) {
        return false;
    }
    pts.iter().all(|p| {
        p.iter()
            .zip(&pts[best])
            .zip(opts.x_tol)
            .all(|((a, b), t)| (a - b).abs() <= *t)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(x_tol: &[f64]) -> Options<'_> {
        Options {
            f_tol: 1e-14,
            x_tol,
            max_iters: 5000,
            restarts: 1,
        }
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let inf = f64::INFINITY;
        let out = minimize(
            rosen,
            &[-1.2, 1.0],
            &[0.1, 0.1],
            &[-inf, -inf],
            &[inf, inf],
            &opts(&[1e-8, 1e-8]),
        );
        assert!(out.converged);
        assert!(
            (out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6,
            "{:?}",
            out.x
        );
    }

    #[test]
    fn respects_bounds() {
        // unconstrained minimum at (-1, 3); box pins the first coordinate at 0
        let f = |x: &[f64]| (x[0] + 1.0).powi(2) + (x[1] - 3.0).powi(2);
        let out = minimize(
            f,
            &[2.0, 0.0],
            &[0.5, 0.5],
            &[0.0, -10.0],
            &[5.0, 10.0],
            &opts(&[1e-9, 1e-9]),
        );
        assert!(out.x[0] >= 0.0);
        assert!(out.x[0] < 1e-8);
        assert!((out.x[1] - 3.0).abs() < 1e-7);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let f = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let inf = f64::INFINITY;
        let o = Options {
            f_tol: 1e-30,
            x_tol: &[1e-30, 1e-30],
            max_iters: 5,
            restarts: 0,
        };
        let out = minimize(f, &[1.0, 1.0], &[0.1, 0.1], &[-inf, -inf], &[inf, inf], &o);
        assert!(!out.converged);
        assert!(out.f < 2.0);
    }
}
