//! Nelder–Mead simplex minimizer with iteration history.

#[derive(Clone, Debug)]
pub struct Options {
    pub max_evals: usize,
    /// Stop when f_worst − f_best ≤ f_rel·|f_best| + f_abs.
    pub f_rel: f64,
    pub f_abs: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_evals: 20_000,
            f_rel: 1e-10,
            f_abs: 1e-24,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub n_evals: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub history: Vec<f64>,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Minimizes `f` from `x0` with initial simplex offsets `step` along each
/// coordinate. The simplex is rebuilt once around the first converged point
/// to guard against premature collapse.
pub fn minimize<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], step: &[f64], opts: &Options) -> Outcome {
    assert_eq!(x0.len(), step.len());
    let mut obj = Counted { f, evals: 0 };
    let mut history = Vec::new();
    let first = run(&mut obj, x0, step, opts, &mut history);
    if !first.0 {
        let (x, fx) = first.1;
        return Outcome {
            x,
            f: fx,
            n_evals: obj.evals,
            converged: false,
            history,
        };
    }
    let (x1, _) = first.1;
    let restart_step: Vec<f64> = step
        .iter()
        .zip(&x1)
        .map(|(s, x)| (0.1 * s).max(1e-3 * x.abs()).max(1e-12))
        .collect();
    let (converged, (x, fx)) = run(&mut obj, &x1, &restart_step, opts, &mut history);
    Outcome {
        x,
        f: fx,
        n_evals: obj.evals,
        converged,
        history,
    }
}

fn run<F: FnMut(&[f64]) -> f64>(
    obj: &mut Counted<F>,
    x0: &[f64],
    step: &[f64],
    opts: &Options,
    history: &mut Vec<f64>,
) -> (bool, (Vec<f64>, f64)) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = obj.call(x0);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step[i];
        let fx = obj.call(&x);
        simplex.push((x, fx));
    }
    let by_value = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| a.1.total_cmp(&b.1);
    loop {
        simplex.sort_by(by_value);
        let best = simplex[0].1;
        let worst = simplex[n].1;
        history.push(best);
        if worst - best <= opts.f_rel * best.abs() + opts.f_abs {
            return (true, simplex.swap_remove(0));
        }
        if obj.evals >= opts.max_evals {
            return (false, simplex.swap_remove(0));
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = obj.call(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = obj.call(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = along(0.5);
            let fc = obj.call(&xc);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = obj.call(&xc);
            (xc, fc)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink towards the best vertex
        let best_x = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best_x.iter().zip(&v.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
            let fx = obj.call(&x);
            *v = (x, fx);
        }
    }
}
