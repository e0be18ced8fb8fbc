//! Limited-memory BFGS over a subset of coordinates, with Armijo backtracking.

use std::collections::VecDeque;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIters,
    StepFailure,
}

#[derive(Clone, Copy, Debug)]
pub struct Settings {
    pub max_iters: usize,
    /// Stop once `(L_prev - L) / L_prev` falls below this.
    pub tol_rel: f64,
    /// Trial step of the first, steepest-descent iteration.
    pub first_step: f64,
    pub memory: usize,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            max_iters: 1000,
            tol_rel: 1e-10,
            first_step: 1e-2,
            memory: 8,
            armijo: 1e-4,
            max_backtracks: 60,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` over the coordinates listed in `free`; other entries of `x` never
/// change. `f` fills the full gradient and returns the loss plus an auxiliary payload,
/// which `accepted` receives after the start point and after every accepted step.
///
/// Returns the stop reason and the number of accepted steps. `x` holds the best
/// iterate on return.
pub fn minimize<T>(
    x: &mut [f64],
    free: &[usize],
    settings: &Settings,
    mut f: impl FnMut(&[f64], &mut [f64]) -> (f64, T),
    mut accepted: impl FnMut(usize, f64, &T),
) -> (StopReason, usize) {
    let n = x.len();
    let mut grad_full = vec![0.0; n];
    let (mut loss, aux) = f(x, &mut grad_full);
    accepted(0, loss, &aux);
    let gather = |full: &[f64]| free.iter().map(|&i| full[i]).collect::<Vec<f64>>();
    let mut g = gather(&grad_full);
    if loss == 0.0 || g.iter().all(|&v| v == 0.0) {
        return (StopReason::Converged, 0);
    }

    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut trial = x.to_vec();
    let mut iters = 0;
    while iters < settings.max_iters {
        let mut use_memory = !pairs.is_empty();
        let outcome = loop {
            let (dir, step0) = if use_memory {
                (two_loop(&g, &pairs), 1.0)
            } else {
                (g.iter().map(|v| -v).collect(), settings.first_step)
            };
            let slope = dot(&g, &dir);
            if slope < 0.0 {
                let mut step = step0;
                let mut found = None;
                for _ in 0..=settings.max_backtracks {
                    for (k, &i) in free.iter().enumerate() {
                        trial[i] = x[i] + step * dir[k];
                    }
                    let (l, aux) = f(&trial, &mut grad_full);
                    if l.is_finite() && l <= loss + settings.armijo * step * slope && l < loss {
                        found = Some((step, l, aux));
                        break;
                    }
                    step *= 0.5;
                }
                if let Some(hit) = found {
                    break Some((dir, hit));
                }
            }
            if use_memory {
                pairs.clear();
                use_memory = false;
            } else {
                break None;
            }
        };
        let Some((dir, (step, new_loss, aux))) = outcome else {
            return (StopReason::StepFailure, iters);
        };
        // grad_full holds the gradient at the accepted trial point
        let new_g = gather(&grad_full);
        let s: Vec<f64> = dir.iter().map(|d| d * step).collect();
        let y: Vec<f64> = new_g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if pairs.len() == settings.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        for &i in free {
            x[i] = trial[i];
        }
        let prev = loss;
        loss = new_loss;
        g = new_g;
        iters += 1;
        accepted(iters, loss, &aux);
        if loss == 0.0 || (prev - loss) / prev < settings.tol_rel || g.iter().all(|&v| v == 0.0) {
            return (StopReason::Converged, iters);
        }
    }
    (StopReason::MaxIters, iters)
}

fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
