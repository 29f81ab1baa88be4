//! Box-constrained smooth minimization used by the subsolvers and the
//! per-agent trajectory optimizer.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxMinimizerOptions {
    pub max_iterations: usize,
    /// Stop once `‖x − Π(x − ∇f(x))‖∞` falls below this.
    pub tolerance: f64,
    pub max_backtracks: usize,
    /// Trial points are compared against the largest of the last `memory`
    /// accepted values. 1 makes every accepted step lower `f`.
    pub memory: usize,
}

impl Default for BoxMinimizerOptions {
    fn default() -> Self {
        Self { max_iterations: 500, tolerance: 1e-8, max_backtracks: 60, memory: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxMinimizerResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub projected_gradient_norm: f64,
    pub converged: bool,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

fn projected_gradient_norm(x: &[f64], grad: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(grad)
        .zip(lower.iter().zip(upper))
        .map(|((xi, gi), (lo, hi))| (xi - (xi - gi).clamp(*lo, *hi)).abs())
        .fold(0.0, f64::max)
}

/// Projected gradient with spectral (Barzilai–Borwein) trial steps and a
/// sufficient-decrease backtracking test against a window of recent values.
///
/// `eval` writes the gradient into its second argument and returns the value.
pub fn minimize_box<F>(
    mut eval: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &BoxMinimizerOptions,
) -> BoxMinimizerResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(lower.len(), n);
    assert_eq!(upper.len(), n);

    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let mut grad = vec![0.0; n];
    let mut value = eval(&x, &mut grad);
    let mut step = 1.0;
    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];

    let memory = opts.memory.max(1);
    let mut recent = std::collections::VecDeque::with_capacity(memory);
    recent.push_back(value);
    let mut pg = projected_gradient_norm(&x, &grad, lower, upper);
    let mut iterations = 0;
    while iterations < opts.max_iterations && pg > opts.tolerance {
        iterations += 1;
        let mut accepted = false;
        let reference = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..opts.max_backtracks {
            for i in 0..n {
                trial[i] = (x[i] - step * grad[i]).clamp(lower[i], upper[i]);
            }
            let trial_value = eval(&trial, &mut trial_grad);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for i in 0..n {
                let d = trial[i] - x[i];
                lin += grad[i] * d;
                sq += d * d;
            }
            if trial_value.is_finite() && trial_value <= reference + lin + 0.5 * sq / step {
                accepted = true;
                // Barzilai–Borwein step for the next trial.
                let mut sy = 0.0;
                for i in 0..n {
                    sy += (trial[i] - x[i]) * (trial_grad[i] - grad[i]);
                }
                std::mem::swap(&mut x, &mut trial);
                std::mem::swap(&mut grad, &mut trial_grad);
                value = trial_value;
                if recent.len() == memory {
                    recent.pop_front();
                }
                recent.push_back(value);
                step = if sy > 1e-300 { (sq / sy).clamp(1e-12, 1e12) } else { step * 2.0 };
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        pg = projected_gradient_norm(&x, &grad, lower, upper);
    }

    BoxMinimizerResult {
        converged: pg <= opts.tolerance,
        x,
        value,
        iterations,
        projected_gradient_norm: pg,
    }
}
