//! Dense BFGS with a backtracking Armijo line search.

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `f`, which returns the value and gradient at a point. Stops
/// when the max-norm of the gradient drops to `grad_tol`, after `max_iter`
/// iterations, or when no step along the search direction decreases `f`.
pub fn minimize<F>(f: F, x0: &[f64], grad_tol: f64, max_iter: usize) -> BfgsOutcome
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    // Inverse Hessian approximation, row-major.
    let mut h = identity(n);
    let mut scaled = false;
    let mut iterations = 0;

    while iterations < max_iter && max_abs(&g) > grad_tol && fx.is_finite() {
        iterations += 1;
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&p, &g);
        if !(slope < 0.0) {
            h = identity(n);
            p = g.iter().map(|v| -v).collect();
            slope = dot(&p, &g);
        }
        let Some((x_new, f_new, g_new)) = line_search(&f, &x, fx, &p, slope) else {
            if h == identity(n) {
                break;
            }
            // Retry once along steepest descent before giving up.
            h = identity(n);
            scaled = false;
            continue;
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if !scaled {
                let gamma = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= gamma);
                scaled = true;
            }
            update_inverse(&mut h, &s, &y, sy);
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    let converged = max_abs(&g) <= grad_tol;
    BfgsOutcome {
        x,
        value: fx,
        gradient: g,
        iterations,
        converged,
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

/// `H <- (I - rho s y') H (I - rho y s') + rho s s'`
fn update_inverse(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

fn line_search<F>(
    f: &F,
    x: &[f64],
    fx: f64,
    p: &[f64],
    slope: f64,
) -> Option<(Vec<f64>, f64, Vec<f64>)>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    const C1: f64 = 1e-4;
    let mut alpha = 1.0;
    for _ in 0..60 {
        let trial: Vec<f64> = x.iter().zip(p).map(|(a, b)| a + alpha * b).collect();
        let (ft, gt) = f(&trial);
        if ft.is_finite() && ft <= fx + C1 * alpha * slope && ft <= fx {
            if ft == fx && trial == x {
                return None;
            }
            return Some((trial, ft, gt));
        }
        alpha *= 0.5;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (v, g)
        };
        let out = minimize(f, &[-1.2, 1.0], 1e-8, 1000);
        assert!(out.converged, "{out:?}");
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_in_few_steps() {
        let f = |x: &[f64]| {
            let v = 2.0 * x[0] * x[0] + x[1] * x[1] + x[0] * x[1] - x[0];
            (v, vec![4.0 * x[0] + x[1] - 1.0, 2.0 * x[1] + x[0]])
        };
        let out = minimize(f, &[3.0, -2.0], 1e-10, 100);
        assert!(out.converged);
        assert!(out.iterations < 20);
        assert!((out.x[0] - 2.0 / 7.0).abs() < 1e-9);
    }
}
