//! BFGS with Armijo backtracking for small smooth problems, plus a Newton
//! polish on the gradient alone.

#[derive(Clone, Debug)]
pub struct BfgsOptions {
    /// Stop when the max-norm of the gradient falls below this.
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            grad_tol: 1e-9,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Central-difference gradient with step `step` per coordinate.
pub fn central_gradient<F: FnMut(&[f64]) -> f64>(obj: &mut F, x: &[f64], step: f64, out: &mut [f64]) {
    let mut y = x.to_vec();
    for i in 0..x.len() {
        y[i] = x[i] + step;
        let fp = obj(&y);
        y[i] = x[i] - step;
        let fm = obj(&y);
        y[i] = x[i];
        out[i] = (fp - fm) / (2.0 * step);
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Minimizes `obj` from `x0`; `grad` fills the gradient at a point.
pub fn bfgs<F, G>(mut obj: F, mut grad: G, x0: &[f64], opts: &BfgsOptions) -> BfgsResult
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64], &mut [f64]),
{
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut fx = obj(&x);
    let mut g = vec![0.0; d];
    grad(&x, &mut g);
    // inverse Hessian approximation
    let mut hinv = vec![0.0; d * d];
    for i in 0..d {
        hinv[i * d + i] = 1.0;
    }
    let mut iterations = 0;
    let mut xn = vec![0.0; d];
    let mut gn = vec![0.0; d];
    while max_abs(&g) >= opts.grad_tol && iterations < opts.max_iter {
        iterations += 1;
        let mut p: Vec<f64> = (0..d).map(|i| -(0..d).map(|j| hinv[i * d + j] * g[j]).sum::<f64>()).collect();
        let mut slope: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            // not a descent direction: restart from steepest descent
            for i in 0..d {
                for j in 0..d {
                    hinv[i * d + j] = if i == j { 1.0 } else { 0.0 };
                }
            }
            p = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..d {
                xn[i] = x[i] + t * p[i];
            }
            let fnew = obj(&xn);
            if fnew <= fx + 1e-4 * t * slope {
                accepted = true;
                fx = fnew;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        grad(&xn, &mut gn);
        let s: Vec<f64> = (0..d).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..d).map(|i| gn[i] - g[i]).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..d).map(|i| (0..d).map(|j| hinv[i * d + j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..d {
                for j in 0..d {
                    hinv[i * d + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        x.copy_from_slice(&xn);
        g.copy_from_slice(&gn);
    }
    let grad_norm = max_abs(&g);
    BfgsResult {
        x,
        value: fx,
        grad_norm,
        iterations,
        converged: grad_norm < opts.grad_tol,
    }
}

/// Newton iterations on `grad` with a central-difference Jacobian. Useful once
/// function values are too noisy for a line search but the gradient is not.
/// Returns the final point and the max-norm of its gradient.
pub fn newton_polish<G>(mut grad: G, x0: &[f64], step: f64, tol: f64, max_iter: usize) -> (Vec<f64>, f64)
where
    G: FnMut(&[f64], &mut [f64]),
{
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; d];
    grad(&x, &mut g);
    let mut gp = vec![0.0; d];
    let mut gm = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    for _ in 0..max_iter {
        if max_abs(&g) < tol {
            break;
        }
        let mut y = x.clone();
        for j in 0..d {
            y[j] = x[j] + step;
            grad(&y, &mut gp);
            y[j] = x[j] - step;
            grad(&y, &mut gm);
            y[j] = x[j];
            for i in 0..d {
                hess[i * d + j] = (gp[i] - gm[i]) / (2.0 * step);
            }
        }
        let mut dx = g.clone();
        if crate::linalg::solve(&hess, &mut dx, d).is_none() {
            break;
        }
        let xn: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a - b).collect();
        let mut gn = vec![0.0; d];
        grad(&xn, &mut gn);
        if max_abs(&gn) >= max_abs(&g) {
            break;
        }
        x = xn;
        g = gn;
    }
    let norm = max_abs(&g);
    (x, norm)
}
