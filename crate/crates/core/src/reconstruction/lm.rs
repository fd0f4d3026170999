//! Damped Gauss–Newton (Levenberg–Marquardt) least squares with a
//! caller-supplied analytic Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{QpsError, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iters: usize,
    /// Stop when the relative step length drops below this.
    pub step_tol: f64,
    /// Stop when the relative decrease of the residual sum of squares drops below this.
    pub rss_tol: f64,
    pub lambda0: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            step_tol: 1e-13,
            rss_tol: 1e-16,
            lambda0: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmSolution {
    pub x: DVector<f64>,
    pub residuals: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LmSolution {
    pub fn rss(&self) -> f64 {
        self.residuals.norm_squared()
    }

    /// s² (JᵀJ)⁺ with s² = RSS / (n − p), or the bare pseudo-inverse when the
    /// fit has no spare degrees of freedom.
    pub fn covariance(&self) -> DMatrix<f64> {
        let (n, p) = self.jacobian.shape();
        let jtj = self.jacobian.transpose() * &self.jacobian;
        let pinv = pseudo_inverse(&jtj);
        let s2 = if n > p { self.rss() / (n - p) as f64 } else { 1.0 };
        pinv * s2
    }
}

/// Moore–Penrose inverse of a symmetric positive semidefinite matrix,
/// discarding singular values below 1e-12 of the largest.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cut = smax * 1e-12;
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let inv = svd.singular_values.map(|s| if s > cut && s > 0.0 { 1.0 / s } else { 0.0 });
    vt.transpose() * DMatrix::from_diagonal(&inv) * u.transpose()
}

/// Minimize |r(x)|² where `model(x)` returns residuals r and Jacobian ∂r/∂x.
pub fn levenberg_marquardt<F>(model: F, x0: DVector<f64>, opts: &LmOptions) -> Result<LmSolution>
where
    F: Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let mut x = x0;
    let (mut r, mut j) = model(&x);
    if r.iter().chain(j.iter()).any(|v| !v.is_finite()) {
        return Err(QpsError::FitFailed("model is not finite at the starting point".into()));
    }
    let mut rss = r.norm_squared();
    let mut lambda = opts.lambda0;
    let p = x.len();
    for it in 1..=opts.max_iters {
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut step = None;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..p {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let delta = match a.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => pseudo_inverse(&a) * (-&g),
            };
            let xn = &x + &delta;
            let (rn, jn) = model(&xn);
            let rss_n = rn.norm_squared();
            if rss_n.is_finite() && rss_n <= rss {
                step = Some((xn, rn, jn, rss_n, delta));
                lambda = (lambda / 3.0).max(1e-15);
                break;
            }
            lambda *= 4.0;
        }
        let Some((xn, rn, jn, rss_n, delta)) = step else {
            // no downhill step left: at a minimum to working precision
            return Ok(LmSolution { x, residuals: r, jacobian: j, iterations: it, converged: true });
        };
        let small_step = delta.norm() <= opts.step_tol * (x.norm() + opts.step_tol);
        let small_gain = rss - rss_n <= opts.rss_tol * rss.max(1e-300);
        x = xn;
        r = rn;
        j = jn;
        rss = rss_n;
        if small_step || small_gain || rss == 0.0 {
            return Ok(LmSolution { x, residuals: r, jacobian: j, iterations: it, converged: true });
        }
    }
    Ok(LmSolution {
        x,
        residuals: r,
        jacobian: j,
        iterations: opts.max_iters,
        converged: false,
    })
}
