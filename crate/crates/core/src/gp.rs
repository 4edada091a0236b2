//! Exact Gaussian-process regression with a squared-exponential kernel,
//! plus the uniform prediction-error bound machinery.
//!
//! The posterior at a query point x is
//!
//! ```text
//! mu(x)     = k_X(x)^T (K + sigma_T^2 I)^-1 Y
//! sigma2(x) = k(x,x) - k_X(x)^T (K + sigma_T^2 I)^-1 k_X(x)
//! ```
//!
//! and the prediction error is uniformly bounded with probability 1 - delta
//! by `eta(x) = sqrt(beta) * sigma(x) + gamma`, where beta depends on the
//! grid constant tau and the compact input domain, and gamma collects the
//! Lipschitz constants of the true function, the posterior mean and the
//! posterior standard deviation.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::dynamics::INPUT_DOMAIN;
use crate::error::{Error, Result};

/// Squared-exponential kernel `sigma_f^2 exp(-||x - x'||^2 / (2 l^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SEKernel {
    /// Signal magnitude sigma_f.
    pub sigma_f: f64,
    /// Length scale l.
    pub ell: f64,
}

impl SEKernel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_f > 0.0 && self.sigma_f.is_finite()) {
            return Err(Error::Config("sigma_f must be positive".into()));
        }
        if !(self.ell > 0.0 && self.ell.is_finite()) {
            return Err(Error::Config("ell must be positive".into()));
        }
        Ok(())
    }
}

/// Evaluate the kernel between two points.
pub fn kernel_eval(k: &SEKernel, x: &[f64; 2], x2: &[f64; 2]) -> f64 {
    let d0 = x[0] - x2[0];
    let d1 = x[1] - x2[1];
    k.sigma_f * k.sigma_f * (-(d0 * d0 + d1 * d1) / (2.0 * k.ell * k.ell)).exp()
}

/// Training data for one expert.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<[f64; 2]>,
    pub outputs: Vec<f64>,
    /// Observation noise standard deviation sigma_T.
    pub noise_std: f64,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.inputs.len() != self.outputs.len() {
            return Err(Error::LengthMismatch(format!(
                "{} inputs vs {} outputs",
                self.inputs.len(),
                self.outputs.len()
            )));
        }
        if self.inputs.is_empty() {
            return Err(Error::Config("dataset must contain at least one sample".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config("noise_std must be nonnegative".into()));
        }
        for x in &self.inputs {
            if x[0] < INPUT_DOMAIN[0].0 - 1e-12
                || x[0] > INPUT_DOMAIN[0].1 + 1e-12
                || x[1] < INPUT_DOMAIN[1].0 - 1e-12
                || x[1] > INPUT_DOMAIN[1].1 + 1e-12
            {
                return Err(Error::Config(format!(
                    "input ({}, {}) outside the compact domain",
                    x[0], x[1]
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Serialize as CSV with columns `phi_m,omega_m,y` and a header comment
    /// carrying sigma_T.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# noise_std = {}", self.noise_std);
        out.push_str("phi_m,omega_m,y\n");
        for (x, y) in self.inputs.iter().zip(&self.outputs) {
            let _ = writeln!(out, "{},{},{}", x[0], x[1], y);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut noise_std = None;
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((key, value)) = rest.split_once('=') {
                    if key.trim() == "noise_std" {
                        noise_std = Some(value.trim().parse::<f64>().map_err(|e| {
                            Error::DatasetParse(format!("bad noise_std: {e}"))
                        })?);
                    }
                }
                continue;
            }
            if line.starts_with("phi_m") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::DatasetParse(format!(
                    "line {}: expected 3 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::DatasetParse(format!("line {}: {e}", lineno + 1)))
            };
            inputs.push([parse(fields[0])?, parse(fields[1])?]);
            outputs.push(parse(fields[2])?);
        }
        let noise_std = noise_std
            .ok_or_else(|| Error::DatasetParse("missing `# noise_std = ...` header".into()))?;
        let ds = Dataset { inputs, outputs, noise_std };
        ds.validate()?;
        Ok(ds)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// One fitted GP expert: dataset, kernel and cached factorization.
#[derive(Debug, Clone)]
pub struct GPModel {
    dataset: Dataset,
    kernel: SEKernel,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

/// Fit a GP to the dataset: assemble the Gram matrix, factorize
/// `K + sigma_T^2 I` and cache `alpha = (K + sigma_T^2 I)^-1 Y`.
///
/// No jitter is added automatically; a singular Gram matrix (e.g. duplicate
/// inputs with sigma_T = 0) surfaces as [`Error::FactorizationFailed`].
pub fn fit(dataset: Dataset, kernel: SEKernel) -> Result<GPModel> {
    dataset.validate()?;
    kernel.validate()?;
    let m = dataset.len();
    let noise_var = dataset.noise_std * dataset.noise_std;
    let mut gram = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = kernel_eval(&kernel, &dataset.inputs[i], &dataset.inputs[j]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
        gram[(i, i)] += noise_var;
    }
    let chol = Cholesky::new(gram).ok_or(Error::FactorizationFailed)?;
    let y = DVector::from_column_slice(&dataset.outputs);
    let alpha = chol.solve(&y);
    Ok(GPModel { dataset, kernel, chol, alpha })
}

impl GPModel {
    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn kernel(&self) -> &SEKernel {
        &self.kernel
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    fn kernel_vector(&self, x: &[f64; 2]) -> DVector<f64> {
        DVector::from_iterator(
            self.dataset.len(),
            self.dataset.inputs.iter().map(|xi| kernel_eval(&self.kernel, x, xi)),
        )
    }
}

/// Posterior mean at a query point.
pub fn posterior_mean(model: &GPModel, x: &[f64; 2]) -> f64 {
    let mut acc = 0.0;
    for (xi, a) in model.dataset.inputs.iter().zip(model.alpha.iter()) {
        acc += kernel_eval(&model.kernel, x, xi) * a;
    }
    acc
}

/// Posterior variance at a query point.
///
/// Round-off can push the exact nonnegative value slightly below zero;
/// values within 1e-12 of zero are clamped so the square root in `eta`
/// stays well defined.
pub fn posterior_var(model: &GPModel, x: &[f64; 2]) -> f64 {
    let k_x = model.kernel_vector(x);
    let prior = kernel_eval(&model.kernel, x, x);
    let v = model.chol.solve(&k_x);
    let var = prior - k_x.dot(&v);
    if var < 0.0 && var > -1e-12 {
        0.0
    } else {
        var
    }
}

/// Parameters of the uniform error bound `eta(x) = sqrt(beta) sigma(x) + gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    /// Per-expert failure probability.
    pub delta: f64,
    /// Grid constant tau.
    pub tau: f64,
    /// Lipschitz constant of the true function.
    pub l_f: f64,
    pub beta: f64,
    pub gamma: f64,
    pub l_mu: f64,
    pub l_sigma: f64,
    pub l_k: f64,
}

impl BoundParams {
    /// Compute all bound constants for one fitted expert over the compact
    /// input domain.
    pub fn compute(model: &GPModel, delta: f64, tau: f64, l_f: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config("delta must lie in (0, 1)".into()));
        }
        if !(tau > 0.0) {
            return Err(Error::Config("tau must be positive".into()));
        }
        if !(l_f >= 0.0) {
            return Err(Error::Config("l_f must be nonnegative".into()));
        }
        let l_k = lipschitz_kernel_se(model.kernel());
        let l_sigma = lipschitz_sigma_se(model.kernel());
        let l_mu = lipschitz_mu(model, l_k);
        let beta = compute_beta(delta, tau, &INPUT_DOMAIN);
        let gamma = compute_gamma(beta, l_sigma, l_f, l_mu, tau);
        Ok(BoundParams { delta, tau, l_f, beta, gamma, l_mu, l_sigma, l_k })
    }
}

/// Lipschitz constant of the posterior mean: `L_k sqrt(M) ||alpha||`.
pub fn lipschitz_mu(model: &GPModel, l_k: f64) -> f64 {
    l_k * (model.dataset.len() as f64).sqrt() * model.alpha.norm()
}

/// Lipschitz constant of the posterior standard deviation for the SE
/// kernel: `sqrt(2) sigma_f / l`.
pub fn lipschitz_sigma_se(kernel: &SEKernel) -> f64 {
    std::f64::consts::SQRT_2 * kernel.sigma_f / kernel.ell
}

/// Lipschitz constant of the SE kernel: `sigma_f^2 l^-1 exp(-0.5)`.
pub fn lipschitz_kernel_se(kernel: &SEKernel) -> f64 {
    kernel.sigma_f * kernel.sigma_f / kernel.ell * (-0.5f64).exp()
}

/// `beta = 2 sum_j log((xbar_j - xlo_j) / (sqrt(2) tau) + 1) - 2 log(delta)`.
pub fn compute_beta(delta: f64, tau: f64, domain: &[(f64, f64); 2]) -> f64 {
    let mut beta = -2.0 * delta.ln();
    for &(lo, hi) in domain {
        beta += 2.0 * ((hi - lo) / (std::f64::consts::SQRT_2 * tau) + 1.0).ln();
    }
    beta
}

/// `gamma = (sqrt(beta) L_sigma + L_f + L_mu) tau`.
pub fn compute_gamma(beta: f64, l_sigma: f64, l_f: f64, l_mu: f64, tau: f64) -> f64 {
    (beta.sqrt() * l_sigma + l_f + l_mu) * tau
}

/// Uniform error bound `eta(x) = sqrt(beta) sigma(x) + gamma` at one point.
pub fn eta(model: &GPModel, bp: &BoundParams, x: &[f64; 2]) -> f64 {
    bp.beta.sqrt() * posterior_var(model, x).sqrt() + bp.gamma
}
