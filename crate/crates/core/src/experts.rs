//! A bank of fitted GP experts with their error-bound constants.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::aggregation::ExpertOutputs;
use crate::datagen::{generate_grid_dataset, RegionSpec};
use crate::dynamics::{MappedInput, INPUT_DOMAIN};
use crate::error::{Error, Result};
use crate::gp::{self, BoundParams, Dataset, GPModel, SEKernel};

/// N fitted experts over partitioned input regions, plus the per-expert
/// uniform error-bound parameters.
#[derive(Debug, Clone)]
pub struct ExpertBank {
    models: Vec<GPModel>,
    bounds: Vec<BoundParams>,
}

impl ExpertBank {
    /// Fit one expert per dataset and compute its bound constants.
    pub fn fit(
        datasets: Vec<Dataset>,
        kernel: SEKernel,
        delta: f64,
        tau: f64,
        l_f: f64,
    ) -> Result<Self> {
        if datasets.is_empty() {
            return Err(Error::Config("expert bank needs at least one dataset".into()));
        }
        let mut models = Vec::with_capacity(datasets.len());
        let mut bounds = Vec::with_capacity(datasets.len());
        for ds in datasets {
            let model = gp::fit(ds, kernel)?;
            bounds.push(BoundParams::compute(&model, delta, tau, l_f)?);
            models.push(model);
        }
        Ok(ExpertBank { models, bounds })
    }

    /// Generate grid datasets for the regions (seeded per expert) and fit.
    pub fn from_regions(
        regions: &[RegionSpec],
        kernel: SEKernel,
        delta: f64,
        tau: f64,
        l_f: f64,
        seed: u64,
    ) -> Result<Self> {
        let datasets = generate_region_datasets(regions, seed)?;
        Self::fit(datasets, kernel, delta, tau, l_f)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[GPModel] {
        &self.models
    }

    pub fn bounds(&self) -> &[BoundParams] {
        &self.bounds
    }

    /// Posterior means only.
    pub fn means(&self, xm: &MappedInput) -> ExpertOutputs {
        let x = xm.as_array();
        ExpertOutputs::from_means(
            self.models.iter().map(|m| gp::posterior_mean(m, &x)).collect(),
        )
    }

    /// Posterior means and variances.
    pub fn means_and_variances(&self, xm: &MappedInput) -> ExpertOutputs {
        let x = xm.as_array();
        let means = self.models.iter().map(|m| gp::posterior_mean(m, &x)).collect();
        let variances = self.models.iter().map(|m| gp::posterior_var(m, &x)).collect();
        ExpertOutputs {
            means,
            variances: Some(variances),
            etas: None,
        }
    }

    /// Posterior means, variances and uniform error bounds.
    pub fn full_outputs(&self, xm: &MappedInput) -> ExpertOutputs {
        let mut out = self.means_and_variances(xm);
        let variances = out.variances.as_ref().expect("variances present");
        let etas = self
            .bounds
            .iter()
            .zip(variances)
            .map(|(bp, var)| bp.beta.sqrt() * var.sqrt() + bp.gamma)
            .collect();
        out.etas = Some(etas);
        out
    }

    /// `sup_x min_i eta_i(x)` over a dense grid of the compact domain.
    pub fn eta_min_sup(&self, grid_per_dim: usize) -> f64 {
        let n = grid_per_dim.max(2);
        let (phi_lo, phi_hi) = INPUT_DOMAIN[0];
        let (om_lo, om_hi) = INPUT_DOMAIN[1];
        let mut sup = f64::NEG_INFINITY;
        for i in 0..n {
            let phi_m = phi_lo + (phi_hi - phi_lo) * i as f64 / (n - 1) as f64;
            for j in 0..n {
                let omega_m = om_lo + (om_hi - om_lo) * j as f64 / (n - 1) as f64;
                let x = [phi_m, omega_m];
                let min_eta = self
                    .models
                    .iter()
                    .zip(&self.bounds)
                    .map(|(m, bp)| gp::eta(m, bp, &x))
                    .fold(f64::INFINITY, f64::min);
                sup = sup.max(min_eta);
            }
        }
        sup
    }
}

/// Seeded grid datasets for a list of expert regions. Each expert gets an
/// independent stream derived from the base seed, so datasets are stable
/// under reordering of generation.
pub fn generate_region_datasets(regions: &[RegionSpec], seed: u64) -> Result<Vec<Dataset>> {
    regions
        .iter()
        .enumerate()
        .map(|(i, region)| {
            let expert_seed = seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut rng = ChaCha8Rng::seed_from_u64(expert_seed);
            generate_grid_dataset(region, &mut rng)
        })
        .collect()
}
