//! Fusion of the expert predictions: MOE, GPOE and the two control-aware
//! vertex strategies.
//!
//! The control-aware mean strategy minimizes the Lyapunov derivative
//! `V_dot = -e^T Q e + 2 e^T P B_in (T_hat - T)` over the probability
//! simplex. Only the `(b^T P e) h^T w` part depends on w, and a linear
//! objective attains its optimum at a vertex, so the weight vector is the
//! indicator of the expert minimizing `theta_i = mu_i * (b^T P e)`. The
//! eta strategy picks the expert with the smallest uniform error bound.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Per-query outputs of the expert bank.
///
/// Variances and error bounds are optional so that strategies needing only
/// the means never force their computation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertOutputs {
    pub means: Vec<f64>,
    pub variances: Option<Vec<f64>>,
    pub etas: Option<Vec<f64>>,
}

impl ExpertOutputs {
    pub fn from_means(means: Vec<f64>) -> Self {
        ExpertOutputs { means, variances: None, etas: None }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

/// Convex aggregation weights: nonnegative, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    /// Construct from raw values, checking the simplex invariants.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Config("weights must be nonempty".into()));
        }
        if w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::Config("weights must be nonnegative".into()));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("weights sum to {sum}, expected 1")));
        }
        Ok(Weights(w))
    }

    /// Uniform weights `1/n` (the MOE choice).
    pub fn uniform(n: usize) -> Self {
        Weights(vec![1.0 / n as f64; n])
    }

    /// Exact simplex vertex `e_j`.
    pub fn vertex(n: usize, j: usize) -> Self {
        let mut w = vec![0.0; n];
        w[j] = 1.0;
        Weights(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the selected expert for vertex weights, if exact.
    pub fn vertex_index(&self) -> Option<usize> {
        self.0.iter().position(|&v| v == 1.0)
    }
}

/// Weighted mean aggregation `sum_i w_i mu_i`.
pub fn aggregate_mean(outputs: &ExpertOutputs, w: &Weights) -> Result<f64> {
    if outputs.len() != w.len() {
        return Err(Error::LengthMismatch(format!(
            "{} expert means vs {} weights",
            outputs.len(),
            w.len()
        )));
    }
    Ok(outputs
        .means
        .iter()
        .zip(w.as_slice())
        .map(|(mu, wi)| mu * wi)
        .sum())
}

/// Uniform MOE weights.
pub fn moe_weights(n: usize) -> Weights {
    Weights::uniform(n)
}

/// Generalized product-of-experts fusion with precision weighting:
/// `sigma^2 = 1 / sum_i w_i sigma_i^-2`, `mu = sigma^2 sum_i w_i sigma_i^-2 mu_i`.
///
/// A zero-variance expert dominates: its mean is returned with sigma = 0.
pub fn gpoe_aggregate(outputs: &ExpertOutputs, w: &Weights) -> Result<(f64, f64)> {
    let variances = outputs
        .variances
        .as_ref()
        .ok_or_else(|| Error::Config("gpoe requires expert variances".into()))?;
    if outputs.len() != w.len() || variances.len() != w.len() {
        return Err(Error::LengthMismatch("gpoe inputs".into()));
    }
    if let Some(i) = variances.iter().position(|&v| v == 0.0) {
        return Ok((outputs.means[i], 0.0));
    }
    let mut precision = 0.0;
    let mut weighted = 0.0;
    for ((mu, var), wi) in outputs.means.iter().zip(variances).zip(w.as_slice()) {
        precision += wi / var;
        weighted += wi / var * mu;
    }
    let var = 1.0 / precision;
    Ok((var * weighted, var))
}

/// Control-aware mean-based weights: the simplex vertex minimizing the
/// w-dependent part of V_dot, i.e. `argmin_i theta_i` with
/// `theta_i = mu_i (b^T P e)`. Ties resolve to the lowest expert index.
pub fn coaoe_mean_weights(
    outputs: &ExpertOutputs,
    p: &Matrix2<f64>,
    b: &Vector2<f64>,
    e: &Vector2<f64>,
) -> Weights {
    let scale = (b.transpose() * p * e)[(0, 0)];
    let mut best = 0;
    let mut best_theta = outputs.means[0] * scale;
    for (i, mu) in outputs.means.iter().enumerate().skip(1) {
        let theta = mu * scale;
        if theta < best_theta {
            best = i;
            best_theta = theta;
        }
    }
    Weights::vertex(outputs.len(), best)
}

/// Error-bound-minimizing weights: the vertex at `argmin_i eta_i`, lowest
/// index on ties. The achieved transported bound is `min_i eta_i`.
pub fn coaoe_eta_weights(outputs: &ExpertOutputs) -> Result<Weights> {
    let etas = outputs
        .etas
        .as_ref()
        .ok_or_else(|| Error::Config("eta strategy requires expert error bounds".into()))?;
    let mut best = 0;
    for (i, eta) in etas.iter().enumerate().skip(1) {
        if *eta < etas[best] {
            best = i;
        }
    }
    Ok(Weights::vertex(etas.len(), best))
}

/// Analytic Lyapunov derivative along the closed-loop error dynamics
/// `e_dot = A e + B_in (T_hat - T)`:
/// `V_dot = -e^T Q e + 2 e^T P B_in (T_hat - T)`.
pub fn vdot_value(
    e: &Vector2<f64>,
    p: &Matrix2<f64>,
    q: &Matrix2<f64>,
    b_in: &Vector2<f64>,
    t_true: f64,
    t_hat: f64,
) -> f64 {
    -(e.transpose() * q * e)[(0, 0)] + 2.0 * (e.transpose() * p * b_in)[(0, 0)] * (t_hat - t_true)
}

/// Ultimate tracking-error ball radius
/// `2 sqrt(lmax(P)/lmin(P)) * ||P|| / (J lmin(Q)) * eta_max`.
pub fn ultimate_bound(p: &Matrix2<f64>, q: &Matrix2<f64>, inertia: f64, eta_max: f64) -> f64 {
    let (pmin, pmax) = symmetric_eigen_range(p);
    let (qmin, _) = symmetric_eigen_range(q);
    2.0 * (pmax / pmin).sqrt() * pmax / (inertia * qmin) * eta_max
}

/// Eigenvalue range of a symmetric 2x2 matrix (closed form).
fn symmetric_eigen_range(m: &Matrix2<f64>) -> (f64, f64) {
    let tr = m.trace();
    let det = m.determinant();
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    (tr / 2.0 - disc, tr / 2.0 + disc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        // normalized exponentials sample the simplex uniformly
        let raw: Vec<f64> = (0..n).map(|_| -rng.random_range(1e-12..1.0f64).ln()).collect();
        let sum: f64 = raw.iter().sum();
        raw.iter().map(|v| v / sum).collect()
    }

    #[test]
    fn weights_invariants() {
        assert!(Weights::new(vec![0.5, 0.5]).is_ok());
        assert!(Weights::new(vec![0.5, 0.6]).is_err());
        assert!(Weights::new(vec![-0.1, 1.1]).is_err());
        assert_eq!(Weights::vertex(3, 1).as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(Weights::vertex(3, 1).vertex_index(), Some(1));
    }

    #[test]
    fn moe_weights_values() {
        assert_eq!(moe_weights(1).as_slice(), &[1.0]);
        assert_eq!(moe_weights(4).as_slice(), &[0.25; 4]);
        for n in [2usize, 10, 100, 10_000] {
            let sum: f64 = moe_weights(n).as_slice().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_mean_values() {
        let out = ExpertOutputs::from_means(vec![1.0, 3.0]);
        let half = Weights::new(vec![0.5, 0.5]).unwrap();
        assert_relative_eq!(aggregate_mean(&out, &half).unwrap(), 2.0);
        let vertex = Weights::vertex(2, 1);
        assert_eq!(aggregate_mean(&out, &vertex).unwrap(), 3.0);
        let same = ExpertOutputs::from_means(vec![7.0; 5]);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let w = Weights::new(random_simplex(&mut rng, 5)).unwrap();
        assert_relative_eq!(aggregate_mean(&same, &w).unwrap(), 7.0, max_relative = 1e-12);
        assert!(aggregate_mean(&out, &Weights::uniform(3)).is_err());
    }

    #[test]
    fn gpoe_hand_values() {
        let out = ExpertOutputs {
            means: vec![1.0, 3.0],
            variances: Some(vec![1.0, 1.0]),
            etas: None,
        };
        let w = Weights::uniform(2);
        let (mu, var) = gpoe_aggregate(&out, &w).unwrap();
        assert_relative_eq!(mu, 2.0);
        assert_relative_eq!(var, 1.0);

        let out = ExpertOutputs {
            means: vec![0.0, 4.0],
            variances: Some(vec![1.0, 1.0 / 3.0]),
            etas: None,
        };
        let (mu, var) = gpoe_aggregate(&out, &w).unwrap();
        assert_relative_eq!(var, 0.5, max_relative = 1e-12);
        assert_relative_eq!(mu, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn gpoe_consistency_and_degeneracy() {
        // identical experts are reproduced under any weights
        let out = ExpertOutputs {
            means: vec![2.5; 4],
            variances: Some(vec![0.3; 4]),
            etas: None,
        };
        let (mu, var) = gpoe_aggregate(&out, &Weights::uniform(4)).unwrap();
        assert_relative_eq!(mu, 2.5, max_relative = 1e-12);
        assert_relative_eq!(var, 0.3, max_relative = 1e-12);

        // single expert reduces to that expert
        let one = ExpertOutputs {
            means: vec![-1.5],
            variances: Some(vec![0.7]),
            etas: None,
        };
        let (mu, var) = gpoe_aggregate(&one, &Weights::uniform(1)).unwrap();
        assert_relative_eq!(mu, -1.5);
        assert_relative_eq!(var, 0.7);

        // zero variance dominates
        let deg = ExpertOutputs {
            means: vec![1.0, 9.0],
            variances: Some(vec![0.5, 0.0]),
            etas: None,
        };
        assert_eq!(gpoe_aggregate(&deg, &Weights::uniform(2)).unwrap(), (9.0, 0.0));
    }

    #[test]
    fn coaoe_mean_vertex_selection() {
        let p = Matrix2::identity();
        let b = Vector2::new(0.0, 1.0);
        // b^T P e = e2 = 1 -> theta = means, minimized at the smallest mean
        let e = Vector2::new(0.0, 1.0);
        let out = ExpertOutputs::from_means(vec![3.0, 1.0, 2.0]);
        assert_eq!(coaoe_mean_weights(&out, &p, &b, &e).as_slice(), &[0.0, 1.0, 0.0]);
        // tie -> lowest index
        let out = ExpertOutputs::from_means(vec![1.0, 1.0, 2.0]);
        assert_eq!(coaoe_mean_weights(&out, &p, &b, &e).as_slice(), &[1.0, 0.0, 0.0]);
        // e = 0 -> all theta zero -> first vertex
        let e0 = Vector2::zeros();
        assert_eq!(coaoe_mean_weights(&out, &p, &b, &e0).as_slice(), &[1.0, 0.0, 0.0]);
        // negative scale flips the selection to the largest mean
        let en = Vector2::new(0.0, -1.0);
        let out = ExpertOutputs::from_means(vec![3.0, 1.0, 2.0]);
        assert_eq!(coaoe_mean_weights(&out, &p, &b, &en).as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn coaoe_mean_vertex_optimality_over_simplex() {
        // the selected vertex minimizes theta^T w over random simplex points
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let p = Matrix2::new(1.25, 0.25, 0.25, 0.25);
        let b = Vector2::new(0.0, 1.0);
        for _ in 0..100 {
            let e = Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let means: Vec<f64> = (0..4).map(|_| rng.random_range(-10.0..10.0)).collect();
            let out = ExpertOutputs::from_means(means.clone());
            let w_star = coaoe_mean_weights(&out, &p, &b, &e);
            let scale = (b.transpose() * p * e)[(0, 0)];
            let theta: Vec<f64> = means.iter().map(|mu| mu * scale).collect();
            let obj_star: f64 = theta
                .iter()
                .zip(w_star.as_slice())
                .map(|(t, w)| t * w)
                .sum();
            for _ in 0..100 {
                let w = random_simplex(&mut rng, 4);
                let obj: f64 = theta.iter().zip(&w).map(|(t, wi)| t * wi).sum();
                assert!(obj_star <= obj + 1e-12);
            }
        }
    }

    #[test]
    fn coaoe_eta_vertex_selection() {
        let out = ExpertOutputs {
            means: vec![0.0; 3],
            variances: None,
            etas: Some(vec![0.5, 0.2, 0.9]),
        };
        assert_eq!(coaoe_eta_weights(&out).unwrap().as_slice(), &[0.0, 1.0, 0.0]);
        let tie = ExpertOutputs {
            means: vec![0.0; 3],
            variances: None,
            etas: Some(vec![0.4; 3]),
        };
        assert_eq!(coaoe_eta_weights(&tie).unwrap().as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn coaoe_eta_minimizes_transported_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..50 {
            let etas: Vec<f64> = (0..5).map(|_| rng.random_range(0.01..3.0)).collect();
            let out = ExpertOutputs {
                means: vec![0.0; 5],
                variances: None,
                etas: Some(etas.clone()),
            };
            let w_star = coaoe_eta_weights(&out).unwrap();
            let star: f64 = etas.iter().zip(w_star.as_slice()).map(|(e, w)| e * w).sum();
            for _ in 0..1000 {
                let w = random_simplex(&mut rng, 5);
                let val: f64 = etas.iter().zip(&w).map(|(e, wi)| e * wi).sum();
                assert!(star <= val + 1e-12);
            }
        }
    }

    #[test]
    fn vdot_values() {
        let p = Matrix2::new(1.25, 0.25, 0.25, 0.25);
        let q = Matrix2::identity();
        let b_in = Vector2::new(0.0, 1.0 / 8e-5);
        assert_eq!(vdot_value(&Vector2::zeros(), &p, &q, &b_in, 5.0, 1.0), 0.0);
        let e = Vector2::new(0.4, -0.3);
        // exact prediction -> -e^T Q e
        assert_relative_eq!(
            vdot_value(&e, &p, &q, &b_in, 2.0, 2.0),
            -(e.norm_squared()),
            max_relative = 1e-12
        );
    }

    #[test]
    fn coaoe_mean_minimizes_vdot() {
        // Monte-Carlo check of the defining property V_dot(w*) <= V_dot(w).
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let p = Matrix2::new(1.25005, 1e-4, 1e-4, 5.001e-5);
        let q = Matrix2::identity();
        let b = Vector2::new(0.0, 1.0);
        let b_in = b / 8e-5;
        for _ in 0..200 {
            let e = Vector2::new(rng.random_range(-5.0..5.0), rng.random_range(-50.0..50.0));
            let means: Vec<f64> = (0..4).map(|_| rng.random_range(-15.0..15.0)).collect();
            let t_true = rng.random_range(8.0..12.0);
            let out = ExpertOutputs::from_means(means.clone());
            let w_star = coaoe_mean_weights(&out, &p, &b, &e);
            let t_star = aggregate_mean(&out, &w_star).unwrap();
            let v_star = vdot_value(&e, &p, &q, &b_in, t_true, t_star);
            for _ in 0..200 {
                let w = Weights::new(random_simplex(&mut rng, 4)).unwrap();
                let t_hat = aggregate_mean(&out, &w).unwrap();
                let v = vdot_value(&e, &p, &q, &b_in, t_true, t_hat);
                assert!(v_star <= v + 1e-9, "V_dot(w*)={v_star} > V_dot(w)={v}");
            }
        }
    }

    #[test]
    fn ultimate_bound_values() {
        let id = Matrix2::identity();
        let j = 8e-5;
        assert_relative_eq!(ultimate_bound(&id, &id, j, 0.7), 2.0 * 0.7 / j, max_relative = 1e-12);
        // linear in eta_max
        let p = Matrix2::new(1.25, 0.25, 0.25, 0.25);
        let b1 = ultimate_bound(&p, &id, j, 1.0);
        let b3 = ultimate_bound(&p, &id, j, 3.0);
        assert_relative_eq!(b3, 3.0 * b1, max_relative = 1e-12);
    }
}
