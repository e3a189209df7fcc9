use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{FeatureSpec, NominalError};
use crate::par::{self, Execution};

/// Kernel ridge hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHyper {
    /// Per-dimension lengthscales in standardized units.
    pub lengthscales: Vec<f64>,
    pub ridge: f64,
    /// Z-score inputs and targets before fitting.
    pub standardize: bool,
}

impl KernelHyper {
    pub fn isotropic(dim: usize, lengthscale: f64, ridge: f64) -> Self {
        Self { lengthscales: vec![lengthscale; dim], ridge, standardize: true }
    }
}

/// Kernel ridge regression with a squared exponential kernel
/// `k(x, y) = exp(-0.5 sum_d ((x_d - y_d) / l_d)^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalModel {
    pub features: FeatureSpec,
    /// Standardized training inputs.
    pub training_inputs: Vec<Vec<f64>>,
    pub dual_weights: Vec<f64>,
    pub lengthscales: Vec<f64>,
    pub ridge: f64,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

fn kernel(x: &[f64], y: &[f64], inv_len: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((a, b), il) in x.iter().zip(y).zip(inv_len) {
        let d = (a - b) * il;
        acc += d * d;
    }
    (-0.5 * acc).exp()
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-12 { std } else { 1.0 })
}

impl NominalModel {
    /// Solves `(K + ridge I) w = y` by Cholesky factorization.
    pub fn fit(
        inputs: &[Vec<f64>],
        targets: &[f64],
        features: FeatureSpec,
        hyper: &KernelHyper,
        exec: Execution,
    ) -> Result<Self, NominalError> {
        let n = inputs.len();
        if n < 2 {
            return Err(NominalError::TooFewSamples(n));
        }
        if targets.len() != n {
            return Err(NominalError::DimensionMismatch { expected: n, got: targets.len() });
        }
        let dim = inputs[0].len();
        if let Some(row) = inputs.iter().find(|r| r.len() != dim) {
            return Err(NominalError::DimensionMismatch { expected: dim, got: row.len() });
        }
        if hyper.lengthscales.len() != dim {
            return Err(NominalError::DimensionMismatch { expected: dim, got: hyper.lengthscales.len() });
        }
        if !(hyper.ridge > 0.0 && hyper.ridge.is_finite()) || hyper.lengthscales.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(NominalError::InvalidHyper("lengthscales and ridge must be positive".into()));
        }
        if inputs.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
            return Err(NominalError::NonFinite);
        }

        let (feature_mean, feature_std, target_mean, target_std) = if hyper.standardize {
            let stats: Vec<(f64, f64)> = (0..dim).map(|d| mean_std(inputs.iter().map(move |r| r[d]))).collect();
            let (tm, ts) = mean_std(targets.iter().copied());
            (stats.iter().map(|s| s.0).collect(), stats.iter().map(|s| s.1).collect(), tm, ts)
        } else {
            (vec![0.0; dim], vec![1.0; dim], 0.0, 1.0)
        };
        let scaled: Vec<Vec<f64>> = inputs
            .iter()
            .map(|r| r.iter().zip(&feature_mean).zip(&feature_std).map(|((v, m), s)| (v - m) / s).collect())
            .collect();
        let y = DVector::from_iterator(n, targets.iter().map(|t| (t - target_mean) / target_std));

        let inv_len: Vec<f64> = hyper.lengthscales.iter().map(|l| 1.0 / l).collect();
        let rows = par::map_indexed(n, exec, |i| {
            (0..n).map(|j| kernel(&scaled[i], &scaled[j], &inv_len)).collect::<Vec<f64>>()
        });
        let mut k = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        for i in 0..n {
            k[(i, i)] += hyper.ridge;
        }
        let chol = k.cholesky().ok_or(NominalError::Factorization)?;
        let w = chol.solve(&y);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(NominalError::Factorization);
        }

        Ok(Self {
            features,
            training_inputs: scaled,
            dual_weights: w.iter().copied().collect(),
            lengthscales: hyper.lengthscales.clone(),
            ridge: hyper.ridge,
            feature_mean,
            feature_std,
            target_mean,
            target_std,
        })
    }

    pub fn dimension(&self) -> usize {
        self.feature_mean.len()
    }

    fn standardize(&self, e: &[f64]) -> Result<Vec<f64>, NominalError> {
        if e.len() != self.dimension() {
            return Err(NominalError::DimensionMismatch { expected: self.dimension(), got: e.len() });
        }
        Ok(e.iter().zip(&self.feature_mean).zip(&self.feature_std).map(|((v, m), s)| (v - m) / s).collect())
    }

    /// Nominal state for a raw feature vector.
    pub fn predict(&self, e: &[f64]) -> Result<f64, NominalError> {
        let z = self.standardize(e)?;
        let inv_len: Vec<f64> = self.lengthscales.iter().map(|l| 1.0 / l).collect();
        let acc: f64 = self
            .training_inputs
            .iter()
            .zip(&self.dual_weights)
            .map(|(x, w)| w * kernel(&z, x, &inv_len))
            .sum();
        Ok(self.target_mean + self.target_std * acc)
    }

    pub fn predict_many(&self, rows: &[Vec<f64>], exec: Execution) -> Result<Vec<f64>, NominalError> {
        par::try_map_indexed(rows.len(), exec, |i| self.predict(&rows[i]))
    }

    /// Analytic gradient of [`predict`](Self::predict) with respect to the raw features.
    pub fn gradient(&self, e: &[f64]) -> Result<Vec<f64>, NominalError> {
        let z = self.standardize(e)?;
        let inv_len: Vec<f64> = self.lengthscales.iter().map(|l| 1.0 / l).collect();
        let mut grad = vec![0.0; z.len()];
        for (x, w) in self.training_inputs.iter().zip(&self.dual_weights) {
            let kw = w * kernel(&z, x, &inv_len);
            for d in 0..z.len() {
                grad[d] -= kw * (z[d] - x[d]) * inv_len[d] * inv_len[d];
            }
        }
        for (g, s) in grad.iter_mut().zip(&self.feature_std) {
            *g *= self.target_std / s;
        }
        Ok(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SPEC: FeatureSpec = FeatureSpec { lags: 1, time_of_day: false };

    fn raw(lengthscale: f64, ridge: f64) -> KernelHyper {
        KernelHyper { lengthscales: vec![lengthscale], ridge, standardize: false }
    }

    fn random_data(n: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let y = x.iter().map(|r| r.iter().map(|v: &f64| v.sin()).sum()).collect();
        (x, y)
    }

    #[test]
    fn interpolates_identity_line() {
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![f64::from(i)]).collect();
        let y: Vec<f64> = (0..5).map(f64::from).collect();
        let m = NominalModel::fit(&x, &y, SPEC, &raw(1.0, 1e-8), Execution::Sequential).unwrap();

        // Dense LU oracle for the same system.
        let k = DMatrix::from_fn(5, 5, |i, j| (-0.5 * (i as f64 - j as f64).powi(2)).exp() + if i == j { 1e-8 } else { 0.0 });
        let w = k.lu().solve(&DVector::from_vec(y.clone())).unwrap();
        for (a, b) in m.dual_weights.iter().zip(w.iter()) {
            assert!((a - b).abs() < 1e-6 * b.abs().max(1.0));
        }
        let rmse = (x.iter().zip(&y).map(|(xi, yi)| (m.predict(xi).unwrap() - yi).powi(2)).sum::<f64>() / 5.0).sqrt();
        assert!(rmse < 1e-4, "{rmse}");
    }

    #[test]
    fn constant_targets_predict_constant() {
        let (x, _) = random_data(30, 3, 1);
        let y = vec![0.42; 30];
        let h = KernelHyper::isotropic(3, 1.0, 1e-6);
        let m = NominalModel::fit(&x, &y, SPEC, &h, Execution::Sequential).unwrap();
        for xi in &x {
            assert!((m.predict(xi).unwrap() - 0.42).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_ridge_predicts_mean() {
        let (x, y) = random_data(40, 2, 2);
        let mean = y.iter().sum::<f64>() / 40.0;
        let m = NominalModel::fit(&x, &y, SPEC, &KernelHyper::isotropic(2, 1.0, 1e12), Execution::Parallel).unwrap();
        assert!((m.predict(&x[3]).unwrap() - mean).abs() < 1e-9);
    }

    #[test]
    fn training_point_recall_and_order_invariance() {
        let (x, y) = random_data(60, 2, 3);
        let h = KernelHyper::isotropic(2, 0.7, 1e-8);
        let m = NominalModel::fit(&x, &y, SPEC, &h, Execution::Parallel).unwrap();
        assert!((m.predict(&x[10]).unwrap() - y[10]).abs() < 1e-3);

        let mut idx: Vec<usize> = (0..60).collect();
        idx.reverse();
        idx.swap(3, 40);
        let xp: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
        let yp: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let mp = NominalModel::fit(&xp, &yp, SPEC, &h, Execution::Parallel).unwrap();
        for probe in [vec![0.3, -0.2], vec![1.5, 1.1]] {
            assert!((m.predict(&probe).unwrap() - mp.predict(&probe).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn factorization_succeeds_on_random_data() {
        for seed in 0..5 {
            let (x, y) = random_data(80, 4, seed);
            NominalModel::fit(&x, &y, SPEC, &KernelHyper::isotropic(4, 1.5, 1e-6), Execution::Parallel).unwrap();
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = random_data(50, 3, 4);
        let m = NominalModel::fit(&x, &y, SPEC, &KernelHyper::isotropic(3, 1.2, 1e-4), Execution::Parallel).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let e: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g = m.gradient(&e).unwrap();
            for d in 0..3 {
                let h = 1e-6;
                let (mut up, mut dn) = (e.clone(), e.clone());
                up[d] += h;
                dn[d] -= h;
                let fd = (m.predict(&up).unwrap() - m.predict(&dn).unwrap()) / (2.0 * h);
                assert!((fd - g[d]).abs() < 1e-5, "{fd} vs {}", g[d]);
            }
        }
    }

    #[test]
    fn scaling_features_and_lengthscales_together() {
        let (x, y) = random_data(40, 2, 5);
        let h = KernelHyper { lengthscales: vec![0.8, 1.3], ridge: 1e-3, standardize: false };
        let m = NominalModel::fit(&x, &y, SPEC, &h, Execution::Sequential).unwrap();
        let x2: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| 2.0 * v).collect()).collect();
        let h2 = KernelHyper { lengthscales: vec![1.6, 2.6], ..h };
        let m2 = NominalModel::fit(&x2, &y, SPEC, &h2, Execution::Sequential).unwrap();
        for probe in [vec![0.1, 0.2], vec![-1.0, 1.7]] {
            let doubled: Vec<f64> = probe.iter().map(|v| 2.0 * v).collect();
            assert!((m.predict(&probe).unwrap() - m2.predict(&doubled).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn errors() {
        let x = vec![vec![1.0]];
        assert_eq!(NominalModel::fit(&x, &[1.0], SPEC, &raw(1.0, 1.0), Execution::Sequential), Err(NominalError::TooFewSamples(1)));
        let x = vec![vec![1.0], vec![2.0]];
        assert!(NominalModel::fit(&x, &[1.0, 2.0], SPEC, &raw(-1.0, 1.0), Execution::Sequential).is_err());
        let m = NominalModel::fit(&x, &[1.0, 2.0], SPEC, &raw(1.0, 1e-3), Execution::Sequential).unwrap();
        assert_eq!(m.predict(&[1.0, 2.0]), Err(NominalError::DimensionMismatch { expected: 1, got: 2 }));
        // Duplicate inputs with a vanishing ridge cannot be factorized.
        let x = vec![vec![1.0], vec![1.0], vec![1.0]];
        assert_eq!(
            NominalModel::fit(&x, &[1.0, 2.0, 3.0], SPEC, &raw(1.0, 1e-300), Execution::Sequential),
            Err(NominalError::Factorization)
        );
    }
}
