//! Learned gaze regressor: closed-form ridge regression over polynomial
//! features of the PCCR vector, or a one-hidden-layer tanh network trained
//! by full-batch gradient descent.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::GazeVector;
use crate::screen::{ScreenPoint, ScreenSize};

#[derive(Debug, Error, PartialEq)]
pub enum RegressorError {
    #[error("feature vector does not match recipe {expected:?}")]
    FeatureMismatch { expected: FeatureRecipe },
    #[error("dataset of {got} samples is too small, need {need}")]
    InsufficientData { got: usize, need: usize },
    #[error("normal equations are singular; add ridge strength or more varied data")]
    SingularSystem,
    #[error("ridge strength must be finite and >= 0, got {0}")]
    InvalidLambda(f64),
}

/// Which monomials of `(du, dv)` feed the model, plus optionally the pupil
/// radius.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureRecipe {
    /// 1: `du, dv`. 2: adds `du², du·dv, dv²`.
    pub degree: u8,
    pub pupil_radius: bool,
}

impl Default for FeatureRecipe {
    fn default() -> Self {
        Self {
            degree: 2,
            pupil_radius: true,
        }
    }
}

impl FeatureRecipe {
    pub fn dim(&self) -> usize {
        let poly = if self.degree >= 2 { 5 } else { 2 };
        poly + usize::from(self.pupil_radius)
    }

    pub fn features(
        &self,
        v: GazeVector,
        pupil_radius: Option<f64>,
    ) -> Result<FeatureVector, RegressorError> {
        let mut values = vec![v.du, v.dv];
        if self.degree >= 2 {
            values.extend([v.du * v.du, v.du * v.dv, v.dv * v.dv]);
        }
        if self.pupil_radius {
            values.push(pupil_radius.ok_or(RegressorError::FeatureMismatch { expected: *self })?);
        }
        Ok(FeatureVector {
            recipe: *self,
            values,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub recipe: FeatureRecipe,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 8,
            epochs: 2000,
            step_size: 1e-2,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RegressorVariant {
    Linear,
    Mlp(MlpConfig),
}

/// Parameters of the tanh network, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub dim: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: [f64; 2],
}

impl MlpParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l1 = (6.0 / (dim + hidden) as f64).sqrt();
        let l2 = (6.0 / (hidden + 2) as f64).sqrt();
        Self {
            dim,
            hidden,
            w1: (0..hidden * dim).map(|_| rng.random_range(-l1..l1)).collect(),
            b1: vec![0.0; hidden],
            w2: (0..2 * hidden).map(|_| rng.random_range(-l2..l2)).collect(),
            b2: [0.0; 2],
        }
    }

    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend(&self.w1);
        v.extend(&self.b1);
        v.extend(&self.w2);
        v.extend(self.b2);
        v
    }

    pub fn from_flat(dim: usize, hidden: usize, flat: &[f64]) -> Self {
        let (w1, rest) = flat.split_at(hidden * dim);
        let (b1, rest) = rest.split_at(hidden);
        let (w2, rest) = rest.split_at(2 * hidden);
        Self {
            dim,
            hidden,
            w1: w1.to_vec(),
            b1: b1.to_vec(),
            w2: w2.to_vec(),
            b2: [rest[0], rest[1]],
        }
    }

    fn hidden_activations(&self, z: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * self.dim..(j + 1) * self.dim];
                (row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + self.b1[j]).tanh()
            })
            .collect()
    }

    pub fn forward(&self, z: &[f64]) -> [f64; 2] {
        let h = self.hidden_activations(z);
        let mut out = self.b2;
        for (k, o) in out.iter_mut().enumerate() {
            *o += self.w2[k * self.hidden..(k + 1) * self.hidden]
                .iter()
                .zip(&h)
                .map(|(w, a)| w * a)
                .sum::<f64>();
        }
        out
    }

    /// `1/(2N) Σ ||f(z) - t||² + λ/2 (||W1||² + ||W2||²)`.
    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[[f64; 2]], lambda: f64) -> f64 {
        let n = inputs.len() as f64;
        let data: f64 = inputs
            .iter()
            .zip(targets)
            .map(|(z, t)| {
                let o = self.forward(z);
                (o[0] - t[0]).powi(2) + (o[1] - t[1]).powi(2)
            })
            .sum::<f64>()
            / (2.0 * n);
        let reg = self.w1.iter().chain(&self.w2).map(|w| w * w).sum::<f64>();
        data + 0.5 * lambda * reg
    }

    /// Analytic gradient of [`MlpParams::loss`], in [`MlpParams::to_flat`]
    /// order.
    pub fn gradient(&self, inputs: &[Vec<f64>], targets: &[[f64; 2]], lambda: f64) -> Vec<f64> {
        let (d, hn) = (self.dim, self.hidden);
        let n = inputs.len() as f64;
        let mut gw1 = vec![0.0; hn * d];
        let mut gb1 = vec![0.0; hn];
        let mut gw2 = vec![0.0; 2 * hn];
        let mut gb2 = [0.0; 2];
        for (z, t) in inputs.iter().zip(targets) {
            let h = self.hidden_activations(z);
            let mut o = self.b2;
            for k in 0..2 {
                o[k] += (0..hn).map(|j| self.w2[k * hn + j] * h[j]).sum::<f64>();
            }
            let e = [(o[0] - t[0]) / n, (o[1] - t[1]) / n];
            for k in 0..2 {
                gb2[k] += e[k];
                for j in 0..hn {
                    gw2[k * hn + j] += e[k] * h[j];
                }
            }
            for j in 0..hn {
                let back = self.w2[j] * e[0] + self.w2[hn + j] * e[1];
                let da = back * (1.0 - h[j] * h[j]);
                gb1[j] += da;
                for i in 0..d {
                    gw1[j * d + i] += da * z[i];
                }
            }
        }
        for (g, w) in gw1.iter_mut().zip(&self.w1) {
            *g += lambda * w;
        }
        for (g, w) in gw2.iter_mut().zip(&self.w2) {
            *g += lambda * w;
        }
        let mut flat = gw1;
        flat.extend(gb1);
        flat.extend(gw2);
        flat.extend(gb2);
        flat
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RegressorModel {
    Linear {
        /// Two rows (x, y) of `dim` weights.
        weights: Vec<f64>,
        bias: [f64; 2],
    },
    Mlp {
        params: MlpParams,
        input_mean: Vec<f64>,
        input_scale: Vec<f64>,
        output_center: [f64; 2],
        output_scale: [f64; 2],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub samples: usize,
    /// Linear: mean squared error in px² (both axes summed). MLP: final
    /// regularized objective in normalized screen units.
    pub final_loss: f64,
    pub mlp: Option<MlpConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnedRegressor {
    pub recipe: FeatureRecipe,
    pub lambda: f64,
    pub w: u32,
    pub h: u32,
    pub model: RegressorModel,
    pub training: TrainingSummary,
}

impl LearnedRegressor {
    pub fn screen(&self) -> ScreenSize {
        ScreenSize::new(self.w, self.h)
    }

    /// Unclamped forward evaluation.
    pub fn evaluate(&self, features: &FeatureVector) -> Result<ScreenPoint, RegressorError> {
        if features.recipe != self.recipe || features.values.len() != self.recipe.dim() {
            return Err(RegressorError::FeatureMismatch {
                expected: self.recipe,
            });
        }
        let x = &features.values;
        Ok(match &self.model {
            RegressorModel::Linear { weights, bias } => {
                let d = x.len();
                let row = |k: usize| -> f64 {
                    weights[k * d..(k + 1) * d]
                        .iter()
                        .zip(x)
                        .map(|(w, v)| w * v)
                        .sum::<f64>()
                        + bias[k]
                };
                ScreenPoint::new(row(0), row(1))
            }
            RegressorModel::Mlp {
                params,
                input_mean,
                input_scale,
                output_center,
                output_scale,
            } => {
                let z: Vec<f64> = x
                    .iter()
                    .zip(input_mean)
                    .zip(input_scale)
                    .map(|((v, m), s)| (v - m) / s)
                    .collect();
                let o = params.forward(&z);
                ScreenPoint::new(
                    o[0] * output_scale[0] + output_center[0],
                    o[1] * output_scale[1] + output_center[1],
                )
            }
        })
    }

    /// Forward evaluation clamped to the screen.
    pub fn predict(&self, features: &FeatureVector) -> Result<ScreenPoint, RegressorError> {
        Ok(self.screen().clamp(self.evaluate(features)?))
    }

    pub fn mean_squared_error(&self, dataset: &[(FeatureVector, ScreenPoint)]) -> f64 {
        dataset
            .iter()
            .map(|(f, t)| {
                let p = self.evaluate(f).expect("recipe checked at fit time");
                (p.x - t.x).powi(2) + (p.y - t.y).powi(2)
            })
            .sum::<f64>()
            / dataset.len() as f64
    }
}

pub fn fit_regressor(
    dataset: &[(FeatureVector, ScreenPoint)],
    lambda: f64,
    variant: RegressorVariant,
    screen: ScreenSize,
) -> Result<LearnedRegressor, RegressorError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(RegressorError::InvalidLambda(lambda));
    }
    let recipe = dataset
        .first()
        .map(|(f, _)| f.recipe)
        .ok_or(RegressorError::InsufficientData { got: 0, need: 1 })?;
    let dim = recipe.dim();
    if dataset
        .iter()
        .any(|(f, _)| f.recipe != recipe || f.values.len() != dim)
    {
        return Err(RegressorError::FeatureMismatch { expected: recipe });
    }
    let need = match variant {
        RegressorVariant::Linear => dim,
        RegressorVariant::Mlp(_) => 20,
    };
    if dataset.len() < need {
        return Err(RegressorError::InsufficientData {
            got: dataset.len(),
            need,
        });
    }
    let mut model = match variant {
        RegressorVariant::Linear => fit_linear(dataset, lambda, dim)?,
        RegressorVariant::Mlp(cfg) => fit_mlp(dataset, lambda, dim, cfg, screen),
    };
    let mlp = match variant {
        RegressorVariant::Mlp(cfg) => Some(cfg),
        RegressorVariant::Linear => None,
    };
    let mut out = LearnedRegressor {
        recipe,
        lambda,
        w: screen.w,
        h: screen.h,
        model: std::mem::replace(
            &mut model.0,
            RegressorModel::Linear {
                weights: vec![],
                bias: [0.0; 2],
            },
        ),
        training: TrainingSummary {
            samples: dataset.len(),
            final_loss: model.1,
            mlp,
        },
    };
    if mlp.is_none() {
        out.training.final_loss = out.mean_squared_error(dataset);
    }
    Ok(out)
}

/// Ridge on centered data; the bias is left unregularized.
fn fit_linear(
    dataset: &[(FeatureVector, ScreenPoint)],
    lambda: f64,
    dim: usize,
) -> Result<(RegressorModel, f64), RegressorError> {
    let n = dataset.len();
    let mean: Vec<f64> = (0..dim)
        .map(|j| dataset.iter().map(|(f, _)| f.values[j]).sum::<f64>() / n as f64)
        .collect();
    let ty = [
        dataset.iter().map(|(_, t)| t.x).sum::<f64>() / n as f64,
        dataset.iter().map(|(_, t)| t.y).sum::<f64>() / n as f64,
    ];
    let xc = DMatrix::from_fn(n, dim, |i, j| dataset[i].0.values[j] - mean[j]);
    let yc = DMatrix::from_fn(n, 2, |i, k| {
        let t = dataset[i].1;
        if k == 0 {
            t.x - ty[0]
        } else {
            t.y - ty[1]
        }
    });

    let coef = if lambda == 0.0 {
        let svd = xc.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > smax.max(f64::MIN_POSITIVE) * 1e-10)
            .count();
        if rank < dim {
            return Err(RegressorError::SingularSystem);
        }
        svd.solve(&yc, 0.0).map_err(|_| RegressorError::SingularSystem)?
    } else {
        let gram = xc.transpose() * &xc + DMatrix::identity(dim, dim) * lambda;
        let chol = gram.cholesky().ok_or(RegressorError::SingularSystem)?;
        chol.solve(&(xc.transpose() * &yc))
    };

    let mut weights = Vec::with_capacity(2 * dim);
    let mut bias = ty;
    for k in 0..2 {
        for j in 0..dim {
            let w = coef[(j, k)];
            weights.push(w);
            bias[k] -= w * mean[j];
        }
    }
    Ok((RegressorModel::Linear { weights, bias }, 0.0))
}

pub(crate) struct Normalized {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<[f64; 2]>,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub output_center: [f64; 2],
    pub output_scale: [f64; 2],
}

/// Inputs to zero mean and unit variance; targets to roughly `[-1, 1]` over
/// the screen.
pub(crate) fn normalize(
    dataset: &[(FeatureVector, ScreenPoint)],
    dim: usize,
    screen: ScreenSize,
) -> Normalized {
    let n = dataset.len() as f64;
    let input_mean: Vec<f64> = (0..dim)
        .map(|j| dataset.iter().map(|(f, _)| f.values[j]).sum::<f64>() / n)
        .collect();
    let input_scale: Vec<f64> = (0..dim)
        .map(|j| {
            let var = dataset
                .iter()
                .map(|(f, _)| (f.values[j] - input_mean[j]).powi(2))
                .sum::<f64>()
                / n;
            if var > 1e-24 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let output_center = [f64::from(screen.w) / 2.0, f64::from(screen.h) / 2.0];
    let output_scale = output_center;
    let inputs = dataset
        .iter()
        .map(|(f, _)| {
            f.values
                .iter()
                .zip(&input_mean)
                .zip(&input_scale)
                .map(|((v, m), s)| (v - m) / s)
                .collect()
        })
        .collect();
    let targets = dataset
        .iter()
        .map(|(_, t)| {
            [
                (t.x - output_center[0]) / output_scale[0],
                (t.y - output_center[1]) / output_scale[1],
            ]
        })
        .collect();
    Normalized {
        inputs,
        targets,
        input_mean,
        input_scale,
        output_center,
        output_scale,
    }
}

fn fit_mlp(
    dataset: &[(FeatureVector, ScreenPoint)],
    lambda: f64,
    dim: usize,
    cfg: MlpConfig,
    screen: ScreenSize,
) -> (RegressorModel, f64) {
    let norm = normalize(dataset, dim, screen);
    let mut params = MlpParams::init(dim, cfg.hidden, cfg.seed);
    let mut flat = params.to_flat();
    for _ in 0..cfg.epochs {
        let grad = params.gradient(&norm.inputs, &norm.targets, lambda);
        for (p, g) in flat.iter_mut().zip(&grad) {
            *p -= cfg.step_size * g;
        }
        params = MlpParams::from_flat(dim, cfg.hidden, &flat);
    }
    let loss = params.loss(&norm.inputs, &norm.targets, lambda);
    (
        RegressorModel::Mlp {
            params,
            input_mean: norm.input_mean,
            input_scale: norm.input_scale,
            output_center: norm.output_center,
            output_scale: norm.output_scale,
        },
        loss,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCREEN: ScreenSize = ScreenSize::new(1080, 1920);

    fn grid_dataset(recipe: FeatureRecipe) -> Vec<(FeatureVector, ScreenPoint)> {
        let mut out = Vec::new();
        for i in -3..=3 {
            for j in -3..=3 {
                let v = GazeVector::new(f64::from(i) * 1.5, f64::from(j) * 1.2);
                let r = 10.0 + 0.1 * f64::from(i * j);
                let t = ScreenPoint::new(540.0 + 60.0 * v.du + 3.0 * v.du * v.dv, 960.0 + 110.0 * v.dv);
                out.push((recipe.features(v, Some(r)).unwrap(), t));
            }
        }
        out
    }

    #[test]
    fn linear_exact_recovery() {
        let recipe = FeatureRecipe {
            degree: 2,
            pupil_radius: false,
        };
        let data = grid_dataset(recipe);
        let m = fit_regressor(&data, 0.0, RegressorVariant::Linear, SCREEN).unwrap();
        assert!(m.training.final_loss < 1e-9, "{}", m.training.final_loss);
    }

    #[test]
    fn huge_ridge_collapses_to_mean() {
        let data = grid_dataset(FeatureRecipe::default());
        let m = fit_regressor(&data, 1e9, RegressorVariant::Linear, SCREEN).unwrap();
        let RegressorModel::Linear { weights, .. } = &m.model else {
            unreachable!()
        };
        let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        assert!(norm < 1e-3, "{norm}");
        let n = data.len() as f64;
        let mean = ScreenPoint::new(
            data.iter().map(|(_, t)| t.x).sum::<f64>() / n,
            data.iter().map(|(_, t)| t.y).sum::<f64>() / n,
        );
        for (f, _) in &data {
            let p = m.evaluate(f).unwrap();
            assert!(p.distance(mean) < 1e-2);
        }
    }

    #[test]
    fn singular_without_ridge() {
        let recipe = FeatureRecipe::default();
        // Constant pupil radius makes its centered column zero.
        let data: Vec<_> = grid_dataset(recipe)
            .into_iter()
            .map(|(mut f, t)| {
                f.values[5] = 10.0;
                (f, t)
            })
            .collect();
        assert_eq!(
            fit_regressor(&data, 0.0, RegressorVariant::Linear, SCREEN),
            Err(RegressorError::SingularSystem)
        );
        assert!(fit_regressor(&data, 1e-3, RegressorVariant::Linear, SCREEN).is_ok());
    }

    #[test]
    fn zero_weight_model_predicts_bias() {
        let recipe = FeatureRecipe::default();
        let m = LearnedRegressor {
            recipe,
            lambda: 0.0,
            w: 1080,
            h: 1920,
            model: RegressorModel::Linear {
                weights: vec![0.0; 2 * recipe.dim()],
                bias: [480.0, 960.0],
            },
            training: TrainingSummary {
                samples: 0,
                final_loss: 0.0,
                mlp: None,
            },
        };
        for du in [-5.0, 0.0, 7.0] {
            let f = recipe.features(GazeVector::new(du, -du), Some(9.0)).unwrap();
            assert_eq!(m.predict(&f).unwrap(), ScreenPoint::new(480.0, 960.0));
        }
        let other = FeatureRecipe {
            degree: 1,
            pupil_radius: false,
        }
        .features(GazeVector::new(1.0, 1.0), None)
        .unwrap();
        assert!(matches!(
            m.predict(&other),
            Err(RegressorError::FeatureMismatch { .. })
        ));
    }

    #[test]
    fn missing_radius_is_a_mismatch() {
        assert!(FeatureRecipe::default()
            .features(GazeVector::new(0.0, 0.0), None)
            .is_err());
    }

    #[test]
    fn mlp_training_is_deterministic_and_learns() {
        let data = grid_dataset(FeatureRecipe::default());
        let cfg = MlpConfig {
            epochs: 300,
            step_size: 0.1,
            ..MlpConfig::default()
        };
        let a = fit_regressor(&data, 0.0, RegressorVariant::Mlp(cfg), SCREEN).unwrap();
        let b = fit_regressor(&data, 0.0, RegressorVariant::Mlp(cfg), SCREEN).unwrap();
        assert_eq!(a, b);
        let untrained = fit_regressor(
            &data,
            0.0,
            RegressorVariant::Mlp(MlpConfig { epochs: 0, ..cfg }),
            SCREEN,
        )
        .unwrap();
        assert!(a.training.final_loss < 0.5 * untrained.training.final_loss);
        assert!(matches!(
            fit_regressor(&data[..10], 0.0, RegressorVariant::Mlp(cfg), SCREEN),
            Err(RegressorError::InsufficientData { need: 20, .. })
        ));
    }

    #[test]
    fn flat_round_trip() {
        let p = MlpParams::init(6, 8, 3);
        assert_eq!(MlpParams::from_flat(6, 8, &p.to_flat()), p);
        assert_eq!(p.len(), 6 * 8 + 8 + 16 + 2);
    }
}
