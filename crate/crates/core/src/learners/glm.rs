//! Logistic regression fit by iteratively reweighted least squares.
//!
//! The design matrix is standardized internally for conditioning; returned
//! coefficients are mapped back to the original scale. Convergence follows
//! the usual relative deviance rule; a ridge of 1e-8 on the normal-equations
//! diagonal guards against rank deficiency.

use crate::dataset::DesignMatrix;
use crate::linalg;
use crate::num::Scalar;

use super::design::Standardizer;
use super::{FitWarning, LearnerError};

const MAX_IRLS_ITER: usize = 25;
const DEVIANCE_TOL: f64 = 1e-8;
const RIDGE: f64 = 1e-8;
const SEPARATION_COEF: f64 = 15.0;

#[derive(Debug, Clone)]
pub struct GlmModel<F: Scalar> {
    /// `[intercept, slopes...]` on the original feature scale.
    pub coefficients: Vec<f64>,
    pub deviance: f64,
    pub column_labels: Vec<String>,
    pub warnings: Vec<FitWarning>,
    _marker: std::marker::PhantomData<F>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn deviance(mu: &[f64], y: &[u8]) -> f64 {
    let mut d = 0.0;
    for (&m, &yi) in mu.iter().zip(y) {
        let m = m.clamp(1e-12, 1.0 - 1e-12);
        d -= 2.0 * if yi == 1 { m.ln() } else { (1.0 - m).ln() };
    }
    d
}

pub(super) fn fit_glm<F: Scalar>(
    x: &DesignMatrix<F>,
    y: &[u8],
) -> Result<GlmModel<F>, LearnerError> {
    let n = x.n;
    if n == 0 {
        return Err(LearnerError::TooFewRows(0));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == n {
        return Err(LearnerError::SingleClassTraining);
    }
    let p = x.p;
    let std = Standardizer::fit(x);
    // standardized design with leading intercept column, in f64
    let width = p + 1;
    let mut xs = vec![0.0f64; n * width];
    for i in 0..n {
        xs[i * width] = 1.0;
        for (j, v) in x.row(i).iter().enumerate() {
            xs[i * width + 1 + j] = (v.f64() - std.mean[j]) / std.scale[j];
        }
    }

    let mut beta = vec![0.0f64; width];
    let mut eta = vec![0.0f64; n];
    let mut mu = vec![0.5f64; n];
    let mut dev_old = deviance(&mu, y);

    let mut a = vec![0.0f64; width * width];
    let mut rhs = vec![0.0f64; width];
    for _ in 0..MAX_IRLS_ITER {
        a.iter_mut().for_each(|v| *v = 0.0);
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let row = &xs[i * width..(i + 1) * width];
            let m = mu[i];
            let w = (m * (1.0 - m)).max(1e-10);
            let z = eta[i] + (f64::from(y[i]) - m) / w;
            let wz = w * z;
            for j in 0..width {
                let wxj = w * row[j];
                rhs[j] += row[j] * wz;
                for k in 0..=j {
                    a[j * width + k] += wxj * row[k];
                }
            }
        }
        for j in 0..width {
            for k in (j + 1)..width {
                a[j * width + k] = a[k * width + j];
            }
            a[j * width + j] += RIDGE;
        }
        if linalg::solve_spd(&mut a, width, &mut rhs).is_none() {
            break; // keep previous iterate
        }
        beta.copy_from_slice(&rhs);
        for i in 0..n {
            let row = &xs[i * width..(i + 1) * width];
            eta[i] = row.iter().zip(&beta).map(|(xi, b)| xi * b).sum();
            mu[i] = sigmoid(eta[i]);
        }
        let dev = deviance(&mu, y);
        let done = (dev - dev_old).abs() / (dev.abs() + 0.1) < DEVIANCE_TOL;
        dev_old = dev;
        if done {
            break;
        }
    }

    // Separation inflates standardized coefficients without bound; the
    // deviance rule may still fire once it underflows, so the size check
    // applies either way.
    let mut warnings = Vec::new();
    if beta.iter().any(|b| b.abs() > SEPARATION_COEF) {
        warnings.push(FitWarning::QuasiSeparation);
    }

    // map standardized-scale coefficients back to the original scale
    let mut coefficients = vec![0.0f64; width];
    coefficients[0] = beta[0];
    for j in 0..p {
        coefficients[1 + j] = beta[1 + j] / std.scale[j];
        coefficients[0] -= beta[1 + j] * std.mean[j] / std.scale[j];
    }

    Ok(GlmModel {
        coefficients,
        deviance: dev_old,
        column_labels: x.column_labels.clone(),
        warnings,
        _marker: std::marker::PhantomData,
    })
}

impl<F: Scalar> GlmModel<F> {
    pub fn predict(&self, x: &DesignMatrix<F>) -> Result<Vec<F>, LearnerError> {
        if x.p + 1 != self.coefficients.len() {
            return Err(LearnerError::SchemaMismatch {
                expected: self.coefficients.len() - 1,
                got: x.p,
            });
        }
        Ok((0..x.n)
            .map(|i| {
                let eta = self.coefficients[0]
                    + x.row(i)
                        .iter()
                        .zip(&self.coefficients[1..])
                        .map(|(v, c)| v.f64() * c)
                        .sum::<f64>();
                F::of(sigmoid(eta))
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics;

    fn matrix(data: Vec<f64>, n: usize, p: usize) -> DesignMatrix<f64> {
        DesignMatrix {
            n,
            p,
            data,
            column_labels: (0..p).map(|i| format!("c{i}")).collect(),
        }
    }

    #[test]
    fn two_by_two_table_recovers_log_odds_ratio() {
        // x=1: 30 positives, 10 negatives; x=0: 10 positives, 30 negatives
        let mut data = Vec::new();
        let mut y = Vec::new();
        for (x, yi, count) in [(1.0, 1u8, 30), (1.0, 0, 10), (0.0, 1, 10), (0.0, 0, 30)] {
            for _ in 0..count {
                data.push(x);
                y.push(yi);
            }
        }
        let x = matrix(data, 80, 1);
        let model = fit_glm(&x, &y).unwrap();
        let slope = model.coefficients[1];
        assert!(
            (slope - 9.0f64.ln()).abs() < 1e-6,
            "slope {slope} vs ln 9 = {}",
            9.0f64.ln()
        );
    }

    #[test]
    fn intercept_only_predicts_prevalence() {
        let x = matrix(vec![], 10, 0);
        let y = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
        let model = fit_glm(&x, &y).unwrap();
        let p = model.predict(&x).unwrap();
        assert!((p[0] - 0.3).abs() < 1e-8, "prediction {}", p[0]);
    }

    #[test]
    fn no_signal_gives_chance_level_training_auroc() {
        let mut rng = crate::seed::stream(&[123]);
        use rand::Rng;
        let n = 500;
        let data: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
        let x = matrix(data, n, 1);
        let model = fit_glm(&x, &y).unwrap();
        let scores = model.predict(&x).unwrap();
        let auc = metrics::auroc(&scores, &y).unwrap().auroc.unwrap();
        assert!((auc - 0.5).abs() < 0.06, "training AUROC {auc}");
    }

    #[test]
    fn separation_sets_warning_but_fit_succeeds() {
        let mut data = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let v = if i < 20 { -1.0 } else { 1.0 };
            data.push(v + (i % 5) as f64 * 0.01);
            y.push(u8::from(i >= 20));
        }
        let model = fit_glm(&matrix(data, 40, 1), &y).unwrap();
        assert!(model.warnings.contains(&FitWarning::QuasiSeparation));
        let p = model.predict(&matrix(vec![-1.0, 1.0], 2, 1)).unwrap();
        assert!(p[0] < 0.01 && p[1] > 0.99);
    }

    #[test]
    fn single_class_training_is_rejected() {
        let x = matrix(vec![0.0, 1.0], 2, 1);
        assert!(matches!(
            fit_glm(&x, &[1, 1]),
            Err(LearnerError::SingleClassTraining)
        ));
    }

    #[test]
    fn works_at_f32() {
        let x: DesignMatrix<f32> = DesignMatrix {
            n: 4,
            p: 1,
            data: vec![0.0, 0.0, 1.0, 1.0],
            column_labels: vec!["c".into()],
        };
        let model = fit_glm(&x, &[0, 1, 0, 1]).unwrap();
        let p = model.predict(&x).unwrap();
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
