//! Soft-margin C-SVC with an RBF kernel, solved by sequential minimal
//! optimization on the dual.
//!
//! The kernel is `k(x, x') = exp(−σ ‖x − x'‖²)` on features standardized
//! with training statistics. Pair selection follows the classic two-loop
//! scheme with an error cache and a maximum-|E₁ − E₂| second choice; all
//! fallback scans are deterministic. Prediction returns the raw decision
//! value, which is monotone in any probability calibration and therefore
//! sufficient for rank-based scoring.

use crate::dataset::DesignMatrix;
use crate::num::Scalar;

use super::design::Standardizer;
use super::{FitWarning, LearnerError, LearnerKind, ParamSetting};

const KKT_TOL: f64 = 1e-3;
const ALPHA_EPS: f64 = 1e-12;

#[derive(Debug)]
pub struct SvmModel<F: Scalar> {
    train: DesignMatrix<F>,
    std: Standardizer,
    /// Dual variables, one per training row.
    pub alpha: Vec<f64>,
    /// Labels mapped to ±1.
    pub y_signed: Vec<f64>,
    pub bias: f64,
    sigma: f64,
    c: f64,
    pub column_labels: Vec<String>,
    pub warnings: Vec<FitWarning>,
}

fn rbf<F: Scalar>(a: &[F], b: &[F], sigma: f64) -> f64 {
    let mut d2 = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x.f64() - y.f64();
        d2 += d * d;
    }
    (-sigma * d2).exp()
}

pub(super) fn fit_svm<F: Scalar>(
    x: &DesignMatrix<F>,
    y: &[u8],
    setting: &ParamSetting,
) -> Result<SvmModel<F>, LearnerError> {
    const KIND: LearnerKind = LearnerKind::Svm;
    let n = x.n;
    if n < 2 {
        return Err(LearnerError::TooFewRows(n));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == n {
        return Err(LearnerError::SingleClassTraining);
    }
    let c = setting.get_real(KIND, "c")?;
    let sigma = setting.get_real(KIND, "sigma")?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(LearnerError::BadParam {
            learner: KIND,
            name: "c",
            message: format!("must be positive, got {c}"),
        });
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(LearnerError::BadParam {
            learner: KIND,
            name: "sigma",
            message: format!("must be positive, got {sigma}"),
        });
    }

    let std = Standardizer::fit(x);
    let train = std.transform(x);
    let y_signed: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();

    // dense kernel matrix; training sets here are fold-sized
    let mut kernel = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let k = rbf(train.row(i), train.row(j), sigma);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }

    let mut alpha = vec![0.0f64; n];
    let mut bias = 0.0f64;
    // error cache E_i = f(x_i) − y_i; starts at −y with the zero function
    let mut errors: Vec<f64> = y_signed.iter().map(|&v| -v).collect();

    let max_passes = 10 * n;
    let mut passes = 0usize;
    let mut examine_all = true;
    let mut converged = false;

    let take_step = |i: usize,
                         j: usize,
                         alpha: &mut [f64],
                         bias: &mut f64,
                         errors: &mut [f64]|
     -> bool {
        if i == j {
            return false;
        }
        let (yi, yj) = (y_signed[i], y_signed[j]);
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let s = yi * yj;
        let (low, high) = if s < 0.0 {
            let d = aj_old - ai_old;
            (d.max(0.0), (c + d).min(c))
        } else {
            let t = ai_old + aj_old;
            ((t - c).max(0.0), t.min(c))
        };
        if high - low < ALPHA_EPS {
            return false;
        }
        let (ei, ej) = (errors[i], errors[j]);
        let kii = kernel[i * n + i];
        let kjj = kernel[j * n + j];
        let kij = kernel[i * n + j];
        let eta = kii + kjj - 2.0 * kij;
        let mut aj_new = if eta > 1e-12 {
            (aj_old + yj * (ei - ej) / eta).clamp(low, high)
        } else {
            // flat direction: evaluate the objective at both clip ends
            let f1 = yi * (ei + *bias) - ai_old * kii - s * aj_old * kij;
            let f2 = yj * (ej + *bias) - aj_old * kjj - s * ai_old * kij;
            let l1 = ai_old + s * (aj_old - low);
            let h1 = ai_old + s * (aj_old - high);
            let obj_low = l1 * f1 + low * f2 + 0.5 * l1 * l1 * kii + 0.5 * low * low * kjj
                + s * low * l1 * kij;
            let obj_high = h1 * f1 + high * f2 + 0.5 * h1 * h1 * kii + 0.5 * high * high * kjj
                + s * high * h1 * kij;
            if obj_low < obj_high - 1e-12 {
                low
            } else if obj_high < obj_low - 1e-12 {
                high
            } else {
                return false;
            }
        };
        if (aj_new - aj_old).abs() < ALPHA_EPS * (aj_new + aj_old + ALPHA_EPS) {
            return false;
        }
        if aj_new < ALPHA_EPS {
            aj_new = 0.0;
        } else if aj_new > c - ALPHA_EPS {
            aj_new = c;
        }
        let ai_new = (ai_old + s * (aj_old - aj_new)).clamp(0.0, c);

        let di = yi * (ai_new - ai_old);
        let dj = yj * (aj_new - aj_old);
        let b1 = *bias - ei - di * kii - dj * kij;
        let b2 = *bias - ej - di * kij - dj * kjj;
        let new_bias = if ai_new > 0.0 && ai_new < c {
            b1
        } else if aj_new > 0.0 && aj_new < c {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        let db = new_bias - *bias;
        for k in 0..n {
            errors[k] += di * kernel[i * n + k] + dj * kernel[j * n + k] + db;
        }
        alpha[i] = ai_new;
        alpha[j] = aj_new;
        *bias = new_bias;
        true
    };

    while passes < max_passes {
        let mut changed = 0usize;
        for i in 0..n {
            if !examine_all && !(alpha[i] > 0.0 && alpha[i] < c) {
                continue;
            }
            let r = errors[i] * y_signed[i];
            let violates =
                (r < -KKT_TOL && alpha[i] < c) || (r > KKT_TOL && alpha[i] > 0.0);
            if !violates {
                continue;
            }
            // second choice: largest |E_i − E_j| among non-bound rows
            let mut j_best: Option<(f64, usize)> = None;
            for j in 0..n {
                if j != i && alpha[j] > 0.0 && alpha[j] < c {
                    let gap = (errors[i] - errors[j]).abs();
                    if j_best.map_or(true, |(g, _)| gap > g) {
                        j_best = Some((gap, j));
                    }
                }
            }
            let mut stepped = false;
            if let Some((_, j)) = j_best {
                stepped = take_step(i, j, &mut alpha, &mut bias, &mut errors);
            }
            if !stepped {
                // deterministic fallback scans starting after i
                for off in 1..n {
                    let j = (i + off) % n;
                    if alpha[j] > 0.0 && alpha[j] < c
                        && take_step(i, j, &mut alpha, &mut bias, &mut errors)
                    {
                        stepped = true;
                        break;
                    }
                }
            }
            if !stepped {
                for off in 1..n {
                    let j = (i + off) % n;
                    if take_step(i, j, &mut alpha, &mut bias, &mut errors) {
                        stepped = true;
                        break;
                    }
                }
            }
            changed += usize::from(stepped);
        }
        passes += 1;
        if examine_all {
            if changed == 0 {
                converged = true;
                break;
            }
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
    }

    let warnings = if converged {
        Vec::new()
    } else {
        vec![FitWarning::SmoPassCap]
    };
    Ok(SvmModel {
        train,
        std,
        alpha,
        y_signed,
        bias,
        sigma,
        c,
        column_labels: x.column_labels.clone(),
        warnings,
    })
}

impl<F: Scalar> SvmModel<F> {
    /// Raw decision values `f(x) = Σ αᵢ yᵢ k(xᵢ, x) + b`.
    pub fn predict(&self, x: &DesignMatrix<F>) -> Result<Vec<F>, LearnerError> {
        if x.p != self.train.p {
            return Err(LearnerError::SchemaMismatch {
                expected: self.train.p,
                got: x.p,
            });
        }
        let q = self.std.transform(x);
        let active: Vec<(usize, f64)> = self
            .alpha
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0.0)
            .map(|(i, &a)| (i, a * self.y_signed[i]))
            .collect();
        Ok((0..q.n)
            .map(|qi| {
                let row = q.row(qi);
                let mut f = self.bias;
                for &(i, coef) in &active {
                    f += coef * rbf(self.train.row(i), row, self.sigma);
                }
                F::of(f)
            })
            .collect())
    }

    pub fn box_constraint(&self) -> f64 {
        self.c
    }

    /// Dual objective `Σα − ½ ΣΣ αᵢαⱼyᵢyⱼ k(xᵢ,xⱼ)` of the stored iterate.
    pub fn dual_objective(&self) -> f64 {
        let n = self.train.n;
        let mut quad = 0.0;
        for i in 0..n {
            if self.alpha[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if self.alpha[j] == 0.0 {
                    continue;
                }
                quad += self.alpha[i]
                    * self.alpha[j]
                    * self.y_signed[i]
                    * self.y_signed[j]
                    * rbf(self.train.row(i), self.train.row(j), self.sigma);
            }
        }
        self.alpha.iter().sum::<f64>() - 0.5 * quad
    }
}
