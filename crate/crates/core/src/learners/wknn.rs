//! Weighted k-nearest neighbors with Minkowski distance and neighbor
//! kernels.
//!
//! Features are standardized with training statistics. For a query, the
//! `k + 1` nearest training rows are found; the first `k` distances are
//! normalized by the `(k+1)`-th and weighted by the kernel. The probability
//! is the weighted fraction of positive neighbors.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::dataset::DesignMatrix;
use crate::num::Scalar;

use super::design::Standardizer;
use super::{FitWarning, LearnerError, LearnerKind, ParamSetting};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Kernel {
    Rectangular,
    Triangular,
    Epanechnikov,
    Biweight,
    Triweight,
    Cos,
    Inv,
    Gaussian,
    Optimal,
}

pub(super) const KERNEL_NAMES: [(&str, Kernel); 9] = [
    ("rectangular", Kernel::Rectangular),
    ("triangular", Kernel::Triangular),
    ("epanechnikov", Kernel::Epanechnikov),
    ("biweight", Kernel::Biweight),
    ("triweight", Kernel::Triweight),
    ("cos", Kernel::Cos),
    ("inv", Kernel::Inv),
    ("gaussian", Kernel::Gaussian),
    ("optimal", Kernel::Optimal),
];

impl Kernel {
    fn parse(name: &str) -> Option<Kernel> {
        KERNEL_NAMES
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, k)| *k)
    }

    /// Weight at normalized distance `d` in `[0, 1]`.
    pub(super) fn weight(self, d: f64) -> f64 {
        match self {
            Kernel::Rectangular => 1.0,
            Kernel::Triangular => 1.0 - d.abs(),
            Kernel::Epanechnikov => 0.75 * (1.0 - d * d),
            Kernel::Biweight => {
                let u = 1.0 - d * d;
                15.0 / 16.0 * u * u
            }
            Kernel::Triweight => {
                let u = 1.0 - d * d;
                35.0 / 32.0 * u * u * u
            }
            Kernel::Cos => {
                std::f64::consts::FRAC_PI_4 * (std::f64::consts::FRAC_PI_2 * d).cos()
            }
            Kernel::Inv => 1.0 / (d.abs() + 1e-12),
            Kernel::Gaussian => (-d * d / 2.0).exp(),
            Kernel::Optimal => unreachable!("optimal weights are rank-based"),
        }
    }
}

/// Rank-decaying weights for the `optimal` kernel: rank `i` of `k` with
/// feature dimension `dim`, clipped at zero.
pub(super) fn optimal_weights(k: usize, dim: usize) -> Vec<f64> {
    let d = dim.max(1) as f64;
    let scale = d / (2.0 * (k as f64).powf(2.0 / d));
    (1..=k)
        .map(|i| {
            let i = i as f64;
            let term = i.powf(1.0 + 2.0 / d) - (i - 1.0).powf(1.0 + 2.0 / d);
            (1.0 + d / 2.0 - scale * term).max(0.0)
        })
        .collect()
}

#[derive(Debug)]
pub struct WknnModel<F: Scalar> {
    train: DesignMatrix<F>,
    y: Vec<u8>,
    std: Standardizer,
    k: usize,
    order: f64,
    kernel: Kernel,
    pub column_labels: Vec<String>,
    pub warnings: Vec<FitWarning>,
    zero_weight_fallbacks: AtomicU64,
}

pub(super) fn fit_wknn<F: Scalar>(
    x: &DesignMatrix<F>,
    y: &[u8],
    setting: &ParamSetting,
) -> Result<WknnModel<F>, LearnerError> {
    const KIND: LearnerKind = LearnerKind::Wknn;
    if x.n < 2 {
        return Err(LearnerError::TooFewRows(x.n));
    }
    let requested_k = setting.get_int(KIND, "k")?;
    if requested_k < 1 {
        return Err(LearnerError::BadParam {
            learner: KIND,
            name: "k",
            message: format!("must be positive, got {requested_k}"),
        });
    }
    let distance = setting.get_int(KIND, "distance")?;
    if distance < 1 {
        return Err(LearnerError::BadParam {
            learner: KIND,
            name: "distance",
            message: format!("must be at least 1, got {distance}"),
        });
    }
    let kernel_name = setting.get_cat(KIND, "kernel")?;
    let kernel = Kernel::parse(kernel_name).ok_or_else(|| LearnerError::BadParam {
        learner: KIND,
        name: "kernel",
        message: format!("unknown kernel `{kernel_name}`"),
    })?;

    let mut warnings = Vec::new();
    let max_k = x.n - 1;
    let k = if requested_k as usize > max_k {
        warnings.push(FitWarning::ClampedK {
            requested: requested_k,
            used: max_k,
        });
        max_k
    } else {
        requested_k as usize
    };

    let std = Standardizer::fit(x);
    Ok(WknnModel {
        train: std.transform(x),
        y: y.to_vec(),
        std,
        k,
        order: distance as f64,
        kernel,
        column_labels: x.column_labels.clone(),
        warnings,
        zero_weight_fallbacks: AtomicU64::new(0),
    })
}

/// Minkowski distance of the given order, max-factored for stability at
/// high orders.
pub(super) fn minkowski<F: Scalar>(a: &[F], b: &[F], order: f64) -> f64 {
    if order == 2.0 {
        let mut s = 0.0;
        for (x, y) in a.iter().zip(b) {
            let d = x.f64() - y.f64();
            s += d * d;
        }
        return s.sqrt();
    }
    if order == 1.0 {
        let mut s = 0.0;
        for (x, y) in a.iter().zip(b) {
            s += (x.f64() - y.f64()).abs();
        }
        return s;
    }
    let mut max = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        max = max.max((x.f64() - y.f64()).abs());
    }
    if max == 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += ((x.f64() - y.f64()).abs() / max).powf(order);
    }
    max * s.powf(1.0 / order)
}

impl<F: Scalar> WknnModel<F> {
    /// Queries falling back to rectangular weights because every kernel
    /// weight was zero.
    pub fn zero_weight_fallbacks(&self) -> u64 {
        self.zero_weight_fallbacks.load(Ordering::Relaxed)
    }

    pub fn predict(&self, x: &DesignMatrix<F>) -> Result<Vec<F>, LearnerError> {
        if x.p != self.train.p {
            return Err(LearnerError::SchemaMismatch {
                expected: self.train.p,
                got: x.p,
            });
        }
        let q = self.std.transform(x);
        let n = self.train.n;
        let k = self.k;
        let optimal = if self.kernel == Kernel::Optimal {
            Some(optimal_weights(k, self.train.p))
        } else {
            None
        };

        let mut out = Vec::with_capacity(q.n);
        let mut dists: Vec<(f64, u32)> = Vec::with_capacity(n);
        for qi in 0..q.n {
            let query = q.row(qi);
            dists.clear();
            for ti in 0..n {
                dists.push((minkowski(query, self.train.row(ti), self.order), ti as u32));
            }
            let cmp = |a: &(f64, u32), b: &(f64, u32)| {
                a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1))
            };
            dists.select_nth_unstable_by(k, cmp);
            dists[..=k].sort_unstable_by(cmp);

            let norm = dists[k].0;
            let mut w_sum = 0.0f64;
            let mut w_pos = 0.0f64;
            for i in 0..k {
                let (d, row) = dists[i];
                let w = match &optimal {
                    Some(weights) => weights[i],
                    None => {
                        let dhat = if norm > 0.0 { d / norm } else { 0.0 };
                        self.kernel.weight(dhat)
                    }
                };
                w_sum += w;
                if self.y[row as usize] == 1 {
                    w_pos += w;
                }
            }
            if w_sum <= 0.0 {
                self.zero_weight_fallbacks.fetch_add(1, Ordering::Relaxed);
                w_sum = k as f64;
                w_pos = dists[..k]
                    .iter()
                    .filter(|&&(_, row)| self.y[row as usize] == 1)
                    .count() as f64;
            }
            out.push(F::of(w_pos / w_sum));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{default_setting, ParamValue};

    fn matrix(data: Vec<f64>, n: usize, p: usize) -> DesignMatrix<f64> {
        DesignMatrix {
            n,
            p,
            data,
            column_labels: (0..p).map(|i| format!("c{i}")).collect(),
        }
    }

    fn setting(k: i64, distance: i64, kernel: &str) -> ParamSetting {
        ParamSetting::empty()
            .with("k", ParamValue::Int(k))
            .with("distance", ParamValue::Int(distance))
            .with("kernel", ParamValue::Cat(kernel.into()))
    }

    #[test]
    fn query_on_training_point_with_clamped_k_returns_its_label() {
        let x = matrix(vec![0.0, 10.0], 2, 1);
        let model = fit_wknn(&x, &[1, 0], &setting(7, 2, "rectangular")).unwrap();
        assert!(matches!(
            model.warnings[0],
            FitWarning::ClampedK { requested: 7, used: 1 }
        ));
        let p = model.predict(&matrix(vec![0.0], 1, 1)).unwrap();
        assert_eq!(p[0], 1.0);
    }

    #[test]
    fn hand_counted_vote_on_five_point_fixture() {
        // 1-D points 0, 1, 2, 10, 11; query 1.5 -> three nearest are rows
        // 1, 2 (tied, index order), then 0; labels 1, 0, 1 -> vote 2/3.
        let x = matrix(vec![0.0, 1.0, 2.0, 10.0, 11.0], 5, 1);
        let y = [1, 1, 0, 0, 1];
        let model = fit_wknn(&x, &y, &setting(3, 2, "rectangular")).unwrap();
        let p = model.predict(&matrix(vec![1.5], 1, 1)).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_weight_ratio_matches_formula() {
        let ratio = Kernel::Gaussian.weight(0.0) / Kernel::Gaussian.weight(1.0);
        assert!((ratio - 1.6487).abs() < 1e-3);
    }

    #[test]
    fn all_zero_weights_fall_back_to_rectangular() {
        // all four training points equidistant from the query: normalized
        // distance 1 makes triangular weights vanish
        let x = matrix(vec![-1.0, -1.0, 1.0, 1.0], 4, 1);
        let y = [1, 0, 1, 0];
        let model = fit_wknn(&x, &y, &setting(3, 2, "triangular")).unwrap();
        let p = model.predict(&matrix(vec![0.0], 1, 1)).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(model.zero_weight_fallbacks(), 1);
    }

    #[test]
    fn optimal_weights_decay_and_clip() {
        let w = optimal_weights(10, 5);
        assert_eq!(w.len(), 10);
        assert!(w.windows(2).all(|p| p[1] <= p[0] + 1e-12));
        assert!(w.iter().all(|&v| v >= 0.0));
        assert!(w[0] > w[9]);
    }

    #[test]
    fn default_setting_fits() {
        let x = matrix((0..40).map(|i| i as f64).collect(), 40, 1);
        let y: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let model = fit_wknn(&x, &y, &default_setting(LearnerKind::Wknn, 1)).unwrap();
        let p = model.predict(&matrix(vec![0.0, 39.0], 2, 1)).unwrap();
        assert!(p[0] < 0.5 && p[1] > 0.5);
    }

    #[test]
    fn high_order_minkowski_is_stable() {
        let a = [1000.0, 2000.0];
        let b = [1001.5, 2000.0];
        let d = minkowski(&a, &b, 100.0);
        assert!((d - 1.5).abs() < 1e-9, "got {d}");
    }

    #[test]
    fn unknown_kernel_is_rejected() {
        let x = matrix(vec![0.0, 1.0], 2, 1);
        assert!(matches!(
            fit_wknn(&x, &[0, 1], &setting(1, 2, "sombrero")),
            Err(LearnerError::BadParam { .. })
        ));
    }
}
