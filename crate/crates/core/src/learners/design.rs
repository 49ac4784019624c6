//! Column standardization with training statistics.

use crate::dataset::DesignMatrix;
use crate::num::Scalar;

/// Per-column mean and sample standard deviation captured on training data.
/// Constant columns get unit scale so they map to zero.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit<F: Scalar>(x: &DesignMatrix<F>) -> Self {
        let (n, p) = (x.n, x.p);
        let mut mean = vec![0.0f64; p];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v.f64();
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut scale = vec![0.0f64; p];
        for i in 0..n {
            for ((s, m), v) in scale.iter_mut().zip(&mean).zip(x.row(i)) {
                let d = v.f64() - m;
                *s += d * d;
            }
        }
        for s in &mut scale {
            *s = if n > 1 { (*s / (n as f64 - 1.0)).sqrt() } else { 0.0 };
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Standardizer { mean, scale }
    }

    pub fn transform<F: Scalar>(&self, x: &DesignMatrix<F>) -> DesignMatrix<F> {
        let mut data = Vec::with_capacity(x.data.len());
        for i in 0..x.n {
            for ((v, m), s) in x.row(i).iter().zip(&self.mean).zip(&self.scale) {
                data.push(F::of((v.f64() - m) / s));
            }
        }
        DesignMatrix {
            n: x.n,
            p: x.p,
            data,
            column_labels: x.column_labels.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> DesignMatrix<f64> {
        DesignMatrix {
            n: rows.len(),
            p: rows[0].len(),
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
            column_labels: (0..rows[0].len()).map(|i| format!("c{i}")).collect(),
        }
    }

    #[test]
    fn standardizes_to_zero_mean_unit_variance() {
        let x = matrix(&[&[1.0, 5.0], &[2.0, 5.0], &[3.0, 5.0]]);
        let std = Standardizer::fit(&x);
        let t = std.transform(&x);
        assert!((t.row(0)[0] + 1.0).abs() < 1e-12);
        assert!((t.row(1)[0]).abs() < 1e-12);
        assert!((t.row(2)[0] - 1.0).abs() < 1e-12);
        // constant column maps to zero
        assert!(t.data.iter().skip(1).step_by(2).all(|&v| v == 0.0));
    }
}
