//! Synthetic spatially autocorrelated binary-classification data.
//!
//! Coordinates are uniform over a rectangle. Each informative predictor is a
//! zero-mean Gaussian random field with exponential covariance
//! `C(d) = sill · exp(−d / range) + nugget · 1{d = 0}`, drawn by dense
//! Cholesky factorization. The latent score is the intercept plus the sum of
//! informative fields (unit coefficients); labels are Bernoulli draws of its
//! logistic. Noise predictors are iid standard normal. The whole pipeline is
//! a pure function of the [`FieldSpec`].

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::dataset::{ColumnKind, Dataset, FeatureSchema};
use crate::linalg;
use crate::num::Scalar;
use crate::seed::{self, tag};

/// Dense factorization scale limit.
pub const MAX_FIELD_POINTS: usize = 3000;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid field spec: {0}")]
    InvalidSpec(String),
    #[error("n = {0} exceeds the dense factorization cap of {MAX_FIELD_POINTS}")]
    TooManyPoints(usize),
    #[error("covariance factorization failed after jitter escalation to {0:e}")]
    FactorizationFailed(f64),
    #[error(
        "generated labels are single-class (prevalence {prevalence:.3}); \
         move `intercept` toward zero to balance the classes"
    )]
    SingleClass { prevalence: f64 },
}

/// Generator parameters for one synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSpec {
    pub n: usize,
    /// `(width, height)` of the sampling rectangle.
    pub extent: (f64, f64),
    /// Correlation length of the latent fields, in coordinate units.
    pub range: f64,
    /// Marginal variance of the spatially structured component.
    pub sill: f64,
    /// Variance of the iid component added on the diagonal.
    pub nugget: f64,
    pub n_informative: usize,
    pub n_noise: usize,
    /// Shifts class prevalence through the logistic link.
    pub intercept: f64,
    pub seed: u64,
}

impl FieldSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: &str| Err(SynthError::InvalidSpec(m.into()));
        if self.n < 10 {
            return fail("n must be at least 10");
        }
        if !(self.range > 0.0) {
            return fail("range must be positive");
        }
        if self.sill < 0.0 {
            return fail("sill must be non-negative");
        }
        if self.nugget < 0.0 {
            return fail("nugget must be non-negative");
        }
        if self.n_informative + self.n_noise == 0 {
            return fail("at least one predictor required");
        }
        if !(self.extent.0 > 0.0 && self.extent.1 > 0.0) {
            return fail("extent must be positive");
        }
        Ok(())
    }
}

/// Coordinates iid uniform over the extent; deterministic given the seed.
pub fn sample_coordinates<F: Scalar>(spec: &FieldSpec) -> Result<Vec<[F; 2]>, SynthError> {
    spec.validate()?;
    let mut rng = seed::stream(&[spec.seed, tag::COORDS]);
    Ok((0..spec.n)
        .map(|_| {
            let x: f64 = rng.random::<f64>() * spec.extent.0;
            let y: f64 = rng.random::<f64>() * spec.extent.1;
            [F::of(x), F::of(y)]
        })
        .collect())
}

/// One zero-mean Gaussian random field draw at the given coordinates.
///
/// Factorization runs in `f64` with a diagonal jitter of 1e-10, escalated
/// tenfold up to five times when the covariance is numerically singular
/// (duplicate coordinates with zero nugget, for instance).
pub fn gaussian_random_field<F: Scalar>(
    coords: &[[F; 2]],
    range: f64,
    sill: f64,
    nugget: f64,
    seed: u64,
) -> Result<Vec<F>, SynthError> {
    let n = coords.len();
    if n > MAX_FIELD_POINTS {
        return Err(SynthError::TooManyPoints(n));
    }
    if !(range > 0.0) || sill < 0.0 || nugget < 0.0 {
        return Err(SynthError::InvalidSpec(
            "range must be positive, sill and nugget non-negative".into(),
        ));
    }

    let pts: Vec<[f64; 2]> = coords.iter().map(|c| [c[0].f64(), c[1].f64()]).collect();
    let mut cov = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let dx = pts[i][0] - pts[j][0];
            let dy = pts[i][1] - pts[j][1];
            let d = (dx * dx + dy * dy).sqrt();
            let mut c = sill * (-d / range).exp();
            if d == 0.0 {
                c += nugget;
            }
            cov[i * n + j] = c;
            cov[j * n + i] = c;
        }
    }

    let mut jitter = 1e-10;
    let mut factor = cov.clone();
    for escalation in 0..=5 {
        if escalation > 0 {
            jitter *= 10.0;
            factor.copy_from_slice(&cov);
        }
        for i in 0..n {
            factor[i * n + i] += jitter;
        }
        if linalg::cholesky(&mut factor, n).is_ok() {
            let mut rng = seed::stream(&[seed, tag::FIELD]);
            let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut field = vec![0.0f64; n];
            linalg::lower_mul(&factor, n, &z, &mut field);
            return Ok(field.into_iter().map(F::of).collect());
        }
    }
    Err(SynthError::FactorizationFailed(jitter))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Generates a complete dataset: informative fields, latent logistic labels,
/// then iid noise predictors. Column names are `field1..` and `noise1..`;
/// coordinates are `x`/`y` and the label column is `class`.
pub fn make_classification<F: Scalar>(spec: &FieldSpec) -> Result<Dataset<F>, SynthError> {
    spec.validate()?;
    if spec.n_informative > 0 && spec.n > MAX_FIELD_POINTS {
        return Err(SynthError::TooManyPoints(spec.n));
    }
    let coords = sample_coordinates::<F>(spec)?;
    let n = spec.n;
    let p = spec.n_informative + spec.n_noise;

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut eta = vec![spec.intercept; n];
    for j in 0..spec.n_informative {
        let field = gaussian_random_field::<f64>(
            &coords
                .iter()
                .map(|c| [c[0].f64(), c[1].f64()])
                .collect::<Vec<_>>(),
            spec.range,
            spec.sill,
            spec.nugget,
            seed::mix(&[spec.seed, tag::FIELD, j as u64]),
        )?;
        for (e, v) in eta.iter_mut().zip(&field) {
            *e += v;
        }
        columns.push(field);
    }

    let mut label_rng = seed::stream(&[spec.seed, tag::LABELS]);
    let labels: Vec<u8> = eta
        .iter()
        .map(|&e| u8::from(label_rng.random::<f64>() < sigmoid(e)))
        .collect();
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == n {
        return Err(SynthError::SingleClass {
            prevalence: positives as f64 / n as f64,
        });
    }

    for j in 0..spec.n_noise {
        let mut rng = seed::stream(&[spec.seed, tag::NOISE, j as u64]);
        columns.push((0..n).map(|_| StandardNormal.sample(&mut rng)).collect());
    }

    let mut schema_columns = Vec::with_capacity(p);
    for j in 0..spec.n_informative {
        schema_columns.push((format!("field{}", j + 1), ColumnKind::Numeric));
    }
    for j in 0..spec.n_noise {
        schema_columns.push((format!("noise{}", j + 1), ColumnKind::Numeric));
    }
    let schema = FeatureSchema::new(schema_columns, "x", "y", "class")
        .expect("generated schema is valid");

    let mut features = Vec::with_capacity(n * p);
    for i in 0..n {
        for column in &columns {
            features.push(F::of(column[i]));
        }
    }

    Ok(Dataset {
        schema,
        features,
        coords,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> FieldSpec {
        FieldSpec {
            n: 200,
            extent: (1.0, 1.0),
            range: 0.3,
            sill: 1.0,
            nugget: 0.0,
            n_informative: 1,
            n_noise: 1,
            intercept: 0.0,
            seed: 7,
        }
    }

    #[test]
    fn coordinates_stay_in_extent_and_are_deterministic() {
        let spec = FieldSpec {
            n: 1000,
            ..base_spec()
        };
        let a = sample_coordinates::<f64>(&spec).unwrap();
        let b = sample_coordinates::<f64>(&spec).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|c| (0.0..=1.0).contains(&c[0]) && (0.0..=1.0).contains(&c[1])));
        let mut sorted = a.clone();
        sorted.sort_unstable_by(|p, q| p.partial_cmp(q).unwrap());
        sorted.dedup();
        assert_eq!(sorted.len(), 1000, "duplicates in continuous draws");
    }

    #[test]
    fn four_points_small_extent() {
        let spec = FieldSpec {
            n: 10,
            ..base_spec()
        };
        let pts = sample_coordinates::<f64>(&spec).unwrap();
        assert_eq!(pts.len(), 10);
    }

    #[test]
    fn pure_nugget_field_has_no_spatial_structure() {
        let spec = FieldSpec {
            n: 500,
            ..base_spec()
        };
        let coords = sample_coordinates::<f64>(&spec).unwrap();
        let field = gaussian_random_field(&coords, 0.3, 0.0, 1.0, 3).unwrap();
        // correlation between values of close pairs should be near zero
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for i in 0..coords.len() {
            for j in 0..i {
                let dx = coords[i][0] - coords[j][0];
                let dy = coords[i][1] - coords[j][1];
                if (dx * dx + dy * dy).sqrt() < 0.03 {
                    pairs.push((field[i], field[j]));
                }
            }
        }
        assert!(pairs.len() > 100);
        let r = pearson(&pairs);
        assert!(r.abs() < 0.1, "lag correlation {r} too large for pure nugget");
    }

    #[test]
    fn smooth_field_correlates_neighbors() {
        // range equal to the extent, no nugget: close pairs strongly correlated
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for s in 0..20u64 {
            let spec = FieldSpec {
                n: 120,
                seed: s,
                ..base_spec()
            };
            let coords = sample_coordinates::<f64>(&spec).unwrap();
            let field = gaussian_random_field(&coords, 1.0, 1.0, 0.0, s).unwrap();
            for i in 0..coords.len() {
                for j in 0..i {
                    let dx = coords[i][0] - coords[j][0];
                    let dy = coords[i][1] - coords[j][1];
                    if (dx * dx + dy * dy).sqrt() < 0.1 {
                        pairs.push((field[i], field[j]));
                    }
                }
            }
        }
        let r = pearson(&pairs);
        assert!(r > 0.5, "neighbor correlation {r} too weak");
    }

    #[test]
    fn duplicate_coordinates_share_field_values_without_nugget() {
        let coords = [[0.25f64, 0.25], [0.25, 0.25], [0.8, 0.8]];
        let field = gaussian_random_field(&coords, 0.5, 1.0, 0.0, 11).unwrap();
        assert!(
            (field[0] - field[1]).abs() < 1e-3,
            "duplicates differ: {} vs {}",
            field[0],
            field[1]
        );
    }

    fn pearson(pairs: &[(f64, f64)]) -> f64 {
        let n = pairs.len() as f64;
        let (mx, my) = (
            pairs.iter().map(|p| p.0).sum::<f64>() / n,
            pairs.iter().map(|p| p.1).sum::<f64>() / n,
        );
        let (mut c, mut vx, mut vy) = (0.0, 0.0, 0.0);
        for &(a, b) in pairs {
            c += (a - mx) * (b - my);
            vx += (a - mx) * (a - mx);
            vy += (b - my) * (b - my);
        }
        c / (vx.sqrt() * vy.sqrt())
    }

    #[test]
    fn labels_do_not_depend_on_noise_columns() {
        let with_noise = make_classification::<f64>(&FieldSpec {
            n_noise: 4,
            ..base_spec()
        })
        .unwrap();
        let without_noise = make_classification::<f64>(&FieldSpec {
            n_noise: 0,
            ..base_spec()
        })
        .unwrap();
        assert_eq!(with_noise.labels, without_noise.labels);
        assert_eq!(with_noise.coords, without_noise.coords);
    }

    #[test]
    fn pure_noise_prevalence_is_balanced() {
        let spec = FieldSpec {
            n: 1000,
            n_informative: 0,
            n_noise: 1,
            intercept: 0.0,
            ..base_spec()
        };
        let ds = make_classification::<f64>(&spec).unwrap();
        let (_, pos) = ds.label_counts();
        let prevalence = pos as f64 / ds.n() as f64;
        assert!((prevalence - 0.5).abs() < 0.05, "prevalence {prevalence}");
    }

    #[test]
    fn negative_intercept_hits_target_prevalence() {
        // Monte Carlo over 20 seeds: mean prevalence within 0.25 +/- 0.07.
        let mut total = 0.0;
        for s in 0..20u64 {
            let ds = make_classification::<f64>(&FieldSpec {
                n: 900,
                extent: (1.0, 1.0),
                range: 0.3,
                sill: 0.12,
                nugget: 0.02,
                n_informative: 3,
                n_noise: 2,
                intercept: -1.1,
                seed: 1000 + s,
            })
            .unwrap();
            let (_, pos) = ds.label_counts();
            total += pos as f64 / ds.n() as f64;
        }
        let mean = total / 20.0;
        assert!(
            (mean - 0.25).abs() < 0.07,
            "mean prevalence {mean} outside 0.25 +/- 0.07"
        );
    }

    #[test]
    fn generation_is_deterministic() {
        let a = make_classification::<f64>(&base_spec()).unwrap();
        let b = make_classification::<f64>(&base_spec()).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.coords, b.coords);
    }

    #[test]
    fn extreme_intercept_reports_single_class() {
        let err = make_classification::<f64>(&FieldSpec {
            intercept: -40.0,
            ..base_spec()
        })
        .unwrap_err();
        assert!(matches!(err, SynthError::SingleClass { .. }));
    }

    #[test]
    fn semivariogram_is_mostly_nondecreasing_up_to_range() {
        let mut votes = 0;
        for s in 0..10u64 {
            let spec = FieldSpec {
                n: 400,
                seed: 40 + s,
                ..base_spec()
            };
            let coords = sample_coordinates::<f64>(&spec).unwrap();
            let field = gaussian_random_field(&coords, 0.3, 1.0, 0.0, 40 + s).unwrap();
            const BINS: usize = 5;
            let mut sums = [0.0f64; BINS];
            let mut counts = [0usize; BINS];
            for i in 0..coords.len() {
                for j in 0..i {
                    let dx = coords[i][0] - coords[j][0];
                    let dy = coords[i][1] - coords[j][1];
                    let d = (dx * dx + dy * dy).sqrt();
                    if d < 0.3 {
                        let b = (d / 0.3 * BINS as f64) as usize;
                        let diff = field[i] - field[j];
                        sums[b] += 0.5 * diff * diff;
                        counts[b] += 1;
                    }
                }
            }
            let gamma: Vec<f64> = (0..BINS).map(|b| sums[b] / counts[b] as f64).collect();
            if gamma.windows(2).all(|w| w[1] >= w[0]) {
                votes += 1;
            }
        }
        assert!(votes > 5, "only {votes}/10 seeds gave a monotone semivariogram");
    }
}
