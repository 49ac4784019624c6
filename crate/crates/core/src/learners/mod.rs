//! Five binary classifiers behind one train/predict interface.
//!
//! All learners consume the shared one-hot design matrix. GLM, WKNN, RF and
//! BRT predict probabilities; SVM predicts raw decision values, which is
//! sufficient for rank-based scoring. Every learner is deterministic given
//! `(data, setting, seed)`; only the tree ensembles consume the seed.

mod brt;
mod cart;
mod design;
mod glm;
mod rf;
mod svm;
mod wknn;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DesignMatrix;
use crate::num::Scalar;

pub use brt::{fit_brt_traced, BrtModel};
pub use cart::{CartTree, SortedColumns};
pub use design::Standardizer;
pub use glm::GlmModel;
pub use rf::{fit_rf_with_options, RfModel};
pub use svm::SvmModel;
pub use wknn::WknnModel;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("{learner}: missing hyperparameter `{name}`")]
    MissingParam {
        learner: LearnerKind,
        name: &'static str,
    },
    #[error("{learner}: hyperparameter `{name}` {message}")]
    BadParam {
        learner: LearnerKind,
        name: &'static str,
        message: String,
    },
    #[error("training data has a single class")]
    SingleClassTraining,
    #[error("training data is empty or too small ({0} rows)")]
    TooFewRows(usize),
    #[error("labels/rows length mismatch ({rows} rows vs {labels} labels)")]
    LabelMismatch { rows: usize, labels: usize },
    #[error("prediction rows have {got} columns, model was trained with {expected}")]
    SchemaMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LearnerKind {
    Glm,
    Wknn,
    Rf,
    Brt,
    Svm,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 5] = [
        LearnerKind::Glm,
        LearnerKind::Wknn,
        LearnerKind::Rf,
        LearnerKind::Brt,
        LearnerKind::Svm,
    ];

    /// GLM has no hyperparameters; everything else is tunable.
    pub fn is_tunable(self) -> bool {
        self != LearnerKind::Glm
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LearnerKind::Glm => "glm",
            LearnerKind::Wknn => "wknn",
            LearnerKind::Rf => "rf",
            LearnerKind::Brt => "brt",
            LearnerKind::Svm => "svm",
        })
    }
}

impl FromStr for LearnerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "glm" => Ok(LearnerKind::Glm),
            "wknn" => Ok(LearnerKind::Wknn),
            "rf" => Ok(LearnerKind::Rf),
            "brt" => Ok(LearnerKind::Brt),
            "svm" => Ok(LearnerKind::Svm),
            other => Err(format!("unknown learner `{other}`")),
        }
    }
}

/// One hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Cat(String),
}

/// A sampled or default hyperparameter assignment; serializes as a JSON
/// object with keys in stable (sorted) order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamSetting(pub BTreeMap<String, ParamValue>);

impl ParamSetting {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: ParamValue) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn get_int(&self, learner: LearnerKind, name: &'static str) -> Result<i64, LearnerError> {
        match self.0.get(name) {
            Some(ParamValue::Int(v)) => Ok(*v),
            Some(ParamValue::Real(v)) if v.fract() == 0.0 => Ok(*v as i64),
            Some(_) => Err(LearnerError::BadParam {
                learner,
                name,
                message: "must be an integer".into(),
            }),
            None => Err(LearnerError::MissingParam { learner, name }),
        }
    }

    fn get_real(&self, learner: LearnerKind, name: &'static str) -> Result<f64, LearnerError> {
        match self.0.get(name) {
            Some(ParamValue::Real(v)) => Ok(*v),
            Some(ParamValue::Int(v)) => Ok(*v as f64),
            Some(_) => Err(LearnerError::BadParam {
                learner,
                name,
                message: "must be a number".into(),
            }),
            None => Err(LearnerError::MissingParam { learner, name }),
        }
    }

    fn get_cat(&self, learner: LearnerKind, name: &'static str) -> Result<&str, LearnerError> {
        match self.0.get(name) {
            Some(ParamValue::Cat(v)) => Ok(v),
            Some(_) => Err(LearnerError::BadParam {
                learner,
                name,
                message: "must be categorical".into(),
            }),
            None => Err(LearnerError::MissingParam { learner, name }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("settings serialize")
    }
}

/// Non-fatal conditions encountered while fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum FitWarning {
    /// IRLS hit the iteration cap with very large standardized coefficients.
    QuasiSeparation,
    /// SMO returned the current iterate at the pass cap.
    SmoPassCap,
    /// `mtry` exceeded the design width and was clamped.
    ClampedMtry { requested: i64, used: usize },
    /// `k` exceeded `n_train - 1` and was clamped.
    ClampedK { requested: i64, used: usize },
}

/// The defaults used whenever no tuning is performed.
pub fn default_setting(kind: LearnerKind, p: usize) -> ParamSetting {
    match kind {
        LearnerKind::Glm => ParamSetting::empty(),
        LearnerKind::Wknn => ParamSetting::empty()
            .with("k", ParamValue::Int(7))
            .with("distance", ParamValue::Int(2))
            .with("kernel", ParamValue::Cat("optimal".into())),
        LearnerKind::Rf => ParamSetting::empty()
            .with("mtry", ParamValue::Int((p as f64).sqrt().floor().max(1.0) as i64))
            .with("num_trees", ParamValue::Int(500)),
        LearnerKind::Brt => ParamSetting::empty()
            .with("n_tree", ParamValue::Int(100))
            .with("shrinkage", ParamValue::Real(0.1))
            .with("interaction_depth", ParamValue::Int(1)),
        LearnerKind::Svm => ParamSetting::empty()
            .with("c", ParamValue::Real(1.0))
            .with("sigma", ParamValue::Real(1.0)),
    }
}

/// A trained classifier; exposes score prediction and fit warnings.
#[derive(Debug)]
pub enum Fitted<F: Scalar> {
    Glm(GlmModel<F>),
    Wknn(WknnModel<F>),
    Rf(RfModel<F>),
    Brt(BrtModel<F>),
    Svm(SvmModel<F>),
}

impl<F: Scalar> Fitted<F> {
    /// Scores for each row: probabilities for GLM/WKNN/RF/BRT, decision
    /// values for SVM. Higher means more likely positive.
    pub fn predict(&self, x: &DesignMatrix<F>) -> Result<Vec<F>, LearnerError> {
        match self {
            Fitted::Glm(m) => m.predict(x),
            Fitted::Wknn(m) => m.predict(x),
            Fitted::Rf(m) => m.predict(x),
            Fitted::Brt(m) => m.predict(x),
            Fitted::Svm(m) => m.predict(x),
        }
    }

    pub fn warnings(&self) -> &[FitWarning] {
        match self {
            Fitted::Glm(m) => &m.warnings,
            Fitted::Wknn(m) => &m.warnings,
            Fitted::Rf(m) => &m.warnings,
            Fitted::Brt(m) => &m.warnings,
            Fitted::Svm(m) => &m.warnings,
        }
    }
}

/// Trains one learner on a design matrix.
pub fn fit<F: Scalar>(
    kind: LearnerKind,
    x: &DesignMatrix<F>,
    y: &[u8],
    setting: &ParamSetting,
    seed: u64,
) -> Result<Fitted<F>, LearnerError> {
    if x.n != y.len() {
        return Err(LearnerError::LabelMismatch {
            rows: x.n,
            labels: y.len(),
        });
    }
    match kind {
        LearnerKind::Glm => glm::fit_glm(x, y).map(Fitted::Glm),
        LearnerKind::Wknn => wknn::fit_wknn(x, y, setting).map(Fitted::Wknn),
        LearnerKind::Rf => rf::fit_rf(x, y, setting, seed).map(Fitted::Rf),
        LearnerKind::Brt => brt::fit_brt(x, y, setting).map(Fitted::Brt),
        LearnerKind::Svm => svm::fit_svm(x, y, setting).map(Fitted::Svm),
    }
}

/// Scores every setting on one train/test split: the tuner's inner loop.
///
/// Equivalent to `fit` + `predict` per setting. Random forests take a
/// shared-stream fast path: within one call all settings draw tree `t` from
/// the same derived stream, so forests that share `mtry` are prefixes of a
/// common tree sequence and are grown once.
pub fn evaluate_settings<F: Scalar>(
    kind: LearnerKind,
    x_train: &DesignMatrix<F>,
    y_train: &[u8],
    x_test: &DesignMatrix<F>,
    settings: &[ParamSetting],
    seed: u64,
) -> Vec<Result<Vec<F>, LearnerError>> {
    if kind == LearnerKind::Rf {
        return rf::evaluate_rf_settings(x_train, y_train, x_test, settings, seed);
    }
    settings
        .iter()
        .map(|setting| fit(kind, x_train, y_train, setting, seed)?.predict(x_test))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learner_names_round_trip() {
        for kind in LearnerKind::ALL {
            assert_eq!(kind.to_string().parse::<LearnerKind>().unwrap(), kind);
        }
    }

    #[test]
    fn defaults_match_reference_settings() {
        let svm = default_setting(LearnerKind::Svm, 21);
        assert_eq!(svm.0.get("c"), Some(&ParamValue::Real(1.0)));
        assert_eq!(svm.0.get("sigma"), Some(&ParamValue::Real(1.0)));
        assert!(default_setting(LearnerKind::Glm, 21).is_empty());
        // p = 21 -> floor(sqrt(21)) = 4
        let rf = default_setting(LearnerKind::Rf, 21);
        assert_eq!(rf.0.get("mtry"), Some(&ParamValue::Int(4)));
        assert_eq!(rf.0.get("num_trees"), Some(&ParamValue::Int(500)));
        let wknn = default_setting(LearnerKind::Wknn, 21);
        assert_eq!(wknn.0.get("k"), Some(&ParamValue::Int(7)));
        assert_eq!(wknn.0.get("kernel"), Some(&ParamValue::Cat("optimal".into())));
    }

    #[test]
    fn settings_serialize_with_stable_key_order() {
        let s = default_setting(LearnerKind::Brt, 4);
        assert_eq!(
            s.to_json(),
            r#"{"interaction_depth":1,"n_tree":100,"shrinkage":0.1}"#
        );
        let back: ParamSetting = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }
}
