use serde::{Deserialize, Serialize};

use crate::error::{AlexError, Result};

/// How the number of clusters is chosen on a full rebuild.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum KMode {
    Fixed { k: usize },
    Auto { k_min: usize, k_max: usize },
}

/// Engine parameters. Serialized into every index so retrieval is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Weight of the cohesion term in the diagnostic loss.
    pub lambda: f64,
    /// Redundancy penalty in the question-set quality score.
    pub gamma: f64,
    /// Temperature of the contrastive diagnostic loss.
    pub tau: f64,
    /// Literal-evidence weight in adjudication.
    pub alpha: f64,
    /// Inferential-evidence weight in adjudication.
    pub beta: f64,
    /// z-score threshold for cluster filtering. May be `-inf` to admit every cluster.
    #[serde(with = "extended_f64")]
    pub zeta: f64,
    /// Maximum number of clusters scored per query.
    pub m_cap: usize,
    /// Hypothetical questions per edit.
    pub n_h: usize,
    /// Per-cluster silhouette floor that triggers a partial recluster.
    pub theta_s: f64,
    /// Relative global-silhouette drop from the peak that triggers a full rebuild.
    pub drop_ratio: f64,
    pub k_mode: KMode,
    pub seed: u64,
    /// Silhouette weight in the K-selection objective.
    pub k_weight_silhouette: f64,
    /// Elbow-gap weight in the K-selection objective.
    pub k_weight_elbow: f64,
    pub kmeans_restarts: usize,
    pub lloyd_max_iter: usize,
    pub lloyd_tol: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            lambda: 0.4,
            gamma: 0.3,
            tau: 0.07,
            alpha: 0.5,
            beta: 0.5,
            zeta: 1.0,
            m_cap: 3,
            n_h: 3,
            theta_s: 0.5,
            drop_ratio: 0.2,
            k_mode: KMode::Fixed { k: 12 },
            seed: 0,
            k_weight_silhouette: 1.0,
            k_weight_elbow: 0.5,
            kmeans_restarts: 5,
            lloyd_max_iter: 100,
            lloyd_tol: 1e-6,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(AlexError::InvalidArgument(msg.to_string()));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if self.gamma < 0.0 {
            return bad("gamma must be non-negative");
        }
        if self.tau <= 0.0 || self.tau.is_nan() {
            return bad("tau must be positive");
        }
        if self.zeta.is_nan() {
            return bad("zeta must not be NaN");
        }
        if self.m_cap == 0 {
            return bad("m_cap must be at least 1");
        }
        if self.n_h == 0 {
            return bad("n_h must be at least 1");
        }
        if self.kmeans_restarts == 0 || self.lloyd_max_iter == 0 {
            return bad("restarts and max_iter must be at least 1");
        }
        match self.k_mode {
            KMode::Fixed { k: 0 } => bad("fixed K must be at least 1"),
            KMode::Auto { k_min, k_max } if k_min < 2 || k_min > k_max => {
                bad("auto K range must satisfy 2 <= k_min <= k_max")
            }
            _ => Ok(()),
        }
    }
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"` and `"nan"`
/// so JSON can carry them.
pub(crate) mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("not a float: {other}"))),
            },
        }
    }
}
