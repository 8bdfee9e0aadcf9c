use serde::{Deserialize, Serialize};

use super::{FeatureError, SessionMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizeMode {
    #[default]
    MinMax01,
    None,
}

/// Per-feature min/max scaling fitted on training sessions. Only non-padding
/// rows are used for fitting and only they are rescaled, so padding stays
/// exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mode: NormalizeMode,
    min: Vec<f64>,
    max: Vec<f64>,
    fitted: bool,
}

impl Normalizer {
    pub fn unfitted(mode: NormalizeMode) -> Self {
        Self {
            mode,
            min: Vec::new(),
            max: Vec::new(),
            fitted: false,
        }
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    pub fn ranges(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.min.iter().copied().zip(self.max.iter().copied())
    }

    fn scale(&self, f: usize, x: f64) -> f64 {
        let (lo, hi) = (self.min[f], self.max[f]);
        if hi > lo {
            ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn apply(&self, m: &SessionMatrix) -> Result<SessionMatrix, FeatureError> {
        if !self.fitted {
            return Err(FeatureError::NotFitted);
        }
        if self.mode == NormalizeMode::None {
            return Ok(m.clone());
        }
        if m.feature_count() != self.min.len() {
            return Err(FeatureError::SchemaMismatch(format!(
                "normalizer fitted on {} features, matrix has {}",
                self.min.len(),
                m.feature_count()
            )));
        }
        let mut out = m.clone();
        for t in 0..m.valid_rows() {
            for (f, v) in out.values.row_mut(t).iter_mut().enumerate() {
                *v = self.scale(f, *v);
            }
        }
        Ok(out)
    }

    pub fn apply_all(&self, data: &[SessionMatrix]) -> Result<Vec<SessionMatrix>, FeatureError> {
        data.iter().map(|m| self.apply(m)).collect()
    }
}

/// Fit on the training split only.
pub fn fit_normalizer(train: &[SessionMatrix], mode: NormalizeMode) -> Normalizer {
    let width = train.first().map_or(0, SessionMatrix::feature_count);
    let mut min = vec![f64::INFINITY; width];
    let mut max = vec![f64::NEG_INFINITY; width];
    for m in train {
        for t in 0..m.valid_rows() {
            for (f, &v) in m.values.row(t).iter().enumerate() {
                min[f] = min[f].min(v);
                max[f] = max[f].max(v);
            }
        }
    }
    for (lo, hi) in min.iter_mut().zip(max.iter_mut()) {
        if !lo.is_finite() || !hi.is_finite() {
            *lo = 0.0;
            *hi = 0.0;
        }
    }
    Normalizer {
        mode,
        min,
        max,
        fitted: true,
    }
}
