//! Saturating stand-in for per-class model accuracy.

use serde::{Deserialize, Serialize};

use crate::domain::{TaskCategory, TaskValues};
use crate::error::ValidationError;

/// `accuracy[c] = max[c] * (1 - exp(-kappa * mass[c]))`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccuracyProxy {
    pub kappa: f64,
    pub max: TaskValues,
}

impl Default for AccuracyProxy {
    fn default() -> Self {
        Self {
            kappa: 0.01,
            max: TaskValues::new(0.9, 0.88, 0.9, 0.86),
        }
    }
}

impl AccuracyProxy {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(ValidationError::new("kappa", "must be positive"));
        }
        for (c, m) in self.max.iter() {
            if !(m.is_finite() && (0.0..=1.0).contains(&m)) {
                return Err(ValidationError::new(format!("max.{c}"), "must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn accuracy_of(&self, category: TaskCategory, mass: f64) -> f64 {
        self.max.get(category) * (1.0 - (-self.kappa * mass.max(0.0)).exp())
    }

    pub fn accuracy(&self, class_mass: &TaskValues) -> TaskValues {
        TaskValues::from_fn(|c| self.accuracy_of(c, class_mass.get(c)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_mass_and_saturation() {
        let p = AccuracyProxy::default();
        assert_eq!(p.accuracy_of(TaskCategory::SmartHome, 0.0), 0.0);
        let big = p.accuracy_of(TaskCategory::SmartHome, 1e6);
        assert!((big - 0.88).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn more_mass_never_hurts(m in 0.0..1e4f64, extra in 0.0..1e4f64) {
            let p = AccuracyProxy::default();
            for c in TaskCategory::ALL {
                prop_assert!(p.accuracy_of(c, m + extra) >= p.accuracy_of(c, m));
                prop_assert!(p.accuracy_of(c, 2.0 * m) >= p.accuracy_of(c, m));
            }
        }
    }
}
