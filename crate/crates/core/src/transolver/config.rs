use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Architecture hyper-parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransolverConfig {
    pub layers: usize,
    pub slices: usize,
    pub channels: usize,
    pub heads: usize,
    /// Per-point features; grid nodes carry `(x, y, k)`.
    pub input_features: usize,
}

impl Default for TransolverConfig {
    fn default() -> Self {
        Self { layers: 2, slices: 8, channels: 64, heads: 4, input_features: 3 }
    }
}

impl TransolverConfig {
    pub fn new(layers: usize, slices: usize, channels: usize, heads: usize) -> Result<Self> {
        let c = Self { layers, slices, channels, heads, input_features: 3 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.layers == 0 {
            return bad("at least one layer is required".into());
        }
        if self.slices == 0 {
            return bad("at least one slice is required".into());
        }
        if self.channels == 0 || self.heads == 0 {
            return bad("channels and heads must be positive".into());
        }
        if !self.channels.is_multiple_of(self.heads) {
            return bad(format!("channels {} not divisible by heads {}", self.channels, self.heads));
        }
        if self.input_features == 0 {
            return bad("input_features must be positive".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.channels / self.heads
    }

    /// Number of scalar parameters of the base model (no adapters).
    pub fn parameter_count(&self) -> usize {
        let (f, c, s) = (self.input_features, self.channels, self.slices);
        let encoder = f * c + c + c * c + c + 2 * c;
        let layer = 2 * c // ln1
            + c * c + c // U
            + c * s + s // M
            + 3 * c * c // Q, K, V
            + c * c + c // output projection
            + 2 * c // ln2
            + 2 * (c * c + c); // feed-forward
        let decoder = 2 * c + c * c + c + c + 1;
        encoder + self.layers * layer + decoder
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(TransolverConfig::new(2, 8, 32, 4).is_ok());
        assert!(TransolverConfig::new(2, 8, 30, 4).is_err());
        assert!(TransolverConfig::new(0, 8, 32, 4).is_err());
        assert!(TransolverConfig::new(2, 0, 32, 4).is_err());
    }

    #[test]
    fn count_by_hand_for_tiny_model() {
        // F=3, C=2, S=1, L=1: encoder 6+2+4+2+4, layer 4+6+3+12+6+4+12, decoder 4+6+2+1
        let c = TransolverConfig { layers: 1, slices: 1, channels: 2, heads: 1, input_features: 3 };
        assert_eq!(c.parameter_count(), 18 + 47 + 13);
    }
}
