use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform one-sided frequency grid `k·Δf`, `k = 0..N`, with `N` a power of
/// two and `f_max = N·Δf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    spacing: f64,
    points: usize,
}

impl FrequencyGrid {
    pub fn new(spacing: f64, points: usize) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "spacing must be positive, got {spacing}"
            )));
        }
        if points < 2 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "point count must be a power of two >= 2, got {points}"
            )));
        }
        Ok(Self { spacing, points })
    }

    /// Δf = 1 MHz, N = 2¹⁵ (f_max ≈ 32.8 GHz).
    pub fn default_solver() -> Self {
        Self {
            spacing: 1e6,
            points: 1 << 15,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn f_max(&self) -> f64 {
        self.points as f64 * self.spacing
    }

    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * self.spacing
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|k| self.frequency(k))
    }

    /// Nearest bin index to `f`, if it lies on the grid.
    pub fn bin(&self, f: f64) -> Option<usize> {
        let k = (f / self.spacing).round();
        if k >= 0.0 && (k as usize) < self.points {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Whether the pump at `f_dc` and all first-order idlers fit on the grid.
    pub fn covers_bias(&self, f_dc: f64) -> bool {
        2.0 * f_dc <= self.f_max()
    }

    /// Same frequency span with half the spacing.
    pub fn refined(&self) -> Self {
        Self {
            spacing: self.spacing / 2.0,
            points: self.points * 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(FrequencyGrid::new(1e6, 1000).is_err());
        assert!(FrequencyGrid::new(0.0, 1024).is_err());
        let g = FrequencyGrid::default_solver();
        assert!((g.f_max() - 32.768e9).abs() < 1.0);
        assert!(g.covers_bias(12.6e9));
        assert!(!g.covers_bias(17e9));
        assert_eq!(g.bin(12.0003e9), Some(12000));
        assert_eq!(g.bin(40e9), None);
    }
}
