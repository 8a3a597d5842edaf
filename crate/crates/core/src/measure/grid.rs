use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::C64;

/// Square phase-space window [−L, L]² split into `side × side` pixels.
///
/// Pixel `i` sits at row `i / side` and column `i % side`; columns run
/// along x = Re α and rows along p = Im α, both increasing, with pixel
/// centres at −L + (j + ½)·2L/side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub side: usize,
    pub extent: f64,
}

impl GridSpec {
    pub fn new(side: usize, extent: f64) -> Result<Self> {
        let g = Self { side, extent };
        g.validate()?;
        Ok(g)
    }

    /// Default window: L = 4 for large (lab-sized) grids, L = 3 otherwise.
    pub fn with_default_extent(side: usize) -> Result<Self> {
        Self::new(side, default_extent(side))
    }

    pub fn validate(&self) -> Result<()> {
        if self.side < 2 {
            return Err(Error::invalid(format!("grid side {} must be >= 2", self.side)));
        }
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(Error::invalid(format!("grid extent {} must be > 0", self.extent)));
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.side * self.side
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.side as f64
    }

    pub fn axis(&self, j: usize) -> f64 {
        -self.extent + (j as f64 + 0.5) * self.spacing()
    }

    /// (x, p) of pixel `index`.
    pub fn coords(&self, index: usize) -> (f64, f64) {
        (self.axis(index % self.side), self.axis(index / self.side))
    }

    pub fn alpha(&self, index: usize) -> C64 {
        let (x, p) = self.coords(index);
        C64::new(x, p)
    }

    /// Number of pixels kept for a sampling fraction.
    pub fn present_count(&self, fraction: f64) -> Result<usize> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::invalid(format!("pixel fraction {fraction} outside (0, 1]")));
        }
        let n = (fraction * self.pixels() as f64).round() as usize;
        if n == 0 {
            return Err(Error::invalid(format!(
                "fraction {fraction} selects no pixels of a {}x{} grid",
                self.side, self.side
            )));
        }
        Ok(n.min(self.pixels()))
    }
}

pub fn default_extent(side: usize) -> f64 {
    if side >= 64 {
        4.0
    } else {
        3.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centres_are_symmetric_and_uniform() {
        let g = GridSpec::new(32, 3.0).unwrap();
        assert!((g.axis(0) + g.axis(31)).abs() < 1e-15);
        for j in 1..32 {
            assert!((g.axis(j) - g.axis(j - 1) - g.spacing()).abs() < 1e-14);
        }
        let odd = GridSpec::new(81, 4.0).unwrap();
        assert_eq!(odd.coords(40 * 81 + 40), (0.0, 0.0));
    }

    #[test]
    fn present_counts() {
        let g = GridSpec::new(32, 3.0).unwrap();
        assert_eq!(g.present_count(1.0).unwrap(), 1024);
        assert_eq!(g.present_count(0.75).unwrap(), 768);
        assert_eq!(g.present_count(0.625).unwrap(), 640);
        assert_eq!(g.present_count(0.5).unwrap(), 512);
        let lab = GridSpec::new(81, 4.0).unwrap();
        assert_eq!(lab.present_count(0.05).unwrap(), 328);
        assert_eq!(lab.present_count(4900.0 / 6561.0).unwrap(), 4900);
        let dyn48 = GridSpec::new(48, 3.0).unwrap();
        assert_eq!(dyn48.present_count(0.75).unwrap(), 1728);
        assert!(g.present_count(0.0).is_err());
        assert!(g.present_count(1.5).is_err());
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec::new(1, 3.0).is_err());
        assert!(GridSpec::new(8, 0.0).is_err());
    }
}
