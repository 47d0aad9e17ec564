use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Uniform periodic grid on `[x_min, x_max)`; `x_max` is identified with `x_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, nx: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(invalid(
                "grid",
                format!("need x_min < x_max, got [{x_min}, {x_max}]"),
            ));
        }
        if nx < 4 {
            return Err(invalid(
                "nx",
                format!("need at least 4 grid points, got {nx}"),
            ));
        }
        Ok(Self { x_min, x_max, nx })
    }

    /// Grid whose spacing is `dx`; the domain length must be a whole number of cells.
    pub fn with_spacing(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(invalid("dx", "spacing must be positive"));
        }
        let cells = (x_max - x_min) / dx;
        let nx = cells.round();
        if (cells - nx).abs() > 1e-6 * cells.max(1.0) {
            return Err(invalid(
                "dx",
                format!(
                    "domain length {} is not a multiple of dx = {dx}",
                    x_max - x_min
                ),
            ));
        }
        Self::new(x_min, x_max, nx as usize)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.point(j)).collect()
    }

    #[inline]
    pub fn left(&self, j: usize) -> usize {
        if j == 0 {
            self.nx - 1
        } else {
            j - 1
        }
    }

    #[inline]
    pub fn right(&self, j: usize) -> usize {
        if j + 1 == self.nx {
            0
        } else {
            j + 1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_wraparound() {
        let g = GridSpec::with_spacing(-3.5, 3.5, 1.0 / 50.0).unwrap();
        assert_eq!(g.nx, 350);
        assert!((g.dx() - 0.02).abs() < 1e-15);
        assert_eq!(g.left(0), 349);
        assert_eq!(g.right(349), 0);
        assert_eq!(g.point(0), -3.5);
        assert!(GridSpec::with_spacing(-1.0, 1.0, 0.3).is_err());
        assert!(GridSpec::new(0.0, 1.0, 3).is_err());
        assert!(GridSpec::new(1.0, 1.0, 10).is_err());
    }
}
