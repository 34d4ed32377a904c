use crate::error::{Error, Result};

/// Ordered list of nonnegative observation pairs `(x1, x2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateDataset {
    points: Vec<[f64; 2]>,
}

impl BivariateDataset {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if let Some((i, p)) = points
            .iter()
            .enumerate()
            .find(|(_, p)| !(p[0] >= 0.0 && p[1] >= 0.0 && p[0].is_finite() && p[1].is_finite()))
        {
            return Err(Error::Domain(format!(
                "observation {i} = ({}, {}) is not a finite nonnegative pair",
                p[0], p[1]
            )));
        }
        Ok(BivariateDataset { points })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Natural log of both coordinates, keeping only pairs whose logs both
    /// exceed `lower`. Non-positive raw values are dropped.
    pub fn log_transformed(&self, lower: f64) -> Result<Self> {
        let points = self
            .points
            .iter()
            .filter(|p| p[0] > 0.0 && p[1] > 0.0)
            .map(|p| [p[0].ln(), p[1].ln()])
            .filter(|p| p[0] > lower && p[1] > lower)
            .collect();
        BivariateDataset::new(points)
    }

    pub fn mean(&self, coord: usize) -> f64 {
        self.points.iter().map(|p| p[coord]).sum::<f64>() / self.len() as f64
    }

    /// Sample Pearson correlation (population normalisation).
    pub fn pearson(&self) -> f64 {
        let (m1, m2) = (self.mean(0), self.mean(1));
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for p in &self.points {
            let (dx, dy) = (p[0] - m1, p[1] - m2);
            sxy += dx * dy;
            sxx += dx * dx;
            syy += dy * dy;
        }
        sxy / (sxx * syy).sqrt()
    }
}
