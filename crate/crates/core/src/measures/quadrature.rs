use statrs::distribution::{ContinuousCDF, Normal};

use super::{BoxBounds, DiscreteMeasure, MeasureError, Point};

/// Default Gaussian truncation radius, in standard deviations.
pub const DEFAULT_TRUNCATION_SD: f64 = 8.0;

/// Where a quadrature grid came from.
#[derive(Clone, Debug, PartialEq)]
pub enum QuadratureSource {
    /// Uniform law on a box, midpoint nodes, `nodes_per_axis` per axis.
    UniformBox { bounds: BoxBounds, nodes_per_axis: usize },
    /// N(mean, variance) truncated at `truncation_sd` standard deviations.
    Gaussian1D { mean: f64, variance: f64, truncation_sd: f64, nodes: usize },
    Explicit,
}

/// Discrete stand-in for a continuous law.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureMeasure {
    grid: DiscreteMeasure,
    source: QuadratureSource,
}

impl QuadratureMeasure {
    pub fn uniform_box(bounds: BoxBounds, nodes_per_axis: usize) -> Result<Self, MeasureError> {
        if nodes_per_axis == 0 {
            return Err(MeasureError::Empty);
        }
        let dim = bounds.dim();
        let m = nodes_per_axis;
        let axes: Vec<Vec<f64>> = (0..dim)
            .map(|k| midpoints(bounds.lower.coord(k), bounds.upper.coord(k), m))
            .collect();
        let total = m.pow(dim as u32);
        let w = 1.0 / total as f64;
        let mut atoms = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let coords: Vec<f64> = (0..dim).map(|k| axes[k][idx[k]]).collect();
            atoms.push((Point::new(&coords)?, w));
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < m {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(QuadratureMeasure {
            grid: DiscreteMeasure::new(dim, atoms)?,
            source: QuadratureSource::UniformBox { bounds, nodes_per_axis },
        })
    }

    pub fn gaussian_1d(mean: f64, variance: f64, nodes: usize) -> Result<Self, MeasureError> {
        Self::gaussian_1d_truncated(mean, variance, DEFAULT_TRUNCATION_SD, nodes)
    }

    pub fn gaussian_1d_truncated(
        mean: f64,
        variance: f64,
        truncation_sd: f64,
        nodes: usize,
    ) -> Result<Self, MeasureError> {
        if nodes == 0 {
            return Err(MeasureError::Empty);
        }
        if !(variance > 0.0 && variance.is_finite() && mean.is_finite() && truncation_sd > 0.0) {
            return Err(MeasureError::NonFinite);
        }
        let sd = variance.sqrt();
        let xs = midpoints(mean - truncation_sd * sd, mean + truncation_sd * sd, nodes);
        let raw: Vec<f64> = xs.iter().map(|x| (-(x - mean) * (x - mean) / (2.0 * variance)).exp()).collect();
        let total: f64 = super::compensated_sum(raw.iter().copied());
        let atoms: Vec<(Point, f64)> =
            xs.iter().zip(&raw).map(|(x, w)| (Point::scalar(*x), w / total)).collect();
        Ok(QuadratureMeasure {
            grid: DiscreteMeasure::normalised(1, atoms)?,
            source: QuadratureSource::Gaussian1D { mean, variance, truncation_sd, nodes },
        })
    }

    pub fn explicit(grid: DiscreteMeasure) -> Self {
        QuadratureMeasure { grid, source: QuadratureSource::Explicit }
    }

    pub fn grid(&self) -> &DiscreteMeasure {
        &self.grid
    }

    pub fn source(&self) -> &QuadratureSource {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Quantile function of the underlying continuous law on the line, when
    /// it is known in closed form. Ignores the Gaussian truncation.
    pub fn exact_quantile(&self, p: f64) -> Option<f64> {
        match &self.source {
            QuadratureSource::UniformBox { bounds, .. } if bounds.dim() == 1 => {
                let (a, b) = (bounds.lower.coord(0), bounds.upper.coord(0));
                Some(a + (b - a) * p)
            }
            QuadratureSource::Gaussian1D { mean, variance, .. } => {
                let n = Normal::new(*mean, variance.sqrt()).ok()?;
                Some(n.inverse_cdf(p))
            }
            _ => None,
        }
    }

    /// (1 / (q − p)) ∫_p^q F^{-1}(u) du for the underlying continuous law on
    /// the line, when known in closed form.
    pub fn exact_slab_mean(&self, p: f64, q: f64) -> Option<f64> {
        debug_assert!(p < q);
        match &self.source {
            QuadratureSource::UniformBox { bounds, .. } if bounds.dim() == 1 => {
                let (a, b) = (bounds.lower.coord(0), bounds.upper.coord(0));
                Some(a + (b - a) * 0.5 * (p + q))
            }
            QuadratureSource::Gaussian1D { mean, variance, .. } => {
                // ∫ Φ^{-1} over [p, q] equals φ(Φ^{-1}(p)) − φ(Φ^{-1}(q)).
                let std = Normal::new(0.0, 1.0).ok()?;
                let density_at = |u: f64| {
                    if u <= 0.0 || u >= 1.0 {
                        0.0
                    } else {
                        let z = std.inverse_cdf(u);
                        (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
                    }
                };
                Some(mean + variance.sqrt() * (density_at(p) - density_at(q)) / (q - p))
            }
            _ => None,
        }
    }
}

fn midpoints(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    let h = (hi - lo) / m as f64;
    (0..m).map(|i| lo + (i as f64 + 0.5) * h).collect()
}
