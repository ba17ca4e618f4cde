use std::fmt;
use std::sync::Arc;

use super::{compensated_sum, CostFunction, DiscreteCoupling, MeasureError, Point, QuadratureMeasure};

type WeightFn = dyn Fn(&Point) -> f64 + Send + Sync;
type MapFn = dyn Fn(&Point) -> Point + Send + Sync;

/// One term w(x)·δ_{T(x)} of a transport kernel.
#[derive(Clone)]
pub struct KernelBranch {
    weight: Arc<WeightFn>,
    map: Arc<MapFn>,
}

impl KernelBranch {
    pub fn new<W, T>(weight: W, map: T) -> Self
    where
        W: Fn(&Point) -> f64 + Send + Sync + 'static,
        T: Fn(&Point) -> Point + Send + Sync + 'static,
    {
        KernelBranch { weight: Arc::new(weight), map: Arc::new(map) }
    }

    /// Branch with a weight that does not depend on x.
    pub fn constant<T>(weight: f64, map: T) -> Self
    where
        T: Fn(&Point) -> Point + Send + Sync + 'static,
    {
        Self::new(move |_| weight, map)
    }

    #[inline]
    pub fn weight(&self, x: &Point) -> f64 {
        (self.weight)(x)
    }

    #[inline]
    pub fn apply(&self, x: &Point) -> Point {
        (self.map)(x)
    }
}

impl fmt::Debug for KernelBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("KernelBranch")
    }
}

/// A coupling μ(dx) Σ_k w_k(x) δ_{T_k(x)}(dy) with μ given on a quadrature
/// grid.
#[derive(Clone, Debug)]
pub struct KernelCoupling {
    marginal: QuadratureMeasure,
    branches: Vec<KernelBranch>,
    martingale: bool,
}

impl KernelCoupling {
    pub fn new(marginal: QuadratureMeasure, branches: Vec<KernelBranch>, martingale: bool) -> Self {
        KernelCoupling { marginal, branches, martingale }
    }

    pub fn marginal(&self) -> &QuadratureMeasure {
        &self.marginal
    }

    pub fn branches(&self) -> &[KernelBranch] {
        &self.branches
    }

    pub fn is_martingale(&self) -> bool {
        self.martingale
    }

    pub fn dim(&self) -> usize {
        self.marginal.dim()
    }

    /// Kernel weights must sum to one within 1e-12 at every grid point.
    pub fn check_weights(&self) -> Result<(), MeasureError> {
        for x in self.marginal.grid().points() {
            let sum = compensated_sum(self.branches.iter().map(|b| b.weight(x)));
            if (sum - 1.0).abs() > 1e-12 || self.branches.iter().any(|b| b.weight(x) < 0.0) {
                return Err(MeasureError::KernelWeights { point: *x, sum });
            }
        }
        Ok(())
    }

    /// Largest per-coordinate |Σ_k w_k(x) T_k(x) − x| over the grid.
    pub fn martingale_defect(&self) -> (f64, Point) {
        let mut worst = (0.0, Point::origin(self.dim()));
        for x in self.marginal.grid().points() {
            for k in 0..x.dim() {
                let bary = compensated_sum(self.branches.iter().map(|b| b.weight(x) * b.apply(x).coord(k)));
                let err = (bary - x.coord(k)).abs();
                if err > worst.0 {
                    worst = (err, *x);
                }
            }
        }
        worst
    }

    pub fn check_martingale(&self, tol: f64) -> Result<(), MeasureError> {
        let (error, point) = self.martingale_defect();
        if error > tol {
            return Err(MeasureError::KernelNotMartingale { point, error });
        }
        Ok(())
    }

    /// Realises the coupling on the grid: atoms (x, T_k(x)) with weight
    /// μ(x)·w_k(x).
    pub fn discretise(&self) -> Result<DiscreteCoupling, MeasureError> {
        self.check_weights()?;
        if self.martingale {
            self.check_martingale(1e-9)?;
        }
        let atoms = self.marginal.grid().atoms().iter().flat_map(|a| {
            self.branches.iter().map(move |b| (a.point, b.apply(&a.point), a.weight * b.weight(&a.point)))
        });
        DiscreteCoupling::new(self.dim(), atoms)
    }

    /// E[c(X, Y)] under the coupling, by quadrature.
    pub fn expected_cost(&self, cost: &CostFunction) -> f64 {
        compensated_sum(self.marginal.grid().atoms().iter().flat_map(|a| {
            self.branches
                .iter()
                .map(move |b| a.weight * b.weight(&a.point) * cost.evaluate(&a.point, &b.apply(&a.point)))
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::DiscreteMeasure;

    fn single_node() -> QuadratureMeasure {
        QuadratureMeasure::explicit(DiscreteMeasure::dirac(Point::scalar(0.0)))
    }

    #[test]
    fn single_node_split() {
        let k = KernelCoupling::new(
            single_node(),
            vec![
                KernelBranch::constant(0.5, |x| Point::scalar(x.coord(0) - 1.0)),
                KernelBranch::constant(0.5, |x| Point::scalar(x.coord(0) + 1.0)),
            ],
            true,
        );
        let pi = k.discretise().unwrap();
        let expected = DiscreteCoupling::new(
            1,
            [
                (Point::scalar(0.0), Point::scalar(-1.0), 0.5),
                (Point::scalar(0.0), Point::scalar(1.0), 0.5),
            ],
        )
        .unwrap();
        assert_eq!(pi, expected);
    }

    #[test]
    fn rejects_bad_weights() {
        let k = KernelCoupling::new(
            single_node(),
            vec![KernelBranch::constant(0.4, |x| *x), KernelBranch::constant(0.5, |x| *x)],
            false,
        );
        assert!(matches!(k.discretise(), Err(MeasureError::KernelWeights { .. })));
    }

    #[test]
    fn rejects_false_martingale_flag() {
        let k = KernelCoupling::new(
            single_node(),
            vec![KernelBranch::constant(1.0, |x| Point::scalar(x.coord(0) + 0.1))],
            true,
        );
        assert!(matches!(k.discretise(), Err(MeasureError::KernelNotMartingale { .. })));
    }
}
