//! Finitely supported measures and couplings on ℝ^d (d ≤ 3), plus the
//! partitions, quadrature grids and transport kernels built on top of them.

mod cost;
mod json;
mod kernel;
mod partition;
mod quadrature;

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use thiserror::Error;

pub use cost::{CostFunction, CostParseError};
pub use kernel::{KernelBranch, KernelCoupling};
pub use partition::{BoxBounds, BoxCell, Cell, Partition, PartitionError};
pub(crate) use partition::nearest_site;
pub use quadrature::{QuadratureMeasure, QuadratureSource, DEFAULT_TRUNCATION_SD};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 3;

/// Points closer than this in max-norm are the same atom.
pub const MERGE_TOL: f64 = 1e-12;

/// Allowed deviation of the total mass from one.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("dimension {0} is outside 1..=3")]
    BadDimension(usize),
    #[error("expected dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite coordinate or weight")]
    NonFinite,
    #[error("negative weight {0}")]
    NegativeWeight(f64),
    #[error("total mass {0} differs from 1")]
    MassNotUnit(f64),
    #[error("measure has no atoms")]
    Empty,
    #[error("kernel weights sum to {sum} at grid point {point}")]
    KernelWeights { point: Point, sum: f64 },
    #[error("kernel is not a martingale at {point}: barycentre error {error:e}")]
    KernelNotMartingale { point: Point, error: f64 },
}

/// A point of ℝ^d with 1 ≤ d ≤ 3.
#[derive(Clone, Copy, PartialEq)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: u8,
}

impl Point {
    pub fn new(coords: &[f64]) -> Result<Self, MeasureError> {
        let dim = coords.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(MeasureError::BadDimension(dim));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(MeasureError::NonFinite);
        }
        let mut buf = [0.0; MAX_DIM];
        buf[..dim].copy_from_slice(coords);
        Ok(Point { coords: buf, dim: dim as u8 })
    }

    /// A point of the real line. Panics on non-finite input.
    pub fn scalar(x: f64) -> Self {
        assert!(x.is_finite(), "non-finite coordinate");
        Point { coords: [x, 0.0, 0.0], dim: 1 }
    }

    /// A point of the plane. Panics on non-finite input.
    pub fn planar(x: f64, y: f64) -> Self {
        assert!(x.is_finite() && y.is_finite(), "non-finite coordinate");
        Point { coords: [x, y, 0.0], dim: 2 }
    }

    pub fn origin(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim));
        Point { coords: [0.0; MAX_DIM], dim: dim as u8 }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim()]
    }

    #[inline]
    pub fn coord(&self, k: usize) -> f64 {
        self.coords()[k]
    }

    /// Euclidean distance.
    pub fn dist(&self, other: &Point) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_dist(&self, other: &Point) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Lexicographic order on coordinates.
    pub fn lex_cmp(&self, other: &Point) -> Ordering {
        for (a, b) in self.coords().iter().zip(other.coords()) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.dim.cmp(&other.dim)
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl Add for Point {
    type Output = Point;
    fn add(mut self, rhs: Point) -> Point {
        debug_assert_eq!(self.dim, rhs.dim);
        for k in 0..self.dim() {
            self.coords[k] += rhs.coords[k];
        }
        self
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(mut self, rhs: Point) -> Point {
        debug_assert_eq!(self.dim, rhs.dim);
        for k in 0..self.dim() {
            self.coords[k] -= rhs.coords[k];
        }
        self
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(mut self, rhs: f64) -> Point {
        for k in 0..self.dim() {
            self.coords[k] *= rhs;
        }
        self
    }
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Running weighted sum of points, accumulated in insertion order.
#[derive(Clone, Copy, Debug)]
pub(crate) struct WeightedSum {
    pub mass: f64,
    pub moment: [f64; MAX_DIM],
}

impl WeightedSum {
    pub const ZERO: WeightedSum = WeightedSum { mass: 0.0, moment: [0.0; MAX_DIM] };

    #[inline]
    pub fn add(&mut self, p: &Point, w: f64) {
        self.mass += w;
        for k in 0..p.dim() {
            self.moment[k] += w * p.coords[k];
        }
    }

    /// Conditional barycentre; `None` for zero mass.
    pub fn barycentre(&self, dim: usize) -> Option<Point> {
        if self.mass <= 0.0 {
            return None;
        }
        let mut coords = [0.0; MAX_DIM];
        for k in 0..dim {
            coords[k] = self.moment[k] / self.mass;
        }
        Some(Point { coords, dim: dim as u8 })
    }
}

trait MergeKey: Copy {
    fn lex(&self, other: &Self) -> Ordering;
    fn lead(&self) -> f64;
    fn close(&self, other: &Self) -> bool;
}

impl MergeKey for Point {
    fn lex(&self, other: &Self) -> Ordering {
        self.lex_cmp(other)
    }
    fn lead(&self) -> f64 {
        self.coords[0]
    }
    fn close(&self, other: &Self) -> bool {
        self.max_dist(other) <= MERGE_TOL
    }
}

impl MergeKey for (Point, Point) {
    fn lex(&self, other: &Self) -> Ordering {
        self.0.lex_cmp(&other.0).then_with(|| self.1.lex_cmp(&other.1))
    }
    fn lead(&self) -> f64 {
        self.0.coords[0]
    }
    fn close(&self, other: &Self) -> bool {
        self.0.max_dist(&other.0) <= MERGE_TOL && self.1.max_dist(&other.1) <= MERGE_TOL
    }
}

/// Sorts lexicographically, drops zero weights and merges keys closer than
/// `MERGE_TOL`. The first key of a cluster (in sort order) represents it.
fn merge_sorted<K: MergeKey>(mut items: Vec<(K, f64)>) -> Vec<(K, f64)> {
    items.retain(|(_, w)| *w > 0.0);
    items.sort_by(|a, b| a.0.lex(&b.0));
    let mut out: Vec<(K, f64)> = Vec::with_capacity(items.len());
    for (key, w) in items {
        let mut merged = false;
        for kept in out.iter_mut().rev() {
            if key.lead() - kept.0.lead() > MERGE_TOL {
                break;
            }
            if kept.0.close(&key) {
                kept.1 += w;
                merged = true;
                break;
            }
        }
        if !merged {
            out.push((key, w));
        }
    }
    out
}

fn check_mass(weights: impl IntoIterator<Item = f64>) -> Result<(), MeasureError> {
    let total = compensated_sum(weights);
    if (total - 1.0).abs() > MASS_TOL {
        return Err(MeasureError::MassNotUnit(total));
    }
    Ok(())
}

fn check_weight(w: f64) -> Result<(), MeasureError> {
    if !w.is_finite() {
        return Err(MeasureError::NonFinite);
    }
    if w < 0.0 {
        return Err(MeasureError::NegativeWeight(w));
    }
    Ok(())
}

fn check_dim(dim: usize) -> Result<(), MeasureError> {
    if dim == 0 || dim > MAX_DIM {
        return Err(MeasureError::BadDimension(dim));
    }
    Ok(())
}

fn check_point_dim(dim: usize, p: &Point) -> Result<(), MeasureError> {
    if p.dim() != dim {
        return Err(MeasureError::DimensionMismatch { expected: dim, found: p.dim() });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub point: Point,
    pub weight: f64,
}

/// A probability measure with finite support. Atoms are kept sorted
/// lexicographically, with strictly positive weights and pairwise distinct
/// points.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn new<I>(dim: usize, atoms: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = (Point, f64)>,
    {
        let m = Self::build(dim, atoms)?;
        check_mass(m.atoms.iter().map(|a| a.weight))?;
        Ok(m)
    }

    /// Same as [`DiscreteMeasure::new`] but rescales the weights to unit
    /// mass. Used when reading back LP solutions.
    pub fn normalised<I>(dim: usize, atoms: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = (Point, f64)>,
    {
        let mut m = Self::build(dim, atoms)?;
        let total = compensated_sum(m.atoms.iter().map(|a| a.weight));
        if total <= 0.0 {
            return Err(MeasureError::Empty);
        }
        for a in &mut m.atoms {
            a.weight /= total;
        }
        Ok(m)
    }

    fn build<I>(dim: usize, atoms: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = (Point, f64)>,
    {
        check_dim(dim)?;
        let mut raw = Vec::new();
        for (p, w) in atoms {
            check_point_dim(dim, &p)?;
            check_weight(w)?;
            raw.push((p, w));
        }
        let merged = merge_sorted(raw);
        if merged.is_empty() {
            return Err(MeasureError::Empty);
        }
        Ok(DiscreteMeasure {
            dim,
            atoms: merged.into_iter().map(|(point, weight)| Atom { point, weight }).collect(),
        })
    }

    pub fn dirac(point: Point) -> Self {
        DiscreteMeasure { dim: point.dim(), atoms: vec![Atom { point, weight: 1.0 }] }
    }

    /// Equal weights on the given points (duplicates merge).
    pub fn uniform(points: &[Point]) -> Result<Self, MeasureError> {
        let first = points.first().ok_or(MeasureError::Empty)?;
        let w = 1.0 / points.len() as f64;
        Self::new(first.dim(), points.iter().map(|p| (*p, w)))
    }

    /// Convenience constructor for measures on the line.
    pub fn on_line(atoms: &[(f64, f64)]) -> Result<Self, MeasureError> {
        let mut pts = Vec::with_capacity(atoms.len());
        for &(x, w) in atoms {
            pts.push((Point::new(&[x])?, w));
        }
        Self::new(1, pts)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &Point> + '_ {
        self.atoms.iter().map(|a| &a.point)
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.weight))
    }

    /// Mean of the measure, Σ w_i z_i.
    pub fn barycentre(&self) -> Point {
        let mut acc = WeightedSum::ZERO;
        for a in &self.atoms {
            acc.add(&a.point, a.weight);
        }
        let mut p = Point::origin(self.dim);
        for k in 0..self.dim {
            p.coords[k] = acc.moment[k];
        }
        p
    }

    /// ∫ f dμ.
    pub fn integrate<F: Fn(&Point) -> f64>(&self, f: F) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.weight * f(&a.point)))
    }

    /// Atom-for-atom comparison: same support size, points within `tol` in
    /// max-norm and weights within `tol`.
    pub fn approx_eq(&self, other: &DiscreteMeasure, tol: f64) -> bool {
        self.dim == other.dim
            && self.len() == other.len()
            && self.atoms.iter().zip(&other.atoms).all(|(a, b)| {
                a.point.max_dist(&b.point) <= tol && (a.weight - b.weight).abs() <= tol
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingAtom {
    pub x: Point,
    pub y: Point,
    pub weight: f64,
}

/// A probability measure with finite support on ℝ^d × ℝ^d.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteCoupling {
    dim: usize,
    atoms: Vec<CouplingAtom>,
}

impl DiscreteCoupling {
    pub fn new<I>(dim: usize, atoms: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = (Point, Point, f64)>,
    {
        let c = Self::build(dim, atoms)?;
        check_mass(c.atoms.iter().map(|a| a.weight))?;
        Ok(c)
    }

    /// Rescales the weights to unit mass after merging.
    pub fn normalised<I>(dim: usize, atoms: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = (Point, Point, f64)>,
    {
        let mut c = Self::build(dim, atoms)?;
        let total = compensated_sum(c.atoms.iter().map(|a| a.weight));
        if total <= 0.0 {
            return Err(MeasureError::Empty);
        }
        for a in &mut c.atoms {
            a.weight /= total;
        }
        Ok(c)
    }

    fn build<I>(dim: usize, atoms: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = (Point, Point, f64)>,
    {
        check_dim(dim)?;
        let mut raw = Vec::new();
        for (x, y, w) in atoms {
            check_point_dim(dim, &x)?;
            check_point_dim(dim, &y)?;
            check_weight(w)?;
            raw.push(((x, y), w));
        }
        let merged = merge_sorted(raw);
        if merged.is_empty() {
            return Err(MeasureError::Empty);
        }
        Ok(DiscreteCoupling {
            dim,
            atoms: merged
                .into_iter()
                .map(|((x, y), weight)| CouplingAtom { x, y, weight })
                .collect(),
        })
    }

    /// The independent coupling μ ⊗ ν.
    pub fn product(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Self, MeasureError> {
        if mu.dim() != nu.dim() {
            return Err(MeasureError::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
        }
        let atoms = mu.atoms().iter().flat_map(|a| {
            nu.atoms().iter().map(move |b| (a.point, b.point, a.weight * b.weight))
        });
        Self::new(mu.dim(), atoms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[CouplingAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn first_marginal(&self) -> DiscreteMeasure {
        DiscreteMeasure::build(self.dim, self.atoms.iter().map(|a| (a.x, a.weight)))
            .expect("coupling atoms are valid")
    }

    pub fn second_marginal(&self) -> DiscreteMeasure {
        DiscreteMeasure::build(self.dim, self.atoms.iter().map(|a| (a.y, a.weight)))
            .expect("coupling atoms are valid")
    }

    /// Both marginals; atoms sharing a projected point are summed.
    pub fn marginals(&self) -> (DiscreteMeasure, DiscreteMeasure) {
        (self.first_marginal(), self.second_marginal())
    }

    /// ∫ c(x, y) dπ.
    pub fn expected_cost(&self, cost: &CostFunction) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.weight * cost.evaluate(&a.x, &a.y)))
    }

    /// (∫ ‖x − y‖^p dπ)^{1/p}, the L^p distance between the coordinates.
    pub fn lp_displacement(&self, p: f64) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.weight * a.x.dist(&a.y).powf(p)))
            .powf(1.0 / p)
    }
}
