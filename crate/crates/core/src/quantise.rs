//! Quantisers that keep the convex order, and the partitions they run on.
//!
//! For a martingale coupling π and partitions Π1, Π2 the barycentric
//! quantiser sends every product cell P1i × P2j to the point
//! (x_i, y_ij), where x_i is the μ-barycentre of P1i and y_ij is the
//! barycentre of the y-coordinate of π restricted to P1i × P2j. Because
//! E[Y | X ∈ P1i] = x_i, the quantised coupling is again a martingale.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::measures::{
    nearest_site, BoxBounds, Cell, DiscreteCoupling, DiscreteMeasure, MeasureError, Partition, PartitionError,
    Point, QuadratureMeasure, WeightedSum,
};
use crate::mot;
use crate::par::{self, Execution};

/// Slack used when comparing cumulative masses with quantile levels.
pub const QUANTILE_LEVEL_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantiseError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("expected a measure on the line, got dimension {0}")]
    NotOneDimensional(usize),
    #[error("quantisation order must be at least 1")]
    ZeroOrder,
    #[error("input coupling is not a martingale (barycentre defect {0:e})")]
    NotMartingale(f64),
    #[error("level {level} does not refine level {coarser}")]
    NotRefining { level: usize, coarser: usize },
    #[error("{requested} levels requested, {available} available")]
    TooFewLevels { requested: usize, available: usize },
    #[error("no closed-form quantile for this quadrature source")]
    NoExactQuantile,
    #[error("{k} sites requested from a measure with {atoms} atoms")]
    TooManySites { k: usize, atoms: usize },
    #[error("Voronoi sites {0} and {1} coincide")]
    DuplicateSite(usize, usize),
}

/// How the quantile function of a [`QuadratureMeasure`] is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantilePath {
    /// Closed form of the underlying continuous law.
    Exact,
    /// Piecewise-constant quantile of the discrete grid.
    Grid,
}

/// Output of [`barycentric_quantise`].
#[derive(Clone, Debug, PartialEq)]
pub struct QuantisationResult {
    pub mu_n: DiscreteMeasure,
    pub nu_n: DiscreteMeasure,
    pub coupling_n: DiscreteCoupling,
    /// W_1 error bound for `mu_n` (weighted cell diameters).
    pub bound_mu: f64,
    /// W_1 error bound for `nu_n`.
    pub bound_nu: f64,
}

/// A sequence of partitions Π^1, Π^2, ... meant to refine each other.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionSequence {
    levels: Vec<Partition>,
}

impl PartitionSequence {
    pub fn new(levels: Vec<Partition>) -> Self {
        PartitionSequence { levels }
    }

    /// The same partition at every level.
    pub fn constant(partition: Partition, len: usize) -> Self {
        PartitionSequence { levels: vec![partition; len] }
    }

    pub fn levels(&self) -> &[Partition] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Checks on the given points that the cell index at level n is a
    /// function of the cell index at level n + 1.
    pub fn check_refining<'a, I>(&self, points: I) -> Result<(), QuantiseError>
    where
        I: IntoIterator<Item = &'a Point>,
    {
        let points: Vec<&Point> = points.into_iter().collect();
        let mut coarse = match self.levels.first() {
            Some(p) => p.assign(points.iter().copied())?,
            None => return Ok(()),
        };
        for (level, part) in self.levels.iter().enumerate().skip(1) {
            let fine = part.assign(points.iter().copied())?;
            let mut parent = vec![usize::MAX; part.len()];
            for (f, c) in fine.iter().zip(&coarse) {
                if parent[*f] == usize::MAX {
                    parent[*f] = *c;
                } else if parent[*f] != *c {
                    return Err(QuantiseError::NotRefining { level, coarser: level - 1 });
                }
            }
            coarse = fine;
        }
        Ok(())
    }
}

/// U-quantisation of order n: mass 1/n at n∫_{(i−1)/n}^{i/n} F^{-1}(u) du.
/// The quantile function of a discrete measure is piecewise constant, so the
/// integrals are exact sums.
pub fn u_quantise(mu: &DiscreteMeasure, n: usize) -> Result<DiscreteMeasure, QuantiseError> {
    if mu.dim() != 1 {
        return Err(QuantiseError::NotOneDimensional(mu.dim()));
    }
    if n == 0 {
        return Err(QuantiseError::ZeroOrder);
    }
    let total = mu.total_mass();
    let mut cum = Vec::with_capacity(mu.len() + 1);
    cum.push(0.0);
    let mut run = 0.0;
    for a in mu.atoms() {
        run += a.weight;
        cum.push(run / total);
    }
    *cum.last_mut().unwrap() = 1.0;

    let xs: Vec<f64> = mu.atoms().iter().map(|a| a.point.coord(0)).collect();
    let nf = n as f64;
    let mut k = 0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi) = (i as f64 / nf, (i + 1) as f64 / nf);
        let mut integral = 0.0;
        let mut contributors = 0;
        let mut last = 0;
        while k < xs.len() && cum[k + 1] <= lo {
            k += 1;
        }
        let mut j = k;
        while j < xs.len() && cum[j] < hi {
            let len = cum[j + 1].min(hi) - cum[j].max(lo);
            if len > 0.0 {
                integral += xs[j] * len;
                contributors += 1;
                last = j;
            }
            j += 1;
        }
        // A slab inside one atom's quantile step maps to that atom exactly.
        let x = if contributors == 1 { xs[last] } else { integral * nf };
        out.push((Point::scalar(x), 1.0 / nf));
    }
    Ok(DiscreteMeasure::new(1, out)?)
}

/// U-quantisation of a quadrature measure, either through the closed-form
/// quantile of the continuous law or through its grid.
pub fn u_quantise_quadrature(
    q: &QuadratureMeasure,
    n: usize,
    path: QuantilePath,
) -> Result<DiscreteMeasure, QuantiseError> {
    if q.dim() != 1 {
        return Err(QuantiseError::NotOneDimensional(q.dim()));
    }
    if n == 0 {
        return Err(QuantiseError::ZeroOrder);
    }
    match path {
        QuantilePath::Grid => u_quantise(q.grid(), n),
        QuantilePath::Exact => {
            let nf = n as f64;
            let mut atoms = Vec::with_capacity(n);
            for i in 0..n {
                let m = q
                    .exact_slab_mean(i as f64 / nf, (i + 1) as f64 / nf)
                    .ok_or(QuantiseError::NoExactQuantile)?;
                atoms.push((Point::scalar(m), 1.0 / nf));
            }
            Ok(DiscreteMeasure::new(1, atoms)?)
        }
    }
}

/// Σ_j γ(P_j) δ_{z_j} with z_j the barycentre of γ on P_j.
pub fn proper_barycentric_quantise(gamma: &DiscreteMeasure, partition: &Partition) -> Result<DiscreteMeasure, QuantiseError> {
    check_dims(gamma.dim(), partition)?;
    let cells = partition.assign(gamma.points())?;
    let mut sums = vec![WeightedSum::ZERO; partition.len()];
    for (a, c) in gamma.atoms().iter().zip(&cells) {
        sums[*c].add(&a.point, a.weight);
    }
    let atoms = sums.iter().filter_map(|s| s.barycentre(gamma.dim()).map(|p| (p, s.mass)));
    Ok(DiscreteMeasure::new(gamma.dim(), atoms)?)
}

/// Barycentric quantisation of a coupling over Π1 × Π2.
pub fn barycentric_quantise(
    pi: &DiscreteCoupling,
    pi1: &Partition,
    pi2: &Partition,
) -> Result<QuantisationResult, QuantiseError> {
    let dim = pi.dim();
    check_dims(dim, pi1)?;
    check_dims(dim, pi2)?;
    let rows = pi1.assign(pi.atoms().iter().map(|a| &a.x))?;
    let cols = pi2.assign(pi.atoms().iter().map(|a| &a.y))?;

    let mut x_sums = vec![WeightedSum::ZERO; pi1.len()];
    let mut y_sums: BTreeMap<(usize, usize), WeightedSum> = BTreeMap::new();
    for ((a, i), j) in pi.atoms().iter().zip(&rows).zip(&cols) {
        x_sums[*i].add(&a.x, a.weight);
        y_sums.entry((*i, *j)).or_insert(WeightedSum::ZERO).add(&a.y, a.weight);
    }
    if x_sums.iter().all(|s| s.mass <= 0.0) {
        return Err(MeasureError::Empty.into());
    }

    let x_bary: Vec<Option<Point>> = x_sums.iter().map(|s| s.barycentre(dim)).collect();
    let mu_n = DiscreteMeasure::new(
        dim,
        x_sums.iter().zip(&x_bary).filter_map(|(s, b)| b.map(|p| (p, s.mass))),
    )?;
    let mut cells = Vec::with_capacity(y_sums.len());
    for ((i, _), s) in &y_sums {
        if let (Some(x), Some(y)) = (x_bary[*i], s.barycentre(dim)) {
            cells.push((x, y, s.mass));
        }
    }
    let nu_n = DiscreteMeasure::new(dim, cells.iter().map(|(_, y, w)| (*y, *w)))?;
    let coupling_n = DiscreteCoupling::new(dim, cells)?;

    let (mu, nu) = pi.marginals();
    let bound_mu = mot::diameter_bound(&mu, pi1, 1.0)?.weighted;
    let bound_nu = mot::diameter_bound(&nu, pi2, 1.0)?.weighted;
    Ok(QuantisationResult { mu_n, nu_n, coupling_n, bound_mu, bound_nu })
}

/// Barycentric quantisations of a martingale coupling along two partition
/// sequences, levels 0..n_max. Levels are independent and may run in
/// parallel.
pub fn martingale_quantise_sequence(
    pi: &DiscreteCoupling,
    seq1: &PartitionSequence,
    seq2: &PartitionSequence,
    n_max: usize,
    exec: Execution,
) -> Result<Vec<QuantisationResult>, QuantiseError> {
    let defect = mot::martingale_defect(pi);
    if defect > 1e-9 {
        return Err(QuantiseError::NotMartingale(defect));
    }
    let available = seq1.len().min(seq2.len());
    if n_max > available {
        return Err(QuantiseError::TooFewLevels { requested: n_max, available });
    }
    let s1 = PartitionSequence::new(seq1.levels[..n_max].to_vec());
    let s2 = PartitionSequence::new(seq2.levels[..n_max].to_vec());
    s1.check_refining(pi.atoms().iter().map(|a| &a.x))?;
    s2.check_refining(pi.atoms().iter().map(|a| &a.y))?;
    let levels: Vec<usize> = (0..n_max).collect();
    par::map(exec, &levels, |&n| barycentric_quantise(pi, &s1.levels[n], &s2.levels[n]))
        .into_iter()
        .collect()
}

fn check_dims(dim: usize, partition: &Partition) -> Result<(), QuantiseError> {
    if partition.dim() != dim {
        return Err(PartitionError::DimensionMismatch { expected: dim, found: partition.dim() }.into());
    }
    Ok(())
}

/// 2^(level·d) congruent half-open boxes covering `bounds`, plus a remainder.
pub fn build_dyadic_boxes(bounds: &BoxBounds, level: u32) -> Result<Partition, QuantiseError> {
    let per_axis = 1usize << level;
    build_grid_boxes(bounds, &vec![per_axis; bounds.dim()])
}

/// Regular grid with `counts[k]` half-open boxes along axis k, plus a
/// remainder.
pub fn build_grid_boxes(bounds: &BoxBounds, counts: &[usize]) -> Result<Partition, QuantiseError> {
    if counts.len() != bounds.dim() {
        return Err(PartitionError::DimensionMismatch { expected: bounds.dim(), found: counts.len() }.into());
    }
    Ok(Partition::grid(bounds, counts)?)
}

/// Intervals (−∞, c_1], (c_1, c_2], ..., (c_{k}, ∞) for increasing cuts;
/// repeated cuts collapse.
pub fn quantile_cells_from_cuts(cuts: &[f64]) -> Result<Partition, QuantiseError> {
    let mut cells = Vec::with_capacity(cuts.len() + 1);
    let mut prev = f64::NEG_INFINITY;
    for &c in cuts {
        if c > prev {
            cells.push(Cell::left_open(prev, c));
            prev = c;
        }
    }
    cells.push(Cell::left_open(prev, f64::INFINITY));
    // The last cell is closed at +∞ only formally.
    if let Some(Cell::Interval { b_closed, .. }) = cells.last_mut() {
        *b_closed = false;
    }
    Ok(Partition::new(1, cells)?)
}

/// Quantile cells of a discrete measure on the line: cuts at
/// F^{-1}(i/n) = first atom whose cumulative mass reaches i/n.
pub fn build_quantile_cells(mu: &DiscreteMeasure, n: usize) -> Result<Partition, QuantiseError> {
    if mu.dim() != 1 {
        return Err(QuantiseError::NotOneDimensional(mu.dim()));
    }
    if n == 0 {
        return Err(QuantiseError::ZeroOrder);
    }
    let total = mu.total_mass();
    let mut cuts = Vec::with_capacity(n.saturating_sub(1));
    let mut run = 0.0;
    let mut k = 0;
    let atoms = mu.atoms();
    for i in 1..n {
        let level = i as f64 / n as f64;
        while k < atoms.len() && (run + atoms[k].weight) / total < level - QUANTILE_LEVEL_TOL {
            run += atoms[k].weight;
            k += 1;
        }
        let idx = k.min(atoms.len() - 1);
        cuts.push(atoms[idx].point.coord(0));
    }
    quantile_cells_from_cuts(&cuts)
}

/// Quantile cells of a quadrature measure, optionally at the exact quantiles
/// of the continuous law.
pub fn build_quantile_cells_quadrature(
    q: &QuadratureMeasure,
    n: usize,
    path: QuantilePath,
) -> Result<Partition, QuantiseError> {
    if q.dim() != 1 {
        return Err(QuantiseError::NotOneDimensional(q.dim()));
    }
    if n == 0 {
        return Err(QuantiseError::ZeroOrder);
    }
    match path {
        QuantilePath::Grid => build_quantile_cells(q.grid(), n),
        QuantilePath::Exact => {
            let cuts = (1..n)
                .map(|i| q.exact_quantile(i as f64 / n as f64).ok_or(QuantiseError::NoExactQuantile))
                .collect::<Result<Vec<_>, _>>()?;
            quantile_cells_from_cuts(&cuts)
        }
    }
}

/// Voronoi cells of distinct sites; boundary points go to the lowest index.
pub fn build_voronoi_cells(sites: &[Point]) -> Result<Partition, QuantiseError> {
    let dim = sites.first().ok_or(MeasureError::Empty)?.dim();
    for i in 0..sites.len() {
        for j in i + 1..sites.len() {
            if sites[i] == sites[j] {
                return Err(QuantiseError::DuplicateSite(i, j));
            }
        }
    }
    let shared: Arc<[Point]> = sites.into();
    let cells = (0..sites.len()).map(|site| Cell::Voronoi { site, sites: shared.clone() }).collect();
    Ok(Partition::new(dim, cells)?)
}

/// Weighted Lloyd iterations from k distinct atoms of μ picked by a seeded
/// shuffle. Sites whose cell empties stay put.
pub fn lloyd_sites(mu: &DiscreteMeasure, k: usize, iterations: usize, seed: u64) -> Result<Vec<Point>, QuantiseError> {
    if k == 0 {
        return Err(QuantiseError::ZeroOrder);
    }
    if k > mu.len() {
        return Err(QuantiseError::TooManySites { k, atoms: mu.len() });
    }
    let mut order: Vec<usize> = (0..mu.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut sites: Vec<Point> = order[..k].iter().map(|&i| mu.atoms()[i].point).collect();
    for _ in 0..iterations {
        let mut sums = vec![WeightedSum::ZERO; k];
        for a in mu.atoms() {
            sums[nearest_site(&sites, &a.point)].add(&a.point, a.weight);
        }
        let mut moved = false;
        for (s, sum) in sites.iter_mut().zip(&sums) {
            if let Some(b) = sum.barycentre(mu.dim()) {
                moved |= b != *s;
                *s = b;
            }
        }
        if !moved {
            break;
        }
    }
    Ok(sites)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(atoms: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::on_line(atoms).unwrap()
    }

    fn coupling(atoms: &[(f64, f64, f64)]) -> DiscreteCoupling {
        DiscreteCoupling::new(1, atoms.iter().map(|&(x, y, w)| (Point::scalar(x), Point::scalar(y), w))).unwrap()
    }

    fn split(at: f64, closed_right: bool) -> Partition {
        Partition::new(
            1,
            vec![
                Cell::Interval { a: f64::NEG_INFINITY, b: at, a_closed: false, b_closed: !closed_right },
                Cell::Interval { a: at, b: f64::INFINITY, a_closed: closed_right, b_closed: false },
            ],
        )
        .unwrap()
    }

    #[test]
    fn u_quantise_examples() {
        let d = DiscreteMeasure::dirac(Point::scalar(0.7));
        for n in 1..6 {
            assert_eq!(u_quantise(&d, n).unwrap(), d);
        }
        let two = line(&[(0.0, 0.5), (1.0, 0.5)]);
        assert_eq!(u_quantise(&two, 2).unwrap(), two);
        let u = QuadratureMeasure::uniform_box(BoxBounds::cube(1, 0.0, 1.0).unwrap(), 10).unwrap();
        assert_eq!(
            u_quantise_quadrature(&u, 2, QuantilePath::Exact).unwrap(),
            line(&[(0.25, 0.5), (0.75, 0.5)])
        );
        assert!(matches!(
            u_quantise(&DiscreteMeasure::dirac(Point::planar(0.0, 0.0)), 2),
            Err(QuantiseError::NotOneDimensional(2))
        ));
    }

    #[test]
    fn u_quantise_splits_straddling_atoms() {
        // Quantile is 0 on (0, 2/3] and 3 on (2/3, 1]; second half-slab mixes both.
        let m = line(&[(0.0, 2.0 / 3.0), (3.0, 1.0 / 3.0)]);
        let q = u_quantise(&m, 2).unwrap();
        let xs: Vec<f64> = q.points().map(|p| p.coord(0)).collect();
        assert_eq!(xs[0], 0.0);
        assert!((xs[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn proper_examples() {
        let g = DiscreteMeasure::uniform(&[1.0, 2.0, 3.0, 4.0].map(Point::scalar)).unwrap();
        assert_eq!(
            proper_barycentric_quantise(&g, &Partition::whole(1)).unwrap(),
            DiscreteMeasure::dirac(Point::scalar(2.5))
        );
        assert_eq!(
            proper_barycentric_quantise(&g, &split(2.5, true)).unwrap(),
            line(&[(1.5, 0.5), (3.5, 0.5)])
        );
        let singles = quantile_cells_from_cuts(&[1.5, 2.5, 3.5]).unwrap();
        assert_eq!(proper_barycentric_quantise(&g, &singles).unwrap(), g);
    }

    #[test]
    fn counterexample_is_a_barycentric_quantisation() {
        let pi = coupling(&[(-1.0, -1.0, 0.25), (0.0, -1.0, 0.25), (0.0, 1.0, 0.25), (1.0, 1.0, 0.25)]);
        let pi1 = Partition::new(
            1,
            vec![
                Cell::Interval { a: f64::NEG_INFINITY, b: 0.0, a_closed: false, b_closed: false },
                Cell::Interval { a: 0.0, b: 0.0, a_closed: true, b_closed: true },
                Cell::Interval { a: 0.0, b: f64::INFINITY, a_closed: false, b_closed: false },
            ],
        )
        .unwrap();
        let r = barycentric_quantise(&pi, &pi1, &Partition::whole(1)).unwrap();
        assert_eq!(r.nu_n, line(&[(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]));
        assert_eq!(r.mu_n, line(&[(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]));
    }

    #[test]
    fn two_by_two_quantisation() {
        let pi = coupling(&[(-1.0, -2.0, 0.25), (-1.0, 0.0, 0.25), (1.0, 0.0, 0.25), (1.0, 2.0, 0.25)]);
        let p = split(0.0, true);
        let r = barycentric_quantise(&pi, &p, &p).unwrap();
        assert_eq!(r.mu_n, line(&[(-1.0, 0.5), (1.0, 0.5)]));
        // x = 1 sends y = 0 and y = 2 into the same cell [0, ∞).
        assert_eq!(r.nu_n, line(&[(-2.0, 0.25), (0.0, 0.25), (1.0, 0.5)]));
        assert!(mot::martingale_defect(&r.coupling_n) < 1e-15);
        let singles = quantile_cells_from_cuts(&[-2.0, 0.0]).unwrap();
        let r2 = barycentric_quantise(&pi, &p, &singles).unwrap();
        assert_eq!(r2.nu_n, line(&[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]));
        assert!(mot::martingale_defect(&r2.coupling_n) < 1e-15);
        assert_eq!(r.coupling_n.first_marginal(), r.mu_n);
        assert_eq!(r.coupling_n.second_marginal(), r.nu_n);

        let whole = barycentric_quantise(&pi, &Partition::whole(1), &Partition::whole(1)).unwrap();
        assert_eq!(whole.mu_n, DiscreteMeasure::dirac(Point::scalar(0.0)));
        assert_eq!(whole.nu_n, DiscreteMeasure::dirac(Point::scalar(0.0)));
    }

    #[test]
    fn sequence_rejects_non_martingale_and_non_refining() {
        let bad = coupling(&[(0.0, 1.0, 1.0)]);
        let seq = PartitionSequence::constant(Partition::whole(1), 2);
        assert!(matches!(
            martingale_quantise_sequence(&bad, &seq, &seq, 2, Execution::Sequential),
            Err(QuantiseError::NotMartingale(_))
        ));
        let pi = coupling(&[(-1.0, -2.0, 0.25), (-1.0, 0.0, 0.25), (1.0, 0.0, 0.25), (1.0, 2.0, 0.25)]);
        let crossing = PartitionSequence::new(vec![split(-0.5, true), split(0.5, true)]);
        let fine = PartitionSequence::constant(Partition::whole(1), 2);
        // Both levels are 2-cell splits with different cuts; the atom at 0
        // switches sides, so level 1 does not refine level 0.
        let pi0 = coupling(&[(-1.0, -1.0, 0.25), (0.0, 0.0, 0.5), (1.0, 1.0, 0.25)]);
        assert!(matches!(
            martingale_quantise_sequence(&pi0, &crossing, &fine, 2, Execution::Sequential),
            Err(QuantiseError::NotRefining { level: 1, .. })
        ));
        let levels = martingale_quantise_sequence(&pi, &fine, &fine, 2, Execution::Parallel).unwrap();
        assert!(levels.iter().all(|r| r.mu_n == DiscreteMeasure::dirac(Point::scalar(0.0))));
    }

    #[test]
    fn dyadic_boxes() {
        let b1 = BoxBounds::cube(1, 0.0, 1.0).unwrap();
        assert_eq!(build_dyadic_boxes(&b1, 0).unwrap().len(), 2);
        let p = build_dyadic_boxes(&b1, 1).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.locate(&Point::scalar(0.5)).unwrap(), 1);
        assert_eq!(p.locate(&Point::scalar(0.0)).unwrap(), 0);
        assert_eq!(p.locate(&Point::scalar(1.0)), Ok(p.remainder().unwrap()));
        let b2 = BoxBounds::cube(2, 0.0, 1.0).unwrap();
        assert_eq!(build_dyadic_boxes(&b2, 1).unwrap().len(), 5);
        let pts: Vec<Point> = (0..50).map(|i| Point::planar(i as f64 / 50.0, (i * 7 % 50) as f64 / 50.0)).collect();
        let seq = PartitionSequence::new((0..4).map(|l| build_dyadic_boxes(&b2, l).unwrap()).collect());
        seq.check_refining(&pts).unwrap();
    }

    #[test]
    fn quantile_cells() {
        let u = QuadratureMeasure::uniform_box(BoxBounds::cube(1, -1.0, 1.0).unwrap(), 100).unwrap();
        let p = build_quantile_cells_quadrature(&u, 2, QuantilePath::Exact).unwrap();
        assert_eq!(p.cells()[0], Cell::left_open(f64::NEG_INFINITY, 0.0));
        assert_eq!(build_quantile_cells(u.grid(), 1).unwrap().len(), 1);
        let two = line(&[(0.0, 0.5), (1.0, 0.5)]);
        let p = build_quantile_cells(&two, 2).unwrap();
        assert_eq!(p.cells()[0], Cell::left_open(f64::NEG_INFINITY, 0.0));
        assert_eq!(p.len(), 2);
        // Repeated cuts collapse: levels 1/7..3/7 cut at 0, 4/7..6/7 at 1.
        let p = build_quantile_cells(&two, 7).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.cells()[1], Cell::left_open(0.0, 1.0));
    }

    #[test]
    fn voronoi_and_lloyd() {
        let p = build_voronoi_cells(&[Point::scalar(-1.0), Point::scalar(1.0)]).unwrap();
        assert_eq!(p.locate(&Point::scalar(0.0)).unwrap(), 0);
        assert_eq!(p.locate(&Point::scalar(1e-9)).unwrap(), 1);
        assert!(matches!(
            build_voronoi_cells(&[Point::scalar(1.0), Point::scalar(1.0)]),
            Err(QuantiseError::DuplicateSite(0, 1))
        ));

        let m = line(&[(0.0, 0.2), (1.0, 0.3), (5.0, 0.5)]);
        let mut s = lloyd_sites(&m, 3, 10, 7).unwrap();
        s.sort_by(|a, b| a.lex_cmp(b));
        assert_eq!(s, vec![Point::scalar(0.0), Point::scalar(1.0), Point::scalar(5.0)]);
        assert!(matches!(lloyd_sites(&m, 4, 10, 7), Err(QuantiseError::TooManySites { k: 4, atoms: 3 })));
        assert_eq!(lloyd_sites(&m, 2, 20, 3).unwrap(), lloyd_sites(&m, 2, 20, 3).unwrap());
    }

    #[test]
    fn lloyd_matches_brute_force_on_uniform_grid() {
        let u = QuadratureMeasure::uniform_box(BoxBounds::cube(1, 0.0, 1.0).unwrap(), 1000).unwrap();
        let mut s: Vec<f64> = lloyd_sites(u.grid(), 2, 50, 11).unwrap().iter().map(|p| p.coord(0)).collect();
        s.sort_by(f64::total_cmp);
        // Brute force: best single cut between grid nodes, sites at the cell means.
        let xs: Vec<f64> = u.grid().points().map(|p| p.coord(0)).collect();
        let energy = |c: usize| {
            let (l, r) = xs.split_at(c);
            let ml = l.iter().sum::<f64>() / l.len() as f64;
            let mr = r.iter().sum::<f64>() / r.len() as f64;
            l.iter().map(|x| (x - ml).powi(2)).sum::<f64>() + r.iter().map(|x| (x - mr).powi(2)).sum::<f64>()
        };
        let best = (1..xs.len()).min_by(|a, b| energy(*a).total_cmp(&energy(*b))).unwrap();
        let (l, r) = xs.split_at(best);
        let oracle = [l.iter().sum::<f64>() / l.len() as f64, r.iter().sum::<f64>() / r.len() as f64];
        assert!((s[0] - oracle[0]).abs() < 1e-3 && (s[1] - oracle[1]).abs() < 1e-3, "{s:?} vs {oracle:?}");
        assert!((s[0] - 0.25).abs() < 1e-3 && (s[1] - 0.75).abs() < 1e-3);
    }
}
