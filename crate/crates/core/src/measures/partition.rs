use std::sync::Arc;

use thiserror::Error;

use super::{Point, MAX_DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("point {0} lies in no cell")]
    Uncovered(Point),
    #[error("point {point} lies in cells {first} and {second}")]
    Ambiguous { point: Point, first: usize, second: usize },
    #[error("cell of dimension {found} in a partition of dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cells {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("more than one remainder cell")]
    MultipleRemainders,
    #[error("invalid cell: {0}")]
    InvalidCell(String),
}

/// Finite bounds of an axis-aligned box, used as input to grid builders.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxBounds {
    pub lower: Point,
    pub upper: Point,
}

impl BoxBounds {
    pub fn new(lower: Point, upper: Point) -> Result<Self, PartitionError> {
        if lower.dim() != upper.dim() {
            return Err(PartitionError::DimensionMismatch { expected: lower.dim(), found: upper.dim() });
        }
        if lower.coords().iter().zip(upper.coords()).any(|(a, b)| a >= b) {
            return Err(PartitionError::InvalidCell("empty box".into()));
        }
        Ok(BoxBounds { lower, upper })
    }

    /// The cube [lo, hi]^dim.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self, PartitionError> {
        let l = Point::new(&vec![lo; dim]).map_err(|e| PartitionError::InvalidCell(e.to_string()))?;
        let u = Point::new(&vec![hi; dim]).map_err(|e| PartitionError::InvalidCell(e.to_string()))?;
        Self::new(l, u)
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }
}

/// Axis-aligned box with per-face closedness. Bounds may be infinite.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxCell {
    dim: usize,
    lower: [f64; MAX_DIM],
    upper: [f64; MAX_DIM],
    lower_closed: [bool; MAX_DIM],
    upper_closed: [bool; MAX_DIM],
}

impl BoxCell {
    pub fn new(
        lower: &[f64],
        upper: &[f64],
        lower_closed: &[bool],
        upper_closed: &[bool],
    ) -> Result<Self, PartitionError> {
        let dim = lower.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(PartitionError::InvalidCell(format!("box of dimension {dim}")));
        }
        if upper.len() != dim || lower_closed.len() != dim || upper_closed.len() != dim {
            return Err(PartitionError::InvalidCell("box fields of unequal length".into()));
        }
        if lower.iter().chain(upper).any(|v| v.is_nan()) {
            return Err(PartitionError::InvalidCell("NaN bound".into()));
        }
        let mut cell = BoxCell {
            dim,
            lower: [0.0; MAX_DIM],
            upper: [0.0; MAX_DIM],
            lower_closed: [false; MAX_DIM],
            upper_closed: [false; MAX_DIM],
        };
        cell.lower[..dim].copy_from_slice(lower);
        cell.upper[..dim].copy_from_slice(upper);
        cell.lower_closed[..dim].copy_from_slice(lower_closed);
        cell.upper_closed[..dim].copy_from_slice(upper_closed);
        Ok(cell)
    }

    /// [lower, upper) on every axis.
    pub fn half_open(lower: &[f64], upper: &[f64]) -> Result<Self, PartitionError> {
        let t = vec![true; lower.len()];
        let f = vec![false; lower.len()];
        Self::new(lower, upper, &t, &f)
    }

    /// The closed box {p}.
    pub fn singleton(p: &Point) -> Self {
        let t = vec![true; p.dim()];
        Self::new(p.coords(), p.coords(), &t, &t).expect("finite point")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.dim]
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper[..self.dim]
    }

    pub fn lower_closed(&self) -> &[bool] {
        &self.lower_closed[..self.dim]
    }

    pub fn upper_closed(&self) -> &[bool] {
        &self.upper_closed[..self.dim]
    }

    #[inline]
    pub fn contains(&self, p: &Point) -> bool {
        (0..self.dim).all(|k| {
            let x = p.coord(k);
            let above = if self.lower_closed[k] { x >= self.lower[k] } else { x > self.lower[k] };
            let below = if self.upper_closed[k] { x <= self.upper[k] } else { x < self.upper[k] };
            above && below
        })
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim)
            .map(|k| {
                let w = self.upper[k] - self.lower[k];
                w * w
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// One element of a [`Partition`].
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Box(BoxCell),
    /// Interval of the real line with endpoints `a ≤ b`, possibly infinite.
    Interval { a: f64, b: f64, a_closed: bool, b_closed: bool },
    /// Points whose nearest site (Euclidean, lowest index on ties) is `site`.
    Voronoi { site: usize, sites: Arc<[Point]> },
    /// Everything not covered by the other cells of the partition.
    Remainder,
}

impl Cell {
    /// Half-open interval (a, b].
    pub fn left_open(a: f64, b: f64) -> Self {
        Cell::Interval { a, b, a_closed: false, b_closed: true }
    }

    /// Membership test. A remainder cell contains nothing on its own; the
    /// owning partition decides what falls into it.
    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Cell::Box(b) => b.contains(p),
            Cell::Interval { a, b, a_closed, b_closed } => {
                let x = p.coord(0);
                let above = if *a_closed { x >= *a } else { x > *a };
                let below = if *b_closed { x <= *b } else { x < *b };
                above && below
            }
            Cell::Voronoi { site, sites } => nearest_site(sites, p) == *site,
            Cell::Remainder => false,
        }
    }

    /// Geometric diameter; infinite for unbounded or Voronoi cells.
    pub fn diameter(&self) -> f64 {
        match self {
            Cell::Box(b) => b.diameter(),
            Cell::Interval { a, b, .. } => b - a,
            Cell::Voronoi { .. } | Cell::Remainder => f64::INFINITY,
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            Cell::Box(b) => Some(b.dim()),
            Cell::Interval { .. } => Some(1),
            Cell::Voronoi { sites, .. } => sites.first().map(Point::dim),
            Cell::Remainder => None,
        }
    }
}

/// Index of the site closest to `p`; ties go to the lowest index.
pub(crate) fn nearest_site(sites: &[Point], p: &Point) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, s) in sites.iter().enumerate() {
        let d: f64 = s.coords().iter().zip(p.coords()).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
struct GridIndex {
    dim: usize,
    lower: [f64; MAX_DIM],
    upper: [f64; MAX_DIM],
    counts: [usize; MAX_DIM],
}

#[derive(Clone, Debug, PartialEq)]
enum Locator {
    Scan,
    /// Disjoint non-empty intervals sorted by left endpoint.
    Intervals { starts: Vec<f64>, order: Vec<usize> },
    Voronoi { sites: Arc<[Point]>, cell_of_site: Vec<Option<usize>> },
    /// Regular grid of boxes in row-major order (first axis slowest).
    Grid(GridIndex),
}

/// A finite family of pairwise-disjoint cells of ℝ^d.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    dim: usize,
    cells: Vec<Cell>,
    remainder: Option<usize>,
    locator: Locator,
}

impl Partition {
    pub fn new(dim: usize, cells: Vec<Cell>) -> Result<Self, PartitionError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(PartitionError::InvalidCell(format!("partition of dimension {dim}")));
        }
        if cells.is_empty() {
            return Err(PartitionError::InvalidCell("no cells".into()));
        }
        let mut remainder = None;
        for (i, c) in cells.iter().enumerate() {
            if let Some(found) = c.dim() {
                if found != dim {
                    return Err(PartitionError::DimensionMismatch { expected: dim, found });
                }
            }
            if let Cell::Voronoi { site, sites } = c {
                if *site >= sites.len() {
                    return Err(PartitionError::InvalidCell(format!("site index {site} out of range")));
                }
            }
            if let Cell::Interval { a, b, .. } = c {
                if a.is_nan() || b.is_nan() || a > b {
                    return Err(PartitionError::InvalidCell(format!("interval ({a}, {b})")));
                }
            }
            if matches!(c, Cell::Remainder) {
                if remainder.is_some() {
                    return Err(PartitionError::MultipleRemainders);
                }
                remainder = Some(i);
            }
        }
        let locator = Self::pick_locator(&cells)?;
        Ok(Partition { dim, cells, remainder, locator })
    }

    /// The trivial partition {ℝ^d}.
    pub fn whole(dim: usize) -> Self {
        Partition::new(dim, vec![Cell::Remainder]).expect("valid dimension")
    }

    /// Regular grid of half-open boxes over `bounds` plus a remainder cell.
    pub(crate) fn grid(bounds: &BoxBounds, counts: &[usize]) -> Result<Self, PartitionError> {
        let dim = bounds.dim();
        assert_eq!(counts.len(), dim);
        if counts.contains(&0) {
            return Err(PartitionError::InvalidCell("zero cells along an axis".into()));
        }
        let mut index = GridIndex {
            dim,
            lower: [0.0; MAX_DIM],
            upper: [0.0; MAX_DIM],
            counts: [1; MAX_DIM],
        };
        for k in 0..dim {
            index.lower[k] = bounds.lower.coord(k);
            index.upper[k] = bounds.upper.coord(k);
            index.counts[k] = counts[k];
        }
        let total: usize = counts.iter().product();
        let mut cells = Vec::with_capacity(total + 1);
        let mut multi = vec![0usize; dim];
        for _ in 0..total {
            let mut lo = vec![0.0; dim];
            let mut hi = vec![0.0; dim];
            for k in 0..dim {
                lo[k] = index.edge(k, multi[k]);
                hi[k] = index.edge(k, multi[k] + 1);
            }
            cells.push(Cell::Box(BoxCell::half_open(&lo, &hi)?));
            for k in (0..dim).rev() {
                multi[k] += 1;
                if multi[k] < counts[k] {
                    break;
                }
                multi[k] = 0;
            }
        }
        cells.push(Cell::Remainder);
        Ok(Partition { dim, remainder: Some(total), cells, locator: Locator::Grid(index) })
    }

    fn pick_locator(cells: &[Cell]) -> Result<Locator, PartitionError> {
        let proper: Vec<(usize, &Cell)> =
            cells.iter().enumerate().filter(|(_, c)| !matches!(c, Cell::Remainder)).collect();
        if proper.is_empty() {
            return Ok(Locator::Scan);
        }
        if proper.iter().all(|(_, c)| matches!(c, Cell::Interval { .. })) {
            return Self::interval_locator(&proper);
        }
        if let Some((_, Cell::Voronoi { sites, .. })) = proper.first() {
            let sites = sites.clone();
            let mut cell_of_site = vec![None; sites.len()];
            let mut ok = true;
            for (i, c) in &proper {
                match c {
                    Cell::Voronoi { site, sites: s } if s[..] == sites[..] => {
                        if let Some(prev) = cell_of_site[*site] {
                            return Err(PartitionError::Overlap(prev, *i));
                        }
                        cell_of_site[*site] = Some(*i);
                    }
                    _ => ok = false,
                }
            }
            if ok {
                return Ok(Locator::Voronoi { sites, cell_of_site });
            }
        }
        Ok(Locator::Scan)
    }

    fn interval_locator(proper: &[(usize, &Cell)]) -> Result<Locator, PartitionError> {
        let mut items: Vec<(usize, f64, f64, bool, bool)> = proper
            .iter()
            .filter_map(|(i, c)| match c {
                Cell::Interval { a, b, a_closed, b_closed } => Some((*i, *a, *b, *a_closed, *b_closed)),
                _ => None,
            })
            .filter(|&(_, a, b, ac, bc)| a < b || (a == b && ac && bc))
            .collect();
        items.sort_by(|x, y| x.1.total_cmp(&y.1).then(y.3.cmp(&x.3)));
        for w in items.windows(2) {
            let (i, _, b, _, bc) = w[0];
            let (j, a, _, ac, _) = w[1];
            if b > a || (b == a && bc && ac) {
                return Err(PartitionError::Overlap(i, j));
            }
        }
        Ok(Locator::Intervals {
            starts: items.iter().map(|t| t.1).collect(),
            order: items.iter().map(|t| t.0).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn remainder(&self) -> Option<usize> {
        self.remainder
    }

    /// Index of the unique cell containing `p`.
    pub fn locate(&self, p: &Point) -> Result<usize, PartitionError> {
        if p.dim() != self.dim {
            return Err(PartitionError::DimensionMismatch { expected: self.dim, found: p.dim() });
        }
        let hit = match &self.locator {
            Locator::Scan => {
                let mut hit = None;
                for (i, c) in self.cells.iter().enumerate() {
                    if c.contains(p) {
                        if let Some(first) = hit {
                            return Err(PartitionError::Ambiguous { point: *p, first, second: i });
                        }
                        hit = Some(i);
                    }
                }
                hit
            }
            Locator::Intervals { starts, order } => {
                let x = p.coord(0);
                let k = starts.partition_point(|&a| a <= x);
                (k.saturating_sub(2)..k).rev().map(|t| order[t]).find(|&i| self.cells[i].contains(p))
            }
            Locator::Voronoi { sites, cell_of_site } => cell_of_site[nearest_site(sites, p)],
            Locator::Grid(g) => g.locate(p, &self.cells),
        };
        hit.or(self.remainder).ok_or(PartitionError::Uncovered(*p))
    }

    /// Cell index for every point, in order.
    pub fn assign<'a, I>(&self, points: I) -> Result<Vec<usize>, PartitionError>
    where
        I: IntoIterator<Item = &'a Point>,
    {
        points.into_iter().map(|p| self.locate(p)).collect()
    }
}

impl GridIndex {
    #[inline]
    fn edge(&self, axis: usize, k: usize) -> f64 {
        let n = self.counts[axis];
        if k == n {
            return self.upper[axis];
        }
        self.lower[axis] + (self.upper[axis] - self.lower[axis]) * (k as f64) / (n as f64)
    }

    fn locate(&self, p: &Point, cells: &[Cell]) -> Option<usize> {
        let mut flat = 0usize;
        for k in 0..self.dim {
            let n = self.counts[k];
            let x = p.coord(k);
            let t = (x - self.lower[k]) / (self.upper[k] - self.lower[k]) * n as f64;
            if !(t > -1.0 && t < n as f64 + 1.0) {
                return None;
            }
            let guess = t.floor() as i64;
            // Rounding can put the guess one cell off; the box test decides.
            let found = [guess, guess - 1, guess + 1]
                .into_iter()
                .filter(|&g| g >= 0 && (g as usize) < n)
                .map(|g| g as usize)
                .find(|&g| x >= self.edge(k, g) && x < self.edge(k, g + 1))?;
            flat = flat * n + found;
        }
        debug_assert!(cells[flat].contains(p));
        Some(flat)
    }
}
