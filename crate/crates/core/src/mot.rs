//! Discrete optimal transport and martingale optimal transport.
//!
//! Variables are p_ij ≥ 0 stored column-major, index j·n_mu + i. The
//! constraint rows come in three blocks:
//!
//! ```text
//! rows 0 .. n_mu                 Σ_j p_ij = α_i
//! rows n_mu .. n_mu + n_nu       Σ_i p_ij = β_j
//! rows n_mu + n_nu + k·n_mu + i  Σ_j p_ij y_j[k] = α_i x_i[k]   (k < d)
//! ```
//!
//! The last block is absent for plain OT.

use std::fmt::Write as _;

use thiserror::Error;

use crate::lp::{self, LpError, LpProblem, LpSolution, LpStatus, SolverOptions, SparseColumns};
use crate::measures::{
    compensated_sum, BoxCell, Cell, CostFunction, DiscreteCoupling, DiscreteMeasure, KernelCoupling, MeasureError,
    Partition, PartitionError, Point, MERGE_TOL,
};
use crate::par::{self, Execution};
use crate::quantise::{self, QuantiseError};

/// Per x-atom, per coordinate tolerance on |Σ_j p_ij (y_j − x_i)| for a
/// martingale witness.
pub const WITNESS_TOL: f64 = 1e-8;
/// Means further apart than this cannot be in convex order.
pub const MEAN_TOL: f64 = 1e-7;
/// Slack allowed in P_n ≤ E^π̃[c].
pub const STABILITY_SLACK: f64 = 1e-6;
/// Ulps of the largest cost below which a transport value is rounding.
const NOISE_ULPS: f64 = 64.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Quantise(#[from] QuantiseError),
    #[error("marginals live in dimensions {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error("transport LP ended {0:?}")]
    UnexpectedStatus(LpStatus),
    #[error("p must be at least 1, got {0}")]
    BadExponent(f64),
    #[error("start coupling has an atom off the marginal supports")]
    StartOffSupport,
}

/// An assembled OT or MOT linear program together with its index layout.
#[derive(Clone, Debug)]
pub struct MotAssembly {
    pub problem: LpProblem,
    pub n_mu: usize,
    pub n_nu: usize,
    pub dim: usize,
    pub martingale: bool,
    mu_points: Vec<Point>,
    nu_points: Vec<Point>,
}

/// Index of the point within `MERGE_TOL` of `p` in a lexicographically
/// sorted list.
fn locate(points: &[Point], p: &Point) -> Option<usize> {
    let lead = p.coord(0);
    let from = points.partition_point(|q| q.coord(0) < lead - MERGE_TOL);
    points[from..]
        .iter()
        .take_while(|q| q.coord(0) <= lead + MERGE_TOL)
        .position(|q| q.max_dist(p) <= MERGE_TOL)
        .map(|k| from + k)
}

impl MotAssembly {
    /// Column of p_ij.
    #[inline]
    pub fn var_index(&self, i: usize, j: usize) -> usize {
        j * self.n_mu + i
    }

    /// LP vector of a coupling whose atoms sit on the assembled supports.
    pub fn start_vector(&self, pi: &DiscreteCoupling) -> Result<Vec<f64>, MotError> {
        let mut x = vec![0.0; self.problem.n_vars()];
        for a in pi.atoms() {
            let (Some(i), Some(j)) = (locate(&self.mu_points, &a.x), locate(&self.nu_points, &a.y)) else {
                return Err(MotError::StartOffSupport);
            };
            x[self.var_index(i, j)] += a.weight;
        }
        Ok(x)
    }

    /// Coupling read back from an LP solution vector; nonpositive entries
    /// are dropped and the rest rescaled to unit mass.
    pub fn coupling_from(&self, x: &[f64]) -> Result<DiscreteCoupling, MotError> {
        let mut atoms = Vec::new();
        for j in 0..self.n_nu {
            for i in 0..self.n_mu {
                let w = x[self.var_index(i, j)];
                if w > 0.0 {
                    atoms.push((self.mu_points[i], self.nu_points[j], w));
                }
            }
        }
        Ok(DiscreteCoupling::normalised(self.dim, atoms)?)
    }

    /// The (n_mu × n_nu) weight matrix of a solution, row i = x-atom i.
    pub fn weight_matrix(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.n_mu).map(|i| (0..self.n_nu).map(|j| x[self.var_index(i, j)]).collect()).collect()
    }
}

fn assemble(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &dyn Fn(&Point, &Point) -> f64,
    martingale: bool,
) -> Result<MotAssembly, MotError> {
    if mu.dim() != nu.dim() {
        return Err(MotError::DimensionMismatch(mu.dim(), nu.dim()));
    }
    let (n_mu, n_nu, d) = (mu.len(), nu.len(), mu.dim());
    let mart_rows = if martingale { n_mu * d } else { 0 };
    let n_rows = n_mu + n_nu + mart_rows;
    let mu_points: Vec<Point> = mu.points().copied().collect();
    let nu_points: Vec<Point> = nu.points().copied().collect();

    let mut objective = Vec::with_capacity(n_mu * n_nu);
    let mut columns = Vec::with_capacity(n_mu * n_nu);
    for (j, y) in nu_points.iter().enumerate() {
        for (i, x) in mu_points.iter().enumerate() {
            objective.push(cost(x, y));
            let mut col = vec![(i, 1.0), (n_mu + j, 1.0)];
            if martingale {
                col.extend((0..d).map(|k| (n_mu + n_nu + k * n_mu + i, y.coord(k))));
            }
            columns.push(col);
        }
    }
    let matrix = SparseColumns::from_columns(n_rows, columns)?;

    let mut rhs: Vec<f64> = mu.atoms().iter().map(|a| a.weight).collect();
    rhs.extend(nu.atoms().iter().map(|a| a.weight));
    if martingale {
        for k in 0..d {
            rhs.extend(mu.atoms().iter().map(|a| a.weight * a.point.coord(k)));
        }
    }
    Ok(MotAssembly {
        problem: LpProblem::new(objective, matrix, rhs)?,
        n_mu,
        n_nu,
        dim: d,
        martingale,
        mu_points,
        nu_points,
    })
}

fn mean_gap(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    mu.barycentre().max_dist(&nu.barycentre())
}

/// MOT linear program in the block layout above.
pub fn assemble_mot_lp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostFunction) -> Result<MotAssembly, MotError> {
    if mu.dim() == nu.dim() {
        let gap = mean_gap(mu, nu);
        if gap > MEAN_TOL {
            log::warn!("marginal means differ by {gap:e}; the martingale LP is infeasible");
        }
    }
    assemble(mu, nu, &|x, y| cost.evaluate(x, y), true)
}

/// OT linear program (marginal rows only).
pub fn assemble_ot_lp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostFunction) -> Result<MotAssembly, MotError> {
    assemble(mu, nu, &|x, y| cost.evaluate(x, y), false)
}

#[derive(Clone, Debug, PartialEq)]
pub enum MotOutcome {
    Solved { value: f64, coupling: DiscreteCoupling, weights: Vec<Vec<f64>> },
    /// μ is not below ν in convex order.
    InfeasibleOrder,
}

impl MotOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            MotOutcome::Solved { value, .. } => Some(*value),
            MotOutcome::InfeasibleOrder => None,
        }
    }
}

pub fn solve_discrete_mot(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostFunction) -> Result<MotOutcome, MotError> {
    solve_discrete_mot_with(mu, nu, cost, &SolverOptions::default())
}

pub fn solve_discrete_mot_with(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostFunction,
    opts: &SolverOptions,
) -> Result<MotOutcome, MotError> {
    let asm = assemble_mot_lp(mu, nu, cost)?;
    let sol = lp::lp_solve_with(&asm.problem, opts)?;
    mot_outcome(&asm, sol)
}

/// As [`solve_discrete_mot_with`], warm-started from a known martingale
/// coupling of `mu` and `nu` (for instance the quantised input coupling).
pub fn solve_discrete_mot_from(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostFunction,
    start: &DiscreteCoupling,
    opts: &SolverOptions,
) -> Result<MotOutcome, MotError> {
    let asm = assemble_mot_lp(mu, nu, cost)?;
    let x0 = asm.start_vector(start)?;
    let sol = lp::lp_solve_from(&asm.problem, &x0, opts)?;
    mot_outcome(&asm, sol)
}

fn mot_outcome(asm: &MotAssembly, sol: LpSolution) -> Result<MotOutcome, MotError> {
    log::debug!(
        "MOT {}x{}: status {:?} after {} pivots",
        asm.n_mu,
        asm.n_nu,
        sol.status,
        sol.iterations
    );
    match sol.status {
        LpStatus::Optimal => Ok(MotOutcome::Solved {
            value: sol.objective,
            coupling: asm.coupling_from(&sol.x)?,
            weights: asm.weight_matrix(&sol.x),
        }),
        LpStatus::Infeasible => Ok(MotOutcome::InfeasibleOrder),
        // Costs are finite and the feasible set is bounded.
        LpStatus::Unbounded => Err(MotError::UnexpectedStatus(LpStatus::Unbounded)),
    }
}

/// Optimal transport value and plan.
pub fn solve_discrete_ot(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostFunction,
) -> Result<(f64, DiscreteCoupling), MotError> {
    solve_ot_fn(mu, nu, &|x, y| cost.evaluate(x, y), &SolverOptions::default())
}

fn solve_ot_fn(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &dyn Fn(&Point, &Point) -> f64,
    opts: &SolverOptions,
) -> Result<(f64, DiscreteCoupling), MotError> {
    let asm = assemble(mu, nu, cost, false)?;
    let sol = lp::lp_solve_with(&asm.problem, opts)?;
    match sol.status {
        LpStatus::Optimal => Ok((sol.objective, asm.coupling_from(&sol.x)?)),
        s => Err(MotError::UnexpectedStatus(s)),
    }
}

/// W_p with Euclidean ground distance, through the OT linear program.
pub fn wasserstein_p(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64, MotError> {
    wasserstein_p_with(mu, nu, p, &SolverOptions::default())
}

pub fn wasserstein_p_with(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    opts: &SolverOptions,
) -> Result<f64, MotError> {
    if !(p >= 1.0) {
        return Err(MotError::BadExponent(p));
    }
    let ground = |x: &Point, y: &Point| x.dist(y).powf(p);
    let (value, _) = solve_ot_fn(mu, nu, &ground, opts)?;
    // The LP value is accurate to a few ulps of the largest cost; the p-th
    // root would blow that rounding up, so values at that level count as 0.
    let largest = mu.points().flat_map(|x| nu.points().map(move |y| ground(x, y))).fold(0.0, f64::max);
    if value <= NOISE_ULPS * f64::EPSILON * largest {
        return Ok(0.0);
    }
    Ok(value.powf(1.0 / p))
}

/// W_p on the line from the quantile coupling,
/// (∫_0^1 |F^{-1}(u) − G^{-1}(u)|^p du)^{1/p}, computed exactly.
pub fn wasserstein_p_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64, MotError> {
    if !(p >= 1.0) {
        return Err(MotError::BadExponent(p));
    }
    for m in [mu, nu] {
        if m.dim() != 1 {
            return Err(MotError::Quantise(QuantiseError::NotOneDimensional(m.dim())));
        }
    }
    let cum = |m: &DiscreteMeasure| -> Vec<f64> {
        let total = m.total_mass();
        let mut run = 0.0;
        let mut c: Vec<f64> = m.atoms().iter().map(|a| {
            run += a.weight;
            run / total
        })
        .collect();
        *c.last_mut().unwrap() = 1.0;
        c
    };
    let (cf, cg) = (cum(mu), cum(nu));
    let (mut i, mut j, mut u) = (0, 0, 0.0);
    let mut terms = Vec::with_capacity(cf.len() + cg.len());
    while i < cf.len() && j < cg.len() {
        let next = cf[i].min(cg[j]);
        let gap = (mu.atoms()[i].point.coord(0) - nu.atoms()[j].point.coord(0)).abs();
        if next > u {
            terms.push((next - u) * gap.powf(p));
            u = next;
        }
        if cf[i] <= next {
            i += 1;
        }
        if cg[j] <= next {
            j += 1;
        }
    }
    Ok(compensated_sum(terms).max(0.0).powf(1.0 / p))
}

/// Largest |Σ_j p_ij (y_j − x_i)| over x-atoms and coordinates. Zero for a
/// martingale coupling.
pub fn martingale_defect(pi: &DiscreteCoupling) -> f64 {
    let d = pi.dim();
    let atoms = pi.atoms();
    let mut worst: f64 = 0.0;
    let mut start = 0;
    while start < atoms.len() {
        let x = atoms[start].x;
        let mut end = start;
        while end < atoms.len() && atoms[end].x == x {
            end += 1;
        }
        for k in 0..d {
            let s = compensated_sum(atoms[start..end].iter().map(|a| a.weight * (a.y.coord(k) - x.coord(k))));
            worst = worst.max(s.abs());
        }
        start = end;
    }
    worst
}

pub fn is_martingale_coupling(pi: &DiscreteCoupling, tol: f64) -> bool {
    martingale_defect(pi) <= tol
}

/// Strassen check: μ ≤cx ν iff the martingale transport polytope is
/// nonempty. A witness coupling comes with a positive answer.
pub fn check_convex_order(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<(bool, Option<DiscreteCoupling>), MotError> {
    check_convex_order_with(mu, nu, &SolverOptions::default())
}

pub fn check_convex_order_with(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    opts: &SolverOptions,
) -> Result<(bool, Option<DiscreteCoupling>), MotError> {
    if mu.dim() != nu.dim() {
        return Err(MotError::DimensionMismatch(mu.dim(), nu.dim()));
    }
    if mean_gap(mu, nu) > MEAN_TOL {
        return Ok((false, None));
    }
    let asm = assemble(mu, nu, &|_, _| 0.0, true)?;
    let (ok, x) = lp::lp_feasible_with(asm.problem.matrix(), asm.problem.rhs(), opts)?;
    match (ok, x) {
        (true, Some(x)) => Ok((true, Some(asm.coupling_from(&x)?))),
        _ => Ok((false, None)),
    }
}

/// How the diameter of a cell is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DiameterMode {
    /// Diameter of the atoms that fall in the cell (equal to the diameter of
    /// their closed convex hull).
    #[default]
    AtomSpread,
    /// Diameter of the cell itself; infinite for unbounded cells.
    CellGeometry,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiameterBound {
    /// (Σ_cells diam^p · mass)^{1/p}.
    pub weighted: f64,
    /// max diam over cells of positive mass.
    pub sup: f64,
}

/// Upper bound on W_p(γ, γ̂) for the proper barycentric quantisation γ̂ of
/// γ over the partition.
pub fn diameter_bound(gamma: &DiscreteMeasure, partition: &Partition, p: f64) -> Result<DiameterBound, PartitionError> {
    diameter_bound_with(gamma, partition, p, DiameterMode::AtomSpread)
}

/// Above this many atoms per cell the exact O(k²) spread in d ≥ 2 is
/// replaced by the bounding-box diagonal, which is an upper bound.
const EXACT_SPREAD_LIMIT: usize = 4096;

fn atom_spread(points: &[Point]) -> f64 {
    let Some(first) = points.first() else { return 0.0 };
    let d = first.dim();
    if d == 1 || points.len() > EXACT_SPREAD_LIMIT {
        let mut sq = 0.0;
        for k in 0..d {
            let (lo, hi) = points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.coord(k)), hi.max(p.coord(k))));
            sq += (hi - lo) * (hi - lo);
        }
        return sq.sqrt();
    }
    let mut best: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(a.dist(b));
        }
    }
    best
}

pub fn diameter_bound_with(
    gamma: &DiscreteMeasure,
    partition: &Partition,
    p: f64,
    mode: DiameterMode,
) -> Result<DiameterBound, PartitionError> {
    let cells = partition.assign(gamma.points())?;
    let mut members: Vec<Vec<Point>> = vec![Vec::new(); partition.len()];
    let mut mass = vec![Vec::new(); partition.len()];
    for (a, c) in gamma.atoms().iter().zip(&cells) {
        members[*c].push(a.point);
        mass[*c].push(a.weight);
    }
    let mut terms = Vec::new();
    let mut sup: f64 = 0.0;
    for (c, pts) in members.iter().enumerate() {
        let m = compensated_sum(mass[c].iter().copied());
        if m <= 0.0 {
            continue;
        }
        let diam = match mode {
            DiameterMode::AtomSpread => atom_spread(pts),
            DiameterMode::CellGeometry => partition.cells()[c].diameter(),
        };
        sup = sup.max(diam);
        terms.push(if diam == 0.0 { 0.0 } else { diam.powf(p) * m });
    }
    let weighted = if terms.iter().any(|t| t.is_infinite()) {
        f64::INFINITY
    } else {
        compensated_sum(terms).powf(1.0 / p)
    };
    Ok(DiameterBound { weighted, sup })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Representation {
    /// ζ = barycentric quantisation of `coupling` over (`partition`, ℝ^d).
    Represented { coupling: DiscreteCoupling, partition: Partition },
    NotInOrder,
}

/// Writes ζ ≤cx γ as a barycentric quantisation of γ: the Strassen witness
/// of (ζ, γ) with singleton cells at the atoms of ζ.
pub fn represent_as_barycentric(zeta: &DiscreteMeasure, gamma: &DiscreteMeasure) -> Result<Representation, MotError> {
    let (ok, witness) = check_convex_order(zeta, gamma)?;
    let Some(coupling) = witness.filter(|_| ok) else {
        return Ok(Representation::NotInOrder);
    };
    let mut cells: Vec<Cell> = zeta
        .points()
        .map(|p| {
            if p.dim() == 1 {
                Cell::Interval { a: p.coord(0), b: p.coord(0), a_closed: true, b_closed: true }
            } else {
                Cell::Box(BoxCell::singleton(p))
            }
        })
        .collect();
    cells.push(Cell::Remainder);
    Ok(Representation::Represented { coupling, partition: Partition::new(zeta.dim(), cells)? })
}

/// One level of a stability experiment: the partitions of the two
/// marginals and the label n used in tables.
#[derive(Clone, Debug)]
pub struct StabilityLevel {
    pub n: usize,
    pub pi1: Partition,
    pub pi2: Partition,
}

#[derive(Clone, Debug)]
pub struct StabilityRow {
    pub n: usize,
    pub p_n: f64,
    pub e_pitilde_c: f64,
    pub bound_mu: f64,
    pub bound_nu: f64,
    pub mu_n: DiscreteMeasure,
    pub nu_n: DiscreteMeasure,
    /// Optimal MOT coupling of (mu_n, nu_n).
    pub optimiser: DiscreteCoupling,
    /// P_n ≤ E^π̃[c] + slack.
    pub chain_holds: bool,
    /// P_n ≥ P − tol when a reference optimum was supplied.
    pub above_known: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct StabilityTable {
    pub rows: Vec<StabilityRow>,
}

impl StabilityTable {
    pub const CSV_HEADER: &'static str = "n,P_n,E_pitilde_c,bound_mu,bound_nu";

    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.chain_holds && r.above_known != Some(false))
    }

    /// Columns n, P_n, E_pitilde_c, bound_mu, bound_nu.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{}",
                r.n,
                fmt_real(r.p_n),
                fmt_real(r.e_pitilde_c),
                fmt_real(r.bound_mu),
                fmt_real(r.bound_nu)
            )
            .unwrap();
        }
        s
    }
}

/// Seventeen significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Quantises π̃ at every level, solves the MOT between the quantised
/// marginals and records P_n next to E^π̃[c]. Levels run through `exec`.
pub fn stability_experiment(
    pi_tilde: &KernelCoupling,
    cost: &CostFunction,
    levels: &[StabilityLevel],
    known_optimum: Option<(f64, f64)>,
    exec: Execution,
) -> Result<StabilityTable, MotError> {
    let pi = pi_tilde.discretise()?;
    let expected = pi_tilde.expected_cost(cost);
    let defect = martingale_defect(&pi);
    if defect > 1e-9 {
        return Err(QuantiseError::NotMartingale(defect).into());
    }
    let opts = SolverOptions { exec: Execution::Sequential, ..Default::default() };
    let solve_level = |level: &StabilityLevel| -> Result<StabilityRow, MotError> {
        let q = quantise::barycentric_quantise(&pi, &level.pi1, &level.pi2)?;
        let (p_n, optimiser) = match solve_discrete_mot_from(&q.mu_n, &q.nu_n, cost, &q.coupling_n, &opts)? {
            MotOutcome::Solved { value, coupling, .. } => (value, coupling),
            MotOutcome::InfeasibleOrder => return Err(MotError::UnexpectedStatus(LpStatus::Infeasible)),
        };
        log::info!("level n = {}: P_n = {p_n:.6}, {} x {} atoms", level.n, q.mu_n.len(), q.nu_n.len());
        Ok(StabilityRow {
            n: level.n,
            p_n,
            e_pitilde_c: expected,
            bound_mu: q.bound_mu,
            bound_nu: q.bound_nu,
            chain_holds: p_n <= expected + STABILITY_SLACK,
            above_known: known_optimum.map(|(p, tol)| p_n >= p - tol),
            mu_n: q.mu_n,
            nu_n: q.nu_n,
            optimiser,
        })
    };
    let rows = par::map(exec, levels, solve_level).into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(StabilityTable { rows })
}
