//! Standard-form linear programs, min dᵀx subject to Ax = b, x ≥ 0.
//!
//! The solver is a two-phase revised simplex over a dense explicit basis
//! inverse. It is the single engine behind the OT, MOT and convex-order
//! computations in [`crate::mot`].

mod lu;
mod simplex;

use std::fmt::Write as _;

use thiserror::Error;

use crate::par::Execution;

/// Smallest admissible |pivot| in the ratio test.
pub const PIVOT_TOL: f64 = 1e-10;
/// Reduced costs above −this count as nonnegative.
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Relative primal residual accepted for an optimal basis.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Phase-one objective (relative to 1 + ‖b‖∞) above which the problem is
/// declared infeasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in problem data")]
    NonFinite,
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("numerical failure: residual {0:e} after refactorisation")]
    Numerical(f64),
    #[error("malformed text dump: {0}")]
    Parse(String),
}

/// Column-compressed sparse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseColumns {
    n_rows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseColumns {
    /// Builds from columns given as `(row, value)` lists. Zeros are dropped.
    pub fn from_columns<I, C>(n_rows: usize, columns: I) -> Result<Self, LpError>
    where
        I: IntoIterator<Item = C>,
        C: IntoIterator<Item = (usize, f64)>,
    {
        let mut m = SparseColumns { n_rows, col_ptr: vec![0], row_idx: Vec::new(), values: Vec::new() };
        for col in columns {
            let mut entries: Vec<(usize, f64)> = col.into_iter().filter(|(_, v)| *v != 0.0).collect();
            entries.sort_by_key(|e| e.0);
            for w in entries.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(LpError::Dimension(format!("duplicate row {} in a column", w[0].0)));
                }
            }
            for (r, v) in entries {
                if r >= n_rows {
                    return Err(LpError::Dimension(format!("row {r} out of {n_rows}")));
                }
                if !v.is_finite() {
                    return Err(LpError::NonFinite);
                }
                m.row_idx.push(r);
                m.values.push(v);
            }
            m.col_ptr.push(m.row_idx.len());
        }
        Ok(m)
    }

    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self, LpError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(LpError::Dimension("ragged rows".into()));
        }
        Self::from_columns(n_rows, (0..n_cols).map(|j| rows.iter().enumerate().map(move |(i, r)| (i, r[j]))))
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.col_ptr[j], self.col_ptr[j + 1]);
        self.row_idx[s..e].iter().copied().zip(self.values[s..e].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.column(j).find(|(r, _)| *r == i).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        let mut rows = vec![vec![0.0; self.n_cols()]; self.n_rows];
        for j in 0..self.n_cols() {
            for (i, v) in self.column(j) {
                rows[i][j] = v;
            }
        }
        rows
    }

    /// A·x.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        for (j, xj) in x.iter().enumerate() {
            if *xj != 0.0 {
                for (i, v) in self.column(j) {
                    out[i] += v * xj;
                }
            }
        }
        out
    }
}

/// min dᵀx s.t. Ax = b, x ≥ 0.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    objective: Vec<f64>,
    matrix: SparseColumns,
    rhs: Vec<f64>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, matrix: SparseColumns, rhs: Vec<f64>) -> Result<Self, LpError> {
        if objective.len() != matrix.n_cols() {
            return Err(LpError::Dimension(format!(
                "{} objective entries for {} columns",
                objective.len(),
                matrix.n_cols()
            )));
        }
        if rhs.len() != matrix.n_rows() {
            return Err(LpError::Dimension(format!("{} rhs entries for {} rows", rhs.len(), matrix.n_rows())));
        }
        if objective.iter().chain(&rhs).any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite);
        }
        Ok(LpProblem { objective, matrix, rhs })
    }

    pub fn from_dense(objective: Vec<f64>, rows: &[Vec<f64>], rhs: Vec<f64>) -> Result<Self, LpError> {
        let matrix = SparseColumns::from_dense_rows(rows)?;
        // An empty row list loses the column count.
        if rows.is_empty() {
            let matrix = SparseColumns::from_columns(0, objective.iter().map(|_| Vec::new()))?;
            return Self::new(objective, matrix, rhs);
        }
        Self::new(objective, matrix, rhs)
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn matrix(&self) -> &SparseColumns {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rhs.len()
    }

    /// ‖Ax − b‖∞.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.matrix.mul(x).iter().zip(&self.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Plain-text dump: the objective on the first line, then one line per
    /// constraint row, `a_1 ... a_n | b`. Dense; meant for small problems.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
        writeln!(s, "{}", join(&self.objective)).unwrap();
        for (row, b) in self.matrix.to_dense_rows().iter().zip(&self.rhs) {
            writeln!(s, "{} | {b:e}", join(row)).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, LpError> {
        let parse = |s: &str| -> Result<Vec<f64>, LpError> {
            s.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| LpError::Parse(format!("{t:?}: {e}"))))
                .collect()
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let objective = parse(lines.next().ok_or_else(|| LpError::Parse("empty input".into()))?)?;
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for line in lines {
            let (coeffs, b) =
                line.split_once('|').ok_or_else(|| LpError::Parse(format!("missing '|' in {line:?}")))?;
            rows.push(parse(coeffs)?);
            let b = parse(b)?;
            if b.len() != 1 {
                return Err(LpError::Parse(format!("expected one rhs value in {line:?}")));
            }
            rhs.push(b[0]);
        }
        Self::from_dense(objective, &rows, rhs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal solution; empty unless optimal.
    pub x: Vec<f64>,
    /// dᵀx when optimal, +∞ when infeasible, −∞ when unbounded.
    pub objective: f64,
    /// ‖Ax − b‖∞ of the returned x (zero when there is no x).
    pub primal_residual: f64,
    /// Smallest reduced cost over the final nonbasic columns.
    pub min_reduced_cost: f64,
    pub iterations: usize,
}

/// Entering/leaving variable selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PivotRule {
    /// Bland's smallest-index rule throughout.
    Bland,
    /// Most negative reduced cost, switching to Bland's rule for as long as
    /// pivots stay degenerate.
    #[default]
    DantzigWithBland,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub rule: PivotRule,
    pub exec: Execution,
    /// Defaults to 50·(rows + columns) + 1000.
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { rule: PivotRule::default(), exec: Execution::default(), max_iterations: None }
    }
}

pub fn lp_solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    lp_solve_with(problem, &SolverOptions::default())
}

pub fn lp_solve_with(problem: &LpProblem, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    simplex::solve(problem, opts, false, None)
}

/// Warm start from a feasible point. When the columns carrying its positive
/// entries are independent, phase two starts from the basis they span and
/// phase one is skipped; otherwise the solve starts cold.
pub fn lp_solve_from(problem: &LpProblem, start: &[f64], opts: &SolverOptions) -> Result<LpSolution, LpError> {
    if start.len() != problem.n_vars() {
        return Err(LpError::Dimension(format!("start has {} entries for {} variables", start.len(), problem.n_vars())));
    }
    if start.iter().any(|v| !v.is_finite()) {
        return Err(LpError::NonFinite);
    }
    simplex::solve(problem, opts, false, Some(start))
}

/// Whether {x ≥ 0 : Ax = b} is nonempty, with a witness when it is.
pub fn lp_feasible(matrix: &SparseColumns, rhs: &[f64]) -> Result<(bool, Option<Vec<f64>>), LpError> {
    lp_feasible_with(matrix, rhs, &SolverOptions::default())
}

pub fn lp_feasible_with(
    matrix: &SparseColumns,
    rhs: &[f64],
    opts: &SolverOptions,
) -> Result<(bool, Option<Vec<f64>>), LpError> {
    let problem = LpProblem::new(vec![0.0; matrix.n_cols()], matrix.clone(), rhs.to_vec())?;
    let sol = simplex::solve(&problem, opts, true, None)?;
    Ok(match sol.status {
        LpStatus::Optimal => (true, Some(sol.x)),
        _ => (false, None),
    })
}
