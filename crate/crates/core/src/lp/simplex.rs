//! Two-phase revised simplex on a sparse LU factor of the basis.
//!
//! Rows with negative right-hand side are negated up front so that the
//! all-artificial basis is feasible. Artificial variable r has index n + r.
//!
//! Phase two works on a perturbed right-hand side, shifted further whenever
//! a slightly negative basic variable leaves. The original b is put back at
//! the end and any basic variable that turns negative is repaired with dual
//! simplex pivots.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lu::Factor;
use super::{
    LpError, LpProblem, LpSolution, LpStatus, PivotRule, SolverOptions, FEASIBILITY_TOL, OPTIMALITY_TOL,
    PIVOT_TOL, RESIDUAL_TOL,
};
use crate::measures::compensated_sum;
use crate::par::{self, Execution};

/// Basis updates kept as etas before the factor is rebuilt.
const REFACTOR_EVERY: usize = 100;
/// Consecutive degenerate pivots before Bland's rule takes over.
const DEGENERATE_STREAK: usize = 50;
const DEGENERATE_STEP: f64 = 1e-12;
const LOCKED_PIVOT_TOL: f64 = 1e-7;
const CRASH_PIVOT_TOL: f64 = 1e-7;
/// Pivots smaller than this are refused while other entering columns exist.
const SMALL_PIVOT: f64 = 1e-7;
/// Same, relative to the largest entry of the transformed column.
const SMALL_PIVOT_REL: f64 = 1e-8;
/// Infeasibility tolerated by the first pass of the ratio test.
const HARRIS_TOL: f64 = 1e-8;
/// Allowed disagreement between the column and row forms of the pivot.
const PIVOT_CHECK_TOL: f64 = 1e-8;
/// Phase-two perturbation of basic values, relative to ‖b‖∞.
const PERTURB_REL: f64 = 1e-6;
const PERTURB_SEED: u64 = 0x5EED;
/// Minimum number of columns priced per partial-pricing segment.
const PRICING_SEGMENT: usize = 4096;
/// Relative drift in B x_B = b that triggers a fresh solve for x_B.
const DRIFT_TOL: f64 = 1e-9;

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Engine<'a> {
    p: &'a LpProblem,
    m: usize,
    n: usize,
    sign: Vec<f64>,
    b: Vec<f64>,
    factor: Factor,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    rejected: Vec<usize>,
    is_rejected: Vec<bool>,
    xb: Vec<f64>,
    y: Vec<f64>,
    phase_one: bool,
    rule: PivotRule,
    exec: Execution,
    max_iterations: usize,
    iterations: usize,
    refactors: usize,
    xb_resets: usize,
    restorations: usize,
    cursor: usize,
    unperturbed: Option<Vec<f64>>,
    scale: f64,
}

impl<'a> Engine<'a> {
    fn new(p: &'a LpProblem, opts: &SolverOptions) -> Self {
        let (m, n) = (p.n_rows(), p.n_vars());
        let sign: Vec<f64> = p.rhs().iter().map(|b| if *b < 0.0 { -1.0 } else { 1.0 }).collect();
        let b: Vec<f64> = p.rhs().iter().zip(&sign).map(|(b, s)| b * s).collect();
        let identity: Vec<Vec<(usize, f64)>> = (0..m).map(|i| vec![(i, 1.0)]).collect();
        let factor = Factor::new(m, &identity).expect("identity is nonsingular");
        Engine {
            p,
            m,
            n,
            sign,
            xb: b.clone(),
            b,
            factor,
            basis: (n..n + m).collect(),
            is_basic: vec![false; n],
            rejected: Vec::new(),
            is_rejected: vec![false; n],
            y: vec![0.0; m],
            phase_one: true,
            rule: opts.rule,
            exec: opts.exec,
            max_iterations: opts.max_iterations.unwrap_or(50 * (m + n) + 1000),
            iterations: 0,
            refactors: 0,
            xb_resets: 0,
            restorations: 0,
            cursor: 0,
            unperturbed: None,
            scale: 1.0 + p.rhs().iter().fold(0.0_f64, |a, b| a.max(b.abs())),
        }
    }

    #[inline]
    fn cost_of(&self, var: usize) -> f64 {
        match (var >= self.n, self.phase_one) {
            (true, true) => 1.0,
            (true, false) | (false, true) => 0.0,
            (false, false) => self.p.objective()[var],
        }
    }

    fn recompute_y(&mut self) {
        let cb: Vec<f64> = self.basis.iter().map(|&v| self.cost_of(v)).collect();
        self.y = self.factor.btran(cb);
    }

    /// Row r of B⁻¹ in the orientation of the original rows.
    fn binv_row(&self, r: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.m];
        e[r] = 1.0;
        self.factor.btran(e).iter().zip(&self.sign).map(|(v, s)| v * s).collect()
    }

    /// Column of basis position c in the sign-adjusted system.
    fn basis_column(&self, var: usize) -> Vec<(usize, f64)> {
        if var >= self.n {
            vec![(var - self.n, 1.0)]
        } else {
            self.p.matrix().column(var).map(|(k, v)| (k, v * self.sign[k])).collect()
        }
    }

    /// Duals in the orientation of the original rows.
    fn signed_duals(&self) -> Vec<f64> {
        self.y.iter().zip(&self.sign).map(|(y, s)| y * s).collect()
    }

    #[inline]
    fn reduced_cost(&self, ys: &[f64], j: usize) -> f64 {
        let mut d = self.cost_of(j);
        for (i, v) in self.p.matrix().column(j) {
            d -= ys[i] * v;
        }
        d
    }

    /// Partial Dantzig pricing over rotating column segments: the most
    /// negative reduced cost in the first segment (from the cursor onwards)
    /// that has any. Under Bland the first improving column overall.
    fn price(&mut self, bland: bool) -> Option<(usize, f64)> {
        let ys = self.signed_duals();
        if bland {
            return (0..self.n).filter(|j| !self.is_basic[*j] && !self.is_rejected[*j]).find_map(|j| {
                let d = self.reduced_cost(&ys, j);
                (d < -OPTIMALITY_TOL).then_some((j, d))
            });
        }
        let seg = PRICING_SEGMENT.max(self.n / 32).min(self.n.max(1));
        let segments = self.n.div_ceil(seg).max(1);
        for k in 0..segments {
            let s = (self.cursor + k) % segments;
            let (lo, hi) = (s * seg, ((s + 1) * seg).min(self.n));
            let found = par::argmin(self.exec, hi - lo, |t| {
                let j = lo + t;
                if self.is_basic[j] || self.is_rejected[j] {
                    return None;
                }
                let d = self.reduced_cost(&ys, j);
                (d < -OPTIMALITY_TOL).then_some(d)
            });
            if let Some((d, t)) = found {
                self.cursor = (s + 1) % segments;
                return Some((lo + t, d));
            }
        }
        None
    }

    /// B⁻¹ a_q in the sign-adjusted system.
    fn column(&self, q: usize) -> Vec<f64> {
        let mut a = vec![0.0; self.m];
        for (k, v) in self.basis_column(q) {
            a[k] = v;
        }
        self.factor.ftran(a)
    }

    /// Harris two-pass ratio test. Pass one finds the largest step that keeps
    /// every basic variable above −FEASIBILITY_TOL; pass two picks, among rows
    /// blocking within that step, the largest pivot (or under Bland the
    /// smallest basis index among reasonably sized pivots).
    fn ratio_test(&self, alpha: &[f64], bland: bool) -> Option<(usize, f64)> {
        let amax = alpha.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        if !self.phase_one {
            // Artificials left at zero on redundant rows must stay at zero.
            // Entries below the relative threshold are rounding noise on
            // rows that are linear combinations of others.
            let floor = LOCKED_PIVOT_TOL * amax;
            let locked = (0..self.m)
                .filter(|&i| self.basis[i] >= self.n && alpha[i].abs() > floor)
                .max_by(|&a, &b| alpha[a].abs().total_cmp(&alpha[b].abs()).then(b.cmp(&a)));
            if let Some(r) = locked {
                return Some((r, 0.0));
            }
        }
        let phase_two = !self.phase_one;
        let eligible = |i: usize| alpha[i] > PIVOT_TOL * amax && !(phase_two && self.basis[i] >= self.n);
        let bound = (0..self.m)
            .filter(|&i| eligible(i))
            .map(|i| (self.xb[i].max(0.0) + HARRIS_TOL) / alpha[i])
            .fold(f64::INFINITY, f64::min);
        if !bound.is_finite() {
            return None;
        }
        let candidates: Vec<usize> =
            (0..self.m).filter(|&i| eligible(i) && self.xb[i].max(0.0) / alpha[i] <= bound).collect();
        let r = if bland {
            // Textbook rule: exact minimum ratio, smallest basis index on ties.
            let ratio = |i: usize| self.xb[i].max(0.0) / alpha[i];
            let min = candidates.iter().map(|&i| ratio(i)).fold(f64::INFINITY, f64::min);
            candidates.iter().copied().filter(|&i| ratio(i) <= min).min_by_key(|&i| self.basis[i])?
        } else {
            candidates.iter().copied().max_by(|&a, &b| alpha[a].total_cmp(&alpha[b]).then(b.cmp(&a)))?
        };
        // Under a shifted b (phase two) a slightly negative leaving variable
        // leaves at exactly zero; otherwise the step may be slightly negative.
        let x = if self.unperturbed.is_some() { self.xb[r].max(0.0) } else { self.xb[r] };
        Some((r, x / alpha[r]))
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64], theta: f64) -> Result<(), LpError> {
        let old = self.basis[r];
        if self.unperturbed.is_some() && old < self.n && self.xb[r] < 0.0 {
            let shift = -self.xb[r];
            for (k, v) in self.p.matrix().column(old) {
                self.b[k] += shift * v * self.sign[k];
            }
            self.xb[r] = 0.0;
        }
        for (x, a) in self.xb.iter_mut().zip(alpha) {
            *x -= theta * a;
        }
        self.xb[r] = theta;
        self.factor.update(r, alpha);

        if old < self.n {
            self.is_basic[old] = false;
        }
        self.basis[r] = q;
        self.is_basic[q] = true;
        self.iterations += 1;
        if self.factor.updates() >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    fn run_phase(&mut self) -> Result<PhaseEnd, LpError> {
        let mut since_check = 0;
        let mut streak = 0;
        let mut force = false;
        self.clear_rejected();
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            if since_check >= REFACTOR_EVERY {
                if self.basis_residual() > DRIFT_TOL * self.scale {
                    self.recompute_xb();
                    self.xb_resets += 1;
                }
                since_check = 0;
            }
            self.recompute_y();
            let bland = self.rule == PivotRule::Bland || streak >= DEGENERATE_STREAK;
            let Some((q, _)) = self.price(bland) else {
                if self.rejected.is_empty() {
                    return Ok(PhaseEnd::Optimal);
                }
                self.clear_rejected();
                force = true;
                continue;
            };
            let alpha = self.column(q);
            let Some((r, theta)) = self.ratio_test(&alpha, bland) else {
                return Ok(PhaseEnd::Unbounded);
            };
            let amax = alpha.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
            if alpha[r].abs() < SMALL_PIVOT.max(SMALL_PIVOT_REL * amax) && !force {
                self.is_rejected[q] = true;
                self.rejected.push(q);
                continue;
            }
            let rho = self.binv_row(r);
            let check: f64 = self.p.matrix().column(q).map(|(k, v)| rho[k] * v).sum();
            if (check - alpha[r]).abs() > PIVOT_CHECK_TOL * (1.0 + alpha[r].abs()) && self.factor.updates() > 0 {
                self.refactor()?;
                continue;
            }
            force = false;
            self.pivot(r, q, &alpha, theta)?;
            since_check += 1;
            streak = if theta <= DEGENERATE_STEP { streak + 1 } else { 0 };
        }
    }

    /// ‖B x_B − b‖∞ computed from the original columns.
    fn basis_residual(&self) -> f64 {
        let mut r = self.b.clone();
        for (i, &var) in self.basis.iter().enumerate() {
            let x = self.xb[i];
            if var >= self.n {
                r[var - self.n] -= x;
            } else {
                for (k, v) in self.p.matrix().column(var) {
                    r[k] -= v * self.sign[k] * x;
                }
            }
        }
        r.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    fn artificial_mass(&self) -> f64 {
        (0..self.m).filter(|i| self.basis[*i] >= self.n).map(|i| self.xb[i].max(0.0)).sum()
    }

    /// Builds a basis from the support of a feasible point by pivoting its
    /// columns in place of artificials. Succeeds when the support columns are
    /// independent and the resulting basic solution is feasible; leftover
    /// artificials then sit at zero.
    fn crash(&mut self, start: &[f64]) -> bool {
        for j in (0..self.n).filter(|&j| start[j] > 0.0) {
            let alpha = self.column(j);
            let row = (0..self.m)
                .filter(|&i| self.basis[i] >= self.n && alpha[i].abs() > CRASH_PIVOT_TOL)
                .max_by(|&a, &b| alpha[a].abs().total_cmp(&alpha[b].abs()).then(b.cmp(&a)));
            let Some(r) = row else {
                return false;
            };
            if self.pivot(r, j, &alpha, 0.0).is_err() {
                return false;
            }
        }
        self.recompute_xb();
        let tol = FEASIBILITY_TOL * self.scale;
        (0..self.m).all(|i| if self.basis[i] >= self.n { self.xb[i].abs() <= tol } else { self.xb[i] >= -tol })
            && self.basis_residual() <= DRIFT_TOL * self.scale
    }

    /// Shifts every basic structural variable up by a small distinct amount
    /// and moves b accordingly (b stays in the range of A, so redundant rows
    /// stay consistent). Ties in the ratio test then become unlikely.
    fn perturb(&mut self) {
        let typical = self.b.iter().map(|v| v.abs()).fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
        let mut rng = ChaCha8Rng::seed_from_u64(PERTURB_SEED);
        let original = self.b.clone();
        for i in 0..self.m {
            let var = self.basis[i];
            if var >= self.n {
                continue;
            }
            let e = PERTURB_REL * typical * (1.0 + rng.random::<f64>());
            for (k, v) in self.p.matrix().column(var) {
                self.b[k] += e * v * self.sign[k];
            }
            self.xb[i] += e;
        }
        self.unperturbed = Some(original);
    }

    /// Restores b and repairs the basic variables that went negative with
    /// dual simplex pivots; the basis stays dual feasible throughout.
    fn restore(&mut self) -> Result<(), LpError> {
        let Some(b) = self.unperturbed.take() else {
            return Ok(());
        };
        self.b = b;
        self.recompute_xb();
        let m = self.m;
        let tol = FEASIBILITY_TOL * self.scale;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            let leaving = (0..m)
                .filter(|&i| self.basis[i] < self.n && self.xb[i] < -tol)
                .min_by(|&a, &b| self.xb[a].total_cmp(&self.xb[b]).then(a.cmp(&b)));
            let Some(r) = leaving else {
                return Ok(());
            };
            self.recompute_y();
            let ys = self.signed_duals();
            let rho = self.binv_row(r);
            let entering = par::argmin(self.exec, self.n, |j| {
                if self.is_basic[j] {
                    return None;
                }
                let a: f64 = self.p.matrix().column(j).map(|(k, v)| rho[k] * v).sum();
                (a < -PIVOT_TOL).then(|| self.reduced_cost(&ys, j).max(0.0) / -a)
            });
            let Some((_, q)) = entering else {
                return Err(LpError::Numerical(-self.xb[r]));
            };
            let alpha = self.column(q);
            self.pivot(r, q, &alpha, self.xb[r] / alpha[r])?;
            self.restorations += 1;
        }
    }

    /// Pivots zero-level artificials out of the basis where some structural
    /// column has a nonzero entry in their row; the rest are redundant rows.
    fn drive_out_artificials(&mut self) -> Result<(), LpError> {
        for r in 0..self.m {
            if self.basis[r] < self.n {
                continue;
            }
            let rho = self.binv_row(r);
            let found = par::argmin(self.exec, self.n, |j| {
                if self.is_basic[j] {
                    return None;
                }
                let v: f64 = self.p.matrix().column(j).map(|(k, a)| rho[k] * a).sum();
                (v.abs() > 1e-9).then_some(-v.abs())
            });
            if let Some((_, j)) = found {
                let alpha = self.column(j);
                self.pivot(r, j, &alpha, 0.0)?;
            }
        }
        self.refactor()
    }

    fn clear_rejected(&mut self) {
        for j in self.rejected.drain(..) {
            self.is_rejected[j] = false;
        }
    }

    fn recompute_xb(&mut self) {
        self.xb = self.factor.ftran(self.b.clone());
    }

    /// Rebuilds the factor from the current basis columns.
    fn refactor(&mut self) -> Result<(), LpError> {
        let cols: Vec<Vec<(usize, f64)>> = self.basis.iter().map(|&v| self.basis_column(v)).collect();
        self.factor = Factor::new(self.m, &cols).map_err(|_| LpError::Numerical(f64::INFINITY))?;
        self.recompute_xb();
        self.clear_rejected();
        self.refactors += 1;
        Ok(())
    }

    fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (r, &var) in self.basis.iter().enumerate() {
            if var < self.n {
                x[var] = self.xb[r].max(0.0);
            }
        }
        x
    }

    fn min_reduced_cost(&mut self) -> f64 {
        self.recompute_y();
        let ys = self.signed_duals();
        let min = (0..self.n)
            .filter(|j| !self.is_basic[*j])
            .map(|j| self.reduced_cost(&ys, j))
            .fold(f64::INFINITY, f64::min);
        if min.is_finite() {
            min
        } else {
            0.0
        }
    }
}

fn terminal(status: LpStatus, iterations: usize) -> LpSolution {
    LpSolution {
        status,
        x: Vec::new(),
        objective: if status == LpStatus::Infeasible { f64::INFINITY } else { f64::NEG_INFINITY },
        primal_residual: 0.0,
        min_reduced_cost: 0.0,
        iterations,
    }
}

pub(super) fn solve(
    p: &LpProblem,
    opts: &SolverOptions,
    feasibility_only: bool,
    start: Option<&[f64]>,
) -> Result<LpSolution, LpError> {
    let mut e = Engine::new(p, opts);
    let scale = e.scale;

    let warm = match start {
        Some(x0) if e.crash(x0) => true,
        Some(_) => {
            log::debug!("start point is not a basic feasible solution; cold start");
            e = Engine::new(p, opts);
            false
        }
        None => false,
    };
    if !warm {
        e.run_phase()?;
        let w = e.artificial_mass();
        if w > FEASIBILITY_TOL * scale {
            log::debug!("phase one ended with artificial mass {w:e}");
            return Ok(terminal(LpStatus::Infeasible, e.iterations));
        }
    }
    e.drive_out_artificials()?;
    if feasibility_only {
        let x = e.primal();
        return Ok(LpSolution {
            status: LpStatus::Optimal,
            primal_residual: p.residual(&x),
            x,
            objective: 0.0,
            min_reduced_cost: 0.0,
            iterations: e.iterations,
        });
    }

    e.phase_one = false;
    e.perturb();
    let mut refactored = false;
    loop {
        match e.run_phase()? {
            PhaseEnd::Unbounded => return Ok(terminal(LpStatus::Unbounded, e.iterations)),
            PhaseEnd::Optimal => {}
        }
        e.restore()?;
        let x = e.primal();
        let residual = p.residual(&x);
        if residual <= RESIDUAL_TOL * scale {
            let objective = compensated_sum(x.iter().zip(p.objective()).map(|(x, c)| x * c));
            let min_reduced_cost = e.min_reduced_cost();
            if min_reduced_cost < -OPTIMALITY_TOL && !refactored {
                refactored = true;
                continue;
            }
            log::debug!(
                "simplex: {} iterations, {} refactors, {} resets, {} restorations",
                e.iterations,
                e.refactors,
                e.xb_resets,
                e.restorations
            );
            return Ok(LpSolution {
                status: LpStatus::Optimal,
                x,
                objective,
                primal_residual: residual,
                min_reduced_cost,
                iterations: e.iterations,
            });
        }
        if refactored {
            return Err(LpError::Numerical(residual));
        }
        e.refactor()?;
        refactored = true;
    }
}
