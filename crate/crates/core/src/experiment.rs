//! Worked example pipelines: quantise an explicit martingale transport at a
//! list of levels, solve the MOT between the quantised marginals, and keep
//! what is needed for tables and heat maps.

use std::fmt::Write as _;

use crate::couplings;
use crate::measures::{BoxBounds, CostFunction, DiscreteCoupling, KernelCoupling, QuadratureMeasure};
use crate::mot::{self, fmt_real, MotError, StabilityLevel, StabilityTable};
use crate::par::Execution;
use crate::quantise::{self, QuantilePath};

/// Input transport for the uniform example on the line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UniformInput {
    LeftCurtain,
    RightCurtain,
    Optimal,
}

pub const EXAMPLE1_LEVELS: [usize; 5] = [5, 10, 20, 50, 100];
pub const EXAMPLE2_LEVELS: [usize; 4] = [5, 10, 15, 20];
pub const EXAMPLE3_LEVELS: [usize; 3] = [5, 10, 20];
pub const EXAMPLE2_Z_NODES: usize = 101;
pub const LLOYD_ITERATIONS: usize = 100;
/// Bins per axis of the planar projection histogram.
pub const PROJECTION_BINS: usize = 200;

pub fn default_cost() -> CostFunction {
    CostFunction::power(2.3)
}

pub fn default_cost_2d() -> CostFunction {
    CostFunction::power_per_coordinate(2.3)
}

#[derive(Clone, Debug)]
pub struct ExampleRun {
    pub table: StabilityTable,
}

impl ExampleRun {
    /// Optimiser at the largest level.
    pub fn final_optimiser(&self) -> Option<&DiscreteCoupling> {
        self.table.rows.iter().max_by_key(|r| r.n).map(|r| &r.optimiser)
    }
}

fn run(
    pi: &KernelCoupling,
    cost: &CostFunction,
    levels: Vec<StabilityLevel>,
    known: Option<(f64, f64)>,
    exec: Execution,
) -> Result<ExampleRun, MotError> {
    Ok(ExampleRun { table: mot::stability_experiment(pi, cost, &levels, known, exec)? })
}

pub fn uniform_kernel(input: UniformInput, nodes: usize) -> Result<KernelCoupling, MotError> {
    Ok(match input {
        UniformInput::LeftCurtain => couplings::left_curtain_uniform(nodes)?,
        UniformInput::RightCurtain => couplings::right_curtain_uniform(nodes)?,
        UniformInput::Optimal => couplings::optimal_pm1_uniform(nodes)?,
    })
}

/// U[−1,1] → U[−2,2] with quantile cells of both marginals; P = 1.
pub fn example1(
    input: UniformInput,
    nodes: usize,
    levels: &[usize],
    cost: &CostFunction,
    exec: Execution,
) -> Result<ExampleRun, MotError> {
    let pi = uniform_kernel(input, nodes)?;
    let target = QuadratureMeasure::uniform_box(BoxBounds::cube(1, -2.0, 2.0).expect("valid box"), 1)?;
    let levels = levels
        .iter()
        .map(|&n| {
            Ok(StabilityLevel {
                n,
                pi1: quantise::build_quantile_cells_quadrature(pi.marginal(), n, QuantilePath::Exact)?,
                pi2: quantise::build_quantile_cells_quadrature(&target, n, QuantilePath::Exact)?,
            })
        })
        .collect::<Result<Vec<_>, MotError>>()?;
    run(&pi, cost, levels, Some((1.0, 0.05)), exec)
}

/// N(0,1) → N(0,2) through Y = X + Z, Voronoi cells from Lloyd sites of
/// the first marginal, the same cells for both marginals.
pub fn example2(
    nodes: usize,
    z_nodes: usize,
    levels: &[usize],
    cost: &CostFunction,
    seed: u64,
    exec: Execution,
) -> Result<ExampleRun, MotError> {
    let pi = couplings::gaussian_convolution(0.0, 1.0, 1.0, nodes, z_nodes)?;
    let levels = levels
        .iter()
        .map(|&n| {
            let sites = quantise::lloyd_sites(pi.marginal().grid(), n, LLOYD_ITERATIONS, seed)?;
            let cells = quantise::build_voronoi_cells(&sites)?;
            Ok(StabilityLevel { n, pi1: cells.clone(), pi2: cells })
        })
        .collect::<Result<Vec<_>, MotError>>()?;
    run(&pi, cost, levels, None, exec)
}

/// U[−1,1]² → U[−2,2]² through Rademacher moves, n × n boxes on each
/// marginal's support.
pub fn example3(
    nodes_per_axis: usize,
    levels: &[usize],
    cost: &CostFunction,
    exec: Execution,
) -> Result<ExampleRun, MotError> {
    let pi = couplings::rademacher_2d_uniform(nodes_per_axis)?;
    let inner = BoxBounds::cube(2, -1.0, 1.0).expect("valid box");
    let outer = BoxBounds::cube(2, -2.0, 2.0).expect("valid box");
    let levels = levels
        .iter()
        .map(|&n| {
            Ok(StabilityLevel {
                n,
                pi1: quantise::build_grid_boxes(&inner, &[n, n])?,
                pi2: quantise::build_grid_boxes(&outer, &[n, n])?,
            })
        })
        .collect::<Result<Vec<_>, MotError>>()?;
    run(&pi, cost, levels, None, exec)
}

/// Mass of atoms with ||y − x| − 1| ≤ tol.
pub fn mass_near_unit_jumps(pi: &DiscreteCoupling, tol: f64) -> f64 {
    pi.atoms().iter().filter(|a| (a.x.dist(&a.y) - 1.0).abs() <= tol).map(|a| a.weight).sum()
}

/// (x₂ − x₁, y₂ − y₁) for a planar coupling atom.
fn projection(a: &crate::measures::CouplingAtom) -> (f64, f64) {
    (a.x.coord(1) - a.x.coord(0), a.y.coord(1) - a.y.coord(0))
}

/// Mass whose projection lies within `tol` (vertically) of one of the lines
/// v = u − 2, v = u, v = u + 2.
pub fn mass_near_projection_lines(pi: &DiscreteCoupling, tol: f64) -> f64 {
    pi.atoms()
        .iter()
        .filter(|a| {
            let (u, v) = projection(a);
            [-2.0, 0.0, 2.0].iter().any(|s| (v - u - s).abs() <= tol)
        })
        .map(|a| a.weight)
        .sum()
}

/// Dense weight matrix of a coupling, x-atoms by row and y-atoms by column.
/// The first row holds the y values, the first column the x values.
pub fn heatmap_csv(pi: &DiscreteCoupling) -> String {
    let mut xs: Vec<_> = pi.atoms().iter().map(|a| a.x).collect();
    let mut ys: Vec<_> = pi.atoms().iter().map(|a| a.y).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(|a, b| a.lex_cmp(b));
        v.dedup();
    }
    let mut grid = vec![vec![0.0; ys.len()]; xs.len()];
    for a in pi.atoms() {
        let i = xs.binary_search_by(|p| p.lex_cmp(&a.x)).expect("x listed");
        let j = ys.binary_search_by(|p| p.lex_cmp(&a.y)).expect("y listed");
        grid[i][j] += a.weight;
    }
    let label = |p: &crate::measures::Point| p.coords().iter().map(|c| fmt_real(*c)).collect::<Vec<_>>().join(" ");
    let mut s = String::from("x\\y");
    for y in &ys {
        write!(s, ",{}", label(y)).unwrap();
    }
    s.push('\n');
    for (x, row) in xs.iter().zip(&grid) {
        s.push_str(&label(x));
        for w in row {
            write!(s, ",{}", fmt_real(*w)).unwrap();
        }
        s.push('\n');
    }
    s
}

/// Histogram of (x₂ − x₁, y₂ − y₁) on [−2,2] × [−4,4] with `bins` per axis.
/// Rows index u, columns v; bin centres label both.
pub fn projection_histogram_csv(pi: &DiscreteCoupling, bins: usize) -> String {
    let (u0, u1, v0, v1) = (-2.0, 2.0, -4.0, 4.0);
    let bin = |t: f64, lo: f64, hi: f64| (((t - lo) / (hi - lo) * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
    let mut grid = vec![vec![0.0; bins]; bins];
    for a in pi.atoms() {
        let (u, v) = projection(a);
        grid[bin(u, u0, u1)][bin(v, v0, v1)] += a.weight;
    }
    let centre = |k: usize, lo: f64, hi: f64| lo + (k as f64 + 0.5) * (hi - lo) / bins as f64;
    let mut s = String::from("u\\v");
    for k in 0..bins {
        write!(s, ",{}", fmt_real(centre(k, v0, v1))).unwrap();
    }
    s.push('\n');
    for (k, row) in grid.iter().enumerate() {
        s.push_str(&fmt_real(centre(k, u0, u1)));
        for w in row {
            write!(s, ",{}", fmt_real(*w)).unwrap();
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Point;

    #[test]
    fn small_example1_chain() {
        let run = example1(UniformInput::LeftCurtain, 200, &[2, 4], &default_cost(), Execution::Sequential).unwrap();
        assert_eq!(run.table.rows.len(), 2);
        for r in &run.table.rows {
            assert!(r.chain_holds, "P_n = {} > E = {}", r.p_n, r.e_pitilde_c);
            assert!(r.p_n > 0.0);
        }
        let csv = run.table.to_csv();
        assert!(csv.starts_with("n,P_n,E_pitilde_c,bound_mu,bound_nu\n2,"));
    }

    #[test]
    fn small_example3_runs() {
        let run = example3(8, &[2], &default_cost_2d(), Execution::Sequential).unwrap();
        let r = &run.table.rows[0];
        assert!(r.chain_holds);
        assert!(mot::martingale_defect(&r.optimiser) < 1e-8);
    }

    #[test]
    fn tallies_and_heatmaps() {
        let pi = DiscreteCoupling::new(
            1,
            [(0.0, -1.0, 0.25), (0.0, 1.0, 0.25), (0.5, 0.6, 0.5)].map(|(x, y, w)| (Point::scalar(x), Point::scalar(y), w)),
        )
        .unwrap();
        assert_eq!(mass_near_unit_jumps(&pi, 0.15), 0.5);
        let h = heatmap_csv(&pi);
        let lines: Vec<&str> = h.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].split(',').count(), 4);

        let planar = DiscreteCoupling::new(
            2,
            [((0.0, 0.0), (1.0, 0.0), 0.5), ((0.0, 0.0), (-1.0, 1.0), 0.5)]
                .map(|(x, y, w)| (Point::planar(x.0, x.1), Point::planar(y.0, y.1), w)),
        )
        .unwrap();
        assert_eq!(mass_near_projection_lines(&planar, 0.2), 0.5);
        let h = projection_histogram_csv(&planar, 4);
        assert_eq!(h.lines().count(), 5);
    }
}
