//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances are fixed here and reported alongside each result.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use martingale_quant::experiment::{self, UniformInput};
use martingale_quant::measures::{Cell, CostFunction, DiscreteMeasure, Partition, Point};
use martingale_quant::mot::{self, MotOutcome, Representation, StabilityTable};
use martingale_quant::quantise;
use martingale_quant::{couplings, Execution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXAMPLE1_BAND: f64 = 0.05;
const EXAMPLE1_BUDGET_SECS: f64 = 300.0;
const UNIT_JUMP_TOL: f64 = 0.15;
const PROJECTION_TOL: f64 = 0.2;
const GEOMETRY_SHARE: f64 = 0.9;
const SUITE_SIZE: usize = 200;
const U_TRIALS: usize = 50;
const OT_TRIALS: usize = 100;
const TIGHT: f64 = 1e-9;
const WITNESS: f64 = 1e-8;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn seeded(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0xACCE_0000 + tag)
}

fn in_order(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> bool {
    match mot::check_convex_order(mu, nu) {
        Ok((true, Some(w))) => common::valid_witness(&w, mu, nu, WITNESS),
        _ => false,
    }
}

fn p_values(t: &StabilityTable) -> String {
    t.rows.iter().map(|r| format!("P_{}={:.6}", r.n, r.p_n)).collect::<Vec<_>>().join(" ")
}

fn example1_reproduction(left: &StabilityTable, secs: f64) -> Outcome {
    let gaps: Vec<f64> = left.rows.iter().map(|r| (r.p_n - 1.0).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
    let last = *gaps.last().unwrap();
    outcome(
        monotone && last <= EXAMPLE1_BAND && secs <= EXAMPLE1_BUDGET_SECS,
        format!("{}; |P_n - 1| non-increasing: {monotone}; {secs:.1}s", p_values(left)),
    )
}

fn example1_geometry(left: &StabilityTable) -> Outcome {
    let row = left.rows.iter().max_by_key(|r| r.n).unwrap();
    let share = experiment::mass_near_unit_jumps(&row.optimiser, UNIT_JUMP_TOL);
    outcome(
        share >= GEOMETRY_SHARE,
        format!("n={}: {share:.6} of mass within {UNIT_JUMP_TOL} of |y-x|=1", row.n),
    )
}

fn example3_geometry() -> Outcome {
    let t = Instant::now();
    let run = match experiment::example3(couplings::DEFAULT_NODES_2D, &[20], &experiment::default_cost_2d(), Execution::Parallel) {
        Ok(run) => run,
        Err(e) => return outcome(false, format!("solve failed: {e}")),
    };
    let row = &run.table.rows[0];
    let share = experiment::mass_near_projection_lines(&row.optimiser, PROJECTION_TOL);
    outcome(
        share >= GEOMETRY_SHARE,
        format!("20 cells/axis: {share:.6} of mass within {PROJECTION_TOL} of v in {{u-2,u,u+2}}; P_n={:.9}; {:.1}s", row.p_n, t.elapsed().as_secs_f64()),
    )
}

/// Convex-order preservation and mean conservation over one shared suite.
fn quantisation_suite() -> (Outcome, Outcome) {
    let mut rng = seeded(1);
    let (mut order_failures, mut cross_failures, mut worst_mean) = (0, 0, 0.0_f64);
    for k in 0..SUITE_SIZE {
        let d = 1 + k % 2;
        let pi = common::martingale_coupling(&mut rng, d);
        let (p1, p2) = (common::partition(&mut rng, d), common::partition(&mut rng, d));
        let q = quantise::barycentric_quantise(&pi, &p1, &p2).expect("quantisation");
        let (mu, nu) = pi.marginals();
        let pairs = [(&q.mu_n, &q.nu_n), (&q.mu_n, &mu), (&q.nu_n, &nu)];
        for (a, b) in pairs {
            if !in_order(a, b) {
                order_failures += 1;
            }
            if d == 1 && !common::convex_order_1d(a, b, TIGHT) {
                cross_failures += 1;
            }
        }
        for m in [&q.mu_n, &q.nu_n] {
            worst_mean = worst_mean.max(m.barycentre().max_dist(&mu.barycentre()));
        }
        worst_mean = worst_mean.max(nu.barycentre().max_dist(&mu.barycentre()));
    }
    (
        outcome(
            order_failures == 0 && cross_failures == 0,
            format!("{SUITE_SIZE} couplings x 3 pairs: {order_failures} LP failures, {cross_failures} call-price failures (d=1)"),
        ),
        outcome(worst_mean <= TIGHT, format!("worst barycentre gap {worst_mean:.3e} (tol {TIGHT:e})")),
    )
}

fn bound_validity() -> Outcome {
    let mut rng = seeded(2);
    let (mut violations, mut route_gap, mut worst_slack) = (0, 0.0_f64, f64::INFINITY);
    for k in 0..SUITE_SIZE {
        let d = 1 + k % 2;
        let p = if rng.random_bool(0.5) { 1.0 } else { 2.0 };
        let gamma = common::measure(&mut rng, d, 20);
        let cells = common::partition(&mut rng, d);
        let hat = quantise::proper_barycentric_quantise(&gamma, &cells).expect("quantisation");
        let bound = mot::diameter_bound(&gamma, &cells, p).expect("bound").weighted;
        let w = mot::wasserstein_p(&gamma, &hat, p).expect("W_p");
        if w > bound + TIGHT {
            violations += 1;
        }
        worst_slack = worst_slack.min(bound - w);
        if d == 1 {
            route_gap = route_gap.max((w - mot::wasserstein_p_1d(&gamma, &hat, p).expect("W_p 1d")).abs());
        }
    }
    outcome(
        violations == 0 && route_gap <= TIGHT,
        format!("{SUITE_SIZE} instances: {violations} violations, min slack {worst_slack:.3e}, LP vs quantile W_p gap {route_gap:.3e}"),
    )
}

fn u_equivalence() -> Outcome {
    let mut rng = seeded(3);
    let (mut mismatches, mut checked) = (0, 0);
    for _ in 0..U_TRIALS {
        let mu = common::aligned_measure(&mut rng);
        for n in 2..=10 {
            let u = quantise::u_quantise(&mu, n).expect("U-quantisation");
            let cells = quantise::build_quantile_cells(&mu, n).expect("cells");
            let proper = quantise::proper_barycentric_quantise(&mu, &cells).expect("quantisation");
            checked += 1;
            if u.len() != proper.len() || !u.approx_eq(&proper, TIGHT) {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("{checked} (measure, n) pairs: {mismatches} mismatches at {TIGHT:e}"))
}

fn counterexample_fixtures() -> Outcome {
    let (mu, nu) = common::counterexample();
    let witness_ok = in_order(&mu, &nu);

    let reconstructed = match mot::represent_as_barycentric(&mu, &nu) {
        Ok(Representation::Represented { coupling, partition }) => {
            quantise::barycentric_quantise(&coupling, &partition, &Partition::whole(1))
                .is_ok_and(|r| r.nu_n.approx_eq(&mu, TIGHT))
        }
        _ => false,
    };

    // Every partition of the line into at most two intervals with endpoint
    // on a grid of step 1/8 in [-2, 2], either side closed.
    let mut partitions = vec![Partition::whole(1)];
    for k in -16..=16 {
        let a = f64::from(k) / 8.0;
        for left_closed in [false, true] {
            let cells = vec![
                Cell::Interval { a: f64::NEG_INFINITY, b: a, a_closed: false, b_closed: left_closed },
                Cell::Interval { a, b: f64::INFINITY, a_closed: !left_closed, b_closed: false },
            ];
            partitions.push(Partition::new(1, cells).expect("two intervals"));
        }
    }
    let mut three_point = 0;
    for p in &partitions {
        let q = quantise::proper_barycentric_quantise(&nu, p).expect("quantisation");
        if q.len() >= 3 || q.approx_eq(&mu, TIGHT) {
            three_point += 1;
        }
    }
    outcome(
        witness_ok && reconstructed && three_point == 0,
        format!(
            "witness valid: {witness_ok}; reconstruction within {TIGHT:e}: {reconstructed}; {} partitions searched, {three_point} give mu",
            partitions.len()
        ),
    )
}

fn lp_oracle() -> Outcome {
    let mut rng = seeded(4);
    let (mut worst, mut failures) = (0.0_f64, 0);
    for _ in 0..OT_TRIALS {
        let n = rng.random_range(1..=6);
        let d = rng.random_range(1..=2);
        let rho = [1.0, 2.0, 2.3][rng.random_range(0..3)];
        let cost = CostFunction::power(rho);
        let xs: Vec<Point> = (0..n).map(|_| common::point(&mut rng, d, -1.0, 1.0)).collect();
        let ys: Vec<Point> = (0..n).map(|_| common::point(&mut rng, d, -1.0, 1.0)).collect();
        let table: Vec<Vec<f64>> = xs.iter().map(|x| ys.iter().map(|y| cost.evaluate(x, y)).collect()).collect();
        let solved = mot::solve_discrete_ot(
            &DiscreteMeasure::uniform(&xs).unwrap(),
            &DiscreteMeasure::uniform(&ys).unwrap(),
            &cost,
        );
        match solved {
            Ok((value, _)) => worst = worst.max((value - common::permutation_minimum(&table)).abs()),
            Err(_) => failures += 1,
        }
    }
    outcome(
        failures == 0 && worst <= TIGHT,
        format!("{OT_TRIALS} trials: worst gap to permutation minimum {worst:.3e}, {failures} solver errors"),
    )
}

fn two_by_two_assembly() -> Outcome {
    let mu = DiscreteMeasure::on_line(&[(-0.5, 0.5), (0.5, 0.5)]).unwrap();
    let nu = DiscreteMeasure::on_line(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
    let cost = CostFunction::power(2.3);
    let asm = mot::assemble_mot_lp(&mu, &nu, &cost).expect("assembly");
    // Variables p11, p21, p12, p22; rows: x-marginals, y-marginals, barycentres.
    let a = vec![
        vec![1.0, 0.0, 1.0, 0.0],
        vec![0.0, 1.0, 0.0, 1.0],
        vec![1.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0, 1.0],
        vec![-1.0, 0.0, 1.0, 0.0],
        vec![0.0, -1.0, 0.0, 1.0],
    ];
    let b = vec![0.5, 0.5, 0.5, 0.5, -0.25, 0.25];
    let (near, far) = (0.5_f64.powf(2.3), 1.5_f64.powf(2.3));
    let d = vec![near, far, far, near];
    let layout = asm.problem.matrix().to_dense_rows() == a && asm.problem.rhs() == b.as_slice() && asm.problem.objective() == d.as_slice();

    let value = match mot::solve_discrete_mot(
        &DiscreteMeasure::dirac(Point::scalar(1.0)),
        &DiscreteMeasure::on_line(&[(0.0, 0.5), (2.0, 0.5)]).unwrap(),
        &cost,
    ) {
        Ok(MotOutcome::Solved { value, .. }) => value,
        _ => f64::NAN,
    };
    outcome(
        layout && (value - 1.0).abs() <= TIGHT,
        format!("2x2 layout bit-exact: {layout}; MOT(delta_1, (delta_0+delta_2)/2) = {value:.15}"),
    )
}

fn stability_chain(left: &StabilityTable, optimal: &StabilityTable) -> Outcome {
    let holds = |t: &StabilityTable| t.rows.iter().all(|r| r.p_n <= r.e_pitilde_c + mot::STABILITY_SLACK);
    let last = optimal.rows.iter().max_by_key(|r| r.n).unwrap();
    let gap = (last.p_n - 1.0).abs();
    outcome(
        holds(left) && holds(optimal) && gap <= EXAMPLE1_BAND,
        format!(
            "left curtain E={:.6}: {}; optimal E={:.6}: {}; optimal |P_{} - 1| = {gap:.3e}",
            left.rows[0].e_pitilde_c,
            holds(left),
            optimal.rows[0].e_pitilde_c,
            holds(optimal),
            last.n
        ),
    )
}

fn example1(input: UniformInput) -> (StabilityTable, f64) {
    let t = Instant::now();
    let run = experiment::example1(
        input,
        couplings::DEFAULT_NODES_1D,
        &experiment::EXAMPLE1_LEVELS,
        &experiment::default_cost(),
        Execution::Parallel,
    )
    .expect("example 1 runs");
    (run.table, t.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    let (left, secs) = example1(UniformInput::LeftCurtain);
    let (optimal, _) = example1(UniformInput::Optimal);
    let (order, means) = quantisation_suite();
    let results = [
        ("example1-reproduction", example1_reproduction(&left, secs)),
        ("example1-optimiser-geometry", example1_geometry(&left)),
        ("example3-projection-geometry", example3_geometry()),
        ("convex-order-preservation", order),
        ("mean-conservation", means),
        ("bound-validity", bound_validity()),
        ("u-equivalence", u_equivalence()),
        ("counterexample-fixtures", counterexample_fixtures()),
        ("lp-permutation-oracle", lp_oracle()),
        ("two-by-two-assembly", two_by_two_assembly()),
        ("stability-chain", stability_chain(&left, &optimal)),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        println!("{} {name}: {}", if r.pass { "PASS" } else { "FAIL" }, r.detail);
        failed += usize::from(!r.pass);
    }
    println!("acceptance: {}/{} passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
