use martingale_quant::couplings;
use martingale_quant::experiment::{self, UniformInput};
use martingale_quant::mot::{self, MotOutcome};
use martingale_quant::Execution;

#[test]
fn example3_cold_and_warm_solves_agree() {
    let cost = experiment::default_cost_2d();
    let run = experiment::example3(couplings::DEFAULT_NODES_2D, &[10], &cost, Execution::Parallel).unwrap();
    let row = &run.table.rows[0];
    let MotOutcome::Solved { value, coupling, .. } = mot::solve_discrete_mot(&row.mu_n, &row.nu_n, &cost).unwrap() else {
        panic!("quantised marginals are in convex order");
    };
    assert!((value - row.p_n).abs() <= 1e-9, "cold {value} vs warm {}", row.p_n);
    for pi in [&coupling, &row.optimiser] {
        assert!(experiment::mass_near_projection_lines(pi, 0.2) >= 0.9);
    }
    assert!(row.chain_holds);
}

#[test]
fn example1_input_order_matters_only_through_the_coupling() {
    let cost = experiment::default_cost();
    let levels = [5, 10];
    let left = experiment::example1(UniformInput::LeftCurtain, 400, &levels, &cost, Execution::Parallel).unwrap();
    let right = experiment::example1(UniformInput::RightCurtain, 400, &levels, &cost, Execution::Sequential).unwrap();
    for (a, b) in left.table.rows.iter().zip(&right.table.rows) {
        // Same quantile cells on both marginals, so the quantised marginals agree.
        assert!(a.mu_n.approx_eq(&b.mu_n, 1e-9));
        assert!(a.chain_holds && b.chain_holds);
    }
}

#[test]
fn parallel_and_sequential_tables_match() {
    let cost = experiment::default_cost();
    let levels = [5, 10, 20];
    let par = experiment::example1(UniformInput::Optimal, 400, &levels, &cost, Execution::Parallel).unwrap();
    let seq = experiment::example1(UniformInput::Optimal, 400, &levels, &cost, Execution::Sequential).unwrap();
    assert_eq!(par.table.to_csv(), seq.table.to_csv());
}
