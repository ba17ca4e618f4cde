//! Random instances and independent oracles shared by the integration tests.
#![allow(dead_code)]

use martingale_quant::measures::{BoxBounds, DiscreteCoupling, DiscreteMeasure, Partition, Point};
use martingale_quant::quantise;
use rand::Rng;

pub fn point<R: Rng>(rng: &mut R, d: usize, lo: f64, hi: f64) -> Point {
    let c: Vec<f64> = (0..d).map(|_| rng.random_range(lo..hi)).collect();
    Point::new(&c).unwrap()
}

/// Martingale coupling with up to 6 x-atoms in [−1,1]^d, each spreading to up
/// to 4 y-atoms whose conditional mean is exactly x (up to rounding).
pub fn martingale_coupling<R: Rng>(rng: &mut R, d: usize) -> DiscreteCoupling {
    let k = rng.random_range(1..=6);
    let mut atoms = Vec::new();
    for _ in 0..k {
        let x = point(rng, d, -1.0, 1.0);
        let wx: f64 = rng.random_range(0.1..1.0);
        let r = rng.random_range(1..=4);
        let q: Vec<f64> = (0..r).map(|_| rng.random_range(0.1..1.0)).collect();
        let qs: f64 = q.iter().sum();
        let offs: Vec<Vec<f64>> = (0..r).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let mean: Vec<f64> = (0..d).map(|c| offs.iter().zip(&q).map(|(o, w)| o[c] * w).sum::<f64>() / qs).collect();
        for (o, w) in offs.iter().zip(&q) {
            let y: Vec<f64> = (0..d).map(|c| x.coord(c) + o[c] - mean[c]).collect();
            atoms.push((x, Point::new(&y).unwrap(), wx * w / qs));
        }
    }
    DiscreteCoupling::normalised(d, atoms).unwrap()
}

pub fn measure<R: Rng>(rng: &mut R, d: usize, max_atoms: usize) -> DiscreteMeasure {
    let k = rng.random_range(1..=max_atoms);
    let atoms: Vec<(Point, f64)> = (0..k).map(|_| (point(rng, d, -2.0, 2.0), rng.random_range(0.1..1.0))).collect();
    DiscreteMeasure::normalised(d, atoms).unwrap()
}

/// Dyadic boxes on [−3,3]^d (level 0 to 3) or Voronoi cells of 1 to 6 random
/// sites.
pub fn partition<R: Rng>(rng: &mut R, d: usize) -> Partition {
    if rng.random_bool(0.5) {
        let level = rng.random_range(0..=3);
        quantise::build_dyadic_boxes(&BoxBounds::cube(d, -3.0, 3.0).unwrap(), level).unwrap()
    } else {
        let k = rng.random_range(1..=6);
        let sites: Vec<Point> = (0..k).map(|_| point(rng, d, -2.0, 2.0)).collect();
        quantise::build_voronoi_cells(&sites).unwrap()
    }
}

/// Largest weighted displacement |Σ_y w (y − x)| over x-atoms.
pub fn martingale_gap(pi: &DiscreteCoupling) -> f64 {
    let mut xs: Vec<Point> = pi.atoms().iter().map(|a| a.x).collect();
    xs.sort_by(|a, b| a.lex_cmp(b));
    xs.dedup();
    let d = pi.dim();
    xs.iter()
        .map(|x| {
            (0..d)
                .map(|c| {
                    pi.atoms().iter().filter(|a| a.x == *x).map(|a| a.weight * (a.y.coord(c) - x.coord(c))).sum::<f64>().abs()
                })
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Whether a claimed witness has marginals (μ, ν) and is a martingale.
pub fn valid_witness(pi: &DiscreteCoupling, mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> bool {
    let (m1, m2) = pi.marginals();
    m1.approx_eq(mu, tol) && m2.approx_eq(nu, tol) && martingale_gap(pi) <= tol
}

/// μ ≤cx ν on the line: equal means and ∫(x − k)⁺ dμ ≤ ∫(x − k)⁺ dν at every
/// atom k of either measure (both sides are piecewise linear in k).
pub fn convex_order_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> bool {
    let mean = |m: &DiscreteMeasure| m.atoms().iter().map(|a| a.weight * a.point.coord(0)).sum::<f64>();
    if (mean(mu) - mean(nu)).abs() > tol {
        return false;
    }
    let call = |m: &DiscreteMeasure, k: f64| m.atoms().iter().map(|a| a.weight * (a.point.coord(0) - k).max(0.0)).sum::<f64>();
    mu.points().chain(nu.points()).all(|k| call(mu, k.coord(0)) <= call(nu, k.coord(0)) + tol)
}

/// Minimum of (1/n) Σ c(x_i, y_σ(i)) over all permutations σ.
pub fn permutation_minimum(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        let n = cost.len();
        if row == n {
            *best = best.min(acc);
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                go(cost, row + 1, used, acc + cost[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
    best / cost.len() as f64
}

/// ¼δ₋₁ + ½δ₀ + ¼δ₁ and ½δ₋₁ + ½δ₁.
pub fn counterexample() -> (DiscreteMeasure, DiscreteMeasure) {
    (
        DiscreteMeasure::on_line(&[(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]).unwrap(),
        DiscreteMeasure::on_line(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap(),
    )
}

/// Measure on the line whose CDF passes through every level i/n for
/// n = 2..=10: the levels are cut further at random multiples of 1/2520 and
/// each piece becomes one atom at a random increasing position.
pub fn aligned_measure<R: Rng>(rng: &mut R) -> DiscreteMeasure {
    const DEN: u32 = 2520;
    let mut cuts: Vec<u32> = (2..=10u32).flat_map(|n| (1..n).map(move |i| i * DEN / n)).collect();
    for _ in 0..rng.random_range(0..10) {
        cuts.push(rng.random_range(1..DEN));
    }
    cuts.push(DEN);
    cuts.sort_unstable();
    cuts.dedup();
    let mut x = rng.random_range(-3.0..-1.0);
    let mut prev = 0;
    let mut atoms = Vec::new();
    for c in cuts {
        atoms.push((x, f64::from(c - prev) / f64::from(DEN)));
        x += rng.random_range(0.01..0.5);
        prev = c;
    }
    DiscreteMeasure::normalised(1, atoms.into_iter().map(|(x, w)| (Point::scalar(x), w))).unwrap()
}
