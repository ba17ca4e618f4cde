//! Explicit martingale transports used by the worked examples.

use crate::measures::{
    BoxBounds, KernelBranch, KernelCoupling, MeasureError, Point, QuadratureMeasure, DEFAULT_TRUNCATION_SD,
};

/// Quadrature nodes for the one-dimensional uniform marginals.
pub const DEFAULT_NODES_1D: usize = 2000;
/// Quadrature nodes per axis for the planar uniform marginal.
pub const DEFAULT_NODES_2D: usize = 120;

fn uniform_pm1(m: usize) -> Result<QuadratureMeasure, MeasureError> {
    let bounds = BoxBounds::cube(1, -1.0, 1.0).expect("valid box");
    QuadratureMeasure::uniform_box(bounds, m)
}

fn affine(a: f64, b: f64) -> impl Fn(&Point) -> Point + Send + Sync + 'static {
    move |x| Point::scalar(a * x.coord(0) + b)
}

fn verified(k: KernelCoupling, tol: f64) -> Result<KernelCoupling, MeasureError> {
    k.check_weights()?;
    k.check_martingale(tol)?;
    Ok(k)
}

/// Left-curtain coupling of U[−1,1] and U[−2,2]:
/// ¼ δ_{−x/2 − 3/2} + ¾ δ_{3x/2 + 1/2}.
pub fn left_curtain_uniform(m: usize) -> Result<KernelCoupling, MeasureError> {
    let k = KernelCoupling::new(
        uniform_pm1(m)?,
        vec![KernelBranch::constant(0.25, affine(-0.5, -1.5)), KernelBranch::constant(0.75, affine(1.5, 0.5))],
        true,
    );
    verified(k, 1e-12)
}

/// Right-curtain coupling, the mirror image of the left curtain:
/// ¾ δ_{3x/2 − 1/2} + ¼ δ_{3/2 − x/2}.
pub fn right_curtain_uniform(m: usize) -> Result<KernelCoupling, MeasureError> {
    let k = KernelCoupling::new(
        uniform_pm1(m)?,
        vec![KernelBranch::constant(0.75, affine(1.5, -0.5)), KernelBranch::constant(0.25, affine(-0.5, 1.5))],
        true,
    );
    verified(k, 1e-12)
}

/// The optimiser for |y − x|^ρ, ρ > 2: ½ δ_{x−1} + ½ δ_{x+1}.
pub fn optimal_pm1_uniform(m: usize) -> Result<KernelCoupling, MeasureError> {
    let k = KernelCoupling::new(
        uniform_pm1(m)?,
        vec![KernelBranch::constant(0.5, affine(1.0, -1.0)), KernelBranch::constant(0.5, affine(1.0, 1.0))],
        true,
    );
    verified(k, 1e-12)
}

/// X ~ N(mean, var_x) on `m_x` nodes, Y = X + Z with Z ~ N(0, var_z) on a
/// symmetric grid of `m_z` nodes (odd, so that 0 is a node).
pub fn gaussian_convolution(
    mean: f64,
    var_x: f64,
    var_z: f64,
    m_x: usize,
    m_z: usize,
) -> Result<KernelCoupling, MeasureError> {
    if m_z.is_multiple_of(2) {
        return Err(MeasureError::KernelWeights { point: Point::scalar(mean), sum: f64::NAN });
    }
    if !(var_z > 0.0 && var_z.is_finite()) {
        return Err(MeasureError::NonFinite);
    }
    let marginal = QuadratureMeasure::gaussian_1d(mean, var_x, m_x)?;
    let half = (m_z / 2) as i64;
    let sd = var_z.sqrt();
    let h = if half == 0 { 0.0 } else { DEFAULT_TRUNCATION_SD * sd / half as f64 };
    let zs: Vec<f64> = (-half..=half).map(|k| k as f64 * h).collect();
    let raw: Vec<f64> = zs.iter().map(|z| (-z * z / (2.0 * var_z)).exp()).collect();
    // Sum symmetric pairs so that mirrored nodes carry identical weights.
    let total = raw[half as usize] + 2.0 * raw[..half as usize].iter().sum::<f64>();
    let branches = zs
        .iter()
        .zip(&raw)
        .map(|(&z, &w)| KernelBranch::constant(w / total, move |x| Point::scalar(x.coord(0) + z)))
        .collect();
    verified(KernelCoupling::new(marginal, branches, true), 1e-12)
}

/// Uniform law on [−1,1]² moved by x ↦ x + z, z uniform on {±1}².
pub fn rademacher_2d_uniform(m: usize) -> Result<KernelCoupling, MeasureError> {
    let bounds = BoxBounds::cube(2, -1.0, 1.0).expect("valid box");
    let marginal = QuadratureMeasure::uniform_box(bounds, m)?;
    let branches = [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]
        .into_iter()
        .map(|(a, b)| KernelBranch::constant(0.25, move |x| Point::planar(x.coord(0) + a, x.coord(1) + b)))
        .collect();
    verified(KernelCoupling::new(marginal, branches, true), 1e-12)
}
