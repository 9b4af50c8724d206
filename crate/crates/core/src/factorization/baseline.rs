//! Non-separated temporal factorization: `M_t ≈ C_t H_t` on the whole PMI
//! matrix, with `α ‖C_t − C_{t−1}‖²` tying consecutive snapshots.

use nalgebra::DMatrix;
use rand::Rng;

use super::separated::{clamp_nonnegative, quadratic_steps};
use super::{project_columns_to_simplex, SolverOptions};
use crate::error::{Error, Result};
use crate::graph::PmiMatrix;
use crate::seed::{self, tag};

#[derive(Clone, Debug)]
pub struct BaselineFactors {
    /// `Cᵀ`, `r × n`, columns on the simplex.
    pub ct: DMatrix<f64>,
    /// `H`, `r × n`, nonnegative.
    pub h: DMatrix<f64>,
    /// Objective after initialization and after every sweep.
    pub trace: Vec<f64>,
}

impl BaselineFactors {
    pub fn objective(&self) -> f64 {
        *self.trace.last().unwrap()
    }
}

fn random_start(n: usize, r: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = seed::rng(seed, tag::BASELINE, 0);
    let normal = rand_distr::StandardNormal;
    let mut ct = DMatrix::from_fn(r, n, |_, _| rng.sample::<f64, _>(normal).abs());
    project_columns_to_simplex(&mut ct);
    let h = DMatrix::from_fn(r, n, |_, _| rng.sample::<f64, _>(normal).abs());
    (ct, h)
}

/// `‖M − CH‖² + α ‖C − C_prev‖²`.
fn objective(pmi: &PmiMatrix, ct: &DMatrix<f64>, h: &DMatrix<f64>, prev: Option<(&DMatrix<f64>, f64)>) -> f64 {
    let m = pmi.matrix();
    let fit = m.frobenius_sq() - 2.0 * m.bilinear(ct, h) + (ct * ct.transpose()).dot(&(h * h.transpose()));
    let smooth = prev.map_or(0.0, |(p, alpha)| alpha * (ct - p).norm_squared());
    fit.max(0.0) + smooth
}

/// Alternating projected gradient for one snapshot, optionally pulled
/// towards `prev` (`r × n`) with weight `alpha`.
pub fn factorize_snapshot(
    pmi: &PmiMatrix,
    r: usize,
    prev: Option<&DMatrix<f64>>,
    alpha: f64,
    opts: SolverOptions,
    seed: u64,
) -> Result<BaselineFactors> {
    let n = pmi.dim();
    if r == 0 || r > n {
        return Err(Error::InfeasibleParams(format!("rank {r} not in 1..={n}")));
    }
    if let Some(p) = prev {
        if p.shape() != (r, n) {
            return Err(Error::ShapeMismatch { context: "previous C", expected: (r, n), found: p.shape() });
        }
    }
    let prev = prev.filter(|_| alpha > 0.0).map(|p| (p, alpha));
    let m = pmi.matrix();
    let (mut ct, mut h) = random_start(n, r, seed);
    let mut current = objective(pmi, &ct, &h, prev);
    let mut trace = vec![current];
    let identity = DMatrix::<f64>::identity(r, r);
    for _ in 0..opts.max_iter {
        // H-step: Hessian CᵀC, linear term CᵀM.
        let hh = &ct * ct.transpose();
        let lh = m.left_mul(&ct);
        h = quadratic_steps(&hh, &lh, h, opts.inner_steps, clamp_nonnegative);
        // C-step: Hessian HHᵀ (+ αI), linear term HM (+ α C_prev).
        let mut hc = &h * h.transpose();
        let mut lc = m.left_mul(&h);
        if let Some((p, a)) = prev {
            hc += &identity * a;
            lc += p * a;
        }
        ct = quadratic_steps(&hc, &lc, ct, opts.inner_steps, project_columns_to_simplex);
        let next = objective(pmi, &ct, &h, prev);
        if !next.is_finite() {
            return Err(Error::NonFiniteLoss("baseline objective"));
        }
        trace.push(next);
        let decrease = current - next;
        current = next;
        if decrease <= opts.tol * current.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(BaselineFactors { ct, h, trace })
}

/// Factorizes every snapshot in order. Each snapshot starts from the same
/// seeded initialization; `α` (ignored at the first snapshot) is the only
/// link between timestamps.
pub fn baseline_temporal_mf(
    pmis: &[PmiMatrix],
    r: usize,
    alpha: f64,
    opts: SolverOptions,
    seed: u64,
) -> Result<Vec<BaselineFactors>> {
    let mut out: Vec<BaselineFactors> = Vec::with_capacity(pmis.len());
    for (t, pmi) in pmis.iter().enumerate() {
        let prev = out.last().map(|f| &f.ct);
        let f = factorize_snapshot(pmi, r, prev, alpha, opts, seed).map_err(|e| e.at_snapshot(t + 1))?;
        out.push(f);
    }
    Ok(out)
}
