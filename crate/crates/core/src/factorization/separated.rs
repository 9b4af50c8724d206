//! Block-coordinate solver for the separated objective.
//!
//! Factors are stored column-per-node: `Pᵀ` and `Q` are both `|U| × n_f`
//! with the free nodes of subset `i` occupying a contiguous column range.
//! With `K = M00`, `A = M[free, L]` and `S = M[free, free]` the fit is
//!
//! `‖A − PK‖² + ‖Aᵀ − KQ‖² + ‖S − PKQ‖²`,
//!
//! which expands into Gram matrices `PᵀP`, `QQᵀ` and one pass over the
//! nonzeros of `S`; no `n_i × n_j` dense block is ever formed. Given `Q` the
//! objective separates over the subsets' `P^i`, and given `P` over the
//! `Q^j`, so each phase updates all subsets independently.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use super::{lambda_max, project_columns_to_simplex, SolverOptions};
use crate::biclustering::BcrContext;
use crate::error::{Error, Result};
use crate::graph::PmiMatrix;
use crate::seed::{self, tag};
use crate::sparse::SymCsr;

const MAX_HALVINGS: usize = 30;

#[derive(Clone, Debug)]
pub struct SeparatedProblem {
    landmarks: Vec<usize>,
    subsets: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    k: DMatrix<f64>,
    at: DMatrix<f64>,
    s: SymCsr,
    constant: f64,
}

/// Everything the solver holds fixed.
#[derive(Clone, Copy, Debug)]
pub struct SeparatedInputs<'a> {
    /// Landmark basis `Φ` (`|U| × r`, rows on the simplex).
    pub phi: &'a DMatrix<f64>,
    pub beta: f64,
    /// Number of eigenvectors in the regularizer.
    pub bcr_k: usize,
    pub alpha: f64,
    /// Previous embeddings of the free nodes, `r × n_f`; enables the
    /// smoothness term when `alpha > 0`.
    pub prev_c: Option<&'a DMatrix<f64>>,
    /// Embedding columns (`r × m_i`) of subset members that are not
    /// optimized. They enter the regularizer only.
    pub fixed: Option<&'a [DMatrix<f64>]>,
    /// Added to every logged objective value (the landmark loss).
    pub constant: f64,
}

#[derive(Clone, Debug)]
pub struct SeparatedSolution {
    /// `Pᵀ`, `|U| × n_f`, columns on the simplex.
    pub pt: DMatrix<f64>,
    pub q: DMatrix<f64>,
    /// `Cᵀ = ΦᵀPᵀ`, `r × n_f`.
    pub ct: DMatrix<f64>,
    /// Objective after initialization and after every sweep.
    pub trace: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub bcr_value: f64,
    pub bcr_time: Duration,
}

impl SeparatedProblem {
    pub fn new(pmi: &PmiMatrix, landmarks: &[usize], subsets: &[Vec<usize>]) -> Result<Self> {
        let m = pmi.matrix();
        let n = m.dim();
        #[derive(Clone, Copy)]
        enum Role {
            Other,
            Landmark(usize),
            Free(usize),
        }
        let mut role = vec![Role::Other; n];
        for (l, &v) in landmarks.iter().enumerate() {
            role[v] = Role::Landmark(l);
        }
        let mut offsets = vec![0];
        let mut free = Vec::new();
        for subset in subsets {
            for &v in subset {
                if !matches!(role[v], Role::Other) {
                    return Err(Error::InvalidConfig(format!("node {v} appears twice in the subset plan")));
                }
                role[v] = Role::Free(free.len());
                free.push(v);
            }
            offsets.push(free.len());
        }
        let u = landmarks.len();
        let mut at = DMatrix::zeros(u, free.len());
        let mut pairs = Vec::new();
        for (p, &a) in free.iter().enumerate() {
            for (b, v) in m.row_iter(a) {
                match role[b] {
                    Role::Landmark(l) => at[(l, p)] = v,
                    Role::Free(q) if q > p => pairs.push((p, q, v)),
                    _ => {}
                }
            }
        }
        let s = SymCsr::from_pairs(free.len(), &pairs);
        let k = m.submatrix(landmarks, landmarks);
        let constant = 2.0 * at.norm_squared() + s.frobenius_sq();
        Ok(SeparatedProblem { landmarks: landmarks.to_vec(), subsets: subsets.to_vec(), offsets, k, at, s, constant })
    }

    pub fn landmarks(&self) -> &[usize] {
        &self.landmarks
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn landmark_block(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn free_count(&self) -> usize {
        self.at.ncols()
    }

    fn range(&self, i: usize) -> (usize, usize) {
        (self.offsets[i], self.offsets[i + 1] - self.offsets[i])
    }

    /// Random feasible start: `Pᵀ` columns on the simplex, `Q` absolute Gaussian.
    pub fn initial_factors(&self, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
        let (u, n) = self.at.shape();
        let mut rng = seed::rng(seed, tag::SUBSET_INIT, 0);
        let normal = rand_distr::StandardNormal;
        let mut pt = DMatrix::from_fn(u, n, |_, _| rng.sample::<f64, _>(normal).abs());
        project_columns_to_simplex(&mut pt);
        let scale = 1.0 / u.max(1) as f64;
        let q = DMatrix::from_fn(u, n, |_, _| scale * rng.sample::<f64, _>(normal).abs());
        (pt, q)
    }

    /// The separated fit `‖A − PK‖² + ‖Aᵀ − KQ‖² + ‖S − PKQ‖²`.
    pub fn fit(&self, pt: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
        let k = &self.k;
        let kp = k * pt;
        let kq = k * q;
        let linear = self.at.dot(&kp) + self.at.dot(&kq);
        let cross = self.s.bilinear(&kp, q);
        let w = pt * pt.transpose();
        let g = q * q.transpose();
        let quad = kp.norm_squared() + kq.norm_squared() + (k * w * k).dot(&g);
        (self.constant - 2.0 * linear - 2.0 * cross + quad).max(0.0)
    }

    /// Assembled regularizer input of subset `i`: free rows, then fixed rows.
    fn subset_embedding(&self, i: usize, ct: &DMatrix<f64>, fixed: Option<&[DMatrix<f64>]>) -> DMatrix<f64> {
        let (off, len) = self.range(i);
        let r = ct.nrows();
        let extra = fixed.map_or(0, |f| f[i].ncols());
        DMatrix::from_fn(len + extra, r, |row, col| if row < len { ct[(col, off + row)] } else { fixed.unwrap()[i][(col, row - len)] })
    }

    pub fn solve(
        &self,
        inputs: SeparatedInputs<'_>,
        init: (DMatrix<f64>, DMatrix<f64>),
        opts: SolverOptions,
    ) -> Result<SeparatedSolution> {
        let (u, n_f) = self.at.shape();
        let (mut pt, mut q) = init;
        if pt.shape() != (u, n_f) || q.shape() != (u, n_f) {
            return Err(Error::ShapeMismatch { context: "separated init", expected: (u, n_f), found: pt.shape() });
        }
        let phi = inputs.phi;
        if phi.nrows() != u {
            return Err(Error::ShapeMismatch { context: "Φ", expected: (u, phi.ncols()), found: phi.shape() });
        }
        let r = phi.ncols();
        if let Some(prev) = inputs.prev_c {
            if prev.shape() != (r, n_f) {
                return Err(Error::ShapeMismatch { context: "previous C", expected: (r, n_f), found: prev.shape() });
            }
        }
        if let Some(fixed) = inputs.fixed {
            if fixed.len() != self.subsets.len() || fixed.iter().any(|f| f.nrows() != r) {
                return Err(Error::ShapeMismatch { context: "fixed rows", expected: (r, self.subsets.len()), found: (0, fixed.len()) });
            }
        }
        let use_bcr = inputs.beta > 0.0;
        let smooth = inputs.prev_c.filter(|_| inputs.alpha > 0.0);
        let mut bcr_time = Duration::ZERO;

        let refresh = |ct: &DMatrix<f64>, bcr_time: &mut Duration| -> Result<Vec<Option<BcrContext>>> {
            let start = Instant::now();
            let contexts = self.map_subsets(opts.parallel, |i| {
                if !use_bcr {
                    return Ok(None);
                }
                let c = self.subset_embedding(i, ct, inputs.fixed);
                if c.nrows() == 0 {
                    return Ok(None);
                }
                let k = inputs.bcr_k.min(c.nrows() + r);
                BcrContext::refresh(&c, k).map(Some)
            });
            *bcr_time += start.elapsed();
            contexts.into_iter().collect()
        };
        let bcr_total = |ct: &DMatrix<f64>, contexts: &[Option<BcrContext>]| -> Result<f64> {
            let mut total = 0.0;
            for (i, ctx) in contexts.iter().enumerate() {
                if let Some(ctx) = ctx {
                    total += ctx.value(&self.subset_embedding(i, ct, inputs.fixed))?;
                }
            }
            Ok(total)
        };
        let objective = |pt: &DMatrix<f64>, q: &DMatrix<f64>, ct: &DMatrix<f64>, bcr: f64| -> Result<f64> {
            let mut value = self.fit(pt, q) + inputs.beta * bcr + inputs.constant;
            if let Some(prev) = smooth {
                value += inputs.alpha * (ct - prev).norm_squared();
            }
            if value.is_finite() {
                Ok(value)
            } else {
                Err(Error::NonFiniteLoss("separated objective"))
            }
        };

        let mut ct = phi.transpose() * &pt;
        let mut contexts = refresh(&ct, &mut bcr_time)?;
        let mut bcr = bcr_total(&ct, &contexts)?;
        let mut current = objective(&pt, &q, &ct, bcr)?;
        let mut trace = vec![current];
        let mut converged = false;
        let mut sweeps = 0;
        let kk = &self.k;
        let identity = DMatrix::<f64>::identity(u, u);

        while sweeps < opts.max_iter {
            sweeps += 1;
            // Q-phase: convex quadratic, separable over columns.
            let hq = kk * (&identity + &pt * pt.transpose()) * kk;
            let lq = kk * (&self.at + self.s.left_mul(&pt));
            q = quadratic_steps(&hq, &lq, q, opts.inner_steps, clamp_nonnegative);

            // P-phase: per subset, quadratic fit plus regularizer, columns on the simplex.
            let mut hp = kk * (&identity + &q * q.transpose()) * kk;
            let mut ep = kk * (&self.at + self.s.left_mul(&q));
            if let Some(prev) = smooth {
                hp += phi * phi.transpose() * inputs.alpha;
                ep += phi * prev * inputs.alpha;
            }
            let base_step = 0.5 / lambda_max(&hp).max(1e-12);
            let start = Instant::now();
            let gradients: Vec<Option<DMatrix<f64>>> = self
                .map_subsets(opts.parallel, |i| match &contexts[i] {
                    Some(ctx) => {
                        let (_, len) = self.range(i);
                        let g = ctx.gradient((ctx.f.nrows() - r, r))?;
                        Ok(Some(phi * g.rows(0, len).transpose()))
                    }
                    None => Ok(None),
                })
                .into_iter()
                .collect::<Result<_>>()?;
            bcr_time += start.elapsed();
            let updated: Vec<Result<DMatrix<f64>>> = self.map_subsets(opts.parallel, |i| {
                let (off, len) = self.range(i);
                let block = pt.columns(off, len).into_owned();
                let e = ep.columns(off, len).into_owned();
                let eval = |cand: &DMatrix<f64>, hcand: &DMatrix<f64>| -> Result<f64> {
                    let mut v = hcand.dot(cand) - 2.0 * e.dot(cand);
                    if let Some(ctx) = &contexts[i] {
                        let c = self.subset_embedding_with(i, &(phi.transpose() * cand), inputs.fixed);
                        v += inputs.beta * ctx.value(&c)?;
                    }
                    Ok(v)
                };
                let mut cur = block;
                let mut hcur = &hp * &cur;
                let mut fcur = eval(&cur, &hcur)?;
                for _ in 0..opts.inner_steps.max(1) {
                    let mut grad = (&hcur - &e) * 2.0;
                    if let Some(g) = &gradients[i] {
                        grad += g * inputs.beta;
                    }
                    let mut step = base_step;
                    let mut accepted = false;
                    for _ in 0..MAX_HALVINGS {
                        let mut cand = &cur - &grad * step;
                        project_columns_to_simplex(&mut cand);
                        let hcand = &hp * &cand;
                        let fcand = eval(&cand, &hcand)?;
                        if fcand <= fcur {
                            cur = cand;
                            hcur = hcand;
                            fcur = fcand;
                            accepted = true;
                            break;
                        }
                        step *= 0.5;
                    }
                    if !accepted {
                        break;
                    }
                }
                Ok(cur)
            });
            for (i, block) in updated.into_iter().enumerate() {
                let (off, len) = self.range(i);
                pt.columns_mut(off, len).copy_from(&block?);
            }
            ct = phi.transpose() * &pt;

            // F-phase: exact minimization of the regularizer for the new C.
            contexts = refresh(&ct, &mut bcr_time)?;
            bcr = bcr_total(&ct, &contexts)?;
            let next = objective(&pt, &q, &ct, bcr)?;
            trace.push(next);
            let decrease = current - next;
            current = next;
            if decrease <= opts.tol * current.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        project_columns_to_simplex(&mut ct);
        Ok(SeparatedSolution { pt, q, ct, trace, sweeps, converged, bcr_value: bcr, bcr_time })
    }

    fn subset_embedding_with(&self, i: usize, ct_i: &DMatrix<f64>, fixed: Option<&[DMatrix<f64>]>) -> DMatrix<f64> {
        let len = ct_i.ncols();
        let r = ct_i.nrows();
        let extra = fixed.map_or(0, |f| f[i].ncols());
        DMatrix::from_fn(len + extra, r, |row, col| if row < len { ct_i[(col, row)] } else { fixed.unwrap()[i][(col, row - len)] })
    }

    fn map_subsets<T: Send>(&self, parallel: bool, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        if parallel {
            (0..self.subsets.len()).into_par_iter().map(f).collect()
        } else {
            (0..self.subsets.len()).map(f).collect()
        }
    }
}

/// Projected gradient steps on `−2⟨X, L⟩ + ⟨X, HX⟩` over the feasible set
/// of `project`, keeping only non-increasing iterates.
pub(crate) fn quadratic_steps(
    h: &DMatrix<f64>,
    l: &DMatrix<f64>,
    mut x: DMatrix<f64>,
    steps: usize,
    project: impl Fn(&mut DMatrix<f64>),
) -> DMatrix<f64> {
    let base = 0.5 / lambda_max(h).max(1e-12);
    let mut hx = h * &x;
    let mut fx = hx.dot(&x) - 2.0 * l.dot(&x);
    for _ in 0..steps.max(1) {
        let grad = (&hx - l) * 2.0;
        let mut step = base;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let mut cand = &x - &grad * step;
            project(&mut cand);
            let hc = h * &cand;
            let fc = hc.dot(&cand) - 2.0 * l.dot(&cand);
            if fc <= fx {
                x = cand;
                hx = hc;
                fx = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    x
}

pub(crate) fn clamp_nonnegative(x: &mut DMatrix<f64>) {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::{build_blocks, inter_loss, intra_loss, project_rows_to_simplex, Coupling, SubsetPlan};
    use crate::graph::{build_pmi, Snapshot};
    use approx::assert_abs_diff_eq;

    fn planted_graph(sizes: &[usize], seed: u64) -> PmiMatrix {
        let mut rng = seed::rng(seed, 3, 0);
        let n: usize = sizes.iter().sum();
        let mut label = Vec::new();
        for (c, &s) in sizes.iter().enumerate() {
            label.extend(std::iter::repeat_n(c, s));
        }
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let p = if label[a] == label[b] { 0.7 } else { 0.05 };
                if rng.random::<f64>() < p {
                    edges.push((a, b, 1.0));
                }
            }
        }
        build_pmi(&Snapshot::from_edges(n, 1, edges).unwrap()).unwrap()
    }

    fn setup(s: usize) -> (PmiMatrix, Vec<usize>, SubsetPlan) {
        let pmi = planted_graph(&[8, 8, 8], 1);
        let landmarks = vec![0, 1, 2, 8, 9, 10, 16, 17, 18];
        let plan = crate::factorization::partition_subsets(24, &landmarks, s, 4).unwrap();
        (pmi, landmarks, plan)
    }

    fn split_factors(prob: &SeparatedProblem, pt: &DMatrix<f64>, q: &DMatrix<f64>) -> Vec<(DMatrix<f64>, DMatrix<f64>)> {
        (0..prob.subsets.len())
            .map(|i| {
                let (off, len) = prob.range(i);
                (pt.columns(off, len).transpose(), q.columns(off, len).into_owned())
            })
            .collect()
    }

    #[test]
    fn fit_matches_block_losses() {
        for s in [1, 3] {
            let (pmi, landmarks, plan) = setup(s);
            let prob = SeparatedProblem::new(&pmi, &landmarks, &plan.subsets).unwrap();
            let view = build_blocks(&pmi, &plan, &landmarks).unwrap();
            let (pt, q) = prob.initial_factors(9);
            let factors = split_factors(&prob, &pt, &q);
            let mut expected = inter_loss(&view, &factors, Coupling::Symmetric).unwrap();
            for (i, (p, qi)) in factors.iter().enumerate() {
                expected += intra_loss(&view, i, p, qi).unwrap();
            }
            assert_abs_diff_eq!(prob.fit(&pt, &q), expected, epsilon = 1e-9 * expected);
        }
    }

    fn phi_for(landmarks: usize, r: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seed::rng(seed, 1, 0);
        let mut phi = DMatrix::from_fn(landmarks, r, |_, _| rng.random::<f64>());
        project_rows_to_simplex(&mut phi);
        phi
    }

    fn inputs(phi: &DMatrix<f64>, beta: f64) -> SeparatedInputs<'_> {
        SeparatedInputs { phi, beta, bcr_k: 3, alpha: 0.0, prev_c: None, fixed: None, constant: 0.0 }
    }

    #[test]
    fn objective_is_monotone_with_and_without_regularizer() {
        let (pmi, landmarks, plan) = setup(2);
        let prob = SeparatedProblem::new(&pmi, &landmarks, &plan.subsets).unwrap();
        let phi = phi_for(landmarks.len(), 3, 2);
        for beta in [0.0, 5.0] {
            let opts = SolverOptions { tol: 0.0, max_iter: 40, inner_steps: 2, parallel: false };
            let sol = prob.solve(inputs(&phi, beta), prob.initial_factors(1), opts).unwrap();
            for w in sol.trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-8 * w[0].abs(), "{:?}", sol.trace);
            }
            for col in sol.ct.column_iter() {
                assert_abs_diff_eq!(col.sum(), 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn planted_exact_blocks_are_fit() {
        // Build M from planted factors so the separated model is exact.
        let mut rng = seed::rng(5, 0, 0);
        let u = 4;
        let n = 10;
        let k = DMatrix::from_fn(u, u, |a, b| if a == b { 1.5 } else { 0.2 });
        let mut p = DMatrix::from_fn(n, u, |_, _| rng.random::<f64>());
        project_rows_to_simplex(&mut p);
        // Q = Pᵀ keeps the planted matrix symmetric, as every PMI matrix is.
        let q = p.transpose();
        let full_n = u + n;
        let mut dense = DMatrix::zeros(full_n, full_n);
        dense.view_mut((0, 0), (u, u)).copy_from(&k);
        dense.view_mut((u, 0), (n, u)).copy_from(&(&p * &k));
        dense.view_mut((0, u), (u, n)).copy_from(&(&k * &q));
        dense.view_mut((u, u), (n, n)).copy_from(&(&p * &k * &q));
        let mut pairs = Vec::new();
        for a in 0..n {
            for b in a..n {
                pairs.push((a, b, dense[(u + a, u + b)]));
            }
        }
        let at = dense.view((0, u), (u, n)).into_owned();
        let s = SymCsr::from_pairs(n, &pairs);
        let constant = 2.0 * at.norm_squared() + s.frobenius_sq();
        // Built from parts: the planted model has a nonzero diagonal, which a PMI matrix never stores.
        let prob = SeparatedProblem {
            landmarks: (0..u).collect(),
            subsets: vec![(u..full_n).collect()],
            offsets: vec![0, n],
            k,
            at,
            s,
            constant,
        };
        let phi = DMatrix::identity(u, u);
        let opts = SolverOptions { tol: 1e-14, max_iter: 2000, inner_steps: 3, parallel: false };
        let sol = prob.solve(inputs(&phi, 0.0), prob.initial_factors(3), opts).unwrap();
        assert!(sol.trace.last().unwrap() <= &(1e-3 * sol.trace[0]), "{} -> {} after {} sweeps", sol.trace[0], sol.trace.last().unwrap(), sol.sweeps);
    }

    #[test]
    fn zero_iterations_return_the_start() {
        let (pmi, landmarks, plan) = setup(2);
        let prob = SeparatedProblem::new(&pmi, &landmarks, &plan.subsets).unwrap();
        let phi = phi_for(landmarks.len(), 3, 2);
        let init = prob.initial_factors(4);
        let opts = SolverOptions { max_iter: 0, ..Default::default() };
        let sol = prob.solve(inputs(&phi, 1.0), init.clone(), opts).unwrap();
        assert_eq!(sol.pt, init.0);
        assert_eq!(sol.q, init.1);
        assert_eq!(sol.trace.len(), 1);
    }

    #[test]
    fn smoothness_pulls_towards_previous_embedding() {
        let (pmi, landmarks, plan) = setup(1);
        let prob = SeparatedProblem::new(&pmi, &landmarks, &plan.subsets).unwrap();
        let phi = phi_for(landmarks.len(), 3, 6);
        let prev_pt = prob.initial_factors(77).0;
        let prev = phi.transpose() * &prev_pt;
        let opts = SolverOptions { tol: 1e-10, max_iter: 100, inner_steps: 3, parallel: false };
        let mut last = f64::INFINITY;
        for alpha in [1.0, 10.0, 100.0] {
            let inp = SeparatedInputs { alpha, prev_c: Some(&prev), ..inputs(&phi, 0.0) };
            let sol = prob.solve(inp, prob.initial_factors(1), opts).unwrap();
            let dist = (&sol.ct - &prev).norm();
            assert!(dist < last, "alpha {alpha}: {dist} !< {last}");
            last = dist;
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let (pmi, landmarks, plan) = setup(3);
        let prob = SeparatedProblem::new(&pmi, &landmarks, &plan.subsets).unwrap();
        let phi = phi_for(landmarks.len(), 3, 2);
        let seq = SolverOptions { tol: 0.0, max_iter: 10, inner_steps: 2, parallel: false };
        let par = SolverOptions { parallel: true, ..seq };
        let a = prob.solve(inputs(&phi, 2.0), prob.initial_factors(1), seq).unwrap();
        let b = prob.solve(inputs(&phi, 2.0), prob.initial_factors(1), par).unwrap();
        assert_eq!(a.pt, b.pt);
        assert_eq!(a.trace, b.trace);
    }
}
