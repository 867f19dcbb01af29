//! Least-squares fitting of a functional tensor-train velocity field to the
//! logarithmic continuity equation.
//!
//! For samples `x_l` the per-sample residual is
//!
//! ```text
//! res_l = ∂_t f_t(x_l) + <∇f_t(x_l), v(x_l)> - ∇·v(x_l) + C_t
//! ```
//!
//! which is linear in every single core. [`als_fit`] minimizes
//! `sum_l res_l^2 + λ ||T||^2` one core at a time, sweeping forward and
//! backward through the train with the orthogonality centre on the core being
//! solved, so `||K_i||` equals the norm of the full coefficient tensor `T`.
//!
//! Per sample the sweep caches, for every core position `c`,
//!
//! * `P_c` (`d x r_c`): chain product of the cores before `c`, all outputs;
//! * `Q_c` (`r_c`): sum over `k < c` of the chain with mode `k` carrying the
//!   modified feature `∂_k f_t Φ - Φ'`, output leg fixed to `k`;
//! * `R_c` (`r_{c+1}`): chain product of the cores after `c`;
//! * `Z_c` (`r_{c+1} x d`): column `k > c` is the chain after `c` with mode
//!   `k` modified.
//!
//! With these the row of the local design matrix for core `c` is
//! `G[a, s, b] = φ_s A1[a, b] + φ̃_s A2[a, b]` where
//! `A1 = Q_c ⊗ R_c + (Z_c P_c)^T` and `A2 = P_c[c, :] ⊗ R_c`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::field::{FttVectorField, VelocityField};
use crate::points::Points;
use crate::targets::EnergyPath;
use crate::tt::TensorTrain;

/// Samples with path derivatives and cached basis features.
#[derive(Debug, Clone)]
pub struct TrainingBatch {
    points: Points,
    dt_f: Vec<f64>,
    grad_f: Points,
    basis_size: usize,
    /// `[(k * N + l) * n + s]`
    phi: Vec<f64>,
    dphi: Vec<f64>,
    outside: usize,
}

impl TrainingBatch {
    pub fn new(points: Points, dt_f: Vec<f64>, grad_f: Points, basis: &BasisSet) -> Result<Self> {
        let (len, d) = (points.len(), points.dim());
        if dt_f.len() != len || grad_f.len() != len || grad_f.dim() != d {
            return Err(Error::Shape(format!(
                "batch of {len} points in dim {d} with {} time derivatives and {}x{} gradients",
                dt_f.len(),
                grad_f.len(),
                grad_f.dim()
            )));
        }
        if len == 0 {
            return Err(Error::Shape("empty training batch".into()));
        }
        let finite = points.as_slice().iter().chain(&dt_f).chain(grad_f.as_slice()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Numerical("non-finite value in training batch".into()));
        }
        let n = basis.size();
        let mut phi = vec![0.0; d * len * n];
        let mut dphi = vec![0.0; d * len * n];
        phi.par_chunks_mut(len * n)
            .zip(dphi.par_chunks_mut(len * n))
            .enumerate()
            .for_each(|(k, (pk, dk))| {
                for l in 0..len {
                    let x = points.row(l)[k];
                    basis.eval_into(x, &mut pk[l * n..(l + 1) * n], &mut dk[l * n..(l + 1) * n]);
                }
            });
        let outside = points
            .rows()
            .filter(|r| r.iter().any(|&x| !basis.contains(x)))
            .count();
        Ok(Self {
            points,
            dt_f,
            grad_f,
            basis_size: n,
            phi,
            dphi,
            outside,
        })
    }

    /// Evaluates `∂_t f_t` and `∇f_t` of `path` at time `t` on every point.
    pub fn from_path(points: Points, path: &EnergyPath, t: f64, basis: &BasisSet) -> Result<Self> {
        if points.dim() != path.dim() {
            return Err(Error::Shape(format!(
                "points of dim {} for a path of dim {}",
                points.dim(),
                path.dim()
            )));
        }
        path.eval(t, points.row(0))?;
        let d = points.dim();
        let mut grad = vec![0.0; points.len() * d];
        let dt: Vec<f64> = grad
            .par_chunks_mut(d)
            .zip(points.as_slice().par_chunks(d))
            .map(|(g, x)| path.eval_into(t, x, g).1)
            .collect();
        let grad = Points::new(d, grad)?;
        Self::new(points, dt, grad, basis)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn dt_f(&self) -> &[f64] {
        &self.dt_f
    }

    pub fn grad_f(&self) -> &Points {
        &self.grad_f
    }

    /// Number of points with at least one coordinate outside the basis interval.
    pub fn outside_count(&self) -> usize {
        self.outside
    }

    #[inline]
    fn phi(&self, k: usize, l: usize) -> &[f64] {
        let n = self.basis_size;
        let off = (k * self.len() + l) * n;
        &self.phi[off..off + n]
    }

    #[inline]
    fn dphi(&self, k: usize, l: usize) -> &[f64] {
        let n = self.basis_size;
        let off = (k * self.len() + l) * n;
        &self.dphi[off..off + n]
    }

    /// `∂_k f_t(x_l) Φ(x_{l,k}) - Φ'(x_{l,k})`.
    fn modified(&self, k: usize, l: usize, out: &mut [f64]) {
        let g = self.grad_f.row(l)[k];
        for ((o, p), dp) in out.iter_mut().zip(self.phi(k, l)).zip(self.dphi(k, l)) {
            *o = g * p - dp;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlsConfig {
    pub sweeps: usize,
    /// Ridge weight; `None` means `1e-6 * N`.
    pub ridge: Option<f64>,
    /// Stop when a sweep lowers the loss by less than this relative amount.
    pub tol: f64,
    /// Fit `C_t` jointly as an unpenalized intercept.
    pub estimate_ct: bool,
    /// `C_t` used when `estimate_ct` is off.
    pub c_t: f64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        Self {
            sweeps: 3,
            ridge: None,
            tol: 1e-8,
            estimate_ct: true,
            c_t: 0.0,
        }
    }
}

impl AlsConfig {
    pub fn ridge_for(&self, len: usize) -> f64 {
        self.ridge.unwrap_or(1e-6 * len as f64)
    }
}

#[derive(Debug, Clone)]
pub struct AlsFit {
    pub tt: TensorTrain,
    pub c_t: f64,
    /// `sum res^2 + λ ||T||^2` after the last local solve.
    pub loss: f64,
    /// `sum res^2` after the last local solve.
    pub residual_sq: f64,
    /// Regularized loss before the first and after every local solve.
    pub history: Vec<f64>,
    pub sweeps: usize,
}

/// Per-sample continuity-equation residuals by direct field evaluation.
pub fn residual(field: &FttVectorField, batch: &TrainingBatch, c_t: f64) -> Result<Vec<f64>> {
    if field.dim() != batch.dim() {
        return Err(Error::Shape(format!("{}-d field on a {}-d batch", field.dim(), batch.dim())));
    }
    let d = batch.dim();
    Ok((0..batch.len())
        .into_par_iter()
        .map(|l| {
            let mut v = vec![0.0; d];
            let div = field.eval(batch.points.row(l), &mut v);
            let dot: f64 = v.iter().zip(batch.grad_f.row(l)).map(|(a, b)| a * b).sum();
            batch.dt_f[l] + dot - div + c_t
        })
        .collect())
}

/// Design matrix `L_i` (rows = samples, columns = entries of core `core`,
/// row-major over `(left, mode, right)`) and target `y = -∂_t f_t - C_t`.
///
/// Holds in any gauge; orthogonality only matters for conditioning.
pub fn assemble_local_system(
    field: &FttVectorField,
    batch: &TrainingBatch,
    core: usize,
    c_t: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let tt = field.tt();
    if core >= tt.order() {
        return Err(Error::InvalidArgument(format!("core {core} of a train of order {}", tt.order())));
    }
    check_shapes(tt, batch)?;
    let mut cache = Cache::new(tt.clone(), batch);
    for c in (core..tt.order() - 1).rev() {
        cache.update_right(c);
    }
    for c in 0..core {
        cache.update_left(c + 1);
    }
    let p = cache.tt.core(core).data().len();
    let mut rows = vec![0.0; batch.len() * p];
    cache.fill_rows(core, &mut rows);
    let a = DMatrix::from_row_slice(batch.len(), p, &rows);
    let y = DVector::from_iterator(batch.len(), batch.dt_f.iter().map(|v| -v - c_t));
    Ok((a, y))
}

fn check_shapes(tt: &TensorTrain, batch: &TrainingBatch) -> Result<()> {
    if tt.order() != batch.dim() || tt.output_dim() != batch.dim() {
        return Err(Error::Shape(format!(
            "train of order {} / output {} for a {}-d batch",
            tt.order(),
            tt.output_dim(),
            batch.dim()
        )));
    }
    if tt.modes().iter().any(|&m| m != batch.basis_size) {
        return Err(Error::Shape(format!(
            "core modes {:?} vs basis size {}",
            tt.modes(),
            batch.basis_size
        )));
    }
    Ok(())
}

/// Alternating least squares over the cores of `init`.
pub fn als_fit(
    batch: &TrainingBatch,
    basis: &BasisSet,
    init: &TensorTrain,
    config: &AlsConfig,
) -> Result<AlsFit> {
    if config.sweeps == 0 {
        return Err(Error::InvalidArgument("als.sweeps must be >= 1".into()));
    }
    if basis.size() != batch.basis_size {
        return Err(Error::Shape("basis differs from the one used for the batch".into()));
    }
    check_shapes(init, batch)?;
    let ridge = config.ridge_for(batch.len());
    if !(ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!("ridge {ridge} must be >= 0")));
    }

    let mut tt = init.orthogonalize(crate::tt::Direction::Left);
    tt.orthogonalize_right_in_place();
    let d = tt.order();
    let mut cache = Cache::new(tt, batch);
    for c in (0..d - 1).rev() {
        cache.update_right(c);
    }

    let mut solver = LocalSolver {
        ridge,
        estimate_ct: config.estimate_ct,
        c_t: config.c_t,
        history: Vec::new(),
        last_residual_sq: 0.0,
    };
    let mut done = 0;
    for sweep in 0..config.sweeps {
        let start = solver.history.last().copied();
        for c in 0..d {
            if !(sweep > 0 && c == 0) {
                solver.solve(&mut cache, c)?;
            }
            if c + 1 < d {
                cache.tt.push_right(c);
                cache.update_left(c + 1);
            }
        }
        for c in (0..d.saturating_sub(1)).rev() {
            cache.tt.push_left(c + 1);
            cache.update_right(c);
            solver.solve(&mut cache, c)?;
        }
        done += 1;
        let end = *solver.history.last().expect("at least one solve");
        let start = start.unwrap_or(solver.history[0]);
        if start > 0.0 && (start - end) / start < config.tol {
            break;
        }
    }
    let loss = *solver.history.last().expect("at least one solve");
    Ok(AlsFit {
        tt: cache.tt,
        c_t: solver.c_t,
        loss,
        residual_sq: solver.last_residual_sq,
        history: solver.history,
        sweeps: done,
    })
}

struct LocalSolver {
    ridge: f64,
    estimate_ct: bool,
    c_t: f64,
    history: Vec<f64>,
    last_residual_sq: f64,
}

impl LocalSolver {
    fn solve(&mut self, cache: &mut Cache<'_>, core: usize) -> Result<()> {
        let batch = cache.batch;
        let len = batch.len();
        let p = cache.tt.core(core).data().len();
        let mut rows = vec![0.0; len * p];
        cache.fill_rows(core, &mut rows);
        let a = DMatrix::from_row_slice(len, p, &rows);
        drop(rows);
        // target without the intercept
        let y0 = DVector::from_iterator(len, batch.dt_f.iter().map(|v| -v));
        let k_old = DVector::from_column_slice(cache.tt.core(core).data());

        let (ata, aty) = (a.tr_mul(&a), a.tr_mul(&y0));
        let col_mean = if self.estimate_ct {
            Some(DVector::from_iterator(p, a.column_iter().map(|c| c.sum() / len as f64)))
        } else {
            None
        };
        let y_mean = y0.sum() / len as f64;

        if self.history.is_empty() {
            let c = match &col_mean {
                Some(m) => y_mean - m.dot(&k_old),
                None => self.c_t,
            };
            let res = &a * &k_old - y0.add_scalar(-c);
            self.history.push(res.norm_squared() + self.ridge * k_old.norm_squared());
        }

        let mut h = ata;
        let mut rhs = aty;
        if let Some(m) = &col_mean {
            h -= (m * m.transpose()) * len as f64;
            rhs -= m * (len as f64 * y_mean);
        } else {
            rhs -= a.tr_mul(&DVector::from_element(len, self.c_t));
        }
        for i in 0..p {
            h[(i, i)] += self.ridge;
        }
        let chol = match h.cholesky() {
            Some(c) => c,
            None if self.ridge == 0.0 => return Err(Error::SingularSystem { core }),
            None => {
                return Err(Error::Numerical(format!(
                    "local system for core {core} is not positive definite"
                )))
            }
        };
        let k = chol.solve(&rhs);
        if k.iter().any(|v| !v.is_finite()) {
            return Err(if self.ridge == 0.0 {
                Error::SingularSystem { core }
            } else {
                Error::Numerical(format!("non-finite solution for core {core}"))
            });
        }
        if let Some(m) = &col_mean {
            self.c_t = y_mean - m.dot(&k);
        }
        let res = &a * &k - y0.add_scalar(-self.c_t);
        self.last_residual_sq = res.norm_squared();
        self.history.push(self.last_residual_sq + self.ridge * k.norm_squared());
        cache.tt.core_mut(core).data_mut().copy_from_slice(k.as_slice());
        Ok(())
    }
}

/// Interface caches for all samples.
struct Cache<'a> {
    tt: TensorTrain,
    batch: &'a TrainingBatch,
    /// `left_p[c]`: `N x (d * r_c)`
    left_p: Vec<Vec<f64>>,
    /// `left_q[c]`: `N x r_c`
    left_q: Vec<Vec<f64>>,
    /// `right_r[c]`: `N x r_{c+1}`
    right_r: Vec<Vec<f64>>,
    /// `right_z[c]`: `N x (r_{c+1} * d)`
    right_z: Vec<Vec<f64>>,
}

impl<'a> Cache<'a> {
    fn new(tt: TensorTrain, batch: &'a TrainingBatch) -> Self {
        let d = tt.order();
        let len = batch.len();
        let mut left_p = vec![Vec::new(); d];
        let mut left_q = vec![Vec::new(); d];
        let mut p0 = vec![0.0; len * d * d];
        for chunk in p0.chunks_exact_mut(d * d) {
            for k in 0..d {
                chunk[k * d + k] = 1.0;
            }
        }
        left_p[0] = p0;
        left_q[0] = vec![0.0; len * d];
        let mut right_r = vec![Vec::new(); d];
        let mut right_z = vec![Vec::new(); d];
        right_r[d - 1] = vec![1.0; len];
        right_z[d - 1] = vec![0.0; len * d];
        Self {
            tt,
            batch,
            left_p,
            left_q,
            right_r,
            right_z,
        }
    }

    /// Recomputes `P_c, Q_c` from position `c - 1`.
    fn update_left(&mut self, c: usize) {
        let d = self.tt.order();
        let core = self.tt.core(c - 1);
        let (l, n, r) = core.shape();
        let batch = self.batch;
        let (done, rest) = self.left_p.split_at_mut(c);
        let p_prev = &done[c - 1];
        let p_next = &mut rest[0];
        let (qdone, qrest) = self.left_q.split_at_mut(c);
        let q_prev = &qdone[c - 1];
        let q_next = &mut qrest[0];
        p_next.resize(batch.len() * d * r, 0.0);
        q_next.resize(batch.len() * r, 0.0);
        p_next
            .par_chunks_mut(d * r)
            .zip(q_next.par_chunks_mut(r))
            .enumerate()
            .for_each(|(s, (pn, qn))| {
                let mut mod_phi = vec![0.0; n];
                batch.modified(c - 1, s, &mut mod_phi);
                let mut m = vec![0.0; l * r];
                let mut dm = vec![0.0; l * r];
                core.contract_mode_into(batch.phi(c - 1, s), &mut m);
                core.contract_mode_into(&mod_phi, &mut dm);
                let pp = &p_prev[s * d * l..(s + 1) * d * l];
                let qp = &q_prev[s * l..(s + 1) * l];
                pn.iter_mut().for_each(|v| *v = 0.0);
                for a in 0..d {
                    for j in 0..l {
                        let v = pp[a * l + j];
                        if v != 0.0 {
                            for b in 0..r {
                                pn[a * r + b] += v * m[j * r + b];
                            }
                        }
                    }
                }
                qn.iter_mut().for_each(|v| *v = 0.0);
                for j in 0..l {
                    let (qj, pj) = (qp[j], pp[(c - 1) * l + j]);
                    for b in 0..r {
                        qn[b] += qj * m[j * r + b] + pj * dm[j * r + b];
                    }
                }
            });
    }

    /// Recomputes `R_c, Z_c` from position `c + 1`.
    fn update_right(&mut self, c: usize) {
        let d = self.tt.order();
        let core = self.tt.core(c + 1);
        let (l, n, r) = core.shape();
        let batch = self.batch;
        let (head, tail) = self.right_r.split_at_mut(c + 1);
        let r_prev = &tail[0];
        let r_next = &mut head[c];
        let (zhead, ztail) = self.right_z.split_at_mut(c + 1);
        let z_prev = &ztail[0];
        let z_next = &mut zhead[c];
        r_next.resize(batch.len() * l, 0.0);
        z_next.resize(batch.len() * l * d, 0.0);
        r_next
            .par_chunks_mut(l)
            .zip(z_next.par_chunks_mut(l * d))
            .enumerate()
            .for_each(|(s, (rn, zn))| {
                let mut mod_phi = vec![0.0; n];
                batch.modified(c + 1, s, &mut mod_phi);
                let mut m = vec![0.0; l * r];
                let mut dm = vec![0.0; l * r];
                core.contract_mode_into(batch.phi(c + 1, s), &mut m);
                core.contract_mode_into(&mod_phi, &mut dm);
                let rp = &r_prev[s * r..(s + 1) * r];
                let zp = &z_prev[s * r * d..(s + 1) * r * d];
                zn.iter_mut().for_each(|v| *v = 0.0);
                for a in 0..l {
                    let (mut mr, mut dr) = (0.0, 0.0);
                    for b in 0..r {
                        let (mv, rb) = (m[a * r + b], rp[b]);
                        mr += mv * rb;
                        dr += dm[a * r + b] * rb;
                        if mv != 0.0 {
                            for k in 0..d {
                                zn[a * d + k] += mv * zp[b * d + k];
                            }
                        }
                    }
                    rn[a] = mr;
                    zn[a * d + c + 1] += dr;
                }
            });
    }

    /// Rows of the local design matrix for core `c`, row-major `N x p`.
    fn fill_rows(&self, c: usize, rows: &mut [f64]) {
        let d = self.tt.order();
        let (l, n, r) = self.tt.core(c).shape();
        let batch = self.batch;
        let (pc, qc, rc, zc) = (&self.left_p[c], &self.left_q[c], &self.right_r[c], &self.right_z[c]);
        rows.par_chunks_mut(l * n * r).enumerate().for_each(|(s, row)| {
            let pp = &pc[s * d * l..(s + 1) * d * l];
            let qq = &qc[s * l..(s + 1) * l];
            let rr = &rc[s * r..(s + 1) * r];
            let zz = &zc[s * r * d..(s + 1) * r * d];
            let mut a1 = vec![0.0; l * r];
            let mut a2 = vec![0.0; l * r];
            for a in 0..l {
                let pa = pp[c * l + a];
                for b in 0..r {
                    let mut acc = qq[a] * rr[b];
                    for k in 0..d {
                        acc += pp[k * l + a] * zz[b * d + k];
                    }
                    a1[a * r + b] = acc;
                    a2[a * r + b] = pa * rr[b];
                }
            }
            let phi = batch.phi(c, s);
            let mut mod_phi = vec![0.0; n];
            batch.modified(c, s, &mut mod_phi);
            for a in 0..l {
                for i in 0..n {
                    let (f, g) = (phi[i], mod_phi[i]);
                    let out = &mut row[(a * n + i) * r..(a * n + i + 1) * r];
                    for b in 0..r {
                        out[b] = f * a1[a * r + b] + g * a2[a * r + b];
                    }
                }
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{Energy, Gaussian};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn gaussian_points(len: usize, d: usize, seed: u64) -> Points {
        Gaussian::standard(d).sample(len, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn random_batch(len: usize, d: usize, n: usize, seed: u64) -> (TrainingBatch, BasisSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = BasisSet::fourier_h2(-5.0, 5.0, n).unwrap();
        let pts = gaussian_points(len, d, seed + 1);
        let dt = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grad = Points::new(d, (0..len * d).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        (TrainingBatch::new(pts, dt, grad, &basis).unwrap(), basis)
    }

    #[test]
    fn stationary_path_has_zero_residual() {
        let basis = BasisSet::fourier_h2(-5.0, 5.0, 5).unwrap();
        let f: Arc<dyn Energy> = Arc::new(Gaussian::standard(2));
        let path = EnergyPath::new(f.clone(), f).unwrap();
        let batch = TrainingBatch::from_path(gaussian_points(100, 2, 1), &path, 0.3, &basis).unwrap();
        let field = FttVectorField::new(TensorTrain::zeros(2, &[5, 5], &[1]).unwrap(), basis).unwrap();
        assert!(residual(&field, &batch, 0.0).unwrap().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn single_core_design_is_plain_regression() {
        let (batch, basis) = random_batch(40, 1, 5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tt = TensorTrain::random(1, &[5], &[], 1.0, &mut rng).unwrap();
        let field = FttVectorField::new(tt, basis.clone()).unwrap();
        let (a, y) = assemble_local_system(&field, &batch, 0, 0.25).unwrap();
        for l in 0..40 {
            let x = batch.points().row(l)[0];
            let g = batch.grad_f().row(l)[0];
            let (v, dv) = basis.eval_features(x).unwrap();
            for s in 0..5 {
                assert!((a[(l, s)] - (g * v[s] - dv[s])).abs() < 1e-14);
            }
            assert_eq!(y[l], -batch.dt_f()[l] - 0.25);
        }
    }

    #[test]
    fn design_matrix_reproduces_direct_evaluation() {
        for (d, n, ranks) in [(2, 2, vec![2]), (3, 4, vec![3, 2]), (4, 3, vec![2, 3, 2])] {
            let (batch, basis) = random_batch(30, d, n, 10 + d as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let tt = TensorTrain::random(d, &vec![n; d], &ranks, 1.0, &mut rng).unwrap();
            let field = FttVectorField::new(tt.clone(), basis).unwrap();
            let direct = residual(&field, &batch, 0.0).unwrap();
            for core in 0..d {
                let (a, y) = assemble_local_system(&field, &batch, core, 0.0).unwrap();
                let k = DVector::from_column_slice(tt.core(core).data());
                let op = &a * k;
                for l in 0..30 {
                    // direct residual = dt + op
                    let want = direct[l] + y[l];
                    assert!((op[l] - want).abs() <= 1e-10 * want.abs().max(1.0), "d={d} core={core}");
                }
            }
        }
    }

    #[test]
    fn zero_gradient_constant_basis_gives_zero_design() {
        let basis = BasisSet::fourier_h2(-5.0, 5.0, 1).unwrap();
        let pts = gaussian_points(20, 3, 2);
        let batch = TrainingBatch::new(pts, vec![0.5; 20], Points::zeros(20, 3), &basis).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let tt = TensorTrain::random(3, &[1, 1, 1], &[1, 1], 1.0, &mut rng).unwrap();
        let field = FttVectorField::new(tt, basis).unwrap();
        for core in 0..3 {
            let (a, _) = assemble_local_system(&field, &batch, core, 0.0).unwrap();
            assert!(a.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn loss_is_monotone_and_intercept_centres_residuals() {
        let (batch, basis) = random_batch(300, 3, 5, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let init = TensorTrain::random(3, &[5, 5, 5], &[3, 3], 0.1, &mut rng).unwrap();
        let fit = als_fit(&batch, &basis, &init, &AlsConfig { sweeps: 4, tol: 0.0, ..Default::default() }).unwrap();
        for w in fit.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-10 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
        let field = FttVectorField::new(fit.tt.clone(), basis.clone()).unwrap();
        let res = residual(&field, &batch, fit.c_t).unwrap();
        let mean = res.iter().sum::<f64>() / res.len() as f64;
        assert!(mean.abs() <= 1e-10, "{mean}");
        let sq: f64 = res.iter().map(|r| r * r).sum();
        assert!((sq - fit.residual_sq).abs() <= 1e-8 * sq.max(1.0));

        // gauge invariance of the loss
        let regauged = FttVectorField::new(fit.tt.orthogonalize(crate::tt::Direction::Left), basis).unwrap();
        let sq2: f64 = residual(&regauged, &batch, fit.c_t).unwrap().iter().map(|r| r * r).sum();
        assert!((sq - sq2).abs() <= 1e-10 * sq.max(1.0));
    }

    #[test]
    fn stationary_path_fit_is_near_zero() {
        let basis = BasisSet::fourier_h2(-5.0, 5.0, 3).unwrap();
        let pts = gaussian_points(200, 2, 9);
        let batch = TrainingBatch::new(pts, vec![0.0; 200], Points::zeros(200, 2), &basis).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let init = TensorTrain::random(2, &[3, 3], &[1], 1e-3, &mut rng).unwrap();
        let fit = als_fit(&batch, &basis, &init, &AlsConfig::default()).unwrap();
        assert!(fit.tt.norm() < 1e-6, "{}", fit.tt.norm());
        assert!(fit.residual_sq < 1e-12);
    }

    #[test]
    fn zero_ridge_on_degenerate_design_is_reported() {
        let basis = BasisSet::fourier_h2(-5.0, 5.0, 1).unwrap();
        let batch = TrainingBatch::new(gaussian_points(10, 2, 1), vec![1.0; 10], Points::zeros(10, 2), &basis).unwrap();
        let init = TensorTrain::random(2, &[1, 1], &[1], 1.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let err = als_fit(&batch, &basis, &init, &AlsConfig { ridge: Some(0.0), ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::SingularSystem { .. }), "{err}");
        assert!(err.to_string().contains("ridge"));
    }
}
