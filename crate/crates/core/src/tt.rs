//! Tensor trains with a vector-valued output leg.
//!
//! A [`TensorTrain`] of order `d` stores cores `K_k` of shape
//! `(r_{k-1}, n_k, r_k)`. The first core's left leg has size `output_dim`, the
//! last core's right leg has size one, so the chain contracted with one
//! feature vector per mode yields a vector of length `output_dim`:
//!
//! ```text
//!  out ── K_1 ── K_2 ── ··· ── K_d
//!          │      │             │
//!         Φ_1    Φ_2           Φ_d
//! ```
//!
//! Core entries are stored row-major over `(left, mode, right)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// One three-way core, row-major over `(left, mode, right)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Core {
    left: usize,
    mode: usize,
    right: usize,
    data: Vec<f64>,
}

impl Core {
    pub fn new(left: usize, mode: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if left == 0 || mode == 0 || right == 0 {
            return Err(Error::Shape(format!(
                "core shape ({left}, {mode}, {right}) has a zero leg"
            )));
        }
        if data.len() != left * mode * right {
            return Err(Error::Shape(format!(
                "core ({left}, {mode}, {right}) needs {} entries, got {}",
                left * mode * right,
                data.len()
            )));
        }
        Ok(Self {
            left,
            mode,
            right,
            data,
        })
    }

    pub fn zeros(left: usize, mode: usize, right: usize) -> Self {
        Self {
            left,
            mode,
            right,
            data: vec![0.0; left * mode * right],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.left, self.mode, self.right)
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[(a * self.mode + i) * self.right + b]
    }

    /// `sum_i K[:, i, :] * w_i` written row-major into `out` (`left * right`).
    #[inline]
    pub fn contract_mode_into(&self, w: &[f64], out: &mut [f64]) {
        debug_assert_eq!(w.len(), self.mode);
        let (l, n, r) = (self.left, self.mode, self.right);
        out[..l * r].iter_mut().for_each(|o| *o = 0.0);
        for a in 0..l {
            let row = &mut out[a * r..(a + 1) * r];
            for (i, &wi) in w.iter().enumerate() {
                if wi == 0.0 {
                    continue;
                }
                let src = &self.data[(a * n + i) * r..(a * n + i + 1) * r];
                for (o, s) in row.iter_mut().zip(src) {
                    *o += wi * s;
                }
            }
        }
    }

    /// `(left * mode) x right` unfolding.
    pub fn left_unfolding(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.left * self.mode, self.right, &self.data)
    }

    /// `left x (mode * right)` unfolding.
    pub fn right_unfolding(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.left, self.mode * self.right, &self.data)
    }

    fn from_left_unfolding(m: &DMatrix<f64>, mode: usize) -> Self {
        let left = m.nrows() / mode;
        Self {
            left,
            mode,
            right: m.ncols(),
            data: row_major(m),
        }
    }

    fn from_right_unfolding(m: &DMatrix<f64>, mode: usize) -> Self {
        Self {
            left: m.nrows(),
            mode,
            right: m.ncols() / mode,
            data: row_major(m),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Every core but the last has orthonormal left unfolding.
    Left,
    /// Every core but the first has orthonormal right unfolding.
    Right,
}

/// Diagnostics from [`TensorTrain::round_with_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    /// Sum of squared discarded singular values for each edge `1..d`.
    pub discarded_sq: Vec<f64>,
    /// Frobenius norm of the input.
    pub norm: f64,
}

impl RoundReport {
    /// `sqrt(sum of all discarded sigma^2)`; equals the Frobenius error of the rounding.
    pub fn error(&self) -> f64 {
        self.discarded_sq.iter().sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorTrain {
    cores: Vec<Core>,
}

impl TensorTrain {
    pub fn new(cores: Vec<Core>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::Shape("tensor train needs at least one core".into()));
        }
        for (k, w) in cores.windows(2).enumerate() {
            if w[0].right != w[1].left {
                return Err(Error::Shape(format!(
                    "core {k} right rank {} != core {} left rank {}",
                    w[0].right,
                    k + 1,
                    w[1].left
                )));
            }
        }
        if cores.last().map(|c| c.right) != Some(1) {
            return Err(Error::Shape("last core must have right rank 1".into()));
        }
        if cores.iter().any(|c| c.data.iter().any(|x| !x.is_finite())) {
            return Err(Error::Numerical("non-finite core entry".into()));
        }
        Ok(Self { cores })
    }

    /// All-zero train with the given internal ranks.
    pub fn zeros(output_dim: usize, modes: &[usize], ranks: &[usize]) -> Result<Self> {
        let shapes = Self::shapes(output_dim, modes, ranks)?;
        Ok(Self {
            cores: shapes
                .into_iter()
                .map(|(l, n, r)| Core::zeros(l, n, r))
                .collect(),
        })
    }

    /// Train with i.i.d. `N(0, scale^2)` entries.
    pub fn random<R: Rng + ?Sized>(
        output_dim: usize,
        modes: &[usize],
        ranks: &[usize],
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let shapes = Self::shapes(output_dim, modes, ranks)?;
        let cores = shapes
            .into_iter()
            .map(|(l, n, r)| {
                let data = (0..l * n * r)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                Core {
                    left: l,
                    mode: n,
                    right: r,
                    data,
                }
            })
            .collect();
        Ok(Self { cores })
    }

    fn shapes(
        output_dim: usize,
        modes: &[usize],
        ranks: &[usize],
    ) -> Result<Vec<(usize, usize, usize)>> {
        if modes.is_empty() {
            return Err(Error::Shape("need at least one mode".into()));
        }
        if ranks.len() + 1 != modes.len() {
            return Err(Error::Shape(format!(
                "{} modes need {} internal ranks, got {}",
                modes.len(),
                modes.len() - 1,
                ranks.len()
            )));
        }
        if output_dim == 0 || modes.contains(&0) || ranks.contains(&0) {
            return Err(Error::Shape("dimensions must be positive".into()));
        }
        let mut full = Vec::with_capacity(modes.len() + 1);
        full.push(output_dim);
        full.extend_from_slice(ranks);
        full.push(1);
        Ok(modes
            .iter()
            .enumerate()
            .map(|(k, &n)| (full[k], n, full[k + 1]))
            .collect())
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn output_dim(&self) -> usize {
        self.cores[0].left
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &Core {
        &self.cores[k]
    }

    pub(crate) fn core_mut(&mut self, k: usize) -> &mut Core {
        &mut self.cores[k]
    }

    pub fn into_cores(self) -> Vec<Core> {
        self.cores
    }

    /// Internal ranks `r_1, ..., r_{d-1}`.
    pub fn ranks(&self) -> Vec<usize> {
        self.cores[..self.cores.len() - 1]
            .iter()
            .map(|c| c.right)
            .collect()
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    pub fn modes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.mode).collect()
    }

    pub fn num_params(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    /// Contracts every mode with its feature vector.
    pub fn evaluate<V: AsRef<[f64]>>(&self, features: &[V]) -> Result<Vec<f64>> {
        if features.len() != self.order() {
            return Err(Error::Shape(format!(
                "{} feature vectors for a train of order {}",
                features.len(),
                self.order()
            )));
        }
        for (k, (c, f)) in self.cores.iter().zip(features).enumerate() {
            if f.as_ref().len() != c.mode {
                return Err(Error::Shape(format!(
                    "feature vector {k} has length {}, core mode is {}",
                    f.as_ref().len(),
                    c.mode
                )));
            }
        }
        let out_dim = self.output_dim();
        let mut acc = vec![0.0; out_dim * self.cores[0].right];
        self.cores[0].contract_mode_into(features[0].as_ref(), &mut acc);
        let mut m = Vec::new();
        let mut next = Vec::new();
        for (c, f) in self.cores.iter().zip(features).skip(1) {
            m.resize(c.left * c.right, 0.0);
            c.contract_mode_into(f.as_ref(), &mut m);
            next.clear();
            next.resize(out_dim * c.right, 0.0);
            for a in 0..out_dim {
                for j in 0..c.left {
                    let s = acc[a * c.left + j];
                    if s == 0.0 {
                        continue;
                    }
                    for b in 0..c.right {
                        next[a * c.right + b] += s * m[j * c.right + b];
                    }
                }
            }
            std::mem::swap(&mut acc, &mut next);
        }
        Ok(acc)
    }

    /// Sum of two trains: block-diagonal cores, ranks add.
    pub fn add(&self, other: &TensorTrain) -> Result<TensorTrain> {
        if self.modes() != other.modes() || self.output_dim() != other.output_dim() {
            return Err(Error::Shape(format!(
                "cannot add trains with modes {:?}/{:?} and outputs {}/{}",
                self.modes(),
                other.modes(),
                self.output_dim(),
                other.output_dim()
            )));
        }
        let d = self.order();
        if d == 1 {
            let a = &self.cores[0];
            let data = a
                .data
                .iter()
                .zip(&other.cores[0].data)
                .map(|(x, y)| x + y)
                .collect();
            return Ok(TensorTrain {
                cores: vec![Core { data, ..a.clone() }],
            });
        }
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let (a, b) = (&self.cores[k], &other.cores[k]);
            let n = a.mode;
            let left = if k == 0 { a.left } else { a.left + b.left };
            let right = if k == d - 1 { 1 } else { a.right + b.right };
            let mut c = Core::zeros(left, n, right);
            let (a_off_l, b_off_l) = (0, if k == 0 { 0 } else { a.left });
            let (a_off_r, b_off_r) = (0, if k == d - 1 { 0 } else { a.right });
            for (src, off_l, off_r) in [(a, a_off_l, a_off_r), (b, b_off_l, b_off_r)] {
                for l in 0..src.left {
                    for i in 0..n {
                        for r in 0..src.right {
                            c.data[((l + off_l) * n + i) * right + r + off_r] += src.get(l, i, r);
                        }
                    }
                }
            }
            cores.push(c);
        }
        Ok(TensorTrain { cores })
    }

    /// Multiplies the first core by `factor`.
    pub fn scale(&self, factor: f64) -> TensorTrain {
        let mut out = self.clone();
        out.cores[0].data.iter_mut().for_each(|x| *x *= factor);
        out
    }

    pub fn orthogonalize(&self, direction: Direction) -> TensorTrain {
        let mut out = self.clone();
        match direction {
            Direction::Left => out.orthogonalize_left_in_place(),
            Direction::Right => out.orthogonalize_right_in_place(),
        }
        out
    }

    pub(crate) fn orthogonalize_left_in_place(&mut self) {
        for k in 0..self.order() - 1 {
            self.push_right(k);
        }
    }

    pub(crate) fn orthogonalize_right_in_place(&mut self) {
        for k in (1..self.order()).rev() {
            self.push_left(k);
        }
    }

    /// QR of core `k`'s left unfolding; the triangular factor moves into core `k + 1`.
    pub(crate) fn push_right(&mut self, k: usize) {
        let core = &self.cores[k];
        let n = core.mode;
        let qr = core.left_unfolding().qr();
        let (q, r) = (qr.q(), qr.r());
        let next = &self.cores[k + 1];
        let merged = &r * next.right_unfolding();
        let next_mode = next.mode;
        self.cores[k] = Core::from_left_unfolding(&q, n);
        self.cores[k + 1] = Core::from_right_unfolding(&merged, next_mode);
    }

    /// LQ of core `k`'s right unfolding; the triangular factor moves into core `k - 1`.
    pub(crate) fn push_left(&mut self, k: usize) {
        let core = &self.cores[k];
        let n = core.mode;
        let qr = core.right_unfolding().transpose().qr();
        let (q, r) = (qr.q(), qr.r());
        let prev = &self.cores[k - 1];
        let merged = prev.left_unfolding() * r.transpose();
        let prev_mode = prev.mode;
        self.cores[k] = Core::from_right_unfolding(&q.transpose(), n);
        self.cores[k - 1] = Core::from_left_unfolding(&merged, prev_mode);
    }

    /// Frobenius norm of the full coefficient tensor.
    pub fn norm(&self) -> f64 {
        self.orthogonalize(Direction::Left)
            .cores
            .last()
            .map(Core::frobenius_norm)
            .unwrap_or(0.0)
    }

    /// TT-SVD rounding, see [`TensorTrain::round_with_report`].
    pub fn round(&self, rel_tolerance: f64, max_rank: usize) -> TensorTrain {
        self.round_with_report(rel_tolerance, max_rank).0
    }

    /// Left-orthogonalizes, then truncates every edge from right to left.
    ///
    /// Edge thresholds are `rel_tolerance * ||a|| / sqrt(d - 1)`, so the total
    /// Frobenius error stays below `rel_tolerance * ||a||` unless `max_rank`
    /// forces more truncation. Ranks are at least one.
    pub fn round_with_report(&self, rel_tolerance: f64, max_rank: usize) -> (TensorTrain, RoundReport) {
        let max_rank = max_rank.max(1);
        let mut tt = self.orthogonalize(Direction::Left);
        let d = tt.order();
        let norm = tt.cores[d - 1].frobenius_norm();
        let mut discarded_sq = vec![0.0; d.saturating_sub(1)];
        if d == 1 {
            return (tt, RoundReport { discarded_sq, norm });
        }
        let delta = rel_tolerance.max(0.0) * norm / ((d - 1) as f64).sqrt();
        for k in (1..d).rev() {
            let core = &tt.cores[k];
            let n = core.mode;
            let svd = core.right_unfolding().svd(true, true);
            let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
            let sigma = &svd.singular_values;
            let mut order: Vec<usize> = (0..sigma.len()).collect();
            order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));

            let mut keep = order.len();
            let mut tail = 0.0;
            while keep > 1 {
                let s = sigma[order[keep - 1]];
                if tail + s * s > delta * delta {
                    break;
                }
                tail += s * s;
                keep -= 1;
            }
            while keep > max_rank {
                let s = sigma[order[keep - 1]];
                tail += s * s;
                keep -= 1;
            }
            discarded_sq[k - 1] = tail;

            let kept = &order[..keep];
            let vt_kept = DMatrix::from_fn(keep, vt.ncols(), |i, j| vt[(kept[i], j)]);
            let us = DMatrix::from_fn(u.nrows(), keep, |i, j| u[(i, kept[j])] * sigma[kept[j]]);
            let prev = &tt.cores[k - 1];
            let prev_mode = prev.mode;
            let merged = prev.left_unfolding() * us;
            tt.cores[k] = Core::from_right_unfolding(&vt_kept, n);
            tt.cores[k - 1] = Core::from_left_unfolding(&merged, prev_mode);
        }
        (tt, RoundReport { discarded_sq, norm })
    }

    /// Full coefficient tensor, row-major over `(out, i_1, ..., i_d)`.
    ///
    /// Intended for small instances only.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut acc = self.cores[0].data.clone();
        let mut rows = self.output_dim() * self.cores[0].mode;
        let mut width = self.cores[0].right;
        for c in &self.cores[1..] {
            let a = DMatrix::from_row_slice(rows, width, &acc);
            let prod = a * c.right_unfolding();
            rows *= c.mode;
            width = c.right;
            acc = row_major(&prod);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn random_features(modes: &[usize], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        modes
            .iter()
            .map(|&n| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
        let scale = b.iter().map(|x| x.abs()).fold(1e-300, f64::max);
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
    }

    #[test]
    fn all_ones_rank_one_chain() {
        let cores = vec![
            Core::new(3, 2, 1, vec![1.0; 6]).unwrap(),
            Core::new(1, 2, 1, vec![1.0; 2]).unwrap(),
        ];
        let tt = TensorTrain::new(cores).unwrap();
        let v = tt.evaluate(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(v, vec![1.0; 3]);
    }

    #[test]
    fn zero_cores_evaluate_to_zero() {
        let tt = TensorTrain::zeros(2, &[3, 3, 3], &[2, 2]).unwrap();
        let mut r = rng();
        let v = tt.evaluate(&random_features(&[3, 3, 3], &mut r)).unwrap();
        assert_eq!(v, vec![0.0, 0.0]);
    }

    #[test]
    fn evaluate_matches_dense_summation() {
        let mut r = rng();
        let modes = [2, 2, 2];
        let tt = TensorTrain::random(2, &modes, &[2, 2], 1.0, &mut r).unwrap();
        let f = random_features(&modes, &mut r);
        let got = tt.evaluate(&f).unwrap();
        // explicit sum over (i1, i2, i3) of the chain products
        let mut want = vec![0.0; 2];
        for out in 0..2 {
            for i1 in 0..2 {
                for i2 in 0..2 {
                    for i3 in 0..2 {
                        let mut chain = 0.0;
                        for a in 0..2 {
                            for b in 0..2 {
                                chain += tt.core(0).get(out, i1, a)
                                    * tt.core(1).get(a, i2, b)
                                    * tt.core(2).get(b, i3, 0);
                            }
                        }
                        want[out] += chain * f[0][i1] * f[1][i2] * f[2][i3];
                    }
                }
            }
        }
        assert!(rel_close(&got, &want, 1e-12), "{got:?} vs {want:?}");
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let tt = TensorTrain::zeros(1, &[3, 3], &[1]).unwrap();
        assert!(tt.evaluate(&[vec![1.0; 3], vec![1.0; 2]]).is_err());
        assert!(tt.evaluate(&[vec![1.0; 3]]).is_err());
    }

    #[test]
    fn add_zero_and_additive_inverse() {
        let mut r = rng();
        let modes = [3, 4, 2];
        let t = TensorTrain::random(2, &modes, &[2, 3], 1.0, &mut r).unwrap();
        let zero = TensorTrain::zeros(2, &modes, &[1, 1]).unwrap();
        let sum = t.add(&zero).unwrap();
        let diff = t.add(&t.scale(-1.0)).unwrap();
        for _ in 0..100 {
            let f = random_features(&modes, &mut r);
            let a = t.evaluate(&f).unwrap();
            assert!(rel_close(&sum.evaluate(&f).unwrap(), &a, 1e-14));
            assert!(diff.evaluate(&f).unwrap().iter().all(|x| x.abs() <= 1e-10));
        }
    }

    #[test]
    fn add_sums_ranks_and_values() {
        let mut r = rng();
        let modes = [3, 3, 3, 3];
        let a = TensorTrain::random(2, &modes, &[2, 2, 2], 1.0, &mut r).unwrap();
        let b = TensorTrain::random(2, &modes, &[2, 2, 2], 1.0, &mut r).unwrap();
        let s = a.add(&b).unwrap();
        assert_eq!(s.ranks(), vec![4, 4, 4]);
        for _ in 0..20 {
            let f = random_features(&modes, &mut r);
            let want: Vec<f64> = a
                .evaluate(&f)
                .unwrap()
                .iter()
                .zip(b.evaluate(&f).unwrap())
                .map(|(x, y)| x + y)
                .collect();
            assert!(rel_close(&s.evaluate(&f).unwrap(), &want, 1e-12));
        }
    }

    #[test]
    fn add_rejects_shape_mismatch() {
        let a = TensorTrain::zeros(2, &[3, 3], &[1]).unwrap();
        let b = TensorTrain::zeros(2, &[3, 4], &[1]).unwrap();
        let c = TensorTrain::zeros(1, &[3, 3], &[1]).unwrap();
        assert!(a.add(&b).is_err());
        assert!(a.add(&c).is_err());
    }

    #[test]
    fn scale_is_linear() {
        let mut r = rng();
        let modes = [4, 4];
        let t = TensorTrain::random(2, &modes, &[3], 1.0, &mut r).unwrap();
        let f = random_features(&modes, &mut r);
        let base = t.evaluate(&f).unwrap();
        assert_eq!(t.scale(1.0).evaluate(&f).unwrap(), base);
        assert!(t.scale(0.0).evaluate(&f).unwrap().iter().all(|&x| x == 0.0));
        let twice = t.scale(2.0).evaluate(&f).unwrap();
        for (x, y) in twice.iter().zip(&base) {
            assert!((x - 2.0 * y).abs() <= 1e-14 * y.abs().max(1.0));
        }
    }

    #[test]
    fn orthogonalization_is_a_gauge_change() {
        let mut r = rng();
        let modes = [3, 3, 3];
        let t = TensorTrain::random(2, &modes, &[3, 2], 1.0, &mut r).unwrap();
        let left = t.orthogonalize(Direction::Left);
        let right = t.orthogonalize(Direction::Right);
        for _ in 0..100 {
            let f = random_features(&modes, &mut r);
            let v = t.evaluate(&f).unwrap();
            assert!(rel_close(&left.evaluate(&f).unwrap(), &v, 1e-12));
            assert!(rel_close(&right.evaluate(&f).unwrap(), &v, 1e-12));
        }
        for c in &left.cores()[..2] {
            let q = c.left_unfolding();
            let gram = q.transpose() * &q;
            let err = (gram - DMatrix::identity(c.right(), c.right())).norm();
            assert!(err <= 1e-12, "{err}");
        }
        for c in &right.cores()[1..] {
            let q = c.right_unfolding();
            let gram = &q * q.transpose();
            let err = (gram - DMatrix::identity(c.left(), c.left())).norm();
            assert!(err <= 1e-12, "{err}");
        }
    }

    #[test]
    fn norm_matches_dense_norm() {
        let mut r = rng();
        let t = TensorTrain::random(2, &[3, 2, 3], &[3, 2], 1.0, &mut r).unwrap();
        let dense: f64 = t.to_dense().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((t.norm() - dense).abs() <= 1e-12 * dense);
    }

    #[test]
    fn redundant_rank_two_rounds_to_rank_one() {
        let mut r = rng();
        let t = TensorTrain::random(2, &[3, 3, 3], &[1, 1], 1.0, &mut r).unwrap();
        let zero = TensorTrain::zeros(2, &[3, 3, 3], &[1, 1]).unwrap();
        let padded = t.add(&zero).unwrap();
        assert_eq!(padded.ranks(), vec![2, 2]);
        let (rounded, report) = padded.round_with_report(1e-12, 20);
        assert_eq!(rounded.ranks(), vec![1, 1]);
        assert!(report.error() <= 1e-12 * report.norm);
    }

    #[test]
    fn doubled_train_recompresses_exactly() {
        let mut r = rng();
        let modes = [3, 3, 3, 3];
        let t = TensorTrain::random(2, &modes, &[2, 3, 2], 1.0, &mut r).unwrap();
        let doubled = t.add(&t).unwrap().round(1e-12, 20);
        assert_eq!(doubled.ranks(), t.ranks());
        for _ in 0..20 {
            let f = random_features(&modes, &mut r);
            let want: Vec<f64> = t.evaluate(&f).unwrap().iter().map(|x| 2.0 * x).collect();
            assert!(rel_close(&doubled.evaluate(&f).unwrap(), &want, 1e-10));
        }
    }

    #[test]
    fn rounding_obeys_max_rank_and_tolerance() {
        let mut r = rng();
        let t = TensorTrain::random(2, &[4, 4, 4], &[4, 4], 1.0, &mut r).unwrap();
        let (capped, _) = t.round_with_report(0.0, 2);
        assert!(capped.ranks().iter().all(|&k| k <= 2));
        let (loose, rep) = t.round_with_report(0.3, 20);
        assert!(rep.error() <= 0.3 * rep.norm + 1e-12);
        assert!(loose.ranks().iter().zip(t.ranks()).all(|(a, b)| *a <= b));
    }
}
