//! Univariate H²-orthonormal Fourier systems.
//!
//! The raw system on `[a, b]` with `u = (x - a) / (b - a)` is
//! `1, cos(2πu), sin(2πu), cos(4πu), sin(4πu), ...`; an even size ends with
//! one extra cosine. It is orthonormalized under
//! `<f, g> = ∫_a^b f g + f' g' + f'' g'' dx` by the inverse Cholesky factor of
//! its Gram matrix. Outside `[a, b]` the functions extend periodically.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest basis size accepted by [`BasisSet::fourier_h2`].
pub const DEFAULT_MAX_SIZE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    FourierH2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    lo: f64,
    hi: f64,
    size: usize,
    kind: BasisKind,
    /// Lower-triangular `R` with `φ = R ψ`.
    transform: DMatrix<f64>,
}

impl BasisSet {
    pub fn fourier_h2(lo: f64, hi: f64, size: usize) -> Result<Self> {
        Self::fourier_h2_with_cap(lo, hi, size, DEFAULT_MAX_SIZE)
    }

    pub fn fourier_h2_with_cap(lo: f64, hi: f64, size: usize, cap: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "basis interval [{lo}, {hi}] must be finite and non-empty"
            )));
        }
        if size == 0 {
            return Err(Error::InvalidArgument("basis size must be >= 1".into()));
        }
        if size > cap {
            return Err(Error::InvalidArgument(format!(
                "basis size {size} exceeds the cap of {cap}"
            )));
        }
        let gram = raw_gram(lo, hi, size);
        let chol = gram.cholesky().ok_or_else(|| {
            Error::Numerical("Gram matrix of the raw Fourier system is not positive definite".into())
        })?;
        let l = chol.l();
        let transform = l
            .solve_lower_triangular(&DMatrix::identity(size, size))
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        Ok(Self {
            lo,
            hi,
            size,
            kind: BasisKind::FourierH2,
            transform,
        })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn transform(&self) -> &DMatrix<f64> {
        &self.transform
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }

    /// Values and first derivatives of the orthonormal system at `x`.
    pub fn eval_features(&self, x: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if !x.is_finite() {
            return Err(Error::Numerical(format!("basis evaluated at {x}")));
        }
        let mut values = vec![0.0; self.size];
        let mut derivs = vec![0.0; self.size];
        self.eval_into(x, &mut values, &mut derivs);
        Ok((values, derivs))
    }

    /// Like [`eval_features`](Self::eval_features) without allocation or the
    /// finiteness check.
    pub fn eval_into(&self, x: f64, values: &mut [f64], derivs: &mut [f64]) {
        let n = self.size;
        let mut raw_v = [0.0; DEFAULT_MAX_SIZE];
        let mut raw_d = [0.0; DEFAULT_MAX_SIZE];
        let (rv, rd) = if n <= DEFAULT_MAX_SIZE {
            (&mut raw_v[..n], &mut raw_d[..n])
        } else {
            // only reachable with a raised cap
            return self.eval_into_heap(x, values, derivs);
        };
        self.raw(x, rv, rd, None);
        self.apply_transform(rv, rd, values, derivs);
    }

    fn eval_into_heap(&self, x: f64, values: &mut [f64], derivs: &mut [f64]) {
        let mut rv = vec![0.0; self.size];
        let mut rd = vec![0.0; self.size];
        self.raw(x, &mut rv, &mut rd, None);
        self.apply_transform(&rv, &rd, values, derivs);
    }

    fn apply_transform(&self, rv: &[f64], rd: &[f64], values: &mut [f64], derivs: &mut [f64]) {
        let r = &self.transform;
        for i in 0..self.size {
            let (mut v, mut d) = (0.0, 0.0);
            for j in 0..=i {
                let c = r[(i, j)];
                v += c * rv[j];
                d += c * rd[j];
            }
            values[i] = v;
            derivs[i] = d;
        }
    }

    /// Raw (non-orthonormalized) system and its derivatives up to second order.
    pub fn raw(&self, x: f64, values: &mut [f64], derivs: &mut [f64], second: Option<&mut [f64]>) {
        let width = self.hi - self.lo;
        let u = ((x - self.lo) / width).rem_euclid(1.0);
        values[0] = 1.0;
        derivs[0] = 0.0;
        let mut second = second;
        if let Some(s) = second.as_deref_mut() {
            s[0] = 0.0;
        }
        for j in 1..self.size {
            let k = j.div_ceil(2);
            let omega = 2.0 * PI * k as f64 / width;
            let (s, c) = (2.0 * PI * k as f64 * u).sin_cos();
            let (v, d, dd) = if j % 2 == 1 {
                (c, -omega * s, -omega * omega * c)
            } else {
                (s, omega * c, -omega * omega * s)
            };
            values[j] = v;
            derivs[j] = d;
            if let Some(sd) = second.as_deref_mut() {
                sd[j] = dd;
            }
        }
    }
}

/// Closed-form H² Gram matrix of the raw system on `[lo, hi]`.
///
/// Full-period sines and cosines are mutually orthogonal in all three terms,
/// so the matrix is diagonal.
pub fn raw_gram(lo: f64, hi: f64, size: usize) -> DMatrix<f64> {
    let width = hi - lo;
    DMatrix::from_fn(size, size, |i, j| {
        if i != j {
            0.0
        } else if i == 0 {
            width
        } else {
            let omega = 2.0 * PI * i.div_ceil(2) as f64 / width;
            let w2 = omega * omega;
            0.5 * width * (1.0 + w2 + w2 * w2)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Midpoint-rule H² Gram of the orthonormal system.
    fn quadrature_gram(b: &BasisSet, nodes: usize) -> DMatrix<f64> {
        let (lo, hi) = b.interval();
        let n = b.size();
        let h = (hi - lo) / nodes as f64;
        let r = b.transform();
        let mut g = DMatrix::zeros(n, n);
        let (mut rv, mut rd, mut rs) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for q in 0..nodes {
            let x = lo + (q as f64 + 0.5) * h;
            b.raw(x, &mut rv, &mut rd, Some(&mut rs));
            let v = r * DMatrix::from_column_slice(n, 1, &rv);
            let d = r * DMatrix::from_column_slice(n, 1, &rd);
            let s = r * DMatrix::from_column_slice(n, 1, &rs);
            g += (&v * v.transpose() + &d * d.transpose() + &s * s.transpose()) * h;
        }
        g
    }

    #[test]
    fn single_constant_on_unit_interval() {
        let b = BasisSet::fourier_h2(0.0, 1.0, 1).unwrap();
        let (v, d) = b.eval_features(0.3).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15);
        assert_eq!(d[0], 0.0);
    }

    #[test]
    fn three_functions_have_diagonal_gram() {
        let b = BasisSet::fourier_h2(0.0, 1.0, 3).unwrap();
        let g = raw_gram(0.0, 1.0, 3);
        let w2 = (2.0 * PI).powi(2);
        assert!((g[(1, 1)] - 0.5 * (1.0 + w2 + w2 * w2)).abs() < 1e-12);
        for i in 0..3 {
            assert!((b.transform()[(i, i)] - 1.0 / g[(i, i)].sqrt()).abs() < 1e-14);
        }
        assert!(b.transform()[(1, 0)] == 0.0 && b.transform()[(2, 1)] == 0.0);

        // closed-form raw Gram vs quadrature
        let nodes = 10_000;
        let h = 1.0 / nodes as f64;
        let (mut rv, mut rd, mut rs) = (vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]);
        let mut q = DMatrix::<f64>::zeros(3, 3);
        for k in 0..nodes {
            b.raw((k as f64 + 0.5) * h, &mut rv, &mut rd, Some(&mut rs));
            for i in 0..3 {
                for j in 0..3 {
                    q[(i, j)] += h * (rv[i] * rv[j] + rd[i] * rd[j] + rs[i] * rs[j]);
                }
            }
        }
        assert!((q - g).abs().max() <= 1e-6 * 1e3);
    }

    #[test]
    fn orthonormal_under_quadrature() {
        for (lo, hi, n) in [(0.0, 1.0, 3), (-5.0, 5.0, 9), (-5.0, 5.0, 10), (-50.0, 50.0, 41)] {
            let b = BasisSet::fourier_h2(lo, hi, n).unwrap();
            let g = quadrature_gram(&b, 10_000);
            let err = (g - DMatrix::identity(n, n)).abs().max();
            assert!(err <= 1e-6, "[{lo},{hi}] n={n}: {err}");
        }
    }

    #[test]
    fn endpoints_agree_by_periodicity() {
        let b = BasisSet::fourier_h2(-5.0, 5.0, 7).unwrap();
        assert_eq!(b.eval_features(-5.0).unwrap(), b.eval_features(5.0).unwrap());
        let (v1, d1) = b.eval_features(1.25).unwrap();
        let (v2, d2) = b.eval_features(11.25).unwrap();
        for i in 0..7 {
            assert!((v1[i] - v2[i]).abs() < 1e-12 && (d1[i] - d2[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_has_zero_derivative() {
        let b = BasisSet::fourier_h2(-5.0, 5.0, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (_, d) = b.eval_features(rng.random_range(-20.0..20.0)).unwrap();
            assert_eq!(d[0], 0.0);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = BasisSet::fourier_h2(-5.0, 5.0, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-6;
        for _ in 0..50 {
            let x = rng.random_range(-5.0..5.0);
            let (_, d) = b.eval_features(x).unwrap();
            let (vp, _) = b.eval_features(x + h).unwrap();
            let (vm, _) = b.eval_features(x - h).unwrap();
            let scale = d.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for i in 0..10 {
                let fd = (vp[i] - vm[i]) / (2.0 * h);
                assert!((fd - d[i]).abs() <= 1e-5 * scale, "{i}: {fd} vs {}", d[i]);
            }
        }
    }

    #[test]
    fn transform_applies_linearly_to_raw_system() {
        let b = BasisSet::fourier_h2(-2.0, 3.0, 8).unwrap();
        let (mut rv, mut rd) = (vec![0.0; 8], vec![0.0; 8]);
        b.raw(0.7, &mut rv, &mut rd, None);
        let (v, d) = b.eval_features(0.7).unwrap();
        let want_v = b.transform() * DMatrix::from_column_slice(8, 1, &rv);
        let want_d = b.transform() * DMatrix::from_column_slice(8, 1, &rd);
        for i in 0..8 {
            assert!((v[i] - want_v[i]).abs() < 1e-15 && (d[i] - want_d[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(BasisSet::fourier_h2(0.0, 1.0, 65).is_err());
        assert!(BasisSet::fourier_h2(0.0, 1.0, 0).is_err());
        assert!(BasisSet::fourier_h2(1.0, 1.0, 3).is_err());
        let b = BasisSet::fourier_h2(0.0, 1.0, 3).unwrap();
        assert!(b.eval_features(f64::NAN).is_err());
    }
}
