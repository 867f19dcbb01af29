//! Velocity fields: the functional tensor-train field and the trait the
//! integrator consumes.

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::tt::TensorTrain;

/// A velocity field on `R^d` with known divergence.
pub trait VelocityField: Sync {
    fn dim(&self) -> usize;

    /// Writes `v(x)` into `v` and returns `∇·v(x)`.
    fn eval(&self, x: &[f64], v: &mut [f64]) -> f64;
}

/// `v ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroField(pub usize);

impl VelocityField for ZeroField {
    fn dim(&self) -> usize {
        self.0
    }

    fn eval(&self, _x: &[f64], v: &mut [f64]) -> f64 {
        v.iter_mut().for_each(|a| *a = 0.0);
        0.0
    }
}

/// Tensor train of coefficients contracted with a univariate basis per coordinate.
///
/// Component `c` of the field is
/// `v_c(x) = sum_{i_1..i_d} K_1[c, i_1, :] K_2[:, i_2, :] ··· K_d[:, i_d, 0] φ_{i_1}(x_1) ··· φ_{i_d}(x_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FttVectorField {
    tt: TensorTrain,
    basis: BasisSet,
}

impl FttVectorField {
    pub fn new(tt: TensorTrain, basis: BasisSet) -> Result<Self> {
        if tt.output_dim() != tt.order() {
            return Err(Error::Shape(format!(
                "velocity field needs output_dim == order, got {} and {}",
                tt.output_dim(),
                tt.order()
            )));
        }
        if tt.modes().iter().any(|&n| n != basis.size()) {
            return Err(Error::Shape(format!(
                "core modes {:?} do not match basis size {}",
                tt.modes(),
                basis.size()
            )));
        }
        Ok(Self { tt, basis })
    }

    pub fn tt(&self) -> &TensorTrain {
        &self.tt
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn into_tt(self) -> TensorTrain {
        self.tt
    }

    /// Value and divergence in a single left-to-right pass.
    pub fn eval_checked(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!("point of dim {} for a {}-d field", x.len(), self.dim())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("field evaluated at non-finite point {x:?}")));
        }
        let mut v = vec![0.0; self.dim()];
        let div = self.eval(x, &mut v);
        Ok((v, div))
    }
}

impl VelocityField for FttVectorField {
    fn dim(&self) -> usize {
        self.tt.order()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> f64 {
        let d = self.dim();
        let n = self.basis.size();
        let mut phi = vec![0.0; n];
        let mut dphi = vec![0.0; n];
        let cores = self.tt.cores();

        // p: d x r (all outputs, plain features); q: 1 x r (divergence partial sum)
        let first = &cores[0];
        self.basis.eval_into(x[0], &mut phi, &mut dphi);
        let mut p = vec![0.0; d * first.right()];
        let mut dm = vec![0.0; d * first.right()];
        first.contract_mode_into(&phi, &mut p);
        first.contract_mode_into(&dphi, &mut dm);
        let mut q = dm[..first.right()].to_vec();

        let mut m = Vec::new();
        let mut next_p = Vec::new();
        let mut next_q = Vec::new();
        for (c, core) in cores.iter().enumerate().skip(1) {
            let (l, r) = (core.left(), core.right());
            self.basis.eval_into(x[c], &mut phi, &mut dphi);
            m.resize(l * r, 0.0);
            dm.resize(l * r, 0.0);
            core.contract_mode_into(&phi, &mut m);
            core.contract_mode_into(&dphi, &mut dm);

            next_q.clear();
            next_q.resize(r, 0.0);
            for j in 0..l {
                let (qj, pcj) = (q[j], p[c * l + j]);
                for b in 0..r {
                    next_q[b] += qj * m[j * r + b] + pcj * dm[j * r + b];
                }
            }
            next_p.clear();
            next_p.resize(d * r, 0.0);
            for a in 0..d {
                for j in 0..l {
                    let s = p[a * l + j];
                    if s == 0.0 {
                        continue;
                    }
                    for b in 0..r {
                        next_p[a * r + b] += s * m[j * r + b];
                    }
                }
            }
            std::mem::swap(&mut p, &mut next_p);
            std::mem::swap(&mut q, &mut next_q);
        }
        out[..d].copy_from_slice(&p[..d]);
        q[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(d: usize, n: usize, rank: usize, seed: u64) -> FttVectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = BasisSet::fourier_h2(-5.0, 5.0, n).unwrap();
        let tt = TensorTrain::random(d, &vec![n; d], &vec![rank; d - 1], 0.3, &mut rng).unwrap();
        FttVectorField::new(tt, basis).unwrap()
    }

    #[test]
    fn value_agrees_with_tensor_train_evaluation() {
        let field = random_field(3, 5, 3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let feats: Vec<Vec<f64>> = x.iter().map(|&xi| field.basis().eval_features(xi).unwrap().0).collect();
            let want = field.tt().evaluate(&feats).unwrap();
            let (v, _) = field.eval_checked(&x).unwrap();
            for (a, b) in v.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn constant_field_is_divergence_free() {
        let basis = BasisSet::fourier_h2(-5.0, 5.0, 4).unwrap();
        let c0 = basis.eval_features(0.0).unwrap().0[0];
        let mut tt = TensorTrain::zeros(2, &[4, 4], &[1]).unwrap();
        // v = (1, -2): constant basis function in both modes
        tt.core_mut(0).data_mut()[0] = 1.0 / c0;
        tt.core_mut(0).data_mut()[4] = -2.0 / c0;
        tt.core_mut(1).data_mut()[0] = 1.0 / c0;
        let field = FttVectorField::new(tt, basis).unwrap();
        let (v, div) = field.eval_checked(&[1.3, -0.4]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] + 2.0).abs() < 1e-14);
        assert_eq!(div, 0.0);
    }

    #[test]
    fn divergence_matches_finite_differences() {
        for (d, seed) in [(1, 3), (2, 4), (4, 5)] {
            let field = random_field(d, 6, 3, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let h = 1e-5;
            for _ in 0..50 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..4.0)).collect();
                let (_, div) = field.eval_checked(&x).unwrap();
                let mut fd = 0.0;
                for k in 0..d {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += h;
                    xm[k] -= h;
                    fd += (field.eval_checked(&xp).unwrap().0[k] - field.eval_checked(&xm).unwrap().0[k]) / (2.0 * h);
                }
                assert!((fd - div).abs() <= 1e-5 * div.abs().max(1e-3), "d={d}: {fd} vs {div}");
            }
        }
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let basis = BasisSet::fourier_h2(-1.0, 1.0, 3).unwrap();
        assert!(FttVectorField::new(TensorTrain::zeros(1, &[3, 3], &[1]).unwrap(), basis.clone()).is_err());
        assert!(FttVectorField::new(TensorTrain::zeros(2, &[3, 4], &[1]).unwrap(), basis.clone()).is_err());
        let f = FttVectorField::new(TensorTrain::zeros(2, &[3, 3], &[1]).unwrap(), basis).unwrap();
        assert!(f.eval_checked(&[f64::INFINITY, 0.0]).is_err());
    }
}
