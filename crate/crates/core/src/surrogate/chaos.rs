use alloc::vec;
use alloc::vec::Vec;

use super::basis::{basis_vector, gen_total_degree, BasisKind, MultiIndexSet};
use super::Surrogate;
use crate::field::ParamSample;

/// Polynomial chaos surrogate `u(θ, y) = Σ_ν θ_ν P_ν(y)`, linear in `θ`.
///
/// `θ` is an `n_dof × n_pol` matrix flattened column by column: the
/// coefficient vector of basis function `ν` occupies
/// `θ[ν · n_dof .. (ν + 1) · n_dof]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosSurrogate {
    basis: MultiIndexSet,
    kind: BasisKind,
    n_dof: usize,
}

impl ChaosSurrogate {
    pub fn new(basis: MultiIndexSet, kind: BasisKind, n_dof: usize) -> Self {
        Self { basis, kind, n_dof }
    }

    pub fn legendre(s: usize, degree: usize, n_dof: usize) -> Self {
        Self::new(gen_total_degree(s, degree), BasisKind::Legendre, n_dof)
    }

    pub fn basis(&self) -> &MultiIndexSet {
        &self.basis
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn n_basis(&self) -> usize {
        self.basis.len()
    }

    pub fn basis_vector(&self, y: &ParamSample) -> Vec<f64> {
        basis_vector(&self.basis, self.kind, y.as_slice())
    }

    /// Coefficient vector `θ_ν` for basis index `nu`.
    pub fn column<'a>(&self, theta: &'a [f64], nu: usize) -> &'a [f64] {
        &theta[nu * self.n_dof..(nu + 1) * self.n_dof]
    }

    /// `u = Θ p` for a precomputed basis vector `p`.
    pub fn eval_with_basis(&self, theta: &[f64], p: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.n_dof];
        for (nu, &pv) in p.iter().enumerate() {
            crate::linalg::axpy(pv, self.column(theta, nu), &mut u);
        }
        u
    }
}

impl Surrogate for ChaosSurrogate {
    fn param_count(&self) -> usize {
        self.n_dof * self.basis.len()
    }

    fn n_dof(&self) -> usize {
        self.n_dof
    }

    fn s(&self) -> usize {
        self.basis.s()
    }

    fn eval(&self, theta: &[f64], y: &ParamSample) -> Vec<f64> {
        debug_assert_eq!(theta.len(), self.param_count());
        self.eval_with_basis(theta, &self.basis_vector(y))
    }

    fn vjp_accumulate(&self, _theta: &[f64], y: &ParamSample, w: &[f64], scale: f64, out: &mut [f64]) {
        let p = self.basis_vector(y);
        for (nu, &pv) in p.iter().enumerate() {
            let col = &mut out[nu * self.n_dof..(nu + 1) * self.n_dof];
            crate::linalg::axpy(scale * pv, w, col);
        }
    }

    fn flattening(&self) -> &'static str {
        "theta[nu * n_dof + i]: basis index nu outer, dof i inner"
    }

    fn as_chaos(&self) -> Option<&ChaosSurrogate> {
        Some(self)
    }
}
