//! Closed-form treatment of the pERM problem for chaos surrogates.
//!
//! With `u = Θ p(y)` the batch objective is a quadratic in `x = (z, θ)`:
//! `F(x) = ½ xᵀ H x − bᵀ x + c`. The Hessian only depends on the samples
//! through the moments `mean[y_a y_b p pᵀ]` and `mean[y_a p]` (with `y₀ = 1`),
//! because `A(y) = Σ_a y_a K_a` is affine in `y`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::field::ParamSample;
use crate::linalg::{axpy, dot, DenseMatrix};
use crate::objective::{ControlCoupling, NormKind, OptState, ProblemData};
use crate::surrogate::{ChaosSurrogate, Surrogate};

/// Sample moments of the chaos basis against the affine coefficients.
#[derive(Debug, Clone)]
pub struct ChaosMoments {
    s: usize,
    n_basis: usize,
    /// `mean[y_a y_b p pᵀ]` for `a ≤ b`, packed by `pair_index`.
    second: Vec<DenseMatrix>,
    /// `mean[y_a p]` for `a = 0..=s`.
    first: Vec<Vec<f64>>,
}

impl ChaosMoments {
    pub fn from_samples(chaos: &ChaosSurrogate, samples: &[ParamSample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("moments need at least one sample".into()));
        }
        let s = chaos.s();
        let k = chaos.n_basis();
        let n_pairs = (s + 1) * (s + 2) / 2;
        let mut second = vec![DenseMatrix::zeros(k, k); n_pairs];
        let mut first = vec![vec![0.0; k]; s + 1];
        let w = 1.0 / samples.len() as f64;
        let mut outer = DenseMatrix::zeros(k, k);
        for y in samples {
            check_len("parameter sample", s, y.dim())?;
            let p = chaos.basis_vector(y);
            for i in 0..k {
                for j in 0..k {
                    outer[(i, j)] = p[i] * p[j];
                }
            }
            let coeff = |a: usize| if a == 0 { 1.0 } else { y.0[a - 1] };
            for a in 0..=s {
                axpy(w * coeff(a), &p, &mut first[a]);
                for b in a..=s {
                    let c = w * coeff(a) * coeff(b);
                    let target = &mut second[Self::pair_index(s, a, b)];
                    for i in 0..k {
                        for j in 0..k {
                            target[(i, j)] += c * outer[(i, j)];
                        }
                    }
                }
            }
        }
        Ok(Self {
            s,
            n_basis: k,
            second,
            first,
        })
    }

    fn pair_index(s: usize, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        // rows 0..a of the upper triangle hold (s+1) + s + … entries
        a * (s + 1) - a * (a.saturating_sub(1)) / 2 + (b - a)
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn second(&self, a: usize, b: usize) -> &DenseMatrix {
        &self.second[Self::pair_index(self.s, a, b)]
    }

    pub fn first(&self, a: usize) -> &[f64] {
        &self.first[a]
    }

    /// `mean[p pᵀ]`
    pub fn gram(&self) -> &DenseMatrix {
        self.second(0, 0)
    }

    /// Moments of the transformed basis `Qᵀ p` for a `n_basis × r` matrix `Q`.
    pub fn transformed(&self, q: &DenseMatrix) -> Self {
        let qt = q.transpose();
        Self {
            s: self.s,
            n_basis: q.cols(),
            second: self.second.iter().map(|g| qt.matmul(g).matmul(q)).collect(),
            first: self.first.iter().map(|m| q.matvec_t(m)).collect(),
        }
    }
}

/// Dense operator products shared by every assembly on a given problem.
struct Operators {
    n: usize,
    /// `K_a K_b` for all ordered pairs, row-major over `(a, b)`.
    kk: Vec<DenseMatrix>,
    /// `K_a B`
    kb: Vec<DenseMatrix>,
    coupling: DenseMatrix,
    control: DenseMatrix,
    /// Misfit Gram matrix `W`.
    misfit: DenseMatrix,
    misfit_u0: Vec<f64>,
}

impl Operators {
    fn new(data: &ProblemData) -> Self {
        let n = data.n_dof();
        let s = data.s();
        let k: Vec<DenseMatrix> = (0..=s).map(|a| data.stiffness().term(a).to_dense()).collect();
        let mass = data.mass().to_dense();
        let gram = |kind| match kind {
            NormKind::Mass => mass.clone(),
            NormKind::Euclidean => DenseMatrix::identity(n),
        };
        let mut kk = Vec::with_capacity((s + 1) * (s + 1));
        for a in 0..=s {
            for b in 0..=s {
                kk.push(k[a].matmul(&k[b]));
            }
        }
        let coupling = match data.coupling() {
            ControlCoupling::Mass => mass.clone(),
            ControlCoupling::Identity => DenseMatrix::identity(n),
        };
        Self {
            n,
            kk,
            kb: k.iter().map(|ka| ka.matmul(&coupling)).collect(),
            control: gram(data.control_norm()),
            misfit: gram(data.misfit_norm()).scaled(2.0 * data.misfit_weight()),
            misfit_u0: data.misfit_gram(data.u0()),
            coupling,
        }
    }
}

/// `F(x) = ½ xᵀ H x − bᵀ x + c` over the flat layout `[z; θ]`.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    hessian: DenseMatrix,
    rhs: Vec<f64>,
    constant: f64,
    n_dof: usize,
}

fn assemble(data: &ProblemData, ops: &Operators, moments: &ChaosMoments, lambda: f64) -> QuadraticModel {
    let n = ops.n;
    let s = data.s();
    let k = moments.n_basis();
    let dim = n + n * k;
    let mut h = DenseMatrix::zeros(dim, dim);
    let two_l = 2.0 * lambda;
    let mm = ops.coupling.matmul(&ops.coupling);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = data.alpha() * ops.control[(i, j)] + two_l * mm[(i, j)];
        }
    }
    let mut block = DenseMatrix::zeros(n, n);
    for nu in 0..k {
        for mu in nu..k {
            for v in 0..n {
                for w in 0..n {
                    block[(v, w)] = moments.gram()[(nu, mu)] * ops.misfit[(v, w)];
                }
            }
            if nu == mu {
                for v in 0..n {
                    block[(v, v)] += data.theta_reg();
                }
            }
            if lambda != 0.0 {
                for a in 0..=s {
                    for b in 0..=s {
                        let g = moments.second(a, b)[(nu, mu)];
                        if g == 0.0 {
                            continue;
                        }
                        let kk = &ops.kk[a * (s + 1) + b];
                        for v in 0..n {
                            axpy(two_l * g, kk.row(v), block.row_mut(v));
                        }
                    }
                }
            }
            for v in 0..n {
                for w in 0..n {
                    h[(n + nu * n + v, n + mu * n + w)] = block[(v, w)];
                    h[(n + mu * n + w, n + nu * n + v)] = block[(v, w)];
                }
            }
        }
        // θ_ν / z coupling: −2λ Σ_a mean[y_a p_ν] K_a B
        for v in 0..n {
            for w in 0..n {
                let mut c = 0.0;
                for a in 0..=s {
                    c += moments.first(a)[nu] * ops.kb[a][(v, w)];
                }
                h[(n + nu * n + v, w)] = -two_l * c;
                h[(w, n + nu * n + v)] = -two_l * c;
            }
        }
    }
    let mut rhs = vec![0.0; dim];
    for nu in 0..k {
        axpy(moments.first(0)[nu], &ops.misfit_u0, &mut rhs[n + nu * n..n + (nu + 1) * n]);
    }
    QuadraticModel {
        hessian: h,
        rhs,
        constant: 0.5 * dot(data.u0(), &ops.misfit_u0),
        n_dof: n,
    }
}

impl QuadraticModel {
    pub fn new(data: &ProblemData, chaos: &ChaosSurrogate, samples: &[ParamSample], lambda: f64) -> Result<Self> {
        check_len("surrogate output", data.n_dof(), chaos.n_dof())?;
        if !(lambda >= 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("penalty must be nonnegative, got {lambda}")));
        }
        let moments = ChaosMoments::from_samples(chaos, samples)?;
        Ok(assemble(data, &Operators::new(data), &moments, lambda))
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn hessian(&self) -> &DenseMatrix {
        &self.hessian
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &self.hessian.matvec(x)) - dot(&self.rhs, x) + self.constant
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.hessian.matvec(x);
        axpy(-1.0, &self.rhs, &mut g);
        g
    }

    /// Minimizer by Cholesky factorization plus one refinement step.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let chol = self.hessian.cholesky()?;
        let mut x = chol.solve(&self.rhs);
        let r: Vec<f64> = self.gradient(&x).iter().map(|g| -g).collect();
        axpy(1.0, &chol.solve(&r), &mut x);
        Ok(x)
    }

    pub fn minimizer(&self) -> Result<OptState> {
        Ok(OptState::from_flat(self.n_dof, &self.solve()?))
    }
}

/// Exact minimizer of the batch objective for a chaos surrogate.
///
/// Fails with [`Error::RankDeficient`] when the normal system is singular,
/// which happens without a ridge term whenever the sampled Gram matrix of the
/// basis is singular (for instance fewer samples than basis functions).
pub fn linear_perm_oracle(
    data: &ProblemData,
    chaos: &ChaosSurrogate,
    samples: &[ParamSample],
    lambda: f64,
) -> Result<OptState> {
    QuadraticModel::new(data, chaos, samples, lambda)?.minimizer()
}

/// Relative eigenvalue cutoff deciding the numerical rank of `mean[p pᵀ]`.
pub const GRAM_RANK_CUTOFF: f64 = 1e-10;

/// The minimizer of the batch objective closest to `x0`.
///
/// Coincides with [`linear_perm_oracle`] when that one is unique. Otherwise
/// the objective is flat along `{(0, Θ) : Θ p(y_i) = 0 for all i}` and the
/// solution is searched in `x0` plus the orthogonal complement, which is where
/// a gradient method started at `x0` converges to.
pub fn anchored_perm_solve(
    data: &ProblemData,
    chaos: &ChaosSurrogate,
    samples: &[ParamSample],
    lambda: f64,
    x0: &OptState,
) -> Result<OptState> {
    check_len("surrogate parameters", chaos.param_count(), x0.theta.len())?;
    check_len("control", data.n_dof(), x0.z.len())?;
    let moments = ChaosMoments::from_samples(chaos, samples)?;
    let (values, vectors) = moments.gram().symmetric_eigen();
    let top = values.last().copied().unwrap_or(0.0);
    let kept: Vec<usize> = (0..values.len()).filter(|&i| values[i] > GRAM_RANK_CUTOFF * top).collect();
    let ops = Operators::new(data);
    let full = assemble(data, &ops, &moments, lambda);
    if kept.len() == values.len() || data.theta_reg() > 0.0 || !(data.alpha() > 0.0) {
        return full.minimizer();
    }
    let n = data.n_dof();
    let k = chaos.n_basis();
    let q = DenseMatrix::from_fn(k, kept.len(), |r, c| vectors[(r, kept[c])]);
    let reduced = assemble(data, &ops, &moments.transformed(&q), lambda);
    // Reduced right-hand side: Tᵀ (b − H x0) with T = diag(I, Q ⊗ I).
    let x0_flat = x0.to_flat();
    let residual: Vec<f64> = full.gradient(&x0_flat).iter().map(|g| -g).collect();
    let mut rhs = vec![0.0; n + n * kept.len()];
    rhs[..n].copy_from_slice(&residual[..n]);
    for c in 0..kept.len() {
        for nu in 0..k {
            let w = q[(nu, c)];
            axpy(w, &residual[n + nu * n..n + (nu + 1) * n], &mut rhs[n + c * n..n + (c + 1) * n]);
        }
    }
    let step_model = QuadraticModel {
        hessian: reduced.hessian,
        rhs,
        constant: 0.0,
        n_dof: n,
    };
    let w = step_model.solve()?;
    let mut x = x0_flat;
    axpy(1.0, &w[..n], &mut x[..n]);
    for c in 0..kept.len() {
        for nu in 0..k {
            let coeff = q[(nu, c)];
            axpy(coeff, &w[n + c * n..n + (c + 1) * n], &mut x[n + nu * n..n + (nu + 1) * n]);
        }
    }
    Ok(OptState::from_flat(n, &x))
}

/// Lower bound `c` with `dᵀ H d ≥ c ‖d‖²` for the chaos pERM Hessian:
/// `min(σ_min(W) σ_min(mean[p pᵀ]) + ρ, α σ_min(C))`.
pub fn strong_convexity_constant(data: &ProblemData, chaos: &ChaosSurrogate, samples: &[ParamSample]) -> Result<f64> {
    let moments = ChaosMoments::from_samples(chaos, samples)?;
    let gram_min = moments.gram().symmetric_eigenvalues()[0].max(0.0);
    let mass_min = data.mass().to_dense().symmetric_eigenvalues()[0];
    let smallest = |kind| match kind {
        NormKind::Mass => mass_min,
        NormKind::Euclidean => 1.0,
    };
    let control_min = smallest(data.control_norm());
    Ok((2.0 * data.misfit_weight() * smallest(data.misfit_norm()) * gram_min + data.theta_reg()).min(data.alpha() * control_min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{sample_many, sample_y, seeded_rng};
    use crate::objective::{batch_objective, ProblemSettings};

    fn small_problem() -> ProblemData {
        ProblemData::new(&ProblemSettings {
            n_div: 4,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn pair_index_is_a_bijection() {
        for s in 0..6 {
            let mut seen = vec![false; (s + 1) * (s + 2) / 2];
            for a in 0..=s {
                for b in a..=s {
                    let i = ChaosMoments::pair_index(s, a, b);
                    assert!(!seen[i]);
                    seen[i] = true;
                    assert_eq!(i, ChaosMoments::pair_index(s, b, a));
                }
            }
            assert!(seen.iter().all(|&v| v));
        }
    }

    #[test]
    fn model_matches_batch_objective() {
        let plain = ProblemData::new(&ProblemSettings {
            n_div: 4,
            ..ProblemSettings::plain_norms()
        })
        .unwrap();
        for data in [small_problem().with_theta_reg(1e-3), plain.with_theta_reg(1e-3)] {
            model_matches_batch_objective_on(&data);
        }
    }

    fn model_matches_batch_objective_on(data: &ProblemData) {
        let data = data.clone();
        let chaos = ChaosSurrogate::legendre(4, 2, data.n_dof());
        let mut rng = seeded_rng(3, 0);
        let samples = sample_many(&mut rng, 4, 6);
        for lambda in [0.0, 1.0, 50.0] {
            let model = QuadraticModel::new(&data, &chaos, &samples, lambda).unwrap();
            for _ in 0..3 {
                let x = sample_y(&mut rng, model.dim()).0;
                let state = OptState::from_flat(data.n_dof(), &x);
                let batch = batch_objective(&data, &chaos, &state, &samples, lambda).unwrap();
                let v = model.value(&x);
                assert!((v - batch.value).abs() <= 1e-11 * batch.value.abs().max(1.0), "{v} vs {}", batch.value);
                let g = model.gradient(&x);
                for (a, b) in g.iter().zip(&batch.grad) {
                    assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
                }
            }
        }
    }

    #[test]
    fn oracle_zero_target_with_ridge_is_zero() {
        let data = small_problem()
            .with_theta_reg(1e-2)
            .with_target(vec![0.0; 9])
            .unwrap();
        let chaos = ChaosSurrogate::legendre(4, 1, 9);
        let samples = sample_many(&mut seeded_rng(1, 0), 4, 3);
        let x = linear_perm_oracle(&data, &chaos, &samples, 0.0).unwrap();
        assert!(x.norm() == 0.0);
    }

    #[test]
    fn oracle_is_stationary() {
        let data = small_problem();
        let chaos = ChaosSurrogate::legendre(4, 2, 9);
        let samples = sample_many(&mut seeded_rng(2, 0), 4, 40);
        let x = linear_perm_oracle(&data, &chaos, &samples, 1.0).unwrap();
        let batch = batch_objective(&data, &chaos, &x, &samples, 1.0).unwrap();
        let gn = crate::linalg::norm(&batch.grad);
        assert!(gn <= 1e-8 * (1.0 + batch.value.abs()), "{gn}");
    }

    #[test]
    fn too_few_samples_are_rank_deficient() {
        let data = small_problem();
        let chaos = ChaosSurrogate::legendre(4, 2, 9);
        let samples = sample_many(&mut seeded_rng(2, 0), 4, 5);
        assert!(matches!(
            linear_perm_oracle(&data, &chaos, &samples, 1.0),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn anchored_solution_is_stationary_and_nearest() {
        let data = small_problem();
        let chaos = ChaosSurrogate::legendre(4, 2, 9);
        let samples = sample_many(&mut seeded_rng(5, 0), 4, 4);
        let x0 = OptState::new(vec![0.0; 9], vec![1.0; chaos.param_count()]);
        let x = anchored_perm_solve(&data, &chaos, &samples, 1.0, &x0).unwrap();
        let batch = batch_objective(&data, &chaos, &x, &samples, 1.0).unwrap();
        assert!(crate::linalg::norm(&batch.grad) < 1e-9);
        // x − x0 has no component along the flat directions: moving within
        // them changes neither the objective nor the distance's optimality.
        let moments = ChaosMoments::from_samples(&chaos, &samples).unwrap();
        let (values, vectors) = moments.gram().symmetric_eigen();
        let d: Vec<f64> = x.theta.iter().zip(&x0.theta).map(|(a, b)| a - b).collect();
        for c in 0..values.len() {
            if values[c] > GRAM_RANK_CUTOFF * values[values.len() - 1] {
                continue;
            }
            for v in 0..9 {
                let proj: f64 = (0..chaos.n_basis()).map(|nu| vectors[(nu, c)] * d[nu * 9 + v]).sum();
                assert!(proj.abs() < 1e-9, "{proj}");
            }
        }
        // With a full-rank Gram matrix the anchored solve is the oracle.
        let many = sample_many(&mut seeded_rng(5, 0), 4, 60);
        let a = anchored_perm_solve(&data, &chaos, &many, 1.0, &x0).unwrap();
        let b = linear_perm_oracle(&data, &chaos, &many, 1.0).unwrap();
        assert!(a.distance(&b) < 1e-12 * (1.0 + b.norm()));
    }

    #[test]
    fn hessian_dominates_convexity_witness() {
        let data = small_problem();
        let chaos = ChaosSurrogate::legendre(4, 1, 9);
        let mut rng = seeded_rng(17, 0);
        let samples = sample_many(&mut rng, 4, 30);
        let c = strong_convexity_constant(&data, &chaos, &samples).unwrap();
        assert!(c > 0.0);
        let model = QuadraticModel::new(&data, &chaos, &samples, 3.0).unwrap();
        for _ in 0..100 {
            let d = sample_y(&mut rng, model.dim()).0;
            let q = dot(&d, &model.hessian().matvec(&d));
            assert!(q >= c * dot(&d, &d) * (1.0 - 1e-12));
        }
    }
}
