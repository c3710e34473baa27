//! Affine parametric diffusion coefficient
//! `a(y, x) = a0 + Σ_j y_j w_j sin(π k_j x₁) sin(π ℓ_j x₂)` and the uniform
//! parameter distribution on `[-1, 1]^s`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::fem::{assemble_weighted_stiffness, Mesh};
use crate::linalg::SymmetricSparseOperator;

/// Offset keeping the coefficient uniformly bounded away from zero.
pub const A0_SHIFT: f64 = 1e-5;

/// A point of the parameter domain `[-1, 1]^s`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamSample(pub Vec<f64>);

impl ParamSample {
    pub fn zeros(s: usize) -> Self {
        Self(vec![0.0; s])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sup_norm(&self) -> f64 {
        crate::linalg::max_abs(&self.0)
    }
}

impl From<Vec<f64>> for ParamSample {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone)]
pub struct DiffusionField {
    pairs: Vec<(u32, u32)>,
    theta_decay: f64,
    tau: f64,
    weights: Vec<f64>,
    a0: f64,
    a0_element: Vec<f64>,
    psi_element: Vec<Vec<f64>>,
}

/// The first `s` frequency pairs of `{1..s}²`, ordered by `k² + ℓ²` with a
/// lexicographic tie-break.
pub fn frequency_pairs(s: usize) -> Vec<(u32, u32)> {
    let n = s as u32;
    let mut all: Vec<(u32, u32)> = (1..=n).flat_map(|k| (1..=n).map(move |l| (k, l))).collect();
    all.sort_by_key(|&(k, l)| (k * k + l * l, k, l));
    all.truncate(s);
    all
}

pub fn build_field(mesh: &Mesh, s: usize, theta_decay: f64, tau: f64) -> Result<DiffusionField> {
    if s == 0 {
        return Err(Error::InvalidArgument("field needs at least one stochastic dimension".into()));
    }
    if !(theta_decay > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "decay exponent must be positive, got {theta_decay}"
        )));
    }
    let pairs = frequency_pairs(s);
    let weights: Vec<f64> = pairs
        .iter()
        .map(|&(k, l)| libm::pow(PI * PI * f64::from(k * k + l * l) + tau * tau, -theta_decay))
        .collect();
    let centroids = mesh.centroids();
    let psi_element: Vec<Vec<f64>> = pairs
        .iter()
        .zip(&weights)
        .map(|(&(k, l), &w)| {
            centroids
                .iter()
                .map(|c| w * libm::sin(PI * c[0] * f64::from(k)) * libm::sin(PI * c[1] * f64::from(l)))
                .collect()
        })
        .collect();
    // Shift by the largest attainable fluctuation Σ_j |ψ_j| so that the
    // coefficient stays above A0_SHIFT for every y in the cube.
    let sup = (0..mesh.n_triangles())
        .map(|t| psi_element.iter().map(|p| p[t].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let a0 = A0_SHIFT + sup;
    Ok(DiffusionField {
        pairs,
        theta_decay,
        tau,
        weights,
        a0,
        a0_element: vec![a0; mesh.n_triangles()],
        psi_element,
    })
}

impl DiffusionField {
    pub fn s(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn theta_decay(&self) -> f64 {
        self.theta_decay
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn a0_element(&self) -> &[f64] {
        &self.a0_element
    }

    pub fn psi_element(&self, j: usize) -> &[f64] {
        &self.psi_element[j]
    }

    /// Per-triangle coefficient values at `y`.
    pub fn diffusion_at(&self, y: &ParamSample) -> Result<Vec<f64>> {
        check_len("parameter sample", self.s(), y.dim())?;
        let mut a = self.a0_element.clone();
        for (yj, psi) in y.0.iter().zip(&self.psi_element) {
            for (at, p) in a.iter_mut().zip(psi) {
                *at += yj * p;
            }
        }
        if let Some((element, &value)) = a.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::Ellipticity { element, value });
        }
        Ok(a)
    }

    /// Precomputes `A(y) = A₀ + Σ_j y_j A_j` on `mesh`.
    pub fn affine_stiffness(&self, mesh: &Mesh) -> AffineStiffness {
        let base = assemble_weighted_stiffness(mesh, &self.a0_element);
        let terms = self
            .psi_element
            .iter()
            .map(|psi| assemble_weighted_stiffness(mesh, psi))
            .collect();
        AffineStiffness { base, terms }
    }
}

/// The parametric stiffness operator split into its affine terms. Every term
/// shares the sparsity pattern of the mesh, so evaluation is a weighted sum of
/// value arrays.
#[derive(Debug, Clone)]
pub struct AffineStiffness {
    base: SymmetricSparseOperator,
    terms: Vec<SymmetricSparseOperator>,
}

impl AffineStiffness {
    pub fn base(&self) -> &SymmetricSparseOperator {
        &self.base
    }

    pub fn terms(&self) -> &[SymmetricSparseOperator] {
        &self.terms
    }

    /// `term(0)` is the base operator, `term(j + 1)` multiplies `y_j`.
    pub fn term(&self, j: usize) -> &SymmetricSparseOperator {
        if j == 0 {
            &self.base
        } else {
            &self.terms[j - 1]
        }
    }

    pub fn at(&self, y: &ParamSample) -> SymmetricSparseOperator {
        debug_assert_eq!(y.dim(), self.terms.len());
        let mut values = self.base.values().to_vec();
        for (yj, term) in y.0.iter().zip(&self.terms) {
            crate::linalg::axpy(*yj, term.values(), &mut values);
        }
        self.base.with_values(values)
    }
}

/// The generator used for every seeded stream in this crate.
pub type SampleRng = ChaCha8Rng;

/// Seeded stream; `stream` separates concurrent workers sharing a seed.
pub fn seeded_rng(seed: u64, stream: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `s` independent uniform draws on `[-1, 1]`.
pub fn sample_y<R: RngCore + ?Sized>(rng: &mut R, s: usize) -> ParamSample {
    ParamSample((0..s).map(|_| rng.random_range(-1.0..=1.0)).collect())
}

pub fn sample_many<R: RngCore + ?Sized>(rng: &mut R, s: usize, n: usize) -> Vec<ParamSample> {
    (0..n).map(|_| sample_y(rng, s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_mesh;

    fn default_field() -> (Mesh, DiffusionField) {
        let mesh = build_mesh(8).unwrap();
        let field = build_field(&mesh, 4, 0.25, 3.0).unwrap();
        (mesh, field)
    }

    #[test]
    fn pair_ordering_and_weights() {
        let (_, f) = default_field();
        assert_eq!(f.pairs(), &[(1, 1), (1, 2), (2, 1), (2, 2)]);
        let w1 = libm::pow(2.0 * PI * PI + 9.0, -0.25);
        assert!((f.weights()[0] - w1).abs() < 1e-15);
        assert!(f.weights().windows(2).all(|w| w[0] >= w[1]));
        assert!(f.weights()[0] > f.weights()[1] && f.weights()[2] > f.weights()[3]);
    }

    #[test]
    fn a0_dominates_fluctuations() {
        let (_, f) = default_field();
        let n = f.a0_element().len();
        let sum_max = (0..n)
            .map(|t| (0..4).map(|j| f.psi_element(j)[t]).sum::<f64>().abs())
            .fold(0.0, f64::max);
        assert!(f.a0() >= A0_SHIFT + sum_max);
    }

    #[test]
    fn zero_sample_gives_a0() {
        let (_, f) = default_field();
        assert_eq!(f.diffusion_at(&ParamSample::zeros(4)).unwrap(), f.a0_element());
    }

    #[test]
    fn antipodal_samples_are_symmetric_about_a0() {
        let (_, f) = default_field();
        let y = ParamSample(vec![0.3, -0.7, 0.9, 0.1]);
        let neg = ParamSample(y.0.iter().map(|v| -v).collect());
        let a = f.diffusion_at(&y).unwrap();
        let b = f.diffusion_at(&neg).unwrap();
        for ((p, q), a0) in a.iter().zip(&b).zip(f.a0_element()) {
            assert!((0.5 * (p + q) - a0).abs() < 1e-14);
        }
    }

    #[test]
    fn corner_sample_stays_elliptic() {
        let (_, f) = default_field();
        let a = f.diffusion_at(&ParamSample(vec![1.0; 4])).unwrap();
        assert!(a.iter().cloned().fold(f64::INFINITY, f64::min) > A0_SHIFT);
        // the worst corner is also admissible
        for mask in 0..16u32 {
            let y = ParamSample((0..4).map(|j| if mask >> j & 1 == 1 { 1.0 } else { -1.0 }).collect());
            assert!(f.diffusion_at(&y).unwrap().iter().all(|&v| v >= A0_SHIFT * 0.999));
        }
    }

    #[test]
    fn wrong_sample_length_is_rejected() {
        let (_, f) = default_field();
        assert!(matches!(
            f.diffusion_at(&ParamSample::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
        let mesh = build_mesh(2).unwrap();
        assert!(build_field(&mesh, 0, 0.25, 3.0).is_err());
        assert!(build_field(&mesh, 2, 0.0, 3.0).is_err());
    }

    #[test]
    fn affine_stiffness_matches_direct_assembly() {
        let (mesh, f) = default_field();
        let affine = f.affine_stiffness(&mesh);
        let y = ParamSample(vec![-0.2, 0.5, 0.8, -0.9]);
        let direct = crate::fem::assemble_stiffness(&mesh, &f.diffusion_at(&y).unwrap()).unwrap();
        let via = affine.at(&y);
        assert!(direct.same_pattern(&via));
        for (a, b) in direct.values().iter().zip(via.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn sampling_is_reproducible_and_uniform() {
        let mut r1 = seeded_rng(42, 0);
        let mut r2 = seeded_rng(42, 0);
        let a = sample_y(&mut r1, 4);
        let b = sample_y(&mut r1, 4);
        assert_ne!(a, b);
        assert_eq!(a, sample_y(&mut r2, 4));
        assert_eq!(b, sample_y(&mut r2, 4));
        assert_ne!(sample_y(&mut seeded_rng(42, 1), 4), a);

        let n = 100_000;
        let mut rng = seeded_rng(7, 0);
        let mut sum = [0.0; 4];
        let mut sq = [0.0; 4];
        for _ in 0..n {
            let y = sample_y(&mut rng, 4);
            assert!(y.sup_norm() <= 1.0);
            for j in 0..4 {
                sum[j] += y.0[j];
                sq[j] += y.0[j] * y.0[j];
            }
        }
        for j in 0..4 {
            let mean = sum[j] / n as f64;
            let var = sq[j] / n as f64 - mean * mean;
            assert!(mean.abs() < 0.01);
            assert!((var - 1.0 / 3.0).abs() < 0.05 / 3.0);
        }
    }
}
