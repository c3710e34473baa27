//! Penalized objective terms in the finite-element discretization.
//!
//! For `x = (z, θ)` and a parameter sample `y`:
//!
//! * `f(x, y) = ½ (u_θ − u₀)ᵀ W (u_θ − u₀) + α/2 zᵀ C z + ρ/2 ‖θ‖²`
//! * `g(x, y) = ‖A(y) u_θ − B z‖²`
//!
//! where `u_θ = u(θ, y)` is the surrogate state, `M` the mass operator,
//! `B` the control operator (`M` by default, optionally the identity),
//! `C` the control Gram matrix and `W = 2 w G` the misfit Gram matrix with
//! weight `w` (½ by default) and `G` either `M` or the identity,
//! `A(y)` the parametric stiffness operator and `ρ` an optional ridge weight.
//! Flat gradients are laid out as `[z; θ]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::fem::{assemble_load, assemble_mass, assemble_stiffness, build_mesh, solve_spd, Mesh};
use crate::field::{build_field, AffineStiffness, DiffusionField, ParamSample};
use crate::linalg::{axpy, dot, sub, SymmetricSparseOperator};
use crate::surrogate::{ChaosSurrogate, Surrogate};

/// Gram matrix of a squared norm on nodal vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NormKind {
    /// `vᵀ M v`, the L² norm of the finite-element function.
    #[default]
    Mass,
    /// Plain `vᵀ v` on the coefficient vector.
    Euclidean,
}

/// Control operator `B` in the state equation `A(y) u = B z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ControlCoupling {
    /// `B = M`: `z` holds nodal values of an L² source.
    #[default]
    Mass,
    /// `B = I`: `z` is the discrete load vector itself.
    Identity,
}

/// Problem-level settings; the defaults are the reference configuration
/// (h = 1/8, four stochastic dimensions, α = 0.5).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ProblemSettings {
    pub n_div: usize,
    pub s: usize,
    pub theta_decay: f64,
    pub tau: f64,
    pub alpha: f64,
    pub theta_reg: f64,
    pub control_norm: NormKind,
    pub misfit_norm: NormKind,
    /// `w` in `w ‖u_θ − u₀‖²`.
    pub misfit_weight: f64,
    pub coupling: ControlCoupling,
}

impl Default for ProblemSettings {
    fn default() -> Self {
        Self {
            n_div: 8,
            s: 4,
            theta_decay: 0.25,
            tau: 3.0,
            alpha: 0.5,
            theta_reg: 0.0,
            control_norm: NormKind::Mass,
            misfit_norm: NormKind::Mass,
            misfit_weight: 0.5,
            coupling: ControlCoupling::Mass,
        }
    }
}

impl ProblemSettings {
    /// Plain vector norms with unit misfit weight and identity coupling:
    /// `‖u_θ − u₀‖² + α/2 ‖z‖² + λ ‖A(y) u_θ − z‖²`.
    pub fn plain_norms() -> Self {
        Self {
            control_norm: NormKind::Euclidean,
            misfit_norm: NormKind::Euclidean,
            misfit_weight: 1.0,
            coupling: ControlCoupling::Identity,
            ..Self::default()
        }
    }
}

/// Everything the objective needs besides the surrogate.
#[derive(Debug, Clone)]
pub struct ProblemData {
    mesh: Mesh,
    mass: SymmetricSparseOperator,
    field: DiffusionField,
    stiffness: AffineStiffness,
    u0: Vec<f64>,
    alpha: f64,
    theta_reg: f64,
    control_norm: NormKind,
    misfit_norm: NormKind,
    misfit_weight: f64,
    coupling: ControlCoupling,
}

/// Right-hand side of the target state, `100 (x₂² − x₁²)`.
pub fn target_source(p: [f64; 2]) -> f64 {
    100.0 * (p[1] * p[1] - p[0] * p[0])
}

impl ProblemData {
    pub fn new(settings: &ProblemSettings) -> Result<Self> {
        if !(settings.alpha >= 0.0 && settings.theta_reg >= 0.0 && settings.misfit_weight > 0.0) {
            return Err(Error::InvalidArgument(
                "alpha and theta_reg must be nonnegative and misfit_weight positive".into(),
            ));
        }
        let mesh = build_mesh(settings.n_div)?;
        let field = build_field(&mesh, settings.s, settings.theta_decay, settings.tau)?;
        let stiffness = field.affine_stiffness(&mesh);
        let mass = assemble_mass(&mesh);
        // u₀ solves the unit-coefficient (negative Laplacian) system.
        let laplace = assemble_stiffness(&mesh, &vec![1.0; mesh.n_triangles()])?;
        let u0 = solve_spd(&laplace, &assemble_load(&mesh, target_source))?;
        Ok(Self {
            mesh,
            mass,
            field,
            stiffness,
            u0,
            alpha: settings.alpha,
            theta_reg: settings.theta_reg,
            control_norm: settings.control_norm,
            misfit_norm: settings.misfit_norm,
            misfit_weight: settings.misfit_weight,
            coupling: settings.coupling,
        })
    }

    /// Replaces the target state.
    pub fn with_target(mut self, u0: Vec<f64>) -> Result<Self> {
        check_len("target state", self.n_dof(), u0.len())?;
        self.u0 = u0;
        Ok(self)
    }

    pub fn with_theta_reg(mut self, theta_reg: f64) -> Self {
        self.theta_reg = theta_reg;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mass(&self) -> &SymmetricSparseOperator {
        &self.mass
    }

    pub fn field(&self) -> &DiffusionField {
        &self.field
    }

    pub fn stiffness(&self) -> &AffineStiffness {
        &self.stiffness
    }

    pub fn stiffness_at(&self, y: &ParamSample) -> SymmetricSparseOperator {
        self.stiffness.at(y)
    }

    pub fn u0(&self) -> &[f64] {
        &self.u0
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta_reg(&self) -> f64 {
        self.theta_reg
    }

    pub fn control_norm(&self) -> NormKind {
        self.control_norm
    }

    pub fn misfit_norm(&self) -> NormKind {
        self.misfit_norm
    }

    pub fn misfit_weight(&self) -> f64 {
        self.misfit_weight
    }

    /// `W v` where `½ eᵀ W e` is the state misfit.
    pub fn misfit_gram(&self, v: &[f64]) -> Vec<f64> {
        let scale = 2.0 * self.misfit_weight;
        let mut out = match self.misfit_norm {
            NormKind::Mass => self.mass.mul_vec(v),
            NormKind::Euclidean => v.to_vec(),
        };
        if scale != 1.0 {
            out.iter_mut().for_each(|o| *o *= scale);
        }
        out
    }

    pub fn coupling(&self) -> ControlCoupling {
        self.coupling
    }

    /// `B v`; both choices of `B` are symmetric, so this is also `Bᵀ v`.
    pub fn couple(&self, v: &[f64]) -> Vec<f64> {
        match self.coupling {
            ControlCoupling::Mass => self.mass.mul_vec(v),
            ControlCoupling::Identity => v.to_vec(),
        }
    }

    /// Upper bound for `σ_max(B)`.
    pub fn coupling_bound(&self) -> f64 {
        match self.coupling {
            ControlCoupling::Mass => self.mass.max_abs_row_sum(),
            ControlCoupling::Identity => 1.0,
        }
    }

    pub fn n_dof(&self) -> usize {
        self.mesh.n_dof()
    }

    pub fn s(&self) -> usize {
        self.field.s()
    }

    /// `C z` where `zᵀ C z` is the control norm.
    pub fn control_gram(&self, z: &[f64]) -> Vec<f64> {
        match self.control_norm {
            NormKind::Mass => self.mass.mul_vec(z),
            NormKind::Euclidean => z.to_vec(),
        }
    }

    pub fn control_norm_sq(&self, z: &[f64]) -> f64 {
        dot(z, &self.control_gram(z))
    }
}

/// The joint optimization variable `x = (z, θ)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptState {
    pub z: Vec<f64>,
    pub theta: Vec<f64>,
}

impl OptState {
    pub fn new(z: Vec<f64>, theta: Vec<f64>) -> Self {
        Self { z, theta }
    }

    pub fn zeros(n_dof: usize, param_count: usize) -> Self {
        Self::new(vec![0.0; n_dof], vec![0.0; param_count])
    }

    pub fn dim(&self) -> usize {
        self.z.len() + self.theta.len()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.z);
        v.extend_from_slice(&self.theta);
        v
    }

    pub fn from_flat(n_dof: usize, flat: &[f64]) -> Self {
        Self::new(flat[..n_dof].to_vec(), flat[n_dof..].to_vec())
    }

    /// `(‖z‖² + ‖θ‖²)^{1/2}` in the Euclidean coefficient norm.
    pub fn norm(&self) -> f64 {
        libm::sqrt(dot(&self.z, &self.z) + dot(&self.theta, &self.theta))
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let dz = sub(&self.z, &other.z);
        let dt = sub(&self.theta, &other.theta);
        libm::sqrt(dot(&dz, &dz) + dot(&dt, &dt))
    }

    pub fn is_finite(&self) -> bool {
        self.z.iter().chain(&self.theta).all(|v| v.is_finite())
    }
}

fn check_state<S: Surrogate + ?Sized>(data: &ProblemData, sur: &S, x: &OptState) -> Result<()> {
    check_len("control", data.n_dof(), x.z.len())?;
    check_len("surrogate output", data.n_dof(), sur.n_dof())?;
    check_len("surrogate parameters", sur.param_count(), x.theta.len())
}

/// Per-sample values of `f` and `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleTerms {
    pub f: f64,
    pub g: f64,
}

/// Evaluates `f` and `g` at one sample and, when `grad` is given, adds
/// `weight · ∇_x (f + λ g)` to it.
pub fn eval_sample<S: Surrogate + ?Sized>(
    data: &ProblemData,
    sur: &S,
    x: &OptState,
    y: &ParamSample,
    lambda: f64,
    grad: Option<(&mut [f64], f64)>,
) -> SampleTerms {
    let n = data.n_dof();
    let u = sur.eval(&x.theta, y);
    let e = sub(&u, &data.u0);
    let me = data.misfit_gram(&e);
    let a = data.stiffness_at(y);
    let bz = data.couple(&x.z);
    let r = sub(&a.mul_vec(&u), &bz);
    let cz = data.control_gram(&x.z);
    let f = 0.5 * dot(&e, &me) + 0.5 * data.alpha * dot(&x.z, &cz) + 0.5 * data.theta_reg * dot(&x.theta, &x.theta);
    let g = dot(&r, &r);
    if let Some((out, weight)) = grad {
        debug_assert_eq!(out.len(), x.dim());
        let (gz, gt) = out.split_at_mut(n);
        // ∂/∂z = α C z − 2λ Bᵀ r
        axpy(weight * data.alpha, &cz, gz);
        axpy(-2.0 * lambda * weight, &data.couple(&r), gz);
        // ∂/∂θ = vjp(M e + 2λ A r) + ρ θ
        let mut w = me;
        if lambda != 0.0 {
            axpy(2.0 * lambda, &a.mul_vec(&r), &mut w);
        }
        sur.vjp_accumulate(&x.theta, y, &w, weight, gt);
        if data.theta_reg != 0.0 {
            axpy(weight * data.theta_reg, &x.theta, gt);
        }
    }
    SampleTerms { f, g }
}

pub fn f_term<S: Surrogate + ?Sized>(data: &ProblemData, sur: &S, x: &OptState, y: &ParamSample) -> Result<f64> {
    check_state(data, sur, x)?;
    Ok(eval_sample(data, sur, x, y, 0.0, None).f)
}

pub fn g_term<S: Surrogate + ?Sized>(data: &ProblemData, sur: &S, x: &OptState, y: &ParamSample) -> Result<f64> {
    check_state(data, sur, x)?;
    Ok(eval_sample(data, sur, x, y, 0.0, None).g)
}

/// `∇_x [f(x, y) + λ g(x, y)]`, flat over `[z; θ]`.
pub fn grad_x<S: Surrogate + ?Sized>(
    data: &ProblemData,
    sur: &S,
    x: &OptState,
    y: &ParamSample,
    lambda: f64,
) -> Result<Vec<f64>> {
    check_state(data, sur, x)?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("penalty must be nonnegative, got {lambda}")));
    }
    let mut out = vec![0.0; x.dim()];
    eval_sample(data, sur, x, y, lambda, Some((&mut out, 1.0)));
    Ok(out)
}

/// Sample-averaged penalized objective and its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchValue {
    pub value: f64,
    pub mean_f: f64,
    pub mean_g: f64,
    pub grad: Vec<f64>,
}

/// `mean_i f(x, y_i) + λ mean_i g(x, y_i)`, summed in sample order.
pub fn batch_objective<S: Surrogate + ?Sized>(
    data: &ProblemData,
    sur: &S,
    x: &OptState,
    samples: &[ParamSample],
    lambda: f64,
) -> Result<BatchValue> {
    check_state(data, sur, x)?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("batch objective needs at least one sample".into()));
    }
    let weight = 1.0 / samples.len() as f64;
    let mut grad = vec![0.0; x.dim()];
    let (mut sf, mut sg) = (0.0, 0.0);
    for y in samples {
        let t = eval_sample(data, sur, x, y, lambda, Some((&mut grad, weight)));
        sf += t.f;
        sg += t.g;
    }
    let (mean_f, mean_g) = (sf * weight, sg * weight);
    Ok(BatchValue {
        value: mean_f + lambda * mean_g,
        mean_f,
        mean_g,
        grad,
    })
}

/// Value and gradient of the sample-averaged reduced objective
/// `Ĵ(z) = mean_i ½ ‖A(y_i)⁻¹ B z − u₀‖²_W + α/2 ‖z‖²`, via forward and
/// adjoint solves per sample.
pub fn reduced_gradient(data: &ProblemData, z: &[f64], samples: &[ParamSample]) -> Result<(f64, Vec<f64>)> {
    check_len("control", data.n_dof(), z.len())?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("reduced gradient needs at least one sample".into()));
    }
    let operators: Vec<SymmetricSparseOperator> = samples.iter().map(|y| data.stiffness_at(y)).collect();
    reduced_gradient_with(data, z, &operators)
}

pub(crate) fn reduced_gradient_with(
    data: &ProblemData,
    z: &[f64],
    operators: &[SymmetricSparseOperator],
) -> Result<(f64, Vec<f64>)> {
    let n = data.n_dof();
    let weight = 1.0 / operators.len() as f64;
    let bz = data.couple(z);
    let mut q_mean = vec![0.0; n];
    let mut misfit = 0.0;
    for a in operators {
        let u = solve_spd(a, &bz)?;
        let e = sub(&u, &data.u0);
        let me = data.misfit_gram(&e);
        misfit += 0.5 * dot(&e, &me);
        let q = solve_spd(a, &me)?;
        axpy(weight, &q, &mut q_mean);
    }
    let cz = data.control_gram(z);
    let mut grad = data.couple(&q_mean);
    axpy(data.alpha, &cz, &mut grad);
    Ok((misfit * weight + 0.5 * data.alpha * dot(z, &cz), grad))
}

/// Quantities entering the residual-gradient bounds for a linear surrogate
/// `u = P(y) θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualBoundCheck {
    pub g: f64,
    pub grad_g_norm_sq: f64,
    pub x_norm_sq: f64,
    /// Upper bound for `σ_max(A(y))` (largest absolute row sum).
    pub a_max: f64,
    /// `σ_max(P Pᵀ) = σ_max(Pᵀ P) = ‖p(y)‖²` for the chaos design operator.
    pub design_gram_max: f64,
    /// Upper bound for `σ_max(Bᵀ B)`.
    pub coupling_gram_max: f64,
}

impl ResidualBoundCheck {
    pub fn constant(&self) -> f64 {
        self.a_max * self.a_max * self.design_gram_max + self.coupling_gram_max
    }

    /// `‖∇_x g‖² ≤ 4 (a_max² σ_max(PPᵀ) + σ_max(BBᵀ)) g`
    pub fn gradient_bound(&self) -> f64 {
        4.0 * self.constant() * self.g
    }

    /// `g ≤ 2 (a_max² σ_max(PᵀP) + σ_max(BᵀB)) ‖x‖²`
    pub fn value_bound(&self) -> f64 {
        2.0 * self.constant() * self.x_norm_sq
    }

    pub fn gradient_bound_holds(&self) -> bool {
        self.grad_g_norm_sq <= self.gradient_bound() * (1.0 + 1e-12)
    }

    pub fn value_bound_holds(&self) -> bool {
        self.g <= self.value_bound() * (1.0 + 1e-12)
    }
}

pub fn residual_bound_check(
    data: &ProblemData,
    sur: &ChaosSurrogate,
    x: &OptState,
    y: &ParamSample,
) -> Result<ResidualBoundCheck> {
    check_state(data, sur, x)?;
    // ∇g alone: the λ = 1 gradient of f + g minus the λ = 0 gradient.
    let mut with = vec![0.0; x.dim()];
    let terms = eval_sample(data, sur, x, y, 1.0, Some((&mut with, 1.0)));
    let mut without = vec![0.0; x.dim()];
    eval_sample(data, sur, x, y, 0.0, Some((&mut without, 1.0)));
    let grad_g = sub(&with, &without);
    let p = sur.basis_vector(y);
    let b_bound = data.coupling_bound();
    Ok(ResidualBoundCheck {
        g: terms.g,
        grad_g_norm_sq: dot(&grad_g, &grad_g),
        x_norm_sq: x.norm() * x.norm(),
        a_max: data.stiffness_at(y).max_abs_row_sum(),
        design_gram_max: dot(&p, &p),
        coupling_gram_max: b_bound * b_bound,
    })
}

/// Relative gap `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_gap(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Largest coordinatewise relative gap between two gradients; coordinates
/// far below the gradient's scale are compared against `1e-3 · ‖g‖_∞`.
pub fn max_relative_gap(analytic: &[f64], reference: &[f64]) -> f64 {
    let floor = 1e-3 * crate::linalg::max_abs(analytic).max(crate::linalg::max_abs(reference)).max(1e-300);
    analytic
        .iter()
        .zip(reference)
        .map(|(a, b)| relative_gap(*a, *b, floor))
        .fold(0.0, f64::max)
}
