//! Parametric state surrogates `u(θ, y)`.
//!
//! Two families are provided: polynomial chaos expansions, linear in `θ`, and
//! sigmoid feedforward networks, nonlinear in `θ`. Both expose evaluation and
//! the vector-Jacobian product `θ ↦ ∇_θ ⟨w, u(θ, y)⟩` through [`Surrogate`].

mod basis;
mod chaos;
mod nn;

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

pub use basis::{
    basis_vector, gen_total_degree, legendre_1d, legendre_table, total_degree_cardinality, BasisKind,
    MultiIndexSet,
};
pub use chaos::ChaosSurrogate;
pub use nn::{sigmoid, NeuralNet};

use crate::error::Result;
use crate::field::ParamSample;

pub trait Surrogate {
    fn param_count(&self) -> usize;

    /// Length of the produced state vector.
    fn n_dof(&self) -> usize;

    /// Dimension of the parameter `y`.
    fn s(&self) -> usize;

    fn eval(&self, theta: &[f64], y: &ParamSample) -> Vec<f64>;

    /// `out += scale · ∇_θ ⟨w, u(θ, y)⟩`
    fn vjp_accumulate(&self, theta: &[f64], y: &ParamSample, w: &[f64], scale: f64, out: &mut [f64]);

    fn vjp(&self, theta: &[f64], y: &ParamSample, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.param_count()];
        self.vjp_accumulate(theta, y, w, 1.0, &mut out);
        out
    }

    /// Human-readable description of the `θ` layout.
    fn flattening(&self) -> &'static str;

    /// The linear structure, when the surrogate is a chaos expansion.
    fn as_chaos(&self) -> Option<&ChaosSurrogate> {
        None
    }
}

/// Configuration-level description of a surrogate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum SurrogateSpec {
    Legendre { degree: usize },
    Monomial { degree: usize },
    /// Hidden layer widths; input and output widths come from the problem.
    NeuralNet { hidden: Vec<usize> },
}

impl SurrogateSpec {
    pub fn build(&self, s: usize, n_dof: usize) -> Result<SurrogateModel> {
        Ok(match self {
            SurrogateSpec::Legendre { degree } => SurrogateModel::Chaos(ChaosSurrogate::new(
                gen_total_degree(s, *degree),
                BasisKind::Legendre,
                n_dof,
            )),
            SurrogateSpec::Monomial { degree } => SurrogateModel::Chaos(ChaosSurrogate::new(
                gen_total_degree(s, *degree),
                BasisKind::Monomial,
                n_dof,
            )),
            SurrogateSpec::NeuralNet { hidden } => {
                let mut sizes = Vec::with_capacity(hidden.len() + 2);
                sizes.push(s);
                sizes.extend_from_slice(hidden);
                sizes.push(n_dof);
                SurrogateModel::Net(NeuralNet::new(sizes)?)
            }
        })
    }

    pub fn label(&self) -> alloc::string::String {
        match self {
            SurrogateSpec::Legendre { degree } => alloc::format!("legendre-{degree}"),
            SurrogateSpec::Monomial { degree } => alloc::format!("monomial-{degree}"),
            SurrogateSpec::NeuralNet { hidden } => {
                let widths: Vec<alloc::string::String> = hidden.iter().map(|h| alloc::format!("{h}")).collect();
                alloc::format!("nn-{}", widths.join("x"))
            }
        }
    }
}

/// How the initial `θ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InitMode {
    Zeros,
    #[default]
    Ones,
    /// Uniform on `[-r, r]`, `r = √(6 / (fan_in + fan_out))`, biases zero.
    ScaledUniform,
}

impl InitMode {
    pub fn label(&self) -> &'static str {
        match self {
            InitMode::Zeros => "zeros",
            InitMode::Ones => "ones",
            InitMode::ScaledUniform => "scaled_uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurrogateModel {
    Chaos(ChaosSurrogate),
    Net(NeuralNet),
}

impl SurrogateModel {
    pub fn initial_theta<R: RngCore + ?Sized>(&self, mode: InitMode, rng: &mut R) -> Vec<f64> {
        match mode {
            InitMode::Zeros => vec![0.0; self.param_count()],
            InitMode::Ones => vec![1.0; self.param_count()],
            InitMode::ScaledUniform => match self {
                SurrogateModel::Net(nn) => nn.scaled_uniform_init(rng),
                SurrogateModel::Chaos(c) => {
                    let r = libm::sqrt(6.0 / (c.n_basis() + c.n_dof()) as f64);
                    (0..c.param_count()).map(|_| rng.random_range(-r..=r)).collect()
                }
            },
        }
    }
}

impl Surrogate for SurrogateModel {
    fn param_count(&self) -> usize {
        match self {
            SurrogateModel::Chaos(c) => c.param_count(),
            SurrogateModel::Net(n) => n.param_count(),
        }
    }

    fn n_dof(&self) -> usize {
        match self {
            SurrogateModel::Chaos(c) => c.n_dof(),
            SurrogateModel::Net(n) => n.n_dof(),
        }
    }

    fn s(&self) -> usize {
        match self {
            SurrogateModel::Chaos(c) => c.s(),
            SurrogateModel::Net(n) => n.s(),
        }
    }

    fn eval(&self, theta: &[f64], y: &ParamSample) -> Vec<f64> {
        match self {
            SurrogateModel::Chaos(c) => c.eval(theta, y),
            SurrogateModel::Net(n) => n.eval(theta, y),
        }
    }

    fn vjp_accumulate(&self, theta: &[f64], y: &ParamSample, w: &[f64], scale: f64, out: &mut [f64]) {
        match self {
            SurrogateModel::Chaos(c) => c.vjp_accumulate(theta, y, w, scale, out),
            SurrogateModel::Net(n) => n.vjp_accumulate(theta, y, w, scale, out),
        }
    }

    fn flattening(&self) -> &'static str {
        match self {
            SurrogateModel::Chaos(c) => c.flattening(),
            SurrogateModel::Net(n) => n.flattening(),
        }
    }

    fn as_chaos(&self) -> Option<&ChaosSurrogate> {
        match self {
            SurrogateModel::Chaos(c) => Some(c),
            SurrogateModel::Net(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{sample_many, sample_y, seeded_rng};

    #[test]
    fn spec_builds_expected_sizes() {
        let counts: Vec<usize> = [
            SurrogateSpec::Legendre { degree: 1 },
            SurrogateSpec::Legendre { degree: 2 },
            SurrogateSpec::Legendre { degree: 3 },
            SurrogateSpec::NeuralNet { hidden: vec![9, 9, 9] },
        ]
        .iter()
        .map(|s| s.build(4, 49).unwrap().param_count())
        .collect();
        assert_eq!(counts, vec![245, 735, 1715, 715]);
    }

    #[test]
    fn legendre_orthonormality_by_monte_carlo() {
        let set = gen_total_degree(4, 2);
        let n = 100_000;
        let k = set.len();
        let mut gram = vec![0.0; k * k];
        let mut rng = seeded_rng(2024, 0);
        for y in sample_many(&mut rng, 4, n) {
            let p = basis_vector(&set, BasisKind::Legendre, &y.0);
            for a in 0..k {
                for b in 0..k {
                    gram[a * k + b] += p[a] * p[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..k {
                let v = gram[a * k + b] / n as f64;
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((v - expected).abs() < 0.02, "({a},{b}) = {v}");
            }
        }
    }

    fn duality_check(model: &SurrogateModel, seed: u64) {
        let mut rng = seeded_rng(seed, 0);
        let theta = model.initial_theta(InitMode::ScaledUniform, &mut rng);
        let dir = sample_y(&mut rng, model.param_count()).0;
        let w = sample_y(&mut rng, model.n_dof()).0;
        let y = sample_y(&mut rng, model.s());
        let analytic = crate::linalg::dot(&model.vjp(&theta, &y, &w), &dir);
        let h = 1e-5;
        let shifted = |eps: f64| {
            let t: Vec<f64> = theta.iter().zip(&dir).map(|(a, d)| a + eps * d).collect();
            crate::linalg::dot(&w, &model.eval(&t, &y))
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        assert!((fd - analytic).abs() <= 1e-5 * analytic.abs().max(1e-8), "{fd} vs {analytic}");
    }

    #[test]
    fn vjp_eval_duality() {
        for seed in 0..5 {
            duality_check(&SurrogateSpec::Legendre { degree: 3 }.build(4, 9).unwrap(), seed);
            duality_check(&SurrogateSpec::Monomial { degree: 2 }.build(4, 9).unwrap(), seed);
            duality_check(&SurrogateSpec::NeuralNet { hidden: vec![9, 9, 9] }.build(4, 49).unwrap(), seed);
        }
    }

    #[test]
    fn vjp_is_linear_in_w() {
        let model = SurrogateSpec::NeuralNet { hidden: vec![5] }.build(3, 4).unwrap();
        let mut rng = seeded_rng(4, 0);
        let theta = model.initial_theta(InitMode::ScaledUniform, &mut rng);
        let y = sample_y(&mut rng, 3);
        let w1 = sample_y(&mut rng, 4).0;
        let w2 = sample_y(&mut rng, 4).0;
        let w12: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| 2.0 * a - b).collect();
        let g1 = model.vjp(&theta, &y, &w1);
        let g2 = model.vjp(&theta, &y, &w2);
        let g12 = model.vjp(&theta, &y, &w12);
        for k in 0..g1.len() {
            assert!((2.0 * g1[k] - g2[k] - g12[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn init_modes() {
        let model = SurrogateSpec::Legendre { degree: 1 }.build(4, 49).unwrap();
        let mut rng = seeded_rng(0, 0);
        assert!(model.initial_theta(InitMode::Ones, &mut rng).iter().all(|&v| v == 1.0));
        assert!(model.initial_theta(InitMode::Zeros, &mut rng).iter().all(|&v| v == 0.0));
        let nn = SurrogateSpec::NeuralNet { hidden: vec![9, 9, 9] }.build(4, 49).unwrap();
        let t = nn.initial_theta(InitMode::ScaledUniform, &mut rng);
        let r = libm::sqrt(6.0 / 13.0);
        assert!(t[..36].iter().all(|&v| v.abs() <= r));
        assert!(t[36..45].iter().all(|&v| v == 0.0));
    }
}
