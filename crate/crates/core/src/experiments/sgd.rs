use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fem::solve_spd;
use crate::field::{sample_many, seeded_rng, ParamSample};
use crate::linalg::{dot, sub, SymmetricSparseOperator};
use crate::objective::{OptState, ProblemData};
use crate::optim::{psgd, reduced_reference_solve, PenaltyRun, PsgdConfig, Sampler};
use crate::surrogate::{Surrogate, SurrogateModel};

pub const REFERENCE_STREAM: u64 = 3;
pub const HELDOUT_STREAM: u64 = 2;
pub const INIT_STREAM: u64 = 5;

/// Error measures at one checkpoint; expectations are held-out sample means.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Checkpoint {
    pub k: u64,
    /// `‖z_k − z_ref‖²`
    pub control_error: f64,
    /// `E ‖u_θ(y) − u_ref(y)‖²`
    pub state_error: f64,
    /// `E ‖A(y) u_θ(y) − B z‖²`
    pub residual: f64,
    /// `E ‖u_θ(y) − u₀‖²`
    pub target_error: f64,
}

impl Checkpoint {
    pub fn is_finite(&self) -> bool {
        self.control_error.is_finite() && self.state_error.is_finite() && self.residual.is_finite() && self.target_error.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdTrace {
    pub label: String,
    pub param_count: usize,
    pub checkpoints: Vec<Checkpoint>,
    pub run: PenaltyRun,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdComparison {
    pub z_ref: Vec<f64>,
    pub traces: Vec<SgdTrace>,
}

struct HeldOut {
    samples: Vec<ParamSample>,
    operators: Vec<SymmetricSparseOperator>,
    states: Vec<Vec<f64>>,
}

impl HeldOut {
    fn new(data: &ProblemData, samples: Vec<ParamSample>, z_ref: &[f64]) -> Result<Self> {
        let operators: Vec<SymmetricSparseOperator> = samples.iter().map(|y| data.stiffness_at(y)).collect();
        let bz = data.couple(z_ref);
        let states = operators.iter().map(|a| solve_spd(a, &bz)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            samples,
            operators,
            states,
        })
    }

    fn checkpoint(&self, k: u64, data: &ProblemData, sur: &SurrogateModel, x: &OptState, z_ref: &[f64]) -> Checkpoint {
        let sq = |v: &[f64]| dot(v, v);
        let bz = data.couple(&x.z);
        let w = 1.0 / self.samples.len() as f64;
        let (mut state, mut residual, mut target) = (0.0, 0.0, 0.0);
        for ((y, a), u_ref) in self.samples.iter().zip(&self.operators).zip(&self.states) {
            let u = sur.eval(&x.theta, y);
            state += w * sq(&sub(&u, u_ref));
            residual += w * sq(&sub(&a.mul_vec(&u), &bz));
            target += w * sq(&sub(&u, data.u0()));
        }
        Checkpoint {
            k,
            control_error: sq(&sub(&x.z, z_ref)),
            state_error: state,
            residual,
            target_error: target,
        }
    }
}

/// Trains every configured surrogate with the stochastic solver and tracks
/// its distance to the reduced reference solution.
pub fn run_sgd_vs_reference(cfg: &ExperimentConfig) -> Result<SgdComparison> {
    let s = &cfg.sgd;
    if s.n_checkpoints == 0 || s.n_heldout == 0 || s.n_reference == 0 {
        return Err(Error::InvalidArgument("checkpoint, held-out and reference counts must be positive".into()));
    }
    let data = ProblemData::new(&cfg.problem)?;
    let ref_samples = sample_many(&mut seeded_rng(cfg.seed, REFERENCE_STREAM), data.s(), s.n_reference);
    let z_ref = reduced_reference_solve(&data, &ref_samples).map_err(|e| e.context("reference control"))?;
    let heldout = HeldOut::new(
        &data,
        sample_many(&mut seeded_rng(cfg.seed, HELDOUT_STREAM), data.s(), s.n_heldout),
        &z_ref,
    )?;
    let marks: Vec<u64> = (0..=s.n_checkpoints as u64).map(|i| i * s.n_iter / s.n_checkpoints as u64).collect();
    let psgd_cfg = PsgdConfig {
        steps: s.steps,
        penalty: s.penalty,
        n_iter: s.n_iter,
        radius: s.radius,
        rule: s.rule,
        log_every: s.log_every,
    };
    let mut traces = Vec::with_capacity(s.surrogates.len());
    for spec in &s.surrogates {
        let sur = spec.build(data.s(), data.n_dof())?;
        let init = if sur.as_chaos().is_some() { s.chaos_init } else { s.net_init };
        let theta0 = sur.initial_theta(init, &mut seeded_rng(cfg.seed, INIT_STREAM));
        let x0 = OptState::new(vec![0.0; data.n_dof()], theta0);
        let mut checkpoints = Vec::with_capacity(marks.len());
        let mut next = 0;
        let run = psgd(&data, &sur, &x0, &psgd_cfg, Sampler::Uniform { s: data.s() }, cfg.seed, None, |k, x| {
            while next < marks.len() && marks[next] == k {
                checkpoints.push(heldout.checkpoint(k, &data, &sur, x, &z_ref));
                next += 1;
            }
        })
        .map_err(|e| e.context(alloc::format!("surrogate {}", spec.label())))?;
        traces.push(SgdTrace {
            label: spec.label(),
            param_count: sur.param_count(),
            checkpoints,
            run,
        });
    }
    Ok(SgdComparison { z_ref, traces })
}
