use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::fem::{assemble_load, solve_spd};
use crate::field::{sample_y, seeded_rng, ParamSample};
use crate::objective::ProblemData;

/// RNG stream of the Monte Carlo state statistics.
pub const MC_STREAM: u64 = 4;

/// Right-hand side of the Monte Carlo study, `x₂² − x₁²`.
pub fn mc_source(p: [f64; 2]) -> f64 {
    p[1] * p[1] - p[0] * p[0]
}

/// One-pass, per-coordinate mean and variance (Welford), mergeable.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunningStats {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningStats {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
    }

    /// Combines two disjoint streams (Chan et al. pairwise update).
    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample variance; zero with fewer than two observations.
    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.mean.len()];
        }
        let d = (self.count - 1) as f64;
        self.m2.iter().map(|s| s / d).collect()
    }

    pub fn std_dev(&self) -> Vec<f64> {
        self.variance().into_iter().map(libm::sqrt).collect()
    }
}

/// Per-DOF statistics of the random state, with the DOF coordinates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StateStats {
    pub coordinates: Vec<[f64; 2]>,
    pub mean: Vec<f64>,
    pub std_dev: Vec<f64>,
    pub n_samples: u64,
}

/// Accumulates `solve(A(y), load)` over the given parameter draws.
pub fn accumulate_states(data: &ProblemData, draws: impl IntoIterator<Item = ParamSample>) -> Result<RunningStats> {
    let load = assemble_load(data.mesh(), mc_source);
    let mut stats = RunningStats::new(data.n_dof());
    for y in draws {
        let u = solve_spd(&data.stiffness_at(&y), &load)?;
        stats.push(&u);
    }
    Ok(stats)
}

/// Monte Carlo mean and standard deviation of the state for the source
/// `x₂² − x₁²`, from `n_samples` uniform parameter draws.
pub fn monte_carlo_state_stats(data: &ProblemData, n_samples: usize, seed: u64) -> Result<StateStats> {
    let mut rng = seeded_rng(seed, MC_STREAM);
    let s = data.s();
    let stats = accumulate_states(data, (0..n_samples).map(|_| sample_y(&mut rng, s)))?;
    Ok(StateStats {
        coordinates: data.mesh().dof_coordinates().collect(),
        mean: stats.mean().to_vec(),
        std_dev: stats.std_dev(),
        n_samples: stats.count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let data: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.1, libm::sin(i as f64) * 1e3 + 1e6]).collect();
        let mut st = RunningStats::new(2);
        data.iter().for_each(|x| st.push(x));
        for d in 0..2 {
            let mean = data.iter().map(|x| x[d]).sum::<f64>() / 50.0;
            let var = data.iter().map(|x| (x[d] - mean) * (x[d] - mean)).sum::<f64>() / 49.0;
            assert!((st.mean()[d] - mean).abs() <= 1e-12 * mean.abs().max(1.0));
            assert!((st.variance()[d] - var).abs() <= 1e-9 * var);
        }
    }

    #[test]
    fn merge_equals_single_stream() {
        let xs: Vec<Vec<f64>> = (0..101).map(|i| vec![libm::cos(i as f64 * 0.7) * 3.0 + 2.0]).collect();
        let mut full = RunningStats::new(1);
        xs.iter().for_each(|x| full.push(x));
        let mut a = RunningStats::new(1);
        let mut b = RunningStats::new(1);
        xs[..37].iter().for_each(|x| a.push(x));
        xs[37..].iter().for_each(|x| b.push(x));
        a.merge(&b);
        assert_eq!(a.count(), 101);
        assert!((a.mean()[0] - full.mean()[0]).abs() <= 1e-12 * full.mean()[0].abs());
        assert!((a.variance()[0] - full.variance()[0]).abs() <= 1e-12 * full.variance()[0]);
        let mut empty = RunningStats::new(1);
        empty.merge(&full);
        assert_eq!(empty, full);
    }
}
