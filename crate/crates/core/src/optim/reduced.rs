use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::solve_spd;
use crate::field::ParamSample;
use crate::linalg::{axpy, conjugate_gradient, norm, SymmetricSparseOperator};
use crate::objective::{reduced_gradient_with, ProblemData};

/// Target gradient norm of [`reduced_reference_solve`].
pub const REDUCED_GRADIENT_TOL: f64 = 1e-9;

/// Minimizer of the sample-averaged reduced problem
/// `min_z mean_i ½ ‖A(y_i)⁻¹ B z − u₀‖²_W + α/2 ‖z‖²`.
///
/// The reduced gradient is affine in `z`, `∇Ĵ(z) = H z − b` with
/// `H v = Bᵀ mean_i A_i⁻¹ W A_i⁻¹ B v + α C v`; `H z = b` is solved by
/// conjugate gradients, each operator application costing two solves per
/// sample.
pub fn reduced_reference_solve(data: &ProblemData, samples: &[ParamSample]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("reduced problem needs at least one sample".into()));
    }
    if !(data.alpha() > 0.0) {
        return Err(Error::InvalidArgument("reduced problem needs alpha > 0".into()));
    }
    let n = data.n_dof();
    let operators: Vec<SymmetricSparseOperator> = samples.iter().map(|y| data.stiffness_at(y)).collect();
    let weight = 1.0 / operators.len() as f64;

    let apply_inner = |v: &[f64]| -> Result<Vec<f64>> {
        let bv = data.couple(v);
        let mut acc = vec![0.0; n];
        for a in &operators {
            let u = solve_spd(a, &bv)?;
            let q = solve_spd(a, &data.misfit_gram(&u))?;
            axpy(weight, &q, &mut acc);
        }
        Ok(data.couple(&acc))
    };

    // b = Bᵀ mean_i A_i⁻¹ W u₀ = −∇Ĵ(0)
    let mut b = vec![0.0; n];
    let mu0 = data.misfit_gram(data.u0());
    for a in &operators {
        axpy(weight, &solve_spd(a, &mu0)?, &mut b);
    }
    let b = data.couple(&b);
    let b_norm = norm(&b);
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }

    let failure = core::cell::Cell::new(None);
    let apply = |v: &[f64], out: &mut [f64]| match apply_inner(v) {
        Ok(mut hv) => {
            axpy(data.alpha(), &data.control_gram(v), &mut hv);
            out.copy_from_slice(&hv);
        }
        Err(e) => {
            failure.set(Some(e));
            out.iter_mut().for_each(|o| *o = 0.0);
        }
    };
    let tol = (0.01 * REDUCED_GRADIENT_TOL / b_norm).min(1e-10);
    let mut z = vec![0.0; n];
    // Restarting on the true residual absorbs the inexactness of the inner solves.
    for _pass in 0..3 {
        let hz = {
            let mut hz = vec![0.0; n];
            apply(&z, &mut hz);
            hz
        };
        let r: Vec<f64> = b.iter().zip(&hz).map(|(bi, hi)| bi - hi).collect();
        if norm(&r) <= 0.01 * REDUCED_GRADIENT_TOL {
            break;
        }
        let out = conjugate_gradient(apply, &r, None, None, tol.max(1e-14), 10 * n + 100);
        if let Some(e) = failure.take() {
            return Err(e);
        }
        axpy(1.0, &out?.x, &mut z);
    }
    let (_, grad) = reduced_gradient_with(data, &z, &operators)?;
    let gn = norm(&grad);
    if !(gn <= REDUCED_GRADIENT_TOL) {
        return Err(Error::SolverFailure {
            iterations: 0,
            residual: gn,
        });
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{sample_many, seeded_rng};
    use crate::objective::{reduced_gradient, ProblemSettings};

    #[test]
    fn zero_target_gives_zero_control() {
        let data = ProblemData::new(&ProblemSettings {
            n_div: 4,
            ..Default::default()
        })
        .unwrap()
        .with_target(vec![0.0; 9])
        .unwrap();
        let samples = sample_many(&mut seeded_rng(0, 0), 4, 5);
        assert_eq!(reduced_reference_solve(&data, &samples).unwrap(), vec![0.0; 9]);
    }

    #[test]
    fn one_dof_closed_form() {
        let data = ProblemData::new(&ProblemSettings {
            n_div: 2,
            ..Default::default()
        })
        .unwrap();
        let y = ParamSample(vec![0.4, -0.7, 0.2, 0.9]);
        let a = data.stiffness_at(&y).get(0, 0);
        let m = data.mass().get(0, 0);
        let u0 = data.u0()[0];
        let alpha = data.alpha();
        // d/dz [½ m (m z / a − u₀)² + α/2 m z²] = 0
        let expected = (m * m * u0 / a) / (m * m * m / (a * a) + alpha * m);
        let z = reduced_reference_solve(&data, &[y]).unwrap();
        assert!((z[0] - expected).abs() <= 1e-12 * expected.abs().max(1e-300), "{} vs {expected}", z[0]);
    }

    #[test]
    fn solution_is_stationary() {
        let data = ProblemData::new(&ProblemSettings::default()).unwrap();
        let samples = sample_many(&mut seeded_rng(3, 0), 4, 16);
        let z = reduced_reference_solve(&data, &samples).unwrap();
        let (_, g) = reduced_gradient(&data, &z, &samples).unwrap();
        assert!(norm(&g) <= 1e-9);
        assert!(norm(&z) > 0.0);
    }

    #[test]
    fn one_dof_closed_form_plain_norms() {
        let data = ProblemData::new(&ProblemSettings {
            n_div: 2,
            ..ProblemSettings::plain_norms()
        })
        .unwrap();
        let y = ParamSample(vec![-0.2, 0.3, 0.6, -0.5]);
        let a = data.stiffness_at(&y).get(0, 0);
        let u0 = data.u0()[0];
        let alpha = data.alpha();
        // d/dz [(z / a − u₀)² + α/2 z²] = 0
        let expected = (2.0 * u0 / a) / (2.0 / (a * a) + alpha);
        let z = reduced_reference_solve(&data, &[y]).unwrap();
        assert!((z[0] - expected).abs() <= 1e-12 * expected.abs(), "{} vs {expected}", z[0]);
    }
}
