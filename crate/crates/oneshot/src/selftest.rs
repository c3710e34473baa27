//! Quick end-to-end checks of an installed binary: discretization order,
//! gradients against finite differences, and solver agreement.

use oneshot_core::fem::manufactured_error;
use oneshot_core::field::{sample_many, sample_y, seeded_rng};
use oneshot_core::objective::*;
use oneshot_core::optim::{batch_minimize, linear_perm_oracle, LbfgsOptions};
use oneshot_core::surrogate::{ChaosSurrogate, InitMode, Surrogate, SurrogateSpec};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn central_difference(phi: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|k| {
            xp[k] = x[k] + h;
            let fp = phi(&xp);
            xp[k] = x[k] - h;
            let fm = phi(&xp);
            xp[k] = x[k];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn fem_order() -> anyhow::Result<Check> {
    let e = [manufactured_error(8)?, manufactured_error(16)?, manufactured_error(32)?];
    let orders = [(e[0] / e[1]).log2(), (e[1] / e[2]).log2()];
    Ok(check(
        "fem_l2_order",
        orders.iter().all(|o| (1.8..=2.2).contains(o)),
        format!("orders {:.3} {:.3}", orders[0], orders[1]),
    ))
}

fn param_counts() -> anyhow::Result<Check> {
    let specs = [
        SurrogateSpec::Legendre { degree: 1 },
        SurrogateSpec::Legendre { degree: 2 },
        SurrogateSpec::Legendre { degree: 3 },
        SurrogateSpec::NeuralNet { hidden: vec![9, 9, 9] },
    ];
    let got = specs.iter().map(|s| Ok(s.build(4, 49)?.param_count())).collect::<anyhow::Result<Vec<_>>>()?;
    Ok(check("parameter_counts", got == [245, 735, 1715, 715], format!("{got:?}")))
}

fn gradients() -> anyhow::Result<Check> {
    let data = ProblemData::new(&ProblemSettings {
        n_div: 4,
        ..ProblemSettings::default()
    })?;
    let n = data.n_dof();
    let mut rng = seeded_rng(11, 0);
    let mut worst = 0.0f64;
    for spec in [SurrogateSpec::Legendre { degree: 2 }, SurrogateSpec::NeuralNet { hidden: vec![5, 5] }] {
        let sur = spec.build(4, n)?;
        let x = OptState::new(sample_y(&mut rng, n).0, sur.initial_theta(InitMode::ScaledUniform, &mut rng));
        let y = sample_y(&mut rng, 4);
        for lambda in [0.0, 1.0, 100.0] {
            let g = grad_x(&data, &sur, &x, &y, lambda)?;
            let phi = |flat: &[f64]| {
                let s = OptState::from_flat(n, flat);
                f_term(&data, &sur, &s, &y).unwrap() + lambda * g_term(&data, &sur, &s, &y).unwrap()
            };
            worst = worst.max(max_relative_gap(&g, &central_difference(phi, &x.to_flat(), 1e-6)));
        }
    }
    let samples = sample_many(&mut rng, 4, 2);
    let z: Vec<f64> = sample_y(&mut rng, n).0.iter().map(|v| 30.0 * v).collect();
    let (_, g) = reduced_gradient(&data, &z, &samples)?;
    let fd = central_difference(|zz| reduced_gradient(&data, zz, &samples).unwrap().0, &z, 1e-3);
    worst = worst.max(max_relative_gap(&g, &fd));
    Ok(check("gradients_vs_finite_differences", worst <= 1e-5, format!("worst relative gap {worst:.1e}")))
}

fn oracle() -> anyhow::Result<Check> {
    let data = ProblemData::new(&ProblemSettings {
        n_div: 3,
        ..ProblemSettings::plain_norms()
    })?;
    let chaos = ChaosSurrogate::legendre(4, 1, data.n_dof());
    let samples = sample_many(&mut seeded_rng(0, 1), 4, 32);
    let x_star = linear_perm_oracle(&data, &chaos, &samples, 1.0)?;
    let opts = LbfgsOptions {
        tol: 1e-12,
        max_iter: 20_000,
        ..LbfgsOptions::default()
    };
    let x0 = OptState::zeros(data.n_dof(), chaos.param_count());
    let rel = batch_minimize(&data, &chaos, &x0, &samples, 1.0, &opts)?.x.distance(&x_star) / x_star.norm();
    Ok(check("batch_minimize_vs_oracle", rel <= 1e-6, format!("relative distance {rel:.1e}")))
}

fn residual_bounds() -> anyhow::Result<Check> {
    let data = ProblemData::new(&ProblemSettings::default())?;
    let chaos = ChaosSurrogate::legendre(4, 2, data.n_dof());
    let mut rng = seeded_rng(12, 0);
    let mut violations = 0;
    for _ in 0..200 {
        let x = OptState::new(sample_y(&mut rng, data.n_dof()).0, sample_y(&mut rng, chaos.param_count()).0);
        let c = residual_bound_check(&data, &chaos, &x, &sample_y(&mut rng, 4))?;
        if !(c.gradient_bound_holds() && c.value_bound_holds()) {
            violations += 1;
        }
    }
    Ok(check("residual_bounds", violations == 0, format!("{violations} violations in 200 draws")))
}

pub fn run() -> anyhow::Result<Vec<Check>> {
    Ok(vec![fem_order()?, param_counts()?, gradients()?, oracle()?, residual_bounds()?])
}
