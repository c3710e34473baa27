use oneshot_core::field::{sample_many, seeded_rng, ParamSample};
use oneshot_core::objective::{OptState, ProblemData, ProblemSettings};
use oneshot_core::optim::*;
use oneshot_core::surrogate::{ChaosSurrogate, Surrogate};

struct Bench {
    data: ProblemData,
    chaos: ChaosSurrogate,
    samples: Vec<ParamSample>,
    oracle: OptState,
    steps: StepSchedule,
}

const LAMBDA: f64 = 1.0;

fn bench(degree: usize, n_samples: usize) -> Bench {
    let data = ProblemData::new(&ProblemSettings {
        n_div: 3,
        ..ProblemSettings::plain_norms()
    })
    .unwrap();
    let chaos = ChaosSurrogate::legendre(4, degree, data.n_dof());
    let samples = sample_many(&mut seeded_rng(0, 1), 4, n_samples);
    let model = QuadraticModel::new(&data, &chaos, &samples, LAMBDA).unwrap();
    let c = model.hessian().symmetric_eigenvalues()[0];
    let l = samples
        .iter()
        .map(|y| {
            let m = QuadraticModel::new(&data, &chaos, std::slice::from_ref(y), LAMBDA).unwrap();
            *m.hessian().symmetric_eigenvalues().last().unwrap()
        })
        .fold(0.0, f64::max);
    let oracle = model.minimizer().unwrap();
    Bench {
        data,
        chaos,
        samples,
        oracle,
        steps: StepSchedule::RobbinsMonro {
            beta0: 2.0 / c,
            k0: 2.0 * l / c,
        },
    }
}

fn config(b: &Bench, n_iter: u64) -> PsgdConfig {
    PsgdConfig {
        steps: b.steps,
        penalty: PenaltySchedule::Constant { lambda0: LAMBDA },
        n_iter,
        radius: None,
        rule: UpdateRule::Sgd,
        log_every: 1,
    }
}

#[test]
fn windowed_error_trend_decreases() {
    let b = bench(1, 64);
    let (window, n_iter) = (500usize, 20_000u64);
    let n_windows = n_iter as usize / window;
    let mut means = vec![0.0; n_windows];
    let x0 = OptState::zeros(b.data.n_dof(), b.chaos.param_count());
    for seed in 0..5 {
        let mut errs = Vec::with_capacity(n_iter as usize);
        psgd(&b.data, &b.chaos, &x0, &config(&b, n_iter), Sampler::Empirical(&b.samples), seed, None, |k, x| {
            if k < n_iter {
                errs.push(x.distance(&b.oracle).powi(2));
            }
        })
        .unwrap();
        for (m, chunk) in means.iter_mut().zip(errs.chunks(window)) {
            *m += chunk.iter().sum::<f64>() / (5.0 * window as f64);
        }
    }
    let pairs = means.windows(2).count();
    let down = means.windows(2).filter(|w| w[1] <= w[0]).count();
    assert!(down as f64 >= 0.9 * pairs as f64, "{down} of {pairs} window pairs decrease: {means:?}");
}

#[test]
fn log_records_every_iteration() {
    let b = bench(1, 16);
    let x0 = OptState::zeros(b.data.n_dof(), b.chaos.param_count());
    let run = psgd(&b.data, &b.chaos, &x0, &config(&b, 300), Sampler::Empirical(&b.samples), 4, Some(&b.oracle), |_, _| {})
        .unwrap();
    assert_eq!(run.log.len(), 300);
    assert!(run.log.iter().enumerate().all(|(i, r)| r.k == i as u64 && r.distance.is_some()));
    assert_eq!(run.log[0].distance.unwrap(), b.oracle.norm());
    let strided = PsgdConfig {
        log_every: 100,
        ..config(&b, 300)
    };
    let thin = psgd(&b.data, &b.chaos, &x0, &strided, Sampler::Empirical(&b.samples), 4, None, |_, _| {}).unwrap();
    let ks: Vec<u64> = thin.log.iter().map(|r| r.k).collect();
    assert_eq!(ks, [0, 100, 200, 299]);
    assert_eq!(thin.x, run.x);
}

#[test]
fn uniform_draws_approach_large_sample_oracle() {
    let b = bench(1, 1 << 14);
    let x0 = OptState::zeros(b.data.n_dof(), b.chaos.param_count());
    let n_iter = 1_000_000;
    let cfg = PsgdConfig {
        log_every: n_iter,
        ..config(&b, n_iter)
    };
    let errs: Vec<f64> = (0..3)
        .map(|seed| {
            let run = psgd(&b.data, &b.chaos, &x0, &cfg, Sampler::Uniform { s: 4 }, seed, None, |_, _| {}).unwrap();
            run.x.distance(&b.oracle) / b.oracle.norm()
        })
        .collect();
    let mean = errs.iter().sum::<f64>() / 3.0;
    assert!(mean <= 1e-3, "{errs:?}");
}
