use proptest::prelude::*;

use oneshot_core::experiments::{fit_loglog_slope, RunningStats};
use oneshot_core::field::ParamSample;
use oneshot_core::objective::*;
use oneshot_core::optim::{project_ball, PenaltySchedule, StepSchedule};
use oneshot_core::surrogate::{ChaosSurrogate, NeuralNet, Surrogate};

fn unit() -> impl Strategy<Value = f64> {
    -1.0..=1.0f64
}

fn sample() -> impl Strategy<Value = ParamSample> {
    prop::collection::vec(unit(), 4).prop_map(ParamSample)
}

fn state(nz: usize, nt: usize, scale: f64) -> impl Strategy<Value = OptState> {
    (prop::collection::vec(unit(), nz), prop::collection::vec(unit(), nt)).prop_map(move |(z, t)| {
        OptState::new(z.iter().map(|v| scale * v).collect(), t.iter().map(|v| scale * v).collect())
    })
}

fn small_data(plain: bool) -> ProblemData {
    let base = if plain { ProblemSettings::plain_norms() } else { ProblemSettings::default() };
    ProblemData::new(&ProblemSettings { n_div: 4, ..base }).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn terms_are_nonnegative(x in state(9, 45, 10.0), y in sample(), plain in any::<bool>()) {
        let data = small_data(plain);
        let chaos = ChaosSurrogate::legendre(4, 1, 9);
        prop_assert!(f_term(&data, &chaos, &x, &y).unwrap() >= 0.0);
        prop_assert!(g_term(&data, &chaos, &x, &y).unwrap() >= 0.0);
    }

    #[test]
    fn residual_bounds(x in state(9, 135, 5.0), y in sample(), plain in any::<bool>()) {
        let data = small_data(plain);
        let chaos = ChaosSurrogate::legendre(4, 2, 9);
        let c = residual_bound_check(&data, &chaos, &x, &y).unwrap();
        prop_assert!(c.gradient_bound_holds());
        prop_assert!(c.value_bound_holds());
    }

    #[test]
    fn chaos_vjp_is_linear_in_w(
        theta in prop::collection::vec(unit(), 45),
        w1 in prop::collection::vec(unit(), 9),
        w2 in prop::collection::vec(unit(), 9),
        a in -3.0..3.0f64,
        y in sample(),
    ) {
        let chaos = ChaosSurrogate::legendre(4, 1, 9);
        let w: Vec<f64> = w1.iter().zip(&w2).map(|(p, q)| a * p + q).collect();
        let lhs = chaos.vjp(&theta, &y, &w);
        let (g1, g2) = (chaos.vjp(&theta, &y, &w1), chaos.vjp(&theta, &y, &w2));
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (a * g1[i] + g2[i])).abs() <= 1e-12 * (1.0 + lhs[i].abs()));
        }
    }

    #[test]
    fn net_vjp_is_linear_in_w(
        w1 in prop::collection::vec(unit(), 9),
        w2 in prop::collection::vec(unit(), 9),
        a in -3.0..3.0f64,
        y in sample(),
    ) {
        let net = NeuralNet::new(vec![4, 5, 9]).unwrap();
        let theta: Vec<f64> = (0..net.param_count()).map(|i| (i as f64 * 0.37).sin()).collect();
        let w: Vec<f64> = w1.iter().zip(&w2).map(|(p, q)| a * p + q).collect();
        let lhs = net.vjp(&theta, &y, &w);
        let (g1, g2) = (net.vjp(&theta, &y, &w1), net.vjp(&theta, &y, &w2));
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (a * g1[i] + g2[i])).abs() <= 1e-12 * (1.0 + lhs[i].abs()));
        }
    }

    #[test]
    fn projection_contract(a in state(3, 5, 10.0), b in state(3, 5, 10.0), r in 0.1..20.0f64) {
        let (pa, pb) = (project_ball(&a, r), project_ball(&b, r));
        prop_assert!(pa.norm() <= r);
        prop_assert_eq!(&project_ball(&pa, r), &pa);
        prop_assert!(pa.distance(&pb) <= a.distance(&b) * (1.0 + 1e-12));
        if a.norm() <= r {
            prop_assert_eq!(&pa, &a);
        }
    }

    #[test]
    fn flat_layout_round_trips(x in state(4, 7, 3.0)) {
        let flat = x.to_flat();
        prop_assert_eq!(&flat[..4], &x.z[..]);
        prop_assert_eq!(OptState::from_flat(4, &flat), x);
    }

    #[test]
    fn penalty_schedules_are_monotone(
        lambda0 in 0.0..10.0f64,
        gap in 0.0..100.0f64,
        slope in 0.0..1.0f64,
        d in 0.0..100.0f64,
        beta0 in 0.01..10.0f64,
        k0 in 1.0..100.0f64,
    ) {
        let steps = StepSchedule::RobbinsMonro { beta0, k0 };
        let linear = PenaltySchedule::Linear { lambda0, slope };
        let adaptive = PenaltySchedule::Adaptive { lambda0, lambda_bar: lambda0 + gap, d };
        for k in 0..200u64 {
            let (b0, b1) = (steps.beta(k), steps.beta(k + 1));
            prop_assert!(b1 <= b0);
            prop_assert!(linear.lambda(k + 1, b1) >= linear.lambda(k, b0));
            let (l0, l1) = (adaptive.lambda(k, b0), adaptive.lambda(k + 1, b1));
            prop_assert!(l1 >= l0);
            prop_assert!(l0 >= lambda0);
            prop_assert!((l1 - lambda0 - gap).abs() <= (l0 - lambda0 - gap).abs());
        }
    }

    #[test]
    fn power_laws_are_fitted_exactly(c in 0.01..100.0f64, p in -3.0..3.0f64, n in 4usize..12) {
        let pts: Vec<(f64, f64)> = (0..n).map(|k| {
            let x = 1.5f64.powi(k as i32 + 1);
            (x, c * x.powf(p))
        }).collect();
        let fit = fit_loglog_slope(&pts).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-9);
        prop_assert!(fit.residual < 1e-9);
    }

    #[test]
    fn welford_merge_is_split_invariant(xs in prop::collection::vec(-1e3..1e3f64, 2..60), cut in 0usize..60) {
        let cut = cut.min(xs.len());
        let mut full = RunningStats::new(1);
        xs.iter().for_each(|x| full.push(&[*x]));
        let (mut a, mut b) = (RunningStats::new(1), RunningStats::new(1));
        xs[..cut].iter().for_each(|x| a.push(&[*x]));
        xs[cut..].iter().for_each(|x| b.push(&[*x]));
        a.merge(&b);
        prop_assert_eq!(a.count(), full.count());
        let scale = 1e3;
        prop_assert!((a.mean()[0] - full.mean()[0]).abs() <= 1e-12 * scale);
        prop_assert!((a.variance()[0] - full.variance()[0]).abs() <= 1e-10 * (scale * scale));
    }
}
