use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stepnet::field::LinearField;
use stepnet::integrators::integrate_rk4;
use stepnet::objective::Objective;
use stepnet::training::{train, train_multi, TrainConfig};
use stepnet::{Error, TimeSeries, VectorField};

fn rotation_data() -> TimeSeries {
    let a = LinearField::new(2, vec![0.0, 1.0, -1.0, 0.0]);
    integrate_rk4(&a, &[1.0, 0.0], 0.01, 500).unwrap()
}

#[test]
fn linear_rotation_field_is_recovered() {
    let ts = rotation_data();
    let config = TrainConfig::new(2).with_architecture(1, 64).with_iters(20_000).with_seed(3);
    let (model, report) = train(&config, &ts).unwrap();
    assert!(report.final_loss < 1e-6, "loss {}", report.final_loss);

    // Convex combinations of nearby samples stay inside the sampled hull
    // without collapsing toward the origin, where |Ax| vanishes.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let i = rng.gen_range(0..ts.len());
        let j = (i + rng.gen_range(0..50)).min(ts.len() - 1);
        let lambda: f64 = rng.gen();
        let x: Vec<f64> = ts.row(i).iter().zip(ts.row(j)).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let exact = [x[1], -x[0]];
        let learned = model.eval_vec(&x);
        let err = (learned[0] - exact[0]).hypot(learned[1] - exact[1]) / exact[0].hypot(exact[1]);
        worst = worst.max(err);
    }
    assert!(worst < 5e-2, "worst relative field error {worst}");
}

#[test]
fn single_list_matches_train() {
    let ts = rotation_data().truncate(120).unwrap();
    let config = TrainConfig::new(2).with_architecture(1, 16).with_iters(300).with_seed(5);
    let (a, ra) = train(&config, &ts).unwrap();
    let (b, rb) = train_multi(&config, std::slice::from_ref(&ts)).unwrap();
    assert_eq!(a.parameters(), b.parameters());
    assert_eq!(ra.loss_history, rb.loss_history);
}

#[test]
fn duplicated_trajectory_has_same_minimizer() {
    let ts = rotation_data().truncate(200).unwrap();
    let pair = [ts.clone(), ts.clone()];
    let scheme = stepnet::scheme_coefficients(stepnet::Family::AdamsMoulton, 2).unwrap();
    // Duplicating the data doubles loss and gradient everywhere.
    for seed in 0..4 {
        let model = stepnet::mlp_init(&[2, 12, 2], seed).unwrap();
        let mut g1 = vec![0.0; model.parameter_count()];
        let mut g2 = g1.clone();
        let l1 = Objective::new(&scheme, std::slice::from_ref(&ts), model.layer_dims())
            .unwrap()
            .loss_and_gradient(&model, &mut g1);
        let l2 = Objective::new(&scheme, &pair, model.layer_dims())
            .unwrap()
            .loss_and_gradient(&model, &mut g2);
        assert!((l2 - 2.0 * l1).abs() <= 1e-14 * l2);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((b - 2.0 * a).abs() <= 1e-12 * (1.0 + b.abs()), "{b} vs 2*{a}");
        }
    }

    // Adam only sees the scale through its epsilon, so trained fields stay close.
    let config = TrainConfig::new(2).with_architecture(1, 16).with_iters(3000).with_seed(8);
    let (one, _) = train_multi(&config, std::slice::from_ref(&ts)).unwrap();
    let (two, _) = train_multi(&config, &pair).unwrap();
    let mut worst: f64 = 0.0;
    for n in (0..ts.len()).step_by(7) {
        let (a, b) = (one.eval_vec(ts.row(n)), two.eval_vec(ts.row(n)));
        worst = worst.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
    }
    assert!(worst < 1e-4, "max field difference {worst}");
}

#[test]
fn windows_never_span_trajectories() {
    let a = rotation_data().truncate(60).unwrap();
    // A sentinel trajectory far from the first: a window mixing the two
    // would add an enormous residual.
    let shifted: Vec<f64> = a.states().iter().map(|v| v + 1e3).collect();
    let b = TimeSeries::new(0.0, a.dt(), 2, shifted).unwrap();
    let model = stepnet::mlp_init(&[2, 10, 2], 1).unwrap();
    for steps in 1..=3 {
        let scheme = stepnet::scheme_coefficients(stepnet::Family::Bdf, steps).unwrap();
        let dims = model.layer_dims().to_vec();
        let pair = [a.clone(), b.clone()];
        let joint = Objective::new(&scheme, &pair, &dims).unwrap().loss(&model);
        let sa = Objective::new(&scheme, std::slice::from_ref(&a), &dims).unwrap().loss(&model);
        let sb = Objective::new(&scheme, std::slice::from_ref(&b), &dims).unwrap().loss(&model);
        assert!((joint - (sa + sb)).abs() <= 1e-12 * joint, "M={steps}: {joint} vs {}", sa + sb);
    }
}

#[test]
fn mixed_inputs_are_rejected() {
    let a = rotation_data().truncate(50).unwrap();
    let b = TimeSeries::new(0.0, 0.01, 3, vec![0.0; 30]).unwrap();
    let c = TimeSeries::new(0.0, 0.02, 2, vec![0.0; 20]).unwrap();
    let config = TrainConfig::new(2).with_iters(2);
    assert!(matches!(train_multi(&config, &[a.clone(), b]), Err(Error::MixedDims { .. })));
    assert!(matches!(train_multi(&config, &[a, c]), Err(Error::MixedDims { .. })));
    let short = TimeSeries::new(0.0, 0.01, 2, vec![0.0; 4]).unwrap();
    let config = config.with_scheme(stepnet::Family::AdamsBashforth, 3).unwrap();
    assert!(matches!(train(&config, &short), Err(Error::InsufficientSamples { .. })));
}
