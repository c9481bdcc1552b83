use proptest::prelude::*;
use speechpinn::geometry::AreaFunction;
use speechpinn::params::{PhysicalParams, RunConfig, SmoothingCoefficients};
use speechpinn::pinn::gradcheck::{self, synthetic_lip_pressure, tiny_config, GradcheckOptions};
use speechpinn::pinn::predict::{field, glottal_flow, raw_outputs};
use speechpinn::pinn::{
    compute_losses, initial_model, train, CollocationSet, LossWeights, Physics, PinnModel, Unknown,
};

fn area() -> AreaFunction {
    let pp = PhysicalParams::default();
    let table = [(0.0, 2.0e-4), (0.04, 1.0e-4), (0.08, 5.0e-4), (0.12, 8.0e-4), (pp.l, 4.0e-4)];
    AreaFunction::new(&table, pp.l).unwrap()
}

fn model(unknown: Unknown, seed: u64) -> PinnModel {
    let cfg = RunConfig {
        seed,
        ..tiny_config(seed)
    };
    let pp = PhysicalParams::default();
    PinnModel::new(&cfg, SmoothingCoefficients::default(), pp.l, unknown, 6.0e-3, 900.0).unwrap()
}

#[test]
fn loss_gradient_matches_central_differences() {
    let pp = PhysicalParams::default();
    let start = std::time::Instant::now();
    let rep = gradcheck::run(&pp, &area(), SmoothingCoefficients::default(), &GradcheckOptions::default())
        .unwrap();
    assert!(rep.max_rel_error() < 1e-4, "{}", rep.report());
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn hard_constraints_hold_exactly() {
    let pp = PhysicalParams::default();
    let af = area();
    let series = synthetic_lip_pressure(6.0e-3);
    let ts: Vec<f64> = (0..1000).map(|i| -1.0 + 2.0 * i as f64 / 1000.0).collect();
    for seed in [2, 3, 4] {
        for unknown in [Unknown::Period, Unknown::Pressure] {
            let m = model(unknown, seed);
            let physics = Physics {
                pp: &pp,
                area: &af,
                p_data: Some(&series),
                weights: LossWeights::from_config(&tiny_config(seed), unknown),
            };
            let ug = glottal_flow(&m, &physics, &ts).unwrap();
            let (_, u0) = field(&m, &physics, &vec![0.0; ts.len()], &ts).unwrap();
            assert_eq!(u0, ug);
            if unknown == Unknown::Pressure {
                let (pl, _) = field(&m, &physics, &vec![pp.l; ts.len()], &ts).unwrap();
                for (p, &t) in pl.iter().zip(&ts) {
                    assert_eq!(*p, series.eval_normalized(t)[0]);
                }
            }
        }
    }
}

#[test]
fn outputs_are_exactly_periodic() {
    for seed in 0..4 {
        let m = model(Unknown::Period, seed);
        for x in [-1.0, -0.3, 0.5, 1.0] {
            assert_eq!(raw_outputs(&m, x, -1.0), raw_outputs(&m, x, 1.0));
        }
    }
}

#[test]
fn zero_epochs_return_the_initial_model() {
    let pp = PhysicalParams::default();
    let af = area();
    let cfg = RunConfig {
        epochs: 0,
        ..tiny_config(5)
    };
    let m = initial_model(&cfg, &pp, SmoothingCoefficients::default(), Unknown::Period, Some(6e-3), None)
        .unwrap();
    assert!((m.period - 6e-3 * 1.2).abs() < 1e-15);
    let physics = Physics {
        pp: &pp,
        area: &af,
        p_data: None,
        weights: LossWeights::from_config(&cfg, Unknown::Period),
    };
    let out = train(&cfg, &physics, m.clone(), |_| {}).unwrap();
    assert_eq!(out.model, m);
    assert!(out.history.epochs.is_empty());
}

#[test]
fn forward_mode_ignores_lip_pressure_data() {
    let pp = PhysicalParams::default();
    let af = area();
    let cfg = tiny_config(6);
    let series = synthetic_lip_pressure(6.0e-3);
    let m = model(Unknown::Period, 6);
    let batch = CollocationSet::sample(cfg.n_f, cfg.n_t, cfg.n_r, 1, cfg.seed).full();
    let with = |p_data| {
        let physics = Physics {
            pp: &pp,
            area: &af,
            p_data,
            weights: LossWeights::from_config(&cfg, Unknown::Period),
        };
        compute_losses(&m, &physics, &batch).unwrap()
    };
    assert_eq!(with(None), with(Some(&series)));
}

#[test]
fn inverse_mode_needs_lip_pressure() {
    let pp = PhysicalParams::default();
    let cfg = tiny_config(1);
    let r = initial_model(&cfg, &pp, SmoothingCoefficients::default(), Unknown::Pressure, None, None);
    assert!(r.is_err());
    let series = synthetic_lip_pressure(5.5e-3);
    let m = initial_model(&cfg, &pp, SmoothingCoefficients::default(), Unknown::Pressure, None, Some(&series))
        .unwrap();
    assert_eq!(m.period, 5.5e-3);
    assert!((m.p_s - pp.p_s * 1.2).abs() < 1e-9);
}

#[test]
fn training_is_reproducible() {
    let pp = PhysicalParams::default();
    let af = area();
    let cfg = RunConfig {
        epochs: 3,
        minibatches: 2,
        ..tiny_config(8)
    };
    let physics = Physics {
        pp: &pp,
        area: &af,
        p_data: None,
        weights: LossWeights::from_config(&cfg, Unknown::Period),
    };
    let run = || {
        let m = initial_model(&cfg, &pp, SmoothingCoefficients::default(), Unknown::Period, Some(6e-3), None)
            .unwrap();
        train(&cfg, &physics, m, |_| {}).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.model, b.model);
    assert_eq!(a.history, b.history);
    assert_eq!(a.history.epochs.len(), 3);
    assert_ne!(a.model.period, 6e-3 * 1.2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn loss_components_are_non_negative(seed in 0u64..1000, inverse in any::<bool>()) {
        let pp = PhysicalParams::default();
        let af = area();
        let unknown = if inverse { Unknown::Pressure } else { Unknown::Period };
        let cfg = tiny_config(seed);
        let series = synthetic_lip_pressure(6.0e-3);
        let physics = Physics {
            pp: &pp,
            area: &af,
            p_data: Some(&series),
            weights: LossWeights::from_config(&cfg, unknown),
        };
        let batch = CollocationSet::sample(cfg.n_f, cfg.n_t, cfg.n_r, 1, seed).full();
        let l = compute_losses(&model(unknown, seed), &physics, &batch).unwrap();
        for v in [l.fold1, l.fold2, l.tract1, l.tract2, l.radiation, l.anchor, l.total] {
            prop_assert!(v >= 0.0 && v.is_finite());
        }
    }

    #[test]
    fn periodicity_holds_for_any_model(seed in 0u64..10_000, x in -1.0f64..1.0) {
        let m = model(Unknown::Pressure, seed);
        prop_assert_eq!(raw_outputs(&m, x, -1.0), raw_outputs(&m, x, 1.0));
    }

    #[test]
    fn checkpoints_round_trip(seed in 0u64..10_000) {
        let m = model(Unknown::Period, seed);
        let text = speechpinn::pinn::checkpoint::to_text(&m);
        prop_assert_eq!(speechpinn::pinn::checkpoint::from_text(&text).unwrap(), m);
    }
}
