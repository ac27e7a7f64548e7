mod common;

use common::{duopoly, random_certified, random_scaled_start, triple};
use dyngame::game::{BoxSet, DeviationMode, Layout, NashPoint};
use dyngame::sim::{
    embed_discrete, embed_ode, observed_order, realize_expectation_d, realize_expectation_series,
    reconstruct_expectation, settled_history, simulate_discrete, simulate_fde, simulate_layered,
    simulate_ode, DelaySignal, DeviationSystem, DirectionSignal, DiscreteModel, ExpectationRule,
    GridSteps, InitialHistory, LayerAssignment, OdeModel, Schedule, SimConfig, Tap, ThetaSignal,
    TrajectoryGrid, UncertaintyRealization,
};
use dyngame::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scalar_grid(history: &[f64], h: f64, window: usize) -> TrajectoryGrid<f64> {
    let rows: Vec<Vec<f64>> = history.iter().map(|&v| vec![v]).collect();
    TrajectoryGrid::with_history(
        h,
        GridSteps {
            r: 1,
            window,
            horizon: 0,
        },
        Layout::scalar(1),
        DeviationMode::Raw,
        vec![0.0],
        vec![1.0],
        &rows,
    )
}

#[test]
fn window_sup_examples() {
    let c = scalar_grid(&[0.3; 9], 0.25, 8);
    assert_eq!(c.window_sup_at(0, 0.0, 2.0, 1.0).unwrap(), 0.3);
    // x(τ) = τ/T on [-T, 0], T = 2, r = 0.5
    let ramp: Vec<f64> = (0..=8).map(|k| (k as f64 * 0.25 - 2.0) / 2.0).collect();
    let g = scalar_grid(&ramp, 0.25, 8);
    assert_eq!(g.window_sup_at(0, 0.0, 2.0, 0.5).unwrap(), 1.0);
    assert_eq!(
        scalar_grid(&[0.0; 9], 0.25, 8)
            .window_sup_at(0, 0.0, 2.0, 0.5)
            .unwrap(),
        0.0
    );
    assert!(matches!(
        g.window_sup_at(0, 0.0, 2.5, 0.5),
        Err(Error::WindowUnderflow { .. })
    ));
}

#[test]
fn realization_examples() {
    let set = BoxSet::interval(0.0, 5.0).unwrap();
    assert_eq!(
        realize_expectation_d(&[3.0], &[3.0], 0.0, &set).unwrap(),
        vec![0.0]
    );
    assert_eq!(
        realize_expectation_d(&[4.0], &[3.0], 2.0, &set).unwrap(),
        vec![(4.0 - 3.0) / 2.0]
    );
    assert_eq!(
        realize_expectation_d(&[0.0], &[3.0], 3.5, &set).unwrap(),
        vec![-1.0]
    );
    let err = realize_expectation_series(&[vec![3.0], vec![4.5]], &[1.0, 1.0], &[3.0], &set, 0, 1)
        .unwrap_err();
    assert!(matches!(err, Error::ConsistencyViolation { node: 1, .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn consistency_round_trip(
        dims in 1usize..=3,
        raw in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64), 3),
        s in 0.0..4.0f64,
    ) {
        let lo = vec![0.0; dims];
        let hi = vec![5.0; dims];
        let set = BoxSet::new(lo, hi).unwrap();
        let q_star: Vec<f64> = raw[..dims].iter().map(|v| 5.0 * v.0).collect();
        // a point of S within distance s of q*
        let dir: Vec<f64> = raw[..dims].iter().map(|v| v.1 - 0.5).collect();
        let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let exp = set.project(&q_star.iter().zip(&dir).map(|(q, d)| q + d / len * s * raw[0].2).collect::<Vec<_>>());
        let d = realize_expectation_d(&exp, &q_star, s, &set).unwrap();
        prop_assert!(d.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1.0 + 1e-15);
        let back = reconstruct_expectation(&d, &q_star, s, &set);
        prop_assert!(back.iter().zip(&exp).all(|(a, b)| (a - b).abs() <= 1e-12));
    }
}

fn every_kind(n: usize, seed: u64) -> Vec<UncertaintyRealization<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rule = ExpectationRule::WeightedDelay {
        blend: rng.gen_range(0.0..=1.0),
        taps: vec![
            Tap {
                delay: 1.0,
                weight: 0.25,
            },
            Tap {
                delay: 1.5,
                weight: 0.75,
            },
        ],
    };
    let kernel = ExpectationRule::Kernel {
        blend: 1.0,
        knots: vec![(1.0, 0.0), (1.5, 2.0), (2.0, 0.0)],
    };
    let theta = rng.gen_range(0.0..0.9);
    vec![
        UncertaintyRealization::seeded(n, theta),
        UncertaintyRealization::uniform(
            n,
            theta,
            ThetaSignal::Seeded,
            DelaySignal::Seeded,
            DirectionSignal::AdversarialSign,
        ),
        UncertaintyRealization::uniform(
            n,
            theta,
            ThetaSignal::Constant {
                values: vec![theta; n],
            },
            DelaySignal::Constant { steps: vec![4; n] },
            DirectionSignal::Constant { value: vec![-1.0] },
        ),
        UncertaintyRealization::uniform(
            n,
            theta,
            ThetaSignal::Seeded,
            DelaySignal::Seeded,
            DirectionSignal::Rule { rule },
        ),
        UncertaintyRealization::uniform(
            n,
            theta,
            ThetaSignal::Seeded,
            DelaySignal::Seeded,
            DirectionSignal::Rule { rule: kernel },
        ),
    ]
}

fn short(seed: u64) -> SimConfig<f64> {
    SimConfig {
        horizon: 40.0,
        seed,
        ..SimConfig::default()
    }
}

#[test]
fn equilibrium_stays_put() {
    for seed in 0..10 {
        let (game, nash) = random_certified(seed, 2.0);
        for mode in [DeviationMode::Scaled, DeviationMode::Raw] {
            let system = DeviationSystem::new(&game, &nash, mode).unwrap();
            for real in every_kind(game.n(), seed) {
                let traj = simulate_fde(
                    &system,
                    &InitialHistory::zero(game.n()),
                    &real,
                    &short(seed),
                )
                .unwrap();
                assert!((0..traj.nodes()).all(|k| traj.x(k).iter().all(|&v| v == 0.0)));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    // The stepper itself asserts the per-step bound and the range at every node.
    #[test]
    fn ranges_and_step_bound_hold(seed in 0u64..1_000_000, cap in 0.5..3.0f64) {
        let (game, nash) = random_certified(seed, cap);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let system = DeviationSystem::new(&game, &nash, DeviationMode::Scaled).unwrap();
        let start = random_scaled_start(&mut rng, &game, &nash);
        let eq = nash.cournot.clone().unwrap();
        for real in every_kind(game.n(), seed) {
            let traj = simulate_fde(&system, &InitialHistory::Constant(start.clone()), &real, &short(seed)).unwrap();
            for k in 0..traj.nodes() {
                for (i, &x) in traj.x(k).iter().enumerate() {
                    prop_assert!(x >= -eq.l[i] - 1e-12 && x <= 1.0 - eq.l[i] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn seeds_determine_runs(seed in 0u64..1_000_000) {
        let (game, nash) = random_certified(seed, 0.9);
        let system = DeviationSystem::new(&game, &nash, DeviationMode::Scaled).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = InitialHistory::Constant(random_scaled_start(&mut rng, &game, &nash));
        let real = UncertaintyRealization::seeded(game.n(), 0.5);
        let a = simulate_fde(&system, &init, &real, &short(seed)).unwrap();
        let b = simulate_fde(&system, &init, &real, &short(seed)).unwrap();
        prop_assert_eq!(&a, &b);
        let single = LayerAssignment::single(game.n());
        let c = simulate_layered(&system, &init, &real, &single, &short(seed)).unwrap();
        prop_assert_eq!(&a, &c);
    }

    #[test]
    fn discrete_embedding_is_exact(seed in 0u64..1_000_000, p in 1usize..=3, lags in 0usize..=2) {
        let (game, nash) = random_certified(seed, 3.0);
        let n = game.n();
        let nash = NashPoint::at(&game, nash.q_star.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = 15;
        let weights = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let raw: Vec<f64> = (0..=lags).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut w: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let rest: f64 = w[1..].iter().sum();
            w[0] = 1.0 - rest;
            w
        };
        let model = DiscreteModel {
            lags,
            theta: Schedule::Steps((0..steps).map(|_| (0..n).map(|_| rng.gen_range(0.0..0.9)).collect()).collect()),
            blend: Schedule::Steps((0..steps).map(|_| (0..n).map(|_| (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect()).collect()).collect()),
            weights: Schedule::Constant((0..n).map(|_| (0..n).map(|_| weights(&mut rng)).collect()).collect()),
        };
        let history: Vec<Vec<f64>> =
            (0..=lags).map(|_| (0..n).map(|i| rng.gen_range(0.0..=game.capacity(i))).collect()).collect();
        let system = DeviationSystem::new(&game, &nash, DeviationMode::Scaled).unwrap();
        let emb = embed_discrete(&model, &system, &history, steps, p).unwrap();
        prop_assert!(emb.max_discrepancy <= 1e-12, "discrepancy {}", emb.max_discrepancy);
    }
}

#[test]
fn stable_duopoly_decays() {
    let game = duopoly();
    let nash = NashPoint::at(&game, vec![3.0, 3.0]).unwrap();
    let system = DeviationSystem::new(&game, &nash, DeviationMode::Scaled).unwrap();
    let real = UncertaintyRealization::uniform(
        2,
        0.5,
        ThetaSignal::Seeded,
        DelaySignal::Seeded,
        DirectionSignal::AdversarialSign,
    );
    let traj = simulate_fde(
        &system,
        &InitialHistory::Constant(vec![0.4, -0.6]),
        &real,
        &SimConfig::default(),
    )
    .unwrap();
    let metric = traj.metric_series();
    assert!(metric.windows(2).all(|w| w[1] <= w[0]));
    assert!(metric.last().unwrap() < &1e-6);
}

#[test]
fn counterexample_trajectory_is_constant() {
    let game = triple();
    let nash = NashPoint::at(&game, vec![4.0 / 3.0, 4.0 / 3.0]).unwrap();
    let system = DeviationSystem::new(&game, &nash, DeviationMode::Scaled).unwrap();
    let y: [f64; 2] = [(0.0 - 4.0 / 3.0) / 5.0, (4.0 - 4.0 / 3.0) / 5.0];
    let real = UncertaintyRealization::uniform(
        2,
        0.0,
        ThetaSignal::Constant {
            values: vec![0.0, 0.0],
        },
        DelaySignal::Seeded,
        DirectionSignal::Constant {
            value: vec![y[1].signum()],
        },
    )
    .with_pair(
        1,
        0,
        DirectionSignal::Constant {
            value: vec![y[0].signum()],
        },
    );
    let traj = simulate_fde(
        &system,
        &InitialHistory::Constant(y.to_vec()),
        &real,
        &SimConfig::default(),
    )
    .unwrap();
    assert!(traj.max_drift() <= 1e-12);
}

#[test]
fn naive_discrete_dynamics() {
    let game = duopoly();
    let path = simulate_discrete(
        &DiscreteModel::naive(2),
        &game,
        &[3.0, 3.0],
        &[vec![0.0, 0.0]],
        50,
    )
    .unwrap();
    // q(k+1) = 4.5 - q(k)/2 on the symmetric diagonal
    let mut q = 0.0f64;
    for row in path.iter().skip(1).take(3) {
        q = 4.5 - 0.5 * q;
        assert_eq!(row, &vec![q, q]);
    }
    assert!((path[50][0] - 3.0).abs() < 1e-12);
    let nash = NashPoint::at(&game, vec![3.0, 3.0]).unwrap();
    let system = DeviationSystem::new(&game, &nash, DeviationMode::Scaled).unwrap();
    let emb = embed_discrete(&DiscreteModel::naive(2), &system, &[vec![0.0, 0.0]], 50, 4).unwrap();
    assert!(emb.max_discrepancy <= 1e-12);
}

#[test]
fn ode_examples() {
    let model = |mu: f64, delay: f64| {
        let rule = ExpectationRule::WeightedDelay {
            blend: 1.0,
            taps: vec![Tap { delay, weight: 1.0 }],
        };
        OdeModel {
            rates: vec![mu, mu],
            rules: vec![vec![None, Some(rule.clone())], vec![Some(rule), None]],
        }
    };
    assert!((model(1.0, 0.5).theta_bound(0.5) - 0.6065306597126334).abs() < 1e-12);
    assert!(matches!(
        model(0.0, 0.5).validate(2),
        Err(Error::InvalidArgument(_))
    ));

    let game = duopoly();
    let nash = NashPoint::at(&game, vec![3.0, 3.0]).unwrap();
    let system = DeviationSystem::new(&game, &nash, DeviationMode::Scaled).unwrap();
    let r = 0.5;
    for start in [vec![0.4, -0.5], vec![0.4, 0.4], vec![-0.6, 0.2]] {
        let (mut hs, mut errs) = (Vec::new(), Vec::new());
        for p in [4, 8, 16] {
            let h = r / p as f64;
            let config = SimConfig::new(h, r, 1.0, 8.0, 0);
            let start = InitialHistory::Constant(start.clone());
            let history = settled_history(&model(1.0, 0.5), &system, &start, &config, 2.0).unwrap();
            let emb = embed_ode(&model(1.0, 0.5), &system, &history, &config).unwrap();
            assert_eq!(emb.theta_bound, (-0.5f64).exp());
            assert!(
                emb.max_discrepancy <= 0.1 * h,
                "{} at h = {h}",
                emb.max_discrepancy
            );
            hs.push(h);
            errs.push(emb.max_discrepancy);
            let plain = simulate_ode(&model(1.0, 0.5), &system, &history, &config).unwrap();
            assert_eq!(plain, emb.ode);
        }
        assert!(observed_order(&hs, &errs).unwrap() >= 0.9, "{errs:?}");
    }
}

#[test]
fn layered_runs() {
    let game = duopoly();
    let nash = NashPoint::at(&game, vec![3.0, 3.0]).unwrap();
    let system = DeviationSystem::new(&game, &nash, DeviationMode::Scaled).unwrap();
    let layers = LayerAssignment::from_labels(&[vec![1], vec![2]], 2).unwrap();
    for seed in 0..5 {
        let traj = simulate_layered(
            &system,
            &InitialHistory::Constant(vec![0.4, -0.6]),
            &UncertaintyRealization::seeded(2, 0.5),
            &layers,
            &SimConfig {
                seed,
                ..SimConfig::default()
            },
        )
        .unwrap();
        assert!(traj.metric_series().last().unwrap() < &1e-6);
    }
    assert!(matches!(
        LayerAssignment::from_labels(&[vec![1, 2], vec![2]], 2),
        Err(Error::Partition(_))
    ));
}

#[test]
fn csv_row_count() {
    let game = duopoly();
    let nash = NashPoint::at(&game, vec![3.0, 3.0]).unwrap();
    let system = DeviationSystem::new(&game, &nash, DeviationMode::Scaled).unwrap();
    let config = SimConfig::default();
    let traj = simulate_fde(
        &system,
        &InitialHistory::zero(2),
        &UncertaintyRealization::seeded(2, 0.5),
        &config,
    )
    .unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf, None).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows = text.lines().count() - 1;
    assert_eq!(
        rows,
        (config.horizon / config.h) as usize + (config.window / config.h) as usize + 1
    );
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[3].parse::<f64>().unwrap(), 0.0);
        assert_eq!(cells[4].parse::<f64>().unwrap(), 0.0);
    }
}
