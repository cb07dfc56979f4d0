use opinet::approx::{ApproxError, ApproxOptions, RowClass, auto_p, infer_problem3, partial_exactness_check};
use opinet::dynamics::{Regime, simulate, simulate_as};
use opinet::exact::{
    ExactOptions, InferenceError, SourceStatus, Verdict, check_solvability_ground_truth, infer_problem1,
    infer_problem2, source_residual,
};
use opinet::measurement::build_pq;
use opinet::network::validate_network;
use opinet::real::{Precision, from_f64_vec, real, to_f64};
use opinet::scenario::toy12;
use opinet::synth;

const FIXTURE: &str = include_str!("data/toy12_displayed_pq.txt");

fn displayed() -> Vec<Vec<f64>> {
    FIXTURE
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
#[allow(clippy::needless_range_loop)]
fn toy12_matrices_match_displayed_values() {
    let s = toy12();
    let t = simulate(&s.network, s.file.x0.as_ref().unwrap(), 13).unwrap();
    let pair = build_pq(&t, 0, 11, Precision::DoubleDouble.default_rank_tol()).unwrap();
    let rows = displayed();
    assert_eq!(rows.len(), 24);
    for i in 0..12 {
        for j in 0..12 {
            let p = (to_f64(pair.p[(i, j)]) * 1e4).round() / 1e4;
            let q = (to_f64(pair.q[(i, j)]) * 1e4).round() / 1e4;
            assert!((p - rows[i][j]).abs() < 5e-5, "P[{i}][{j}] = {p}, shown {}", rows[i][j]);
            assert!(
                (q - rows[12 + i][j]).abs() < 5e-5,
                "Q[{i}][{j}] = {q}, shown {}",
                rows[12 + i][j]
            );
        }
    }
    assert_eq!(pair.rank, 12);
}

#[test]
fn toy12_exact_recovery() {
    let s = toy12();
    let t = simulate(&s.network, s.file.x0.as_ref().unwrap(), 13).unwrap();
    let r = infer_problem1(&t, &ExactOptions::default()).unwrap();
    let gamma = [0.3, 0.2, 0.1, 0.1];
    let beta = [0.5, 0.4, 0.3, 0.2];
    for i in 0..4 {
        assert!((to_f64(r.gamma_hat[i].unwrap()) - gamma[i]).abs() < 1e-12);
        assert!((to_f64(r.beta_hat[i].unwrap()) - beta[i]).abs() < 1e-12);
    }
    assert_eq!(r.inferred_followers, vec![0, 1, 2, 3]);
    assert_eq!(r.inferred_edges.len(), 18);
    assert_eq!(r.solvability.verdict, Verdict::Solvable);
}

#[test]
fn short_record_is_reported_rank_deficient() {
    let s = toy12();
    let t = simulate(&s.network, s.file.x0.as_ref().unwrap(), 8).unwrap();
    match infer_problem1(&t, &ExactOptions::default()) {
        Err(InferenceError::NotSolvable(report)) => {
            assert_eq!(report.verdict, Verdict::RankDeficient);
            assert!(report.rank_p < 12);
            assert!(report.diagnostic().is_some());
        }
        other => panic!("expected NotSolvable, got {other:?}"),
    }
}

#[test]
fn unbiased_network_converges_to_steady_state() {
    let sy = synth::no_source(6, 3);
    let enc = opinet::network::build_encoded(&sy.network, &from_f64_vec(&sy.x0)).unwrap();
    let xs = opinet::dynamics::steady_state(&enc, &from_f64_vec(&sy.x0)).unwrap();
    assert!(xs.iter().all(|v| to_f64(*v).is_finite()));
    let t = simulate(&sy.network, &sy.x0, 30).unwrap();
    let last = t
        .state(30)
        .iter()
        .zip(&xs)
        .fold(0.0f64, |m, (a, b)| m.max(to_f64((*a - *b).abs())));
    assert!(last < 1e-3);
}

#[test]
fn zero_innate_follower_is_unrecoverable_not_zero() {
    let s = toy12();
    let mut x0 = s.file.x0.clone().unwrap();
    x0[0] = 0.0;
    let t = simulate(&s.network, &x0, 13).unwrap();
    assert!(!check_solvability_ground_truth(&s.network, t.x0(), 1e-40).unwrap());
    match infer_problem1(&t, &ExactOptions::default()) {
        Ok(r) => {
            assert_eq!(r.gamma_hat[0], None);
            assert_eq!(r.beta_hat[0], None);
            assert!(matches!(
                r.solvability.verdict,
                Verdict::ZeroInnateFollowers(_) | Verdict::RankDeficient
            ));
        }
        Err(e) => assert!(
            matches!(e, InferenceError::NotSolvable(_) | InferenceError::ZeroInnate(_)),
            "{e}"
        ),
    }
}

#[test]
fn ground_truth_solvability_agrees_with_data() {
    for seed in 0..10 {
        let sy = synth::problem1(9, seed);
        let t = simulate(&sy.network, &sy.x0, 22).unwrap();
        let truth = check_solvability_ground_truth(&sy.network, t.x0(), 1e-40).unwrap();
        assert_eq!(
            truth,
            infer_problem1(&t, &ExactOptions::default()).is_ok(),
            "seed {seed}"
        );
    }
}

#[test]
fn problem2_recovers_topology_and_single_source_weight() {
    let sy = synth::problem2(10, 1, 11);
    let t = simulate(&sy.network, &sy.x0, 24).unwrap();
    let r = infer_problem2(&t, &ExactOptions::default()).unwrap();
    assert!(to_f64(r.diag_residual) < 1e-20);
    for i in sy.network.followers() {
        let s = source_residual(&t, &r.w_hat, i).unwrap();
        let SourceStatus::Single { weight } = s.status else {
            panic!("single source expected")
        };
        let truth = match sy.network.bias(i).unwrap() {
            opinet::network::BiasModel::Fixed { weight } => *weight,
            _ => unreachable!(),
        };
        assert!((weight - truth).abs() < 1e-12);
        assert!(s.spread < 1e-12);
    }
}

#[test]
fn several_sources_are_not_separable() {
    let sy = synth::problem2(10, 2, 4);
    let t = simulate(&sy.network, &sy.x0, 24).unwrap();
    let r = infer_problem2(&t, &ExactOptions::default()).unwrap();
    let i = sy.network.followers()[0];
    assert_eq!(
        source_residual(&t, &r.w_hat, i).unwrap().status,
        SourceStatus::NonUnique
    );
}

#[test]
fn unbiased_data_gives_exact_rows_everywhere() {
    let sy = synth::no_source(8, 1);
    let t = simulate(&sy.network, &sy.x0, 30).unwrap();
    let r = infer_problem3(
        &t,
        &ApproxOptions {
            p: Some(20),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(r.follower_flags.iter().all(|f| *f == RowClass::NonFollower));
    assert!(
        partial_exactness_check(&r, &sy.network)
            .iter()
            .all(|e| e.max_error < 1e-8)
    );
}

#[test]
fn piecewise_data_agrees_across_windows() {
    // With u = 0 the bias term is linear in the state, so every window
    // solves to the encoded matrix and no row disagrees.
    let sy = synth::problem1(8, 2);
    let t = simulate_as(&sy.network, &sy.x0, 30, Regime::ProblemIII).unwrap();
    let r = infer_problem3(
        &t,
        &ApproxOptions {
            p: Some(20),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(r.follower_flags.iter().all(|f| *f == RowClass::NonFollower));
    for i in 0..8 {
        let (_, gamma) = sy.network.effective_piecewise(i).unwrap_or((real(0.0), real(0.0)));
        assert!(to_f64((r.raw[(i, i)] - gamma * real(sy.x0[i])).abs()) < 1e-20);
    }
    assert!(
        partial_exactness_check(&r, &sy.network)
            .iter()
            .all(|e| e.max_error < 1e-12)
    );
}

#[test]
fn single_window_leaves_rows_unclassified() {
    let sy = synth::problem3(6, 1);
    let t = simulate(&sy.network, &sy.x0, 30).unwrap();
    let r = infer_problem3(
        &t,
        &ApproxOptions {
            m_max: 1,
            p: Some(20),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(r.follower_flags.iter().all(|f| *f == RowClass::Unknown));
    assert!(r.agreement_scores.iter().all(Option::is_none));
}

#[test]
fn constant_trajectory_has_no_windows() {
    let sy = synth::no_source(4, 9);
    let states = vec![from_f64_vec(&sy.x0); 20];
    let t = opinet::dynamics::Trajectory::from_states(states, Precision::DoubleDouble);
    let err = infer_problem3(
        &t,
        &ApproxOptions {
            p: Some(10),
            ..Default::default()
        },
    )
    .unwrap_err();
    assert!(matches!(err, ApproxError::EmptyWindowSet { .. }));
}

#[test]
fn window_shorter_than_network_is_rejected() {
    let sy = synth::problem3(8, 1);
    let t = simulate(&sy.network, &sy.x0, 30).unwrap();
    let err = infer_problem3(
        &t,
        &ApproxOptions {
            p: Some(9),
            ..Default::default()
        },
    )
    .unwrap_err();
    assert_eq!(err, ApproxError::WindowTooShort { p: 9, needed: 10 });
}

#[test]
fn estimates_are_clamped_non_negative() {
    let sy = synth::problem3(10, 7);
    let t = simulate(&sy.network, &sy.x0, 40).unwrap();
    let r = infer_problem3(
        &t,
        &ApproxOptions {
            p: Some(30),
            ..Default::default()
        },
    )
    .unwrap();
    for i in 0..10 {
        assert_eq!(r.w_breve[(i, i)], real(0.0));
        for j in 0..10 {
            assert!(r.w_breve[(i, j)] >= real(0.0));
        }
    }
}

#[test]
fn auto_p_stays_in_range() {
    let sy = synth::problem3(6, 2);
    let t = simulate(&sy.network, &sy.x0, 200).unwrap();
    let p = auto_p(&t, 2);
    assert!((8..=198).contains(&p));
    assert!(t.step_size(p) < 1e-6 || p == 198);
    let short = simulate(&sy.network, &sy.x0, 12).unwrap();
    assert_eq!(auto_p(&short, 2), 10);
}

#[test]
fn invalid_spec_lists_every_problem() {
    let mut spec = toy12().network.spec().clone();
    spec.weights[0][0] = 0.1;
    spec.weights[1][0] = -0.5;
    let errs = validate_network(spec).unwrap_err();
    assert!(errs.len() >= 2, "{errs:?}");
}

#[test]
fn diagonal_check_flags_piecewise_followers() {
    let sy = synth::problem1(8, 2);
    let t = simulate_as(&sy.network, &sy.x0, 30, Regime::ProblemIII).unwrap();
    let opts = ApproxOptions {
        p: Some(20),
        diagonal_check: true,
        ..Default::default()
    };
    let r = infer_problem3(&t, &opts).unwrap();
    assert_eq!(r.followers(), sy.network.followers());
}
