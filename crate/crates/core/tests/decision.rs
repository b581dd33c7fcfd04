//! Worth-waiting verdicts against the delay they predict.

use pollinglab_core::decision::{consistent, delay_at, worth_waiting, CONSISTENCY};
use pollinglab_core::{
    find_waiting_contrast, optimize_timers, worth_waiting_symmetric, worth_waiting_t2_zero,
    OptimizerOptions, PollingModel, Scenario, ServiceSpec, StationSpec, Strategy, SwitchoverSpec,
    TimerSearch, Tolerances, ValidatedModel,
};

fn two(lambda: [f64; 2], sw: SwitchoverSpec) -> ValidatedModel {
    let st = |lambda: f64| StationSpec {
        lambda,
        service: ServiceSpec::Exponential { rate: 1.0 },
        switchover: sw.clone(),
        timer: 0.0,
    };
    PollingModel::new(vec![st(lambda[0]), st(lambda[1])], Strategy::Exhaustive)
        .validate()
        .unwrap()
}

fn det(v: f64) -> SwitchoverSpec {
    SwitchoverSpec::Deterministic { value: v }
}

fn expo(rate: f64) -> SwitchoverSpec {
    SwitchoverSpec::Exponential { rate }
}

fn spread(d: f64) -> SwitchoverSpec {
    SwitchoverSpec::Mixture {
        points: vec![(0.0, 0.5), (2.0 * d, 0.5)],
    }
}

const CRITERIA: [Strategy; 3] = [
    Strategy::MinimumSojourn,
    Strategy::IdleSojourn,
    Strategy::EmptyArrivalTimer,
];

fn t2_zero_fixtures() -> Vec<ValidatedModel> {
    vec![
        two([0.3, 0.2], det(0.5)),
        two([0.2, 0.3], det(0.5)),
        two([0.3, 0.2], expo(2.0)),
        two([0.1, 0.15], spread(0.5)),
        two([0.25, 0.3], spread(0.5)),
        two(
            [0.4, 0.1],
            SwitchoverSpec::Gamma {
                shape: 0.5,
                rate: 1.0,
            },
        ),
    ]
}

#[test]
fn strategies_ii_and_iv_share_their_criteria() {
    for m in t2_zero_fixtures() {
        let a = worth_waiting_t2_zero(&m, Strategy::MinimumSojourn).unwrap();
        let b = worth_waiting_t2_zero(&m, Strategy::EmptyArrivalTimer).unwrap();
        assert_eq!(a.criterion_value, b.criterion_value);
    }
    for sw in [det(1.0), expo(1.0), spread(1.0)] {
        let m = two([0.3, 0.3], sw);
        let a = worth_waiting_symmetric(&m, Strategy::MinimumSojourn).unwrap();
        let b = worth_waiting_symmetric(&m, Strategy::EmptyArrivalTimer).unwrap();
        assert_eq!(a.criterion_value, b.criterion_value);
    }
}

/// Sign of `D̄(0) - D̄(h)` for a small timer `h` on the scenario's axis.
fn small_timer_gain(m: &ValidatedModel, strategy: Strategy, scenario: Scenario) -> f64 {
    let tol = Tolerances::default();
    let model = m.with_strategy(strategy).unwrap();
    let h = 1e-3;
    let timers = match scenario {
        Scenario::T2Zero => [h, 0.0],
        Scenario::SymmetricEqualTimers => [h, h],
    };
    delay_at(&model, &[0.0, 0.0], &tol).unwrap() - delay_at(&model, &timers, &tol).unwrap()
}

#[test]
fn verdicts_predict_the_effect_of_a_small_timer() {
    let mut cases: Vec<(ValidatedModel, Scenario)> = t2_zero_fixtures()
        .into_iter()
        .map(|m| (m, Scenario::T2Zero))
        .collect();
    for sw in [expo(1.0), spread(1.0), spread(0.3)] {
        for rho in [0.1, 0.3] {
            cases.push((two([rho, rho], sw.clone()), Scenario::SymmetricEqualTimers));
        }
    }
    let mut checked = 0;
    for (m, scenario) in &cases {
        for s in CRITERIA {
            let v = worth_waiting(m, s, *scenario).unwrap();
            if v.criterion_value.abs() < 1e-3 {
                continue;
            }
            let gain = small_timer_gain(m, s, *scenario);
            assert_eq!(
                gain > 0.0,
                v.worth_waiting,
                "{s} {scenario:?} {:?}: criterion {}, gain {gain}",
                m.model(),
                v.criterion_value
            );
            checked += 1;
        }
    }
    assert!(checked >= 20);
}

#[test]
fn optimizer_agrees_with_verdicts() {
    let tol = Tolerances::default();
    let opts = OptimizerOptions {
        search: TimerSearch::FirstOnly,
        ..OptimizerOptions::default()
    };
    for m in t2_zero_fixtures() {
        for s in CRITERIA {
            let v = worth_waiting_t2_zero(&m, s).unwrap();
            let o = optimize_timers(&m, s, &opts, &tol).unwrap();
            assert!(
                consistent(&v, &o),
                "{s} {:?}: criterion {} improvement {}",
                m.model(),
                v.criterion_value,
                o.improvement
            );
            assert_eq!(o.argmin[1], 0.0);
            if !v.worth_waiting {
                assert!(o.improvement <= CONSISTENCY * o.d_exhaustive);
            }
        }
    }
}

#[test]
fn deterministic_symmetric_models_never_gain() {
    let tol = Tolerances::default();
    let m = two([0.3, 0.3], det(0.5));
    let opts = OptimizerOptions {
        search: TimerSearch::Equal,
        ..OptimizerOptions::default()
    };
    for s in [Strategy::MinimumSojourn, Strategy::EmptyArrivalTimer] {
        let v = worth_waiting_symmetric(&m, s).unwrap();
        assert!(!v.worth_waiting);
        let o = optimize_timers(&m, s, &opts, &tol).unwrap();
        assert!(consistent(&v, &o));
    }
}

#[test]
fn waiting_can_pay_off_under_ii_and_iv_but_not_iii() {
    let candidates: Vec<_> = [0.05, 0.1, 0.2, 0.3, 0.4]
        .iter()
        .map(|&r| two([r, r], expo(1.0)))
        .collect();
    let exhibit = find_waiting_contrast(
        &candidates,
        &OptimizerOptions::default(),
        &Tolerances::default(),
    )
    .unwrap();
    assert!(exhibit.found);
    assert!(exhibit.confirmed);
    let [iii, ii, iv] = [
        &exhibit.verdicts[0],
        &exhibit.verdicts[1],
        &exhibit.verdicts[2],
    ];
    assert!(!iii.worth_waiting && ii.worth_waiting && iv.worth_waiting);
    assert!(exhibit.optima[1].improvement > 0.0);
    assert_eq!(exhibit.optima[0].improvement, 0.0);
}

#[test]
fn criteria_approach_the_deterministic_shortcut() {
    let exact = two([0.3, 0.2], det(0.5));
    let v_det = worth_waiting_t2_zero(&exact, Strategy::MinimumSojourn)
        .unwrap()
        .criterion_value;
    let mut last = f64::INFINITY;
    for shape in [1e2, 1e4, 1e6] {
        let m = two(
            [0.3, 0.2],
            SwitchoverSpec::Gamma {
                shape,
                rate: shape / 0.5,
            },
        );
        let v = worth_waiting_t2_zero(&m, Strategy::MinimumSojourn)
            .unwrap()
            .criterion_value;
        let gap = (v - v_det).abs();
        assert!(gap < last);
        last = gap;
    }
    assert!(last < 1e-4, "gap {last}");
}

#[test]
fn criteria_reject_unsupported_inputs() {
    let m = two([0.3, 0.2], expo(1.0));
    assert!(worth_waiting_symmetric(&m, Strategy::IdleSojourn).is_err());
    assert!(worth_waiting_t2_zero(&m, Strategy::IdleCredit).is_err());
    let three = PollingModel::new(vec![m.stations()[0].clone(); 3], Strategy::Exhaustive)
        .validate()
        .unwrap();
    assert!(worth_waiting_t2_zero(&three, Strategy::MinimumSojourn).is_err());
}
