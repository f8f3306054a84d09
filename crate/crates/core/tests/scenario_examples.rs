use std::f64::consts::SQRT_2;

use icolab_core::causal::{self, CausalVerdict};
use icolab_core::scenario::{self, builtin_scenario, list_scenarios, run_scenario, sweep, SweepParam};
use icolab_core::switch::ControlMeasurement;
use icolab_core::{bell, OrderMode, Order, ScenarioConfig};

fn spec(name: &str) -> icolab_core::DoubleSwitchSpec {
    builtin_scenario(name).unwrap().double_switch().unwrap()
}

#[test]
fn listing_contains_the_builtins() {
    let names: Vec<&str> = list_scenarios().into_iter().map(|(n, _)| n).collect();
    for n in ["double-switch-coherent", "classical-order-baseline", "a5-violated-definite-order"] {
        assert!(names.contains(&n), "{n} missing");
        assert!(builtin_scenario(n).is_ok());
    }
}

#[test]
fn coherent_table_reaches_tsirelson_with_optimal_settings() {
    let s = spec("double-switch-coherent");
    let state = icolab_core::switch::double_switch_output(&s).unwrap();
    let plus = ControlMeasurement::plus_minus();
    let (_, rho) = icolab_core::switch::target_state(&state, Some((&plus, 0))).unwrap();
    let opt = bell::optimize_chsh(&rho, &Default::default(), None).unwrap();
    let (s1, s2) = opt.settings.clone().unwrap();
    let t = causal::behavior_from_switch_scenario(&s, (&s1, &s2), Some((&plus, 0))).unwrap();
    assert!((bell::chsh(&t).unwrap().value - 2.0 * SQRT_2).abs() <= 1e-6);
}

#[test]
fn classical_and_definite_tables_are_causal() {
    let probe = causal::order_probe_table(&spec("classical-order-baseline")).unwrap();
    assert!(causal::causal_membership(&probe, causal::DEFAULT_CAUSAL_TOL).unwrap().is_causal());

    let mut config = builtin_scenario("classical-order-baseline").unwrap();
    for (order, q) in [(Order::AB, 1.0), (Order::BA, 0.0)] {
        config.order_mode = OrderMode::Definite { order };
        let probe = causal::order_probe_table(&config.double_switch().unwrap()).unwrap();
        match causal::causal_membership(&probe, causal::DEFAULT_CAUSAL_TOL).unwrap() {
            CausalVerdict::Causal(d) => assert!((d.q - q).abs() <= 1e-6, "{order:?}: q = {}", d.q),
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn visibility_sweep_endpoints() {
    let config = builtin_scenario("double-switch-coherent").unwrap();
    let rows = sweep(&config, SweepParam::Eta, &[1.0, 0.5, 0.0]).unwrap();
    assert!((rows[0].s_opt - 2.0 * SQRT_2).abs() <= 1e-6);
    assert!(rows[1].s_opt < rows[0].s_opt && rows[1].s_opt > rows[2].s_opt);
    assert!(rows[2].s_opt <= 2.0 + 1e-9);
    assert!((rows[0].negativity - 0.5).abs() <= 1e-9);
    assert!(rows[2].negativity <= 1e-9);
}

#[test]
fn mixture_sweep_is_always_causal() {
    let config = builtin_scenario("classical-order-baseline").unwrap();
    let rows = sweep(&config, SweepParam::Q, &[0.0, 0.5, 1.0]).unwrap();
    assert!(rows.iter().all(|r| r.causal_verdict == "causal"), "{rows:?}");
    assert!(rows.iter().all(|r| r.s_opt <= 2.0 + 1e-9));
}

#[test]
fn single_point_sweep_matches_run() {
    let config = builtin_scenario("classical-order-baseline").unwrap();
    let row = &sweep(&config, SweepParam::Q, &[0.3]).unwrap()[0];
    let report = run_scenario(&config).unwrap();
    assert_eq!(row.s_opt, report.chsh.result.value);
    assert_eq!(row.negativity, report.state.negativity);
    assert_eq!(row.causal_verdict, report.causal_membership.verdict.label());
}

#[test]
fn sweep_csv_has_fixed_header() {
    let config = builtin_scenario("classical-order-baseline").unwrap();
    let rows = sweep(&config, SweepParam::Q, &[0.25]).unwrap();
    let mut out = Vec::new();
    scenario::write_sweep_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next(), Some("param,S_opt,negativity,causal_verdict"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn report_records_seed_and_assumptions() {
    let mut config = builtin_scenario("a5-violated-definite-order").unwrap();
    config.seed = 987_654_321;
    let report = run_scenario(&config).unwrap();
    assert_eq!(report.seed, 987_654_321);
    assert!(!report.assumptions.a5_satisfied);
    assert!(report.findings.iter().any(|f| f.contains("correlated with the control")), "{:?}", report.findings);
    let json = report.to_json().unwrap();
    assert!(json.contains("987654321"));
    assert!(!json.contains("duration_ms"));
    let back = ScenarioConfig::from_json(&serde_json::to_string(&report.config).unwrap()).unwrap();
    assert_eq!(back, config);
}

#[test]
fn shipped_scenario_files_match_builtins() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for (name, _) in list_scenarios() {
        let text = std::fs::read_to_string(dir.join(format!("{name}.json"))).unwrap();
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), builtin_scenario(name).unwrap(), "{name}");
    }
}
