use cfx_core::extraction::hyperplanes_equivalent;
use cfx_core::harness::{
    run_demo, run_extract, run_raster, run_regions, run_trial, to_canonical_json, ScenarioConfig,
};
use cfx_core::regions::RegionLabel;
use cfx_core::{Error, Hyperplane, NormKind, Oracle, QueryLedger, RobustnessSpec, TieBreakPolicy, Vector};

const WORKED_CF: &str = r#"{"dimension": 2, "model": {"a": [2, -1], "b": 3}, "norm1": "linf", "attack": "cf-nondiff"}"#;
const WORKED_RCF: &str = r#"{"dimension": 2, "model": {"a": [2, -1], "b": 3}, "norm1": "linf",
    "robustness": {"norm2": "l1", "rho": 1}, "attack": "rcf-nondiff"}"#;

fn worked() -> Hyperplane {
    Hyperplane::from_parts(&[2.0, -1.0], 3.0).unwrap()
}

#[test]
fn worked_cf_config_uses_three_queries() {
    let r = run_extract(&ScenarioConfig::from_json(WORKED_CF).unwrap()).unwrap();
    assert!(r.pass);
    assert_eq!(r.trials[0].report.queries_cf, 3);
    assert!(hyperplanes_equivalent(&worked(), &r.trials[0].report.recovered, 1e-12).unwrap().equivalent);
}

#[test]
fn worked_rcf_config_uses_three_plus_three() {
    let r = run_extract(&ScenarioConfig::from_json(WORKED_RCF).unwrap()).unwrap();
    assert!(r.pass);
    let t = &r.trials[0].report;
    assert_eq!((t.queries_rcf, t.queries_factual), (3, 3));
    let want = Hyperplane::from_parts(&[1.0, -0.5], 1.5).unwrap();
    assert!(hyperplanes_equivalent(&want, &t.recovered, 1e-12).unwrap().equivalent);
}

#[test]
fn seeded_l2_batch_is_all_equivalent() {
    let c = ScenarioConfig::from_json(r#"{"dimension": 25, "seed": 7, "norm1": "l2", "attack": "cf-diff", "trials": 100}"#).unwrap();
    let r = run_extract(&c).unwrap();
    assert_eq!(r.equivalent_trials, 100);
    assert!(r.trials.iter().all(|t| t.report.queries_cf == 1));
    assert_eq!(r.budget.total_cf, 100);
}

#[test]
fn reports_are_deterministic() {
    let c = ScenarioConfig::from_json(r#"{"dimension": 6, "seed": 3, "norm1": "l1", "attack": "cf-nondiff", "trials": 12}"#).unwrap();
    let a = to_canonical_json(&run_extract(&c).unwrap()).unwrap();
    let b = to_canonical_json(&run_extract(&c).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn aggregate_counts_are_trial_sums() {
    let c = ScenarioConfig::from_json(
        r#"{"dimension": 4, "seed": 11, "norm1": "linf", "robustness": {"norm2": "l2", "rho": 0.3}, "attack": "rcf-nondiff", "trials": 9}"#,
    )
    .unwrap();
    let r = run_extract(&c).unwrap();
    let sum = |f: fn(&cfx_core::extraction::ExtractionReport) -> usize| r.trials.iter().map(|t| f(&t.report)).sum::<usize>();
    assert_eq!(r.budget.total_rcf, sum(|t| t.queries_rcf));
    assert_eq!(r.budget.total_factual, sum(|t| t.queries_factual));
    assert_eq!(r.budget.observed_max.rcf, 5);
}

#[test]
fn config_validation() {
    assert!(ScenarioConfig::from_json(r#"{"dimension": 2, "norm1": "l2", "attack": "cf-diff", "colour": 1}"#).is_err());
    assert!(matches!(
        ScenarioConfig::from_json(r#"{"dimension": 2, "norm1": "l1", "attack": "cf-diff"}"#),
        Err(Error::UseNonDifferentiableAttack(_))
    ));
    assert!(matches!(
        ScenarioConfig::from_json(r#"{"dimension": 2, "norm1": "l2", "attack": "rcf-diff"}"#),
        Err(Error::MissingRobustness)
    ));
    assert!(ScenarioConfig::from_json(r#"{"dimension": 2, "norm1": "l2", "attack": "cf-diff", "trials": 0}"#).is_err());
    assert!(ScenarioConfig::from_json(r#"{"dimension": 2, "model": {"a": [0, 0], "b": 1}, "norm1": "l2", "attack": "cf-diff"}"#).is_err());
    assert!(matches!(
        ScenarioConfig::from_json(r#"{"dimension": 3, "norm1": "l2", "attack": "cf-diff", "raster": {"lo": [0, 0], "hi": [1, 1], "resolution": 4}}"#),
        Err(Error::RasterDimension(3))
    ));
}

#[test]
fn explicit_and_seeded_models_differ_only_by_source() {
    let c = ScenarioConfig::from_json(r#"{"dimension": 3, "model": {"seed": 5}, "norm1": "l2", "attack": "cf-diff", "trials": 2}"#).unwrap();
    let h0 = c.hidden_for_trial(0).unwrap();
    assert_eq!(h0, c.hidden_for_trial(0).unwrap());
    assert_ne!(h0, c.hidden_for_trial(1).unwrap());
}

fn attack_for(norm1: &str, robust: bool) -> &'static str {
    match (norm1 == "l2", robust) {
        (true, false) => "cf-diff",
        (false, false) => "cf-nondiff",
        (true, true) => "rcf-diff",
        (false, true) => "rcf-nondiff",
    }
}

fn raster_config(norm1: &str, extra: &str) -> ScenarioConfig {
    let attack = attack_for(norm1, false);
    ScenarioConfig::from_json(&format!(
        r#"{{"dimension": 2, "model": {{"a": [2, -1], "b": 3}}, "norm1": "{norm1}", "attack": "{attack}",
            "raster": {{"lo": [-5, -5], "hi": [5, 5], "resolution": 60}}{extra}}}"#
    ))
    .unwrap()
}

#[test]
fn empty_ledger_leaves_every_cell_unknown() {
    let r = run_regions(&raster_config("l1", ""), &QueryLedger::new()).unwrap();
    let cells = r.cells.unwrap();
    assert_eq!((cells.yes, cells.no, cells.unknown), (0, 0, 3600));
}

#[test]
fn one_counterfactual_unknown_counts_by_norm() {
    let x = Vector::from_slice(&[3.0, 0.0]).unwrap();
    let mut unknown = Vec::new();
    for (name, k) in [("l1", NormKind::L1), ("l2", NormKind::L2), ("linf", NormKind::Linf)] {
        let mut o = Oracle::new(worked(), k, TieBreakPolicy::Vertex).unwrap();
        o.factual(&x).unwrap();
        o.counterfactual(&x).unwrap();
        let r = run_regions(&raster_config(name, r#", "samples": 300"#), o.ledger()).unwrap();
        assert!(r.pass);
        let grid = r.raster.unwrap();
        unknown.push(if k == NormKind::L2 {
            grid.count_outside_band(RegionLabel::Unknown, &worked(), 2.0)
        } else {
            grid.count(RegionLabel::Unknown)
        });
    }
    assert!(unknown[0] > 0 && unknown[1] == 0 && unknown[2] > 0, "{unknown:?}");
}

#[test]
fn rcf_norm_grid_produces_rasters() {
    let norms = [("l1", NormKind::L1), ("l2", NormKind::L2), ("linf", NormKind::Linf)];
    let x = Vector::from_slice(&[-1.0, 1.0]).unwrap();
    for (n1, k1) in norms {
        for (n2, k2) in norms {
            let spec = RobustnessSpec::new(k2, 0.5).unwrap();
            let mut o = Oracle::new(worked(), k1, TieBreakPolicy::Vertex).unwrap().with_robustness(spec).unwrap();
            o.factual(&x).unwrap();
            o.robust_counterfactual(&x).unwrap();
            let attack = attack_for(n1, true);
            let c = ScenarioConfig::from_json(&format!(
                r#"{{"dimension": 2, "norm1": "{n1}", "robustness": {{"norm2": "{n2}", "rho": 0.5}}, "attack": "{attack}",
                    "raster": {{"lo": [-4, -4], "hi": [4, 4], "resolution": 24}}, "samples": 200, "augment": true}}"#
            ))
            .unwrap();
            let r = run_regions(&c, o.ledger()).unwrap();
            assert!(r.pass, "{n1}/{n2}");
            let grid = r.raster.unwrap();
            assert!(grid.count(RegionLabel::No) > 0, "{n1}/{n2}: the factual cell is forced");
            assert!(grid.to_csv().starts_with("x1,x2,label\n"));
        }
    }
}

#[test]
fn raster_runs_first_trial() {
    let c = raster_config("linf", r#", "samples": 200"#);
    let r = run_raster(&c).unwrap();
    let (_, _, ledger) = run_trial(&c, 0).unwrap();
    assert_eq!(r.rows, run_regions(&c, &ledger).unwrap().rows);
    assert!(r.pass);
}

#[test]
fn demo_matches_worked_values() {
    let d = run_demo().unwrap();
    let close = |v: &Vector, w: [f64; 2]| (v.get(0) - w[0]).abs() < 1e-9 && (v.get(1) - w[1]).abs() < 1e-9;
    assert!(close(&d.cf_outputs[0], [2.0, 1.0]) && close(&d.cf_outputs[1], [1.0, -1.0]));
    assert!(close(&d.rcf_outputs[0], [4.0 / 3.0, 5.0 / 3.0]) && close(&d.rcf_outputs[1], [5.0 / 3.0, -5.0 / 3.0]));
    assert_eq!(d.cf_algorithm_queries, 3);
    assert_eq!(d.rcf_algorithm_queries, (3, 3));
    assert!(d.text.contains("d = -1,") && d.text.contains("v = (1, -1)"));
    assert!(d.text.contains("(1, -0.5, 1.5): kept"));
    assert!(d.text.contains("(-1, -0.7, -1.5): rejected"));
}
