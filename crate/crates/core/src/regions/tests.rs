use super::*;
use crate::norms::{NormKind, Vector};
use crate::oracle::{classify, Hyperplane, Label, Oracle, QueryKind, QueryLedger, RobustnessSpec, TieBreakPolicy};
use approx::assert_abs_diff_eq;

fn v(x: &[f64]) -> Vector {
    Vector::from_slice(x).unwrap()
}

fn hidden() -> Hyperplane {
    Hyperplane::from_parts(&[2.0, -1.0], 3.0).unwrap()
}

fn factual_ledger(no: &[[f64; 2]], yes: &[[f64; 2]]) -> QueryLedger {
    let mut l = QueryLedger::new();
    for x in no {
        l.record_factual(v(x), Label::No);
    }
    for x in yes {
        l.record_factual(v(x), Label::Yes);
    }
    l
}

fn cf_ledger() -> QueryLedger {
    let mut l = QueryLedger::new();
    l.record_factual(v(&[3.0, 0.0]), Label::Yes);
    l.record_point(QueryKind::Cf, v(&[3.0, 0.0]), v(&[2.0, 1.0]));
    l
}

fn hidden_z(h: &Hyperplane) -> Vec<f64> {
    h.params()
}

#[test]
fn single_no_factual_row() {
    let m = model_from_ledger(&factual_ledger(&[[0.0, 0.0]], &[]), NormKind::L2, None).unwrap();
    assert_eq!(m.kind, ModelKind::Factual);
    assert_eq!(m.linear.len(), 1);
    assert_eq!(m.linear[0].coeff, vec![0.0, 0.0, -1.0]);
    assert_eq!(m.linear[0].sense, Sense::Le);
}

#[test]
fn cf_rows_hold_for_hidden_model() {
    let m = model_from_ledger(&cf_ledger(), NormKind::Linf, None).unwrap();
    assert_eq!(m.kind, ModelKind::Cf);
    assert_eq!(m.norm_rows.len(), 1);
    let ball = &m.norm_rows[0];
    assert_eq!((ball.radius, ball.side), (1.0, Side::Yes));
    let z = hidden_z(&hidden());
    assert_abs_diff_eq!(ball.violation(&z), 0.0, epsilon = 1e-12);
    assert!(Compiled::new(&m, true).unwrap().max_violation(&z) <= 1e-12);
    assert!(Compiled::new(&m, false).unwrap().max_violation(&z) <= 1e-12);
}

#[test]
fn contradictory_ledger_rejected() {
    let l = factual_ledger(&[[1.0, 1.0]], &[[1.0, 1.0]]);
    assert!(matches!(model_from_ledger(&l, NormKind::L2, None), Err(crate::Error::InconsistentLedger(_))));
}

#[test]
fn convex_hull_of_no_points() {
    let m = model_from_ledger(&factual_ledger(&[[0.0, 0.0], [1.0, 0.0]], &[]), NormKind::L2, None).unwrap();
    assert_eq!(membership(&m, &v(&[0.5, 0.0])).unwrap(), RegionLabel::No);
    assert_eq!(membership_dual(&m, &v(&[0.5, 0.0])).unwrap(), RegionLabel::No);
    assert_eq!(membership(&m, &v(&[2.0, 0.0])).unwrap(), RegionLabel::Unknown);
    let cert = dual_certificate(&m, &v(&[0.5, 0.0]), Label::No).unwrap();
    assert!(cert.distance < 1e-9);
    assert_abs_diff_eq!(cert.linear_weights[0], 0.5, epsilon = 1e-9);
    assert_abs_diff_eq!(cert.linear_weights[1], 0.5, epsilon = 1e-9);
}

#[test]
fn far_point_outside_both_hulls() {
    let m = model_from_ledger(&factual_ledger(&[[0.0, 0.0], [1.0, 0.0]], &[[0.0, 3.0]]), NormKind::L2, None).unwrap();
    let x = v(&[-40.0, 1.0]);
    assert_eq!(membership(&m, &x).unwrap(), RegionLabel::Unknown);
    assert_eq!(membership_dual(&m, &x).unwrap(), RegionLabel::Unknown);
    // anchors
    assert_eq!(membership(&m, &v(&[0.0, 0.0])).unwrap(), RegionLabel::No);
    assert_eq!(membership(&m, &v(&[0.0, 3.0])).unwrap(), RegionLabel::Yes);
}

#[test]
fn l2_counterfactual_decides_everything() {
    let m = model_from_ledger(&cf_ledger(), NormKind::L2, None).unwrap();
    // the only consistent direction is a ~ (1, -1), b = 1
    assert_eq!(membership(&m, &v(&[0.0, 0.0])).unwrap(), RegionLabel::No);
    assert_eq!(membership(&m, &v(&[4.0, 0.0])).unwrap(), RegionLabel::Yes);
    assert_eq!(membership(&m, &v(&[2.0, 1.0])).unwrap(), RegionLabel::Unknown);
    let h = Hyperplane::from_parts(&[1.0, -1.0], 1.0).unwrap();
    let r = raster(&m, [-5.0, -5.0], [5.0, 5.0], 40).unwrap();
    assert_eq!(r.count_outside_band(RegionLabel::Unknown, &h, 2.0), 0);
    let d = raster_dual(&m, [-5.0, -5.0], [5.0, 5.0], 40).unwrap();
    assert_eq!(d.count_outside_band(RegionLabel::Unknown, &h, 2.0), 0);
    assert_eq!(r.count_outside_band(RegionLabel::No, &h, 0.0) + r.count_outside_band(RegionLabel::Yes, &h, 0.0), 1600 - r.count(RegionLabel::Unknown));
}

#[test]
fn linf_counterfactual_leaves_wedge() {
    let m = model_from_ledger(&cf_ledger(), NormKind::Linf, None).unwrap();
    assert_eq!(membership(&m, &v(&[5.0, 5.0])).unwrap(), RegionLabel::Unknown);
    assert_eq!(membership(&m, &v(&[0.0, 0.0])).unwrap(), RegionLabel::Unknown);
    assert_eq!(membership(&m, &v(&[1.0, 3.0])).unwrap(), RegionLabel::No);
    assert_eq!(membership(&m, &v(&[3.0, -2.0])).unwrap(), RegionLabel::Yes);
    for x in [[5.0, 5.0], [0.0, 0.0], [1.0, 3.0], [3.0, -2.0]] {
        assert_eq!(membership_dual(&m, &v(&x)).unwrap(), membership(&m, &v(&x)).unwrap());
    }
}

#[test]
fn l1_counterfactual_leaves_unknown_cells() {
    let mut o = Oracle::new(hidden(), NormKind::L1, TieBreakPolicy::Vertex).unwrap();
    o.factual(&v(&[3.0, 0.0])).unwrap();
    o.counterfactual(&v(&[3.0, 0.0])).unwrap();
    let m = model_from_ledger(o.ledger(), NormKind::L1, None).unwrap();
    let r = raster(&m, [-5.0, -5.0], [5.0, 5.0], 20).unwrap();
    assert!(r.count(RegionLabel::Unknown) > 0);
    for row in 0..20 {
        for col in 0..20 {
            let [x1, x2] = r.center(row, col);
            let truth = classify(&hidden(), &v(&[x1, x2])).unwrap();
            match r.get(row, col) {
                RegionLabel::Yes => assert_eq!(truth, Label::Yes),
                RegionLabel::No => assert_eq!(truth, Label::No),
                RegionLabel::Unknown => {}
            }
        }
    }
}

#[test]
fn presolve_matches_conic_rows() {
    for norm in [NormKind::L1, NormKind::Linf, NormKind::L2] {
        let mut o = Oracle::new(Hyperplane::from_parts(&[0.7, 1.3], 0.4).unwrap(), norm, TieBreakPolicy::Vertex).unwrap();
        for x in [[2.0, 1.0], [-1.5, -0.5]] {
            o.factual(&v(&x)).unwrap();
            o.counterfactual(&v(&x)).unwrap();
        }
        let m = model_from_ledger(o.ledger(), norm, None).unwrap();
        let plain = RegionOptions { tangent_presolve: false, ..RegionOptions::default() };
        let fast = MembershipEngine::new(&m, RegionOptions::default()).unwrap();
        let slow = MembershipEngine::new(&m, plain).unwrap();
        assert!(fast.is_linear());
        for x in [[3.0, 3.0], [-3.0, -2.0], [4.0, -3.0], [-4.0, 2.5], [0.1, 0.2]] {
            let (a, b) = fast.extremes(&v(&x)).unwrap();
            let (c, d) = slow.extremes(&v(&x)).unwrap();
            assert_abs_diff_eq!(a, c, epsilon = 1e-6);
            assert_abs_diff_eq!(b, d, epsilon = 1e-6);
        }
    }
}

#[test]
fn sampler_acceptance_rates() {
    let empty = UncertaintyModel::empty(2, NormKind::L2).unwrap();
    let s = sample_consistent_hyperplanes(&empty, 1000, 1).unwrap();
    assert_eq!(s.samples.len(), 1000);
    assert!(s.acceptance_rate() > 0.999);

    let m = model_from_ledger(&factual_ledger(&[[0.0, 0.0]], &[]), NormKind::L2, None).unwrap();
    let s = sample_consistent_hyperplanes(&m, 100_000, 2).unwrap();
    let rate = 100_000.0 / s.proposals as f64;
    assert!((rate - 0.5).abs() < 0.01, "rate {rate}");
    assert!(s.samples.iter().all(|h| h.b() >= 0.0));
}

#[test]
fn sampler_stays_on_boundary_manifold() {
    let m = model_from_ledger(&cf_ledger(), NormKind::Linf, None).unwrap();
    let s = sample_consistent_hyperplanes(&m, 500, 3).unwrap();
    assert_eq!(s.samples.len(), 500);
    for h in &s.samples {
        assert!(h.margin(&v(&[2.0, 1.0])).unwrap().abs() <= 1e-9);
        assert!(h.margin(&v(&[3.0, 0.0])).unwrap() >= -1e-9);
    }
}

#[test]
fn raster_csv_and_dimension_check() {
    let m = model_from_ledger(&factual_ledger(&[[0.0, 0.0]], &[[1.0, 0.0]]), NormKind::L2, None).unwrap();
    let r = raster(&m, [0.0, 0.0], [1.0, 1.0], 2).unwrap();
    let csv = r.to_csv();
    assert!(csv.starts_with("x1,x2,label\n0.25,0.25,"));
    assert_eq!(csv.lines().count(), 5);
    let m3 = UncertaintyModel::empty(3, NormKind::L2).unwrap();
    assert_eq!(raster(&m3, [0.0, 0.0], [1.0, 1.0], 2).unwrap_err(), crate::Error::RasterDimension(3));
}

fn rcf_example_ledger(norm1: NormKind, spec: RobustnessSpec) -> QueryLedger {
    let mut o = Oracle::new(hidden(), norm1, TieBreakPolicy::Vertex).unwrap().with_robustness(spec).unwrap();
    for x in [[3.0, 0.0], [-1.0, 1.0]] {
        o.factual(&v(&x)).unwrap();
        o.robust_counterfactual(&v(&x)).unwrap();
    }
    o.into_ledger()
}

#[test]
fn rcf_model_needs_spec_and_labels() {
    let spec = RobustnessSpec::new(NormKind::L1, 1.0).unwrap();
    let l = rcf_example_ledger(NormKind::Linf, spec);
    assert_eq!(model_from_ledger(&l, NormKind::Linf, None).unwrap_err(), crate::Error::MissingRobustness);
    let mut unlabeled = QueryLedger::new();
    unlabeled.record_point(QueryKind::Rcf, v(&[3.0, 0.0]), v(&[4.0 / 3.0, 5.0 / 3.0]));
    assert!(matches!(
        model_from_ledger(&unlabeled, NormKind::Linf, Some(spec)),
        Err(crate::Error::InconsistentLedger(_))
    ));
    let m = model_from_ledger(&l, NormKind::Linf, Some(spec)).unwrap();
    assert!(matches!(membership_dual(&m, &v(&[0.0, 0.0])), Err(crate::Error::WrongModelKind { .. })));
}

#[test]
fn rcf_example_model_is_exact_and_sound() {
    let spec = RobustnessSpec::new(NormKind::L1, 1.0).unwrap();
    let m = model_from_ledger(&rcf_example_ledger(NormKind::Linf, spec), NormKind::Linf, Some(spec)).unwrap();
    assert_eq!(m.kind, ModelKind::Rcf);
    // linf subgradient face with an linf dual norm: kept as an inequality
    assert!(m.relaxed());
    let z = hidden_z(&hidden());
    assert!(Compiled::new(&m, true).unwrap().max_violation(&z) <= 1e-9);
    // far points on either side are forced with the hidden labels
    assert_eq!(membership(&m, &v(&[10.0, -10.0])).unwrap(), RegionLabel::Yes);
    assert_eq!(membership(&m, &v(&[-10.0, 10.0])).unwrap(), RegionLabel::No);
}

#[test]
fn perspective_point_linf_l1() {
    let spec = RobustnessSpec::new(NormKind::L1, 1.0).unwrap();
    let m = model_from_ledger(&rcf_example_ledger(NormKind::Linf, spec), NormKind::Linf, Some(spec)).unwrap();
    let unchanged = augment_rcf_model(&m, false).unwrap();
    assert_eq!(unchanged, m);
    let aug = augment_rcf_model(&m, true).unwrap();
    let added: Vec<_> = aug.linear.iter().filter(|r| r.origin == RowOrigin::Perspective).collect();
    assert_eq!(added.len(), 2);
    // x_bar = x_RCF - 1 * v for the 'Yes' factual at (3, 0)
    let x_r = v(&[4.0 / 3.0, 5.0 / 3.0]);
    let w = x_r.sub(&v(&[3.0, 0.0]));
    let x_bar = x_r.axpy(-1.0, &w.scale(1.0 / w.max_abs()));
    assert_abs_diff_eq!(added[0].coeff[0], x_bar.get(0), epsilon = 1e-12);
    assert_abs_diff_eq!(added[0].coeff[1], x_bar.get(1), epsilon = 1e-12);
    assert_eq!(added[0].sense, Sense::Ge);
    assert_eq!(classify(&hidden(), &x_bar).unwrap(), Label::Yes);
    assert!(Compiled::new(&aug, true).unwrap().max_violation(&hidden_z(&hidden())) <= 1e-9);
}

#[test]
fn touch_point_for_equal_norms() {
    let spec = RobustnessSpec::new(NormKind::Linf, 1.0).unwrap();
    let m = model_from_ledger(&rcf_example_ledger(NormKind::Linf, spec), NormKind::Linf, Some(spec)).unwrap();
    assert_eq!(m.rcf_records[0].output, v(&[1.0, 2.0]));
    let aug = augment_rcf_model(&m, true).unwrap();
    let touch: Vec<_> = aug.linear.iter().filter(|r| r.origin == RowOrigin::TouchPoint).collect();
    assert_eq!(touch.len(), 2);
    assert_eq!(&touch[0].coeff[..2], &[2.0, 1.0]);
    assert_eq!(m.linear.iter().filter(|r| r.origin == RowOrigin::TouchPoint).count(), 0);
    for spec_norm in [NormKind::L1, NormKind::Linf] {
        let spec = RobustnessSpec::new(spec_norm, 0.5).unwrap();
        let m = model_from_ledger(&rcf_example_ledger(spec_norm, spec), spec_norm, Some(spec)).unwrap();
        let aug = augment_rcf_model(&m, true).unwrap();
        for r in aug.linear.iter().filter(|r| r.origin == RowOrigin::TouchPoint) {
            let x = v(&r.coeff[..2]);
            assert!(hidden().margin(&x).unwrap().abs() <= 1e-9 * 3.0);
        }
        assert!(!aug.relaxed());
    }
}

#[test]
fn perspective_constant_l1_l2() {
    let spec = RobustnessSpec::new(NormKind::L2, 0.5).unwrap();
    let m = model_from_ledger(&rcf_example_ledger(NormKind::L1, spec), NormKind::L1, Some(spec)).unwrap();
    let aug = augment_rcf_model(&m, true).unwrap();
    let rec = &m.rcf_records[0];
    let w = rec.output.sub(&rec.input);
    let unit = w.scale(1.0 / crate::norms::norm_eval(&w, NormKind::L1));
    let expected = rec.output.axpy(-0.5 * 2f64.sqrt(), &unit);
    let row = aug.linear.iter().find(|r| r.origin == RowOrigin::Perspective && r.seq == rec.seq).unwrap();
    assert_abs_diff_eq!(row.coeff[0], expected.get(0), epsilon = 1e-12);
    assert_abs_diff_eq!(row.coeff[1], expected.get(1), epsilon = 1e-12);
    assert_eq!(classify(&hidden(), &expected).unwrap(), rec.label);
}

#[test]
fn model_json_dump_lists_rows() {
    let m = model_from_ledger(&cf_ledger(), NormKind::Linf, None).unwrap();
    let json: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
    assert_eq!(json["kind"], "cf");
    assert_eq!(json["linear"].as_array().unwrap().len(), 2);
    assert_eq!(json["norm_rows"][0]["side"], "yes");
}
