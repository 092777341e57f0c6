use std::sync::Arc;

use ftn_core::channel::{ebn0_for_ber, theoretical_ber};
use ftn_core::modem::Constellation;
use ftn_harness::report::{merge_rows, to_csv};
use ftn_harness::training::{detector_from, train_detector};
use ftn_harness::{run_campaign, BerPoint, BerReport, Campaign, HarnessError, RunConfig, Scenario, StopRule};

fn config(scenario: Scenario, snr: &[f64]) -> RunConfig {
    RunConfig {
        scenario,
        snr_list: snr.to_vec(),
        ..RunConfig::default()
    }
}

#[test]
fn nyquist_reference_matches_closed_form_at_8_db() {
    let cfg = config(Scenario::NyquistReference, &[8.0]);
    let report = run_campaign(&Campaign::new(cfg, Scenario::NyquistReference)).unwrap();
    let p = &report.points[0];
    let want = theoretical_ber(&Constellation::<f64>::qpsk(), 8.0);
    assert!((want - 1.9e-4).abs() < 1e-5);
    assert!(p.errors >= 200 && !p.cap_hit);
    assert!(
        (p.ber - want).abs() <= 3.0 * p.ci_half_width,
        "ber {} vs {want} (ci {})",
        p.ber,
        p.ci_half_width
    );
}

#[test]
fn stop_rule_is_honoured() {
    let mut cfg = config(Scenario::NyquistReference, &[2.0, 12.0]);
    cfg.max_bits = 200_000;
    let report = run_campaign(&Campaign::new(cfg.clone(), Scenario::NyquistReference)).unwrap();
    for p in &report.points {
        assert!(p.errors >= cfg.min_errors || p.cap_hit);
        assert_eq!(p.ber, p.errors as f64 / p.bits as f64);
    }
    let high = &report.points[1];
    assert!(high.cap_hit && high.bits >= cfg.max_bits);
}

#[test]
fn campaigns_are_reproducible() {
    let cfg = config(Scenario::UncodedMap, &[4.0, 6.0]);
    let a = run_campaign(&Campaign::new(cfg.clone(), Scenario::UncodedMap)).unwrap();
    let b = run_campaign(&Campaign::new(cfg.clone(), Scenario::UncodedMap)).unwrap();
    assert_eq!(a.points, b.points);
    assert_eq!(a.run_id, b.run_id);
    let csv_a = to_csv(&merge_rows(&[a]).unwrap()).unwrap();
    let csv_b = to_csv(&merge_rows(&[b]).unwrap()).unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn detector_scenarios_need_weights() {
    let cfg = config(Scenario::UncodedDl, &[6.0]);
    let err = run_campaign(&Campaign::new(cfg, Scenario::UncodedDl)).unwrap_err();
    assert!(matches!(err, HarnessError::MissingWeights(Scenario::UncodedDl)));
}

#[test]
fn coded_points_count_whole_codewords_only() {
    let mut cfg = config(Scenario::CodedNyquistPolar, &[2.0]);
    cfg.polar_n = 256;
    cfg.polar_k = 128;
    let report = run_campaign(&Campaign::new(cfg, Scenario::CodedNyquistPolar)).unwrap();
    let p = &report.points[0];
    assert_eq!(p.bits % 128, 0);
    assert_eq!(p.discarded_llrs, 0);
}

#[test]
fn nyquist_spaced_net_tracks_the_reference_curve() {
    let mut cfg = config(Scenario::UncodedDl, &[4.0, 6.0]);
    cfg.ftn.tau = 1.0;
    cfg.min_errors = 2000;
    let trained = train_detector(&cfg, |_, _| {}).unwrap();
    let det = Arc::new(detector_from(trained.net, cfg.window).unwrap());
    let dl = run_campaign(&Campaign::new(cfg.clone(), Scenario::UncodedDl).with_detector(det)).unwrap();

    let qpsk = Constellation::<f64>::qpsk();
    for p in &dl.points {
        let equivalent = ebn0_for_ber(&qpsk, p.ber);
        assert!(
            (equivalent - p.eb_n0_db).abs() <= 0.2,
            "{} dB: ber {} sits at {equivalent:.2} dB on the reference curve",
            p.eb_n0_db,
            p.ber
        );
    }
}

#[test]
fn report_rows_are_sorted_and_flag_zero_error_points() {
    let rule = StopRule {
        min_errors: 200,
        max_bits: 1000,
    };
    let report = |scenario, db, errors| BerReport {
        scenario,
        tau: 0.8,
        beta: 0.5,
        order_bits: 2,
        run_id: "x".into(),
        wall_time_s: 0.0,
        cp_overhead: None,
        points: vec![BerPoint::from_counts(db, 1000, errors, rule)],
    };
    let rows = merge_rows(&[
        report(Scenario::UncodedMap, 6.0, 3),
        report(Scenario::UncodedDl, 8.0, 0),
    ])
    .unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].scenario, "uncoded-dl");
    assert!(rows[0].lower_bound && rows[0].ber == 0.0);
    assert!(!rows[1].lower_bound);

    let err = merge_rows(&[
        report(Scenario::UncodedMap, 6.0, 3),
        report(Scenario::UncodedMap, 6.0, 5),
    ])
    .unwrap_err();
    assert!(err.to_string().contains("uncoded-map@6"));
}
