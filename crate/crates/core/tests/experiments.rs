use triharm::experiments::*;
use triharm::multiplier::MOMENT_TOL;

fn ratio_config(exponents: [&str; 3]) -> ExperimentConfig {
    let mut c = ExperimentConfig::ratio_default();
    c.exponents = exponents.map(String::from);
    c
}

#[test]
fn ratio_probe_is_spread_bounded_in_both_regimes() {
    for e in [["1", "4", "4"], ["2/3", "4", "4"]] {
        let r = ratio_experiment(&ratio_config(e)).unwrap();
        assert_eq!(r.rows.len(), 48);
        assert!(r.rows.iter().all(|x| x.ratio.is_some_and(|v| v.is_finite() && v > 0.0)));
        let s = &r.summary;
        assert_eq!(s.skipped, 0);
        assert!(s.max_over_median <= 1e2, "{e:?}: {s:?}");
        assert!(s.dilation_variation <= 8.0, "{e:?}: {s:?}");
    }
}

#[test]
fn zero_input_rows_are_skipped() {
    let mut c = ExperimentConfig::ratio_default();
    c.inputs.count = 2;
    c.inputs.zero_slots = vec![1];
    let r = ratio_experiment(&c).unwrap();
    assert!(r.rows.iter().all(|x| x.ratio.is_none() && x.note == "zero denominator"));
    assert_eq!(r.summary.skipped, r.rows.len());
}

#[test]
fn ratio_csv_is_identical_across_runs_and_widths() {
    let mut bytes = Vec::new();
    for threads in [1, 8, 8] {
        let mut c = ExperimentConfig::ratio_default();
        c.inputs.count = 4;
        c.threads = threads;
        let mut out = Vec::new();
        ratio_experiment(&c).unwrap().write_csv(&mut out).unwrap();
        bytes.push(out);
    }
    assert!(bytes[0].starts_with(b"# schema=1\nseed,dilation,numerator,denominator,ratio,note\n"));
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[1], bytes[2]);
}

#[test]
fn threshold_violation_is_reported() {
    let mut c = ExperimentConfig::ratio_default();
    c.s = 0.25;
    assert!(matches!(ratio_experiment(&c), Err(triharm::Error::Threshold(_))));
}

#[test]
fn moment_experiment_separates_modified_and_unmodified() {
    let m = moment_experiment(&ExperimentConfig::moment_default()).unwrap();
    assert_eq!(m.p, 0.5);
    // orders 0 and 1, for the full output and every shell
    assert!(m.rows.iter().any(|r| r.piece.is_some() && r.order == 1));
    assert!(m.vanishing_pass(), "{:?}", m.rows);
    assert!(m.unmodified_fails());
    // seeds 6, 7, 8: frequencies that can cancel to zero
    let pinned = 0.40541437666628105;
    assert!((m.unmodified_order0[2] / pinned - 1.0).abs() < 1e-6, "{}", m.unmodified_order0[2]);
    assert!(m.unmodified_order0[2] > MOMENT_TOL);
}

#[test]
fn zero_inputs_give_zero_residuals() {
    let mut c = ExperimentConfig::moment_default();
    c.inputs.count = 2;
    c.inputs.zero_slots = vec![0];
    let m = moment_experiment(&c).unwrap();
    assert!(m.rows.iter().all(|r| r.max_residual == 0.0 && r.max_margin == 0.0 && r.pass));
    assert!(!m.unmodified_fails());
}
