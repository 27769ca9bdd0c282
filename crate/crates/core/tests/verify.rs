use ramopt_core::verify::{all_ok, format_table, run_suite, to_json, Suite};

#[test]
fn full_suite_passes_and_controls_fail() {
    let reports = run_suite(Suite::All, 5).unwrap();
    assert!(all_ok(&reports), "{}", format_table(&reports));
    let controls: Vec<_> = reports.iter().filter(|r| r.negative_control).collect();
    assert!(controls.len() >= 2);
    assert!(controls.iter().all(|r| !r.passed));
}

#[test]
fn reports_serialize_for_every_suite() {
    for suite in ["geometry", "gradients", "oracle"] {
        let reports = run_suite(suite.parse().unwrap(), 1).unwrap();
        let json: serde_json::Value = serde_json::from_str(&to_json(&reports).unwrap()).unwrap();
        assert_eq!(json.as_array().unwrap().len(), reports.len());
        assert_eq!(format_table(&reports).lines().count(), reports.len() + 1);
    }
}

#[test]
fn probes_are_deterministic() {
    let a = run_suite(Suite::Gradients, 9).unwrap();
    let b = run_suite(Suite::Gradients, 9).unwrap();
    let errs = |r: &[ramopt_core::verify::ProbeReport]| r.iter().map(|p| p.max_error.to_bits()).collect::<Vec<_>>();
    assert_eq!(errs(&a), errs(&b));
}
