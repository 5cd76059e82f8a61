use bdlab::config::{parse_config, SigmaSpec};
use bdlab::runner::DEFAULT_CONFIG;
use bdlab::Error;

const MINIMAL: &str = "
[grid]
d = 1
N = 128
L = 4

[model]
gamma = 2
sigma = 0.01

[init]
preset = gaussian-pair

[time]
T = 1
";

fn violations(text: &str) -> Vec<String> {
    match parse_config(text) {
        Err(Error::ConfigViolations(v)) => v,
        other => panic!("expected violations, got {other:?}"),
    }
}

#[test]
fn minimal_config_gets_defaults() {
    let cfg = parse_config(MINIMAL).unwrap();
    assert_eq!(cfg.time.cfl, 0.4);
    assert_eq!(cfg.q_list, vec![1.0, 2.0]);
    assert_eq!(cfg.sigma, SigmaSpec::Single(0.01));
    assert_eq!(cfg.model.p_h, 1.0);
    assert_eq!(cfg.max_shift, 8);
    assert!(cfg.regularized.is_none());
    assert!(cfg.initial_state().is_ok());
}

#[test]
fn effective_config_round_trips() {
    for text in [MINIMAL, DEFAULT_CONFIG] {
        let cfg = parse_config(text).unwrap();
        let again = parse_config(&cfg.effective()).unwrap();
        assert_eq!(again.effective(), cfg.effective());
    }
}

#[test]
fn gamma_one_is_rejected_with_reason() {
    let v = violations(&MINIMAL.replace("gamma = 2", "gamma = 1.0"));
    assert!(v.iter().any(|m| m.contains("gamma > 1")), "{v:?}");
}

#[test]
fn excessive_initial_pressure_names_preset_and_bound() {
    let v = violations(&MINIMAL.replace("preset = gaussian-pair", "preset = gaussian-pair\npeak_pressure = 1.2"));
    assert_eq!(v.len(), 1);
    assert!(v[0].contains("gaussian-pair") && v[0].contains("p_H"), "{v:?}");
}

#[test]
fn every_violation_is_reported() {
    let text = MINIMAL
        .replace("L = 4\n", "")
        .replace("sigma = 0.01", "sigma = 0.01\ncolour = red")
        .replace("T = 1", "T = 1\nC_cfl = abc")
        + "\n[regularized]\nsigma = 0\neps = 0.1\n[plots]\nx = 1\n";
    let v = violations(&text);
    assert!(v.iter().any(|m| m.contains("missing required key 'L'")));
    assert!(v.iter().any(|m| m.contains("unknown key 'colour'")));
    assert!(v.iter().any(|m| m.contains("C_cfl")));
    assert!(v.iter().any(|m| m.contains("[regularized] sigma must be > 0")));
    assert!(v.iter().any(|m| m.contains("unknown section [plots]")));
    assert!(v.len() >= 5, "{v:?}");
}

#[test]
fn sigma_and_list_are_exclusive() {
    let v = violations(&MINIMAL.replace("sigma = 0.01", "sigma = 0.01\nsigmas = 0.1, 0.01"));
    assert!(v.iter().any(|m| m.contains("exactly one")));
    let v = violations(&MINIMAL.replace("sigma = 0.01", ""));
    assert!(v.iter().any(|m| m.contains("sigma")));
    let cfg = parse_config(&MINIMAL.replace("sigma = 0.01", "sigmas = 0.1, 1e-3")).unwrap();
    assert_eq!(cfg.sigma, SigmaSpec::List(vec![0.1, 1e-3]));
}

#[test]
fn duplicates_and_outside_keys_are_errors() {
    let v = violations(&format!("N = 3\n{}", MINIMAL.replace("d = 1", "d = 1\nd = 2")));
    assert!(v.iter().any(|m| m.contains("outside")));
    assert!(v.iter().any(|m| m.contains("duplicate key 'd'")));
}

#[test]
fn regularized_block_defaults_delta_to_eps() {
    let cfg = parse_config(&format!("{MINIMAL}\n[regularized]\nsigma = 0.05\neps = 0.1, 0.01\n")).unwrap();
    let r = cfg.regularized.unwrap();
    assert_eq!(r.delta, r.eps);
    assert!(r.couple_potential);
    let v = violations(&format!("{MINIMAL}\n[regularized]\nsigma = 0.05\neps = 0.1, 0.01\ndelta = 0.1\n"));
    assert!(v.iter().any(|m| m.contains("entries")));
}
