use bdlab::acceptance::{energy_residual, SuiteSetup};
use bdlab::diagnostics::{
    apriori_monitor, energy_ledger, moment_envelope, sigma_sweep, trace_test_function, SweepConfig,
};
use bdlab::dynamics::{run, GrowthScheme, RunOptions, SimState};
use bdlab::par::Execution;
use bdlab::presets::{InitPreset, PresetKind};
use bdlab::{make_grid, Error, Field, Grid, GridSpec, ModelParams};

fn grid(n: usize) -> Grid {
    make_grid(GridSpec::new(1, 8.0, n)).unwrap()
}

fn bumps(g: Grid, m: &ModelParams) -> SimState {
    InitPreset { width: 0.8, offset: 0.75, peak_pressure: Some(0.8), ..Default::default() }
        .build(g, m)
        .unwrap()
}

fn sweep_config(g: Grid, sigmas: Vec<f64>, initial: SimState) -> SweepConfig {
    SweepConfig {
        grid: g,
        model: ModelParams::default(),
        sigmas,
        initial,
        options: RunOptions::new(0.2, 0.02),
        q_list: vec![1.0, 2.0],
        shifts: (1..=8).collect(),
        execution: Execution::Parallel,
    }
}

#[test]
fn homeostatic_ledger_is_flat() {
    let m = ModelParams::default();
    let g = grid(64);
    let s = InitPreset::new(PresetKind::Homeostatic).build(g, &m).unwrap();
    let traj = run(&GrowthScheme::brinkman(g, &m).unwrap(), &s, &RunOptions::new(0.1, 0.05)).unwrap();
    let ledger = energy_ledger(&traj, &m);
    let p0 = ledger.entries[0].int_p;
    for e in &ledger.entries {
        assert!((e.int_p - p0).abs() < 1e-12);
        assert!(e.dissipation.abs() < 1e-12 && e.source.abs() < 1e-12 && e.residual.abs() < 1e-12);
    }
}

#[test]
fn no_growth_means_no_source_and_decreasing_pressure() {
    let m = ModelParams { alpha: 0.0, ..Default::default() };
    for sigma in [0.0, 0.01] {
        let m = m.with_sigma(sigma);
        let g = grid(256);
        let traj = run(&GrowthScheme::brinkman(g, &m).unwrap(), &bumps(g, &m), &RunOptions::new(0.2, 0.1)).unwrap();
        let ledger = energy_ledger(&traj, &m);
        assert!(ledger.entries.iter().all(|e| e.source == 0.0));
        assert!(ledger.min_dissipation() >= 0.0);
        assert!(ledger.max_rate() <= 1e-10);
        if sigma == 0.0 {
            assert!(ledger.entries.iter().all(|e| e.sigma_lap_sq == 0.0));
        }
    }
}

#[test]
fn ledger_identity_and_gronwall_hold() {
    let m = ModelParams::default();
    let g = grid(256);
    let traj = run(&GrowthScheme::brinkman(g, &m).unwrap(), &bumps(g, &m), &RunOptions::new(0.3, 0.1)).unwrap();
    let ledger = energy_ledger(&traj, &m);
    assert!(ledger.max_identity_residual <= 1e-12, "{:e}", ledger.max_identity_residual);
    assert!(ledger.gronwall_holds(1e-12));
    assert!(ledger.entries.iter().all(|e| e.dissipation.is_finite() && e.dissipation >= 0.0));
}

#[test]
fn energy_residual_shrinks_under_refinement() {
    let setup = SuiteSetup::default();
    let coarse = energy_residual(&setup, 256, 1.0 / 512.0, 0.25).unwrap();
    let fine = energy_residual(&setup, 512, 1.0 / 1024.0, 0.25).unwrap();
    assert!(coarse / fine >= 1.5, "{coarse:e} -> {fine:e}");
}

#[test]
fn apriori_examples() {
    let m = ModelParams::default();
    let g = grid(64);
    let vac = SimState::new(0.0, Field::zeros(g), Field::zeros(g)).unwrap();
    let traj = run(&GrowthScheme::brinkman(g, &m).unwrap(), &vac, &RunOptions::new(0.1, 0.05)).unwrap();
    for r in apriori_monitor(&traj, &m).unwrap().rows {
        assert_eq!([r.p_l1, r.p_linf, r.w_l1, r.w_linf, r.grad_w_cum, r.sigma_lap_cum, r.p_moment], [0.0; 7]);
    }
    let s = InitPreset::new(PresetKind::Homeostatic).build(g, &m).unwrap();
    let traj = run(&GrowthScheme::brinkman(g, &m).unwrap(), &s, &RunOptions::new(0.1, 0.05)).unwrap();
    for r in apriori_monitor(&traj, &m).unwrap().rows {
        assert!((r.p_linf - m.p_h).abs() < 1e-12);
        assert!(r.grad_w_cum.abs() < 1e-20 && r.sigma_lap_cum.abs() < 1e-20);
    }
}

#[test]
fn moments_stay_under_envelope() {
    let m = ModelParams::default();
    let g = grid(256);
    let traj = run(&GrowthScheme::brinkman(g, &m).unwrap(), &bumps(g, &m), &RunOptions::new(0.3, 0.05)).unwrap();
    let rep = apriori_monitor(&traj, &m).unwrap();
    assert!(rep.moments_within_envelope());
    assert!((moment_envelope(2.0, 0.0, 0.0, &m) - 2.0).abs() < 1e-15);
}

#[test]
fn sweep_of_reference_against_itself_is_zero() {
    let g = grid(128);
    let out = sigma_sweep(&sweep_config(g, vec![0.0], bumps(g, &ModelParams::default()))).unwrap();
    let row = &out.report.rows[0];
    assert!(row.e_p.iter().all(|(_, e)| *e == 0.0));
    assert_eq!([row.e_grad, row.e_lap, row.e_norm, row.trace_gap], [0.0; 4]);
}

#[test]
fn homeostatic_sweep_is_zero() {
    let g = grid(64);
    let s = InitPreset::new(PresetKind::Homeostatic).build(g, &ModelParams::default()).unwrap();
    let out = sigma_sweep(&sweep_config(g, vec![0.1, 1e-3], s)).unwrap();
    for row in &out.report.rows {
        let all = row.e_p.iter().map(|(_, e)| *e).chain([row.e_grad, row.e_lap, row.e_norm, row.trace_gap]);
        assert!(all.into_iter().all(|e| e.abs() <= 1e-12));
    }
}

#[test]
fn report_is_sorted_nonnegative_and_shaped() {
    let g = grid(128);
    let out = sigma_sweep(&sweep_config(g, vec![1e-3, 0.1, 1e-2], bumps(g, &ModelParams::default()))).unwrap();
    let sigmas: Vec<f64> = out.report.rows.iter().map(|r| r.sigma).collect();
    assert_eq!(sigmas, vec![0.1, 1e-2, 1e-3]);
    assert_eq!(out.report.csv_header(), "sigma,e_p_q1,e_p_q2,e_grad,e_lap,e_norm,trace_gap");
    for (_, col) in out.report.columns() {
        assert!(col.iter().all(|v| *v >= 0.0 && v.is_finite()));
    }
    for m in &out.members {
        assert_eq!(m.shift_curve.len(), 8);
        assert!((m.shift_curve[0].0 - g.dx()).abs() < 1e-15);
        assert!(m.kernel_grad_l1 > 0.0);
    }
    let e2: Vec<f64> = out.report.rows.iter().map(|r| r.e_p(2.0).unwrap()).collect();
    assert!(e2.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn failing_sweep_names_sigma() {
    let g = grid(128);
    let mut cfg = sweep_config(g, vec![0.1], bumps(g, &ModelParams::default()));
    cfg.options.max_steps = 3;
    match sigma_sweep(&cfg) {
        Err(Error::SweepMember { sigma, .. }) => assert_eq!(sigma, 0.0),
        other => panic!("expected SweepMember error, got {other:?}"),
    }
    cfg.sigmas = vec![-1.0];
    assert!(sigma_sweep(&cfg).is_err());
}

#[test]
fn trace_test_function_is_a_centered_bump() {
    let g = grid(128);
    let phi = trace_test_function(g);
    assert!((phi.max() - 1.0).abs() < 0.01);
    assert_eq!(phi.values()[0], 0.0);
    assert!(phi.min() >= 0.0);
}
