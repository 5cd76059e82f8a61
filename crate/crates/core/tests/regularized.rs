use bdlab::calculus::{centered_dot, divergence, gradient, laplacian};
use bdlab::dynamics::{run, step_brinkman, upwind_flux, RunOptions, SimState};
use bdlab::elliptic::solve_brinkman;
use bdlab::norms::lq_norm;
use bdlab::par::Execution;
use bdlab::presets::{InitPreset, PresetKind};
use bdlab::regularized::{
    consistency_sweep, diffusion_dt, q_truncate, regularized_max_principle_probe, step_regularized,
    RegParams, RegScheme,
};
use bdlab::{make_grid, Error, Field, Grid, GridSpec, ModelParams};
use proptest::prelude::*;

fn grid(d: usize, l: f64, n: usize) -> Grid {
    make_grid(GridSpec::new(d, l, n)).unwrap()
}

fn model(sigma: f64) -> ModelParams {
    ModelParams { sigma, ..Default::default() }
}

fn bumps(g: Grid, m: &ModelParams, peak: f64) -> SimState {
    InitPreset { width: 0.8, offset: 0.75, peak_pressure: Some(peak), ..Default::default() }
        .build_unchecked(g, m)
        .unwrap()
}

#[test]
fn truncation_examples() {
    let g = grid(1, 1.0, 16);
    for (p, q) in [(0.5, 0.5), (3.0, 2.0), (2.0, 2.0)] {
        assert_eq!(q_truncate(&Field::constant(g, p), 1.0).values()[0], q);
    }
}

#[test]
fn homeostatic_state_is_steady() {
    for d in [1, 2] {
        let g = grid(d, 2.0, 32);
        let m = model(0.05);
        let s = InitPreset::new(PresetKind::Homeostatic).build(g, &m).unwrap();
        for (eps, delta) in [(0.0, 0.0), (0.01, 0.3), (0.1, 0.0)] {
            let rp = RegParams::new(m.clone(), eps, delta);
            let next = step_regularized(&s, &rp, 1e-3).unwrap();
            assert!(next.u.sub(&s.u).max_abs() < 1e-12);
            assert!(next.v.sub(&s.v).max_abs() < 1e-12);
        }
    }
}

#[test]
fn uncoupled_diffusion_is_a_heat_step() {
    let g = grid(1, 2.0, 64);
    let m = ModelParams { alpha: 0.0, ..model(0.05) };
    let mut spike = vec![0.0; 64];
    spike[32] = 0.5;
    let u = Field::from_values(g, spike).unwrap();
    let mut s = SimState::new(0.0, u.clone(), Field::zeros(g)).unwrap();
    let rp = RegParams { couple_potential: false, ..RegParams::new(m, 0.1, 0.0) };
    let dt = 0.9 * diffusion_dt(&g, 0.1);
    for _ in 0..50 {
        s = step_regularized(&s, &rp, dt).unwrap();
        assert!(s.u.min() >= 0.0);
        assert!((s.u.integral() - u.integral()).abs() < 1e-12);
    }
    assert!(s.u.max() < 0.5 * u.max());
    // one explicit heat step, written out
    let one = step_regularized(&SimState::new(0.0, u.clone(), Field::zeros(g)).unwrap(), &rp, dt).unwrap();
    let lap = laplacian(&u);
    for i in 0..64 {
        assert!((one.u.values()[i] - (u.values()[i] + dt * 0.1 * lap.values()[i])).abs() < 1e-15);
    }
}

#[test]
fn sigma_zero_and_oversized_steps_are_rejected() {
    let g = grid(1, 2.0, 64);
    let s = bumps(g, &model(0.05), 0.5);
    assert!(step_regularized(&s, &RegParams::new(model(0.0), 0.1, 0.1), 1e-4).is_err());
    let rp = RegParams::new(model(0.05), 0.1, 0.1);
    let too_big = 2.0 * diffusion_dt(&g, 0.1);
    match step_regularized(&s, &rp, too_big) {
        Err(Error::StepTooLarge { bound, .. }) => assert_eq!(bound, "explicit diffusion"),
        other => panic!("expected StepTooLarge, got {other:?}"),
    }
}

#[test]
fn probe_reports_sub_homeostatic_runs() {
    let g = grid(1, 8.0, 256);
    let m = model(0.05);
    let s = bumps(g, &m, 0.8);
    let rp = RegParams::new(m.clone(), 0.01, 0.01);
    let traj = run(&RegScheme::new(g, &rp).unwrap(), &s, &RunOptions::new(0.2, 0.1)).unwrap();
    let rep = regularized_max_principle_probe(&traj, m.p_h, m.gamma);
    assert!(rep.max_pressure < m.p_h);
    assert!(!rep.excursion && !rep.initial_breach && rep.q_inactive());

    let h = InitPreset::new(PresetKind::Homeostatic).build(g, &m).unwrap();
    let traj = run(&RegScheme::new(g, &rp).unwrap(), &h, &RunOptions::new(0.05, 0.05)).unwrap();
    let rep = regularized_max_principle_probe(&traj, m.p_h, m.gamma);
    assert!((rep.max_pressure - m.p_h).abs() < 1e-12 && rep.q_inactive());
}

#[test]
fn probe_flags_inadmissible_initial_data() {
    let g = grid(1, 8.0, 256);
    let m = model(0.05);
    let s = bumps(g, &m, 1.5);
    assert!(InitPreset { width: 0.8, offset: 0.75, peak_pressure: Some(1.5), ..Default::default() }
        .build(g, &m)
        .is_err());
    let rp = RegParams::new(m.clone(), 0.01, 0.01);
    let traj = run(&RegScheme::new(g, &rp).unwrap(), &s, &RunOptions::new(0.05, 0.05)).unwrap();
    let rep = regularized_max_principle_probe(&traj, m.p_h, m.gamma);
    assert!(rep.initial_breach && rep.excursion);
    assert!(q_truncate(&traj.snapshots[0].pressure(m.gamma).unwrap(), m.p_h).max() <= 2.0 * m.p_h);
}

#[test]
fn zero_regularization_step_tracks_brinkman_at_first_order() {
    let m = model(0.05);
    let gaps: Vec<f64> = [128usize, 256, 512]
        .iter()
        .map(|&n| {
            let g = grid(1, 8.0, n);
            let s = bumps(g, &m, 0.8);
            let dt = 0.05 * g.dx();
            let a = step_regularized(&s, &RegParams::new(m.clone(), 0.0, 0.0), dt).unwrap();
            let b = step_brinkman(&s, &m, dt).unwrap();
            lq_norm(&a.density().sub(&b.density()), 1.0).unwrap() / dt
        })
        .collect();
    for w in gaps.windows(2) {
        assert!(w[0] / w[1] >= 1.5, "gaps {gaps:?}");
    }
}

#[test]
fn product_rule_identity_holds_to_first_order() {
    let sigma = 0.05;
    let errs: Vec<f64> = [128usize, 256, 512]
        .iter()
        .map(|&n| {
            let g = grid(1, 4.0, n);
            let u = Field::from_fn(g, |x| (-(x[0] - 0.3).powi(2)).exp());
            let p = Field::from_fn(g, |x| 0.5 * (-x[0] * x[0] / 2.0).exp());
            let w = solve_brinkman(&p, sigma).unwrap();
            let div_form = divergence(&upwind_flux(&u, &gradient(&w)));
            let expanded = centered_dot(&u, &w)
                .unwrap()
                .add(&u.zip_map(&w.sub(&p), |a, b| a * b / sigma));
            lq_norm(&div_form.sub(&expanded), 1.0).unwrap()
        })
        .collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] >= 1.5, "errors {errs:?}");
    }
}

#[test]
fn consistency_gap_shrinks_with_regularization() {
    let g = grid(1, 8.0, 256);
    let m = model(0.05);
    let s = bumps(g, &m, 0.8);
    let out = consistency_sweep(
        g,
        &m,
        &[(0.1, 0.1), (0.01, 0.01), (0.001, 0.001)],
        &s,
        &RunOptions::new(0.25, 0.05),
        Execution::Sequential,
        true,
    )
    .unwrap();
    let gaps: Vec<f64> = out.rows.iter().map(|r| r.l1_gap).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(out.rows.iter().all(|r| r.q_active_steps == 0));
}

proptest! {
    #[test]
    fn truncation_is_idempotent_monotone_and_lipschitz(
        a in prop::collection::vec(0.0f64..5.0, 16),
        b in prop::collection::vec(0.0f64..5.0, 16),
        p_h in 0.1f64..2.0,
    ) {
        let g = grid(1, 1.0, 16);
        let fa = Field::from_values(g, a.clone()).unwrap();
        let fb = Field::from_values(g, b.clone()).unwrap();
        let qa = q_truncate(&fa, p_h);
        let qb = q_truncate(&fb, p_h);
        prop_assert_eq!(q_truncate(&qa, p_h), qa.clone());
        for i in 0..16 {
            let (x, y) = (qa.values()[i], qb.values()[i]);
            prop_assert!((x - y).abs() <= (a[i] - b[i]).abs());
            if a[i] <= b[i] {
                prop_assert!(x <= y);
            }
        }
    }
}
