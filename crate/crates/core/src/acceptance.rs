//! The built-in acceptance suite executed by `verify`.

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use crate::config::ExperimentConfig;
use crate::diagnostics::{energy_ledger, sigma_sweep, SweepConfig, SweepOutcome};
use crate::dynamics::{run, GrowthScheme, RunOptions, SimState};
use crate::elliptic::{kernel_k_sigma, BrinkmanSolver};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid, GridSpec};
use crate::par::Execution;
use crate::params::ModelParams;
use crate::presets::{InitPreset, PresetKind};
use crate::regularized::{consistency_sweep, ConsistencyOutcome};

pub const SWEEP_SIGMAS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
pub const ELLIPTIC_SIGMAS: [f64; 3] = [1e-4, 1e-2, 1.0];
pub const REG_SIGMA: f64 = 5e-2;
pub const REG_EPS: [f64; 3] = [1e-1, 1e-2, 1e-3];
/// Initial peak pressure as a fraction of `p_H`.
pub const PEAK_FRACTION: f64 = 0.8;
pub const SWEEP_T: f64 = 0.5;

/// Geometry shared by the dynamic criteria.
#[derive(Debug, Clone)]
pub struct SuiteSetup {
    pub grid: Grid,
    pub width: f64,
    pub offset: f64,
    pub output_every: f64,
    pub execution: Execution,
}

impl Default for SuiteSetup {
    fn default() -> Self {
        Self {
            grid: Grid::new(GridSpec::new(1, 8.0, 512)).expect("valid default grid"),
            width: 0.8,
            offset: 0.75,
            output_every: 0.01,
            execution: Execution::Parallel,
        }
    }
}

impl SuiteSetup {
    /// Takes the grid, bump geometry and output spacing from a config; every
    /// other parameter is fixed by the suite.
    pub fn from_config(cfg: &ExperimentConfig, execution: Execution) -> Self {
        Self {
            grid: cfg.grid,
            width: cfg.init.width,
            offset: cfg.init.offset,
            output_every: cfg.time.output_every,
            execution,
        }
    }

    fn preset(&self) -> InitPreset {
        InitPreset {
            kind: PresetKind::GaussianPair,
            width: self.width,
            offset: self.offset,
            ..Default::default()
        }
    }

    fn initial(&self, grid: Grid, model: &ModelParams) -> Result<SimState> {
        InitPreset {
            peak_pressure: Some(PEAK_FRACTION * model.p_h),
            ..self.preset()
        }
        .build(grid, model)
    }

    fn options(&self, t_final: f64) -> RunOptions {
        let every = if self.output_every > 0.0 && self.output_every <= t_final {
            self.output_every
        } else {
            t_final
        };
        RunOptions::new(t_final, every)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(id: u32, name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            id,
            name,
            passed,
            detail,
        }
    }

    fn failed(id: u32, name: &'static str, err: &Error) -> Self {
        Self::new(id, name, false, format!("error: {err}"))
    }

    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<26} {}  {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

/// Outcomes plus the data the runner writes out.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub outcomes: Vec<Outcome>,
    pub sweep: Option<SweepOutcome>,
    pub consistency: Option<ConsistencyOutcome>,
    /// `(sigma, min, mass, ||grad K||_1)` on the 1D grid.
    pub kernel_stats: Vec<(f64, f64, f64, f64)>,
}

fn is_negativity(e: &Error) -> bool {
    match e {
        Error::NegativeDensity { .. } => true,
        Error::Step { source, .. } | Error::SweepMember { source, .. } => is_negativity(source),
        _ => false,
    }
}

/// Tracks positivity across every dynamic run of the suite.
#[derive(Default)]
struct Positivity {
    runs: usize,
    failures: Vec<String>,
}

impl Positivity {
    fn check<T>(&mut self, label: &str, r: &Result<T>, states: impl Fn(&T) -> Vec<f64>) {
        self.runs += 1;
        match r {
            Err(e) if is_negativity(e) => self.failures.push(format!("{label}: {e}")),
            Ok(t) => {
                let min = states(t).into_iter().fold(f64::INFINITY, f64::min);
                if min < 0.0 {
                    self.failures.push(format!("{label}: min density {min:e}"));
                }
            }
            Err(_) => {}
        }
    }
}

fn traj_min(t: &crate::dynamics::Trajectory) -> Vec<f64> {
    t.snapshots.iter().map(|s| s.u.min().min(s.v.min())).collect()
}

pub fn criterion_elliptic() -> Outcome {
    const NAME: &str = "elliptic exactness";
    let grids = [
        Grid::new(GridSpec::new(1, 8.0, 512)),
        Grid::new(GridSpec::new(2, 8.0, 64)),
    ];
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let mut worst = 0.0f64;
    for grid in grids {
        let grid = match grid {
            Ok(g) => g,
            Err(e) => return Outcome::failed(1, NAME, &e),
        };
        for sigma in ELLIPTIC_SIGMAS {
            let solver = match BrinkmanSolver::new(grid, sigma) {
                Ok(s) => s,
                Err(e) => return Outcome::failed(1, NAME, &e),
            };
            for _ in 0..100 {
                let scale = 10f64.powf(rng.random::<f64>() * 4.0 - 2.0);
                let values = (0..grid.len()).map(|_| scale * rng.random::<f64>()).collect();
                let p = Field::from_values(grid, values).expect("finite");
                let w = match solver.solve(&p) {
                    Ok(w) => w,
                    Err(e) => return Outcome::failed(1, NAME, &e),
                };
                worst = worst.max(solver.residual(&w, &p).max_abs() / p.max_abs());
            }
        }
    }
    Outcome::new(
        1,
        NAME,
        worst <= 1e-12,
        format!("max relative residual {worst:.3e} (tol 1e-12)"),
    )
}

/// Periodized `(2 sqrt(sigma))^-1 exp(-|x| / sqrt(sigma))` on `[-L, L)`.
pub fn analytic_kernel_1d(x: f64, sigma: f64, half_width: f64) -> f64 {
    let s = sigma.sqrt();
    let images = (12.0 * s / (2.0 * half_width)).ceil() as i64 + 1;
    (-images..=images)
        .map(|m| (-(x + 2.0 * half_width * m as f64).abs() / s).exp())
        .sum::<f64>()
        / (2.0 * s)
}

/// `(L1 distance of the cell reconstruction, max sampled error)` between the
/// discrete 1D kernel and the analytic one.
pub fn kernel_error_1d(n: usize, half_width: f64, sigma: f64) -> Result<(f64, f64)> {
    const SUB: usize = 64;
    let grid = Grid::new(GridSpec::new(1, half_width, n))?;
    let k = kernel_k_sigma(grid, sigma)?;
    let h = grid.dx();
    let mut l1 = 0.0;
    let mut sampled = 0.0f64;
    for (j, &kj) in k.values().iter().enumerate() {
        let xj = k.offset_position(j)[0];
        sampled = sampled.max((kj - analytic_kernel_1d(xj, sigma, half_width)).abs());
        // midpoint rule on SUB sub-cells; the kink at 0 sits on a sub-cell edge
        let cell: f64 = (0..SUB)
            .map(|s| {
                let x = xj - 0.5 * h + (s as f64 + 0.5) * h / SUB as f64;
                (kj - analytic_kernel_1d(x, sigma, half_width)).abs()
            })
            .sum();
        l1 += cell * h / SUB as f64;
    }
    Ok((l1, sampled))
}

pub fn criterion_kernel() -> (Outcome, Vec<(f64, f64, f64, f64)>) {
    const NAME: &str = "kernel facts";
    let mut stats = Vec::new();
    let mut min = f64::INFINITY;
    let mut mass_err = 0.0f64;
    for spec in [GridSpec::new(1, 8.0, 512), GridSpec::new(2, 8.0, 64)] {
        let grid = match Grid::new(spec) {
            Ok(g) => g,
            Err(e) => return (Outcome::failed(2, NAME, &e), stats),
        };
        for sigma in ELLIPTIC_SIGMAS {
            match kernel_k_sigma(grid, sigma) {
                Ok(k) => {
                    min = min.min(k.min());
                    mass_err = mass_err.max((k.mass() - 1.0).abs());
                    if grid.dim() == 1 {
                        stats.push((sigma, k.min(), k.mass(), k.gradient_l1()));
                    }
                }
                Err(e) => return (Outcome::failed(2, NAME, &e), stats),
            }
        }
    }
    let mut errs = Vec::new();
    for n in [256, 512, 1024] {
        match kernel_error_1d(n, 8.0, 1.0) {
            Ok(e) => errs.push(e),
            Err(e) => return (Outcome::failed(2, NAME, &e), stats),
        }
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0].0 / w[1].0).collect();
    let halving = ratios.iter().all(|r| (1.5..=2.5).contains(r));
    let passed = min >= -1e-14 && mass_err <= 1e-12 && halving;
    let detail = format!(
        "min {min:.2e}, mass err {mass_err:.2e}, L1 err {:.3e}/{:.3e}/{:.3e} ratios {:.3}/{:.3} (sampled {:.2e}/{:.2e}/{:.2e})",
        errs[0].0, errs[1].0, errs[2].0, ratios[0], ratios[1], errs[0].1, errs[1].1, errs[2].1
    );
    (Outcome::new(2, NAME, passed, detail), stats)
}

fn criterion_max_principle(setup: &SuiteSetup, pos: &mut Positivity) -> Outcome {
    const NAME: &str = "maximum principle";
    let cases: Vec<(f64, f64)> = [1.5, 2.0, 4.0]
        .iter()
        .flat_map(|&g| [1e-1, 1e-3].map(|s| (g, s)))
        .collect();
    let results = crate::par::map_members(setup.execution, &cases, |&(gamma, sigma)| {
        let model = ModelParams {
            gamma,
            sigma,
            ..Default::default()
        };
        let s0 = setup.initial(setup.grid, &model)?;
        run(&GrowthScheme::brinkman(setup.grid, &model)?, &s0, &setup.options(1.0))
    });
    let mut worst = 0.0f64;
    let mut breaches = 0;
    let mut errors = Vec::new();
    for ((gamma, sigma), r) in cases.iter().zip(&results) {
        pos.check(&format!("gamma={gamma} sigma={sigma}"), r, traj_min);
        match r {
            Ok(t) => {
                worst = worst.max(t.max_pressure);
                breaches += t.max_principle_breaches;
            }
            Err(e) => errors.push(format!("gamma={gamma} sigma={sigma}: {e}")),
        }
    }
    let passed = errors.is_empty() && worst <= 1.0 + 1e-8 && breaches == 0;
    let mut detail = format!("max p / p_H = {worst:.10} over 6 runs, breaches {breaches}");
    if !errors.is_empty() {
        detail.push_str(&format!("; errors: {}", errors.join("; ")));
    }
    Outcome::new(3, NAME, passed, detail)
}

/// `max_n |R_n|` for the energy-identity refinement pair.
pub fn energy_residual(setup: &SuiteSetup, n: usize, dt: f64, t_final: f64) -> Result<f64> {
    let grid = Grid::new(GridSpec::new(setup.grid.dim(), setup.grid.half_width(), n))?;
    let model = ModelParams::default();
    let s0 = setup.initial(grid, &model)?;
    let traj = run(
        &GrowthScheme::brinkman(grid, &model)?,
        &s0,
        &RunOptions::new(t_final, t_final).fixed(dt),
    )?;
    Ok(energy_ledger(&traj, &model).max_abs_residual())
}

fn criterion_energy(setup: &SuiteSetup, pos: &mut Positivity) -> Outcome {
    const NAME: &str = "energy identity";
    const T: f64 = 0.25;
    const DT: f64 = 1.0 / 512.0;
    let n = setup.grid.n() / 2;
    let pair = [(n, DT), (2 * n, DT / 2.0)];
    let rs = crate::par::map_members(setup.execution, &pair, |&(n, dt)| {
        energy_residual(setup, n, dt, T)
    });
    let (r0, r1) = match (&rs[0], &rs[1]) {
        (Ok(a), Ok(b)) => (*a, *b),
        (Err(e), _) | (_, Err(e)) => return Outcome::failed(4, NAME, e),
    };
    let ratio = r0 / r1;

    // growth switched off
    let model = ModelParams {
        alpha: 0.0,
        ..Default::default()
    };
    let r = setup
        .initial(setup.grid, &model)
        .and_then(|s0| {
            run(
                &GrowthScheme::brinkman(setup.grid, &model)?,
                &s0,
                &setup.options(T),
            )
        });
    pos.check("energy alpha=0", &r, traj_min);
    let traj = match r {
        Ok(t) => t,
        Err(e) => return Outcome::failed(4, NAME, &e),
    };
    let ledger = energy_ledger(&traj, &model);
    let s_max = ledger.entries.iter().fold(0.0f64, |m, e| m.max(e.source.abs()));
    let d_min = ledger.min_dissipation();
    let rate_max = ledger.max_rate();
    let passed = ratio >= 1.5 && s_max == 0.0 && d_min >= 0.0 && rate_max <= 1e-10;
    Outcome::new(
        4,
        NAME,
        passed,
        format!(
            "max|R| {r0:.3e} -> {r1:.3e} (ratio {ratio:.3}); alpha=0: max S {s_max:.1e}, min D {d_min:.3e}, max d/dt int p {rate_max:.3e}"
        ),
    )
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn criterion_sweep(sweep: &SweepOutcome) -> Outcome {
    const NAME: &str = "inviscid limit";
    let cols = sweep.report.columns();
    let col = |name: &str| {
        cols.iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.clone())
            .unwrap_or_default()
    };
    let (ep2, elap, enorm, trace) = (col("e_p_q2"), col("e_lap"), col("e_norm"), col("trace_gap"));
    let monotone = [&ep2, &elap, &enorm].iter().all(|c| strictly_decreasing(c));
    let shrink: Vec<(String, f64)> = cols
        .iter()
        .map(|(n, v)| (n.clone(), v.last().unwrap_or(&0.0) / v.first().unwrap_or(&1.0)))
        .collect();
    let shrink_ok = shrink.iter().all(|(_, r)| *r <= 0.2);
    let trace_ok = strictly_decreasing(&trace);
    let worst = shrink
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .unwrap_or_default();
    Outcome::new(
        5,
        NAME,
        monotone && shrink_ok && trace_ok,
        format!(
            "e_p2 [{}] e_lap [{}] e_norm [{}] trace [{}]; worst last/first {} {:.3}",
            fmt_list(&ep2),
            fmt_list(&elap),
            fmt_list(&enorm),
            fmt_list(&trace),
            worst.0,
            worst.1
        ),
    )
}

fn criterion_apriori(sweep: &SweepOutcome) -> Outcome {
    const NAME: &str = "a priori uniformity";
    let b: Vec<f64> = sweep.members.iter().map(|m| m.apriori.last().grad_w_cum).collect();
    let c: Vec<f64> = sweep.members.iter().map(|m| m.apriori.last().sigma_lap_cum).collect();
    let ratio = |v: &[f64]| v.iter().copied().fold(0.0, f64::max) / v[0];
    let (rb, rc) = (ratio(&b), ratio(&c));
    let envelope = sweep.members.iter().all(|m| m.apriori.moments_within_envelope());
    let headroom = sweep
        .members
        .iter()
        .flat_map(|m| m.apriori.rows.iter().skip(1))
        .map(|r| (r.u_moment / r.u_envelope).max(r.v_moment / r.v_envelope))
        .fold(0.0f64, f64::max);
    Outcome::new(
        6,
        NAME,
        rb <= 2.0 && rc <= 2.0 && envelope,
        format!(
            "B [{}] ratio {rb:.3}; C [{}] ratio {rc:.3}; max moment/envelope {headroom:.4}",
            fmt_list(&b),
            fmt_list(&c)
        ),
    )
}

fn criterion_shift(sweep: &SweepOutcome) -> Outcome {
    const NAME: &str = "shift modulus";
    let mut ok = true;
    let mut first = Vec::new();
    let mut spread = Vec::new();
    for m in &sweep.members {
        let w: Vec<f64> = m.shift_curve.iter().map(|(_, o)| *o).collect();
        ok &= w.windows(2).all(|p| p[1] >= p[0]);
        let r = w[0] / w[w.len() - 1];
        ok &= r <= 0.25;
        first.push(w[0]);
        spread.push(r);
    }
    let max = first.iter().copied().fold(0.0, f64::max);
    let min = first.iter().copied().fold(f64::INFINITY, f64::min);
    let uniform = max / min;
    Outcome::new(
        7,
        NAME,
        ok && uniform <= 5.0,
        format!(
            "omega(dx) [{}], omega(dx)/omega(8dx) [{}], max/min {uniform:.3}",
            fmt_list(&first),
            spread.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn criterion_consistency(c: &ConsistencyOutcome) -> Outcome {
    const NAME: &str = "regularized consistency";
    let gaps: Vec<f64> = c.rows.iter().map(|r| r.l1_gap).collect();
    let q: usize = c.rows.iter().map(|r| r.q_active_steps).sum();
    Outcome::new(
        8,
        NAME,
        strictly_decreasing(&gaps) && q == 0,
        format!("L1 gaps [{}], Q-active steps {q}", fmt_list(&gaps)),
    )
}

fn criterion_conservation(setup: &SuiteSetup, pos: &mut Positivity) -> Outcome {
    const NAME: &str = "conservation/positivity";
    let model = ModelParams {
        alpha: 0.0,
        ..Default::default()
    };
    let r = setup.initial(setup.grid, &model).and_then(|s0| {
        run(
            &GrowthScheme::brinkman(setup.grid, &model)?,
            &s0,
            &RunOptions::new(1.0, 1.0).fixed(1.0 / 1024.0),
        )
    });
    pos.check("conservation", &r, traj_min);
    let traj = match r {
        Ok(t) => t,
        Err(e) => return Outcome::failed(9, NAME, &e),
    };
    let m0 = traj.steps[0].mass_u + traj.steps[0].mass_v;
    let drift = traj
        .steps
        .iter()
        .map(|r| r.mass_u + r.mass_v)
        .chain([traj.final_record.mass_u + traj.final_record.mass_v])
        .map(|m| (m - m0).abs() / m0)
        .fold(0.0f64, f64::max);
    let passed = drift <= 1e-12 && pos.failures.is_empty() && traj.steps.len() >= 1000;
    let mut detail = format!(
        "relative mass drift {drift:.2e} over {} steps; positivity held in {} runs",
        traj.steps.len(),
        pos.runs
    );
    if !pos.failures.is_empty() {
        detail = format!("{detail}; negativity: {}", pos.failures.join("; "));
    }
    Outcome::new(9, NAME, passed, detail)
}

/// Runs criteria 1-9. Determinism (criterion 10) needs two full runs and
/// is judged by the runner.
pub fn run_suite(setup: &SuiteSetup) -> SuiteResult {
    let mut pos = Positivity::default();
    let mut outcomes = vec![criterion_elliptic()];
    let (kernel, kernel_stats) = criterion_kernel();
    outcomes.push(kernel);
    outcomes.push(criterion_max_principle(setup, &mut pos));
    outcomes.push(criterion_energy(setup, &mut pos));

    let model = ModelParams::default();
    let sweep = setup.initial(setup.grid, &model).and_then(|s0| {
        sigma_sweep(&SweepConfig {
            grid: setup.grid,
            model: model.clone(),
            sigmas: SWEEP_SIGMAS.to_vec(),
            initial: s0,
            options: setup.options(SWEEP_T),
            q_list: vec![1.0, 2.0],
            shifts: (1..=8).collect(),
            execution: setup.execution,
        })
    });
    pos.check("sigma sweep", &sweep, |s| {
        s.members
            .iter()
            .flat_map(|m| traj_min(&m.trajectory))
            .chain(traj_min(&s.reference))
            .collect()
    });
    let sweep = match sweep {
        Ok(s) => {
            outcomes.push(criterion_sweep(&s));
            outcomes.push(criterion_apriori(&s));
            outcomes.push(criterion_shift(&s));
            Some(s)
        }
        Err(e) => {
            outcomes.push(Outcome::failed(5, "inviscid limit", &e));
            outcomes.push(Outcome::failed(6, "a priori uniformity", &e));
            outcomes.push(Outcome::failed(7, "shift modulus", &e));
            None
        }
    };

    let reg_model = model.with_sigma(REG_SIGMA);
    let pairs: Vec<(f64, f64)> = REG_EPS.iter().map(|&e| (e, e)).collect();
    let consistency = setup.initial(setup.grid, &reg_model).and_then(|s0| {
        consistency_sweep(
            setup.grid,
            &reg_model,
            &pairs,
            &s0,
            &setup.options(SWEEP_T),
            setup.execution,
            true,
        )
    });
    pos.check("regularized", &consistency, |c| {
        c.regularized
            .iter()
            .chain([&c.reference])
            .flat_map(traj_min)
            .collect()
    });
    let consistency = match consistency {
        Ok(c) => {
            outcomes.push(criterion_consistency(&c));
            Some(c)
        }
        Err(e) => {
            outcomes.push(Outcome::failed(8, "regularized consistency", &e));
            None
        }
    };
    outcomes.push(criterion_conservation(setup, &mut pos));
    SuiteResult {
        outcomes,
        sweep,
        consistency,
        kernel_stats,
    }
}
