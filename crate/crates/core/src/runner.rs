//! Command implementations behind the CLI.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::acceptance::{run_suite, Outcome, SuiteResult, SuiteSetup};
use crate::config::{parse_config, ExperimentConfig, SigmaSpec};
use crate::diagnostics::{
    apriori_monitor, energy_ledger, fmt_q, sigma_sweep, AprioriReport, ConvergenceReport,
    EnergyLedger, SweepConfig, SweepMember, SweepOutcome,
};
use crate::dynamics::{run, GrowthScheme, Trajectory};
use crate::error::{Error, Result};
use crate::io::{export_trajectory, write_atomic, write_csv, write_field, write_field_csv};
use crate::par::Execution;
use crate::plot::{loglog_svg, Series};
use crate::regularized::{consistency_sweep, ConsistencyRow};

/// The reference configuration shipped with the binary.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.cfg");

pub const OUT_ENV: &str = "BDLAB_OUT";

#[derive(Debug, Clone, Default)]
pub struct RunnerOptions {
    pub jobs: Option<usize>,
    /// Overrides both the config and `BDLAB_OUT`.
    pub out: Option<PathBuf>,
    pub plots: bool,
}

impl RunnerOptions {
    pub fn execution(&self) -> Execution {
        Execution::from_jobs(self.jobs)
    }

    /// `--out`, then `BDLAB_OUT`, then the config's `[output] dir`.
    pub fn output_root(&self, cfg: &ExperimentConfig) -> PathBuf {
        if let Some(p) = &self.out {
            return p.clone();
        }
        match std::env::var_os(OUT_ENV) {
            Some(p) if !p.is_empty() => PathBuf::from(p),
            _ => cfg.output.dir.clone(),
        }
    }

    fn plots(&self, cfg: &ExperimentConfig) -> bool {
        self.plots || cfg.output.plots
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&fs::read_to_string(path)?)
}

fn prepare_dir(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join("effective.cfg"), cfg.effective().as_bytes())
}

fn sigma_label(sigma: f64) -> String {
    format!("sigma_{sigma:e}")
}

pub fn write_ledger(path: &Path, ledger: &EnergyLedger) -> Result<PathBuf> {
    let rows: Vec<String> = ledger
        .entries
        .iter()
        .map(|e| {
            format!(
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                e.t, e.dt, e.int_p, e.rate, e.dissipation, e.source, e.residual
            )
        })
        .collect();
    write_csv(path, "t,dt,int_p,rate,dissipation,source,residual", &rows)
}

pub fn write_apriori(path: &Path, report: &AprioriReport) -> Result<PathBuf> {
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.t,
                r.p_l1,
                r.p_linf,
                r.w_l1,
                r.w_linf,
                r.grad_w_cum,
                r.sigma_lap_cum,
                r.p_moment,
                r.u_moment,
                r.v_moment,
                r.max_dp_dt,
                r.u_envelope,
                r.v_envelope
            )
        })
        .collect();
    write_csv(
        path,
        "t,p_l1,p_linf,w_l1,w_linf,grad_w_cum,sigma_lap_cum,p_moment,u_moment,v_moment,max_dp_dt,u_envelope,v_envelope",
        &rows,
    )
}

fn write_trajectory(dir: &Path, traj: &Trajectory, gamma: f64, binary: bool) -> Result<()> {
    if binary {
        export_trajectory(&dir.join("trajectory"), traj, gamma)?;
    }
    let fin = traj.final_state();
    if fin.grid().dim() == 1 {
        write_field_csv(&dir.join("final_u.csv"), &fin.u)?;
        write_field_csv(&dir.join("final_v.csv"), &fin.v)?;
    }
    Ok(())
}

/// Summary of `run`.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub steps: usize,
    pub max_pressure: f64,
    pub max_abs_residual: f64,
}

pub fn cmd_run(cfg: &ExperimentConfig, opts: &RunnerOptions) -> Result<RunSummary> {
    let SigmaSpec::Single(sigma) = cfg.sigma else {
        return Err(Error::Config(
            "run needs a single 'sigma'; use sweep for a list".into(),
        ));
    };
    let model = cfg.model.with_sigma(sigma);
    let dir = opts.output_root(cfg);
    prepare_dir(&dir, cfg)?;
    let scheme = GrowthScheme::brinkman(cfg.grid, &model)?.with_cfl(cfg.time.cfl);
    let traj = run(&scheme, &cfg.initial_state()?, &cfg.run_options())?;
    let ledger = energy_ledger(&traj, &model);
    write_ledger(&dir.join("ledger.csv"), &ledger)?;
    write_apriori(&dir.join("apriori.csv"), &apriori_monitor(&traj, &model)?)?;
    write_trajectory(&dir, &traj, model.gamma, cfg.output.binary)?;
    Ok(RunSummary {
        dir,
        steps: traj.steps.len(),
        max_pressure: traj.max_pressure,
        max_abs_residual: ledger.max_abs_residual(),
    })
}

pub fn write_report(path: &Path, report: &ConvergenceReport) -> Result<PathBuf> {
    write_csv(path, &report.csv_header(), &report.csv_rows())
}

fn write_shift_curves(path: &Path, members: &[SweepMember]) -> Result<PathBuf> {
    let rows: Vec<String> = members
        .iter()
        .flat_map(|m| {
            m.shift_curve
                .iter()
                .map(move |(y, w)| format!("{:e},{y:e},{w:e}", m.sigma))
        })
        .collect();
    write_csv(path, "sigma,y,omega", &rows)
}

fn report_plots(dir: &Path, report: &ConvergenceReport) -> Result<()> {
    let series: Vec<Series> = report
        .columns()
        .into_iter()
        .map(|(label, values)| Series {
            label,
            points: report.rows.iter().map(|r| r.sigma).zip(values).collect(),
        })
        .collect();
    write_atomic(
        &dir.join("convergence.svg"),
        loglog_svg("errors against the Darcy reference", "sigma", &series).as_bytes(),
    )?;
    for s in &series {
        write_atomic(
            &dir.join(format!("{}.svg", s.label)),
            loglog_svg(&s.label, "sigma", std::slice::from_ref(s)).as_bytes(),
        )?;
    }
    Ok(())
}

fn shift_plot(dir: &Path, members: &[SweepMember]) -> Result<()> {
    let series: Vec<Series> = members
        .iter()
        .map(|m| Series {
            label: format!("sigma={:e}", m.sigma),
            points: m.shift_curve.clone(),
        })
        .collect();
    write_atomic(
        &dir.join("shift_modulus.svg"),
        loglog_svg("space-shift modulus omega(y)", "y", &series).as_bytes(),
    )
}

/// Writes the report, shift curves, kernel statistics and one directory
/// per member.
fn write_sweep(dir: &Path, sweep: &SweepOutcome, gamma: f64, binary: bool, plots: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_report(&dir.join("convergence.csv"), &sweep.report)?;
    write_shift_curves(&dir.join("shift_modulus.csv"), &sweep.members)?;
    let stats: Vec<String> = sweep
        .members
        .iter()
        .map(|m| {
            let last = m.apriori.last();
            format!(
                "{:e},{:e},{:e},{:e},{}",
                m.sigma,
                m.kernel_grad_l1,
                last.grad_w_cum,
                last.sigma_lap_cum,
                m.trajectory.steps.len()
            )
        })
        .collect();
    write_csv(
        &dir.join("kernel_stats.csv"),
        "sigma,grad_kernel_l1,grad_w_cum,sigma_lap_cum,steps",
        &stats,
    )?;
    let ref_dir = dir.join("reference");
    fs::create_dir_all(&ref_dir)?;
    write_trajectory(&ref_dir, &sweep.reference, gamma, binary)?;
    for m in &sweep.members {
        let mdir = dir.join(sigma_label(m.sigma));
        fs::create_dir_all(&mdir)?;
        write_apriori(&mdir.join("apriori.csv"), &m.apriori)?;
        write_trajectory(&mdir, &m.trajectory, gamma, binary)?;
    }
    if plots {
        report_plots(dir, &sweep.report)?;
        shift_plot(dir, &sweep.members)?;
    }
    Ok(())
}

pub fn cmd_sweep(cfg: &ExperimentConfig, opts: &RunnerOptions) -> Result<ConvergenceReport> {
    let dir = opts.output_root(cfg);
    prepare_dir(&dir, cfg)?;
    let q_names: Vec<String> = cfg.q_list.iter().map(|q| fmt_q(*q)).collect();
    log::info!("sweep over sigma {:?}, q in {:?}", cfg.sigma.values(), q_names);
    let sweep = sigma_sweep(&SweepConfig {
        grid: cfg.grid,
        model: cfg.model.clone(),
        sigmas: cfg.sigma.values(),
        initial: cfg.initial_state()?,
        options: cfg.run_options(),
        q_list: cfg.q_list.clone(),
        shifts: (1..=cfg.max_shift as isize).collect(),
        execution: opts.execution(),
    })?;
    write_sweep(&dir, &sweep, cfg.model.gamma, cfg.output.binary, opts.plots(cfg))?;
    Ok(sweep.report)
}

fn write_consistency(path: &Path, rows: &[ConsistencyRow]) -> Result<PathBuf> {
    let lines: Vec<String> = rows.iter().map(ConsistencyRow::csv).collect();
    write_csv(path, ConsistencyRow::CSV_HEADER, &lines)
}

/// Joint `(eps, delta)` table plus the `delta = 0` ordering.
pub fn cmd_regsweep(
    cfg: &ExperimentConfig,
    opts: &RunnerOptions,
) -> Result<(Vec<ConsistencyRow>, Vec<ConsistencyRow>)> {
    let reg = cfg.regularized.as_ref().ok_or_else(|| {
        Error::Config("regsweep needs a [regularized] section".into())
    })?;
    let dir = opts.output_root(cfg);
    prepare_dir(&dir, cfg)?;
    let model = cfg.model.with_sigma(reg.sigma);
    let s0 = cfg.init.build(cfg.grid, &model)?;
    let run_opts = cfg.run_options();
    let joint: Vec<(f64, f64)> = reg.eps.iter().copied().zip(reg.delta.iter().copied()).collect();
    let delta_first: Vec<(f64, f64)> = reg.eps.iter().map(|&e| (e, 0.0)).collect();
    let sweep = |pairs: &[(f64, f64)]| {
        consistency_sweep(
            cfg.grid,
            &model,
            pairs,
            &s0,
            &run_opts,
            opts.execution(),
            reg.couple_potential,
        )
    };
    let a = sweep(&joint)?;
    write_consistency(&dir.join("regsweep.csv"), &a.rows)?;
    let b = sweep(&delta_first)?;
    write_consistency(&dir.join("regsweep_delta_first.csv"), &b.rows)?;
    if cfg.output.binary {
        let fin = a.reference.final_state();
        write_field(&dir.join("brinkman_u.bdf"), &fin.u, fin.t)?;
        write_field(&dir.join("brinkman_v.bdf"), &fin.v, fin.t)?;
    }
    if opts.plots(cfg) {
        let series = vec![
            Series {
                label: "eps=delta".into(),
                points: a.rows.iter().map(|r| (r.eps, r.l1_gap)).collect(),
            },
            Series {
                label: "delta=0".into(),
                points: b.rows.iter().map(|r| (r.eps, r.l1_gap)).collect(),
            },
        ];
        write_atomic(
            &dir.join("regsweep.svg"),
            loglog_svg("L1 gap to Brinkman at final time", "eps", &series).as_bytes(),
        )?;
    }
    Ok((a.rows, b.rows))
}

fn write_suite(dir: &Path, suite: &SuiteResult, plots: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    let stats: Vec<String> = suite
        .kernel_stats
        .iter()
        .map(|(s, min, mass, g)| format!("{s:e},{min:e},{mass:e},{g:e}"))
        .collect();
    write_csv(&dir.join("kernel_facts.csv"), "sigma,min,mass,grad_kernel_l1", &stats)?;
    if let Some(sweep) = &suite.sweep {
        write_sweep(&dir.join("sweep"), sweep, 2.0, true, plots)?;
    }
    if let Some(c) = &suite.consistency {
        write_consistency(&dir.join("regsweep.csv"), &c.rows)?;
        for (k, t) in c.regularized.iter().enumerate() {
            let f = t.final_state();
            write_field(&dir.join(format!("regularized_{k}_u.bdf")), &f.u, f.t)?;
            write_field(&dir.join(format!("regularized_{k}_v.bdf")), &f.v, f.t)?;
        }
    }
    Ok(())
}

fn snapshot_dir(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) -> Result<()> {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).unwrap_or(&path).to_path_buf();
                out.insert(rel, fs::read(&path)?);
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out)?;
    Ok(out)
}

/// Byte-compares two output trees; returns the differing relative paths.
pub fn compare_dirs(a: &Path, b: &Path) -> Result<Vec<PathBuf>> {
    let (x, y) = (snapshot_dir(a)?, snapshot_dir(b)?);
    let mut diff: Vec<PathBuf> = x
        .iter()
        .filter(|(k, v)| y.get(*k) != Some(*v))
        .map(|(k, _)| k.clone())
        .collect();
    diff.extend(y.keys().filter(|k| !x.contains_key(*k)).cloned());
    Ok(diff)
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub outcomes: Vec<Outcome>,
    pub dir: PathBuf,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> Vec<u32> {
        self.outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect()
    }
}

/// Runs the acceptance suite twice (the second time into a scratch
/// directory) and adds the determinism verdict.
pub fn cmd_verify(cfg: &ExperimentConfig, opts: &RunnerOptions) -> Result<VerifyReport> {
    let dir = opts.output_root(cfg);
    prepare_dir(&dir, cfg)?;
    let setup = SuiteSetup::from_config(cfg, opts.execution());
    let plots = opts.plots(cfg);
    let artifacts = dir.join("artifacts");
    let first = run_suite(&setup);
    write_suite(&artifacts, &first, plots)?;

    let scratch = tempfile::tempdir()?;
    let second = run_suite(&setup);
    write_suite(scratch.path(), &second, plots)?;
    let diff = compare_dirs(&artifacts, scratch.path())?;
    let same_outcomes = first.outcomes == second.outcomes;
    let files = snapshot_dir(&artifacts)?.len();
    let mut outcomes = first.outcomes;
    let detail = if diff.is_empty() && same_outcomes {
        format!("{files} output files bitwise identical across two runs")
    } else {
        format!(
            "{} differing file(s): {}{}",
            diff.len(),
            diff.iter()
                .take(5)
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(", "),
            if same_outcomes { "" } else { "; criterion outcomes differ" }
        )
    };
    outcomes.push(Outcome {
        id: 10,
        name: "determinism",
        passed: diff.is_empty() && same_outcomes,
        detail,
    });
    let rows: Vec<String> = outcomes
        .iter()
        .map(|o| format!("{},{},{},\"{}\"", o.id, o.name, o.passed, o.detail.replace('"', "'")))
        .collect();
    write_csv(&dir.join("criteria.csv"), "id,name,passed,detail", &rows)?;
    let report = VerifyReport { outcomes, dir };
    let failures: Vec<String> = report.failures().iter().map(|i| i.to_string()).collect();
    write_atomic(
        &report.dir.join("failures.txt"),
        format!("{}\n", failures.join(",")).as_bytes(),
    )?;
    Ok(report)
}
