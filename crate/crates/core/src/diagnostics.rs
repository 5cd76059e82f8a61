//! Energy balance, a priori bounds and the sigma-sweep convergence report.

use crate::calculus::gradient;
use crate::dynamics::{run, GrowthScheme, RunOptions, SimState, Trajectory};
use crate::elliptic::{kernel_k_sigma, BrinkmanSolver};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::norms::{lq_norm, lq_spacetime_norm, second_moment, shift_modulus, trapezoid_weights};
use crate::par::{map_members, Execution};
use crate::params::ModelParams;

/// One row of the pressure energy balance
/// `d/dt int p + D = S`, `D = (gamma - 1) int (|grad W|^2 + sigma |Lap W|^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEntry {
    pub t: f64,
    pub dt: f64,
    pub int_p: f64,
    /// `(int p(t + dt) - int p(t)) / dt`.
    pub rate: f64,
    pub dissipation: f64,
    pub source: f64,
    /// `rate + dissipation - source`.
    pub residual: f64,
    /// The `sigma |Lap W|^2` part of the dissipation.
    pub sigma_lap_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    pub entries: Vec<EnergyEntry>,
    /// `int p` at the final state.
    pub final_int_p: f64,
    /// Worst `|sigma Lap_h W - (W - p)|` seen, relative to `max p`.
    pub max_identity_residual: f64,
    /// `C = gamma max(|F|, |G|)` on `[0, p_H]`.
    pub growth_constant: f64,
}

impl EnergyLedger {
    pub fn max_abs_residual(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.residual.abs()))
    }

    pub fn min_dissipation(&self) -> f64 {
        self.entries.iter().map(|e| e.dissipation).fold(f64::INFINITY, f64::min)
    }

    pub fn max_rate(&self) -> f64 {
        self.entries.iter().map(|e| e.rate).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `int p(t) <= int p(0) e^{C t}` at every recorded time, with a relative
    /// slack `tol`.
    pub fn gronwall_holds(&self, tol: f64) -> bool {
        let Some(first) = self.entries.first() else {
            return true;
        };
        let (p0, t0) = (first.int_p, first.t);
        let bound = |t: f64| p0 * (self.growth_constant * (t - t0)).exp() * (1.0 + tol) + tol;
        self.entries.iter().all(|e| e.int_p <= bound(e.t))
            && self
                .entries
                .last()
                .map(|e| self.final_int_p <= bound(e.t + e.dt))
                .unwrap_or(true)
    }
}

/// Builds the energy balance from the per-step records of a Brinkman or
/// Darcy run (Darcy records carry a zero sigma term).
pub fn energy_ledger(traj: &Trajectory, model: &ModelParams) -> EnergyLedger {
    let steps = &traj.steps;
    let mut entries = Vec::with_capacity(steps.len());
    let mut worst = 0.0f64;
    for (n, rec) in steps.iter().enumerate() {
        let next = steps.get(n + 1).map_or(traj.final_record.int_p, |r| r.int_p);
        let rate = (next - rec.int_p) / rec.dt;
        let dissipation = (model.gamma - 1.0) * (rec.grad_w_sq + rec.sigma_lap_sq);
        if rec.max_p > 0.0 {
            worst = worst.max(rec.identity_residual / rec.max_p);
        }
        entries.push(EnergyEntry {
            t: rec.t,
            dt: rec.dt,
            int_p: rec.int_p,
            rate,
            dissipation,
            source: rec.source,
            residual: rate + dissipation - rec.source,
            sigma_lap_sq: rec.sigma_lap_sq,
        });
    }
    EnergyLedger {
        entries,
        final_int_p: traj.final_record.int_p,
        max_identity_residual: worst,
        growth_constant: model.gamma * model.max_rate(),
    }
}

/// A priori quantities at one output time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AprioriRow {
    pub t: f64,
    pub p_l1: f64,
    pub p_linf: f64,
    pub w_l1: f64,
    pub w_linf: f64,
    /// `int_0^t ||grad W||^2`.
    pub grad_w_cum: f64,
    /// `sigma int_0^t ||Lap W||^2`.
    pub sigma_lap_cum: f64,
    /// `int p |x|^2`.
    pub p_moment: f64,
    pub u_moment: f64,
    pub v_moment: f64,
    /// Largest `max_x |dp/dt|` over steps so far (proxy for the time
    /// regularity of the pressure).
    pub max_dp_dt: f64,
    /// Gronwall envelope for the second moments of `u` and `v`.
    pub u_envelope: f64,
    pub v_envelope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AprioriReport {
    pub rows: Vec<AprioriRow>,
}

impl AprioriReport {
    pub fn last(&self) -> AprioriRow {
        self.rows.last().copied().unwrap_or_default()
    }

    /// Second moments stay under their Gronwall envelopes at every output
    /// (up to rounding: at `t = 0` the envelope is `sqrt(M0)^2`).
    pub fn moments_within_envelope(&self) -> bool {
        let ok = |m: f64, env: f64| m <= env * (1.0 + 1e-12);
        self.rows
            .iter()
            .all(|r| ok(r.u_moment, r.u_envelope) && ok(r.v_moment, r.v_envelope))
    }
}

/// `M(t) <= e^{R t} (sqrt(M0) + sqrt(n_max t B(t)))^2`, from
/// `dM/dt <= R M + 2 sqrt(M n_max) ||grad W||` with `R = max F` on `[0, p_H]`,
/// `n_max = p_H^(1/gamma)` and `B(t) = int_0^t ||grad W||^2`.
pub fn moment_envelope(m0: f64, t: f64, grad_w_cum: f64, model: &ModelParams) -> f64 {
    let r = model.max_rate();
    let n_max = model.homeostatic_density();
    let y = m0.sqrt() + (n_max * t * grad_w_cum).sqrt();
    (r * t).exp() * y * y
}

pub fn apriori_monitor(traj: &Trajectory, model: &ModelParams) -> Result<AprioriReport> {
    let grid = *traj.final_state().grid();
    let solver = BrinkmanSolver::new(grid, model.sigma)?;
    let s0 = &traj.snapshots[0];
    let (mu0, mv0) = (second_moment(&s0.u), second_moment(&s0.v));
    let mut rows = Vec::with_capacity(traj.snapshots.len());
    for (k, s) in traj.snapshots.iter().enumerate() {
        let p = s.pressure(model.gamma)?;
        let w = solver.solve(&p)?;
        let done = &traj.steps[..traj.snapshot_steps[k]];
        let grad_w_cum: f64 = done.iter().map(|r| r.dt * r.grad_w_sq).sum();
        let sigma_lap_cum: f64 = done.iter().map(|r| r.dt * r.sigma_lap_sq).sum();
        let max_dp_dt = done.iter().map(|r| r.max_dp_dt).fold(0.0, f64::max);
        let t = s.t - s0.t;
        rows.push(AprioriRow {
            t: s.t,
            p_l1: lq_norm(&p, 1.0)?,
            p_linf: p.max_abs(),
            w_l1: lq_norm(&w, 1.0)?,
            w_linf: w.max_abs(),
            grad_w_cum,
            sigma_lap_cum,
            p_moment: second_moment(&p),
            u_moment: second_moment(&s.u),
            v_moment: second_moment(&s.v),
            max_dp_dt,
            u_envelope: moment_envelope(mu0, t, grad_w_cum, model),
            v_envelope: moment_envelope(mv0, t, grad_w_cum, model),
        });
    }
    Ok(AprioriReport { rows })
}

/// Smooth bump of radius `L/2` centered at the origin, used to test the
/// weak convergence of the final densities.
pub fn trace_test_function(grid: Grid) -> Field {
    let r = 0.5 * grid.half_width();
    Field::from_fn(grid, |x| {
        let z = (x[0] * x[0] + x[1] * x[1]) / (r * r);
        if z >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - z)).exp()
        }
    })
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub grid: Grid,
    /// Base model; its `sigma` is ignored.
    pub model: ModelParams,
    pub sigmas: Vec<f64>,
    pub initial: SimState,
    pub options: RunOptions,
    pub q_list: Vec<f64>,
    /// Shifts (in cells along the first axis) for the modulus curves.
    pub shifts: Vec<isize>,
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub sigma: f64,
    /// `(q, ||p_sigma - p_ref||_{L^q})`.
    pub e_p: Vec<(f64, f64)>,
    pub e_grad: f64,
    pub e_lap: f64,
    pub e_norm: f64,
    pub trace_gap: f64,
}

impl ConvergenceRow {
    pub fn e_p(&self, q: f64) -> Option<f64> {
        self.e_p.iter().find(|(qq, _)| *qq == q).map(|(_, e)| *e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub q_list: Vec<f64>,
    /// Sorted by decreasing sigma.
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn csv_header(&self) -> String {
        let mut h = String::from("sigma");
        for q in &self.q_list {
            h.push_str(&format!(",e_p_q{}", fmt_q(*q)));
        }
        h.push_str(",e_grad,e_lap,e_norm,trace_gap");
        h
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                let mut s = format!("{:e}", r.sigma);
                for (_, e) in &r.e_p {
                    s.push_str(&format!(",{e:e}"));
                }
                s.push_str(&format!(
                    ",{:e},{:e},{:e},{:e}",
                    r.e_grad, r.e_lap, r.e_norm, r.trace_gap
                ));
                s
            })
            .collect()
    }

    /// Named columns (everything but sigma), in CSV order.
    pub fn columns(&self) -> Vec<(String, Vec<f64>)> {
        let mut cols: Vec<(String, Vec<f64>)> = self
            .q_list
            .iter()
            .enumerate()
            .map(|(k, q)| {
                (
                    format!("e_p_q{}", fmt_q(*q)),
                    self.rows.iter().map(|r| r.e_p[k].1).collect(),
                )
            })
            .collect();
        cols.push(("e_grad".into(), self.rows.iter().map(|r| r.e_grad).collect()));
        cols.push(("e_lap".into(), self.rows.iter().map(|r| r.e_lap).collect()));
        cols.push(("e_norm".into(), self.rows.iter().map(|r| r.e_norm).collect()));
        cols.push(("trace_gap".into(), self.rows.iter().map(|r| r.trace_gap).collect()));
        cols
    }
}

pub(crate) fn fmt_q(q: f64) -> String {
    if q.is_infinite() {
        "inf".into()
    } else if q.fract() == 0.0 {
        format!("{}", q as i64)
    } else {
        format!("{q}")
    }
}

/// Everything measured for one sigma.
#[derive(Debug, Clone)]
pub struct SweepMember {
    pub sigma: f64,
    pub trajectory: Trajectory,
    pub apriori: AprioriReport,
    /// `(y, omega(y))` with `y` in physical units.
    pub shift_curve: Vec<(f64, f64)>,
    /// Discrete `||grad K_sigma||_{L^1}` (zero for sigma = 0).
    pub kernel_grad_l1: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub report: ConvergenceReport,
    pub members: Vec<SweepMember>,
    pub reference: Trajectory,
}

struct History {
    times: Vec<f64>,
    p: Vec<Field>,
    grad_w: Vec<crate::grid::FaceField>,
    w_minus_p: Vec<Field>,
    final_density: Field,
}

fn history(traj: &Trajectory, model: &ModelParams, solver: &BrinkmanSolver) -> Result<History> {
    let mut p = Vec::new();
    let mut grad_w = Vec::new();
    let mut w_minus_p = Vec::new();
    for s in &traj.snapshots {
        let pk = s.pressure(model.gamma)?;
        let w = solver.solve(&pk)?;
        grad_w.push(gradient(&w));
        w_minus_p.push(w.sub(&pk));
        p.push(pk);
    }
    Ok(History {
        times: traj.times(),
        p,
        grad_w,
        w_minus_p,
        final_density: traj.final_state().density(),
    })
}

fn face_spacetime_sq(fields: &[crate::grid::FaceField], times: &[f64]) -> f64 {
    trapezoid_weights(times)
        .iter()
        .zip(fields)
        .map(|(w, f)| w * f.sq_integral())
        .sum()
}

/// Runs the Darcy reference and one Brinkman simulation per sigma on the
/// same grid and initial data, and compares them.
pub fn sigma_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    for &s in &cfg.sigmas {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!("sweep sigma must be >= 0, got {s}")));
        }
    }
    let mut sigmas = cfg.sigmas.clone();
    sigmas.sort_by(|a, b| b.total_cmp(a));

    // reference first, then members (concurrently)
    let darcy = GrowthScheme::darcy(cfg.grid, &cfg.model)?;
    let reference = run(&darcy, &cfg.initial, &cfg.options).map_err(|e| Error::SweepMember {
        sigma: 0.0,
        source: Box::new(e),
    })?;
    let ref_hist = history(&reference, &cfg.model, darcy.solver())?;
    let phi = trace_test_function(cfg.grid);

    let results = map_members(cfg.execution, &sigmas, |&sigma| {
        sweep_member(cfg, sigma, &ref_hist, &phi).map_err(|e| Error::SweepMember {
            sigma,
            source: Box::new(e),
        })
    });
    let mut rows = Vec::new();
    let mut members = Vec::new();
    for r in results {
        let (row, member) = r?;
        rows.push(row);
        members.push(member);
    }
    Ok(SweepOutcome {
        report: ConvergenceReport {
            q_list: cfg.q_list.clone(),
            rows,
        },
        members,
        reference,
    })
}

fn sweep_member(
    cfg: &SweepConfig,
    sigma: f64,
    reference: &History,
    phi: &Field,
) -> Result<(ConvergenceRow, SweepMember)> {
    let model = cfg.model.with_sigma(sigma);
    let scheme = GrowthScheme::brinkman(cfg.grid, &model)?;
    let traj = run(&scheme, &cfg.initial, &cfg.options)?;
    let hist = history(&traj, &model, scheme.solver())?;
    if hist.times.len() != reference.times.len() {
        return Err(Error::InvalidParameter("snapshot times differ from the reference".into()));
    }
    let times = &hist.times;

    let dp: Vec<Field> = hist.p.iter().zip(&reference.p).map(|(a, b)| a.sub(b)).collect();
    let e_p = cfg
        .q_list
        .iter()
        .map(|&q| Ok((q, lq_spacetime_norm(&dp, times, q)?)))
        .collect::<Result<Vec<_>>>()?;
    let dgrad: Vec<_> = hist
        .grad_w
        .iter()
        .zip(&reference.grad_w)
        .map(|(a, b)| a.sub(b))
        .collect();
    let e_grad = face_spacetime_sq(&dgrad, times).sqrt();
    let e_lap = lq_spacetime_norm(&hist.w_minus_p, times, 2.0)?;
    let e_norm =
        (face_spacetime_sq(&hist.grad_w, times) - face_spacetime_sq(&reference.grad_w, times)).abs();
    let trace_gap = crate::calculus::inner(&hist.final_density.sub(&reference.final_density), phi)?
        .abs();

    let dt_out = traj.output_dt();
    let shift_curve = cfg
        .shifts
        .iter()
        .map(|&s| {
            let mut shift = vec![0isize; cfg.grid.dim()];
            shift[0] = s;
            Ok((s as f64 * cfg.grid.dx(), shift_modulus(&hist.p, dt_out, &shift)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let apriori = apriori_monitor(&traj, &model)?;
    let kernel_grad_l1 = if sigma > 0.0 {
        kernel_k_sigma(cfg.grid, sigma)?.gradient_l1()
    } else {
        0.0
    };
    Ok((
        ConvergenceRow {
            sigma,
            e_p,
            e_grad,
            e_lap,
            e_norm,
            trace_gap,
        },
        SweepMember {
            sigma,
            trajectory: traj,
            apriori,
            shift_curve,
            kernel_grad_l1,
        },
    ))
}
