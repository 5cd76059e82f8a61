//! Explicit conservative time integration of the two-population system with
//! Brinkman (`-sigma Lap W + W = p`) or Darcy (`W = p`) velocity `-grad W`.

use crate::calculus::{divergence, gradient, laplacian};
use crate::elliptic::BrinkmanSolver;
use crate::error::{Error, Result};
use crate::grid::{pressure_field, FaceField, Field, Grid};
use crate::par::map_cells;
use crate::params::ModelParams;

/// Default Courant number.
pub const CFL: f64 = 0.4;
/// Guards the advective bound against division by zero.
pub const VEL_EPS: f64 = 1e-14;
/// Relative slack tolerated when a caller-supplied `dt` is compared with a
/// stability bound.
const DT_SLACK: f64 = 1e-12;
/// Relative excursion above `p_H` counted as a maximum-principle breach.
pub const MAX_PRINCIPLE_TOL: f64 = 1e-8;
/// Fraction of the box (per side) treated as the boundary layer.
const BOUNDARY_LAYER: f64 = 0.125;
/// Boundary-layer mass fraction above which a warning is emitted.
pub const BOUNDARY_MASS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: Field,
    pub v: Field,
}

impl SimState {
    pub fn new(t: f64, u: Field, v: Field) -> Result<Self> {
        u.same_grid(&v)?;
        Ok(Self { t, u, v })
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn density(&self) -> Field {
        self.u.add(&self.v)
    }

    pub fn pressure(&self, gamma: f64) -> Result<Field> {
        pressure_field(&self.u, &self.v, gamma)
    }

    pub fn mass(&self) -> f64 {
        self.u.integral() + self.v.integral()
    }

    /// Fraction of the total mass sitting in the outer layer of the box.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let g = self.grid();
        let total = self.mass();
        if total <= 0.0 {
            return 0.0;
        }
        let edge = g.half_width() * (1.0 - BOUNDARY_LAYER);
        let n = self.density();
        let near: f64 = (0..g.len())
            .filter(|&i| {
                let [x, y] = g.center(i);
                x.abs() > edge || (g.dim() == 2 && y.abs() > edge)
            })
            .map(|i| n[i])
            .sum();
        near * g.cell_volume() / total
    }
}

/// `(F(p), G(p))` cellwise.
pub fn reaction(p: &Field, model: &ModelParams) -> (Field, Field) {
    (p.map(|x| model.rates(x).0), p.map(|x| model.rates(x).1))
}

/// Face velocity `-grad W`.
pub fn velocity_from_potential(w: &Field) -> FaceField {
    gradient(w).map(|g| -g)
}

/// Donor-cell flux `vel+ rho_left + vel- rho_right`; faces with zero
/// velocity carry no flux.
pub fn upwind_flux(rho: &Field, vel: &FaceField) -> FaceField {
    let g = *rho.grid();
    let r = rho.values();
    let axes = vel
        .axes()
        .iter()
        .enumerate()
        .map(|(a, va)| {
            map_cells(g.len(), |i| {
                let s = va[i];
                if s > 0.0 {
                    s * r[i]
                } else if s < 0.0 {
                    s * r[g.shift(i, a, 1)]
                } else {
                    0.0
                }
            })
        })
        .collect();
    FaceField::from_raw(g, axes)
}

/// Largest stable explicit step for transport plus reaction:
/// `cfl * min(dx / (d max|vel| + eps), 1 / R_max)`.
pub fn cfl_dt(vel: &FaceField, model: &ModelParams, cfl: f64) -> f64 {
    let g = vel.grid();
    let adv = g.dx() / (g.dim() as f64 * vel.max_abs() + VEL_EPS);
    let r = model.max_rate();
    let react = if r > 0.0 { 1.0 / r } else { f64::INFINITY };
    cfl * adv.min(react)
}

/// Step bound for the degenerate diffusion hidden in the transport term.
///
/// Linearizing `div(n grad W)` with `W = K * n^gamma` gives a diffusion of
/// strength `gamma p K_hat(k)` on mode `k`; explicit Euler stays
/// non-oscillatory when `dt gamma p_max lambda / (1 + sigma lambda) <= 1` for
/// the largest discrete eigenvalue `lambda`.
pub fn parabolic_dt(grid: &Grid, gamma: f64, sigma: f64, p_max: f64, cfl: f64) -> f64 {
    if !(p_max > 0.0) {
        return f64::INFINITY;
    }
    let lambda = 4.0 * grid.dim() as f64 / (grid.dx() * grid.dx());
    cfl * (1.0 + sigma * lambda) / (gamma * p_max * lambda)
}

/// Per-step diagnostics, evaluated on the state at the start of the step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub max_p: f64,
    /// `sum p dx^d`.
    pub int_p: f64,
    /// `sum |grad W|^2 dx^d`.
    pub grad_w_sq: f64,
    /// `sigma sum |Lap_h W|^2 dx^d`, evaluated as `sum (W - p)^2 / sigma`.
    pub sigma_lap_sq: f64,
    /// `gamma sum (u F + v G) (u + v)^(gamma - 1) dx^d`.
    pub source: f64,
    /// `max |sigma Lap_h W - (W - p)|`, the discrete elliptic identity.
    pub identity_residual: f64,
    /// `max |p(t + dt) - p(t)| / dt`; filled in once the step is taken.
    pub max_dp_dt: f64,
    /// Truncation `Q` was active (regularized scheme only).
    pub q_active: bool,
}

/// A time-stepping scheme: a preparation phase computing the potential and
/// velocity for the current state, and an explicit update.
pub trait Scheme: Sync {
    type Prepared;

    fn grid(&self) -> &Grid;
    fn model(&self) -> &ModelParams;
    fn prepare(&self, s: &SimState) -> Result<Self::Prepared>;
    /// Largest step this scheme accepts from the prepared state.
    fn max_dt(&self, prep: &Self::Prepared) -> f64;
    fn advance(&self, s: &SimState, prep: &Self::Prepared, dt: f64) -> Result<SimState>;
    fn record(&self, s: &SimState, prep: &Self::Prepared) -> StepRecord;
    fn pressure_of<'a>(&self, prep: &'a Self::Prepared) -> &'a Field;
}

/// Conservative donor-cell scheme. With `sigma = 0` the velocity is `-grad p`
/// (Darcy); otherwise `-grad W` with `W` from the Brinkman solve.
#[derive(Debug, Clone)]
pub struct GrowthScheme {
    model: ModelParams,
    solver: BrinkmanSolver,
    cfl: f64,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub p: Field,
    pub w: Field,
    pub vel: FaceField,
}

impl GrowthScheme {
    pub fn brinkman(grid: Grid, model: &ModelParams) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            model: model.clone(),
            solver: BrinkmanSolver::new(grid, model.sigma)?,
            cfl: CFL,
        })
    }

    pub fn darcy(grid: Grid, model: &ModelParams) -> Result<Self> {
        Self::brinkman(grid, &model.with_sigma(0.0))
    }

    pub fn with_cfl(mut self, cfl: f64) -> Self {
        self.cfl = cfl;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.model.sigma
    }

    pub fn solver(&self) -> &BrinkmanSolver {
        &self.solver
    }

    /// One explicit step; `dt` must respect [`cfl_dt`].
    pub fn step(&self, s: &SimState, dt: f64) -> Result<SimState> {
        let prep = self.prepare(s)?;
        self.advance(s, &prep, dt)
    }
}

impl Scheme for GrowthScheme {
    type Prepared = Prepared;

    fn grid(&self) -> &Grid {
        self.solver.grid()
    }

    fn model(&self) -> &ModelParams {
        &self.model
    }

    fn prepare(&self, s: &SimState) -> Result<Prepared> {
        let p = s.pressure(self.model.gamma)?;
        let w = self.solver.solve(&p)?;
        let vel = velocity_from_potential(&w);
        Ok(Prepared { p, w, vel })
    }

    fn max_dt(&self, prep: &Prepared) -> f64 {
        let m = &self.model;
        let par = parabolic_dt(self.grid(), m.gamma, m.sigma, prep.p.max(), self.cfl);
        cfl_dt(&prep.vel, m, self.cfl).min(par)
    }

    fn advance(&self, s: &SimState, prep: &Prepared, dt: f64) -> Result<SimState> {
        let m = &self.model;
        let limit = cfl_dt(&prep.vel, m, self.cfl);
        if !(dt > 0.0) || dt > limit * (1.0 + DT_SLACK) {
            return Err(Error::StepTooLarge {
                dt,
                limit,
                bound: "advective/reaction CFL",
            });
        }
        let limit = parabolic_dt(self.grid(), m.gamma, m.sigma, prep.p.max(), self.cfl);
        if dt > limit * (1.0 + DT_SLACK) {
            return Err(Error::StepTooLarge {
                dt,
                limit,
                bound: "degenerate-diffusion",
            });
        }
        let (f, g) = reaction(&prep.p, &self.model);
        let u = transport_update(&s.u, &prep.vel, &f, dt)?;
        let v = transport_update(&s.v, &prep.vel, &g, dt)?;
        Ok(SimState { t: s.t + dt, u, v })
    }

    fn record(&self, s: &SimState, prep: &Prepared) -> StepRecord {
        energy_terms(s, prep, &self.model)
    }

    fn pressure_of<'a>(&self, prep: &'a Prepared) -> &'a Field {
        &prep.p
    }
}

/// `rho - dt div(upwind_flux(rho, vel)) + dt rho rate`, checked for
/// finiteness and sign.
fn transport_update(rho: &Field, vel: &FaceField, rate: &Field, dt: f64) -> Result<Field> {
    let div = divergence(&upwind_flux(rho, vel));
    let (r, d, k) = (rho.values(), div.values(), rate.values());
    let out = Field::from_raw(
        *rho.grid(),
        map_cells(r.len(), |i| r[i] - dt * d[i] + dt * r[i] * k[i]),
    );
    if let Some(index) = out.first_non_finite() {
        return Err(Error::NonFinite { index });
    }
    out.check_nonnegative()?;
    Ok(out)
}

pub(crate) fn energy_terms(s: &SimState, prep: &Prepared, model: &ModelParams) -> StepRecord {
    let g = s.grid();
    let vol = g.cell_volume();
    let sigma = model.sigma;
    let (p, w) = (prep.p.values(), prep.w.values());
    let (u, v) = (s.u.values(), s.v.values());
    let sigma_lap_sq = if sigma > 0.0 {
        p.iter().zip(w).map(|(a, b)| (b - a) * (b - a)).sum::<f64>() * vol / sigma
    } else {
        0.0
    };
    let identity_residual = if sigma > 0.0 {
        let lap = laplacian(&prep.w);
        lap.values()
            .iter()
            .zip(p.iter().zip(w))
            .map(|(l, (pi, wi))| (sigma * l - (wi - pi)).abs())
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let gamma = model.gamma;
    let source: f64 = (0..g.len())
        .map(|i| {
            let n = u[i] + v[i];
            if n <= 0.0 {
                return 0.0;
            }
            let (f, gg) = model.rates(p[i]);
            (u[i] * f + v[i] * gg) * n.powf(gamma - 1.0)
        })
        .sum::<f64>()
        * gamma
        * vol;
    StepRecord {
        t: s.t,
        mass_u: s.u.integral(),
        mass_v: s.v.integral(),
        max_p: prep.p.max(),
        int_p: prep.p.integral(),
        grad_w_sq: prep.vel.sq_integral(),
        sigma_lap_sq,
        source,
        identity_residual,
        ..Default::default()
    }
}

pub fn step_brinkman(s: &SimState, model: &ModelParams, dt: f64) -> Result<SimState> {
    GrowthScheme::brinkman(*s.grid(), model)?.step(s, dt)
}

pub fn step_darcy(s: &SimState, model: &ModelParams, dt: f64) -> Result<SimState> {
    GrowthScheme::darcy(*s.grid(), model)?.step(s, dt)
}

/// How the step size is chosen inside each output interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepping {
    /// Follow the scheme's stability bound.
    Adaptive,
    /// Use at most this step everywhere (still validated by the scheme).
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub t_final: f64,
    pub output_every: f64,
    pub stepping: Stepping,
    pub max_steps: usize,
}

impl RunOptions {
    pub fn new(t_final: f64, output_every: f64) -> Self {
        Self {
            t_final,
            output_every,
            stepping: Stepping::Adaptive,
            max_steps: 50_000_000,
        }
    }

    pub fn fixed(mut self, dt: f64) -> Self {
        self.stepping = Stepping::Fixed(dt);
        self
    }

    /// Output times `0, I, 2I, ..., T`.
    pub fn output_times(&self) -> Vec<f64> {
        let ratio = self.t_final / self.output_every;
        let mut count = ratio.round() as usize;
        if (ratio - count as f64).abs() > 1e-9 * ratio.max(1.0) {
            count = ratio.ceil() as usize;
        }
        let mut times: Vec<f64> = (0..count).map(|k| k as f64 * self.output_every).collect();
        times.push(self.t_final);
        times
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<SimState>,
    /// Index into `steps` at which each snapshot was taken (the number of
    /// steps completed so far).
    pub snapshot_steps: Vec<usize>,
    pub steps: Vec<StepRecord>,
    /// Diagnostics of the final state.
    pub final_record: StepRecord,
    /// Largest pressure seen at any step (including the final state).
    pub max_pressure: f64,
    /// Steps whose pressure exceeded `p_H (1 + MAX_PRINCIPLE_TOL)`.
    pub max_principle_breaches: usize,
    pub max_boundary_fraction: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn final_state(&self) -> &SimState {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }

    pub fn pressures(&self, gamma: f64) -> Result<Vec<Field>> {
        self.snapshots.iter().map(|s| s.pressure(gamma)).collect()
    }

    /// Uniform spacing between output snapshots (the first interval).
    pub fn output_dt(&self) -> f64 {
        match self.snapshots.as_slice() {
            [a, b, ..] => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Number of steps in which `Q` was active.
    pub fn q_active_steps(&self) -> usize {
        self.steps.iter().filter(|r| r.q_active).count()
    }
}

/// Largest dyadic fraction `2^-j` of the interval such that the step fits
/// under `dt_max` and `offset` (a dyadic fraction) is a multiple of it.
fn dyadic_step(offset: f64, interval: f64, dt_max: f64) -> Option<f64> {
    let mut frac = 1.0f64;
    for _ in 0..=60 {
        if frac * interval <= dt_max && (offset / frac).fract() == 0.0 {
            return Some(frac);
        }
        frac *= 0.5;
    }
    None
}

/// Integrates `s0` to `opts.t_final`, landing exactly on every output time.
///
/// Inside each output interval the step is the largest dyadic fraction of
/// the interval allowed by the stability bound and aligned with the current
/// position. The dt sequence therefore does not depend on how the interval
/// is subdivided for output, as long as the bound stays below half an
/// interval.
pub fn run<S: Scheme>(scheme: &S, s0: &SimState, opts: &RunOptions) -> Result<Trajectory> {
    if !(opts.t_final > 0.0) || !(opts.output_every > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need T > 0 and output_every > 0, got T={} output_every={}",
            opts.t_final, opts.output_every
        )));
    }
    if let Stepping::Fixed(dt) = opts.stepping {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("fixed dt must be positive, got {dt}")));
        }
    }
    let model = scheme.model();
    let threshold = model.p_h * (1.0 + MAX_PRINCIPLE_TOL);
    let times = opts.output_times();
    let mut state = SimState {
        t: times[0],
        ..s0.clone()
    };
    let mut snapshots = vec![state.clone()];
    let mut snapshot_steps = vec![0];
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut max_pressure = 0.0f64;
    let mut breaches = 0usize;
    let initial_boundary = state.boundary_mass_fraction();
    let mut max_boundary = initial_boundary;
    let mut warned = false;
    let mut prep = scheme.prepare(&state)?;

    for k in 0..times.len() - 1 {
        let (t0, t1) = (times[k], times[k + 1]);
        // full intervals use the nominal length so that step sizes do not
        // inherit the rounding of the output times
        let interval = if ((t1 - t0) - opts.output_every).abs() <= 1e-9 * opts.output_every {
            opts.output_every
        } else {
            t1 - t0
        };
        let mut offset = 0.0f64;
        while offset < 1.0 {
            let n = steps.len();
            if n >= opts.max_steps {
                return Err(Error::InvalidParameter(format!(
                    "exceeded {} steps before t={t1}",
                    opts.max_steps
                ))
                .at_step(n, state.t));
            }
            let dt_max = match opts.stepping {
                Stepping::Adaptive => scheme.max_dt(&prep),
                Stepping::Fixed(dt) => dt,
            };
            let frac = dyadic_step(offset, interval, dt_max).ok_or_else(|| {
                Error::InvalidParameter(format!("time step underflow (bound {dt_max:e})"))
                    .at_step(n, state.t)
            })?;
            let dt = frac * interval;
            let mut rec = scheme.record(&state, &prep);
            rec.step = n;
            rec.dt = dt;
            max_pressure = max_pressure.max(rec.max_p);
            if rec.max_p > threshold {
                breaches += 1;
            }
            let mut next = scheme
                .advance(&state, &prep, dt)
                .map_err(|e| e.at_step(n, state.t))?;
            offset += frac;
            next.t = if offset >= 1.0 { t1 } else { t0 + offset * interval };
            let next_prep = scheme.prepare(&next).map_err(|e| e.at_step(n + 1, next.t))?;
            rec.max_dp_dt = scheme
                .pressure_of(&next_prep)
                .values()
                .iter()
                .zip(scheme.pressure_of(&prep).values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                / dt;
            steps.push(rec);
            state = next;
            prep = next_prep;
        }
        let frac_b = state.boundary_mass_fraction();
        max_boundary = max_boundary.max(frac_b);
        // data that starts out filling the box (homeostatic) is not a leak
        if frac_b > BOUNDARY_MASS_TOL && frac_b > initial_boundary + BOUNDARY_MASS_TOL && !warned {
            log::warn!(
                "boundary-layer mass fraction {frac_b:.2e} exceeds {BOUNDARY_MASS_TOL:e} at t={}; enlarge the box",
                state.t
            );
            warned = true;
        }
        snapshots.push(state.clone());
        snapshot_steps.push(steps.len());
    }
    let mut final_record = scheme.record(&state, &prep);
    final_record.step = steps.len();
    max_pressure = max_pressure.max(final_record.max_p);
    if final_record.max_p > threshold {
        breaches += 1;
    }
    Ok(Trajectory {
        snapshots,
        snapshot_steps,
        steps,
        final_record,
        max_pressure,
        max_principle_breaches: breaches,
        max_boundary_fraction: max_boundary,
    })
}
