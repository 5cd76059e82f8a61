//! Regularized non-divergence form of the Brinkman system: artificial
//! diffusion `eps`, mollified potential `W_delta = K_sigma * omega_delta * Q(p)`
//! and the truncation `Q(p) = min(p, 2 p_H)`.
//!
//! The transport uses centered gradients, so discrete conservation is lost;
//! the diffusion supplies the stabilization.

use crate::calculus::{centered_dot, laplacian};
use crate::dynamics::{
    cfl_dt, parabolic_dt, run, velocity_from_potential, GrowthScheme, RunOptions, Scheme,
    SimState, StepRecord, Trajectory, CFL, VEL_EPS,
};
use crate::elliptic::ConvolutionPlan;
use crate::error::{Error, Result};
use crate::grid::{pressure_field, FaceField, Field, Grid};
use crate::norms::lq_norm;
use crate::par::{map_cells, map_members, Execution};
use crate::params::ModelParams;

/// Componentwise `min(p, 2 p_H)`.
pub fn q_truncate(p: &Field, p_h: f64) -> Field {
    let cap = 2.0 * p_h;
    p.map(|x| x.min(cap))
}

#[derive(Debug, Clone)]
pub struct RegParams {
    pub model: ModelParams,
    /// Artificial diffusion.
    pub eps: f64,
    /// Mollification radius.
    pub delta: f64,
    /// When false, the potential enters neither the transport nor the
    /// `(W - Q(p)) / sigma` term (pure diffusion-reaction).
    pub couple_potential: bool,
}

impl RegParams {
    pub fn new(model: ModelParams, eps: f64, delta: f64) -> Self {
        Self {
            model,
            eps,
            delta,
            couple_potential: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.model.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "regularized scheme needs sigma > 0, got {}",
                self.model.sigma
            )));
        }
        if !(self.eps >= 0.0) || !(self.delta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eps and delta must be >= 0, got eps={} delta={}",
                self.eps, self.delta
            )));
        }
        Ok(())
    }
}

/// Explicit diffusion bound `dx^2 / (2 d eps)`.
pub fn diffusion_dt(grid: &Grid, eps: f64) -> f64 {
    if eps > 0.0 {
        grid.dx() * grid.dx() / (2.0 * grid.dim() as f64 * eps)
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone)]
pub struct RegScheme {
    params: RegParams,
    grid: Grid,
    plan: ConvolutionPlan,
    cfl: f64,
}

#[derive(Debug, Clone)]
pub struct RegPrepared {
    pub p: Field,
    pub q: Field,
    pub w: Field,
    pub vel: FaceField,
    pub q_active: bool,
}

impl RegScheme {
    pub fn new(grid: Grid, params: &RegParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            plan: ConvolutionPlan::mollified_brinkman(grid, params.model.sigma, params.delta)?,
            params: params.clone(),
            grid,
            cfl: CFL,
        })
    }

    pub fn params(&self) -> &RegParams {
        &self.params
    }

    pub fn step(&self, s: &SimState, dt: f64) -> Result<SimState> {
        let prep = self.prepare(s)?;
        self.advance(s, &prep, dt)
    }

    /// Bounds the scheme enforces as errors: advective/reaction CFL and the
    /// explicit diffusion limit.
    fn hard_limits(&self, prep: &RegPrepared) -> [(f64, &'static str); 2] {
        [
            (cfl_dt(&prep.vel, &self.params.model, self.cfl), "advective/reaction CFL"),
            (diffusion_dt(&self.grid, self.params.eps), "explicit diffusion"),
        ]
    }
}

impl Scheme for RegScheme {
    type Prepared = RegPrepared;

    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn model(&self) -> &ModelParams {
        &self.params.model
    }

    fn prepare(&self, s: &SimState) -> Result<RegPrepared> {
        let m = &self.params.model;
        let p = pressure_field(&s.u, &s.v, m.gamma)?;
        let q = q_truncate(&p, m.p_h);
        let q_active = p.max() > 2.0 * m.p_h;
        let w = if self.params.couple_potential {
            self.plan.apply(&q)
        } else {
            q.clone()
        };
        let vel = if self.params.couple_potential {
            velocity_from_potential(&w)
        } else {
            FaceField::zeros(self.grid)
        };
        Ok(RegPrepared {
            p,
            q,
            w,
            vel,
            q_active,
        })
    }

    fn max_dt(&self, prep: &RegPrepared) -> f64 {
        let m = &self.params.model;
        let [(a, _), (b, _)] = self.hard_limits(prep);
        let mut dt = a.min(self.cfl * b);
        if self.params.couple_potential {
            let d = self.grid.dim() as f64;
            let vmax = prep.vel.max_abs();
            // centered advection with forward Euler needs dt <~ 2 eps / |v|^2
            if self.params.eps > 0.0 {
                dt = dt.min(self.cfl * 2.0 * self.params.eps / (d * vmax * vmax + VEL_EPS));
            }
            let gap = prep
                .w
                .values()
                .iter()
                .zip(prep.q.values())
                .fold(0.0f64, |g, (w, q)| g.max((w - q).abs()));
            dt = dt.min(self.cfl * m.sigma / (gap + VEL_EPS));
            dt = dt.min(parabolic_dt(&self.grid, m.gamma, m.sigma, prep.q.max(), self.cfl));
        }
        dt
    }

    fn advance(&self, s: &SimState, prep: &RegPrepared, dt: f64) -> Result<SimState> {
        for (limit, bound) in self.hard_limits(prep) {
            if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
                return Err(Error::StepTooLarge { dt, limit, bound });
            }
        }
        let m = &self.params.model;
        let eps = self.params.eps;
        let inv_sigma = if self.params.couple_potential {
            1.0 / m.sigma
        } else {
            0.0
        };
        let q = prep.q.values();
        let w = prep.w.values();
        let update = |rho: &Field, which: usize| -> Result<Field> {
            let lap = laplacian(rho);
            let adv = if self.params.couple_potential {
                centered_dot(rho, &prep.w)?
            } else {
                Field::zeros(self.grid)
            };
            let (r, l, a) = (rho.values(), lap.values(), adv.values());
            let out = Field::from_raw(
                self.grid,
                map_cells(r.len(), |i| {
                    let (f, g) = m.rates(q[i]);
                    let rate = if which == 0 { f } else { g };
                    r[i] + dt * (eps * l[i] + a[i] + inv_sigma * r[i] * (w[i] - q[i]) + r[i] * rate)
                }),
            );
            if let Some(index) = out.first_non_finite() {
                return Err(Error::NonFinite { index });
            }
            out.check_nonnegative()?;
            Ok(out)
        };
        Ok(SimState {
            t: s.t + dt,
            u: update(&s.u, 0)?,
            v: update(&s.v, 1)?,
        })
    }

    fn record(&self, s: &SimState, prep: &RegPrepared) -> StepRecord {
        StepRecord {
            t: s.t,
            mass_u: s.u.integral(),
            mass_v: s.v.integral(),
            max_p: prep.p.max(),
            int_p: prep.p.integral(),
            grad_w_sq: prep.vel.sq_integral(),
            q_active: prep.q_active,
            ..Default::default()
        }
    }

    fn pressure_of<'a>(&self, prep: &'a RegPrepared) -> &'a Field {
        &prep.p
    }
}

pub fn step_regularized(s: &SimState, rp: &RegParams, dt: f64) -> Result<SimState> {
    RegScheme::new(*s.grid(), rp)?.step(s, dt)
}

/// Outcome of [`regularized_max_principle_probe`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPrincipleReport {
    /// `max_t max_x p`.
    pub max_pressure: f64,
    pub p_h: f64,
    /// Pressure exceeded `p_H (1 + 1e-6)` somewhere.
    pub excursion: bool,
    /// Initial data already violated `p0 <= p_H`.
    pub initial_breach: bool,
    /// Steps in which `Q(p) != p`.
    pub q_active_steps: usize,
}

impl MaxPrincipleReport {
    /// `Q` never acted, so the regularized system solved the untruncated one.
    pub fn q_inactive(&self) -> bool {
        self.q_active_steps == 0
    }
}

pub const PROBE_TOL: f64 = 1e-6;

pub fn regularized_max_principle_probe(traj: &Trajectory, p_h: f64, gamma: f64) -> MaxPrincipleReport {
    let p0 = traj.snapshots[0]
        .pressure(gamma)
        .map(|p| p.max())
        .unwrap_or(f64::INFINITY);
    MaxPrincipleReport {
        max_pressure: traj.max_pressure,
        p_h,
        excursion: traj.max_pressure > p_h * (1.0 + PROBE_TOL),
        initial_breach: p0 > p_h,
        q_active_steps: traj.q_active_steps(),
    }
}

/// One row of the regularized-vs-Brinkman consistency table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyRow {
    pub eps: f64,
    pub delta: f64,
    /// `||u_reg - u||_1 + ||v_reg - v||_1` at the final time.
    pub l1_gap: f64,
    pub max_p: f64,
    pub q_active_steps: usize,
}

impl ConsistencyRow {
    pub const CSV_HEADER: &'static str = "eps,delta,l1_gap,max_p,q_active_steps";

    pub fn csv(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{}",
            self.eps, self.delta, self.l1_gap, self.max_p, self.q_active_steps
        )
    }
}

#[derive(Debug, Clone)]
pub struct ConsistencyOutcome {
    pub rows: Vec<ConsistencyRow>,
    pub regularized: Vec<Trajectory>,
    pub reference: Trajectory,
}

/// Runs the regularized scheme for every `(eps, delta)` pair and compares
/// the final states to a Brinkman run with the same `sigma`.
///
/// The reference uses a fixed step equal to the smallest step any
/// regularized run took, so the gap is not dominated by the time step.
pub fn consistency_sweep(
    grid: Grid,
    model: &ModelParams,
    pairs: &[(f64, f64)],
    s0: &SimState,
    opts: &RunOptions,
    exec: Execution,
    couple_potential: bool,
) -> Result<ConsistencyOutcome> {
    let results = map_members(exec, pairs, |&(eps, delta)| {
        let rp = RegParams {
            couple_potential,
            ..RegParams::new(model.clone(), eps, delta)
        };
        run(&RegScheme::new(grid, &rp)?, s0, opts)
    });
    let regularized = results.into_iter().collect::<Result<Vec<_>>>()?;
    let dt = regularized
        .iter()
        .flat_map(|t| t.steps.iter().map(|r| r.dt))
        .fold(f64::INFINITY, f64::min);
    let brinkman = GrowthScheme::brinkman(grid, model)?;
    let reference = if dt.is_finite() {
        run(&brinkman, s0, &opts.fixed(dt))?
    } else {
        run(&brinkman, s0, opts)?
    };
    let fin = reference.final_state();
    let rows = pairs
        .iter()
        .zip(&regularized)
        .map(|(&(eps, delta), tr)| {
            let f = tr.final_state();
            Ok(ConsistencyRow {
                eps,
                delta,
                l1_gap: lq_norm(&f.u.sub(&fin.u), 1.0)? + lq_norm(&f.v.sub(&fin.v), 1.0)?,
                max_p: tr.max_pressure,
                q_active_steps: tr.q_active_steps(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConsistencyOutcome {
        rows,
        regularized,
        reference,
    })
}
