//! Initial-data presets.

use std::fmt;
use std::str::FromStr;

use crate::dynamics::SimState;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::params::ModelParams;

/// Truncation radius of the gaussian profile, in widths.
const GAUSS_CUTOFF: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Vacuum,
    Homeostatic,
    GaussianPair,
    SeparatedBumps,
}

impl fmt::Display for PresetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PresetKind::Vacuum => "vacuum",
            PresetKind::Homeostatic => "homeostatic",
            PresetKind::GaussianPair => "gaussian-pair",
            PresetKind::SeparatedBumps => "separated-bumps",
        })
    }
}

impl FromStr for PresetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vacuum" => Ok(PresetKind::Vacuum),
            "homeostatic" => Ok(PresetKind::Homeostatic),
            "gaussian-pair" => Ok(PresetKind::GaussianPair),
            "separated-bumps" => Ok(PresetKind::SeparatedBumps),
            other => Err(Error::Config(format!("unknown preset '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitPreset {
    pub kind: PresetKind,
    /// Peak density of each bump.
    pub amplitude: f64,
    /// Bump width (gaussian scale, or support radius for separated bumps).
    pub width: f64,
    /// Distance of each bump center from the origin along the first axis.
    pub offset: f64,
    /// If set, the amplitude is rescaled so that `max p0` equals this value.
    pub peak_pressure: Option<f64>,
    /// Share of the homeostatic density carried by `u`.
    pub split: f64,
}

impl Default for InitPreset {
    fn default() -> Self {
        Self {
            kind: PresetKind::GaussianPair,
            amplitude: 0.5,
            width: 0.4,
            offset: 0.6,
            peak_pressure: None,
            split: 0.5,
        }
    }
}

/// Gaussian shifted down to vanish at `GAUSS_CUTOFF` widths, rescaled to
/// peak 1. Continuous, compactly supported.
fn gaussian_profile(r: f64, w: f64) -> f64 {
    let floor = (-GAUSS_CUTOFF * GAUSS_CUTOFF).exp();
    let z = r / w;
    if z >= GAUSS_CUTOFF {
        0.0
    } else {
        ((-z * z).exp() - floor) / (1.0 - floor)
    }
}

fn compact_profile(r: f64, w: f64) -> f64 {
    let z = r / w;
    if z >= 1.0 {
        0.0
    } else {
        (1.0 - z * z).powi(2)
    }
}

impl InitPreset {
    pub fn new(kind: PresetKind) -> Self {
        Self {
            kind,
            ..Default::default()
        }
    }

    /// Radius of each bump's support.
    pub fn support_radius(&self) -> f64 {
        match self.kind {
            PresetKind::GaussianPair => GAUSS_CUTOFF * self.width,
            PresetKind::SeparatedBumps => self.width,
            _ => 0.0,
        }
    }

    fn bump(&self, x: [f64; 2], center: f64) -> f64 {
        let r = ((x[0] - center).powi(2) + x[1] * x[1]).sqrt();
        match self.kind {
            PresetKind::GaussianPair => gaussian_profile(r, self.width),
            PresetKind::SeparatedBumps => compact_profile(r, self.width),
            _ => 0.0,
        }
    }

    /// Builds the fields without checking the pressure bound.
    pub fn fields(&self, grid: Grid, model: &ModelParams) -> Result<(Field, Field)> {
        match self.kind {
            PresetKind::Vacuum => Ok((Field::zeros(grid), Field::zeros(grid))),
            PresetKind::Homeostatic => {
                if !(0.0..=1.0).contains(&self.split) {
                    return Err(Error::Config(format!(
                        "homeostatic split must be in [0, 1], got {}",
                        self.split
                    )));
                }
                let n = model.homeostatic_density();
                Ok((
                    Field::constant(grid, self.split * n),
                    Field::constant(grid, (1.0 - self.split) * n),
                ))
            }
            PresetKind::GaussianPair | PresetKind::SeparatedBumps => {
                if !(self.width > 0.0) || !(self.amplitude >= 0.0) {
                    return Err(Error::Config(format!(
                        "preset '{}' needs width > 0 and amplitude >= 0",
                        self.kind
                    )));
                }
                let shape_u = Field::from_fn(grid, |x| self.bump(x, -self.offset));
                let shape_v = Field::from_fn(grid, |x| self.bump(x, self.offset));
                let amp = match self.peak_pressure {
                    None => self.amplitude,
                    Some(target) => {
                        let peak = shape_u.add(&shape_v).max();
                        if !(peak > 0.0) || !(target >= 0.0) {
                            return Err(Error::Config(format!(
                                "preset '{}': cannot reach peak pressure {target}",
                                self.kind
                            )));
                        }
                        target.powf(1.0 / model.gamma) / peak
                    }
                };
                Ok((shape_u.scale(amp), shape_v.scale(amp)))
            }
        }
    }

    /// Every way the preset violates the admissibility rules
    /// (support inside the inner half-box, `max p0 <= p_H`).
    pub fn violations(&self, grid: Grid, model: &ModelParams) -> Vec<String> {
        let mut out = Vec::new();
        let (u, v) = match self.fields(grid, model) {
            Ok(f) => f,
            Err(e) => {
                out.push(e.to_string());
                return out;
            }
        };
        if matches!(self.kind, PresetKind::GaussianPair | PresetKind::SeparatedBumps) {
            let reach = self.offset.abs() + self.support_radius();
            let inner = 0.5 * grid.half_width();
            if reach > inner {
                out.push(format!(
                    "preset '{}': support reaches |x| = {reach:.4}, outside the inner half-box |x| <= {inner:.4}",
                    self.kind
                ));
            }
            if self.kind == PresetKind::SeparatedBumps && self.offset.abs() < self.width {
                out.push(format!(
                    "preset '{}': bumps overlap (offset {} < width {})",
                    self.kind, self.offset, self.width
                ));
            }
        }
        let p_max = u
            .add(&v)
            .values()
            .iter()
            .fold(0.0f64, |m, &n| m.max(crate::grid::pressure(n, model.gamma)));
        if p_max > model.p_h * (1.0 + 1e-12) {
            out.push(format!(
                "preset '{}': max initial pressure {p_max:.6} exceeds p_H = {} ({:.3} p_H); need (u0+v0)^gamma <= p_H",
                self.kind,
                model.p_h,
                p_max / model.p_h
            ));
        }
        out
    }

    /// Validated initial state.
    pub fn build(&self, grid: Grid, model: &ModelParams) -> Result<SimState> {
        let v = self.violations(grid, model);
        if !v.is_empty() {
            return Err(Error::ConfigViolations(v));
        }
        self.build_unchecked(grid, model)
    }

    /// Initial state without the admissibility checks (used to seed
    /// deliberately inadmissible data).
    pub fn build_unchecked(&self, grid: Grid, model: &ModelParams) -> Result<SimState> {
        let (u, v) = self.fields(grid, model)?;
        SimState::new(0.0, u, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, GridSpec};

    fn grid() -> Grid {
        make_grid(GridSpec::new(1, 4.0, 256)).unwrap()
    }

    #[test]
    fn peak_pressure_is_hit() {
        let model = ModelParams {
            gamma: 4.0,
            ..Default::default()
        };
        let preset = InitPreset {
            peak_pressure: Some(0.8),
            ..Default::default()
        };
        let s = preset.build(grid(), &model).unwrap();
        let p = s.pressure(model.gamma).unwrap();
        assert!((p.max() - 0.8).abs() < 1e-12);
        assert!(s.u.min() >= 0.0 && s.v.min() >= 0.0);
    }

    #[test]
    fn over_homeostatic_is_rejected() {
        let model = ModelParams::default();
        let preset = InitPreset {
            peak_pressure: Some(1.2),
            ..Default::default()
        };
        let err = preset.build(grid(), &model).unwrap_err().to_string();
        assert!(err.contains("gaussian-pair") && err.contains("p_H"), "{err}");
    }

    #[test]
    fn support_outside_inner_box_is_rejected() {
        let preset = InitPreset {
            offset: 1.5,
            ..Default::default()
        };
        let v = preset.violations(grid(), &ModelParams::default());
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].contains("inner half-box"));
    }

    #[test]
    fn separated_bumps_do_not_overlap() {
        let preset = InitPreset {
            kind: PresetKind::SeparatedBumps,
            amplitude: 0.6,
            width: 0.5,
            offset: 0.75,
            ..Default::default()
        };
        let s = preset.build(grid(), &ModelParams::default()).unwrap();
        let overlap: f64 = s.u.values().iter().zip(s.v.values()).map(|(a, b)| a * b).sum();
        assert_eq!(overlap, 0.0);
    }

    #[test]
    fn homeostatic_is_at_p_h() {
        let model = ModelParams {
            gamma: 3.0,
            p_h: 2.0,
            ..Default::default()
        };
        let s = InitPreset {
            split: 0.3,
            ..InitPreset::new(PresetKind::Homeostatic)
        }
        .build(grid(), &model)
        .unwrap();
        let p = s.pressure(model.gamma).unwrap();
        assert!((p.max() - 2.0).abs() < 1e-12 && (p.min() - 2.0).abs() < 1e-12);
    }
}
