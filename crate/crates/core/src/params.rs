//! Model parameters and growth-rate laws.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type RateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Pressure-dependent growth rates `(F, G)` of the two populations.
#[derive(Clone)]
pub enum ReactionLaw {
    /// `F(p) = G(p) = alpha (p_H - p)`.
    Linear,
    /// `F(p) = alpha (p_H - p)`, `G(p) = ratio * alpha (p_H - p)` with `ratio >= 1`.
    Split { ratio: f64 },
    /// User-supplied rates, audited by [`ModelParams::validate`].
    Custom {
        name: String,
        f: RateFn,
        g: RateFn,
    },
}

impl ReactionLaw {
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ReactionLaw::Custom {
            name: name.into(),
            f: Arc::new(f),
            g: Arc::new(g),
        }
    }

    pub fn id(&self) -> String {
        match self {
            ReactionLaw::Linear => "linear".into(),
            ReactionLaw::Split { .. } => "split".into(),
            ReactionLaw::Custom { name, .. } => name.clone(),
        }
    }
}

impl fmt::Debug for ReactionLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReactionLaw::Linear => write!(f, "Linear"),
            ReactionLaw::Split { ratio } => write!(f, "Split {{ ratio: {ratio} }}"),
            ReactionLaw::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// Physical parameters of the two-population system.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Pressure exponent, `> 1`.
    pub gamma: f64,
    /// Homeostatic pressure, `> 0`.
    pub p_h: f64,
    /// Brinkman parameter; `0` selects Darcy's law.
    pub sigma: f64,
    /// Reaction slope. Zero switches growth off.
    pub alpha: f64,
    pub reaction: ReactionLaw,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            p_h: 1.0,
            sigma: 0.01,
            alpha: 1.0,
            reaction: ReactionLaw::Linear,
        }
    }
}

/// Number of sample intervals used by the monotonicity audit.
const AUDIT_SAMPLES: usize = 256;

impl ModelParams {
    pub fn with_sigma(&self, sigma: f64) -> Self {
        Self {
            sigma,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma must satisfy gamma > 1, got {}",
                self.gamma
            )));
        }
        if !(self.p_h > 0.0) || !self.p_h.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "p_H must be positive, got {}",
                self.p_h
            )));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if let ReactionLaw::Split { ratio } = self.reaction {
            if !(ratio >= 1.0) {
                return Err(Error::Config(format!(
                    "split reaction needs ratio >= 1, got {ratio}"
                )));
            }
        }
        self.audit_reaction()
    }

    /// Samples both rates on `[0, 2 p_H]` and checks the root at `p_H` and
    /// the slope bound `F(p+dp) - F(p) <= -alpha dp`.
    pub fn audit_reaction(&self) -> Result<()> {
        let dp = 2.0 * self.p_h / AUDIT_SAMPLES as f64;
        for (label, which) in [("F", 0usize), ("G", 1)] {
            let rate = |p: f64| {
                let (f, g) = self.rates(p);
                if which == 0 { f } else { g }
            };
            let root = rate(self.p_h);
            if root.abs() > 1e-12 * (1.0 + self.alpha * self.p_h) {
                return Err(Error::Config(format!(
                    "reaction '{}': {label}(p_H) = {root:e}, expected 0",
                    self.reaction.id()
                )));
            }
            for k in 0..AUDIT_SAMPLES {
                let p0 = k as f64 * dp;
                let diff = rate(p0 + dp) - rate(p0);
                if diff > -self.alpha * dp * (1.0 - 1e-9) {
                    return Err(Error::Config(format!(
                        "reaction '{}': {label} is not decreasing with slope <= -alpha near p = {p0:.4}",
                        self.reaction.id()
                    )));
                }
            }
        }
        Ok(())
    }

    /// `(F(p), G(p))`.
    #[inline]
    pub fn rates(&self, p: f64) -> (f64, f64) {
        match &self.reaction {
            ReactionLaw::Linear => {
                let r = self.alpha * (self.p_h - p);
                (r, r)
            }
            ReactionLaw::Split { ratio } => {
                let r = self.alpha * (self.p_h - p);
                (r, ratio * r)
            }
            ReactionLaw::Custom { f, g, .. } => (f(p), g(p)),
        }
    }

    /// `max(|F|, |G|)` over `p in [0, p_H]`, the reaction rate that limits
    /// the explicit time step.
    pub fn max_rate(&self) -> f64 {
        match &self.reaction {
            ReactionLaw::Linear => self.alpha * self.p_h,
            ReactionLaw::Split { ratio } => ratio * self.alpha * self.p_h,
            ReactionLaw::Custom { .. } => {
                let dp = self.p_h / AUDIT_SAMPLES as f64;
                (0..=AUDIT_SAMPLES)
                    .map(|k| {
                        let (f, g) = self.rates(k as f64 * dp);
                        f.abs().max(g.abs())
                    })
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Density at which the pressure equals `p_H`.
    pub fn homeostatic_density(&self) -> f64 {
        self.p_h.powf(1.0 / self.gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_reaction_values() {
        let m = ModelParams {
            alpha: 1.0,
            p_h: 1.0,
            ..Default::default()
        };
        assert_eq!(m.rates(1.0), (0.0, 0.0));
        assert_eq!(m.rates(0.0), (1.0, 1.0));
        assert_eq!(m.max_rate(), 1.0);
        m.validate().unwrap();
    }

    #[test]
    fn sampled_slopes_respect_alpha() {
        // Finite-difference audit: every sampled difference must sit at or
        // below -alpha * dp.
        for reaction in [ReactionLaw::Linear, ReactionLaw::Split { ratio: 2.0 }] {
            let m = ModelParams {
                alpha: 0.7,
                p_h: 1.5,
                reaction,
                ..Default::default()
            };
            let dp = 2.0 * m.p_h / 200.0;
            for k in 0..200 {
                let p = k as f64 * dp;
                let (f0, g0) = m.rates(p);
                let (f1, g1) = m.rates(p + dp);
                assert!(f1 - f0 <= -m.alpha * dp + 1e-12);
                assert!(g1 - g0 <= -m.alpha * dp + 1e-12);
            }
        }
    }

    #[test]
    fn custom_reaction_audit() {
        let ok = ModelParams {
            reaction: ReactionLaw::custom(
                "cubic",
                |p| (1.0 - p) * (1.0 + (1.0 - p) * (1.0 - p)),
                |p| 2.0 * (1.0 - p),
            ),
            ..Default::default()
        };
        ok.validate().unwrap();

        // Increasing past p = 1.5: violates monotonicity.
        let bad = ModelParams {
            reaction: ReactionLaw::custom("bent", |p| (1.0 - p) * (2.0 - p), |p| 1.0 - p),
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));

        let no_root = ModelParams {
            reaction: ReactionLaw::custom("shifted", |p| 1.2 - p, |p| 1.0 - p),
            ..Default::default()
        };
        assert!(matches!(no_root.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_gamma_at_one() {
        let m = ModelParams {
            gamma: 1.0,
            ..Default::default()
        };
        let msg = m.validate().unwrap_err().to_string();
        assert!(msg.contains("gamma > 1"), "{msg}");
    }
}
