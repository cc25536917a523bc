use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial domain of the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    /// All of R^N, truncated to a ball of radius `rmax` with a Dirichlet wall.
    #[serde(rename = "whole")]
    WholeSpace,
    /// Unit ball with homogeneous Dirichlet data.
    #[serde(rename = "ball")]
    UnitBall,
}

impl DomainKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DomainKind::WholeSpace => "whole",
            DomainKind::UnitBall => "ball",
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DomainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "whole" | "wholespace" | "whole-space" => Ok(DomainKind::WholeSpace),
            "ball" | "unitball" | "unit-ball" => Ok(DomainKind::UnitBall),
            other => Err(Error::BadParameter(format!(
                "unknown domain '{other}' (expected 'whole' or 'ball')"
            ))),
        }
    }
}

/// Physical parameters of the rescaled Ginzburg-Landau problem
/// `phi_t + e^{i theta}(rho phi - Lap phi) = e^{i gamma}|phi|^alpha phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub domain: DomainKind,
    pub dim: usize,
    pub alpha: f64,
    pub rho: f64,
    pub theta: f64,
    /// Permit `0 < alpha < 1` (the nonlinearity derivative is then singular at u = 0).
    #[serde(default)]
    pub allow_small_alpha: bool,
}

impl ProblemParams {
    /// Builds and checks every invariant that does not depend on a grid.
    /// The ball condition `rho > -lambda_1` is checked by [`crate::build_grid`].
    pub fn new(domain: DomainKind, dim: usize, alpha: f64, rho: f64, theta: f64) -> Result<Self> {
        let p = ProblemParams {
            domain,
            dim,
            alpha,
            rho,
            theta,
            allow_small_alpha: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_small_alpha(mut self, allow: bool) -> Result<Self> {
        self.allow_small_alpha = allow;
        self.validate()?;
        Ok(self)
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        self.theta = theta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        self.rho = rho;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::BadParameter("dimension N must be >= 1".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::BadParameter(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.alpha < 1.0 {
            if !self.allow_small_alpha {
                return Err(Error::BadParameter(format!(
                    "alpha = {} < 1 requires the small-alpha override",
                    self.alpha
                )));
            }
            log::warn!(
                "alpha = {} < 1: the linearization is singular where u vanishes",
                self.alpha
            );
        }
        if (self.dim as f64 - 2.0) * self.alpha >= 4.0 {
            return Err(Error::BadParameter(format!(
                "supercritical exponent: (N - 2) alpha = {} must be < 4",
                (self.dim as f64 - 2.0) * self.alpha
            )));
        }
        if !self.rho.is_finite() {
            return Err(Error::BadParameter("rho must be finite".into()));
        }
        if self.domain == DomainKind::WholeSpace && self.rho <= 0.0 {
            return Err(Error::BadParameter(format!(
                "whole-space problems need rho > 0, got rho = {}",
                self.rho
            )));
        }
        check_angle("theta", self.theta)?;
        Ok(())
    }
}

/// Checks `-pi/2 < angle < pi/2`.
pub fn check_angle(name: &str, angle: f64) -> Result<()> {
    if !(angle.is_finite() && angle > -FRAC_PI_2 && angle < FRAC_PI_2) {
        return Err(Error::BadParameter(format!(
            "{name} = {angle} must lie in (-pi/2, pi/2)"
        )));
    }
    Ok(())
}

/// Surface measure of the unit (N-1)-sphere, `2 pi^{N/2} / Gamma(N/2)`.
/// For N = 1 this is 2 (the two endpoints of [-1, 1]).
pub fn sphere_measure(dim: usize) -> f64 {
    2.0 * PI.powf(dim as f64 / 2.0) / gamma_half_integer(dim)
}

/// Gamma(n/2) for a positive integer n.
fn gamma_half_integer(n: usize) -> f64 {
    let (mut g, mut x) = if n % 2 == 0 {
        (1.0, 1.0)
    } else {
        (PI.sqrt(), 0.5)
    };
    while x + 0.25 < n as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Volume of the N-ball of radius `r`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    sphere_measure(dim) * r.powi(dim as i32) / dim as f64
}
