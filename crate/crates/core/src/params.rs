//! Dimensionless lattice parameters and the bounded tilt profile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiltKind {
    /// `xi(n) = sign(n) * min(|n|, N)`.
    LinearClamped,
    /// Linear on the window, then ramps linearly back to zero over `taper_width` sites.
    LinearTapered,
}

/// Site-dependent tilt `xi(n)`: exactly `n` on `|n| <= N`, bounded everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TiltProfile {
    pub kind: TiltKind,
    pub n: i64,
    #[serde(default)]
    pub taper_width: i64,
}

impl TiltProfile {
    pub fn clamped(n: i64) -> Self {
        Self { kind: TiltKind::LinearClamped, n, taper_width: 0 }
    }

    pub fn tapered(n: i64, taper_width: i64) -> Self {
        Self { kind: TiltKind::LinearTapered, n, taper_width }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Domain(format!("tilt window N = {} must be >= 1", self.n)));
        }
        if self.taper_width < 0 {
            return Err(Error::Domain("taper width must be >= 0".into()));
        }
        Ok(())
    }

    /// Integer-valued tilt; every profile here maps integers to integers
    /// except the interior of a taper ramp.
    pub fn xi(&self, site: i64) -> f64 {
        let big_n = self.n;
        let abs = site.abs();
        if abs <= big_n {
            return site as f64;
        }
        let sign = site.signum() as f64;
        match self.kind {
            TiltKind::LinearClamped => sign * big_n as f64,
            TiltKind::LinearTapered => {
                let t = self.taper_width;
                if t == 0 || abs >= big_n + t {
                    0.0
                } else {
                    sign * big_n as f64 * (big_n + t - abs) as f64 / t as f64
                }
            }
        }
    }

    /// `xi(n)` as an exact integer when the profile is integral at `site`.
    pub fn xi_integer(&self, site: i64) -> Option<i64> {
        let v = self.xi(site);
        (v.fract() == 0.0).then_some(v as i64)
    }
}

/// Convenience free function mirroring [`TiltProfile::xi`].
pub fn tilt_xi(profile: &TiltProfile, n: i64) -> f64 {
    profile.xi(n)
}

/// The dimensionless lattice model: nonlinearity `nu`, tilt step `f`, hopping `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub nu: f64,
    pub f: f64,
    pub beta: f64,
    pub tilt: TiltProfile,
}

impl ModelParams {
    pub fn new(nu: f64, f: f64, beta: f64, tilt: TiltProfile) -> Result<Self> {
        let p = Self { nu, f, beta, tilt };
        p.validate()?;
        Ok(p)
    }

    /// Clamped tilt on window `n`, zero hopping.
    pub fn anticontinuous(nu: f64, f: f64, window_n: i64) -> Result<Self> {
        Self::new(nu, f, 0.0, TiltProfile::clamped(window_n))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("nu", self.nu), ("f", self.f), ("beta", self.beta)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        self.tilt.validate()
    }

    pub fn window_n(&self) -> i64 {
        self.tilt.n
    }

    pub fn xi(&self, site: i64) -> f64 {
        self.tilt.xi(site)
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    /// `nu / f`; infinite when `f = 0`.
    pub fn ratio(&self) -> f64 {
        self.nu / self.f
    }
}

/// Tolerance for treating `nu/f` as an integer bifurcation point.
pub const INTEGER_RATIO_TOL: f64 = 1e-9;

pub fn is_integer_ratio(ratio: f64) -> bool {
    ratio.is_finite() && (ratio - ratio.round()).abs() < INTEGER_RATIO_TOL
}
