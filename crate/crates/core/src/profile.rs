//! The convex integrand A of the conformal energies, with its structural
//! validation battery.
//!
//! Power profiles A(t) = t^p are first-class; custom profiles enter only
//! through [`validate_profile`], and the level-curve machinery refuses them
//! (its closed forms are power-specific).

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// A(t) on [1, inf) together with its derivative and growth exponent p.
#[derive(Clone)]
pub struct EnergyProfile {
    p: f64,
    kind: ProfileKind,
}

#[derive(Clone)]
enum ProfileKind {
    Power,
    Custom {
        eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        deriv: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for EnergyProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            ProfileKind::Power => write!(f, "EnergyProfile::power(p={})", self.p),
            ProfileKind::Custom { .. } => write!(f, "EnergyProfile::custom(p={})", self.p),
        }
    }
}

impl EnergyProfile {
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_power(&self) -> bool {
        matches!(self.kind, ProfileKind::Power)
    }

    /// A(t).
    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            ProfileKind::Power => t.powf(self.p),
            ProfileKind::Custom { eval, .. } => eval(t),
        }
    }

    /// A'(t).
    pub fn deriv(&self, t: f64) -> f64 {
        match &self.kind {
            ProfileKind::Power => self.p * t.powf(self.p - 1.0),
            ProfileKind::Custom { deriv, .. } => deriv(t),
        }
    }
}

/// A(t) = t^p, the canonical family. The profile condition p A(t) <= t A'(t)
/// holds with equality.
pub fn power_profile(p: f64) -> Result<EnergyProfile> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("power profile requires p >= 1, got {p}")));
    }
    Ok(EnergyProfile { p, kind: ProfileKind::Power })
}

/// Wraps user-supplied callables. Unvalidated: run [`validate_profile`] before
/// feeding it to the minimizer.
pub fn custom_profile(
    p: f64,
    eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> EnergyProfile {
    EnergyProfile {
        p,
        kind: ProfileKind::Custom { eval: Arc::new(eval), deriv: Arc::new(deriv) },
    }
}

/// One validated property with the worst grid point observed.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationEntry {
    pub name: String,
    pub pass: bool,
    /// Grid point where the margin is worst (most violating).
    pub worst_t: f64,
    /// Signed margin at `worst_t`; negative means violated.
    pub worst_margin: f64,
}

/// Result of the profile validation battery.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
    pub all_pass: bool,
    /// Informational: t A'(t)/A(t) at the top of the grid noticeably exceeds p,
    /// suggesting faster-than-power growth. Flagged, never rejected.
    pub super_power_growth: bool,
}

const GRID_POINTS: usize = 512;

fn geometric_grid(t_max: f64) -> Vec<f64> {
    (0..GRID_POINTS)
        .map(|i| {
            let s = i as f64 / (GRID_POINTS - 1) as f64;
            t_max.powf(s)
        })
        .collect()
}

/// Checks monotonicity, convexity, A(1) >= 1, the profile condition
/// p A(t) <= t A'(t), the consistency of `deriv` with finite differences of
/// `eval`, and A(t) >= t, on a 512-point geometric grid in [1, t_max].
///
/// Failures are report rows, not errors.
pub fn validate_profile(profile: &EnergyProfile, t_max: f64) -> Result<ValidationReport> {
    if !(t_max >= 2.0) {
        return Err(Error::Domain(format!("validate_profile requires t_max >= 2, got {t_max}")));
    }
    let grid = geometric_grid(t_max);
    let a: Vec<f64> = grid.iter().map(|&t| profile.eval(t)).collect();
    let mut entries = Vec::new();

    let mut push = |name: &str, worst_t: f64, worst_margin: f64| {
        entries.push(ValidationEntry {
            name: name.to_string(),
            pass: worst_margin >= 0.0,
            worst_t,
            worst_margin,
        });
    };

    // A(1) >= 1.
    push("value_at_one", 1.0, a[0] - 1.0);

    // Nondecreasing on consecutive grid pairs.
    let (mut wt, mut wm) = (grid[0], f64::INFINITY);
    for i in 0..grid.len() - 1 {
        let m = a[i + 1] - a[i];
        if m < wm {
            wm = m;
            wt = grid[i];
        }
    }
    push("nondecreasing", wt, wm);

    // Midpoint convexity with a small slack for roundoff.
    let (mut wt, mut wm) = (grid[0], f64::INFINITY);
    for i in 0..grid.len() - 1 {
        let mid = 0.5 * (grid[i] + grid[i + 1]);
        let m = 0.5 * (a[i] + a[i + 1]) + 1e-10 - profile.eval(mid);
        if m < wm {
            wm = m;
            wt = mid;
        }
    }
    push("midpoint_convexity", wt, wm);

    // Profile condition p A(t) <= t A'(t), with a relative slack for roundoff.
    let (mut wt, mut wm) = (grid[0], f64::INFINITY);
    for &t in &grid {
        let lhs = profile.p() * profile.eval(t);
        let rhs = t * profile.deriv(t);
        let m = (rhs - lhs) / lhs.abs().max(1.0) + 1e-12;
        if m < wm {
            wm = m;
            wt = t;
        }
    }
    push("profile_condition", wt, wm);

    // deriv consistent with centered finite differences of eval (relative 1e-6).
    let (mut wt, mut wm) = (grid[0], f64::INFINITY);
    for &t in &grid {
        let h = t * 1e-6;
        let fd = (profile.eval(t + h) - profile.eval(t - h)) / (2.0 * h);
        let d = profile.deriv(t);
        let m = 1e-6 - (fd - d).abs() / d.abs().max(1e-30);
        if m < wm {
            wm = m;
            wt = t;
        }
    }
    push("derivative_consistency", wt, wm);

    // A(t) >= t (coercivity floor used by the minimizer's lower-bound check).
    let (mut wt, mut wm) = (grid[0], f64::INFINITY);
    for (&t, &at) in grid.iter().zip(&a) {
        let m = at - t + 1e-12 * t;
        if m < wm {
            wm = m;
            wt = t;
        }
    }
    push("dominates_t", wt, wm);

    let all_pass = entries.iter().all(|e| e.pass);
    let t_top = grid[grid.len() - 1];
    let ratio_top = t_top * profile.deriv(t_top) / profile.eval(t_top);
    let super_power_growth = ratio_top >= 2.0 * profile.p();

    Ok(ValidationReport { entries, all_pass, super_power_growth })
}
