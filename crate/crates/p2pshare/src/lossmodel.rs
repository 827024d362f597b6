//! Claim process: at most one claim per policyholder per period, severity
//! capped at the deductible, with analytic moments.

use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaSampler};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("claim probability {0} must lie in [0, 1]")]
    BadProbability(f64),
    #[error("deductible {0} must be positive")]
    BadDeductible(f64),
    #[error("invalid severity: {0}")]
    BadSeverity(String),
    #[error("cannot parse severity spec '{0}': expected point:c, uniform:a,b or gamma:shift,mean,sd")]
    BadSeveritySpec(String),
    #[error("need at least one policyholder")]
    EmptyPortfolio,
    #[error("quadrature failed to converge")]
    QuadratureDiverged,
}

/// Severity distribution of a single claim, supported on `[0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Severity {
    /// Deterministic claim size.
    Point { value: f64 },
    /// Uniform on `[lo, hi)`.
    Uniform { lo: f64, hi: f64 },
    /// `shift + Gamma` where the Gamma part has mean `mean - shift` and
    /// standard deviation `sd`.
    ShiftedGamma { shift: f64, mean: f64, sd: f64 },
}

impl Severity {
    fn validate(&self) -> Result<(), LossError> {
        match *self {
            Severity::Point { value } => {
                if !(value >= 0.0) || !value.is_finite() {
                    return Err(LossError::BadSeverity(format!("point value {value}")));
                }
            }
            Severity::Uniform { lo, hi } => {
                if !(lo >= 0.0) || !(hi > lo) || !hi.is_finite() {
                    return Err(LossError::BadSeverity(format!("uniform bounds [{lo},{hi})")));
                }
            }
            Severity::ShiftedGamma { shift, mean, sd } => {
                if !(shift >= 0.0) || !(mean > shift) || !(sd > 0.0) || !sd.is_finite() {
                    return Err(LossError::BadSeverity(format!(
                        "gamma shift {shift}, mean {mean}, sd {sd}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn gamma_shape_scale(shift: f64, mean: f64, sd: f64) -> (f64, f64) {
        let excess = mean - shift;
        ((excess / sd).powi(2), sd * sd / excess)
    }
}

impl FromStr for Severity {
    type Err = LossError;

    fn from_str(text: &str) -> Result<Self, LossError> {
        let bad = || LossError::BadSeveritySpec(text.to_string());
        let (kind, rest) = text.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let severity = match (kind.trim(), nums.as_slice()) {
            ("point", [c]) => Severity::Point { value: *c },
            ("uniform", [a, b]) => Severity::Uniform { lo: *a, hi: *b },
            ("gamma", [shift, mean, sd]) => Severity::ShiftedGamma {
                shift: *shift,
                mean: *mean,
                sd: *sd,
            },
            _ => return Err(bad()),
        };
        severity.validate()?;
        Ok(severity)
    }
}

impl std::fmt::Display for Severity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Severity::Point { value } => write!(f, "point:{value}"),
            Severity::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            Severity::ShiftedGamma { shift, mean, sd } => write!(f, "gamma:{shift},{mean},{sd}"),
        }
    }
}

/// Claim probability, severity distribution and deductible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    pub claim_probability: f64,
    pub severity: Severity,
    pub deductible: f64,
}

impl LossModel {
    pub fn new(claim_probability: f64, severity: Severity, deductible: f64) -> Result<Self, LossError> {
        let model = LossModel {
            claim_probability,
            severity,
            deductible,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), LossError> {
        if !(0.0..=1.0).contains(&self.claim_probability) || !self.claim_probability.is_finite() {
            return Err(LossError::BadProbability(self.claim_probability));
        }
        if !(self.deductible > 0.0) || !self.deductible.is_finite() {
            return Err(LossError::BadDeductible(self.deductible));
        }
        self.severity.validate()
    }
}

/// One draw of the portfolio claim process.
#[derive(Debug, Clone, Serialize)]
pub struct ClaimSample {
    /// Claim indicator per policyholder.
    pub claimed: Vec<bool>,
    /// Severity where a claim occurred, 0 otherwise.
    pub severities: Vec<f64>,
    /// Capped loss `min(deductible, severity)` where claimed, 0 otherwise.
    pub capped: Vec<f64>,
}

impl ClaimSample {
    pub fn len(&self) -> usize {
        self.capped.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capped.is_empty()
    }

    pub fn total_loss(&self) -> f64 {
        self.capped.iter().sum()
    }

    /// Builds a deterministic sample from explicit severities; `None` means
    /// no claim for that policyholder.
    pub fn from_severities(severities: &[Option<f64>], deductible: f64) -> Result<Self, LossError> {
        if !(deductible > 0.0) {
            return Err(LossError::BadDeductible(deductible));
        }
        let mut claimed = Vec::with_capacity(severities.len());
        let mut sev = Vec::with_capacity(severities.len());
        let mut capped = Vec::with_capacity(severities.len());
        for &entry in severities {
            match entry {
                Some(y) if y >= 0.0 => {
                    claimed.push(true);
                    sev.push(y);
                    capped.push(y.min(deductible));
                }
                Some(y) => return Err(LossError::BadSeverity(format!("negative severity {y}"))),
                None => {
                    claimed.push(false);
                    sev.push(0.0);
                    capped.push(0.0);
                }
            }
        }
        Ok(ClaimSample {
            claimed,
            severities: sev,
            capped,
        })
    }
}

/// Samples claim indicators and severities for `n` policyholders.
pub fn sample_claims(
    model: &LossModel,
    n: usize,
    rng: &mut impl Rng,
) -> Result<ClaimSample, LossError> {
    model.validate()?;
    if n == 0 {
        return Err(LossError::EmptyPortfolio);
    }
    let gamma = match model.severity {
        Severity::ShiftedGamma { shift, mean, sd } => {
            let (shape, scale) = Severity::gamma_shape_scale(shift, mean, sd);
            Some(GammaSampler::new(shape, scale).map_err(|e| LossError::BadSeverity(e.to_string()))?)
        }
        _ => None,
    };
    let mut claimed = Vec::with_capacity(n);
    let mut severities = Vec::with_capacity(n);
    let mut capped = Vec::with_capacity(n);
    for _ in 0..n {
        let z = rng.random_bool(model.claim_probability);
        let y = match model.severity {
            Severity::Point { value } => value,
            Severity::Uniform { lo, hi } => rng.random_range(lo..hi),
            Severity::ShiftedGamma { shift, .. } => {
                shift + gamma.as_ref().expect("sampler built above").sample(rng)
            }
        };
        claimed.push(z);
        severities.push(if z { y } else { 0.0 });
        capped.push(if z { y.min(model.deductible) } else { 0.0 });
    }
    Ok(ClaimSample {
        claimed,
        severities,
        capped,
    })
}

/// Mean and standard deviation of the capped loss `X = Z * min(s, Y)`.
///
/// Point and uniform severities use closed forms; the shifted Gamma uses
/// adaptive quadrature on the bounded part plus the exact tail mass.
pub fn loss_moments(model: &LossModel) -> Result<(f64, f64), LossError> {
    model.validate()?;
    let (m1, m2) = capped_severity_moments(&model.severity, model.deductible)?;
    let p = model.claim_probability;
    let mean = p * m1;
    let var = (p * m2 - mean * mean).max(0.0);
    Ok((mean, var.sqrt()))
}

/// Probability that a claim stays at or below the deductible.
pub fn below_deductible_fraction(model: &LossModel) -> Result<f64, LossError> {
    model.validate()?;
    let s = model.deductible;
    Ok(match model.severity {
        Severity::Point { value } => {
            if value <= s {
                1.0
            } else {
                0.0
            }
        }
        Severity::Uniform { lo, hi } => ((s - lo) / (hi - lo)).clamp(0.0, 1.0),
        Severity::ShiftedGamma { shift, mean, sd } => {
            if s <= shift {
                0.0
            } else {
                let (shape, scale) = Severity::gamma_shape_scale(shift, mean, sd);
                let dist = GammaDist::new(shape, 1.0 / scale)
                    .map_err(|e| LossError::BadSeverity(e.to_string()))?;
                dist.cdf(s - shift)
            }
        }
    })
}

/// First two moments of `min(s, Y)`.
fn capped_severity_moments(severity: &Severity, s: f64) -> Result<(f64, f64), LossError> {
    match *severity {
        Severity::Point { value } => {
            let c = value.min(s);
            Ok((c, c * c))
        }
        Severity::Uniform { lo, hi } => {
            if s >= hi {
                let m1 = (lo + hi) / 2.0;
                let m2 = (hi.powi(3) - lo.powi(3)) / (3.0 * (hi - lo));
                Ok((m1, m2))
            } else if s <= lo {
                Ok((s, s * s))
            } else {
                let w = hi - lo;
                let tail = (hi - s) / w;
                let m1 = (s * s - lo * lo) / (2.0 * w) + s * tail;
                let m2 = (s.powi(3) - lo.powi(3)) / (3.0 * w) + s * s * tail;
                Ok((m1, m2))
            }
        }
        Severity::ShiftedGamma { shift, mean, sd } => {
            if s <= shift {
                // Y >= shift almost surely, so min(s, Y) = s
                return Ok((s, s * s));
            }
            let (shape, scale) = Severity::gamma_shape_scale(shift, mean, sd);
            let dist = GammaDist::new(shape, 1.0 / scale)
                .map_err(|e| LossError::BadSeverity(e.to_string()))?;
            let t = s - shift;
            let tail = 1.0 - dist.cdf(t);
            let m1 = gamma_truncated_expectation(shape, scale, shift, t, 1)? + s * tail;
            let m2 = gamma_truncated_expectation(shape, scale, shift, t, 2)? + s * s * tail;
            Ok((m1, m2))
        }
    }
}

/// Integral of `(shift + g)^power` against the Gamma density over `[0, t]`.
///
/// For shape < 1 the density is singular at 0; substituting `u = g^shape`
/// flattens the singularity so plain adaptive Simpson applies.
fn gamma_truncated_expectation(
    shape: f64,
    scale: f64,
    shift: f64,
    t: f64,
    power: i32,
) -> Result<f64, LossError> {
    let ln_norm = -ln_gamma(shape) - shape * scale.ln();
    let value = if shape < 1.0 {
        let integrand = |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let g = u.powf(1.0 / shape);
            (shift + g).powi(power) * (ln_norm - g / scale).exp() / shape
        };
        adaptive_simpson(&integrand, 0.0, t.powf(shape), 1e-8)?
    } else {
        let integrand = |g: f64| {
            if g <= 0.0 {
                return if shape == 1.0 {
                    shift.powi(power) * ln_norm.exp()
                } else {
                    0.0
                };
            }
            (shift + g).powi(power) * (ln_norm + (shape - 1.0) * g.ln() - g / scale).exp()
        };
        adaptive_simpson(&integrand, 0.0, t, 1e-8)?
    };
    Ok(value)
}

/// Adaptive Simpson over 64 uniform panels; the initial split keeps narrow
/// density peaks from being stepped over.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64, LossError> {
    if !(b > a) {
        return Ok(0.0);
    }
    const PANELS: usize = 64;
    let width = (b - a) / PANELS as f64;
    let mut coarse = 0.0;
    let mut panels = Vec::with_capacity(PANELS);
    for k in 0..PANELS {
        let lo = a + k as f64 * width;
        let hi = lo + width;
        let est = simpson(f, lo, hi);
        coarse += est.abs();
        panels.push((lo, hi, est));
    }
    let tol = rel_tol * coarse.max(f64::MIN_POSITIVE);
    // floor keeps the per-level halving from chasing tolerances below the
    // float noise of the panel estimates themselves
    let floor = 1e-15 * coarse.max(1.0);
    let mut total = 0.0;
    for (lo, hi, est) in panels {
        total += simpson_refine(f, lo, hi, est, (tol / PANELS as f64).max(floor), floor, 40)?;
    }
    Ok(total)
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
}

fn simpson_refine(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    floor: f64,
    depth: usize,
) -> Result<f64, LossError> {
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(LossError::QuadratureDiverged);
    }
    let child_tol = (tol / 2.0).max(floor);
    Ok(simpson_refine(f, a, m, left, child_tol, floor, depth - 1)?
        + simpson_refine(f, m, b, right, child_tol, floor, depth - 1)?)
}
