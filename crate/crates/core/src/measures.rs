//! Dependence and non-exchangeability functionals.
//!
//! Each functional prefers a closed form declared by the copula and falls
//! back to the numerical engine otherwise. The `*_numeric` variants skip the
//! closed forms entirely; the verification suite uses them to audit the
//! declared values.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::copula::{Copula, SupportSegment};
use crate::error::{CopulaError, Result};
use crate::quadrature::{
    diagonal_limit, integrate, midpoint, midpoint_rule, pairwise_sum, partial_derivative_field,
    sup_abs, Axis, LimitSide, QuadratureConfig,
};
use crate::sampling::{RngSeed, Sampler};

/// Number of sample pairs for the Monte-Carlo Kendall estimator.
pub const DEFAULT_MC_PAIRS: usize = 200_000;
pub const DEFAULT_MC_SEED: RngSeed = RngSeed(0x5eed_7a00);

/// Settings for the Monte-Carlo fallback of the τ cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub pairs: usize,
    pub seed: RngSeed,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            pairs: DEFAULT_MC_PAIRS,
            seed: DEFAULT_MC_SEED,
        }
    }
}

/// Exponent of the L^p distance, p ∈ [1, ∞].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PExponent {
    Finite(f64),
    Infinity,
}

impl PExponent {
    pub fn finite(p: f64) -> Result<Self> {
        if p >= 1.0 && p.is_finite() {
            Ok(Self::Finite(p))
        } else if p == f64::INFINITY {
            Ok(Self::Infinity)
        } else {
            Err(CopulaError::InvalidParameter {
                name: "p",
                value: p,
                reason: "exponent must be >= 1 or infinity",
            })
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Self::Infinity)
    }

    /// The sharp upper bound K_p of μ_p over all copulas:
    /// K_∞ = 1/3 and K_p = (2·3^{−p} / ((p+1)(p+2)))^{1/p}.
    pub fn bound(&self) -> f64 {
        match *self {
            Self::Infinity => 1.0 / 3.0,
            Self::Finite(p) => (2.0 * 3f64.powf(-p) / ((p + 1.0) * (p + 2.0))).powf(1.0 / p),
        }
    }
}

impl fmt::Display for PExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(p) => write!(f, "{p}"),
            Self::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for PExponent {
    type Err = CopulaError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") || s == "∞" {
            return Ok(Self::Infinity);
        }
        let p: f64 = s.parse().map_err(|_| CopulaError::InvalidParameter {
            name: "p",
            value: f64::NAN,
            reason: "expected a real number >= 1 or \"inf\"",
        })?;
        Self::finite(p)
    }
}

impl Serialize for PExponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(p) => s.serialize_f64(*p),
            Self::Infinity => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    /// Computed from random draws or from an observed sample.
    MonteCarlo,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ClosedForm => "closed_form",
            Self::Quadrature => "quadrature",
            Self::MonteCarlo => "monte_carlo",
        })
    }
}

/// A computed functional with its provenance and error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub method: Method,
    /// Numerical error scale: |I_n − I_{2n}| (scaled) for quadrature, the
    /// standard-error bound for Monte Carlo, 0 for closed forms.
    pub gap: f64,
    pub converged: bool,
}

impl Estimate {
    pub fn closed(value: f64) -> Self {
        Self {
            value,
            method: Method::ClosedForm,
            gap: 0.0,
            converged: true,
        }
    }
}

/// Raw and normalized μ_p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuEstimate {
    pub p: PExponent,
    pub raw: f64,
    pub normalized: f64,
    pub method: Method,
    pub gap: f64,
    pub converged: bool,
}

impl MuEstimate {
    fn new(p: PExponent, raw: f64, method: Method, gap: f64, converged: bool) -> Self {
        Self {
            p,
            raw,
            normalized: raw / p.bound(),
            method,
            gap,
            converged,
        }
    }
}

// ---------------------------------------------------------------------------
// Spearman's rho

pub fn spearman_rho(c: &Copula, cfg: &QuadratureConfig) -> Result<Estimate> {
    match c.closed_forms().rho {
        Some(rho) => Ok(Estimate::closed(rho)),
        None => spearman_rho_numeric(c, cfg),
    }
}

/// ρ = 12∫C − 3 by quadrature.
pub fn spearman_rho_numeric(c: &Copula, cfg: &QuadratureConfig) -> Result<Estimate> {
    let r = integrate(|u, v| c.value(u, v), cfg)?;
    Ok(Estimate {
        value: 12.0 * r.value - 3.0,
        method: Method::Quadrature,
        gap: 12.0 * r.gap,
        converged: r.converged,
    })
}

// ---------------------------------------------------------------------------
// Kendall's tau

/// Kendall's τ by the cascade: closed form, then 1 − 4∫∂₁C·∂₂C for
/// absolutely continuous copulas, then the Monte-Carlo concordance
/// estimator when a sampler exists.
pub fn kendall_tau(c: &Copula, cfg: &QuadratureConfig, mc: McConfig) -> Result<Estimate> {
    if let Some(tau) = c.closed_forms().tau {
        return Ok(Estimate::closed(tau));
    }
    if c.is_absolutely_continuous() {
        return kendall_tau_derivative(c, cfg);
    }
    if c.has_sampler() {
        return kendall_tau_monte_carlo(c, mc.pairs, mc.seed);
    }
    Err(CopulaError::NoStrategy {
        functional: "kendall_tau",
        copula: c.to_string(),
    })
}

fn tau_from_derivatives(c: &Copula, n: usize) -> Result<f64> {
    let d1 = partial_derivative_field(c, Axis::First, n)?;
    let d2 = partial_derivative_field(c, Axis::Second, n)?;
    Ok(1.0 - 4.0 * d1.product(&d2)?.mean())
}

/// τ = 1 − 4∫∂₁C·∂₂C with finite-difference partials; the gap compares
/// resolutions n and 2n.
pub fn kendall_tau_derivative(c: &Copula, cfg: &QuadratureConfig) -> Result<Estimate> {
    cfg.validate()?;
    let coarse = tau_from_derivatives(c, cfg.n)?;
    let fine = tau_from_derivatives(c, 2 * cfg.n)?;
    let gap = (coarse - fine).abs();
    Ok(Estimate {
        value: coarse,
        method: Method::Quadrature,
        gap,
        converged: gap <= 4.0 * cfg.tolerance,
    })
}

/// Mean of sign((U₁−U₂)(V₁−V₂)) over `pairs` independent pairs of draws.
/// The gap is the standard-error bound 1/√pairs.
pub fn kendall_tau_monte_carlo(c: &Copula, pairs: usize, seed: RngSeed) -> Result<Estimate> {
    if pairs == 0 {
        return Err(CopulaError::InvalidConfig(
            "Monte-Carlo Kendall needs at least one pair".into(),
        ));
    }
    let mut sampler = Sampler::new(c, seed)?;
    let mut total: i64 = 0;
    for _ in 0..pairs {
        let (u1, v1) = sampler.next_pair();
        let (u2, v2) = sampler.next_pair();
        let prod = (u1 - u2) * (v1 - v2);
        if prod > 0.0 {
            total += 1;
        } else if prod < 0.0 {
            total -= 1;
        }
    }
    Ok(Estimate {
        value: total as f64 / pairs as f64,
        method: Method::MonteCarlo,
        gap: 1.0 / (pairs as f64).sqrt(),
        converged: true,
    })
}

/// ∫ M_θ dM_θ evaluated along the two support segments:
/// ((1−θ)² + θ²)/2.
pub fn mtheta_support_integral(theta: f64) -> f64 {
    ((1.0 - theta).powi(2) + theta * theta) / 2.0
}

fn support_integral(c: &Copula, segments: &[SupportSegment], n: usize) -> f64 {
    segments
        .iter()
        .map(|seg| {
            let (du, dv) = (seg.end.0 - seg.start.0, seg.end.1 - seg.start.1);
            let vals: Vec<f64> = (0..n)
                .map(|k| {
                    let s = midpoint(n, k);
                    c.value(seg.start.0 + s * du, seg.start.1 + s * dv)
                })
                .collect();
            seg.mass * pairwise_sum(&vals) / n as f64
        })
        .sum()
}

/// τ = 4∫C dC − 1 for a copula whose mass sits uniformly on the given line
/// segments, with ∫C dC taken by the midpoint rule along each segment. The
/// gap compares n and 2n nodes per segment.
pub fn kendall_tau_on_support(
    c: &Copula,
    segments: &[SupportSegment],
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    let coarse = tau_from_copula_integral(support_integral(c, segments, cfg.n));
    let fine = tau_from_copula_integral(support_integral(c, segments, 2 * cfg.n));
    let gap = (coarse - fine).abs();
    if !coarse.is_finite() {
        return Err(CopulaError::InvalidConfig(format!(
            "non-finite support integral for {c}"
        )));
    }
    Ok(Estimate {
        value: coarse,
        method: Method::Quadrature,
        gap,
        converged: gap <= cfg.tolerance,
    })
}

/// τ = 4∫C dC − 1.
pub fn tau_from_copula_integral(integral: f64) -> f64 {
    4.0 * integral - 1.0
}

// ---------------------------------------------------------------------------
// Blomqvist's beta

/// β = 4C(½, ½) − 1, a single exact evaluation.
pub fn blomqvist_beta(c: &Copula) -> f64 {
    4.0 * c.value(0.5, 0.5) - 1.0
}

// ---------------------------------------------------------------------------
// Schweizer–Wolff sigma

pub fn schweizer_wolff_sigma(c: &Copula, cfg: &QuadratureConfig) -> Result<Estimate> {
    match c.closed_forms().sigma {
        Some(sigma) => Ok(Estimate::closed(sigma)),
        None => schweizer_wolff_sigma_numeric(c, cfg),
    }
}

/// σ = 12∫|C − Π| by quadrature.
pub fn schweizer_wolff_sigma_numeric(c: &Copula, cfg: &QuadratureConfig) -> Result<Estimate> {
    let r = integrate(|u, v| (c.value(u, v) - u * v).abs(), cfg)?;
    Ok(Estimate {
        value: 12.0 * r.value,
        method: Method::Quadrature,
        gap: 12.0 * r.gap,
        converged: r.converged,
    })
}

/// σ at resolution n only, without the refinement pass. Equals the `value`
/// of [`schweizer_wolff_sigma_numeric`] with the same `n`.
pub fn schweizer_wolff_sigma_at(c: &Copula, n: usize) -> Result<f64> {
    Ok(12.0 * midpoint_rule(&|u: f64, v: f64| (c.value(u, v) - u * v).abs(), n)?)
}

// ---------------------------------------------------------------------------
// Non-exchangeability

pub fn mu(c: &Copula, p: PExponent, cfg: &QuadratureConfig) -> Result<MuEstimate> {
    let cf = c.closed_forms();
    if cf.mu_vanishes {
        return Ok(MuEstimate::new(p, 0.0, Method::ClosedForm, 0.0, true));
    }
    if let (PExponent::Infinity, Some(sup)) = (p, cf.mu_sup) {
        return Ok(MuEstimate::new(p, sup, Method::ClosedForm, 0.0, true));
    }
    mu_numeric(c, p, cfg)
}

/// |x|^p with 0^p = 0.
fn abs_pow(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 {
        0.0
    } else if p == 1.0 {
        a
    } else {
        (p * a.ln()).exp()
    }
}

/// Raw μ_p at the configured resolution only, without the refinement
/// pass. Equals `mu_numeric(c, p, cfg).raw`; used where many copies are
/// evaluated and no error estimate is needed.
pub fn mu_raw_at(c: &Copula, p: PExponent, cfg: &QuadratureConfig) -> Result<f64> {
    let diff = |u: f64, v: f64| c.value(u, v) - c.value(v, u);
    match p {
        PExponent::Infinity => Ok(sup_abs(diff, cfg)?.value),
        PExponent::Finite(q) => {
            let x = midpoint_rule(&|u: f64, v: f64| abs_pow(diff(u, v), q), cfg.n)?;
            Ok(if x <= 0.0 { 0.0 } else { x.powf(1.0 / q) })
        }
    }
}

/// μ_p = ‖C − Cᵗ‖_p by quadrature (p < ∞) or sup search (p = ∞).
pub fn mu_numeric(c: &Copula, p: PExponent, cfg: &QuadratureConfig) -> Result<MuEstimate> {
    let diff = |u: f64, v: f64| c.value(u, v) - c.value(v, u);
    match p {
        PExponent::Infinity => {
            let s = sup_abs(diff, cfg)?;
            Ok(MuEstimate::new(
                p,
                s.value,
                Method::Quadrature,
                s.error_bound,
                true,
            ))
        }
        PExponent::Finite(q) => {
            let r = integrate(|u, v| abs_pow(diff(u, v), q), cfg)?;
            let root = |x: f64| if x <= 0.0 { 0.0 } else { x.powf(1.0 / q) };
            let raw = root(r.value);
            let gap = (raw - root(r.estimates[1])).abs();
            Ok(MuEstimate::new(
                p,
                raw,
                Method::Quadrature,
                gap,
                r.converged,
            ))
        }
    }
}

// ---------------------------------------------------------------------------
// Tail dependence

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailCoefficients {
    pub lower: Estimate,
    pub upper: Estimate,
}

pub fn tail_coefficients(c: &Copula) -> Result<TailCoefficients> {
    let cf = c.closed_forms();
    let numeric = match (cf.lambda_lower, cf.lambda_upper) {
        (Some(_), Some(_)) => None,
        _ => Some(tail_coefficients_numeric(c)?),
    };
    let pick = |closed: Option<f64>, numeric: Option<Estimate>| match closed {
        Some(x) => Estimate::closed(x),
        None => numeric.expect("computed when a closed form is missing"),
    };
    Ok(TailCoefficients {
        lower: pick(cf.lambda_lower, numeric.map(|t| t.lower)),
        upper: pick(cf.lambda_upper, numeric.map(|t| t.upper)),
    })
}

/// λ_L = lim C(t,t)/t and λ_U = lim (1 − 2t + C(t,t))/(1 − t) by
/// extrapolation. Non-convergence is reported through `converged`.
pub fn tail_coefficients_numeric(c: &Copula) -> Result<TailCoefficients> {
    let lower = diagonal_limit(|t| c.value(t, t) / t, LimitSide::ZeroPlus)?;
    let upper = diagonal_limit(
        |t| (1.0 - 2.0 * t + c.value(t, t)) / (1.0 - t),
        LimitSide::OneMinus,
    )?;
    let wrap = |l: crate::quadrature::LimitEstimate| Estimate {
        value: l.value,
        method: Method::Quadrature,
        gap: l.stability_gap,
        converged: l.converged,
    };
    Ok(TailCoefficients {
        lower: wrap(lower),
        upper: wrap(upper),
    })
}

// ---------------------------------------------------------------------------
// Reports

/// One report entry: an estimate, or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Entry<T> {
    Ok(T),
    Failed { error: String },
}

impl<T> Entry<T> {
    pub fn from_result(r: Result<T>) -> Self {
        match r {
            Ok(x) => Self::Ok(x),
            Err(e) => Self::Failed {
                error: e.to_string(),
            },
        }
    }

    pub fn failed(msg: impl Into<String>) -> Self {
        Self::Failed { error: msg.into() }
    }

    pub fn ok(&self) -> Option<&T> {
        match self {
            Self::Ok(x) => Some(x),
            Self::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureReport {
    pub copula: String,
    pub tau: Entry<Estimate>,
    pub rho: Entry<Estimate>,
    pub beta: Entry<Estimate>,
    pub sigma: Entry<Estimate>,
    pub mu: Vec<Entry<MuEstimate>>,
    pub lambda_lower: Entry<Estimate>,
    pub lambda_upper: Entry<Estimate>,
    pub warnings: Vec<String>,
}

/// Every functional for one copula. Individual failures are recorded in
/// place; the report itself always assembles.
pub fn full_report(
    c: &Copula,
    p_list: &[PExponent],
    cfg: &QuadratureConfig,
    mc: McConfig,
) -> MeasureReport {
    let beta = Estimate {
        value: blomqvist_beta(c),
        method: Method::ClosedForm,
        gap: 0.0,
        converged: true,
    };
    let (lambda_lower, lambda_upper) = match tail_coefficients(c) {
        Ok(t) => (Entry::Ok(t.lower), Entry::Ok(t.upper)),
        Err(e) => (Entry::failed(e.to_string()), Entry::failed(e.to_string())),
    };
    let mut report = MeasureReport {
        copula: c.to_string(),
        tau: Entry::from_result(kendall_tau(c, cfg, mc)),
        rho: Entry::from_result(spearman_rho(c, cfg)),
        beta: Entry::Ok(beta),
        sigma: Entry::from_result(schweizer_wolff_sigma(c, cfg)),
        mu: p_list
            .iter()
            .map(|&p| Entry::from_result(mu(c, p, cfg)))
            .collect(),
        lambda_lower,
        lambda_upper,
        warnings: Vec::new(),
    };
    report.warnings = collect_warnings(&report);
    report
}

pub(crate) fn collect_warnings(report: &MeasureReport) -> Vec<String> {
    let mut out = Vec::new();
    let mut check = |name: &str, e: &Entry<Estimate>| {
        if let Entry::Ok(x) = e {
            if !x.converged {
                out.push(format!("{name}: not converged (gap {:e})", x.gap));
            }
        }
    };
    check("tau", &report.tau);
    check("rho", &report.rho);
    check("sigma", &report.sigma);
    check("lambda_lower", &report.lambda_lower);
    check("lambda_upper", &report.lambda_upper);
    for m in report.mu.iter().filter_map(Entry::ok) {
        if !m.converged {
            out.push(format!("mu_{}: not converged (gap {:e})", m.p, m.gap));
        }
    }
    out
}
