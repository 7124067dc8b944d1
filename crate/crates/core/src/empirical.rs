//! Bivariate data: ingestion, pseudo-observations, the empirical copula,
//! plug-in estimates and percentile bootstrap intervals.

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::copula::{make_grid, Copula, GridCopula};
use crate::error::{CopulaError, Result};
use crate::measures::{
    blomqvist_beta, collect_warnings, mu_numeric, mu_raw_at, schweizer_wolff_sigma_at,
    schweizer_wolff_sigma_numeric, Entry, Estimate, MeasureReport, Method, PExponent,
};
use crate::quadrature::QuadratureConfig;
use crate::sampling::RngSeed;

/// Largest knot resolution of the empirical copula.
pub const MAX_GRID: usize = 256;
/// Below this sample size the μ_∞ estimate carries a bias warning.
pub const MU_SUP_BIAS_THRESHOLD: usize = 10_000;
pub const MIN_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Raw,
    /// Both coordinates strictly inside (0, 1).
    Pseudo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pairs: Vec<(f64, f64)>,
    kind: SampleKind,
}

impl SampleSet {
    pub fn raw(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(k) = pairs
            .iter()
            .position(|p| !(p.0.is_finite() && p.1.is_finite()))
        {
            return Err(CopulaError::DegenerateData(format!(
                "observation {} is not finite",
                k + 1
            )));
        }
        Ok(Self {
            pairs,
            kind: SampleKind::Raw,
        })
    }

    /// Wraps pseudo-observations produced elsewhere; every coordinate must
    /// lie strictly inside (0, 1).
    pub fn pseudo(pairs: Vec<(f64, f64)>) -> Result<Self> {
        let inside = |x: f64| x > 0.0 && x < 1.0;
        if let Some(k) = pairs.iter().position(|p| !(inside(p.0) && inside(p.1))) {
            return Err(CopulaError::DegenerateData(format!(
                "pseudo-observation {} lies outside the open unit square",
                k + 1
            )));
        }
        Ok(Self {
            pairs,
            kind: SampleKind::Pseudo,
        })
    }

    pub(crate) fn from_copula_draws(pairs: Vec<(f64, f64)>) -> Self {
        Self {
            pairs,
            kind: SampleKind::Raw,
        }
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn kind(&self) -> SampleKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The same observations with the two columns exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&(x, y)| (y, x)).collect(),
            kind: self.kind,
        }
    }

    /// Applies `f` to the first column and `g` to the second.
    pub fn map_columns(&self, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> Result<Self> {
        Self::raw(self.pairs.iter().map(|&(x, y)| (f(x), g(y))).collect())
    }
}

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Reads two comma-separated numeric columns. A first non-blank row that is
/// not numeric is treated as a header; blank lines are skipped; any other
/// malformed row is an error carrying its 1-based line number.
pub fn parse_csv<R: BufRead>(reader: R) -> Result<SampleSet> {
    let mut pairs = Vec::new();
    let mut seen_row = false;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| CopulaError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let first = !seen_row;
        seen_row = true;
        let cells: Vec<&str> = line.split(',').collect();
        let parsed: Vec<Option<f64>> = cells.iter().map(|c| parse_cell(c)).collect();
        if first && parsed.iter().any(Option::is_none) {
            continue;
        }
        if cells.len() != 2 {
            return Err(CopulaError::Parse {
                line: lineno,
                message: format!("expected 2 columns, found {}", cells.len()),
            });
        }
        match (parsed[0], parsed[1]) {
            (Some(x), Some(y)) => pairs.push((x, y)),
            _ => {
                let bad = if parsed[0].is_none() {
                    cells[0]
                } else {
                    cells[1]
                };
                return Err(CopulaError::Parse {
                    line: lineno,
                    message: format!("non-numeric cell {:?}", bad.trim()),
                });
            }
        }
    }
    SampleSet::raw(pairs)
}

/// 1-based ranks with ties replaced by their average rank.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

/// Rank transform: each coordinate becomes rank/(n+1), ties by average rank.
pub fn pseudo_observations(raw: &SampleSet) -> Result<SampleSet> {
    let n = raw.len();
    if n < 2 {
        return Err(CopulaError::TooFewObservations(n));
    }
    let xs: Vec<f64> = raw.pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = raw.pairs.iter().map(|p| p.1).collect();
    let scale = (n + 1) as f64;
    let pairs = average_ranks(&xs)
        .into_iter()
        .zip(average_ranks(&ys))
        .map(|(a, b)| (a / scale, b / scale))
        .collect();
    Ok(SampleSet {
        pairs,
        kind: SampleKind::Pseudo,
    })
}

fn require_pseudo(s: &SampleSet) -> Result<()> {
    if s.kind != SampleKind::Pseudo {
        return Err(CopulaError::NotPseudo);
    }
    if s.len() < 2 {
        return Err(CopulaError::TooFewObservations(s.len()));
    }
    Ok(())
}

/// Smallest knot index i with x ≤ i/m, for x in (0, 1].
fn knot_index(x: f64, m: usize) -> usize {
    let mf = m as f64;
    let mut i = ((x * mf).ceil() as usize).min(m);
    while i > 0 && x <= (i - 1) as f64 / mf {
        i -= 1;
    }
    while i < m && x > i as f64 / mf {
        i += 1;
    }
    i
}

/// C_n(u, v) = #{k : U_k ≤ u, V_k ≤ v}/n tabulated on the knots (i/m, j/m),
/// m = min(n, 256), and interpolated bilinearly.
pub fn empirical_copula(pseudo: &SampleSet) -> Result<Copula> {
    require_pseudo(pseudo)?;
    let first = pseudo.pairs[0];
    if pseudo.pairs.iter().all(|p| p.0 == first.0) || pseudo.pairs.iter().all(|p| p.1 == first.1) {
        return Err(CopulaError::DegenerateData(
            "a column has fewer than 2 distinct values".into(),
        ));
    }
    let n = pseudo.len();
    let m = n.min(MAX_GRID);
    let width = m + 1;
    let mut counts = vec![0u64; width * width];
    for &(u, v) in &pseudo.pairs {
        counts[knot_index(u, m) * width + knot_index(v, m)] += 1;
    }
    // 2-D prefix sums turn cell counts into #{U ≤ i/m, V ≤ j/m}.
    for i in 0..width {
        for j in 1..width {
            counts[i * width + j] += counts[i * width + j - 1];
        }
    }
    for i in 1..width {
        for j in 0..width {
            counts[i * width + j] += counts[(i - 1) * width + j];
        }
    }
    let nf = n as f64;
    let knots = counts.into_iter().map(|c| c as f64 / nf).collect();
    Ok(make_grid(GridCopula::from_knots(m, knots)?))
}

/// Kendall's τ̂ = (concordant − discordant) / C(n, 2), counted in
/// O(n log n) by sorting on x and counting inversions in y.
pub fn sample_kendall_tau(s: &SampleSet) -> f64 {
    let n = s.pairs.len();
    if n < 2 {
        return f64::NAN;
    }
    let mut pts = s.pairs.clone();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let tied_runs = |key: &dyn Fn(usize) -> bool| -> u64 {
        let (mut total, mut run) = (0u64, 1u64);
        for i in 1..n {
            if key(i) {
                run += 1;
            } else {
                total += run * (run - 1) / 2;
                run = 1;
            }
        }
        total + run * (run - 1) / 2
    };
    let tied_x = tied_runs(&|i| pts[i].0 == pts[i - 1].0);
    let tied_xy = tied_runs(&|i| pts[i] == pts[i - 1]);

    let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = count_inversions(&mut ys, &mut buf);
    let tied_y = tied_runs(&|i| ys[i] == ys[i - 1]);

    let total = (n as u64) * (n as u64 - 1) / 2;
    let net = total as i64 - tied_x as i64 - tied_y as i64 + tied_xy as i64 - 2 * swaps as i64;
    net as f64 / total as f64
}

/// Bottom-up merge sort of `v`, returning the number of strict inversions.
fn count_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    let mut swaps = 0u64;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            let (mut i, mut j, mut k) = (lo, mid, lo);
            while i < mid && j < hi {
                if v[j] < v[i] {
                    swaps += (mid - i) as u64;
                    buf[k] = v[j];
                    j += 1;
                } else {
                    buf[k] = v[i];
                    i += 1;
                }
                k += 1;
            }
            buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
            let k = k + mid - i;
            buf[k..hi].copy_from_slice(&v[j..hi]);
            lo = hi;
        }
        v.copy_from_slice(buf);
        width *= 2;
    }
    swaps
}

/// Pearson correlation of the pseudo-observations, i.e. Spearman's ρ̂.
pub fn sample_spearman_rho(s: &SampleSet) -> f64 {
    let n = s.len() as f64;
    let (mx, my) = s
        .pairs
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (mx / n, my / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &s.pairs {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

fn sample_estimate(value: f64) -> Estimate {
    Estimate {
        value,
        method: Method::MonteCarlo,
        gap: 0.0,
        converged: true,
    }
}

/// Plug-in estimates of every functional from pseudo-observations.
pub fn estimate_report(
    pseudo: &SampleSet,
    p_list: &[PExponent],
    cfg: &QuadratureConfig,
) -> Result<MeasureReport> {
    require_pseudo(pseudo)?;
    let cn = empirical_copula(pseudo)?;
    let n = pseudo.len();
    let mut report = MeasureReport {
        copula: format!("empirical(n={n})"),
        tau: Entry::Ok(sample_estimate(sample_kendall_tau(pseudo))),
        rho: Entry::Ok(sample_estimate(sample_spearman_rho(pseudo))),
        beta: Entry::Ok(sample_estimate(blomqvist_beta(&cn))),
        sigma: Entry::from_result(schweizer_wolff_sigma_numeric(&cn, cfg)),
        mu: p_list
            .iter()
            .map(|&p| Entry::from_result(mu_numeric(&cn, p, cfg)))
            .collect(),
        lambda_lower: Entry::failed("tail coefficients are not estimated from data"),
        lambda_upper: Entry::failed("tail coefficients are not estimated from data"),
        warnings: Vec::new(),
    };
    report.warnings = collect_warnings(&report);
    if n < MU_SUP_BIAS_THRESHOLD && p_list.iter().any(PExponent::is_infinite) {
        report.warnings.push(format!(
            "mu_inf: empirical supremum is biased low for n = {n} < {MU_SUP_BIAS_THRESHOLD}"
        ));
    }
    Ok(report)
}

/// A scalar functional that can be recomputed on resampled data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functional {
    Rho,
    Tau,
    Beta,
    Sigma,
    Mu(PExponent),
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Rho => f.write_str("rho"),
            Self::Tau => f.write_str("tau"),
            Self::Beta => f.write_str("beta"),
            Self::Sigma => f.write_str("sigma"),
            Self::Mu(p) => write!(f, "mu_{p}"),
        }
    }
}

impl FromStr for Functional {
    type Err = CopulaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rho" => Ok(Self::Rho),
            "tau" => Ok(Self::Tau),
            "beta" => Ok(Self::Beta),
            "sigma" => Ok(Self::Sigma),
            other => match other
                .strip_prefix("mu_")
                .or_else(|| other.strip_prefix("mu"))
            {
                Some(p) => Ok(Self::Mu(p.parse()?)),
                None => Err(CopulaError::InvalidConfig(format!(
                    "unknown functional {other:?}"
                ))),
            },
        }
    }
}

/// Evaluates a functional on pseudo-observations. Quadrature-based
/// functionals use resolution `cfg.n` only; the values equal the report's.
pub fn evaluate_functional(
    pseudo: &SampleSet,
    functional: Functional,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    require_pseudo(pseudo)?;
    Ok(match functional {
        Functional::Rho => sample_spearman_rho(pseudo),
        Functional::Tau => sample_kendall_tau(pseudo),
        Functional::Beta => blomqvist_beta(&empirical_copula(pseudo)?),
        Functional::Sigma => schweizer_wolff_sigma_at(&empirical_copula(pseudo)?, cfg.n)?,
        Functional::Mu(p) => mu_raw_at(&empirical_copula(pseudo)?, p, cfg)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub functional: String,
    pub estimate: f64,
    pub resamples: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Draws `count` resampled statistics. Resample `b` uses ChaCha8 stream `b`
/// of `seed`, so results do not depend on scheduling.
fn resampled_statistics<S>(
    pseudo: &SampleSet,
    count: usize,
    seed: RngSeed,
    stat: S,
) -> Result<Vec<f64>>
where
    S: Fn(&SampleSet) -> Result<f64> + Sync,
{
    let n = pseudo.len();
    let mut stats = (0..count)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
            rng.set_stream(b as u64);
            let pairs = (0..n).map(|_| pseudo.pairs[rng.gen_range(0..n)]).collect();
            stat(&SampleSet::from_copula_draws(pairs))
        })
        .collect::<Result<Vec<f64>>>()?;
    stats.sort_by(f64::total_cmp);
    Ok(stats)
}

/// Nonparametric percentile bootstrap: resample pairs with replacement,
/// re-rank, recompute the functional.
pub fn bootstrap(
    pseudo: &SampleSet,
    functional: Functional,
    resamples: usize,
    level: f64,
    seed: RngSeed,
    cfg: &QuadratureConfig,
) -> Result<BootstrapSummary> {
    require_pseudo(pseudo)?;
    if resamples < MIN_RESAMPLES {
        return Err(CopulaError::InvalidConfig(format!(
            "bootstrap needs at least {MIN_RESAMPLES} resamples, got {resamples}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(CopulaError::InvalidConfig(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let estimate = evaluate_functional(pseudo, functional, cfg)?;
    let stats = resampled_statistics(pseudo, resamples, seed, |s| {
        evaluate_functional(&pseudo_observations(s)?, functional, cfg)
    })?;
    let alpha = (1.0 - level) / 2.0;
    Ok(BootstrapSummary {
        functional: functional.to_string(),
        estimate,
        resamples,
        ci_low: quantile_sorted(&stats, alpha),
        ci_high: quantile_sorted(&stats, 1.0 - alpha),
        level,
    })
}

/// Upper `level` quantile of raw μ̂_p over `rounds` copies of the data in
/// which each observation is swapped with probability ½. Swapping preserves
/// the distribution of exchangeable data, so this is the spread μ̂_p shows
/// when there is no asymmetry to find.
pub fn swap_randomization_floor(
    pseudo: &SampleSet,
    p: PExponent,
    rounds: usize,
    level: f64,
    seed: RngSeed,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    require_pseudo(pseudo)?;
    if rounds == 0 || !(level > 0.0 && level < 1.0) {
        return Err(CopulaError::InvalidConfig(
            "swap randomization needs rounds >= 1 and level in (0, 1)".into(),
        ));
    }
    let mut stats = (0..rounds)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
            rng.set_stream(r as u64);
            let pairs = pseudo
                .pairs
                .iter()
                .map(|&(u, v)| if rng.gen::<bool>() { (v, u) } else { (u, v) })
                .collect();
            let s = pseudo_observations(&SampleSet::from_copula_draws(pairs))?;
            mu_raw_at(&empirical_copula(&s)?, p, cfg)
        })
        .collect::<Result<Vec<f64>>>()?;
    stats.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&stats, level))
}
