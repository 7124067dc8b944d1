//! Deterministic integration, supremum search and one-sided limits on the
//! unit square.
//!
//! Everything here works on the midpoint lattice ((i+½)/n, (j+½)/n). Rows may
//! be evaluated in parallel but are always reduced in row-major order with
//! pairwise summation, so results do not depend on the thread count.

use rayon::prelude::*;

use crate::copula::Copula;
use crate::error::{CopulaError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Midpoints per axis.
    pub n: usize,
    /// Number of successive doublings used to estimate convergence.
    pub refine_levels: usize,
    /// Target for |I_n − I_{2n}|.
    pub tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            n: 512,
            refine_levels: 2,
            tolerance: 1e-4,
        }
    }
}

impl QuadratureConfig {
    pub fn with_n(n: usize) -> Self {
        Self {
            n,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(CopulaError::InvalidConfig(format!(
                "grid resolution must be at least 2, got {}",
                self.n
            )));
        }
        if self.refine_levels < 1 {
            return Err(CopulaError::InvalidConfig(
                "refine_levels must be at least 1".into(),
            ));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(CopulaError::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

#[inline]
pub fn midpoint(n: usize, i: usize) -> f64 {
    (i as f64 + 0.5) / n as f64
}

/// Pairwise (cascade) summation; error grows like O(log n) instead of O(n).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// An n×n tabulation of a scalar function at the midpoint lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    n: usize,
    values: Vec<f64>,
}

impl GridField {
    /// Tabulates `f` at every midpoint. Fails on the first non-finite value
    /// in row-major order.
    pub fn tabulate<F>(n: usize, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        if n < 2 {
            return Err(CopulaError::InvalidConfig(format!(
                "grid resolution must be at least 2, got {n}"
            )));
        }
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let u = midpoint(n, i);
                (0..n).map(|j| f(u, midpoint(n, j))).collect()
            })
            .collect();
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_values(n, values)
    }

    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 || values.len() != n * n {
            return Err(CopulaError::InvalidConfig(format!(
                "grid field needs n >= 2 and n² values (n = {n}, got {})",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|x| !x.is_finite()) {
            return Err(CopulaError::NonFiniteNode {
                u: midpoint(n, k / n),
                v: midpoint(n, k % n),
                value: values[k],
            });
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Midpoint-rule integral: the mean of the tabulated values.
    pub fn mean(&self) -> f64 {
        let row_sums: Vec<f64> = self.values.chunks_exact(self.n).map(pairwise_sum).collect();
        pairwise_sum(&row_sums) / (self.n * self.n) as f64
    }

    /// Pointwise product with another field of the same resolution.
    pub fn product(&self, other: &GridField) -> Result<GridField> {
        if self.n != other.n {
            return Err(CopulaError::InvalidConfig(format!(
                "resolution mismatch: {} vs {}",
                self.n, other.n
            )));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        GridField::from_values(self.n, values)
    }
}

/// Composite midpoint rule at a single resolution.
pub fn midpoint_rule<F>(f: &F, n: usize) -> Result<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    if n < 2 {
        return Err(CopulaError::InvalidConfig(format!(
            "grid resolution must be at least 2, got {n}"
        )));
    }
    let row_sums: Vec<Result<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let u = midpoint(n, i);
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                let v = midpoint(n, j);
                let x = f(u, v);
                if !x.is_finite() {
                    return Err(CopulaError::NonFiniteNode { u, v, value: x });
                }
                row.push(x);
            }
            Ok(pairwise_sum(&row))
        })
        .collect();
    let row_sums = row_sums.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&row_sums) / (n * n) as f64)
}

/// Integral estimate with its convergence diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Integral {
    /// Midpoint estimate at the configured resolution n.
    pub value: f64,
    /// |I_n − I_{2n}|.
    pub gap: f64,
    /// Estimates at n, 2n, 4n, … (refine_levels + 1 entries).
    pub estimates: Vec<f64>,
    /// `gap <= tolerance`.
    pub converged: bool,
}

impl Integral {
    /// Successive gaps |I_{2^k n} − I_{2^{k+1} n}|.
    pub fn gaps(&self) -> Vec<f64> {
        self.estimates
            .windows(2)
            .map(|w| (w[0] - w[1]).abs())
            .collect()
    }
}

/// Integrates `f` over [0,1]² with the midpoint rule. The estimate is always
/// returned; `converged` flags whether the gap met the tolerance.
pub fn integrate<F>(f: F, cfg: &QuadratureConfig) -> Result<Integral>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    cfg.validate()?;
    let estimates = (0..=cfg.refine_levels)
        .map(|k| midpoint_rule(&f, cfg.n << k))
        .collect::<Result<Vec<f64>>>()?;
    let gap = (estimates[0] - estimates[1]).abs();
    Ok(Integral {
        value: estimates[0],
        gap,
        converged: gap <= cfg.tolerance,
        estimates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupEstimate {
    /// Largest |f| found; always attained at an evaluated point, hence a
    /// lower bound on the true supremum.
    pub value: f64,
    pub argmax: (f64, f64),
    /// Largest |f| on the midpoint lattice alone.
    pub grid_value: f64,
    /// Lipschitz bound on (true sup − value) for copula differences.
    pub error_bound: f64,
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Golden-section maximisation of `h` on [lo, hi]; returns the best point
/// evaluated and its value.
fn golden_max<H: Fn(f64) -> f64>(h: H, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut f1, mut f2) = (h(x1), h(x2));
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for _ in 0..iters {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = h(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = h(x2);
        }
        for cand in [(x1, f1), (x2, f2)] {
            if cand.1 > best.1 {
                best = cand;
            }
        }
    }
    best
}

/// sup |f| over [0,1]²: lattice maximum followed by one coordinate-wise
/// golden-section pass on the 3/n box around the lattice argmax.
pub fn sup_abs<F>(f: F, cfg: &QuadratureConfig) -> Result<SupEstimate>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    cfg.validate()?;
    let n = cfg.n;
    let row_max: Vec<Result<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let u = midpoint(n, i);
            let mut best = (f64::NEG_INFINITY, 0);
            for j in 0..n {
                let v = midpoint(n, j);
                let x = f(u, v);
                if !x.is_finite() {
                    return Err(CopulaError::NonFiniteNode { u, v, value: x });
                }
                if x.abs() > best.0 {
                    best = (x.abs(), j);
                }
            }
            Ok(best)
        })
        .collect();
    let mut grid_value = f64::NEG_INFINITY;
    let mut arg = (0, 0);
    for (i, r) in row_max.into_iter().enumerate() {
        let (x, j) = r?;
        if x > grid_value {
            grid_value = x;
            arg = (i, j);
        }
    }

    let abs_f = |u: f64, v: f64| {
        let x = f(u, v);
        if x.is_finite() {
            x.abs()
        } else {
            f64::NEG_INFINITY
        }
    };
    let half = 1.5 / n as f64;
    let (mut u, mut v) = (midpoint(n, arg.0), midpoint(n, arg.1));
    let (ulo, uhi) = ((u - half).max(0.0), (u + half).min(1.0));
    let (vlo, vhi) = ((v - half).max(0.0), (v + half).min(1.0));
    let mut value = grid_value;
    for _ in 0..3 {
        let (bu, fu) = golden_max(|x| abs_f(x, v), ulo, uhi, 48);
        if fu > value {
            value = fu;
            u = bu;
        }
        let (bv, fv) = golden_max(|y| abs_f(u, y), vlo, vhi, 48);
        if fv > value {
            value = fv;
            v = bv;
        }
    }

    Ok(SupEstimate {
        value,
        argmax: (u, v),
        grid_value,
        error_bound: 2.0 / n as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitSide {
    /// t → 0⁺
    ZeroPlus,
    /// t → 1⁻
    OneMinus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitEstimate {
    pub value: f64,
    /// |g(t_last) − value|.
    pub stability_gap: f64,
    pub converged: bool,
    /// g(t_k) for k = FIRST_EXPONENT..=LAST_EXPONENT.
    pub sequence: Vec<f64>,
}

pub const FIRST_EXPONENT: i32 = 6;
pub const LAST_EXPONENT: i32 = 20;
pub const OSCILLATION_THRESHOLD: f64 = 1e-3;

fn aitken(x0: f64, x1: f64, x2: f64) -> f64 {
    let second = x2 - 2.0 * x1 + x0;
    if second.abs() <= 1e-14 * (1.0 + x2.abs()) {
        return x2;
    }
    let est = x0 - (x1 - x0).powi(2) / second;
    if est.is_finite() {
        est
    } else {
        x2
    }
}

/// One-sided limit of `g` at 0⁺ or 1⁻ from the dyadic sequence
/// t_k = 2^{−k} (or 1 − 2^{−k}), k = 6..=20, accelerated with Aitken's Δ².
pub fn diagonal_limit<G: Fn(f64) -> f64>(g: G, side: LimitSide) -> Result<LimitEstimate> {
    let sequence = (FIRST_EXPONENT..=LAST_EXPONENT)
        .map(|k| {
            let h = 2f64.powi(-k);
            let t = match side {
                LimitSide::ZeroPlus => h,
                LimitSide::OneMinus => 1.0 - h,
            };
            let x = g(t);
            if x.is_finite() {
                Ok(x)
            } else {
                Err(CopulaError::NonFiniteLimit { t, value: x })
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let accelerated: Vec<f64> = sequence
        .windows(3)
        .map(|w| aitken(w[0], w[1], w[2]))
        .collect();
    let value = *accelerated.last().expect("sequence has 15 terms");
    let tail = &accelerated[accelerated.len() - 3..];
    let converged = tail
        .windows(2)
        .all(|w| (w[1] - w[0]).abs() <= OSCILLATION_THRESHOLD);
    let last = *sequence.last().expect("sequence has 15 terms");
    Ok(LimitEstimate {
        value,
        stability_gap: (last - value).abs(),
        converged,
        sequence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    First,
    Second,
}

/// Central difference of C along `axis` at (u, v) with step h, unclamped.
/// The stencil is pulled inside [0, 1] near the boundary.
pub fn finite_difference(c: &Copula, axis: Axis, u: f64, v: f64, h: f64) -> f64 {
    let along = match axis {
        Axis::First => u,
        Axis::Second => v,
    };
    let lo = (along - 0.5 * h).max(0.0);
    let hi = (lo + h).min(1.0);
    let lo = hi - h;
    match axis {
        Axis::First => (c.value(hi, v) - c.value(lo, v)) / h,
        Axis::Second => (c.value(u, hi) - c.value(u, lo)) / h,
    }
}

/// ∂C/∂u or ∂C/∂v at the midpoint lattice by central differences with step
/// 1/n, clamped to [0, 1].
pub fn partial_derivative_field(c: &Copula, axis: Axis, n: usize) -> Result<GridField> {
    let h = 1.0 / n as f64;
    GridField::tabulate(n, |u, v| {
        finite_difference(c, axis, u, v, h).clamp(0.0, 1.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{
        make_clayton, make_m, make_mtheta, make_pi, transpose, ClaytonParams, MThetaParams,
    };

    fn mtheta(t: f64) -> Copula {
        make_mtheta(MThetaParams::new(t).unwrap())
    }

    fn asym(c: &Copula) -> impl Fn(f64, f64) -> f64 + Sync + '_ {
        move |u, v| c.value(u, v) - c.value(v, u)
    }

    #[test]
    fn config_validation() {
        assert!(QuadratureConfig::default().validate().is_ok());
        assert!(QuadratureConfig::with_n(1).validate().is_err());
        let cfg = QuadratureConfig {
            refine_levels: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = QuadratureConfig {
            tolerance: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn integrates_independence() {
        let pi = make_pi();
        let r = integrate(|u, v| pi.value(u, v), &QuadratureConfig::default()).unwrap();
        // The midpoint rule is exact for bilinear integrands.
        assert!((r.value - 0.25).abs() < 1e-14);
        assert!(r.converged);
        assert_eq!(r.estimates.len(), 3);
    }

    #[test]
    fn integrates_mtheta() {
        let c = mtheta(0.2);
        let r = integrate(|u, v| c.value(u, v), &QuadratureConfig::default()).unwrap();
        let exact = (2.0 - 0.6 + 0.12) / 6.0;
        assert!((r.value - exact).abs() < 1e-5, "{}", r.value);
    }

    #[test]
    fn reports_non_finite_node() {
        let cfg = QuadratureConfig::with_n(4);
        let err = integrate(|u, _| if u > 0.5 { f64::NAN } else { 0.0 }, &cfg).unwrap_err();
        match err {
            CopulaError::NonFiniteNode { u, v, .. } => {
                assert_eq!(u, 0.625);
                assert_eq!(v, 0.125);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unconverged_integral_is_flagged_not_dropped() {
        let cfg = QuadratureConfig {
            n: 4,
            refine_levels: 1,
            tolerance: 1e-12,
        };
        let r = integrate(|u, v| (u * 37.0).sin() * v, &cfg).unwrap();
        assert!(!r.converged);
        assert!(r.value.is_finite());
    }

    #[test]
    fn summation_is_partition_independent() {
        let c = make_clayton(ClaytonParams::new(1.5).unwrap());
        let f = |u: f64, v: f64| c.value(u, v);
        let a = midpoint_rule(&f, 300).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| midpoint_rule(&f, 300).unwrap());
        assert_eq!(a.to_bits(), b.to_bits());
        let field = GridField::tabulate(300, f).unwrap();
        assert_eq!(field.mean().to_bits(), a.to_bits());
    }

    #[test]
    fn sup_of_symmetric_difference_is_zero() {
        let pi = make_pi();
        let s = sup_abs(asym(&pi), &QuadratureConfig::default()).unwrap();
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn sup_recovers_theta() {
        for &t in &[0.2, 1.0 / 3.0] {
            let c = mtheta(t);
            let s = sup_abs(asym(&c), &QuadratureConfig::default()).unwrap();
            assert!((s.value - t).abs() <= 1e-3, "theta {t}: {s:?}");
            assert!(s.value >= s.grid_value);
            assert!(s.value <= 1.0 / 3.0 + 1e-9);
        }
    }

    #[test]
    fn limits() {
        let m = make_m();
        let r = diagonal_limit(|t| m.value(t, t) / t, LimitSide::ZeroPlus).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.converged);

        let c = mtheta(0.2);
        let r = diagonal_limit(|t| c.value(t, t) / t, LimitSide::ZeroPlus).unwrap();
        assert_eq!(r.value, 0.0);

        let cl = make_clayton(ClaytonParams::new(1.0).unwrap());
        let r = diagonal_limit(
            |t| (1.0 - 2.0 * t + cl.value(t, t)) / (1.0 - t),
            LimitSide::OneMinus,
        )
        .unwrap();
        assert!(r.value.abs() < 1e-4, "{r:?}");
        assert!(r.converged);

        let r = diagonal_limit(|_| 0.731, LimitSide::OneMinus).unwrap();
        assert_eq!(r.value, 0.731);
        assert_eq!(r.stability_gap, 0.0);
    }

    #[test]
    fn oscillating_limit_is_flagged() {
        let r = diagonal_limit(|t| (1.0 / t).log2().round() % 3.0, LimitSide::ZeroPlus).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn non_finite_limit_term_is_an_error() {
        assert!(diagonal_limit(|t| 1.0 / (t - 0.5f64.powi(10)), LimitSide::ZeroPlus).is_err());
    }

    #[test]
    fn partial_derivatives() {
        let pi = make_pi();
        let d = partial_derivative_field(&pi, Axis::First, 64).unwrap();
        for i in [0, 17, 63] {
            for j in [0, 5, 63] {
                assert!((d.get(i, j) - midpoint(64, j)).abs() < 1e-12);
            }
        }
        let m = make_m();
        assert_eq!(
            finite_difference(&m, Axis::First, 0.3, 0.7, 1.0 / 512.0),
            1.0
        );

        // ∂₁ of Clayton(1) is u⁻²(u⁻¹ + v⁻¹ − 1)⁻², i.e. 4/9 at the centre.
        let cl = make_clayton(ClaytonParams::new(1.0).unwrap());
        let n = 101;
        let d = partial_derivative_field(&cl, Axis::First, n).unwrap();
        assert!((d.get(50, 50) - 4.0 / 9.0).abs() < 1e-4);
        let analytic = |u: f64, v: f64| (u * u).recip() * (1.0 / u + 1.0 / v - 1.0).powi(-2);
        for &(i, j) in &[(10usize, 80usize), (70, 20), (95, 95)] {
            let (u, v) = (midpoint(n, i), midpoint(n, j));
            assert!((d.get(i, j) - analytic(u, v)).abs() < 1e-3);
        }
    }

    #[test]
    fn clamped_field_stays_in_unit_interval() {
        let c = transpose(&mtheta(0.3));
        for axis in [Axis::First, Axis::Second] {
            let d = partial_derivative_field(&c, axis, 97).unwrap();
            assert!(d.values().iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
}
