//! Bivariate copulas: the concrete families, structural operators and
//! axiom checks.
//!
//! A [`Copula`] is an immutable, cheaply clonable handle to a [`Family`]
//! expression tree. Evaluation is a pure recursive function of the tree, so a
//! copula can be shared freely between threads.

use std::fmt;
use std::sync::Arc;

use crate::error::{CopulaError, Result};

/// A point of the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitPoint {
    pub u: f64,
    pub v: f64,
}

impl UnitPoint {
    pub fn new(u: f64, v: f64) -> Result<Self> {
        for (name, x) in [("u", u), ("v", v)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(CopulaError::InvalidParameter {
                    name,
                    value: x,
                    reason: "coordinates must lie in [0, 1]",
                });
            }
        }
        Ok(Self { u, v })
    }

    /// The mirror image (v, u).
    pub fn swapped(self) -> Self {
        Self {
            u: self.v,
            v: self.u,
        }
    }
}

/// Parameter of the two-segment shuffle of Min, restricted to [0, 1/3].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MThetaParams {
    theta: f64,
}

/// A line segment of a singular copula's support, carrying uniform mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportSegment {
    pub start: (f64, f64),
    pub end: (f64, f64),
    pub mass: f64,
}

impl MThetaParams {
    pub const MAX_THETA: f64 = 1.0 / 3.0;

    pub fn new(theta: f64) -> Result<Self> {
        if !(0.0..=Self::MAX_THETA).contains(&theta) {
            return Err(CopulaError::InvalidParameter {
                name: "theta",
                value: theta,
                reason: "must lie in [0, 1/3]",
            });
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// The two support segments: the long one from (0, θ) to (1−θ, 1)
    /// carrying mass 1−θ, and the short one from (1−θ, 0) to (1, θ)
    /// carrying mass θ.
    pub fn segments(&self) -> [SupportSegment; 2] {
        let t = self.theta;
        [
            SupportSegment {
                start: (0.0, t),
                end: (1.0 - t, 1.0),
                mass: 1.0 - t,
            },
            SupportSegment {
                start: (1.0 - t, 0.0),
                end: (1.0, t),
                mass: t,
            },
        ]
    }
}

/// Parameter of the Clayton family, δ > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaytonParams {
    delta: f64,
}

impl ClaytonParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(CopulaError::InvalidParameter {
                name: "delta",
                value: delta,
                reason: "must be a finite positive number",
            });
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Copula tabulated on the knots (i/m, j/m), i, j = 0..=m, and interpolated
/// bilinearly in between.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCopula {
    m: usize,
    knots: Vec<f64>,
}

impl GridCopula {
    /// `knots` is row-major in the first argument: `knots[i * (m + 1) + j]`
    /// holds C(i/m, j/m).
    pub fn from_knots(m: usize, knots: Vec<f64>) -> Result<Self> {
        if m < 1 {
            return Err(CopulaError::InvalidConfig(
                "grid copula needs at least one cell per axis".into(),
            ));
        }
        if knots.len() != (m + 1) * (m + 1) {
            return Err(CopulaError::InvalidConfig(format!(
                "expected {} knot values for m = {m}, got {}",
                (m + 1) * (m + 1),
                knots.len()
            )));
        }
        if let Some(pos) = knots.iter().position(|x| !x.is_finite()) {
            let (i, j) = (pos / (m + 1), pos % (m + 1));
            return Err(CopulaError::NonFiniteNode {
                u: i as f64 / m as f64,
                v: j as f64 / m as f64,
                value: knots[pos],
            });
        }
        Ok(Self { m, knots })
    }

    pub fn resolution(&self) -> usize {
        self.m
    }

    pub fn knot(&self, i: usize, j: usize) -> f64 {
        self.knots[i * (self.m + 1) + j]
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let scaled = x.clamp(0.0, 1.0) * self.m as f64;
        let cell = (scaled.floor() as usize).min(self.m - 1);
        (cell, scaled - cell as f64)
    }

    pub fn value(&self, u: f64, v: f64) -> f64 {
        let (i, a) = self.locate(u);
        let (j, b) = self.locate(v);
        let c00 = self.knot(i, j);
        let c01 = self.knot(i, j + 1);
        let c10 = self.knot(i + 1, j);
        let c11 = self.knot(i + 1, j + 1);
        (1.0 - a) * ((1.0 - b) * c00 + b * c01) + a * ((1.0 - b) * c10 + b * c11)
    }
}

/// The expression tree behind a [`Copula`].
#[derive(Debug, Clone)]
pub enum Family {
    Pi,
    M,
    W,
    MTheta(MThetaParams),
    Clayton(ClaytonParams),
    Transpose(Copula),
    Symmetrized(Copula),
    Mixture {
        lambda: f64,
        left: Copula,
        right: Copula,
    },
    GridBacked(GridCopula),
}

/// Known analytic values of the functionals, used in place of numerics when
/// present.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClosedForms {
    pub tau: Option<f64>,
    pub rho: Option<f64>,
    pub beta: Option<f64>,
    pub sigma: Option<f64>,
    /// μ_∞, the sup-distance between C and its transpose.
    pub mu_sup: Option<f64>,
    /// Every μ_p vanishes (the copula is declared symmetric).
    pub mu_vanishes: bool,
    pub lambda_lower: Option<f64>,
    pub lambda_upper: Option<f64>,
}

fn lerp(lambda: f64, a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(lambda * a? + (1.0 - lambda) * b?)
}

#[derive(Debug, Clone)]
pub struct Copula(Arc<Family>);

impl Copula {
    fn from_family(family: Family) -> Self {
        Self(Arc::new(family))
    }

    pub fn family(&self) -> &Family {
        &self.0
    }

    /// Evaluates C(u, v). Both arguments must lie in [0, 1].
    pub fn value(&self, u: f64, v: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v));
        match self.family() {
            Family::Pi => u * v,
            Family::M => u.min(v),
            Family::W => (u + v - 1.0).max(0.0),
            Family::MTheta(p) => {
                let t = p.theta;
                let shuffled = (u - 1.0 + t).max(0.0) + (v - t).max(0.0);
                u.min(v).min(shuffled)
            }
            Family::Clayton(p) => {
                if u <= 0.0 || v <= 0.0 {
                    return 0.0;
                }
                let d = p.delta;
                ((u.powf(-d) - 1.0) + v.powf(-d)).powf(-1.0 / d)
            }
            Family::Transpose(inner) => inner.value(v, u),
            Family::Symmetrized(inner) => 0.5 * (inner.value(u, v) + inner.value(v, u)),
            Family::Mixture {
                lambda,
                left,
                right,
            } => lambda * left.value(u, v) + (1.0 - lambda) * right.value(u, v),
            Family::GridBacked(g) => g.value(u, v),
        }
    }

    pub fn evaluate(&self, p: UnitPoint) -> f64 {
        self.value(p.u, p.v)
    }

    pub fn is_symmetric(&self) -> bool {
        match self.family() {
            Family::Pi | Family::M | Family::W | Family::Clayton(_) | Family::Symmetrized(_) => {
                true
            }
            Family::MTheta(p) => p.theta == 0.0,
            Family::Transpose(inner) => inner.is_symmetric(),
            Family::Mixture { left, right, .. } => left.is_symmetric() && right.is_symmetric(),
            Family::GridBacked(_) => false,
        }
    }

    pub fn is_absolutely_continuous(&self) -> bool {
        match self.family() {
            Family::Pi | Family::Clayton(_) | Family::GridBacked(_) => true,
            Family::M | Family::W | Family::MTheta(_) => false,
            Family::Transpose(inner) | Family::Symmetrized(inner) => {
                inner.is_absolutely_continuous()
            }
            Family::Mixture {
                lambda,
                left,
                right,
            } => {
                (*lambda == 0.0 || left.is_absolutely_continuous())
                    && (*lambda == 1.0 || right.is_absolutely_continuous())
            }
        }
    }

    pub fn has_sampler(&self) -> bool {
        match self.family() {
            Family::GridBacked(_) => false,
            Family::Transpose(inner) | Family::Symmetrized(inner) => inner.has_sampler(),
            Family::Mixture { left, right, .. } => left.has_sampler() && right.has_sampler(),
            _ => true,
        }
    }

    pub fn closed_forms(&self) -> ClosedForms {
        match self.family() {
            Family::Pi => ClosedForms {
                tau: Some(0.0),
                rho: Some(0.0),
                beta: Some(0.0),
                sigma: Some(0.0),
                mu_sup: Some(0.0),
                mu_vanishes: true,
                lambda_lower: Some(0.0),
                lambda_upper: Some(0.0),
            },
            Family::M => ClosedForms {
                tau: Some(1.0),
                rho: Some(1.0),
                beta: Some(1.0),
                sigma: Some(1.0),
                mu_sup: Some(0.0),
                mu_vanishes: true,
                lambda_lower: Some(1.0),
                lambda_upper: Some(1.0),
            },
            Family::W => ClosedForms {
                tau: Some(-1.0),
                rho: Some(-1.0),
                beta: Some(-1.0),
                sigma: Some(1.0),
                mu_sup: Some(0.0),
                mu_vanishes: true,
                lambda_lower: Some(0.0),
                lambda_upper: Some(0.0),
            },
            Family::MTheta(p) => {
                let t = p.theta;
                let comonotone = t == 0.0;
                let tail = if comonotone { 1.0 } else { 0.0 };
                ClosedForms {
                    tau: Some((1.0 - 2.0 * t).powi(2)),
                    rho: Some(1.0 - 6.0 * t + 6.0 * t * t),
                    beta: Some(1.0 - 4.0 * t),
                    sigma: comonotone.then_some(1.0),
                    mu_sup: Some(t),
                    mu_vanishes: comonotone,
                    lambda_lower: Some(tail),
                    lambda_upper: Some(tail),
                }
            }
            Family::Clayton(p) => ClosedForms {
                mu_sup: Some(0.0),
                mu_vanishes: true,
                lambda_lower: Some(2f64.powf(-1.0 / p.delta)),
                lambda_upper: Some(0.0),
                ..ClosedForms::default()
            },
            // The diagonal and every concordance functional are unchanged by
            // transposition, and |Cᵗ − C| = |C − Cᵗ|.
            Family::Transpose(inner) => inner.closed_forms(),
            Family::Symmetrized(inner) => {
                let cf = inner.closed_forms();
                ClosedForms {
                    rho: cf.rho,
                    beta: cf.beta,
                    mu_sup: Some(0.0),
                    mu_vanishes: true,
                    lambda_lower: cf.lambda_lower,
                    lambda_upper: cf.lambda_upper,
                    ..ClosedForms::default()
                }
            }
            Family::Mixture {
                lambda,
                left,
                right,
            } => {
                let (l, r) = (left.closed_forms(), right.closed_forms());
                let symmetric = l.mu_vanishes && r.mu_vanishes;
                ClosedForms {
                    rho: lerp(*lambda, l.rho, r.rho),
                    beta: lerp(*lambda, l.beta, r.beta),
                    mu_sup: symmetric.then_some(0.0),
                    mu_vanishes: symmetric,
                    lambda_lower: lerp(*lambda, l.lambda_lower, r.lambda_lower),
                    lambda_upper: lerp(*lambda, l.lambda_upper, r.lambda_upper),
                    ..ClosedForms::default()
                }
            }
            Family::GridBacked(_) => ClosedForms::default(),
        }
    }

    /// Nesting depth of the expression tree; leaves have depth 0.
    pub fn depth(&self) -> usize {
        match self.family() {
            Family::Transpose(inner) | Family::Symmetrized(inner) => 1 + inner.depth(),
            Family::Mixture { left, right, .. } => 1 + left.depth().max(right.depth()),
            _ => 0,
        }
    }
}

impl fmt::Display for Copula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family() {
            Family::Pi => write!(f, "pi"),
            Family::M => write!(f, "m"),
            Family::W => write!(f, "w"),
            Family::MTheta(p) => write!(f, "mtheta:{}", p.theta),
            Family::Clayton(p) => write!(f, "clayton:{}", p.delta),
            Family::Transpose(inner) => write!(f, "t({inner})"),
            Family::Symmetrized(inner) => write!(f, "sym({inner})"),
            Family::Mixture {
                lambda,
                left,
                right,
            } => write!(f, "mix({lambda},{left},{right})"),
            Family::GridBacked(g) => write!(f, "grid({})", g.m),
        }
    }
}

/// Independence copula Π(u, v) = uv.
pub fn make_pi() -> Copula {
    Copula::from_family(Family::Pi)
}

/// Upper Fréchet–Hoeffding bound M(u, v) = min(u, v).
pub fn make_m() -> Copula {
    Copula::from_family(Family::M)
}

/// Lower Fréchet–Hoeffding bound W(u, v) = max(u + v − 1, 0).
pub fn make_w() -> Copula {
    Copula::from_family(Family::W)
}

/// The shuffle of Min M_θ(u, v) = min{u, v, (u − 1 + θ)⁺ + (v − θ)⁺}.
pub fn make_mtheta(params: MThetaParams) -> Copula {
    Copula::from_family(Family::MTheta(params))
}

pub fn make_clayton(params: ClaytonParams) -> Copula {
    Copula::from_family(Family::Clayton(params))
}

pub fn make_grid(grid: GridCopula) -> Copula {
    Copula::from_family(Family::GridBacked(grid))
}

/// Cᵗ(u, v) = C(v, u). Transposing a transpose unwraps it.
pub fn transpose(c: &Copula) -> Copula {
    match c.family() {
        Family::Transpose(inner) => inner.clone(),
        _ => Copula::from_family(Family::Transpose(c.clone())),
    }
}

/// (C + Cᵗ)/2. Idempotent: symmetrizing a symmetrization returns it as is.
pub fn symmetrize(c: &Copula) -> Copula {
    match c.family() {
        Family::Symmetrized(_) => c.clone(),
        _ => Copula::from_family(Family::Symmetrized(c.clone())),
    }
}

/// Pointwise convex combination λ·left + (1 − λ)·right.
pub fn mixture(lambda: f64, left: &Copula, right: &Copula) -> Result<Copula> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(CopulaError::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "mixture weight must lie in [0, 1]",
        });
    }
    Ok(Copula::from_family(Family::Mixture {
        lambda,
        left: left.clone(),
        right: right.clone(),
    }))
}

/// Worst-case deviations from the copula axioms observed on the knots
/// (i/n, j/n), i, j = 0..=n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxiomReport {
    /// max |C(t,0)|, |C(0,t)|, |C(t,1) − t|, |C(1,t) − t|
    pub boundary_error: f64,
    /// Smallest rectangle volume over adjacent knot cells.
    pub min_volume: f64,
    /// Largest violation of W ≤ C ≤ M.
    pub envelope_violation: f64,
}

impl AxiomReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.boundary_error <= tol && self.min_volume >= -tol && self.envelope_violation <= tol
    }
}

/// Checks boundary conditions, 2-increasingness on adjacent cells and the
/// Fréchet–Hoeffding envelope. Non-negative volumes of adjacent cells imply
/// non-negative volumes of every grid rectangle, since those are sums.
pub fn check_axioms(c: &Copula, n: usize) -> AxiomReport {
    let n = n.max(1);
    let nf = n as f64;
    let values: Vec<f64> = (0..=n)
        .flat_map(|i| (0..=n).map(move |j| (i, j)))
        .map(|(i, j)| c.value(i as f64 / nf, j as f64 / nf))
        .collect();
    let at = |i: usize, j: usize| values[i * (n + 1) + j];

    let mut boundary_error = 0f64;
    for k in 0..=n {
        let t = k as f64 / nf;
        boundary_error = boundary_error
            .max(at(k, 0).abs())
            .max(at(0, k).abs())
            .max((at(k, n) - t).abs())
            .max((at(n, k) - t).abs());
    }

    let mut min_volume = f64::INFINITY;
    let mut envelope_violation = 0f64;
    for i in 0..=n {
        for j in 0..=n {
            let (u, v) = (i as f64 / nf, j as f64 / nf);
            let x = at(i, j);
            envelope_violation = envelope_violation
                .max((u + v - 1.0).max(0.0) - x)
                .max(x - u.min(v));
            if i < n && j < n {
                let vol = at(i + 1, j + 1) - at(i + 1, j) - at(i, j + 1) + at(i, j);
                min_volume = min_volume.min(vol);
            }
        }
    }

    AxiomReport {
        boundary_error,
        min_volume,
        envelope_violation,
    }
}
