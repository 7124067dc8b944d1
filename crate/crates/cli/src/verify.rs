//! Mechanical checks of the structural identities over seeded copulas.
//!
//! Every check is `value <= limit` or `value >= limit`; its margin is the
//! signed distance to the limit, positive when the check passes.

use std::fmt::Write as _;

use clap::ValueEnum;
use copula_core::measures::{
    kendall_tau_on_support, mu_numeric, schweizer_wolff_sigma_numeric, spearman_rho_numeric,
    tail_coefficients_numeric,
};
use copula_core::pool::random_pool;
use copula_core::sampling::seeded_rng;
use copula_core::{
    blomqvist_beta, make_clayton, make_m, make_mtheta, make_pi, make_w, mixture, symmetrize,
    transpose, ClaytonParams, CopulaError, MThetaParams, PExponent, QuadratureConfig, RngSeed,
};
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use crate::output::{envelope, num, render_json, Table};
use crate::{Globals, Outcome};

const DEFAULT_SEED: RngSeed = RngSeed(20_240_601);

/// The verification pass is calibrated to one refinement level.
const REFINE_LEVELS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Prop {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    #[value(name = "4")]
    Four,
    #[value(name = "corollary")]
    Corollary,
}

impl Prop {
    fn name(self) -> &'static str {
        match self {
            Self::One => "1",
            Self::Two => "2",
            Self::Three => "3",
            Self::Four => "4",
            Self::Corollary => "corollary",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Self::One => "symmetrization removes all asymmetry and preserves rho",
            Self::Two => "sigma(C) >= 6 mu_1(C)",
            Self::Three => "closed forms of M_theta: tau, rho, beta, mu_inf and tail coefficients",
            Self::Four => "beta is unchanged by symmetrization",
            Self::Corollary => {
                "any beta_0 is attained by symmetric copulas and by maximally asymmetric M_theta*"
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, Serialize)]
struct CheckResult {
    name: String,
    value: f64,
    bound: Bound,
    limit: f64,
    margin: f64,
    pass: bool,
}

#[derive(Debug, Clone, Serialize)]
struct Trial {
    trial: usize,
    subject: String,
    checks: Vec<CheckResult>,
}

impl Trial {
    fn new(trial: usize, subject: impl ToString) -> Self {
        Self {
            trial,
            subject: subject.to_string(),
            checks: Vec::new(),
        }
    }

    fn push(&mut self, name: impl Into<String>, value: f64, bound: Bound, limit: f64) {
        let margin = match bound {
            Bound::AtMost => limit - value,
            Bound::AtLeast => value - limit,
        };
        self.checks.push(CheckResult {
            name: name.into(),
            value,
            bound,
            limit,
            // NaN never passes.
            pass: margin >= 0.0,
            margin,
        });
    }

    fn at_most(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.push(name, value, Bound::AtMost, limit);
    }

    fn at_least(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.push(name, value, Bound::AtLeast, limit);
    }

    fn min_margin(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.margin)
            .fold(f64::INFINITY, f64::min)
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

struct Context {
    cfg: QuadratureConfig,
    p_list: Vec<PExponent>,
    trials: usize,
    seed: RngSeed,
}

type Checks = Result<(Vec<Trial>, Vec<(String, f64)>), CopulaError>;

fn pool_description(ctx: &Context) -> String {
    format!(
        "{} random copulas lambda*A + (1-lambda)*B from seed {}; lambda ~ U[0,1], theta ~ U[0,1/3], delta ~ U[0.5,5], atoms from M_theta, Clayton, Pi, M, W, each transposed with probability 1/2",
        ctx.trials, ctx.seed.0
    )
}

fn policy(prop: Prop, ctx: &Context) -> Vec<String> {
    let ps = ctx
        .p_list
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ");
    match prop {
        Prop::One => vec![
            format!("mu_p(sym(C)) <= 1e-12 for p in {{{ps}}}: exact cancellation on the grid"),
            "|rho(sym(C)) - rho(C)| <= 2e-4 on a shared midpoint grid".into(),
        ],
        Prop::Two => vec![
            "sigma(C) - 6 mu_1(C) >= -5e-3 (quadrature slack)".into(),
            "sigma(C) - 6 mu_1(C) > 0.01 whenever mu_1(C) > 0.01 (strict gap)".into(),
        ],
        Prop::Three => vec![
            "fixed grid theta in {0, 0.05, ..., 0.3, 1/3}, then random theta ~ U[0,1/3]".into(),
            "|tau - (1-2 theta)^2| <= 1e-3, tau by quadrature along the support".into(),
            "|rho - (1 - 6 theta + 6 theta^2)| <= 1e-3, rho by grid quadrature".into(),
            "|beta - (1 - 4 theta)| <= 1e-12, beta from one evaluation".into(),
            "|mu_inf - theta| <= 2e-3, sup search with refinement".into(),
            "grid only: lambda_L, lambda_U <= 5e-3 for theta > 0 and >= 0.995 at theta = 0".into(),
            "Clayton delta in {0.5, 1, 2}: |lambda_L - 2^(-1/delta)| <= 5e-3".into(),
        ],
        Prop::Four => vec![
            "|beta(sym(C)) - beta(C)| <= 1e-15".into(),
            "|beta(t(C)) - beta(C)| <= 1e-15".into(),
        ],
        Prop::Corollary => vec![
            "fixed beta_0 in {-0.3, 0, 0.5, 0.9} and alpha in {0, 0.25, 0.5, 1}, then random beta_0 ~ U(-1/3,1), alpha ~ U[0,1]".into(),
            "C_s = beta_0 M + (1-beta_0) Pi, or |beta_0| W + (1-|beta_0|) Pi for beta_0 < 0: |beta(C_s) - beta_0| <= 1e-12".into(),
            format!("mu_p(C_s) <= 1e-12 for p in {{{ps}}}"),
            "theta* = (1-beta_0)/4: |beta(M_theta*) - beta_0| <= 1e-15 and |mu_inf(M_theta*) - theta*| <= 2e-3".into(),
            "C_alpha = alpha M_theta* + (1-alpha) t(M_theta*): |beta(C_alpha) - beta_0| <= 1e-12".into(),
            format!("|mu_p(C_alpha) - |2 alpha - 1| mu_p(M_theta*)| <= 2e-3 for p in {{{ps}}}"),
        ],
    }
}

fn check_one(ctx: &Context) -> Checks {
    let mut out = Vec::new();
    for (i, c) in random_pool(ctx.trials, ctx.seed).iter().enumerate() {
        let s = symmetrize(c);
        let mut t = Trial::new(i, c);
        for &p in &ctx.p_list {
            t.at_most(
                format!("mu_{p}(S)"),
                mu_numeric(&s, p, &ctx.cfg)?.raw,
                1e-12,
            );
        }
        let rc = spearman_rho_numeric(c, &ctx.cfg)?.value;
        let rs = spearman_rho_numeric(&s, &ctx.cfg)?.value;
        t.at_most("|rho(S) - rho(C)|", (rc - rs).abs(), 2e-4);
        out.push(t);
    }
    Ok((out, Vec::new()))
}

fn check_two(ctx: &Context) -> Checks {
    let mut out = Vec::new();
    let mut min_slack = f64::INFINITY;
    for (i, c) in random_pool(ctx.trials, ctx.seed).iter().enumerate() {
        let sigma = schweizer_wolff_sigma_numeric(c, &ctx.cfg)?.value;
        let mu1 = mu_numeric(c, PExponent::Finite(1.0), &ctx.cfg)?.raw;
        let slack = sigma - 6.0 * mu1;
        min_slack = min_slack.min(slack);
        let mut t = Trial::new(i, c);
        t.at_least("sigma - 6 mu_1", slack, -5e-3);
        if mu1 > 0.01 {
            t.at_least("strict gap (mu_1 > 0.01)", slack, 0.01);
        }
        out.push(t);
    }
    Ok((out, vec![("min_slack".into(), min_slack)]))
}

fn mtheta_trial(
    index: usize,
    theta: f64,
    with_tails: bool,
    cfg: &QuadratureConfig,
) -> Result<Trial, CopulaError> {
    let params = MThetaParams::new(theta)?;
    let c = make_mtheta(params);
    let mut t = Trial::new(index, &c);
    let tau = kendall_tau_on_support(&c, &params.segments(), cfg)?.value;
    t.at_most(
        "|tau - (1-2theta)^2|",
        (tau - (1.0 - 2.0 * theta).powi(2)).abs(),
        1e-3,
    );
    let rho = spearman_rho_numeric(&c, cfg)?.value;
    t.at_most(
        "|rho - (1-6theta+6theta^2)|",
        (rho - (1.0 - 6.0 * theta + 6.0 * theta * theta)).abs(),
        1e-3,
    );
    let beta = blomqvist_beta(&c);
    t.at_most(
        "|beta - (1-4theta)|",
        (beta - (1.0 - 4.0 * theta)).abs(),
        1e-12,
    );
    let sup = mu_numeric(&c, PExponent::Infinity, cfg)?.raw;
    t.at_most("|mu_inf - theta|", (sup - theta).abs(), 2e-3);
    if with_tails {
        let tails = tail_coefficients_numeric(&c)?;
        if theta == 0.0 {
            t.at_least("lambda_L", tails.lower.value, 0.995);
            t.at_least("lambda_U", tails.upper.value, 0.995);
        } else {
            t.at_most("lambda_L", tails.lower.value, 5e-3);
            t.at_most("lambda_U", tails.upper.value, 5e-3);
        }
    }
    Ok(t)
}

fn check_three(ctx: &Context) -> Checks {
    let mut out = Vec::new();
    let grid = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 1.0 / 3.0];
    for &theta in &grid {
        out.push(mtheta_trial(out.len(), theta, true, &ctx.cfg)?);
    }
    for delta in [0.5, 1.0, 2.0] {
        let c = make_clayton(ClaytonParams::new(delta)?);
        let mut t = Trial::new(out.len(), &c);
        let lower = tail_coefficients_numeric(&c)?.lower.value;
        t.at_most(
            "|lambda_L - 2^(-1/delta)|",
            (lower - 2f64.powf(-1.0 / delta)).abs(),
            5e-3,
        );
        out.push(t);
    }
    let mut rng = seeded_rng(ctx.seed);
    for _ in 0..ctx.trials {
        let theta = rng.gen_range(0.0..=MThetaParams::MAX_THETA);
        out.push(mtheta_trial(out.len(), theta, false, &ctx.cfg)?);
    }
    Ok((out, Vec::new()))
}

fn check_four(ctx: &Context) -> Checks {
    let mut out = Vec::new();
    for (i, c) in random_pool(ctx.trials, ctx.seed).iter().enumerate() {
        let b = blomqvist_beta(c);
        let mut t = Trial::new(i, c);
        t.at_most(
            "|beta(S) - beta(C)|",
            (blomqvist_beta(&symmetrize(c)) - b).abs(),
            1e-15,
        );
        t.at_most(
            "|beta(t(C)) - beta(C)|",
            (blomqvist_beta(&transpose(c)) - b).abs(),
            1e-15,
        );
        out.push(t);
    }
    Ok((out, Vec::new()))
}

fn corollary_trial(
    index: usize,
    beta0: f64,
    alphas: &[f64],
    ctx: &Context,
) -> Result<Trial, CopulaError> {
    let mut t = Trial::new(index, format!("beta_0 = {beta0}"));
    let cs = if beta0 >= 0.0 {
        mixture(beta0, &make_m(), &make_pi())?
    } else {
        mixture(beta0.abs(), &make_w(), &make_pi())?
    };
    t.at_most(
        "|beta(C_s) - beta_0|",
        (blomqvist_beta(&cs) - beta0).abs(),
        1e-12,
    );
    for &p in &ctx.p_list {
        t.at_most(
            format!("mu_{p}(C_s)"),
            mu_numeric(&cs, p, &ctx.cfg)?.raw,
            1e-12,
        );
    }

    let theta = (1.0 - beta0) / 4.0;
    let mt = make_mtheta(MThetaParams::new(theta)?);
    t.at_most(
        "|beta(M_theta*) - beta_0|",
        (blomqvist_beta(&mt) - beta0).abs(),
        1e-15,
    );
    let base = ctx
        .p_list
        .iter()
        .map(|&p| Ok(mu_numeric(&mt, p, &ctx.cfg)?.raw))
        .collect::<Result<Vec<f64>, CopulaError>>()?;
    let sup = mu_numeric(&mt, PExponent::Infinity, &ctx.cfg)?.raw;
    t.at_most("|mu_inf(M_theta*) - theta*|", (sup - theta).abs(), 2e-3);

    let mtt = transpose(&mt);
    for &alpha in alphas {
        let ca = mixture(alpha, &mt, &mtt)?;
        t.at_most(
            format!("|beta(C_{alpha}) - beta_0|"),
            (blomqvist_beta(&ca) - beta0).abs(),
            1e-12,
        );
        for (k, &p) in ctx.p_list.iter().enumerate() {
            let m = mu_numeric(&ca, p, &ctx.cfg)?.raw;
            let expected = (2.0 * alpha - 1.0).abs() * base[k];
            t.at_most(
                format!("mu_{p}(C_{alpha}) identity"),
                (m - expected).abs(),
                2e-3,
            );
        }
    }
    Ok(t)
}

fn check_corollary(ctx: &Context) -> Checks {
    let mut out = Vec::new();
    for beta0 in [-0.3, 0.0, 0.5, 0.9] {
        out.push(corollary_trial(
            out.len(),
            beta0,
            &[0.0, 0.25, 0.5, 1.0],
            ctx,
        )?);
    }
    let mut rng = seeded_rng(ctx.seed);
    for _ in 0..ctx.trials {
        // θ* = (1 − β₀)/4 must stay within [0, 1/3].
        let beta0 = rng.gen_range(-1.0 / 3.0..1.0);
        let alpha = rng.gen_range(0.0..=1.0);
        out.push(corollary_trial(out.len(), beta0, &[alpha], ctx)?);
    }
    Ok((out, Vec::new()))
}

pub fn run(g: &Globals, prop: Prop, trials: usize) -> Result<Outcome, String> {
    if trials == 0 {
        return Err("--trials must be at least 1".into());
    }
    let ctx = Context {
        cfg: g.quadrature(REFINE_LEVELS)?,
        p_list: g.p_list_or(&[
            PExponent::Finite(1.0),
            PExponent::Finite(2.0),
            PExponent::Infinity,
        ]),
        trials,
        seed: g.seed_or(DEFAULT_SEED),
    };
    let (results, summary) = match prop {
        Prop::One => check_one(&ctx),
        Prop::Two => check_two(&ctx),
        Prop::Three => check_three(&ctx),
        Prop::Four => check_four(&ctx),
        Prop::Corollary => check_corollary(&ctx),
    }
    .map_err(|e| e.to_string())?;

    let failures: Vec<(&Trial, &CheckResult)> = results
        .iter()
        .flat_map(|t| t.checks.iter().filter(|c| !c.pass).map(move |c| (t, c)))
        .collect();
    let passed = failures.is_empty();
    let total_checks: usize = results.iter().map(|t| t.checks.len()).sum();
    let policy = policy(prop, &ctx);
    let pool = matches!(prop, Prop::One | Prop::Two | Prop::Four).then(|| pool_description(&ctx));

    let stdout = if g.json {
        let summary: serde_json::Map<String, serde_json::Value> =
            summary.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let payload = json!({
            "prop": prop.name(),
            "title": prop.title(),
            "trials": trials,
            "seed": ctx.seed.0,
            "quadrature": { "n": ctx.cfg.n, "refine_levels": ctx.cfg.refine_levels, "tolerance": ctx.cfg.tolerance },
            "pool": pool,
            "policy": policy,
            "results": results,
            "summary": summary,
            "checks": total_checks,
            "failures": failures.iter().map(|(t, c)| json!({
                "trial": t.trial, "subject": t.subject, "check": c.name, "value": c.value, "margin": c.margin,
            })).collect::<Vec<_>>(),
            "passed": passed,
        });
        render_json(&envelope("verify", g.timestamp, payload))
    } else {
        let mut out = String::new();
        let _ = writeln!(out, "verify {}: {}", prop.name(), prop.title());
        let _ = writeln!(
            out,
            "quadrature  n = {}, refine_levels = {}",
            ctx.cfg.n, ctx.cfg.refine_levels
        );
        if let Some(pool) = &pool {
            let _ = writeln!(out, "pool        {pool}");
        } else {
            let _ = writeln!(
                out,
                "trials      {trials} random cases from seed {}",
                ctx.seed.0
            );
        }
        if let Some(t) = g.timestamp {
            let _ = writeln!(out, "timestamp   {t}");
        }
        out.push_str("tolerance policy:\n");
        for line in &policy {
            let _ = writeln!(out, "  - {line}");
        }
        out.push('\n');
        let mut table = Table::new(["trial", "subject", "checks", "min margin", "status"]);
        for t in &results {
            table.row([
                t.trial.to_string(),
                t.subject.clone(),
                t.checks.len().to_string(),
                num(t.min_margin()),
                if t.passed() { "pass" } else { "FAIL" }.to_string(),
            ]);
        }
        out.push_str(&table.render());
        for (k, v) in &summary {
            let _ = writeln!(out, "\n{}: {}", k.replace('_', " "), num(*v));
        }
        if passed {
            let _ = writeln!(out, "\nall {total_checks} checks passed");
        } else {
            let _ = writeln!(out, "\n{} of {total_checks} checks FAILED:", failures.len());
            for (t, c) in &failures {
                let _ = writeln!(
                    out,
                    "  trial {} {}: {} = {} (limit {}, margin {})",
                    t.trial,
                    t.subject,
                    c.name,
                    num(c.value),
                    num(c.limit),
                    num(c.margin)
                );
            }
        }
        out
    };
    Ok(Outcome {
        stdout,
        verified: passed,
    })
}
