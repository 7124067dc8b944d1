//! Copula family specifications.
//!
//! The compact grammar matches how copulas print themselves, so any copula
//! named in a report can be pasted back into `--family`:
//!
//! ```text
//! spec := "pi" | "m" | "w"
//!       | "mtheta:" num | "clayton:" num
//!       | "t(" spec ")" | "sym(" spec ")"
//!       | "mix(" num "," spec "," spec ")"
//! ```
//!
//! Parenthesised forms also take `key=value` arguments, e.g.
//! `mtheta(theta=0.2)` or `mix(lambda=0.5, left=pi, right=mtheta:0.3)`.

use std::fmt;

use clap::Args;
use copula_core::{
    make_clayton, make_m, make_mtheta, make_pi, make_w, mixture, symmetrize, transpose,
    ClaytonParams, Copula, MThetaParams,
};

pub const MAX_MIX_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum FamilySpec {
    Pi,
    M,
    W,
    MTheta(f64),
    Clayton(f64),
    Transpose(Box<FamilySpec>),
    Symmetrized(Box<FamilySpec>),
    Mix {
        lambda: f64,
        left: Box<FamilySpec>,
        right: Box<FamilySpec>,
    },
}

impl FamilySpec {
    /// Parses a compact spec and checks the nesting limit.
    pub fn parse(input: &str) -> Result<Self, String> {
        let mut p = Parser { src: input, pos: 0 };
        let spec = p.spec()?;
        p.skip_ws();
        if p.pos != input.len() {
            return Err(p.error("unexpected trailing input"));
        }
        spec.check_depth()?;
        Ok(spec)
    }

    /// Number of nested `mix` levels; a bare family has depth 0.
    pub fn mix_depth(&self) -> usize {
        match self {
            Self::Pi | Self::M | Self::W | Self::MTheta(_) | Self::Clayton(_) => 0,
            Self::Transpose(inner) | Self::Symmetrized(inner) => inner.mix_depth(),
            Self::Mix { left, right, .. } => 1 + left.mix_depth().max(right.mix_depth()),
        }
    }

    fn check_depth(&self) -> Result<(), String> {
        let depth = self.mix_depth();
        if depth > MAX_MIX_DEPTH {
            return Err(format!(
                "mix nesting depth {depth} exceeds the limit of {MAX_MIX_DEPTH}"
            ));
        }
        Ok(())
    }

    /// Builds the copula; parameter ranges are enforced by the core
    /// constructors.
    pub fn build(&self) -> Result<Copula, String> {
        let err = |e: copula_core::CopulaError| e.to_string();
        Ok(match self {
            Self::Pi => make_pi(),
            Self::M => make_m(),
            Self::W => make_w(),
            Self::MTheta(t) => make_mtheta(MThetaParams::new(*t).map_err(err)?),
            Self::Clayton(d) => make_clayton(ClaytonParams::new(*d).map_err(err)?),
            Self::Transpose(inner) => transpose(&inner.build()?),
            Self::Symmetrized(inner) => symmetrize(&inner.build()?),
            Self::Mix {
                lambda,
                left,
                right,
            } => mixture(*lambda, &left.build()?, &right.build()?).map_err(err)?,
        })
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Pi => f.write_str("pi"),
            Self::M => f.write_str("m"),
            Self::W => f.write_str("w"),
            Self::MTheta(t) => write!(f, "mtheta:{t}"),
            Self::Clayton(d) => write!(f, "clayton:{d}"),
            Self::Transpose(inner) => write!(f, "t({inner})"),
            Self::Symmetrized(inner) => write!(f, "sym({inner})"),
            Self::Mix {
                lambda,
                left,
                right,
            } => write!(f, "mix({lambda},{left},{right})"),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Slot {
    Number,
    Spec,
}

enum Value {
    Number(f64),
    Spec(FamilySpec),
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> String {
        format!(
            "bad family spec {:?} at offset {}: {msg}",
            self.src, self.pos
        )
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), String> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> &str {
        self.skip_ws();
        let start = self.pos;
        let len = self.src[start..]
            .find(|c: char| !f(c))
            .unwrap_or(self.src.len() - start);
        self.pos += len;
        &self.src[start..start + len]
    }

    fn ident(&mut self) -> String {
        self.take_while(|c| c.is_ascii_alphabetic() || c == '_')
            .to_ascii_lowercase()
    }

    fn number(&mut self) -> Result<f64, String> {
        let text = self.take_while(|c| c.is_ascii_digit() || "+-.eE".contains(c));
        let text = text.to_string();
        match text.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(self.error(&format!("expected a number, found {text:?}"))),
        }
    }

    fn spec(&mut self) -> Result<FamilySpec, String> {
        let name = self.ident();
        match name.as_str() {
            "pi" => Ok(FamilySpec::Pi),
            "m" => Ok(FamilySpec::M),
            "w" => Ok(FamilySpec::W),
            "mtheta" | "clayton" => {
                let key = if name == "mtheta" { "theta" } else { "delta" };
                let x = if self.eat(':') {
                    self.number()?
                } else if self.eat('(') {
                    let vals = self.args(&[(key, Slot::Number)])?;
                    self.expect(')')?;
                    number_of(&vals[0])
                } else {
                    return Err(self.error(&format!("{name} needs a parameter, e.g. {name}:0.2")));
                };
                Ok(if name == "mtheta" {
                    FamilySpec::MTheta(x)
                } else {
                    FamilySpec::Clayton(x)
                })
            }
            "t" | "sym" => {
                self.expect('(')?;
                let inner = Box::new(self.spec()?);
                self.expect(')')?;
                Ok(if name == "t" {
                    FamilySpec::Transpose(inner)
                } else {
                    FamilySpec::Symmetrized(inner)
                })
            }
            "mix" => {
                self.expect('(')?;
                let mut vals = self.args(&[
                    ("lambda", Slot::Number),
                    ("left", Slot::Spec),
                    ("right", Slot::Spec),
                ])?;
                self.expect(')')?;
                let right = spec_of(vals.pop().unwrap());
                let left = spec_of(vals.pop().unwrap());
                Ok(FamilySpec::Mix {
                    lambda: number_of(&vals[0]),
                    left: Box::new(left),
                    right: Box::new(right),
                })
            }
            "" => Err(self.error("expected a family name")),
            other => Err(self.error(&format!(
                "unknown family {other:?} (expected pi, m, w, mtheta, clayton, mix, t, sym)"
            ))),
        }
    }

    /// Comma-separated arguments, positional or `key=value`, filling the
    /// given slots. Every slot must be filled exactly once.
    fn args(&mut self, slots: &[(&str, Slot)]) -> Result<Vec<Value>, String> {
        let mut filled: Vec<Option<Value>> = slots.iter().map(|_| None).collect();
        let mut next_positional = 0;
        loop {
            let save = self.pos;
            let word = self.ident();
            let index = if !word.is_empty() && self.eat('=') {
                slots
                    .iter()
                    .position(|(k, _)| *k == word)
                    .ok_or_else(|| self.error(&format!("unknown argument {word:?}")))?
            } else {
                self.pos = save;
                while next_positional < slots.len() && filled[next_positional].is_some() {
                    next_positional += 1;
                }
                if next_positional == slots.len() {
                    return Err(self.error("too many arguments"));
                }
                next_positional
            };
            if filled[index].is_some() {
                return Err(self.error(&format!("argument {:?} given twice", slots[index].0)));
            }
            filled[index] = Some(match slots[index].1 {
                Slot::Number => Value::Number(self.number()?),
                Slot::Spec => Value::Spec(self.spec()?),
            });
            if !self.eat(',') {
                break;
            }
        }
        filled
            .into_iter()
            .zip(slots)
            .map(|(v, (k, _))| v.ok_or_else(|| self.error(&format!("missing argument {k:?}"))))
            .collect()
    }
}

fn number_of(v: &Value) -> f64 {
    match v {
        Value::Number(x) => *x,
        Value::Spec(_) => unreachable!("slot kinds are fixed"),
    }
}

fn spec_of(v: Value) -> FamilySpec {
    match v {
        Value::Spec(s) => s,
        Value::Number(_) => unreachable!("slot kinds are fixed"),
    }
}

/// Family selection flags shared by `measure` and `sample`.
#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    /// Family name (pi, m, w, mtheta, clayton, mix) or a compact spec such
    /// as mtheta:0.3 or "mix(0.5,pi,m)".
    #[arg(long)]
    pub family: String,
    /// θ for mtheta, in [0, 1/3].
    #[arg(long)]
    pub theta: Option<f64>,
    /// δ for clayton, positive.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Mixture weight of the left component, in [0, 1].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Left component of a mix, as a compact spec.
    #[arg(long)]
    pub left: Option<String>,
    /// Right component of a mix, as a compact spec.
    #[arg(long)]
    pub right: Option<String>,
}

impl FamilyArgs {
    pub fn to_spec(&self) -> Result<FamilySpec, String> {
        let name = self.family.trim().to_ascii_lowercase();
        let given: Vec<&str> = [
            ("theta", self.theta.is_some()),
            ("delta", self.delta.is_some()),
            ("lambda", self.lambda.is_some()),
            ("left", self.left.is_some()),
            ("right", self.right.is_some()),
        ]
        .into_iter()
        .filter_map(|(k, set)| set.then_some(k))
        .collect();

        let allowed: &[&str] = match name.as_str() {
            "pi" | "m" | "w" => &[],
            "mtheta" => &["theta"],
            "clayton" => &["delta"],
            "mix" => &["lambda", "left", "right"],
            _ => {
                if let Some(flag) = given.first() {
                    return Err(format!(
                        "--{flag} cannot be combined with the compact spec {:?}",
                        self.family
                    ));
                }
                return FamilySpec::parse(&self.family);
            }
        };
        if let Some(flag) = given.iter().find(|k| !allowed.contains(k)) {
            return Err(format!("--{flag} does not apply to family {name}"));
        }
        if let Some(flag) = allowed.iter().find(|k| !given.contains(k)) {
            return Err(format!("family {name} requires --{flag}"));
        }

        let spec = match name.as_str() {
            "pi" => FamilySpec::Pi,
            "m" => FamilySpec::M,
            "w" => FamilySpec::W,
            "mtheta" => FamilySpec::MTheta(self.theta.unwrap()),
            "clayton" => FamilySpec::Clayton(self.delta.unwrap()),
            _ => FamilySpec::Mix {
                lambda: self.lambda.unwrap(),
                left: Box::new(FamilySpec::parse(self.left.as_deref().unwrap())?),
                right: Box::new(FamilySpec::parse(self.right.as_deref().unwrap())?),
            },
        };
        spec.check_depth()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_compact_forms() {
        assert_eq!(FamilySpec::parse("pi").unwrap(), FamilySpec::Pi);
        assert_eq!(FamilySpec::parse(" M ").unwrap(), FamilySpec::M);
        assert_eq!(
            FamilySpec::parse("mtheta:0.3").unwrap(),
            FamilySpec::MTheta(0.3)
        );
        assert_eq!(
            FamilySpec::parse("clayton(delta=2)").unwrap(),
            FamilySpec::Clayton(2.0)
        );
        let mix = FamilySpec::parse("mix(right=pi, lambda=0.25, left=t(mtheta:0.1))").unwrap();
        assert_eq!(
            mix,
            FamilySpec::Mix {
                lambda: 0.25,
                left: Box::new(FamilySpec::Transpose(Box::new(FamilySpec::MTheta(0.1)))),
                right: Box::new(FamilySpec::Pi),
            }
        );
    }

    #[test]
    fn display_round_trips_through_core_names() {
        for s in [
            "mix(0.07238690608447686,w,t(mtheta:0.3098890562975848))",
            "sym(clayton:1.5)",
            "mix(0.5,mix(0.5,pi,m),w)",
        ] {
            let spec = FamilySpec::parse(s).unwrap();
            assert_eq!(spec.to_string(), s);
            assert_eq!(spec.build().unwrap().to_string(), s);
        }
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "",
            "gumbel:2",
            "mtheta",
            "mtheta:x",
            "mix(0.5,pi)",
            "mix(0.5,pi,m,w)",
            "mix(lambda=0.5,lambda=0.2,pi)",
            "pi)",
            "t(pi",
        ] {
            assert!(FamilySpec::parse(bad).is_err(), "{bad}");
        }
        assert!(FamilySpec::parse("mtheta:0.5").unwrap().build().is_err());
        assert!(FamilySpec::parse("mix(1.5,pi,m)").unwrap().build().is_err());
    }

    #[test]
    fn mix_depth_limit() {
        let mut s = String::from("pi");
        for _ in 0..MAX_MIX_DEPTH {
            s = format!("mix(0.5,{s},m)");
        }
        assert_eq!(FamilySpec::parse(&s).unwrap().mix_depth(), MAX_MIX_DEPTH);
        let deeper = format!("mix(0.5,{s},m)");
        let err = FamilySpec::parse(&deeper).unwrap_err();
        assert!(err.contains("depth 5"), "{err}");
    }

    fn args(family: &str) -> FamilyArgs {
        FamilyArgs {
            family: family.into(),
            theta: None,
            delta: None,
            lambda: None,
            left: None,
            right: None,
        }
    }

    #[test]
    fn flag_form() {
        let a = FamilyArgs {
            theta: Some(0.2),
            ..args("mtheta")
        };
        assert_eq!(a.to_spec().unwrap(), FamilySpec::MTheta(0.2));
        assert!(args("mtheta").to_spec().unwrap_err().contains("--theta"));
        let a = FamilyArgs {
            delta: Some(1.0),
            ..args("pi")
        };
        assert!(a.to_spec().unwrap_err().contains("does not apply"));
        let a = FamilyArgs {
            lambda: Some(0.5),
            left: Some("mtheta:0.3".into()),
            right: Some("pi".into()),
            ..args("mix")
        };
        assert_eq!(a.to_spec().unwrap().to_string(), "mix(0.5,mtheta:0.3,pi)");
        let a = FamilyArgs {
            theta: Some(0.2),
            ..args("mtheta:0.1")
        };
        assert!(a.to_spec().is_err());
    }
}
