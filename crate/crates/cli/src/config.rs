//! Experiment configuration: TOML on disk, overridable from the command line.

use std::path::PathBuf;

use roughfrob::driver::{self, DriverRef};
use roughfrob::signals::SignalSpec;
use roughfrob::{Domain64, Error, Field64, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Integrate,
    Boundary,
    CheckJet,
    CheckWedge,
    CheckInvolutivity,
    Corrector,
    SolveYde,
    SolvePfaff,
    SolveImplicit,
    GenSignal,
    Converge,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Integrate => "integrate",
            Command::Boundary => "boundary",
            Command::CheckJet => "check-jet",
            Command::CheckWedge => "check-wedge",
            Command::CheckInvolutivity => "check-involutivity",
            Command::Corrector => "corrector",
            Command::SolveYde => "solve-yde",
            Command::SolvePfaff => "solve-pfaff",
            Command::SolveImplicit => "solve-implicit",
            Command::GenSignal => "gen-signal",
            Command::Converge => "converge",
        }
    }
}

/// A signal given either as a full spec table or as a shorthand name.
///
/// Shorthands: `identityNd`, `weierstrass:BETA[:TERMS[:SEED]]`,
/// `lacunaryNd:BETA[:TERMS[:SEED]]`, `fbm:HURST[:LEVEL[:SEED]]`, and any
/// smooth signal name with an optional `@DIM` suffix (`poly:t2`,
/// `sin_lin:1,1@2`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SignalEntry {
    Name(String),
    Spec(SignalSpec),
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Config(format!("bad {what} {s:?} in signal shorthand")))
}

fn dim_prefix(s: &str, stem: &str) -> Option<usize> {
    let rest = s.strip_prefix(stem)?;
    let d = rest.strip_suffix('d')?;
    if d.is_empty() {
        Some(1)
    } else {
        d.parse().ok()
    }
}

pub fn parse_shorthand(name: &str) -> Result<SignalSpec> {
    let name = name.trim();
    if let Some(dim) = dim_prefix(name, "identity") {
        return Ok(SignalSpec::Smooth { name: "identity".into(), dim });
    }
    let (head, args) = name.split_once(':').unwrap_or((name, ""));
    let parts: Vec<&str> = if args.is_empty() { Vec::new() } else { args.split(':').collect() };
    let arg = |i: usize| parts.get(i).copied();
    let rough = head == "weierstrass" || head == "fbm" || dim_prefix(head, "lacunary").is_some();
    if rough {
        if parts.is_empty() || parts.len() > 3 {
            return Err(Error::Config(format!("signal {name:?} needs 1 to 3 parameters")));
        }
        let p0: f64 = num(parts[0], "exponent")?;
        let seed: u64 = arg(2).map(|s| num(s, "seed")).transpose()?.unwrap_or(0);
        return Ok(match head {
            "weierstrass" => SignalSpec::Weierstrass1d {
                beta: p0,
                terms: arg(1).map(|s| num(s, "term count")).transpose()?.unwrap_or(12),
                seed,
            },
            "fbm" => SignalSpec::Fbm1d {
                hurst: p0,
                level: arg(1).map(|s| num(s, "level")).transpose()?.unwrap_or(12),
                seed,
            },
            _ => SignalSpec::LacunaryMd {
                beta: p0,
                terms: arg(1).map(|s| num(s, "term count")).transpose()?.unwrap_or(8),
                seed,
                dim: dim_prefix(head, "lacunary").unwrap_or(1),
            },
        });
    }
    let (smooth, dim) = match name.rsplit_once('@') {
        Some((n, d)) => (n, num(d, "dimension")?),
        None => (name, 1),
    };
    Ok(SignalSpec::Smooth { name: smooth.to_string(), dim })
}

impl SignalEntry {
    pub fn spec(&self) -> Result<SignalSpec> {
        match self {
            SignalEntry::Name(n) => parse_shorthand(n),
            SignalEntry::Spec(s) => Ok(s.clone()),
        }
    }
}

/// Shifts every seed in the signal description by `offset`.
pub fn reseed(spec: &mut SignalSpec, offset: u64) {
    match spec {
        SignalSpec::Weierstrass1d { seed, .. }
        | SignalSpec::LacunaryMd { seed, .. }
        | SignalSpec::Fbm1d { seed, .. } => *seed = seed.wrapping_add(offset),
        SignalSpec::Sum { parts } | SignalSpec::Diagonal { axes: parts } | SignalSpec::Stack { parts } => {
            parts.iter_mut().for_each(|p| reseed(p, offset))
        }
        SignalSpec::Composed { core, .. } => reseed(core, offset),
        SignalSpec::Mollified { base, .. } => reseed(base, offset),
        SignalSpec::Modes { .. } | SignalSpec::Smooth { .. } => {}
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Signals {
    pub f: Option<SignalEntry>,
    pub g: Option<SignalEntry>,
    pub y: Option<SignalEntry>,
    pub u: Option<SignalEntry>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numeric {
    pub level: Option<u32>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    /// Dyadic depth of additivity tests, or bisection budget of solvers.
    pub depth: Option<u32>,
    pub sub_level: Option<u32>,
    /// `trapezoid` or `left_point`.
    pub rule: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectSpec {
    pub base: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Problem {
    /// Named driver `F`, or the jet candidate `V` for `check-jet`.
    pub driver: Option<String>,
    /// Sizes of the `linear_z` family.
    pub k: Option<usize>,
    pub d: Option<usize>,
    /// Box the signals are built on; defaults to the unit box.
    pub domain: Option<DomainSpec>,
    /// Exponent override applied to `g`.
    pub beta: Option<f64>,
    pub p0: Option<Vec<f64>>,
    pub theta0: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub p: Option<Vec<f64>>,
    pub q: Option<Vec<f64>>,
    pub rect: Option<RectSpec>,
    /// `diagonal` or `wedge-null` for `solve-pfaff`.
    pub mode: Option<String>,
    pub axis_order: Option<Vec<usize>>,
    /// `frozen` or `zero`.
    pub init: Option<String>,
    /// `plus`, `minus` or `auto`.
    pub sign: Option<String>,
    /// Extra sufficient conditions for `check-jet`, e.g. `curl:0,1`, `wedge:0,1`.
    pub conditions: Vec<String>,
    /// `exp_sum`: `θ = θ₀ exp(Σ_i δg^i)`, valid for `linear_z` drivers.
    pub oracle: Option<String>,
    /// Tolerance of the oracle comparison, or of the parts identity.
    pub check_tol: Option<f64>,
    /// Also solve with the reversed sweep order and report the discrepancy.
    pub compare_orders: bool,
    pub compare_tol: Option<f64>,
    pub eval_at: Option<Vec<f64>>,
    /// Refinement and path diagnostics of the solvers (default on).
    pub diagnostics: Option<bool>,
    /// Run the Gronwall check on the `solve-yde` solution.
    pub gronwall: bool,
    pub gronwall_levels: Option<Vec<u32>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Study {
    /// `young`, `germ`, `pfaff`, `yde` or `mollify`.
    pub kind: Option<String>,
    pub levels: Vec<u32>,
    /// Mollifier widths for `mollify`.
    pub eps: Vec<f64>,
    /// Exact limit; the finest level is the reference when absent.
    pub reference: Option<f64>,
    /// Grid level of mollified signals, or quadrature level of the germ sweep.
    pub fine_level: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub preset: Option<String>,
    pub description: Option<String>,
    /// Added to every signal seed.
    pub seed: Option<u64>,
    pub numeric: Numeric,
    pub signals: Signals,
    pub problem: Problem,
    pub study: Study,
    pub output: Output,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config: {}", e.message())))
    }

    pub fn domain(&self, dim: usize) -> Result<Domain64> {
        match &self.problem.domain {
            Some(d) => {
                let dom = Domain64::new(d.lower.clone(), d.upper.clone())?;
                if dom.dim() != dim {
                    return Err(Error::Config(format!(
                        "domain has dimension {} but the signal needs {dim}",
                        dom.dim()
                    )));
                }
                Ok(dom)
            }
            None => Ok(Domain64::unit(dim.max(1))),
        }
    }

    /// The resolved spec of a signal slot, with the seed offset applied.
    pub fn signal_spec(&self, slot: &str) -> Result<Option<SignalSpec>> {
        let entry = match slot {
            "f" => &self.signals.f,
            "g" => &self.signals.g,
            "y" => &self.signals.y,
            "u" => &self.signals.u,
            _ => return Err(Error::Config(format!("unknown signal slot {slot:?}"))),
        };
        let Some(entry) = entry else { return Ok(None) };
        let mut spec = entry.spec()?;
        if let Some(s) = self.seed {
            reseed(&mut spec, s);
        }
        Ok(Some(spec))
    }

    pub fn signal(&self, slot: &str) -> Result<Option<Field64>> {
        let Some(spec) = self.signal_spec(slot)? else { return Ok(None) };
        let field = spec.build(&self.domain(spec.dim())?)?;
        Ok(Some(if slot == "g" {
            match self.problem.beta {
                Some(b) => field.with_exponent(b)?,
                None => field,
            }
        } else {
            field
        }))
    }

    pub fn require(&self, slot: &str) -> Result<Field64> {
        self.signal(slot)?.ok_or_else(|| {
            Error::Config(format!(
                "{} needs signal {slot:?} (flag --{slot} or [signals] {slot} = ...)",
                self.command.map_or("this command", Command::name)
            ))
        })
    }

    /// Looks up the named driver; `linear_z` is sized from `k`, `d` or `g`.
    pub fn driver(&self, default: Option<&str>, k: usize) -> Result<DriverRef<f64>> {
        let name = self
            .problem
            .driver
            .as_deref()
            .or(default)
            .ok_or_else(|| Error::Config("no driver given (flag --driver or [problem] driver)".into()))?;
        driver::named(name, self.problem.k.unwrap_or(k), self.problem.d.unwrap_or(1))
    }

    pub fn rule(&self) -> Result<roughfrob::Rule> {
        match self.numeric.rule.as_deref() {
            None | Some("trapezoid") => Ok(roughfrob::Rule::Trapezoid),
            Some("left_point") | Some("left") => Ok(roughfrob::Rule::LeftPoint),
            Some(r) => Err(Error::Config(format!("unknown quadrature rule {r:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shorthands() {
        assert_eq!(
            parse_shorthand("identity2d").unwrap(),
            SignalSpec::Smooth { name: "identity".into(), dim: 2 }
        );
        assert_eq!(
            parse_shorthand("weierstrass:0.85:10:3").unwrap(),
            SignalSpec::Weierstrass1d { beta: 0.85, terms: 10, seed: 3 }
        );
        assert_eq!(
            parse_shorthand("lacunary2d:0.9").unwrap(),
            SignalSpec::LacunaryMd { beta: 0.9, terms: 8, seed: 0, dim: 2 }
        );
        assert_eq!(
            parse_shorthand("sin_lin:1,1@2").unwrap(),
            SignalSpec::Smooth { name: "sin_lin:1,1".into(), dim: 2 }
        );
        assert_eq!(parse_shorthand("poly:t2").unwrap(), SignalSpec::Smooth { name: "poly:t2".into(), dim: 1 });
        assert!(parse_shorthand("weierstrass:x").is_err());
    }

    #[test]
    fn seeds_shift_recursively() {
        let mut s = SignalSpec::Stack {
            parts: vec![
                SignalSpec::Smooth { name: "coord:0".into(), dim: 2 },
                SignalSpec::LacunaryMd { beta: 0.85, terms: 5, seed: 6, dim: 2 },
            ],
        };
        reseed(&mut s, 10);
        let SignalSpec::Stack { parts } = &s else { unreachable!() };
        assert!(matches!(parts[1], SignalSpec::LacunaryMd { seed: 16, .. }));
    }

    #[test]
    fn tables_and_names_both_parse() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            command = "check-jet"
            [signals]
            g = "identity2d"
            f = { kind = "weierstrass1d", beta = 0.7, terms = 6, seed = 1 }
            [problem]
            driver = "rotational"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.command, Some(Command::CheckJet));
        assert!(matches!(cfg.signal_spec("f").unwrap(), Some(SignalSpec::Weierstrass1d { .. })));
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    }
}
