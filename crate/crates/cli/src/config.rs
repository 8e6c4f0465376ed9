//! Run configuration, read from JSON or from flat `key=value` lines.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lmce_core::Family;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

pub const IDENTITY_CHECKS: [&str; 6] = [
    "complex_factorization",
    "volume_formula",
    "form_equivalence",
    "cutoff_volume",
    "slope_volume",
    "coordinate_laplacian",
];

pub const INEQUALITY_CHECKS: [&str; 7] = [
    "weak_max_principle",
    "super_iso",
    "jacobi_pointwise",
    "subharmonic_modified_slope",
    "jacobi_integral",
    "volume_bound",
    "hessian_estimate",
];

pub const HEATMAPS: [&str; 6] = ["u", "psi", "volume", "slope", "btilde", "error"];

const LIST_KEYS: [&str; 4] = ["checks", "heatmaps", "sweep_values", "cutoff"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitTag {
    Fit,
}

/// Quadratic weight of the modified slope: a number or `"fit"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weight {
    Fixed(f64),
    Fit(FitTag),
}

/// Which field `verify` inspects for a built-in problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Manufactured,
    Solved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "a")]
    QuadraticA,
    #[serde(rename = "A")]
    Weight,
    #[serde(rename = "n")]
    Nodes,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub half_width: f64,
    pub n: usize,
    pub delta: f64,
    pub c: f64,
    #[serde(rename = "A")]
    pub weight: Weight,
    pub jacobi_budget: f64,
    pub hessian_budget: f64,
    pub eps_gap: f64,
    pub problem: String,
    pub field: FieldKind,
    /// Field file with `u`; replaces `problem` when set.
    pub field_source: Option<PathBuf>,
    pub checks: Vec<String>,
    /// Radius of the Hessian estimate.
    #[serde(rename = "R")]
    pub radius: f64,
    /// Radius of the modified-slope region.
    pub rho: f64,
    pub cutoff: [f64; 2],
    pub wmp_trials: usize,
    pub newton_tolerance: f64,
    pub max_iterations: usize,
    pub sweep_param: Option<SweepParam>,
    pub sweep_values: Vec<f64>,
    pub heatmaps: Vec<String>,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            half_width: 4.0,
            n: 129,
            delta: 0.3,
            c: 0.5,
            weight: Weight::Fit(FitTag::Fit),
            jacobi_budget: 10.0,
            hessian_budget: 5.0,
            eps_gap: 1e-6,
            problem: "quadratic(1)".into(),
            field: FieldKind::Manufactured,
            field_source: None,
            checks: vec!["identities".into()],
            radius: 4.0,
            rho: 2.0,
            cutoff: [1.0, 2.0],
            wmp_trials: 200,
            newton_tolerance: 1e-10,
            max_iterations: 40,
            sweep_param: None,
            sweep_values: Vec::new(),
            heatmaps: Vec::new(),
            seed: 0,
            out: PathBuf::from("lmce-out"),
        }
    }
}

fn scalar(raw: &str) -> Value {
    let t = raw.trim();
    if let Ok(v) = t.parse::<u64>() {
        return Value::Number(v.into());
    }
    if let Ok(v) = t.parse::<i64>() {
        return Value::Number(v.into());
    }
    if let Some(v) = t.parse::<f64>().ok().and_then(Number::from_f64) {
        return Value::Number(v);
    }
    match t {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => Value::String(t.to_string()),
    }
}

/// Flat `key=value` text; `#` starts a comment, list keys split on commas.
fn parse_flat(text: &str) -> Result<Value> {
    let mut map = Map::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected key=value, got {line:?}", no + 1))?;
        let key = key.trim();
        let value = if LIST_KEYS.contains(&key) {
            Value::Array(
                value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(scalar)
                    .collect(),
            )
        } else {
            scalar(value)
        };
        if map.insert(key.to_string(), value).is_some() {
            bail!("line {}: key {key:?} given twice", no + 1);
        }
    }
    Ok(Value::Object(map))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let value = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).context("config is not valid JSON")?
        } else {
            parse_flat(text)?
        };
        let cfg: RunConfig = serde_json::from_value(value).context("invalid config")?;
        Ok(cfg)
    }

    /// Reads a config file; a relative `field_source` is taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(src) = &cfg.field_source {
            if src.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.field_source = Some(base.join(src));
            }
        }
        Ok(cfg)
    }

    pub fn family(&self) -> Result<Family> {
        self.problem
            .parse::<Family>()
            .with_context(|| format!("unknown problem {:?}", self.problem))
    }

    /// Requested checks with groups expanded, in order, each once.
    pub fn expanded_checks(&self) -> Result<Vec<&'static str>> {
        let mut out: Vec<&'static str> = Vec::new();
        for name in &self.checks {
            let group: Vec<&'static str> = match name.trim() {
                "identities" => IDENTITY_CHECKS.to_vec(),
                "inequalities" => INEQUALITY_CHECKS.to_vec(),
                "all" => IDENTITY_CHECKS.iter().chain(&INEQUALITY_CHECKS).copied().collect(),
                other => match IDENTITY_CHECKS.iter().chain(&INEQUALITY_CHECKS).find(|c| **c == other) {
                    Some(c) => vec![*c],
                    None => bail!("unknown check {other:?}"),
                },
            };
            for c in group {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < std::f64::consts::FRAC_PI_2) {
            bail!("delta must lie in (0, π/2), got {}", self.delta);
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            bail!("c must lie in (0, 1], got {}", self.c);
        }
        if let Weight::Fixed(a) = self.weight {
            if !(a >= 0.0 && a.is_finite()) {
                bail!("A must be a nonnegative number or \"fit\", got {a}");
            }
        }
        for (name, v) in [
            ("jacobi_budget", self.jacobi_budget),
            ("hessian_budget", self.hessian_budget),
            ("eps_gap", self.eps_gap),
            ("R", self.radius),
            ("rho", self.rho),
            ("newton_tolerance", self.newton_tolerance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must be positive, got {v}");
            }
        }
        if !(self.cutoff[0] > 0.0 && self.cutoff[0] < self.cutoff[1]) {
            bail!("cutoff radii must satisfy 0 < r1 < r2, got {:?}", self.cutoff);
        }
        if self.wmp_trials == 0 {
            bail!("wmp_trials must be positive");
        }
        if self.field_source.is_none() {
            self.family()?;
        }
        self.expanded_checks()?;
        for h in &self.heatmaps {
            if !HEATMAPS.contains(&h.as_str()) {
                bail!("unknown heatmap {h:?}; expected one of {HEATMAPS:?}");
            }
        }
        lmce_core::build_grid(self.half_width, self.n)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_and_json_agree() {
        let flat = "# comment\nn=65\nA=fit\nproblem=anisotropic(1.0, 0.3)\nchecks=identities,hessian_estimate\ncutoff=1,2.5\nseed=7\n";
        let json = r#"{"n":65,"A":"fit","problem":"anisotropic(1.0, 0.3)","checks":["identities","hessian_estimate"],"cutoff":[1,2.5],"seed":7}"#;
        let a = RunConfig::parse(flat).unwrap();
        let b = RunConfig::parse(json).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.n, 65);
        assert_eq!(a.cutoff, [1.0, 2.5]);
        assert_eq!(a.weight, Weight::Fit(FitTag::Fit));
        assert_eq!(a.expanded_checks().unwrap().len(), IDENTITY_CHECKS.len() + 1);
    }

    #[test]
    fn fixed_weight_and_sweep() {
        let c = RunConfig::parse("A=2.5\nsweep_param=a\nsweep_values=1,2,4,8").unwrap();
        assert_eq!(c.weight, Weight::Fixed(2.5));
        assert_eq!(c.sweep_param, Some(SweepParam::QuadraticA));
        assert_eq!(c.sweep_values, vec![1.0, 2.0, 4.0, 8.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("nodes=5").is_err());
        assert!(RunConfig::parse("n").is_err());
        assert!(RunConfig::parse("n=5\nn=7").is_err());
        assert!(RunConfig::parse("A=maybe").is_err());
        assert!(RunConfig::parse("n=3").unwrap().validate().is_err());
        assert!(RunConfig::parse("delta=0").unwrap().validate().is_err());
        assert!(RunConfig::parse("checks=nonsense").unwrap().validate().is_err());
        assert!(RunConfig::parse("problem=cubic(2)").unwrap().validate().is_err());
        assert!(RunConfig::parse("heatmaps=u,bogus").unwrap().validate().is_err());
    }

    #[test]
    fn groups_expand_once() {
        let c = RunConfig::parse("checks=volume_formula,all,identities").unwrap();
        let e = c.expanded_checks().unwrap();
        assert_eq!(e.len(), IDENTITY_CHECKS.len() + INEQUALITY_CHECKS.len());
        assert_eq!(e[0], "volume_formula");
    }
}
