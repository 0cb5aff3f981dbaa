//! Run configuration: JSON files with a flat `params` object, resolved
//! against per-experiment defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// Parameter names accepted in `params` and by `--set`.
pub const PARAM_NAMES: [&str; 10] = ["eps", "alpha", "c1", "c2", "h0", "E", "x_star", "y_h", "k1", "K"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    FoldFast,
    FoldFastHot,
    FoldSlow,
    K2,
    K2Hot,
    K1Vdp,
    VdpCanard,
    VdpMmo,
    Verify,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::FoldFast,
        Experiment::FoldFastHot,
        Experiment::FoldSlow,
        Experiment::K2,
        Experiment::K2Hot,
        Experiment::K1Vdp,
        Experiment::VdpCanard,
        Experiment::VdpMmo,
        Experiment::Verify,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::FoldFast => "fold-fast",
            Experiment::FoldFastHot => "fold-fast-hot",
            Experiment::FoldSlow => "fold-slow",
            Experiment::K2 => "k2",
            Experiment::K2Hot => "k2-hot",
            Experiment::K1Vdp => "k1-vdp",
            Experiment::VdpCanard => "vdp-canard",
            Experiment::VdpMmo => "vdp-mmo",
            Experiment::Verify => "verify",
        }
    }

    /// Parameters, horizon and start point of the reference setup.
    pub fn defaults(self) -> Defaults {
        let p = |eps, alpha, c1, c2, h0, e| Params { eps, alpha, c1, c2, h0, E: e, x_star: 0.0, y_h: 1.25, k1: 1.0, K: 1.0 };
        match self {
            Experiment::FoldFast => Defaults { params: p(0.01, -0.1, 1.0, 2.0, 0.25, 400.0), t_end: 2000.0, initial: [0.2, 0.3] },
            Experiment::FoldFastHot => Defaults { params: p(0.01, 0.0, 5.0, 2.0, 0.25, 400.0), t_end: 2000.0, initial: [0.2, 0.3] },
            // c₁ = 1 lets the repelling half of the slow-channel cycle escape
            Experiment::FoldSlow => Defaults { params: p(0.01, -0.1, 50.0, 2.0, 0.25, 400.0), t_end: 2000.0, initial: [0.2, 0.3] },
            // chart experiments read eps as r̄² and alpha as ᾱ
            Experiment::K2 => Defaults { params: p(0.0, 1.0, 1.0, 2.0, 1e-16, 0.0), t_end: 500.0, initial: [0.5, 0.5] },
            Experiment::K2Hot => Defaults { params: p(1.0, 1.0, 10.0, 2.0, 0.1, 0.0), t_end: 200.0, initial: [0.5, 0.5] },
            Experiment::K1Vdp => Defaults {
                // ε = ρ₁δ₁² with ρ₁ = δ₁ = 0.2
                params: Params { x_star: -0.01, ..p(0.008, 0.0, 1.0, 2.0, 0.0, 0.0) },
                t_end: 1e5,
                initial: [f64::NAN, f64::NAN],
            },
            Experiment::VdpCanard => Defaults {
                params: Params { x_star: -0.01, ..p(0.01, 0.0, 1.0, 2.0, 0.0, 0.0) },
                t_end: 1500.0,
                initial: [-1.5, 1.0],
            },
            Experiment::VdpMmo => Defaults { params: p(0.01, 0.0, 1.0, 2.0, 0.0, 0.0), t_end: 2000.0, initial: [-1.5, 1.0] },
            Experiment::Verify => Defaults { params: p(0.01, 0.0, 1.0, 2.0, 0.0, 0.0), t_end: 0.0, initial: [0.0, 0.0] },
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Experiment {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .ok_or_else(|| CliError::Validation(format!("unknown experiment '{s}'")))
    }
}

pub struct Defaults {
    pub params: Params,
    pub t_end: f64,
    /// NaN means the experiment picks its own start point.
    pub initial: [f64; 2],
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    pub eps: f64,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub h0: f64,
    pub E: f64,
    pub x_star: f64,
    pub y_h: f64,
    pub k1: f64,
    pub K: f64,
}

impl Params {
    fn set(&mut self, key: &str, v: f64) -> Result<(), CliError> {
        let slot = match key {
            "eps" => &mut self.eps,
            "alpha" => &mut self.alpha,
            "c1" => &mut self.c1,
            "c2" => &mut self.c2,
            "h0" => &mut self.h0,
            "E" => &mut self.E,
            "x_star" => &mut self.x_star,
            "y_h" => &mut self.y_h,
            "k1" => &mut self.k1,
            "K" => &mut self.K,
            "h" => return Err(CliError::Validation("raw level 'h' is not accepted; give the level as h0 and E with h = h0·exp(-E)".into())),
            other => return Err(CliError::Validation(format!("unknown parameter '{other}' (expected one of {})", PARAM_NAMES.join(", ")))),
        };
        if !v.is_finite() {
            return Err(CliError::Validation(format!("parameter {key} must be finite")));
        }
        *slot = v;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, max_step: 0.5 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntegratorPatch {
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    max_step: Option<f64>,
}

/// One entry of a config file as written by the user.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: String,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub initial: Option<[f64; 2]>,
    #[serde(default)]
    integrator: IntegratorPatch,
    #[serde(default)]
    pub pattern: Option<String>,
    /// Fast-channel compensation of the higher-order terms (fold-fast-hot).
    #[serde(default)]
    pub compensate: Option<bool>,
}

/// Values given on the command line, applied after the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub params: Vec<(String, f64)>,
    pub t_end: Option<f64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub pattern: Option<String>,
}

impl Overrides {
    /// Parses `key=value` pairs of `--set`.
    pub fn parse_set(items: &[String]) -> Result<Vec<(String, f64)>, CliError> {
        items
            .iter()
            .map(|s| {
                let (k, v) = s.split_once('=').ok_or_else(|| CliError::Validation(format!("--set expects key=value, got '{s}'")))?;
                let v: f64 = v.trim().parse().map_err(|_| CliError::Validation(format!("--set {k}: '{v}' is not a number")))?;
                Ok((k.trim().to_string(), v))
            })
            .collect()
    }
}

/// A configuration with every value filled in; this is what metrics.json echoes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub experiment: Experiment,
    pub name: String,
    pub params: Params,
    pub t_end: f64,
    pub initial: Option<[f64; 2]>,
    pub integrator: IntegratorSettings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    pub compensate: bool,
}

pub const DEFAULT_PATTERN: &str = "3L:0.75:0.01,4S:1.25:-0.01*2";

impl ResolvedConfig {
    pub fn resolve(raw: RawConfig, ov: &Overrides) -> Result<Self, CliError> {
        let experiment: Experiment = raw.experiment.parse()?;
        let d = experiment.defaults();
        let mut params = d.params;
        for (k, v) in &raw.params {
            let v = v.as_f64().ok_or_else(|| {
                if k == "h" {
                    CliError::Validation("raw level 'h' is not accepted; give the level as h0 and E with h = h0·exp(-E)".into())
                } else {
                    CliError::Validation(format!("parameter {k} must be a number, got {v}"))
                }
            })?;
            params.set(k, v)?;
        }
        for (k, v) in &ov.params {
            params.set(k, *v)?;
        }
        let mut integrator = IntegratorSettings::default();
        if matches!(experiment, Experiment::VdpCanard | Experiment::VdpMmo) {
            integrator.rel_tol = 1e-9;
            integrator.abs_tol = 1e-11;
        }
        if let Some(v) = raw.integrator.rel_tol {
            integrator.rel_tol = v;
        }
        if let Some(v) = raw.integrator.abs_tol {
            integrator.abs_tol = v;
        }
        if let Some(v) = raw.integrator.max_step {
            integrator.max_step = v;
        }
        if let Some(v) = ov.rel_tol {
            integrator.rel_tol = v;
        }
        if let Some(v) = ov.abs_tol {
            integrator.abs_tol = v;
        }
        let t_end = ov.t_end.or(raw.t_end).unwrap_or(d.t_end);
        let initial = raw.initial.or(if d.initial[0].is_nan() { None } else { Some(d.initial) });
        let pattern = match experiment {
            Experiment::VdpMmo => Some(ov.pattern.clone().or(raw.pattern).unwrap_or_else(|| DEFAULT_PATTERN.to_string())),
            _ => {
                if raw.pattern.is_some() {
                    return Err(CliError::Validation(format!("'pattern' only applies to vdp-mmo, not {experiment}")));
                }
                None
            }
        };
        let name = raw.name.unwrap_or_else(|| experiment.id().to_string());
        if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
            return Err(CliError::Validation(format!("run name '{name}' is not a plain directory name")));
        }
        let cfg = ResolvedConfig { experiment, name, params, t_end, initial, integrator, pattern, compensate: raw.compensate.unwrap_or(true) };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let ok = |c: bool, m: &str| if c { Ok(()) } else { Err(CliError::Validation(m.to_string())) };
        let p = &self.params;
        let chart = matches!(self.experiment, Experiment::K2 | Experiment::K2Hot);
        if self.experiment != Experiment::Verify {
            ok(if chart { p.eps >= 0.0 } else { p.eps > 0.0 }, "eps must be > 0 (>= 0 for chart K2 runs, where it is r²)")?;
            ok(self.t_end > 0.0 && self.t_end.is_finite(), "t_end must be positive and finite")?;
        }
        let s = &self.integrator;
        ok(s.rel_tol > 0.0 && s.abs_tol > 0.0 && s.max_step > 0.0, "integrator tolerances and max_step must be > 0")?;
        if let Some(x) = self.initial {
            ok(x.iter().all(|v| v.is_finite()), "initial state must be finite")?;
        }
        Ok(())
    }
}

/// Reads a config file holding one config object or an array of them.
pub fn load(path: &Path) -> Result<Vec<RawConfig>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str) -> Result<Vec<RawConfig>, CliError> {
    let v: Value = serde_json::from_str(text).map_err(|e| CliError::Validation(format!("malformed JSON: {e}")))?;
    let items = match v {
        Value::Array(items) => items,
        other => vec![other],
    };
    if items.is_empty() {
        return Err(CliError::Validation("empty config list".into()));
    }
    items
        .into_iter()
        .map(|item| {
            if item.get("params").and_then(|p| p.get("h")).is_some() {
                return Err(CliError::Validation("raw level 'h' is not accepted; give the level as h0 and E with h = h0·exp(-E)".into()));
            }
            serde_json::from_value(item).map_err(|e| CliError::Validation(format!("bad config: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(text: &str) -> Result<ResolvedConfig, CliError> {
        let raw = parse(text)?.remove(0);
        ResolvedConfig::resolve(raw, &Overrides::default())
    }

    #[test]
    fn defaults_fill_in() {
        let c = one(r#"{"experiment": "fold-fast"}"#).unwrap();
        assert_eq!(c.params.alpha, -0.1);
        assert_eq!(c.params.E, 400.0);
        assert_eq!(c.name, "fold-fast");
        assert_eq!(c.initial, Some([0.2, 0.3]));
    }

    #[test]
    fn raw_h_rejected() {
        let e = one(r#"{"experiment": "fold-fast", "params": {"h": 1e-20}}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("h0"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(one(r#"{"experiment": "fold-fast", "params": {"epsilon": 0.1}}"#).is_err());
        assert!(one(r#"{"experiment": "fold-fast", "colour": "red"}"#).is_err());
        assert!(one(r#"{"experiment": "fold-medium"}"#).is_err());
    }

    #[test]
    fn flags_override_file() {
        let raw = parse(r#"{"experiment": "fold-fast", "params": {"eps": 0.02}, "t_end": 10}"#).unwrap().remove(0);
        let ov = Overrides { params: vec![("eps".into(), 0.03)], t_end: Some(20.0), ..Default::default() };
        let c = ResolvedConfig::resolve(raw, &ov).unwrap();
        assert_eq!(c.params.eps, 0.03);
        assert_eq!(c.t_end, 20.0);
    }

    #[test]
    fn parameter_names_match_glossary() {
        let mut p = Experiment::FoldFast.defaults().params;
        for n in PARAM_NAMES {
            p.set(n, 0.5).unwrap();
        }
        let json = serde_json::to_value(p).unwrap();
        let keys: Vec<&str> = json.as_object().unwrap().keys().map(|s| s.as_str()).collect();
        let mut want = PARAM_NAMES.to_vec();
        want.sort();
        let mut got = keys.clone();
        got.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn every_id_round_trips() {
        for e in Experiment::ALL {
            assert_eq!(e.id().parse::<Experiment>().unwrap(), e);
            assert_eq!(serde_json::to_value(e).unwrap(), Value::String(e.id().into()));
        }
    }

    #[test]
    fn batch_file() {
        assert_eq!(parse(r#"[{"experiment": "k2"}, {"experiment": "k2-hot"}]"#).unwrap().len(), 2);
        assert!(parse("[]").is_err());
    }
}
