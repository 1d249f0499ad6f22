//! Experiment configuration: TOML schema, validation and overrides.

use std::path::PathBuf;
use std::sync::Arc;

use gsf_core::dynamics::{DampedParams, PendulumParams, PuParams, SystemSpec};
use gsf_core::{Gauge, GaugeKind, MollifierSpec};
use serde::Deserialize;

use crate::error::ConfigError;

/// Bundled default configuration for every experiment, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("embed_profiles", include_str!("../configs/embed_profiles.toml")),
    ("pendulum", include_str!("../configs/pendulum.toml")),
    ("damped", include_str!("../configs/damped.toml")),
    ("pu", include_str!("../configs/pu.toml")),
    ("variational_checks", include_str!("../configs/variational_checks.toml")),
    ("optctrl_lqr", include_str!("../configs/optctrl_lqr.toml")),
    ("ring_suite", include_str!("../configs/ring_suite.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    EmbedProfiles,
    Pendulum,
    Damped,
    Pu,
    VariationalChecks,
    OptctrlLqr,
    RingSuite,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::EmbedProfiles => "embed_profiles",
            Experiment::Pendulum => "pendulum",
            Experiment::Damped => "damped",
            Experiment::Pu => "pu",
            Experiment::VariationalChecks => "variational_checks",
            Experiment::OptctrlLqr => "optctrl_lqr",
            Experiment::RingSuite => "ring_suite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemName {
    Pendulum,
    DampedTwoMedia,
    PaisUhlenbeck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Lqr,
    Tracking,
    TimeWeighted,
    SineDrift,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Experiment,
    system: Option<SystemName>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    t_span: Option<[f64; 2]>,
    tol: Option<f64>,
    gauge: Option<RawGauge>,
    mollifier: Option<RawMollifier>,
    params: Option<RawParams>,
    ic: Option<RawIc>,
    control: Option<RawControl>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGauge {
    kind: Option<String>,
    eps_max: Option<f64>,
    eps_min: Option<f64>,
    points: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMollifier {
    moment_order: Option<i64>,
    scale_exponent: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(rename = "L1")]
    l1: Option<f64>,
    #[serde(rename = "L2")]
    l2: Option<f64>,
    g: Option<f64>,
    theta0: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    #[serde(rename = "Lambda")]
    lambda: Option<f64>,
    m: Option<f64>,
    ts: Option<f64>,
    w1: Option<f64>,
    w1hat: Option<f64>,
    w2: Option<f64>,
    w2hat: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIc {
    q0: Option<f64>,
    q1: Option<f64>,
    q2: Option<f64>,
    q3: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawControl {
    model: ModelName,
    q1: Option<f64>,
    nodes: Option<i64>,
    alpha: Option<f64>,
    max_iter: Option<i64>,
    grad_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    pub model: ModelName,
    pub q1: f64,
    pub nodes: usize,
    pub alpha: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
}

/// Gauge settings kept separately so the grid can be rebuilt after an
/// `--eps-points` override.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeConfig {
    pub kind: GaugeKind,
    pub eps_max: f64,
    pub eps_min: f64,
    pub points: usize,
}

impl GaugeConfig {
    pub fn build(&self) -> Result<Gauge, gsf_core::Error> {
        Gauge::geometric(self.kind, self.eps_max, self.eps_min, self.points)
    }
}

/// A validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub system: Option<SystemSpec>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub t_span: (f64, f64),
    pub tol: f64,
    pub gauge_config: GaugeConfig,
    pub gauge: Arc<Gauge>,
    pub mollifier: Arc<MollifierSpec>,
    pub ic: Vec<f64>,
    pub control: Option<ControlConfig>,
    /// Raw source text, hashed into the run manifest.
    pub source: String,
}

/// Command-line overrides applied after parsing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub eps_points: Option<usize>,
}

/// 1-based line of `key` inside `[table]` (or at top level when `table` is
/// empty), for error messages.
fn locate(source: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut table_line = None;
    for (i, line) in source.lines().enumerate() {
        let s = line.trim();
        if let Some(name) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == table {
                table_line = Some(i + 1);
            }
            continue;
        }
        if current != table {
            continue;
        }
        if let Some((k, _)) = s.split_once('=') {
            let k = k.trim().trim_matches('"');
            if k == key {
                return Some(i + 1);
            }
        }
    }
    table_line
}

struct Checker<'a> {
    source: &'a str,
}

impl Checker<'_> {
    fn err(&self, table: &str, key: &str, reason: impl Into<String>) -> ConfigError {
        let field = match (table.is_empty(), key.is_empty()) {
            (true, _) => key.to_string(),
            (false, true) => table.to_string(),
            (false, false) => format!("{table}.{key}"),
        };
        ConfigError::Invalid {
            field,
            line: locate(self.source, table, key),
            reason: reason.into(),
        }
    }

    fn positive(&self, table: &str, key: &str, v: f64) -> Result<f64, ConfigError> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(table, key, format!("must be positive and finite, got {v}")))
        }
    }

    fn finite(&self, table: &str, key: &str, v: f64) -> Result<f64, ConfigError> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(table, key, "must be finite"))
        }
    }

    fn count(&self, table: &str, key: &str, v: i64, min: i64) -> Result<usize, ConfigError> {
        if v >= min {
            Ok(v as usize)
        } else {
            Err(self.err(table, key, format!("must be at least {min}, got {v}")))
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a configuration, then applies `overrides`.
    pub fn parse(source: &str, overrides: &Overrides) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(source).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let c = Checker { source };
        let experiment = raw.experiment;

        let gauge_raw = raw.gauge.unwrap_or(RawGauge {
            kind: None,
            eps_max: None,
            eps_min: None,
            points: None,
        });
        let kind = match gauge_raw.kind.as_deref().unwrap_or("power") {
            "power" => GaugeKind::Power,
            "exponential" => GaugeKind::Exponential,
            other => return Err(c.err("gauge", "kind", format!("expected \"power\" or \"exponential\", got \"{other}\""))),
        };
        let eps_max = c.positive("gauge", "eps_max", gauge_raw.eps_max.unwrap_or(2f64.powi(-4)))?;
        let eps_min = c.positive("gauge", "eps_min", gauge_raw.eps_min.unwrap_or(2f64.powi(-15)))?;
        if eps_max > 1.0 {
            return Err(c.err("gauge", "eps_max", "must not exceed 1"));
        }
        if eps_min >= eps_max {
            return Err(c.err("gauge", "eps_min", "must be smaller than gauge.eps_max"));
        }
        let points = c.count("gauge", "points", gauge_raw.points.unwrap_or(12), gsf_core::gauge::MIN_CLASSIFY_POINTS as i64)?;
        let points = match overrides.eps_points {
            Some(n) if n < gsf_core::gauge::MIN_CLASSIFY_POINTS => {
                return Err(ConfigError::Invalid {
                    field: "--eps-points".into(),
                    line: None,
                    reason: format!("must be at least {}, got {n}", gsf_core::gauge::MIN_CLASSIFY_POINTS),
                })
            }
            Some(n) => n,
            None => points,
        };
        let gauge_config = GaugeConfig {
            kind,
            eps_max,
            eps_min,
            points,
        };
        let gauge = gauge_config.build().map_err(|e| c.err("gauge", "eps_min", e.to_string()))?;

        let moll_raw = raw.mollifier.unwrap_or(RawMollifier {
            moment_order: None,
            scale_exponent: None,
        });
        let j = moll_raw.moment_order.unwrap_or(4);
        if !(0..=gsf_core::mollifier::MAX_MOMENT_ORDER as i64).contains(&j) || j % 2 != 0 {
            return Err(c.err(
                "mollifier",
                "moment_order",
                format!("must be even and in [0, {}], got {j}", gsf_core::mollifier::MAX_MOMENT_ORDER),
            ));
        }
        let a = c.positive("mollifier", "scale_exponent", moll_raw.scale_exponent.unwrap_or(0.5))?;
        let mollifier = MollifierSpec::build_unchecked(j as usize)
            .and_then(|m| m.with_scale_exponent(a))
            .map_err(|e| c.err("mollifier", "moment_order", e.to_string()))?;

        let tol = c.positive("", "tol", raw.tol.unwrap_or(1e-10))?;
        let seed = overrides.seed.or(raw.seed).unwrap_or(0);
        let output_dir = overrides
            .output_dir
            .clone()
            .or(raw.output_dir)
            .unwrap_or_else(|| PathBuf::from("out").join(experiment.name()));

        let expected_system = match experiment {
            Experiment::Pendulum => Some(SystemName::Pendulum),
            Experiment::Damped => Some(SystemName::DampedTwoMedia),
            Experiment::Pu => Some(SystemName::PaisUhlenbeck),
            _ => None,
        };
        let system_name = match (experiment, raw.system, expected_system) {
            (_, Some(s), Some(e)) if s != e => {
                return Err(c.err("", "system", format!("experiment \"{}\" requires system {e:?}", experiment.name())))
            }
            (_, s, Some(e)) => Some(s.unwrap_or(e)),
            (Experiment::VariationalChecks, None, None) => {
                return Err(c.err("", "system", "required by experiment \"variational_checks\""))
            }
            (Experiment::VariationalChecks, s, None) => s,
            (_, Some(_), None) => {
                return Err(c.err("", "system", format!("not used by experiment \"{}\"", experiment.name())))
            }
            (_, None, None) => None,
        };

        let params = raw.params.unwrap_or_default();
        let system = match system_name {
            Some(name) => Some(build_system(&c, name, &params)?),
            None => {
                if raw_params_set(&params) {
                    return Err(c.err("params", "", "no system uses these parameters"));
                }
                None
            }
        };

        let default_span = match system_name {
            Some(SystemName::PaisUhlenbeck) => [0.0, 30.0],
            Some(_) => [0.0, 10.0],
            None => [0.0, 1.0],
        };
        let span = raw.t_span.unwrap_or(default_span);
        c.finite("", "t_span", span[0])?;
        c.finite("", "t_span", span[1])?;
        if span[0] >= span[1] {
            return Err(c.err("", "t_span", "start must be before end"));
        }

        let ic = match (&system, raw.ic) {
            (Some(spec), Some(ic)) => {
                let all = [("q0", ic.q0), ("q1", ic.q1), ("q2", ic.q2), ("q3", ic.q3)];
                let n = spec.order();
                let mut out = Vec::with_capacity(n);
                for (i, (key, v)) in all.iter().enumerate() {
                    match (i < n, v) {
                        (true, Some(v)) => out.push(c.finite("ic", key, *v)?),
                        (true, None) => return Err(c.err("ic", key, format!("required for system {}", spec.name()))),
                        (false, Some(_)) => return Err(c.err("ic", key, format!("not used by system {}", spec.name()))),
                        (false, None) => {}
                    }
                }
                out
            }
            (Some(spec), None) => return Err(c.err("ic", "", format!("section [ic] is required for system {}", spec.name()))),
            (None, Some(_)) => return Err(c.err("ic", "", "no system uses initial conditions")),
            (None, None) => Vec::new(),
        };

        let control = match (experiment, raw.control) {
            (Experiment::OptctrlLqr, Some(rc)) => Some(ControlConfig {
                model: rc.model,
                q1: c.finite("control", "q1", rc.q1.unwrap_or(1.0))?,
                nodes: c.count("control", "nodes", rc.nodes.unwrap_or(gsf_core::optctrl::DEFAULT_NODES as i64), 4)?,
                alpha: c.positive("control", "alpha", rc.alpha.unwrap_or(0.5))?,
                max_iter: c.count("control", "max_iter", rc.max_iter.unwrap_or(200), 1)?,
                grad_tol: c.positive("control", "grad_tol", rc.grad_tol.unwrap_or(1e-8))?,
            }),
            (Experiment::OptctrlLqr, None) => return Err(c.err("control", "", "section [control] is required by experiment \"optctrl_lqr\"")),
            (_, Some(_)) => return Err(c.err("control", "", format!("not used by experiment \"{}\"", experiment.name()))),
            (_, None) => None,
        };

        Ok(Self {
            experiment,
            system,
            output_dir,
            seed,
            t_span: (span[0], span[1]),
            tol,
            gauge_config,
            gauge: Arc::new(gauge),
            mollifier: Arc::new(mollifier),
            ic,
            control,
            source: source.to_string(),
        })
    }
}

fn raw_params_set(p: &RawParams) -> bool {
    [
        p.l1, p.l2, p.g, p.theta0, p.beta1, p.beta2, p.lambda, p.m, p.ts, p.w1, p.w1hat, p.w2, p.w2hat,
    ]
    .iter()
    .any(Option::is_some)
}

fn build_system(c: &Checker<'_>, name: SystemName, p: &RawParams) -> Result<SystemSpec, ConfigError> {
    let all: [(&str, Option<f64>); 13] = [
        ("L1", p.l1),
        ("L2", p.l2),
        ("g", p.g),
        ("theta0", p.theta0),
        ("beta1", p.beta1),
        ("beta2", p.beta2),
        ("Lambda", p.lambda),
        ("m", p.m),
        ("ts", p.ts),
        ("w1", p.w1),
        ("w1hat", p.w1hat),
        ("w2", p.w2),
        ("w2hat", p.w2hat),
    ];
    let used: &[&str] = match name {
        SystemName::Pendulum => &["L1", "L2", "g", "theta0", "m"],
        SystemName::DampedTwoMedia => &["beta1", "beta2", "Lambda", "g", "theta0", "m"],
        SystemName::PaisUhlenbeck => &["m", "ts", "w1", "w1hat", "w2", "w2hat"],
    };
    for (key, v) in &all {
        if v.is_some() && !used.contains(key) {
            return Err(c.err("params", key, format!("not used by system {name:?}")));
        }
    }
    let get = |key: &str, default: f64| -> Result<f64, ConfigError> {
        let v = all.iter().find(|(k, _)| *k == key).and_then(|(_, v)| *v).unwrap_or(default);
        c.finite("params", key, v)
    };
    let spec = match name {
        SystemName::Pendulum => {
            let d = PendulumParams::default();
            SystemSpec::Pendulum(PendulumParams {
                l1: get("L1", d.l1)?,
                l2: get("L2", d.l2)?,
                g: get("g", d.g)?,
                theta0: get("theta0", d.theta0)?,
                m: get("m", d.m)?,
            })
        }
        SystemName::DampedTwoMedia => {
            let d = DampedParams::default();
            SystemSpec::Damped(DampedParams {
                beta1: get("beta1", d.beta1)?,
                beta2: get("beta2", d.beta2)?,
                lambda: get("Lambda", d.lambda)?,
                g: get("g", d.g)?,
                theta0: get("theta0", d.theta0)?,
                m: get("m", d.m)?,
            })
        }
        SystemName::PaisUhlenbeck => {
            let d = PuParams::default();
            SystemSpec::PaisUhlenbeck(PuParams {
                m: get("m", d.m)?,
                ts: get("ts", d.ts)?,
                w1: get("w1", d.w1)?,
                w1hat: get("w1hat", d.w1hat)?,
                w2: get("w2", d.w2)?,
                w2hat: get("w2hat", d.w2hat)?,
            })
        }
    };
    spec.validate().map_err(|e| {
        let key = match &e {
            gsf_core::Error::Validation { what, .. } => what.rsplit('.').next().unwrap_or(""),
            _ => "",
        };
        c.err("params", key, e.to_string())
    })?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::parse(s, &Overrides::default())
    }

    #[test]
    fn bundled_configs_parse() {
        for (name, src) in BUNDLED {
            let cfg = parse(src).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.experiment.name(), *name);
        }
    }

    #[test]
    fn single_point_grid_names_the_field() {
        let src = "experiment = \"embed_profiles\"\n\n[gauge]\npoints = 1\n";
        let e = parse(src).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("gauge.points"), "{msg}");
        assert!(msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let src = "experiment = \"pendulum\"\nt_span = [0.0, 1.0]\n[ic]\nq0 = 0.0\nq1 = 1.0\n[params]\nL3 = 1.0\n";
        let msg = parse(src).unwrap_err().to_string();
        assert!(msg.contains("L3") && msg.contains("line 7"), "{msg}");
    }

    #[test]
    fn foreign_parameters_are_rejected() {
        let src = "experiment = \"pendulum\"\n[ic]\nq0 = 0.0\nq1 = 1.0\n[params]\nbeta1 = 1.0\n";
        let msg = parse(src).unwrap_err().to_string();
        assert!(msg.contains("params.beta1") && msg.contains("line 6"), "{msg}");
    }

    #[test]
    fn missing_initial_condition_is_reported() {
        let src = "experiment = \"pu\"\n[ic]\nq0 = 1.0\nq1 = 2.0\nq2 = 0.0\n";
        let msg = parse(src).unwrap_err().to_string();
        assert!(msg.contains("ic.q3"), "{msg}");
    }

    #[test]
    fn overrides_take_precedence() {
        let src = bundled("pendulum").unwrap();
        let o = Overrides {
            output_dir: Some("x".into()),
            seed: Some(9),
            eps_points: Some(5),
        };
        let cfg = ExperimentConfig::parse(src, &o).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.gauge.len(), 5);
        assert_eq!(cfg.output_dir, PathBuf::from("x"));
    }

    #[test]
    fn nonpositive_length_is_rejected() {
        let src = "experiment = \"pendulum\"\n[ic]\nq0 = 0.0\nq1 = 1.0\n[params]\nL1 = -0.4\n";
        let msg = parse(src).unwrap_err().to_string();
        assert!(msg.contains("params"), "{msg}");
    }
}
