use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ehmac::arrivals::JointEntry;
use ehmac::{ArrivalModel, ArrivalSpec, Method, Pmf, Policy, PolicySpec};
use serde::Deserialize;
use serde_json::Value;

pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.json");

const DEFAULT_HORIZON: usize = 8;
const DEFAULT_PATHS: usize = 1000;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub users: usize,
    pub caps: Vec<f64>,
    pub arrivals: ArrivalSpec,
    #[serde(default)]
    pub policy: Option<PolicySpec>,
    #[serde(default)]
    pub policies: Option<Vec<PolicySpec>>,
    #[serde(default)]
    pub horizons: Vec<usize>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub region: RegionConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            method: default_method(),
            paths: default_paths(),
            seed: None,
        }
    }
}

fn default_method() -> Method {
    Method::Exact
}

fn default_paths() -> usize {
    DEFAULT_PATHS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Outer,
    Shifted,
    Throughput,
    #[value(alias = "inner_txrx")]
    InnerTxrx,
    #[value(alias = "inner_tx")]
    InnerTx,
}

impl RegionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionKind::Outer => "outer",
            RegionKind::Shifted => "shifted",
            RegionKind::Throughput => "throughput",
            RegionKind::InnerTxrx => "inner_txrx",
            RegionKind::InnerTx => "inner_tx",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    #[serde(default)]
    pub kind: Option<RegionKind>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub n: Option<usize>,
}

/// A validated scenario with its arrival model and per-user policies built.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub source: String,
    pub scenario: Scenario,
    pub model: ArrivalModel,
    pub policies: Vec<Policy>,
}

impl Loaded {
    pub fn horizons(&self) -> Vec<usize> {
        if self.scenario.horizons.is_empty() {
            vec![DEFAULT_HORIZON]
        } else {
            self.scenario.horizons.clone()
        }
    }

    pub fn first_horizon(&self) -> usize {
        self.horizons()[0]
    }
}

pub fn parse(text: &str, source: &str) -> Result<Scenario> {
    let value: Value =
        serde_json::from_str(text).with_context(|| format!("{source}: not valid JSON"))?;
    if let Some(arrivals) = value.get("arrivals") {
        check_arrival_payload(arrivals).map_err(|(path, msg)| {
            anyhow::anyhow!("{source}: invalid scenario at `arrivals.{path}`: {msg}")
        })?;
    }
    serde_path_to_error::deserialize(&value).map_err(|e| {
        let path = e.path().to_string();
        anyhow::anyhow!("{source}: invalid scenario at `{path}`: {}", e.into_inner())
    })
}

/// Tagged enums hide the location of errors inside their payload, so the
/// `pmf` field is decoded on its own first.
fn check_arrival_payload(arrivals: &Value) -> std::result::Result<(), (String, String)> {
    fn probe<T: serde::de::DeserializeOwned>(
        v: &Value,
    ) -> std::result::Result<(), (String, String)> {
        serde_path_to_error::deserialize::<_, T>(v)
            .map(drop)
            .map_err(|e| (format!("pmf.{}", e.path()), e.into_inner().to_string()))
    }
    let Some(pmf) = arrivals.get("pmf") else {
        return Ok(());
    };
    match arrivals.get("type").and_then(Value::as_str) {
        Some("product") => probe::<Vec<Pmf>>(pmf),
        Some("correlated") => probe::<Pmf>(pmf),
        Some("joint") => probe::<Vec<JointEntry>>(pmf),
        _ => Ok(()),
    }
    .map_err(|(path, msg)| (path.replace("pmf.[", "pmf["), msg))
}

pub fn load(path: Option<&Path>) -> Result<Loaded> {
    let (text, source) = match path {
        Some(p) => (
            fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            p.display().to_string(),
        ),
        None => (DEFAULT_SCENARIO.to_string(), "<default>".to_string()),
    };
    let scenario = parse(&text, &source)?;
    build(scenario, source)
}

pub fn build(scenario: Scenario, source: String) -> Result<Loaded> {
    let k = scenario.users;
    if k == 0 {
        bail!("{source}: `users` must be at least 1");
    }
    if scenario.caps.len() != k {
        bail!(
            "{source}: `caps` has {} entries but `users` is {k}",
            scenario.caps.len()
        );
    }
    if scenario.horizons.contains(&0) {
        bail!("{source}: `horizons` entries must be at least 1");
    }
    if scenario.estimator.paths < 2 {
        bail!("{source}: `estimator.paths` must be at least 2");
    }
    let model = scenario
        .arrivals
        .build(k, &scenario.caps)
        .with_context(|| format!("{source}: `arrivals`"))?;
    let specs: Vec<PolicySpec> = match (&scenario.policy, &scenario.policies) {
        (Some(_), Some(_)) => bail!("{source}: give either `policy` or `policies`, not both"),
        (Some(p), None) => vec![p.clone(); k],
        (None, Some(ps)) => {
            if ps.len() != k {
                bail!(
                    "{source}: `policies` has {} entries but `users` is {k}",
                    ps.len()
                );
            }
            ps.clone()
        }
        (None, None) => bail!("{source}: missing `policy` or `policies`"),
    };
    let policies = specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.resolve(&model, i)
                .with_context(|| format!("{source}: policy for user {}", i + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Loaded {
        source,
        scenario,
        model,
        policies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_load() {
        for text in [
            DEFAULT_SCENARIO,
            include_str!("../scenarios/bernoulli_k1.json"),
            include_str!("../scenarios/correlated_k3.json"),
        ] {
            let s = parse(text, "t").unwrap();
            let l = build(s, "t".into()).unwrap();
            assert_eq!(l.policies.len(), l.model.users());
        }
    }

    #[test]
    fn error_names_the_field() {
        let text = r#"{"users": 1, "caps": [1.0], "arrivals": {"type": "product", "pmf": [[[0, "x"]]]}, "policy": {"variant": "greedy"}}"#;
        let msg = parse(text, "t").unwrap_err().to_string();
        assert!(msg.contains("arrivals.pmf[0][0]"), "{msg}");
    }

    #[test]
    fn user_count_is_cross_checked() {
        let text = r#"{"users": 2, "caps": [1.0], "arrivals": {"type": "correlated", "pmf": [[1, 1]]}, "policy": {"variant": "greedy"}}"#;
        let s = parse(text, "t").unwrap();
        assert!(build(s, "t".into()).unwrap_err().to_string().contains("caps"));

        let text = r#"{"users": 2, "caps": [1.0, 1.0], "arrivals": {"type": "correlated", "pmf": [[1, 1]]}, "policies": [{"variant": "greedy"}]}"#;
        let s = parse(text, "t").unwrap();
        assert!(build(s, "t".into()).unwrap_err().to_string().contains("policies"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"users": 1, "caps": [1.0], "arrivals": {"type": "product", "pmf": [[[1, 1]]]}, "policy": {"variant": "greedy"}, "horizon": 3}"#;
        assert!(parse(text, "t").is_err());
    }
}
