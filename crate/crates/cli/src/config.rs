use std::fs;
use std::path::{Path, PathBuf};

use cmlab::cm::Params;
use cmlab::field::io::read_field;
use cmlab::minimize::Preset;
use cmlab::verify::AcceptanceConfig;
use cmlab::GridField;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::Failure;

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum InputSpec {
    File {
        file: PathBuf,
    },
    Preset {
        preset: Preset,
        #[serde(default = "default_m")]
        m: usize,
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_half")]
        half: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
}

fn default_m() -> usize {
    2
}
fn default_n() -> usize {
    1
}
fn default_half() -> f64 {
    1.0
}
fn default_samples() -> usize {
    129
}

/// Contents of the `--config` file. Every field is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides of individual `Params` entries.
    pub params: Map<String, Value>,
    pub input: Option<InputSpec>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub depth: Option<usize>,
    pub level: Option<u32>,
    /// Test fields for the first-variation residual of `generate`.
    pub tests: Option<usize>,
    pub acceptance: Option<AcceptanceConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("config {}: {e}", path.display())))
    }

    pub fn input(&self) -> Result<&InputSpec, Failure> {
        self.input
            .as_ref()
            .ok_or_else(|| Failure::Config("no input given (config `input` or --input)".into()))
    }

    pub fn load_field(&self) -> Result<GridField, Failure> {
        match self.input()? {
            InputSpec::File { file } => {
                if !file.exists() {
                    return Err(Failure::Config(format!("input file {} does not exist", file.display())));
                }
                read_field(file).map_err(Failure::from)
            }
            InputSpec::Preset { .. } => Err(Failure::Config(
                "this command reads a field file; run `generate` on a preset first".into(),
            )),
        }
    }

    /// Params for an m→n problem with the config overrides, then the flag overrides, applied.
    pub fn params(&self, m: usize, n: usize, flags: &[(String, String)]) -> Result<Params, Failure> {
        let mut p = Params::new(m, n);
        for (k, v) in &self.params {
            let text = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            p.set(k, &text)?;
        }
        for (k, v) in flags {
            p.set(k, v)?;
        }
        if p.m != m || p.n != n {
            return Err(Failure::Config(format!(
                "params are for m = {}, n = {} but the input is {m} → {n}",
                p.m, p.n
            )));
        }
        Ok(p.validate()?)
    }
}

pub fn parse_param(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_config() {
        let cfg: RunConfig = serde_json::from_str(r#"{"params": {"kappa": 0.07, "k_max": 6}}"#).unwrap();
        let p = cfg.params(2, 1, &[("kappa".into(), "0.08".into())]).unwrap();
        assert_eq!(p.kappa, 0.08);
        assert_eq!(p.k_max, 6);
    }

    #[test]
    fn preset_and_file_inputs_parse() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"input": {"preset": {"kind": "trig", "eps": 0.1, "mode": 2}, "samples": 65}}"#).unwrap();
        assert!(matches!(cfg.input, Some(InputSpec::Preset { samples: 65, m: 2, .. })));
        let cfg: RunConfig = serde_json::from_str(r#"{"input": {"file": "u.json"}}"#).unwrap();
        assert!(matches!(cfg.input, Some(InputSpec::File { .. })));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sead": 3}"#).is_err());
    }

    #[test]
    fn param_flag_syntax() {
        assert_eq!(parse_param("gamma=0.2").unwrap(), ("gamma".into(), "0.2".into()));
        assert!(parse_param("gamma").is_err());
    }
}
