use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bifbm_core::harness::SweepConfig;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Records,
    Csv,
    Both,
}

impl Format {
    pub fn records(self) -> bool {
        matches!(self, Format::Records | Format::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

impl FromStr for Format {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "records" => Ok(Format::Records),
            "csv" => Ok(Format::Csv),
            "both" => Ok(Format::Both),
            _ => Err(ConfigError(format!("`output.format`: unknown format `{s}` (records, csv, both)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: Format,
    /// Worker threads; unset means one per available core.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("results"),
            format: Format::Both,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementConfig {
    pub enabled: bool,
    /// Grid sizes; each must divide the largest.
    pub points: Vec<usize>,
    pub paths: usize,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            enabled: false,
            points: vec![128, 256, 512, 1024],
            paths: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    pub enabled: bool,
    /// Paths written per process and `(H, K)` pair.
    pub rows: usize,
}

impl Default for ExportConfig {
    fn default() -> Self {
        ExportConfig {
            enabled: false,
            rows: 1000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestHooks {
    pub swap_comparisons: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub refinement: RefinementConfig,
    #[serde(default)]
    pub export: ExportConfig,
    #[serde(default)]
    pub test_hooks: TestHooks,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
            refinement: RefinementConfig::default(),
            export: ExportConfig::default(),
            test_hooks: TestHooks::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The sweep as the harness sees it, with test hooks applied.
    pub fn sweep(&self) -> SweepConfig {
        SweepConfig {
            swap_comparisons: self.test_hooks.swap_comparisons,
            ..self.sweep.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError(format!(
                "`schema_version`: {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.sweep.validate().map_err(|e| ConfigError(e.to_string()))?;
        if self.output.workers == Some(0) {
            return Err(ConfigError("`output.workers`: must be >= 1".into()));
        }
        if self.refinement.enabled {
            let r = &self.refinement;
            let finest = r.points.iter().copied().max().unwrap_or(0);
            if finest == 0 || r.points.iter().any(|&n| n == 0 || finest % n != 0) {
                return Err(ConfigError(format!(
                    "`refinement.points`: {:?} must be positive divisors of the largest entry",
                    r.points
                )));
            }
            if r.paths < 2 {
                return Err(ConfigError("`refinement.paths`: must be >= 2".into()));
            }
        }
        if self.export.enabled && self.export.rows == 0 {
            return Err(ConfigError("`export.rows`: must be >= 1".into()));
        }
        Ok(())
    }

    pub fn workers(&self) -> usize {
        self.output
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    /// The part of the configuration that determines the results, echoed
    /// into the report. Output location and worker count are left out so
    /// reports compare byte for byte across them.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::json!({
            "schema_version": self.schema_version,
            "sweep": self.sweep,
            "refinement": self.refinement,
            "export": self.export,
            "test_hooks": self.test_hooks,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_uses_defaults() {
        let cfg = RunConfig::from_toml("schema_version = 1\n").unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn bad_values_name_the_field() {
        let cfg = RunConfig::from_toml("schema_version = 1\n[sweep]\nhurst = [1.5]\n").unwrap();
        let msg = cfg.validate().unwrap_err().0;
        assert!(msg.contains("hurst"), "{msg}");

        let err = RunConfig::from_toml("schema_version = 1\n[sweep]\nhurts = [0.5]\n").unwrap_err();
        assert!(err.0.contains("hurts"), "{err}");

        let cfg = RunConfig::from_toml("schema_version = 2\n").unwrap();
        assert!(cfg.validate().unwrap_err().0.contains("schema_version"));

        assert!(RunConfig::from_toml("[sweep]\n").is_err());
    }

    #[test]
    fn nested_sections_parse() {
        let text = r#"
schema_version = 1
[sweep]
hurst = [0.5]
k = [0.5]
checks = ["sup_sandwich", "wills_exponential"]
[sweep.drift]
drifts = [{ coef = 1.0, exponent = 1.0 }]
transforms = [{ kind = "hinge", level = 0.0 }]
[output]
format = "csv"
workers = 2
[test_hooks]
swap_comparisons = true
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.output.format, Format::Csv);
        assert_eq!(cfg.sweep.drift.drifts.len(), 1);
        assert!(cfg.sweep().swap_comparisons);
        assert!(!cfg.sweep.swap_comparisons);
    }
}
