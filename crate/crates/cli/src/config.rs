//! Run configuration: one TOML file, then `PLANHINT_*` environment
//! variables, then command-line flags.

use std::path::{Path, PathBuf};

use planhint::backend::HttpBackendConfig;
use planhint::candidate_search::SamplingPolicy;
use planhint::dbms_client::{DEFAULT_TIMEOUT_MS, DEFAULT_WARMUPS};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Live,
    #[default]
    Fixture,
}

/// Where fixture mode gets its answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureSource {
    /// The built-in simulated database.
    #[default]
    Toy,
    /// A recorded store directory (`store.json` + `snapshot.json`).
    Store,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureConfig {
    #[serde(default)]
    pub source: FixtureSource,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "one")]
    pub toy_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig { source: FixtureSource::Toy, path: None, toy_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiveConfig {
    #[serde(default)]
    pub conninfo: Option<String>,
    #[serde(default = "psql")]
    pub psql: PathBuf,
    #[serde(default = "yes")]
    pub load_hint_plan: bool,
}

fn psql() -> PathBuf {
    PathBuf::from("psql")
}

fn yes() -> bool {
    true
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig { conninfo: None, psql: psql(), load_hint_plan: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Seeded offline model.
    #[default]
    Mock,
    /// OpenAI-compatible chat-completions endpoint.
    Http,
    /// Recorded generations; `record = true` fills misses from `http`.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    #[serde(default)]
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "http_timeout")]
    pub timeout_s: u64,
    #[serde(default = "retries")]
    pub max_attempts: u32,
    #[serde(default)]
    pub replay_path: Option<PathBuf>,
    #[serde(default)]
    pub record: bool,
    /// Share of mock generations that are deliberately malformed.
    #[serde(default)]
    pub mock_invalid_rate: f64,
}

fn http_timeout() -> u64 {
    120
}

fn retries() -> u32 {
    3
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint: None,
            model: None,
            api_key_env: None,
            timeout_s: http_timeout(),
            max_attempts: retries(),
            replay_path: None,
            record: false,
            mock_invalid_rate: 0.0,
        }
    }
}

impl BackendConfig {
    pub fn http(&self) -> CliResult<HttpBackendConfig> {
        let need = |v: &Option<String>, what: &str| {
            v.clone().ok_or_else(|| CliError::Usage(format!("backend.{what} is required for an HTTP backend")))
        };
        Ok(HttpBackendConfig {
            endpoint: need(&self.endpoint, "endpoint")?,
            model: need(&self.model, "model")?,
            api_key_env: self.api_key_env.clone(),
            timeout_s: self.timeout_s,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "seed")]
    pub seed: u64,
    #[serde(default)]
    pub fixture: FixtureConfig,
    #[serde(default)]
    pub live: LiveConfig,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub sampling: SamplingPolicy,
    /// Arm ids; the five-arm default subset when absent.
    #[serde(default)]
    pub arms: Option<Vec<usize>>,
    #[serde(default = "timeout")]
    pub timeout_ms: f64,
    #[serde(default = "warmups")]
    pub warmups: u32,
    #[serde(default = "out")]
    pub output_dir: PathBuf,
}

fn seed() -> u64 {
    42
}

fn timeout() -> f64 {
    DEFAULT_TIMEOUT_MS
}

fn warmups() -> u32 {
    DEFAULT_WARMUPS
}

fn out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults parse")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> CliResult<()> {
        let bad = |var: &str, v: &str| CliError::Usage(format!("{var}={v} is not valid"));
        if let Some(v) = get("PLANHINT_MODE") {
            self.mode = match v.as_str() {
                "live" => Mode::Live,
                "fixture" => Mode::Fixture,
                _ => return Err(bad("PLANHINT_MODE", &v)),
            };
        }
        if let Some(v) = get("PLANHINT_SEED") {
            self.seed = v.parse().map_err(|_| bad("PLANHINT_SEED", &v))?;
        }
        if let Some(v) = get("PLANHINT_FIXTURE_PATH") {
            self.fixture.source = FixtureSource::Store;
            self.fixture.path = Some(v.into());
        }
        if let Some(v) = get("PLANHINT_PG_CONNINFO") {
            self.live.conninfo = Some(v);
        }
        if let Some(v) = get("PLANHINT_BACKEND") {
            self.backend.kind = match v.as_str() {
                "mock" => BackendKind::Mock,
                "http" => BackendKind::Http,
                "replay" => BackendKind::Replay,
                _ => return Err(bad("PLANHINT_BACKEND", &v)),
            };
        }
        if let Some(v) = get("PLANHINT_BACKEND_ENDPOINT") {
            self.backend.endpoint = Some(v);
        }
        if let Some(v) = get("PLANHINT_BACKEND_MODEL") {
            self.backend.model = Some(v);
        }
        if let Some(v) = get("PLANHINT_OUTPUT_DIR") {
            self.output_dir = v.into();
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        let usage = |m: &str| Err(CliError::Usage(m.to_owned()));
        match self.mode {
            Mode::Live if self.live.conninfo.is_none() => {
                return usage("live mode needs live.conninfo (or PLANHINT_PG_CONNINFO)");
            }
            Mode::Fixture if self.fixture.source == FixtureSource::Store && self.fixture.path.is_none() => {
                return usage("fixture source `store` needs fixture.path (or PLANHINT_FIXTURE_PATH)");
            }
            _ => {}
        }
        if !(self.timeout_ms > 0.0 && self.timeout_ms.is_finite()) {
            return usage("timeout_ms must be positive");
        }
        if !(self.fixture.toy_scale > 0.0) {
            return usage("fixture.toy_scale must be positive");
        }
        if self.sampling.samples == 0 {
            return usage("sampling.samples must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.backend.mock_invalid_rate) {
            return usage("backend.mock_invalid_rate must be within [0, 1]");
        }
        match self.backend.kind {
            BackendKind::Http => {
                self.backend.http()?;
            }
            BackendKind::Replay if self.backend.replay_path.is_none() => {
                return usage("backend kind `replay` needs backend.replay_path");
            }
            BackendKind::Replay if self.backend.record => {
                self.backend.http()?;
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_fixture_toy() {
        let c = RunConfig::default();
        assert_eq!(c.mode, Mode::Fixture);
        assert_eq!(c.fixture.source, FixtureSource::Toy);
        assert_eq!(c.seed, 42);
        assert_eq!(c.timeout_ms, 180_000.0);
        c.validate().unwrap();
    }

    #[test]
    fn env_overrides_file() {
        let mut c: RunConfig = toml::from_str("seed = 1\nmode = \"fixture\"\n").unwrap();
        c.apply_env(|k| match k {
            "PLANHINT_SEED" => Some("9".into()),
            "PLANHINT_FIXTURE_PATH" => Some("fx".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.fixture.source, FixtureSource::Store);
        c.validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_usage_errors() {
        let live: RunConfig = toml::from_str("mode = \"live\"").unwrap();
        assert!(matches!(live.validate(), Err(CliError::Usage(_))));
        let store: RunConfig = toml::from_str("[fixture]\nsource = \"store\"").unwrap();
        assert!(matches!(store.validate(), Err(CliError::Usage(_))));
        let http: RunConfig = toml::from_str("[backend]\nkind = \"http\"").unwrap();
        assert!(matches!(http.validate(), Err(CliError::Usage(_))));
        assert!(toml::from_str::<RunConfig>("colour = 1").is_err());
        let mut c = RunConfig::default();
        assert!(c.apply_env(|k| (k == "PLANHINT_SEED").then(|| "x".into())).is_err());
    }
}
