//! Database and model clients chosen by the run configuration.

use std::path::PathBuf;
use std::time::Duration;

use planhint::backend::{BackendError, GenerationBackend, GenerationRequest, HttpChatBackend, ReplayBackend, RetryBackend};
use planhint::catalog_stats::{ingest_snapshot, CatalogSnapshot, SnapshotFileSource, StatisticsSource};
use planhint::dbms_client::{FixtureClient, PsqlConfig};
use planhint::schema::Schema;
use planhint::sim::ToyConfig;
use planhint::{DbmsClient, DbmsError, ExecutionResult, HintSet, KnobVector, PlanTree, PsqlClient, StatValue, ToyDb};

use crate::config::{BackendKind, FixtureSource, Mode, RunConfig};
use crate::error::{CliError, CliResult};
use crate::mock::MockModel;

pub const STORE_FILE: &str = "store.json";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

pub enum AnyClient {
    Toy(Box<ToyDb>),
    Fixture(FixtureClient),
    Live(PsqlClient),
}

impl AnyClient {
    pub fn open(cfg: &RunConfig) -> CliResult<Self> {
        match (cfg.mode, cfg.fixture.source) {
            (Mode::Live, _) => {
                let conninfo = cfg.live.conninfo.clone().ok_or_else(|| CliError::Usage("live mode needs a connection".into()))?;
                let config = PsqlConfig { program: cfg.live.psql.clone(), conninfo, load_hint_plan: cfg.live.load_hint_plan };
                Ok(AnyClient::Live(PsqlClient::new(config)))
            }
            (Mode::Fixture, FixtureSource::Toy) => Ok(AnyClient::Toy(Box::new(ToyDb::new(toy_config(cfg))))),
            (Mode::Fixture, FixtureSource::Store) => {
                let dir = cfg.fixture.path.as_deref().ok_or_else(|| CliError::Usage("fixture.path is required".into()))?;
                Ok(AnyClient::Fixture(FixtureClient::load(&dir.join(STORE_FILE))?))
            }
        }
    }

    pub fn snapshot(&mut self, cfg: &RunConfig) -> CliResult<CatalogSnapshot> {
        Ok(match self {
            AnyClient::Toy(db) => db.snapshot().clone(),
            AnyClient::Fixture(_) => {
                let dir = cfg.fixture.path.as_deref().expect("validated");
                ingest_snapshot(&mut SnapshotFileSource(dir.join(SNAPSHOT_FILE)))?
            }
            AnyClient::Live(c) => ingest_snapshot(c as &mut dyn StatisticsSource)?,
        })
    }

    /// Schema for workload synthesis; only the simulated database has one.
    pub fn schema(&self) -> Option<&Schema> {
        match self {
            AnyClient::Toy(db) => Some(db.schema()),
            _ => None,
        }
    }
}

pub fn toy_config(cfg: &RunConfig) -> ToyConfig {
    ToyConfig { seed: cfg.seed, scale: cfg.fixture.toy_scale }
}

impl DbmsClient for AnyClient {
    type Scalar = f64;

    fn explain(&mut self, sql: &str, knobs: Option<&KnobVector>, hints: Option<&HintSet>) -> Result<PlanTree, DbmsError> {
        match self {
            AnyClient::Toy(c) => c.explain(sql, knobs, hints),
            AnyClient::Fixture(c) => c.explain(sql, knobs, hints),
            AnyClient::Live(c) => c.explain(sql, knobs, hints),
        }
    }

    fn execute(&mut self, sql: &str, hints: Option<&HintSet>, timeout_ms: f64, warmups: u32)
        -> Result<ExecutionResult<f64>, DbmsError> {
        match self {
            AnyClient::Toy(c) => c.execute(sql, hints, timeout_ms, warmups),
            AnyClient::Fixture(c) => c.execute(sql, hints, timeout_ms, warmups),
            AnyClient::Live(c) => c.execute(sql, hints, timeout_ms, warmups),
        }
    }

    fn query_values(&mut self, sql: &str) -> Result<Vec<StatValue>, DbmsError> {
        match self {
            AnyClient::Toy(c) => c.query_values(sql),
            AnyClient::Fixture(c) => c.query_values(sql),
            AnyClient::Live(c) => c.query_values(sql),
        }
    }
}

pub enum AnyBackend {
    Mock(MockModel),
    Http(RetryBackend<HttpChatBackend>),
    Replay { replay: ReplayBackend, path: PathBuf },
}

impl AnyBackend {
    /// Model backend from the configuration. `stream` separates the random
    /// streams of independent uses of the mock model.
    pub fn open(cfg: &RunConfig, schema: Option<&Schema>, stream: u64) -> CliResult<Self> {
        let retrying = |c| RetryBackend::new(HttpChatBackend::new(c), cfg.backend.max_attempts, Duration::from_secs(1));
        Ok(match cfg.backend.kind {
            BackendKind::Mock => {
                AnyBackend::Mock(MockModel::new(cfg.seed, stream, cfg.backend.mock_invalid_rate, schema.cloned()))
            }
            BackendKind::Http => AnyBackend::Http(retrying(cfg.backend.http()?)),
            BackendKind::Replay => {
                let path = cfg.backend.replay_path.clone().expect("validated");
                let mut replay = if path.exists() { ReplayBackend::load(&path)? } else { ReplayBackend::default() };
                if cfg.backend.record {
                    replay.recorder = Some(Box::new(retrying(cfg.backend.http()?)));
                }
                AnyBackend::Replay { replay, path }
            }
        })
    }

    /// Persists recorded generations.
    pub fn finish(&self) -> CliResult<()> {
        if let AnyBackend::Replay { replay, path } = self {
            if replay.recorder.is_some() {
                replay.save(path)?;
            }
        }
        Ok(())
    }
}

impl GenerationBackend for AnyBackend {
    fn generate(&mut self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        match self {
            AnyBackend::Mock(b) => b.generate(req),
            AnyBackend::Http(b) => b.generate(req),
            AnyBackend::Replay { replay, .. } => replay.generate(req),
        }
    }
}
