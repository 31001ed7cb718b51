use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use serde::Deserialize;
use t2sql_core::compare::CompareConfig;
use t2sql_core::datagen::PipelineConfig;
use t2sql_core::llm::{
    Cassette, ClientLimits, LiveTransport, LlmClient, PromptLibrary, RecordingTransport, ReplayTransport,
    Transport, API_KEY_ENV, BASE_URL_ENV,
};
use t2sql_core::runner::{ConnectionPool, RetailFixture, SqliteDriver};

/// Everything a run needs, read from one TOML file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppConfig {
    pub pipeline: PipelineConfig,
    pub compare: CompareConfig,
    pub executor: ExecutorConfig,
    pub llm: LlmConfig,
    pub paths: PathsConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExecutorConfig {
    pub url: String,
    pub timeout_secs: f64,
    pub pool_size: usize,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            url: "sqlite::memory:".into(),
            timeout_secs: 60.0,
            pool_size: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportMode {
    /// Serve responses from the cassette; fail on anything unrecorded.
    #[default]
    Replay,
    /// Call the live endpoint and append every exchange to the cassette.
    Record,
    Live,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmConfig {
    pub mode: TransportMode,
    pub base_url_env: String,
    pub api_key_env: String,
    pub max_in_flight: usize,
    pub requests_per_minute: Option<u32>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            mode: TransportMode::Replay,
            base_url_env: BASE_URL_ENV.into(),
            api_key_env: API_KEY_ENV.into(),
            max_in_flight: 4,
            requests_per_minute: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub out_dir: PathBuf,
    pub cassette: Option<PathBuf>,
    /// A bundled fixture name (`retail_base`, `retail_extended`) or a directory of SQL files.
    pub fixture: String,
    /// Extra directories applied after `fixture`, in order.
    pub fixture_dirs: Vec<PathBuf>,
    /// Directory of `<name>.txt` files replacing built-in prompt templates.
    pub templates: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            cassette: None,
            fixture: "retail_base".into(),
            fixture_dirs: Vec::new(),
            templates: None,
        }
    }
}

impl AppConfig {
    /// Reads and validates `path`; relative paths inside are resolved against its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut config: AppConfig =
            toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        config
            .validate()
            .with_context(|| format!("invalid config file {}", path.display()))?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.paths.out_dir);
        if let Some(p) = self.paths.cassette.as_mut() {
            join(p);
        }
        if let Some(p) = self.paths.templates.as_mut() {
            join(p);
        }
        self.paths.fixture_dirs.iter_mut().for_each(join);
        if RetailFixture::bundled(&self.paths.fixture).is_none() {
            self.paths.fixture = base.join(&self.paths.fixture).to_string_lossy().into_owned();
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.pipeline.validate()?;
        self.compare.validate()?;
        if !(self.executor.timeout_secs > 0.0 && self.executor.timeout_secs.is_finite()) {
            bail!("executor.timeout_secs must be positive");
        }
        if self.executor.pool_size == 0 {
            bail!("executor.pool_size must be at least 1");
        }
        if self.llm.max_in_flight == 0 {
            bail!("llm.max_in_flight must be at least 1");
        }
        Ok(())
    }

    pub fn prompts(&self) -> anyhow::Result<PromptLibrary> {
        let lib = PromptLibrary::builtin();
        Ok(match &self.paths.templates {
            Some(dir) => lib.with_overrides(dir)?,
            None => lib,
        })
    }

    pub fn fixture(&self) -> anyhow::Result<RetailFixture> {
        let name = &self.paths.fixture;
        let fixture = match RetailFixture::bundled(name) {
            Some(f) => f,
            None => RetailFixture::from_dirs(self.fixture_id(), &[Path::new(name)])
                .with_context(|| format!("cannot load fixture {name}"))?,
        };
        let extra: Vec<&Path> = self.paths.fixture_dirs.iter().map(PathBuf::as_path).collect();
        Ok(fixture.with_dirs(&extra)?)
    }

    /// Opens the executor pool and loads the fixture into it.
    pub fn open_pool(&self) -> anyhow::Result<ConnectionPool> {
        let fixture = self.fixture()?;
        let pool = ConnectionPool::open(
            Arc::new(SqliteDriver),
            &self.executor.url,
            self.executor.pool_size,
            Duration::from_secs_f64(self.executor.timeout_secs),
        )
        .with_context(|| format!("cannot open {}", self.executor.url))?;
        pool.seed(&fixture)
            .with_context(|| format!("cannot seed fixture {}", fixture.id()))?;
        Ok(pool)
    }

    pub fn fixture_id(&self) -> String {
        fixture_id(&self.paths.fixture)
    }

    /// Builds the model client for the configured transport mode.
    pub fn client(&self) -> anyhow::Result<LlmClient> {
        let live = || LiveTransport::from_env_vars(&self.llm.base_url_env, &self.llm.api_key_env);
        let transport: Box<dyn Transport> = match self.llm.mode {
            TransportMode::Replay => {
                let path = self
                    .paths
                    .cassette
                    .as_ref()
                    .context("paths.cassette is required in replay mode")?;
                Box::new(ReplayTransport::new(Cassette::load(path)?))
            }
            TransportMode::Record => Box::new(RecordingTransport::new(
                Box::new(live()?),
                self.paths.cassette.clone(),
            )),
            TransportMode::Live => Box::new(live()?),
        };
        Ok(LlmClient::with_limits(
            transport,
            ClientLimits {
                max_in_flight: self.llm.max_in_flight,
                requests_per_minute: self.llm.requests_per_minute,
            },
        ))
    }
}

fn fixture_id(name: &str) -> String {
    match RetailFixture::bundled(name) {
        Some(f) => f.id().to_string(),
        None => Path::new(name)
            .file_name()
            .map_or_else(|| "custom".to_string(), |n| n.to_string_lossy().into_owned()),
    }
}
