use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use t2sql_core::bench::{
    compute_metrics, render_report, run_benchmark, BenchOptions, ChatModel, DropLastColumnModel, EchoModel,
    ReportEntry, SqlGenerator,
};
use t2sql_core::compare::{compare_tables, CompareConfig, CompareMode};
use t2sql_core::datagen::{run_pipeline, split_dataset, RunOptions};
use t2sql_core::model::{read_records, write_jsonl, DialectTag, ResultTable, SchemaDescriptor, Split};
use t2sql_core::runner::{ConnectionPool, QueryExecutor};

use crate::config::{AppConfig, TransportMode};
use crate::{BenchmarkArgs, CompareArgs, GenerateArgs, ModeArg, ModelKind, SplitArgs};

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type CmdResult = Result<ExitCode, Failure>;

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: error.into(),
    }
}

fn failed(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        error: error.into(),
    }
}

const BUILTIN_TEMPLATES: [&str; 8] = [
    "system",
    "topics",
    "questions",
    "sql",
    "heal",
    "judge",
    "paraphrase",
    "text_to_sql",
];

/// Manifest timestamp: fixed under replay so reruns are byte-identical.
fn created_at(mode: TransportMode) -> Option<String> {
    if mode != TransportMode::Replay {
        return None;
    }
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .unwrap_or(0);
    let at = chrono::DateTime::from_timestamp(secs, 0).unwrap_or_default();
    Some(at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

fn schema_for(pool: &ConnectionPool, id: String, dialect: DialectTag) -> anyhow::Result<SchemaDescriptor> {
    let tables = pool.describe_schema().context("cannot read fixture schema")?;
    Ok(SchemaDescriptor::new(id, tables, dialect)?)
}

pub fn generate(args: GenerateArgs) -> CmdResult {
    let mut config = AppConfig::load(&args.config).map_err(usage)?;
    if let Some(out) = args.out {
        config.paths.out_dir = out;
    }
    if let Some(cassette) = args.cassette {
        config.paths.cassette = Some(cassette);
    }
    if let Some(seed) = args.seed {
        config.pipeline.rng_seed = seed;
    }
    let prompts = config.prompts().map_err(usage)?;
    for name in BUILTIN_TEMPLATES {
        prompts
            .placeholders(name)
            .with_context(|| format!("prompt template {name}"))
            .map_err(usage)?;
    }
    if args.dry_run {
        println!("configuration ok: {}", args.config.display());
        println!("config hash: {}", config.pipeline.hash());
        return Ok(ExitCode::SUCCESS);
    }

    let client = config.client().map_err(usage)?;
    let pool = config.open_pool().map_err(failed)?;
    let schema = schema_for(&pool, config.fixture_id(), config.pipeline.dialects[0]).map_err(failed)?;
    let options = RunOptions {
        out_dir: config.paths.out_dir.clone(),
        created_at: created_at(config.llm.mode),
        cassette: config.paths.cassette.as_ref().map(|p| p.display().to_string()),
    };
    let manifest_path = options.out_dir.join("manifest.json");
    let manifest = run_pipeline(&config.pipeline, &schema, &pool, &client, &prompts, &options)
        .with_context(|| {
            format!(
                "pipeline failed; partial outputs in {}",
                options.out_dir.display()
            )
        })
        .map_err(failed)?;
    let s = &manifest.stats;
    println!("manifest: {}", manifest_path.display());
    println!("topics:              {}", s.topics_generated);
    println!("questions:           {}", s.questions_generated);
    println!("sql generated:       {}", s.sql_generated);
    println!("healed:              {}", s.healed);
    println!("dropped (unhealed):  {}", s.dropped_unhealed);
    println!("dropped (filter):    {}", s.dropped_by_filter);
    println!("unique pairs:        {}", s.unique_pairs);
    println!("rewrites:            {}", s.rewrites_generated);
    println!("total pairs:         {}", s.total_pairs);
    println!("train / test:        {} / {}", s.train_count, s.test_count);
    Ok(ExitCode::SUCCESS)
}

fn dialect_label(d: DialectTag) -> &'static str {
    match d {
        DialectTag::Snowflake => "Snowflake",
        DialectTag::GoogleSql => "GoogleSQL",
        DialectTag::Generic => "SQLite",
    }
}

pub fn benchmark(args: BenchmarkArgs) -> CmdResult {
    let mut config = match &args.config {
        Some(path) => AppConfig::load(path).map_err(usage)?,
        None => AppConfig::default(),
    };
    let testset: Vec<_> = read_records(&args.dataset)
        .with_context(|| format!("cannot read dataset {}", args.dataset.display()))
        .map_err(usage)?
        .into_iter()
        .filter(|r| r.split == Split::Test)
        .collect();
    if testset.is_empty() {
        return Err(usage(anyhow!(
            "dataset {} has no test records",
            args.dataset.display()
        )));
    }
    if args.config.is_none() {
        if let Some(r) = testset.first() {
            config.paths.fixture = r.schema_id.clone();
        }
    }

    let pool = Arc::new(config.open_pool().map_err(failed)?);
    let schema = schema_for(&pool, config.fixture_id(), testset[0].dialect).map_err(failed)?;
    let model: Box<dyn SqlGenerator> = match args.model {
        ModelKind::Echo => Box::new(EchoModel),
        ModelKind::DropLastColumn => {
            Box::new(DropLastColumnModel::new(pool.clone() as Arc<dyn QueryExecutor>))
        }
        ModelKind::Llm => {
            let client = config.client().map_err(usage)?;
            let prompts = config.prompts().map_err(usage)?;
            Box::new(ChatModel::new(
                config.pipeline.model.clone(),
                client,
                prompts,
                config.pipeline.model.clone(),
                config.pipeline.max_tokens,
            ))
        }
    };
    let options = BenchOptions {
        compare: config.compare,
        concurrency: config.executor.pool_size,
    };
    let run = run_benchmark(&testset, model.as_ref(), &schema, pool.as_ref(), &options).map_err(failed)?;
    for ex in &run.excluded {
        eprintln!("warning: excluded {}: {}", ex.record_id, ex.reason);
    }
    if run.records.is_empty() {
        return Err(failed(anyhow!("every test record was excluded")));
    }

    let label = args.label.clone().unwrap_or_else(|| model.name().to_string());
    let mut entries = Vec::new();
    for (dialect, records) in run.by_dialect() {
        entries.push(ReportEntry {
            model: format!("{label} ({})", dialect_label(dialect)),
            metrics: compute_metrics(&records).map_err(failed)?,
        });
    }
    let report = render_report(&entries, args.format).map_err(failed)?;
    print!("{report}");

    let audit = args
        .audit
        .unwrap_or_else(|| config.paths.out_dir.join("benchmark_audit.jsonl"));
    write_parent(&audit).map_err(failed)?;
    write_jsonl(&audit, &run.records).map_err(failed)?;
    if let Some(path) = &args.report {
        write_parent(path).map_err(failed)?;
        std::fs::write(path, &report)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(failed)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn write_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(())
}

fn load_table(path: &PathBuf) -> anyhow::Result<ResultTable> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let table = if is_csv {
        ResultTable::from_csv_reader(file)?
    } else {
        serde_json::from_reader(std::io::BufReader::new(file))?
    };
    Ok(table)
}

pub fn compare(args: CompareArgs) -> CmdResult {
    let truth = load_table(&args.truth).map_err(usage)?;
    let candidate = load_table(&args.candidate).map_err(usage)?;
    let cfg = CompareConfig {
        numeric_tolerance: args
            .tolerance
            .unwrap_or(CompareConfig::default().numeric_tolerance),
        mode: match args.mode {
            ModeArg::Strict => CompareMode::StrictRows,
            ModeArg::Multiset => CompareMode::ColumnMultiset,
        },
    };
    cfg.validate().map_err(usage)?;
    let verdict = compare_tables(&truth, &candidate, &cfg);
    println!("{}", serde_json::to_string(&verdict).expect("verdict serializes"));
    Ok(if verdict.is_correct() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

pub fn split(args: SplitArgs) -> CmdResult {
    let config = match &args.config {
        Some(path) => AppConfig::load(path).map_err(usage)?,
        None => AppConfig::default(),
    };
    let ratio = args.ratio.unwrap_or(config.pipeline.split_ratio);
    let seed = args.seed.unwrap_or(config.pipeline.rng_seed);
    let mut records = read_records(&args.dataset)
        .with_context(|| format!("cannot read dataset {}", args.dataset.display()))
        .map_err(usage)?;
    for r in &mut records {
        r.split = Split::Unassigned;
    }
    let records = split_dataset(records, ratio, seed).map_err(usage)?;
    write_parent(&args.out).map_err(failed)?;
    write_jsonl(&args.out, &records).map_err(failed)?;
    let families = |split| {
        records
            .iter()
            .filter(|r| r.split == split && r.is_original())
            .count()
    };
    println!(
        "train: {} families, test: {} families, {} records written to {}",
        families(Split::Train),
        families(Split::Test),
        records.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}
