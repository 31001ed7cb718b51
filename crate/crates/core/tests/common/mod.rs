#![allow(dead_code)]

//! Toy shop schema and a deterministic stand-in model shared by the
//! integration tests. The recorded cassette under `tests/data` was produced
//! from `toy_responder`; run the ignored `regenerate_toy_cassette` test after
//! changing a prompt template.

pub mod tables;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use t2sql_core::datagen::PipelineConfig;
use t2sql_core::llm::{ChatRequest, ChatResponse, ScriptedTransport};
use t2sql_core::model::{DialectTag, SchemaDescriptor};
use t2sql_core::runner::{ConnectionPool, RetailFixture, SqliteDriver};

pub const TOY_TOPICS: [&str; 2] = ["Shop performance", "Sales over time"];

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn toy_cassette_path() -> PathBuf {
    data_dir().join("toy_cassette.json")
}

pub fn toy_pool() -> ConnectionPool {
    let fixture = RetailFixture::from_dirs("toy", &[&data_dir().join("toy")]).expect("toy fixture");
    let pool = ConnectionPool::open(
        Arc::new(SqliteDriver),
        "sqlite::memory:",
        2,
        Duration::from_secs(10),
    )
    .expect("pool");
    pool.seed(&fixture).expect("seed");
    pool
}

pub fn toy_schema(pool: &ConnectionPool) -> SchemaDescriptor {
    SchemaDescriptor::new(
        "toy",
        pool.describe_schema().expect("schema"),
        DialectTag::Generic,
    )
    .expect("valid schema")
}

pub fn toy_config() -> PipelineConfig {
    PipelineConfig {
        seed_topics: TOY_TOPICS.map(String::from).to_vec(),
        target_topic_count: 2,
        extra_topic_count: 0,
        extra_topics_for: vec![],
        max_questions_per_topic: 3,
        concurrency: 2,
        model: "toy-model".into(),
        ..PipelineConfig::default()
    }
}

struct ToyQuestion {
    question: &'static str,
    sql: &'static str,
    /// Reply to every repair request.
    heal: &'static str,
    judge: &'static str,
    rewrites: &'static [&'static str],
}

const QUESTIONS: [ToyQuestion; 6] = [
    ToyQuestion {
        question: "What is the total sales amount per shop?",
        sql: "WITH totals AS (SELECT shop_id, SUM(amount) AS total FROM sales GROUP BY shop_id)\nSELECT s.shop_name, t.total FROM totals t JOIN shops s ON s.shop_id = t.shop_id ORDER BY s.shop_name",
        heal: "",
        judge: "KEEP",
        rewrites: &[
            "How much did each shop sell in total?",
            "For every shop, what is the sum of its sale amounts?",
            "Give the overall sales amount of each shop.",
            "List shops with their total sales.",
        ],
    },
    ToyQuestion {
        question: "Which city has the most shops?",
        sql: "SELECT city, COUNT(*) AS shop_count FROM shop GROUP BY city ORDER BY shop_count DESC LIMIT 1",
        heal: "WITH per_city AS (SELECT city, COUNT(*) AS shop_count FROM shops GROUP BY city)\nSELECT city, shop_count FROM per_city ORDER BY shop_count DESC LIMIT 1",
        judge: "KEEP",
        rewrites: &[
            "In which city are the most shops located?",
            "which city has the most shops?",
            "What city hosts the largest number of shops?",
        ],
    },
    ToyQuestion {
        question: "Which sales exceeded 1000 in a single transaction?",
        sql: "SELECT sale_id, amount FROM sales WHERE amount > 1000",
        heal: "WITH big AS (SELECT sale_id, amount FROM sales WHERE amount > 1000)\nSELECT sale_id, amount FROM big",
        judge: "KEEP",
        rewrites: &[],
    },
    ToyQuestion {
        question: "How many sales happened in each month?",
        sql: "WITH months AS (SELECT strftime('%Y-%m', sold_on) AS month FROM sales)\nSELECT month, COUNT(*) AS sales_count FROM months GROUP BY month ORDER BY month",
        heal: "",
        judge: "KEEP",
        rewrites: &[
            "What is the monthly number of sales?",
            "Count the sales per calendar month.",
            "For each month, how many sales were made?",
            "Show the number of sales by month.",
        ],
    },
    ToyQuestion {
        question: "What was the date of the first sale?",
        sql: "SELECT MIN(sold_on) AS first_sale FROM sales",
        heal: "",
        judge: "DROP: a single date cannot be checked against the question",
        rewrites: &[],
    },
    ToyQuestion {
        question: "What is the average sale amount?",
        sql: "SELECT AVG(amount) AS average_amount FROM sales",
        heal: "",
        judge: "I think this looks fine",
        rewrites: &["On average, how large is a sale?"],
    },
];

fn field<'a>(prompt: &'a str, prefix: &str) -> &'a str {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix(prefix))
        .unwrap_or_default()
        .trim()
}

fn lookup(question: &str) -> &'static ToyQuestion {
    QUESTIONS
        .iter()
        .find(|q| q.question == question)
        .unwrap_or_else(|| panic!("unknown toy question {question:?}"))
}

fn fenced(sql: &str) -> String {
    format!("```sql\n{sql}\n```")
}

/// A stand-in model that answers every pipeline prompt for the toy schema.
pub fn toy_responder() -> ScriptedTransport {
    let judged_average = AtomicUsize::new(0);
    ScriptedTransport::from_fn(move |req: &ChatRequest| {
        let prompt = &req.messages.last().expect("user message").content;
        let reply = if prompt.starts_with("Business theme:") {
            let topic = field(prompt, "Business theme:");
            let (from, to) = if topic == TOY_TOPICS[0] { (0, 3) } else { (3, 6) };
            let mut lines: Vec<String> = QUESTIONS[from..to]
                .iter()
                .enumerate()
                .map(|(i, q)| format!("{}. {}", i + 1, q.question))
                .collect();
            lines.push("STOP".into());
            lines.join("\n")
        } else if prompt.starts_with("Write a ") {
            fenced(lookup(field(prompt, "Question:")).sql)
        } else if prompt.contains("did not produce a usable result") {
            fenced(lookup(field(prompt, "Question:")).heal)
        } else if prompt.contains("returned the following result") {
            let q = lookup(field(prompt, "Question:"));
            if q.judge == "I think this looks fine" && judged_average.fetch_add(1, Ordering::SeqCst) > 0 {
                "KEEP".to_string()
            } else {
                q.judge.to_string()
            }
        } else if prompt.starts_with("Reformulate") {
            lookup(field(prompt, "Question:")).rewrites.join("\n")
        } else {
            panic!("unexpected prompt:\n{prompt}")
        };
        Ok(ChatResponse::text(reply))
    })
}

pub fn retail_pool() -> ConnectionPool {
    let pool = ConnectionPool::open(
        Arc::new(SqliteDriver),
        "sqlite::memory:",
        4,
        Duration::from_secs(10),
    )
    .expect("pool");
    pool.seed(&RetailFixture::base()).expect("seed");
    pool
}

pub fn retail_schema(pool: &ConnectionPool) -> SchemaDescriptor {
    SchemaDescriptor::new(
        "retail_base",
        pool.describe_schema().expect("schema"),
        DialectTag::Generic,
    )
    .expect("valid schema")
}

pub fn retail_testset_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/retail/testset.jsonl")
}

/// The test split of the bundled retail test set.
pub fn retail_testset() -> Vec<t2sql_core::model::QuestionRecord> {
    t2sql_core::model::read_records(&retail_testset_path())
        .expect("testset")
        .into_iter()
        .filter(|r| r.split == t2sql_core::model::Split::Test)
        .collect()
}
