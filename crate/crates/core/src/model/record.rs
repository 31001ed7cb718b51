use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DialectTag, ModelError};

/// Original question plus at most four rewrites.
pub const MAX_FAMILY_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Unassigned,
}

/// One question/SQL pair. Rewrites of a question share its `base_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionRecord {
    pub id: String,
    pub base_id: String,
    pub topic: String,
    pub question: String,
    pub rewrite_index: u8,
    pub sql: String,
    pub dialect: DialectTag,
    pub schema_id: String,
    pub split: Split,
}

impl QuestionRecord {
    pub fn is_original(&self) -> bool {
        self.rewrite_index == 0
    }
}

/// Checks the family invariants: originals are their own base, family size is
/// bounded, and members agree on sql, topic, dialect, schema and split.
pub fn validate_families(records: &[QuestionRecord]) -> Result<(), ModelError> {
    let mut families: BTreeMap<&str, Vec<&QuestionRecord>> = BTreeMap::new();
    for r in records {
        if (r.rewrite_index == 0) != (r.id == r.base_id) {
            return Err(ModelError::FamilyViolation(format!(
                "record {} has rewrite_index {} but base_id {}",
                r.id, r.rewrite_index, r.base_id
            )));
        }
        if r.rewrite_index as usize >= MAX_FAMILY_SIZE {
            return Err(ModelError::FamilyViolation(format!(
                "record {} has rewrite_index {}",
                r.id, r.rewrite_index
            )));
        }
        families.entry(&r.base_id).or_default().push(r);
    }
    for (base, members) in families {
        if members.len() > MAX_FAMILY_SIZE {
            return Err(ModelError::FamilyViolation(format!(
                "family {base} has {} members",
                members.len()
            )));
        }
        let first = members[0];
        let consistent = members.iter().all(|m| {
            m.sql == first.sql
                && m.topic == first.topic
                && m.dialect == first.dialect
                && m.schema_id == first.schema_id
                && m.split == first.split
        });
        if !consistent {
            return Err(ModelError::FamilyViolation(format!(
                "family {base} members disagree on sql/topic/dialect/schema/split"
            )));
        }
    }
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<QuestionRecord>, ModelError> {
    let file = File::open(path).map_err(|e| ModelError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ModelError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| ModelError::Json {
            context: format!("{}:{}", path.display(), i + 1),
            source: e,
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Writes one JSON object per line, in the given order.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), ModelError> {
    let file = File::create(path).map_err(|e| ModelError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| ModelError::Json {
            context: path.display().to_string(),
            source: e,
        })?;
        writeln!(w, "{line}").map_err(|e| ModelError::io(path, e))?;
    }
    w.flush().map_err(|e| ModelError::io(path, e))
}
