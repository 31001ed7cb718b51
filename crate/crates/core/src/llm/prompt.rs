use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::LlmError;

macro_rules! template {
    ($name:literal) => {
        ($name, include_str!(concat!("../../templates/", $name, ".txt")))
    };
}

const BUILTIN: [(&str, &str); 8] = [
    template!("system"),
    template!("topics"),
    template!("questions"),
    template!("sql"),
    template!("heal"),
    template!("judge"),
    template!("paraphrase"),
    template!("text_to_sql"),
];

/// Named prompt templates with `{placeholder}` slots.
///
/// `{{` and `}}` produce literal braces. Rendering fails on any placeholder
/// without a value.
#[derive(Debug, Clone)]
pub struct PromptLibrary {
    templates: BTreeMap<String, String>,
}

impl Default for PromptLibrary {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptLibrary {
    pub fn builtin() -> Self {
        Self {
            templates: BUILTIN
                .iter()
                .map(|(n, t)| (n.to_string(), t.to_string()))
                .collect(),
        }
    }

    /// Replaces built-in templates with any `<name>.txt` found in `dir`.
    pub fn with_overrides(mut self, dir: &Path) -> Result<Self, LlmError> {
        let entries = std::fs::read_dir(dir).map_err(|e| {
            LlmError::Config(format!("cannot read template directory {}: {e}", dir.display()))
        })?;
        for entry in entries.filter_map(Result::ok) {
            let path = entry.path();
            if path.extension().is_some_and(|x| x == "txt") {
                let name = path
                    .file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned();
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| LlmError::Config(format!("cannot read {}: {e}", path.display())))?;
                parse(&text)?;
                self.templates.insert(name, text);
            }
        }
        Ok(self)
    }

    pub fn insert(&mut self, name: impl Into<String>, text: impl Into<String>) {
        self.templates.insert(name.into(), text.into());
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn placeholders(&self, name: &str) -> Result<BTreeSet<String>, LlmError> {
        let text = self
            .templates
            .get(name)
            .ok_or_else(|| LlmError::UnknownTemplate(name.to_string()))?;
        Ok(parse(text)?
            .into_iter()
            .filter_map(|p| match p {
                Piece::Slot(s) => Some(s.to_string()),
                Piece::Literal(_) => None,
            })
            .collect())
    }

    pub fn render(&self, name: &str, vars: &BTreeMap<&str, String>) -> Result<String, LlmError> {
        let text = self
            .templates
            .get(name)
            .ok_or_else(|| LlmError::UnknownTemplate(name.to_string()))?;
        render_template(text, vars)
    }
}

enum Piece<'a> {
    Literal(&'a str),
    Slot(&'a str),
}

fn parse(text: &str) -> Result<Vec<Piece<'_>>, LlmError> {
    let mut pieces = Vec::new();
    let mut rest = text;
    while let Some(pos) = rest.find(['{', '}']) {
        if pos > 0 {
            pieces.push(Piece::Literal(&rest[..pos]));
        }
        let tail = &rest[pos..];
        if let Some(after) = tail.strip_prefix("{{") {
            pieces.push(Piece::Literal("{"));
            rest = after;
        } else if let Some(after) = tail.strip_prefix("}}") {
            pieces.push(Piece::Literal("}"));
            rest = after;
        } else if tail.starts_with('{') {
            let end = tail
                .find('}')
                .ok_or_else(|| LlmError::Template("unclosed '{'".into()))?;
            let name = &tail[1..end];
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(LlmError::Template(format!("bad placeholder {{{name}}}")));
            }
            pieces.push(Piece::Slot(name));
            rest = &tail[end + 1..];
        } else {
            return Err(LlmError::Template("unmatched '}'".into()));
        }
    }
    if !rest.is_empty() {
        pieces.push(Piece::Literal(rest));
    }
    Ok(pieces)
}

/// Substitutes every `{name}` in `text`.
pub fn render_template(text: &str, vars: &BTreeMap<&str, String>) -> Result<String, LlmError> {
    let mut out = String::with_capacity(text.len());
    for piece in parse(text)? {
        match piece {
            Piece::Literal(s) => out.push_str(s),
            Piece::Slot(name) => out.push_str(
                vars.get(name)
                    .ok_or_else(|| LlmError::MissingVariable(name.to_string()))?,
            ),
        }
    }
    Ok(out)
}
