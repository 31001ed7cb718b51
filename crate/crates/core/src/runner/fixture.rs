use std::path::Path;

use super::{Connection, RunnerError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureFile {
    pub name: String,
    pub sql: String,
}

/// DDL plus seed rows, applied file by file in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetailFixture {
    id: String,
    files: Vec<FixtureFile>,
}

macro_rules! bundled {
    ($path:literal) => {
        FixtureFile {
            name: $path.to_string(),
            sql: include_str!(concat!("../../fixtures/", $path)).to_string(),
        }
    };
}

impl RetailFixture {
    /// customers, products, orders, order_lines.
    pub fn base() -> Self {
        Self {
            id: "retail_base".into(),
            files: vec![
                bundled!("retail/base/01_schema.sql"),
                bundled!("retail/base/02_seed.sql"),
            ],
        }
    }

    /// The base tables plus sellers and payments.
    pub fn extended() -> Self {
        let mut fixture = Self::base();
        fixture.id = "retail_extended".into();
        fixture.files.extend([
            bundled!("retail/extended/01_schema.sql"),
            bundled!("retail/extended/02_seed.sql"),
        ]);
        fixture
    }

    /// Loads a bundled fixture by name (`base` or `extended`).
    pub fn bundled(name: &str) -> Option<Self> {
        match name {
            "base" | "retail_base" => Some(Self::base()),
            "extended" | "retail_extended" => Some(Self::extended()),
            _ => None,
        }
    }

    /// Reads every `*.sql` file of each directory, directories in the given
    /// order and files in lexical order within a directory.
    pub fn from_dirs(id: impl Into<String>, dirs: &[&Path]) -> Result<Self, RunnerError> {
        let mut files = Vec::new();
        for dir in dirs {
            let io = |e| RunnerError::Io {
                path: dir.display().to_string(),
                source: e,
            };
            let mut paths: Vec<_> = std::fs::read_dir(dir)
                .map_err(io)?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "sql"))
                .collect();
            paths.sort();
            for path in paths {
                let sql = std::fs::read_to_string(&path).map_err(|e| RunnerError::Io {
                    path: path.display().to_string(),
                    source: e,
                })?;
                files.push(FixtureFile {
                    name: path.display().to_string(),
                    sql,
                });
            }
        }
        Ok(Self { id: id.into(), files })
    }

    /// Appends the files of `dirs`, read as in [`RetailFixture::from_dirs`].
    pub fn with_dirs(mut self, dirs: &[&Path]) -> Result<Self, RunnerError> {
        self.files.extend(Self::from_dirs("", dirs)?.files);
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn files(&self) -> &[FixtureFile] {
        &self.files
    }
}

/// Creates and populates every fixture table. Schema files drop their tables
/// first, so seeding an already seeded database resets it.
pub fn seed_fixture(conn: &mut dyn Connection, fixture: &RetailFixture) -> Result<(), RunnerError> {
    for file in &fixture.files {
        conn.execute_script(&file.sql).map_err(|e| RunnerError::Fixture {
            file: file.name.clone(),
            message: e.to_string(),
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use super::*;
    use crate::model::CellValue;
    use crate::runner::{Driver, SqliteDriver};

    /// Counts seed rows by reading the bundled file, independent of the engine.
    fn seed_rows(fixture: &RetailFixture, table: &str) -> i64 {
        let prefix = format!("INSERT INTO {table} VALUES");
        fixture
            .files()
            .iter()
            .flat_map(|f| f.sql.lines())
            .filter(|l| l.starts_with(&prefix))
            .count() as i64
    }

    fn count(conn: &mut dyn Connection, table: &str) -> CellValue {
        let out = conn
            .execute(&format!("SELECT COUNT(*) FROM {table}"), Duration::from_secs(5))
            .unwrap();
        out.table().unwrap().row(0)[0].clone()
    }

    #[test]
    fn seeded_counts_match_seed_files() {
        let fixture = RetailFixture::extended();
        let mut conn = SqliteDriver.open("sqlite::memory:").unwrap();
        seed_fixture(conn.as_mut(), &fixture).unwrap();
        for (table, documented) in [
            ("customers", 25),
            ("products", 20),
            ("orders", 60),
            ("order_lines", 147),
            ("sellers", 6),
            ("payments", 60),
        ] {
            assert_eq!(seed_rows(&fixture, table), documented, "{table}");
            assert_eq!(
                count(conn.as_mut(), table),
                CellValue::Integer(documented),
                "{table}"
            );
        }
    }

    #[test]
    fn reseeding_is_idempotent() {
        let fixture = RetailFixture::base();
        let mut conn = SqliteDriver.open("sqlite::memory:").unwrap();
        seed_fixture(conn.as_mut(), &fixture).unwrap();
        let first = count(conn.as_mut(), "order_lines");
        seed_fixture(conn.as_mut(), &fixture).unwrap();
        assert_eq!(count(conn.as_mut(), "order_lines"), first);
    }

    #[test]
    fn base_has_no_extended_tables() {
        let mut conn = SqliteDriver.open("sqlite::memory:").unwrap();
        seed_fixture(conn.as_mut(), &RetailFixture::base()).unwrap();
        let names: Vec<_> = conn
            .describe_schema()
            .unwrap()
            .into_iter()
            .map(|t| t.name)
            .collect();
        assert_eq!(names, ["customers", "products", "orders", "order_lines"]);
    }

    #[test]
    fn seed_data_has_referential_integrity() {
        let mut conn = SqliteDriver.open("sqlite::memory:").unwrap();
        seed_fixture(conn.as_mut(), &RetailFixture::extended()).unwrap();
        for orphan_query in [
            "SELECT COUNT(*) FROM orders o LEFT JOIN customers c ON c.customer_id = o.customer_id WHERE c.customer_id IS NULL",
            "SELECT COUNT(*) FROM order_lines l LEFT JOIN orders o ON o.order_id = l.order_id WHERE o.order_id IS NULL",
            "SELECT COUNT(*) FROM order_lines l LEFT JOIN products p ON p.product_id = l.product_id WHERE p.product_id IS NULL",
            "SELECT COUNT(*) FROM payments p LEFT JOIN orders o ON o.order_id = p.order_id WHERE o.order_id IS NULL",
            "SELECT COUNT(*) FROM payments p LEFT JOIN sellers s ON s.seller_id = p.seller_id WHERE s.seller_id IS NULL",
        ] {
            let out = conn.execute(orphan_query, Duration::from_secs(5)).unwrap();
            assert_eq!(out.table().unwrap().row(0)[0], &CellValue::Integer(0), "{orphan_query}");
        }
    }

    #[test]
    fn loads_from_directories() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/retail");
        let base = root.join("base");
        let ext = root.join("extended");
        let loaded = RetailFixture::from_dirs("retail_extended", &[&base, &ext]).unwrap();
        assert_eq!(loaded.files().len(), 4);
        let bundled = RetailFixture::extended();
        for (a, b) in loaded.files().iter().zip(bundled.files()) {
            assert_eq!(a.sql, b.sql);
        }
    }
}
