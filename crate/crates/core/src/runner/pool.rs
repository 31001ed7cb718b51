use std::ops::{Deref, DerefMut};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use super::{seed_fixture, Connection, Driver, ExecutionOutcome, QueryExecutor, RetailFixture, RunnerError};
use crate::model::TableSchema;

static POOL_COUNTER: AtomicU64 = AtomicU64::new(0);

struct Slots {
    idle: Vec<Box<dyn Connection>>,
    live: usize,
}

/// A fixed set of connections to one database. Each query runs on its own
/// checked-out connection, so independent queries can run concurrently.
pub struct ConnectionPool {
    driver: Arc<dyn Driver>,
    url: String,
    timeout: Duration,
    slots: Mutex<Slots>,
    returned: Condvar,
}

impl ConnectionPool {
    pub fn open(
        driver: Arc<dyn Driver>,
        url: &str,
        size: usize,
        timeout: Duration,
    ) -> Result<Self, RunnerError> {
        if timeout.is_zero() {
            return Err(RunnerError::InvalidTimeout);
        }
        // A private in-memory database would give every pooled connection its
        // own empty database; share one named database instead.
        let url = if url == "sqlite::memory:" {
            let n = POOL_COUNTER.fetch_add(1, Ordering::Relaxed);
            format!("sqlite::memory:t2sql-pool-{}-{n}", std::process::id())
        } else {
            url.to_string()
        };
        let size = size.max(1);
        let idle = (0..size)
            .map(|_| driver.open(&url))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            driver,
            url,
            timeout,
            slots: Mutex::new(Slots { idle, live: size }),
            returned: Condvar::new(),
        })
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// Blocks until a connection is free.
    pub fn get(&self) -> Result<PooledConnection<'_>, RunnerError> {
        let mut slots = self.slots.lock().expect("pool lock");
        loop {
            if let Some(conn) = slots.idle.pop() {
                return Ok(PooledConnection {
                    pool: self,
                    conn: Some(conn),
                });
            }
            if slots.live == 0 {
                return Err(RunnerError::ConnectionLost(format!(
                    "no live connections to {}",
                    self.url
                )));
            }
            slots = self.returned.wait(slots).expect("pool lock");
        }
    }

    pub fn seed(&self, fixture: &RetailFixture) -> Result<(), RunnerError> {
        let mut conn = self.get()?;
        seed_fixture(conn.connection_mut(), fixture)
    }

    pub fn describe_schema(&self) -> Result<Vec<TableSchema>, RunnerError> {
        self.get()?.describe_schema()
    }

    fn give_back(&self, conn: Box<dyn Connection>) {
        self.slots.lock().expect("pool lock").idle.push(conn);
        self.returned.notify_one();
    }

    /// Replaces a connection that reported itself lost.
    fn replace_lost(&self) {
        match self.driver.open(&self.url) {
            Ok(conn) => self.give_back(conn),
            Err(e) => {
                tracing::warn!(url = %self.url, error = %e, "could not reopen connection");
                self.slots.lock().expect("pool lock").live -= 1;
                self.returned.notify_all();
            }
        }
    }
}

impl QueryExecutor for ConnectionPool {
    fn run(&self, sql: &str) -> Result<ExecutionOutcome, RunnerError> {
        let mut guard = self.get()?;
        match guard.execute(sql, self.timeout) {
            Err(RunnerError::ConnectionLost(msg)) => {
                drop(guard.conn.take());
                drop(guard);
                self.replace_lost();
                Err(RunnerError::ConnectionLost(msg))
            }
            other => other,
        }
    }
}

pub struct PooledConnection<'a> {
    pool: &'a ConnectionPool,
    conn: Option<Box<dyn Connection>>,
}

impl PooledConnection<'_> {
    pub fn connection_mut(&mut self) -> &mut (dyn Connection + 'static) {
        self.conn.as_deref_mut().expect("connection present")
    }
}

impl Deref for PooledConnection<'_> {
    type Target = dyn Connection;

    fn deref(&self) -> &Self::Target {
        self.conn.as_deref().expect("connection present")
    }
}

impl DerefMut for PooledConnection<'_> {
    fn deref_mut(&mut self) -> &mut Self::Target {
        self.connection_mut()
    }
}

impl Drop for PooledConnection<'_> {
    fn drop(&mut self) {
        if let Some(conn) = self.conn.take() {
            self.pool.give_back(conn);
        }
    }
}
