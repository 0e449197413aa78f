//! Deterministic parallel Monte-Carlo execution.

use crate::error::{invalid, Result};
use crate::numerics::batch_means;
use crate::rng::RngStream;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::path::PathBuf;
use std::time::{Duration, Instant};

/// Batches used for standard errors.
pub const BATCHES: usize = 30;

/// Interval between checkpoint writes.
pub const CHECKPOINT_INTERVAL: Duration = Duration::from_secs(60);

/// Worker pool plus the checkpoint file it writes to.
pub struct Runner {
    pool: rayon::ThreadPool,
    workers: usize,
    checkpoint: Option<PathBuf>,
    interval: Duration,
}

#[derive(Serialize)]
struct Checkpoint<'a, T> {
    stage: &'a str,
    completed: usize,
    total: usize,
    results: &'a [T],
}

impl Runner {
    pub fn new(workers: Option<usize>, checkpoint: Option<PathBuf>) -> Result<Self> {
        let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
        if workers == 0 {
            return Err(invalid("worker count must be positive"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
        Ok(Self { pool, workers, checkpoint, interval: CHECKPOINT_INTERVAL })
    }

    pub fn with_checkpoint_interval(mut self, interval: Duration) -> Self {
        self.interval = interval;
        self
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `op` inside the pool so nested parallel iterators use it.
    pub fn install<R: Send>(&self, op: impl FnOnce() -> R + Send) -> R {
        self.pool.install(op)
    }

    /// Runs `trials` independent trials, trial `i` drawing from `stream.child(i)`.
    /// Results come back in trial order whatever the scheduling.
    pub fn map_trials<T, F>(&self, stage: &str, stream: RngStream, trials: usize, f: F) -> Result<Vec<T>>
    where
        T: Send + Serialize,
        F: Fn(u64, &mut ChaCha8Rng) -> Result<T> + Sync,
    {
        let chunk = (self.workers * 4).max(16);
        let mut out = Vec::with_capacity(trials);
        let mut last = Instant::now();
        let mut start = 0;
        while start < trials {
            let end = (start + chunk).min(trials);
            let part: Vec<T> = self.pool.install(|| {
                (start..end)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = stream.child(i as u64).rng();
                        f(i as u64, &mut rng)
                    })
                    .collect::<Result<Vec<T>>>()
            })?;
            out.extend(part);
            start = end;
            if last.elapsed() >= self.interval && start < trials {
                self.write_checkpoint(stage, trials, &out)?;
                last = Instant::now();
            }
        }
        Ok(out)
    }

    fn write_checkpoint<T: Serialize>(&self, stage: &str, total: usize, results: &[T]) -> Result<()> {
        let Some(path) = &self.checkpoint else { return Ok(()) };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let body = serde_json::to_vec(&Checkpoint { stage, completed: results.len(), total, results })
            .map_err(|e| invalid(format!("checkpoint serialization: {e}")))?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, body)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }
}

/// Mean and batch-means standard error in trial order.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let (mean, se) = batch_means(values, BATCHES);
    (mean, if se.is_nan() { 0.0 } else { se })
}
