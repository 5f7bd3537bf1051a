//! Streaming sample statistics and the deterministic parallel driver.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::rng::{stream, SimRng};

/// Running mean and variance (Welford), merged with Chan's formula.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Accumulator {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
    pub sum_abs: f64,
    pub max_abs: f64,
    pub discarded: u64,
}

impl Accumulator {
    pub fn push(&mut self, y: f64) {
        self.n += 1;
        let d = y - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (y - self.mean);
        self.sum_abs += y.abs();
        self.max_abs = self.max_abs.max(y.abs());
    }

    /// Records a sample that was dropped by the jump-count cap. It still
    /// enters the average with value zero.
    pub fn push_discarded(&mut self) {
        self.discarded += 1;
        self.push(0.0);
    }

    pub fn merge(&mut self, o: &Accumulator) {
        if o.n == 0 {
            self.discarded += o.discarded;
            return;
        }
        if self.n == 0 {
            let d = self.discarded;
            *self = o.clone();
            self.discarded += d;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * (self.n as f64) * (o.n as f64) / n as f64;
        self.n = n;
        self.sum_abs += o.sum_abs;
        self.max_abs = self.max_abs.max(o.max_abs);
        self.discarded += o.discarded;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn finish(&self, seed: u64) -> MomentEstimate {
        let mut warnings = Vec::new();
        let rate = if self.n == 0 {
            0.0
        } else {
            self.discarded as f64 / self.n as f64
        };
        if rate > 0.01 {
            warnings.push(format!("discard rate {:.3}% exceeds 1%", 100.0 * rate));
        }
        MomentEstimate {
            value: self.mean,
            stderr: self.stderr(),
            n_paths: self.n,
            n_discarded: self.discarded,
            max_weight_share: if self.sum_abs > 0.0 {
                self.max_abs / self.sum_abs
            } else {
                0.0
            },
            seed,
            config_hash: None,
            warnings,
        }
    }
}

/// Output of every estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_paths: u64,
    pub n_discarded: u64,
    /// Largest single-sample share of `Σ |Y|`; a heavy-tail diagnostic.
    pub max_weight_share: f64,
    pub seed: u64,
    pub config_hash: Option<String>,
    pub warnings: Vec<String>,
}

impl MomentEstimate {
    pub fn discard_rate(&self) -> f64 {
        if self.n_paths == 0 {
            0.0
        } else {
            self.n_discarded as f64 / self.n_paths as f64
        }
    }

    /// `|a - b| / sqrt(se_a² + se_b²)`.
    pub fn z_score(&self, other: &MomentEstimate) -> f64 {
        let se = (self.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        (self.value - other.value).abs() / se
    }
}

/// Worker pool size and chunking of a Monte Carlo run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Execution {
    pub seed: u64,
    pub workers: usize,
}

impl Execution {
    pub fn new(seed: u64) -> Self {
        Execution { seed, workers: 1 }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

/// Samples per chunk. Chunk `c` always draws from random stream `c`, so
/// the result does not depend on how chunks are spread over workers.
pub const CHUNK: usize = 256;

/// Runs `body(rng, sample_range, acc)` over fixed chunks of `0..n` and
/// merges the chunk accumulators in chunk order.
pub fn run_chunked<F>(n: usize, exec: Execution, body: F) -> Result<Accumulator>
where
    F: Fn(&mut SimRng, std::ops::Range<usize>, &mut Accumulator) -> Result<()> + Sync,
{
    if exec.workers == 0 {
        return Err(invalid("workers", "need at least one worker"));
    }
    let chunks = n.div_ceil(CHUNK);
    let work = |c: usize| -> Result<Accumulator> {
        let mut rng = stream(exec.seed, c as u64);
        let mut acc = Accumulator::default();
        body(&mut rng, c * CHUNK..((c + 1) * CHUNK).min(n), &mut acc)?;
        Ok(acc)
    };
    let parts: Vec<Result<Accumulator>> = if exec.workers == 1 {
        (0..chunks).map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(exec.workers)
            .build()
            .map_err(|e| invalid("workers", e.to_string()))?;
        pool.install(|| (0..chunks).into_par_iter().map(work).collect())
    };
    let mut total = Accumulator::default();
    for p in parts {
        total.merge(&p?);
    }
    Ok(total)
}
