//! Running moments, seeded substreams and the estimate types.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean and variance by Welford's update, mergeable across batches.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    pub count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance (`n - 1` denominator); zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Seed and number of independent substreams. Trials are split into
/// `streams` batches; batch `k` draws from ChaCha8 stream `k` of `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngConfig {
    pub seed: u64,
    pub streams: usize,
}

impl Default for RngConfig {
    fn default() -> Self {
        RngConfig { seed: 0x5eed, streams: 64 }
    }
}

impl RngConfig {
    pub fn new(seed: u64) -> Self {
        RngConfig { seed, ..Default::default() }
    }

    /// Reads `ERGO_SEED` when set, else the default seed.
    pub fn from_env() -> Result<Self> {
        match std::env::var("ERGO_SEED") {
            Ok(s) => s
                .trim()
                .parse()
                .map(Self::new)
                .map_err(|_| Error::invalid(format!("ERGO_SEED must be an unsigned integer, got `{s}`"))),
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn stream(&self, k: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        rng
    }

    /// The same seed on a disjoint block of streams.
    pub fn offset(&self, block: usize) -> Self {
        RngConfig {
            seed: self.seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(block as u64 + 1)),
            streams: self.streams,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.streams == 0 {
            return Err(Error::invalid("at least one RNG stream is required"));
        }
        Ok(())
    }

    /// Runs `trials` draws split over the streams in parallel and folds each
    /// batch with `run(rng, batch_size)`. Batches are returned in stream
    /// order, so the merged result does not depend on scheduling.
    pub(crate) fn batches<T, F>(&self, trials: usize, run: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&mut ChaCha8Rng, usize) -> Result<T> + Sync,
    {
        self.validate()?;
        let streams = self.streams.min(trials.max(1));
        let base = trials / streams;
        let extra = trials % streams;
        (0..streams)
            .into_par_iter()
            .map(|k| {
                let mut rng = self.stream(k);
                run(&mut rng, base + usize::from(k < extra))
            })
            .collect()
    }
}

/// `E[e^{beta tau}]` estimated from the same trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpMomentEstimate {
    pub beta: f64,
    pub mean: f64,
    pub std_error: f64,
}

/// Hitting-time statistics. Censored trajectories enter the mean at the
/// horizon, so with censoring the mean is biased low and says so in
/// `censored`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HitEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    pub exp_moment: Option<ExpMomentEstimate>,
    pub censored: usize,
}

/// Censoring above this fraction is flagged.
pub const CENSOR_LIMIT: f64 = 0.01;

impl HitEstimate {
    pub fn censored_fraction(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.censored as f64 / self.trials as f64
        }
    }

    pub fn censoring_flagged(&self) -> bool {
        self.censored_fraction() > CENSOR_LIMIT
    }

    /// Every trial started inside the target.
    pub(crate) fn zero(trials: usize, beta: Option<f64>) -> Self {
        HitEstimate {
            mean: 0.0,
            std_error: 0.0,
            trials,
            exp_moment: beta.map(|beta| ExpMomentEstimate { beta, mean: 1.0, std_error: 0.0 }),
            censored: 0,
        }
    }
}

/// Per-batch accumulator for hitting times.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct HitAccumulator {
    pub(crate) times: Welford,
    pub(crate) exp: Welford,
    pub(crate) censored: usize,
}

impl HitAccumulator {
    pub(crate) fn push(&mut self, tau: f64, censored: bool, beta: Option<f64>) {
        self.times.push(tau);
        if let Some(b) = beta {
            self.exp.push((b * tau).exp());
        }
        self.censored += usize::from(censored);
    }

    pub(crate) fn merge_all(parts: Vec<HitAccumulator>) -> HitAccumulator {
        parts.into_iter().fold(HitAccumulator::default(), |mut acc, p| {
            acc.times.merge(&p.times);
            acc.exp.merge(&p.exp);
            acc.censored += p.censored;
            acc
        })
    }

    pub(crate) fn finish(self, beta: Option<f64>) -> Result<HitEstimate> {
        let trials = self.times.count as usize;
        if trials > 0 && self.censored == trials {
            return Err(Error::Simulation(format!(
                "all {trials} trajectories were censored at the horizon"
            )));
        }
        Ok(HitEstimate {
            mean: self.times.mean(),
            std_error: self.times.std_error(),
            trials,
            exp_moment: beta.map(|beta| ExpMomentEstimate {
                beta,
                mean: self.exp.mean(),
                std_error: self.exp.std_error(),
            }),
            censored: self.censored,
        })
    }
}
