//! Block-fading Monte-Carlo simulation of the one-bit feedback scheduler and
//! the full-CSI scheduler.
//!
//! Block `k` draws its channels from ChaCha stream `k` of the seeded
//! generator, and partial sums are formed over fixed chunks of blocks and
//! reduced in chunk order, so a report depends only on the seed and the block
//! count, never on how many worker threads ran it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distributions::UserProfile;
use crate::error::{Error, Result};
use crate::feedback_stats::{beats, stats_for, weights_of, ConditionalStats, Side};

const CHUNK_BLOCKS: u64 = 8192;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_blocks: u64,
    pub seed: u64,
    pub profiles: Vec<UserProfile>,
    pub thresholds: Vec<f64>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 {
            return Err(Error::InvalidArgument("n_blocks must be at least 1".into()));
        }
        if self.profiles.is_empty() {
            return Err(Error::InvalidArgument("at least one user is required".into()));
        }
        if self.thresholds.len() != self.profiles.len() {
            return Err(Error::InvalidArgument(format!(
                "{} thresholds for {} users",
                self.thresholds.len(),
                self.profiles.len()
            )));
        }
        if let Some(r) = self.thresholds.iter().find(|r| !(**r >= 0.0)) {
            return Err(Error::InvalidArgument(format!("negative threshold {r}")));
        }
        Ok(())
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    /// Per-block `μ_sel · rate_sel` under one-bit feedback.
    pub one_bit: Estimate,
    /// Per-block `max_i μ_i rate_i`.
    pub full_csi: Estimate,
    pub per_user_avg_rate: Vec<f64>,
    pub per_user_rate_stderr: Vec<f64>,
    pub scheduling_fraction: Vec<f64>,
    pub scheduling_fraction_stderr: Vec<f64>,
    pub n_blocks: u64,
}

/// User with the largest `μ_i E[R_i | b_i]`. Ties within the tie tolerance
/// go to the lowest index.
///
/// Channels are independent, so conditioning on every user's bit reduces to
/// conditioning each user on its own bit.
pub fn schedule_one_bit(bits: &[bool], stats: &[ConditionalStats], weights: &[f64]) -> Result<usize> {
    if bits.len() != stats.len() || bits.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} bits, {} stats, {} weights",
            bits.len(),
            stats.len(),
            weights.len()
        )));
    }
    Ok(argmax(bits.len(), |i| {
        let side = if bits[i] { Side::Above } else { Side::Below };
        weights[i] * stats[i].mean_on(side)
    }))
}

/// User with the largest `μ_i r_i`, lowest index on ties.
pub fn schedule_full_csi(rates: &[f64], weights: &[f64]) -> Result<usize> {
    if rates.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rates for {} weights",
            rates.len(),
            weights.len()
        )));
    }
    Ok(argmax(rates.len(), |i| weights[i] * rates[i]))
}

fn argmax(n: usize, value: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_v = value(0);
    for i in 1..n {
        let v = value(i);
        if beats(v, i, best_v, best) {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Sum {
    sum: f64,
    comp: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn merge(&mut self, other: &Sum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone)]
struct Tally {
    one_bit: [Sum; 2],
    full_csi: [Sum; 2],
    user_rate: Vec<[Sum; 2]>,
    user_count: Vec<u64>,
}

impl Tally {
    fn new(m: usize) -> Self {
        Self {
            one_bit: Default::default(),
            full_csi: Default::default(),
            user_rate: vec![Default::default(); m],
            user_count: vec![0; m],
        }
    }

    fn merge(&mut self, o: &Tally) {
        for k in 0..2 {
            self.one_bit[k].merge(&o.one_bit[k]);
            self.full_csi[k].merge(&o.full_csi[k]);
            for (a, b) in self.user_rate.iter_mut().zip(&o.user_rate) {
                a[k].merge(&b[k]);
            }
        }
        for (a, b) in self.user_count.iter_mut().zip(&o.user_count) {
            *a += b;
        }
    }
}

fn add_moment(acc: &mut [Sum; 2], x: f64) {
    acc[0].add(x);
    acc[1].add(x * x);
}

fn estimate(acc: &[Sum; 2], n: u64) -> Estimate {
    let nf = n as f64;
    let mean = acc[0].value() / nf;
    let var = ((acc[1].value() - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Estimate {
        mean,
        std_error: (var / nf).sqrt(),
    }
}

/// Runs `cfg.n_blocks` independent fading blocks.
///
/// In each block every user draws a rate and reports `rate > threshold`; the
/// one-bit scheduler and the full-CSI scheduler each pick a user and are
/// credited with that user's weighted rate.
pub fn simulate(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let m = cfg.profiles.len();
    let stats = stats_for(&cfg.profiles, &cfg.thresholds)?;
    let weights = weights_of(&cfg.profiles);
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_chunks = cfg.n_blocks.div_ceil(CHUNK_BLOCKS);

    let partials: Vec<Tally> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut tally = Tally::new(m);
            let mut rates = vec![0.0; m];
            let mut bits = vec![false; m];
            let end = ((c + 1) * CHUNK_BLOCKS).min(cfg.n_blocks);
            for block in c * CHUNK_BLOCKS..end {
                let mut rng = base.clone();
                rng.set_stream(block);
                for (i, p) in cfg.profiles.iter().enumerate() {
                    rates[i] = p.dist().sample(&mut rng);
                    bits[i] = rates[i] > cfg.thresholds[i];
                }
                let u = argmax(m, |i| {
                    let side = if bits[i] { Side::Above } else { Side::Below };
                    weights[i] * stats[i].mean_on(side)
                });
                add_moment(&mut tally.one_bit, weights[u] * rates[u]);
                tally.user_count[u] += 1;
                for (i, acc) in tally.user_rate.iter_mut().enumerate() {
                    add_moment(acc, if i == u { rates[i] } else { 0.0 });
                }
                let v = argmax(m, |i| weights[i] * rates[i]);
                add_moment(&mut tally.full_csi, weights[v] * rates[v]);
            }
            tally
        })
        .collect();

    let mut total = Tally::new(m);
    for p in &partials {
        total.merge(p);
    }
    let n = cfg.n_blocks;
    let user_est: Vec<Estimate> = total.user_rate.iter().map(|a| estimate(a, n)).collect();
    let fractions: Vec<f64> = total.user_count.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(SimReport {
        one_bit: estimate(&total.one_bit, n),
        full_csi: estimate(&total.full_csi, n),
        per_user_avg_rate: user_est.iter().map(|e| e.mean).collect(),
        per_user_rate_stderr: user_est.iter().map(|e| e.std_error).collect(),
        scheduling_fraction_stderr: fractions
            .iter()
            .map(|p| (p * (1.0 - p) / n as f64).sqrt())
            .collect(),
        scheduling_fraction: fractions,
        n_blocks: n,
    })
}
