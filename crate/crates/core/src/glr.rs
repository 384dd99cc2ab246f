//! Bernoulli GLR change detector.
//!
//! For a stream x₁..xₙ the statistic is
//!
//! ```text
//! max_{1 ≤ s < n}  s·kl(μ̂₁:ₛ, μ̂₁:ₙ) + (n − s)·kl(μ̂ₛ₊₁:ₙ, μ̂₁:ₙ)
//! ```
//!
//! and a change is declared when it reaches β(n, δ) = ln(4 n √n / δ).
//!
//! With binary samples every segment term can be written through
//! h(k) = k ln k evaluated at integer counts: for a segment of length `l`
//! holding `c` ones, `l·kl(c/l, S/n) = h(c) + h(l−c) − h(l) − c·ln(S/n) −
//! (l−c)·ln(1 − S/n)`. Summing both segments cancels the cross terms against
//! the full-stream entropy, so one scan over split points needs only table
//! lookups into h and the prefix counts.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{split, stream};

pub fn beta_threshold(n: u64, delta: f64) -> f64 {
    let n = n as f64;
    (4.0 * n * n.sqrt() / delta).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub delta: f64,
    /// Evaluate the test only when the sample count is a multiple of this.
    pub stride: u64,
}

impl DetectorConfig {
    pub fn new(delta: f64, stride: u64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param("detector.delta", format!("must lie in (0, 1), got {delta}")));
        }
        if stride == 0 {
            return Err(Error::param("detector.stride", "must be positive"));
        }
        Ok(Self { delta, stride })
    }
}

#[derive(Debug, Clone)]
pub struct GlrDetector {
    config: DetectorConfig,
    /// prefix[i] = number of ones among the first i samples.
    prefix: Vec<u32>,
    /// xlogx[k] = k ln k, kept across resets.
    xlogx: Vec<f64>,
}

impl GlrDetector {
    pub fn new(config: DetectorConfig) -> Self {
        Self {
            config,
            prefix: vec![0],
            xlogx: vec![0.0],
        }
    }

    pub fn config(&self) -> DetectorConfig {
        self.config
    }

    pub fn len(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ones(&self) -> u32 {
        *self.prefix.last().unwrap()
    }

    pub fn push(&mut self, sample: f64) {
        debug_assert!(sample == 0.0 || sample == 1.0, "GLR expects binary samples");
        let last = self.ones();
        self.prefix.push(last + (sample > 0.5) as u32);
        let n = self.len();
        while self.xlogx.len() <= n {
            let k = self.xlogx.len() as f64;
            self.xlogx.push(k * k.ln());
        }
    }

    pub fn clear(&mut self) {
        self.prefix.truncate(1);
    }

    #[inline]
    fn h(&self, k: u32) -> f64 {
        self.xlogx[k as usize]
    }

    /// Negative entropy term h(c) + h(l − c) − h(l) of a segment.
    #[inline]
    fn seg(&self, len: u32, ones: u32) -> f64 {
        self.h(ones) + self.h(len - ones) - self.h(len)
    }

    /// Maximum GLR statistic over split points, with the split `s` (size of
    /// the first segment) attaining it. Returns (0, 0) with fewer than two
    /// samples.
    pub fn statistic(&self) -> (f64, usize) {
        let n = self.len();
        if n < 2 {
            return (0.0, 0);
        }
        let total = self.ones();
        let n32 = n as u32;
        let whole = self.seg(n32, total);
        let mut best = f64::NEG_INFINITY;
        let mut arg = 1;
        for s in 1..n {
            let c1 = self.prefix[s];
            let s32 = s as u32;
            let v = self.seg(s32, c1) + self.seg(n32 - s32, total - c1) - whole;
            if v > best {
                best = v;
                arg = s;
            }
        }
        (best.max(0.0), arg)
    }

    /// Whether the stream seen so far contains a change at level δ.
    ///
    /// Gives the same answer as comparing [`statistic`](Self::statistic)
    /// with β, but skips blocks of split points whose χ² upper bound on the
    /// statistic stays below β.
    pub fn detect(&self) -> bool {
        let n = self.len() as u64;
        if n < 2 || !n.is_multiple_of(self.config.stride) {
            return false;
        }
        let beta = beta_threshold(n, self.config.delta);
        // The statistic never exceeds n times the empirical entropy.
        let total = self.ones();
        let n32 = n as u32;
        let whole = self.seg(n32, total);
        if -whole < beta {
            return false;
        }
        // kl(p, q) ≤ (p − q)² / (q(1 − q)) gives, with D = P_s − s·μ,
        // stat(s) ≤ D² n / (s (n − s) μ(1 − μ)).
        let nf = n as f64;
        let mu = total as f64 / nf;
        let cutoff = (beta * (1.0 - 1e-9) - 1e-9) * mu * (1.0 - mu);
        let weight = |s: usize| nf / (s as f64 * (nf - s as f64));
        let last = n as usize - 1;
        let mut a = 1;
        while a <= last {
            let b = (a + BLOCK - 1).min(last);
            let hi = self.prefix[b] as f64 - a as f64 * mu;
            let lo = self.prefix[a] as f64 - b as f64 * mu;
            let d = hi.abs().max(lo.abs());
            if d * d * weight(a).max(weight(b)) >= cutoff {
                for s in a..=b {
                    let c1 = self.prefix[s];
                    let s32 = s as u32;
                    if self.seg(s32, c1) + self.seg(n32 - s32, total - c1) - whole >= beta {
                        return true;
                    }
                }
            }
            a = b + 1;
        }
        false
    }
}

const BLOCK: usize = 32;

fn bernoulli(rng: &mut crate::rng::SimRng, p: f64) -> f64 {
    if rng.random::<f64>() < p { 1.0 } else { 0.0 }
}

/// Outcome of running a detector over many synthetic Bernoulli streams.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamBench {
    pub streams: usize,
    /// Streams with an alarm before the change (or anywhere, if none).
    pub false_alarms: usize,
    /// Streams with a first alarm within `window` samples after the change.
    pub detected: usize,
    /// Mean post-change delay over detected streams.
    pub mean_delay: f64,
}

/// Feed `streams` independent sequences of `change_at` samples of mean
/// `before` followed by `window` samples of mean `after` to a fresh
/// detector each, stopping each stream at its first alarm.
pub fn bench_streams(
    config: DetectorConfig,
    before: f64,
    after: f64,
    change_at: usize,
    window: usize,
    streams: usize,
    seed: u64,
) -> StreamBench {
    let mut false_alarms = 0;
    let mut detected = 0;
    let mut delay_sum = 0usize;
    for i in 0..streams {
        let mut rng = stream(split(seed, i as u64));
        let mut d = GlrDetector::new(config);
        let mut alarm = None;
        for k in 0..change_at + window {
            d.push(bernoulli(&mut rng, if k < change_at { before } else { after }));
            if d.detect() {
                alarm = Some(k + 1);
                break;
            }
        }
        match alarm {
            Some(k) if k <= change_at => false_alarms += 1,
            Some(k) => {
                detected += 1;
                delay_sum += k - change_at;
            }
            None => {}
        }
    }
    StreamBench {
        streams,
        false_alarms,
        detected,
        mean_delay: if detected > 0 { delay_sum as f64 / detected as f64 } else { f64::NAN },
    }
}
