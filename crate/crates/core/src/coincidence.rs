//! Time-tag coincidence processing: S1/S2 cross-correlation histograms and
//! gated integration, plus synthetic tag sources for testing the pipeline.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::pulse::PulseWaveform;
use crate::units;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    /// Herald photon.
    S1,
    /// Signal photon sent through the medium.
    S2,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::S1 => "S1",
            Channel::S2 => "S2",
        })
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "S1" | "s1" | "1" => Ok(Channel::S1),
            "S2" | "s2" | "2" => Ok(Channel::S2),
            other => Err(Error::Config(format!("unknown channel {other:?}"))),
        }
    }
}

/// Detection events with picosecond timestamps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeTagStream {
    events: Vec<(Channel, i64)>,
}

impl TimeTagStream {
    /// Rejects streams whose timestamps decrease within a channel.
    pub fn new(events: Vec<(Channel, i64)>) -> Result<Self> {
        let mut last = [i64::MIN; 2];
        for (i, &(ch, t)) in events.iter().enumerate() {
            let k = ch as usize;
            if t < last[k] {
                return Err(Error::domain(format!("event {i}: {ch} timestamp {t} ps precedes {} ps", last[k])));
            }
            last[k] = t;
        }
        Ok(Self { events })
    }

    /// Builds a stream from per-channel sorted timestamps, interleaved in time.
    pub fn from_channels(s1: &[i64], s2: &[i64]) -> Result<Self> {
        let mut events: Vec<(Channel, i64)> =
            s1.iter().map(|&t| (Channel::S1, t)).chain(s2.iter().map(|&t| (Channel::S2, t))).collect();
        events.sort_by_key(|&(c, t)| (t, c));
        Self::new(events)
    }

    pub fn events(&self) -> &[(Channel, i64)] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn channel(&self, ch: Channel) -> Vec<i64> {
        self.events.iter().filter(|e| e.0 == ch).map(|e| e.1).collect()
    }
}

/// Histogram of S2 − S1 delays. Bin `k` covers
/// `[origin + k·bin_width, origin + (k+1)·bin_width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width_ps: i64,
    pub origin_ps: i64,
    pub counts: Vec<u64>,
    /// One of the channels had no events.
    pub empty_channel: bool,
}

impl Histogram {
    pub fn bin_start_ns(&self, k: usize) -> f64 {
        (self.origin_ps + k as i64 * self.bin_width_ps) as f64 * 1e-3
    }

    pub fn bin_centers_ns(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|k| self.bin_start_ns(k) + 0.5e-3 * self.bin_width_ps as f64).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn span_ns(&self) -> (f64, f64) {
        (self.bin_start_ns(0), self.bin_start_ns(self.counts.len()))
    }

    /// Index of the most populated bin.
    pub fn peak_bin(&self) -> Option<usize> {
        self.counts.iter().enumerate().max_by_key(|&(k, &c)| (c, std::cmp::Reverse(k))).map(|(k, _)| k)
    }
}

/// Histogram of `t_S2 − t_S1` over all pairs with delay in `[−window, window)`.
/// A two-pointer sweep over the sorted channels keeps the cost linear in the
/// number of tags plus the number of pairs inside the window.
pub fn cross_correlate(stream: &TimeTagStream, bin_width_ps: i64, window_ps: i64) -> Result<Histogram> {
    if bin_width_ps <= 0 {
        return Err(Error::domain("bin width must be > 0"));
    }
    if window_ps <= bin_width_ps {
        return Err(Error::domain("correlation window must exceed the bin width"));
    }
    let nbins = ((2 * window_ps + bin_width_ps - 1) / bin_width_ps) as usize;
    let mut hist = Histogram { bin_width_ps, origin_ps: -window_ps, counts: vec![0; nbins], empty_channel: false };
    let s1 = stream.channel(Channel::S1);
    let s2 = stream.channel(Channel::S2);
    if s1.is_empty() || s2.is_empty() {
        log::warn!("time-tag stream has an empty channel; histogram is empty");
        hist.empty_channel = true;
        return Ok(hist);
    }
    let mut lo = 0;
    for &t1 in &s1 {
        while lo < s2.len() && s2[lo] < t1 - window_ps {
            lo += 1;
        }
        let mut j = lo;
        while j < s2.len() && s2[j] < t1 + window_ps {
            let k = ((s2[j] - t1 + window_ps) / bin_width_ps) as usize;
            if k < nbins {
                hist.counts[k] += 1;
            }
            j += 1;
        }
    }
    Ok(hist)
}

/// Sum of the bins lying entirely inside `[start, end)` (ns).
pub fn integrate_counts(hist: &Histogram, gate_ns: (f64, f64)) -> u64 {
    let (start, end) = gate_ns;
    if !(end > start) {
        log::warn!("empty coincidence gate [{start}, {end}) ns");
        return 0;
    }
    (0..hist.counts.len())
        .filter(|&k| hist.bin_start_ns(k) >= start && hist.bin_start_ns(k + 1) <= end)
        .map(|k| hist.counts[k])
        .sum()
}

/// Draws photon arrival delays from a wave packet's intensity profile.
#[derive(Debug, Clone)]
pub struct WaveformSampler {
    times_ps: Vec<f64>,
    cdf: Vec<f64>,
}

impl WaveformSampler {
    pub fn new(pulse: &PulseWaveform, linewidth_mhz: f64) -> Result<Self> {
        let mut acc = 0.0;
        let mut cdf = Vec::with_capacity(pulse.amp.len());
        for a in &pulse.amp {
            acc += a.norm_sqr();
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::domain("cannot sample an empty waveform"));
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        let times_ps = pulse.grid.times().map(|t| units::gamma_time_to_ns(t, linewidth_mhz) * 1e3).collect();
        Ok(Self { times_ps, cdf })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1);
        self.times_ps[k]
    }
}

/// Heralded photon pairs: S1 tags at Poisson-distributed times and, with
/// probability `transmission`, an S2 tag `offset + delay` later.
#[derive(Debug, Clone)]
pub struct PairSource {
    pub n_pairs: usize,
    pub mean_spacing_ps: f64,
    pub offset_ps: i64,
    pub transmission: f64,
    /// Arrival-time profile of the S2 photon; a fixed delay when `None`.
    pub shape: Option<WaveformSampler>,
}

impl PairSource {
    pub fn generate(&self, rng: &mut impl Rng) -> Result<TimeTagStream> {
        if !(self.mean_spacing_ps > 0.0) {
            return Err(Error::domain("pair spacing must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.transmission) {
            return Err(Error::domain("transmission must lie in [0, 1]"));
        }
        let gap = Exp::new(1.0 / self.mean_spacing_ps).map_err(|e| Error::domain(e.to_string()))?;
        let mut s1 = Vec::with_capacity(self.n_pairs);
        let mut s2 = Vec::with_capacity(self.n_pairs);
        let mut t = 0.0;
        for _ in 0..self.n_pairs {
            t += gap.sample(rng);
            let t1 = t.round() as i64;
            s1.push(t1);
            if rng.random::<f64>() < self.transmission {
                let d = self.shape.as_ref().map_or(0.0, |s| s.sample(rng));
                s2.push(t1 + self.offset_ps + d.round() as i64);
            }
        }
        s2.sort_unstable();
        TimeTagStream::from_channels(&s1, &s2)
    }
}

/// Two independent Poisson streams with `n` tags each.
pub fn uncorrelated_stream(rng: &mut impl Rng, n: usize, mean_spacing_ps: f64) -> Result<TimeTagStream> {
    let gap = Exp::new(1.0 / mean_spacing_ps).map_err(|e| Error::domain(e.to_string()))?;
    let draw = |rng: &mut dyn rand::RngCore| {
        let mut t = 0.0;
        (0..n)
            .map(|_| {
                t += gap.sample(rng);
                t.round() as i64
            })
            .collect::<Vec<i64>>()
    };
    let s1 = draw(rng);
    let s2 = draw(rng);
    TimeTagStream::from_channels(&s1, &s2)
}
