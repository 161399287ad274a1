//! TOML run configuration.
//!
//! Every dimensional value is a string carrying its unit, e.g. `"2.5 Gamma"`,
//! `"14.4 MHz"`, `"500 ns"` or `"0.5 us"`. Frequencies in Hz-type units are
//! read as angular frequencies 2π×value and converted with the configured
//! linewidth Γ/2π. Unknown keys are rejected.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer};

use crate::atom::{AtomSpec, Direction};
use crate::error::{Error, Result};
use crate::pulse::PulseShape;
use crate::qubit::QubitState;
use crate::storage::LinkResolution;
use crate::units;

/// A rate or detuning with an explicit unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frequency {
    /// Units of Γ.
    Gamma(f64),
    /// MHz, meaning 2π×value rad/μs.
    Mhz(f64),
}

impl Frequency {
    pub fn in_gamma(self, linewidth_mhz: f64) -> f64 {
        match self {
            Frequency::Gamma(x) => x,
            Frequency::Mhz(x) => units::mhz_to_gamma(x, linewidth_mhz),
        }
    }
}

/// A duration with an explicit unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Duration {
    /// Units of 1/Γ.
    Lifetimes(f64),
    Nanoseconds(f64),
}

impl Duration {
    pub fn in_lifetimes(self, linewidth_mhz: f64) -> f64 {
        match self {
            Duration::Lifetimes(x) => x,
            Duration::Nanoseconds(x) => units::ns_to_gamma_time(x, linewidth_mhz),
        }
    }

    pub fn in_ns(self, linewidth_mhz: f64) -> f64 {
        match self {
            Duration::Lifetimes(x) => units::gamma_time_to_ns(x, linewidth_mhz),
            Duration::Nanoseconds(x) => x,
        }
    }
}

fn split_quantity(s: &str) -> Option<(f64, &str)> {
    let s = s.trim();
    let idx = s.find(|c: char| c.is_whitespace()).or_else(|| s.find(|c: char| c.is_ascii_alphabetic()))?;
    let (num, unit) = s.split_at(idx);
    let v: f64 = num.trim().parse().ok()?;
    v.is_finite().then_some((v, unit.trim()))
}

impl FromStr for Frequency {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (v, unit) = split_quantity(s).ok_or_else(|| format!("expected `<number> <unit>`, got {s:?}"))?;
        match unit {
            "Gamma" | "gamma" | "Γ" => Ok(Frequency::Gamma(v)),
            "MHz" => Ok(Frequency::Mhz(v)),
            "kHz" => Ok(Frequency::Mhz(v * 1e-3)),
            "GHz" => Ok(Frequency::Mhz(v * 1e3)),
            other => Err(format!("unknown frequency unit {other:?} (use Gamma, kHz, MHz or GHz)")),
        }
    }
}

impl FromStr for Duration {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (v, unit) = split_quantity(s).ok_or_else(|| format!("expected `<number> <unit>`, got {s:?}"))?;
        match unit {
            "/Gamma" | "1/Gamma" | "Gamma^-1" => Ok(Duration::Lifetimes(v)),
            "ps" => Ok(Duration::Nanoseconds(v * 1e-3)),
            "ns" => Ok(Duration::Nanoseconds(v)),
            "us" | "μs" => Ok(Duration::Nanoseconds(v * 1e3)),
            "ms" => Ok(Duration::Nanoseconds(v * 1e6)),
            "s" => Ok(Duration::Nanoseconds(v * 1e9)),
            other => Err(format!("unknown time unit {other:?} (use /Gamma, ps, ns, us, ms or s)")),
        }
    }
}

fn parse_with<'de, D, T>(d: D) -> std::result::Result<T, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr,
    T::Err: fmt::Display,
{
    let s = String::deserialize(d)?;
    s.parse().map_err(de::Error::custom)
}

impl<'de> Deserialize<'de> for Frequency {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        parse_with(d)
    }
}

impl<'de> Deserialize<'de> for Duration {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        parse_with(d)
    }
}

/// Non-negative plain number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonNeg(pub f64);

impl<'de> Deserialize<'de> for NonNeg {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if v >= 0.0 && v.is_finite() {
            Ok(NonNeg(v))
        } else {
            Err(de::Error::custom(format!("expected a finite value ≥ 0, got {v}")))
        }
    }
}

/// Ground-state dephasing: a fixed rate or calibrated from a target
/// transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaGs {
    Fixed(Frequency),
    Calibrate,
}

impl<'de> Deserialize<'de> for GammaGs {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s.trim() == "calibrate" {
            return Ok(GammaGs::Calibrate);
        }
        s.parse::<Frequency>().map(GammaGs::Fixed).map_err(de::Error::custom)
    }
}

macro_rules! from_str_field {
    ($t:ty) => {
        impl<'de> Deserialize<'de> for Wrapped<$t> {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                parse_with(d).map(Wrapped)
            }
        }
    };
}

/// Adapter for library types that parse from strings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrapped<T>(pub T);

from_str_field!(Direction);
from_str_field!(PulseShape);
from_str_field!(QubitState);

impl FromStr for LinkResolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "effective" => Ok(LinkResolution::Effective),
            "zeeman" => Ok(LinkResolution::Zeeman),
            other => Err(Error::Config(format!("unknown link resolution {other:?} (effective or zeeman)"))),
        }
    }
}
from_str_field!(LinkResolution);

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtomSection {
    pub f_g: u32,
    pub f_s: u32,
    pub f_e: u32,
    /// Γ/2π.
    pub linewidth: Frequency,
}

impl Default for AtomSection {
    fn default() -> Self {
        Self { f_g: 2, f_s: 3, f_e: 3, linewidth: Frequency::Mhz(units::RB85_D1_LINEWIDTH_MHZ) }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MediumSection {
    pub od: NonNeg,
    pub gamma_ge: Frequency,
    pub gamma_gs: GammaGs,
    /// Resonant forward transmission that fixes γ_gs when calibrating.
    pub calibration_target: f64,
}

impl Default for MediumSection {
    fn default() -> Self {
        Self { od: NonNeg(19.0), gamma_ge: Frequency::Gamma(0.5), gamma_gs: GammaGs::Calibrate, calibration_target: 0.929 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingSection {
    pub rabi: Frequency,
    pub detuning: Frequency,
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self { rabi: Frequency::Gamma(2.5), detuning: Frequency::Gamma(0.0) }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub direction: Wrapped<Direction>,
    pub detuning_min: Frequency,
    pub detuning_max: Frequency,
    pub detuning_step: Frequency,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            direction: Wrapped(Direction::Forward),
            detuning_min: Frequency::Mhz(-18.0),
            detuning_max: Frequency::Mhz(22.0),
            detuning_step: Frequency::Mhz(0.5),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSection {
    pub shape: Wrapped<PulseShape>,
    /// FWHM of the spectral amplitude.
    pub bandwidth: Frequency,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self { shape: Wrapped(PulseShape::ExpDecay), bandwidth: Frequency::Mhz(1.6) }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdScanSection {
    pub od_min: NonNeg,
    pub od_max: NonNeg,
    pub od_step: NonNeg,
    pub pulse_integrated: bool,
}

impl Default for OdScanSection {
    fn default() -> Self {
        Self { od_min: NonNeg(0.0), od_max: NonNeg(30.0), od_step: NonNeg(2.0), pulse_integrated: true }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QubitSection {
    pub states: Vec<Wrapped<QubitState>>,
    /// Relative rail phase in radians.
    pub phase_lr: f64,
    pub rail_ratio: NonNeg,
    pub loss_amplitude: NonNeg,
    pub pulse_integrated: bool,
}

impl Default for QubitSection {
    fn default() -> Self {
        Self {
            states: ["H", "V", "R", "D"].iter().map(|s| Wrapped(s.parse().expect("named state"))).collect(),
            phase_lr: 0.0,
            rail_ratio: NonNeg(1.0),
            loss_amplitude: NonNeg(1.0),
            pulse_integrated: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountNoise {
    None,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsSection {
    pub h: NonNeg,
    pub v: NonNeg,
    pub d: NonNeg,
    pub r: NonNeg,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographySection {
    /// State sent through the forward channel to generate counts.
    pub state: Wrapped<QubitState>,
    pub target: Wrapped<QubitState>,
    /// Measured counts; overrides generation from `state`.
    pub counts: Option<CountsSection>,
    /// CSV file with `basis,count` rows; overrides `counts`.
    pub counts_file: Option<PathBuf>,
    pub n_total: NonNeg,
    pub noise: CountNoise,
    pub trials: usize,
}

impl Default for TomographySection {
    fn default() -> Self {
        Self {
            state: Wrapped(QubitState::h()),
            target: Wrapped(QubitState::h()),
            counts: None,
            counts_file: None,
            n_total: NonNeg(1e4),
            noise: CountNoise::None,
            trials: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageMode {
    /// Write, hold and read.
    Store,
    /// Coupling held on throughout.
    SlowLight,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StorageSection {
    pub od: NonNeg,
    pub direction: Wrapped<Direction>,
    pub mode: StorageMode,
    pub z_points: usize,
    pub resolution: Wrapped<LinkResolution>,
    /// Start of the switch-off ramp after the input onset.
    pub write_start: Duration,
    pub ramp: Duration,
    pub hold: Duration,
    /// Simulated time after the read ramp completes.
    pub readout: Duration,
}

impl Default for StorageSection {
    fn default() -> Self {
        Self {
            od: NonNeg(54.0),
            direction: Wrapped(Direction::Forward),
            mode: StorageMode::Store,
            z_points: 256,
            resolution: Wrapped(LinkResolution::Effective),
            write_start: Duration::Nanoseconds(100.0),
            ramp: Duration::Nanoseconds(500.0),
            hold: Duration::Nanoseconds(500.0),
            readout: Duration::Lifetimes(60.0),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoincidenceSection {
    /// Tag file with `channel,timestamp_ps` rows; synthetic pairs otherwise.
    pub tags: Option<PathBuf>,
    /// Direction of the synthetic S2 photons through the medium.
    pub direction: Wrapped<Direction>,
    pub n_pairs: usize,
    pub pair_spacing: Duration,
    /// Fixed S1→S2 delay, e.g. the fiber delay line.
    pub offset: Duration,
    pub bin_width: Duration,
    pub window: Duration,
    /// Also write the synthetic tags next to the histogram.
    pub save_tags: bool,
}

impl Default for CoincidenceSection {
    fn default() -> Self {
        Self {
            tags: None,
            direction: Wrapped(Direction::Forward),
            n_pairs: 100_000,
            pair_spacing: Duration::Nanoseconds(20_000.0),
            offset: Duration::Nanoseconds(8.0),
            bin_width: Duration::Nanoseconds(1.6),
            window: Duration::Nanoseconds(2000.0),
            save_tags: false,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub atom: AtomSection,
    pub medium: MediumSection,
    pub coupling: CouplingSection,
    pub probe: ProbeSection,
    pub pulse: PulseSection,
    pub odscan: OdScanSection,
    pub qubit: QubitSection,
    pub tomography: TomographySection,
    pub storage: StorageSection,
    pub coincidence: CoincidenceSection,
}

impl Config {
    /// Parses TOML text. Errors carry the line and column of the offending
    /// entry.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Γ/2π in MHz.
    pub fn linewidth_mhz(&self) -> f64 {
        match self.atom.linewidth {
            Frequency::Mhz(x) => x,
            Frequency::Gamma(x) => x * units::RB85_D1_LINEWIDTH_MHZ,
        }
    }

    pub fn atom_spec(&self) -> AtomSpec {
        AtomSpec {
            f_g: self.atom.f_g,
            f_s: self.atom.f_s,
            f_e: self.atom.f_e,
            gamma: units::gamma_rad_per_s(self.linewidth_mhz()),
        }
    }

    pub fn freq(&self, f: Frequency) -> f64 {
        f.in_gamma(self.linewidth_mhz())
    }

    pub fn time(&self, d: Duration) -> f64 {
        d.in_lifetimes(self.linewidth_mhz())
    }

    pub fn time_ps(&self, d: Duration) -> i64 {
        (d.in_ns(self.linewidth_mhz()) * 1e3).round() as i64
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.linewidth_mhz() > 0.0) {
            return bad("atom.linewidth must be > 0".into());
        }
        self.atom_spec().validate().map_err(|e| Error::Config(format!("atom: {e}")))?;
        if !(self.freq(self.medium.gamma_ge) > 0.0) {
            return bad("medium.gamma_ge must be > 0".into());
        }
        if let GammaGs::Fixed(f) = self.medium.gamma_gs {
            if !(self.freq(f) >= 0.0) {
                return bad("medium.gamma_gs must be ≥ 0".into());
            }
        }
        let t = self.medium.calibration_target;
        if !(t > 0.0 && t <= 1.0) {
            return bad(format!("medium.calibration_target must lie in (0, 1], got {t}"));
        }
        if !(self.freq(self.coupling.rabi) >= 0.0) {
            return bad("coupling.rabi must be ≥ 0".into());
        }
        if !(self.freq(self.probe.detuning_step) > 0.0) {
            return bad("probe.detuning_step must be > 0".into());
        }
        if self.freq(self.probe.detuning_max) < self.freq(self.probe.detuning_min) {
            return bad("probe.detuning_max is below probe.detuning_min".into());
        }
        if !(self.freq(self.pulse.bandwidth) > 0.0) {
            return bad("pulse.bandwidth must be > 0".into());
        }
        if !(self.odscan.od_step.0 > 0.0) || self.odscan.od_max.0 < self.odscan.od_min.0 {
            return bad("odscan needs od_step > 0 and od_max ≥ od_min".into());
        }
        if self.tomography.trials == 0 || !(self.tomography.n_total.0 > 0.0) {
            return bad("tomography needs trials ≥ 1 and n_total > 0".into());
        }
        let s = &self.storage;
        if s.z_points < 64 {
            return bad(format!("storage.z_points must be ≥ 64, got {}", s.z_points));
        }
        for (name, d) in [("ramp", s.ramp), ("hold", s.hold), ("readout", s.readout), ("write_start", s.write_start)] {
            if !(self.time(d) >= 0.0) {
                return bad(format!("storage.{name} must be ≥ 0"));
            }
        }
        if !(self.time(s.ramp) > 0.0) {
            return bad("storage.ramp must be > 0".into());
        }
        let c = &self.coincidence;
        if self.time_ps(c.bin_width) <= 0 || self.time_ps(c.window) <= self.time_ps(c.bin_width) {
            return bad("coincidence needs bin_width > 0 and window > bin_width".into());
        }
        if !(self.time(c.pair_spacing) > 0.0) {
            return bad("coincidence.pair_spacing must be > 0".into());
        }
        Ok(())
    }
}

/// Inclusive grid `start, start + step, …` up to `end`, snapping the last
/// point to `end` when it lands within rounding of it.
pub fn inclusive_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}
