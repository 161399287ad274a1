//! Command-line front end: `nrq <subcommand> --config <toml> --out <csv>`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};

use crate::atom::{AtomSpec, Direction, TransitionTables};
use crate::channel::Nraq;
use crate::coincidence::{cross_correlate, integrate_counts, PairSource, WaveformSampler};
use crate::config::{inclusive_grid, Config, CountNoise, GammaGs, StorageMode};
use crate::error::{Error, Result};
use crate::io;
use crate::pulse::{default_grid, make_pulse, PulseWaveform, SpectralWeights};
use crate::qubit::fidelity;
use crate::storage::{simulate_eit_storage, CouplingTimeline, StorageMedium, WriteRead};
use crate::susceptibility::{
    calibrate_gamma_gs, contrast_eta, isolation_db, pulse_transmission, scan_od, scan_spectrum, CouplingParams,
    MediumParams,
};
use crate::tomography::{expected_counts, reconstruct_against, BasisCounts};

/// Exit status for each error class.
pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io(_) | Error::Csv(_) => EXIT_IO,
        Error::Domain(_) | Error::Numerical(_) | Error::Calibration(_) => EXIT_NUMERICAL,
    }
}

#[derive(Debug, Parser)]
#[command(name = "nrq", version, about = "Non-reciprocal EIT qubit simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV file. Some subcommands write companion files next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for every random draw.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transmission spectrum versus probe detuning.
    Spectrum(Common),
    /// Transmissions and contrast versus optical depth.
    Odscan(Common),
    /// Polarization qubits through the device in both directions.
    Qubit(Common),
    /// Qubit tomography with Monte-Carlo uncertainty.
    Tomo(Common),
    /// Slow-light and storage propagation.
    Storage(Common),
    /// Coincidence histogram from time tags.
    Coincidence(Common),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Spectrum(c)
            | Command::Odscan(c)
            | Command::Qubit(c)
            | Command::Tomo(c)
            | Command::Storage(c)
            | Command::Coincidence(c) => c,
        }
    }
}

/// Physical inputs resolved from a configuration.
#[derive(Debug, Clone)]
pub struct Setup {
    pub atom: AtomSpec,
    pub tables: TransitionTables,
    pub coupling: CouplingParams,
    pub medium: MediumParams,
    pub pulse: PulseWaveform,
    pub spectrum: SpectralWeights,
    pub linewidth_mhz: f64,
}

impl Setup {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let atom = cfg.atom_spec();
        let tables = TransitionTables::new(&atom)?;
        let coupling = CouplingParams { rabi: cfg.freq(cfg.coupling.rabi), detuning: cfg.freq(cfg.coupling.detuning) };
        let od = cfg.medium.od.0;
        let gamma_ge = cfg.freq(cfg.medium.gamma_ge);
        let gamma_gs = match cfg.medium.gamma_gs {
            GammaGs::Fixed(f) => cfg.freq(f),
            GammaGs::Calibrate => {
                let g = calibrate_gamma_gs(cfg.medium.calibration_target, od, gamma_ge, &coupling, &atom)?;
                log::info!("calibrated γ_gs = {g:.6} Γ for T_fw = {}", cfg.medium.calibration_target);
                g
            }
        };
        let medium = MediumParams { od, gamma_ge, gamma_gs };
        medium.validate()?;
        let bw = cfg.freq(cfg.pulse.bandwidth);
        let shape = cfg.pulse.shape.0;
        let pulse = make_pulse(bw, shape, default_grid(bw, shape)?, 0.0)?;
        let spectrum = SpectralWeights::from_waveform(&pulse, 8);
        Ok(Self { atom, tables, coupling, medium, pulse, spectrum, linewidth_mhz: cfg.linewidth_mhz() })
    }

    /// Power spectrum used for channel calculations.
    fn weights(&self, pulse_integrated: bool) -> SpectralWeights {
        if pulse_integrated {
            self.spectrum.clone()
        } else {
            SpectralWeights::monochromatic()
        }
    }
}

/// `<stem>_<suffix>.csv` next to `out`.
pub fn companion(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}_{suffix}.csv"))
}

pub fn run(cli: &Cli) -> Result<()> {
    let common = cli.command.common();
    let cfg = Config::load(&common.config)?;
    let setup = Setup::from_config(&cfg)?;
    let out = common.out.as_path();
    match cli.command {
        Command::Spectrum(_) => run_spectrum(&cfg, &setup, out),
        Command::Odscan(_) => run_odscan(&cfg, &setup, out),
        Command::Qubit(_) => run_qubit(&cfg, &setup, out),
        Command::Tomo(_) => run_tomo(&cfg, &setup, out, common.seed),
        Command::Storage(_) => run_storage(&cfg, &setup, out),
        Command::Coincidence(_) => run_coincidence(&cfg, &setup, out, common.seed),
    }
}

fn run_spectrum(cfg: &Config, s: &Setup, out: &Path) -> Result<()> {
    let p = &cfg.probe;
    let grid = inclusive_grid(cfg.freq(p.detuning_min), cfg.freq(p.detuning_max), cfg.freq(p.detuning_step));
    let table = scan_spectrum(p.direction.0, &grid, &s.coupling, &s.medium, &s.tables)?;
    if let (Some(hi), Some(lo)) = (table.argmax(), table.argmin()) {
        log::info!(
            "{}: max T = {:.4} at {:.3} MHz, min T = {:.4} at {:.3} MHz",
            table.direction.name(),
            hi.transmission,
            crate::units::gamma_to_mhz(hi.detuning, s.linewidth_mhz),
            lo.transmission,
            crate::units::gamma_to_mhz(lo.detuning, s.linewidth_mhz)
        );
    }
    io::write_spectrum(out, &table, s.linewidth_mhz)
}

fn run_odscan(cfg: &Config, s: &Setup, out: &Path) -> Result<()> {
    let o = &cfg.odscan;
    let grid = inclusive_grid(o.od_min.0, o.od_max.0, o.od_step.0);
    let spec = o.pulse_integrated.then_some(&s.spectrum);
    let rows = scan_od(&grid, &s.coupling, &s.medium, &s.tables, spec)?;
    io::write_odscan(out, &rows)
}

pub const QUBIT_HEADER: [&str; 6] = ["state", "T_fw", "T_bw", "eta", "isolation_dB", "fidelity_fw"];

fn run_qubit(cfg: &Config, s: &Setup, out: &Path) -> Result<()> {
    let q = &cfg.qubit;
    let mut dev = Nraq::new(&s.atom, s.coupling, s.medium)?;
    dev.phase_lr = q.phase_lr;
    dev.rail_ratio = q.rail_ratio.0;
    dev.loss_amplitude = q.loss_amplitude.0;
    let w = s.weights(q.pulse_integrated);
    let mut rows = Vec::new();
    for (k, state) in q.states.iter().enumerate() {
        let fw = dev.apply(&state.0, Direction::Forward, &w)?;
        let bw = dev.apply(&state.0, Direction::Backward, &w)?;
        let f = match &fw.rho_out {
            Some(r) => fidelity(r, &state.0)?,
            None => f64::NAN,
        };
        let iso = isolation_db(1.0, bw.transmission)?;
        rows.push([
            state_label(&state.0, k),
            fw.transmission.to_string(),
            bw.transmission.to_string(),
            contrast_eta(fw.transmission, bw.transmission)?.to_string(),
            iso.db.to_string(),
            f.to_string(),
        ]);
    }
    io::write_rows(out, &QUBIT_HEADER, rows)
}

fn state_label(state: &crate::qubit::QubitState, k: usize) -> String {
    use crate::qubit::QubitState as Q;
    let named = [("H", Q::h()), ("V", Q::v()), ("D", Q::d()), ("A", Q::a()), ("R", Q::r()), ("L", Q::l())];
    named
        .iter()
        .find(|(_, q)| q == state)
        .map_or_else(|| format!("state{k}"), |(n, _)| (*n).to_string())
}

/// Counts for the tomography run: from a file, from the config, or generated
/// by sending `tomography.state` forward through the device.
pub fn tomography_counts(cfg: &Config, s: &Setup, seed: u64) -> Result<BasisCounts> {
    let t = &cfg.tomography;
    if let Some(p) = &t.counts_file {
        return io::read_counts(p);
    }
    if let Some(c) = t.counts {
        return BasisCounts::new(c.h.0, c.v.0, c.d.0, c.r.0);
    }
    let dev = Nraq::new(&s.atom, s.coupling, s.medium)?;
    let res = dev.apply(&t.state.0, Direction::Forward, &s.weights(cfg.qubit.pulse_integrated))?;
    let rho = res.rho_out.ok_or_else(|| Error::numerical("no photons transmitted; nothing to reconstruct"))?;
    let mean = expected_counts(&rho, t.n_total.0 * res.transmission)?;
    Ok(match t.noise {
        CountNoise::None => mean,
        CountNoise::Poisson => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let mut draw = |m: f64| if m > 0.0 { Poisson::new(m).map(|p| p.sample(&mut rng)).unwrap_or(0.0) } else { 0.0 };
            BasisCounts { h: draw(mean.h), v: draw(mean.v), d: draw(mean.d), r: draw(mean.r) }
        }
    })
}

fn run_tomo(cfg: &Config, s: &Setup, out: &Path, seed: u64) -> Result<()> {
    let t = &cfg.tomography;
    let counts = tomography_counts(cfg, s, seed)?;
    let res = reconstruct_against(&counts, &t.target.0, t.trials, seed)?;
    let m = res.rho.matrix();
    let real = |x: f64| Complex64::new(x, 0.0);
    let entries = vec![
        ("rho_HH".to_string(), m[(0, 0)]),
        ("rho_HV".to_string(), m[(0, 1)]),
        ("rho_VH".to_string(), m[(1, 0)]),
        ("rho_VV".to_string(), m[(1, 1)]),
        ("fidelity".to_string(), real(res.fidelity_vs_target.unwrap_or(f64::NAN))),
        ("sigma_fidelity".to_string(), real(res.sigma_fidelity.unwrap_or(f64::NAN))),
        ("projected".to_string(), real(if res.projected { 1.0 } else { 0.0 })),
    ];
    io::write_tomo(out, &entries)
}

/// Storage medium, timeline and input pulse described by a configuration.
pub fn storage_inputs(cfg: &Config, s: &Setup) -> (StorageMedium, CouplingTimeline) {
    let st = &cfg.storage;
    let medium = StorageMedium {
        od: st.od.0,
        gamma_ge: s.medium.gamma_ge,
        gamma_gs: s.medium.gamma_gs,
        detuning: s.coupling.detuning,
        atom: s.atom,
        resolution: st.resolution.0,
    };
    let readout = cfg.time(st.readout);
    let timeline = match st.mode {
        StorageMode::Store => CouplingTimeline::store_and_read(
            s.coupling.rabi,
            WriteRead { off_start: cfg.time(st.write_start), ramp: cfg.time(st.ramp), hold: cfg.time(st.hold) },
            readout,
        ),
        StorageMode::SlowLight => CouplingTimeline::constant(s.coupling.rabi, s.pulse.grid.end() + readout),
    };
    (medium, timeline)
}

fn run_storage(cfg: &Config, s: &Setup, out: &Path) -> Result<()> {
    let (medium, timeline) = storage_inputs(cfg, s);
    let res = simulate_eit_storage(&s.pulse, &timeline, &medium, cfg.storage.direction.0, cfg.storage.z_points)?;
    log::info!(
        "efficiency {:.4}, leaked {:.4}, absorbed {:.4}, balance {:.2e}",
        res.efficiency,
        res.leaked_fraction,
        res.absorbed_fraction,
        res.balance() - 1.0
    );
    io::write_waveform(out, &res.output, s.linewidth_mhz)?;
    let summary = [
        ("efficiency", res.efficiency),
        ("leaked_fraction", res.leaked_fraction),
        ("absorbed_fraction", res.absorbed_fraction),
        ("residual_fraction", res.residual_fraction),
        ("stored_fraction", res.stored_fraction),
        ("input_centroid_ns", crate::units::gamma_time_to_ns(s.pulse.centroid(), s.linewidth_mhz)),
        ("output_centroid_ns", crate::units::gamma_time_to_ns(res.output.centroid(), s.linewidth_mhz)),
    ];
    io::write_rows(&companion(out, "summary"), &["quantity", "value"], summary.iter().map(|(n, v)| [n.to_string(), v.to_string()]))?;
    let n = res.spinwave_snapshot.len();
    io::write_rows(
        &companion(out, "spinwave"),
        &["z", "re", "im"],
        res.spinwave_snapshot.iter().enumerate().map(|(k, a)| [((k as f64 + 0.5) / n as f64).to_string(), a.re.to_string(), a.im.to_string()]),
    )
}

fn run_coincidence(cfg: &Config, s: &Setup, out: &Path, seed: u64) -> Result<()> {
    let c = &cfg.coincidence;
    let stream = match &c.tags {
        Some(p) => io::read_tags(p)?,
        None => {
            let t = pulse_transmission(c.direction.0, &s.coupling, &s.medium, &s.tables, &s.spectrum);
            let src = PairSource {
                n_pairs: c.n_pairs,
                mean_spacing_ps: cfg.time_ps(c.pair_spacing) as f64,
                offset_ps: cfg.time_ps(c.offset),
                transmission: t,
                shape: Some(WaveformSampler::new(&s.pulse, s.linewidth_mhz)?),
            };
            let stream = src.generate(&mut ChaCha20Rng::seed_from_u64(seed))?;
            if c.save_tags {
                io::write_tags(&companion(out, "tags"), &stream)?;
            }
            stream
        }
    };
    let hist = cross_correlate(&stream, cfg.time_ps(c.bin_width), cfg.time_ps(c.window))?;
    let offset_ns = cfg.time_ps(c.offset) as f64 * 1e-3;
    log::info!(
        "{} coincidences in window, {} at delay ≥ {offset_ns} ns",
        hist.total(),
        integrate_counts(&hist, (offset_ns, hist.span_ns().1))
    );
    io::write_histogram(out, &hist)
}
