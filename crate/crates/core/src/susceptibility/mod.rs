//! Direction-dependent probe susceptibility, transmission and the
//! non-reciprocity metrics derived from them.
//!
//! χ is kept in absorption-normalized units: a two-level atom with unit
//! relative dipole has `χ = -1/(Δ + iγ_ge)`, and a medium of optical depth
//! `od` transmits `T = exp(-od·γ_ge·Im χ)`. The number density, length, k₀,
//! ε₀ and ħ are thereby folded into `od`.

mod oracle;

pub use oracle::{chi_oracle, OracleOptions};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::atom::{AtomSpec, Direction, TransitionTable, TransitionTables};
use crate::error::{Error, Result};
use crate::pulse::SpectralWeights;

/// Probe field seen by the atoms (units of Γ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeParams {
    /// Single-photon detuning Δω_p = ω_p − ω_ge.
    pub detuning: f64,
    pub direction: Direction,
    /// Probe Rabi frequency. Only the master-equation oracle uses it; the
    /// closed form is the linear-response limit.
    pub rabi: f64,
}

impl ProbeParams {
    pub fn new(detuning: f64, direction: Direction) -> Self {
        Self { detuning, direction, rabi: 1e-3 }
    }

    /// Two-photon detuning δ = Δω_p − Δω_c.
    pub fn two_photon_detuning(&self, coupling: &CouplingParams) -> f64 {
        self.detuning - coupling.detuning
    }
}

/// Coupling laser (units of Γ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    /// Rabi frequency Ω_c of the coupling transition paired with the
    /// stretched forward probe link; the other links scale by their CG factors.
    pub rabi: f64,
    pub detuning: f64,
}

impl CouplingParams {
    pub fn resonant(rabi: f64) -> Self {
        Self { rabi, detuning: 0.0 }
    }
}

/// Optical depth and dephasing rates of the medium (units of Γ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MediumParams {
    pub od: f64,
    /// Optical coherence decay γ_ge.
    pub gamma_ge: f64,
    /// Ground-state coherence decay γ_gs.
    pub gamma_gs: f64,
}

impl MediumParams {
    pub fn new(od: f64, gamma_gs: f64) -> Self {
        Self { od, gamma_ge: 0.5, gamma_gs }
    }

    pub fn with_od(self, od: f64) -> Self {
        Self { od, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.od >= 0.0 && self.od.is_finite()) {
            return Err(Error::domain(format!("optical depth must be ≥ 0, got {}", self.od)));
        }
        if !(self.gamma_ge > 0.0) {
            return Err(Error::domain(format!("γ_ge must be > 0, got {}", self.gamma_ge)));
        }
        if !(self.gamma_gs >= 0.0) {
            return Err(Error::domain(format!("γ_gs must be ≥ 0, got {}", self.gamma_gs)));
        }
        Ok(())
    }
}

/// Complex susceptibility in absorption-normalized units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chi(pub Complex64);

impl Chi {
    pub const ZERO: Chi = Chi(Complex64 { re: 0.0, im: 0.0 });

    pub fn re(&self) -> f64 {
        self.0.re
    }

    pub fn im(&self) -> f64 {
        self.0.im
    }
}

/// Response of one Λ link, `4(δ + iγ_gs) / (|Ω_c|² − 4(δ + iγ_gs)(Δ + iγ_ge))`.
/// With `rabi_c = 0` this reduces to the bare two-level `−1/(Δ + iγ_ge)`.
pub fn lambda_term(rabi_c: f64, delta_p: f64, delta_2: f64, medium: &MediumParams) -> Complex64 {
    let two_photon = Complex64::new(delta_2, medium.gamma_gs);
    let optical = Complex64::new(delta_p, medium.gamma_ge);
    let num = 4.0 * two_photon;
    let den = rabi_c * rabi_c - 4.0 * two_photon * optical;
    if num == Complex64::new(0.0, 0.0) {
        return num;
    }
    num / den
}

/// Bare two-level response of an orphan transition.
pub fn two_level_term(delta_p: f64, medium: &MediumParams) -> Complex64 {
    -1.0 / Complex64::new(delta_p, medium.gamma_ge)
}

fn table_chi(probe: &ProbeParams, coupling: &CouplingParams, medium: &MediumParams, table: &TransitionTable) -> Chi {
    let delta_2 = probe.two_photon_detuning(coupling);
    let sum: Complex64 = table
        .links
        .iter()
        .map(|l| {
            let term = match l.coupling {
                Some(c) => lambda_term(coupling.rabi * c.rabi_scale, probe.detuning, delta_2, medium),
                None => two_level_term(probe.detuning, medium),
            };
            l.weight * term
        })
        .sum();
    Chi(table.population * sum)
}

fn check_direction(probe: &ProbeParams, table: &TransitionTable, want: Direction) -> Result<()> {
    if probe.direction != want || table.direction != want {
        return Err(Error::domain(format!(
            "expected {} probe and table, got probe {} / table {}",
            want.name(),
            probe.direction.name(),
            table.direction.name()
        )));
    }
    Ok(())
}

/// Forward susceptibility: population-weighted sum of five Λ-link responses.
pub fn chi_forward(
    probe: &ProbeParams,
    coupling: &CouplingParams,
    medium: &MediumParams,
    table: &TransitionTable,
) -> Result<Chi> {
    check_direction(probe, table, Direction::Forward)?;
    Ok(table_chi(probe, coupling, medium, table))
}

/// Backward susceptibility: four Λ links plus the bare two-level response of
/// the orphan `g_{-2} → e_{-3}` transition.
pub fn chi_backward(
    probe: &ProbeParams,
    coupling: &CouplingParams,
    medium: &MediumParams,
    table: &TransitionTable,
) -> Result<Chi> {
    check_direction(probe, table, Direction::Backward)?;
    Ok(table_chi(probe, coupling, medium, table))
}

/// Dispatches on the probe direction.
pub fn chi(probe: &ProbeParams, coupling: &CouplingParams, medium: &MediumParams, tables: &TransitionTables) -> Chi {
    table_chi(probe, coupling, medium, tables.get(probe.direction))
}

/// Intensity transmission `exp(-od·γ_ge·Im χ)`.
pub fn transmission(chi: Chi, medium: &MediumParams) -> f64 {
    (-medium.od * medium.gamma_ge * chi.im()).exp().min(1.0)
}

/// Field transmission amplitude `exp(i·(od·γ_ge/2)·χ)`, vacuum phase removed.
pub fn field_amplitude(chi: Chi, medium: &MediumParams) -> Complex64 {
    (Complex64::i() * 0.5 * medium.od * medium.gamma_ge * chi.0).exp()
}

/// Resonant-carrier transmission averaged over a wave packet's power spectrum.
pub fn pulse_transmission(
    direction: Direction,
    coupling: &CouplingParams,
    medium: &MediumParams,
    tables: &TransitionTables,
    spectrum: &SpectralWeights,
) -> f64 {
    spectrum.average(|d| {
        let probe = ProbeParams::new(d, direction);
        transmission(chi(&probe, coupling, medium, tables), medium)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    pub detuning: f64,
    pub transmission: f64,
    pub chi: Chi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub direction: Direction,
    pub rows: Vec<SpectrumRow>,
}

impl SpectrumTable {
    pub fn argmax(&self) -> Option<&SpectrumRow> {
        self.rows.iter().max_by(|a, b| a.transmission.total_cmp(&b.transmission))
    }

    pub fn argmin(&self) -> Option<&SpectrumRow> {
        self.rows.iter().min_by(|a, b| a.transmission.total_cmp(&b.transmission))
    }
}

/// Largest probe detuning the spectrum scans are meant for, 2π×25 MHz on Rb D1.
const SCAN_LIMIT: f64 = 25.0 / crate::units::RB85_D1_LINEWIDTH_MHZ;

/// Transmission spectrum versus probe detuning. The coupling detuning is
/// taken from `coupling`, so a resonant coupling scans δ = Δω_p.
pub fn scan_spectrum(
    direction: Direction,
    grid: &[f64],
    coupling: &CouplingParams,
    medium: &MediumParams,
    tables: &TransitionTables,
) -> Result<SpectrumTable> {
    medium.validate()?;
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("detuning grid must be strictly increasing"));
    }
    if grid.iter().any(|d| d.abs() > SCAN_LIMIT) {
        log::warn!("detuning grid extends beyond ±{SCAN_LIMIT:.2}Γ");
    }
    let rows = grid
        .par_iter()
        .map(|&d| {
            let probe = ProbeParams::new(d, direction);
            let chi = chi(&probe, coupling, medium, tables);
            SpectrumRow { detuning: d, transmission: transmission(chi, medium), chi }
        })
        .collect();
    Ok(SpectrumTable { direction, rows })
}

/// Pulse-integrated transmissions for one optical depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseIntegrated {
    pub t_fw: f64,
    pub t_bw: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdScanRow {
    pub od: f64,
    /// Resonant transmissions and the contrast computed from them.
    pub t_fw: f64,
    pub t_bw: f64,
    pub eta: f64,
    pub pulse: Option<PulseIntegrated>,
}

/// Resonant (and optionally pulse-integrated) transmissions versus optical
/// depth. `medium` supplies the dephasing rates; its `od` is ignored.
pub fn scan_od(
    grid: &[f64],
    coupling: &CouplingParams,
    medium: &MediumParams,
    tables: &TransitionTables,
    spectrum: Option<&SpectralWeights>,
) -> Result<Vec<OdScanRow>> {
    if grid.iter().any(|od| !(*od >= 0.0)) {
        return Err(Error::domain("optical depths must be ≥ 0"));
    }
    grid.iter()
        .map(|&od| {
            let m = medium.with_od(od);
            m.validate()?;
            let res = |dir| {
                let probe = ProbeParams::new(coupling.detuning, dir);
                transmission(chi(&probe, coupling, &m, tables), &m)
            };
            let (t_fw, t_bw) = (res(Direction::Forward), res(Direction::Backward));
            let pulse = match spectrum {
                Some(s) => {
                    let pf = pulse_transmission(Direction::Forward, coupling, &m, tables, s);
                    let pb = pulse_transmission(Direction::Backward, coupling, &m, tables, s);
                    Some(PulseIntegrated { t_fw: pf, t_bw: pb, eta: contrast_eta(pf, pb)? })
                }
                None => None,
            };
            Ok(OdScanRow { od, t_fw, t_bw, eta: contrast_eta(t_fw, t_bw)?, pulse })
        })
        .collect()
}

/// Contrast `(CC_fw − CC_bw)/(CC_fw + CC_bw)`.
pub fn contrast_eta(cc_fw: f64, cc_bw: f64) -> Result<f64> {
    if cc_fw < 0.0 || cc_bw < 0.0 {
        return Err(Error::domain("coincidence counts must be ≥ 0"));
    }
    let total = cc_fw + cc_bw;
    if !(total > 0.0) {
        return Err(Error::domain("contrast undefined: both count totals are zero"));
    }
    Ok((cc_fw - cc_bw) / total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Isolation {
    pub db: f64,
    /// No backward counts: the isolation is reported as +∞.
    pub unbounded: bool,
}

/// Isolation `10·log₁₀(CC_in/CC_bw)` in dB.
pub fn isolation_db(cc_in: f64, cc_bw: f64) -> Result<Isolation> {
    if !(cc_in > 0.0) {
        return Err(Error::domain("isolation needs a positive input count"));
    }
    if cc_bw < 0.0 {
        return Err(Error::domain("coincidence counts must be ≥ 0"));
    }
    if cc_bw == 0.0 {
        return Ok(Isolation { db: f64::INFINITY, unbounded: true });
    }
    Ok(Isolation { db: 10.0 * (cc_in / cc_bw).log10(), unbounded: false })
}

/// Resonant forward transmission for a given ground-state dephasing.
pub fn resonant_forward_transmission(
    gamma_gs: f64,
    od: f64,
    gamma_ge: f64,
    coupling: &CouplingParams,
    tables: &TransitionTables,
) -> f64 {
    let medium = MediumParams { od, gamma_ge, gamma_gs };
    let probe = ProbeParams::new(coupling.detuning, Direction::Forward);
    transmission(chi(&probe, coupling, &medium, tables), &medium)
}

/// Finds the ground-state dephasing γ_gs ∈ [0, Γ) for which the resonant
/// forward transmission equals `target`. The transmission falls
/// monotonically with γ_gs, so bisection converges unconditionally.
pub fn calibrate_gamma_gs(
    target: f64,
    od: f64,
    gamma_ge: f64,
    coupling: &CouplingParams,
    atom: &AtomSpec,
) -> Result<f64> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::Calibration(format!("target transmission {target} not in (0, 1]")));
    }
    let tables = TransitionTables::new(atom)?;
    let f = |g: f64| resonant_forward_transmission(g, od, gamma_ge, coupling, &tables) - target;
    let (mut lo, mut hi) = (0.0, 1.0);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo <= 0.0 {
        if f_lo.abs() < 1e-15 {
            return Ok(0.0);
        }
        return Err(Error::Calibration(format!(
            "even γ_gs = 0 transmits only {:.6} < {target}",
            f_lo + target
        )));
    }
    if f_hi > 0.0 {
        return Err(Error::Calibration(format!(
            "no root in (0, Γ): γ_gs = Γ still transmits {:.6}",
            f_hi + target
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
