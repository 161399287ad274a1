//! The dual-rail non-reciprocal apparatus as a channel on polarization qubits.
//!
//! A beam displacer splits H into rail L and V into rail R. Both rails are
//! converted to the same circular polarization before the atoms, so each
//! picks up the direction-dependent field amplitude of the medium, and a
//! second displacer recombines them. For a monochromatic probe the channel is
//! a single Kraus operator `diag(t_L, t_R·e^{iφ_LR})`; a wave packet averages
//! that operator over its power spectrum.

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::atom::{AtomSpec, Direction, TransitionTables};
use crate::error::{Error, Result};
use crate::pulse::SpectralWeights;
use crate::qubit::QubitState;
use crate::susceptibility::{chi, contrast_eta, field_amplitude, CouplingParams, MediumParams, ProbeParams};

/// Transmissions below this are treated as total absorption.
const ISOLATED_BELOW: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct Nraq {
    pub tables: TransitionTables,
    pub coupling: CouplingParams,
    pub medium: MediumParams,
    /// Relative interferometer phase between the rails.
    pub phase_lr: f64,
    /// Amplitude of rail R relative to rail L (1 for a balanced device).
    pub rail_ratio: f64,
    /// Common optical amplitude transmission of displacers and waveplates.
    pub loss_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelResult {
    /// Probability that the photon exits the device.
    pub transmission: f64,
    /// Renormalized output state; `None` when the photon is absorbed.
    pub rho_out: Option<QubitState>,
    /// Rail amplitudes `(t_L, t_R)` at the carrier frequency.
    pub raw_amplitudes: (Complex64, Complex64),
}

impl ChannelResult {
    pub fn isolated(&self) -> bool {
        self.rho_out.is_none()
    }
}

impl Nraq {
    pub fn new(atom: &AtomSpec, coupling: CouplingParams, medium: MediumParams) -> Result<Self> {
        medium.validate()?;
        Ok(Self {
            tables: TransitionTables::new(atom)?,
            coupling,
            medium,
            phase_lr: 0.0,
            rail_ratio: 1.0,
            loss_amplitude: 1.0,
        })
    }

    /// Field amplitude of the medium for a spectral component at `detuning`.
    pub fn medium_amplitude(&self, direction: Direction, detuning: f64) -> Complex64 {
        let probe = ProbeParams::new(self.coupling.detuning + detuning, direction);
        field_amplitude(chi(&probe, &self.coupling, &self.medium, &self.tables), &self.medium)
    }

    fn kraus(&self, direction: Direction, detuning: f64) -> Matrix2<Complex64> {
        let t = self.loss_amplitude * self.medium_amplitude(direction, detuning);
        let r = t * self.rail_ratio * Complex64::from_polar(1.0, self.phase_lr);
        Matrix2::new(t, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), r)
    }

    /// Unnormalized output `Σ_k p_k K_k ρ K_k†`.
    pub fn apply_unnormalized(
        &self,
        rho: &Matrix2<Complex64>,
        direction: Direction,
        spectrum: &SpectralWeights,
    ) -> Matrix2<Complex64> {
        let mut out = Matrix2::zeros();
        for (&d, &p) in spectrum.detuning.iter().zip(&spectrum.weight) {
            if p > 0.0 {
                let k = self.kraus(direction, d);
                out += k * rho * k.adjoint() * Complex64::new(p, 0.0);
            }
        }
        out
    }

    /// Passes a qubit through the device.
    pub fn apply(&self, state: &QubitState, direction: Direction, spectrum: &SpectralWeights) -> Result<ChannelResult> {
        if !(self.rail_ratio >= 0.0 && self.loss_amplitude >= 0.0) {
            return Err(Error::domain("rail amplitudes must be ≥ 0"));
        }
        let out = self.apply_unnormalized(state.matrix(), direction, spectrum);
        let transmission = out.trace().re.clamp(0.0, 1.0);
        let k = self.kraus(direction, 0.0);
        let raw_amplitudes = (k[(0, 0)], k[(1, 1)]);
        if transmission < ISOLATED_BELOW {
            return Ok(ChannelResult { transmission: 0.0, rho_out: None, raw_amplitudes });
        }
        let mut rho = out / Complex64::new(out.trace().re, 0.0);
        // restore exact Hermiticity lost to rounding
        rho = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
        Ok(ChannelResult { transmission, rho_out: Some(QubitState::new(rho)?), raw_amplitudes })
    }

    /// Contrast of forward and backward transmissions for one input state.
    pub fn contrast(&self, state: &QubitState, spectrum: &SpectralWeights) -> Result<f64> {
        let fw = self.apply(state, Direction::Forward, spectrum)?.transmission;
        let bw = self.apply(state, Direction::Backward, spectrum)?.transmission;
        contrast_eta(fw, bw)
    }
}

/// Monochromatic channel at the coupling resonance.
pub fn nraq_apply(
    state: &QubitState,
    direction: Direction,
    coupling: &CouplingParams,
    medium: &MediumParams,
    phase_lr: f64,
) -> Result<ChannelResult> {
    let mut dev = Nraq::new(&AtomSpec::rb85_d1(), *coupling, *medium)?;
    dev.phase_lr = phase_lr;
    dev.apply(state, direction, &SpectralWeights::monochromatic())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub value: f64,
    /// The raw ratio exceeded one (a statistical fluctuation) and was clipped.
    pub clipped: bool,
}

/// `T = CC_fw / CC_in`.
pub fn transmission_rate(cc_out: f64, cc_in: f64) -> Result<Rate> {
    if !(cc_in > 0.0) {
        return Err(Error::domain("transmission rate needs positive input counts"));
    }
    if cc_out < 0.0 {
        return Err(Error::domain("coincidence counts must be ≥ 0"));
    }
    let r = cc_out / cc_in;
    if r > 1.0 {
        log::warn!("transmitted counts exceed input counts ({cc_out} > {cc_in}); clipping to 1");
        return Ok(Rate { value: 1.0, clipped: true });
    }
    Ok(Rate { value: r, clipped: false })
}
