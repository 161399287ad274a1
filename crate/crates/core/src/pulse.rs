//! Single-photon wave packets on a uniform time grid and their spectra.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, len: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain(format!("time step must be positive, got {dt}")));
        }
        if len < 2 {
            return Err(Error::domain("time grid needs at least two samples"));
        }
        Ok(Self { t0, dt, len })
    }

    /// Grid covering `[t0, t1]` with step close to `dt_max`.
    pub fn spanning(t0: f64, t1: f64, dt_max: f64) -> Result<Self> {
        if !(t1 > t0) {
            return Err(Error::domain("empty time span"));
        }
        let n = ((t1 - t0) / dt_max).ceil() as usize;
        Self::new(t0, (t1 - t0) / n as f64, n + 1)
    }

    pub fn t(&self, i: usize) -> f64 {
        self.t0 + self.dt * i as f64
    }

    pub fn end(&self) -> f64 {
        self.t(self.len - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.t(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseShape {
    /// Transform-limited Gaussian envelope centred on the reference time.
    Gaussian,
    /// Sharp onset at the reference time followed by an exponential decay,
    /// the shape of a heralded photon from spontaneous four-wave mixing.
    ExpDecay,
}

impl std::str::FromStr for PulseShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(PulseShape::Gaussian),
            "exp-decay" | "exp_decay" | "exponential" => Ok(PulseShape::ExpDecay),
            other => Err(Error::domain(format!("unknown pulse shape `{other}`"))),
        }
    }
}

/// Time-sampled complex field envelope. `|amp|²` is a photon flux, so
/// `Σ|amp|²·dt` is the photon number carried by the pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseWaveform {
    pub grid: TimeGrid,
    pub amp: Vec<Complex64>,
}

impl PulseWaveform {
    pub fn new(grid: TimeGrid, amp: Vec<Complex64>) -> Result<Self> {
        if amp.len() != grid.len {
            return Err(Error::domain(format!(
                "waveform has {} samples for a grid of {}",
                amp.len(),
                grid.len
            )));
        }
        Ok(Self { grid, amp })
    }

    pub fn energy(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dt
    }

    /// Energy of the samples with `start ≤ t < end`.
    pub fn energy_between(&self, start: f64, end: f64) -> f64 {
        self.amp
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let t = self.grid.t(*i);
                t >= start && t < end
            })
            .map(|(_, a)| a.norm_sqr())
            .sum::<f64>()
            * self.grid.dt
    }

    /// Intensity-weighted mean arrival time.
    pub fn centroid(&self) -> f64 {
        let (mut w, mut wt) = (0.0, 0.0);
        for (i, a) in self.amp.iter().enumerate() {
            let p = a.norm_sqr();
            w += p;
            wt += p * self.grid.t(i);
        }
        wt / w
    }

    pub fn peak_time(&self) -> f64 {
        let (i, _) = self
            .amp
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, a)| {
                if a.norm_sqr() > best.1 {
                    (i, a.norm_sqr())
                } else {
                    best
                }
            });
        self.grid.t(i)
    }
}

/// Builds a unit-energy wave packet.
///
/// `bandwidth` is the full width at half maximum of the spectral amplitude
/// `|E(ω)|` in angular units of Γ. `t_ref` is the centre of a Gaussian or the
/// onset of an exponential decay. The grid must resolve the pulse with at
/// least 8 samples per `1/bandwidth`.
pub fn make_pulse(
    bandwidth: f64,
    shape: PulseShape,
    grid: TimeGrid,
    t_ref: f64,
) -> Result<PulseWaveform> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::domain(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let per_width = 1.0 / (bandwidth * grid.dt);
    if per_width < 8.0 {
        return Err(Error::domain(format!(
            "grid too coarse: {per_width:.2} samples per 1/bandwidth (need 8); use dt ≤ {:.4}",
            1.0 / (8.0 * bandwidth)
        )));
    }
    let amp: Vec<Complex64> = match shape {
        PulseShape::Gaussian => {
            // |E(ω)| ∝ exp(-ω²σ²/2), FWHM = 2√(2 ln 2)/σ
            let sigma = 2.0 * (2.0 * std::f64::consts::LN_2).sqrt() / bandwidth;
            grid.times()
                .map(|t| Complex64::new((-(t - t_ref).powi(2) / (2.0 * sigma * sigma)).exp(), 0.0))
                .collect()
        }
        PulseShape::ExpDecay => {
            // E(t) = e^{-a t}: |E(ω)| ∝ 1/√(a² + ω²), FWHM = 2√3·a
            let a = bandwidth / (2.0 * 3f64.sqrt());
            grid.times()
                .map(|t| {
                    if t >= t_ref {
                        Complex64::new((-a * (t - t_ref)).exp(), 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect()
        }
    };
    let mut pulse = PulseWaveform::new(grid, amp)?;
    let e = pulse.energy();
    if !(e > 0.0) {
        return Err(Error::domain("pulse has no support on the grid"));
    }
    let scale = 1.0 / e.sqrt();
    for a in &mut pulse.amp {
        *a *= scale;
    }
    Ok(pulse)
}

/// Grid long and fine enough to hold a bandwidth-matched pulse with
/// negligible truncation, starting at `t_ref = 0`.
pub fn default_grid(bandwidth: f64, shape: PulseShape) -> Result<TimeGrid> {
    let dt = (1.0 / (16.0 * bandwidth)).min(0.02);
    match shape {
        PulseShape::Gaussian => {
            let sigma = 2.0 * (2.0 * std::f64::consts::LN_2).sqrt() / bandwidth;
            TimeGrid::spanning(-8.0 * sigma, 8.0 * sigma, dt)
        }
        PulseShape::ExpDecay => {
            let a = bandwidth / (2.0 * 3f64.sqrt());
            // intensity e^{-2at} down to 1e-14
            TimeGrid::spanning(-dt, 16.2 / a, dt)
        }
    }
}

/// Normalized power spectrum of a wave packet sampled on a fine frequency
/// grid. Weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWeights {
    /// Detuning of each spectral component from the carrier (units Γ).
    pub detuning: Vec<f64>,
    pub weight: Vec<f64>,
}

impl SpectralWeights {
    /// Zero-pads the waveform by at least `pad` and takes its spectrum. A
    /// component `e^{-iωt}` sits at detuning `+ω`.
    pub fn from_waveform(pulse: &PulseWaveform, pad: usize) -> Self {
        let spec = spectrum(pulse, pad);
        let total: f64 = spec.iter().map(|(_, a)| a.norm_sqr()).sum();
        let (detuning, weight) = spec
            .into_iter()
            .map(|(w, a)| (w, a.norm_sqr() / total))
            .unzip();
        Self { detuning, weight }
    }

    /// Single monochromatic component at the carrier.
    pub fn monochromatic() -> Self {
        Self { detuning: vec![0.0], weight: vec![1.0] }
    }

    /// Spectrally averaged value of `f(detuning)`.
    pub fn average(&self, f: impl Fn(f64) -> f64 + Sync) -> f64 {
        use rayon::prelude::*;
        self.detuning
            .par_iter()
            .zip(self.weight.par_iter())
            .map(|(&d, &w)| if w > 0.0 { w * f(d) } else { 0.0 })
            .sum()
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }
}

/// `E(ω) = Σ E(t) e^{iωt} dt` on the zero-padded FFT frequency grid, sorted by ω.
pub fn spectrum(pulse: &PulseWaveform, pad: usize) -> Vec<(f64, Complex64)> {
    let n = (pulse.amp.len() * pad.max(1)).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..pulse.amp.len()].copy_from_slice(&pulse.amp);
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let dt = pulse.grid.dt;
    let dw = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    let mut out: Vec<(f64, Complex64)> = buf
        .into_iter()
        .enumerate()
        .map(|(k, x)| {
            let kk = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
            // forward FFT uses e^{-2πikn/N}, i.e. ω = -2πk/(N dt)
            let w = -kk * dw;
            (w, x * dt * Complex64::from_polar(1.0, w * pulse.grid.t0))
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// FWHM of `|E(ω)|` with linear interpolation between spectral samples.
pub fn spectral_fwhm(pulse: &PulseWaveform, pad: usize) -> f64 {
    let spec = spectrum(pulse, pad);
    let mag: Vec<f64> = spec.iter().map(|(_, a)| a.norm()).collect();
    let (ipk, &peak) = mag
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let half = peak / 2.0;
    let cross = |range: Box<dyn Iterator<Item = usize>>, step: isize| -> f64 {
        for i in range {
            let j = (i as isize + step) as usize;
            if mag[j] < half {
                let (w0, w1) = (spec[i].0, spec[j].0);
                let f = (mag[i] - half) / (mag[i] - mag[j]);
                return w0 + f * (w1 - w0);
            }
        }
        f64::NAN
    };
    let hi = cross(Box::new(ipk..mag.len() - 1), 1);
    let lo = cross(Box::new((1..=ipk).rev()), -1);
    hi - lo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_energy() {
        for shape in [PulseShape::Gaussian, PulseShape::ExpDecay] {
            let bw = 0.278;
            let p = make_pulse(bw, shape, default_grid(bw, shape).unwrap(), 0.0).unwrap();
            assert!((p.energy() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn gaussian_bandwidth_matches_fft() {
        let bw = 0.278;
        let p = make_pulse(bw, PulseShape::Gaussian, default_grid(bw, PulseShape::Gaussian).unwrap(), 0.0)
            .unwrap();
        let fwhm = spectral_fwhm(&p, 8);
        assert!((fwhm / bw - 1.0).abs() < 0.02, "fwhm {fwhm}");
    }

    #[test]
    fn exp_decay_bandwidth_matches_fft() {
        let bw = 0.278;
        let p = make_pulse(bw, PulseShape::ExpDecay, default_grid(bw, PulseShape::ExpDecay).unwrap(), 0.0)
            .unwrap();
        let fwhm = spectral_fwhm(&p, 8);
        assert!((fwhm / bw - 1.0).abs() < 0.02, "fwhm {fwhm}");
    }

    #[test]
    fn exp_decay_is_front_loaded() {
        let bw = 0.278;
        let p = make_pulse(bw, PulseShape::ExpDecay, default_grid(bw, PulseShape::ExpDecay).unwrap(), 0.0)
            .unwrap();
        // sharp rise, slow tail: the peak precedes the centroid
        assert!(p.peak_time() < 0.05);
        assert!(p.centroid() > 5.0 * p.peak_time().max(p.grid.dt));
        let g = make_pulse(bw, PulseShape::Gaussian, default_grid(bw, PulseShape::Gaussian).unwrap(), 0.0)
            .unwrap();
        assert!((g.centroid() - g.peak_time()).abs() < 2.0 * g.grid.dt);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
        assert!(make_pulse(0.5, PulseShape::Gaussian, grid, 50.0).is_err());
        assert!(make_pulse(0.0, PulseShape::Gaussian, grid, 50.0).is_err());
    }

    #[test]
    fn spectral_weights_are_normalized_and_centred() {
        let bw = 0.278;
        let p = make_pulse(bw, PulseShape::Gaussian, default_grid(bw, PulseShape::Gaussian).unwrap(), 0.0)
            .unwrap();
        let s = SpectralWeights::from_waveform(&p, 4);
        assert!((s.weight.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mean = s.average(|d| d);
        assert!(mean.abs() < 1e-9);
        // power spectrum of the Gaussian has rms width √2·σ_ω with σ_ω = FWHM_amp/(2√(2ln2))
        let sigma_amp = bw / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        let var = s.average(|d| d * d);
        assert!((var / (sigma_amp * sigma_amp / 2.0) - 1.0).abs() < 1e-3, "{var}");
    }

    #[test]
    fn carrier_offset_shifts_spectrum() {
        let bw = 0.278;
        let mut p = make_pulse(bw, PulseShape::Gaussian, default_grid(bw, PulseShape::Gaussian).unwrap(), 0.0)
            .unwrap();
        // e^{-iω₀t} moves the spectrum to +ω₀
        for (i, a) in p.amp.iter_mut().enumerate() {
            *a *= Complex64::from_polar(1.0, -0.3 * p.grid.t(i));
        }
        let s = SpectralWeights::from_waveform(&p, 4);
        assert!((s.average(|d| d) - 0.3).abs() < 1e-6);
    }
}
