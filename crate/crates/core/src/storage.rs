//! EIT light storage: one-dimensional Maxwell-Bloch propagation of a weak
//! probe through a Λ medium with a time-dependent coupling field.
//!
//! The model works in the retarded frame, with the medium length scaled to
//! `z ∈ [0, 1]`:
//!
//! ```text
//! ∂z E   = i Σ_k κ_k P_k
//! ∂t P_k = −(γ_ge − iΔ) P_k + i κ_k E + i Ω_k(t) S_k
//! ∂t S_k = −γ_gs S_k + i Ω_k(t) P_k
//! ```
//!
//! with `κ_k² = od·γ_ge·f_k/2` and `Ω_k = r_k·Ω_c(t)/2`, where `f_k` is the
//! population-weighted strength of link `k` and `r_k` its coupling scale.
//! For a monochromatic probe this reproduces the transmission of the
//! closed-form susceptibility exactly.
//!
//! Atoms sit at cell centres and the field on cell faces. Each time step is an
//! implicit-midpoint update swept cell by cell from the entrance, which makes
//! the discrete energy balance exact.

use num_complex::Complex64;

use crate::atom::{AtomSpec, Direction, TransitionTables};
use crate::error::{Error, Result};
use crate::pulse::{PulseWaveform, TimeGrid};

/// How the Zeeman structure enters the propagation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinkResolution {
    /// All paired links merged into one effective Λ link, orphans into one
    /// two-level channel.
    #[default]
    Effective,
    /// Every Zeeman link propagated separately.
    Zeeman,
}

/// One optical transition in the propagation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationLink {
    /// Fraction of the total absorption strength.
    pub strength: f64,
    /// Coupling Rabi frequency over Ω_c; `None` for an orphan transition.
    pub rabi_scale: Option<f64>,
}

/// Propagation links for one direction.
///
/// The effective link carries the summed strength of the paired links and
/// the harmonic strength-weighted mean of their squared coupling scales. That
/// choice reproduces the closed-form group delay and the small-γ_gs
/// resonant loss of the full link set.
pub fn propagation_links(atom: &AtomSpec, direction: Direction, resolution: LinkResolution) -> Result<Vec<PropagationLink>> {
    let tables = TransitionTables::new(atom)?;
    let table = tables.get(direction);
    let pop = table.population;
    let mut out = Vec::new();
    match resolution {
        LinkResolution::Zeeman => {
            for l in &table.links {
                let strength = pop * l.weight;
                if strength > 0.0 {
                    out.push(PropagationLink { strength, rabi_scale: l.coupling.map(|c| c.rabi_scale) });
                }
            }
        }
        LinkResolution::Effective => {
            let paired: f64 = table.paired().map(|l| pop * l.weight).sum();
            let inv: f64 = table
                .paired()
                .map(|l| pop * l.weight / l.coupling.map_or(0.0, |c| c.rabi_scale).powi(2))
                .sum();
            if paired > 0.0 {
                out.push(PropagationLink { strength: paired, rabi_scale: Some((paired / inv).sqrt()) });
            }
            let orphan: f64 = table.orphans().map(|l| pop * l.weight).sum();
            if orphan > 0.0 {
                out.push(PropagationLink { strength: orphan, rabi_scale: None });
            }
        }
    }
    Ok(out)
}

/// Coupling-field program. With a write window the field is switched off by
/// a raised-cosine ramp, held off, and switched back on by the mirrored ramp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingTimeline {
    /// Ω_c while on.
    pub rabi: f64,
    pub write: Option<WriteRead>,
    /// Simulation end time.
    pub end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WriteRead {
    /// Start of the switch-off ramp.
    pub off_start: f64,
    /// Duration of each ramp.
    pub ramp: f64,
    /// Time the coupling stays fully off.
    pub hold: f64,
}

impl CouplingTimeline {
    pub fn constant(rabi: f64, end: f64) -> Self {
        Self { rabi, write: None, end }
    }

    pub fn store_and_read(rabi: f64, write: WriteRead, readout: f64) -> Self {
        let end = write.off_start + 2.0 * write.ramp + write.hold + readout;
        Self { rabi, write: Some(write), end }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi >= 0.0 && self.rabi.is_finite()) {
            return Err(Error::domain(format!("coupling Rabi frequency must be ≥ 0, got {}", self.rabi)));
        }
        if let Some(w) = self.write {
            if !(w.ramp > 0.0) {
                return Err(Error::domain("ramp duration must be > 0"));
            }
            if !(w.hold >= 0.0) {
                return Err(Error::domain("hold time must be ≥ 0"));
            }
            if self.end < self.read_start().unwrap_or(0.0) {
                return Err(Error::domain("simulation ends before the read ramp"));
            }
        }
        Ok(())
    }

    pub fn omega(&self, t: f64) -> f64 {
        let Some(w) = self.write else { return self.rabi };
        let pi = std::f64::consts::PI;
        let down_end = w.off_start + w.ramp;
        let up_start = down_end + w.hold;
        if t <= w.off_start {
            self.rabi
        } else if t < down_end {
            0.5 * self.rabi * (1.0 + (pi * (t - w.off_start) / w.ramp).cos())
        } else if t <= up_start {
            0.0
        } else if t < up_start + w.ramp {
            0.5 * self.rabi * (1.0 - (pi * (t - up_start) / w.ramp).cos())
        } else {
            self.rabi
        }
    }

    /// Start of the switch-on ramp, from which retrieved light is counted.
    pub fn read_start(&self) -> Option<f64> {
        self.write.map(|w| w.off_start + w.ramp + w.hold)
    }

    /// Middle of the fully-off window.
    pub fn hold_center(&self) -> Option<f64> {
        self.write.map(|w| w.off_start + w.ramp + 0.5 * w.hold)
    }

    pub fn samples(&self, grid: &TimeGrid) -> Vec<f64> {
        grid.times().map(|t| self.omega(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageMedium {
    pub od: f64,
    pub gamma_ge: f64,
    pub gamma_gs: f64,
    /// Probe detuning from the excited state.
    pub detuning: f64,
    pub atom: AtomSpec,
    pub resolution: LinkResolution,
}

impl StorageMedium {
    pub fn new(od: f64, gamma_gs: f64) -> Self {
        Self {
            od,
            gamma_ge: 0.5,
            gamma_gs,
            detuning: 0.0,
            atom: AtomSpec::rb85_d1(),
            resolution: LinkResolution::Effective,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.od >= 0.0 && self.od.is_finite()) {
            return Err(Error::domain(format!("optical depth must be ≥ 0, got {}", self.od)));
        }
        if !(self.gamma_ge > 0.0 && self.gamma_gs >= 0.0) {
            return Err(Error::domain("decay rates must satisfy γ_ge > 0, γ_gs ≥ 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageResult {
    /// Field leaving the medium, sampled on the simulation grid.
    pub output: PulseWaveform,
    /// `Σ_k S_k(z)` at the middle of the hold window (empty without a write).
    pub spinwave_snapshot: Vec<Complex64>,
    /// Energy in the atoms at the snapshot, relative to the input.
    pub stored_fraction: f64,
    /// Output energy after the read ramp starts (all output without a write).
    pub efficiency: f64,
    /// Output energy before the read ramp starts.
    pub leaked_fraction: f64,
    /// Energy lost to optical and ground-state decay.
    pub absorbed_fraction: f64,
    /// Energy still in the atoms at the end of the run.
    pub residual_fraction: f64,
    pub input_energy: f64,
}

impl StorageResult {
    /// `efficiency + leaked + absorbed + residual`, one up to rounding.
    pub fn balance(&self) -> f64 {
        self.efficiency + self.leaked_fraction + self.absorbed_fraction + self.residual_fraction
    }

    pub fn transmitted_fraction(&self) -> f64 {
        self.efficiency + self.leaked_fraction
    }
}

/// Largest value of `rate·dt` accepted by the integrator.
const MAX_RATE_DT: f64 = 0.25;
/// Largest single-cell optical depth accepted.
const MAX_CELL_OD: f64 = 0.5;

/// Per-step update `x ← G x + h·Ē_in` for the atomic unknowns of one cell.
struct StepMatrices {
    g: Vec<Complex64>,
    h: Vec<Complex64>,
}

fn invert(mut a: Vec<Complex64>, n: usize) -> Result<Vec<Complex64>> {
    let m = nalgebra::DMatrix::from_row_slice(n, n, &a);
    let inv = m.try_inverse().ok_or_else(|| Error::numerical("singular implicit-midpoint matrix"))?;
    for r in 0..n {
        for c in 0..n {
            a[r * n + c] = inv[(r, c)];
        }
    }
    Ok(a)
}

struct Model {
    kappa: Vec<f64>,
    /// Index of each link's S unknown, if paired.
    s_index: Vec<Option<usize>>,
    rabi_scale: Vec<f64>,
    dim: usize,
    gamma_ge: f64,
    gamma_gs: f64,
    detuning: f64,
    dz: f64,
    dt: f64,
}

impl Model {
    fn matrices(&self, omega_c: f64) -> Result<StepMatrices> {
        let n = self.dim;
        let np = self.kappa.len();
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        let i = Complex64::new(0.0, 1.0);
        for p in 0..np {
            a[p * n + p] += Complex64::new(-self.gamma_ge, self.detuning);
            for q in 0..np {
                a[p * n + q] -= 0.5 * self.dz * self.kappa[p] * self.kappa[q];
            }
            if let Some(s) = self.s_index[p] {
                let om = 0.5 * omega_c * self.rabi_scale[p];
                a[p * n + s] += i * om;
                a[s * n + p] += i * om;
                a[s * n + s] -= self.gamma_gs;
            }
        }
        let half = 0.5 * self.dt;
        let mut minus = vec![Complex64::new(0.0, 0.0); n * n];
        let mut plus = minus.clone();
        for r in 0..n {
            for c in 0..n {
                let id = if r == c { 1.0 } else { 0.0 };
                minus[r * n + c] = id - half * a[r * n + c];
                plus[r * n + c] = id + half * a[r * n + c];
            }
        }
        let inv = invert(minus, n)?;
        let mut g = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for k in 0..n {
                let v = inv[r * n + k];
                if v != Complex64::new(0.0, 0.0) {
                    for c in 0..n {
                        g[r * n + c] += v * plus[k * n + c];
                    }
                }
            }
        }
        let h = (0..n)
            .map(|r| (0..np).map(|p| inv[r * n + p] * i * self.kappa[p]).sum::<Complex64>() * self.dt)
            .collect();
        Ok(StepMatrices { g, h })
    }
}

/// Integrates the propagation model for one pass of `pulse` through the medium.
///
/// The simulation uses the pulse's own time step and extends its grid with
/// zero input up to `timeline.end`. Both directions see a medium that is
/// uniform along the beam, so a backward run differs from a forward one only
/// through its transition structure.
pub fn simulate_eit_storage(
    pulse: &PulseWaveform,
    timeline: &CouplingTimeline,
    medium: &StorageMedium,
    direction: Direction,
    z_points: usize,
) -> Result<StorageResult> {
    medium.validate()?;
    timeline.validate()?;
    if z_points < 64 {
        return Err(Error::domain(format!("need at least 64 z points, got {z_points}")));
    }
    let dt = pulse.grid.dt;
    let dz = 1.0 / z_points as f64;
    if medium.od * dz > MAX_CELL_OD {
        return Err(Error::numerical(format!(
            "optical depth {} is under-resolved on {z_points} cells; use at least {} z points",
            medium.od,
            (medium.od / MAX_CELL_OD).ceil()
        )));
    }
    let fastest = medium.gamma_ge.max(timeline.rabi).max(medium.detuning.abs());
    if fastest * dt > MAX_RATE_DT {
        return Err(Error::numerical(format!(
            "time step {dt} does not resolve rate {fastest}; use dt ≤ {}",
            MAX_RATE_DT / fastest
        )));
    }
    if let Some(w) = timeline.write {
        let adiabatic = 5.0 * medium.gamma_ge / (timeline.rabi * timeline.rabi);
        if w.ramp < adiabatic {
            log::warn!("coupling ramp {} is shorter than the adiabatic scale {adiabatic:.3}", w.ramp);
        }
    }

    let links = propagation_links(&medium.atom, direction, medium.resolution)?;
    let np = links.len();
    let mut s_index = Vec::with_capacity(np);
    let mut next = np;
    for l in &links {
        if l.rabi_scale.is_some() {
            s_index.push(Some(next));
            next += 1;
        } else {
            s_index.push(None);
        }
    }
    let model = Model {
        kappa: links.iter().map(|l| (0.5 * medium.od * medium.gamma_ge * l.strength).sqrt()).collect(),
        rabi_scale: links.iter().map(|l| l.rabi_scale.unwrap_or(0.0)).collect(),
        s_index,
        dim: next,
        gamma_ge: medium.gamma_ge,
        gamma_gs: medium.gamma_gs,
        detuning: medium.detuning,
        dz,
        dt,
    };
    let n = model.dim;

    let t0 = pulse.grid.t0;
    let steps = (((timeline.end - t0) / dt).ceil().max(0.0) as usize).max(pulse.grid.len - 1);
    let input = |k: usize| pulse.amp.get(k).copied().unwrap_or_default();
    let grid = TimeGrid::new(t0, dt, steps + 1)?;

    let zero = Complex64::new(0.0, 0.0);
    let mut x = vec![zero; z_points * n];
    let mut x_new = vec![zero; n];
    // face fields at the previous time level
    let mut faces = vec![input(0); z_points + 1];
    let mut output = Vec::with_capacity(steps + 1);
    output.push(zero);

    let read_start = timeline.read_start();
    let snapshot_at = timeline.hold_center();
    let mut snapshot = Vec::new();
    let mut stored = 0.0;
    let (mut e_in, mut e_leak, mut e_read, mut e_abs) = (0.0, 0.0, 0.0, 0.0);
    let mut cached: Option<(f64, StepMatrices)> = None;

    for step in 0..steps {
        let t_mid = grid.t(step) + 0.5 * dt;
        let om = timeline.omega(t_mid);
        if cached.as_ref().map_or(true, |c| c.0 != om) {
            cached = Some((om, model.matrices(om)?));
        }
        let m = &cached.as_ref().expect("just set").1;

        let mut e_left_new = input(step + 1);
        let mut e_left_old = faces[0];
        faces[0] = e_left_new;
        let drive_in = 0.5 * (e_left_old + e_left_new);
        e_in += drive_in.norm_sqr() * dt;
        let mut loss = 0.0;
        for j in 0..z_points {
            let xs = &mut x[j * n..(j + 1) * n];
            let drive = 0.5 * (e_left_old + e_left_new);
            for r in 0..n {
                let row = &m.g[r * n..(r + 1) * n];
                let mut v = m.h[r] * drive;
                for c in 0..n {
                    v += row[c] * xs[c];
                }
                x_new[r] = v;
            }
            for r in 0..n {
                let avg = 0.5 * (xs[r] + x_new[r]);
                let rate = if r < np { model.gamma_ge } else { model.gamma_gs };
                loss += 2.0 * rate * avg.norm_sqr();
                xs[r] = x_new[r];
            }
            let pol: Complex64 = (0..np).map(|p| model.kappa[p] * xs[p]).sum();
            let e_right_new = e_left_new + Complex64::new(0.0, dz) * pol;
            e_left_old = faces[j + 1];
            faces[j + 1] = e_right_new;
            e_left_new = e_right_new;
        }
        e_abs += loss * dz * dt;
        let out_mid = 0.5 * (e_left_old + e_left_new);
        let flux = out_mid.norm_sqr() * dt;
        match read_start {
            Some(tr) if t_mid < tr => e_leak += flux,
            _ => e_read += flux,
        }
        output.push(e_left_new);

        if let Some(ts) = snapshot_at {
            if snapshot.is_empty() && t_mid + 0.5 * dt >= ts {
                snapshot = (0..z_points)
                    .map(|j| (0..np).filter_map(|p| model.s_index[p].map(|s| x[j * n + s])).sum())
                    .collect();
                stored = x.iter().map(|v| v.norm_sqr()).sum::<f64>() * dz;
            }
        }
    }
    if !(e_in > 0.0) {
        return Err(Error::domain("input pulse has no energy inside the simulation window"));
    }
    let residual = x.iter().map(|v| v.norm_sqr()).sum::<f64>() * dz;
    Ok(StorageResult {
        output: PulseWaveform::new(grid, output)?,
        spinwave_snapshot: snapshot,
        stored_fraction: stored / e_in,
        efficiency: e_read / e_in,
        leaked_fraction: e_leak / e_in,
        absorbed_fraction: e_abs / e_in,
        residual_fraction: residual / e_in,
        input_energy: e_in,
    })
}

/// Output energy inside `[start, end)` relative to the input energy.
pub fn storage_efficiency(result: &StorageResult, gate: (f64, f64)) -> f64 {
    let (start, end) = gate;
    if !(end > start) {
        log::warn!("empty read gate [{start}, {end})");
        return 0.0;
    }
    let out = &result.output;
    let dt = out.grid.dt;
    let mut e = 0.0;
    for k in 0..out.amp.len().saturating_sub(1) {
        let t_mid = out.grid.t(k) + 0.5 * dt;
        if t_mid >= start && t_mid < end {
            e += (0.5 * (out.amp[k] + out.amp[k + 1])).norm_sqr() * dt;
        }
    }
    e / result.input_energy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::{default_grid, make_pulse, PulseShape, SpectralWeights};
    use crate::susceptibility::{pulse_transmission, CouplingParams, MediumParams};

    fn gaussian(bw: f64) -> PulseWaveform {
        let grid = default_grid(bw, PulseShape::Gaussian).unwrap();
        let t_ref = 0.5 * (grid.t0 + grid.end());
        make_pulse(bw, PulseShape::Gaussian, grid, t_ref).unwrap()
    }

    #[test]
    fn effective_links_preserve_strength() {
        let atom = AtomSpec::rb85_d1();
        for dir in [Direction::Forward, Direction::Backward] {
            for res in [LinkResolution::Effective, LinkResolution::Zeeman] {
                let links = propagation_links(&atom, dir, res).unwrap();
                let total: f64 = links.iter().map(|l| l.strength).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
        let fw = propagation_links(&atom, Direction::Forward, LinkResolution::Effective).unwrap();
        // 35 / Σ w_k/r_k² over the forward links
        assert!((fw[0].rabi_scale.unwrap().powi(2) - 35.0 / 26.1).abs() < 1e-12);
        let bw = propagation_links(&atom, Direction::Backward, LinkResolution::Effective).unwrap();
        assert_eq!(bw.len(), 2);
        assert!((bw[1].strength - 3.0 / 7.0).abs() < 1e-12 && bw[1].rabi_scale.is_none());
    }

    #[test]
    fn timeline_profile() {
        let t = CouplingTimeline::store_and_read(2.0, WriteRead { off_start: 10.0, ramp: 4.0, hold: 6.0 }, 20.0);
        assert_eq!(t.end, 44.0);
        assert_eq!(t.omega(5.0), 2.0);
        assert!((t.omega(12.0) - 1.0).abs() < 1e-12);
        assert_eq!(t.omega(16.0), 0.0);
        assert!((t.omega(22.0) - 1.0).abs() < 1e-12);
        assert_eq!(t.omega(30.0), 2.0);
        assert_eq!(t.read_start(), Some(20.0));
        assert!(CouplingTimeline { rabi: -1.0, write: None, end: 1.0 }.validate().is_err());
    }

    #[test]
    fn energy_balance_is_exact() {
        let pulse = gaussian(0.3);
        let tl = CouplingTimeline::store_and_read(2.5, WriteRead { off_start: 10.0, ramp: 8.0, hold: 10.0 }, 30.0);
        for dir in [Direction::Forward, Direction::Backward] {
            let mut m = StorageMedium::new(20.0, 0.01);
            m.resolution = LinkResolution::Zeeman;
            let r = simulate_eit_storage(&pulse, &tl, &m, dir, 64).unwrap();
            assert!((r.balance() - 1.0).abs() < 1e-10, "{dir:?}: {}", r.balance());
        }
    }

    #[test]
    fn zero_coupling_is_two_level_absorption() {
        let pulse = gaussian(2.0);
        let m = StorageMedium { gamma_gs: 0.0, ..StorageMedium::new(3.0, 0.0) };
        let tl = CouplingTimeline::constant(0.0, pulse.grid.end() + 10.0);
        let r = simulate_eit_storage(&pulse, &tl, &m, Direction::Forward, 256).unwrap();
        let spec = SpectralWeights::from_waveform(&pulse, 8);
        let expected = spec.average(|d| (-3.0 * 0.5 * 0.5 / (d * d + 0.25)).exp());
        assert!((r.efficiency - expected).abs() < 2e-3, "{} vs {expected}", r.efficiency);
    }

    #[test]
    fn no_write_transmission_matches_susceptibility() {
        let pulse = gaussian(0.4);
        let tl = CouplingTimeline::constant(2.5, pulse.grid.end() + 40.0);
        let mut m = StorageMedium::new(19.0, 0.0163);
        m.resolution = LinkResolution::Zeeman;
        let tables = TransitionTables::new(&m.atom).unwrap();
        let spec = SpectralWeights::from_waveform(&pulse, 8);
        for dir in [Direction::Forward, Direction::Backward] {
            let r = simulate_eit_storage(&pulse, &tl, &m, dir, 128).unwrap();
            let t = pulse_transmission(dir, &CouplingParams::resonant(2.5), &MediumParams::new(19.0, 0.0163), &tables, &spec);
            assert!((r.efficiency - t).abs() < 2e-3 * t.max(0.05), "{dir:?}: {} vs {t}", r.efficiency);
        }
    }

    #[test]
    fn slow_light_delay_matches_group_index() {
        let pulse = gaussian(0.15);
        let (od, rabi) = (10.0, 3.0);
        let tl = CouplingTimeline::constant(rabi, pulse.grid.end() + 60.0);
        let m = StorageMedium::new(od, 0.0);
        let r = simulate_eit_storage(&pulse, &tl, &m, Direction::Forward, 128).unwrap();
        let r2 = propagation_links(&m.atom, Direction::Forward, LinkResolution::Effective).unwrap()[0]
            .rabi_scale
            .unwrap()
            .powi(2);
        let expected = 2.0 * od * 0.5 / (r2 * rabi * rabi);
        let delay = r.output.centroid() - pulse.centroid();
        assert!((delay / expected - 1.0).abs() < 0.05, "{delay} vs {expected}");
    }

    #[test]
    fn resolution_checks() {
        let pulse = gaussian(0.3);
        let tl = CouplingTimeline::constant(2.5, 50.0);
        assert!(simulate_eit_storage(&pulse, &tl, &StorageMedium::new(200.0, 0.0), Direction::Forward, 64).is_err());
        assert!(simulate_eit_storage(&pulse, &tl, &StorageMedium::new(10.0, 0.0), Direction::Forward, 32).is_err());
        let fast = CouplingTimeline::constant(100.0, 50.0);
        assert!(simulate_eit_storage(&pulse, &fast, &StorageMedium::new(10.0, 0.0), Direction::Forward, 64).is_err());
    }

    #[test]
    fn gate_efficiency() {
        let pulse = gaussian(0.5);
        let tl = CouplingTimeline::constant(2.5, pulse.grid.end() + 20.0);
        let r = simulate_eit_storage(&pulse, &tl, &StorageMedium::new(5.0, 0.01), Direction::Forward, 64).unwrap();
        let all = storage_efficiency(&r, (f64::NEG_INFINITY, f64::INFINITY));
        assert!((all - r.efficiency).abs() < 1e-14);
        assert_eq!(storage_efficiency(&r, (3.0, 3.0)), 0.0);
    }
}
