//! Steady-state density-matrix solve over the full Zeeman manifold, used as
//! an independent check of the closed-form susceptibility.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{Chi, CouplingParams, MediumParams, ProbeParams};
use crate::atom::{cg_weight, AtomSpec, Manifold, ZeemanState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Cancel the leading O(Ω_p²) saturation error by repeating the solve at
    /// half the probe Rabi frequency.
    pub extrapolate: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { extrapolate: true }
    }
}

struct Levels {
    states: Vec<ZeemanState>,
}

impl Levels {
    fn index(&self, s: ZeemanState) -> Option<usize> {
        self.states.iter().position(|&x| x == s)
    }
}

/// Probe and coupling matrix elements in the rotating frame.
struct Couplings {
    /// (ground, excited, Rabi frequency relative to Ω_p)
    probe: Vec<(ZeemanState, ZeemanState, f64)>,
    /// (storage, excited, Rabi frequency)
    coupling: Vec<(ZeemanState, ZeemanState, f64)>,
}

fn couplings(atom: &AtomSpec, q: i32, rabi_c: f64) -> Result<Couplings> {
    let (fg, fs, fe) = (atom.f_g as i32, atom.f_s as i32, atom.f_e as i32);
    let pop = atom.ground_population();

    // σ⁺ line strength averaged over the ground manifold
    let mut sigma_plus = 0.0;
    for m in -fg..=fg {
        if (m + 1).abs() <= fe {
            sigma_plus += cg_weight(fg, m, 1, fe, m + 1)?;
        }
    }
    let norm = pop * sigma_plus;
    if !(norm > 0.0) {
        return Err(Error::domain("atom has no σ⁺ probe transitions"));
    }

    // Ω_c belongs to the coupling transition closing the stretched forward Λ
    let mut reference = 0.0;
    for m in (-fg..=fg).rev() {
        if (m + 1).abs() <= fe && m.abs() <= fs {
            reference = cg_weight(fs, m, 1, fe, m + 1)?;
            break;
        }
    }

    let mut probe = Vec::new();
    for m in -fg..=fg {
        let me = m + q;
        if me.abs() <= fe {
            let w = cg_weight(fg, m, q, fe, me)? / norm;
            probe.push((ZeemanState::g(m), ZeemanState::e(me), w.sqrt()));
        }
    }
    let mut coupling = Vec::new();
    for m in -fs..=fs {
        if (m + 1).abs() <= fe {
            let w = cg_weight(fs, m, 1, fe, m + 1)?;
            if w > 0.0 && reference > 0.0 {
                coupling.push((ZeemanState::s(m), ZeemanState::e(m + 1), rabi_c * (w / reference).sqrt()));
            }
        }
    }
    Ok(Couplings { probe, coupling })
}

/// Levels connected to the ground manifold by nonzero matrix elements.
/// Everything else stays empty at steady state and only makes the system
/// singular.
fn reachable(atom: &AtomSpec, c: &Couplings) -> Levels {
    let mut states: Vec<ZeemanState> = atom.sublevels(Manifold::Ground).collect();
    let edges: Vec<(ZeemanState, ZeemanState)> = c
        .probe
        .iter()
        .filter(|x| x.2 != 0.0)
        .map(|x| (x.0, x.1))
        .chain(c.coupling.iter().filter(|x| x.2 != 0.0).map(|x| (x.0, x.1)))
        .collect();
    let mut i = 0;
    while i < states.len() {
        let s = states[i];
        for &(a, b) in &edges {
            for (from, to) in [(a, b), (b, a)] {
                if from == s && !states.contains(&to) {
                    states.push(to);
                }
            }
        }
        i += 1;
    }
    Levels { states }
}

fn solve(
    probe: &ProbeParams,
    coupling: &CouplingParams,
    medium: &MediumParams,
    atom: &AtomSpec,
    rabi_p: f64,
) -> Result<Chi> {
    let c = couplings(atom, probe.direction.probe_q(), coupling.rabi)?;
    let levels = reachable(atom, &c);
    let n = levels.states.len();
    let delta_2 = probe.two_photon_detuning(coupling);

    // H_eff = H − (i/2)·diag(Γ_k), with Γ_e = 2γ_ge and Γ_s = 2γ_gs so that the
    // optical and ground-state coherences decay at γ_ge and γ_gs.
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    for (k, s) in levels.states.iter().enumerate() {
        h[(k, k)] = match s.manifold {
            Manifold::Ground => Complex64::new(0.0, 0.0),
            Manifold::Storage => Complex64::new(-delta_2, -medium.gamma_gs),
            Manifold::Excited => Complex64::new(-probe.detuning, -medium.gamma_ge),
        };
    }
    let mut put = |a: ZeemanState, b: ZeemanState, rabi: f64| {
        if let (Some(i), Some(j)) = (levels.index(a), levels.index(b)) {
            h[(i, j)] += Complex64::new(-0.5 * rabi, 0.0);
            h[(j, i)] += Complex64::new(-0.5 * rabi, 0.0);
        }
    };
    for &(g, e, r) in &c.probe {
        put(g, e, rabi_p * r);
    }
    for &(s, e, r) in &c.coupling {
        put(s, e, r);
    }

    // dρ_ab/dt = −i Σ_c H[a,c] ρ_cb + i Σ_c ρ_ac conj(H[b,c])
    let idx = |a: usize, b: usize| a * n + b;
    let mut l = DMatrix::<Complex64>::zeros(n * n, n * n);
    let mut rhs = DVector::<Complex64>::zeros(n * n);
    let minus_i = Complex64::new(0.0, -1.0);
    let pop = atom.ground_population();
    for a in 0..n {
        for b in 0..n {
            let row = idx(a, b);
            let ga = levels.states[a].manifold == Manifold::Ground;
            let gb = levels.states[b].manifold == Manifold::Ground;
            if ga && gb {
                // weak probe: the ground manifold keeps its initial state
                l[(row, row)] = Complex64::new(1.0, 0.0);
                rhs[row] = Complex64::new(if a == b { pop } else { 0.0 }, 0.0);
                continue;
            }
            for k in 0..n {
                if h[(a, k)] != Complex64::new(0.0, 0.0) {
                    l[(row, idx(k, b))] += minus_i * h[(a, k)];
                }
                if h[(b, k)] != Complex64::new(0.0, 0.0) {
                    l[(row, idx(a, k))] -= minus_i * h[(b, k)].conj();
                }
            }
        }
    }
    let x = l
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::numerical(format!("steady-state system is singular ({n} levels)")))?;
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::numerical("steady-state solution is not finite"));
    }

    let mut chi = Complex64::new(0.0, 0.0);
    for &(g, e, r) in &c.probe {
        if let (Some(i), Some(j)) = (levels.index(e), levels.index(g)) {
            chi += 2.0 * r * x[idx(i, j)] / rabi_p;
        }
    }
    Ok(Chi(chi))
}

/// Susceptibility from the steady state of the full multi-level master
/// equation, in the same normalized units as [`super::chi`].
///
/// The probe Rabi frequency is taken from `probe.rabi`; it should be weak
/// (≲ 10⁻²Γ) for the result to be comparable with linear response.
pub fn chi_oracle(
    probe: &ProbeParams,
    coupling: &CouplingParams,
    medium: &MediumParams,
    atom: &AtomSpec,
    options: OracleOptions,
) -> Result<Chi> {
    atom.validate()?;
    medium.validate()?;
    let rabi_p = probe.rabi;
    if !(rabi_p > 0.0 && rabi_p.is_finite()) {
        return Err(Error::domain(format!("probe Rabi frequency must be > 0, got {rabi_p}")));
    }
    if rabi_p > 0.01 {
        log::warn!("probe Rabi frequency {rabi_p}Γ is outside the weak-probe regime");
    }
    let full = solve(probe, coupling, medium, atom, rabi_p)?;
    if !options.extrapolate {
        return Ok(full);
    }
    let half = solve(probe, coupling, medium, atom, 0.5 * rabi_p)?;
    Ok(Chi((4.0 * half.0 - full.0) / 3.0))
}
