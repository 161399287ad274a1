//! Zeeman-resolved level structure and direction-dependent transition tables.
//!
//! The medium is a Λ system built from three hyperfine manifolds: the ground
//! manifold `g` holding the atoms, the second ground manifold `s` that stores
//! the spin wave and the excited manifold `e`. The probe drives `g → e` with
//! σ⁺ (forward) or σ⁻ (backward) light while the coupling laser always drives
//! `s → e` with σ⁺. In the backward direction the probe reaches the stretched
//! sublevel `e_{-F_e}` from `g_{-F_g}`, which has no coupling partner: that
//! orphan transition stays a bare two-level absorber.

use std::fmt;

use crate::error::{Error, Result};
use crate::units;

/// Hyperfine manifolds of the Λ system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Manifold {
    /// Populated ground manifold `|g⟩`.
    Ground,
    /// Storage ground manifold `|s⟩`.
    Storage,
    /// Excited manifold `|e⟩`.
    Excited,
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Manifold::Ground => "g",
            Manifold::Storage => "s",
            Manifold::Excited => "e",
        };
        f.write_str(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ZeemanState {
    pub manifold: Manifold,
    pub m: i32,
}

impl ZeemanState {
    pub const fn new(manifold: Manifold, m: i32) -> Self {
        Self { manifold, m }
    }
    pub const fn g(m: i32) -> Self {
        Self::new(Manifold::Ground, m)
    }
    pub const fn s(m: i32) -> Self {
        Self::new(Manifold::Storage, m)
    }
    pub const fn e(m: i32) -> Self {
        Self::new(Manifold::Excited, m)
    }
}

impl fmt::Display for ZeemanState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.manifold, self.m)
    }
}

/// Propagation direction of the probe relative to the coupling laser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Co-propagating: the probe is σ⁺ in the atomic frame.
    Forward,
    /// Counter-propagating: the probe is σ⁻ in the atomic frame.
    Backward,
}

impl Direction {
    /// Spherical polarization index of the probe.
    pub fn probe_q(self) -> i32 {
        match self {
            Direction::Forward => 1,
            Direction::Backward => -1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "forward" | "fw" => Ok(Direction::Forward),
            "backward" | "bw" => Ok(Direction::Backward),
            other => Err(Error::domain(format!("unknown direction `{other}`"))),
        }
    }
}

/// Angular momenta of the three manifolds and the excited-state decay rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomSpec {
    pub f_g: u32,
    pub f_s: u32,
    pub f_e: u32,
    /// Excited-state decay rate in rad/s. Every other rate is measured in
    /// units of this one.
    pub gamma: f64,
}

impl AtomSpec {
    /// ⁸⁵Rb D1 line: |g⟩ = 5S₁/₂ F=2, |s⟩ = 5S₁/₂ F=3, |e⟩ = 5P₁/₂ F'=3.
    pub fn rb85_d1() -> Self {
        Self {
            f_g: 2,
            f_s: 3,
            f_e: 3,
            gamma: units::gamma_rad_per_s(units::RB85_D1_LINEWIDTH_MHZ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::domain(format!(
                "decay rate must be positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    pub fn f(&self, manifold: Manifold) -> u32 {
        match manifold {
            Manifold::Ground => self.f_g,
            Manifold::Storage => self.f_s,
            Manifold::Excited => self.f_e,
        }
    }

    /// Magnetic quantum numbers of a manifold in increasing order.
    pub fn sublevels(&self, manifold: Manifold) -> impl Iterator<Item = ZeemanState> {
        let f = self.f(manifold) as i32;
        (-f..=f).map(move |m| ZeemanState::new(manifold, m))
    }

    pub fn contains(&self, state: ZeemanState) -> bool {
        state.m.unsigned_abs() <= self.f(state.manifold)
    }

    /// Population of each ground sublevel under uniform preparation.
    pub fn ground_population(&self) -> f64 {
        1.0 / (2 * self.f_g + 1) as f64
    }
}

impl Default for AtomSpec {
    fn default() -> Self {
        Self::rb85_d1()
    }
}

/// Squared Clebsch-Gordan coefficient |⟨F_g m_g; 1 q | F_e m_e⟩|².
///
/// This is the relative line strength of the dipole transition
/// `|F_g, m_g⟩ → |F_e, m_e⟩` driven by polarization `q`, evaluated with the
/// Racah closed-form sum.
pub fn cg_weight(f_g: i32, m_g: i32, q: i32, f_e: i32, m_e: i32) -> Result<f64> {
    if !(-1..=1).contains(&q) {
        return Err(Error::domain(format!("polarization index q={q} not in {{-1,0,1}}")));
    }
    if f_g < 0 || f_e < 0 {
        return Err(Error::domain(format!("negative angular momentum F_g={f_g}, F_e={f_e}")));
    }
    if m_g.abs() > f_g || m_e.abs() > f_e {
        return Err(Error::domain(format!(
            "|m| exceeds F: (F_g={f_g}, m_g={m_g}), (F_e={f_e}, m_e={m_e})"
        )));
    }
    let c = clebsch_gordan(f_g, m_g, 1, q, f_e, m_e);
    Ok(c * c)
}

/// ⟨j1 m1; j2 m2 | j m⟩ for integer angular momenta.
pub(crate) fn clebsch_gordan(j1: i32, m1: i32, j2: i32, m2: i32, j: i32, m: i32) -> f64 {
    if m != m1 + m2 || j < (j1 - j2).abs() || j > j1 + j2 {
        return 0.0;
    }
    if m1.abs() > j1 || m2.abs() > j2 || m.abs() > j {
        return 0.0;
    }
    let f = |n: i32| factorial(n);
    let triangle = (2 * j + 1) as f64 * f(j + j1 - j2) * f(j - j1 + j2) * f(j1 + j2 - j)
        / f(j1 + j2 + j + 1);
    let norm = f(j + m) * f(j - m) * f(j1 - m1) * f(j1 + m1) * f(j2 - m2) * f(j2 + m2);

    let k_min = 0.max(j2 - j - m1).max(j1 - j + m2);
    let k_max = (j1 + j2 - j).min(j1 - m1).min(j2 + m2);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let denom = f(k)
            * f(j1 + j2 - j - k)
            * f(j1 - m1 - k)
            * f(j2 + m2 - k)
            * f(j - j2 + m1 + k)
            * f(j - j1 - m2 + k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / denom;
    }
    (triangle * norm).sqrt() * sum
}

fn factorial(n: i32) -> f64 {
    debug_assert!(n >= 0);
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// The coupling-laser half of a Λ link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingLink {
    pub storage: ZeemanState,
    pub q: i32,
    /// Squared Clebsch-Gordan factor of `s → e`.
    pub weight: f64,
    /// Ω_c of this link divided by the effective coupling Rabi frequency.
    pub rabi_scale: f64,
}

/// One probe transition `g → e`, optionally closed into a Λ by the coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub ground: ZeemanState,
    pub excited: ZeemanState,
    pub q: i32,
    /// Squared relative dipole |μ_rel|².
    pub weight: f64,
    pub coupling: Option<CouplingLink>,
}

impl Link {
    pub fn is_orphan(&self) -> bool {
        self.coupling.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    pub direction: Direction,
    pub links: Vec<Link>,
    /// Population of each ground sublevel.
    pub population: f64,
}

impl TransitionTable {
    /// Probe transitions whose excited state has no coupling partner.
    pub fn orphans(&self) -> impl Iterator<Item = &Link> {
        self.links.iter().filter(|l| l.is_orphan())
    }

    pub fn paired(&self) -> impl Iterator<Item = &Link> {
        self.links.iter().filter(|l| !l.is_orphan())
    }

    /// Population-weighted sum of probe weights, i.e. the absorption strength
    /// relative to a two-level atom with unit weight.
    pub fn mean_weight(&self) -> f64 {
        self.population * self.links.iter().map(|l| l.weight).sum::<f64>()
    }
}

/// Line strength of the σ⁺ coupling transition that closes the Λ of the
/// forward stretched probe link (the forward link with the largest m_g). The
/// quoted coupling Rabi frequency Ω_c refers to this transition.
fn coupling_reference(atom: &AtomSpec) -> f64 {
    let (fg, fs, fe) = (atom.f_g as i32, atom.f_s as i32, atom.f_e as i32);
    (-fg..=fg)
        .rev()
        .find(|m| (m + 1).abs() <= fe && m.abs() <= fs)
        .map_or(0.0, |m| cg_weight(fs, m, 1, fe, m + 1).unwrap_or(0.0))
}

/// Builds the probe transitions for one propagation direction and pairs each
/// with the σ⁺ coupling transition sharing its excited state.
///
/// Weights are raw squared Clebsch-Gordan factors; use [`normalize_weights`]
/// before feeding the table to the susceptibility.
pub fn build_transition_table(atom: &AtomSpec, direction: Direction) -> Result<TransitionTable> {
    atom.validate()?;
    let (fg, fs, fe) = (atom.f_g as i32, atom.f_s as i32, atom.f_e as i32);
    let q = direction.probe_q();
    let reference = coupling_reference(atom);

    let mut links = Vec::new();
    for m_g in -fg..=fg {
        let m_e = m_g + q;
        if m_e.abs() > fe {
            continue;
        }
        let weight = cg_weight(fg, m_g, q, fe, m_e)?;
        // σ⁺ coupling: s_{m_e - 1} → e_{m_e}
        let m_s = m_e - 1;
        let coupling = if m_s.abs() <= fs {
            let cw = cg_weight(fs, m_s, 1, fe, m_e)?;
            let rabi_scale = if reference > 0.0 { (cw / reference).sqrt() } else { 0.0 };
            Some(CouplingLink {
                storage: ZeemanState::s(m_s),
                q: 1,
                weight: cw,
                rabi_scale,
            })
        } else {
            None
        };
        links.push(Link {
            ground: ZeemanState::g(m_g),
            excited: ZeemanState::e(m_e),
            q,
            weight,
            coupling,
        });
    }
    Ok(TransitionTable {
        direction,
        links,
        population: atom.ground_population(),
    })
}

/// Rescales the probe weights by one common factor so that the
/// population-averaged weight equals one.
///
/// After this the medium's optical depth is that of a two-level atom with the
/// effective dipole, and it enters the transmission law without extra
/// factors. Both directions share the factor because the σ⁺ and σ⁻ line
/// strengths summed over the ground manifold are equal.
pub fn normalize_weights(table: &TransitionTable) -> Result<TransitionTable> {
    if table.links.is_empty() {
        return Err(Error::domain("cannot normalize an empty transition table"));
    }
    let mean = table.mean_weight();
    if !(mean > 0.0) {
        return Err(Error::domain("all probe weights are zero"));
    }
    let mut out = table.clone();
    for link in &mut out.links {
        link.weight /= mean;
    }
    Ok(out)
}

/// Normalized forward and backward tables for an atom.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTables {
    pub forward: TransitionTable,
    pub backward: TransitionTable,
}

impl TransitionTables {
    pub fn new(atom: &AtomSpec) -> Result<Self> {
        Ok(Self {
            forward: normalize_weights(&build_transition_table(atom, Direction::Forward)?)?,
            backward: normalize_weights(&build_transition_table(atom, Direction::Backward)?)?,
        })
    }

    pub fn get(&self, direction: Direction) -> &TransitionTable {
        match direction {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        }
    }
}
