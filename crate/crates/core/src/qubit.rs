//! Polarization-qubit density matrices in the {H, V} basis.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{Error, Result};

const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A 2×2 density matrix with ρ₀₀ = ⟨H|ρ|H⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    rho: Matrix2<Complex64>,
}

impl QubitState {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(rho: Matrix2<Complex64>) -> Result<Self> {
        if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::domain("density matrix has non-finite entries"));
        }
        let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-10 {
            return Err(Error::domain(format!("density matrix is not Hermitian (deviation {herm:e})")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::domain(format!("density matrix trace is {tr}, expected 1")));
        }
        let s = Self { rho };
        let (lo, _) = s.eigenvalues();
        if lo < -PSD_TOL {
            return Err(Error::domain(format!("density matrix has negative eigenvalue {lo:e}")));
        }
        Ok(s)
    }

    /// Builds `|ψ⟩⟨ψ|` from unnormalized amplitudes `(ψ_H, ψ_V)`.
    pub fn from_pure(h: Complex64, v: Complex64) -> Result<Self> {
        let n = (h.norm_sqr() + v.norm_sqr()).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::domain("state vector has zero norm"));
        }
        let (h, v) = (h / n, v / n);
        Ok(Self {
            rho: Matrix2::new(h * h.conj(), h * v.conj(), v * h.conj(), v * v.conj()),
        })
    }

    /// `cos(θ/2)|H⟩ + e^{iφ} sin(θ/2)|V⟩`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (s, co) = (0.5 * theta).sin_cos();
        Self::from_pure(c(co, 0.0), Complex64::from_polar(s, phi)).expect("unit vector")
    }

    /// `(I + s·σ)/2` with σ₁ = X, σ₂ = Y, σ₃ = Z in the {H, V} basis.
    pub fn from_bloch(s: [f64; 3]) -> Result<Self> {
        Self::new(bloch_matrix(s))
    }

    pub fn h() -> Self {
        Self::from_angles(0.0, 0.0)
    }

    pub fn v() -> Self {
        Self::from_pure(c(0.0, 0.0), c(1.0, 0.0)).expect("unit vector")
    }

    /// `(|H⟩ + |V⟩)/√2`
    pub fn d() -> Self {
        Self::from_pure(c(1.0, 0.0), c(1.0, 0.0)).expect("unit vector")
    }

    /// `(|H⟩ − |V⟩)/√2`
    pub fn a() -> Self {
        Self::from_pure(c(1.0, 0.0), c(-1.0, 0.0)).expect("unit vector")
    }

    /// `(|H⟩ − i|V⟩)/√2`
    pub fn r() -> Self {
        Self::from_pure(c(1.0, 0.0), c(0.0, -1.0)).expect("unit vector")
    }

    /// `(|H⟩ + i|V⟩)/√2`
    pub fn l() -> Self {
        Self::from_pure(c(1.0, 0.0), c(0.0, 1.0)).expect("unit vector")
    }

    pub fn maximally_mixed() -> Self {
        Self { rho: Matrix2::identity() * c(0.5, 0.0) }
    }

    pub fn matrix(&self) -> &Matrix2<Complex64> {
        &self.rho
    }

    pub fn bloch(&self) -> [f64; 3] {
        let r = &self.rho;
        [2.0 * r[(0, 1)].re, -2.0 * r[(0, 1)].im, (r[(0, 0)] - r[(1, 1)]).re]
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> (f64, f64) {
        hermitian_eigenvalues(&self.rho)
    }

    pub fn purity(&self) -> f64 {
        (self.rho * self.rho).trace().re
    }

    /// Probability of the projection onto `|ψ⟩`.
    pub fn project(&self, h: Complex64, v: Complex64) -> f64 {
        let n2 = h.norm_sqr() + v.norm_sqr();
        let r = &self.rho;
        let val = h.conj() * (r[(0, 0)] * h + r[(0, 1)] * v) + v.conj() * (r[(1, 0)] * h + r[(1, 1)] * v);
        (val.re / n2).clamp(0.0, 1.0)
    }
}

pub(crate) fn bloch_matrix(s: [f64; 3]) -> Matrix2<Complex64> {
    Matrix2::new(
        c(0.5 * (1.0 + s[2]), 0.0),
        c(0.5 * s[0], -0.5 * s[1]),
        c(0.5 * s[0], 0.5 * s[1]),
        c(0.5 * (1.0 - s[2]), 0.0),
    )
}

pub(crate) fn hermitian_eigenvalues(m: &Matrix2<Complex64>) -> (f64, f64) {
    let (a, d) = (m[(0, 0)].re, m[(1, 1)].re);
    let mean = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + m[(0, 1)].norm_sqr()).sqrt();
    (mean - r, mean + r)
}

impl fmt::Display for QubitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.rho;
        write!(f, "[[{}, {}], [{}, {}]]", r[(0, 0)], r[(0, 1)], r[(1, 0)], r[(1, 1)])
    }
}

/// Named input states accepted in configuration files.
impl FromStr for QubitState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "H" => Ok(Self::h()),
            "V" => Ok(Self::v()),
            "D" => Ok(Self::d()),
            "A" => Ok(Self::a()),
            "R" => Ok(Self::r()),
            "L" => Ok(Self::l()),
            other => Err(Error::Config(format!("unknown qubit state {other:?} (expected H, V, D, A, R or L)"))),
        }
    }
}

/// Uhlmann fidelity `Tr(√(√ρ σ √ρ))²`, evaluated with the qubit identity
/// `F = Tr(ρσ) + 2√(det ρ · det σ)`.
pub fn fidelity(rho: &QubitState, sigma: &QubitState) -> Result<f64> {
    for s in [rho, sigma] {
        if s.eigenvalues().0 < -PSD_TOL {
            return Err(Error::domain("fidelity needs positive semidefinite inputs"));
        }
    }
    let overlap = (rho.rho * sigma.rho).trace().re;
    let det = |m: &Matrix2<Complex64>| m.determinant().re.max(0.0);
    let f = overlap + 2.0 * (det(&rho.rho) * det(&sigma.rho)).sqrt();
    Ok(f.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Square root of a PSD Hermitian matrix via its eigen-decomposition.
    fn sqrtm(m: &Matrix2<Complex64>) -> Matrix2<Complex64> {
        let eig = nalgebra::linalg::SymmetricEigen::new(*m);
        let mut d = Matrix2::zeros();
        for i in 0..2 {
            d[(i, i)] = c(eig.eigenvalues[i].max(0.0).sqrt(), 0.0);
        }
        eig.eigenvectors * d * eig.eigenvectors.adjoint()
    }

    fn uhlmann(a: &QubitState, b: &QubitState) -> f64 {
        let s = sqrtm(a.matrix());
        let inner = s * b.matrix() * s;
        let t = sqrtm(&((inner + inner.adjoint()) * c(0.5, 0.0))).trace().re;
        t * t
    }

    #[test]
    fn named_fidelities() {
        let h = QubitState::h();
        assert!((fidelity(&h, &h).unwrap() - 1.0).abs() < 1e-15);
        assert!(fidelity(&h, &QubitState::v()).unwrap().abs() < 1e-15);
        assert!((fidelity(&h, &QubitState::d()).unwrap() - 0.5).abs() < 1e-15);
        assert!(fidelity(&QubitState::r(), &QubitState::l()).unwrap().abs() < 1e-15);
    }

    #[test]
    fn angles_parametrize_named_states() {
        use std::f64::consts::PI;
        let close = |a: QubitState, b: QubitState| (a.matrix() - b.matrix()).norm() < 1e-15;
        assert!(close(QubitState::from_angles(PI, 0.0), QubitState::v()));
        assert!(close(QubitState::from_angles(PI / 2.0, 0.0), QubitState::d()));
        assert!(close(QubitState::from_angles(PI / 2.0, -PI / 2.0), QubitState::r()));
        assert_eq!(QubitState::r().bloch().map(|x| x.round()), [0.0, -1.0, 0.0]);
    }

    #[test]
    fn invalid_matrices_are_rejected() {
        assert!(QubitState::new(Matrix2::identity()).is_err());
        assert!(QubitState::from_bloch([0.0, 0.0, 1.5]).is_err());
        let mut m = bloch_matrix([0.0; 3]);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(QubitState::new(m).is_err());
        assert!("X".parse::<QubitState>().is_err());
    }

    fn bloch_ball() -> impl Strategy<Value = [f64; 3]> {
        (0.0..1.0f64, 0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU).prop_map(|(r, t, p)| {
            [r * t.sin() * p.cos(), r * t.sin() * p.sin(), r * t.cos()]
        })
    }

    proptest! {
        #[test]
        fn closed_form_matches_matrix_sqrt(a in bloch_ball(), b in bloch_ball()) {
            let (x, y) = (QubitState::from_bloch(a).unwrap(), QubitState::from_bloch(b).unwrap());
            let f = fidelity(&x, &y).unwrap();
            prop_assert!((f - uhlmann(&x, &y)).abs() < 1e-9);
            prop_assert!((f - fidelity(&y, &x).unwrap()).abs() < 1e-14);
            prop_assert!((0.0..=1.0).contains(&f));
        }

        #[test]
        fn bloch_round_trip(s in bloch_ball()) {
            let q = QubitState::from_bloch(s).unwrap();
            let back = q.bloch();
            for i in 0..3 {
                prop_assert!((back[i] - s[i]).abs() < 1e-14);
            }
        }
    }
}
