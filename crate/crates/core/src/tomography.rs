//! Single-qubit polarization tomography from projective counts.
//!
//! Counts are taken for the projectors onto |H⟩, |V⟩, |D⟩ = (|H⟩+|V⟩)/√2 and
//! (|H⟩+i|V⟩)/√2. The last one is orthogonal to the named state
//! |R⟩ = (|H⟩−i|V⟩)/√2, so a perfect R input registers no counts there.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qubit::{fidelity, QubitState};

/// Projective counts. Real-valued so that noiseless expected counts can be
/// represented exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisCounts {
    pub h: f64,
    pub v: f64,
    pub d: f64,
    pub r: f64,
}

impl BasisCounts {
    pub fn new(h: f64, v: f64, d: f64, r: f64) -> Result<Self> {
        let c = Self { h, v, d, r };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("H", self.h), ("V", self.v), ("D", self.d), ("R", self.r)] {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::domain(format!("count n_{name} = {x} must be finite and ≥ 0")));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { h: self.h * k, v: self.v * k, d: self.d * k, r: self.r * k }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconResult {
    pub rho: QubitState,
    /// The linear inversion was unphysical and had to be projected.
    pub projected: bool,
    pub fidelity_vs_target: Option<f64>,
    pub sigma_fidelity: Option<f64>,
}

/// Noiseless counts: H and V share one budget of `n_total`, D and R each get
/// their own.
pub fn expected_counts(rho: &QubitState, n_total: f64) -> Result<BasisCounts> {
    if !(n_total > 0.0 && n_total.is_finite()) {
        return Err(Error::domain(format!("count budget must be > 0, got {n_total}")));
    }
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    Ok(BasisCounts {
        h: n_total * rho.project(one, zero),
        v: n_total * rho.project(zero, one),
        d: n_total * rho.project(one, one),
        r: n_total * rho.project(one, Complex64::new(0.0, 1.0)),
    })
}

/// Linear Stokes inversion.
pub fn stokes(counts: &BasisCounts) -> Result<[f64; 3]> {
    counts.validate()?;
    let n = counts.h + counts.v;
    if !(n > 0.0) {
        return Err(Error::domain("reconstruction needs n_H + n_V > 0"));
    }
    Ok([2.0 * counts.d / n - 1.0, 2.0 * counts.r / n - 1.0, (counts.h - counts.v) / n])
}

/// Closest unit-trace positive semidefinite matrix in Frobenius norm. For a
/// qubit this pulls a Bloch vector outside the ball back onto its surface.
pub fn project_psd(s: [f64; 3]) -> ([f64; 3], bool) {
    let r = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
    if r <= 1.0 {
        (s, false)
    } else {
        (s.map(|x| x / r), true)
    }
}

pub fn reconstruct(counts: &BasisCounts) -> Result<ReconResult> {
    let (s, projected) = project_psd(stokes(counts)?);
    Ok(ReconResult {
        rho: QubitState::from_bloch(s)?,
        projected,
        fidelity_vs_target: None,
        sigma_fidelity: None,
    })
}

/// Reconstruction scored against a target, with the Monte-Carlo spread.
pub fn reconstruct_against(
    counts: &BasisCounts,
    target: &QubitState,
    trials: usize,
    seed: u64,
) -> Result<ReconResult> {
    let mut res = reconstruct(counts)?;
    res.fidelity_vs_target = Some(fidelity(&res.rho, target)?);
    res.sigma_fidelity = Some(mc_uncertainty(counts, trials, target, seed)?);
    Ok(res)
}

fn poisson(rng: &mut impl Rng, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng)
}

/// Standard deviation of the reconstructed fidelity when every count is
/// resampled from a Poisson distribution with its observed mean. Trial `i`
/// draws from ChaCha stream `i` of `seed`, so the result does not depend on
/// the thread count.
pub fn mc_uncertainty(counts: &BasisCounts, trials: usize, target: &QubitState, seed: u64) -> Result<f64> {
    counts.validate()?;
    if trials == 0 {
        return Err(Error::domain("Monte-Carlo needs at least one trial"));
    }
    if trials == 1 {
        log::warn!("a single Monte-Carlo trial has no spread; reporting σ = 0");
        return Ok(0.0);
    }
    if trials < 100 {
        log::warn!("only {trials} Monte-Carlo trials; σ will be noisy");
    }
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let c = BasisCounts {
                h: poisson(&mut rng, counts.h),
                v: poisson(&mut rng, counts.v),
                d: poisson(&mut rng, counts.d),
                r: poisson(&mut rng, counts.r),
            };
            reconstruct(&c).ok().and_then(|r| fidelity(&r.rho, target).ok())
        })
        .collect();
    if samples.len() < 2 {
        return Err(Error::numerical("too few Monte-Carlo trials produced a reconstructable state"));
    }
    if samples.len() < trials {
        log::warn!("{} of {trials} resampled trials had n_H + n_V = 0 and were dropped", trials - samples.len());
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &QubitState, b: &QubitState, tol: f64) -> bool {
        (a.matrix() - b.matrix()).norm() < tol
    }

    #[test]
    fn expected_counts_for_named_states() {
        assert_eq!(expected_counts(&QubitState::h(), 1000.0).unwrap(), BasisCounts::new(1000.0, 0.0, 500.0, 500.0).unwrap());
        let mixed = expected_counts(&QubitState::maximally_mixed(), 1000.0).unwrap();
        for x in [mixed.h, mixed.v, mixed.d, mixed.r] {
            assert!((x - 500.0).abs() < 1e-12);
        }
        let r = expected_counts(&QubitState::r(), 1000.0).unwrap();
        assert!(r.r.abs() < 1e-12);
    }

    #[test]
    fn reconstructs_named_states() {
        let h = reconstruct(&BasisCounts::new(1000.0, 0.0, 500.0, 500.0).unwrap()).unwrap();
        assert!(close(&h.rho, &QubitState::h(), 1e-15) && !h.projected);
        let d = reconstruct(&BasisCounts::new(500.0, 500.0, 1000.0, 500.0).unwrap()).unwrap();
        assert!(close(&d.rho, &QubitState::d(), 1e-15));
        let r = reconstruct(&BasisCounts::new(500.0, 500.0, 500.0, 0.0).unwrap()).unwrap();
        assert!(close(&r.rho, &QubitState::r(), 1e-15));
    }

    #[test]
    fn degenerate_counts_are_rejected() {
        assert!(reconstruct(&BasisCounts { h: 0.0, v: 0.0, d: 3.0, r: 1.0 }).is_err());
        assert!(BasisCounts::new(-1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn extreme_counts_are_projected() {
        let r = reconstruct(&BasisCounts::new(100.0, 0.0, 100.0, 50.0).unwrap()).unwrap();
        assert!(r.projected);
        let (lo, _) = r.rho.eigenvalues();
        assert!(lo > -1e-12);
        assert!((r.rho.matrix().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_sampled_d_state_is_high_fidelity() {
        let exact = expected_counts(&QubitState::d(), 1e5).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut good = 0;
        for _ in 0..200 {
            let c = BasisCounts {
                h: poisson(&mut rng, exact.h),
                v: poisson(&mut rng, exact.v),
                d: poisson(&mut rng, exact.d),
                r: poisson(&mut rng, exact.r),
            };
            if fidelity(&reconstruct(&c).unwrap().rho, &QubitState::d()).unwrap() >= 0.99 {
                good += 1;
            }
        }
        assert!(good >= 190);
    }

    #[test]
    fn mc_edge_cases() {
        let c = expected_counts(&QubitState::from_angles(1.0, 0.5), 1e4).unwrap();
        assert_eq!(mc_uncertainty(&c, 1, &QubitState::h(), 1).unwrap(), 0.0);
        assert!(mc_uncertainty(&c, 0, &QubitState::h(), 1).is_err());
        let zero_basis = BasisCounts::new(1000.0, 0.0, 500.0, 500.0).unwrap();
        let s = mc_uncertainty(&zero_basis, 200, &QubitState::h(), 3).unwrap();
        assert!(s.is_finite());
    }

    #[test]
    fn mc_is_deterministic() {
        let c = expected_counts(&QubitState::from_angles(1.0, 0.5), 1e3).unwrap();
        let t = QubitState::from_angles(1.0, 0.5);
        assert_eq!(mc_uncertainty(&c, 300, &t, 11).unwrap(), mc_uncertainty(&c, 300, &t, 11).unwrap());
    }

    #[test]
    fn sigma_scales_with_inverse_root_counts() {
        // the fidelity is stationary at target = state, so score against a
        // different target to see first-order (1/√N) noise
        let rho = QubitState::from_bloch([0.3, -0.2, 0.4]).unwrap();
        let target = QubitState::h();
        let c = expected_counts(&rho, 1e3).unwrap();
        let s1 = mc_uncertainty(&c, 2000, &target, 5).unwrap();
        let s100 = mc_uncertainty(&c.scaled(100.0), 2000, &target, 5).unwrap();
        let ratio = s1 / s100;
        assert!((ratio / 10.0 - 1.0).abs() < 0.15, "ratio {ratio}");
    }

    fn any_state() -> impl Strategy<Value = QubitState> {
        (0.0..=1.0f64, 0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU).prop_map(|(r, t, p)| {
            QubitState::from_bloch([r * t.sin() * p.cos(), r * t.sin() * p.sin(), r * t.cos()]).unwrap()
        })
    }

    proptest! {
        #[test]
        fn round_trip(rho in any_state(), n in 1.0..1e7f64) {
            let back = reconstruct(&expected_counts(&rho, n).unwrap()).unwrap();
            prop_assert!(close(&back.rho, &rho, 1e-12));
        }

        #[test]
        fn always_physical(h in 0u32..2000, v in 0u32..2000, d in 0u32..4000, r in 0u32..4000) {
            prop_assume!(h + v > 0);
            let res = reconstruct(&BasisCounts::new(h as f64, v as f64, d as f64, r as f64).unwrap()).unwrap();
            prop_assert!(res.rho.eigenvalues().0 > -1e-12);
            prop_assert!((res.rho.matrix().trace().re - 1.0).abs() < 1e-12);
        }

        #[test]
        fn projection_is_idempotent(x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64) {
            let (p, _) = project_psd([x, y, z]);
            let (q, again) = project_psd(p);
            prop_assert!(!again || (q[0]-p[0]).abs() + (q[1]-p[1]).abs() + (q[2]-p[2]).abs() < 1e-15);
            if x*x + y*y + z*z <= 1.0 {
                prop_assert_eq!(p, [x, y, z]);
            }
        }
    }
}
