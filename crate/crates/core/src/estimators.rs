//! Plug-in estimators: `ξ̂`, the truncated spectrum `λ̃`, `σ̂`, and the
//! bootstrap normalizers `ξ̃₀`, `r̃`, `σ̃`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp::{edge, sigma_cubed, solve_xi, SpectralModel, XiSolution};
use crate::quest::SpectrumEstimate;
use crate::spectra::EigenReport;

/// Relative tolerance for treating `λ₁ = λ₂` as a tie.
pub const TIE_TOL: f64 = 1e-12;

/// Whether the two leading sample eigenvalues coincide.
pub fn leading_tie(report: &EigenReport) -> bool {
    let (l1, l2) = (report.lambda1(), report.lambda2());
    l1 - l2 <= TIE_TOL * l1.abs()
}

/// `ξ̂ = −(1/n) Σ_{j≥2} 1/(λ_j(Σ̲̂) − z)` with `z = λ₁(Σ̂)`, or `z = λ₁ + 1`
/// when the two leading eigenvalues tie. Positive whenever `λ₁ > λ₂`.
pub fn xi_hat(report: &EigenReport) -> f64 {
    let l1 = report.lambda1();
    let z = if leading_tie(report) { l1 + 1.0 } else { l1 };
    let n = report.companion_eigs.len() as f64;
    -report.companion_eigs[1..].iter().map(|l| 1.0 / (l - z)).sum::<f64>() / n
}

/// `λ̃_j = min(λ̃_{j,Q}, 1/(ξ̂(1 + ε)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSpectrum {
    pub lambdas: Vec<f64>,
    pub cap: f64,
    pub epsilon: f64,
    pub xi_hat: f64,
}

impl TruncatedSpectrum {
    pub fn p(&self) -> usize {
        self.lambdas.len()
    }

    /// Uniform-weight model over `λ̃` at aspect ratio `y`.
    pub fn model(&self, y: f64) -> Result<SpectralModel> {
        SpectralModel::uniform(self.lambdas.clone(), y)
    }
}

/// Truncates the estimate at the cap. The cap is nudged down by ulps so
/// that `λ̃_j·ξ̂·(1 + ε) ≤ 1` holds exactly in floating point.
pub fn truncate_spectrum(est: &SpectrumEstimate, xi_hat: f64, epsilon: f64) -> Result<TruncatedSpectrum> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Input(format!("epsilon = {epsilon} outside (0, 1)")));
    }
    if !(xi_hat > 0.0 && xi_hat.is_finite()) {
        return Err(Error::Domain(format!("xi_hat = {xi_hat} must be positive")));
    }
    let mut cap = 1.0 / (xi_hat * (1.0 + epsilon));
    while cap * xi_hat * (1.0 + epsilon) > 1.0 {
        cap = cap.next_down();
    }
    let lambdas = est.quantile_eigs.iter().map(|&l| l.min(cap)).collect();
    Ok(TruncatedSpectrum {
        lambdas,
        cap,
        epsilon,
        xi_hat,
    })
}

/// `σ̂ = [(1/ξ̂³)(1 + y ∫ (λξ̂/(1 − λξ̂))³ dH̃)]^{1/3}`, an exact atom sum.
pub fn sigma_hat(trunc: &TruncatedSpectrum, y: f64) -> Result<f64> {
    Ok(sigma_cubed(&trunc.model(y)?, trunc.xi_hat)?.cbrt())
}

/// `ξ̃₀`: the critical threshold of the truncated spectrum at `y = p/n`.
pub fn xi_tilde0(trunc: &TruncatedSpectrum, n: usize) -> Result<XiSolution> {
    solve_xi(&trunc.model(trunc.p() as f64 / n as f64)?, 0)
}

/// Centering and scale of the bootstrap world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    pub xi_tilde0: f64,
    pub r_tilde: f64,
    pub sigma_tilde: f64,
}

/// `r̃` and `σ̃` evaluated at `ξ̃₀` (not `ξ̂`).
pub fn bootstrap_normalizers(trunc: &TruncatedSpectrum, n: usize) -> Result<Normalizers> {
    let model = trunc.model(trunc.p() as f64 / n as f64)?;
    let xi = solve_xi(&model, 0)?.xi;
    Ok(Normalizers {
        xi_tilde0: xi,
        r_tilde: edge(&model, xi)?,
        sigma_tilde: sigma_cubed(&model, xi)?.cbrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mp::psi;
    use proptest::prelude::*;

    fn report_with_companion(companion: Vec<f64>, p: usize) -> EigenReport {
        let n = companion.len();
        EigenReport::from_shared(companion[..n.min(p)].to_vec(), n, p).unwrap()
    }

    fn estimate(v: Vec<f64>) -> SpectrumEstimate {
        SpectrumEstimate::from_values(v).unwrap()
    }

    #[test]
    fn xi_hat_direct_arithmetic() {
        let r = report_with_companion(vec![3.0, 1.0, 1.0], 3);
        assert!((xi_hat(&r) - 1.0 / 3.0).abs() < 1e-15);
        let tied = report_with_companion(vec![2.0, 2.0, 1.0], 3);
        assert!(leading_tie(&tied));
        assert!((xi_hat(&tied) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn truncation_examples() {
        let t = truncate_spectrum(&estimate(vec![3.0, 1.0, 1.0]), 0.5, 0.2).unwrap();
        assert!((t.lambdas[0] - 1.0 / 0.6).abs() < 1e-12);
        assert_eq!(&t.lambdas[1..], &[1.0, 1.0]);
        let low = truncate_spectrum(&estimate(vec![1.2, 1.0, 0.5]), 0.5, 0.2).unwrap();
        assert_eq!(low.lambdas, vec![1.2, 1.0, 0.5]);
        assert!(truncate_spectrum(&estimate(vec![1.0; 3]), 0.5, 1.0).is_err());
    }

    #[test]
    fn sigma_hat_matches_population_at_exact_inputs() {
        let y: f64 = 2.0 / 3.0;
        let t = truncate_spectrum(&estimate(vec![1.0; 400]), 1.0 / (1.0 + y.sqrt()), 0.2).unwrap();
        assert!((sigma_hat(&t, y).unwrap().powi(3) - 13.33475).abs() < 1e-4);
    }

    #[test]
    fn cap_integrand_is_inverse_cube_of_epsilon() {
        let (xi, eps) = (0.5, 0.25);
        let t = truncate_spectrum(&estimate(vec![10.0]), xi, eps).unwrap();
        let u = t.lambdas[0] * xi;
        let integrand = (u / (1.0 - u)).powi(3);
        assert!((integrand - eps.powi(-3)).abs() < 1e-8 * eps.powi(-3));
    }

    #[test]
    fn identity_normalizers_closed_forms() {
        let (n, p) = (600usize, 400usize);
        let y = p as f64 / n as f64;
        let t = truncate_spectrum(&estimate(vec![1.0; p]), 0.55, 0.2).unwrap();
        let x = xi_tilde0(&t, n).unwrap();
        assert!((x.xi - 1.0 / (1.0 + y.sqrt())).abs() < 1e-12);
        let nz = bootstrap_normalizers(&t, n).unwrap();
        assert!((nz.r_tilde - (1.0 + y.sqrt()).powi(2)).abs() < 1e-10);
        assert!((nz.sigma_tilde.powi(3) - (1.0 + y.sqrt()).powi(4) / y.sqrt()).abs() < 1e-9);
    }

    fn spectrum_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.05f64..5.0, 3..40).prop_map(|mut v| {
            v.sort_by(|a, b| b.total_cmp(a));
            v
        })
    }

    proptest! {
        #[test]
        fn truncation_respects_cap(v in spectrum_strategy(), xi in 0.05f64..2.0, eps in 0.001f64..0.999) {
            let t = truncate_spectrum(&estimate(v), xi, eps).unwrap();
            prop_assert!(t.lambdas.iter().all(|l| l * xi * (1.0 + eps) <= 1.0));
            prop_assert!(t.lambdas.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(t.lambdas.iter().all(|l| *l > 0.0));
        }

        #[test]
        fn sigma_hat_non_increasing_in_epsilon(v in spectrum_strategy(), xi in 0.1f64..1.0, y in 0.1f64..3.0) {
            let est = estimate(v);
            let mut prev = f64::INFINITY;
            for i in 1..50 {
                let eps = i as f64 / 50.0;
                let s = sigma_hat(&truncate_spectrum(&est, xi, eps).unwrap(), y).unwrap();
                prop_assert!(s <= prev * (1.0 + 1e-12));
                prev = s;
            }
        }

        #[test]
        fn xi_tilde_is_inverse_homogeneous(v in spectrum_strategy(), c in 0.1f64..10.0) {
            let n = v.len() * 2;
            let a = truncate_spectrum(&estimate(v.clone()), 1e-3, 0.5).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let b = truncate_spectrum(&estimate(scaled), 1e-3 / c, 0.5).unwrap();
            let xa = xi_tilde0(&a, n).unwrap().xi;
            let xb = xi_tilde0(&b, n).unwrap().xi;
            prop_assert!((xb * c / xa - 1.0).abs() < 1e-9);
        }

        #[test]
        fn r_tilde_is_psi_at_inverse_xi(v in spectrum_strategy()) {
            let n = v.len() + 5;
            let t = truncate_spectrum(&estimate(v), 1e-3, 0.5).unwrap();
            let nz = bootstrap_normalizers(&t, n).unwrap();
            let model = t.model(t.p() as f64 / n as f64).unwrap();
            let r = psi(&model, 1.0 / nz.xi_tilde0).unwrap();
            prop_assert!((r - nz.r_tilde).abs() < 1e-8 * nz.r_tilde.max(1.0));
        }

        #[test]
        fn xi_hat_positive_without_tie(v in prop::collection::vec(0.0f64..5.0, 3..30)) {
            let mut v = v;
            v.sort_by(|a, b| b.total_cmp(a));
            v[0] += 0.01;
            let r = EigenReport::from_shared(v.clone(), v.len(), v.len()).unwrap();
            prop_assert!(xi_hat(&r) > 0.0);
        }
    }
}
