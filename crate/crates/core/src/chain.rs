//! Star-to-chain mapping of the cavity modes.
//!
//! The modes `a_n` (energies `n+1`, couplings `∝ √(n+1)`) are rotated into
//! chain modes `b_i = Σ_n U[i][n] a_n` such that the emitter couples only to
//! `b_0` with strength `g ρ_0` and the chain has nearest-neighbour hoppings.
//! The rotation is produced by Lanczos tridiagonalization of `diag(1..M)`
//! seeded with `v_n = √(n+1)/ρ_0`; the result coincides with the Hahn
//! polynomial construction, whose closed-form recurrence coefficients are
//! used as an independent check.

use std::fmt::Write as _;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{lanczos, CompensatedComplexSum, CompensatedSum};
use crate::model::{emitter_terms, Geometry, HamiltonianTerms, LocalOp, ModelParams, Term};

const ORTHOGONALITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct ChainMapping {
    /// Orthogonal `M × M` matrix; row `i` expresses chain mode `b_i` in the star modes.
    pub u: Mat<f64>,
    /// On-site chain energies in units of `ω_c`.
    pub omegas: Vec<f64>,
    /// Nearest-neighbour hoppings (`M - 1` entries, all `≤ 0`).
    pub hoppings: Vec<f64>,
    /// Head normalizer `ρ_0 = √(M(M+1)/2)`.
    pub rho0: f64,
}

impl ChainMapping {
    pub fn mode_count(&self) -> usize {
        self.omegas.len()
    }

    /// `max |U Uᵀ - I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let m = self.mode_count();
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                let dot: CompensatedSum = (0..m).map(|n| self.u[(i, n)] * self.u[(j, n)]).collect();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot.value() - target).abs());
            }
        }
        worst
    }

    /// Eigenvalues of the tridiagonal chain matrix, ascending.
    pub fn chain_spectrum(&self) -> Result<Vec<f64>> {
        crate::linalg::Tridiagonal {
            diagonal: self.omegas.clone(),
            off_diagonal: self.hoppings.clone(),
            basis: Vec::new(),
        }
        .eigenvalues()
    }

    /// Audit table with columns `i,omega_i,t_i`; the last row has no hopping.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,omega_i,t_i\n");
        for (i, w) in self.omegas.iter().enumerate() {
            let t = self.hoppings.get(i).map(|t| format!("{t:.16e}")).unwrap_or_default();
            writeln!(out, "{i},{w:.16e},{t}").unwrap();
        }
        out
    }
}

/// Build the chain mapping for `m` cavity modes.
pub fn build_chain_mapping(m: usize) -> Result<ChainMapping> {
    if m == 0 {
        return Err(invalid("mode count must be >= 1"));
    }
    let energies: Vec<f64> = (1..=m).map(|k| k as f64).collect();
    let seed: Vec<f64> = energies.iter().map(|e| e.sqrt()).collect();
    let rho0 = seed.iter().map(|x| x * x).collect::<CompensatedSum>().value().sqrt();

    let tri = lanczos(
        |x, y| {
            for ((y, x), e) in y.iter_mut().zip(x).zip(&energies) {
                *y = e * x;
            }
        },
        &seed,
        m,
        &[],
    )?;
    if tri.basis.len() != m {
        return Err(Error::Precision {
            what: "chain Lanczos terminated early".into(),
            deviation: (m - tri.basis.len()) as f64,
            tolerance: 0.0,
        });
    }
    let deviation = tri.orthogonality_error();
    if deviation > ORTHOGONALITY_TOL {
        return Err(Error::Precision {
            what: "chain Lanczos basis orthogonality".into(),
            deviation,
            tolerance: ORTHOGONALITY_TOL,
        });
    }

    // Gauge: flip every other chain mode so that all hoppings are negative.
    let sign = |i: usize| if i % 2 == 0 { 1.0 } else { -1.0 };
    let u = Mat::from_fn(m, m, |i, n| sign(i) * tri.basis[i][n]);
    let hoppings = tri.off_diagonal.iter().map(|b| -b).collect();
    Ok(ChainMapping { u, omegas: tri.diagonal, hoppings, rho0 })
}

/// Recurrence coefficients `(A_i, C_i)` of the Hahn polynomials with `N = M - 1`.
pub fn hahn_coefficients(i: usize, m: usize) -> (f64, f64) {
    let n = (m - 1) as f64;
    let i = i as f64;
    let a = (i + 2.0).powi(2) * (n - i) / (2.0 * (i + 1.0) * (2.0 * i + 3.0));
    let c = i * i * (i + 2.0 + n) / (2.0 * (i + 1.0) * (2.0 * i + 1.0));
    (a, c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormReport {
    pub mode_count: usize,
    /// `max_i |ω_i - (1 + A_i + C_i)|`.
    pub max_omega_deviation: f64,
    /// `max_i |t_i² - A_i C_{i+1}|`, i.e. the check of `|t_i| = A_i ρ_{i+1}/ρ_i`
    /// with the norm ratios `ρ_{i+1}/ρ_i = √(C_{i+1}/A_i)`.
    pub max_hopping_deviation: f64,
    pub orthogonality_error: f64,
    pub max_spectrum_deviation: f64,
}

impl ClosedFormReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_omega_deviation < tol
            && self.max_hopping_deviation < tol
            && self.orthogonality_error < ORTHOGONALITY_TOL
            && self.max_spectrum_deviation < tol
    }
}

/// Compare a numerically built mapping against the closed-form Hahn
/// recurrence. Mismatches are reported, never raised.
pub fn verify_against_closed_form(mapping: &ChainMapping) -> Result<ClosedFormReport> {
    let m = mapping.mode_count();
    let mut max_omega_deviation = 0.0f64;
    let mut max_hopping_deviation = 0.0f64;
    for i in 0..m {
        let (a, c) = hahn_coefficients(i, m);
        max_omega_deviation = max_omega_deviation.max((mapping.omegas[i] - (1.0 + a + c)).abs());
        if i + 1 < m {
            let (_, c_next) = hahn_coefficients(i + 1, m);
            let t = mapping.hoppings[i];
            max_hopping_deviation = max_hopping_deviation.max((t * t - a * c_next).abs());
        }
    }
    let spectrum = mapping.chain_spectrum()?;
    let max_spectrum_deviation = spectrum
        .iter()
        .enumerate()
        .map(|(k, e)| (e - (k + 1) as f64).abs())
        .fold(0.0, f64::max);
    Ok(ClosedFormReport {
        mode_count: m,
        max_omega_deviation,
        max_hopping_deviation,
        orthogonality_error: mapping.orthogonality_error(),
        max_spectrum_deviation,
    })
}

/// Transform chain correlations `⟨b_i† b_j⟩` to star correlations
/// `⟨a_n† a_m⟩ = (Uᵀ C U)_{nm}`.
pub fn star_correlations(mapping: &ChainMapping, chain_corr: &Mat<C64>) -> Result<Mat<C64>> {
    let m = mapping.mode_count();
    if chain_corr.nrows() != m || chain_corr.ncols() != m {
        return Err(invalid(format!(
            "correlation matrix is {}x{}, mapping has {m} modes",
            chain_corr.nrows(),
            chain_corr.ncols()
        )));
    }
    // tmp = C U, then Uᵀ tmp, both summed in fixed order.
    let mut tmp = Mat::<C64>::zeros(m, m);
    for i in 0..m {
        for n in 0..m {
            let mut acc = CompensatedComplexSum::default();
            for j in 0..m {
                acc.add(chain_corr[(i, j)] * mapping.u[(j, n)]);
            }
            tmp[(i, n)] = acc.value();
        }
    }
    Ok(Mat::from_fn(m, m, |n, k| {
        let mut acc = CompensatedComplexSum::default();
        for i in 0..m {
            acc.add(tmp[(i, k)] * mapping.u[(i, n)]);
        }
        acc.value()
    }))
}

/// Chain-geometry term list: emitter at site 0 coupled with `g ρ_0` to chain
/// site 0 (term site 1), on-site energies `ω_i` and hoppings `t_i`.
pub fn chain_terms(params: &ModelParams, mapping: &ChainMapping) -> Result<HamiltonianTerms> {
    params.validate()?;
    if mapping.mode_count() != params.mode_count {
        return Err(invalid(format!(
            "mapping has {} modes, parameters have {}",
            mapping.mode_count(),
            params.mode_count
        )));
    }
    let mut terms = emitter_terms(params);
    for (i, w) in mapping.omegas.iter().enumerate() {
        terms.push(Term::OnSite { site: i + 1, op: LocalOp::Number, coeff: w * params.omega_c });
    }
    for (i, t) in mapping.hoppings.iter().enumerate() {
        let coeff = t * params.omega_c;
        terms.push(Term::Bond { left: i + 1, right: i + 2, left_op: LocalOp::Raise, right_op: LocalOp::Lower, coeff });
        terms.push(Term::Bond { left: i + 1, right: i + 2, left_op: LocalOp::Lower, right_op: LocalOp::Raise, coeff });
    }
    if params.g != 0.0 {
        terms.push(Term::Bond {
            left: 0,
            right: 1,
            left_op: params.emitter_coupling_op(),
            right_op: LocalOp::Quadrature,
            coeff: params.g * mapping.rho0,
        });
    }
    Ok(HamiltonianTerms {
        geometry: Geometry::Chain,
        site_dims: params.site_dims(),
        terms,
        coupling_convention: crate::model::CouplingConvention::RealQuadrature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_is_identity() {
        let c = build_chain_mapping(1).unwrap();
        assert_eq!(c.omegas, vec![1.0]);
        assert!(c.hoppings.is_empty());
        assert_eq!(c.rho0, 1.0);
        assert_eq!(c.u[(0, 0)], 1.0);
    }

    #[test]
    fn four_modes_head_coefficients() {
        // Seed (1, √2, √3, 2)/√10: ω_0 = Σ(n+1)²/10 = 3, t_0² = Σ(n+1)³/10 - 9 = 1.
        let c = build_chain_mapping(4).unwrap();
        assert!((c.omegas[0] - 3.0).abs() < 1e-12);
        assert!((c.hoppings[0] + 1.0).abs() < 1e-12);
        assert!((c.rho0 - 10f64.sqrt()).abs() < 1e-15);
        let (a0, c0) = hahn_coefficients(0, 4);
        assert_eq!(c0, 0.0);
        assert!((a0 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn hoppings_are_nonpositive_and_seed_is_first_row() {
        let m = 17;
        let c = build_chain_mapping(m).unwrap();
        assert!(c.hoppings.iter().all(|&t| t <= 0.0));
        for n in 0..m {
            let v = ((n + 1) as f64).sqrt() / c.rho0;
            assert!((c.u[(0, n)] - v).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_form_agrees_for_fifty_modes() {
        let c = build_chain_mapping(50).unwrap();
        let r = verify_against_closed_form(&c).unwrap();
        assert!(r.max_omega_deviation < 1e-8, "{r:?}");
        assert!(r.max_hopping_deviation < 1e-8, "{r:?}");
        assert!(r.passes(1e-8));
    }

    #[test]
    fn zero_mode_count_rejected() {
        assert!(matches!(build_chain_mapping(0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn star_correlations_identity_and_zero() {
        let c = build_chain_mapping(6).unwrap();
        let z = star_correlations(&c, &Mat::zeros(6, 6)).unwrap();
        assert!(z.norm_max() == 0.0);
        let id = star_correlations(&c, &Mat::identity(6, 6)).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - target).norm() < 1e-13);
            }
        }
        assert!(star_correlations(&c, &Mat::zeros(5, 5)).is_err());
    }

    #[test]
    fn chain_terms_reproduce_star_couplings() {
        // g ρ_0 v_n = g √(n+1)
        let m = 9;
        let mapping = build_chain_mapping(m).unwrap();
        let p = ModelParams::tls(1.0, 0.37, m, 4);
        let h = chain_terms(&p, &mapping).unwrap();
        let head = h.couplings().next().unwrap().coeff();
        for n in 0..m {
            let star = p.g * ((n + 1) as f64).sqrt();
            assert!((head * mapping.u[(0, n)] - star).abs() < 1e-13);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let c = build_chain_mapping(3).unwrap();
        let csv = c.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "i,omega_i,t_i");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].ends_with(','));
    }
}
