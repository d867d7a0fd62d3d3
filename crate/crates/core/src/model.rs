//! Model parameters, units and Hamiltonian term lists.
//!
//! All quantities are dimensionless: `ħ = 1`, frequencies are in units of the
//! fundamental cavity frequency `ω_c`, times in `1/ω_c` (one roundtrip is
//! `2π`), positions in units of the cavity length `L` with the emitter at
//! `x = 0` and `x ∈ [-1/2, 1/2]`.
//!
//! Site `0` of every term list is the emitter; site `k + 1` is cavity mode `k`
//! (star geometry) or chain site `k` (chain geometry).
//!
//! The light–matter coupling is stored as `g √(n+1) σ_x (a_n + a_n†)`. The
//! textbook form `-i g √(n+1) σ_x (a_n - a_n†)` follows from the mode rotation
//! `a_n → i a_n`, which leaves populations, `⟨a_n† a_m⟩` and hence all field
//! intensities and spectra unchanged, and keeps every matrix real.

use std::f64::consts::PI;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::chain;
use crate::error::{invalid, Result};

/// Emitter degree of freedom.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmitterKind {
    /// Two-level system.
    Tls,
    /// Anharmonic oscillator `ω_x b†b + χ b†b†bb`.
    Kerr { chi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega_x: f64,
    pub omega_c: f64,
    pub g: f64,
    /// Number of symmetric cavity modes `M`, indexed `n = 0..M`.
    pub mode_count: usize,
    pub emitter: EmitterKind,
    /// Local Fock dimension of every cavity mode (or chain site).
    pub fock_cutoff: usize,
    /// Local dimension of the emitter site (2 for a TLS).
    pub emitter_cutoff: usize,
}

impl ModelParams {
    /// Two-level emitter with the cavity frequency fixed to 1.
    pub fn tls(omega_x: f64, g: f64, mode_count: usize, fock_cutoff: usize) -> Self {
        Self {
            omega_x,
            omega_c: 1.0,
            g,
            mode_count,
            emitter: EmitterKind::Tls,
            fock_cutoff,
            emitter_cutoff: 2,
        }
    }

    pub fn kerr(omega_x: f64, chi: f64, g: f64, mode_count: usize, fock_cutoff: usize, emitter_cutoff: usize) -> Self {
        Self {
            omega_x,
            omega_c: 1.0,
            g,
            mode_count,
            emitter: EmitterKind::Kerr { chi },
            fock_cutoff,
            emitter_cutoff,
        }
    }

    pub fn with_g(&self, g: f64) -> Self {
        Self { g, ..self.clone() }
    }

    pub fn with_modes(&self, mode_count: usize) -> Self {
        Self { mode_count, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_x > 0.0) || !self.omega_x.is_finite() {
            return Err(invalid(format!("omega_x must be > 0 (got {})", self.omega_x)));
        }
        if !(self.omega_c > 0.0) || !self.omega_c.is_finite() {
            return Err(invalid(format!("omega_c must be > 0 (got {})", self.omega_c)));
        }
        if !(self.g >= 0.0) || !self.g.is_finite() {
            return Err(invalid(format!("g must be >= 0 (got {})", self.g)));
        }
        if self.mode_count < 1 {
            return Err(invalid("mode_count must be >= 1"));
        }
        if self.fock_cutoff < 2 {
            return Err(invalid(format!("fock_cutoff must be >= 2 (got {})", self.fock_cutoff)));
        }
        match self.emitter {
            EmitterKind::Tls if self.emitter_cutoff != 2 => Err(invalid(format!(
                "emitter_cutoff must be 2 for a two-level emitter (got {})",
                self.emitter_cutoff
            ))),
            EmitterKind::Kerr { chi } if !(chi >= 0.0) => Err(invalid(format!("chi must be >= 0 (got {chi})"))),
            EmitterKind::Kerr { .. } if self.emitter_cutoff < 2 => Err(invalid(format!(
                "emitter_cutoff must be >= 2 (got {})",
                self.emitter_cutoff
            ))),
            _ => Ok(()),
        }
    }

    /// Local dimensions `[emitter, mode 0, ..., mode M-1]`.
    pub fn site_dims(&self) -> Vec<usize> {
        std::iter::once(self.emitter_cutoff)
            .chain(std::iter::repeat(self.fock_cutoff).take(self.mode_count))
            .collect()
    }

    /// Operator through which the emitter couples to the field.
    pub fn emitter_coupling_op(&self) -> LocalOp {
        match self.emitter {
            EmitterKind::Tls => LocalOp::SigmaX,
            EmitterKind::Kerr { .. } => LocalOp::Quadrature,
        }
    }

    /// Operator measuring the emitter excitation (`σ†σ` or `b†b`).
    pub fn emitter_population_op(&self) -> LocalOp {
        match self.emitter {
            EmitterKind::Tls => LocalOp::Excited,
            EmitterKind::Kerr { .. } => LocalOp::Number,
        }
    }
}

/// Unit conventions used throughout the crate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitsConvention {
    pub hbar: f64,
    pub omega_c: f64,
    /// Cavity length; positions are `x / L ∈ [-1/2, 1/2]`.
    pub length: f64,
}

impl Default for UnitsConvention {
    fn default() -> Self {
        Self { hbar: 1.0, omega_c: 1.0, length: 1.0 }
    }
}

impl UnitsConvention {
    /// `c = L ω_c / 2π`: mode `n` has wavenumber `2π(n+1)/L` and frequency `(n+1) ω_c`.
    pub fn light_speed(&self) -> f64 {
        self.length * self.omega_c / (2.0 * PI)
    }

    pub fn roundtrip(&self) -> f64 {
        2.0 * PI / self.omega_c
    }

    /// Time for a wavefront to travel from the emitter to a cavity edge.
    pub fn edge_arrival(&self) -> f64 {
        0.5 * self.length / self.light_speed()
    }
}

/// Single-site operators. Matrices are real in the Fock (or `{g, e}`) basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LocalOp {
    Identity,
    /// `a†a`
    Number,
    /// `a`
    Lower,
    /// `a†`
    Raise,
    /// `a + a†`
    Quadrature,
    /// `a†a†aa = n(n-1)`
    KerrPair,
    /// `σ_z`, basis order `[g, e]`
    SigmaZ,
    /// `σ_x`
    SigmaX,
    /// `σ†σ = |e⟩⟨e|`
    Excited,
}

impl LocalOp {
    pub fn matrix(self, dim: usize) -> Mat<f64> {
        let sqrt = |k: usize| (k as f64).sqrt();
        match self {
            LocalOp::Identity => Mat::identity(dim, dim),
            LocalOp::Number => Mat::from_fn(dim, dim, |i, j| if i == j { i as f64 } else { 0.0 }),
            LocalOp::Lower => Mat::from_fn(dim, dim, |i, j| if j == i + 1 { sqrt(j) } else { 0.0 }),
            LocalOp::Raise => Mat::from_fn(dim, dim, |i, j| if i == j + 1 { sqrt(i) } else { 0.0 }),
            LocalOp::Quadrature => Mat::from_fn(dim, dim, |i, j| {
                if j == i + 1 {
                    sqrt(j)
                } else if i == j + 1 {
                    sqrt(i)
                } else {
                    0.0
                }
            }),
            LocalOp::KerrPair => {
                Mat::from_fn(dim, dim, |i, j| if i == j { (i * i.saturating_sub(1)) as f64 } else { 0.0 })
            }
            LocalOp::SigmaZ => {
                assert_eq!(dim, 2, "sigma_z acts on a two-level site");
                Mat::from_fn(2, 2, |i, j| match (i, j) {
                    (0, 0) => -1.0,
                    (1, 1) => 1.0,
                    _ => 0.0,
                })
            }
            LocalOp::SigmaX => {
                assert_eq!(dim, 2, "sigma_x acts on a two-level site");
                Mat::from_fn(2, 2, |i, j| if i != j { 1.0 } else { 0.0 })
            }
            LocalOp::Excited => {
                assert_eq!(dim, 2, "sigma^dagger sigma acts on a two-level site");
                Mat::from_fn(2, 2, |i, j| if i == 1 && j == 1 { 1.0 } else { 0.0 })
            }
        }
    }

    /// Whether the operator changes the local excitation number by an odd amount.
    pub fn is_parity_odd(self) -> bool {
        matches!(self, LocalOp::Lower | LocalOp::Raise | LocalOp::Quadrature | LocalOp::SigmaX)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Term {
    OnSite {
        site: usize,
        op: LocalOp,
        coeff: f64,
    },
    Bond {
        left: usize,
        right: usize,
        left_op: LocalOp,
        right_op: LocalOp,
        coeff: f64,
    },
}

impl Term {
    pub fn coeff(&self) -> f64 {
        match self {
            Term::OnSite { coeff, .. } | Term::Bond { coeff, .. } => *coeff,
        }
    }

    pub fn is_coupling(&self) -> bool {
        matches!(self, Term::Bond { left: 0, .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Geometry {
    /// Emitter coupled to every cavity mode.
    Star,
    /// Emitter at the head of a nearest-neighbour chain.
    Chain,
}

/// Phase convention of the light–matter coupling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingConvention {
    /// `g σ_x (a + a†)`; related to `-i g σ_x (a - a†)` by `a → i a`.
    RealQuadrature,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianTerms {
    pub geometry: Geometry,
    pub site_dims: Vec<usize>,
    pub terms: Vec<Term>,
    pub coupling_convention: CouplingConvention,
}

impl HamiltonianTerms {
    pub fn site_count(&self) -> usize {
        self.site_dims.len()
    }

    pub fn couplings(&self) -> impl Iterator<Item = &Term> {
        self.terms.iter().filter(|t| t.is_coupling())
    }
}

pub(crate) fn emitter_terms(params: &ModelParams) -> Vec<Term> {
    match params.emitter {
        EmitterKind::Tls => vec![Term::OnSite { site: 0, op: LocalOp::SigmaZ, coeff: 0.5 * params.omega_x }],
        EmitterKind::Kerr { chi } => {
            let mut t = vec![Term::OnSite { site: 0, op: LocalOp::Number, coeff: params.omega_x }];
            if chi != 0.0 {
                t.push(Term::OnSite { site: 0, op: LocalOp::KerrPair, coeff: chi });
            }
            t
        }
    }
}

/// Star-geometry term list: emitter, mode energies `(n+1) ω_c`, and couplings
/// `g √(n+1)` of the emitter to every mode.
pub fn build_terms(params: &ModelParams) -> Result<HamiltonianTerms> {
    params.validate()?;
    let mut terms = emitter_terms(params);
    for n in 0..params.mode_count {
        terms.push(Term::OnSite {
            site: n + 1,
            op: LocalOp::Number,
            coeff: (n + 1) as f64 * params.omega_c,
        });
    }
    if params.g != 0.0 {
        let x = params.emitter_coupling_op();
        for n in 0..params.mode_count {
            terms.push(Term::Bond {
                left: 0,
                right: n + 1,
                left_op: x,
                right_op: LocalOp::Quadrature,
                coeff: params.g * ((n + 1) as f64).sqrt(),
            });
        }
    }
    Ok(HamiltonianTerms {
        geometry: Geometry::Star,
        site_dims: params.site_dims(),
        terms,
        coupling_convention: CouplingConvention::RealQuadrature,
    })
}

/// Poisson tail `P(k >= cutoff)` of a coherent state with mean photon number `mean`.
pub fn coherent_tail_mass(mean: f64, cutoff: usize) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    // log p_k = -mean + k ln(mean) - ln k!
    let mut log_p = -mean;
    for k in 1..=cutoff {
        log_p += mean.ln() - (k as f64).ln();
    }
    let mut p = log_p.exp();
    let mut tail = 0.0;
    let mut k = cutoff;
    while p > tail * 1e-17 || (k as f64) < mean {
        tail += p;
        k += 1;
        p *= mean / k as f64;
        if k > cutoff + 10_000 {
            break;
        }
    }
    tail.min(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffDiagnostics {
    /// Largest coherent displacement `2g / (ω_c √(n+1))` of each star mode.
    pub star_displacement: Vec<f64>,
    /// Largest coherent displacement of each chain site over one roundtrip.
    pub chain_displacement: Vec<f64>,
    /// Static estimate `g ρ_0 / ω_0` for the chain head.
    pub head_estimate: f64,
    /// Worst Poisson tail mass beyond the Fock cutoff over star and chain.
    pub worst_tail: f64,
    pub threshold: f64,
    pub passes: bool,
}

/// Estimate whether `fock_cutoff` is large enough for the coherent
/// displacements generated by the coupling. Advisory only.
pub fn validate_cutoffs(params: &ModelParams, threshold: f64) -> Result<CutoffDiagnostics> {
    params.validate()?;
    let m = params.mode_count;
    let star: Vec<f64> = (0..m)
        .map(|n| 2.0 * params.g / (params.omega_c * ((n + 1) as f64).sqrt()))
        .collect();
    let mapping = chain::build_chain_mapping(m)?;
    let head_estimate = params.g * mapping.rho0 / (mapping.omegas[0] * params.omega_c);

    let samples = 512;
    let roundtrip = 2.0 * PI / params.omega_c;
    let mut chain_disp = vec![0.0f64; m];
    for s in 0..=samples {
        let t = roundtrip * s as f64 / samples as f64;
        let betas: Vec<_> = (0..m).map(|n| analytic::beta(params, n, t)).collect();
        for (i, disp) in chain_disp.iter_mut().enumerate() {
            let amp: num_complex::Complex64 = (0..m).map(|n| betas[n] * mapping.u[(i, n)]).sum();
            *disp = disp.max(amp.norm());
        }
    }
    let worst_tail = star
        .iter()
        .chain(&chain_disp)
        .map(|a| coherent_tail_mass(a * a, params.fock_cutoff))
        .fold(0.0, f64::max);
    Ok(CutoffDiagnostics {
        star_displacement: star,
        chain_displacement: chain_disp,
        head_estimate,
        worst_tail,
        threshold,
        passes: worst_tail <= threshold,
    })
}
