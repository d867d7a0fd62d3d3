use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::chain::{chain_terms, ChainMapping};
use crate::error::{invalid, Result};
use crate::linalg::exp_symmetric;
use crate::model::{HamiltonianTerms, ModelParams, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    Real,
    Imaginary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    /// Trotter step in units of `1/ω_c`.
    pub dt: f64,
    pub chi_max: usize,
    /// Singular values with `s_k / s_0 < svd_cut` are dropped.
    pub svd_cut: f64,
    pub t_final: f64,
    /// Measure every `stride` steps.
    pub stride: usize,
    pub mode: TimeMode,
    /// Largest tolerated cumulative discarded weight once `chi_max` binds.
    pub truncation_budget: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            dt: 2.0 * PI / 2000.0,
            chi_max: 64,
            svd_cut: 1e-10,
            t_final: 2.0 * PI,
            stride: 10,
            mode: TimeMode::Real,
            truncation_budget: 1e-4,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid(format!("dt must be > 0 (got {})", self.dt)));
        }
        if !(self.svd_cut > 0.0 && self.svd_cut <= 1e-6) {
            return Err(invalid(format!("svd_cut must lie in (0, 1e-6] (got {})", self.svd_cut)));
        }
        if self.chi_max < 2 {
            return Err(invalid(format!("chi_max must be >= 2 (got {})", self.chi_max)));
        }
        if self.stride == 0 {
            return Err(invalid("stride must be >= 1"));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(invalid(format!("t_final must be >= 0 (got {})", self.t_final)));
        }
        if !(self.truncation_budget > 0.0) {
            return Err(invalid("truncation_budget must be > 0"));
        }
        Ok(())
    }

    /// Number of Trotter steps to reach `t_final`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Split a nearest-neighbour term list into one real symmetric Hamiltonian
/// per bond `(b, b+1)`. Edge sites put their on-site terms wholly on their
/// only bond, interior sites share them equally between both bonds.
pub fn bond_hamiltonians(terms: &HamiltonianTerms) -> Result<Vec<Mat<f64>>> {
    let dims = &terms.site_dims;
    let n = dims.len();
    if n < 2 {
        return Err(invalid("need at least two sites"));
    }
    let mut bonds: Vec<Mat<f64>> = (0..n - 1).map(|b| Mat::zeros(dims[b] * dims[b + 1], dims[b] * dims[b + 1])).collect();
    let kron = |a: &Mat<f64>, b: &Mat<f64>| {
        let (p, q) = (a.nrows(), b.nrows());
        Mat::<f64>::from_fn(p * q, p * q, |i, j| a[(i / q, j / q)] * b[(i % q, j % q)])
    };
    for term in &terms.terms {
        match *term {
            Term::OnSite { site, op, coeff } => {
                let local = op.matrix(dims[site]) * coeff;
                let shares: Vec<(usize, f64, bool)> = if site == 0 {
                    vec![(0, 1.0, true)]
                } else if site == n - 1 {
                    vec![(n - 2, 1.0, false)]
                } else {
                    vec![(site - 1, 0.5, false), (site, 0.5, true)]
                };
                for (b, w, is_left) in shares {
                    let m = if is_left {
                        kron(&local, &Mat::identity(dims[b + 1], dims[b + 1]))
                    } else {
                        kron(&Mat::identity(dims[b], dims[b]), &local)
                    };
                    bonds[b] += m * w;
                }
            }
            Term::Bond { left, right, left_op, right_op, coeff } => {
                if right != left + 1 {
                    return Err(invalid(format!("term couples sites {left} and {right}; only nearest neighbours allowed")));
                }
                bonds[left] += kron(&left_op.matrix(dims[left]), &right_op.matrix(dims[right])) * coeff;
            }
        }
    }
    Ok(bonds)
}

/// Second-order Trotter gates: `exp(f dt/2 h_b)` on even bonds and
/// `exp(f dt h_b)` on odd bonds, with `f = -i` (real) or `-1` (imaginary).
#[derive(Clone, Debug)]
pub struct GateSet {
    pub dt: f64,
    pub mode: TimeMode,
    pub site_dims: Vec<usize>,
    pub bond_hamiltonians: Vec<Mat<f64>>,
    pub gates: Vec<Mat<C64>>,
}

impl GateSet {
    pub fn from_terms(terms: &HamiltonianTerms, dt: f64, mode: TimeMode) -> Result<Self> {
        let bond_h = bond_hamiltonians(terms)?;
        let factor = match mode {
            TimeMode::Real => C64::new(0.0, -1.0),
            TimeMode::Imaginary => C64::new(-1.0, 0.0),
        };
        let gates = bond_h
            .iter()
            .enumerate()
            .map(|(b, h)| {
                let tau = if b % 2 == 0 { 0.5 * dt } else { dt };
                exp_symmetric(h, factor * tau)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dt, mode, site_dims: terms.site_dims.clone(), bond_hamiltonians: bond_h, gates })
    }

    pub fn bond_count(&self) -> usize {
        self.gates.len()
    }
}

/// Gates for the chain form of `params`.
pub fn trotter_gates(params: &ModelParams, mapping: &ChainMapping, config: &EvolutionConfig) -> Result<GateSet> {
    config.validate()?;
    GateSet::from_terms(&chain_terms(params, mapping)?, config.dt, config.mode)
}
