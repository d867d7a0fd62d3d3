//! Exact diagonalization in a truncated Fock basis.
//!
//! Every term list built by [`crate::model`] and [`crate::chain`] conserves the
//! total excitation parity `(-1)^{Σ_k n_k}` (the emitter state index counts as
//! an occupation), so the Hamiltonian is split into two parity blocks before
//! any diagonalization.

use std::collections::BTreeMap;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{lanczos, symmetric_eigen, CompensatedComplexSum, CompensatedSum};
use crate::model::{build_terms, HamiltonianTerms, LocalOp, ModelParams, Term};
use crate::series::{Source, TimeSeries};

/// Largest basis that will be assembled.
pub const DEFAULT_BUDGET: usize = 1 << 20;
/// Parity blocks below this size use the dense eigensolver.
pub const DENSE_LIMIT: usize = 4096;

/// Mixed-radix codec over local dimensions; the last site varies fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockBasis {
    dims: Vec<usize>,
    strides: Vec<usize>,
    dim: usize,
}

impl FockBasis {
    pub fn new(dims: &[usize], budget: usize) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(invalid("local dimensions must be positive"));
        }
        let mut dim = 1usize;
        for &d in dims {
            dim = match dim.checked_mul(d) {
                Some(v) if v <= budget => v,
                _ => {
                    return Err(Error::Resource {
                        dimension: dims.iter().fold(1f64, |a, &d| a * d as f64) as usize,
                        budget,
                        suggestion: "reduce mode_count or fock_cutoff".into(),
                    })
                }
            };
        }
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len() - 1).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        Ok(Self { dims: dims.to_vec(), strides, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn encode(&self, occupations: &[usize]) -> usize {
        occupations.iter().zip(&self.strides).map(|(o, s)| o * s).sum()
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        self.strides.iter().zip(&self.dims).map(|(s, d)| (index / s) % d).collect()
    }

    pub fn occupation(&self, index: usize, site: usize) -> usize {
        (index / self.strides[site]) % self.dims[site]
    }

    /// `+1` or `-1` according to the total excitation parity.
    pub fn parity(&self, index: usize) -> i8 {
        let total: usize = self.decode(index).iter().sum();
        if total % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

/// Real symmetric matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseMatrix {
    fn from_rows(rows: Vec<BTreeMap<usize, f64>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    pub fn apply_complex(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += x[self.cols[k]] * self.vals[k];
            }
            *yi = acc;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// Largest `|H_ij - H_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                worst = worst.max((self.vals[k] - self.get(self.cols[k], i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k])] = self.vals[k];
            }
        }
        m
    }

    /// Principal submatrix on `indices`.
    pub fn restrict(&self, indices: &[usize]) -> SparseMatrix {
        let mut position = vec![usize::MAX; self.n];
        for (k, &i) in indices.iter().enumerate() {
            position[i] = k;
        }
        let rows = indices
            .iter()
            .map(|&i| {
                let mut row = BTreeMap::new();
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    let p = position[self.cols[k]];
                    if p != usize::MAX {
                        row.insert(p, self.vals[k]);
                    }
                }
                row
            })
            .collect();
        SparseMatrix::from_rows(rows)
    }
}

/// Nonzero entries `(row, col, value)` of a local operator.
fn local_entries(op: LocalOp, dim: usize) -> Vec<(usize, usize, f64)> {
    let m = op.matrix(dim);
    let mut out = Vec::new();
    for i in 0..dim {
        for j in 0..dim {
            if m[(i, j)] != 0.0 {
                out.push((i, j, m[(i, j)]));
            }
        }
    }
    out
}

/// Assemble a term list (star or chain form) on its full product basis.
pub fn assemble_hamiltonian(terms: &HamiltonianTerms, basis: &FockBasis) -> Result<SparseMatrix> {
    if basis.dims() != terms.site_dims.as_slice() {
        return Err(invalid("basis dimensions do not match the term list"));
    }
    // Column-wise action: H|j⟩ = Σ_i H_ij |i⟩.
    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); basis.dim()];
    let prepared: Vec<_> = terms
        .terms
        .iter()
        .map(|t| match *t {
            Term::OnSite { site, op, coeff } => (vec![(site, local_entries(op, basis.dims[site]))], coeff),
            Term::Bond { left, right, left_op, right_op, coeff } => (
                vec![
                    (left, local_entries(left_op, basis.dims[left])),
                    (right, local_entries(right_op, basis.dims[right])),
                ],
                coeff,
            ),
        })
        .collect();
    for j in 0..basis.dim() {
        for (factors, coeff) in &prepared {
            if *coeff == 0.0 {
                continue;
            }
            // Expand the product of local actions on column j.
            let mut targets = vec![(j, *coeff)];
            for (site, entries) in factors {
                let stride = basis.strides[*site];
                let mut next = Vec::new();
                for &(idx, amp) in &targets {
                    let occ = basis.occupation(idx, *site);
                    for &(r, c, v) in entries {
                        if c == occ {
                            next.push((idx - occ * stride + r * stride, amp * v));
                        }
                    }
                }
                targets = next;
            }
            for (i, v) in targets {
                *rows[i].entry(j).or_insert(0.0) += v;
            }
        }
    }
    Ok(SparseMatrix::from_rows(rows))
}

/// Basis and Hamiltonian of one term list.
#[derive(Clone, Debug)]
pub struct ExactSystem {
    pub basis: FockBasis,
    pub hamiltonian: SparseMatrix,
    pub terms: HamiltonianTerms,
}

/// Eigenpairs of one diagonalization; vectors are columns in the full basis.
#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub parities: Vec<i8>,
}

impl ExactSystem {
    pub fn new(terms: &HamiltonianTerms, budget: usize) -> Result<Self> {
        let basis = FockBasis::new(&terms.site_dims, budget)?;
        let hamiltonian = assemble_hamiltonian(terms, &basis)?;
        Ok(Self { basis, hamiltonian, terms: terms.clone() })
    }

    /// Star-geometry system of `params`.
    pub fn star(params: &ModelParams) -> Result<Self> {
        Self::new(&build_terms(params)?, DEFAULT_BUDGET)
    }

    /// Chain-geometry system of `params` at the same per-site cutoffs.
    pub fn chain(params: &ModelParams) -> Result<Self> {
        let mapping = crate::chain::build_chain_mapping(params.mode_count)?;
        Self::new(&crate::chain::chain_terms(params, &mapping)?, DEFAULT_BUDGET)
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn parity_blocks(&self) -> [(i8, Vec<usize>); 2] {
        let mut even = Vec::new();
        let mut odd = Vec::new();
        for i in 0..self.dim() {
            if self.basis.parity(i) > 0 {
                even.push(i);
            } else {
                odd.push(i);
            }
        }
        [(1, even), (-1, odd)]
    }

    /// Lowest `k` eigenpairs (all of them when `k >= dim`), ordered by
    /// energy with near-degenerate ties broken by emitter population and
    /// then total photon number.
    pub fn lowest(&self, k: usize) -> Result<Eigenpairs> {
        self.lowest_with_limit(k, DENSE_LIMIT)
    }

    pub fn lowest_with_limit(&self, k: usize, dense_limit: usize) -> Result<Eigenpairs> {
        let mut pairs: Vec<(f64, Vec<f64>, i8)> = Vec::new();
        for (parity, indices) in self.parity_blocks() {
            if indices.is_empty() {
                continue;
            }
            let block = self.hamiltonian.restrict(&indices);
            let want = k.min(indices.len());
            let (values, vectors) = if indices.len() < dense_limit {
                let (vals, vecs) = symmetric_eigen(&block.to_dense())?;
                let cols = (0..want).map(|c| (0..indices.len()).map(|r| vecs[(r, c)]).collect()).collect();
                (vals[..want].to_vec(), cols)
            } else {
                lowest_lanczos(&block, want)?
            };
            for (e, v) in values.into_iter().zip(vectors) {
                let mut full = vec![0.0; self.dim()];
                for (&i, x) in indices.iter().zip(&v) {
                    full[i] = *x;
                }
                pairs.push((e, full, parity));
            }
        }
        let keys: Vec<(f64, f64)> = pairs
            .iter()
            .map(|(_, v, _)| (self.emitter_site_expectation(v), self.photon_expectation(v)))
            .collect();
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let scale = pairs.iter().map(|p| p.0.abs()).fold(1.0, f64::max);
        order.sort_by(|&a, &b| {
            let (ea, eb) = (pairs[a].0, pairs[b].0);
            if (ea - eb).abs() > 1e-10 * scale {
                return ea.total_cmp(&eb);
            }
            keys[a].0.total_cmp(&keys[b].0).then(keys[a].1.total_cmp(&keys[b].1)).then(a.cmp(&b))
        });
        order.truncate(k);
        let mut out = Eigenpairs { values: Vec::new(), vectors: Vec::new(), parities: Vec::new() };
        for i in order {
            out.values.push(pairs[i].0);
            out.parities.push(pairs[i].2);
            out.vectors.push(std::mem::take(&mut pairs[i].1));
        }
        Ok(out)
    }

    /// Expectation of the emitter occupation index (`⟨σ†σ⟩` or `⟨b†b⟩`).
    fn emitter_site_expectation(&self, v: &[f64]) -> f64 {
        v.iter()
            .enumerate()
            .map(|(i, x)| x * x * self.basis.occupation(i, 0) as f64)
            .collect::<CompensatedSum>()
            .value()
    }

    fn photon_expectation(&self, v: &[f64]) -> f64 {
        let sites = self.basis.dims().len();
        v.iter()
            .enumerate()
            .map(|(i, x)| x * x * (1..sites).map(|s| self.basis.occupation(i, s)).sum::<usize>() as f64)
            .collect::<CompensatedSum>()
            .value()
    }

    /// Product basis state with the given local occupations.
    pub fn product_state(&self, occupations: &[usize]) -> Result<Vec<C64>> {
        if occupations.len() != self.basis.dims().len()
            || occupations.iter().zip(self.basis.dims()).any(|(o, d)| o >= d)
        {
            return Err(invalid("product state occupations out of range"));
        }
        let mut psi = vec![C64::new(0.0, 0.0); self.dim()];
        psi[self.basis.encode(occupations)] = C64::new(1.0, 0.0);
        Ok(psi)
    }

    /// `⟨ψ|O_site|ψ⟩` for a local operator.
    pub fn local_expectation(&self, psi: &[C64], site: usize, op: LocalOp) -> f64 {
        let entries = local_entries(op, self.basis.dims()[site]);
        let stride = self.basis.strides[site];
        let mut acc = CompensatedComplexSum::default();
        for (j, amp) in psi.iter().enumerate() {
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            let occ = self.basis.occupation(j, site);
            for &(r, c, v) in &entries {
                if c == occ {
                    let i = j - occ * stride + r * stride;
                    acc.add(psi[i].conj() * amp * v);
                }
            }
        }
        acc.value().re
    }

    /// `⟨a_i† a_j⟩` between field sites `1..` (modes or chain sites).
    pub fn correlations(&self, psi: &[C64]) -> Mat<C64> {
        let sites = self.basis.dims().len();
        let m = sites - 1;
        let mut out = Mat::<C64>::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let (sa, sb) = (a + 1, b + 1);
                let mut acc = CompensatedComplexSum::default();
                for (j, amp) in psi.iter().enumerate() {
                    if amp.norm_sqr() == 0.0 {
                        continue;
                    }
                    // a_b |j⟩
                    let ob = self.basis.occupation(j, sb);
                    if ob == 0 {
                        continue;
                    }
                    let mut i = j - self.basis.strides[sb];
                    let mut w = (ob as f64).sqrt();
                    // a_a† on the result
                    let oa = self.basis.occupation(i, sa);
                    if oa + 1 >= self.basis.dims()[sa] {
                        continue;
                    }
                    i += self.basis.strides[sa];
                    w *= ((oa + 1) as f64).sqrt();
                    acc.add(psi[i].conj() * amp * w);
                }
                out[(a, b)] = acc.value();
                out[(b, a)] = acc.value().conj();
            }
        }
        out
    }

    pub fn energy(&self, psi: &[C64]) -> f64 {
        let mut h_psi = vec![C64::new(0.0, 0.0); self.dim()];
        self.hamiltonian.apply_complex(psi, &mut h_psi);
        psi.iter()
            .zip(&h_psi)
            .fold(CompensatedComplexSum::default(), |mut acc, (a, b)| {
                acc.add(a.conj() * b);
                acc
            })
            .value()
            .re
    }
}

/// Lowest `k` eigenpairs of a sparse symmetric block by restarted Lanczos,
/// one eigenpair per run, each run deflated against those already found.
fn lowest_lanczos(h: &SparseMatrix, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = h.n;
    let steps = n.min(160);
    let mut values = Vec::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let scale = (0..n).map(|i| h.get(i, i).abs()).fold(1.0, f64::max);
    for _ in 0..k {
        // Deterministic, non-special seed.
        let mut seed: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract()).collect();
        let mut trace = Vec::new();
        let mut found = None;
        for _ in 0..200 {
            let tri = lanczos(|x, y| h.apply(x, y), &seed, steps, &vectors)?;
            let kk = tri.diagonal.len();
            let t = Mat::<f64>::from_fn(kk, kk, |i, j| {
                if i == j {
                    tri.diagonal[i]
                } else if i == j + 1 {
                    tri.off_diagonal[j]
                } else if j == i + 1 {
                    tri.off_diagonal[i]
                } else {
                    0.0
                }
            });
            let (theta, s) = symmetric_eigen(&t)?;
            let mut ritz = vec![0.0; n];
            for (j, q) in tri.basis.iter().enumerate() {
                let c = s[(j, 0)];
                ritz.iter_mut().zip(q).for_each(|(r, x)| *r += c * x);
            }
            let norm = ritz.iter().map(|x| x * x).sum::<f64>().sqrt();
            ritz.iter_mut().for_each(|x| *x /= norm);
            let mut hv = vec![0.0; n];
            h.apply(&ritz, &mut hv);
            let residual = hv.iter().zip(&ritz).map(|(a, b)| (a - theta[0] * b).powi(2)).sum::<f64>().sqrt();
            trace.push(residual);
            if residual < 1e-9 * scale {
                found = Some((theta[0], ritz));
                break;
            }
            seed = ritz;
        }
        match found {
            Some((e, v)) => {
                values.push(e);
                vectors.push(v);
            }
            None => {
                return Err(Error::Convergence { what: "Lanczos eigensolver".into(), iterations: trace.len(), trace })
            }
        }
    }
    Ok((values, vectors))
}

/// Lowest levels of one Hamiltonian, referenced to the ground state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub g: f64,
    pub energies: Vec<f64>,
    pub gaps: Vec<f64>,
    pub parities: Vec<i8>,
}

impl SpectrumResult {
    pub fn from_pairs(g: f64, pairs: &Eigenpairs) -> Self {
        let e0 = pairs.values[0];
        Self {
            g,
            energies: pairs.values.clone(),
            gaps: pairs.values.iter().map(|e| (e - e0).max(0.0)).collect(),
            parities: pairs.parities.clone(),
        }
    }
}

/// CSV with columns `g, level_index, energy_gap`.
pub fn spectrum_csv(results: &[SpectrumResult]) -> String {
    let mut out = String::from("g,level_index,energy_gap\n");
    for r in results {
        for (k, gap) in r.gaps.iter().enumerate() {
            out.push_str(&format!("{},{k},{}\n", crate::series::csv_float(r.g), crate::series::csv_float(*gap)));
        }
    }
    out
}

/// Lowest `k_levels` of the star Hamiltonian at each coupling.
pub fn spectrum_sweep(params: &ModelParams, g_grid: &[f64], k_levels: usize) -> Result<Vec<SpectrumResult>> {
    if k_levels < 2 {
        return Err(invalid("k_levels must be >= 2"));
    }
    g_grid
        .iter()
        .map(|&g| {
            let system = ExactSystem::star(&params.with_g(g))?;
            Ok(SpectrumResult::from_pairs(g, &system.lowest(k_levels)?))
        })
        .collect()
}

/// Exact time evolution sampled on a grid.
#[derive(Clone, Debug)]
pub struct ExactEvolution {
    /// Columns: `population`, `n_0 .. n_{M-1}` (field sites), `norm`, `energy`.
    pub series: TimeSeries,
    pub states: Vec<Vec<C64>>,
}

/// Spectral propagation `ψ(t) = V e^{-iEt} Vᵀ ψ(0)` with the full
/// eigendecomposition of both parity blocks.
pub fn evolve_exact(system: &ExactSystem, initial: &[C64], t_grid: &[f64]) -> Result<ExactEvolution> {
    let n = system.dim();
    if initial.len() != n {
        return Err(invalid("initial state has the wrong dimension"));
    }
    let mut blocks = Vec::new();
    for (_, indices) in system.parity_blocks() {
        if indices.is_empty() {
            continue;
        }
        if indices.len() > 2 * DENSE_LIMIT {
            return Err(Error::Resource {
                dimension: n,
                budget: 4 * DENSE_LIMIT,
                suggestion: "exact evolution needs a full eigendecomposition; reduce mode_count or fock_cutoff".into(),
            });
        }
        let (values, vectors) = symmetric_eigen(&system.hamiltonian.restrict(&indices).to_dense())?;
        let coeffs: Vec<C64> = (0..indices.len())
            .map(|c| {
                let mut acc = CompensatedComplexSum::default();
                for (r, &i) in indices.iter().enumerate() {
                    acc.add(initial[i] * vectors[(r, c)]);
                }
                acc.value()
            })
            .collect();
        blocks.push((indices, values, vectors, coeffs));
    }
    let m = system.basis.dims().len() - 1;
    let mut labels = vec!["population".to_string()];
    labels.extend((0..m).map(|k| format!("n_{k}")));
    labels.push("norm".into());
    labels.push("energy".into());
    let mut series = TimeSeries::new(Source::Exact, labels);
    let mut states = Vec::with_capacity(t_grid.len());
    let pop_op = match system.basis.dims()[0] {
        2 => LocalOp::Excited,
        _ => LocalOp::Number,
    };
    for &t in t_grid {
        let mut psi = vec![C64::new(0.0, 0.0); n];
        for (indices, values, vectors, coeffs) in &blocks {
            let phased: Vec<C64> = values.iter().zip(coeffs).map(|(e, c)| c * C64::from_polar(1.0, -e * t)).collect();
            for (r, &i) in indices.iter().enumerate() {
                let mut acc = CompensatedComplexSum::default();
                for (c, p) in phased.iter().enumerate() {
                    acc.add(p * vectors[(r, c)]);
                }
                psi[i] = acc.value();
            }
        }
        let mut row = vec![system.local_expectation(&psi, 0, pop_op)];
        row.extend((1..=m).map(|s| system.local_expectation(&psi, s, LocalOp::Number)));
        row.push(psi.iter().map(|a| a.norm_sqr()).collect::<CompensatedSum>().value().sqrt());
        row.push(system.energy(&psi));
        series.push(t, row);
        states.push(psi);
    }
    Ok(ExactEvolution { series, states })
}

/// Ground energy and state of a term list.
pub fn ground_state(system: &ExactSystem) -> Result<(f64, Vec<f64>)> {
    let mut pairs = system.lowest(1)?;
    Ok((pairs.values[0], pairs.vectors.swap_remove(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn codec_is_bijective() {
        let b = FockBasis::new(&[2, 3, 4], 1000).unwrap();
        assert_eq!(b.dim(), 24);
        for i in 0..24 {
            assert_eq!(b.encode(&b.decode(i)), i);
        }
        assert_eq!(b.decode(1), vec![0, 0, 1]);
        assert!(matches!(FockBasis::new(&[2, 10, 10, 10], 100), Err(Error::Resource { .. })));
    }

    #[test]
    fn decoupled_spectrum() {
        let params = ModelParams::tls(1.3, 0.0, 2, 4);
        let system = ExactSystem::star(&params).unwrap();
        let pairs = system.lowest(system.dim()).unwrap();
        let mut expected = Vec::new();
        for s in [-0.65, 0.65] {
            for k0 in 0..4 {
                for k1 in 0..4 {
                    expected.push(s + k0 as f64 + 2.0 * k1 as f64);
                }
            }
        }
        expected.sort_by(f64::total_cmp);
        for (a, b) in pairs.values.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_is_symmetric() {
        let params = ModelParams::tls(0.7, 0.4, 3, 4);
        assert!(ExactSystem::star(&params).unwrap().hamiltonian.asymmetry() < 1e-14);
        assert!(ExactSystem::chain(&params).unwrap().hamiltonian.asymmetry() < 1e-13);
    }

    #[test]
    fn vacuum_rabi_splitting() {
        let params = ModelParams::tls(1.0, 0.01, 1, 6);
        let sys = ExactSystem::star(&params).unwrap();
        let e = sys.lowest(3).unwrap().values;
        assert!(((e[2] - e[1]) / 0.02 - 1.0).abs() < 0.01, "{e:?}");
    }

    #[test]
    fn star_and_chain_spectra_agree_at_generous_cutoff() {
        let params = ModelParams::tls(1.0, 0.2, 3, 9);
        let a = ExactSystem::star(&params).unwrap().lowest(6).unwrap().values;
        let b = ExactSystem::chain(&params).unwrap().lowest(6).unwrap().values;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6, "{x} {y}");
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let params = ModelParams::tls(1.0, 0.5, 2, 8);
        let sys = ExactSystem::star(&params).unwrap();
        let dense = sys.lowest(5).unwrap();
        let sparse = sys.lowest_with_limit(5, 10).unwrap();
        for (a, b) in dense.values.iter().zip(&sparse.values) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn cutoff_convergence_of_gaps() {
        let gaps = |d| {
            let sys = ExactSystem::star(&ModelParams::tls(1.0, 0.3, 2, d)).unwrap();
            SpectrumResult::from_pairs(0.3, &sys.lowest(4).unwrap()).gaps
        };
        let (a, b) = (gaps(10), gaps(20));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn ground_energy_nonincreasing_in_g() {
        let params = ModelParams::tls(1.0, 0.0, 2, 8);
        let mut last = f64::INFINITY;
        for k in 0..=10 {
            let g = 0.1 * k as f64;
            let (e, _) = ground_state(&ExactSystem::star(&params.with_g(g)).unwrap()).unwrap();
            assert!(e <= last + 1e-12);
            last = e;
        }
    }

    #[test]
    fn decoupled_evolution_is_static() {
        let params = ModelParams::tls(1.0, 0.0, 2, 3);
        let sys = ExactSystem::star(&params).unwrap();
        let psi = sys.product_state(&[1, 0, 0]).unwrap();
        let ev = evolve_exact(&sys, &psi, &[0.0, 1.0, 5.0]).unwrap();
        for p in ev.series.column("population").unwrap() {
            assert!((p - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn resonant_rabi_period() {
        let params = ModelParams::tls(1.0, 0.05, 1, 8);
        let sys = ExactSystem::star(&params).unwrap();
        let psi = sys.product_state(&[1, 0]).unwrap();
        let grid: Vec<f64> = (0..=400).map(|k| k as f64 * PI / 0.05 / 400.0 * 1.2).collect();
        let ev = evolve_exact(&sys, &psi, &grid).unwrap();
        let pop = ev.series.column("population").unwrap();
        // first return to the excited state near t = π/g
        let start = pop.iter().position(|&p| p < 0.1).unwrap();
        let k = (start..pop.len()).max_by(|&a, &b| pop[a].total_cmp(&pop[b])).unwrap();
        assert!((grid[k] * 0.05 / PI - 1.0).abs() < 0.05, "{}", grid[k]);
        let min = pop.iter().cloned().fold(1.0, f64::min);
        assert!(min < 0.05);
    }

    #[test]
    fn evolution_conserves_norm_and_energy() {
        let params = ModelParams::tls(1.0, 0.3, 3, 4);
        let sys = ExactSystem::chain(&params).unwrap();
        let psi = sys.product_state(&[1, 0, 0, 0]).unwrap();
        let ev = evolve_exact(&sys, &psi, &[0.0, 0.7, 3.0, 2.0 * PI]).unwrap();
        let e0 = ev.series.column("energy").unwrap()[0];
        for (n, e) in ev.series.column("norm").unwrap().iter().zip(ev.series.column("energy").unwrap()) {
            assert!((n - 1.0).abs() < 1e-10);
            assert!((e - e0).abs() < 1e-8);
        }
    }

    #[test]
    fn correlation_diagonal_is_occupation() {
        let params = ModelParams::tls(1.0, 0.4, 2, 5);
        let sys = ExactSystem::star(&params).unwrap();
        let psi = sys.product_state(&[1, 0, 0]).unwrap();
        let ev = evolve_exact(&sys, &psi, &[1.3]).unwrap();
        let c = sys.correlations(&ev.states[0]);
        for k in 0..2 {
            assert!((c[(k, k)].re - ev.series.rows[0][1 + k]).abs() < 1e-13);
            assert!(c[(k, k)].im.abs() < 1e-15);
        }
        assert!((c[(0, 1)] - c[(1, 0)].conj()).norm() < 1e-15);
    }

    #[test]
    fn single_mode_doublets_at_deep_strong_coupling() {
        let params = ModelParams::tls(1.0, 3.0, 1, 60);
        let sys = ExactSystem::star(&params).unwrap();
        let e = sys.lowest(4).unwrap().values;
        assert!(e[1] - e[0] < 1e-3);
        let spacing = 0.5 * (e[2] + e[3]) - 0.5 * (e[0] + e[1]);
        assert!((spacing - 1.0).abs() < 0.05, "{spacing}");
    }
}
