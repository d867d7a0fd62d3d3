use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::CompensatedSum;
use crate::model::{LocalOp, ModelParams};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Rank-3 site tensor `T[l, s, r]`, row-major with `r` fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteTensor {
    pub left: usize,
    pub phys: usize,
    pub right: usize,
    pub data: Vec<C64>,
}

impl SiteTensor {
    fn zeros(left: usize, phys: usize, right: usize) -> Self {
        Self { left, phys, right, data: vec![ZERO; left * phys * right] }
    }

    #[inline]
    fn at(&self, l: usize, s: usize, r: usize) -> C64 {
        self.data[(l * self.phys + s) * self.right + r]
    }

    /// `(l s) × r` matrix view.
    fn left_matrix(&self) -> Mat<C64> {
        let cols = self.right;
        Mat::from_fn(self.left * self.phys, cols, |i, j| self.data[i * cols + j])
    }

    /// `l × (s r)` matrix view.
    fn right_matrix(&self) -> Mat<C64> {
        let cols = self.phys * self.right;
        Mat::from_fn(self.left, cols, |i, j| self.data[i * cols + j])
    }

    fn from_matrix(m: &Mat<C64>, left: usize, phys: usize, right: usize) -> Self {
        debug_assert_eq!(m.nrows() * m.ncols(), left * phys * right);
        let cols = m.ncols();
        let mut data = Vec::with_capacity(left * phys * right);
        for i in 0..m.nrows() {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Self { left, phys, right, data }
    }

    /// Slice `T[:, s, :]` as an `l × r` matrix.
    fn slice(&self, s: usize) -> Mat<C64> {
        Mat::from_fn(self.left, self.right, |l, r| self.at(l, s, r))
    }
}

/// Emitter state used to seed a product state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EmitterState {
    /// `|g⟩` (or the Fock vacuum of a bosonic emitter).
    Ground,
    /// `|e⟩` (or one excitation of a bosonic emitter).
    Excited,
    /// `(|0⟩ + |1⟩)/√2`
    Plus,
    /// `(|0⟩ - |1⟩)/√2`
    Minus,
    Fock(usize),
    Amplitudes(Vec<C64>),
}

impl EmitterState {
    fn vector(&self, dim: usize) -> Result<Vec<C64>> {
        let mut v = vec![ZERO; dim];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            EmitterState::Ground => v[0] = C64::new(1.0, 0.0),
            EmitterState::Excited => v[1] = C64::new(1.0, 0.0),
            EmitterState::Plus => {
                v[0] = C64::new(h, 0.0);
                v[1] = C64::new(h, 0.0);
            }
            EmitterState::Minus => {
                v[0] = C64::new(h, 0.0);
                v[1] = C64::new(-h, 0.0);
            }
            EmitterState::Fock(k) => {
                if *k >= dim {
                    return Err(invalid(format!("emitter Fock state {k} outside cutoff {dim}")));
                }
                v[*k] = C64::new(1.0, 0.0);
            }
            EmitterState::Amplitudes(a) => {
                let norm = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if a.len() != dim || !(norm > 0.0) || !norm.is_finite() {
                    return Err(invalid("emitter amplitudes must match the emitter cutoff and have finite nonzero norm"));
                }
                v = a.iter().map(|z| z / norm).collect();
            }
        }
        Ok(v)
    }
}

/// Sweep direction of a gate layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Right,
    Left,
}

/// Outcome of one truncated SVD.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Truncation {
    /// Discarded share of the squared singular values.
    pub discarded: f64,
    /// Whether `chi_max` (rather than `svd_cut`) limited the kept rank.
    pub saturated: bool,
}

/// Mixed-canonical matrix product state over `[emitter, b_0, ..., b_{M-1}]`.
///
/// Sites left of `centre` are left-orthonormal, sites right of it
/// right-orthonormal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpsState {
    pub sites: Vec<SiteTensor>,
    pub centre: usize,
    /// Sum of discarded weights over every truncation so far.
    pub discarded_weight: f64,
    /// Set when the state is renormalized after every truncation.
    pub normalized: bool,
}

/// Product state `|emitter⟩ ⊗ |0 ... 0⟩`. The chain vacuum is also the star
/// vacuum, since the chain transform is a passive rotation.
pub fn init_product_state(params: &ModelParams, emitter: &EmitterState) -> Result<MpsState> {
    params.validate()?;
    let dims = params.site_dims();
    let e = emitter.vector(dims[0])?;
    let mut sites = Vec::with_capacity(dims.len());
    let mut head = SiteTensor::zeros(1, dims[0], 1);
    head.data.copy_from_slice(&e);
    sites.push(head);
    for &d in &dims[1..] {
        let mut t = SiteTensor::zeros(1, d, 1);
        t.data[0] = C64::new(1.0, 0.0);
        sites.push(t);
    }
    Ok(MpsState { sites, centre: 0, discarded_weight: 0.0, normalized: false })
}

fn sign_canonical_column(u: &mut Mat<C64>, v: &mut Mat<C64>, k: usize) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for i in 0..u.nrows() {
        let a = u[(i, k)].norm();
        if a > best_abs {
            best_abs = a;
            best = i;
        }
    }
    if best_abs > 0.0 {
        let phase = u[(best, k)].conj() / best_abs;
        for i in 0..u.nrows() {
            u[(i, k)] *= phase;
        }
        for i in 0..v.nrows() {
            v[(i, k)] *= phase;
        }
    }
}

impl MpsState {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn site_dims(&self) -> Vec<usize> {
        self.sites.iter().map(|t| t.phys).collect()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.len() - 1].iter().map(|t| t.right).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// `⟨ψ|ψ⟩` from the orthogonality centre.
    pub fn norm_sqr(&self) -> f64 {
        self.sites[self.centre].data.iter().map(|z| z.norm_sqr()).collect::<CompensatedSum>().value()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            self.sites[self.centre].data.iter_mut().for_each(|z| *z /= n);
        }
    }

    fn move_right(&mut self) -> Result<()> {
        let i = self.centre;
        let t = &self.sites[i];
        let (l, d) = (t.left, t.phys);
        let qr = t.left_matrix().qr();
        let q = qr.compute_thin_Q();
        let rr = qr.thin_R().to_owned();
        let k = q.ncols();
        self.sites[i] = SiteTensor::from_matrix(&q, l, d, k);
        let next = &self.sites[i + 1];
        let (d2, r2) = (next.phys, next.right);
        let merged = &rr * next.right_matrix();
        self.sites[i + 1] = SiteTensor::from_matrix(&merged, k, d2, r2);
        self.centre += 1;
        Ok(())
    }

    fn move_left(&mut self) -> Result<()> {
        let i = self.centre;
        let t = &self.sites[i];
        let (d, r) = (t.phys, t.right);
        let qr = t.right_matrix().adjoint().to_owned().qr();
        let q = qr.compute_thin_Q();
        let rr = qr.thin_R().to_owned();
        let k = q.ncols();
        self.sites[i] = SiteTensor::from_matrix(&q.adjoint().to_owned(), k, d, r);
        let prev = &self.sites[i - 1];
        let (l0, d0) = (prev.left, prev.phys);
        let merged = prev.left_matrix() * rr.adjoint();
        self.sites[i - 1] = SiteTensor::from_matrix(&merged, l0, d0, k);
        self.centre -= 1;
        Ok(())
    }

    /// Shift the orthogonality centre by QR steps.
    pub fn move_centre(&mut self, target: usize) -> Result<()> {
        if target >= self.len() {
            return Err(invalid(format!("site {target} out of range")));
        }
        while self.centre < target {
            self.move_right()?;
        }
        while self.centre > target {
            self.move_left()?;
        }
        Ok(())
    }

    /// Apply a two-site gate on bond `(i, i+1)` and split the result with a
    /// truncated SVD, leaving the centre at `i+1` (`Right`) or `i` (`Left`).
    pub fn apply_two_site(
        &mut self,
        i: usize,
        gate: &Mat<C64>,
        direction: Direction,
        chi_max: usize,
        svd_cut: f64,
        renormalize: bool,
    ) -> Result<Truncation> {
        if i + 1 >= self.len() {
            return Err(invalid(format!("bond {i} out of range")));
        }
        if self.centre != i && self.centre != i + 1 {
            self.move_centre(i)?;
        }
        let (a, b) = (&self.sites[i], &self.sites[i + 1]);
        let (l, d1, d2, r) = (a.left, a.phys, b.phys, b.right);
        let theta = a.left_matrix() * b.right_matrix();
        // theta[(l s1), (s2 r)] → x[(s1 s2), (l r)]
        let x = Mat::from_fn(d1 * d2, l * r, |row, col| {
            let (s1, s2) = (row / d2, row % d2);
            let (ll, rr) = (col / r, col % r);
            theta[(ll * d1 + s1, s2 * r + rr)]
        });
        let y = gate * x;
        let m = Mat::from_fn(l * d1, d2 * r, |row, col| {
            let (ll, s1) = (row / d1, row % d1);
            let (s2, rr) = (col / r, col % r);
            y[(s1 * d2 + s2, ll * r + rr)]
        });
        let svd = m.thin_svd().map_err(|e| Error::Numeric(format!("two-site SVD: {e:?}")))?;
        let mut u = svd.U().to_owned();
        let mut v = svd.V().to_owned();
        let s_all = svd.S().column_vector();
        let n_sv = s_all.nrows();
        let s: Vec<f64> = (0..n_sv).map(|k| s_all[k].re).collect();
        let total: f64 = s.iter().map(|x| x * x).sum();
        if !(s[0] > 0.0) || !total.is_finite() {
            return Err(Error::Numeric(format!("degenerate two-site tensor on bond {i}")));
        }
        let by_cut = s.iter().take_while(|&&x| x / s[0] >= svd_cut).count().max(1);
        let keep = by_cut.min(chi_max);
        let kept: f64 = s[..keep].iter().map(|x| x * x).sum();
        let discarded = ((total - kept) / total).max(0.0);
        for k in 0..keep {
            sign_canonical_column(&mut u, &mut v, k);
        }
        let scale = if renormalize { 1.0 / kept.sqrt() } else { 1.0 };
        let sv: Vec<f64> = s[..keep].iter().map(|x| x * scale).collect();
        match direction {
            Direction::Right => {
                let left = Mat::from_fn(l * d1, keep, |p, k| u[(p, k)]);
                let right = Mat::from_fn(keep, d2 * r, |k, q| v[(q, k)].conj() * sv[k]);
                self.sites[i] = SiteTensor::from_matrix(&left, l, d1, keep);
                self.sites[i + 1] = SiteTensor::from_matrix(&right, keep, d2, r);
                self.centre = i + 1;
            }
            Direction::Left => {
                let left = Mat::from_fn(l * d1, keep, |p, k| u[(p, k)] * sv[k]);
                let right = Mat::from_fn(keep, d2 * r, |k, q| v[(q, k)].conj());
                self.sites[i] = SiteTensor::from_matrix(&left, l, d1, keep);
                self.sites[i + 1] = SiteTensor::from_matrix(&right, keep, d2, r);
                self.centre = i;
            }
        }
        self.discarded_weight += discarded;
        if renormalize {
            self.normalized = true;
        }
        Ok(Truncation { discarded, saturated: keep == chi_max && by_cut > chi_max })
    }

    /// Copy with the centre on site 0, so every site to the right is
    /// right-orthonormal and right environments are identities.
    fn left_gauged(&self) -> Result<MpsState> {
        let mut c = self.clone();
        c.move_centre(0)?;
        Ok(c)
    }

    /// Left environments `E_i[l, l']` (bra, ket) for every site boundary.
    fn left_environments(&self) -> Vec<Mat<C64>> {
        let mut envs = Vec::with_capacity(self.len() + 1);
        envs.push(Mat::from_fn(1, 1, |_, _| C64::new(1.0, 0.0)));
        for t in &self.sites {
            let e = envs.last().unwrap();
            let mut next = Mat::<C64>::zeros(t.right, t.right);
            for s in 0..t.phys {
                let a = t.slice(s);
                next += a.adjoint() * (e * &a);
            }
            envs.push(next);
        }
        envs
    }

    fn transfer(t: &SiteTensor, env: &Mat<C64>, op: Option<&Mat<f64>>) -> Mat<C64> {
        let slices: Vec<Mat<C64>> = (0..t.phys).map(|s| t.slice(s)).collect();
        let mut out = Mat::<C64>::zeros(t.right, t.right);
        for s in 0..t.phys {
            match op {
                None => out += slices[s].adjoint() * (env * &slices[s]),
                Some(o) => {
                    let mut ket = Mat::<C64>::zeros(t.left, t.right);
                    let mut any = false;
                    for sp in 0..t.phys {
                        let w = o[(s, sp)];
                        if w != 0.0 {
                            ket += &slices[sp] * faer::Scale(C64::new(w, 0.0));
                            any = true;
                        }
                    }
                    if any {
                        out += slices[s].adjoint() * (env * &ket);
                    }
                }
            }
        }
        out
    }

    fn trace(m: &Mat<C64>) -> C64 {
        (0..m.nrows()).map(|i| m[(i, i)]).sum()
    }

    /// `⟨O⟩` at every site for the operator produced by `op(site)`,
    /// normalized by `⟨ψ|ψ⟩`.
    pub fn local_expectations(&self, op: impl Fn(usize) -> Option<LocalOp>) -> Result<Vec<Option<f64>>> {
        let c = self.left_gauged()?;
        let envs = c.left_environments();
        let norm = envs[c.len()][(0, 0)].re;
        Ok((0..c.len())
            .map(|i| {
                op(i).map(|o| {
                    let t = &c.sites[i];
                    let m = o.matrix(t.phys);
                    Self::trace(&Self::transfer(t, &envs[i], Some(&m))).re / norm
                })
            })
            .collect())
    }

    pub fn local_expectation(&self, site: usize, op: LocalOp) -> Result<f64> {
        if site >= self.len() {
            return Err(invalid(format!("site {site} out of range")));
        }
        Ok(self.local_expectations(|i| (i == site).then_some(op))?[site].unwrap())
    }

    /// Emitter excitation: `⟨σ†σ⟩` for a two-level site, `⟨b†b⟩` otherwise.
    pub fn emitter_population(&self) -> Result<f64> {
        let op = if self.sites[0].phys == 2 { LocalOp::Excited } else { LocalOp::Number };
        self.local_expectation(0, op)
    }

    /// `⟨b_i† b_i⟩` for every chain site.
    pub fn chain_occupations(&self) -> Result<Vec<f64>> {
        let v = self.local_expectations(|i| (i > 0).then_some(LocalOp::Number))?;
        Ok(v.into_iter().skip(1).map(|x| x.unwrap()).collect())
    }

    /// Chain correlation matrix `⟨b_i† b_j⟩`.
    pub fn correlations(&self) -> Result<Mat<C64>> {
        let c = self.left_gauged()?;
        let envs = c.left_environments();
        let norm = envs[c.len()][(0, 0)].re;
        let m = c.len() - 1;
        let mut out = Mat::<C64>::zeros(m, m);
        for p in 0..m {
            let site = p + 1;
            let t = &c.sites[site];
            let number = LocalOp::Number.matrix(t.phys);
            out[(p, p)] = C64::new(Self::trace(&Self::transfer(t, &envs[site], Some(&number))).re / norm, 0.0);
            let raise = LocalOp::Raise.matrix(t.phys);
            let mut f = Self::transfer(t, &envs[site], Some(&raise));
            for q in p + 1..m {
                let tq = &c.sites[q + 1];
                let lower = LocalOp::Lower.matrix(tq.phys);
                let v = Self::trace(&Self::transfer(tq, &f, Some(&lower))) / norm;
                out[(p, q)] = v;
                out[(q, p)] = v.conj();
                if q + 1 < m {
                    f = Self::transfer(tq, &f, None);
                }
            }
        }
        Ok(out)
    }

    /// Von Neumann entropy of the Schmidt spectrum at every bond.
    pub fn bond_entropies(&self) -> Result<Vec<f64>> {
        let mut c = self.left_gauged()?;
        let mut out = Vec::with_capacity(self.len() - 1);
        for i in 0..self.len() - 1 {
            let svd = c.sites[i]
                .left_matrix()
                .thin_svd()
                .map_err(|e| Error::Numeric(format!("entropy SVD: {e:?}")))?;
            let s = svd.S().column_vector();
            let w: Vec<f64> = (0..s.nrows()).map(|k| s[k].re * s[k].re).collect();
            let total: f64 = w.iter().sum();
            let entropy: f64 = w
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| {
                    let p = p / total;
                    -p * p.ln()
                })
                .sum();
            out.push(entropy.max(0.0));
            c.move_right()?;
        }
        Ok(out)
    }

    /// `Σ_b ⟨h_b⟩ / ⟨ψ|ψ⟩` for bond Hamiltonians `h_b` on `(b, b+1)`.
    pub fn bond_energy(&self, bonds: &[Mat<f64>]) -> Result<f64> {
        if bonds.len() + 1 != self.len() {
            return Err(invalid("one bond Hamiltonian per bond required"));
        }
        let c = self.left_gauged()?;
        let envs = c.left_environments();
        let norm = envs[c.len()][(0, 0)].re;
        let mut acc = CompensatedSum::new();
        for (b, h) in bonds.iter().enumerate() {
            let (a, t) = (&c.sites[b], &c.sites[b + 1]);
            let (l, d1, d2, r) = (a.left, a.phys, t.phys, t.right);
            let theta = a.left_matrix() * t.right_matrix();
            // x[(s1 s2), (l r)]
            let x = Mat::from_fn(d1 * d2, l * r, |row, col| {
                theta[((col / r) * d1 + row / d2, (row % d2) * r + col % r)]
            });
            let hc = Mat::from_fn(d1 * d2, d1 * d2, |i, j| C64::new(h[(i, j)], 0.0));
            let hx = &hc * &x;
            let env = &envs[b];
            let mut e = C64::new(0.0, 0.0);
            for rr in 0..r {
                for s in 0..d1 * d2 {
                    for lb in 0..l {
                        let bra = x[(s, lb * r + rr)].conj();
                        if bra == ZERO {
                            continue;
                        }
                        let mut k = C64::new(0.0, 0.0);
                        for lk in 0..l {
                            k += env[(lb, lk)] * hx[(s, lk * r + rr)];
                        }
                        e += bra * k;
                    }
                }
            }
            acc.add(e.re);
        }
        Ok(acc.value() / norm)
    }

    /// Dense state vector (last site fastest); for small systems only.
    pub fn to_dense(&self) -> Vec<C64> {
        let mut v = vec![C64::new(1.0, 0.0)];
        for t in &self.sites {
            let prefix = v.len() / t.left;
            let mut next = vec![ZERO; prefix * t.phys * t.right];
            for p in 0..prefix {
                for l in 0..t.left {
                    let a = v[p * t.left + l];
                    if a == ZERO {
                        continue;
                    }
                    for s in 0..t.phys {
                        for r in 0..t.right {
                            next[(p * t.phys + s) * t.right + r] += a * t.at(l, s, r);
                        }
                    }
                }
            }
            v = next;
        }
        v
    }
}
