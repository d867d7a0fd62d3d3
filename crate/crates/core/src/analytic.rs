//! Closed-form dynamics of the coupling-only Hamiltonian.
//!
//! Dropping the emitter splitting, each `σ_x` branch `|±⟩` drives every mode
//! into a coherent state `|∓β_n(t)⟩` with
//! `β_n(t) = β_0 / √(n+1) · (exp[-i(n+1)ω_c t] - 1)`, `β_0 = i g / ω_c`.
//! Everything in this module (revival probability, branch overlap, emitter
//! population, field intensity and mean field) follows from these amplitudes.
//!
//! Field quantities use mode profiles `cos[2π x (n+1)]` weighted by `√(n+1)`.
//! Intensities are in units of `ħ ω_c / (ε_0 A L)`, so the intensity of the
//! coupling-only solution is `(g/ω_c)² |Σ_n (e^{-i(n+1)ω_c t} - 1) cos[2π x (n+1)]|²`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{CompensatedComplexSum, CompensatedSum};
use crate::model::ModelParams;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `σ_x` eigenstate carried by the emitter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    /// Sign of the coherent amplitude `∓β_n` in this branch.
    pub fn amplitude_sign(self) -> f64 {
        match self {
            Branch::Plus => -1.0,
            Branch::Minus => 1.0,
        }
    }
}

pub(crate) fn beta(params: &ModelParams, n: usize, t: f64) -> C64 {
    let k = (n + 1) as f64;
    let beta0 = C64::new(0.0, params.g / params.omega_c);
    let phase = C64::from_polar(1.0, -k * params.omega_c * t);
    beta0 / k.sqrt() * (phase - 1.0)
}

/// Cavity profile `cos[2π x (n+1)]` of symmetric mode `n` at `x` (units of `L`).
pub fn mode_profile(n: usize, x: f64) -> f64 {
    (2.0 * PI * x * (n + 1) as f64).cos()
}

fn check_position(x: f64) -> Result<()> {
    if !(-0.5 - 1e-12..=0.5 + 1e-12).contains(&x) {
        return Err(invalid(format!("position x = {x} outside [-1/2, 1/2]")));
    }
    Ok(())
}

/// Coherent amplitude `β_n(t)` of mode `n`.
pub fn beta_n(params: &ModelParams, n: usize, t: f64) -> Result<C64> {
    if n >= params.mode_count {
        return Err(invalid(format!("mode index {n} out of range for {} modes", params.mode_count)));
    }
    Ok(beta(params, n, t))
}

/// `S(t) = Σ_n |β_n(t)|² = (g/ω_c)² Σ_n 2/(n+1) · (1 - cos[(n+1)ω_c t])`.
pub fn overlap_exponent(params: &ModelParams, t: f64) -> f64 {
    let ratio = params.g / params.omega_c;
    let sum: CompensatedSum = (0..params.mode_count)
        .map(|n| {
            let k = (n + 1) as f64;
            2.0 / k * (1.0 - (k * params.omega_c * t).cos())
        })
        .collect();
    ratio * ratio * sum.value()
}

/// Branch overlap `O(t) = e^{-2 S(t)}`.
pub fn overlap(params: &ModelParams, t: f64) -> f64 {
    (-2.0 * overlap_exponent(params, t)).exp()
}

/// Revival probability `P_0(t) = e^{-S(t)}`.
pub fn revival_probability(params: &ModelParams, t: f64) -> f64 {
    (-overlap_exponent(params, t)).exp()
}

/// Emitter population `½ [1 + O(t)]` for the initial state `|e⟩|0⟩`.
pub fn population(params: &ModelParams, t: f64) -> f64 {
    0.5 * (1.0 + overlap(params, t))
}

/// Closed-form evaluator for one parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherentSolution {
    pub params: ModelParams,
    pub beta0: C64,
}

impl CoherentSolution {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params: params.clone(), beta0: C64::new(0.0, params.g / params.omega_c) })
    }

    pub fn beta_n(&self, n: usize, t: f64) -> Result<C64> {
        beta_n(&self.params, n, t)
    }

    pub fn exponent(&self, t: f64) -> f64 {
        overlap_exponent(&self.params, t)
    }

    pub fn overlap(&self, t: f64) -> f64 {
        overlap(&self.params, t)
    }

    pub fn revival_probability(&self, t: f64) -> f64 {
        revival_probability(&self.params, t)
    }

    pub fn population(&self, t: f64) -> f64 {
        population(&self.params, t)
    }

    pub fn field_amplitude(&self, x: f64, t: f64) -> Result<f64> {
        field_amplitude(x, t, &self.params)
    }

    pub fn mean_field(&self, x: f64, t: f64, branch: Branch) -> Result<C64> {
        mean_field(x, t, branch, &self.params)
    }

    /// Star correlations `⟨a_n† a_m⟩ = β_n* β_m`, identical in both branches.
    pub fn correlations(&self, t: f64) -> faer::Mat<C64> {
        let m = self.params.mode_count;
        let b: Vec<C64> = (0..m).map(|n| beta(&self.params, n, t)).collect();
        faer::Mat::from_fn(m, m, |i, j| b[i].conj() * b[j])
    }
}

/// Closed-form steady overlap together with the exact mid-roundtrip value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyOverlap {
    /// `1 / [2 e^γ M]^{4 g²/ω_c²}`
    pub closed_form: f64,
    /// `O(π / ω_c)` from the direct sum.
    pub midpoint: f64,
}

fn log_mode_factor(m: usize) -> f64 {
    (2.0 * EULER_GAMMA.exp() * m as f64).ln()
}

pub fn steady_overlap(params: &ModelParams) -> Result<SteadyOverlap> {
    if params.mode_count < 2 {
        return Err(invalid("steady overlap needs at least 2 modes"));
    }
    let ratio = params.g / params.omega_c;
    Ok(SteadyOverlap {
        closed_form: (-4.0 * ratio * ratio * log_mode_factor(params.mode_count)).exp(),
        midpoint: overlap(params, PI / params.omega_c),
    })
}

/// Principal branch of the Lambert W function for `x >= -1/e`, by Halley
/// iteration from `ln(1 + x)` to a relative tolerance of `1e-12`.
pub fn lambert_w(x: f64) -> Result<f64> {
    let branch_point = -(-1.0f64).exp();
    if !(x >= branch_point) {
        return Err(invalid(format!("Lambert W undefined for x = {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut w = if x < -0.25 {
        // Series around the branch point.
        let p = (2.0 * (1.0 + std::f64::consts::E * x)).sqrt();
        -1.0 + p - p * p / 3.0
    } else {
        (1.0 + x).ln()
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0);
        let step = f / denom;
        w -= step;
        if step.abs() <= 1e-12 * w.abs().max(1e-300) {
            return Ok(w);
        }
    }
    Err(Error::Convergence { what: "Lambert W Halley iteration".into(), iterations: 100, trace: vec![w] })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalCoupling {
    /// `ω_c √(W(8 ω_x² ℓ/ω_c²) / (8 ℓ))` with `ℓ = ln[2 e^γ M]`.
    pub closed_form: f64,
    /// Root of `g = ω_x O(π/ω_c; g)` by bisection on the direct sum.
    pub numeric: f64,
}

impl CriticalCoupling {
    pub fn relative_disagreement(&self) -> f64 {
        if self.numeric == 0.0 {
            return self.closed_form.abs();
        }
        (self.closed_form - self.numeric).abs() / self.numeric
    }
}

/// Critical coupling at which the steady branch overlap suppresses the
/// emitter splitting: `g_c = ω_x Ō(g_c)`.
pub fn critical_coupling(mode_count: usize, omega_x: f64, omega_c: f64) -> Result<CriticalCoupling> {
    if mode_count < 2 {
        return Err(invalid("critical coupling needs at least 2 modes"));
    }
    if !(omega_x >= 0.0) || !(omega_c > 0.0) {
        return Err(invalid(format!("need omega_x >= 0 and omega_c > 0 (got {omega_x}, {omega_c})")));
    }
    let ell = log_mode_factor(mode_count);
    let ratio = omega_x / omega_c;
    let closed_form = omega_c * (lambert_w(8.0 * ratio * ratio * ell)? / (8.0 * ell)).sqrt();

    if omega_x == 0.0 {
        return Ok(CriticalCoupling { closed_form, numeric: 0.0 });
    }
    let mut params = ModelParams::tls(omega_x, 0.0, mode_count, 2);
    params.omega_c = omega_c;
    let residual = |g: f64| g - omega_x * overlap(&params.with_g(g), PI / omega_c);
    let (mut lo, mut hi) = (0.0, 10.0 * omega_c);
    if !(residual(lo) < 0.0 && residual(hi) > 0.0) {
        return Err(Error::Convergence {
            what: "critical coupling root not bracketed in (0, 10 omega_c]".into(),
            iterations: 0,
            trace: vec![residual(lo), residual(hi)],
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * omega_c {
            break;
        }
    }
    Ok(CriticalCoupling { closed_form, numeric: 0.5 * (lo + hi) })
}

/// Parts of the field intensity: bound cloud `(g/ω_c)² B(x)²`, propagating
/// `(g/ω_c)² |P(x,t)|²` and their interference `-2 (g/ω_c)² B Re P`, where
/// `B = Σ_n cos[2πx(n+1)]` and `P = Σ_n e^{-i(n+1)ω_c t} cos[2πx(n+1)]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDecomposition {
    pub total: f64,
    pub bound: f64,
    pub propagating: f64,
    pub interference: f64,
}

pub fn field_decomposition(x: f64, t: f64, params: &ModelParams) -> Result<FieldDecomposition> {
    check_position(x)?;
    let ratio = params.g / params.omega_c;
    let scale = ratio * ratio;
    let mut bound = CompensatedSum::new();
    let mut moving = CompensatedComplexSum::default();
    let mut total = CompensatedComplexSum::default();
    for n in 0..params.mode_count {
        let f = mode_profile(n, x);
        let phase = C64::from_polar(1.0, -((n + 1) as f64) * params.omega_c * t);
        bound.add(f);
        moving.add(phase * f);
        total.add((phase - 1.0) * f);
    }
    let b = bound.value();
    let p = moving.value();
    Ok(FieldDecomposition {
        total: scale * total.value().norm_sqr(),
        bound: scale * b * b,
        propagating: scale * p.norm_sqr(),
        interference: -2.0 * scale * b * p.re,
    })
}

/// Field intensity `⟨E⁻E⁺⟩(x, t)` of the coupling-only solution.
pub fn field_amplitude(x: f64, t: f64, params: &ModelParams) -> Result<f64> {
    Ok(field_decomposition(x, t, params)?.total)
}

/// Time-independent (bound) part of the field intensity.
pub fn bound_field(x: f64, params: &ModelParams) -> Result<f64> {
    Ok(field_decomposition(x, 0.0, params)?.bound)
}

/// Positive-frequency mean field `⟨E⁺⟩(x, t)` in branch `|±⟩`, in units of
/// `√(ħ ω_c / ε_0 A L)`. With `E⁺ = i Σ_n √(n+1) cos[2πx(n+1)] a_n` and
/// `⟨a_n⟩ = ∓β_n(t)` this is `± (g/ω_c) Σ_n (e^{-i(n+1)ω_c t} - 1) cos[2πx(n+1)]`.
pub fn mean_field(x: f64, t: f64, branch: Branch, params: &ModelParams) -> Result<C64> {
    check_position(x)?;
    let mut acc = CompensatedComplexSum::default();
    for n in 0..params.mode_count {
        let k = (n + 1) as f64;
        let amp = beta(params, n, t) * branch.amplitude_sign();
        acc.add(C64::i() * k.sqrt() * mode_profile(n, x) * amp);
    }
    Ok(acc.value())
}

/// Expectation of the Hermitian field `E = E⁺ + E⁻` in branch `|±⟩`.
pub fn hermitian_field(x: f64, t: f64, branch: Branch, params: &ModelParams) -> Result<f64> {
    Ok(2.0 * mean_field(x, t, branch, params)?.re)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpacePoint {
    pub branch: Branch,
    pub n: usize,
    pub t: f64,
    /// Real and imaginary parts of `∓β_n(t)`.
    pub re: f64,
    pub im: f64,
}

/// Sample the phase-space circle of modes `0..n_max` in both branches over
/// one fundamental period, `samples + 1` points per circle including both ends.
pub fn phase_trajectories(params: &ModelParams, n_max: usize, samples: usize) -> Result<Vec<PhaseSpacePoint>> {
    if n_max > params.mode_count {
        return Err(invalid(format!("n_max = {n_max} exceeds mode count {}", params.mode_count)));
    }
    let period = 2.0 * PI / params.omega_c;
    let mut out = Vec::with_capacity(2 * n_max * (samples + 1));
    for branch in [Branch::Plus, Branch::Minus] {
        for n in 0..n_max {
            for s in 0..=samples {
                let t = period * s as f64 / samples.max(1) as f64;
                let z = beta(params, n, t) * branch.amplitude_sign();
                out.push(PhaseSpacePoint { branch, n, t, re: z.re, im: z.im });
            }
        }
    }
    Ok(out)
}

/// The two conditions under which the emitter splitting can be neglected.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownCheck {
    /// `M ω_c ≫ ω_x`, i.e. `M ω_c ≥ factor · ω_x`.
    pub fast_decay: bool,
    /// `ω_x Ō ≪ g`, i.e. `factor · ω_x Ō ≤ g`.
    pub small_overlap: bool,
    pub factor: f64,
}

impl BreakdownCheck {
    pub fn multimode_regime(&self) -> bool {
        self.fast_decay && self.small_overlap
    }
}

pub fn breakdown_check(params: &ModelParams, factor: f64) -> Result<BreakdownCheck> {
    let steady = steady_overlap(params)?;
    Ok(BreakdownCheck {
        fast_decay: params.mode_count as f64 * params.omega_c >= factor * params.omega_x,
        small_overlap: factor * params.omega_x * steady.closed_form <= params.g,
        factor,
    })
}

/// First time the overlap drops below `(1 + Ō)/2`, scanned on `samples`
/// points of the first half roundtrip and refined by bisection.
pub fn overlap_decay_time(params: &ModelParams, samples: usize) -> Result<f64> {
    let level = 0.5 * (1.0 + steady_overlap(params)?.closed_form);
    let half = PI / params.omega_c;
    let mut prev = 0.0;
    for s in 1..=samples {
        let t = half * s as f64 / samples as f64;
        if overlap(params, t) < level {
            let (mut lo, mut hi) = (prev, t);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if overlap(params, mid) < level {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
        prev = t;
    }
    Err(Error::Convergence { what: "overlap never decays below (1+O)/2".into(), iterations: samples, trace: vec![] })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(g: f64, m: usize) -> ModelParams {
        ModelParams::tls(1.0, g, m, 8)
    }

    #[test]
    fn beta_vanishes_at_origin_and_roundtrips() {
        let params = p(0.6, 10);
        for n in 0..10 {
            assert_eq!(beta_n(&params, n, 0.0).unwrap(), C64::new(0.0, 0.0));
            for k in 1..4 {
                assert!(beta_n(&params, n, 2.0 * PI * k as f64).unwrap().norm() < 1e-13);
            }
        }
        assert!(beta_n(&params, 10, 0.0).is_err());
    }

    #[test]
    fn beta_antipode() {
        let params = p(0.6, 5);
        let b0 = C64::new(0.0, 0.6);
        for n in 0..5 {
            let k = (n + 1) as f64;
            let b = beta_n(&params, n, PI / k).unwrap();
            assert!((b - (-2.0 * b0 / k.sqrt())).norm() < 1e-14);
        }
    }

    #[test]
    fn base_amplitude_magnitude() {
        let s = CoherentSolution::new(&p(0.6, 3)).unwrap();
        assert!((s.beta0.norm() - 0.6).abs() < 1e-15);
        // |β_0(t) + β_0| = |β_0| on the circle
        for t in [0.1, 1.0, 2.5] {
            assert!(((s.beta_n(0, t).unwrap() + s.beta0).norm() - 0.6).abs() < 1e-14);
        }
    }

    #[test]
    fn exponent_special_values() {
        let params = p(1.0, 2);
        assert!((overlap_exponent(&params, PI) - 4.0).abs() < 1e-14);
        assert!((overlap(&params, PI) - (-8.0f64).exp()).abs() < 1e-16);
        for k in 0..4 {
            let t = 2.0 * PI * k as f64;
            assert!(overlap_exponent(&p(0.6, 50), t).abs() < 1e-20);
        }
    }

    #[test]
    fn exponent_matches_sum_of_squared_amplitudes() {
        // Independent route: Σ |β_n|² from the complex amplitudes.
        let params = p(0.6, 50);
        let direct: f64 = (0..50).map(|n| beta(&params, n, PI).norm_sqr()).sum();
        assert!((overlap_exponent(&params, PI) - direct).abs() < 1e-12);
    }

    #[test]
    fn steady_overlap_values() {
        assert_eq!(steady_overlap(&p(0.0, 10)).unwrap().closed_form, 1.0);
        let s = steady_overlap(&p(0.5, 10)).unwrap();
        let expected = 1.0 / (2.0 * EULER_GAMMA.exp() * 10.0);
        assert!((s.closed_form - expected).abs() < 1e-15);
        let s = steady_overlap(&p(0.6, 50)).unwrap();
        assert!((s.closed_form / s.midpoint - 1.0).abs() < 0.02, "{s:?}");
        assert!(s.closed_form > 5e-4 && s.closed_form < 7e-4);
        assert!(steady_overlap(&p(0.5, 1)).is_err());
    }

    #[test]
    fn lambert_w_inverts() {
        for x in [0.0, 1e-8, 0.3, 1.0, std::f64::consts::E, 28.6, 1e3, 1e8, -0.2, -0.36] {
            let w = lambert_w(x).unwrap();
            assert!((w * w.exp() - x).abs() <= 1e-11 * x.abs().max(1e-12), "x={x} w={w}");
        }
        assert!((lambert_w(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-13);
        assert!(lambert_w(-1.0).is_err());
    }

    #[test]
    fn critical_coupling_limits() {
        let c = critical_coupling(20, 0.0, 1.0).unwrap();
        assert_eq!(c.closed_form, 0.0);
        assert_eq!(c.numeric, 0.0);
        for m in [10, 40, 100] {
            let c = critical_coupling(m, 1.0, 1.0).unwrap();
            assert!(c.numeric > 0.2 && c.numeric < 0.35, "{c:?}");
            assert!(c.relative_disagreement() < 0.05);
            // defining condition
            let g = c.numeric;
            assert!((g - overlap(&p(g, m), PI)).abs() < 1e-12);
        }
    }

    fn brute_double_sum(x: f64, t: f64, g: f64, m: usize) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for n in 0..m {
            for k in 0..m {
                let a = C64::from_polar(1.0, (n + 1) as f64 * t) - 1.0;
                let b = C64::from_polar(1.0, -((k + 1) as f64) * t) - 1.0;
                acc += a * b * mode_profile(n, x) * mode_profile(k, x);
            }
        }
        g * g * acc.re
    }

    #[test]
    fn field_amplitude_matches_double_sum() {
        let params = p(0.6, 12);
        for &(x, t) in &[(0.0, 0.3), (0.21, PI / 2.0), (-0.4, 2.0), (0.5, PI)] {
            let direct = brute_double_sum(x, t, 0.6, 12);
            let fast = field_amplitude(x, t, &params).unwrap();
            assert!((direct - fast).abs() < 1e-11 * direct.abs().max(1.0), "{x} {t}");
            let d = field_decomposition(x, t, &params).unwrap();
            assert!((d.bound + d.propagating + d.interference - d.total).abs() < 1e-10);
        }
        assert!(field_amplitude(0.6, 0.0, &params).is_err());
    }

    #[test]
    fn field_vanishes_at_revivals() {
        let params = p(0.6, 30);
        for i in 0..=20 {
            let x = -0.5 + i as f64 / 20.0;
            assert_eq!(field_amplitude(x, 0.0, &params).unwrap(), 0.0);
            assert!(field_amplitude(x, 4.0 * PI, &params).unwrap() < 1e-20);
        }
    }

    #[test]
    fn mean_field_branches_and_intensity() {
        let params = p(0.6, 15);
        for &(x, t) in &[(0.1, 0.7), (-0.33, 2.2)] {
            let plus = mean_field(x, t, Branch::Plus, &params).unwrap();
            let minus = mean_field(x, t, Branch::Minus, &params).unwrap();
            assert_eq!(plus, -minus);
            let intensity = field_amplitude(x, t, &params).unwrap();
            assert!((plus.norm_sqr() - intensity).abs() < 1e-11);
        }
        assert_eq!(mean_field(0.2, 0.0, Branch::Plus, &params).unwrap().norm(), 0.0);
    }

    #[test]
    fn phase_space_circles() {
        let params = p(0.6, 30);
        let pts = phase_trajectories(&params, 20, 64).unwrap();
        assert_eq!(pts.len(), 2 * 20 * 65);
        for pt in &pts {
            let k = (pt.n + 1) as f64;
            // Branch |+⟩ carries -β_n: circle centred at +β_0/√(n+1).
            let centre = C64::new(0.0, 0.6 / k.sqrt()) * -pt.branch.amplitude_sign();
            let r = (C64::new(pt.re, pt.im) - centre).norm();
            assert!((r - 0.6 / k.sqrt()).abs() < 1e-13);
            if pt.t == 0.0 || (pt.t - 2.0 * PI).abs() < 1e-12 {
                assert!(pt.re.hypot(pt.im) < 1e-13);
            }
        }
        assert!(phase_trajectories(&params, 31, 4).is_err());
    }

    #[test]
    fn single_mode_circle() {
        let params = p(0.8, 1);
        let pts = phase_trajectories(&params, 1, 8).unwrap();
        let max_r = pts.iter().map(|p| p.re.hypot(p.im)).fold(0.0, f64::max);
        assert!((max_r - 1.6).abs() < 1e-14);
    }

    #[test]
    fn decay_time_scales_inversely_with_modes() {
        let ms = [10, 20, 50, 100, 200];
        let scaled: Vec<f64> = ms
            .iter()
            .map(|&m| overlap_decay_time(&p(0.6, m), 20_000).unwrap() * m as f64)
            .collect();
        let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = scaled.iter().cloned().fold(0.0, f64::max);
        assert!(hi / lo < 2.0, "{scaled:?}");
        for (&m, s) in ms.iter().zip(&scaled) {
            assert!(s / (m as f64) <= 2.0 * PI / m as f64);
        }
    }

    #[test]
    fn breakdown_predicates() {
        let c = breakdown_check(&p(0.6, 50), 10.0).unwrap();
        assert!(c.multimode_regime());
        let c = breakdown_check(&p(0.1, 5), 10.0).unwrap();
        assert!(!c.fast_decay);
        assert!(!c.small_overlap);
    }
}
