use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::gates::{trotter_gates, EvolutionConfig, GateSet, TimeMode};
use super::state::{init_product_state, Direction, EmitterState, MpsState, Truncation};
use crate::chain::ChainMapping;
use crate::error::{invalid, Error, Result};
use crate::model::ModelParams;
use crate::series::{Source, TimeSeries};

/// Apply every gate on bonds of one parity, sweeping from whichever end is
/// closer to the orthogonality centre.
fn apply_layer(state: &mut MpsState, gates: &GateSet, parity: usize, config: &EvolutionConfig) -> Result<Truncation> {
    let renormalize = gates.mode == TimeMode::Imaginary;
    let bonds: Vec<usize> = (parity..gates.bond_count()).step_by(2).collect();
    let mut out = Truncation::default();
    let rightward = state.centre <= state.len() / 2;
    let order: Box<dyn Iterator<Item = &usize>> = if rightward { Box::new(bonds.iter()) } else { Box::new(bonds.iter().rev()) };
    for &b in order {
        let (target, direction) = if rightward { (b, Direction::Right) } else { (b + 1, Direction::Left) };
        state.move_centre(target)?;
        let t = state.apply_two_site(b, &gates.gates[b], direction, config.chi_max, config.svd_cut, renormalize)?;
        out.discarded += t.discarded;
        out.saturated |= t.saturated;
    }
    Ok(out)
}

/// One symmetric step `A(dt/2) B(dt) A(dt/2)` over even (`A`) and odd (`B`) bonds.
pub fn trotter_step(state: &mut MpsState, gates: &GateSet, config: &EvolutionConfig) -> Result<Truncation> {
    if state.site_dims() != gates.site_dims {
        return Err(invalid("state and gate dimensions differ"));
    }
    let mut total = Truncation::default();
    for parity in [0, 1, 0] {
        let t = apply_layer(state, gates, parity, config)?;
        total.discarded += t.discarded;
        total.saturated |= t.saturated;
    }
    Ok(total)
}

fn labels(chain_len: usize) -> Vec<String> {
    let mut l = vec!["population".to_string(), "norm".into(), "energy".into(), "discarded_weight".into(), "max_bond".into()];
    l.extend((0..chain_len).map(|i| format!("n_{i}")));
    l
}

fn measure_row(state: &MpsState, gates: &GateSet) -> Result<Vec<f64>> {
    let mut row = vec![
        state.emitter_population()?,
        state.norm_sqr().sqrt(),
        state.bond_energy(&gates.bond_hamiltonians)?,
        state.discarded_weight,
        state.max_bond() as f64,
    ];
    row.extend(state.chain_occupations()?);
    Ok(row)
}

/// Observer called at every measurement with the time and the state.
pub type Observer<'a> = dyn FnMut(f64, &MpsState) -> Result<()> + 'a;

/// Evolve for `config.steps()` Trotter steps, measuring every `stride`
/// steps and at the end. Columns: `population`, `norm`, `energy`,
/// `discarded_weight`, `max_bond`, `n_0 ..` (chain occupations).
pub fn evolve(
    state: &mut MpsState,
    gates: &GateSet,
    config: &EvolutionConfig,
    observer: &mut Observer<'_>,
) -> Result<TimeSeries> {
    config.validate()?;
    if config.mode != gates.mode || (config.dt - gates.dt).abs() > 1e-15 * config.dt {
        return Err(invalid("configuration does not match the gate set"));
    }
    let mut series = TimeSeries::new(Source::Mps, labels(state.len() - 1));
    let steps = config.steps();
    series.push(0.0, measure_row(state, gates)?);
    observer(0.0, state)?;
    let mut saturated = false;
    for k in 1..=steps {
        let t = k as f64 * config.dt;
        let trunc = trotter_step(state, gates, config)?;
        saturated |= trunc.saturated;
        if saturated && state.discarded_weight > config.truncation_budget {
            series.push(t, measure_row(state, gates)?);
            return Err(Error::TruncationBudget {
                discarded: state.discarded_weight,
                budget: config.truncation_budget,
                time: t,
                partial: Box::new(series),
            });
        }
        if k % config.stride == 0 || k == steps {
            series.push(t, measure_row(state, gates)?);
            observer(t, state)?;
        }
    }
    Ok(series)
}

/// Step schedule and stopping rule of the imaginary-time ground-state search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImaginaryConfig {
    pub chi_max: usize,
    pub svd_cut: f64,
    /// Decreasing imaginary time steps; each stage runs until converged.
    pub schedule: Vec<f64>,
    /// Converged when `|ΔE| / Δτ` over one check interval falls below this.
    pub tolerance: f64,
    pub check_every: usize,
    pub max_steps: usize,
}

impl Default for ImaginaryConfig {
    fn default() -> Self {
        Self {
            chi_max: 64,
            svd_cut: 1e-10,
            schedule: vec![0.1, 0.03, 0.01],
            tolerance: 1e-9,
            check_every: 10,
            max_steps: 20_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub state: MpsState,
    pub energy: f64,
    /// Energy after every check interval.
    pub trace: Vec<f64>,
    pub population: f64,
    /// Chain correlation matrix `⟨b_i† b_j⟩`.
    pub correlations: Mat<C64>,
}

/// Imaginary-time TEBD from `|g⟩|0⟩`, which lies in the parity sector of the
/// ground state. The reported energy is the variational `⟨H⟩`.
pub fn ground_state_imaginary(params: &ModelParams, mapping: &ChainMapping, config: &ImaginaryConfig) -> Result<GroundState> {
    if config.schedule.is_empty() || config.check_every == 0 {
        return Err(invalid("imaginary-time schedule must be nonempty with check_every >= 1"));
    }
    let mut state = init_product_state(params, &EmitterState::Ground)?;
    let mut trace = Vec::new();
    let mut energy = f64::NAN;
    for &dtau in &config.schedule {
        let evo = EvolutionConfig {
            dt: dtau,
            chi_max: config.chi_max,
            svd_cut: config.svd_cut,
            t_final: 0.0,
            stride: 1,
            mode: TimeMode::Imaginary,
            truncation_budget: f64::INFINITY,
        };
        let gates = trotter_gates(params, mapping, &evo)?;
        energy = state.bond_energy(&gates.bond_hamiltonians)?;
        trace.push(energy);
        let mut converged = false;
        let mut steps = 0;
        while steps < config.max_steps {
            for _ in 0..config.check_every {
                trotter_step(&mut state, &gates, &evo)?;
            }
            steps += config.check_every;
            state.normalize();
            let e = state.bond_energy(&gates.bond_hamiltonians)?;
            trace.push(e);
            let rate = (energy - e).abs() / (config.check_every as f64 * dtau);
            energy = e;
            if rate < config.tolerance {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence { what: format!("imaginary-time stage dtau = {dtau}"), iterations: steps, trace });
        }
    }
    let population = state.emitter_population()?;
    let correlations = state.correlations()?;
    Ok(GroundState { state, energy, trace, population, correlations })
}
