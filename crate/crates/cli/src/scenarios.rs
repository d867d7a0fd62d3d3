use std::f64::consts::PI;
use std::time::Instant;

use faer::Mat;
use mmrabi_core::analytic::{self, Branch};
use mmrabi_core::chain::{build_chain_mapping, star_correlations, verify_against_closed_form};
use mmrabi_core::exact::{evolve_exact, spectrum_csv, ExactSystem, SpectrumResult};
use mmrabi_core::model::validate_cutoffs;
use mmrabi_core::mps::{
    evolve, ground_state_imaginary, init_product_state, trotter_gates, EmitterState, EvolutionConfig, ImaginaryConfig,
    TimeMode,
};
use mmrabi_core::observables::{
    analytic_cloud, analytic_field_map, causality_sweep, detect_revivals, field_map_from_correlations,
    ground_cloud_extract, population_disturbance, relative_l2, uniform_grid, CausalityConfig, CloudSource, FieldMap,
};
use mmrabi_core::series::{csv_float, Source, TimeSeries};
use mmrabi_core::{Complex64 as C64, Error as CoreError, ModelParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Scenario, ScenarioSpec, Settings};
use crate::error::CliError;
use crate::manifest::{Check, OutputDir, RunManifest, MANIFEST_NAME};
use crate::svg::{self, Line};

const ROUNDTRIP: f64 = 2.0 * PI;
const CUTOFF_TAIL: f64 = 1e-3;

/// Pool size from `MMRABI_WORKERS`, else the available parallelism.
pub fn worker_count() -> Result<usize, CliError> {
    match std::env::var("MMRABI_WORKERS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Parse(format!("MMRABI_WORKERS must be a positive integer (got '{v}')"))),
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// Run one scenario, writing its outputs and `manifest.json`. The manifest is
/// written on failure too, listing whatever partial output exists.
pub fn run(spec: &ScenarioSpec) -> Result<RunManifest, CliError> {
    let workers = worker_count()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Other(e.to_string()))?;
    let mut out = OutputDir::create(&spec.out_dir)?;
    let mut manifest = RunManifest::new(spec, workers);
    let start = Instant::now();
    let result = pool.install(|| dispatch(spec, &mut out, &mut manifest.checks));
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    manifest.outputs = out.files.clone();
    if let Err(e) = &result {
        manifest.status = "failed".into();
        manifest.error = Some(e.to_string());
    }
    std::fs::write(spec.out_dir.join(MANIFEST_NAME), manifest.to_json())?;
    result.map(|_| manifest)
}

fn dispatch(spec: &ScenarioSpec, out: &mut OutputDir, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let s = &spec.settings;
    match spec.scenario {
        Scenario::Dynamics => dynamics(s, out, checks),
        Scenario::FieldMap => field_map(s, out, checks),
        Scenario::PhaseSpace => phase_space(s, out),
        Scenario::Spectrum => spectrum(s, out, checks),
        Scenario::GroundState => ground_state(s, out, checks),
        Scenario::Overlap => overlap(s, out, checks),
        Scenario::CriticalCoupling => critical_coupling(s, out, checks),
        Scenario::NSweep => n_sweep(s, out),
        Scenario::Kerr => kerr(s, out, checks),
        Scenario::Causality => causality(s, out, checks),
        Scenario::ChainCheck => chain_check(s, out, checks),
    }
}

fn tls(s: &Settings, g: f64) -> Result<ModelParams, CliError> {
    let p = ModelParams::tls(s.f64("omega_x"), g, s.usize("mode_count"), s.usize("fock_cutoff"));
    p.validate()?;
    Ok(p)
}

fn g_grid(s: &Settings) -> Vec<f64> {
    uniform_grid(s.f64("g_min"), s.f64("g_max"), s.usize("g_points"))
}

fn emitter_state(s: &Settings) -> EmitterState {
    match s.str("initial") {
        "ground" => EmitterState::Ground,
        "plus" => EmitterState::Plus,
        "minus" => EmitterState::Minus,
        _ => EmitterState::Excited,
    }
}

fn evolution_config(s: &Settings, stride: usize) -> EvolutionConfig {
    EvolutionConfig {
        dt: ROUNDTRIP / s.usize("steps_per_roundtrip") as f64,
        chi_max: s.usize("chi_max"),
        svd_cut: s.f64("svd_cut"),
        t_final: s.f64("roundtrips") * ROUNDTRIP,
        stride,
        mode: TimeMode::Real,
        truncation_budget: s.f64("truncation_budget"),
    }
}

/// MPS trajectory; with `field` the star-basis correlations at every
/// measurement are kept as well.
pub struct MpsRun {
    pub series: TimeSeries,
    pub correlations: Vec<Mat<C64>>,
}

pub fn run_mps(
    params: &ModelParams,
    initial: &EmitterState,
    config: &EvolutionConfig,
    field: bool,
) -> mmrabi_core::Result<MpsRun> {
    let mapping = build_chain_mapping(params.mode_count)?;
    let gates = trotter_gates(params, &mapping, config)?;
    let mut state = init_product_state(params, initial)?;
    let mut correlations = Vec::new();
    let series = evolve(&mut state, &gates, config, &mut |_, st| {
        if field {
            correlations.push(star_correlations(&mapping, &st.correlations()?)?);
        }
        Ok(())
    })?;
    Ok(MpsRun { series, correlations })
}

/// Keep the observables of a run stopped by the truncation budget.
fn keep_partial<T>(out: &mut OutputDir, name: &str, result: mmrabi_core::Result<T>) -> Result<T, CliError> {
    match result {
        Ok(v) => Ok(v),
        Err(e) => {
            if let CoreError::TruncationBudget { partial, .. } = &e {
                out.write(&format!("partial_{name}.csv"), &partial.to_csv())?;
            }
            Err(e.into())
        }
    }
}

fn cutoff_check(params: &ModelParams) -> Result<Check, CliError> {
    let d = validate_cutoffs(params, CUTOFF_TAIL)?;
    Ok(Check::new(
        &format!("fock_cutoff_tail_g{}", params.g),
        d.passes,
        d.worst_tail,
        format!("worst coherent tail beyond d = {} (advisory limit {CUTOFF_TAIL:e})", params.fock_cutoff),
    ))
}

fn max_discarded(series: &TimeSeries) -> f64 {
    series.column("discarded_weight").map(|w| w.into_iter().fold(0.0, f64::max)).unwrap_or(0.0)
}

fn svg_enabled(s: &Settings) -> bool {
    s.bool("svg")
}

fn roundtrips(t: &[f64]) -> Vec<f64> {
    t.iter().map(|t| t / ROUNDTRIP).collect()
}

fn dynamics(s: &Settings, out: &mut OutputDir, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let grid = g_grid(s);
    let initial = emitter_state(s);
    let config = evolution_config(s, s.usize("stride"));
    config.validate()?;
    let mps = s.str("engine") == "mps";
    if !mps && !matches!(initial, EmitterState::Excited) {
        return Err(CliError::Parse("the analytic engine only covers an initially excited emitter".into()));
    }
    let params: Vec<ModelParams> = grid.iter().map(|&g| tls(s, g)).collect::<Result<_, _>>()?;
    let times: Vec<f64> = {
        let steps = config.steps();
        let mut t: Vec<f64> = (0..=steps).step_by(config.stride).map(|k| k as f64 * config.dt).collect();
        if steps % config.stride != 0 {
            t.push(steps as f64 * config.dt);
        }
        t
    };
    let analytic_rows: Vec<Vec<f64>> =
        params.iter().map(|p| times.iter().map(|&t| analytic::population(p, t)).collect()).collect();
    let rows: Vec<Vec<f64>> = if mps {
        for p in &params {
            checks.push(cutoff_check(p)?);
        }
        let runs: Vec<mmrabi_core::Result<MpsRun>> =
            params.par_iter().map(|p| run_mps(p, &initial, &config, false)).collect();
        let mut rows = Vec::new();
        for (p, run) in params.iter().zip(runs) {
            let run = keep_partial(out, &format!("g{}", p.g), run)?;
            checks.push(Check::new(
                &format!("discarded_weight_g{}", p.g),
                max_discarded(&run.series) <= config.truncation_budget,
                max_discarded(&run.series),
                "largest cumulative discarded weight",
            ));
            rows.push(run.series.column("population").expect("population column"));
        }
        rows
    } else {
        analytic_rows.clone()
    };
    let table = |rows: &[Vec<f64>]| {
        let mut csv = String::from("g,t,population\n");
        for (g, row) in grid.iter().zip(rows) {
            for (t, v) in times.iter().zip(row) {
                csv.push_str(&format!("{},{},{}\n", csv_float(*g), csv_float(*t), csv_float(*v)));
            }
        }
        csv
    };
    out.write("population.csv", &table(&rows))?;
    out.write("population_analytic.csv", &table(&analytic_rows))?;

    let cut_g = s.f64("cut_g");
    let k = (0..grid.len()).min_by(|&a, &b| (grid[a] - cut_g).abs().total_cmp(&(grid[b] - cut_g).abs())).unwrap_or(0);
    let mut csv = String::from("t,population,analytic\n");
    for ((t, v), a) in times.iter().zip(&rows[k]).zip(&analytic_rows[k]) {
        csv.push_str(&format!("{},{},{}\n", csv_float(*t), csv_float(*v), csv_float(*a)));
    }
    out.write("cut.csv", &csv)?;
    let deviation = rows[k].iter().zip(&analytic_rows[k]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.push(Check::new(
        "cut_deviation_from_closed_form",
        deviation < 0.05,
        deviation,
        format!("max |p(t) - closed form| at g = {}", grid[k]),
    ));
    if s.f64("roundtrips") >= 2.0 {
        let report = detect_revivals(&times, &rows[k], ROUNDTRIP, 0.1)?;
        out.write_json("revivals.json", &report)?;
    }
    if svg_enabled(s) {
        let rt = roundtrips(&times);
        out.write("population.svg", &svg::heatmap("Emitter population", "t ω_c / 2π", "g / ω_c", &rt, &grid, &rows, false))?;
        out.write(
            "cut.svg",
            &svg::line_plot(
                &format!("Population at g = {}", grid[k]),
                "t ω_c / 2π",
                "population",
                &[
                    Line { label: s.str("engine").into(), x: rt.clone(), y: rows[k].clone() },
                    Line { label: "closed form".into(), x: rt, y: analytic_rows[k].clone() },
                ],
            ),
        )?;
    }
    Ok(())
}

fn write_map(out: &mut OutputDir, name: &str, map: &FieldMap, svg: bool, title: &str) -> Result<(), CliError> {
    out.write(&format!("{name}.csv"), &map.to_csv())?;
    if svg {
        let doc = svg::heatmap(title, "x / L", "t ω_c / 2π", &map.x_grid, &roundtrips(&map.t_grid), &map.amplitude, true);
        out.write(&format!("{name}.svg"), &doc)?;
    }
    Ok(())
}

/// Relative L2 distance between two maps, per row.
fn row_distances(a: &FieldMap, b: &FieldMap) -> Vec<f64> {
    a.amplitude.iter().zip(&b.amplitude).map(|(x, y)| relative_l2(x, y)).collect()
}

fn field_map(s: &Settings, out: &mut OutputDir, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let params = tls(s, s.f64("g"))?;
    let x = uniform_grid(-0.5, 0.5, s.usize("x_points"));
    let config = evolution_config(s, s.usize("stride"));
    config.validate()?;
    let bound = analytic::bound_field(0.0, &params)?;
    checks.push(Check::new("bound_component_at_emitter", bound > 0.0, bound, "closed-form time-independent term at x = 0"));
    if s.str("engine") == "analytic" {
        let steps = config.steps();
        let t: Vec<f64> = (0..=steps).step_by(config.stride).map(|k| k as f64 * config.dt).collect();
        let map = analytic_field_map(&params, &x, &t)?;
        return write_map(out, "field_map_analytic", &map, svg_enabled(s), "Field intensity (closed form)");
    }
    checks.push(cutoff_check(&params)?);
    let run = keep_partial(out, "field_map", run_mps(&params, &EmitterState::Excited, &config, true))?;
    let map = field_map_from_correlations(&run.correlations, &run.series.times, &x, Source::Mps)?;
    let reference = analytic_field_map(&params, &x, &run.series.times)?;
    write_map(out, "field_map", &map, svg_enabled(s), "Field intensity (MPS)")?;
    write_map(out, "field_map_analytic", &reference, svg_enabled(s), "Field intensity (closed form)")?;
    out.write("population.csv", &run.series.to_csv())?;
    let distances = row_distances(&map, &reference);
    let k = map.t_index(PI / 2.0);
    checks.push(Check::new(
        "field_rel_l2_quarter_roundtrip",
        distances[k] < 0.1,
        distances[k],
        format!("relative L2 distance to the closed form at t = {}", map.t_grid[k]),
    ));
    let worst = distances.iter().skip(1).cloned().fold(0.0, f64::max);
    checks.push(Check::new("field_rel_l2_worst_row", worst < 0.1, worst, "largest per-time relative L2 distance (t > 0)"));
    checks.push(Check::new(
        "discarded_weight",
        max_discarded(&run.series) <= config.truncation_budget,
        max_discarded(&run.series),
        "largest cumulative discarded weight",
    ));
    Ok(())
}

fn phase_space(s: &Settings, out: &mut OutputDir) -> Result<(), CliError> {
    let multi = ModelParams::tls(s.f64("omega_x"), s.f64("g"), s.usize("mode_count"), 2);
    multi.validate()?;
    let single = multi.with_modes(1);
    let samples = s.usize("samples");
    let mut csv = String::from("model,branch,n,t,re,im\n");
    let mut lines = Vec::new();
    for (label, p, n_max) in [("single", &single, 1), ("multi", &multi, s.usize("n_max"))] {
        let points = analytic::phase_trajectories(p, n_max, samples)?;
        for q in &points {
            let branch = match q.branch {
                Branch::Plus => "plus",
                Branch::Minus => "minus",
            };
            csv.push_str(&format!("{label},{branch},{},{},{},{}\n", q.n, csv_float(q.t), csv_float(q.re), csv_float(q.im)));
        }
        if label == "multi" {
            for n in 0..n_max {
                let (x, y) = points.iter().filter(|q| q.n == n && q.branch == Branch::Plus).map(|q| (q.re, q.im)).unzip();
                lines.push(Line { label: format!("n = {n}"), x, y });
            }
        }
    }
    out.write("phase_space.csv", &csv)?;
    if svg_enabled(s) {
        lines.truncate(8);
        out.write("phase_space.svg", &svg::line_plot("Mode trajectories, |+⟩ branch", "Re", "Im", &lines))?;
    }
    Ok(())
}

fn spectrum_lines(results: &[SpectrumResult], prefix: &str) -> Vec<Line> {
    let levels = results.first().map(|r| r.gaps.len()).unwrap_or(0);
    (1..levels)
        .map(|k| Line {
            label: format!("{prefix} {k}"),
            x: results.iter().map(|r| r.g).collect(),
            y: results.iter().map(|r| r.gaps[k]).collect(),
        })
        .collect()
}

/// Largest relative difference between two gap curves at one coupling.
pub fn gap_difference(a: &SpectrumResult, b: &SpectrumResult) -> f64 {
    a.gaps
        .iter()
        .zip(&b.gaps)
        .skip(1)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-300))
        .fold(0.0, f64::max)
}

/// Spacing between the first two parity doublets.
pub fn doublet_spacing(r: &SpectrumResult) -> f64 {
    0.5 * (r.energies[2] + r.energies[3]) - 0.5 * (r.energies[0] + r.energies[1])
}

pub fn spectra(params: &ModelParams, grid: &[f64], levels: usize) -> Result<Vec<SpectrumResult>, CliError> {
    let r: Vec<mmrabi_core::Result<SpectrumResult>> = grid
        .par_iter()
        .map(|&g| ExactSystem::star(&params.with_g(g)).and_then(|sys| Ok(SpectrumResult::from_pairs(g, &sys.lowest(levels)?))))
        .collect();
    r.into_iter().map(|x| x.map_err(CliError::from)).collect()
}

fn spectrum(s: &Settings, out: &mut OutputDir, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let grid = g_grid(s);
    let levels = s.usize("levels");
    if levels < 2 {
        return Err(CliError::Parse("levels must be >= 2".into()));
    }
    let multi = tls(s, 0.0)?;
    let single = ModelParams::tls(s.f64("omega_x"), 0.0, 1, s.usize("single_fock_cutoff"));
    single.validate()?;
    let single_r = spectra(&single, &grid, levels)?;
    let multi_r = spectra(&multi, &grid, levels)?;
    out.write("spectrum_single.csv", &spectrum_csv(&single_r))?;
    out.write("spectrum_multi.csv", &spectrum_csv(&multi_r))?;
    let diffs: Vec<f64> = single_r.iter().zip(&multi_r).map(|(a, b)| gap_difference(a, b)).collect();
    let mut csv = String::from("g,max_relative_gap_difference\n");
    for (g, d) in grid.iter().zip(&diffs) {
        csv.push_str(&format!("{},{}\n", csv_float(*g), csv_float(*d)));
    }
    out.write("gap_difference.csv", &csv)?;
    let worst = diffs.iter().cloned().fold(0.0, f64::max);
    checks.push(Check::new("models_diverge", worst > 0.1, worst, "largest relative gap difference over the grid"));
    if levels >= 4 {
        if let Some(last) = single_r.last() {
            let spacing = doublet_spacing(last);
            checks.push(Check::new(
                "single_mode_doublet_spacing",
                (spacing - single.omega_c).abs() < 0.05 * single.omega_c,
                spacing,
                format!("spacing of the lowest two doublets at g = {}", last.g),
            ));
        }
    }
    if svg_enabled(s) {
        let mut lines = spectrum_lines(&single_r, "single");
        lines.extend(spectrum_lines(&multi_r, "multi"));
        out.write("spectrum.svg", &svg::line_plot("Low-energy spectrum", "g / ω_c", "E - E_0", &lines))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct GroundReport {
    energy: f64,
    population: f64,
    cloud_relative_l2: f64,
    cloud_peak_position: f64,
    max_bond: usize,
    imaginary_steps_checked: usize,
}

fn ground_state(s: &Settings, out: &mut OutputDir, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let params = tls(s, s.f64("g"))?;
    let mapping = build_chain_mapping(params.mode_count)?;
    let config = ImaginaryConfig {
        chi_max: s.usize("chi_max"),
        svd_cut: s.f64("svd_cut"),
        tolerance: s.f64("tolerance"),
        ..Default::default()
    };
    let gs = ground_state_imaginary(&params, &mapping, &config)?;
    let x = uniform_grid(-0.5, 0.5, s.usize("x_points"));
    let star = star_correlations(&mapping, &gs.correlations)?;
    let cloud = ground_cloud_extract(CloudSource::Correlations(&star), &x)?;
    let reference = analytic_cloud(&params, &x)?;
    let distance = relative_l2(&cloud.amplitude, &reference.amplitude);
    let mut csv = String::from("x,mps,analytic\n");
    for ((x, a), b) in x.iter().zip(&cloud.amplitude).zip(&reference.amplitude) {
        csv.push_str(&format!("{},{},{}\n", csv_float(*x), csv_float(*a), csv_float(*b)));
    }
    out.write("cloud.csv", &csv)?;
    let mut trace = String::from("check,energy\n");
    for (k, e) in gs.trace.iter().enumerate() {
        trace.push_str(&format!("{k},{}\n", csv_float(*e)));
    }
    out.write("energy_trace.csv", &trace)?;
    let report = GroundReport {
        energy: gs.energy,
        population: gs.population,
        cloud_relative_l2: distance,
        cloud_peak_position: cloud.peak_position(),
        max_bond: gs.state.max_bond(),
        imaginary_steps_checked: gs.trace.len(),
    };
    out.write_json("ground_state.json", &report)?;
    checks.push(Check::new("cloud_rel_l2", distance < 0.1, distance, "relative L2 distance to the closed-form bound cloud"));
    let dx = if x.len() > 1 { x[1] - x[0] } else { 1.0 };
    checks.push(Check::new(
        "cloud_peak_at_emitter",
        cloud.peak_position().abs() <= dx,
        cloud.peak_position(),
        "position of the cloud maximum",
    ));
    if svg_enabled(s) {
        let doc = svg::line_plot(
            "Bound photon cloud",
            "x / L",
            "intensity",
            &[
                Line { label: "MPS".into(), x: x.clone(), y: cloud.amplitude.clone() },
                Line { label: "closed form".into(), x: x.clone(), y: reference.amplitude.clone() },
            ],
        );
        out.write("cloud.svg", &doc)?;
    }
    Ok(())
}

fn overlap(s: &Settings, out: &mut OutputDir, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let grid = g_grid(s);
    let base = ModelParams::tls(s.f64("omega_x"), 0.0, s.usize("mode_count"), 2);
    base.validate()?;
    let t = uniform_grid(0.0, s.f64("roundtrips") * ROUNDTRIP, s.usize("t_points"));
    let rows: Vec<Vec<f64>> =
        grid.par_iter().map(|&g| t.iter().map(|&t| analytic::overlap(&base.with_g(g), t)).collect()).collect();
    let mut csv = String::from("g,t,overlap\n");
    for (g, row) in grid.iter().zip(&rows) {
        for (t, o) in t.iter().zip(row) {
            csv.push_str(&format!("{},{},{}\n", csv_float(*g), csv_float(*t), csv_float(*o)));
        }
    }
    out.write("overlap.csv", &csv)?;
    if base.mode_count >= 2 {
        let mut csv = String::from("g,closed_form,midpoint\n");
        let mut worst = 0.0f64;
        for &g in &grid {
            let so = analytic::steady_overlap(&base.with_g(g))?;
            worst = worst.max((so.closed_form - so.midpoint).abs() / so.midpoint);
            csv.push_str(&format!("{},{},{}\n", csv_float(g), csv_float(so.closed_form), csv_float(so.midpoint)));
        }
        out.write("steady_overlap.csv", &csv)?;
        checks.push(Check::new(
            "steady_overlap_closed_form",
            worst < 0.02,
            worst,
            "largest relative gap between the closed form and O(π/ω_c)",
        ));
    }
    if svg_enabled(s) {
        let rt = roundtrips(&t);
        let lines: Vec<Line> =
            grid.iter().zip(&rows).map(|(g, row)| Line { label: format!("g = {g:.2}"), x: rt.clone(), y: row.clone() }).collect();
        out.write("overlap.svg", &svg::line_plot("Branch overlap", "t ω_c / 2π", "O(t)", &lines))?;
    }
    Ok(())
}

fn critical_coupling(s: &Settings, out: &mut OutputDir, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let omega_x = s.f64("omega_x");
    let ms: Vec<usize> = (s.usize("m_min")..=s.usize("m_max")).step_by(s.usize("m_step")).collect();
    let results: Vec<_> = ms
        .par_iter()
        .map(|&m| analytic::critical_coupling(m, omega_x, 1.0))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("mode_count,closed_form,numeric,relative_disagreement\n");
    for (m, r) in ms.iter().zip(&results) {
        csv.push_str(&format!(
            "{m},{},{},{}\n",
            csv_float(r.closed_form),
            csv_float(r.numeric),
            csv_float(r.relative_disagreement())
        ));
    }
    out.write("critical_coupling.csv", &csv)?;
    let grid = g_grid(s);
    let mut csv = String::from("mode_count,g,steady_overlap,coupling_ratio\n");
    for &m in &ms {
        for &g in &grid {
            let p = ModelParams::tls(omega_x, g, m, 2);
            let o = analytic::steady_overlap(&p)?.closed_form;
            csv.push_str(&format!("{m},{},{},{}\n", csv_float(g), csv_float(o), csv_float(g / (omega_x * o))));
        }
    }
    out.write("steady_overlap.csv", &csv)?;
    let (lo, hi) = results.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(r.numeric), b.max(r.numeric)));
    checks.push(Check::new(
        "numeric_root_range",
        lo >= 0.20 && hi <= 0.35,
        hi,
        format!("numeric g_c over the mode counts lies in [{lo:.4}, {hi:.4}]"),
    ));
    let worst = results.iter().map(|r| r.relative_disagreement()).fold(0.0, f64::max);
    checks.push(Check::new("closed_form_agreement", worst < 0.05, worst, "largest relative disagreement"));
    if svg_enabled(s) {
        let x: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
        let doc = svg::line_plot(
            "Critical coupling",
            "M",
            "g_c / ω_c",
            &[
                Line { label: "numeric".into(), x: x.clone(), y: results.iter().map(|r| r.numeric).collect() },
                Line { label: "Lambert W".into(), x, y: results.iter().map(|r| r.closed_form).collect() },
            ],
        );
        out.write("critical_coupling.svg", &doc)?;
    }
    Ok(())
}

fn n_sweep(s: &Settings, out: &mut OutputDir) -> Result<(), CliError> {
    let grid = g_grid(s);
    let t = uniform_grid(0.0, s.f64("roundtrips") * ROUNDTRIP, s.usize("t_points"));
    let jobs: Vec<(usize, f64)> = s.usize_list("modes").into_iter().flat_map(|m| grid.iter().map(move |&g| (m, g))).collect();
    let rows: Vec<mmrabi_core::Result<Vec<f64>>> = jobs
        .par_iter()
        .map(|&(m, g)| {
            let p = ModelParams::tls(s.f64("omega_x"), g, m, s.usize("fock_cutoff"));
            let sys = ExactSystem::star(&p)?;
            let mut occ = vec![0; m + 1];
            occ[0] = 1;
            let psi = sys.product_state(&occ)?;
            Ok(evolve_exact(&sys, &psi, &t)?.series.column("population").expect("population column"))
        })
        .collect();
    let mut csv = String::from("mode_count,g,t,population\n");
    let mut maps: Vec<(usize, Vec<Vec<f64>>)> = Vec::new();
    for ((m, g), row) in jobs.iter().zip(rows) {
        let row = row?;
        for (t, v) in t.iter().zip(&row) {
            csv.push_str(&format!("{m},{},{},{}\n", csv_float(*g), csv_float(*t), csv_float(*v)));
        }
        match maps.last_mut() {
            Some((mm, rows)) if mm == m => rows.push(row),
            _ => maps.push((*m, vec![row])),
        }
    }
    out.write("population.csv", &csv)?;
    if svg_enabled(s) {
        let rt = roundtrips(&t);
        for (m, rows) in &maps {
            let doc = svg::heatmap(&format!("Emitter population, M = {m}"), "t ω_c / 2π", "g / ω_c", &rt, &grid, rows, false);
            out.write(&format!("population_m{m}.svg"), &doc)?;
        }
    }
    Ok(())
}

/// Edge arrival time of the front and the disturbance at its return.
#[derive(Clone, Debug, Serialize)]
pub struct KerrReport {
    pub front_arrival_right: Option<f64>,
    pub front_arrival_left: Option<f64>,
    pub plateau: f64,
    pub quiet_deviation: f64,
    pub return_deviation: f64,
}

pub fn kerr_report(map: &FieldMap, series: &TimeSeries) -> Result<KerrReport, CliError> {
    let window = (0.1 * ROUNDTRIP, 0.9 * ROUNDTRIP);
    let population = series.column("population").expect("population column");
    let d = population_disturbance(&series.times, &population, ROUNDTRIP)?;
    Ok(KerrReport {
        front_arrival_right: map.peak_time(0.5, window),
        front_arrival_left: map.peak_time(-0.5, window),
        plateau: d.plateau,
        quiet_deviation: d.quiet_deviation,
        return_deviation: d.return_deviation,
    })
}

pub fn kerr_params(s: &Settings) -> Result<ModelParams, CliError> {
    let p = ModelParams::kerr(
        s.f64("omega_x"),
        s.f64("chi"),
        s.f64("g"),
        s.usize("mode_count"),
        s.usize("fock_cutoff"),
        s.usize("emitter_cutoff"),
    );
    p.validate()?;
    Ok(p)
}

fn kerr(s: &Settings, out: &mut OutputDir, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let params = kerr_params(s)?;
    let config = evolution_config(s, s.usize("stride"));
    config.validate()?;
    let initial = EmitterState::Fock(s.usize("initial_fock"));
    let run = keep_partial(out, "kerr", run_mps(&params, &initial, &config, true))?;
    let x = uniform_grid(-0.5, 0.5, s.usize("x_points"));
    let map = field_map_from_correlations(&run.correlations, &run.series.times, &x, Source::Mps)?;
    write_map(out, "field_map", &map, svg_enabled(s), "Field intensity, Kerr emitter")?;
    out.write("population.csv", &run.series.to_csv())?;
    checks.push(Check::new(
        "discarded_weight",
        max_discarded(&run.series) <= config.truncation_budget,
        max_discarded(&run.series),
        "largest cumulative discarded weight",
    ));
    if s.f64("roundtrips") >= 1.1 {
        let report = kerr_report(&map, &run.series)?;
        for (name, arrival) in [("front_arrival_right", report.front_arrival_right), ("front_arrival_left", report.front_arrival_left)] {
            let t = arrival.unwrap_or(f64::NAN);
            checks.push(Check::new(name, (t - PI).abs() <= 0.1 * PI, t, "time of peak intensity at the cavity edge"));
        }
        checks.push(Check::new(
            "population_disturbance",
            report.return_deviation > 2.0 * report.quiet_deviation,
            report.return_deviation,
            format!("deviation near 2π/ω_c against {:.3e} mid-roundtrip", report.quiet_deviation),
        ));
        out.write_json("kerr.json", &report)?;
    }
    if svg_enabled(s) {
        let doc = svg::line_plot(
            "Kerr emitter occupation",
            "t ω_c / 2π",
            "⟨b†b⟩",
            &[Line { label: "MPS".into(), x: roundtrips(&run.series.times), y: run.series.column("population").unwrap() }],
        );
        out.write("population.svg", &doc)?;
    }
    Ok(())
}

fn causality(s: &Settings, out: &mut OutputDir, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let params = ModelParams::tls(s.f64("omega_x"), s.f64("g"), 1, 2);
    params.validate()?;
    let w = s.f64_list("fit_window");
    let config = CausalityConfig {
        x_points: s.usize("x_points"),
        t_points: s.usize("t_points"),
        t_max: PI,
        threshold: s.f64("threshold"),
        fit_window: (w[0] * PI, w[1] * PI),
    };
    let modes = s.usize_list("modes");
    let sweep = causality_sweep(&params, &modes, &config)?;
    let mut csv = String::from("mode_count,front_speed_over_c,leakage,total_signal,leakage_fraction\n");
    let mut fronts = String::from("mode_count,t,front_position\n");
    for r in sweep.reports.iter().chain(std::iter::once(&sweep.single_mode)) {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.mode_count,
            csv_float(r.front_speed / r.light_speed),
            csv_float(r.leakage),
            csv_float(r.total_signal),
            csv_float(r.leakage_fraction)
        ));
        for (t, x) in r.front_times.iter().zip(&r.front_positions) {
            fronts.push_str(&format!("{},{},{}\n", r.mode_count, csv_float(*t), csv_float(*x)));
        }
    }
    out.write("causality.csv", &csv)?;
    out.write("fronts.csv", &fronts)?;
    if let Some(last) = sweep.reports.last() {
        let ratio = last.front_speed / last.light_speed;
        checks.push(Check::new(
            "front_speed",
            (ratio - 1.0).abs() < 0.1,
            ratio,
            format!("fitted front speed over c at M = {}", last.mode_count),
        ));
    }
    checks.push(Check::new(
        "leakage_strictly_decreasing",
        sweep.strictly_decreasing,
        sweep.reports.last().map(|r| r.leakage_fraction).unwrap_or(f64::NAN),
        "leakage fraction along the mode-count sweep",
    ));
    checks.push(Check::new(
        "single_mode_leakage",
        sweep.single_mode.leakage_fraction > 0.3,
        sweep.single_mode.leakage_fraction,
        "single-mode out-of-cone fraction of the signal",
    ));
    if svg_enabled(s) {
        let lines: Vec<Line> = sweep
            .reports
            .iter()
            .chain(std::iter::once(&sweep.single_mode))
            .map(|r| Line {
                label: format!("M = {}", r.mode_count),
                x: r.front_times.iter().map(|t| t / PI).collect(),
                y: r.front_positions.clone(),
            })
            .chain(std::iter::once(Line { label: "light cone".into(), x: vec![0.0, 1.0], y: vec![0.0, 0.5] }))
            .collect();
        out.write("fronts.svg", &svg::line_plot("Signal front", "t ω_c / π", "|x| / L", &lines))?;
    }
    Ok(())
}

fn chain_check(s: &Settings, out: &mut OutputDir, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let mapping = build_chain_mapping(s.usize("mode_count"))?;
    let report = verify_against_closed_form(&mapping)?;
    out.write("chain.csv", &mapping.to_csv())?;
    out.write_json("chain_check.json", &report)?;
    let tol = s.f64("tolerance");
    checks.push(Check::new("orthogonality", report.orthogonality_error < 1e-10, report.orthogonality_error, "max |U Uᵀ - I|"));
    checks.push(Check::new(
        "spectrum",
        report.max_spectrum_deviation < tol,
        report.max_spectrum_deviation,
        "max deviation of the chain spectrum from 1..M",
    ));
    checks.push(Check::new(
        "closed_form_frequencies",
        report.max_omega_deviation < tol,
        report.max_omega_deviation,
        "max |ω_i - (1 + A_i + C_i)|",
    ));
    checks.push(Check::new(
        "closed_form_hoppings",
        report.max_hopping_deviation < tol,
        report.max_hopping_deviation,
        "max |t_i² - A_i C_{i+1}|",
    ));
    Ok(())
}
