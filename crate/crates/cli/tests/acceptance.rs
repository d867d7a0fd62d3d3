//! Acceptance criteria. Every test writes one `criterion N: PASS|FAIL` line
//! to stderr, also when the harness captures output.
//! The tests hold a shared lock so that the runtime limits are measured on
//! an otherwise idle process.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use mmrabi::scenarios::{doublet_spacing, gap_difference, kerr_report, run_mps, spectra};
use mmrabi::{parse_args, run, Command};
use mmrabi_core::analytic::{self, critical_coupling, steady_overlap};
use mmrabi_core::chain::{build_chain_mapping, chain_terms, star_correlations, verify_against_closed_form};
use mmrabi_core::exact::{evolve_exact, ground_state, ExactSystem};
use mmrabi_core::mps::{ground_state_imaginary, EmitterState, EvolutionConfig, ImaginaryConfig};
use mmrabi_core::observables::{
    analytic_cloud, analytic_field_map, causality_sweep, field_map_from_correlations, ground_cloud_extract,
    relative_l2, uniform_grid, CausalityConfig, CloudSource, FieldMap,
};
use mmrabi_core::series::Source;
use mmrabi_core::ModelParams;

const ROUNDTRIP: f64 = 2.0 * PI;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

struct Verdict {
    criterion: u32,
    clauses: Vec<(bool, String)>,
    start: Instant,
    limit: Option<Duration>,
}

impl Verdict {
    fn new(criterion: u32, limit_s: Option<u64>) -> Self {
        Self { criterion, clauses: Vec::new(), start: Instant::now(), limit: limit_s.map(Duration::from_secs) }
    }

    fn check(&mut self, passed: bool, text: impl Into<String>) {
        self.clauses.push((passed, text.into()));
    }

    fn finish(self) {
        let criterion = self.criterion;
        assert!(self.report(), "criterion {criterion} failed");
    }

    /// Prints the verdict line and returns whether every clause passed.
    fn report(mut self) -> bool {
        let elapsed = self.start.elapsed();
        match self.limit {
            Some(limit) => {
                self.check(elapsed < limit, format!("runtime {:.1} s (< {} s)", elapsed.as_secs_f64(), limit.as_secs()))
            }
            None => self.check(true, format!("runtime {:.1} s", elapsed.as_secs_f64())),
        }
        let ok = self.clauses.iter().all(|(p, _)| *p);
        let detail: Vec<String> =
            self.clauses.iter().map(|(p, t)| format!("{}{t}", if *p { "" } else { "[failed] " })).collect();
        // written to the handle directly so the line survives output capture
        let line = format!("criterion {}: {} | {}\n", self.criterion, if ok { "PASS" } else { "FAIL" }, detail.join("; "));
        let _ = std::io::stderr().write_all(line.as_bytes());
        ok
    }
}

#[test]
fn criterion_01_chain_mapping() {
    let _lock = serial();
    let mut v = Verdict::new(1, Some(5));
    for m in [1, 4, 10, 50, 200] {
        let r = verify_against_closed_form(&build_chain_mapping(m).unwrap()).unwrap();
        v.check(r.orthogonality_error < 1e-10, format!("M={m} |UUᵀ-I| {:.1e}", r.orthogonality_error));
        v.check(r.max_spectrum_deviation < 1e-8, format!("M={m} spectrum {:.1e}", r.max_spectrum_deviation));
        v.check(r.max_omega_deviation < 1e-8, format!("M={m} ω_i {:.1e}", r.max_omega_deviation));
    }
    v.finish();
}

#[test]
fn criterion_02_analytic_self_consistency() {
    let _lock = serial();
    let mut v = Verdict::new(2, Some(1));
    let mut worst = 0.0f64;
    let mut exact_revivals = true;
    for (g, m) in [(0.1, 1), (0.6, 20), (0.6, 50), (1.0, 100)] {
        let p = ModelParams::tls(1.0, g, m, 2);
        for t in uniform_grid(0.0, 3.0 * ROUNDTRIP, 601) {
            let p0 = analytic::revival_probability(&p, t);
            worst = worst.max((p0 * p0 - analytic::overlap(&p, t)).abs());
        }
        exact_revivals &= (0..4).all(|k| analytic::overlap(&p, k as f64 * ROUNDTRIP) == 1.0);
    }
    v.check(exact_revivals, "O(2πk) == 1 for k = 0..3");
    v.check(worst < 1e-14, format!("max |P_0² - O| {worst:.1e}"));
    let so = steady_overlap(&ModelParams::tls(1.0, 0.6, 50, 2)).unwrap();
    let rel = (so.closed_form - so.midpoint).abs() / so.midpoint;
    v.check(rel < 0.02, format!("Ō {:.5} vs O(π) {:.5}, rel {rel:.4}", so.closed_form, so.midpoint));
    v.finish();
}

#[test]
fn criterion_03_critical_coupling() {
    let _lock = serial();
    let mut v = Verdict::new(3, Some(1));
    let results: Vec<_> = (10..=100).map(|m| critical_coupling(m, 1.0, 1.0).unwrap()).collect();
    let lo = results.iter().map(|r| r.numeric).fold(f64::INFINITY, f64::min);
    let hi = results.iter().map(|r| r.numeric).fold(0.0, f64::max);
    let worst = results.iter().map(|r| r.relative_disagreement()).fold(0.0, f64::max);
    v.check(lo >= 0.20 && hi <= 0.35, format!("g_c ∈ [{lo:.4}, {hi:.4}] for M = 10..100"));
    v.check(worst < 0.05, format!("Lambert W disagreement {worst:.1e}"));
    v.finish();
}

#[test]
fn criterion_04_mps_against_exact() {
    let _lock = serial();
    let mut v = Verdict::new(4, Some(120));
    let params = ModelParams::tls(1.0, 0.3, 3, 5);
    let config = EvolutionConfig { t_final: ROUNDTRIP, stride: 10, ..Default::default() };
    let mps = run_mps(&params, &EmitterState::Excited, &config, false).unwrap().series;
    let mapping = build_chain_mapping(3).unwrap();
    let exact = ExactSystem::new(&chain_terms(&params, &mapping).unwrap(), 1 << 12).unwrap();
    let psi0 = exact.product_state(&[1, 0, 0, 0]).unwrap();
    let reference = evolve_exact(&exact, &psi0, &mps.times).unwrap().series;
    let mut worst = 0.0f64;
    for label in ["population", "n_0", "n_1", "n_2"] {
        let a = mps.column(label).unwrap();
        let b = reference.column(label).unwrap();
        worst = worst.max(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    let end = mps.times.last().copied().unwrap_or(0.0);
    v.check((end - ROUNDTRIP).abs() < 1e-9, format!("{} samples up to t = {end:.6}", mps.times.len()));
    v.check(worst < 1e-3, format!("max deviation of population and ⟨b_i†b_i⟩ {worst:.2e}"));
    v.finish();
}

/// Whether a map row has a bound component at x = 0 and its maxima away from
/// the emitter at `|x| = ct`.
fn morphology(map: &FieldMap, k: usize) -> (f64, f64, f64) {
    let row = &map.amplitude[k];
    let peak = row.iter().cloned().fold(0.0, f64::max);
    let centre = row[map.x_index(0.0)] / peak;
    let front = |sign: f64| {
        map.x_grid
            .iter()
            .zip(row)
            .filter(|(x, _)| sign * **x >= 0.1)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(x, _)| x.abs())
            .unwrap_or(f64::NAN)
    };
    (centre, front(-1.0), front(1.0))
}

#[test]
fn criterion_05_06_revival_and_field_map() {
    let _lock = serial();
    let mut v5 = Verdict::new(5, Some(1800));
    let params = ModelParams::tls(1.0, 0.6, 20, 10);
    let steps_per_roundtrip = 1000;
    let config = EvolutionConfig {
        dt: ROUNDTRIP / steps_per_roundtrip as f64,
        chi_max: 64,
        svd_cut: 1e-6,
        t_final: 1.1 * ROUNDTRIP,
        stride: 10,
        ..Default::default()
    };
    let stride_time = config.stride as f64 * config.dt;
    let run = run_mps(&params, &EmitterState::Excited, &config, true).unwrap();
    let t = &run.series.times;
    let pop = run.series.column("population").unwrap();
    let analytic: Vec<f64> = t.iter().map(|&t| analytic::population(&params, t)).collect();
    let plateau = t
        .iter()
        .zip(&pop)
        .filter(|(t, _)| (0.2 * ROUNDTRIP..=0.8 * ROUNDTRIP).contains(*t))
        .map(|(_, p)| (p - 0.5).abs())
        .fold(0.0, f64::max);
    v5.check(plateau <= 0.05, format!("plateau |p - ½| ≤ {plateau:.4} over [0.2, 0.8] roundtrips"));
    let (t_peak, height) = t
        .iter()
        .zip(&pop)
        .filter(|(t, _)| (0.9 * ROUNDTRIP..=1.1 * ROUNDTRIP).contains(*t))
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(t, p)| (*t, *p))
        .unwrap();
    v5.check(height > 0.9, format!("revival height {height:.4}"));
    v5.check(
        (t_peak - ROUNDTRIP).abs() <= stride_time + 1e-12,
        format!("revival at t = {:.4} roundtrips (stride {:.4})", t_peak / ROUNDTRIP, stride_time / ROUNDTRIP),
    );
    let pointwise = pop.iter().zip(&analytic).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    v5.check(pointwise < 0.05, format!("max |p - ½(1+O)| {pointwise:.4}"));
    let elapsed = v5.start.elapsed();
    let passed5 = v5.report();

    let mut v6 = Verdict::new(6, Some(1800));
    v6.start -= elapsed;
    let x = uniform_grid(-0.5, 0.5, 401);
    let mps_map = field_map_from_correlations(&run.correlations, t, &x, Source::Mps).unwrap();
    let k = mps_map.t_index(PI / 2.0);
    let reference = analytic_field_map(&params, &x, &[mps_map.t_grid[k]]).unwrap();
    let distance = relative_l2(&mps_map.amplitude[k], &reference.amplitude[0]);
    v6.check(distance < 0.1, format!("relative L2 {distance:.4} at t = {:.4}", mps_map.t_grid[k]));
    let ct = mps_map.t_grid[k] / ROUNDTRIP;
    for (name, map, row) in [("MPS", &mps_map, k), ("closed form", &reference, 0)] {
        let (centre, left, right) = morphology(map, row);
        v6.check(centre > 0.05, format!("{name} bound component at x=0 is {centre:.3} of the row maximum"));
        v6.check(
            (left - ct).abs() < 0.05 && (right - ct).abs() < 0.05,
            format!("{name} fronts at |x| = {left:.4}, {right:.4} (ct = {ct:.4})"),
        );
    }
    let passed6 = v6.report();
    assert!(passed5 && passed6, "criterion 5 passed: {passed5}, criterion 6 passed: {passed6}");
}

#[test]
fn criterion_07_ground_state() {
    let _lock = serial();
    let mut v = Verdict::new(7, Some(900));
    let params = ModelParams::tls(1.0, 0.6, 20, 10);
    let mapping = build_chain_mapping(20).unwrap();
    let gs = ground_state_imaginary(&params, &mapping, &ImaginaryConfig::default()).unwrap();
    v.check((gs.population - 0.5).abs() <= 0.05, format!("⟨σ†σ⟩ = {:.4} (target 0.5 ± 0.05)", gs.population));
    let x = uniform_grid(-0.5, 0.5, 401);
    let star = star_correlations(&mapping, &gs.correlations).unwrap();
    let cloud = ground_cloud_extract(CloudSource::Correlations(&star), &x).unwrap();
    let reference = analytic_cloud(&params, &x).unwrap();
    let distance = relative_l2(&cloud.amplitude, &reference.amplitude);
    v.check(distance < 0.1, format!("bound cloud relative L2 {distance:.4}"));

    let small = ModelParams::tls(1.0, 0.3, 3, 5);
    let small_mapping = build_chain_mapping(3).unwrap();
    let e_mps = ground_state_imaginary(&small, &small_mapping, &ImaginaryConfig::default()).unwrap().energy;
    let exact = ExactSystem::new(&chain_terms(&small, &small_mapping).unwrap(), 1 << 12).unwrap();
    let (e_exact, _) = ground_state(&exact).unwrap();
    v.check((e_mps - e_exact).abs() < 1e-6, format!("M=3 energy {e_mps:.10} vs exact {e_exact:.10}"));
    v.finish();
}

#[test]
fn criterion_08_spectrum_divergence() {
    let _lock = serial();
    let mut v = Verdict::new(8, Some(600));
    let multi = ModelParams::tls(1.0, 0.0, 4, 6);
    let single = ModelParams::tls(1.0, 0.0, 1, 60);
    let mut grid = vec![0.02];
    grid.extend(uniform_grid(0.15, 1.95, 13));
    grid.push(3.0);
    let s = spectra(&single, &grid, 5).unwrap();
    let m = spectra(&multi, &grid, 5).unwrap();
    let diffs: Vec<f64> = s.iter().zip(&m).map(|(a, b)| gap_difference(a, b)).collect();
    v.check(diffs[0] < 0.1, format!("gap difference {:.4} at g = 0.02", diffs[0]));
    let (g_max, d_max) = grid[1..grid.len() - 1]
        .iter()
        .zip(&diffs[1..diffs.len() - 1])
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(g, d)| (*g, *d))
        .unwrap();
    v.check(d_max > 0.1, format!("largest gap difference {d_max:.4} at g = {g_max}"));
    let spacing = doublet_spacing(s.last().unwrap());
    v.check((spacing - 1.0).abs() < 0.05, format!("single-mode doublet spacing {spacing:.5} at g = 3"));
    v.finish();
}

#[test]
fn criterion_09_causality() {
    let _lock = serial();
    let mut v = Verdict::new(9, Some(120));
    let params = ModelParams::tls(1.0, 0.6, 1, 2);
    let config = CausalityConfig {
        x_points: 401,
        t_points: 301,
        t_max: PI,
        threshold: 0.01,
        fit_window: (0.2 * PI, 0.9 * PI),
    };
    let sweep = causality_sweep(&params, &[10, 30, 100], &config).unwrap();
    let last = sweep.reports.last().unwrap();
    let ratio = last.front_speed / last.light_speed;
    v.check((ratio - 1.0).abs() < 0.1, format!("front speed {ratio:.4} c at M = 100"));
    let fractions: Vec<String> = sweep.reports.iter().map(|r| format!("{:.4}", r.leakage_fraction)).collect();
    v.check(sweep.strictly_decreasing, format!("leakage fractions {} for M = 10, 30, 100", fractions.join(", ")));
    let single = sweep.single_mode.leakage_fraction;
    v.check(single > 0.3, format!("single-mode leakage fraction {single:.4}"));
    v.finish();
}

#[test]
fn criterion_10_kerr() {
    let _lock = serial();
    let mut v = Verdict::new(10, Some(1800));
    let args = ["kerr", "--svg=false", "--out=unused"];
    let spec = match parse_args(&args).unwrap() {
        Command::Run(spec) => spec,
        other => panic!("{other:?}"),
    };
    let s = &spec.settings;
    for (key, value) in [("chi", 10.0), ("g", 0.6)] {
        v.check(s.f64(key) == value, format!("{key} = {}", s.f64(key)));
    }
    for (key, value) in [("mode_count", 10), ("emitter_cutoff", 4)] {
        v.check(s.usize(key) == value, format!("{key} = {}", s.usize(key)));
    }
    let params = mmrabi::scenarios::kerr_params(s).unwrap();
    let config = EvolutionConfig {
        dt: ROUNDTRIP / s.usize("steps_per_roundtrip") as f64,
        chi_max: s.usize("chi_max"),
        svd_cut: s.f64("svd_cut"),
        t_final: s.f64("roundtrips") * ROUNDTRIP,
        stride: s.usize("stride"),
        truncation_budget: s.f64("truncation_budget"),
        ..Default::default()
    };
    let run = run_mps(&params, &EmitterState::Fock(s.usize("initial_fock")), &config, true).unwrap();
    let discarded = run.series.column("discarded_weight").unwrap().into_iter().fold(0.0, f64::max);
    v.check(discarded <= config.truncation_budget, format!("discarded weight {discarded:.1e}"));
    let x = uniform_grid(-0.5, 0.5, s.usize("x_points"));
    let map = field_map_from_correlations(&run.correlations, &run.series.times, &x, Source::Mps).unwrap();
    let report = kerr_report(&map, &run.series).unwrap();
    for (side, arrival) in [("x = +L/2", report.front_arrival_right), ("x = -L/2", report.front_arrival_left)] {
        let t = arrival.unwrap_or(f64::NAN);
        v.check((t - PI).abs() <= 0.1 * PI, format!("front arrival at {side}: t = {:.4} π", t / PI));
    }
    v.check(
        report.return_deviation > 2.0 * report.quiet_deviation,
        format!(
            "population deviation near 2π {:.4} against {:.4} mid-roundtrip",
            report.return_deviation, report.quiet_deviation
        ),
    );
    v.finish();
}

fn csv_digests(dir: &Path) -> Vec<(String, String)> {
    let manifest = mmrabi::RunManifest::load(dir).unwrap();
    manifest.outputs.into_iter().filter(|o| o.path.ends_with(".csv")).map(|o| (o.path, o.sha256)).collect()
}

#[test]
fn criterion_11_determinism() {
    let _lock = serial();
    let mut v = Verdict::new(11, None);
    let scenarios: [&[&str]; 5] = [
        &["chain-check", "--mode-count=200"],
        &["overlap", "--mode-count=50", "--svg=false"],
        &["critical-coupling", "--svg=false"],
        &["spectrum", "--g-points=7", "--svg=false"],
        &["causality", "--svg=false"],
    ];
    for args in scenarios {
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        let mut digests = Vec::new();
        for d in &dirs {
            let out = format!("--out={}", d.path().display());
            let mut full: Vec<&str> = args.to_vec();
            full.push(&out);
            let spec = match parse_args(&full).unwrap() {
                Command::Run(spec) => spec,
                other => panic!("{other:?}"),
            };
            run(&spec).unwrap();
            digests.push(csv_digests(d.path()));
            for (name, _) in digests.last().unwrap() {
                let bytes = std::fs::read(d.path().join(name)).unwrap();
                assert!(!bytes.is_empty());
            }
        }
        let same = !digests[0].is_empty() && digests[0] == digests[1];
        v.check(same, format!("{}: {} CSV files byte-identical", args[0], digests[0].len()));
    }
    v.finish();
}
