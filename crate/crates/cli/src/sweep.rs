//! Resumable sweep execution. Each `(L, p)` task writes its own per-circuit
//! table under `circuits/`; a task counts as done only when the manifest
//! marks it complete and its files exist. The aggregate tables under
//! `stats/` are always rebuilt from the task files, so a resumed run yields
//! byte-identical outputs.

use std::path::{Path, PathBuf};

use bernoulli_core::classical::InitialBits;
use bernoulli_core::observables::{ensemble_stats, CircuitStats, EnsembleStats, EstimatorMode};
use bernoulli_core::runner::{run_point, statmech1_time_series, InitialState, SeriesPoint};
use bernoulli_core::statmech2::{estimate_collision_probability, DEFAULT_REL_TOL};
use bernoulli_core::Backend;

use crate::error::{input_err, io_err, CliError, Result};
use crate::manifest::RunManifest;
use crate::plot::{Plot, Series};
use crate::spec::{SweepSpec, Task};
use crate::table::{fmt_f64, write_table, Table, TableKind};

pub const CIRCUIT_COLUMNS: [&str; 11] = [
    "circuit_index",
    "backend",
    "mode",
    "L",
    "p",
    "t",
    "n_shots",
    "mz_mean",
    "mz_second",
    "quantum_var",
    "quantum_var_noise",
];

pub const ENSEMBLE_COLUMNS: [&str; 15] = [
    "backend",
    "mode",
    "L",
    "p",
    "t",
    "mz_bar",
    "mz_bar_se",
    "var_q",
    "var_q_se",
    "var_q_debiased",
    "var_circuit",
    "mean_quantum_var",
    "zero_fraction",
    "n_circuits",
    "n_shots",
];

pub const SERIES_COLUMNS: [&str; 9] = [
    "L",
    "p",
    "t",
    "mz_bar",
    "mz_bar_se",
    "delta_mz_bar",
    "delta_mz_se",
    "var_q",
    "var_q_se",
];

pub const COLLISION_COLUMNS: [&str; 8] = ["L", "p", "t", "cp_mean", "cp_stderr", "n_circuits", "n_words", "converged"];

/// Worker count from `BERNOULLI_WORKERS`, if set to a positive integer.
pub const WORKERS_ENV: &str = "BERNOULLI_WORKERS";

pub fn workers_from_env() -> Result<Option<usize>> {
    parse_workers(std::env::var(WORKERS_ENV).ok().as_deref())
}

fn parse_workers(value: Option<&str>) -> Result<Option<usize>> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => input_err(format!("{WORKERS_ENV} must be a positive integer, got '{v}'")),
        },
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub run_dir: PathBuf,
    /// Tasks computed by this invocation.
    pub computed: Vec<String>,
    /// Tasks whose results were already on disk.
    pub reused: Vec<String>,
}

fn circuits_path(run_dir: &Path, task: &Task) -> PathBuf {
    run_dir.join("circuits").join(format!("{}.csv", task.id))
}

fn series_path(run_dir: &Path, task: &Task) -> PathBuf {
    run_dir.join("circuits").join(format!("{}.series.csv", task.id))
}

fn task_files(spec: &SweepSpec, run_dir: &Path, task: &Task) -> Vec<PathBuf> {
    let mut v = vec![circuits_path(run_dir, task)];
    if spec.probes.time_series {
        v.push(series_path(run_dir, task));
    }
    v
}

fn classical_initial(initial: &InitialState) -> InitialBits {
    match initial {
        InitialState::Fixed(b) => InitialBits::Fixed(b.clone()),
        InitialState::Default | InitialState::Uniform => InitialBits::Uniform,
    }
}

fn circuit_row(c: &CircuitStats, l: usize, p: f64, t: usize) -> Vec<String> {
    vec![
        c.circuit_index.to_string(),
        c.backend.name().to_string(),
        mode_name(c.mode).to_string(),
        l.to_string(),
        fmt_f64(p),
        t.to_string(),
        c.n_shots.to_string(),
        fmt_f64(c.mz_mean),
        fmt_f64(c.mz_second),
        fmt_f64(c.quantum_var),
        fmt_f64(c.quantum_var_noise),
    ]
}

pub fn mode_name(m: EstimatorMode) -> &'static str {
    match m {
        EstimatorMode::Expectation => "expectation",
        EstimatorMode::Bitstring => "bitstring",
    }
}

fn parse_mode(s: &str) -> Result<EstimatorMode> {
    match s {
        "expectation" => Ok(EstimatorMode::Expectation),
        "bitstring" => Ok(EstimatorMode::Bitstring),
        _ => input_err(format!("unknown estimator mode '{s}'")),
    }
}

/// Per-circuit statistics and their `(L, p, t)` from a circuits table.
pub fn read_circuits(path: &Path) -> Result<(Vec<CircuitStats>, usize, f64, usize)> {
    let t = Table::read(path)?;
    t.expect_kind(TableKind::Circuits)?;
    let idx: Vec<u64> = t.column("circuit_index")?;
    let backends: Vec<Backend> = t
        .column_str("backend")?
        .into_iter()
        .map(|s| s.parse().map_err(CliError::Core))
        .collect::<Result<_>>()?;
    let modes: Vec<EstimatorMode> = t.column_str("mode")?.into_iter().map(parse_mode).collect::<Result<_>>()?;
    let ls: Vec<usize> = t.column("L")?;
    let ps: Vec<f64> = t.column("p")?;
    let ts: Vec<usize> = t.column("t")?;
    let n_shots: Vec<u64> = t.column("n_shots")?;
    let mz: Vec<f64> = t.column("mz_mean")?;
    let second: Vec<f64> = t.column("mz_second")?;
    let qv: Vec<f64> = t.column("quantum_var")?;
    let noise: Vec<f64> = t.column("quantum_var_noise")?;
    if idx.is_empty() {
        return input_err(format!("{}: no circuits", path.display()));
    }
    if ls.iter().any(|&l| l != ls[0]) || ps.iter().any(|&p| p != ps[0]) || ts.iter().any(|&x| x != ts[0]) {
        return input_err(format!("{}: rows from more than one (L, p, t)", path.display()));
    }
    let stats = (0..idx.len())
        .map(|i| CircuitStats {
            circuit_index: idx[i],
            n_shots: n_shots[i],
            mz_mean: mz[i],
            mz_second: second[i],
            quantum_var: qv[i],
            quantum_var_noise: noise[i],
            backend: backends[i],
            mode: modes[i],
        })
        .collect();
    Ok((stats, ls[0], ps[0], ts[0]))
}

fn ensemble_row(e: &EnsembleStats) -> Vec<String> {
    vec![
        e.backend.name().to_string(),
        mode_name(e.mode).to_string(),
        e.l.to_string(),
        fmt_f64(e.p),
        e.t.to_string(),
        fmt_f64(e.mz_bar),
        fmt_f64(e.mz_bar_se),
        fmt_f64(e.var_q),
        fmt_f64(e.var_q_se),
        fmt_f64(e.var_q_debiased),
        fmt_f64(e.var_circuit),
        fmt_f64(e.mean_quantum_var),
        fmt_f64(e.zero_fraction),
        e.n_circuits.to_string(),
        e.n_shots.to_string(),
    ]
}

fn series_row(l: usize, p: f64, s: &SeriesPoint) -> Vec<String> {
    vec![
        l.to_string(),
        fmt_f64(p),
        s.t.to_string(),
        fmt_f64(s.mz_bar),
        fmt_f64(s.mz_bar_se),
        fmt_f64(s.delta_mz_bar),
        fmt_f64(s.delta_mz_se),
        fmt_f64(s.var_q),
        fmt_f64(s.var_q_se),
    ]
}

/// Computes one task and writes its files.
fn run_task(spec: &SweepSpec, run_dir: &Path, task: &Task, hash: &str) -> Result<()> {
    let params = spec.circuit_params(task);
    let t = params.t_max;
    if spec.backend == Backend::Statmech2 {
        let e = estimate_collision_probability(&params, spec.n_circuits, spec.words(), DEFAULT_REL_TOL)?;
        let row = vec![
            task.l.to_string(),
            fmt_f64(task.p),
            t.to_string(),
            fmt_f64(e.mean),
            fmt_f64(e.stderr),
            e.n_circuits.to_string(),
            e.n_words.to_string(),
            e.converged.to_string(),
        ];
        return write_table(&circuits_path(run_dir, task), TableKind::Collision, hash, &COLLISION_COLUMNS, &[row]);
    }
    let result = run_point(&spec.point_config(task))?;
    let rows: Vec<Vec<String>> = result.circuits.iter().map(|c| circuit_row(c, task.l, task.p, t)).collect();
    write_table(&circuits_path(run_dir, task), TableKind::Circuits, hash, &CIRCUIT_COLUMNS, &rows)?;
    if spec.probes.time_series {
        let series = statmech1_time_series(&params, spec.n_circuits, &classical_initial(&spec.initial), &spec.noise)?;
        let rows: Vec<Vec<String>> = series.iter().map(|s| series_row(task.l, task.p, s)).collect();
        write_table(&series_path(run_dir, task), TableKind::Series, hash, &SERIES_COLUMNS, &rows)?;
    }
    Ok(())
}

fn build_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| CliError::Input(format!("cannot start worker pool: {e}")))
}

/// Runs (or resumes) a sweep and rebuilds its aggregate tables and plots.
pub fn cmd_sweep(spec: &SweepSpec, workers: Option<usize>) -> Result<SweepOutcome> {
    spec.validate()?;
    let hash = spec.hash()?;
    let run_dir = spec.run_dir()?;
    for sub in ["circuits", "stats", "plots"] {
        let d = run_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(io_err(&d))?;
    }
    let mut manifest = RunManifest::load_or_create(&run_dir, spec)?;
    manifest.save(&run_dir)?;
    let pool = build_pool(workers)?;
    let (mut computed, mut reused) = (Vec::new(), Vec::new());
    for task in spec.tasks() {
        let present = task_files(spec, &run_dir, &task).iter().all(|p| p.exists());
        if manifest.is_complete(&task.id) && present {
            reused.push(task.id.clone());
            continue;
        }
        manifest.mark_incomplete(&task.id);
        pool.install(|| run_task(spec, &run_dir, &task, &hash))?;
        // tasks run one at a time (circuits inside a task run in parallel),
        // so the manifest has a single writer
        manifest.mark_complete(&task.id);
        manifest.save(&run_dir)?;
        computed.push(task.id.clone());
    }
    aggregate(spec, &run_dir, &hash)?;
    Ok(SweepOutcome {
        run_dir,
        computed,
        reused,
    })
}

fn size_series<T>(
    spec: &SweepSpec,
    items: &[(usize, T)],
    point: impl Fn(&T) -> (f64, f64, f64),
) -> Vec<Series> {
    spec.sizes
        .iter()
        .map(|&l| {
            let (pts, errs): (Vec<(f64, f64)>, Vec<f64>) = items
                .iter()
                .filter(|(li, _)| *li == l)
                .map(|(_, it)| {
                    let (x, y, e) = point(it);
                    ((x, y), e)
                })
                .unzip();
            Series::points(format!("L={l}"), pts, Some(errs))
        })
        .collect()
}

fn aggregate(spec: &SweepSpec, run_dir: &Path, hash: &str) -> Result<()> {
    let stats = run_dir.join("stats");
    let plots = run_dir.join("plots");
    let tasks = spec.tasks();
    if spec.backend == Backend::Statmech2 {
        let mut rows = Vec::new();
        let mut pts = Vec::new();
        for task in &tasks {
            let t = Table::read(&circuits_path(run_dir, task))?;
            t.expect_kind(TableKind::Collision)?;
            let mean: Vec<f64> = t.column("cp_mean")?;
            let se: Vec<f64> = t.column("cp_stderr")?;
            pts.push((task.l, (task.p, mean[0], se[0])));
            rows.extend(t.rows.iter().cloned());
        }
        write_table(&stats.join("collision.csv"), TableKind::Collision, hash, &COLLISION_COLUMNS, &rows)?;
        let mut plot = Plot::new("Collision probability", "p", "Σ_x p_x²");
        for s in size_series(spec, &pts, |&v| v) {
            plot = plot.with(s);
        }
        return plot.write(&plots.join("collision.svg"));
    }
    let mut ensembles = Vec::new();
    for task in &tasks {
        let (circuits, l, p, t) = read_circuits(&circuits_path(run_dir, task))?;
        ensembles.push((task.l, ensemble_stats(&circuits, l, p, t)?));
    }
    let rows: Vec<Vec<String>> = ensembles.iter().map(|(_, e)| ensemble_row(e)).collect();
    write_table(&stats.join("ensemble.csv"), TableKind::Ensemble, hash, &ENSEMBLE_COLUMNS, &rows)?;
    let mut mz = Plot::new(format!("{}: circuit-averaged magnetization", spec.backend), "p", "mz_bar");
    for s in size_series(spec, &ensembles, |e| (e.p, e.mz_bar, e.mz_bar_se)) {
        mz = mz.with(s);
    }
    mz.write(&plots.join("mz_bar.svg"))?;
    let mut vq = Plot::new(format!("{}: Var_Q", spec.backend), "p", "Var_Q");
    for s in size_series(spec, &ensembles, |e| (e.p, e.var_q, e.var_q_se)) {
        vq = vq.with(s);
    }
    vq.write(&plots.join("var_q.svg"))?;
    if spec.probes.time_series {
        let mut rows = Vec::new();
        let mut plot = Plot::new(format!("{}: magnetization growth", spec.backend), "t", "mz_bar");
        for task in &tasks {
            let t = Table::read(&series_path(run_dir, task))?;
            t.expect_kind(TableKind::Series)?;
            let ts: Vec<f64> = t.column("t")?;
            let ys: Vec<f64> = t.column("mz_bar")?;
            plot = plot.with(Series::points(
                format!("L={} p={}", task.l, task.p),
                ts.into_iter().zip(ys).collect(),
                None,
            ));
            rows.extend(t.rows.iter().cloned());
        }
        write_table(&stats.join("series.csv"), TableKind::Series, hash, &SERIES_COLUMNS, &rows)?;
        plot.write(&plots.join("series_mz.svg"))?;
    }
    Ok(())
}
