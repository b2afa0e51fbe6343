//! Finite-size scaling collapse of a sweep's aggregate tables.

use std::path::{Path, PathBuf};

use bernoulli_core::analysis::collapse::rescale;
use bernoulli_core::analysis::{
    fit_collapse, Ansatz, CollapseInput, CollapsePoint, FitConfig, FitResult, FitWindow, FreeParams, ScalingParams,
};

use crate::error::{input_err, io_err, json_err, Result};
use crate::plot::{Plot, Series};
use crate::table::{Table, TableKind};

/// Default static window around the transition.
pub const STATIC_WINDOW: FitWindow = FitWindow::Range { lo: 0.4, hi: 0.6 };
/// Default dynamic window: early times `1 ≤ t ≤ 0.6 L`.
pub const DYNAMIC_WINDOW: FitWindow = FitWindow::SizeScaled { lo: 1.0, factor: 0.6 };

/// Starting point of the static fits. Kept off `p_c = 0.5, ν = 1`, where a
/// regular p grid with doubling sizes makes rescaled abscissae coincide.
pub const STATIC_GUESS: ScalingParams = ScalingParams {
    p_c: 0.49,
    nu: 1.1,
    beta: 0.9,
    z: 2.0,
};
pub const DYNAMIC_GUESS_Z: f64 = 1.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observable {
    /// Circuit-averaged magnetization.
    Mz,
    /// Magnetization growth `M_z(t) − M_z(0)` (time series only).
    DeltaMz,
    /// Variance over circuits of the quantum variance.
    VarQ,
}

impl Observable {
    fn columns(self) -> (&'static str, &'static str) {
        match self {
            Observable::Mz => ("mz_bar", "mz_bar_se"),
            Observable::DeltaMz => ("delta_mz_bar", "delta_mz_se"),
            Observable::VarQ => ("var_q", "var_q_se"),
        }
    }

    /// Multiplier `m` of the amplitude exponent `L^{mβ/ν}`.
    fn beta_power(self) -> f64 {
        match self {
            Observable::VarQ => 2.0,
            _ => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Observable::Mz => "mz",
            Observable::DeltaMz => "delta-mz",
            Observable::VarQ => "var-q",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollapseArgs {
    /// `stats/ensemble.csv` (static) or `stats/series.csv` (dynamic).
    pub input: PathBuf,
    pub observable: Observable,
    /// Defaults to the ansatz-specific window.
    pub window: Option<FitWindow>,
    /// Fix `β` instead of fitting it. The magnetizations always use `β = 0`.
    pub fix_beta: Option<f64>,
    /// Correlation-length exponent of a dynamic fit (sets `β/ν`).
    pub nu: f64,
    /// Control probability selected from a time-series table.
    pub p: Option<f64>,
    pub out_dir: PathBuf,
}

impl CollapseArgs {
    pub fn new(input: impl Into<PathBuf>, observable: Observable, out_dir: impl Into<PathBuf>) -> Self {
        CollapseArgs {
            input: input.into(),
            observable,
            window: None,
            fix_beta: None,
            nu: 1.0,
            p: None,
            out_dir: out_dir.into(),
        }
    }
}

fn load_points(args: &CollapseArgs) -> Result<CollapseInput> {
    let table = Table::read(&args.input)?;
    let (x_col, ansatz) = match table.kind {
        TableKind::Ensemble => ("p", Ansatz::Static),
        TableKind::Series => ("t", Ansatz::Dynamic),
        other => return input_err(format!("cannot collapse a {} table", other.name())),
    };
    if ansatz == Ansatz::Static && args.observable == Observable::DeltaMz {
        return input_err("delta-mz is recorded in time-series tables only");
    }
    let (y_col, se_col) = args.observable.columns();
    let ls: Vec<usize> = table.column("L")?;
    let ps: Vec<f64> = table.column("p")?;
    let xs: Vec<f64> = table.column(x_col)?;
    let ys: Vec<f64> = table.column(y_col)?;
    let ses: Vec<f64> = table.column(se_col)?;
    let p_sel = if ansatz == Ansatz::Dynamic {
        let mut distinct = ps.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        match (args.p, distinct.as_slice()) {
            (Some(p), _) if distinct.contains(&p) => Some(p),
            (Some(p), _) => return input_err(format!("no time series at p = {p}")),
            (None, [only]) => Some(*only),
            (None, _) => return input_err("the time-series table holds several p values; select one"),
        }
    } else {
        None
    };
    // points without an error estimate (e.g. the t = 0 initial value or a
    // deterministic p = 1 point) carry no weight in the collapse
    let points = (0..ls.len())
        .filter(|&i| p_sel.is_none_or(|p| ps[i] == p) && ses[i] > 0.0 && ys[i].is_finite())
        .map(|i| CollapsePoint {
            x: xs[i],
            l: ls[i],
            y: ys[i],
            sigma: ses[i],
        })
        .collect();
    Ok(CollapseInput::new(points, ansatz).with_beta_power(args.observable.beta_power()))
}

fn fit_setup(args: &CollapseArgs, ansatz: Ansatz) -> (ScalingParams, FreeParams, FitWindow) {
    let amplitude_free = args.observable == Observable::VarQ && args.fix_beta.is_none();
    let beta = match args.observable {
        Observable::VarQ => args.fix_beta.unwrap_or(STATIC_GUESS.beta),
        _ => 0.0,
    };
    match ansatz {
        Ansatz::Static => {
            let free = if amplitude_free { FreeParams::STATIC } else { FreeParams::STATIC_FIXED_BETA };
            (ScalingParams { beta, ..STATIC_GUESS }, free, args.window.unwrap_or(STATIC_WINDOW))
        }
        Ansatz::Dynamic => {
            let free = if amplitude_free { FreeParams::DYNAMIC } else { FreeParams::DYNAMIC_FIXED_BETA };
            let guess = ScalingParams {
                p_c: args.p.unwrap_or(0.5),
                nu: args.nu,
                beta,
                z: DYNAMIC_GUESS_Z,
            };
            (guess, free, args.window.unwrap_or(DYNAMIC_WINDOW))
        }
    }
}

fn by_size(points: &[(usize, f64, f64, f64)]) -> Vec<Series> {
    let mut sizes: Vec<usize> = points.iter().map(|p| p.0).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|l| {
            let sel = points.iter().filter(|p| p.0 == l);
            let pts: Vec<(f64, f64)> = sel.clone().map(|p| (p.1, p.2)).collect();
            let errs: Vec<f64> = sel.map(|p| p.3).collect();
            Series::points(format!("L={l}"), pts, Some(errs))
        })
        .collect()
}

/// Fits the collapse and writes `fit.json`, `raw.svg` and `collapse.svg`
/// under `out_dir`.
pub fn cmd_collapse(args: &CollapseArgs) -> Result<FitResult> {
    let data = load_points(args)?;
    let (guess, free, window) = fit_setup(args, data.ansatz);
    let fit = fit_collapse(&data, &guess, &FitConfig::new(window, free))?;
    std::fs::create_dir_all(&args.out_dir).map_err(io_err(&args.out_dir))?;
    write_json(&args.out_dir.join("fit.json"), &fit)?;

    let fitted = window.apply(&data);
    let x_label = match data.ansatz {
        Ansatz::Static => "p",
        Ansatz::Dynamic => "t",
    };
    let name = args.observable.name();
    let raw: Vec<_> = fitted.points.iter().map(|p| (p.l, p.x, p.y, p.sigma)).collect();
    let mut plot = Plot::new(format!("{name}: raw data in the fit window"), x_label, name);
    for s in by_size(&raw) {
        plot = plot.with(s);
    }
    plot.write(&args.out_dir.join("raw.svg"))?;

    let scaled: Vec<_> = rescale(&fit.params, &fitted)?
        .into_iter()
        .zip(&fitted.points)
        .map(|((x, y, s), p)| (p.l, x, y, s))
        .collect();
    let x_label = match data.ansatz {
        Ansatz::Static => "(p − p_c) L^{1/ν}",
        Ansatz::Dynamic => "t / L^z",
    };
    let mut plot = Plot::new(format!("{name}: collapse"), x_label, format!("{name} · L^(mβ/ν)"));
    for s in by_size(&scaled) {
        plot = plot.with(s);
    }
    plot.write(&args.out_dir.join("collapse.svg"))?;
    Ok(fit)
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(json_err(path))?;
    std::fs::write(path, json + "\n").map_err(io_err(path))
}
