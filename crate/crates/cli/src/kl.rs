//! KL divergence between the per-circuit quantum-variance distributions of
//! two runs at the same `(L, p)`.

use std::path::{Path, PathBuf};

use bernoulli_core::analysis::{kl_divergence, KlConfig, KlResult};
use serde::Serialize;

use crate::collapse::write_json;
use crate::error::{input_err, io_err, Result};
use crate::plot::{histogram, Plot, Series};
use crate::sweep::read_circuits;

const HISTOGRAM_BINS: usize = 30;

#[derive(Clone, Debug, PartialEq)]
pub struct KlArgs {
    /// Circuits table of the reference distribution `P`.
    pub p_table: PathBuf,
    /// Circuits table of the model distribution `Q`.
    pub q_table: PathBuf,
    pub config: KlConfig,
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KlReport {
    pub l: usize,
    pub p: f64,
    pub backend_p: String,
    pub backend_q: String,
    pub result: KlResult,
    pub ci_contains_zero: bool,
}

fn samples(path: &Path) -> Result<(Vec<f64>, usize, f64, String)> {
    let (circuits, l, p, _) = read_circuits(path)?;
    let backend = circuits[0].backend.to_string();
    Ok((circuits.iter().map(|c| c.quantum_var).collect(), l, p, backend))
}

/// `D_KL(P ‖ Q)` with a bootstrap interval; writes `kl.json` and
/// `histogram.svg` under `out_dir`.
pub fn cmd_kl(args: &KlArgs) -> Result<KlReport> {
    let (xp, lp, pp, bp) = samples(&args.p_table)?;
    let (xq, lq, pq, bq) = samples(&args.q_table)?;
    if (lp, pp) != (lq, pq) {
        return input_err(format!("tables are at different points: (L={lp}, p={pp}) vs (L={lq}, p={pq})"));
    }
    let result = kl_divergence(&xp, &xq, &args.config)?;
    let report = KlReport {
        l: lp,
        p: pp,
        backend_p: bp.clone(),
        backend_q: bq.clone(),
        ci_contains_zero: result.ci_contains_zero(),
        result,
    };
    std::fs::create_dir_all(&args.out_dir).map_err(io_err(&args.out_dir))?;
    write_json(&args.out_dir.join("kl.json"), &report)?;

    let all = xp.iter().chain(&xq).copied().filter(|x| x.is_finite());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    Plot::new(format!("(ΔM_z)²|_C at L={lp}, p={pp}"), "(ΔM_z)²|_C", "density")
        .with(Series::steps(format!("P: {bp}"), histogram(&xp, lo, hi, HISTOGRAM_BINS)))
        .with(Series::steps(format!("Q: {bq}"), histogram(&xq, lo, hi, HISTOGRAM_BINS)))
        .write(&args.out_dir.join("histogram.svg"))?;
    Ok(report)
}
