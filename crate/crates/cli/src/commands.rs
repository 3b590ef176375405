//! The three subcommands. Each returns the text to write; the binary owns
//! the output stream.

use std::fmt::Write as _;

use impedance_core::crb::fim_closed;
use impedance_core::{Experiment, ExperimentConfig, SweepResult};

use crate::error::CliError;
use crate::format::{complex, db20, rmse_db, sig6};

pub const SWEEP_HEADER: &str = "snr_db,rmse_rel_ml_db,rmse_rel_mm_db,crb_rel_db,f_inf_count,degenerate_count,trials";
pub const CRB_HEADER: &str = "snr_db,crb_rel_db,fim_11,fim_22,fim_12_re,fim_12_im";

/// Monte Carlo sweep as CSV. `threads = None` uses all available cores.
pub fn sweep(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<(String, SweepResult), CliError> {
    let result = Experiment::new(cfg.clone())?.run_sweep(threads)?;
    Ok((sweep_csv(&result), result))
}

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for p in &result.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            sig6(p.snr_db),
            rmse_db(p.rmse_rel_ml),
            rmse_db(p.rmse_rel_mm),
            db20(p.crb_rel),
            p.f_infinite_count,
            p.degenerate_count,
            p.trials
        );
    }
    out
}

/// One row of the CRB table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrbRow {
    pub snr_db: f64,
    /// `√CRB_F/|F|`; NaN when `F = 0` or the information matrix is singular.
    pub crb_rel: f64,
    pub fim_11: f64,
    pub fim_22: f64,
    /// Entry `(1, 2)` of the information matrix.
    pub fim_12: impedance_core::Complex64,
}

pub fn crb_rows(cfg: &ExperimentConfig) -> Result<Vec<CrbRow>, CliError> {
    let exp = Experiment::new(cfg.clone())?;
    let f = cfg.f_true;
    cfg.snr_db
        .iter()
        .map(|&snr_db| {
            let res = fim_closed(f, cfg.sigma_h2, exp.correlation(), cfg.antennas, cfg.sigma2(snr_db))?;
            let crb_rel = match res.crb_f() {
                Some(b) if f.norm() > 0.0 => b.max(0.0).sqrt() / f.norm(),
                _ => f64::NAN,
            };
            Ok(CrbRow {
                snr_db,
                crb_rel,
                fim_11: res.fim.s11,
                fim_22: res.fim.s22,
                fim_12: res.fim.s12(),
            })
        })
        .collect()
}

pub fn crb(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let rows = crb_rows(cfg)?;
    let mut out = String::new();
    out.push_str(CRB_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            sig6(r.snr_db),
            db20(r.crb_rel),
            sig6(r.fim_11),
            sig6(r.fim_22),
            sig6(r.fim_12.re),
            sig6(r.fim_12.im)
        );
    }
    Ok(out)
}

/// One seeded trial as `key: value` lines.
pub fn trial(cfg: &ExperimentConfig, snr_index: usize, trial_index: usize) -> Result<String, CliError> {
    if snr_index >= cfg.snr_db.len() {
        return Err(CliError::Config(format!(
            "snr index {snr_index} out of range, config lists {} SNR points",
            cfg.snr_db.len()
        )));
    }
    let exp = Experiment::new(cfg.clone())?;
    let o = exp.run_trial(snr_index, trial_index)?;
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k}: {v}");
    };
    line("snr_db", sig6(cfg.snr_db[snr_index]));
    line("trial_index", trial_index.to_string());
    line("seed", cfg.master_seed.to_string());
    line("f_true", complex(o.f_true));
    line("sigma_h2_true", sig6(o.sigma_h2));
    line("sigma2", sig6(o.sigma2));
    line("y1_norm", sig6(o.y_norms.0));
    line("y2_norm", sig6(o.y_norms.1));
    for (name, est) in [("ml", o.ml), ("mm", o.mm)] {
        line(&format!("{name}_status"), est.status.to_string());
        line(&format!("{name}_mu_hat"), sig6(est.mu_hat));
        line(&format!("{name}_objective"), sig6(est.objective));
        line(&format!("{name}_f_hat"), complex(est.f_hat));
        line(&format!("{name}_sigma_h2_hat"), sig6(est.sigma_h2_hat));
    }
    Ok(out)
}
