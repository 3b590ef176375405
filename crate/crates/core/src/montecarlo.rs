//! Seeded Monte Carlo harness: draw a channel, synthesize observations,
//! estimate with both estimators and aggregate relative RMSE next to the
//! relative CRB.
//!
//! Every `(snr_index, trial_index)` cell draws from its own counter-based
//! stream and results are reduced in trial order, so a sweep is bit-identical
//! for any number of worker threads.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{sample_channel, CorrelationSpec, Fading};
use crate::crb::relative_crb_f;
use crate::error::{Error, Result};
use crate::estimators::{estimate_ml_concentrated, estimate_mm, Concentrated, EstimateStatus, MlOptions, ThetaEstimate};
use crate::rng::trial_stream;
use crate::signal::{make_training, sufficient_stats, synthesize, Noise, TrainingPair};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Transmit antennas `N`.
    pub antennas: usize,
    /// Training symbols per packet `K` (even).
    pub symbols: usize,
    /// Packets `L`.
    pub packets: usize,
    /// Post-detection SNR points, `10·log10(P σ_h²)`.
    pub snr_db: Vec<f64>,
    pub sigma_h2: f64,
    pub f_true: Complex64,
    pub fading: Fading,
    pub carrier_hz: f64,
    pub slot_s: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub noise: Noise,
    pub ml: MlOptions,
}

impl ExperimentConfig {
    /// Defaults for everything except the ground truth `F`: `N = 4`,
    /// `K = 16`, `L = 10`, i.i.d. fading, 900 MHz, 1 ms slots, 2000 trials.
    pub fn new(f_true: Complex64) -> Self {
        Self {
            antennas: 4,
            symbols: 16,
            packets: 10,
            snr_db: vec![20.0],
            sigma_h2: 1.0,
            f_true,
            fading: Fading::Iid,
            carrier_hz: 9e8,
            slot_s: 1e-3,
            trials: 2000,
            master_seed: 0,
            noise: Noise::Unit,
            ml: MlOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArg(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.snr_db.is_empty() {
            return bad("snr_db must list at least one point".into());
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return bad(format!("snr_db contains non-finite value {s}"));
        }
        if self.symbols % 2 != 0 || self.antennas == 0 || self.symbols / 2 < self.antennas {
            return bad(format!(
                "need even K with K/2 >= N >= 1, got K = {}, N = {}",
                self.symbols, self.antennas
            ));
        }
        if self.packets == 0 {
            return bad("packets must be at least 1".into());
        }
        if !(self.sigma_h2 >= 0.0) || !self.sigma_h2.is_finite() {
            return bad(format!("sigma_h2 must be finite and >= 0, got {}", self.sigma_h2));
        }
        if !self.f_true.is_finite() {
            return bad("f_true must be finite".into());
        }
        if !(self.carrier_hz > 0.0) || !self.carrier_hz.is_finite() {
            return bad(format!("carrier frequency must be positive, got {}", self.carrier_hz));
        }
        if !(self.slot_s > 0.0) || !self.slot_s.is_finite() {
            return bad(format!("slot duration must be positive, got {}", self.slot_s));
        }
        self.ml.validate()?;
        if let Fading::Clarke { velocity_kmh } = self.fading {
            if !(velocity_kmh >= 0.0) {
                return bad(format!("velocity must be >= 0, got {velocity_kmh}"));
            }
        }
        Ok(())
    }

    /// Symbol power `P` for an SNR point, from `SNR = P σ_h²`. With
    /// `σ_h² = 0` the SNR value is taken as `P` itself.
    pub fn power(&self, snr_db: f64) -> f64 {
        let snr = 10f64.powf(snr_db / 10.0);
        if self.sigma_h2 > 0.0 {
            snr / self.sigma_h2
        } else {
            snr
        }
    }

    /// `σ² = 2N/(PK)` at an SNR point.
    pub fn sigma2(&self, snr_db: f64) -> f64 {
        2.0 * self.antennas as f64 / (self.power(snr_db) * self.symbols as f64)
    }
}

/// Both estimates from one trial, plus enough context to score them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub ml: ThetaEstimate,
    pub mm: ThetaEstimate,
    pub f_true: Complex64,
    pub sigma_h2: f64,
    pub sigma2: f64,
    /// Frobenius norms of `Y1`, `Y2`.
    pub y_norms: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub rmse_rel_ml: f64,
    pub rmse_rel_mm: f64,
    /// NaN when the bound is undefined (`F = 0` or singular FIM).
    pub crb_rel: f64,
    /// Trials where either estimator returned `FInfinite`.
    pub f_infinite_count: usize,
    /// Trials where either estimator returned `DegenerateZeroMu`.
    pub degenerate_count: usize,
    /// Trials that errored out.
    pub failed_count: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
}

/// A validated configuration with its correlation matrix prepared once.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    spec: CorrelationSpec,
    training: Vec<TrainingPair>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.fading.correlation(config.packets, config.carrier_hz, config.slot_s)?;
        let training = config
            .snr_db
            .iter()
            .map(|&s| make_training(config.antennas, config.symbols, config.power(s)))
            .collect::<Result<_>>()?;
        Ok(Self { config, spec, training })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn correlation(&self) -> &CorrelationSpec {
        &self.spec
    }

    /// One trial, fully determined by `(master_seed, snr_index, trial_index)`.
    pub fn run_trial(&self, snr_index: usize, trial_index: usize) -> Result<TrialOutcome> {
        let cfg = &self.config;
        let pair = self.training.get(snr_index).ok_or_else(|| {
            Error::InvalidArg(format!("snr index {snr_index} out of range ({} points)", self.training.len()))
        })?;
        let mut rng = trial_stream(cfg.master_seed, snr_index, trial_index);
        let draw = sample_channel(&self.spec, cfg.antennas, cfg.sigma_h2, &mut rng)?;
        let batch = synthesize(&draw.h, cfg.sigma_h2, cfg.f_true, pair, cfg.noise, &mut rng)?;
        let stats = sufficient_stats(&batch, pair)?;
        let mm = estimate_mm(&stats);
        let conc = Concentrated::new(&stats, &self.spec)?;
        let ml = estimate_ml_concentrated(&conc, mm.mu_hat, &cfg.ml)?;
        Ok(TrialOutcome {
            ml,
            mm,
            f_true: cfg.f_true,
            sigma_h2: cfg.sigma_h2,
            sigma2: stats.sigma2,
            y_norms: (stats.y1.frobenius_norm(), stats.y2.frobenius_norm()),
        })
    }

    /// All trials at every SNR point. `threads = None` uses the global
    /// rayon pool.
    pub fn run_sweep(&self, threads: Option<usize>) -> Result<SweepResult> {
        let run = || -> Result<SweepResult> {
            let points = (0..self.config.snr_db.len())
                .map(|i| self.sweep_point(i))
                .collect::<Result<_>>()?;
            Ok(SweepResult { points })
        };
        match threads {
            None => run(),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidArg(format!("cannot build thread pool: {e}")))?
                .install(run),
        }
    }

    fn sweep_point(&self, snr_index: usize) -> Result<SweepPoint> {
        let cfg = &self.config;
        let outcomes: Vec<Result<TrialOutcome>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| self.run_trial(snr_index, t))
            .collect();

        let mut ml = Accumulator::default();
        let mut mm = Accumulator::default();
        let (mut f_inf, mut degenerate, mut failed) = (0, 0, 0);
        let mut first_error = None;
        for outcome in outcomes {
            match outcome {
                Ok(o) => {
                    let statuses = [o.ml.status, o.mm.status];
                    if statuses.contains(&EstimateStatus::FInfinite) {
                        f_inf += 1;
                    }
                    if statuses.contains(&EstimateStatus::DegenerateZeroMu) {
                        degenerate += 1;
                    }
                    ml.push(&o.ml, cfg.f_true);
                    mm.push(&o.mm, cfg.f_true);
                }
                Err(e) => {
                    failed += 1;
                    first_error.get_or_insert(e);
                }
            }
        }
        if failed == cfg.trials {
            return Err(first_error.expect("at least one trial ran"));
        }

        let snr_db = cfg.snr_db[snr_index];
        let crb_rel = relative_crb_f(cfg.f_true, cfg.sigma_h2, &self.spec, cfg.antennas, cfg.sigma2(snr_db))
            .unwrap_or(f64::NAN);
        Ok(SweepPoint {
            snr_db,
            rmse_rel_ml: ml.relative_rmse(cfg.f_true),
            rmse_rel_mm: mm.relative_rmse(cfg.f_true),
            crb_rel,
            f_infinite_count: f_inf,
            degenerate_count: degenerate,
            failed_count: failed,
            trials: cfg.trials,
        })
    }
}

/// Running `Σ|F̂ − F|²` over trials with a regular estimate.
#[derive(Debug, Default)]
struct Accumulator {
    sum_sq: f64,
    kept: usize,
}

impl Accumulator {
    fn push(&mut self, est: &ThetaEstimate, f_true: Complex64) {
        if est.status == EstimateStatus::Ok {
            self.sum_sq += (est.f_hat - f_true).norm_sqr();
            self.kept += 1;
        }
    }

    fn relative_rmse(&self, f_true: Complex64) -> f64 {
        if self.kept == 0 {
            return f64::NAN;
        }
        (self.sum_sq / self.kept as f64).sqrt() / f_true.norm()
    }
}

/// Convenience wrapper: prepare and sweep in one call.
pub fn run_sweep(config: &ExperimentConfig, threads: Option<usize>) -> Result<SweepResult> {
    Experiment::new(config.clone())?.run_sweep(threads)
}
