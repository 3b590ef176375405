//! Experiment configuration files.
//!
//! A config is a flat TOML document. Top-level keys apply to every
//! subcommand; an optional `[sweep]`, `[crb]` or `[trial]` section overrides
//! them for that subcommand only. Command-line `--set key=value` pairs are
//! applied last, in order, so the final occurrence of a key wins.
//!
//! ```toml
//! f_true = [1.0, 0.0]
//! fading = "clarke"
//! velocity_kmh = 5.0
//! packets = 10
//! snr_db = [0, 10, 20, 30]
//!
//! [crb]
//! snr_db = [0, 5, 10, 15, 20, 25, 30]
//! ```

use std::path::Path;

use impedance_core::{Complex64, ExperimentConfig, Fading, MlOptions, Noise};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

/// Section names that may appear as tables in a config file.
pub const SECTIONS: [&str; 3] = ["sweep", "crb", "trial"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingKind {
    #[default]
    Iid,
    Clarke,
}

/// The effective, fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Ground truth `[re, im]`. Required.
    pub f_true: [f64; 2],
    #[serde(default = "defaults::antennas")]
    pub antennas: usize,
    #[serde(default = "defaults::symbols")]
    pub symbols: usize,
    #[serde(default = "defaults::packets")]
    pub packets: usize,
    #[serde(default = "defaults::snr_db")]
    pub snr_db: Vec<f64>,
    #[serde(default = "defaults::sigma_h2")]
    pub sigma_h2: f64,
    #[serde(default)]
    pub fading: FadingKind,
    /// Terminal speed for `fading = "clarke"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_kmh: Option<f64>,
    #[serde(default = "defaults::carrier_hz")]
    pub carrier_hz: f64,
    #[serde(default = "defaults::slot_s")]
    pub slot_s: f64,
    #[serde(default = "defaults::trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub zero_noise: bool,
    #[serde(default = "defaults::ml_bracket_factor")]
    pub ml_bracket_factor: f64,
    #[serde(default = "defaults::ml_tol")]
    pub ml_tol: f64,
    #[serde(default = "defaults::ml_max_iters")]
    pub ml_max_iters: usize,
}

mod defaults {
    use impedance_core::MlOptions;

    pub fn antennas() -> usize {
        4
    }
    pub fn symbols() -> usize {
        16
    }
    pub fn packets() -> usize {
        10
    }
    pub fn snr_db() -> Vec<f64> {
        vec![20.0]
    }
    pub fn sigma_h2() -> f64 {
        1.0
    }
    pub fn carrier_hz() -> f64 {
        9e8
    }
    pub fn slot_s() -> f64 {
        1e-3
    }
    pub fn trials() -> usize {
        2000
    }
    pub fn ml_bracket_factor() -> f64 {
        MlOptions::default().bracket_factor
    }
    pub fn ml_tol() -> f64 {
        MlOptions::default().tol
    }
    pub fn ml_max_iters() -> usize {
        MlOptions::default().max_iters
    }
}

impl FileConfig {
    pub fn from_path(path: &Path, section: &str, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_str_with(&text, section, overrides)
    }

    /// Parses `text`, merges `section` over the top level and then applies
    /// `overrides` (`key=value`) in order.
    pub fn from_str_with(text: &str, section: &str, overrides: &[String]) -> Result<Self, CliError> {
        let doc: Table = text.parse().map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        let mut flat = Table::new();
        let mut chosen = None;
        for (key, value) in doc {
            match value {
                Value::Table(t) if SECTIONS.contains(&key.as_str()) => {
                    if key == section {
                        chosen = Some(t);
                    }
                }
                Value::Table(_) => {
                    return Err(CliError::Config(format!(
                        "unknown section [{key}] (expected one of {})",
                        SECTIONS.join(", ")
                    )))
                }
                v => {
                    flat.insert(key, v);
                }
            }
        }
        if let Some(t) = chosen {
            flat.extend(t);
        }
        for pair in overrides {
            let (key, value) = parse_override(pair)?;
            flat.insert(key, value);
        }
        if let Some(v) = flat.get_mut("snr_db") {
            if !matches!(v, Value::Array(_)) {
                *v = Value::Array(vec![v.clone()]);
            }
        }
        let cfg: FileConfig = Value::Table(flat)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("invalid config: {}", e.message())))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        match (self.fading, self.velocity_kmh) {
            (FadingKind::Clarke, None) => Err(CliError::Config(
                "fading = \"clarke\" requires key `velocity_kmh`".into(),
            )),
            (FadingKind::Iid, Some(_)) => Err(CliError::Config(
                "key `velocity_kmh` only applies to fading = \"clarke\"".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn f_true(&self) -> Complex64 {
        Complex64::new(self.f_true[0], self.f_true[1])
    }

    pub fn fading(&self) -> Fading {
        match self.fading {
            FadingKind::Iid => Fading::Iid,
            FadingKind::Clarke => Fading::Clarke {
                velocity_kmh: self.velocity_kmh.unwrap_or(0.0),
            },
        }
    }

    /// Validated core experiment description.
    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let cfg = ExperimentConfig {
            antennas: self.antennas,
            symbols: self.symbols,
            packets: self.packets,
            snr_db: self.snr_db.clone(),
            sigma_h2: self.sigma_h2,
            f_true: self.f_true(),
            fading: self.fading(),
            carrier_hz: self.carrier_hz,
            slot_s: self.slot_s,
            trials: self.trials,
            master_seed: self.seed,
            noise: if self.zero_noise { Noise::Off } else { Noise::Unit },
            ml: MlOptions {
                bracket_factor: self.ml_bracket_factor,
                tol: self.ml_tol,
                max_iters: self.ml_max_iters,
            },
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Flat TOML that re-parses to `self`.
    pub fn dump(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }
}

/// `key=value`, where `value` is read as a TOML value and falls back to a
/// bare string.
fn parse_override(pair: &str) -> Result<(String, Value), CliError> {
    let (key, raw) = pair
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{pair}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Config(format!("override `{pair}` has an empty key")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "f_true = [1.0, 0.5]\n";

    fn parse(text: &str, section: &str, sets: &[&str]) -> Result<FileConfig, CliError> {
        let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
        FileConfig::from_str_with(text, section, &sets)
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = parse(BASE, "sweep", &[]).unwrap();
        assert_eq!(cfg.antennas, 4);
        assert_eq!(cfg.symbols, 16);
        assert_eq!(cfg.snr_db, vec![20.0]);
        assert_eq!(cfg.fading(), Fading::Iid);
        assert_eq!(cfg.f_true(), Complex64::new(1.0, 0.5));
        assert!(cfg.experiment().is_ok());
    }

    #[test]
    fn missing_f_true_is_named() {
        let err = parse("packets = 5\n", "sweep", &[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("f_true"), "{err}");
    }

    #[test]
    fn section_overrides_top_level() {
        let text = format!("{BASE}trials = 10\n[crb]\ntrials = 3\n[sweep]\ntrials = 7\n");
        assert_eq!(parse(&text, "crb", &[]).unwrap().trials, 3);
        assert_eq!(parse(&text, "sweep", &[]).unwrap().trials, 7);
        assert_eq!(parse(&text, "trial", &[]).unwrap().trials, 10);
    }

    #[test]
    fn last_override_wins() {
        let cfg = parse(BASE, "sweep", &["trials=5", "packets = 3", "trials=9"]).unwrap();
        assert_eq!(cfg.trials, 9);
        assert_eq!(cfg.packets, 3);
    }

    #[test]
    fn overrides_parse_toml_values() {
        let cfg = parse(
            BASE,
            "sweep",
            &["snr_db=[0, 10]", "fading=clarke", "velocity_kmh=50", "f_true=[0.0, -1.0]"],
        )
        .unwrap();
        assert_eq!(cfg.snr_db, vec![0.0, 10.0]);
        assert_eq!(cfg.fading(), Fading::Clarke { velocity_kmh: 50.0 });
        assert_eq!(cfg.f_true(), Complex64::new(0.0, -1.0));
    }

    #[test]
    fn scalar_snr_is_a_one_point_list() {
        assert_eq!(parse(&format!("{BASE}snr_db = 15\n"), "sweep", &[]).unwrap().snr_db, vec![15.0]);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            format!("{BASE}bogus = 1\n"),
            format!("{BASE}[plot]\nx = 1\n"),
            format!("{BASE}fading = \"clarke\"\n"),
            format!("{BASE}velocity_kmh = 5.0\n"),
            format!("{BASE}fading = \"rician\"\n"),
            "f_true = [1.0]\n".to_string(),
            "f_true = = 2".to_string(),
        ] {
            let err = parse(&text, "sweep", &[]).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
        assert!(parse(BASE, "sweep", &["noequals"]).is_err());
        assert!(parse(BASE, "sweep", &["=3"]).is_err());
    }

    #[test]
    fn experiment_validation_is_a_config_error() {
        let cfg = parse(&format!("{BASE}antennas = 9\n"), "sweep", &[]).unwrap();
        assert_eq!(cfg.experiment().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn dump_round_trips() {
        let text = format!(
            "{BASE}fading = \"clarke\"\nvelocity_kmh = 5.0\nsnr_db = [0, 12.5]\nzero_noise = true\nseed = 42\n"
        );
        let cfg = parse(&text, "sweep", &[]).unwrap();
        let again = parse(&cfg.dump(), "sweep", &[]).unwrap();
        assert_eq!(cfg, again);
    }
}
