//! Experiment configuration: a TOML file with flat keys plus `[optimizer]`
//! and `[converge]` sections. `configs/fig3.toml` in the repository root is
//! a fully annotated example.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use rsma_core::baselines::SchemeKind;
use rsma_core::optimizer::{InitStrategy, OptimizerConfig};

use crate::{HarnessError, Result};

/// One scheme to run, optionally in its "no information about channel
/// error" variant (design under `sigma_e2 = 0`, evaluate under the truth).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeEntry {
    pub kind: SchemeKind,
    pub no_info: bool,
}

/// Validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub nt: usize,
    pub k_users: usize,
    pub snr_db_list: Vec<f64>,
    pub sigma_e2_list: Vec<f64>,
    pub n_trials: usize,
    pub master_seed: u64,
    pub schemes: Vec<SchemeEntry>,
    /// Loop settings shared by every run; the per-trial seed and the scheme
    /// are filled in by the sweep.
    pub optimizer: OptimizerConfig,
    pub output_path: Option<PathBuf>,
    /// `(nt, k_users)` pairs for the `converge` subcommand.
    pub converge_pairs: Vec<(usize, usize)>,
    /// Trials per pair for the `converge` subcommand.
    pub converge_trials: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    nt: usize,
    k_users: usize,
    snr_db: Vec<f64>,
    sigma_e2: Vec<f64>,
    n_trials: usize,
    master_seed: u64,
    #[serde(default)]
    output: Option<PathBuf>,
    schemes: Vec<RawScheme>,
    #[serde(default)]
    optimizer: RawOptimizer,
    #[serde(default)]
    converge: Option<RawConverge>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawScheme {
    Name(String),
    Spec {
        kind: String,
        #[serde(default)]
        no_info: bool,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    max_iters: Option<usize>,
    eps: Option<f64>,
    n_random: Option<usize>,
    init: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConverge {
    pairs: Vec<(usize, usize)>,
    n_trials: Option<usize>,
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses and validates a TOML config string.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        Self::from_raw(raw)
    }

    /// Loads a config file; parse errors name the file and carry the TOML
    /// line/field diagnostics.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            config_err(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        if raw.nt == 0 || raw.k_users == 0 {
            return Err(config_err("nt and k_users must be positive"));
        }
        if raw.snr_db.is_empty() {
            return Err(config_err("snr_db must list at least one value"));
        }
        if raw.snr_db.iter().any(|x| !x.is_finite()) {
            return Err(config_err("snr_db values must be finite"));
        }
        if raw.sigma_e2.is_empty() {
            return Err(config_err("sigma_e2 must list at least one value"));
        }
        if raw.sigma_e2.iter().any(|x| !(0.0..1.0).contains(x)) {
            return Err(config_err("sigma_e2 values must lie in [0, 1)"));
        }
        if raw.n_trials == 0 {
            return Err(config_err("n_trials must be at least 1"));
        }
        if raw.schemes.is_empty() {
            return Err(config_err("schemes must list at least one entry"));
        }

        let mut schemes = Vec::with_capacity(raw.schemes.len());
        for (i, s) in raw.schemes.iter().enumerate() {
            let (name, no_info) = match s {
                RawScheme::Name(name) => (name.as_str(), false),
                RawScheme::Spec { kind, no_info } => (kind.as_str(), *no_info),
            };
            let kind: SchemeKind = name
                .parse()
                .map_err(|e| config_err(format!("schemes[{i}]: {e}")))?;
            if kind == SchemeKind::RsmaZf && raw.k_users > raw.nt {
                return Err(config_err(format!(
                    "schemes[{i}]: rsma_zf needs k_users <= nt, got {} > {}",
                    raw.k_users, raw.nt
                )));
            }
            schemes.push(SchemeEntry { kind, no_info });
        }

        let defaults = OptimizerConfig::default();
        let init = match raw.optimizer.init.as_deref() {
            None | Some("mrt_uniform") => InitStrategy::MrtUniform,
            Some("random") => InitStrategy::Random,
            Some(other) => {
                return Err(config_err(format!(
                    "optimizer.init must be 'mrt_uniform' or 'random', got '{other}'"
                )))
            }
        };
        let optimizer = OptimizerConfig {
            max_iters: raw.optimizer.max_iters.unwrap_or(defaults.max_iters),
            eps: raw.optimizer.eps.unwrap_or(defaults.eps),
            n_random: raw.optimizer.n_random.unwrap_or(defaults.n_random),
            init,
            ..defaults
        };
        if optimizer.max_iters == 0 {
            return Err(config_err("optimizer.max_iters must be at least 1"));
        }
        if !(optimizer.eps > 0.0) {
            return Err(config_err("optimizer.eps must be positive"));
        }
        if optimizer.n_random == 0 {
            return Err(config_err("optimizer.n_random must be at least 1"));
        }

        let (converge_pairs, converge_trials) = match raw.converge {
            Some(c) => {
                if c.pairs.is_empty() {
                    return Err(config_err("converge.pairs must list at least one pair"));
                }
                if c.pairs.iter().any(|&(nt, k)| nt == 0 || k == 0) {
                    return Err(config_err("converge.pairs entries must be positive"));
                }
                let trials = c.n_trials.unwrap_or(raw.n_trials);
                if trials == 0 {
                    return Err(config_err("converge.n_trials must be at least 1"));
                }
                (c.pairs, trials)
            }
            None => (Vec::new(), raw.n_trials),
        };

        Ok(Self {
            nt: raw.nt,
            k_users: raw.k_users,
            snr_db_list: raw.snr_db,
            sigma_e2_list: raw.sigma_e2,
            n_trials: raw.n_trials,
            master_seed: raw.master_seed,
            schemes,
            optimizer,
            output_path: raw.output,
            converge_pairs,
            converge_trials,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        nt = 2
        k_users = 2
        snr_db = [5.0, 20.0]
        sigma_e2 = [0.05]
        n_trials = 3
        master_seed = 7
        schemes = ["rsma", { kind = "oma", no_info = true }]
    "#;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.nt, 2);
        assert_eq!(cfg.schemes.len(), 2);
        assert_eq!(cfg.schemes[0].kind, SchemeKind::Rsma);
        assert!(!cfg.schemes[0].no_info);
        assert_eq!(cfg.schemes[1].kind, SchemeKind::Oma);
        assert!(cfg.schemes[1].no_info);
        assert_eq!(cfg.optimizer.max_iters, 100);
        assert!(cfg.output_path.is_none());
    }

    #[test]
    fn rejects_unknown_scheme_and_fields() {
        let bad = MINIMAL.replace("\"rsma\"", "\"tdma\"");
        let err = ExperimentConfig::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("schemes[0]"));

        let unknown_field = format!("{MINIMAL}\nbogus = 3\n");
        assert!(ExperimentConfig::from_toml_str(&unknown_field).is_err());
    }

    #[test]
    fn rejects_out_of_domain_values() {
        for (from, to) in [
            ("sigma_e2 = [0.05]", "sigma_e2 = [1.5]"),
            ("n_trials = 3", "n_trials = 0"),
            ("snr_db = [5.0, 20.0]", "snr_db = []"),
            ("nt = 2", "nt = 0"),
        ] {
            let bad = MINIMAL.replace(from, to);
            assert!(
                ExperimentConfig::from_toml_str(&bad).is_err(),
                "accepted bad config with {to}"
            );
        }
    }

    #[test]
    fn rejects_zf_with_more_users_than_antennas() {
        let bad = MINIMAL
            .replace("k_users = 2", "k_users = 3")
            .replace("\"rsma\"", "\"rsma_zf\"");
        let err = ExperimentConfig::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("rsma_zf"));
    }

    #[test]
    fn parses_optimizer_and_converge_sections() {
        let text = format!(
            "{MINIMAL}\n[optimizer]\nmax_iters = 40\neps = 1e-3\ninit = \"random\"\n\n[converge]\npairs = [[2, 2], [3, 3]]\nn_trials = 2\n"
        );
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.optimizer.max_iters, 40);
        assert_eq!(cfg.optimizer.eps, 1e-3);
        assert_eq!(cfg.optimizer.init, InitStrategy::Random);
        assert_eq!(cfg.converge_pairs, vec![(2, 2), (3, 3)]);
        assert_eq!(cfg.converge_trials, 2);
    }

    #[test]
    fn load_names_missing_file() {
        let err = ExperimentConfig::load(Path::new("/nonexistent/nope.toml")).unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)));
        assert!(err.to_string().contains("nope.toml"));
    }
}
