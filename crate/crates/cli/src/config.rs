//! TOML run configuration. Every key is optional and every key can be
//! overridden by the matching command-line flag.
//!
//! ```toml
//! seed = 7
//! jobs = 4
//! bandwidth = 100.0
//! horizon = 10000.0
//! delta = 0.1
//! seeds = 50
//! ensemble_seed = 1
//!
//! [ensemble]            # a synthetic recipe ...
//! kind = "log_normal"
//! pages = 100
//! xi_min = 0.1
//! xi_max = 1.0
//! sigma = 2.0
//! # ... or a file written by `ingest`:
//! # path = "ensemble.json"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use freshcrawl::experiments::SyntheticEnsemble;
use freshcrawl::PageEnsembleF64;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub bandwidth: Option<f64>,
    pub horizon: Option<f64>,
    pub delta: Option<f64>,
    pub seeds: Option<usize>,
    pub ensemble_seed: Option<u64>,
    pub ensemble: Option<EnsembleSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum EnsembleSpec {
    File { path: PathBuf },
    Synthetic(SyntheticEnsemble),
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(freshcrawl::Error::from)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        Ok(toml::from_str(text)?)
    }
}

/// On-disk ensemble: the rates plus optional page identifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleFile {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub page_ids: Vec<String>,
    pub change_rates: Vec<f64>,
    pub request_rates: Vec<f64>,
    pub xi_min: f64,
    pub xi_max: f64,
}

impl EnsembleFile {
    pub fn from_ensemble(ensemble: &PageEnsembleF64, page_ids: Vec<String>) -> Self {
        Self {
            page_ids,
            change_rates: ensemble.change_rates().to_vec(),
            request_rates: ensemble.request_rates().to_vec(),
            xi_min: ensemble.xi_min(),
            xi_max: ensemble.xi_max(),
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let file = std::fs::File::open(path).map_err(freshcrawl::Error::from)?;
        let parsed: Self = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(freshcrawl::Error::from)?;
        if !parsed.page_ids.is_empty() && parsed.page_ids.len() != parsed.change_rates.len() {
            return Err(CliError::Core(freshcrawl::Error::InvalidArgument(
                "page_ids and change_rates differ in length".into(),
            )));
        }
        Ok(parsed)
    }

    pub fn into_ensemble(self) -> CliResult<PageEnsembleF64> {
        Ok(PageEnsembleF64::new(
            self.change_rates,
            self.request_rates,
            self.xi_min,
            self.xi_max,
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_synthetic_and_file_ensembles() {
        let c = Config::parse(
            "seed = 3\nbandwidth = 10.0\n[ensemble]\nkind = \"uniform\"\npages = 5\nxi_min = 0.1\nxi_max = 1.0\nzeta_lo = 0.5\nzeta_hi = 1.5\n",
        )
        .unwrap();
        assert_eq!(c.seed, Some(3));
        assert!(matches!(
            c.ensemble,
            Some(EnsembleSpec::Synthetic(SyntheticEnsemble::Uniform {
                pages: 5,
                ..
            }))
        ));
        let c = Config::parse("[ensemble]\npath = \"e.json\"\n").unwrap();
        assert_eq!(
            c.ensemble,
            Some(EnsembleSpec::File {
                path: "e.json".into()
            })
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = Config::parse("bandwith = 3.0\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn ensemble_file_round_trip() {
        let e = PageEnsembleF64::new(vec![0.2, 0.4], vec![1.0, 2.0], 0.1, 1.0).unwrap();
        let f = EnsembleFile::from_ensemble(&e, vec!["a".into(), "b".into()]);
        let back: EnsembleFile = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back.into_ensemble().unwrap(), e);
    }
}
