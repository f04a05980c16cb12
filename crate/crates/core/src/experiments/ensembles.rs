use rand_distr::{Distribution, LogNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process_sim::PageEnsemble;
use crate::rng::{stream_rng, Stream};
use crate::scalar::Scalar;

/// Recipe for a random page ensemble. Change rates are uniform on
/// `[xi_min, xi_max]`, which also become the ensemble's bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticEnsemble {
    /// Request rates uniform on `[zeta_lo, zeta_hi]`.
    Uniform {
        pages: usize,
        xi_min: f64,
        xi_max: f64,
        zeta_lo: f64,
        zeta_hi: f64,
    },
    /// Request rates lognormal with log-mean 0 and log-std `sigma`.
    LogNormal {
        pages: usize,
        xi_min: f64,
        xi_max: f64,
        sigma: f64,
    },
}

impl SyntheticEnsemble {
    /// 100 pages, change rates in `[0.1, 1]`, request rates in `[0.5, 1.5]`.
    pub fn desk_default() -> Self {
        SyntheticEnsemble::Uniform {
            pages: 100,
            xi_min: 0.1,
            xi_max: 1.0,
            zeta_lo: 0.5,
            zeta_hi: 1.5,
        }
    }

    /// Like [`Self::desk_default`] but with heavy-tailed request rates
    /// (lognormal, sigma 2), under which some pages are worth far more than
    /// others.
    pub fn desk_heavy_tailed() -> Self {
        SyntheticEnsemble::LogNormal {
            pages: 100,
            xi_min: 0.1,
            xi_max: 1.0,
            sigma: 2.0,
        }
    }

    pub fn pages(&self) -> usize {
        match *self {
            SyntheticEnsemble::Uniform { pages, .. }
            | SyntheticEnsemble::LogNormal { pages, .. } => pages,
        }
    }

    pub fn sample<T: Scalar>(&self, seed: u64) -> Result<PageEnsemble<T>> {
        let (pages, xi_min, xi_max) = match *self {
            SyntheticEnsemble::Uniform {
                pages,
                xi_min,
                xi_max,
                ..
            }
            | SyntheticEnsemble::LogNormal {
                pages,
                xi_min,
                xi_max,
                ..
            } => (pages, xi_min, xi_max),
        };
        if pages == 0 {
            return Err(Error::invalid("synthetic ensemble needs at least one page"));
        }
        if !(xi_min > 0.0 && xi_min <= xi_max && xi_max.is_finite()) {
            return Err(Error::invalid(format!(
                "bad rate bounds [{xi_min}, {xi_max}]"
            )));
        }
        let mut rng = stream_rng(seed, 0, Stream::Aux(u32::MAX));
        let xi_dist =
            Uniform::new_inclusive(xi_min, xi_max).map_err(|e| Error::invalid(e.to_string()))?;
        let xi: Vec<f64> = (0..pages).map(|_| xi_dist.sample(&mut rng)).collect();
        let zeta: Vec<f64> = match *self {
            SyntheticEnsemble::Uniform {
                zeta_lo, zeta_hi, ..
            } => {
                if !(zeta_lo > 0.0 && zeta_lo <= zeta_hi) {
                    return Err(Error::invalid(format!(
                        "bad request-rate range [{zeta_lo}, {zeta_hi}]"
                    )));
                }
                let d = Uniform::new_inclusive(zeta_lo, zeta_hi)
                    .map_err(|e| Error::invalid(e.to_string()))?;
                (0..pages).map(|_| d.sample(&mut rng)).collect()
            }
            SyntheticEnsemble::LogNormal { sigma, .. } => {
                let d = LogNormal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
                (0..pages)
                    .map(|_| d.sample(&mut rng).max(f64::MIN_POSITIVE))
                    .collect()
            }
        };
        PageEnsemble::new(
            xi.into_iter().map(T::lit).collect(),
            zeta.into_iter().map(T::lit).collect(),
            T::lit(xi_min),
            T::lit(xi_max),
        )
    }
}
