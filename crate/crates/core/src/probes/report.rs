//! Biased-example ratios with optional bootstrap bounds.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BiasFlagSet, BiasTag, ProbeError, Result};
use crate::dataset::QADataset;

/// `k` subsets of `s` examples each, drawn without replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bootstrap {
    pub k: usize,
    pub s: usize,
    pub seed: u64,
}

impl Default for Bootstrap {
    fn default() -> Self {
        Self { k: 10, s: 100, seed: 0 }
    }
}

impl std::str::FromStr for Bootstrap {
    type Err = ProbeError;

    /// `k,s,seed`.
    fn from_str(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        let bad = || ProbeError::InvalidBootstrap(spec.to_string());
        if parts.len() != 3 {
            return Err(bad());
        }
        Ok(Self {
            k: parts[0].parse().map_err(|_| bad())?,
            s: parts[1].parse().map_err(|_| bad())?,
            seed: parts[2].parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapBounds {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRatio {
    pub probe: BiasTag,
    pub flagged: usize,
    /// `100 * flagged / n`.
    pub ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub dataset: String,
    pub n: usize,
    pub probes: Vec<ProbeRatio>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<Bootstrap>,
}

impl BiasReport {
    pub fn ratio(&self, tag: BiasTag) -> Option<f64> {
        self.probes.iter().find(|p| p.probe == tag).map(|p| p.ratio)
    }
}

fn percent(count: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        (100 * count) as f64 / n as f64
    }
}

/// Ratios of flagged examples for each tag. With a bootstrap spec the same
/// `k` subsets are used for every tag.
pub fn bias_report(
    ds: &QADataset,
    flags: &BiasFlagSet,
    tags: &[BiasTag],
    bootstrap: Option<Bootstrap>,
) -> Result<BiasReport> {
    flags.validate_against(ds)?;
    let n = ds.len();
    let subsets = match bootstrap {
        None => None,
        Some(b) => {
            if b.k == 0 || b.s == 0 {
                return Err(ProbeError::InvalidBootstrap(format!("k={} s={}", b.k, b.s)));
            }
            if b.s > n {
                return Err(ProbeError::SubsetTooLarge { s: b.s, n });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(b.seed);
            let subsets: Vec<Vec<usize>> = (0..b.k).map(|_| sample(&mut rng, n, b.s).into_vec()).collect();
            Some(subsets)
        }
    };
    let probes = tags
        .iter()
        .map(|&tag| {
            let hit: Vec<bool> = ds.iter().map(|e| flags.has(&e.qid, tag)).collect();
            let flagged = hit.iter().filter(|&&h| h).count();
            let bootstrap = subsets.as_ref().map(|subsets| {
                let counts: Vec<usize> = subsets.iter().map(|s| s.iter().filter(|&&i| hit[i]).count()).collect();
                let s = subsets[0].len();
                let total: usize = counts.iter().sum();
                BootstrapBounds {
                    mean: percent(total, s * subsets.len()),
                    min: percent(*counts.iter().min().expect("k > 0"), s),
                    max: percent(*counts.iter().max().expect("k > 0"), s),
                }
            });
            ProbeRatio {
                probe: tag,
                flagged,
                ratio: percent(flagged, n),
                bootstrap,
            }
        })
        .collect();
    Ok(BiasReport {
        dataset: ds.name.clone(),
        n,
        probes,
        bootstrap,
    })
}
