use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{replicate_seed, with_workers};
use super::metrics::snr;
use crate::estimators::{
    interaction_covariance, non_interaction_covariance, select_k_interaction, select_k_non_interaction,
};
use crate::model::NoiseSpec;
use crate::simulate::generate;
use crate::{Error, Result, SimulationConfig};

/// Rank-selection experiment over a list of hidden-noise scales σ_W.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionGrid {
    pub base: SimulationConfig,
    pub sigma_w: Vec<f64>,
    pub replicates: usize,
    /// Upper bound on K̂; `None` uses ⌊min(n, m)/2⌋.
    pub k_star: Option<usize>,
    pub workers: usize,
}

impl KSelectionGrid {
    /// α = 0 noise profile and η = 0.5, with the given sample and response sizes.
    pub fn new(n: usize, m: usize, sigma_w: Vec<f64>, replicates: usize) -> Self {
        Self {
            base: SimulationConfig {
                n,
                m,
                eta_dep: 0.5,
                noise: NoiseSpec::Heteroscedastic { alpha: 0.0 },
                ..SimulationConfig::default()
            },
            sigma_w,
            replicates,
            k_star: None,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionRow {
    pub sigma_w: f64,
    pub snr_mean: f64,
    /// Per-replicate K̂ from the interaction spectra; `None` marks a failure.
    pub interaction: Vec<Option<usize>>,
    /// Per-replicate K̂ from the linear-only residual covariance.
    pub non_interaction: Vec<Option<usize>>,
    pub interaction_mode: Option<usize>,
    pub non_interaction_mode: Option<usize>,
}

impl KSelectionRow {
    /// Fraction of replicates whose interaction selector returned `k`.
    pub fn interaction_hit_rate(&self, k: usize) -> f64 {
        let hits = self.interaction.iter().filter(|v| **v == Some(k)).count();
        hits as f64 / self.interaction.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionReport {
    pub grid: KSelectionGrid,
    pub rows: Vec<KSelectionRow>,
}

/// Most frequent value; ties go to the smallest.
fn mode(values: &[Option<usize>]) -> Option<usize> {
    let mut counts: std::collections::BTreeMap<usize, usize> = Default::default();
    for v in values.iter().flatten() {
        *counts.entry(*v).or_default() += 1;
    }
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|&(_, c)| c == best).map(|(k, _)| k)
}

struct Draw {
    snr: f64,
    interaction: Option<usize>,
    non_interaction: Option<usize>,
}

fn run_one(grid: &KSelectionGrid, sigma_w: f64, replicate: usize) -> Result<Draw> {
    let mut cfg = grid.base.clone();
    cfg.sigma_w = sigma_w;
    cfg.seed = replicate_seed(grid.base.seed, sigma_w, replicate);
    let (data, truth) = generate(&cfg)?;
    let interaction = interaction_covariance(&data)
        .and_then(|cov| select_k_interaction(&data, &cov, grid.k_star))
        .ok();
    let non_interaction = non_interaction_covariance(&data)
        .and_then(|phi| select_k_non_interaction(&data, &phi, grid.k_star))
        .ok();
    Ok(Draw {
        snr: snr(&truth)?,
        interaction,
        non_interaction,
    })
}

pub fn run_k_selection(grid: &KSelectionGrid) -> Result<KSelectionReport> {
    if grid.replicates == 0 || grid.sigma_w.is_empty() {
        return Err(Error::InvalidConfig(
            "need at least one replicate and one sigma_w value".into(),
        ));
    }
    let jobs: Vec<(f64, usize)> = grid
        .sigma_w
        .iter()
        .flat_map(|&s| (0..grid.replicates).map(move |r| (s, r)))
        .collect();
    let draws: Vec<Result<Draw>> = with_workers(grid.workers, || {
        jobs.par_iter().map(|&(s, r)| run_one(grid, s, r)).collect()
    })?;
    let mut rows = Vec::new();
    for (i, &sigma_w) in grid.sigma_w.iter().enumerate() {
        let chunk = &draws[i * grid.replicates..(i + 1) * grid.replicates];
        let mut snr_sum = 0.0;
        let mut interaction = Vec::new();
        let mut non_interaction = Vec::new();
        for d in chunk {
            let d = match d {
                Ok(d) => d,
                Err(e) => return Err(Error::InvalidConfig(format!("sigma_w = {sigma_w}: {e}"))),
            };
            snr_sum += d.snr;
            interaction.push(d.interaction);
            non_interaction.push(d.non_interaction);
        }
        rows.push(KSelectionRow {
            sigma_w,
            snr_mean: snr_sum / grid.replicates as f64,
            interaction_mode: mode(&interaction),
            non_interaction_mode: mode(&non_interaction),
            interaction,
            non_interaction,
        });
    }
    Ok(KSelectionReport {
        grid: grid.clone(),
        rows,
    })
}

impl KSelectionReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sigma_w,replicate,snr_mean,interaction_k,non_interaction_k\n");
        for row in &self.rows {
            for (r, (a, b)) in row.interaction.iter().zip(&row.non_interaction).enumerate() {
                let show = |v: &Option<usize>| v.map(|k| k.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    crate::io::format_float(row.sigma_w),
                    r,
                    crate::io::format_float(row.snr_mean),
                    show(a),
                    show(b)
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_breaks_ties_low() {
        assert_eq!(mode(&[Some(3), Some(2), Some(3), Some(2)]), Some(2));
        assert_eq!(mode(&[None, Some(4)]), Some(4));
        assert_eq!(mode(&[None]), None);
    }

    #[test]
    fn selection_never_exceeds_bound() {
        let mut grid = KSelectionGrid::new(300, 25, vec![1.0], 3);
        grid.k_star = Some(2);
        let report = run_k_selection(&grid).unwrap();
        for row in &report.rows {
            for k in row.interaction.iter().chain(&row.non_interaction).flatten() {
                assert!(*k <= 2);
            }
        }
    }
}
