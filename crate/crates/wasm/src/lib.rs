//! Browser bindings for the static demo page in `www/`.
//!
//! Each export returns a JSON string; the plain-Rust `*_json` functions
//! behind them are what the native tests exercise.

use advsel_core::mechanisms::{play, MechanismConfig, MechanismKind, MechanismParams, Player};
use advsel_core::population::{population_cdf, sample_cdf};
use advsel_core::rng::Stream;
use advsel_core::simulation::{normal_population, run_comparison_on, summarize_ks, ExperimentConfig};
use advsel_core::stats::{all_stats, quantile_m};
use advsel_core::ExactStat;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn ratio(count: u64, denom: u64) -> f64 {
    ExactStat::new(count, denom).to_f64()
}

/// Population and quantile-sample CDFs on `n` normal draws.
pub fn quantile_cdf_overlay_json(n: usize, k: usize, seed: u32) -> Result<String, String> {
    let m = quantile_m(n, k).ok_or_else(|| format!("n = {n} is not (2m+1)·k for k = {k}"))?;
    let pop = normal_population(n, seed as u64).map_err(err)?;
    let out = advsel_core::mechanisms::quantile_outcome(&pop, k, m, Player::PlayerI).map_err(err)?;
    let fx = population_cdf(&pop);
    let fy = sample_cdf(&pop, &out.sample).map_err(err)?;
    let stats = all_stats(&pop, &out.sample).map_err(err)?;
    let values: Vec<f64> = (1..=n).map(|p| pop.value_at(p).unwrap_or(p as f64)).collect();
    Ok(json!({
        "n": n, "k": k, "m": m,
        "values": values,
        "fx": fx.counts.iter().map(|&c| ratio(c, fx.denominator)).collect::<Vec<_>>(),
        "fy": fy.counts.iter().map(|&c| ratio(c, fy.denominator)).collect::<Vec<_>>(),
        "positions": out.positions(),
        "stats": stats,
    })
    .to_string())
}

/// Per-mechanism KS summaries for the 972/12/40 comparison.
pub fn ks_comparison_json(reps: usize, seed: u32, n_star: usize) -> Result<String, String> {
    let mut config = ExperimentConfig::figure2(seed as u64, reps, false);
    if let Some(star) = config.mechanisms.iter_mut().find(|s| s.id == "random_n_star") {
        star.config.params.k = Some(n_star);
    }
    let pop = normal_population(config.n, config.seed).map_err(err)?;
    let records = run_comparison_on(&pop, &config).map_err(err)?;
    let ks: Vec<_> = config
        .mechanisms
        .iter()
        .map(|s| {
            let v: Vec<f64> = records
                .iter()
                .filter(|r| r.mechanism == s.id)
                .map(|r| r.ks.to_f64())
                .collect();
            json!({ "mechanism": s.id, "ks": v })
        })
        .collect();
    Ok(json!({ "summary": summarize_ks(&records), "ks": ks }).to_string())
}

/// One play of `mechanism` on a strict ranking of `n` items.
pub fn mechanism_outcome_json(
    mechanism: &str,
    n: usize,
    k: usize,
    c: usize,
    cutter: &str,
    seed: u32,
) -> Result<String, String> {
    let kind: MechanismKind = mechanism.parse().map_err(err)?;
    let cutter: Player = cutter.parse().map_err(err)?;
    let pop = advsel_core::Population::strict(n).map_err(err)?;
    let params = MechanismParams {
        k: Some(k),
        c: Some(c),
        cutter: Some(cutter),
        block_sizes: match kind {
            MechanismKind::CutAndChoose => Some(vec![n / k.max(1); k]),
            // Nested subsets need strictly increasing sizes.
            MechanismKind::OverlappingCutAndChoose => Some((1..=k).map(|j| j * n / k).collect()),
            _ => None,
        },
        ..Default::default()
    };
    let config = MechanismConfig::new(kind, params);
    let out = play(&pop, &config, &mut Stream::derive(seed as u64, "demo", 0)).map_err(err)?;
    let stats = all_stats(&pop, &out.sample).map_err(err)?;
    Ok(json!({ "positions": out.positions(), "stats": stats, "transcript": out.transcript }).to_string())
}

#[wasm_bindgen]
pub fn quantile_cdf_overlay(n: usize, k: usize, seed: u32) -> Result<String, JsError> {
    quantile_cdf_overlay_json(n, k, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ks_comparison(reps: usize, seed: u32, n_star: usize) -> Result<String, JsError> {
    ks_comparison_json(reps, seed, n_star).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn mechanism_outcome(
    mechanism: &str,
    n: usize,
    k: usize,
    c: usize,
    cutter: &str,
    seed: u32,
) -> Result<String, JsError> {
    mechanism_outcome_json(mechanism, n, k, c, cutter, seed).map_err(|e| JsError::new(&e))
}
