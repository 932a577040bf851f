use super::config::ExperimentConfig;
use crate::diagnostics::{
    acf, ess, mode_occupancy, sinkhorn_distance, subsample, EmpiricalMeasure,
};
use crate::model::TargetDistribution;
use crate::samplers::{run_chain_indexed, Chain};
use crate::tuning::tune_rahmc;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

/// 17 significant digits; enough to round-trip an f64 exactly.
fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn write_chain_csv(path: &Path, chain: &Chain) -> Result<()> {
    let mut out = String::new();
    out.push_str("iter");
    for j in 1..=chain.dim() {
        out.push_str(&format!(",q{j}"));
    }
    out.push_str(",accepted,H_current,H_proposed\n");
    for i in 0..chain.len() {
        out.push_str(&format!("{}", i + 1));
        for j in 0..chain.dim() {
            out.push(',');
            out.push_str(&fmt_float(chain.samples[(i, j)]));
        }
        out.push_str(&format!(
            ",{},{},{}\n",
            if chain.accepted[i] { 1 } else { 0 },
            fmt_float(chain.h_current[i]),
            fmt_float(chain.h_proposed[i])
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(serde_json::to_string_pretty(value).unwrap().as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

struct TimedChain {
    chain: Chain,
    wall_seconds: f64,
}

fn run_chains(
    config: &ExperimentConfig,
    sampler: &super::config::SamplerSection,
    target: &dyn TargetDistribution,
    seed: u64,
) -> Result<Vec<TimedChain>> {
    let initial = match &config.run.initial {
        Some(values) => {
            if values.len() != target.dim() {
                return Err(Error::Config(format!(
                    "run.initial has length {}, target dimension is {}",
                    values.len(),
                    target.dim()
                )));
            }
            Some(DVector::from_row_slice(values))
        }
        None => None,
    };
    let sampler_config = sampler.sampler_config(target.dim())?;
    let tuner = sampler.tuner_settings();

    (0..config.run.chains)
        .into_par_iter()
        .map(|idx| {
            let start = Instant::now();
            let chain = run_chain_indexed(
                initial.as_ref(),
                config.run.iterations,
                config.run.warmup,
                seed,
                idx as u64,
                target,
                &sampler_config,
                tuner.as_ref(),
            )?;
            Ok(TimedChain {
                chain,
                wall_seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

fn chain_summaries(chains: &[TimedChain]) -> Vec<Value> {
    chains
        .iter()
        .map(|tc| {
            json!({
                "chain_index": tc.chain.chain_index,
                "epsilon": tc.chain.params.epsilon,
                "gamma": tc.chain.params.gamma,
                "steps": tc.chain.params.steps,
                "acceptance_rate": tc.chain.acceptance_rate,
                "wall_seconds": tc.wall_seconds,
            })
        })
        .collect()
}

/// `sample`: run chains, write one CSV per chain plus run metadata.
pub fn cmd_sample(config: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<()> {
    let sampler = config
        .sampler
        .as_ref()
        .ok_or_else(|| Error::Config("a [sampler] section is required for sample".into()))?;
    let target = config.build_target()?;
    fs::create_dir_all(out_dir)?;

    let start = Instant::now();
    let chains = run_chains(config, sampler, target.as_ref(), seed)?;
    for tc in &chains {
        let path = out_dir.join(format!("chain_{}.csv", tc.chain.chain_index));
        write_chain_csv(&path, &tc.chain)?;
    }

    let first = &chains[0].chain;
    let acceptance =
        chains.iter().map(|c| c.chain.acceptance_rate).sum::<f64>() / chains.len() as f64;
    let metadata = json!({
        "seed": seed,
        "target": target.name(),
        "sampler": first.kind.to_string(),
        "epsilon": first.params.epsilon,
        "gamma": first.params.gamma,
        "steps": first.params.steps,
        "acceptance_rate": acceptance,
        "n": config.run.iterations,
        "warmup": config.run.warmup,
        "chains": config.run.chains,
        "wall_seconds": start.elapsed().as_secs_f64(),
        "per_chain": chain_summaries(&chains),
    });
    write_json(&out_dir.join("run.json"), &metadata)?;
    println!("wrote {} chains to {}", chains.len(), out_dir.display());
    Ok(())
}

/// `tune`: run the dual-averaging warm-up and emit the tuned parameters.
pub fn cmd_tune(config: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<()> {
    let sampler = config
        .sampler
        .as_ref()
        .ok_or_else(|| Error::Config("a [sampler] section is required for tune".into()))?;
    let target = config.build_target()?;
    let delta = sampler.delta.unwrap_or(0.6);
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!("sampler.delta must lie in (0, 1), got {delta}")));
    }
    let sim_length = sampler.sim_length.unwrap_or(15.0);
    let warmup = config.run.warmup.max(1);
    let kinetic = crate::dynamics::KineticSpec::standard(target.dim());
    let initial = config.run.initial.as_ref().map(|v| DVector::from_row_slice(v));

    let mut rng = crate::samplers::chain_rng(seed, 0);
    let tuned = match sampler.kind {
        crate::samplers::SamplerKind::Rahmc => tune_rahmc(
            target.as_ref(),
            &kinetic,
            initial.as_ref(),
            warmup,
            delta,
            sim_length,
            &mut rng,
        )?,
        crate::samplers::SamplerKind::Hmc => crate::tuning::tune_hmc(
            target.as_ref(),
            &kinetic,
            initial.as_ref(),
            warmup,
            delta,
            sim_length,
            &mut rng,
        )?,
    };

    let payload = json!({
        "epsilon": tuned.epsilon,
        "gamma": tuned.gamma,
        "L": tuned.steps,
        "delta": delta,
        "T": sim_length,
        "acceptance_during_warmup": tuned.warmup_acceptance,
        "epsilon0": tuned.epsilon0,
        "seed": seed,
        "target": target.name(),
        "kind": sampler.kind.to_string(),
    });
    fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("tuned.json"), &payload)?;
    println!("{}", serde_json::to_string_pretty(&payload).unwrap());
    Ok(())
}

fn pooled_samples(chains: &[TimedChain]) -> DMatrix<f64> {
    let n: usize = chains.iter().map(|c| c.chain.len()).sum();
    let d = chains[0].chain.dim();
    let mut out = DMatrix::zeros(n, d);
    let mut row = 0;
    for tc in chains {
        out.rows_mut(row, tc.chain.len())
            .copy_from(&tc.chain.samples);
        row += tc.chain.len();
    }
    out
}

/// `compare`: run each configured sampler and emit consolidated metrics.
pub fn cmd_compare(config: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<()> {
    if config.compare.is_empty() {
        return Err(Error::Config(
            "compare requires at least one [[compare]] sampler entry".into(),
        ));
    }
    let target = config.build_target()?;
    fs::create_dir_all(out_dir)?;
    let metrics = &config.metrics;

    // one ground-truth sample shared by every sampler entry
    let reference = if target.supports_exact_sampling() {
        let mut rng = crate::samplers::chain_rng(seed, u64::MAX);
        let points = target.exact_sample(&mut rng, metrics.reference_samples)?;
        Some(EmpiricalMeasure::uniform(points)?)
    } else {
        None
    };

    let mut entries = Vec::new();
    for (idx, sampler) in config.compare.iter().enumerate() {
        let label = sampler.label(idx);
        let start = Instant::now();
        let chains = run_chains(config, sampler, target.as_ref(), seed)?;
        let wall = start.elapsed().as_secs_f64();

        let sampler_dir = out_dir.join(&label);
        fs::create_dir_all(&sampler_dir)?;
        for tc in &chains {
            write_chain_csv(
                &sampler_dir.join(format!("chain_{}.csv", tc.chain.chain_index)),
                &tc.chain,
            )?;
        }

        let pooled = pooled_samples(&chains);
        let first = &chains[0].chain;
        let acceptance =
            chains.iter().map(|c| c.chain.acceptance_rate).sum::<f64>() / chains.len() as f64;
        let total_grads: f64 = chains
            .iter()
            .map(|c| (c.chain.len() + c.chain.warmup) as f64 * c.chain.params.steps as f64)
            .sum();

        let sinkhorn = match &reference {
            Some(reference) => {
                let drawn = EmpiricalMeasure::uniform(pooled.clone())?;
                let a = subsample(&drawn, metrics.subsample, seed ^ 0x5151)?;
                let b = subsample(reference, metrics.subsample, seed ^ 0x2e2e)?;
                let res = sinkhorn_distance(&a, &b, &metrics.sinkhorn_params())?;
                json!({
                    "w2": res.distance,
                    "converged": res.converged,
                    "iterations": res.iterations,
                    "lambda": res.lambda,
                })
            }
            None => json!({ "unavailable": "target has no exact sampler" }),
        };

        let occupancy = target.known_modes().filter(|m| m.len() > 1).map(|modes| {
            mode_occupancy(&pooled, &modes)
        });

        // series diagnostics are only meaningful on unimodal targets
        let unimodal = target.known_modes().map(|m| m.len() == 1).unwrap_or(false);
        let (acf_json, ess_json) = if unimodal {
            let xs = first.coordinate(0);
            let acf_res = acf(&xs, metrics.max_lag.min(xs.len() - 1))?;
            let ess_res = ess(&xs)?;
            (
                Some(json!(acf_res.rho)),
                Some(json!({ "ess": ess_res.ess, "degenerate": ess_res.degenerate })),
            )
        } else {
            (None, None)
        };

        entries.push(json!({
            "label": label,
            "kind": first.kind.to_string(),
            "epsilon": first.params.epsilon,
            "gamma": first.params.gamma,
            "steps": first.params.steps,
            "tuned": sampler.tune,
            "acceptance_rate": acceptance,
            "wall_seconds": wall,
            "seconds_per_gradient": wall / total_grads.max(1.0),
            "sinkhorn": sinkhorn,
            "mode_occupancy": occupancy,
            "acf_first_coordinate": acf_json,
            "ess_first_coordinate": ess_json,
            "per_chain": chain_summaries(&chains),
        }));
    }

    let payload = json!({
        "seed": seed,
        "target": target.name(),
        "n": config.run.iterations,
        "warmup": config.run.warmup,
        "chains": config.run.chains,
        "reference_samples": reference.as_ref().map(|r| r.len()),
        "samplers": entries,
    });
    write_json(&out_dir.join("compare.json"), &payload)?;
    println!("wrote comparison for {} samplers to {}", config.compare.len(), out_dir.display());
    Ok(())
}

/// `verify`: run the selected checks and emit the report array on stdout.
/// Returns the number of failed checks.
pub fn cmd_verify(checks: &[String], seed: u64, out_dir: Option<&Path>) -> Result<usize> {
    let reports = crate::verify::run_suite(checks, seed)?;
    for report in &reports {
        eprintln!(
            "{} {} ({:.2}s)",
            if report.pass { "PASS" } else { "FAIL" },
            report.name,
            report.runtime_seconds
        );
    }
    let payload = serde_json::to_value(&reports).unwrap();
    println!("{}", serde_json::to_string_pretty(&payload).unwrap());
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("verify.json"), &payload)?;
    }
    Ok(reports.iter().filter(|r| !r.pass).count())
}
