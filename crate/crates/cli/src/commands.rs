//! The four subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use ruintail::dependence::{self, DependenceModel};
use ruintail::diagnostics;
use ruintail::distributions::DistributionSpec;
use ruintail::product_tail::{exact_two_point_fgm_tail, iterated_tail, mc_product_tail};
use ruintail::ruin::{self, RiskModelSpec};
use ruintail::stream;

use crate::config::{self, ProductTailConfig, RuinConfig, ValidateModelConfig, VerifyConfig};
use crate::output::{cell, config_sha256, csv_header, TOOL_VERSION};
use crate::{CliError, CommonArgs};

struct Loaded<T> {
    config: T,
    hash: String,
}

fn load<T: for<'de> serde::Deserialize<'de>>(args: &CommonArgs) -> Result<Loaded<T>, CliError> {
    let bytes = fs::read(&args.config)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", args.config.display())))?;
    Ok(Loaded {
        config: config::parse(&bytes)?,
        hash: config_sha256(&bytes),
    })
}

fn resolve_out(flag: &Option<PathBuf>, from_config: &Option<String>) -> Result<PathBuf, CliError> {
    flag.clone()
        .or_else(|| from_config.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::config("no output path: set `out` in the config or pass --out"))
}

fn sibling_json(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn product_tail(args: &CommonArgs) -> Result<(), CliError> {
    let Loaded { config, hash } = load::<ProductTailConfig>(args)?;
    let seed = args.seed.unwrap_or(config.seed);
    let out = resolve_out(&args.out, &config.out)?;
    let xs = config.x_grid.expand()?;

    let report = dependence::validate(&config.model, &config.loss, &config.discount);
    if !report.is_valid() {
        return Err(CliError::config(format!(
            "dependence model fails validity checks: {}",
            serde_json::to_string(&report).unwrap_or_default()
        )));
    }
    if config.with_exact_two_point {
        let expected = DistributionSpec::discrete(vec![(1.0, 0.5), (2.0, 0.5)])
            .expect("static two-point law");
        let is_fgm = matches!(config.model, DependenceModel::Fgm { .. });
        if config.product_index != 1 || !is_fgm || config.discount != expected {
            return Err(CliError::config(
                "with_exact_two_point needs product_index 1, an fgm model, and the \
                 two-point discount law on {1, 2} with equal weights",
            ));
        }
    }

    let mut rows = String::from("x,asym,asym_abs_err,asym_method,exact,mc,mc_se,mc_ci_lo,mc_ci_hi\n");
    let mut rng = stream::master(seed);
    for &x in &xs {
        let tv = iterated_tail(
            &config.loss,
            &config.discount,
            &config.model,
            config.product_index,
            x,
        )?;
        let exact = if config.with_exact_two_point {
            Some(exact_two_point_fgm_tail(
                &config.loss,
                config.model.theta(),
                x,
            )?)
        } else {
            None
        };
        let mc = if config.with_mc {
            Some(mc_product_tail(
                &config.model,
                &config.loss,
                &config.discount,
                config.product_index,
                x,
                config.mc_paths,
                &mut rng,
            )?)
        } else {
            None
        };
        rows.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            x,
            tv.value,
            tv.abs_error,
            tv.method,
            cell(exact),
            cell(mc.map(|m| m.p_hat)),
            cell(mc.map(|m| m.std_err)),
            cell(mc.map(|m| m.ci95.0)),
            cell(mc.map(|m| m.ci95.1)),
        ));
    }
    fs::write(&out, csv_header(&hash, seed) + &rows)?;
    Ok(())
}

pub fn ruin(args: &CommonArgs, chunks_flag: Option<u32>) -> Result<(), CliError> {
    let Loaded { config, hash } = load::<RuinConfig>(args)?;
    let seed = args.seed.unwrap_or(config.seed);
    let chunks = chunks_flag.unwrap_or(config.chunks);
    let out = resolve_out(&args.out, &config.out)?;
    let xs = config.x_grid.expand()?;

    let spec = RiskModelSpec::new(
        config.loss.clone(),
        config.discount.clone(),
        config.model.clone(),
        config.horizon,
    )?;
    let rows = ruin::compare_ruin(&spec, &xs, config.paths, seed, chunks)?;

    let mut csv =
        String::from("x,n,psi_hat,std_err,ci_lo,ci_hi,asym_sum,ratio,ratio_se,paths,seed\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.x,
            r.n,
            r.psi_hat,
            r.std_err,
            r.ci95.0,
            r.ci95.1,
            r.asym_sum,
            r.ratio,
            r.ratio_se,
            r.paths,
            r.seed
        ));
    }
    fs::write(&out, csv_header(&hash, seed) + &csv)?;

    let summary = json!({
        "tool": format!("ruintail {TOOL_VERSION}"),
        "config_sha256": hash,
        "seed": seed,
        "horizon": config.horizon,
        "paths": config.paths,
        "rows": rows.iter().map(|r| json!({
            "x": r.x,
            "psi_hat": r.psi_hat,
            "asym_sum": r.asym_sum,
            "ratio": r.ratio,
            "ratio_se": r.ratio_se,
            "ci_covers_asym_sum": r.ci95.0 <= r.asym_sum && r.asym_sum <= r.ci95.1,
            "trigger_histogram": r.trigger_histogram,
        })).collect::<Vec<_>>(),
    });
    fs::write(
        sibling_json(&out),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )?;
    Ok(())
}

pub fn verify(args: &CommonArgs) -> Result<(), CliError> {
    let Loaded { config, hash } = load::<VerifyConfig>(args)?;
    let seed = args.seed.unwrap_or(config.seed);
    let out = resolve_out(&args.out, &config.out)?;
    if config.probes.is_empty() {
        return Err(CliError::config("verify config lists no probes"));
    }

    let mut csv = String::from("probe,x,ratio,target,deviation\n");
    let mut summary = serde_json::Map::new();

    if let Some(p) = &config.probes.long_tail {
        let xs = p.x_grid.expand()?;
        let pts = diagnostics::long_tail_ratio(&p.spec, p.gamma, p.t, &xs)?;
        for pt in &pts {
            csv.push_str(&format!(
                "long_tail,{},{},{},{}\n",
                pt.x, pt.ratio, pt.target, pt.deviation
            ));
        }
        let devs: Vec<f64> = pts.iter().map(|pt| pt.deviation).collect();
        summary.insert("long_tail".into(), trend_summary(&devs, p.max_final_deviation));
    }

    if let Some(p) = &config.probes.convolution {
        let xs = p.x_grid.expand()?;
        let pts = diagnostics::convolution_tail_ratio(&p.spec, p.gamma, &xs, p.oracle_budget)?;
        for pt in &pts {
            csv.push_str(&format!(
                "convolution,{},{},{},{}\n",
                pt.x,
                pt.ratio,
                pt.target,
                (pt.ratio / pt.target - 1.0).abs()
            ));
        }
        let devs: Vec<f64> = pts
            .iter()
            .map(|pt| (pt.ratio / pt.target - 1.0).abs())
            .collect();
        summary.insert("convolution".into(), trend_summary(&devs, p.rel_band));
    }

    if let Some(p) = &config.probes.tail_domination {
        let xs = p.x_grid.expand()?;
        let report = dependence::validate(&p.model, &p.loss, &p.discount);
        if !report.is_valid() {
            return Err(CliError::config("tail_domination: model fails validity checks"));
        }
        // Evaluate the product tail up front so numeric failures surface
        // as exit code 3 instead of vanishing inside the closure.
        let mut product_values = std::collections::HashMap::new();
        for &x in &xs {
            let tv = ruintail::product_tail::h_integral_tail(&p.loss, &p.discount, &p.model, x)?;
            product_values.insert(x.to_bits(), tv.value);
        }
        let product = move |x: f64| product_values[&x.to_bits()];
        let report = diagnostics::tail_domination_ratio(&p.discount, product, p.b, &xs)?;
        for pt in &report.points {
            csv.push_str(&format!(
                "tail_domination,{},{},0,{}\n",
                pt.x, pt.ratio, pt.ratio
            ));
        }
        let devs: Vec<f64> = report.points.iter().map(|pt| pt.ratio).collect();
        let mut entry = trend_summary(&devs, f64::INFINITY);
        // Bounded discount laws satisfy the condition identically.
        if report.bounded_support {
            entry["pass"] = json!(true);
            entry["note"] = json!(report.note);
        }
        summary.insert("tail_domination".into(), entry);
    }

    if let Some(p) = &config.probes.product_class {
        let xs = p.x_grid.expand()?;
        let vreport = dependence::validate(&p.model, &p.loss, &p.discount);
        if !vreport.is_valid() {
            return Err(CliError::config("product_class: model fails validity checks"));
        }
        let report = diagnostics::verify_product_class(
            &p.loss, &p.discount, &p.model, p.gamma, p.t, &xs,
        )?;
        for pt in &report.points {
            csv.push_str(&format!(
                "product_class,{},{},{},{}\n",
                pt.x, pt.ratio, pt.target, pt.deviation
            ));
        }
        let devs: Vec<f64> = report.points.iter().map(|pt| pt.deviation).collect();
        let mut entry = trend_summary(&devs, p.max_final_deviation);
        entry["gamma_product"] = json!(report.gamma_product);
        summary.insert("product_class".into(), entry);
    }

    fs::write(&out, csv_header(&hash, seed) + &csv)?;
    let doc = json!({
        "tool": format!("ruintail {TOOL_VERSION}"),
        "config_sha256": hash,
        "seed": seed,
        "probes": serde_json::Value::Object(summary),
        "note": "finite-grid trends are evidence, not proof, of asymptotic class membership",
    });
    fs::write(
        sibling_json(&out),
        serde_json::to_string_pretty(&doc).expect("summary serializes") + "\n",
    )?;
    Ok(())
}

/// {pass, max_dev, trend} for a deviation sequence: the trend is
/// decreasing when every step shrinks, and the probe passes when the
/// trend holds and the final deviation clears the threshold.
fn trend_summary(devs: &[f64], max_final: f64) -> serde_json::Value {
    let decreasing = devs.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let last = devs.last().copied().unwrap_or(f64::NAN);
    let max_dev = devs.iter().copied().fold(0.0f64, f64::max);
    json!({
        "pass": decreasing && last <= max_final,
        "max_dev": max_dev,
        "final_dev": last,
        "trend": if decreasing { "decreasing" } else { "not_decreasing" },
    })
}

pub fn validate_model(args: &CommonArgs) -> Result<(), CliError> {
    let Loaded { config, hash } = load::<ValidateModelConfig>(args)?;
    let seed = args.seed.unwrap_or(config.seed);
    let report = dependence::validate(&config.model, &config.loss, &config.discount);
    let doc = json!({
        "tool": format!("ruintail {TOOL_VERSION}"),
        "config_sha256": hash,
        "seed": seed,
        "valid": report.is_valid(),
        "report": report,
    });
    let rendered = serde_json::to_string_pretty(&doc).expect("report serializes") + "\n";
    print!("{rendered}");
    if let Some(out) = args
        .out
        .clone()
        .or_else(|| config.out.as_ref().map(PathBuf::from))
    {
        fs::write(out, rendered)?;
    }
    Ok(())
}
