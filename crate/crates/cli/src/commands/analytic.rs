use blockreduce_core::analytics::{c_d, efficiency, scaling_curve, ModelParams, ScalingPoint};
use serde::{Deserialize, Serialize};

use crate::args::AnalyticArgs;
use crate::error::CliError;
use crate::output::{read_config, require_config, OutDir};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalyticConfig {
    model: ModelParams,
    #[serde(default = "default_qs")]
    qs: Vec<u32>,
    /// Values of `lambda * Delta` for the efficiency table.
    #[serde(default = "default_loads")]
    loads: Vec<f64>,
}

fn default_qs() -> Vec<u32> {
    vec![1, 2, 4, 8]
}

fn default_loads() -> Vec<f64> {
    vec![0.05, 0.2, 1.0]
}

#[derive(Debug, Serialize)]
struct EfficiencyRow {
    load: f64,
    efficiency: f64,
    honest_efficiency: f64,
}

#[derive(Debug, Serialize)]
struct AnalyticReport<'a> {
    params: &'a ModelParams,
    c_d: f64,
    delta_1: f64,
    root_efficiency: f64,
    efficiency: Vec<EfficiencyRow>,
    scaling: &'a [ScalingPoint],
}

pub fn analytic(args: &AnalyticArgs) -> Result<(), CliError> {
    let path = require_config(&args.common.config, "analytic")?;
    let (cfg, bytes): (AnalyticConfig, _) = read_config(&path)?;
    let model_err = |e: blockreduce_core::analytics::ModelError| CliError::Config(e.to_string());
    let p = &cfg.model;
    p.validate().map_err(model_err)?;
    let cd = c_d(p.d).map_err(model_err)?;
    let delta_1 = p.delta_1().map_err(model_err)?;
    let scaling = scaling_curve(p, &cfg.qs).map_err(model_err)?;
    let table: Vec<EfficiencyRow> = cfg
        .loads
        .iter()
        .map(|&load| EfficiencyRow {
            load,
            efficiency: efficiency(load, 1.0, 0.0),
            honest_efficiency: efficiency(load, 1.0, p.beta),
        })
        .collect();

    println!("C_d = {cd:.6}  (d = {})", p.d);
    println!("Delta_1 bound = {delta_1:.6}  (n = {}, delta = {})", p.n, p.delta);
    println!("root efficiency = {:.6}", efficiency(p.lambda_1, delta_1, p.beta));
    println!("{:>10} {:>12} {:>12}", "lambda*D", "efficiency", "honest");
    for r in &table {
        println!("{:>10} {:>12.6} {:>12.6}", r.load, r.efficiency, r.honest_efficiency);
    }
    println!("{:>4} {:>12} {:>12} {:>12} {:>8}", "q", "Delta_r", "lambda_r", "aggregate", "ratio");
    for s in &scaling {
        println!(
            "{:>4} {:>12.6} {:>12.6} {:>12.6} {:>8.4}",
            s.q, s.delta_r_bound, s.lambda_r, s.aggregate, s.ratio
        );
    }

    let mut out = OutDir::create(&args.common.out)?;
    out.json(
        "analytic.json",
        &AnalyticReport {
            params: p,
            c_d: cd,
            delta_1,
            root_efficiency: efficiency(p.lambda_1, delta_1, p.beta),
            efficiency: table,
            scaling: &scaling,
        },
    )?;
    out.csv("scaling.csv", &scaling)?;
    out.manifest("analytic", Some((&path, &bytes)), &[])?;
    Ok(())
}
