use blockreduce_core::analytics::experiments::{scaling_sweep, SweepConfig};

use super::in_pool;
use crate::args::SweepArgs;
use crate::error::CliError;
use crate::output::{read_config, require_config, OutDir};

pub fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let path = require_config(&args.common.config, "scaling-sweep")?;
    let (mut cfg, bytes): (SweepConfig, _) = read_config(&path)?;
    if !args.common.seeds.is_empty() {
        cfg.seeds = args.common.seeds.clone();
    }
    if cfg.qs.first() != Some(&1) || cfg.seeds.is_empty() {
        return Err(CliError::Config("qs must start at 1 and at least one seed is needed".into()));
    }
    let parallel = args.common.parallel > 1;
    let report = in_pool(args.common.parallel, || scaling_sweep(&cfg, parallel))?
        .map_err(|e| CliError::Config(e.to_string()))?;

    println!("{:>4} {:>10} {:>10} {:>12} {:>16} {:>8}", "q", "delta", "eff", "aggregate", "ratio", "model");
    for p in &report.points {
        let model = p.model_ratio.map_or("-".to_string(), |m| format!("{m:.3}"));
        println!(
            "{:>4} {:>10.4} {:>10.4} {:>12.4} {:>9.3} ± {:<4.3} {:>8}",
            p.q, p.delta, p.efficiency, p.aggregate.mean, p.ratio.mean, p.ratio.sigma, model
        );
    }
    println!(
        "superlinear: {}  ratio nondecreasing: {}",
        report.superlinear(),
        report.ratio_nondecreasing()
    );
    let mut out = OutDir::create(&args.common.out)?;
    out.csv("sweep.csv", &report.rows)?;
    out.json("summary.json", &report.points)?;
    out.manifest("scaling-sweep", Some((&path, &bytes)), &cfg.seeds)?;
    Ok(())
}
