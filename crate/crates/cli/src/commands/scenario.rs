use std::fs;

use blockreduce_core::scenario::{Scenario, BUILTIN};
use log::info;

use crate::args::ScenarioArgs;
use crate::error::CliError;
use crate::output::OutDir;

pub fn scenario(args: &ScenarioArgs) -> Result<(), CliError> {
    let (scenario, config) = match (&args.name, &args.common.config) {
        (Some(name), None) => {
            let s = Scenario::builtin(name)
                .map_err(|e| CliError::Config(format!("{e}; bundled: {}", BUILTIN.join(", "))))?;
            (s, None)
        }
        (None, Some(path)) => {
            let bytes = fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let text = String::from_utf8_lossy(&bytes);
            let s = Scenario::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            (s, Some((path.clone(), bytes)))
        }
        _ => return Err(CliError::Config("give either a bundled scenario name or --config".into())),
    };
    let report = scenario.run().map_err(|e| CliError::Config(e.to_string()))?;
    for o in &report.outcomes {
        let mark = if o.passed { "ok  " } else { "FAIL" };
        println!("{mark} after {:<6} {:<10} {}: {}", o.after, o.replica, o.check, o.detail);
    }
    info!("scenario {} ran in {:?}", report.name, report.elapsed);
    let mut out = OutDir::create(&args.common.out)?;
    out.json("scenario.json", &report)?;
    out.manifest("scenario", config.as_ref().map(|(p, b)| (p.as_path(), b.as_slice())), &[])?;
    if report.passed() {
        println!("scenario {}: passed", report.name);
        Ok(())
    } else {
        Err(CliError::ScenarioFailed(report.name.clone()))
    }
}
