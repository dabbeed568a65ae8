//! Fixtures shared by the criterion benches.

use blockreduce_core::sim::SimConfig;

/// A three-order network with a transaction workload, sized so one run takes
/// a fraction of a second.
pub fn small_sim(duration: f64) -> SimConfig {
    let text = format!(
        r#"
duration = {duration:?}
hierarchy = {{ branching = [2, 2] }}
difficulty = {{ thresholds = [0.0625, 0.25, 1.0] }}
rates = {{ root = 0.25 }}

[network]
nodes = 20
degree = 4
delay = {{ kind = "lognormal", mean = 0.1, sigma = 0.5 }}

[observers]
count = 1

[workload]
rate = 2.0
assets_per_partition = 32
"#
    );
    toml::from_str(&text).expect("fixture config parses")
}
