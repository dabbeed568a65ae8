use std::fs::File;
use std::io::{self, BufWriter, Write};

use blockreduce_core::analytics::{measure, RunMetrics, SettlementStats};
use blockreduce_core::sim::{run, SimConfig, Trace, TraceEvent};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::SimulateArgs;
use crate::error::CliError;
use crate::output::{read_config, require_config, OutDir};

/// Events kept before the first violation in a violation dump.
const SLICE_EVENTS: usize = 500;

#[derive(Debug, Serialize)]
struct MetricsRow {
    seed: u64,
    chain: String,
    order: usize,
    blocks_found: usize,
    blocks_canonical: usize,
    honest_canonical: usize,
    found_rate: f64,
    effective_rate: f64,
    efficiency: f64,
    honest_efficiency: f64,
    network_delay: f64,
    mean_spread: f64,
}

#[derive(Debug, Serialize)]
struct SettlementRow {
    seed: u64,
    injected: usize,
    committed: usize,
    cross_chain: usize,
    settled: usize,
    commit_mean: f64,
    commit_p90: f64,
    settle_mean: f64,
    settle_p90: f64,
}

impl SettlementRow {
    fn new(seed: u64, s: &SettlementStats) -> Self {
        SettlementRow {
            seed,
            injected: s.injected,
            committed: s.committed,
            cross_chain: s.cross_chain,
            settled: s.settled,
            commit_mean: s.commit_latency.mean,
            commit_p90: s.commit_latency.p90,
            settle_mean: s.settle_latency.mean,
            settle_p90: s.settle_latency.p90,
        }
    }
}

#[derive(Debug, Serialize)]
struct CheckSummary {
    checkpoints: u64,
    comparisons: u64,
    divergences: usize,
    conservation_violations: usize,
    coupling_violations: usize,
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    seed: u64,
    end_time: f64,
    drained: bool,
    blocks: usize,
    transactions: usize,
    checks: CheckSummary,
    metrics: &'a RunMetrics,
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let path = require_config(&args.common.config, "simulate")?;
    let (base, bytes): (SimConfig, _) = read_config(&path)?;
    let seeds = if args.common.seeds.is_empty() { vec![base.seed] } else { args.common.seeds.clone() };
    let configs: Vec<SimConfig> = seeds
        .iter()
        .map(|&seed| {
            let mut c = base.clone();
            c.seed = seed;
            c.record_events |= args.trace;
            if args.no_check {
                c.checks.enabled = false;
            }
            c.validate().map_err(|e| CliError::Config(e.to_string()))?;
            Ok(c)
        })
        .collect::<Result<_, CliError>>()?;

    let mut out = OutDir::create(&args.common.out)?;
    let traces = in_pool(args.common.parallel, || {
        configs.par_iter().map(|c| run(c).map_err(|e| CliError::Config(e.to_string()))).collect::<Result<Vec<Trace>, _>>()
    })??;
    let metrics: Vec<RunMetrics> = traces.iter().map(measure).collect();

    let mut rows = Vec::new();
    for m in &metrics {
        for c in &m.chains {
            rows.push(MetricsRow {
                seed: m.seed,
                chain: c.chain.to_string(),
                order: c.chain.order(),
                blocks_found: c.blocks_found,
                blocks_canonical: c.blocks_canonical,
                honest_canonical: c.honest_canonical,
                found_rate: c.found_rate,
                effective_rate: c.effective_rate,
                efficiency: c.efficiency,
                honest_efficiency: c.honest_efficiency,
                network_delay: c.network_delay,
                mean_spread: c.mean_spread,
            });
        }
    }
    out.csv("metrics.csv", &rows)?;
    let settlement: Vec<SettlementRow> = metrics.iter().map(|m| SettlementRow::new(m.seed, &m.settlement)).collect();
    out.csv("settlement.csv", &settlement)?;
    let summary: Vec<RunSummary> = traces
        .iter()
        .zip(&metrics)
        .map(|(t, m)| RunSummary {
            seed: t.seed,
            end_time: t.end_time,
            drained: t.drained,
            blocks: t.blocks.len(),
            transactions: t.transactions.len(),
            checks: CheckSummary {
                checkpoints: t.checks.checkpoints,
                comparisons: t.checks.comparisons,
                divergences: t.checks.divergences.len(),
                conservation_violations: t.checks.conservation.len(),
                coupling_violations: t.checks.coupling.len(),
            },
            metrics: m,
        })
        .collect();
    out.json("summary.json", &summary)?;

    if args.trace {
        for t in &traces {
            let name = format!("trace-{}.jsonl", t.seed);
            let mut w = LineLimit::new(BufWriter::new(File::create(out.path(&name))?), args.trace_limit);
            t.write_jsonl(&mut w)?;
            w.flush()?;
            if w.dropped {
                warn!("{name} truncated at {} lines", args.trace_limit);
            }
        }
    }

    let mut failed = Vec::new();
    for (t, cfg) in traces.iter().zip(&configs) {
        if t.checks.is_clean() {
            continue;
        }
        failed.push(t.seed);
        out.json(&format!("violation-{}.json", t.seed), &t.checks)?;
        let first = first_violation_time(t);
        let events = if cfg.record_events {
            t.events.clone()
        } else {
            let mut c = cfg.clone();
            c.record_events = true;
            run(&c).map_err(|e| CliError::Config(e.to_string()))?.events
        };
        let slice = trace_slice(&events, first);
        let mut w = BufWriter::new(File::create(out.path(&format!("violation-{}.jsonl", t.seed)))?);
        for e in slice {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    out.manifest("simulate", Some((&path, &bytes)), &seeds)?;
    for m in &metrics {
        info!("seed {}: {} chains measured", m.seed, m.chains.len());
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(format!("checks failed for seeds {failed:?}; see violation-<seed>.json")))
    }
}

fn first_violation_time(t: &Trace) -> f64 {
    let c = &t.checks;
    c.divergences
        .iter()
        .map(|d| d.time)
        .chain(c.conservation.iter().map(|v| v.time))
        .chain(c.coupling.iter().map(|v| v.time))
        .fold(f64::INFINITY, f64::min)
}

/// The last events at or before `time`.
fn trace_slice(events: &[TraceEvent], time: f64) -> &[TraceEvent] {
    let end = events.partition_point(|e| e.time() <= time);
    &events[end.saturating_sub(SLICE_EVENTS)..end]
}

/// Runs `f` on a pool of `threads` workers.
pub fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Writer that keeps only the first `limit` lines.
struct LineLimit<W> {
    inner: W,
    left: usize,
    dropped: bool,
}

impl<W: Write> LineLimit<W> {
    fn new(inner: W, limit: usize) -> Self {
        LineLimit { inner, left: limit, dropped: false }
    }
}

impl<W: Write> Write for LineLimit<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        if self.left == 0 {
            self.dropped |= !buf.is_empty();
            return Ok(buf.len());
        }
        let mut end = buf.len();
        let mut lines = 0;
        for (i, b) in buf.iter().enumerate() {
            if *b == b'\n' {
                lines += 1;
                if lines == self.left {
                    end = i + 1;
                    break;
                }
            }
        }
        self.inner.write_all(&buf[..end])?;
        self.left -= lines;
        self.dropped |= end < buf.len();
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_limit_keeps_whole_lines() {
        let mut w = LineLimit::new(Vec::new(), 2);
        w.write_all(b"a\nb\nc\n").unwrap();
        w.write_all(b"d\n").unwrap();
        assert_eq!(w.inner, b"a\nb\n");
        assert!(w.dropped);
    }
}
