//! Summary tables computed from run logs alone.

use std::fmt::Write as _;

use super::log::RunLog;
use crate::error::{Error, Result};
use crate::optimizer::OptimizerConfig;

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Option<Stat> {
        let n = xs.len();
        if n == 0 {
            return None;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Stat { mean, std, n })
    }

    /// `"37.00 ± 0.00"`, with a trailing `†` for a single sample.
    pub fn fmt_fixed(&self) -> String {
        let dagger = if self.n == 1 { " †" } else { "" };
        format!("{:.2} ± {:.2}{dagger}", self.mean, self.std)
    }

    pub fn fmt_sci(&self) -> String {
        let dagger = if self.n == 1 { " †" } else { "" };
        format!("{:.3e} ± {:.1e}{dagger}", self.mean, self.std)
    }
}

/// `"1.73x"`.
pub fn fmt_speedup(x: f64) -> String {
    format!("{x:.2}x")
}

/// Runs of one optimizer, in seed order.
#[derive(Debug, Clone)]
pub struct Group<'a> {
    pub name: &'a str,
    pub config: &'a OptimizerConfig,
    pub runs: Vec<&'a RunLog>,
}

/// Groups logs by optimizer, keeping header order.
pub fn group(logs: &[RunLog]) -> Result<Vec<Group<'_>>> {
    if logs.is_empty() {
        return Err(Error::contract("no run logs"));
    }
    let mut sorted: Vec<&RunLog> = logs.iter().collect();
    sorted.sort_by(|a, b| {
        (a.header.optimizer_index, &a.header.optimizer, a.header.seed).cmp(&(
            b.header.optimizer_index,
            &b.header.optimizer,
            b.header.seed,
        ))
    });
    let mut groups: Vec<Group> = Vec::new();
    for log in sorted {
        match groups.last_mut() {
            Some(g) if g.name == log.header.optimizer => g.runs.push(log),
            _ => groups.push(Group {
                name: &log.header.optimizer,
                config: &log.header.optimizer_config,
                runs: vec![log],
            }),
        }
    }
    Ok(groups)
}

/// First evaluation with full-data loss `≤ threshold`, as `(step, epoch)`.
pub fn first_hit(log: &RunLog, threshold: f64) -> Option<(u64, u64)> {
    log.eval_series().find(|&(_, _, l)| l <= threshold).map(|(s, e, _)| (s, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtfRow {
    pub optimizer: String,
    pub kind: String,
    /// `(seed, first-hit step)` per run.
    pub hits: Vec<(u64, Option<u64>)>,
    pub steps: Option<Stat>,
    pub epochs: Option<Stat>,
    pub unreached: usize,
    /// This row's mean divided by the reference (first `cao`) row's mean.
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtfTable {
    pub threshold: f64,
    pub reference: Option<String>,
    pub rows: Vec<TtfRow>,
}

impl TtfTable {
    pub fn row(&self, optimizer: &str) -> Option<&TtfRow> {
        self.rows.iter().find(|r| r.optimizer == optimizer)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let reference = self.reference.as_deref().unwrap_or("-");
        let _ = writeln!(s, "# time to threshold {}", self.threshold);
        let _ = writeln!(s, "# speedup = optimizer mean / {reference} mean; † = single seed");
        let _ = writeln!(s);
        let _ = writeln!(s, "| optimizer | kind | first-hit step | first-hit epoch | reached | speedup |");
        let _ = writeln!(s, "|---|---|---|---|---|---|");
        for r in &self.rows {
            let total = r.hits.len();
            let steps = r.steps.map_or("unreached".to_string(), |x| x.fmt_fixed());
            let epochs = r.epochs.map_or("unreached".to_string(), |x| x.fmt_fixed());
            let speedup = r.speedup.map_or("-".to_string(), fmt_speedup);
            let _ = writeln!(
                s,
                "| {} | {} | {steps} | {epochs} | {}/{total} | {speedup} |",
                r.optimizer,
                r.kind,
                total - r.unreached
            );
        }
        s
    }
}

/// First-hit step and epoch per optimizer; unreached runs are excluded from
/// the means and counted.
pub fn time_to_threshold(logs: &[RunLog], threshold: f64) -> Result<TtfTable> {
    let groups = group(logs)?;
    let mut rows = Vec::new();
    for g in &groups {
        let mut hits = Vec::new();
        let mut steps = Vec::new();
        let mut epochs = Vec::new();
        for run in &g.runs {
            let h = first_hit(run, threshold);
            if let Some((s, e)) = h {
                steps.push(s as f64);
                epochs.push(e as f64);
            }
            hits.push((run.header.seed, h.map(|x| x.0)));
        }
        rows.push(TtfRow {
            optimizer: g.name.to_string(),
            kind: g.config.kind().to_string(),
            unreached: hits.len() - steps.len(),
            hits,
            steps: Stat::of(&steps),
            epochs: Stat::of(&epochs),
            speedup: None,
        });
    }
    let reference = rows.iter().find(|r| r.kind == "cao").cloned();
    if let Some(refrow) = &reference {
        if let Some(base) = refrow.steps.filter(|s| s.mean > 0.0) {
            for r in rows.iter_mut().filter(|r| r.optimizer != refrow.optimizer) {
                r.speedup = r.steps.map(|s| s.mean / base.mean);
            }
        }
    }
    Ok(TtfTable { threshold, reference: reference.map(|r| r.optimizer), rows })
}

/// [`time_to_threshold`] over a grid, one table per threshold.
pub fn threshold_sweep(logs: &[RunLog], thresholds: &[f64]) -> Result<Vec<TtfTable>> {
    thresholds.iter().map(|&t| time_to_threshold(logs, t)).collect()
}

/// One row per threshold: mean first-hit step per optimizer and speedups.
pub fn render_threshold_sweep(tables: &[TtfTable]) -> String {
    let mut s = String::new();
    let Some(first) = tables.first() else {
        return s;
    };
    let reference = first.reference.as_deref().unwrap_or("-");
    let _ = writeln!(s, "# first-hit step across thresholds; speedup vs {reference}");
    let _ = writeln!(s);
    let mut head = "| threshold |".to_string();
    let mut rule = "|---|".to_string();
    for r in &first.rows {
        let _ = write!(head, " {} step |", r.optimizer);
        rule.push_str("---|");
    }
    for r in first.rows.iter().filter(|r| Some(&r.optimizer) != first.reference.as_ref()) {
        let _ = write!(head, " {} speedup |", r.optimizer);
        rule.push_str("---|");
    }
    let _ = writeln!(s, "{head}");
    let _ = writeln!(s, "{rule}");
    for t in tables {
        let mut line = format!("| {} |", t.threshold);
        for r in &t.rows {
            let cell = r.steps.map_or("unreached".into(), |x| format!("{:.2}", x.mean));
            let _ = write!(line, " {cell} ({}/{}) |", r.hits.len() - r.unreached, r.hits.len());
        }
        for r in t.rows.iter().filter(|r| Some(&r.optimizer) != t.reference.as_ref()) {
            let _ = write!(line, " {} |", r.speedup.map_or("-".into(), fmt_speedup));
        }
        let _ = writeln!(s, "{line}");
    }
    s
}

/// Per-optimizer outcome summary used by the ablation and sweep tables.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub optimizer: String,
    pub kind: String,
    pub k: Option<usize>,
    pub eta: Option<f64>,
    pub m: Option<u64>,
    pub first_hit: TtfRow,
    pub final_loss: Option<Stat>,
    pub diverged: usize,
    /// Steps whose preconditioner clamped a denominator, summed over runs.
    pub clamp_steps: u64,
    /// Total HVPs per run, in seed order.
    pub hvps: Vec<u64>,
    /// Sketch refreshes per run, in seed order.
    pub refreshes: Vec<u64>,
}

impl SummaryRow {
    /// Diverged or clamped at least once.
    pub fn unstable(&self) -> bool {
        self.diverged > 0 || self.clamp_steps > 0
    }
}

pub fn run_summary(logs: &[RunLog], threshold: f64) -> Result<Vec<SummaryRow>> {
    let ttt = time_to_threshold(logs, threshold)?;
    let groups = group(logs)?;
    let mut out = Vec::new();
    for (g, row) in groups.iter().zip(ttt.rows) {
        let (k, eta, m) = match g.config {
            OptimizerConfig::Cao(c) => (Some(c.k), Some(c.eta), Some(c.m)),
            _ => (None, None, None),
        };
        let finals: Vec<f64> = g.runs.iter().filter_map(|r| r.final_loss()).collect();
        out.push(SummaryRow {
            optimizer: g.name.to_string(),
            kind: g.config.kind().to_string(),
            k,
            eta,
            m,
            final_loss: Stat::of(&finals),
            diverged: g.runs.iter().filter(|r| r.diverged()).count(),
            clamp_steps: g.runs.iter().map(|r| r.steps.iter().filter(|s| s.clamped).count() as u64).sum(),
            hvps: g
                .runs
                .iter()
                .map(|r| r.end.as_ref().map_or_else(|| r.steps.last().map_or(0, |s| s.hvps), |e| e.hvps))
                .collect(),
            refreshes: g.runs.iter().map(|r| r.steps.iter().filter(|s| s.refreshed).count() as u64).collect(),
            first_hit: row,
        });
    }
    Ok(out)
}

pub fn render_summary(rows: &[SummaryRow], threshold: f64) -> String {
    let opt = |x: Option<String>| x.unwrap_or_else(|| "-".into());
    let mut s = String::new();
    let _ = writeln!(s, "# run summary, threshold {threshold}; † = single seed");
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "| optimizer | kind | k | eta | m | first-hit step | reached | final loss | diverged | clamped steps | hvps/run | unstable |"
    );
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|---|---|");
    for r in rows {
        let hits = r.first_hit.steps.map_or("unreached".into(), |x| x.fmt_fixed());
        let hvps = r.hvps.iter().map(u64::to_string).collect::<Vec<_>>().join("/");
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {hits} | {}/{} | {} | {} | {} | {hvps} | {} |",
            r.optimizer,
            r.kind,
            opt(r.k.map(|k| k.to_string())),
            opt(r.eta.map(|e| format!("{e:e}"))),
            opt(r.m.map(|m| m.to_string())),
            r.first_hit.hits.len() - r.first_hit.unreached,
            r.first_hit.hits.len(),
            opt(r.final_loss.map(|x| x.fmt_sci())),
            r.diverged,
            r.clamp_steps,
            if r.unstable() { "yes" } else { "no" },
        );
    }
    s
}

/// HVP and wall-clock cost per optimizer. Wall-clock values are whatever the
/// logs recorded (zero when timing was disabled).
pub fn render_cost(logs: &[RunLog]) -> Result<String> {
    let groups = group(logs)?;
    let mut s = String::new();
    let _ = writeln!(s, "# cost per run");
    let _ = writeln!(s);
    let _ = writeln!(s, "| optimizer | steps | hvps | hvps/step | wall seconds | seconds/step |");
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    for g in groups {
        let mut steps = Vec::new();
        let mut hvps = Vec::new();
        let mut wall = Vec::new();
        for r in &g.runs {
            let n = r.steps.len() as f64;
            steps.push(n);
            hvps.push(r.end.as_ref().map_or(0, |e| e.hvps) as f64);
            wall.push(r.end.as_ref().map_or(0.0, |e| e.wall_clock));
        }
        let total_steps: f64 = steps.iter().sum();
        let per = |xs: &[f64]| {
            if total_steps > 0.0 {
                xs.iter().sum::<f64>() / total_steps
            } else {
                0.0
            }
        };
        let fmt = |xs: &[f64]| Stat::of(xs).map_or("-".into(), |x| format!("{:.2}", x.mean));
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.3} | {:.4} | {:.3e} |",
            g.name,
            fmt(&steps),
            fmt(&hvps),
            per(&hvps),
            Stat::of(&wall).map_or(0.0, |x| x.mean),
            per(&wall),
        );
    }
    Ok(s)
}
