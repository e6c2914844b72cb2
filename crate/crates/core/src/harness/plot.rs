use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::log::RunLog;
use super::tables::{group, Stat};
use crate::error::{Error, Result};

/// Tab-separated loss curves: `step`, then `<optimizer>_mean` and
/// `<optimizer>_std` per optimizer in header order, then a `single_seed`
/// column when every optimizer ran on one seed only.
///
/// A cell is `nan` when some seed of that optimizer has no evaluation at that
/// step (e.g. after divergence).
pub fn emit_plot_data(logs: &[RunLog]) -> Result<String> {
    let groups = group(logs)?;
    let seeds = groups[0].runs.len();
    if let Some(g) = groups.iter().find(|g| g.runs.len() != seeds) {
        return Err(Error::contract(format!(
            "optimizer `{}` has {} seeds, `{}` has {seeds}",
            g.name,
            g.runs.len(),
            groups[0].name
        )));
    }
    let series: Vec<Vec<BTreeMap<u64, f64>>> = groups
        .iter()
        .map(|g| g.runs.iter().map(|r| r.eval_series().map(|(s, _, l)| (s, l)).collect()).collect())
        .collect();
    let mut steps: Vec<u64> = series.iter().flatten().flat_map(|m| m.keys().copied()).collect();
    steps.sort_unstable();
    steps.dedup();

    let single = seeds == 1;
    let mut out = String::from("step");
    for g in &groups {
        let _ = write!(out, "\t{0}_mean\t{0}_std", g.name);
    }
    if single {
        out.push_str("\tsingle_seed");
    }
    out.push('\n');
    for step in steps {
        let _ = write!(out, "{step}");
        for runs in &series {
            let vals: Option<Vec<f64>> = runs.iter().map(|m| m.get(&step).copied()).collect();
            match vals.and_then(|v| Stat::of(&v)) {
                Some(st) => {
                    let _ = write!(out, "\t{}\t{}", st.mean, st.std);
                }
                None => out.push_str("\tnan\tnan"),
            }
        }
        if single {
            out.push_str("\t1");
        }
        out.push('\n');
    }
    Ok(out)
}
