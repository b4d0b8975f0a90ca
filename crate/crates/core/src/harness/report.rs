//! Per-run rows and per-variant summaries, as CSV or plain text.
//!
//! Normalized ratios divide by `log₂ n · log₂(n̄+1)`, `log₂ k̃ · log₂(n̄+1)` and
//! `n̄ · log₂ k̃`; every factor is floored at 1 so tiny instances do not divide
//! by zero. `log₂ k̃` uses `max(k̃, 2)` as elsewhere.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use super::experiment::{Outcome, Variant};
use crate::steiner::log_k;

pub const CSV_COLUMNS: [&str; 17] = [
    "instance",
    "recipe",
    "seed",
    "variant",
    "n",
    "n_bar",
    "k_tilde",
    "arrivals",
    "M",
    "cost",
    "oracle_cost",
    "ratio",
    "ratio_logn_lognbar",
    "ratio_logk_lognbar",
    "ratio_nbar_logk",
    "epochs",
    "violations",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance: String,
    pub recipe: String,
    pub seed: u64,
    pub variant: Variant,
    pub n: usize,
    pub n_bar: usize,
    pub k_tilde: u32,
    pub arrivals: usize,
    #[serde(rename = "M")]
    pub m: u32,
    pub cost: f64,
    pub oracle_cost: Option<f64>,
    pub ratio: Option<f64>,
    pub ratio_logn_lognbar: Option<f64>,
    pub ratio_logk_lognbar: Option<f64>,
    pub ratio_nbar_logk: Option<f64>,
    pub epochs: usize,
    pub violations: usize,
}

impl ReportRow {
    pub fn from_outcome(o: &Outcome) -> Self {
        let log_n = (o.n.max(1) as f64).log2().max(1.0);
        let log_nbar = ((o.n_bar + 1) as f64).log2().max(1.0);
        let lk = log_k(o.k_tilde).max(1.0);
        let nbar = (o.n_bar as f64).max(1.0);
        ReportRow {
            instance: o.instance.clone(),
            recipe: o.recipe.clone().unwrap_or_default(),
            seed: o.seed,
            variant: o.variant,
            n: o.n,
            n_bar: o.n_bar,
            k_tilde: o.k_tilde,
            arrivals: o.arrivals,
            m: o.m,
            cost: o.cost,
            oracle_cost: o.oracle_cost,
            ratio: o.ratio,
            ratio_logn_lognbar: o.ratio.map(|r| r / (log_n * log_nbar)),
            ratio_logk_lognbar: o.ratio.map(|r| r / (lk * log_nbar)),
            ratio_nbar_logk: o.ratio.map(|r| r / (nbar * lk)),
            epochs: o.trace.epochs.len(),
            violations: o.checks.violation_count(),
        }
    }
}

pub fn write_csv<W: io::Write>(rows: &[ReportRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    // The serializer emits the header with the first row.
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<ReportRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

/// Nearest-rank statistics; `None` for an empty sample.
pub fn stats(values: &[f64]) -> Option<Stats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
    Some(Stats {
        count: v.len(),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        p50: rank(0.5),
        p95: rank(0.95),
        max: v[v.len() - 1],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub runs: usize,
    pub mean_cost: f64,
    pub ratio: Option<Stats>,
    pub mean_ratio_logn_lognbar: Option<f64>,
    pub mean_ratio_logk_lognbar: Option<f64>,
    pub mean_ratio_nbar_logk: Option<f64>,
    pub violations: usize,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn summarize(rows: &[ReportRow]) -> Vec<VariantSummary> {
    let mut by: BTreeMap<Variant, Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        by.entry(r.variant).or_default().push(r);
    }
    by.into_iter()
        .map(|(variant, rs)| {
            let ratios: Vec<f64> = rs.iter().filter_map(|r| r.ratio).filter(|r| r.is_finite()).collect();
            VariantSummary {
                variant,
                runs: rs.len(),
                mean_cost: mean(rs.iter().map(|r| r.cost)).unwrap_or(0.0),
                ratio: stats(&ratios),
                mean_ratio_logn_lognbar: mean(rs.iter().filter_map(|r| r.ratio_logn_lognbar)),
                mean_ratio_logk_lognbar: mean(rs.iter().filter_map(|r| r.ratio_logk_lognbar)),
                mean_ratio_nbar_logk: mean(rs.iter().filter_map(|r| r.ratio_nbar_logk)),
                violations: rs.iter().map(|r| r.violations).sum(),
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

/// Per-variant summary followed by one line per run.
pub fn render_text(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>5} {:>10} {:>8} {:>8} {:>8} {:>8} {:>10} {:>10} {:>10} {:>5}",
        "variant", "runs", "mean_cost", "mean", "p50", "p95", "max", "r/lnlnb", "r/lklnb", "r/nblk", "viol"
    );
    for s in summarize(rows) {
        let r = s.ratio.as_ref();
        let _ = writeln!(
            out,
            "{:<14} {:>5} {:>10.4} {:>8} {:>8} {:>8} {:>8} {:>10} {:>10} {:>10} {:>5}",
            s.variant.name(),
            s.runs,
            s.mean_cost,
            opt(r.map(|x| x.mean)),
            opt(r.map(|x| x.p50)),
            opt(r.map(|x| x.p95)),
            opt(r.map(|x| x.max)),
            opt(s.mean_ratio_logn_lognbar),
            opt(s.mean_ratio_logk_lognbar),
            opt(s.mean_ratio_nbar_logk),
            s.violations
        );
    }
    out.push('\n');
    let _ = writeln!(
        out,
        "{:<28} {:<14} {:>20} {:>4} {:>4} {:>3} {:>4} {:>3} {:>10} {:>10} {:>8} {:>3} {:>4}",
        "instance", "variant", "seed", "n", "n_bar", "k", "arr", "M", "cost", "oracle", "ratio", "ep", "viol"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<28} {:<14} {:>20} {:>4} {:>4} {:>3} {:>4} {:>3} {:>10.4} {:>10} {:>8} {:>3} {:>4}",
            r.instance,
            r.variant.name(),
            r.seed,
            r.n,
            r.n_bar,
            r.k_tilde,
            r.arrivals,
            r.m,
            r.cost,
            opt(r.oracle_cost),
            opt(r.ratio),
            r.epochs,
            r.violations
        );
    }
    out
}
