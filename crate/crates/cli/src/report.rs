//! Report rendering: aligned text tables, per-record verdict CSV, and
//! per-step metric curves for plotting training dynamics.

use anyhow::Result;

use groupward::consistency::{EvalRecord, GroupedMetrics, MetricCounts, MetricsSummary};
use groupward::stability::StabilityReport;

fn fmt_rate(v: f64) -> String {
    format!("{:.4}", v)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_rate).unwrap_or_else(|| "undef".to_string())
}

/// Aligned-column metrics table, one row per dataset plus pooled and macro
/// rows.
pub fn metrics_table(grouped: &GroupedMetrics) -> String {
    let mut rows: Vec<[String; 7]> = Vec::new();
    let header = ["dataset", "n", "acc", "inc_r", "cbir", "rc_acc", "abstain"].map(String::from);
    let push_summary = |rows: &mut Vec<[String; 7]>, name: &str, m: &MetricsSummary| {
        rows.push([
            name.to_string(),
            m.n_total.to_string(),
            fmt_rate(m.acc),
            fmt_opt(m.inc_r),
            fmt_rate(m.cbir),
            fmt_rate(m.rc_acc),
            m.n_abstain.to_string(),
        ]);
    };
    for (name, summary) in &grouped.per_dataset {
        push_summary(&mut rows, name, summary);
    }
    push_summary(&mut rows, "pooled", &grouped.pooled);
    if let Some(m) = &grouped.macro_average {
        rows.push([
            "macro_avg".to_string(),
            "-".to_string(),
            fmt_rate(m.acc),
            fmt_opt(m.inc_r),
            fmt_rate(m.cbir),
            fmt_rate(m.rc_acc),
            "-".to_string(),
        ]);
    }

    let mut widths = header.iter().map(String::len).collect::<Vec<_>>();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let render = |row: &[String; 7]| {
        row.iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = render(&header);
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in &rows {
        out.push_str(&render(row));
        out.push('\n');
    }
    out
}

/// Per-record verdict CSV.
pub fn verdict_csv(records: &[EvalRecord]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "prompt_id",
        "dataset",
        "step",
        "correct",
        "verdict",
        "judge_degraded",
        "boxed_answer",
    ])?;
    for r in records {
        writer.write_record([
            r.prompt.prompt_id.as_str(),
            r.dataset.as_deref().unwrap_or(""),
            &r.step.map(|s| s.to_string()).unwrap_or_default(),
            if r.correct { "1" } else { "0" },
            &r.verdict.to_string(),
            if r.judge_degraded { "1" } else { "0" },
            r.boxed_answer.as_deref().unwrap_or(""),
        ])?;
    }
    Ok(String::from_utf8(writer.into_inner()?)?)
}

/// Metric curve over checkpoint steps, for records carrying a step tag.
/// Returns `None` when no record is tagged.
pub fn curve_csv(records: &[EvalRecord]) -> Result<Option<String>> {
    let mut steps: Vec<u64> = records.iter().filter_map(|r| r.step).collect();
    if steps.is_empty() {
        return Ok(None);
    }
    steps.sort_unstable();
    steps.dedup();

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["step", "n", "acc", "inc_r", "cbir", "rc_acc", "abstain"])?;
    for step in steps {
        let subset: Vec<EvalRecord> =
            records.iter().filter(|r| r.step == Some(step)).cloned().collect();
        let m = MetricCounts::tally(&subset).summarize()?;
        writer.write_record([
            step.to_string(),
            m.n_total.to_string(),
            fmt_rate(m.acc),
            fmt_opt(m.inc_r),
            fmt_rate(m.cbir),
            fmt_rate(m.rc_acc),
            m.n_abstain.to_string(),
        ])?;
    }
    Ok(Some(String::from_utf8(writer.into_inner()?)?))
}

/// Stability comparison as an aligned text table.
pub fn stability_table(report: &StabilityReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "stability protocol: {} prompts x {} rollouts x {} repeats, seed {}, sigma_p {}, p_swap {}\n",
        report.n_prompts,
        report.rollouts_per_prompt,
        report.repeats,
        report.seed,
        report.sigma_p,
        report.p_swap,
    ));
    out.push_str(&format!(
        "{:<16}  {:>14}  {:>8}  {:>9}\n",
        "scheme", "mean_variance", "cells", "excluded"
    ));
    for s in &report.schemes {
        out.push_str(&format!(
            "{:<16}  {:>14.6}  {:>8}  {:>9}\n",
            s.scheme.to_string(),
            s.mean_variance,
            s.cells,
            s.excluded_cells
        ));
    }
    match report.reduction {
        Some(r) => out.push_str(&format!("variance reduction (groupwise vs pointwise): {:.1}%\n", r * 100.0)),
        None => out.push_str("variance reduction: undefined (pointwise variance is zero)\n"),
    }
    out.push_str(&format!(
        "reference large-scale run: pointwise {:.3}, groupwise {:.3}, reduction {:.1}% ({})\n",
        report.reference_large_scale.pointwise_mean_variance,
        report.reference_large_scale.groupwise_mean_variance,
        report.reference_large_scale.reduction * 100.0,
        report.reference_large_scale.note,
    ));
    out
}
