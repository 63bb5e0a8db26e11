//! Plain-text tables for `--output human`.

use std::fmt::Write;

use serde_json::Value;
use skillnet_core::evaluation::{Dimension, EvaluationReport, Grade, Grades};
use skillnet_core::repository::{AnalysisSummary, SearchResult};
use skillnet_core::skill::Category;
use skillnet_core::store::StoreStats;

const DESCRIPTION_WIDTH: usize = 60;

fn clip(text: &str, width: usize) -> String {
    if text.chars().count() <= width {
        text.to_string()
    } else {
        let mut out: String = text.chars().take(width.saturating_sub(3)).collect();
        out.push_str("...");
        out
    }
}

/// Left-aligned columns sized to their widest cell.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<String>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(padded.join("  ").trim_end());
        out.push('\n');
    };
    line(header.iter().map(|h| h.to_string()).collect());
    for row in rows {
        line(row.clone());
    }
    out
}

pub fn search_table(results: &[SearchResult]) -> String {
    if results.is_empty() {
        return "no matching skills\n".into();
    }
    let rows: Vec<Vec<String>> = results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                format!("{:.4}", r.score),
                r.skill_id.clone(),
                r.category.to_string(),
                clip(&r.description, DESCRIPTION_WIDTH),
            ]
        })
        .collect();
    table(&["RANK", "SCORE", "SKILL", "CATEGORY", "DESCRIPTION"], &rows)
}

pub fn created(entries: &[Value]) -> String {
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|e| {
            ["skill_id", "status", "path"]
                .iter()
                .map(|k| e[*k].as_str().unwrap_or_default().to_string())
                .collect()
        })
        .collect();
    table(&["SKILL", "STATUS", "PATH"], &rows)
}

pub fn grades(grades: &Grades) -> String {
    let rows: Vec<Vec<String>> = grades
        .iter()
        .map(|(dim, g)| vec![dim.to_string(), g.level.to_string(), g.rationale.clone()])
        .collect();
    table(&["DIMENSION", "GRADE", "RATIONALE"], &rows)
}

pub fn evaluation(report: &EvaluationReport) -> String {
    let mut out = format!("skill: {}\njudge: {}\n", report.skill_id, report.judge_identity);
    if let Some(run) = &report.sandbox {
        let _ = writeln!(out, "sandbox: {:?} in {} ms", run.outcome, run.wall_time_ms);
    }
    out.push('\n');
    out.push_str(&grades(&report.grades));
    out
}

pub fn analysis(summary: &AnalysisSummary) -> String {
    let mut out = format!("candidates: {}\nconfirmed: {}\n\n", summary.candidates, summary.confirmed);
    let rows: Vec<Vec<String>> = summary
        .edges_by_relation
        .iter()
        .map(|(rel, n)| vec![format!("{rel:?}"), n.to_string()])
        .collect();
    out.push_str(&table(&["RELATION", "EDGES"], &rows));
    let _ = writeln!(out, "\nredundancy clusters: {}", summary.redundancy_clusters.len());
    for cluster in &summary.redundancy_clusters {
        let _ = writeln!(out, "  {}", cluster.join(", "));
    }
    out
}

pub fn stats(stats: &StoreStats) -> String {
    let total = stats.total_skills;
    let pct = |n: usize| if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
    let mut out = format!("total skills: {total}\n\n");
    let rows: Vec<Vec<String>> = Category::ALL
        .iter()
        .map(|c| {
            let n = stats.per_category.get(c).copied().unwrap_or(0);
            vec![c.to_string(), n.to_string(), format!("{:.1}%", pct(n))]
        })
        .collect();
    out.push_str(&table(&["CATEGORY", "SKILLS", "SHARE"], &rows));
    out.push('\n');
    let rows: Vec<Vec<String>> = Dimension::ALL
        .iter()
        .map(|d| {
            let counts = stats.per_dimension.get(d);
            let mut row = vec![d.to_string()];
            for g in Grade::ALL.iter().rev() {
                let n = counts.and_then(|c| c.get(g)).copied().unwrap_or(0);
                row.push(format!("{n} ({:.1}%)", pct(n)));
            }
            row
        })
        .collect();
    out.push_str(&table(&["DIMENSION", "GOOD", "AVERAGE", "POOR"], &rows));
    out
}
