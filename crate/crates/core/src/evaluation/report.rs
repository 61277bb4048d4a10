use std::fmt::Write;

use super::matrix::{ExperimentResult, SeedSummary};
use super::MetricSet;
use crate::features::Modality;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// `|`-separated plain-text tables, one section per modality count.
    TableText,
    /// Tab-separated with a header row.
    Delimited,
}

const SECTIONS: [(usize, &str); 3] = [(1, "Unimodal"), (2, "Bimodal"), (3, "Trimodal")];
const COLUMNS: [&str; 6] = ["Modalities", "Model", "Accuracy", "Precision", "Recall", "F1"];

/// Two decimals, rounding half to even on the shortest decimal form of `x`
/// (so 0.595 prints as 0.60 and 0.585 as 0.58).
pub fn format_metric(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{}", x.abs());
    let (int, frac) = s.split_once('.').unwrap_or((&s, ""));
    let frac: Vec<u8> = frac.bytes().map(|b| b - b'0').collect();
    let digit = |i: usize| frac.get(i).copied().unwrap_or(0);
    let mut cents: u128 = int.parse::<u128>().expect("integer part") * 100 + u128::from(digit(0)) * 10 + u128::from(digit(1));
    let tail_nonzero = frac.iter().skip(3).any(|&d| d != 0);
    let round_up = match digit(2) {
        d if d > 5 => true,
        5 => tail_nonzero || cents % 2 == 1,
        _ => false,
    };
    if round_up {
        cents += 1;
    }
    let sign = if x.is_sign_negative() && cents != 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", cents / 100, cents % 100)
}

fn modality_label(modalities: &[Modality]) -> String {
    let mut m = modalities.to_vec();
    m.sort();
    m.iter().map(|m| m.title()).collect::<Vec<_>>().join("+")
}

fn metric_cells(m: &MetricSet) -> [String; 4] {
    [m.accuracy, m.precision, m.recall, m.f1].map(format_metric)
}

/// Rows keep their input order within each section. Timing is never printed,
/// so identical results render to identical bytes.
pub fn render_report(results: &[ExperimentResult], format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::TableText => {
            for (k, title) in SECTIONS {
                let rows: Vec<&ExperimentResult> = results.iter().filter(|r| r.modalities.len() == k).collect();
                if rows.is_empty() {
                    continue;
                }
                if !out.is_empty() {
                    out.push('\n');
                }
                writeln!(out, "{title}").unwrap();
                writeln!(out, "{}", COLUMNS.join(" | ")).unwrap();
                for r in rows {
                    let [a, p, rc, f] = metric_cells(&r.metrics);
                    writeln!(out, "{} | {} | {a} | {p} | {rc} | {f}", modality_label(&r.modalities), r.model_label()).unwrap();
                }
            }
        }
        ReportFormat::Delimited => {
            out.push_str("section\tspec\tmodalities\tmodel\tseed\taccuracy\tprecision\trecall\tf1\ttp\tfp\tfn\ttn\n");
            for (k, title) in SECTIONS {
                for r in results.iter().filter(|r| r.modalities.len() == k) {
                    let [a, p, rc, f] = metric_cells(&r.metrics);
                    let c = &r.confusion;
                    writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}\t{a}\t{p}\t{rc}\t{f}\t{}\t{}\t{}\t{}",
                        title.to_lowercase(),
                        r.spec_name,
                        modality_label(&r.modalities),
                        r.model_label(),
                        r.seed,
                        c.tp,
                        c.fp,
                        c.fn_,
                        c.tn
                    )
                    .unwrap();
                }
            }
        }
    }
    out
}

/// Multi-seed variant: each cell is `mean [min, max]`.
pub fn render_seed_summary(summaries: &[SeedSummary], format: ReportFormat) -> String {
    let mut out = String::new();
    let cells = |s: &SeedSummary| {
        let pick: [fn(&MetricSet) -> f64; 4] = [|m| m.accuracy, |m| m.precision, |m| m.recall, |m| m.f1];
        pick.map(|f| (format_metric(f(&s.mean)), format_metric(f(&s.min)), format_metric(f(&s.max))))
    };
    match format {
        ReportFormat::TableText => {
            for (i, (k, title)) in SECTIONS.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                writeln!(out, "{title}").unwrap();
                writeln!(out, "{} | Seeds", COLUMNS.join(" | ")).unwrap();
                for s in summaries.iter().filter(|s| s.modalities.len() == *k) {
                    let c = cells(s).map(|(m, lo, hi)| format!("{m} [{lo}, {hi}]"));
                    writeln!(
                        out,
                        "{} | {} | {} | {} | {} | {} | {}",
                        modality_label(&s.modalities),
                        s.backend_combo.join("+"),
                        c[0],
                        c[1],
                        c[2],
                        c[3],
                        s.seeds.len()
                    )
                    .unwrap();
                }
            }
        }
        ReportFormat::Delimited => {
            out.push_str("section\tspec\tmodalities\tmodel\tseeds");
            for m in ["accuracy", "precision", "recall", "f1"] {
                write!(out, "\t{m}_mean\t{m}_min\t{m}_max").unwrap();
            }
            out.push('\n');
            for (k, title) in SECTIONS {
                for s in summaries.iter().filter(|s| s.modalities.len() == k) {
                    let seeds: Vec<String> = s.seeds.iter().map(u64::to_string).collect();
                    write!(
                        out,
                        "{}\t{}\t{}\t{}\t{}",
                        title.to_lowercase(),
                        s.spec_name,
                        modality_label(&s.modalities),
                        s.backend_combo.join("+"),
                        seeds.join(",")
                    )
                    .unwrap();
                    for (m, lo, hi) in cells(s) {
                        write!(out, "\t{m}\t{lo}\t{hi}").unwrap();
                    }
                    out.push('\n');
                }
            }
        }
    }
    out
}
