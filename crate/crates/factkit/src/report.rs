//! Plain-text reports. Each report is a human-readable table followed by
//! `key=value` lines that scripts can grep.

use std::fmt::Write;

use factkit_core::agreement::{landis_koch, AgreementReport};
use factkit_core::distribution::{DistributionReport, LeakageAudit};
use factkit_core::metrics::SeedSummary;
use factkit_core::stats::MeanStd;
use factkit_core::taxonomy::Dimension;

fn key(label: &str) -> String {
    label.replace(' ', "_")
}

fn pct(m: &MeanStd) -> String {
    format!("{}", m.scaled(100.0))
}

/// Category and overall macro-F1 (one row), then per-label F1 with mean test
/// support, then machine-readable lines. Scores are percentages.
pub fn format_metrics(model_name: &str, summary: &SeedSummary) -> String {
    let mut out = String::new();
    let runs = summary.runs;
    let _ = writeln!(out, "# Macro-F1 (%), mean±std over {runs} run{}", if runs == 1 { "" } else { "s" });
    if summary.is_degenerate() {
        let _ = writeln!(out, "# single run: standard deviations are 0 by convention");
    }
    let mut header = format!("{:<16}", "Model");
    let mut row = format!("{model_name:<16}");
    for (d, m) in &summary.per_category {
        let _ = write!(header, " {:>11}", d.abbrev());
        let _ = write!(row, " {:>11}", pct(m));
    }
    let _ = write!(header, " {:>11}", "Ovr");
    let _ = write!(row, " {:>11}", pct(&summary.overall));
    let _ = writeln!(out, "{header}\n{row}\n");

    let _ = writeln!(out, "# Per-label F1 (%); support is the mean gold count per run");
    let _ = writeln!(out, "{:<18} {:<22} {:>8} {:>11}", "Category", "Label", "Support", "F1");
    for &d in summary.per_category.keys() {
        let mut labels: Vec<(usize, &MeanStd)> = summary
            .per_label
            .iter()
            .filter(|((dim, _), _)| *dim == d)
            .map(|((_, l), m)| (*l, m))
            .collect();
        labels.sort_by(|a, b| b.1.mean.total_cmp(&a.1.mean).then(a.0.cmp(&b.0)));
        for (l, m) in labels {
            let support = summary.support.get(&(d, l)).copied().unwrap_or(0.0);
            let _ = writeln!(out, "{:<18} {:<22} {:>8.1} {:>11}", d.name(), d.labels()[l], support, pct(m));
        }
    }

    let _ = writeln!(out, "\n# key=value");
    let _ = writeln!(out, "runs={runs}");
    let _ = writeln!(out, "overall.mean={:.6}", summary.overall.mean);
    let _ = writeln!(out, "overall.std={:.6}", summary.overall.std);
    for (d, m) in &summary.per_category {
        let _ = writeln!(out, "category.{}.mean={:.6}", d.key(), m.mean);
        let _ = writeln!(out, "category.{}.std={:.6}", d.key(), m.std);
    }
    for ((d, l), m) in &summary.per_label {
        let k = format!("label.{}.{}", d.key(), key(d.labels()[*l]));
        let _ = writeln!(out, "{k}.mean={:.6}", m.mean);
        let _ = writeln!(out, "{k}.std={:.6}", m.std);
        let _ = writeln!(out, "{k}.runs={}", m.n);
        let _ = writeln!(out, "{k}.support={:.3}", summary.support.get(&(*d, *l)).copied().unwrap_or(0.0));
    }
    out
}

/// One row per dimension plus an average row. The κ column is Cohen's for
/// two raters and Fleiss' otherwise; the interpretation follows it.
pub fn format_agreement(rows: &[(Dimension, AgreementReport)], raters: usize) -> String {
    let kappa_name = if raters == 2 { "Cohen's κ" } else { "Fleiss' κ" };
    let kappa = |r: &AgreementReport| r.cohen_kappa.unwrap_or(r.fleiss_kappa);
    let mut out = String::new();
    let _ = writeln!(out, "# Inter-annotator agreement, {raters} raters");
    let _ = writeln!(
        out,
        "{:<18} {:>12} {:>10} {:<15} {:>16} {:>7}",
        "Class", "% Agreement", kappa_name, "Interpretation", "Krippendorff's α", "N"
    );
    for (d, r) in rows {
        let _ = writeln!(
            out,
            "{:<18} {:>11.1}% {:>10.3} {:<15} {:>16.3} {:>7}",
            d.name(),
            100.0 * r.percent,
            kappa(r),
            r.interpretation.as_str(),
            r.kripp_alpha,
            r.n
        );
    }
    let average = if rows.is_empty() {
        None
    } else {
        let n = rows.len() as f64;
        let mean = |f: &dyn Fn(&AgreementReport) -> f64| rows.iter().map(|(_, r)| f(r)).sum::<f64>() / n;
        Some((mean(&|r| r.percent), mean(&kappa), mean(&|r| r.kripp_alpha)))
    };
    if let Some((p, k, a)) = average {
        let band = landis_koch(k.clamp(-1.0, 1.0)).map(|b| b.as_str()).unwrap_or("n/a");
        let _ = writeln!(out, "{:<18} {:>11.1}% {:>10.3} {:<15} {:>16.3}", "Average", 100.0 * p, k, band, a);
    }

    let _ = writeln!(out, "\n# key=value");
    let _ = writeln!(out, "raters={raters}");
    for (d, r) in rows {
        let k = d.key();
        let _ = writeln!(out, "agreement.{k}.percent={:.6}", r.percent);
        if let Some(c) = r.cohen_kappa {
            let _ = writeln!(out, "agreement.{k}.cohen_kappa={c:.6}");
        }
        let _ = writeln!(out, "agreement.{k}.fleiss_kappa={:.6}", r.fleiss_kappa);
        let _ = writeln!(out, "agreement.{k}.kripp_alpha={:.6}", r.kripp_alpha);
        let _ = writeln!(out, "agreement.{k}.interpretation={}", key(r.interpretation.as_str()));
        let _ = writeln!(out, "agreement.{k}.n={}", r.n);
    }
    if let Some((p, k, a)) = average {
        let _ = writeln!(out, "agreement.average.percent={p:.6}");
        let _ = writeln!(out, "agreement.average.kappa={k:.6}");
        let _ = writeln!(out, "agreement.average.kripp_alpha={a:.6}");
    }
    out
}

/// Predicted label shares and conditional confidences, labels ordered by
/// share within each category; then the leakage audit when given.
pub fn format_distribution(corpus: &str, report: &DistributionReport, audit: Option<&LeakageAudit>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# Predicted label distribution for {corpus} (N={}), mean±std over {} seed models",
        report.facts, report.seeds
    );
    let _ = writeln!(out, "{:<18} {:<22} {:>11} {:>11}", "Category", "Label", "Distr.%", "Conf.%");
    for (c, (name, labels)) in report.categories.iter().enumerate() {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by(|&a, &b| {
            report.cells[&(c, b)]
                .share
                .mean
                .total_cmp(&report.cells[&(c, a)].share.mean)
                .then(a.cmp(&b))
        });
        for l in order {
            let cell = &report.cells[&(c, l)];
            let conf = cell.confidence.map_or_else(|| "n/a".to_string(), |m| m.to_string());
            let _ = writeln!(out, "{:<18} {:<22} {:>11} {:>11}", name, labels[l], cell.share.to_string(), conf);
        }
    }
    if let Some(a) = audit {
        let _ = writeln!(out, "\n# Training-overlap audit");
        let _ = writeln!(
            out,
            "overlapping facts: {} ({:.2}% of the corpus)",
            a.overlap_count,
            100.0 * a.overlap_fraction
        );
        match a.max_shift {
            _ if a.total_overlap() => {
                let _ = writeln!(out, "every corpus fact overlaps the training facts; nothing is left to re-aggregate");
            }
            Some(((c, l), shift)) => {
                let (name, labels) = &report.categories[c];
                let _ = writeln!(out, "max |shift|: {:.3} pp at {} / {}", shift.abs(), name, labels[l]);
            }
            None => {}
        }
    }

    let _ = writeln!(out, "\n# key=value");
    let _ = writeln!(out, "facts={}", report.facts);
    let _ = writeln!(out, "seeds={}", report.seeds);
    for ((c, l), cell) in &report.cells {
        let (name, labels) = &report.categories[*c];
        let k = format!("share.{}.{}", key(name), key(&labels[*l]));
        let _ = writeln!(out, "{k}.mean={:.6}", cell.share.mean);
        let _ = writeln!(out, "{k}.std={:.6}", cell.share.std);
        if let Some(conf) = cell.confidence {
            let _ = writeln!(out, "{k}.confidence.mean={:.6}", conf.mean);
            let _ = writeln!(out, "{k}.confidence.std={:.6}", conf.std);
        }
    }
    if let Some(a) = audit {
        let _ = writeln!(out, "audit.overlap_count={}", a.overlap_count);
        let _ = writeln!(out, "audit.overlap_fraction={:.6}", a.overlap_fraction);
        let _ = writeln!(out, "audit.total_overlap={}", a.total_overlap());
        if let Some((_, shift)) = a.max_shift {
            let _ = writeln!(out, "audit.max_abs_shift_pp={:.6}", shift.abs());
        }
        for ((c, l), shift) in &a.shifts {
            let (name, labels) = &report.categories[*c];
            let _ = writeln!(out, "audit.shift.{}.{}={shift:.6}", key(name), key(&labels[*l]));
        }
    }
    out
}
