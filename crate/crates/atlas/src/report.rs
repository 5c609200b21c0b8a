//! Tab-separated report emission. All floating-point values print with six
//! significant digits so identical inputs produce byte-identical reports.

use lingua_atlas::familytree::TreeMetricReport;
use lingua_atlas::geodesy::CorrelationReport;
use lingua_atlas::similarity::{NeighborMethod, OutlierReport, ZeroShotReport};

/// Six significant digits; plain decimal inside a sane magnitude range,
/// scientific outside it.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_owned();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_owned();
    }
    if x == 0.0 {
        return "0".to_owned();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exp) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Per-language `id<TAB>c` lines (undefined coefficients print as
/// `undefined`), then a `mu<TAB>sigma<TAB>n_excluded` summary line.
pub fn correlation(report: &CorrelationReport) -> String {
    let mut out = String::new();
    for (id, c) in &report.per_language {
        match c {
            Some(v) => out.push_str(&format!("{id}\t{}\n", fmt_sig(*v))),
            None => out.push_str(&format!("{id}\tundefined\n")),
        }
    }
    out.push_str(&format!(
        "{}\t{}\t{}\n",
        fmt_sig(report.mu),
        fmt_sig(report.sigma),
        report.n_excluded
    ));
    out
}

/// `k<TAB>hit_rate` lines, then `n_eligible<TAB>count`.
pub fn tree_metric(report: &TreeMetricReport) -> String {
    let mut out = String::new();
    for (k, rate) in report.k_values.iter().zip(&report.hit_rates) {
        out.push_str(&format!("{k}\t{}\n", fmt_sig(*rate)));
    }
    out.push_str(&format!("n_eligible\t{}\n", report.n_eligible));
    out
}

/// A `summary` line of per-column mean/std pairs (nearby-family, family,
/// nearby, distance), then `id<TAB>nearby_family<TAB>family<TAB>nearby<TAB>
/// distance` rows in descending distance order.
pub fn outliers(report: &OutlierReport, top: usize) -> String {
    let s = &report.summary;
    let mut out = format!(
        "summary\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
        fmt_sig(s.nearby_family.mean),
        fmt_sig(s.nearby_family.std),
        fmt_sig(s.family.mean),
        fmt_sig(s.family.std),
        fmt_sig(s.nearby.mean),
        fmt_sig(s.nearby.std),
        fmt_sig(s.distance.mean),
        fmt_sig(s.distance.std),
    );
    for row in report.rows.iter().take(top) {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            row.id,
            row.n_nearby_family,
            row.n_family,
            row.n_nearby,
            fmt_sig(row.mean_family_distance)
        ));
    }
    out
}

/// Matrix in the zero-shot table shape: a header of k values, one row per
/// method, `-` for cells without pairs.
pub fn zero_shot(report: &ZeroShotReport) -> String {
    let mut out = String::from("method");
    for k in &report.k_values {
        out.push_str(&format!("\tk={k}"));
    }
    out.push('\n');
    for method in &report.methods {
        out.push_str(method.name());
        for k in &report.k_values {
            match report.cell(*method, *k) {
                Some(cell) => out.push_str(&format!("\t{}", fmt_sig(cell.mean_mcd))),
                None => out.push_str("\t-"),
            }
        }
        out.push('\n');
    }
    out
}

/// All three methods in table order, for consistent row ordering.
pub const METHOD_ORDER: [NeighborMethod; 3] = [
    NeighborMethod::Embedding,
    NeighborMethod::Geographic,
    NeighborMethod::Phoneme,
];
