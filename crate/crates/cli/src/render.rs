//! Plain-text reports.

use sensorflow_core::api::{
    ComponentReport, DiagnoseResponse, ExplainResponse, LabelledMatrix, SolveMethod, SolveResponse,
};
use sensorflow_core::rational::{format_decimal, format_rational, Rational};
use sensorflow_core::{Verdict, VerdictRule};
use std::fmt::Write;

pub fn verdict(v: Verdict) -> &'static str {
    match v {
        Verdict::Calculable => "calculable",
        Verdict::NotCalculable => "not calculable",
        Verdict::Undetermined => "undetermined",
    }
}

pub fn rule(r: VerdictRule) -> &'static str {
    match r {
        VerdictRule::NoUnknowns => "every flow is already known",
        VerdictRule::CutTooSmall => "fewer disjoint B-paths than unmonitored centroids",
        VerdictRule::Detached => "no monitored vertex borders the component",
        VerdictRule::TreeRule => "tree with a B-path for every centroid",
        VerdictRule::NonTree => "not a tree; topology alone cannot decide",
        VerdictRule::TreePreconditions => "tree with zero turning ratios; topology alone cannot decide",
        VerdictRule::RankFull => "component block has full column rank",
        VerdictRule::RankDeficient => "component block is rank deficient",
    }
}

fn list(items: &[String]) -> String {
    if items.is_empty() {
        "(none)".to_string()
    } else {
        items.join(" ")
    }
}

fn set(items: &[String]) -> String {
    format!("{{{}}}", items.join(", "))
}

pub fn component(c: &ComponentReport) -> String {
    let mut out = String::new();
    let centroids = c.unmonitored_centroids.len();
    let _ = writeln!(out, "component {}: {}", c.id, list(&c.vertices));
    let _ = writeln!(out, "  adjacent to monitors: {}", list(&c.adjacent));
    let _ = writeln!(out, "  unmonitored centroids: {}", list(&c.unmonitored_centroids));
    let _ = writeln!(
        out,
        "  counting condition ({centroids} centroids <= {} adjacent): {}",
        c.adjacent.len(),
        if c.legacy_count_ok { "holds" } else { "fails" }
    );
    let _ = writeln!(
        out,
        "  disjoint B-paths: {} of {centroids} needed, cut {}",
        c.min_cut_size,
        set(&c.witness_cut)
    );
    if !c.bpath_ok && c.min_cut_size > 0 && !c.witness_cut.is_empty() {
        let _ = writeln!(
            out,
            "    centroids {} must share cut vertices {}",
            set(&c.unmonitored_centroids),
            set(&c.witness_cut)
        );
    }
    for path in &c.witness_paths {
        let _ = writeln!(out, "    B-path {}", path.join("-"));
    }
    let _ = writeln!(out, "  tree: {}", if c.is_tree { "yes" } else { "no" });
    let _ = write!(out, "  unknowns {}, equations {}", c.unknowns, c.equations);
    if let Some(rank) = c.rank {
        let _ = write!(out, ", rank {rank}");
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "  verdict: {} ({})", verdict(c.verdict), rule(c.rule));
    out
}

pub fn diagnosis(report: &DiagnoseResponse) -> String {
    let mut out = String::new();
    if report.components.is_empty() {
        out.push_str("no unmonitored vertices\n");
    }
    for c in &report.components {
        out.push_str(&component(c));
    }
    let _ = writeln!(out, "overall: {}", verdict(report.overall));
    out
}

fn value(v: &Rational, decimal: Option<usize>) -> String {
    match decimal {
        Some(places) => format_decimal(v, places),
        None => format_rational(v),
    }
}

pub fn solution(s: &SolveResponse, decimal: Option<usize>) -> String {
    let mut out = String::new();
    let method = match s.method {
        SolveMethod::Tree => "tree propagation",
        _ => "linear system",
    };
    let _ = writeln!(out, "solved by {method}");
    if !s.unknowns.is_empty() {
        out.push_str("unknowns:\n");
        for u in &s.unknowns {
            let _ = writeln!(out, "  {:<10} {:>12}", u.label, value(&u.value, decimal));
        }
    }
    out.push_str("arc flows:\n");
    for a in &s.flow.arcs {
        let _ = writeln!(
            out,
            "  {:<10} {:>12}",
            format!("{}->{}", a.tail, a.head),
            value(&a.flow, decimal)
        );
    }
    if !s.flow.balancing.is_empty() {
        out.push_str("balancing flows:\n");
        for (label, v) in &s.flow.balancing {
            let _ = writeln!(out, "  {:<10} {:>12}", format!("S_{label}"), value(v, decimal));
        }
    }
    if !s.negative_arcs.is_empty() {
        let _ = writeln!(out, "warning: negative flow on {}", s.negative_arcs.join(" "));
    }
    out
}

pub fn matrix(m: &LabelledMatrix, flagged: &[String]) -> String {
    let width = m
        .entries
        .iter()
        .flatten()
        .chain(&m.columns)
        .map(String::len)
        .max()
        .unwrap_or(1);
    let label_width = m.rows.iter().map(String::len).max().unwrap_or(1);
    let mut out = String::new();
    let _ = write!(out, "  {:label_width$} ", "");
    for c in &m.columns {
        let _ = write!(out, " {c:>width$}");
    }
    out.push('\n');
    for (label, row) in m.rows.iter().zip(&m.entries) {
        let _ = write!(out, "  {label:label_width$} ");
        for e in row {
            let _ = write!(out, " {e:>width$}");
        }
        if flagged.contains(label) {
            out.push_str("   <- zero row");
        }
        out.push('\n');
    }
    out
}

pub fn explanation(e: &ExplainResponse) -> String {
    let c = &e.certificate;
    let mut out = component(&e.component);
    out.push_str("flow calculation block:\n");
    out.push_str(&matrix(&e.block, &[]));
    if e.component.unmonitored_centroids.is_empty() {
        out.push_str("no unmonitored centroids: cut C = {}, nothing to separate\n");
        return out;
    }
    let _ = writeln!(out, "cut C = {}", set(&c.cut));
    for (name, members) in &c.partition {
        let _ = writeln!(out, "  {name:<14} {}", set(members));
    }
    out.push_str("F* (columns of unknowns on the centroid side):\n");
    out.push_str(&matrix(&c.submatrix, &c.zero_rows));
    let _ = writeln!(out, "zero rows: {}", set(&c.zero_rows));
    let _ = writeln!(
        out,
        "K = {}, R = {}, Z = {}: rank(F*) <= R - Z = {}",
        c.columns,
        c.rows,
        c.zero_rows.len(),
        c.rank_bound
    );
    if c.obstructs {
        let _ = writeln!(
            out,
            "K = {} > {}: F* cannot have full column rank, so neither can F",
            c.columns, c.rank_bound
        );
    } else {
        out.push_str("no rank obstruction from this cut\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use sensorflow_core::api::{diagnose, explain, DiagnoseRequest, ExplainRequest};
    use sensorflow_core::fixtures;

    #[test]
    fn six_vertex_report_names_the_cut() {
        let net = fixtures::six_vertex_network();
        let report = diagnose(&net, &DiagnoseRequest::new(vec!["a".into()])).unwrap();
        let text = diagnosis(&report);
        assert!(text.contains("cut {d}"), "{text}");
        assert!(text.contains("centroids {e, f} must share cut vertices {d}"), "{text}");
        assert!(text.ends_with("overall: not calculable\n"));
    }

    #[test]
    fn six_vertex_explanation_flags_zero_rows() {
        let net = fixtures::six_vertex_network();
        let req = ExplainRequest {
            monitored: vec!["a".into()],
            component: 0,
            cut: None,
        };
        let text = explanation(&explain(&net, &req).unwrap());
        assert!(text.contains("zero rows: {b, c}"), "{text}");
        assert!(text.contains("rank(F*) <= R - Z = 3"), "{text}");
        assert_eq!(text.matches("<- zero row").count(), 2);
    }

    #[test]
    fn decimal_values() {
        assert_eq!(value(&Rational::new(7.into(), 3.into()), Some(2)), "2.33");
        assert_eq!(value(&Rational::new(7.into(), 3.into()), None), "7/3");
    }
}
