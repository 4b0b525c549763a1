//! Request and response types shared by the HTTP service, its client and the
//! command line, plus the handlers that compute them. Fractions travel as
//! strings.

use crate::conditions::{diagnose_with, ComponentDiagnosis, DiagnoseOptions, DiagnosisReport, Verdict, VerdictRule};
use crate::document::{
    labels, placement_from_parts, vertex_ids, ArcFlow, DocumentError, FlowDocument, NetworkDocument,
};
use crate::flow_system::{build_flow_system, fstar_submatrix, solve_flow, FStar, FlowSystem, SolveError, Unknown};
use crate::linalg::Matrix;
use crate::monitoring::{unmonitored_components, Placement};
use crate::network::{validate_network, FlowState, RoadNetwork, Violation};
use crate::rational::{format_rational, serde_string, serde_string_map, Rational};
use crate::tree_solver::solve_by_tree;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnoseRequest {
    pub monitored: Vec<String>,
    /// Decide undetermined components by exact rank.
    #[serde(default = "yes")]
    pub rank_fallback: bool,
    /// Reject placements where an adjacent vertex's outflow cannot be deduced.
    #[serde(default)]
    pub strict: bool,
}

impl DiagnoseRequest {
    pub fn new(monitored: Vec<String>) -> Self {
        DiagnoseRequest {
            monitored,
            rank_fallback: true,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub id: usize,
    pub vertices: Vec<String>,
    pub adjacent: Vec<String>,
    pub unmonitored_centroids: Vec<String>,
    pub legacy_count_ok: bool,
    pub min_cut_size: usize,
    pub bpath_ok: bool,
    pub is_tree: bool,
    pub witness_cut: Vec<String>,
    pub witness_paths: Vec<Vec<String>>,
    pub unknowns: usize,
    pub equations: usize,
    pub verdict: Verdict,
    pub rule: VerdictRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
}

impl ComponentReport {
    pub fn new(net: &RoadNetwork, c: &ComponentDiagnosis) -> Self {
        ComponentReport {
            id: c.id,
            vertices: labels(net, &c.vertices),
            adjacent: labels(net, &c.adjacent),
            unmonitored_centroids: labels(net, &c.unmonitored_centroids),
            legacy_count_ok: c.legacy_count_ok,
            min_cut_size: c.min_cut_size,
            bpath_ok: c.bpath_ok,
            is_tree: c.is_tree,
            witness_cut: labels(net, &c.witness_cut),
            witness_paths: c.witness_paths.iter().map(|p| labels(net, p)).collect(),
            unknowns: c.unknowns,
            equations: c.equations,
            verdict: c.verdict,
            rule: c.rule,
            rank: c.rank.map(|r| r.rank),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnoseResponse {
    pub overall: Verdict,
    pub rank_fallback: bool,
    pub components: Vec<ComponentReport>,
}

impl DiagnoseResponse {
    pub fn new(net: &RoadNetwork, report: &DiagnosisReport) -> Self {
        DiagnoseResponse {
            overall: report.overall,
            rank_fallback: report.rank_fallback,
            components: report.components.iter().map(|c| ComponentReport::new(net, c)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Tree solver when every component was decided by the tree rule,
    /// otherwise the linear system.
    #[default]
    Auto,
    Linear,
    Tree,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveRequest {
    pub monitored: Vec<String>,
    pub observations: Vec<ArcFlow>,
    #[serde(default, with = "serde_string_map")]
    pub observed_balancing: BTreeMap<String, Rational>,
    #[serde(default)]
    pub method: SolveMethod,
}

impl SolveRequest {
    pub fn from_placement(net: &RoadNetwork, placement: &Placement) -> Self {
        let doc = NetworkDocument::with_placement(net, placement);
        SolveRequest {
            monitored: doc.monitored,
            observations: doc.observations,
            observed_balancing: doc.observed_balancing,
            method: SolveMethod::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnknownValue {
    pub label: String,
    #[serde(with = "serde_string")]
    pub value: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveResponse {
    /// Solver actually used: `linear` or `tree`.
    pub method: SolveMethod,
    /// Unknowns of the flow calculation system and their values.
    pub unknowns: Vec<UnknownValue>,
    pub flow: FlowDocument,
    /// Arcs with negative computed flow, e.g. `"ab"`.
    pub negative_arcs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplainRequest {
    pub monitored: Vec<String>,
    pub component: usize,
    /// Cut used for the zero-row certificate; defaults to the minimum cut.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<Vec<String>>,
}

/// A matrix with labelled rows and columns, entries as fraction strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelledMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub entries: Vec<Vec<String>>,
}

impl LabelledMatrix {
    fn new(rows: Vec<String>, columns: Vec<String>, m: &Matrix) -> Self {
        LabelledMatrix {
            rows,
            columns,
            entries: (0..m.rows())
                .map(|r| m.row(r).iter().map(format_rational).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub cut: Vec<String>,
    /// Vertex classes induced by the cut, keyed by name (`X_A(M)` etc.).
    pub partition: BTreeMap<String, Vec<String>>,
    pub submatrix: LabelledMatrix,
    pub zero_rows: Vec<String>,
    pub columns: usize,
    pub rows: usize,
    pub rank_bound: usize,
    /// True when `columns > rank_bound`, proving rank deficiency.
    pub obstructs: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplainResponse {
    pub component: ComponentReport,
    /// The component's block of the flow calculation matrix.
    pub block: LabelledMatrix,
    pub certificate: CertificateReport,
}

/// Error payload of every failing request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnosis: Option<DiagnoseResponse>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Malformed request or invalid network (HTTP 400).
    BadRequest,
    /// The placement does not determine the flow (HTTP 422).
    NotCalculable,
    /// Observations contradict every flow (HTTP 422).
    Inconsistent,
    /// No such component (HTTP 404).
    NotFound,
}

impl ErrorBody {
    pub fn status(&self) -> u16 {
        match self.kind {
            ErrorKind::BadRequest => 400,
            ErrorKind::NotCalculable | ErrorKind::Inconsistent => 422,
            ErrorKind::NotFound => 404,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ErrorBody {
            kind: ErrorKind::BadRequest,
            message: message.into(),
            violations: Vec::new(),
            diagnosis: None,
        }
    }

    fn of_kind(kind: ErrorKind, message: impl Into<String>) -> Self {
        ErrorBody {
            kind,
            ..ErrorBody::bad_request(message)
        }
    }
}

impl std::fmt::Display for ErrorBody {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)?;
        for v in &self.violations {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ErrorBody {}

impl From<DocumentError> for ErrorBody {
    fn from(e: DocumentError) -> Self {
        ErrorBody::bad_request(e.to_string())
    }
}

/// Fails with the network's violations, if any.
pub fn check_network(net: &RoadNetwork) -> Result<(), ErrorBody> {
    let violations = validate_network(net);
    if violations.is_empty() {
        return Ok(());
    }
    Err(ErrorBody {
        violations,
        ..ErrorBody::bad_request("network violates the model assumptions")
    })
}

fn run_diagnosis(
    net: &RoadNetwork,
    placement: &Placement,
    rank_fallback: bool,
    strict: bool,
) -> Result<DiagnosisReport, ErrorBody> {
    check_network(net)?;
    diagnose_with(net, placement, &DiagnoseOptions { rank_fallback, strict })
        .map_err(|e| ErrorBody::bad_request(e.to_string()))
}

pub fn diagnose(net: &RoadNetwork, req: &DiagnoseRequest) -> Result<DiagnoseResponse, ErrorBody> {
    let placement = Placement::topological(net, vertex_ids(net, &req.monitored)?);
    let report = run_diagnosis(net, &placement, req.rank_fallback, req.strict)?;
    Ok(DiagnoseResponse::new(net, &report))
}

/// Reconstructs the full flow. Refuses with the diagnosis unless every
/// component is calculable.
pub fn solve(net: &RoadNetwork, req: &SolveRequest) -> Result<SolveResponse, ErrorBody> {
    let placement = placement_from_parts(net, &req.monitored, &req.observations, &req.observed_balancing)?;
    if req.observations.is_empty() && req.observed_balancing.is_empty() && !placement.monitored.is_empty() {
        return Err(ErrorBody::bad_request(
            "solving needs the observed flows of the monitored vertices",
        ));
    }
    let report = run_diagnosis(net, &placement, true, false)?;
    if report.overall != Verdict::Calculable {
        return Err(ErrorBody {
            diagnosis: Some(DiagnoseResponse::new(net, &report)),
            ..ErrorBody::of_kind(
                ErrorKind::NotCalculable,
                "the monitored flows do not determine the full flow",
            )
        });
    }
    let all_trees = report
        .components
        .iter()
        .all(|c| matches!(c.rule, VerdictRule::TreeRule | VerdictRule::NoUnknowns));
    let method = match req.method {
        SolveMethod::Auto if all_trees => SolveMethod::Tree,
        SolveMethod::Auto => SolveMethod::Linear,
        SolveMethod::Tree if !all_trees => {
            return Err(ErrorBody::bad_request(
                "the tree solver needs every component to satisfy the tree rule",
            ))
        }
        other => other,
    };
    let sys = build_flow_system(net, &placement).map_err(|e| ErrorBody::bad_request(e.to_string()))?;
    let inconsistent = |message: String| ErrorBody::of_kind(ErrorKind::Inconsistent, message);
    let (flow, negative) = match method {
        SolveMethod::Tree => {
            let s = solve_by_tree(net, &placement).map_err(|e| inconsistent(e.to_string()))?;
            (s.flow, s.negative_arcs)
        }
        _ => match solve_flow(net, &placement, &sys) {
            Ok(s) => (s.full_flow, s.negative_arcs),
            Err(SolveError::Inconsistent { detail }) => return Err(inconsistent(detail)),
            Err(e) => return Err(ErrorBody::bad_request(e.to_string())),
        },
    };
    Ok(SolveResponse {
        method,
        unknowns: unknown_values(net, &sys, &flow),
        flow: FlowDocument::from_state(net, &flow),
        negative_arcs: negative.iter().map(|&a| net.arc_label(a)).collect(),
    })
}

fn unknown_values(net: &RoadNetwork, sys: &FlowSystem, flow: &FlowState) -> Vec<UnknownValue> {
    sys.unknowns
        .iter()
        .map(|u| UnknownValue {
            label: u.label(net),
            value: match *u {
                Unknown::Canonical { arc, .. } => flow.flow(arc).clone(),
                Unknown::Balancing { vertex } => flow.balancing[vertex.0].clone(),
            },
        })
        .collect()
}

/// The block of one component and a zero-row certificate for a cut.
pub fn explain(net: &RoadNetwork, req: &ExplainRequest) -> Result<ExplainResponse, ErrorBody> {
    let placement = Placement::topological(net, vertex_ids(net, &req.monitored)?);
    let report = run_diagnosis(net, &placement, true, false)?;
    let diagnosis = report
        .component(req.component)
        .ok_or_else(|| ErrorBody::of_kind(ErrorKind::NotFound, format!("no component {}", req.component)))?;
    let comp = unmonitored_components(net, &placement)
        .into_iter()
        .find(|c| c.id == req.component)
        .expect("diagnosis and components agree");
    let sys = build_flow_system(net, &placement).map_err(|e| ErrorBody::bad_request(e.to_string()))?;
    let block = sys.block(&comp);
    let unknown_labels = sys.unknown_labels(net);
    let block_report = LabelledMatrix::new(
        block.rows.iter().map(|&i| net.label(sys.rows[i]).to_string()).collect(),
        block.columns.iter().map(|&j| unknown_labels[j].clone()).collect(),
        &block.matrix,
    );
    let cut = match &req.cut {
        Some(labels) => vertex_ids(net, labels)?,
        None => diagnosis.witness_cut.clone(),
    };
    let fstar = fstar_submatrix(net, &sys, &comp, &cut).map_err(|e| ErrorBody::bad_request(e.to_string()))?;
    Ok(ExplainResponse {
        component: ComponentReport::new(net, diagnosis),
        block: block_report,
        certificate: certificate_report(net, &cut, &fstar),
    })
}

fn certificate_report(
    net: &RoadNetwork,
    cut: &std::collections::BTreeSet<crate::network::VertexId>,
    f: &FStar,
) -> CertificateReport {
    CertificateReport {
        cut: labels(net, cut),
        partition: f
            .partition
            .named()
            .iter()
            .map(|(name, set)| (name.to_string(), labels(net, *set)))
            .collect(),
        submatrix: LabelledMatrix::new(
            labels(net, &f.rows),
            f.columns.iter().map(|u| u.label(net)).collect(),
            &f.matrix,
        ),
        zero_rows: labels(net, &f.zero_rows),
        columns: f.k(),
        rows: f.r(),
        rank_bound: f.rank_bound(),
        obstructs: f.obstructs(),
    }
}
