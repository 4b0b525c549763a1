//! The flow calculation system `F g = x`: reduction of the balance
//! equations to canonical-arc unknowns, folding in what monitoring reveals,
//! exact rank certification and solving.

use crate::linalg::{LinearSolution, Matrix};
use crate::monitoring::{adjacent_set, deduce_departure, Placement, UnmonitoredComponent};
use crate::network::{flow_defects, ArcId, FlowDefect, FlowState, RoadNetwork, VertexId};
use crate::rational::{format_rational, is_zero, zero, Rational};
use num_traits::{Signed, Zero};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

/// `|V| x |A|` incidence matrix: `-1` at the tail, `+1` at the head.
pub fn incidence_matrix(net: &RoadNetwork) -> Matrix {
    let mut e = Matrix::zeros(net.vertex_count(), net.arc_count());
    for a in net.arc_ids() {
        let arc = net.arc(a);
        e.add_to(arc.tail.0, a.0, &crate::rational::int(-1));
        e.add_to(arc.head.0, a.0, &crate::rational::one());
    }
    e
}

/// Which end of the ordered candidate list canonical arcs come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CanonicalOrder {
    #[default]
    First,
    Last,
}

/// Canonical outgoing arc per vertex: the smallest `(tail, head)` pair with a
/// nonzero turning ratio, preferring arcs into `M` at adjacent vertices.
/// Vertices without outgoing arcs get `None`.
pub fn select_canonical(
    net: &RoadNetwork,
    monitored: &BTreeSet<VertexId>,
    order: CanonicalOrder,
) -> Vec<Option<ArcId>> {
    let adjacent = adjacent_set(net, monitored);
    let pick = |mut candidates: Vec<ArcId>| match order {
        CanonicalOrder::First => candidates.first().copied(),
        CanonicalOrder::Last => candidates.pop(),
    };
    net.vertices()
        .map(|v| {
            let nonzero: Vec<ArcId> = net
                .out_arcs(v)
                .iter()
                .copied()
                .filter(|&a| !is_zero(net.ratio(a)))
                .collect();
            if adjacent.contains(&v) {
                let into_m: Vec<ArcId> = nonzero
                    .iter()
                    .copied()
                    .filter(|&a| monitored.contains(&net.arc(a).head))
                    .collect();
                if !into_m.is_empty() {
                    return pick(into_m);
                }
            }
            pick(nonzero)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FlowSystemError {
    #[error("canonical arc {0} has turning ratio zero")]
    ZeroRatioCanonical(String),
    #[error("canonical arc for {0} is missing or does not leave it")]
    BadCanonical(String),
    #[error("outflow of {0} cannot be deduced: every arc from it into the monitored set has turning ratio zero")]
    UnderdeterminedBoundary(String),
}

/// `Ê`: row `u` is the balance equation at `u` written in the canonical-arc
/// flows of every vertex.
pub fn reduced_matrix(net: &RoadNetwork, canonical: &[Option<ArcId>]) -> Result<Matrix, FlowSystemError> {
    check_canonical(net, canonical)?;
    let n = net.vertex_count();
    let mut e = Matrix::zeros(n, n);
    for v in net.vertices() {
        let Some(ev) = canonical[v.0] else { continue };
        let reference = net.ratio(ev);
        let mut diagonal = zero();
        for &a in net.out_arcs(v) {
            let alpha = net.ratio(a) / reference;
            e.add_to(net.arc(a).head.0, v.0, &alpha);
            diagonal -= alpha;
        }
        e.add_to(v.0, v.0, &diagonal);
    }
    Ok(e)
}

fn check_canonical(net: &RoadNetwork, canonical: &[Option<ArcId>]) -> Result<(), FlowSystemError> {
    if canonical.len() != net.vertex_count() {
        return Err(FlowSystemError::BadCanonical("<all vertices>".into()));
    }
    for v in net.vertices() {
        match canonical[v.0] {
            None if net.out_arcs(v).is_empty() => {}
            Some(a) if a.0 < net.arc_count() && net.arc(a).tail == v => {
                if is_zero(net.ratio(a)) {
                    return Err(FlowSystemError::ZeroRatioCanonical(net.arc_label(a)));
                }
            }
            _ => return Err(FlowSystemError::BadCanonical(net.label(v).to_string())),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Unknown {
    /// Flow on the canonical arc of the vertex.
    Canonical {
        vertex: VertexId,
        arc: ArcId,
    },
    Balancing {
        vertex: VertexId,
    },
}

impl Unknown {
    pub fn vertex(&self) -> VertexId {
        match *self {
            Unknown::Canonical { vertex, .. } | Unknown::Balancing { vertex } => vertex,
        }
    }

    pub fn label(&self, net: &RoadNetwork) -> String {
        match *self {
            Unknown::Canonical { arc, .. } => format!("f_{}", net.arc_label(arc)),
            Unknown::Balancing { vertex } => format!("S_{}", net.label(vertex)),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    /// Fail instead of keeping the column of an adjacent vertex whose
    /// outflow cannot be deduced.
    pub strict: bool,
    /// Overrides the default canonical arcs.
    pub canonical: Option<Vec<Option<ArcId>>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSystem {
    pub matrix: Matrix,
    /// Vertex of each row.
    pub rows: Vec<VertexId>,
    /// Label of each column.
    pub unknowns: Vec<Unknown>,
    pub rhs: Vec<Rational>,
    pub canonical: Vec<Option<ArcId>>,
    /// Canonical-arc flows fixed by monitoring or deduced at adjacent vertices.
    pub known_canonical: BTreeMap<VertexId, Rational>,
}

pub fn build_flow_system(net: &RoadNetwork, placement: &Placement) -> Result<FlowSystem, FlowSystemError> {
    build_flow_system_with(net, placement, &BuildOptions::default())
}

pub fn build_flow_system_with(
    net: &RoadNetwork,
    placement: &Placement,
    options: &BuildOptions,
) -> Result<FlowSystem, FlowSystemError> {
    let monitored = &placement.monitored;
    let canonical = match &options.canonical {
        Some(c) => c.clone(),
        None => select_canonical(net, monitored, CanonicalOrder::First),
    };
    let e_hat = reduced_matrix(net, &canonical)?;
    let n = net.vertex_count();
    let mut rhs = vec![zero(); n];
    let mut known_canonical = BTreeMap::new();
    let mut fold = |v: VertexId, value: Rational, rhs: &mut Vec<Rational>| {
        if !value.is_zero() {
            for (u, x) in rhs.iter_mut().enumerate() {
                let entry = e_hat.get(u, v.0);
                if !entry.is_zero() {
                    *x -= entry * &value;
                }
            }
        }
        known_canonical.insert(v, value);
    };
    for &m in monitored {
        if let Some(em) = canonical[m.0] {
            let observed = placement.observed_flow.get(&em).cloned().unwrap_or_else(zero);
            fold(m, observed, &mut rhs);
        }
    }
    for a in adjacent_set(net, monitored) {
        let Some(ea) = canonical[a.0] else { continue };
        match deduce_departure(net, placement, a) {
            Some((_, departure)) => fold(a, net.ratio(ea) * departure, &mut rhs),
            None if options.strict => return Err(FlowSystemError::UnderdeterminedBoundary(net.label(a).to_string())),
            None => {}
        }
    }
    let rows: Vec<VertexId> = net.vertices().filter(|v| !monitored.contains(v)).collect();
    let mut unknowns: Vec<Unknown> = rows
        .iter()
        .filter(|v| !known_canonical.contains_key(v))
        .filter_map(|&v| canonical[v.0].map(|arc| Unknown::Canonical { vertex: v, arc }))
        .collect();
    unknowns.extend(
        rows.iter()
            .filter(|&&v| net.is_centroid(v) && !net.is_isolated(v))
            .map(|&vertex| Unknown::Balancing { vertex }),
    );
    let mut matrix = Matrix::zeros(rows.len(), unknowns.len());
    for (i, &u) in rows.iter().enumerate() {
        for (j, unknown) in unknowns.iter().enumerate() {
            match *unknown {
                Unknown::Canonical { vertex, .. } => matrix.set(i, j, e_hat.get(u.0, vertex.0).clone()),
                Unknown::Balancing { vertex } if vertex == u => matrix.set(i, j, crate::rational::one()),
                Unknown::Balancing { .. } => {}
            }
        }
    }
    let rhs = rows.iter().map(|v| rhs[v.0].clone()).collect();
    Ok(FlowSystem {
        matrix,
        rows,
        unknowns,
        rhs,
        canonical,
        known_canonical,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankCertificate {
    pub rank: usize,
    pub columns: usize,
    pub full_column_rank: bool,
}

pub fn rank_certify(sys: &FlowSystem) -> RankCertificate {
    certify(&sys.matrix)
}

pub fn certify(matrix: &Matrix) -> RankCertificate {
    let rank = matrix.rank();
    RankCertificate {
        rank,
        columns: matrix.cols(),
        full_column_rank: rank == matrix.cols(),
    }
}

/// Rows and columns of `sys` belonging to one component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub rows: Vec<usize>,
    pub columns: Vec<usize>,
    pub matrix: Matrix,
}

impl FlowSystem {
    pub fn block(&self, component: &UnmonitoredComponent) -> Block {
        let rows: Vec<usize> = (0..self.rows.len())
            .filter(|&i| component.contains(self.rows[i]))
            .collect();
        let columns: Vec<usize> = (0..self.unknowns.len())
            .filter(|&j| component.contains(self.unknowns[j].vertex()))
            .collect();
        let matrix = self.matrix.select(&rows, &columns);
        Block { rows, columns, matrix }
    }

    pub fn row_index(&self, v: VertexId) -> Option<usize> {
        self.rows.iter().position(|&r| r == v)
    }

    pub fn unknown_labels(&self, net: &RoadNetwork) -> Vec<String> {
        self.unknowns.iter().map(|u| u.label(net)).collect()
    }

    /// Multi-line dump with labelled rows and columns, entries as fractions.
    pub fn display<'a>(&'a self, net: &'a RoadNetwork) -> impl fmt::Display + 'a {
        LabelledSystem { sys: self, net }
    }
}

struct LabelledSystem<'a> {
    sys: &'a FlowSystem,
    net: &'a RoadNetwork,
}

impl fmt::Display for LabelledSystem<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self.sys.rows.iter().map(|v| self.net.label(*v).to_string()).collect();
        write_labelled(
            f,
            &rows,
            &self.sys.unknown_labels(self.net),
            &self.sys.matrix,
            Some(&self.sys.rhs),
        )
    }
}

/// Writes a matrix with row labels, column headers and an optional
/// right-hand side column.
pub fn write_labelled(
    f: &mut dyn fmt::Write,
    rows: &[String],
    columns: &[String],
    matrix: &Matrix,
    rhs: Option<&[Rational]>,
) -> fmt::Result {
    let cell = |r: usize, c: usize| format_rational(matrix.get(r, c));
    let widths: Vec<usize> = (0..matrix.cols())
        .map(|c| {
            (0..matrix.rows())
                .map(|r| cell(r, c).len())
                .chain([columns[c].len()])
                .max()
                .unwrap_or(1)
        })
        .collect();
    let label_width = rows.iter().map(String::len).max().unwrap_or(0);
    let header: Vec<String> = columns.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
    writeln!(f, "{:label_width$}   {}", "", header.join(" "))?;
    for r in 0..matrix.rows() {
        let line: Vec<String> = widths
            .iter()
            .enumerate()
            .map(|(c, w)| format!("{:>w$}", cell(r, c)))
            .collect();
        match rhs {
            Some(x) => writeln!(
                f,
                "{:>label_width$}: [ {} ] | {}",
                rows[r],
                line.join(" "),
                format_rational(&x[r])
            )?,
            None => writeln!(f, "{:>label_width$}: [ {} ]", rows[r], line.join(" "))?,
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Build(#[from] FlowSystemError),
    #[error("flow calculation matrix has rank {rank} but {columns} unknowns; the flow is not uniquely determined")]
    RankDeficient { rank: usize, columns: usize },
    #[error("observations are inconsistent with every flow: {detail}")]
    Inconsistent { detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSolution {
    /// Value of each unknown, in column order.
    pub values: Vec<(Unknown, Rational)>,
    pub full_flow: FlowState,
    /// Arcs whose computed flow is negative.
    pub negative_arcs: Vec<ArcId>,
}

/// Solves `F g = x` exactly and expands the result to every arc.
pub fn solve_flow(net: &RoadNetwork, placement: &Placement, sys: &FlowSystem) -> Result<FlowSolution, SolveError> {
    let g = match sys.matrix.solve(&sys.rhs) {
        LinearSolution::Unique(g) => g,
        LinearSolution::RankDeficient { rank } => {
            return Err(SolveError::RankDeficient {
                rank,
                columns: sys.unknowns.len(),
            })
        }
        LinearSolution::Inconsistent { rank } => {
            return Err(SolveError::Inconsistent {
                detail: format!("F g = x has no solution (rank {rank}, residual nonzero)"),
            })
        }
    };
    let mut canonical_flow = sys.known_canonical.clone();
    let mut balancing = vec![zero(); net.vertex_count()];
    for (unknown, value) in sys.unknowns.iter().zip(&g) {
        match *unknown {
            Unknown::Canonical { vertex, .. } => {
                canonical_flow.insert(vertex, value.clone());
            }
            Unknown::Balancing { vertex } => balancing[vertex.0] = value.clone(),
        }
    }
    for (v, s) in &placement.observed_balancing {
        balancing[v.0] = s.clone();
    }
    let mut flow = FlowState {
        arc_flow: vec![zero(); net.arc_count()],
        balancing,
    };
    for v in net.vertices() {
        let Some(ev) = sys.canonical[v.0] else { continue };
        let departing = canonical_flow.get(&v).cloned().unwrap_or_else(zero) / net.ratio(ev);
        for &a in net.out_arcs(v) {
            flow.arc_flow[a.0] = net.ratio(a) * &departing;
        }
    }
    for (a, observed) in &placement.observed_flow {
        flow.arc_flow[a.0] = observed.clone();
    }
    let defects = flow_defects(net, &flow);
    if let Some(first) = defects.first() {
        return Err(SolveError::Inconsistent {
            detail: describe_defect(net, first, defects.len()),
        });
    }
    let negative_arcs = flow
        .arc_flow
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_negative())
        .map(|(i, _)| ArcId(i))
        .collect();
    Ok(FlowSolution {
        values: sys.unknowns.iter().copied().zip(g).collect(),
        full_flow: flow,
        negative_arcs,
    })
}

pub(crate) fn describe_defect(net: &RoadNetwork, defect: &FlowDefect, total: usize) -> String {
    let what = match defect {
        FlowDefect::Conservation { vertex, residual } => format!(
            "conservation fails at {} (residual {})",
            net.label(*vertex),
            format_rational(residual)
        ),
        FlowDefect::Turning { arc, expected } => format!(
            "arc {} does not follow the turning ratios (expected {})",
            net.arc_label(*arc),
            format_rational(expected)
        ),
        FlowDefect::NonCentroidBalancing { vertex } => {
            format!("balancing flow at non-centroid {}", net.label(*vertex))
        }
    };
    if total > 1 {
        format!("{what}, and {} more", total - 1)
    } else {
        what
    }
}

/// The named vertex classes induced by a cut `C` between `(B - M)_i` and
/// `A(M)_i`. `X_` sets are intersections of `A(M)`, `C` and `B - M`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CutPartition {
    /// Other vertices on the monitored side of the cut.
    pub v_m: BTreeSet<VertexId>,
    /// Other vertices on the centroid side of the cut.
    pub v_b: BTreeSet<VertexId>,
    pub x_a: BTreeSet<VertexId>,
    pub x_c: BTreeSet<VertexId>,
    pub x_b: BTreeSet<VertexId>,
    pub x_ac: BTreeSet<VertexId>,
    pub x_cb: BTreeSet<VertexId>,
    pub x_acb: BTreeSet<VertexId>,
}

impl CutPartition {
    /// `(name, members)` in display order.
    pub fn named(&self) -> [(&'static str, &BTreeSet<VertexId>); 8] {
        [
            ("V_M", &self.v_m),
            ("V_B", &self.v_b),
            ("X_A(M)", &self.x_a),
            ("X_C", &self.x_c),
            ("X_B-M", &self.x_b),
            ("X_A(M),C", &self.x_ac),
            ("X_C,B-M", &self.x_cb),
            ("X_A(M),C,B-M", &self.x_acb),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FStarError {
    #[error("cut does not separate the unmonitored centroids from the adjacent vertices: {0}")]
    InvalidCut(String),
}

/// The column-selected submatrix used to certify rank deficiency, with its
/// zero rows and the bound `K <= R - Z`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FStar {
    pub partition: CutPartition,
    pub rows: Vec<VertexId>,
    pub columns: Vec<Unknown>,
    pub matrix: Matrix,
    pub zero_rows: Vec<VertexId>,
}

impl FStar {
    /// `K`, the number of columns.
    pub fn k(&self) -> usize {
        self.columns.len()
    }

    /// `R`, the number of rows.
    pub fn r(&self) -> usize {
        self.rows.len()
    }

    /// `Z`, the number of zero rows.
    pub fn z(&self) -> usize {
        self.zero_rows.len()
    }

    /// Upper bound on the rank of `F*`.
    pub fn rank_bound(&self) -> usize {
        self.r() - self.z()
    }

    /// True when the zero rows alone prove `F` is not of full column rank.
    pub fn obstructs(&self) -> bool {
        self.k() > self.rank_bound()
    }
}

pub fn fstar_submatrix(
    net: &RoadNetwork,
    sys: &FlowSystem,
    component: &UnmonitoredComponent,
    cut: &BTreeSet<VertexId>,
) -> Result<FStar, FStarError> {
    let a = &component.adjacent;
    let b = &component.unmonitored_centroids;
    if let Some(v) = cut.iter().find(|v| !component.contains(**v)) {
        return Err(FStarError::InvalidCut(format!(
            "{} is outside the component",
            net.label(*v)
        )));
    }
    let both: Vec<&VertexId> = a.intersection(b).filter(|v| !cut.contains(v)).collect();
    if let Some(v) = both.first() {
        return Err(FStarError::InvalidCut(format!(
            "{} is both adjacent and a centroid but not in the cut",
            net.label(**v)
        )));
    }
    let b_side = reach_avoiding(net, component, b, cut);
    if let Some(v) = b_side.iter().find(|v| a.contains(v)) {
        return Err(FStarError::InvalidCut(format!(
            "{} is reachable from a centroid without crossing the cut",
            net.label(*v)
        )));
    }
    let mut p = CutPartition::default();
    for &v in &component.vertices {
        let (in_a, in_c, in_b) = (a.contains(&v), cut.contains(&v), b.contains(&v));
        let set = match (in_a, in_c, in_b) {
            (true, false, false) => &mut p.x_a,
            (false, true, false) => &mut p.x_c,
            (false, false, true) => &mut p.x_b,
            (true, true, false) => &mut p.x_ac,
            (false, true, true) => &mut p.x_cb,
            (true, true, true) => &mut p.x_acb,
            (true, false, true) => unreachable!("rejected above"),
            // Vertices cut off from both sides are placed with the monitored side.
            (false, false, false) if b_side.contains(&v) => &mut p.v_b,
            (false, false, false) => &mut p.v_m,
        };
        set.insert(v);
    }
    let block = sys.block(component);
    let selected: Vec<usize> = block
        .columns
        .iter()
        .copied()
        .filter(|&j| match sys.unknowns[j] {
            Unknown::Canonical { vertex, .. } => p.x_b.contains(&vertex) || p.v_b.contains(&vertex),
            Unknown::Balancing { vertex } => b.contains(&vertex),
        })
        .collect();
    let matrix = sys.matrix.select(&block.rows, &selected);
    let rows: Vec<VertexId> = block.rows.iter().map(|&i| sys.rows[i]).collect();
    let zero_rows = (0..matrix.rows())
        .filter(|&i| matrix.is_zero_row(i))
        .map(|i| rows[i])
        .collect();
    Ok(FStar {
        partition: p,
        rows,
        columns: selected.iter().map(|&j| sys.unknowns[j]).collect(),
        matrix,
        zero_rows,
    })
}

/// Component vertices reachable from `sources` without entering `blocked`.
fn reach_avoiding(
    net: &RoadNetwork,
    component: &UnmonitoredComponent,
    sources: &BTreeSet<VertexId>,
    blocked: &BTreeSet<VertexId>,
) -> BTreeSet<VertexId> {
    let mut seen: BTreeSet<VertexId> = sources.iter().copied().filter(|v| !blocked.contains(v)).collect();
    let mut queue: VecDeque<VertexId> = seen.iter().copied().collect();
    while let Some(v) = queue.pop_front() {
        for u in component.neighbors(net, v) {
            if !blocked.contains(&u) && seen.insert(u) {
                queue.push_back(u);
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, vertex_set};
    use crate::monitoring::unmonitored_components;
    use crate::network::check_flow_state;
    use crate::rational::int;

    fn ints(values: &[i64]) -> Vec<Rational> {
        values.iter().map(|&v| int(v)).collect()
    }

    #[test]
    fn incidence_of_two_vertex_network() {
        let net = RoadNetwork::builder()
            .vertices(["u", "v"])
            .road("u", "v")
            .build()
            .unwrap();
        assert_eq!(incidence_matrix(&net), Matrix::from_i64(&[&[-1, 1], &[1, -1]]));
        let e_hat = reduced_matrix(&net, &select_canonical(&net, &BTreeSet::new(), CanonicalOrder::First)).unwrap();
        assert_eq!(e_hat, Matrix::from_i64(&[&[-1, 1], &[1, -1]]));
    }

    #[test]
    fn incidence_columns_sum_to_zero() {
        let net = fixtures::six_vertex_network();
        let e = incidence_matrix(&net);
        assert_eq!((e.rows(), e.cols()), (6, 12));
        for c in 0..e.cols() {
            let col = e.column(c);
            assert_eq!(col.iter().filter(|x| **x == int(1)).count(), 1);
            assert_eq!(col.iter().filter(|x| **x == int(-1)).count(), 1);
        }
        let empty = RoadNetwork::builder().vertices(["x", "y"]).build().unwrap();
        assert_eq!(incidence_matrix(&empty).cols(), 0);
    }

    #[test]
    fn six_vertex_reduced_diagonal_at_d() {
        let net = fixtures::six_vertex_network();
        let canonical = select_canonical(&net, &BTreeSet::new(), CanonicalOrder::First);
        let e_hat = reduced_matrix(&net, &canonical).unwrap();
        let d = net.vertex("d").unwrap().0;
        assert_eq!(e_hat.get(d, d), &int(-4));
        let (b, e) = (net.vertex("b").unwrap().0, net.vertex("e").unwrap().0);
        assert!(e_hat.get(b, e).is_zero());
    }

    #[test]
    fn zero_ratio_canonical_is_rejected() {
        let net = RoadNetwork::builder()
            .vertices(["v", "u", "w"])
            .arc("v", "u", int(1))
            .arc("v", "w", int(0))
            .arc("u", "v", int(1))
            .arc("w", "v", int(1))
            .build()
            .unwrap();
        let mut canonical = select_canonical(&net, &BTreeSet::new(), CanonicalOrder::First);
        assert_eq!(canonical[0], net.arc_between("v", "u"));
        canonical[0] = net.arc_between("v", "w");
        assert!(matches!(
            reduced_matrix(&net, &canonical),
            Err(FlowSystemError::ZeroRatioCanonical(_))
        ));
    }

    #[test]
    fn pentagon_system_matches_reference() {
        let net = fixtures::pentagon_network();
        let sys = build_flow_system(&net, &fixtures::pentagon_placement(&net)).unwrap();
        assert_eq!(sys.unknown_labels(&net), ["f_ab", "f_ba", "S_b", "S_d", "S_f"]);
        assert_eq!(
            sys.matrix,
            Matrix::from_i64(&[
                &[-2, 1, 0, 0, 0],
                &[1, -3, 1, 0, 0],
                &[1, 0, 0, 0, 0],
                &[0, 1, 0, 1, 0],
                &[0, 1, 0, 0, 1],
            ])
        );
        assert_eq!(sys.rhs, ints(&[-3, -6, 5, 1, 8]));
        let cert = rank_certify(&sys);
        assert_eq!((cert.rank, cert.full_column_rank), (5, true));
        let solution = solve_flow(&net, &fixtures::pentagon_placement(&net), &sys).unwrap();
        let values: Vec<Rational> = solution.values.iter().map(|(_, v)| v.clone()).collect();
        assert_eq!(values, ints(&[5, 7, 10, -6, 1]));
        assert!(check_flow_state(&net, &solution.full_flow));
        assert_eq!(solution.full_flow, fixtures::pentagon_ground_truth(&net));
    }

    #[test]
    fn pentagon_with_alternate_canonical_arcs_gives_same_system() {
        let net = fixtures::pentagon_network();
        let placement = fixtures::pentagon_placement(&net);
        let canonical = ["ab", "ba", "ca", "db", "ed", "fb"]
            .iter()
            .map(|l| net.arc_between(&l[..1], &l[1..]))
            .collect();
        let options = BuildOptions {
            strict: true,
            canonical: Some(canonical),
        };
        let alternate = build_flow_system_with(&net, &placement, &options).unwrap();
        let ours = build_flow_system(&net, &placement).unwrap();
        assert_eq!(alternate.matrix, ours.matrix);
        assert_eq!(alternate.rhs, ours.rhs);
    }

    #[test]
    fn six_vertex_system_matches_reference() {
        let net = fixtures::six_vertex_network();
        let placement = fixtures::six_vertex_placement(&net);
        let sys = build_flow_system(&net, &placement).unwrap();
        assert_eq!(sys.unknown_labels(&net), ["f_cb", "f_ed", "f_fd", "S_e", "S_f"]);
        assert_eq!(
            sys.matrix,
            Matrix::from_i64(&[
                &[1, 0, 0, 0, 0],
                &[-2, 0, 0, 0, 0],
                &[1, 1, 1, 0, 0],
                &[0, -1, 0, 1, 0],
                &[0, 0, -1, 0, 1],
            ])
        );
        assert_eq!(sys.rhs, ints(&[4, -8, 12, -4, -4]));
        assert_eq!(rank_certify(&sys).rank, 4);
        assert_eq!(
            solve_flow(&net, &placement, &sys),
            Err(SolveError::RankDeficient { rank: 4, columns: 5 })
        );
    }

    #[test]
    fn monitoring_everything_gives_empty_system() {
        let net = fixtures::pentagon_network();
        let truth = fixtures::pentagon_ground_truth(&net);
        let placement = crate::scenario::observe(&net, &truth, &net.vertices().collect());
        let sys = build_flow_system(&net, &placement).unwrap();
        assert_eq!((sys.matrix.rows(), sys.matrix.cols()), (0, 0));
        assert_eq!(solve_flow(&net, &placement, &sys).unwrap().full_flow, truth);
    }

    #[test]
    fn inconsistent_observations_are_reported() {
        let net = fixtures::pentagon_network();
        let mut placement = fixtures::pentagon_placement(&net);
        *placement
            .observed_flow
            .get_mut(&net.arc_between("c", "e").unwrap())
            .unwrap() = int(4);
        let sys = build_flow_system(&net, &placement).unwrap();
        assert!(matches!(
            solve_flow(&net, &placement, &sys),
            Err(SolveError::Inconsistent { .. })
        ));
    }

    #[test]
    fn strict_mode_rejects_undeducible_adjacent_vertex() {
        // a's only arc into the monitored vertex m has ratio zero.
        let net = RoadNetwork::builder()
            .vertices(["m", "a", "b"])
            .uniform_arc("m", "a")
            .arc("a", "m", int(0))
            .arc("a", "b", int(1))
            .uniform_arc("b", "a")
            .build()
            .unwrap();
        let placement = Placement::topological(&net, vertex_set(&net, ["m"]));
        let strict = BuildOptions {
            strict: true,
            canonical: None,
        };
        assert_eq!(
            build_flow_system_with(&net, &placement, &strict),
            Err(FlowSystemError::UnderdeterminedBoundary("a".into()))
        );
        let lenient = build_flow_system(&net, &placement).unwrap();
        assert_eq!(lenient.unknown_labels(&net), ["f_ab", "f_ba"]);
    }

    #[test]
    fn six_vertex_fstar_has_zero_rows_b_c() {
        let net = fixtures::six_vertex_network();
        let placement = fixtures::six_vertex_placement(&net);
        let sys = build_flow_system(&net, &placement).unwrap();
        let comp = &unmonitored_components(&net, &placement)[0];
        let fstar = fstar_submatrix(&net, &sys, comp, &vertex_set(&net, ["d"])).unwrap();
        assert_eq!(fstar.partition.x_a, vertex_set(&net, ["b"]));
        assert_eq!(fstar.partition.v_m, vertex_set(&net, ["c"]));
        assert_eq!(fstar.partition.x_ac, vertex_set(&net, ["d"]));
        assert_eq!(fstar.partition.x_b, vertex_set(&net, ["e", "f"]));
        let labels: Vec<String> = fstar.columns.iter().map(|u| u.label(&net)).collect();
        assert_eq!(labels, ["f_ed", "f_fd", "S_e", "S_f"]);
        assert_eq!(
            fstar.matrix,
            Matrix::from_i64(&[
                &[0, 0, 0, 0],
                &[0, 0, 0, 0],
                &[1, 1, 0, 0],
                &[-1, 0, 1, 0],
                &[0, -1, 0, 1]
            ])
        );
        assert_eq!(
            fstar.zero_rows,
            vertex_set(&net, ["b", "c"]).into_iter().collect::<Vec<_>>()
        );
        assert_eq!(fstar.rank_bound(), 3);
        assert!(fstar.obstructs());
    }

    #[test]
    fn fstar_rejects_non_separating_cut() {
        let net = fixtures::six_vertex_network();
        let placement = fixtures::six_vertex_placement(&net);
        let sys = build_flow_system(&net, &placement).unwrap();
        let comp = &unmonitored_components(&net, &placement)[0];
        assert!(matches!(
            fstar_submatrix(&net, &sys, comp, &vertex_set(&net, ["c"])),
            Err(FStarError::InvalidCut(_))
        ));
    }

    #[test]
    fn fstar_without_centroids_selects_nothing() {
        let net = RoadNetwork::builder()
            .vertices(["m", "p", "q"])
            .road("m", "p")
            .road("p", "q")
            .build()
            .unwrap();
        let placement = Placement::topological(&net, vertex_set(&net, ["m"]));
        let sys = build_flow_system(&net, &placement).unwrap();
        let comp = &unmonitored_components(&net, &placement)[0];
        let fstar = fstar_submatrix(&net, &sys, comp, &BTreeSet::new()).unwrap();
        assert!(fstar.columns.is_empty());
        assert!(!fstar.obstructs());
    }
}
