//! Topological calculability tests and the verdict engine.
//!
//! Three tests run on every unmonitored component:
//!
//! * the counting condition `|(B - M)_i| <= |A(M)_i|`, kept for comparison;
//! * the B-path condition: the minimum vertex cut between `(B - M)_i` and
//!   `A(M)_i` must have `|(B - M)_i|` vertices (necessary in general);
//! * the tree test, under which the B-path condition is also sufficient.
//!
//! Components that are not trees but pass the B-path condition get an
//! `Undetermined` verdict, optionally resolved by the exact rank of their
//! block of the flow calculation matrix.

use crate::flow_system::{build_flow_system_with, certify, BuildOptions, FlowSystemError, RankCertificate};
use crate::monitoring::{unmonitored_components, Placement, UnmonitoredComponent};
use crate::network::{RoadNetwork, VertexId};
use crate::rational::is_zero;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// The counting condition: no more unmonitored centroids than adjacent
/// vertices.
pub fn legacy_condition(component: &UnmonitoredComponent) -> bool {
    component.unmonitored_centroids.len() <= component.adjacent.len()
}

/// True iff the component's undirected structure is a tree.
pub fn tree_test(net: &RoadNetwork, component: &UnmonitoredComponent) -> bool {
    // Components are connected by construction.
    component.edges(net).len() + 1 == component.vertices.len()
}

/// Minimum vertex cut between the unmonitored centroids and the adjacent
/// vertices of a component, with a maximum set of disjoint B-paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexCut {
    pub size: usize,
    pub cut: BTreeSet<VertexId>,
    /// Vertex-disjoint B-paths, each from a centroid to an adjacent vertex.
    pub paths: Vec<Vec<VertexId>>,
}

struct Edge {
    to: usize,
    cap: i64,
    flow: i64,
}

/// Unit-capacity max flow on the vertex-split graph (Edmonds-Karp).
struct SplitGraph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl SplitGraph {
    fn new(nodes: usize) -> Self {
        SplitGraph {
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: i64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap, flow: 0 });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge {
            to: from,
            cap: 0,
            flow: 0,
        });
    }

    fn residual(&self, e: usize) -> i64 {
        self.edges[e].cap - self.edges[e].flow
    }

    /// BFS parents in the residual graph; `None` for unreached nodes.
    fn bfs(&self, source: usize) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.adj.len()];
        let mut seen = vec![false; self.adj.len()];
        seen[source] = true;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.edges[e].to;
                if !seen[v] && self.residual(e) > 0 {
                    seen[v] = true;
                    parent[v] = Some(e);
                    queue.push_back(v);
                }
            }
        }
        parent
    }

    fn max_flow(&mut self, source: usize, sink: usize) -> usize {
        let mut total = 0;
        loop {
            let parent = self.bfs(source);
            if parent[sink].is_none() {
                return total;
            }
            let mut v = sink;
            while v != source {
                let e = parent[v].expect("path reaches the source");
                self.edges[e].flow += 1;
                self.edges[e ^ 1].flow -= 1;
                v = self.edges[e ^ 1].to;
            }
            total += 1;
        }
    }
}

impl Edge {
    fn carries(&self) -> bool {
        self.cap > 0 && self.flow > 0
    }
}

/// Computes the minimum vertex cut by splitting every vertex into an in-node
/// and an out-node joined by a unit link. A vertex that is both a centroid
/// and adjacent is its own one-vertex B-path.
pub fn min_vertex_cut(net: &RoadNetwork, component: &UnmonitoredComponent) -> VertexCut {
    let sources = &component.unmonitored_centroids;
    let sinks = &component.adjacent;
    if sources.is_empty() {
        return VertexCut {
            size: 0,
            cut: BTreeSet::new(),
            paths: Vec::new(),
        };
    }
    let local: Vec<VertexId> = component.vertices.iter().copied().collect();
    let index: BTreeMap<VertexId, usize> = local.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let k = local.len();
    let (source, sink) = (2 * k, 2 * k + 1);
    let infinite = k as i64 + 1;
    let mut g = SplitGraph::new(2 * k + 2);
    for i in 0..k {
        g.add(2 * i, 2 * i + 1, 1);
    }
    for &a in &component.arcs {
        let arc = net.arc(a);
        g.add(2 * index[&arc.tail] + 1, 2 * index[&arc.head], infinite);
    }
    for b in sources {
        g.add(source, 2 * index[b], infinite);
    }
    for a in sinks {
        g.add(2 * index[a] + 1, sink, infinite);
    }
    let size = g.max_flow(source, sink);

    let reached = g.bfs(source);
    let reachable = |node: usize| node == source || reached[node].is_some();
    let cut = (0..k)
        .filter(|&i| reachable(2 * i) && !reachable(2 * i + 1))
        .map(|i| local[i])
        .collect();

    let mut paths = Vec::with_capacity(size);
    for &start in &g.adj[source] {
        if !g.edges[start].carries() {
            continue;
        }
        let mut walk = Vec::new();
        let mut node = g.edges[start].to;
        while node != sink {
            if node % 2 == 0 {
                walk.push(local[node / 2]);
            }
            let next = g.adj[node]
                .iter()
                .find(|&&e| g.edges[e].carries())
                .expect("flow is conserved along the path");
            node = g.edges[*next].to;
        }
        paths.push(trim_path(&walk, sources, sinks));
    }
    VertexCut { size, cut, paths }
}

/// Shortens a flow path to run from its last centroid to the first adjacent
/// vertex after it.
fn trim_path(walk: &[VertexId], sources: &BTreeSet<VertexId>, sinks: &BTreeSet<VertexId>) -> Vec<VertexId> {
    let start = walk.iter().rposition(|v| sources.contains(v)).unwrap_or(0);
    let end = (start..walk.len())
        .find(|&i| sinks.contains(&walk[i]))
        .unwrap_or(walk.len() - 1);
    walk[start..=end].to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Calculable,
    NotCalculable,
    Undetermined,
}

/// Which rule decided a component's verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictRule {
    /// Every flow in the component is already known.
    NoUnknowns,
    /// Fewer disjoint B-paths than unmonitored centroids.
    CutTooSmall,
    /// No adjacent vertex: nothing ties the component to observed flow.
    Detached,
    /// Tree component passing the B-path condition.
    TreeRule,
    /// Not a tree; topology alone cannot decide.
    NonTree,
    /// A tree, but with zero turning ratios or an outflow that cannot be
    /// deduced, which the tree argument does not cover.
    TreePreconditions,
    /// Decided by the exact rank of the component block.
    RankFull,
    RankDeficient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentDiagnosis {
    pub id: usize,
    pub vertices: BTreeSet<VertexId>,
    pub adjacent: BTreeSet<VertexId>,
    pub unmonitored_centroids: BTreeSet<VertexId>,
    pub legacy_count_ok: bool,
    pub min_cut_size: usize,
    pub bpath_ok: bool,
    pub is_tree: bool,
    pub witness_cut: BTreeSet<VertexId>,
    pub witness_paths: Vec<Vec<VertexId>>,
    /// Columns and rows of the component block.
    pub unknowns: usize,
    pub equations: usize,
    pub verdict: Verdict,
    pub rule: VerdictRule,
    /// Present when the rank fallback ran for this component.
    pub rank: Option<RankCertificate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagnosisReport {
    pub components: Vec<ComponentDiagnosis>,
    pub overall: Verdict,
    pub rank_fallback: bool,
}

impl DiagnosisReport {
    pub fn component(&self, id: usize) -> Option<&ComponentDiagnosis> {
        self.components.get(id)
    }
}

/// Calculable iff every component is; not calculable if any component is.
pub fn overall_verdict(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    let mut overall = Verdict::Calculable;
    for v in verdicts {
        match v {
            Verdict::NotCalculable => return Verdict::NotCalculable,
            Verdict::Undetermined => overall = Verdict::Undetermined,
            Verdict::Calculable => {}
        }
    }
    overall
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiagnoseOptions {
    pub rank_fallback: bool,
    pub strict: bool,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        DiagnoseOptions {
            rank_fallback: true,
            strict: false,
        }
    }
}

pub fn diagnose(net: &RoadNetwork, placement: &Placement, with_rank_fallback: bool) -> DiagnosisReport {
    let options = DiagnoseOptions {
        rank_fallback: with_rank_fallback,
        strict: false,
    };
    diagnose_with(net, placement, &options).expect("default canonical arcs are always valid")
}

/// Preconditions of the tree rule beyond the B-path condition: every arc
/// leaving a non-adjacent vertex has a positive ratio and every adjacent
/// vertex has a deducible outflow. Without them a tree can carry a free
/// circulation behind a zero ratio.
pub fn tree_rule_applies(net: &RoadNetwork, component: &UnmonitoredComponent) -> bool {
    component.adjacent.iter().all(|a| component.departures.contains_key(a))
        && component
            .vertices
            .iter()
            .filter(|v| !component.adjacent.contains(v))
            .all(|&v| net.out_arcs(v).iter().all(|&a| !is_zero(net.ratio(a))))
}

pub fn diagnose_with(
    net: &RoadNetwork,
    placement: &Placement,
    options: &DiagnoseOptions,
) -> Result<DiagnosisReport, FlowSystemError> {
    let build = BuildOptions {
        strict: options.strict,
        canonical: None,
    };
    let topology = Placement::topological(net, placement.monitored.clone());
    let sys = build_flow_system_with(net, &topology, &build)?;
    let components = unmonitored_components(net, &topology)
        .iter()
        .map(|comp| {
            let block = sys.block(comp);
            let cut = min_vertex_cut(net, comp);
            let bpath_ok = cut.size == comp.unmonitored_centroids.len();
            let is_tree = tree_test(net, comp);
            let (verdict, rule) = if block.columns.is_empty() {
                (Verdict::Calculable, VerdictRule::NoUnknowns)
            } else if !bpath_ok {
                (Verdict::NotCalculable, VerdictRule::CutTooSmall)
            } else if comp.adjacent.is_empty() {
                (Verdict::NotCalculable, VerdictRule::Detached)
            } else if is_tree && tree_rule_applies(net, comp) {
                (Verdict::Calculable, VerdictRule::TreeRule)
            } else if is_tree {
                (Verdict::Undetermined, VerdictRule::TreePreconditions)
            } else {
                (Verdict::Undetermined, VerdictRule::NonTree)
            };
            let mut diagnosis = ComponentDiagnosis {
                id: comp.id,
                vertices: comp.vertices.clone(),
                adjacent: comp.adjacent.clone(),
                unmonitored_centroids: comp.unmonitored_centroids.clone(),
                legacy_count_ok: legacy_condition(comp),
                min_cut_size: cut.size,
                bpath_ok,
                is_tree,
                witness_cut: cut.cut,
                witness_paths: cut.paths,
                unknowns: block.columns.len(),
                equations: block.rows.len(),
                verdict,
                rule,
                rank: None,
            };
            if verdict == Verdict::Undetermined && options.rank_fallback {
                let cert = certify(&block.matrix);
                diagnosis.rank = Some(cert);
                (diagnosis.verdict, diagnosis.rule) = if cert.full_column_rank {
                    (Verdict::Calculable, VerdictRule::RankFull)
                } else {
                    (Verdict::NotCalculable, VerdictRule::RankDeficient)
                };
            }
            diagnosis
        })
        .collect::<Vec<_>>();
    Ok(DiagnosisReport {
        overall: overall_verdict(components.iter().map(|c| c.verdict)),
        components,
        rank_fallback: options.rank_fallback,
    })
}
