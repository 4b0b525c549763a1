//! Two-way road networks with turning ratios, plus flow states on them.

use crate::rational::{is_zero, one, zero, Frac, Rational};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

/// Index of a vertex in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub usize);

/// Index of an arc in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArcId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arc {
    pub tail: VertexId,
    pub head: VertexId,
    /// Fraction of the traffic departing `tail` that uses this arc.
    pub ratio: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetworkError {
    #[error("vertex {0:?} declared twice")]
    DuplicateVertex(String),
    #[error("unknown vertex {0:?}")]
    UnknownVertex(String),
    #[error("vertex {0:?} mixes arcs with and without turning ratios")]
    PartialRatios(String),
}

/// A directed road network. Vertices and arcs keep their declaration order;
/// everything that needs a deterministic tie-break uses that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoadNetwork {
    labels: Vec<String>,
    index: HashMap<String, VertexId>,
    arcs: Vec<Arc>,
    out_arcs: Vec<Vec<ArcId>>,
    in_arcs: Vec<Vec<ArcId>>,
    lookup: HashMap<(VertexId, VertexId), ArcId>,
    centroids: BTreeSet<VertexId>,
}

impl RoadNetwork {
    pub fn builder() -> NetworkBuilder {
        NetworkBuilder::default()
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.labels.len()).map(VertexId)
    }

    pub fn arc_ids(&self) -> impl Iterator<Item = ArcId> + '_ {
        (0..self.arcs.len()).map(ArcId)
    }

    pub fn label(&self, v: VertexId) -> &str {
        &self.labels[v.0]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vertex(&self, label: &str) -> Option<VertexId> {
        self.index.get(label).copied()
    }

    pub fn arc(&self, id: ArcId) -> &Arc {
        &self.arcs[id.0]
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn find_arc(&self, tail: VertexId, head: VertexId) -> Option<ArcId> {
        self.lookup.get(&(tail, head)).copied()
    }

    /// Arc lookup by labels.
    pub fn arc_between(&self, tail: &str, head: &str) -> Option<ArcId> {
        self.find_arc(self.vertex(tail)?, self.vertex(head)?)
    }

    /// Outgoing arcs of `v`, sorted by head.
    pub fn out_arcs(&self, v: VertexId) -> &[ArcId] {
        &self.out_arcs[v.0]
    }

    /// Incoming arcs of `v`, sorted by tail.
    pub fn in_arcs(&self, v: VertexId) -> &[ArcId] {
        &self.in_arcs[v.0]
    }

    pub fn ratio(&self, id: ArcId) -> &Rational {
        &self.arcs[id.0].ratio
    }

    /// Turning ratio of `tail -> head`, zero when the arc does not exist.
    pub fn ratio_between(&self, tail: VertexId, head: VertexId) -> Rational {
        self.find_arc(tail, head)
            .map(|a| self.ratio(a).clone())
            .unwrap_or_else(zero)
    }

    /// Vertices joined to `v` by an arc in either direction, in vertex order.
    pub fn neighbors(&self, v: VertexId) -> Vec<VertexId> {
        let mut set: BTreeSet<VertexId> = self.out_arcs[v.0].iter().map(|a| self.arcs[a.0].head).collect();
        set.extend(self.in_arcs[v.0].iter().map(|a| self.arcs[a.0].tail));
        set.remove(&v);
        set.into_iter().collect()
    }

    /// True when no arc starts or ends at `v`.
    pub fn is_isolated(&self, v: VertexId) -> bool {
        self.out_arcs[v.0].is_empty() && self.in_arcs[v.0].is_empty()
    }

    pub fn centroids(&self) -> &BTreeSet<VertexId> {
        &self.centroids
    }

    pub fn is_centroid(&self, v: VertexId) -> bool {
        self.centroids.contains(&v)
    }

    pub fn arc_label(&self, id: ArcId) -> String {
        let arc = self.arc(id);
        format!("{}{}", self.label(arc.tail), self.label(arc.head))
    }

    pub fn format_vertices<'a>(&self, set: impl IntoIterator<Item = &'a VertexId>) -> String {
        let names: Vec<&str> = set.into_iter().map(|v| self.label(*v)).collect();
        format!("{{{}}}", names.join(", "))
    }

    /// Same graph with the centroid set replaced.
    pub fn with_centroids(&self, centroids: impl IntoIterator<Item = VertexId>) -> RoadNetwork {
        let mut net = self.clone();
        net.centroids = centroids.into_iter().collect();
        net
    }
}

#[derive(Debug, Default, Clone)]
pub struct NetworkBuilder {
    labels: Vec<String>,
    arcs: Vec<(String, String, Option<Rational>)>,
    centroids: Vec<String>,
}

impl NetworkBuilder {
    pub fn vertex(mut self, label: impl Into<String>) -> Self {
        self.labels.push(label.into());
        self
    }

    pub fn vertices<S: Into<String>>(mut self, labels: impl IntoIterator<Item = S>) -> Self {
        self.labels.extend(labels.into_iter().map(Into::into));
        self
    }

    pub fn arc(mut self, tail: impl Into<String>, head: impl Into<String>, ratio: Rational) -> Self {
        self.arcs.push((tail.into(), head.into(), Some(ratio)));
        self
    }

    /// Arc whose ratio is filled in uniformly (`1 / out-degree`) at build time.
    pub fn uniform_arc(mut self, tail: impl Into<String>, head: impl Into<String>) -> Self {
        self.arcs.push((tail.into(), head.into(), None));
        self
    }

    /// Both `u -> v` and `v -> u` with uniform ratios.
    pub fn road(self, u: &str, v: &str) -> Self {
        self.uniform_arc(u, v).uniform_arc(v, u)
    }

    pub fn centroid(mut self, label: impl Into<String>) -> Self {
        self.centroids.push(label.into());
        self
    }

    pub fn centroids<S: Into<String>>(mut self, labels: impl IntoIterator<Item = S>) -> Self {
        self.centroids.extend(labels.into_iter().map(Into::into));
        self
    }

    pub fn build(self) -> Result<RoadNetwork, NetworkError> {
        let mut index = HashMap::new();
        for (i, label) in self.labels.iter().enumerate() {
            if index.insert(label.clone(), VertexId(i)).is_some() {
                return Err(NetworkError::DuplicateVertex(label.clone()));
            }
        }
        let resolve = |label: &str| {
            index
                .get(label)
                .copied()
                .ok_or_else(|| NetworkError::UnknownVertex(label.to_string()))
        };
        let n = self.labels.len();
        let mut resolved = Vec::with_capacity(self.arcs.len());
        let mut uniform_tails = vec![None::<bool>; n];
        let mut degree = vec![0usize; n];
        for (tail, head, ratio) in &self.arcs {
            let t = resolve(tail)?;
            let h = resolve(head)?;
            let is_uniform = ratio.is_none();
            match uniform_tails[t.0] {
                Some(prev) if prev != is_uniform => return Err(NetworkError::PartialRatios(tail.clone())),
                _ => uniform_tails[t.0] = Some(is_uniform),
            }
            degree[t.0] += 1;
            resolved.push((t, h, ratio.clone()));
        }
        let arcs: Vec<Arc> = resolved
            .into_iter()
            .map(|(tail, head, ratio)| Arc {
                tail,
                head,
                ratio: ratio.unwrap_or_else(|| Rational::new(1.into(), (degree[tail.0] as i64).into())),
            })
            .collect();
        let mut out_arcs = vec![Vec::new(); n];
        let mut in_arcs = vec![Vec::new(); n];
        let mut lookup = HashMap::new();
        for (i, arc) in arcs.iter().enumerate() {
            out_arcs[arc.tail.0].push(ArcId(i));
            in_arcs[arc.head.0].push(ArcId(i));
            lookup.entry((arc.tail, arc.head)).or_insert(ArcId(i));
        }
        for list in &mut out_arcs {
            list.sort_by_key(|a| (arcs[a.0].head, *a));
        }
        for list in &mut in_arcs {
            list.sort_by_key(|a| (arcs[a.0].tail, *a));
        }
        let centroids = self
            .centroids
            .iter()
            .map(|c| resolve(c))
            .collect::<Result<BTreeSet<_>, _>>()?;
        Ok(RoadNetwork {
            labels: self.labels,
            index,
            arcs,
            out_arcs,
            in_arcs,
            lookup,
            centroids,
        })
    }
}

/// A broken network invariant, named by the offending vertex or arc.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Arc `tail -> head` exists but `head -> tail` does not.
    TwoWay {
        tail: String,
        head: String,
    },
    SelfLoop {
        vertex: String,
    },
    ParallelArc {
        tail: String,
        head: String,
    },
    RatioOutOfRange {
        tail: String,
        head: String,
        ratio: String,
    },
    RatioSum {
        vertex: String,
        sum: String,
    },
    /// Vertex has incoming arcs but nowhere to send traffic.
    NoOutgoingArc {
        vertex: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TwoWay { tail, head } => {
                write!(
                    f,
                    "two-way property: arc {tail}->{head} has no reverse arc {head}->{tail}"
                )
            }
            Violation::SelfLoop { vertex } => write!(f, "self-loop at {vertex}"),
            Violation::ParallelArc { tail, head } => write!(f, "duplicate arc {tail}->{head}"),
            Violation::RatioOutOfRange { tail, head, ratio } => {
                write!(f, "turning ratio of {tail}->{head} is {ratio}, outside [0, 1]")
            }
            Violation::RatioSum { vertex, sum } => {
                write!(f, "turning ratios leaving {vertex} sum to {sum}, not 1")
            }
            Violation::NoOutgoingArc { vertex } => write!(f, "vertex {vertex} has incoming arcs but no outgoing arc"),
        }
    }
}

/// Checks every network invariant and reports all violations found.
pub fn validate_network(net: &RoadNetwork) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();
    for arc in net.arcs() {
        let tail = net.label(arc.tail).to_string();
        let head = net.label(arc.head).to_string();
        if arc.tail == arc.head {
            violations.push(Violation::SelfLoop { vertex: tail.clone() });
        }
        if !seen.insert((arc.tail, arc.head)) {
            violations.push(Violation::ParallelArc {
                tail: tail.clone(),
                head: head.clone(),
            });
        }
        if arc.ratio.is_negative() || arc.ratio > one() {
            violations.push(Violation::RatioOutOfRange {
                tail: tail.clone(),
                head: head.clone(),
                ratio: Frac(&arc.ratio).to_string(),
            });
        }
        if arc.tail != arc.head && net.find_arc(arc.head, arc.tail).is_none() {
            violations.push(Violation::TwoWay { tail, head });
        }
    }
    for v in net.vertices() {
        let out = net.out_arcs(v);
        if out.is_empty() {
            if !net.in_arcs(v).is_empty() {
                violations.push(Violation::NoOutgoingArc {
                    vertex: net.label(v).to_string(),
                });
            }
            continue;
        }
        let sum: Rational = out.iter().map(|a| net.ratio(*a)).sum();
        if sum != one() {
            violations.push(Violation::RatioSum {
                vertex: net.label(v).to_string(),
                sum: Frac(&sum).to_string(),
            });
        }
    }
    violations
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TurningFactorError {
    #[error("arcs {0} and {1} do not leave the same vertex")]
    DifferentTails(String, String),
    #[error("reference arc {0} has turning ratio zero")]
    ZeroReference(String),
}

/// Ratio of two turning ratios at the same vertex: `c(v,u) / c(v,w)`, so that
/// `f(v,u) = factor * f(v,w)`.
pub fn turning_factor(net: &RoadNetwork, arc: ArcId, reference: ArcId) -> Result<Rational, TurningFactorError> {
    let (a, r) = (net.arc(arc), net.arc(reference));
    if a.tail != r.tail {
        return Err(TurningFactorError::DifferentTails(
            net.arc_label(arc),
            net.arc_label(reference),
        ));
    }
    if is_zero(&r.ratio) {
        return Err(TurningFactorError::ZeroReference(net.arc_label(reference)));
    }
    Ok(&a.ratio / &r.ratio)
}

/// Arc flows and balancing flows over a whole network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowState {
    /// Indexed by [`ArcId`].
    pub arc_flow: Vec<Rational>,
    /// Indexed by [`VertexId`]; positive means traffic injected at the vertex.
    pub balancing: Vec<Rational>,
}

impl FlowState {
    pub fn zero(net: &RoadNetwork) -> Self {
        FlowState {
            arc_flow: vec![zero(); net.arc_count()],
            balancing: vec![zero(); net.vertex_count()],
        }
    }

    pub fn flow(&self, arc: ArcId) -> &Rational {
        &self.arc_flow[arc.0]
    }

    pub fn inflow(&self, net: &RoadNetwork, v: VertexId) -> Rational {
        net.in_arcs(v).iter().map(|a| &self.arc_flow[a.0]).sum()
    }

    pub fn outflow(&self, net: &RoadNetwork, v: VertexId) -> Rational {
        net.out_arcs(v).iter().map(|a| &self.arc_flow[a.0]).sum()
    }

    pub fn negative_arcs(&self) -> Vec<ArcId> {
        self.arc_flow
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_negative())
            .map(|(i, _)| ArcId(i))
            .collect()
    }

    /// Arc flows keyed by `(tail label, head label)`.
    pub fn by_label(&self, net: &RoadNetwork) -> BTreeMap<(String, String), Rational> {
        net.arc_ids()
            .map(|a| {
                let arc = net.arc(a);
                (
                    (net.label(arc.tail).to_string(), net.label(arc.head).to_string()),
                    self.arc_flow[a.0].clone(),
                )
            })
            .collect()
    }
}

/// Where a flow state fails conservation or turning consistency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowDefect {
    /// `inflow - outflow + balancing` is `residual`, not zero.
    Conservation { vertex: VertexId, residual: Rational },
    /// The arc does not carry its turning-ratio share of the departing traffic.
    Turning { arc: ArcId, expected: Rational },
    /// Balancing flow at a vertex outside the centroid set.
    NonCentroidBalancing { vertex: VertexId },
}

/// Exact defect scan behind [`check_flow_state`].
///
/// Turning consistency is checked as `f(v,u) = c(v,u) * (traffic departing v)`,
/// where departing traffic is incoming traffic plus the balancing flow
/// generated at `v`. At non-centroids this is exactly `c(v,u) * inflow`.
pub fn flow_defects(net: &RoadNetwork, flow: &FlowState) -> Vec<FlowDefect> {
    let mut defects = Vec::new();
    for v in net.vertices() {
        let inflow = flow.inflow(net, v);
        let outflow = flow.outflow(net, v);
        let balance = &flow.balancing[v.0];
        let residual = &inflow - &outflow + balance;
        if !residual.is_zero() {
            defects.push(FlowDefect::Conservation { vertex: v, residual });
        }
        if !balance.is_zero() && !net.is_centroid(v) {
            defects.push(FlowDefect::NonCentroidBalancing { vertex: v });
        }
        let departing = inflow + balance;
        for &a in net.out_arcs(v) {
            let expected = net.ratio(a) * &departing;
            if flow.arc_flow[a.0] != expected {
                defects.push(FlowDefect::Turning { arc: a, expected });
            }
        }
    }
    defects
}

/// True iff conservation and turning consistency hold exactly everywhere.
pub fn check_flow_state(net: &RoadNetwork, flow: &FlowState) -> bool {
    flow.arc_flow.len() == net.arc_count()
        && flow.balancing.len() == net.vertex_count()
        && flow_defects(net, flow).is_empty()
}
