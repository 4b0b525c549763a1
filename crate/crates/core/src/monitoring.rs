//! What a set of monitored intersections reveals, and the unmonitored
//! components left behind.

use crate::network::{ArcId, FlowState, RoadNetwork, VertexId};
use crate::rational::{is_zero, zero, Rational};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Monitored vertices and the flows they reveal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub monitored: BTreeSet<VertexId>,
    /// Every arc with an endpoint in `monitored`.
    pub observed_flow: BTreeMap<ArcId, Rational>,
    /// Every monitored centroid.
    pub observed_balancing: BTreeMap<VertexId, Rational>,
}

impl Placement {
    /// Placement with every observation set to zero. Ranks, cuts and verdicts
    /// only depend on topology, so this is enough for diagnosis.
    pub fn topological(net: &RoadNetwork, monitored: BTreeSet<VertexId>) -> Self {
        let flow = FlowState::zero(net);
        observe_flow(net, &flow, monitored)
    }
}

pub(crate) fn observe_flow(net: &RoadNetwork, flow: &FlowState, monitored: BTreeSet<VertexId>) -> Placement {
    let observed_flow = net
        .arc_ids()
        .filter(|&a| {
            let arc = net.arc(a);
            monitored.contains(&arc.tail) || monitored.contains(&arc.head)
        })
        .map(|a| (a, flow.flow(a).clone()))
        .collect();
    let observed_balancing = monitored
        .iter()
        .filter(|v| net.is_centroid(**v))
        .map(|&v| (v, flow.balancing[v.0].clone()))
        .collect();
    Placement {
        monitored,
        observed_flow,
        observed_balancing,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlacementError {
    #[error("no observed flow for arc {0}, which touches a monitored vertex")]
    MissingObservation(String),
    #[error("arc {0} is observed but touches no monitored vertex")]
    UnexpectedObservation(String),
    #[error("no observed balancing flow for monitored centroid {0}")]
    MissingBalancing(String),
    #[error("balancing flow given for {0}, which is not a monitored centroid")]
    UnexpectedBalancing(String),
    #[error("vertex index {0} is out of range")]
    UnknownVertex(usize),
}

/// Checks that the observations cover exactly what monitoring reveals.
pub fn validate_placement(net: &RoadNetwork, placement: &Placement) -> Result<(), PlacementError> {
    if let Some(v) = placement.monitored.iter().find(|v| v.0 >= net.vertex_count()) {
        return Err(PlacementError::UnknownVertex(v.0));
    }
    let touches = |a: ArcId| {
        let arc = net.arc(a);
        placement.monitored.contains(&arc.tail) || placement.monitored.contains(&arc.head)
    };
    for a in net.arc_ids() {
        if touches(a) && !placement.observed_flow.contains_key(&a) {
            return Err(PlacementError::MissingObservation(net.arc_label(a)));
        }
    }
    for &a in placement.observed_flow.keys() {
        if a.0 >= net.arc_count() || !touches(a) {
            return Err(PlacementError::UnexpectedObservation(if a.0 < net.arc_count() {
                net.arc_label(a)
            } else {
                format!("#{}", a.0)
            }));
        }
    }
    for &m in &placement.monitored {
        if net.is_centroid(m) && !placement.observed_balancing.contains_key(&m) {
            return Err(PlacementError::MissingBalancing(net.label(m).to_string()));
        }
    }
    for &v in placement.observed_balancing.keys() {
        if v.0 >= net.vertex_count() || !placement.monitored.contains(&v) || !net.is_centroid(v) {
            return Err(PlacementError::UnexpectedBalancing(if v.0 < net.vertex_count() {
                net.label(v).to_string()
            } else {
                format!("#{}", v.0)
            }));
        }
    }
    Ok(())
}

/// `A(M)`: unmonitored vertices joined by an arc to a monitored one.
pub fn adjacent_set(net: &RoadNetwork, monitored: &BTreeSet<VertexId>) -> BTreeSet<VertexId> {
    monitored
        .iter()
        .flat_map(|&m| net.neighbors(m))
        .filter(|v| !monitored.contains(v))
        .collect()
}

/// `C_M`: arcs with both endpoints in `M` or `A(M)`, in arc order.
pub fn combined_cutset(net: &RoadNetwork, monitored: &BTreeSet<VertexId>) -> BTreeSet<ArcId> {
    let mut known = adjacent_set(net, monitored);
    known.extend(monitored.iter().copied());
    net.arc_ids()
        .filter(|&a| {
            let arc = net.arc(a);
            known.contains(&arc.tail) && known.contains(&arc.head)
        })
        .collect()
}

/// One connected component of the network left after removing `C_M` and `M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnmonitoredComponent {
    pub id: usize,
    pub vertices: BTreeSet<VertexId>,
    /// Arcs of the unmonitored subgraph with both endpoints here.
    pub arcs: Vec<ArcId>,
    /// `A(M)_i`.
    pub adjacent: BTreeSet<VertexId>,
    /// `(B - M)_i`. A centroid without arcs is left out: conservation
    /// forces its balancing flow to zero.
    pub unmonitored_centroids: BTreeSet<VertexId>,
    /// Flows on arcs leaving an adjacent vertex towards a vertex outside
    /// `M` and `A(M)`, deduced from monitored out-flows by turning ratios.
    pub boundary_inflows: BTreeMap<ArcId, Rational>,
    /// Total departing traffic of each adjacent vertex whose outflow could be
    /// deduced: `f(a,u) = c(a,u) * departures[a]`.
    pub departures: BTreeMap<VertexId, Rational>,
    /// Known traffic reaching each adjacent vertex over `C_M` arcs. Missing
    /// when some feeding adjacent vertex has no deducible outflow.
    pub cutset_inflow: BTreeMap<VertexId, Rational>,
}

impl UnmonitoredComponent {
    pub fn contains(&self, v: VertexId) -> bool {
        self.vertices.contains(&v)
    }

    /// True when the component is a lone adjacent vertex that kept no arcs.
    pub fn is_isolated_adjacent(&self) -> bool {
        self.vertices.len() == 1 && self.arcs.is_empty() && self.adjacent.len() == 1
    }

    /// Undirected edges `(min, max)` of the component.
    pub fn edges(&self, net: &RoadNetwork) -> BTreeSet<(VertexId, VertexId)> {
        self.arcs
            .iter()
            .map(|&a| {
                let arc = net.arc(a);
                (arc.tail.min(arc.head), arc.tail.max(arc.head))
            })
            .collect()
    }

    /// Neighbours of `v` inside the component, in vertex order.
    pub fn neighbors(&self, net: &RoadNetwork, v: VertexId) -> Vec<VertexId> {
        let arcs: BTreeSet<ArcId> = self.arcs.iter().copied().collect();
        let mut out: BTreeSet<VertexId> = BTreeSet::new();
        for &a in net.out_arcs(v).iter().chain(net.in_arcs(v)) {
            if arcs.contains(&a) {
                let arc = net.arc(a);
                out.insert(if arc.tail == v { arc.head } else { arc.tail });
            }
        }
        out.into_iter().collect()
    }
}

/// Departing traffic of adjacent vertex `a`, deduced from the first arc into
/// `M` with a nonzero turning ratio.
pub(crate) fn deduce_departure(net: &RoadNetwork, placement: &Placement, a: VertexId) -> Option<(ArcId, Rational)> {
    net.out_arcs(a)
        .iter()
        .find(|&&arc| placement.monitored.contains(&net.arc(arc).head) && !is_zero(net.ratio(arc)))
        .map(|&arc| {
            let observed = placement.observed_flow.get(&arc).cloned().unwrap_or_else(zero);
            (arc, observed / net.ratio(arc))
        })
}

/// Splits the unmonitored subgraph into connected components, ordered by
/// their smallest vertex.
pub fn unmonitored_components(net: &RoadNetwork, placement: &Placement) -> Vec<UnmonitoredComponent> {
    let monitored = &placement.monitored;
    let adjacent = adjacent_set(net, monitored);
    let cutset = combined_cutset(net, monitored);
    let n = net.vertex_count();
    let remaining: Vec<ArcId> = net
        .arc_ids()
        .filter(|a| !cutset.contains(a))
        .filter(|&a| {
            let arc = net.arc(a);
            !monitored.contains(&arc.tail) && !monitored.contains(&arc.head)
        })
        .collect();
    let mut adj = vec![Vec::new(); n];
    for &a in &remaining {
        let arc = net.arc(a);
        adj[arc.tail.0].push(arc.head);
        adj[arc.head.0].push(arc.tail);
    }
    let departures: BTreeMap<VertexId, Rational> = adjacent
        .iter()
        .filter_map(|&a| deduce_departure(net, placement, a).map(|(_, t)| (a, t)))
        .collect();
    let mut owner = vec![usize::MAX; n];
    let mut groups: Vec<Vec<VertexId>> = Vec::new();
    for start in net.vertices().filter(|v| !monitored.contains(v)) {
        if owner[start.0] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut members = vec![start];
        owner[start.0] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v.0] {
                if owner[u.0] == usize::MAX {
                    owner[u.0] = id;
                    members.push(u);
                    queue.push_back(u);
                }
            }
        }
        groups.push(members);
    }
    let mut components: Vec<UnmonitoredComponent> = groups
        .into_iter()
        .enumerate()
        .map(|(id, members)| {
            let vertices: BTreeSet<VertexId> = members.into_iter().collect();
            let adjacent_i: BTreeSet<VertexId> = vertices.intersection(&adjacent).copied().collect();
            let mut boundary_inflows = BTreeMap::new();
            for &a in &adjacent_i {
                if let Some(t) = departures.get(&a) {
                    for &arc in net.out_arcs(a) {
                        let head = net.arc(arc).head;
                        if !adjacent.contains(&head) && !monitored.contains(&head) {
                            boundary_inflows.insert(arc, net.ratio(arc) * t);
                        }
                    }
                }
            }
            let cutset_inflow = adjacent_i
                .iter()
                .filter_map(|&a| {
                    let mut total = zero();
                    for &arc in net.in_arcs(a) {
                        if !cutset.contains(&arc) {
                            continue;
                        }
                        let tail = net.arc(arc).tail;
                        if monitored.contains(&tail) {
                            total += placement.observed_flow.get(&arc).cloned().unwrap_or_else(zero);
                        } else {
                            total += net.ratio(arc) * departures.get(&tail)?;
                        }
                    }
                    Some((a, total))
                })
                .collect();
            UnmonitoredComponent {
                id,
                arcs: remaining
                    .iter()
                    .copied()
                    .filter(|a| owner[net.arc(*a).tail.0] == id)
                    .collect(),
                unmonitored_centroids: vertices
                    .iter()
                    .copied()
                    .filter(|&v| net.is_centroid(v) && !net.is_isolated(v))
                    .collect(),
                departures: departures
                    .iter()
                    .filter(|(a, _)| vertices.contains(a))
                    .map(|(a, t)| (*a, t.clone()))
                    .collect(),
                adjacent: adjacent_i,
                vertices,
                boundary_inflows,
                cutset_inflow,
            }
        })
        .collect();
    components.sort_by_key(|c| *c.vertices.iter().next().expect("components are nonempty"));
    for (i, c) in components.iter_mut().enumerate() {
        c.id = i;
    }
    components
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, vertex_set};
    use crate::rational::int;

    #[test]
    fn six_vertex_adjacent_set() {
        let net = fixtures::six_vertex_network();
        let m = vertex_set(&net, ["a"]);
        assert_eq!(adjacent_set(&net, &m), vertex_set(&net, ["b", "d"]));
        let all: BTreeSet<VertexId> = net.vertices().collect();
        assert!(adjacent_set(&net, &all).is_empty());
        assert!(adjacent_set(&net, &BTreeSet::new()).is_empty());
    }

    fn arc_labels(net: &RoadNetwork, arcs: &BTreeSet<ArcId>) -> BTreeSet<String> {
        arcs.iter().map(|&a| net.arc_label(a)).collect()
    }

    #[test]
    fn six_vertex_combined_cutsets() {
        let net = fixtures::six_vertex_network();
        let c = combined_cutset(&net, &vertex_set(&net, ["a"]));
        assert_eq!(arc_labels(&net, &c), ["ab", "ba", "ad", "da"].map(String::from).into());
        let c = combined_cutset(&net, &vertex_set(&net, ["d"]));
        assert_eq!(
            arc_labels(&net, &c),
            ["da", "ad", "dc", "cd", "de", "ed", "df", "fd"]
                .map(String::from)
                .into()
        );
        assert!(combined_cutset(&net, &BTreeSet::new()).is_empty());
    }

    #[test]
    fn six_vertex_single_component() {
        let net = fixtures::six_vertex_network();
        let placement = fixtures::six_vertex_placement(&net);
        let comps = unmonitored_components(&net, &placement);
        assert_eq!(comps.len(), 1);
        let c = &comps[0];
        assert_eq!(c.vertices, vertex_set(&net, ["b", "c", "d", "e", "f"]));
        assert_eq!(c.adjacent, vertex_set(&net, ["b", "d"]));
        assert_eq!(c.unmonitored_centroids, vertex_set(&net, ["e", "f"]));
        assert_eq!(c.arcs.len(), 8);
        // b departs 8 (4 to a observed, ratio 1/2); d departs 16.
        assert_eq!(c.departures[&net.vertex("b").unwrap()], int(8));
        assert_eq!(c.departures[&net.vertex("d").unwrap()], int(16));
        assert_eq!(c.boundary_inflows[&net.arc_between("b", "c").unwrap()], int(4));
        assert_eq!(c.boundary_inflows.len(), 4);
        assert_eq!(c.cutset_inflow[&net.vertex("d").unwrap()], int(4));
    }

    #[test]
    fn monitoring_everything_leaves_nothing() {
        let net = fixtures::six_vertex_network();
        let all: BTreeSet<VertexId> = net.vertices().collect();
        assert!(unmonitored_components(&net, &Placement::topological(&net, all)).is_empty());
    }

    #[test]
    fn isolated_adjacent_vertex_forms_singleton() {
        // Path x - y - z; monitoring x and z isolates y.
        let net = RoadNetwork::builder()
            .vertices(["x", "y", "z"])
            .road("x", "y")
            .road("y", "z")
            .build()
            .unwrap();
        let comps = unmonitored_components(&net, &Placement::topological(&net, vertex_set(&net, ["x", "z"])));
        assert_eq!(comps.len(), 1);
        assert!(comps[0].is_isolated_adjacent());
    }

    #[test]
    fn placement_validation() {
        let net = fixtures::pentagon_network();
        let mut placement = fixtures::pentagon_placement(&net);
        assert_eq!(validate_placement(&net, &placement), Ok(()));
        assert_eq!(placement.observed_flow.len(), 6);
        placement.observed_balancing.clear();
        assert_eq!(
            validate_placement(&net, &placement),
            Err(PlacementError::MissingBalancing("e".into()))
        );
        let mut placement = fixtures::pentagon_placement(&net);
        placement
            .observed_flow
            .insert(net.arc_between("a", "b").unwrap(), int(1));
        assert!(matches!(
            validate_placement(&net, &placement),
            Err(PlacementError::UnexpectedObservation(_))
        ));
    }
}
