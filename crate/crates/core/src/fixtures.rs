//! Reference networks used by tests, demos and the documentation.
//!
//! * [`six_vertex_network`]: six intersections where monitoring `a` satisfies the
//!   counting condition yet the flow cannot be recovered.
//! * [`pentagon_network`]: a pentagon-shaped network with four centroids that is
//!   fully calculable from the single monitored vertex `e`.
//! * [`grid5_split_placement`] / [`grid5_tree_placement`]: a 5x5 grid with
//!   seven centroids, first monitored so one component fails the B-path test,
//!   then with two monitors moved so every component is a calculable tree.
//! * [`counterexample_network`]: a non-tree component where enough disjoint
//!   B-paths exist but the flow is still not determined.

use crate::monitoring::Placement;
use crate::network::{FlowState, RoadNetwork, VertexId};
use crate::rational::{frac, int};
use crate::scenario::{self, CentroidRule, MonitorRule, RatioRule, ScenarioKind, ScenarioSpec};
use std::collections::BTreeSet;

/// Roads a-b, a-d, b-c, c-d, d-e, d-f; centroids e and f; uniform ratios.
pub fn six_vertex_network() -> RoadNetwork {
    RoadNetwork::builder()
        .vertices(["a", "b", "c", "d", "e", "f"])
        .road("a", "b")
        .road("a", "d")
        .road("b", "c")
        .road("c", "d")
        .road("d", "e")
        .road("d", "f")
        .centroids(["e", "f"])
        .build()
        .expect("fixture is well formed")
}

/// Monitoring `a` with four vehicles on each of ab, ba, ad, da.
pub fn six_vertex_placement(net: &RoadNetwork) -> Placement {
    let mut flow = FlowState::zero(net);
    flow.arc_flow.iter_mut().for_each(|f| *f = int(4));
    scenario::observe(net, &flow, &vertex_set(net, ["a"]))
}

/// Roads a-b, a-c, b-d, b-f, c-e, d-e, e-f; centroids b, d, e, f.
/// Ratios are uniform except at `e`, which sends twice as much to `f` as to
/// `c` or `d`.
pub fn pentagon_network() -> RoadNetwork {
    let half = frac(1, 2);
    let quarter = frac(1, 4);
    RoadNetwork::builder()
        .vertices(["a", "b", "c", "d", "e", "f"])
        .road("a", "b")
        .road("a", "c")
        .road("b", "d")
        .road("b", "f")
        .uniform_arc("c", "e")
        .uniform_arc("d", "e")
        .arc("e", "c", quarter.clone())
        .arc("e", "d", quarter)
        .arc("e", "f", half)
        .uniform_arc("f", "e")
        .centroids(["b", "d", "e", "f"])
        .build()
        .expect("fixture is well formed")
}

/// Flows observed around `e`: out 1, 1, 2 to c, d, f; in 3, 1, 5 from c, d, f;
/// balancing -5 at `e`.
pub fn pentagon_placement(net: &RoadNetwork) -> Placement {
    scenario::observe(net, &pentagon_ground_truth(net), &vertex_set(net, ["e"]))
}

/// The unique flow consistent with [`pentagon_placement`].
pub fn pentagon_ground_truth(net: &RoadNetwork) -> FlowState {
    let mut flow = FlowState::zero(net);
    let arcs: [(&str, &str, i64); 14] = [
        ("a", "b", 5),
        ("a", "c", 5),
        ("b", "a", 7),
        ("b", "d", 7),
        ("b", "f", 7),
        ("c", "a", 3),
        ("c", "e", 3),
        ("d", "b", 1),
        ("d", "e", 1),
        ("e", "c", 1),
        ("e", "d", 1),
        ("e", "f", 2),
        ("f", "b", 5),
        ("f", "e", 5),
    ];
    for (t, h, value) in arcs {
        flow.arc_flow[net.arc_between(t, h).expect("fixture arc").0] = int(value);
    }
    for (v, s) in [("b", 10), ("d", -6), ("e", -5), ("f", 1)] {
        flow.balancing[net.vertex(v).expect("fixture vertex").0] = int(s);
    }
    flow
}

pub use crate::scenario::grid_label;

const GRID5_CENTROIDS: [(usize, usize); 7] = [(0, 4), (1, 4), (2, 0), (3, 0), (3, 4), (4, 0), (4, 2)];

/// 5x5 grid, uniform ratios, seven centroids.
pub fn grid5_network() -> RoadNetwork {
    let spec = ScenarioSpec {
        kind: ScenarioKind::Grid { width: 5, height: 5 },
        centroids: CentroidRule::Explicit(GRID5_CENTROIDS.iter().map(|&(r, c)| grid_label(r, c)).collect()),
        monitors: MonitorRule::None,
        ratios: RatioRule::Uniform,
        seed: 0,
    };
    scenario::generate(&spec).expect("fixture spec is valid").network
}

/// Four monitors leaving two large non-tree components; the one holding
/// r2c0, r3c0, r4c0 and r4c2 has only three disjoint B-paths for its four
/// centroids.
pub fn grid5_split_placement() -> Vec<String> {
    [(0, 0), (1, 2), (3, 2), (3, 3)]
        .iter()
        .map(|&(r, c)| grid_label(r, c))
        .collect()
}

/// [`grid5_split_placement`] with r0c0 moved to r0c2 and r3c2 moved to r3c1:
/// the unmonitored subgraph becomes a forest and every centroid has its own
/// B-path.
pub fn grid5_tree_placement() -> Vec<String> {
    [(0, 2), (1, 2), (3, 1), (3, 3)]
        .iter()
        .map(|&(r, c)| grid_label(r, c))
        .collect()
}

/// 18x18 grid with the tree-inducing monitor lattice (72 monitors) and one
/// centroid per 3x3 block.
pub fn grid18_spec() -> ScenarioSpec {
    ScenarioSpec {
        kind: ScenarioKind::Grid { width: 18, height: 18 },
        centroids: CentroidRule::Lattice {
            period: 3,
            row: 1,
            col: 0,
        },
        monitors: MonitorRule::TreeInducing,
        ratios: RatioRule::Uniform,
        seed: 0,
    }
}

/// Monitor `m` joined to `p` and `q`, which both connect to centroids `x`
/// and `y`; uniform ratios.
///
/// Monitoring `m` leaves the 4-cycle p-x-q-y with two vertex-disjoint
/// B-paths (p-x, q-y) for its two centroids, but it is not a tree and its
/// flow matrix is rank deficient.
pub fn counterexample_network() -> RoadNetwork {
    RoadNetwork::builder()
        .vertices(["m", "p", "q", "x", "y"])
        .road("m", "p")
        .road("m", "q")
        .road("p", "x")
        .road("p", "y")
        .road("q", "x")
        .road("q", "y")
        .centroids(["x", "y"])
        .build()
        .expect("fixture is well formed")
}

pub fn vertex_set<'a>(net: &RoadNetwork, labels: impl IntoIterator<Item = &'a str>) -> BTreeSet<VertexId> {
    labels
        .into_iter()
        .map(|l| net.vertex(l).unwrap_or_else(|| panic!("unknown vertex {l}")))
        .collect()
}

pub fn labels_to_set(net: &RoadNetwork, labels: &[String]) -> BTreeSet<VertexId> {
    vertex_set(net, labels.iter().map(String::as_str))
}
