use num_traits::Zero;
use proptest::prelude::*;
use sensorflow_core::conditions::min_vertex_cut;
use sensorflow_core::flow_system::{
    build_flow_system, build_flow_system_with, certify, rank_certify, select_canonical, solve_flow, BuildOptions,
    CanonicalOrder,
};
use sensorflow_core::monitoring::{adjacent_set, UnmonitoredComponent};
use sensorflow_core::scenario::{
    generate, observe, random_balancing, simulate_ground_truth, CentroidRule, MonitorRule, RatioRule, Scenario,
    ScenarioKind, ScenarioSpec,
};
use sensorflow_core::{unmonitored_components, Placement, RoadNetwork, VertexId};
use std::collections::BTreeSet;

fn graph(n: usize, density: f64, centroids: usize, monitors: usize, seed: u64) -> Scenario {
    generate(&ScenarioSpec {
        kind: ScenarioKind::RandomGraph { n, density },
        centroids: CentroidRule::Random { count: centroids },
        monitors: MonitorRule::Random { count: monitors },
        ratios: RatioRule::Random { max_denominator: 6 },
        seed,
    })
    .unwrap()
}

fn scenarios() -> impl Strategy<Value = Scenario> {
    (2usize..10, 0.1f64..0.6, 0usize..5, 0usize..4, any::<u64>())
        .prop_map(|(n, d, c, m, seed)| graph(n, d, c.min(n), m.min(n), seed))
}

fn inside(net: &RoadNetwork, comp: &UnmonitoredComponent, v: VertexId) -> Vec<VertexId> {
    net.neighbors(v).into_iter().filter(|&w| comp.contains(w)).collect()
}

/// True if removing `cut` leaves no path from a centroid to an adjacent vertex.
fn separates(net: &RoadNetwork, comp: &UnmonitoredComponent, cut: &BTreeSet<VertexId>) -> bool {
    let mut seen: BTreeSet<VertexId> = comp.unmonitored_centroids.difference(cut).copied().collect();
    let mut stack: Vec<VertexId> = seen.iter().copied().collect();
    while let Some(v) = stack.pop() {
        if comp.adjacent.contains(&v) {
            return false;
        }
        for w in inside(net, comp, v) {
            if !cut.contains(&w) && seen.insert(w) {
                stack.push(w);
            }
        }
    }
    true
}

fn brute_force_cut(net: &RoadNetwork, comp: &UnmonitoredComponent) -> usize {
    let vs: Vec<VertexId> = comp.vertices.iter().copied().collect();
    (0u32..1 << vs.len())
        .filter_map(|mask| {
            let cut: BTreeSet<VertexId> = (0..vs.len()).filter(|i| mask >> i & 1 == 1).map(|i| vs[i]).collect();
            separates(net, comp, &cut).then_some(cut.len())
        })
        .min()
        .expect("the whole component separates")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn min_cut_matches_subset_enumeration(s in scenarios()) {
        let net = &s.network;
        let placement = Placement::topological(net, s.monitored.clone());
        for comp in unmonitored_components(net, &placement) {
            let cut = min_vertex_cut(net, &comp);
            prop_assert_eq!(cut.size, brute_force_cut(net, &comp));
            prop_assert_eq!(cut.paths.len(), cut.size);
            if !comp.unmonitored_centroids.is_empty() {
                prop_assert_eq!(cut.cut.len(), cut.size);
                prop_assert!(separates(net, &comp, &cut.cut));
            }
            let mut used = BTreeSet::new();
            for path in &cut.paths {
                prop_assert!(comp.unmonitored_centroids.contains(&path[0]));
                prop_assert!(comp.adjacent.contains(path.last().unwrap()));
                for w in path.windows(2) {
                    prop_assert!(net.find_arc(w[0], w[1]).is_some());
                }
                for v in path {
                    prop_assert!(comp.contains(*v));
                    prop_assert!(used.insert(*v), "paths share a vertex");
                }
            }
        }
    }

    #[test]
    fn dimensions_follow_the_counting_law(s in scenarios()) {
        let net = &s.network;
        let placement = Placement::topological(net, s.monitored.clone());
        let sys = build_flow_system(net, &placement).unwrap();
        let m = s.monitored.len();
        let a = adjacent_set(net, &s.monitored).len();
        let b = net.centroids().iter().filter(|v| !s.monitored.contains(v)).count();
        let isolated = net.vertices().filter(|&v| !s.monitored.contains(&v) && net.is_isolated(v)).count();
        prop_assert_eq!(sys.matrix.rows(), net.vertex_count() - m);
        prop_assert_eq!(sys.matrix.cols(), net.vertex_count() - m - a - isolated + b);
    }

    #[test]
    fn rank_splits_over_components(s in scenarios()) {
        let net = &s.network;
        let placement = Placement::topological(net, s.monitored.clone());
        let sys = build_flow_system(net, &placement).unwrap();
        let comps = unmonitored_components(net, &placement);
        let blocks: Vec<_> = comps.iter().map(|c| sys.block(c)).collect();
        let covered: usize = blocks.iter().map(|b| b.columns.len()).sum();
        prop_assert_eq!(covered, sys.matrix.cols());
        for (i, comp) in comps.iter().enumerate() {
            for &r in &blocks[i].rows {
                for j in 0..sys.matrix.cols() {
                    if !blocks[i].columns.contains(&j) {
                        prop_assert!(sys.matrix.get(r, j).is_zero(), "entry outside the block");
                    }
                }
                prop_assert!(comp.contains(sys.rows[r]));
            }
        }
        let sum: usize = blocks.iter().map(|b| certify(&b.matrix).rank).sum();
        prop_assert_eq!(rank_certify(&sys).rank, sum);
    }

    #[test]
    fn canonical_choice_changes_neither_rank_nor_flow(s in scenarios()) {
        let net = &s.network;
        let balancing = random_balancing(net, 7);
        let truth = simulate_ground_truth(net, &balancing, 7).unwrap();
        let placement = observe(net, &truth, &s.monitored);
        let build = |order| {
            let options = BuildOptions {
                strict: false,
                canonical: Some(select_canonical(net, &s.monitored, order)),
            };
            build_flow_system_with(net, &placement, &options).unwrap()
        };
        let (first, last) = (build(CanonicalOrder::First), build(CanonicalOrder::Last));
        let (r1, r2) = (rank_certify(&first), rank_certify(&last));
        prop_assert_eq!(r1.rank, r2.rank);
        if r1.full_column_rank {
            let a = solve_flow(net, &placement, &first).unwrap().full_flow;
            let b = solve_flow(net, &placement, &last).unwrap().full_flow;
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a, truth);
        }
    }

    #[test]
    fn too_small_a_cut_means_rank_deficiency(s in scenarios()) {
        let net = &s.network;
        let placement = Placement::topological(net, s.monitored.clone());
        let sys = build_flow_system(net, &placement).unwrap();
        for comp in unmonitored_components(net, &placement) {
            if min_vertex_cut(net, &comp).size < comp.unmonitored_centroids.len() {
                prop_assert!(!certify(&sys.block(&comp).matrix).full_column_rank);
            }
        }
    }
}
