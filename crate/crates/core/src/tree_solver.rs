//! Constructive flow computation on tree components.
//!
//! Every vertex `v` is described by its departing traffic `T_v`, so that
//! `f(v,u) = c(v,u) * T_v`. The balance equation at `v` reads
//!
//! ```text
//! sum over neighbours u of c(u,v) * T_u  +  inflow over C_M  -  T_v  +  S_v  =  0
//! ```
//!
//! Adjacent vertices start with known `T`. Each unmonitored centroid is
//! paired with an adjacent vertex through a disjoint B-path; walking a path
//! from its adjacent end determines one new `T` per balance equation, and
//! the centroid's balancing flow closes the walk. Centroid-free subtrees
//! hanging off known vertices return exactly what enters them.

use crate::conditions::{min_vertex_cut, tree_test};
use crate::monitoring::{unmonitored_components, Placement, UnmonitoredComponent};
use crate::network::{check_flow_state, flow_defects, ArcId, FlowState, RoadNetwork, VertexId};
use crate::rational::{is_zero, zero, Rational};
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeSolveError {
    #[error("component {0} is not a tree")]
    NotATree(usize),
    #[error("component {component} has {centroids} unmonitored centroids but only {cut} disjoint B-paths")]
    ConditionFailed {
        component: usize,
        cut: usize,
        centroids: usize,
    },
    #[error("component {0} touches no monitored vertex")]
    Detached(usize),
    #[error("subtree rooted at {0} contains centroid {1}")]
    CentroidPresent(String, String),
    #[error("turning ratio of {0} is zero; the flow behind it cannot be propagated")]
    ZeroRatio(String),
    #[error("outflow of adjacent vertex {0} cannot be deduced from the monitored arcs")]
    Undeducible(String),
    #[error("balance equations have no solution at {0}")]
    Singular(String),
    #[error("boundary data is inconsistent: {0}")]
    ConservationViolation(String),
    #[error("recursion budget exhausted")]
    OutOfFuel,
}

/// A centroid matched with an adjacent vertex through a B-path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub adjacent: VertexId,
    pub centroid: VertexId,
    /// From `adjacent` to `centroid`.
    pub path: Vec<VertexId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CentroidPairing {
    pub pairs: Vec<Pair>,
    /// Adjacent vertices left unpaired; they act as known sources.
    pub extras: Vec<VertexId>,
}

/// Pairs every unmonitored centroid with an adjacent vertex using the
/// disjoint B-paths of the minimum cut computation.
pub fn pair_centroids(net: &RoadNetwork, component: &UnmonitoredComponent) -> Result<CentroidPairing, TreeSolveError> {
    if !tree_test(net, component) {
        return Err(TreeSolveError::NotATree(component.id));
    }
    let cut = min_vertex_cut(net, component);
    let centroids = component.unmonitored_centroids.len();
    if cut.size < centroids {
        return Err(TreeSolveError::ConditionFailed {
            component: component.id,
            cut: cut.size,
            centroids,
        });
    }
    let pairs: Vec<Pair> = cut
        .paths
        .into_iter()
        .map(|mut path| {
            path.reverse();
            Pair {
                adjacent: path[0],
                centroid: *path.last().expect("paths are nonempty"),
                path,
            }
        })
        .collect();
    let paired: BTreeSet<VertexId> = pairs.iter().map(|p| p.adjacent).collect();
    let extras = component
        .adjacent
        .iter()
        .copied()
        .filter(|a| !paired.contains(a))
        .collect();
    Ok(CentroidPairing { pairs, extras })
}

/// Departing traffic and balancing flows of one component.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ComponentFlows {
    pub departures: BTreeMap<VertexId, Rational>,
    pub balancing: BTreeMap<VertexId, Rational>,
}

impl ComponentFlows {
    pub fn arc_flow(&self, net: &RoadNetwork, arc: ArcId) -> Option<Rational> {
        let a = net.arc(arc);
        self.departures.get(&a.tail).map(|t| net.ratio(arc) * t)
    }
}

/// Flows on a centroid-free subtree entered from `parent` over the arc
/// `parent -> root` carrying `attachment`. Whatever enters the subtree
/// leaves it again over `root -> parent`; every other arc follows from
/// conservation and the turning ratios. Returns the flow of every arc
/// leaving a subtree vertex.
pub fn solve_centroid_free_subtree(
    net: &RoadNetwork,
    parent: VertexId,
    root: VertexId,
    attachment: &Rational,
) -> Result<BTreeMap<ArcId, Rational>, TreeSolveError> {
    let departures = propagate_subtree(net, parent, root, attachment, &|v| net.neighbors(v))?;
    let mut flows = BTreeMap::new();
    for (v, t) in &departures {
        for &a in net.out_arcs(*v) {
            flows.insert(a, net.ratio(a) * t);
        }
    }
    Ok(flows)
}

fn ratio_checked(net: &RoadNetwork, tail: VertexId, head: VertexId) -> Result<Rational, TreeSolveError> {
    let c = net.ratio_between(tail, head);
    if is_zero(&c) {
        return Err(TreeSolveError::ZeroRatio(format!(
            "{}{}",
            net.label(tail),
            net.label(head)
        )));
    }
    Ok(c)
}

/// Departures on the subtree behind `root`, seen from `parent`.
fn propagate_subtree(
    net: &RoadNetwork,
    parent: VertexId,
    root: VertexId,
    attachment: &Rational,
    neighbors: &dyn Fn(VertexId) -> Vec<VertexId>,
) -> Result<BTreeMap<VertexId, Rational>, TreeSolveError> {
    let mut departures = BTreeMap::new();
    let mut stack = vec![(parent, root, attachment.clone())];
    while let Some((from, v, inflow)) = stack.pop() {
        if net.is_centroid(v) {
            return Err(TreeSolveError::CentroidPresent(
                net.label(root).to_string(),
                net.label(v).to_string(),
            ));
        }
        if departures.contains_key(&v) {
            return Err(TreeSolveError::CentroidPresent(
                net.label(root).to_string(),
                format!("a cycle through {}", net.label(v)),
            ));
        }
        // The whole subtree behind v returns f(from, v) over v -> from.
        let t = inflow / ratio_checked(net, v, from)?;
        for u in neighbors(v) {
            if u != from {
                stack.push((v, u, net.ratio_between(v, u) * &t));
            }
        }
        departures.insert(v, t);
    }
    Ok(departures)
}

struct Solver<'a> {
    net: &'a RoadNetwork,
    component: &'a UnmonitoredComponent,
    neighbors: BTreeMap<VertexId, Vec<VertexId>>,
    departures: BTreeMap<VertexId, Rational>,
    balancing: BTreeMap<VertexId, Rational>,
    fuel: usize,
}

impl<'a> Solver<'a> {
    fn new(net: &'a RoadNetwork, component: &'a UnmonitoredComponent) -> Self {
        let neighbors = component
            .vertices
            .iter()
            .map(|&v| (v, component.neighbors(net, v)))
            .collect();
        let mut departures = component.departures.clone();
        for &v in &component.vertices {
            if net.out_arcs(v).is_empty() {
                departures.insert(v, zero());
            }
        }
        Solver {
            net,
            component,
            neighbors,
            departures,
            balancing: BTreeMap::new(),
            fuel: 8 * (component.vertices.len() + component.arcs.len()) + 8,
        }
    }

    fn label(&self, v: VertexId) -> String {
        self.net.label(v).to_string()
    }

    fn t(&self, v: VertexId) -> &Rational {
        &self.departures[&v]
    }

    fn external_inflow(&self, v: VertexId) -> Result<Rational, TreeSolveError> {
        if !self.component.adjacent.contains(&v) {
            return Ok(zero());
        }
        self.component
            .cutset_inflow
            .get(&v)
            .cloned()
            .ok_or_else(|| TreeSolveError::Undeducible(self.label(v)))
    }

    /// Known inflow into `v` from its neighbours, skipping `except`.
    fn inflow_except(&self, v: VertexId, except: Option<VertexId>) -> Rational {
        self.neighbors[&v]
            .iter()
            .filter(|&&u| Some(u) != except)
            .map(|&u| self.net.ratio_between(u, v) * self.t(u))
            .sum()
    }

    fn branch(&self, verts: &BTreeSet<VertexId>, center: VertexId, start: VertexId) -> BTreeSet<VertexId> {
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &u in &self.neighbors[&v] {
                if u != center && verts.contains(&u) && seen.insert(u) {
                    queue.push_back(u);
                }
            }
        }
        seen
    }

    /// Solves every subtree hanging off `center` except those starting at
    /// `exclude`, with `center` as a known anchor whose own equation is left
    /// to the caller.
    fn solve_branches(
        &mut self,
        verts: &BTreeSet<VertexId>,
        free: &BTreeSet<VertexId>,
        center: VertexId,
        exclude: &[VertexId],
        pairs: &[Pair],
    ) -> Result<(), TreeSolveError> {
        let starts: Vec<VertexId> = self.neighbors[&center]
            .iter()
            .copied()
            .filter(|u| verts.contains(u) && !exclude.contains(u))
            .collect();
        for start in starts {
            let branch = self.branch(verts, center, start);
            let sub_pairs: Vec<Pair> = pairs
                .iter()
                .filter(|p| p.path.iter().all(|v| branch.contains(v)))
                .cloned()
                .collect();
            let mut sub_free: BTreeSet<VertexId> = free.intersection(&branch).copied().collect();
            sub_free.insert(center);
            let mut sub_verts = branch;
            sub_verts.insert(center);
            self.solve_instance(&sub_verts, &sub_free, sub_pairs)?;
        }
        Ok(())
    }

    fn solve_instance(
        &mut self,
        verts: &BTreeSet<VertexId>,
        free: &BTreeSet<VertexId>,
        mut pairs: Vec<Pair>,
    ) -> Result<(), TreeSolveError> {
        self.fuel = self.fuel.checked_sub(1).ok_or(TreeSolveError::OutOfFuel)?;
        if let Some(i) = pairs.iter().position(|p| p.adjacent != p.centroid) {
            let pair = pairs.remove(i);
            self.walk_pair(verts, free, &pair, &pairs)
        } else {
            self.solve_regions(verts)?;
            for pair in &pairs {
                let a = pair.adjacent;
                let s = self.t(a) - self.external_inflow(a)? - self.inflow_except(a, None);
                self.balancing.insert(a, s);
            }
            Ok(())
        }
    }

    /// Walks from the adjacent end of `pair` to its centroid. Each balance
    /// equation along the way has exactly one unknown once the side
    /// branches are solved.
    fn walk_pair(
        &mut self,
        verts: &BTreeSet<VertexId>,
        free: &BTreeSet<VertexId>,
        pair: &Pair,
        others: &[Pair],
    ) -> Result<(), TreeSolveError> {
        let path = &pair.path;
        for i in 0..path.len() - 1 {
            let (w, next) = (path[i], path[i + 1]);
            let prev = if i == 0 { None } else { Some(path[i - 1]) };
            let exclude: Vec<VertexId> = prev.into_iter().chain([next]).collect();
            self.solve_branches(verts, free, w, &exclude, others)?;
            debug_assert!(!free.contains(&w));
            let known = self.t(w) - self.external_inflow(w)? - self.inflow_except(w, Some(next));
            let t_next = known / ratio_checked(self.net, next, w)?;
            self.departures.insert(next, t_next);
        }
        let b = pair.centroid;
        let prev = path[path.len() - 2];
        self.solve_branches(verts, free, b, &[prev], others)?;
        let s = self.t(b) - self.external_inflow(b)? - self.inflow_except(b, None);
        self.balancing.insert(b, s);
        Ok(())
    }

    /// Determines every unknown departure in an instance with no path left
    /// to walk. Each connected region of unknowns is centroid-free.
    fn solve_regions(&mut self, verts: &BTreeSet<VertexId>) -> Result<(), TreeSolveError> {
        let unknown: BTreeSet<VertexId> = verts
            .iter()
            .copied()
            .filter(|v| !self.departures.contains_key(v))
            .collect();
        let mut done = BTreeSet::new();
        for &start in &unknown {
            if done.contains(&start) {
                continue;
            }
            let region = self.branch(&unknown, VertexId(usize::MAX), start);
            done.extend(region.iter().copied());
            let attachments: Vec<(VertexId, VertexId)> = region
                .iter()
                .flat_map(|&r| {
                    self.neighbors[&r]
                        .iter()
                        .filter(|u| !region.contains(u))
                        .map(move |&z| (z, r))
                        .collect::<Vec<_>>()
                })
                .collect();
            match attachments.as_slice() {
                [] => return Err(TreeSolveError::Detached(self.component.id)),
                [(z, r)] => {
                    let attachment = self.net.ratio_between(*z, *r) * self.t(*z);
                    let neighbors = |v: VertexId| self.neighbors[&v].clone();
                    let found = propagate_subtree(self.net, *z, *r, &attachment, &neighbors)?;
                    self.departures.extend(found);
                }
                _ => self.eliminate_region(&region)?,
            }
        }
        Ok(())
    }

    /// Leaf-to-root elimination on a centroid-free region attached to known
    /// vertices in several places: each `T_v` becomes `alpha * T_parent +
    /// beta`, then values flow back down from the root.
    fn eliminate_region(&mut self, region: &BTreeSet<VertexId>) -> Result<(), TreeSolveError> {
        let root = *region.iter().next().expect("regions are nonempty");
        let mut order = vec![(root, None::<VertexId>)];
        let mut i = 0;
        while i < order.len() {
            let (v, parent) = order[i];
            for &u in &self.neighbors[&v] {
                if Some(u) != parent && region.contains(&u) {
                    order.push((u, Some(v)));
                }
            }
            i += 1;
        }
        let mut affine: BTreeMap<VertexId, (Rational, Rational)> = BTreeMap::new();
        for &(v, parent) in order.iter().rev() {
            let mut denom = Rational::one();
            let mut beta = zero();
            for &u in &self.neighbors[&v] {
                if Some(u) == parent {
                    continue;
                }
                let c = self.net.ratio_between(u, v);
                match affine.get(&u) {
                    Some((a_u, b_u)) if region.contains(&u) => {
                        denom -= &c * a_u;
                        beta += &c * b_u;
                    }
                    _ => beta += c * self.t(u),
                }
            }
            if denom.is_zero() {
                return Err(TreeSolveError::Singular(self.label(v)));
            }
            let alpha = parent.map_or_else(zero, |p| self.net.ratio_between(p, v)) / &denom;
            affine.insert(v, (alpha, beta / denom));
        }
        for &(v, parent) in &order {
            let (alpha, beta) = &affine[&v];
            let t = match parent {
                Some(p) => alpha * self.t(p) + beta,
                None => beta.clone(),
            };
            self.departures.insert(v, t);
        }
        Ok(())
    }

    /// Checks every balance equation of the component.
    fn verify(&self) -> Result<(), TreeSolveError> {
        for &v in &self.component.vertices {
            let s = self.balancing.get(&v).cloned().unwrap_or_else(zero);
            let residual = self.inflow_except(v, None) + self.external_inflow(v)? - self.t(v) + s;
            if !residual.is_zero() && !self.net.out_arcs(v).is_empty() {
                return Err(TreeSolveError::ConservationViolation(format!(
                    "balance at {} is off by {}",
                    self.label(v),
                    crate::rational::format_rational(&residual)
                )));
            }
        }
        Ok(())
    }
}

/// Computes all departures and balancing flows of a tree component from its
/// boundary data.
pub fn solve_tree_component(
    net: &RoadNetwork,
    component: &UnmonitoredComponent,
    pairing: &CentroidPairing,
) -> Result<ComponentFlows, TreeSolveError> {
    if component.vertices.iter().all(|&v| net.is_isolated(v)) {
        return Ok(ComponentFlows::default());
    }
    if component.adjacent.is_empty() {
        return Err(TreeSolveError::Detached(component.id));
    }
    for a in &component.adjacent {
        if !component.departures.contains_key(a) {
            return Err(TreeSolveError::Undeducible(net.label(*a).to_string()));
        }
    }
    let mut solver = Solver::new(net, component);
    // Unpaired adjacent vertices already count as known sources: their
    // departures are seeded before the walk.
    debug_assert!(pairing.extras.iter().all(|a| solver.departures.contains_key(a)));
    solver.solve_instance(&component.vertices, &BTreeSet::new(), pairing.pairs.clone())?;
    solver.verify()?;
    Ok(ComponentFlows {
        departures: solver.departures,
        balancing: solver.balancing,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeSolution {
    pub flow: FlowState,
    pub negative_arcs: Vec<ArcId>,
}

/// Solves a whole placement whose unmonitored components are all trees
/// passing the B-path condition, without building any matrix.
pub fn solve_by_tree(net: &RoadNetwork, placement: &Placement) -> Result<TreeSolution, TreeSolveError> {
    let mut flow = FlowState::zero(net);
    let mut departures: BTreeMap<VertexId, Rational> = BTreeMap::new();
    for component in unmonitored_components(net, placement) {
        let pairing = pair_centroids(net, &component)?;
        let solved = solve_tree_component(net, &component, &pairing)?;
        departures.extend(solved.departures);
        for (v, s) in solved.balancing {
            flow.balancing[v.0] = s;
        }
    }
    for a in net.arc_ids() {
        let tail = net.arc(a).tail;
        if let Some(t) = departures.get(&tail) {
            flow.arc_flow[a.0] = net.ratio(a) * t;
        }
    }
    for (a, observed) in &placement.observed_flow {
        flow.arc_flow[a.0] = observed.clone();
    }
    for (v, s) in &placement.observed_balancing {
        flow.balancing[v.0] = s.clone();
    }
    if !check_flow_state(net, &flow) {
        let defects = flow_defects(net, &flow);
        return Err(TreeSolveError::ConservationViolation(
            crate::flow_system::describe_defect(net, &defects[0], defects.len()),
        ));
    }
    let negative_arcs = flow
        .arc_flow
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_negative())
        .map(|(i, _)| ArcId(i))
        .collect();
    Ok(TreeSolution { flow, negative_arcs })
}
