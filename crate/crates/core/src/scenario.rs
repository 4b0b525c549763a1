//! Seeded instance generators and ground-truth flow simulation.

use crate::linalg::Matrix;
use crate::monitoring::{observe_flow, Placement};
use crate::network::{check_flow_state, FlowState, NetworkBuilder, RoadNetwork, VertexId};
use crate::rational::{frac, int, is_zero, zero, Rational};
use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScenarioKind {
    Grid {
        width: usize,
        height: usize,
    },
    RandomTree {
        n: usize,
    },
    /// Random spanning tree plus every other vertex pair with probability
    /// `density`.
    RandomGraph {
        n: usize,
        density: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CentroidRule {
    None,
    Explicit(Vec<String>),
    /// Grid vertices at `(row, col)` congruent to the offsets modulo `period`.
    Lattice {
        period: usize,
        row: usize,
        col: usize,
    },
    Random {
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MonitorRule {
    None,
    Explicit(Vec<String>),
    /// Grid only, sides divisible by 3: in every 3x3 block monitor the
    /// middle of the top and bottom rows. Every unmonitored component is
    /// then a tree.
    TreeInducing,
    Random {
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RatioRule {
    Uniform,
    /// Positive ratios with denominators at most `max_denominator`.
    Random {
        max_denominator: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub centroids: CentroidRule,
    pub monitors: MonitorRule,
    pub ratios: RatioRule,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub network: RoadNetwork,
    pub monitored: BTreeSet<VertexId>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("no flow satisfies the balancing flows: {0}")]
    NoConsistentFlow(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::InvalidSpec(msg.into())
}

pub fn grid_label(row: usize, col: usize) -> String {
    format!("r{row}c{col}")
}

/// Builds the network and monitor set described by `spec`. Identical specs
/// give identical results.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario, ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (labels, edges, grid) = match spec.kind {
        ScenarioKind::Grid { width, height } => {
            if width == 0 || height == 0 {
                return Err(invalid("grid sides must be positive"));
            }
            let id = |r: usize, c: usize| r * width + c;
            let labels = (0..height)
                .flat_map(|r| (0..width).map(move |c| grid_label(r, c)))
                .collect();
            let mut edges = Vec::new();
            for r in 0..height {
                for c in 0..width {
                    if c + 1 < width {
                        edges.push((id(r, c), id(r, c + 1)));
                    }
                    if r + 1 < height {
                        edges.push((id(r, c), id(r + 1, c)));
                    }
                }
            }
            (labels, edges, Some((width, height)))
        }
        ScenarioKind::RandomTree { n } => {
            if n == 0 {
                return Err(invalid("a tree needs at least one vertex"));
            }
            let edges = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
            (numbered(n), edges, None)
        }
        ScenarioKind::RandomGraph { n, density } => {
            if n == 0 || !(0.0..=1.0).contains(&density) {
                return Err(invalid("random graphs need n > 0 and density in [0, 1]"));
            }
            let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
            let present: BTreeSet<(usize, usize)> = edges.iter().copied().collect();
            for j in 1..n {
                for i in 0..j {
                    if !present.contains(&(i, j)) && rng.gen_bool(density) {
                        edges.push((i, j));
                    }
                }
            }
            (numbered(n), edges, None)
        }
    };
    let n = labels.len();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v) in &edges {
        out[u].push(v);
        out[v].push(u);
    }
    let mut builder: NetworkBuilder = RoadNetwork::builder().vertices(labels.iter().cloned());
    for (v, heads) in out.iter_mut().enumerate() {
        heads.sort_unstable();
        let ratios = draw_ratios(&spec.ratios, heads.len(), &mut rng)?;
        for (&h, ratio) in heads.iter().zip(ratios) {
            builder = builder.arc(labels[v].clone(), labels[h].clone(), ratio);
        }
    }
    let centroids = pick_vertices(&spec.centroids_as_pick(), &labels, grid, &mut rng)?;
    builder = builder.centroids(centroids.iter().map(|&i| labels[i].clone()));
    let network = builder.build().map_err(|e| invalid(e.to_string()))?;
    let monitored = pick_vertices(&spec.monitors_as_pick(), &labels, grid, &mut rng)?
        .into_iter()
        .map(VertexId)
        .collect();
    Ok(Scenario { network, monitored })
}

fn numbered(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}

/// Common shape of the centroid and monitor rules.
enum Pick<'a> {
    None,
    Explicit(&'a [String]),
    Lattice { period: usize, row: usize, col: usize },
    TreeInducing,
    Random(usize),
}

impl ScenarioSpec {
    fn centroids_as_pick(&self) -> Pick<'_> {
        match &self.centroids {
            CentroidRule::None => Pick::None,
            CentroidRule::Explicit(l) => Pick::Explicit(l),
            CentroidRule::Lattice { period, row, col } => Pick::Lattice {
                period: *period,
                row: *row,
                col: *col,
            },
            CentroidRule::Random { count } => Pick::Random(*count),
        }
    }

    fn monitors_as_pick(&self) -> Pick<'_> {
        match &self.monitors {
            MonitorRule::None => Pick::None,
            MonitorRule::Explicit(l) => Pick::Explicit(l),
            MonitorRule::TreeInducing => Pick::TreeInducing,
            MonitorRule::Random { count } => Pick::Random(*count),
        }
    }
}

fn pick_vertices(
    pick: &Pick<'_>,
    labels: &[String],
    grid: Option<(usize, usize)>,
    rng: &mut ChaCha8Rng,
) -> Result<BTreeSet<usize>, ScenarioError> {
    let grid_cells = |keep: &dyn Fn(usize, usize) -> bool| -> Result<BTreeSet<usize>, ScenarioError> {
        let (width, height) = grid.ok_or_else(|| invalid("lattice rules need a grid"))?;
        Ok((0..height)
            .flat_map(|r| (0..width).map(move |c| (r, c)))
            .filter(|&(r, c)| keep(r, c))
            .map(|(r, c)| r * width + c)
            .collect())
    };
    match *pick {
        Pick::None => Ok(BTreeSet::new()),
        Pick::Explicit(names) => names
            .iter()
            .map(|name| {
                labels
                    .iter()
                    .position(|l| l == name)
                    .ok_or_else(|| invalid(format!("unknown vertex {name:?}")))
            })
            .collect(),
        Pick::Lattice { period, row, col } => {
            if period == 0 {
                return Err(invalid("lattice period must be positive"));
            }
            grid_cells(&|r, c| r % period == row % period && c % period == col % period)
        }
        Pick::TreeInducing => {
            let (width, height) = grid.ok_or_else(|| invalid("the tree-inducing rule needs a grid"))?;
            if width % 3 != 0 || height % 3 != 0 {
                return Err(invalid("the tree-inducing rule needs grid sides divisible by 3"));
            }
            grid_cells(&|r, c| r % 3 != 1 && c % 3 == 1)
        }
        Pick::Random(count) => {
            let mut all: Vec<usize> = (0..labels.len()).collect();
            all.shuffle(rng);
            Ok(all.into_iter().take(count.min(labels.len())).collect())
        }
    }
}

/// Turning ratios for `degree` outgoing arcs, summing to one.
fn draw_ratios(rule: &RatioRule, degree: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Rational>, ScenarioError> {
    if degree == 0 {
        return Ok(Vec::new());
    }
    match *rule {
        RatioRule::Uniform => Ok(vec![frac(1, degree as i64); degree]),
        RatioRule::Random { max_denominator } => {
            if max_denominator == 0 {
                return Err(invalid("max_denominator must be positive"));
            }
            let denominator = (max_denominator as usize).max(degree);
            let total = rng.gen_range(degree..=denominator);
            // Random composition of `total` into `degree` positive parts.
            let mut cuts: Vec<usize> = (1..total).collect();
            cuts.shuffle(rng);
            let mut cuts: Vec<usize> = cuts.into_iter().take(degree - 1).collect();
            cuts.sort_unstable();
            let mut parts = Vec::with_capacity(degree);
            let mut prev = 0;
            for c in cuts.into_iter().chain([total]) {
                parts.push(frac((c - prev) as i64, total as i64));
                prev = c;
            }
            Ok(parts)
        }
    }
}

/// Random integer balancing flows on the centroids that sum to zero within
/// every connected part of the network.
pub fn random_balancing(net: &RoadNetwork, seed: u64) -> Vec<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut balancing = vec![zero(); net.vertex_count()];
    for part in connected_parts(net) {
        let centroids: Vec<VertexId> = part.iter().copied().filter(|&v| net.is_centroid(v)).collect();
        let Some((&last, rest)) = centroids.split_last() else {
            continue;
        };
        let mut sum = zero();
        for v in rest {
            let s = int(rng.gen_range(-10..=10));
            sum += &s;
            balancing[v.0] = s;
        }
        balancing[last.0] = -sum;
    }
    balancing
}

fn connected_parts(net: &RoadNetwork) -> Vec<Vec<VertexId>> {
    let mut seen = vec![false; net.vertex_count()];
    let mut parts = Vec::new();
    for start in net.vertices() {
        if seen[start.0] {
            continue;
        }
        seen[start.0] = true;
        let mut part = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for u in net.neighbors(v) {
                if !seen[u.0] {
                    seen[u.0] = true;
                    part.push(u);
                    queue.push_back(u);
                }
            }
        }
        part.sort();
        parts.push(part);
    }
    parts
}

/// A valid flow state with the given balancing flows. The traffic level
/// (smallest flow on an arc with positive ratio) is drawn from 1..=10.
pub fn simulate_ground_truth(net: &RoadNetwork, balancing: &[Rational], seed: u64) -> Result<FlowState, ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let level = int(rng.gen_range(1..=10));
    simulate_with_level(net, balancing, &level, seed)
}

/// Like [`simulate_ground_truth`] with an explicit traffic level.
///
/// Per connected part, the departures `T` solve the balance equations
/// `sum_u c(u,v) T_u - T_v = -S_v`. When the solutions form a line along a
/// nonnegative direction, the point is chosen so the smallest positive-ratio
/// arc flow equals `level`; otherwise free variables are drawn from the seed.
pub fn simulate_with_level(
    net: &RoadNetwork,
    balancing: &[Rational],
    level: &Rational,
    seed: u64,
) -> Result<FlowState, ScenarioError> {
    if balancing.len() != net.vertex_count() {
        return Err(ScenarioError::NoConsistentFlow(
            "one balancing value per vertex is required".into(),
        ));
    }
    if let Some(v) = net
        .vertices()
        .find(|&v| !net.is_centroid(v) && !balancing[v.0].is_zero())
    {
        return Err(ScenarioError::NoConsistentFlow(format!(
            "{} is not a centroid but has balancing flow",
            net.label(v)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut departures = vec![zero(); net.vertex_count()];
    for part in connected_parts(net) {
        let index: BTreeMap<VertexId, usize> = part.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let k = part.len();
        let mut a = Matrix::zeros(k, k);
        for (i, &v) in part.iter().enumerate() {
            if !net.out_arcs(v).is_empty() {
                a.set(i, i, int(-1));
            }
            for &arc in net.in_arcs(v) {
                a.add_to(i, index[&net.arc(arc).tail], net.ratio(arc));
            }
        }
        let rhs: Vec<Rational> = part.iter().map(|v| -balancing[v.0].clone()).collect();
        let general = a.general_solution(&rhs).ok_or_else(|| {
            ScenarioError::NoConsistentFlow(format!(
                "balancing flows around {} do not sum to zero",
                net.label(part[0])
            ))
        })?;
        let mut t = general.particular;
        match nonnegative_direction(&general.null_basis) {
            Some(dir) => {
                let shift = part
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| dir[*i].is_positive())
                    .flat_map(|(i, &v)| {
                        let (t, dir) = (&t, &dir);
                        net.out_arcs(v)
                            .iter()
                            .filter(|&&arc| !is_zero(net.ratio(arc)))
                            .map(move |&arc| (level / net.ratio(arc) - &t[i]) / &dir[i])
                    })
                    .max();
                if let Some(shift) = shift {
                    for (ti, di) in t.iter_mut().zip(&dir) {
                        *ti += &shift * di;
                    }
                }
            }
            None => {
                for basis in &general.null_basis {
                    let weight = int(rng.gen_range(1..=10));
                    for (ti, bi) in t.iter_mut().zip(basis) {
                        *ti += &weight * bi;
                    }
                }
            }
        }
        for (i, v) in part.iter().enumerate() {
            departures[v.0] = t[i].clone();
        }
    }
    let mut flow = FlowState {
        arc_flow: vec![zero(); net.arc_count()],
        balancing: balancing.to_vec(),
    };
    for a in net.arc_ids() {
        flow.arc_flow[a.0] = net.ratio(a) * &departures[net.arc(a).tail.0];
    }
    if !check_flow_state(net, &flow) {
        return Err(ScenarioError::NoConsistentFlow(
            "simulated state failed verification".into(),
        ));
    }
    Ok(flow)
}

/// The single null direction, oriented to be nonnegative, if there is one.
fn nonnegative_direction(basis: &[Vec<Rational>]) -> Option<Vec<Rational>> {
    let [dir] = basis else { return None };
    if dir.iter().all(|x| !x.is_negative()) {
        Some(dir.clone())
    } else if dir.iter().all(|x| !x.is_positive()) {
        Some(dir.iter().map(|x| -x.clone()).collect())
    } else {
        None
    }
}

/// What monitoring `monitored` reveals about `flow`.
pub fn observe(net: &RoadNetwork, flow: &FlowState, monitored: &BTreeSet<VertexId>) -> Placement {
    observe_flow(net, flow, monitored.clone())
}
