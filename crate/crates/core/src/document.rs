//! JSON file format for networks, monitor placements and flows.
//!
//! ```json
//! {
//!   "vertices": ["a", "b"],
//!   "arcs": [{"tail": "a", "head": "b"}, {"tail": "b", "head": "a", "ratio": "1"}],
//!   "centroids": ["b"],
//!   "monitored": ["a"],
//!   "observations": [{"tail": "a", "head": "b", "flow": "4"}],
//!   "observed_balancing": {}
//! }
//! ```
//!
//! Ratios are fraction strings (numbers are accepted too). An arc without a
//! ratio gets `1 / out-degree`; a vertex must not mix the two forms.

use crate::monitoring::{validate_placement, Placement, PlacementError};
use crate::network::{FlowState, NetworkError, RoadNetwork, VertexId};
use crate::rational::{serde_string, serde_string_map, serde_string_opt, Rational};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcEntry {
    pub tail: String,
    pub head: String,
    #[serde(default, with = "serde_string_opt", skip_serializing_if = "Option::is_none")]
    pub ratio: Option<Rational>,
}

/// Flow on one arc, by labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcFlow {
    pub tail: String,
    pub head: String,
    #[serde(with = "serde_string")]
    pub flow: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub vertices: Vec<String>,
    pub arcs: Vec<ArcEntry>,
    #[serde(default)]
    pub centroids: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub monitored: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observations: Vec<ArcFlow>,
    #[serde(default, with = "serde_string_map", skip_serializing_if = "BTreeMap::is_empty")]
    pub observed_balancing: BTreeMap<String, Rational>,
}

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("unknown vertex {0:?}")]
    UnknownVertex(String),
    #[error("no arc {0}->{1}")]
    UnknownArc(String, String),
    #[error("{0} is observed twice")]
    DuplicateObservation(String),
    #[error(transparent)]
    Placement(#[from] PlacementError),
}

impl NetworkDocument {
    pub fn parse(text: &str) -> Result<Self, DocumentError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }

    /// The network with explicit ratios and no placement.
    pub fn from_network(net: &RoadNetwork) -> Self {
        NetworkDocument {
            name: None,
            vertices: net.labels().to_vec(),
            arcs: net
                .arcs()
                .iter()
                .map(|a| ArcEntry {
                    tail: net.label(a.tail).to_string(),
                    head: net.label(a.head).to_string(),
                    ratio: Some(a.ratio.clone()),
                })
                .collect(),
            centroids: net.centroids().iter().map(|&v| net.label(v).to_string()).collect(),
            ..Default::default()
        }
    }

    /// [`Self::from_network`] plus the monitored set and its observations.
    pub fn with_placement(net: &RoadNetwork, placement: &Placement) -> Self {
        NetworkDocument {
            monitored: labels(net, &placement.monitored),
            observations: placement
                .observed_flow
                .iter()
                .map(|(&a, flow)| arc_flow(net, a, flow))
                .collect(),
            observed_balancing: placement
                .observed_balancing
                .iter()
                .map(|(&v, s)| (net.label(v).to_string(), s.clone()))
                .collect(),
            ..Self::from_network(net)
        }
    }

    pub fn network(&self) -> Result<RoadNetwork, DocumentError> {
        let mut builder = RoadNetwork::builder().vertices(self.vertices.iter().cloned());
        for arc in &self.arcs {
            builder = match &arc.ratio {
                Some(r) => builder.arc(arc.tail.clone(), arc.head.clone(), r.clone()),
                None => builder.uniform_arc(arc.tail.clone(), arc.head.clone()),
            };
        }
        Ok(builder.centroids(self.centroids.iter().cloned()).build()?)
    }

    /// The placement described by the document. With no observations at all
    /// the placement is topological (monitored set only).
    pub fn placement(&self, net: &RoadNetwork) -> Result<Placement, DocumentError> {
        placement_from_parts(net, &self.monitored, &self.observations, &self.observed_balancing)
    }
}

/// Builds a placement from labelled parts. Empty observations give a
/// topological placement; otherwise the observations must match exactly what
/// the monitors see.
pub fn placement_from_parts(
    net: &RoadNetwork,
    monitored: &[String],
    observations: &[ArcFlow],
    observed_balancing: &BTreeMap<String, Rational>,
) -> Result<Placement, DocumentError> {
    let monitored = vertex_ids(net, monitored)?;
    if observations.is_empty() && observed_balancing.is_empty() {
        return Ok(Placement::topological(net, monitored));
    }
    let mut observed_flow = BTreeMap::new();
    for o in observations {
        let a = net
            .arc_between(&o.tail, &o.head)
            .ok_or_else(|| DocumentError::UnknownArc(o.tail.clone(), o.head.clone()))?;
        if observed_flow.insert(a, o.flow.clone()).is_some() {
            return Err(DocumentError::DuplicateObservation(net.arc_label(a)));
        }
    }
    let observed_balancing = observed_balancing
        .iter()
        .map(|(label, s)| Ok((vertex_id(net, label)?, s.clone())))
        .collect::<Result<_, DocumentError>>()?;
    let placement = Placement {
        monitored,
        observed_flow,
        observed_balancing,
    };
    validate_placement(net, &placement)?;
    Ok(placement)
}

pub fn vertex_id(net: &RoadNetwork, label: &str) -> Result<VertexId, DocumentError> {
    net.vertex(label)
        .ok_or_else(|| DocumentError::UnknownVertex(label.to_string()))
}

pub fn vertex_ids(net: &RoadNetwork, labels: &[String]) -> Result<BTreeSet<VertexId>, DocumentError> {
    labels.iter().map(|l| vertex_id(net, l)).collect()
}

pub fn labels<'a>(net: &RoadNetwork, set: impl IntoIterator<Item = &'a VertexId>) -> Vec<String> {
    set.into_iter().map(|&v| net.label(v).to_string()).collect()
}

pub fn arc_flow(net: &RoadNetwork, arc: crate::network::ArcId, flow: &Rational) -> ArcFlow {
    let a = net.arc(arc);
    ArcFlow {
        tail: net.label(a.tail).to_string(),
        head: net.label(a.head).to_string(),
        flow: flow.clone(),
    }
}

/// Arc flows and balancing flows by label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowDocument {
    pub arcs: Vec<ArcFlow>,
    #[serde(with = "serde_string_map")]
    pub balancing: BTreeMap<String, Rational>,
}

impl FlowDocument {
    /// Balancing flows are listed for centroids only.
    pub fn from_state(net: &RoadNetwork, flow: &FlowState) -> Self {
        FlowDocument {
            arcs: net.arc_ids().map(|a| arc_flow(net, a, flow.flow(a))).collect(),
            balancing: net
                .centroids()
                .iter()
                .map(|&v| (net.label(v).to_string(), flow.balancing[v.0].clone()))
                .collect(),
        }
    }

    pub fn to_state(&self, net: &RoadNetwork) -> Result<FlowState, DocumentError> {
        let mut flow = FlowState::zero(net);
        for a in &self.arcs {
            let id = net
                .arc_between(&a.tail, &a.head)
                .ok_or_else(|| DocumentError::UnknownArc(a.tail.clone(), a.head.clone()))?;
            flow.arc_flow[id.0] = a.flow.clone();
        }
        for (label, s) in &self.balancing {
            flow.balancing[vertex_id(net, label)?.0] = s.clone();
        }
        Ok(flow)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::{frac, int};
    use crate::scenario::{generate, CentroidRule, MonitorRule, RatioRule, ScenarioKind, ScenarioSpec};
    use proptest::prelude::*;

    #[test]
    fn parses_the_module_example() {
        let text = r#"{
          "vertices": ["a", "b"],
          "arcs": [{"tail": "a", "head": "b"}, {"tail": "b", "head": "a", "ratio": "1"}],
          "centroids": ["b"],
          "monitored": ["a"],
          "observations": [{"tail": "a", "head": "b", "flow": "4"}, {"tail": "b", "head": "a", "flow": 4}],
          "observed_balancing": {}
        }"#;
        let doc = NetworkDocument::parse(text).unwrap();
        let net = doc.network().unwrap();
        assert_eq!(net.ratio(net.arc_between("a", "b").unwrap()), &int(1));
        let placement = doc.placement(&net).unwrap();
        assert_eq!(placement.observed_flow.len(), 2);
    }

    #[test]
    fn decimal_and_fraction_ratios() {
        let text = r#"{"vertices": ["x", "y", "z"], "arcs": [
            {"tail": "x", "head": "y", "ratio": 0.25}, {"tail": "x", "head": "z", "ratio": "3/4"},
            {"tail": "y", "head": "x"}, {"tail": "z", "head": "x"}]}"#;
        let net = NetworkDocument::parse(text).unwrap().network().unwrap();
        assert_eq!(net.ratio_between(VertexId(0), VertexId(1)), frac(1, 4));
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(matches!(NetworkDocument::parse("{"), Err(DocumentError::Json(_))));
        assert!(NetworkDocument::parse(r#"{"vertices": [], "arcs": [], "extra": 1}"#).is_err());
        let net = fixtures::six_vertex_network();
        let err = placement_from_parts(&net, &["zz".into()], &[], &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, DocumentError::UnknownVertex(_)));
        let partial = [ArcFlow {
            tail: "a".into(),
            head: "b".into(),
            flow: int(4),
        }];
        let err = placement_from_parts(&net, &["a".into()], &partial, &BTreeMap::new()).unwrap_err();
        assert!(matches!(
            err,
            DocumentError::Placement(PlacementError::MissingObservation(_))
        ));
    }

    #[test]
    fn pentagon_round_trip() {
        let net = fixtures::pentagon_network();
        let placement = fixtures::pentagon_placement(&net);
        let doc = NetworkDocument::with_placement(&net, &placement);
        let back = NetworkDocument::parse(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        let net2 = back.network().unwrap();
        assert_eq!(net2, net);
        assert_eq!(back.placement(&net2).unwrap(), placement);
        let truth = fixtures::pentagon_ground_truth(&net);
        let flow = FlowDocument::from_state(&net, &truth);
        let text = serde_json::to_string(&flow).unwrap();
        let back: FlowDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_state(&net).unwrap(), truth);
    }

    proptest! {
        #[test]
        fn generated_networks_survive_json(n in 1usize..10, seed in 0u64..1000, m in 0usize..3) {
            let spec = ScenarioSpec {
                kind: ScenarioKind::RandomGraph { n, density: 0.3 },
                centroids: CentroidRule::Random { count: 2 },
                monitors: MonitorRule::Random { count: m },
                ratios: RatioRule::Random { max_denominator: 9 },
                seed,
            };
            let s = generate(&spec).unwrap();
            let placement = Placement::topological(&s.network, s.monitored.clone());
            let doc = NetworkDocument::with_placement(&s.network, &placement);
            let back = NetworkDocument::parse(&doc.to_json()).unwrap();
            let net = back.network().unwrap();
            prop_assert_eq!(&net, &s.network);
            prop_assert_eq!(back.placement(&net).unwrap().monitored, s.monitored);
        }
    }
}
