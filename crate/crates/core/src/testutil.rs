//! Builders shared by unit tests.

use std::collections::BTreeSet;

use crate::network::{Link, Network, Node, NodeIdx};
use crate::population::{Activity, Leg, Person, Plan, PlanElement, Route};
use crate::Mode;

#[derive(Default)]
pub struct NetBuilder {
    nodes: Vec<Node>,
    links: Vec<Link>,
}

impl NetBuilder {
    pub fn node(mut self, id: &str, x: f64, y: f64) -> Self {
        self.nodes.push(Node {
            id: id.to_string(),
            x,
            y,
        });
        self
    }

    pub fn link(mut self, id: &str, from: &str, to: &str, length: f64, capacity: f64, speed: f64) -> Self {
        let idx = |nid: &str| {
            NodeIdx(
                self.nodes
                    .iter()
                    .position(|n| n.id == nid)
                    .unwrap_or_else(|| panic!("unknown node {nid}")) as u32,
            )
        };
        self.links.push(Link {
            id: id.to_string(),
            from: idx(from),
            to: idx(to),
            length,
            capacity,
            free_speed: speed,
            lanes: 1,
            modes: BTreeSet::from([Mode::Car]),
        });
        self
    }

    pub fn build(self) -> Network {
        Network::new(self.nodes, self.links, None)
    }
}

pub fn act(kind: &str, link: u32, end: Option<u32>) -> PlanElement {
    PlanElement::Activity(Activity {
        kind: kind.to_string(),
        link: crate::network::LinkIdx(link),
        end_time: end,
        typical_duration: if kind == "work" { 8 * 3600 } else { 12 * 3600 },
    })
}

pub fn car_leg(route: &[u32]) -> PlanElement {
    PlanElement::Leg(Leg {
        mode: Mode::Car,
        route: Some(Route::Links(
            route.iter().map(|&l| crate::network::LinkIdx(l)).collect(),
        )),
    })
}

pub fn teleport_leg(mode: Mode, distance: f64) -> PlanElement {
    PlanElement::Leg(Leg {
        mode,
        route: Some(Route::Teleport { distance }),
    })
}

pub fn person(id: &str, elements: Vec<PlanElement>) -> Person {
    Person {
        id: id.to_string(),
        toll_exempt: false,
        plans: vec![Plan::new(elements)],
        selected: 0,
    }
}
