//! Time-dependent least-generalized-cost routing on the car subgraph.
//!
//! Generalized cost of a path is the sum of bin-evaluated travel times plus
//! expected tolls at the arrival time at each crossing link, converted to
//! equivalent seconds with the scoring coefficients
//! (`dollars * beta_money / (|beta_trav.car| / 3600)`), so router
//! preferences agree with the scoring function by construction.
//!
//! The search keeps Pareto label sets over (cost, arrival time) per node:
//! with tolls, the cheapest partial path is not always the earliest, so a
//! single label per node would miss optima. Labels expand in cost order;
//! the first finished label is minimal. Among finished labels of exactly
//! equal cost the lexicographically smallest link-id sequence wins.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Result, SimError};
use crate::network::{LinkIdx, Network};
use crate::replanning::ttf::TravelTimeField;
use crate::scoring::ScoringParams;
use crate::tolling::TollScheme;
use crate::Mode;

/// Seconds of car travel one dollar is worth to the router.
pub fn toll_to_seconds(params: &ScoringParams) -> Result<f64> {
    let beta_car = params.beta_trav.car;
    if beta_car >= 0.0 {
        return Err(SimError::Config(
            "routing with tolls requires a negative beta_trav.car".to_string(),
        ));
    }
    Ok(params.beta_money / (-beta_car / 3600.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarRoute {
    /// Links to traverse; empty when origin and destination coincide.
    pub links: Vec<LinkIdx>,
    /// Generalized cost in seconds (travel time + toll equivalent).
    pub cost: f64,
    /// Expected arrival time, seconds.
    pub arrival: f64,
}

struct Label {
    link: LinkIdx,
    parent: usize,
}

const ROOT: usize = usize::MAX;

struct HeapEntry {
    cost: f64,
    time: f64,
    seq: u64,
    label: usize,
    finished: bool,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (cost, time, seq)
        other
            .cost
            .total_cmp(&self.cost)
            .then(other.time.total_cmp(&self.time))
            .then(other.seq.cmp(&self.seq))
    }
}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Least-generalized-cost route from the downstream end of `origin` to
/// (and including) `dest`, departing at `dep_time`.
pub fn route_car(
    net: &Network,
    ttf: &TravelTimeField,
    toll: Option<&TollScheme>,
    origin: LinkIdx,
    dest: LinkIdx,
    dep_time: u32,
    params: &ScoringParams,
) -> Result<CarRoute> {
    if origin == dest {
        return Ok(CarRoute {
            links: Vec::new(),
            cost: 0.0,
            arrival: dep_time as f64,
        });
    }

    let toll_factor = match toll {
        Some(_) => toll_to_seconds(params)?,
        None => 0.0,
    };
    let mut chargeable = vec![false; net.links().len()];
    if let Some(scheme) = toll {
        for l in scheme.chargeable_links() {
            chargeable[l.idx()] = true;
        }
    }
    let link_cost = |link: LinkIdx, t: f64| -> (f64, f64) {
        let tt = ttf.travel_time(link, t);
        let mut cost = tt;
        if chargeable[link.idx()] {
            cost += toll.unwrap().rate_at(t.max(0.0) as u32) * toll_factor;
        }
        (cost, tt)
    };

    let start = net.link(origin).to;
    let goal = net.link(dest).from;

    let mut labels: Vec<Label> = Vec::new();
    // Non-dominated (cost, time) pairs per node.
    let mut frontier: Vec<Vec<(f64, f64)>> = vec![Vec::new(); net.nodes().len()];
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
    let mut seq = 0u64;

    labels.push(Label {
        link: origin,
        parent: ROOT,
    });
    frontier[start.idx()].push((0.0, dep_time as f64));
    heap.push(HeapEntry {
        cost: 0.0,
        time: dep_time as f64,
        seq,
        label: 0,
        finished: false,
    });

    let mut best: Option<(f64, Vec<LinkIdx>)> = None;

    while let Some(entry) = heap.pop() {
        if let Some((best_cost, _)) = &best {
            // Everything at strictly higher cost cannot improve; exact-cost
            // ties still compete on lexicographic path order.
            if entry.cost > *best_cost {
                break;
            }
        }
        if entry.finished {
            let path = reconstruct(&labels, entry.label);
            match &mut best {
                None => best = Some((entry.cost, path)),
                Some((best_cost, best_path)) => {
                    if entry.cost == *best_cost && lex_less(net, &path, best_path) {
                        *best_path = path;
                    }
                }
            }
            continue;
        }

        let label_node = net.link(labels[entry.label].link).to;
        // Stale check: strictly dominated labels can be skipped.
        if frontier[label_node.idx()]
            .iter()
            .any(|&(c, t)| c < entry.cost && t <= entry.time || c <= entry.cost && t < entry.time)
        {
            continue;
        }

        if label_node == goal {
            let (cost, tt) = link_cost(dest, entry.time);
            labels.push(Label {
                link: dest,
                parent: entry.label,
            });
            seq += 1;
            heap.push(HeapEntry {
                cost: entry.cost + cost,
                time: entry.time + tt,
                seq,
                label: labels.len() - 1,
                finished: true,
            });
        }

        for &out in net.out_links(label_node) {
            if out == dest || !net.link(out).allows(Mode::Car) {
                continue;
            }
            let (cost, tt) = link_cost(out, entry.time);
            let new_cost = entry.cost + cost;
            let new_time = entry.time + tt;
            let head = net.link(out).to;
            if frontier[head.idx()]
                .iter()
                .any(|&(c, t)| c <= new_cost && t <= new_time)
            {
                continue; // dominated
            }
            frontier[head.idx()].retain(|&(c, t)| !(new_cost <= c && new_time <= t));
            frontier[head.idx()].push((new_cost, new_time));
            labels.push(Label {
                link: out,
                parent: entry.label,
            });
            seq += 1;
            heap.push(HeapEntry {
                cost: new_cost,
                time: new_time,
                seq,
                label: labels.len() - 1,
                finished: false,
            });
        }
    }

    match best {
        Some((cost, links)) => {
            let arrival = path_arrival(ttf, &links, dep_time);
            Ok(CarRoute {
                links,
                cost,
                arrival,
            })
        }
        None => Err(SimError::Unreachable {
            from: net.link(origin).id.clone(),
            to: net.link(dest).id.clone(),
            dep_time,
        }),
    }
}

fn reconstruct(labels: &[Label], mut idx: usize) -> Vec<LinkIdx> {
    let mut path = Vec::new();
    while idx != ROOT {
        let label = &labels[idx];
        if label.parent == ROOT {
            break; // root label carries the origin link, not a route link
        }
        path.push(label.link);
        idx = label.parent;
    }
    path.reverse();
    path
}

fn lex_less(net: &Network, a: &[LinkIdx], b: &[LinkIdx]) -> bool {
    let ids = |p: &[LinkIdx]| -> Vec<&str> { p.iter().map(|l| net.link(*l).id.as_str()).collect() };
    ids(a) < ids(b)
}

fn path_arrival(ttf: &TravelTimeField, links: &[LinkIdx], dep_time: u32) -> f64 {
    let mut t = dep_time as f64;
    for &l in links {
        t += ttf.travel_time(l, t);
    }
    t
}
