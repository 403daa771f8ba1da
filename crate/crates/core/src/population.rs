//! Agents, daily activity-leg plans, and the bounded plan memory the
//! co-evolutionary loop selects from.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::network::{LinkIdx, Network};
use crate::{Mode, HORIZON};

/// Upper bound on plans memorized per person unless configured otherwise.
pub const DEFAULT_MAX_PLANS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Activity {
    pub kind: String,
    pub link: LinkIdx,
    /// Seconds since midnight; absent for the final activity of a plan.
    pub end_time: Option<u32>,
    /// Seconds, must be positive. Governs the logarithmic utility curve.
    pub typical_duration: u32,
}

/// How a leg gets from one activity to the next. Car legs carry a link
/// path, pt legs a transit itinerary, walk/bike legs a crow-fly distance.
#[derive(Debug, Clone, PartialEq)]
pub enum Route {
    /// Links to traverse, excluding the origin activity's link and ending
    /// with the destination activity's link. Empty when both activities sit
    /// on the same link.
    Links(Vec<LinkIdx>),
    Transit(PtItinerary),
    Teleport { distance: f64 },
}

/// A direct (zero-transfer) transit connection, resolved at planning time.
/// Board/alight times are recomputed from the schedule during execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtItinerary {
    pub line: String,
    pub board_stop: usize,
    pub alight_stop: usize,
    /// Access walk duration in seconds.
    pub access_walk: u32,
    /// Egress walk duration in seconds.
    pub egress_walk: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leg {
    pub mode: Mode,
    pub route: Option<Route>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanElement {
    Activity(Activity),
    Leg(Leg),
}

/// An alternating activity/leg chain starting and ending with an activity.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub elements: Vec<PlanElement>,
    /// Utility of the plan as last executed; `None` until run once.
    pub score: Option<f64>,
}

impl Plan {
    pub fn new(elements: Vec<PlanElement>) -> Self {
        Plan {
            elements,
            score: None,
        }
    }

    pub fn num_activities(&self) -> usize {
        self.elements.len().div_ceil(2)
    }

    pub fn num_legs(&self) -> usize {
        self.elements.len() / 2
    }

    pub fn activity(&self, i: usize) -> &Activity {
        match &self.elements[2 * i] {
            PlanElement::Activity(a) => a,
            PlanElement::Leg(_) => unreachable!("alternation validated at construction"),
        }
    }

    pub fn activity_mut(&mut self, i: usize) -> &mut Activity {
        match &mut self.elements[2 * i] {
            PlanElement::Activity(a) => a,
            PlanElement::Leg(_) => unreachable!("alternation validated at construction"),
        }
    }

    pub fn leg(&self, i: usize) -> &Leg {
        match &self.elements[2 * i + 1] {
            PlanElement::Leg(l) => l,
            PlanElement::Activity(_) => unreachable!("alternation validated at construction"),
        }
    }

    pub fn leg_mut(&mut self, i: usize) -> &mut Leg {
        match &mut self.elements[2 * i + 1] {
            PlanElement::Leg(l) => l,
            PlanElement::Activity(_) => unreachable!("alternation validated at construction"),
        }
    }

    pub fn activities(&self) -> impl Iterator<Item = &Activity> {
        self.elements.iter().filter_map(|e| match e {
            PlanElement::Activity(a) => Some(a),
            PlanElement::Leg(_) => None,
        })
    }

    pub fn legs(&self) -> impl Iterator<Item = &Leg> {
        self.elements.iter().filter_map(|e| match e {
            PlanElement::Leg(l) => Some(l),
            PlanElement::Activity(_) => None,
        })
    }

    /// Checks alternation, timing ranges and car-route continuity.
    pub fn validate(&self, net: &Network, person: &str, plan_idx: usize) -> Result<()> {
        let alternation = |message: &str| SimError::PlanAlternation {
            person: person.to_string(),
            plan: plan_idx,
            message: message.to_string(),
        };
        if self.elements.is_empty() {
            return Err(alternation("plan has no elements"));
        }
        if self.elements.len().is_multiple_of(2) {
            return Err(alternation("plan must start and end with an activity"));
        }
        for (i, el) in self.elements.iter().enumerate() {
            let is_activity = matches!(el, PlanElement::Activity(_));
            if (i % 2 == 0) != is_activity {
                return Err(alternation(&format!("element {i} breaks alternation")));
            }
        }
        let n_act = self.num_activities();
        for i in 0..n_act {
            let act = self.activity(i);
            if act.typical_duration == 0 {
                return Err(SimError::InvalidAttribute {
                    subject: format!("person \"{person}\" activity {i}"),
                    field: "typical_duration",
                    requirement: "positive",
                    value: "0".to_string(),
                });
            }
            match act.end_time {
                Some(t) if t > HORIZON => {
                    return Err(SimError::InvalidAttribute {
                        subject: format!("person \"{person}\" activity {i}"),
                        field: "end_time",
                        requirement: "within [0, 30h]",
                        value: t.to_string(),
                    });
                }
                None if i + 1 < n_act => {
                    return Err(alternation(&format!(
                        "activity {i} has no end_time but is not the final activity"
                    )));
                }
                _ => {}
            }
        }
        for leg_idx in 0..self.num_legs() {
            self.validate_leg_route(net, person, leg_idx)?;
        }
        Ok(())
    }

    fn validate_leg_route(&self, net: &Network, person: &str, leg_idx: usize) -> Result<()> {
        let leg = self.leg(leg_idx);
        let Some(Route::Links(links)) = &leg.route else {
            return Ok(());
        };
        let origin = self.activity(leg_idx).link;
        let dest = self.activity(leg_idx + 1).link;
        let discontinuity = |position: usize| SimError::RouteDiscontinuity {
            person: person.to_string(),
            leg: leg_idx,
            position,
        };
        if links.is_empty() {
            if origin != dest {
                return Err(discontinuity(0));
            }
            return Ok(());
        }
        if net.link(links[0]).from != net.link(origin).to {
            return Err(discontinuity(0));
        }
        for (pos, pair) in links.windows(2).enumerate() {
            if net.link(pair[0]).to != net.link(pair[1]).from {
                return Err(discontinuity(pos + 1));
            }
        }
        if *links.last().unwrap() != dest {
            return Err(discontinuity(links.len() - 1));
        }
        Ok(())
    }
}

/// Score used when ranking plans: unscored plans count as worst.
pub fn selection_score(plan: &Plan) -> f64 {
    plan.score.unwrap_or(f64::NEG_INFINITY)
}

#[derive(Debug, Clone)]
pub struct Person {
    pub id: String,
    pub toll_exempt: bool,
    /// Insertion-ordered plan memory; index order is age order.
    pub plans: Vec<Plan>,
    pub selected: usize,
}

impl Person {
    pub fn selected_plan(&self) -> &Plan {
        &self.plans[self.selected]
    }

    pub fn selected_plan_mut(&mut self) -> &mut Plan {
        &mut self.plans[self.selected]
    }

    /// Adds a plan to the memory and selects it. If the memory would exceed
    /// `max_plans`, the worst-scored plan is evicted first (unscored counts
    /// as worst, ties evict the oldest, and the currently selected plan is
    /// kept whenever an unselected plan ties with it).
    pub fn add_plan(&mut self, plan: Plan, max_plans: usize) {
        debug_assert!(max_plans >= 1);
        if self.plans.len() >= max_plans {
            let evict = self.eviction_candidate();
            self.plans.remove(evict);
            if self.selected > evict {
                self.selected -= 1;
            } else if self.selected == evict {
                self.selected = 0;
            }
        }
        self.plans.push(plan);
        self.selected = self.plans.len() - 1;
    }

    fn eviction_candidate(&self) -> usize {
        let worst = self
            .plans
            .iter()
            .map(selection_score)
            .fold(f64::INFINITY, f64::min);
        let tied = |i: usize| selection_score(&self.plans[i]) == worst;
        // Oldest unselected plan among the worst; the selected plan only
        // goes if it is the sole worst plan.
        (0..self.plans.len())
            .find(|&i| tied(i) && i != self.selected)
            .unwrap_or(self.selected)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Population {
    pub persons: Vec<Person>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.persons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }

    pub fn person_idx(&self, id: &str) -> Option<usize> {
        self.persons.iter().position(|p| p.id == id)
    }
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct PersonRecord {
    id: String,
    #[serde(default)]
    toll_exempt: bool,
    #[serde(default)]
    selected: usize,
    plans: Vec<PlanRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    elements: Vec<ElementRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ElementRecord {
    Activity {
        kind: String,
        link: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        end_time: Option<u32>,
        typical_duration: u32,
    },
    Leg {
        mode: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        route: Option<RouteRecord>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RouteRecord {
    Links { links: Vec<String> },
    Transit(PtItinerary),
    Teleport { distance: f64 },
}

pub fn load_population(path: impl AsRef<Path>, net: &Network) -> Result<Population> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    let records: Vec<PersonRecord> =
        serde_json::from_str(&text).map_err(|e| SimError::parse(path, &e))?;

    let mut persons = Vec::with_capacity(records.len());
    let mut seen = std::collections::HashSet::new();
    for rec in records {
        let PersonRecord {
            id: person_id,
            toll_exempt,
            selected,
            plans: plan_records,
        } = rec;
        if !seen.insert(person_id.clone()) {
            return Err(SimError::DuplicateId {
                kind: "person",
                id: person_id,
            });
        }
        let resolve_link = |id: &str| -> Result<LinkIdx> {
            net.link_idx(id).ok_or_else(|| SimError::DanglingReference {
                context: format!("person \"{person_id}\""),
                kind: "link",
                id: id.to_string(),
            })
        };
        let mut plans = Vec::with_capacity(plan_records.len());
        for (plan_idx, plan_rec) in plan_records.into_iter().enumerate() {
            let mut elements = Vec::with_capacity(plan_rec.elements.len());
            for el in plan_rec.elements {
                elements.push(match el {
                    ElementRecord::Activity {
                        kind,
                        link,
                        end_time,
                        typical_duration,
                    } => PlanElement::Activity(Activity {
                        kind,
                        link: resolve_link(&link)?,
                        end_time,
                        typical_duration,
                    }),
                    ElementRecord::Leg { mode, route } => {
                        let route = match route {
                            None => None,
                            Some(RouteRecord::Links { links }) => Some(Route::Links(
                                links
                                    .iter()
                                    .map(|l| resolve_link(l))
                                    .collect::<Result<Vec<_>>>()?,
                            )),
                            Some(RouteRecord::Transit(it)) => Some(Route::Transit(it)),
                            Some(RouteRecord::Teleport { distance }) => {
                                Some(Route::Teleport { distance })
                            }
                        };
                        PlanElement::Leg(Leg {
                            mode: mode.parse()?,
                            route,
                        })
                    }
                });
            }
            let plan = Plan {
                elements,
                score: plan_rec.score,
            };
            plan.validate(net, &person_id, plan_idx)?;
            plans.push(plan);
        }
        if plans.is_empty() {
            return Err(SimError::Config(format!(
                "person \"{person_id}\" has no plans"
            )));
        }
        if selected >= plans.len() {
            return Err(SimError::Config(format!(
                "person \"{person_id}\": selected plan {selected} out of range"
            )));
        }
        persons.push(Person {
            id: person_id,
            toll_exempt,
            plans,
            selected,
        });
    }
    Ok(Population { persons })
}

pub fn save_population(pop: &Population, net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let records: Vec<PersonRecord> = pop
        .persons
        .iter()
        .map(|p| PersonRecord {
            id: p.id.clone(),
            toll_exempt: p.toll_exempt,
            selected: p.selected,
            plans: p
                .plans
                .iter()
                .map(|plan| PlanRecord {
                    score: plan.score,
                    elements: plan
                        .elements
                        .iter()
                        .map(|el| match el {
                            PlanElement::Activity(a) => ElementRecord::Activity {
                                kind: a.kind.clone(),
                                link: net.link(a.link).id.clone(),
                                end_time: a.end_time,
                                typical_duration: a.typical_duration,
                            },
                            PlanElement::Leg(l) => ElementRecord::Leg {
                                mode: l.mode.to_string(),
                                route: l.route.as_ref().map(|r| match r {
                                    Route::Links(links) => RouteRecord::Links {
                                        links: links
                                            .iter()
                                            .map(|l| net.link(*l).id.clone())
                                            .collect(),
                                    },
                                    Route::Transit(it) => RouteRecord::Transit(it.clone()),
                                    Route::Teleport { distance } => RouteRecord::Teleport {
                                        distance: *distance,
                                    },
                                }),
                            },
                        })
                        .collect(),
                })
                .collect(),
        })
        .collect();
    let text = serde_json::to_string_pretty(&records).expect("population serialization");
    std::fs::write(path, text).map_err(|e| SimError::io(path, e))
}
