//! Plan utility: the logarithmic activity term plus linear leg terms for
//! travel time, distance cost, fares and tolls. Tolls enter the leg score
//! as `beta_money * tau` where `tau` is the (negative) charged amount, so a
//! $9 charge at `beta_money = 0.5` costs 4.5 utils.
//!
//! Scores are pure functions of (plan, events, params): repeated evaluation
//! is bit-identical, which the replanning loop relies on.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::events::{Event, EventKind};
use crate::network::Network;
use crate::population::{Plan, Route};
use crate::{Mode, DAY};

/// One value per mode; the usual shape for travel-related coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeMap {
    pub car: f64,
    pub pt: f64,
    pub walk: f64,
    pub bike: f64,
}

impl ModeMap {
    pub const fn uniform(v: f64) -> Self {
        ModeMap {
            car: v,
            pt: v,
            walk: v,
            bike: v,
        }
    }

    pub fn get(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Car => self.car,
            Mode::Pt => self.pt,
            Mode::Walk => self.walk,
            Mode::Bike => self.bike,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringParams {
    /// Marginal utility of performing an activity, utils/hour. Positive.
    pub beta_perf: f64,
    /// Marginal utility of traveling, utils/hour. Non-positive per mode.
    pub beta_trav: ModeMap,
    /// Alternative-specific constants, utils.
    pub mode_constant: ModeMap,
    /// Marginal utility of money, utils/dollar. Positive.
    pub beta_money: f64,
    /// Out-of-pocket cost per kilometer, dollars/km. Non-negative.
    pub monetary_rate: ModeMap,
    /// Flat fare per pt trip, dollars.
    pub pt_fare: f64,
    /// Typical durations by activity kind, seconds.
    pub typical_duration: BTreeMap<String, u32>,
}

impl Default for ScoringParams {
    fn default() -> Self {
        ScoringParams {
            beta_perf: 6.0,
            beta_trav: ModeMap {
                car: -6.0,
                pt: -6.0,
                walk: -12.0,
                bike: -8.0,
            },
            mode_constant: ModeMap {
                car: -1.0,
                pt: 0.0,
                walk: 0.0,
                bike: 0.0,
            },
            beta_money: 0.5,
            monetary_rate: ModeMap::uniform(0.0),
            pt_fare: 2.75,
            typical_duration: BTreeMap::from([
                ("home".to_string(), 12 * 3600),
                ("work".to_string(), 8 * 3600),
            ]),
        }
    }
}

impl ScoringParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(SimError::Config(format!("scoring: {msg}")))
            }
        };
        check(self.beta_perf > 0.0, "beta_perf must be positive")?;
        check(self.beta_money > 0.0, "beta_money must be positive")?;
        for mode in Mode::ALL {
            check(
                self.beta_trav.get(mode) <= 0.0,
                &format!("beta_trav.{mode} must be <= 0"),
            )?;
            check(
                self.monetary_rate.get(mode) >= 0.0,
                &format!("monetary_rate.{mode} must be >= 0"),
            )?;
        }
        check(self.pt_fare >= 0.0, "pt_fare must be >= 0")?;
        Ok(())
    }
}

/// Logarithmic activity utility with the zero-utility duration convention
/// `t0 = t_typ * exp(-10h / t_typ)`. Durations clamp at 1 s so the value
/// stays finite.
fn activity_utility_raw(duration_s: f64, typical_s: f64, beta_perf: f64) -> f64 {
    let t_typ_h = typical_s / 3600.0;
    let t0_h = t_typ_h * (-10.0 / t_typ_h).exp();
    let dur_h = duration_s.max(1.0) / 3600.0;
    beta_perf * t_typ_h * (dur_h / t0_h).ln()
}

/// Utility of performing an activity of `kind` for `duration` seconds.
/// The typical duration is looked up in the params.
pub fn activity_utility(duration: f64, kind: &str, params: &ScoringParams) -> Result<f64> {
    let typical = params
        .typical_duration
        .get(kind)
        .copied()
        .ok_or_else(|| SimError::UnknownActivityKind(kind.to_string()))?;
    Ok(activity_utility_raw(duration, typical as f64, params.beta_perf))
}

/// Utility of one executed leg.
pub fn leg_utility(
    mode: Mode,
    travel_time: f64,
    distance: f64,
    toll_paid: f64,
    params: &ScoringParams,
) -> f64 {
    let fare = if mode == Mode::Pt { params.pt_fare } else { 0.0 };
    let distance_km = distance / 1000.0;
    let tau = -toll_paid;
    params.mode_constant.get(mode)
        + params.beta_trav.get(mode) * (travel_time / 3600.0)
        + params.beta_money * (-params.monetary_rate.get(mode) * distance_km - fare)
        + params.beta_money * tau
}

/// A scored plan: total utility plus one breakdown entry per plan element.
/// When the first and last activity merge across midnight, the merged
/// utility sits in the first entry and the last entry is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPlan {
    pub total: f64,
    pub breakdown: Vec<f64>,
}

/// Scores a plan from the person's slice of the event stream.
///
/// Activity durations come from act_start/act_end events; the day wraps so
/// the first and the last activity merge into one when their kinds match
/// (duration = first end + whatever remains of the 24 h day after the last
/// start). Leg travel times come from depart/arrive pairs; money events are
/// attributed to the leg in progress.
pub fn score_plan(
    plan: &Plan,
    events: &[&Event],
    params: &ScoringParams,
    net: &Network,
) -> Result<ScoredPlan> {
    let n_act = plan.num_activities();
    let n_leg = plan.num_legs();
    let mismatch = |message: String| SimError::EventPlanMismatch {
        person: String::new(),
        message,
    };

    let mut act_ends = Vec::with_capacity(n_leg);
    let mut act_starts = Vec::with_capacity(n_leg);
    let mut departs = Vec::with_capacity(n_leg);
    let mut arrives = Vec::with_capacity(n_leg);
    let mut tolls = vec![0.0f64; n_leg];
    let mut current_leg: Option<usize> = None;

    for ev in events {
        match ev.kind {
            EventKind::ActEnd => act_ends.push(ev.time),
            EventKind::Depart => {
                let leg = departs.len();
                if leg >= n_leg {
                    return Err(mismatch("more depart events than legs".into()));
                }
                departs.push(ev.time);
                current_leg = Some(leg);
            }
            EventKind::Arrive => {
                if current_leg.is_none() {
                    return Err(mismatch("arrive event without a leg in progress".into()));
                }
                arrives.push(ev.time);
                current_leg = None;
            }
            EventKind::ActStart => act_starts.push(ev.time),
            EventKind::Money => match current_leg {
                Some(leg) => {
                    let amount = ev.amount.unwrap_or(0.0);
                    tolls[leg] += -amount;
                }
                None => {
                    return Err(mismatch("money event outside a leg".into()));
                }
            },
            EventKind::LinkEnter | EventKind::LinkLeave | EventKind::Board | EventKind::Alight => {}
        }
    }

    if departs.len() != n_leg || arrives.len() != n_leg {
        return Err(mismatch(format!(
            "{} departs / {} arrives for {} legs (missing arrive?)",
            departs.len(),
            arrives.len(),
            n_leg
        )));
    }
    if act_ends.len() != n_leg || act_starts.len() != n_leg {
        return Err(mismatch(format!(
            "{} act_end / {} act_start events for {} activities",
            act_ends.len(),
            act_starts.len(),
            n_act
        )));
    }

    let mut breakdown = vec![0.0f64; plan.elements.len()];

    // Activities. Element index of activity i is 2i.
    if n_leg == 0 {
        let act = plan.activity(0);
        breakdown[0] =
            activity_utility_raw(DAY as f64, act.typical_duration as f64, params.beta_perf);
    } else {
        for i in 1..n_act.saturating_sub(1) {
            let start = act_starts[i - 1];
            let end = act_ends[i];
            if end < start {
                return Err(mismatch(format!("activity {i} ends before it starts")));
            }
            let act = plan.activity(i);
            breakdown[2 * i] = activity_utility_raw(
                (end - start) as f64,
                act.typical_duration as f64,
                params.beta_perf,
            );
        }
        let first = plan.activity(0);
        let last = plan.activity(n_act - 1);
        let first_end = act_ends[0] as f64;
        let last_tail = (DAY as f64 - act_starts[n_leg - 1] as f64).max(0.0);
        if first.kind == last.kind {
            breakdown[0] = activity_utility_raw(
                first_end + last_tail,
                first.typical_duration as f64,
                params.beta_perf,
            );
        } else {
            breakdown[0] =
                activity_utility_raw(first_end, first.typical_duration as f64, params.beta_perf);
            breakdown[plan.elements.len() - 1] =
                activity_utility_raw(last_tail, last.typical_duration as f64, params.beta_perf);
        }
    }

    // Legs. Element index of leg i is 2i + 1.
    for i in 0..n_leg {
        let leg = plan.leg(i);
        let travel_time = (arrives[i] - departs[i]) as f64;
        let distance = leg_distance(plan, i, net)?;
        breakdown[2 * i + 1] = leg_utility(leg.mode, travel_time, distance, tolls[i], params);
    }

    Ok(ScoredPlan {
        total: breakdown.iter().sum(),
        breakdown,
    })
}

fn leg_distance(plan: &Plan, leg_idx: usize, net: &Network) -> Result<f64> {
    let leg = plan.leg(leg_idx);
    match &leg.route {
        Some(Route::Links(links)) => {
            Ok(links.iter().map(|l| net.link(*l).length).sum())
        }
        Some(Route::Teleport { distance }) => Ok(*distance),
        // pt distance is the crow-fly between the trip's endpoints; the
        // default monetary_rate for pt is zero so this only matters when a
        // scenario prices pt by distance.
        Some(Route::Transit(_)) => {
            let from = net.link_endpoint(plan.activity(leg_idx).link);
            let to = net.link_endpoint(plan.activity(leg_idx + 1).link);
            Ok(net.euclidean(from, to))
        }
        None => Err(SimError::UnroutedLeg {
            person: String::new(),
            leg: leg_idx,
        }),
    }
}
