//! The co-evolutionary loop: plan selection, route innovation, mode choice
//! and departure-time mutation, iterated with the mobility simulation until
//! the population approximates a Nash equilibrium.
//!
//! Every person owns a random stream seeded from (master seed, person id,
//! iteration), so replanning a population is embarrassingly parallel and
//! its outcome does not depend on processing order. With the `parallel`
//! feature the pass fans out over rayon; [`replan_population_seq`] is the
//! sequential fallback and produces identical results.

pub mod router;
pub mod ttf;

pub use router::{route_car, toll_to_seconds, CarRoute};
pub use ttf::{build_travel_time_field, TravelTimeField, TTF_BIN};

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::events::{EventKind, EventStream};
use crate::mobsim;
use crate::network::{Cordon, Network};
use crate::population::{selection_score, Person, Plan, Population, Route};
use crate::scoring::{score_plan, ScoringParams};
use crate::tolling::TollScheme;
use crate::transit::{pt_itinerary, TransitSchedule};
use crate::{derive_seed, Mode, BIKE_SPEED, HORIZON, WALK_SPEED};

/// Executed score assigned to a plan whose vehicle was still on the network
/// at the end of the horizon.
pub const STUCK_SCORE: f64 = -1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyWeights {
    pub select: f64,
    pub reroute: f64,
    pub mode_choice: f64,
    pub time_mutation: f64,
}

impl Default for StrategyWeights {
    fn default() -> Self {
        StrategyWeights {
            select: 0.70,
            reroute: 0.15,
            mode_choice: 0.10,
            time_mutation: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub weights: StrategyWeights,
    /// Logit temperature for plan selection, in 1/utils.
    pub select_temperature: f64,
    /// Logit temperature for mode choice, in 1/utils.
    pub mode_temperature: f64,
    /// Departure times mutate by uniform(-range, +range) seconds.
    pub time_mutation_range: u32,
    /// Innovation stops after floor(iterations * fraction); the remaining
    /// iterations only select among memorized plans (select-best).
    pub innovation_stop_fraction: f64,
    /// Plan memory bound per person.
    pub max_plans: usize,
    /// A run counts as converged when the final convergence metric is below
    /// this threshold.
    pub convergence_threshold: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            weights: StrategyWeights::default(),
            select_temperature: 1.0,
            mode_temperature: 1.0,
            time_mutation_range: 1800,
            innovation_stop_fraction: 0.8,
            max_plans: crate::population::DEFAULT_MAX_PLANS,
            convergence_threshold: 0.01,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        let all = [w.select, w.reroute, w.mode_choice, w.time_mutation];
        if all.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(SimError::Config(
                "strategy weights must be non-negative".to_string(),
            ));
        }
        if all.iter().sum::<f64>() <= 0.0 {
            return Err(SimError::Config(
                "strategy weights must not all be zero".to_string(),
            ));
        }
        if !(0.0..=1.0).contains(&self.innovation_stop_fraction) {
            return Err(SimError::Config(
                "innovation_stop_fraction must lie in [0, 1]".to_string(),
            ));
        }
        if self.max_plans < 1 {
            return Err(SimError::Config("max_plans must be at least 1".to_string()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Elementary choice operations
// ---------------------------------------------------------------------------

/// Samples an index with probability proportional to exp(mu * value),
/// numerically stabilized by shifting with the maximum.
fn logit_sample(values: &[f64], mu: f64, rng: &mut impl Rng) -> usize {
    debug_assert!(!values.is_empty());
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = values.iter().map(|&v| (mu * (v - max)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut r = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        r -= w;
        if r <= 0.0 {
            return i;
        }
    }
    values.len() - 1
}

/// Multinomial logit over estimated mode utilities. Shift-invariant by
/// construction: adding a constant to every utility leaves the sampling
/// distribution unchanged.
pub fn choose_mode(utilities: &[(Mode, f64)], mu: f64, rng: &mut impl Rng) -> Mode {
    let values: Vec<f64> = utilities.iter().map(|&(_, u)| u).collect();
    utilities[logit_sample(&values, mu, rng)].0
}

/// Chooses a plan from the memory. Unscored plans are tried first
/// (lowest index); otherwise logit over scores, or a deterministic argmax
/// when `select_best` is set (innovation-off iterations).
pub fn select_plan(person: &Person, mu: f64, rng: &mut impl Rng, select_best: bool) -> usize {
    if let Some(idx) = person.plans.iter().position(|p| p.score.is_none()) {
        return idx;
    }
    if select_best {
        let mut best = 0;
        for (i, plan) in person.plans.iter().enumerate() {
            if selection_score(plan) > selection_score(&person.plans[best]) {
                best = i;
            }
        }
        return best;
    }
    let scores: Vec<f64> = person.plans.iter().map(selection_score).collect();
    logit_sample(&scores, mu, rng)
}

/// Shifts one uniformly chosen non-final activity end time by
/// uniform(-range, +range) seconds, clamped so activity ordering and the
/// horizon are preserved.
pub fn mutate_departure_time(plan: &Plan, range: u32, rng: &mut impl Rng) -> Plan {
    let mut out = plan.clone();
    out.score = None;
    let n_act = out.num_activities();
    let timed: Vec<usize> = (0..n_act.saturating_sub(1))
        .filter(|&i| out.activity(i).end_time.is_some())
        .collect();
    if timed.is_empty() {
        return out;
    }
    let pick = timed[rng.gen_range(0..timed.len())];
    let end = out.activity(pick).end_time.unwrap() as i64;
    let delta = rng.gen_range(-(range as i64)..=(range as i64));
    let lower = if pick > 0 {
        out.activity(pick - 1).end_time.unwrap_or(0) as i64
    } else {
        0
    };
    let upper = match out.activity(pick + 1).end_time {
        Some(next) => next as i64,
        None => (HORIZON - 1) as i64,
    };
    let shifted = (end + delta).clamp(lower, upper.min((HORIZON - 1) as i64));
    out.activity_mut(pick).end_time = Some(shifted as u32);
    out
}

// ---------------------------------------------------------------------------
// Innovation strategies
// ---------------------------------------------------------------------------

/// Immutable context shared by all persons during one replanning pass.
pub struct ReplanContext<'a> {
    pub net: &'a Network,
    pub ttf: &'a TravelTimeField,
    pub toll: Option<&'a TollScheme>,
    pub schedule: &'a TransitSchedule,
    pub scoring: &'a ScoringParams,
    pub strategy: &'a StrategyConfig,
    pub master_seed: u64,
    pub iteration: usize,
    pub innovation_on: bool,
}

fn replan_person(person: &mut Person, ctx: &ReplanContext) -> Result<()> {
    let seed = derive_seed(ctx.master_seed, &person.id, ctx.iteration as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if !ctx.innovation_on {
        person.selected = select_plan(person, ctx.strategy.select_temperature, &mut rng, true);
        return Ok(());
    }

    let w = ctx.strategy.weights;
    let total = w.select + w.reroute + w.mode_choice + w.time_mutation;
    let draw = rng.gen::<f64>() * total;
    if draw < w.select {
        person.selected = select_plan(person, ctx.strategy.select_temperature, &mut rng, false);
    } else if draw < w.select + w.reroute {
        reroute(person, ctx)?;
    } else if draw < w.select + w.reroute + w.mode_choice {
        change_mode(person, ctx, &mut rng)?;
    } else {
        let plan = mutate_departure_time(
            person.selected_plan(),
            ctx.strategy.time_mutation_range,
            &mut rng,
        );
        person.add_plan(plan, ctx.strategy.max_plans);
    }
    Ok(())
}

/// Rebuilds every car leg of a copy of the selected plan against the
/// current travel times and tolls.
fn reroute(person: &mut Person, ctx: &ReplanContext) -> Result<()> {
    let mut plan = person.selected_plan().clone();
    plan.score = None;
    for i in 0..plan.num_legs() {
        if plan.leg(i).mode != Mode::Car {
            continue;
        }
        let dep = plan.activity(i).end_time.expect("non-final activity");
        let route = route_car(
            ctx.net,
            ctx.ttf,
            ctx.toll,
            plan.activity(i).link,
            plan.activity(i + 1).link,
            dep,
            ctx.scoring,
        )?;
        plan.leg_mut(i).route = Some(Route::Links(route.links));
    }
    person.add_plan(plan, ctx.strategy.max_plans);
    Ok(())
}

/// Re-draws the mode of one uniformly chosen trip through a multinomial
/// logit over estimated utilities, then routes the leg for the new mode.
fn change_mode(person: &mut Person, ctx: &ReplanContext, rng: &mut impl Rng) -> Result<()> {
    let n_legs = person.selected_plan().num_legs();
    if n_legs == 0 {
        return Ok(());
    }
    let leg_idx = rng.gen_range(0..n_legs);
    let mut plan = person.selected_plan().clone();
    plan.score = None;

    let origin = plan.activity(leg_idx).link;
    let dest = plan.activity(leg_idx + 1).link;
    let dep = plan.activity(leg_idx).end_time.expect("non-final activity");
    let from = ctx.net.link_endpoint(origin);
    let to = ctx.net.link_endpoint(dest);
    let crow_fly = ctx.net.euclidean(from, to);
    let p = ctx.scoring;

    let mut options: Vec<(Mode, f64)> = Vec::with_capacity(4);
    let mut car_route = None;
    match route_car(ctx.net, ctx.ttf, ctx.toll, origin, dest, dep, p) {
        Ok(route) => {
            let dist: f64 = route.links.iter().map(|l| ctx.net.link(*l).length).sum();
            // route.cost already carries the toll converted to seconds
            let u = p.mode_constant.car + p.beta_trav.car * (route.cost / 3600.0)
                - p.beta_money * p.monetary_rate.car * (dist / 1000.0);
            options.push((Mode::Car, u));
            car_route = Some(route);
        }
        // car simply drops out of the choice set for unreachable trips
        Err(SimError::Unreachable { .. }) => {}
        Err(other) => return Err(other),
    }
    let mut pt_conn = None;
    if let Some(conn) = pt_itinerary(ctx.schedule, ctx.net, from, to, dep) {
        let u = p.mode_constant.pt
            + p.beta_trav.pt * (conn.total_travel_time(dep) as f64 / 3600.0)
            - p.beta_money * (p.pt_fare + p.monetary_rate.pt * (crow_fly / 1000.0));
        options.push((Mode::Pt, u));
        pt_conn = Some(conn);
    }
    for (mode, speed) in [(Mode::Walk, WALK_SPEED), (Mode::Bike, BIKE_SPEED)] {
        let u = p.mode_constant.get(mode)
            + p.beta_trav.get(mode) * (crow_fly / speed / 3600.0)
            - p.beta_money * p.monetary_rate.get(mode) * (crow_fly / 1000.0);
        options.push((mode, u));
    }

    let mode = choose_mode(&options, ctx.strategy.mode_temperature, rng);
    let leg = plan.leg_mut(leg_idx);
    leg.mode = mode;
    leg.route = Some(match mode {
        Mode::Car => Route::Links(car_route.expect("car offered").links),
        Mode::Pt => Route::Transit(pt_conn.expect("pt offered").itinerary),
        Mode::Walk | Mode::Bike => Route::Teleport { distance: crow_fly },
    });
    person.add_plan(plan, ctx.strategy.max_plans);
    Ok(())
}

// ---------------------------------------------------------------------------
// Population passes (sequential and data-parallel)
// ---------------------------------------------------------------------------

pub fn replan_population_seq(pop: &mut Population, ctx: &ReplanContext) -> Result<()> {
    pop.persons
        .iter_mut()
        .try_for_each(|person| replan_person(person, ctx))
}

#[cfg(feature = "parallel")]
pub fn replan_population_par(pop: &mut Population, ctx: &ReplanContext) -> Result<()> {
    use rayon::prelude::*;
    // Per-person work is in the microsecond range; batch persons per task
    // so scheduling overhead does not dominate.
    pop.persons
        .par_iter_mut()
        .with_min_len(64)
        .try_for_each(|person| replan_person(person, ctx))
}

/// Dispatches to the parallel pass when the `parallel` feature is on.
pub fn replan_population(pop: &mut Population, ctx: &ReplanContext) -> Result<()> {
    #[cfg(feature = "parallel")]
    {
        replan_population_par(pop, ctx)
    }
    #[cfg(not(feature = "parallel"))]
    {
        replan_population_seq(pop, ctx)
    }
}

fn score_person(
    person: &mut Person,
    person_idx: u32,
    events: &[&crate::events::Event],
    stuck: &HashSet<u32>,
    scoring: &ScoringParams,
    net: &Network,
) -> Result<()> {
    let total = if stuck.contains(&person_idx) {
        STUCK_SCORE
    } else {
        score_plan(person.selected_plan(), events, scoring, net)
            .map_err(|e| match e {
                SimError::EventPlanMismatch { message, .. } => SimError::EventPlanMismatch {
                    person: person.id.clone(),
                    message,
                },
                other => other,
            })?
            .total
    };
    person.selected_plan_mut().score = Some(total);
    Ok(())
}

pub fn score_population_seq(
    pop: &mut Population,
    events_by_person: &[Vec<&crate::events::Event>],
    stuck: &HashSet<u32>,
    scoring: &ScoringParams,
    net: &Network,
) -> Result<()> {
    pop.persons.iter_mut().enumerate().try_for_each(|(i, p)| {
        score_person(p, i as u32, &events_by_person[i], stuck, scoring, net)
    })
}

#[cfg(feature = "parallel")]
pub fn score_population_par(
    pop: &mut Population,
    events_by_person: &[Vec<&crate::events::Event>],
    stuck: &HashSet<u32>,
    scoring: &ScoringParams,
    net: &Network,
) -> Result<()> {
    use rayon::prelude::*;
    pop.persons
        .par_iter_mut()
        .enumerate()
        .with_min_len(64)
        .try_for_each(|(i, p)| {
            score_person(p, i as u32, &events_by_person[i], stuck, scoring, net)
        })
}

pub fn score_population(
    pop: &mut Population,
    events_by_person: &[Vec<&crate::events::Event>],
    stuck: &HashSet<u32>,
    scoring: &ScoringParams,
    net: &Network,
) -> Result<()> {
    #[cfg(feature = "parallel")]
    {
        score_population_par(pop, events_by_person, stuck, scoring, net)
    }
    #[cfg(not(feature = "parallel"))]
    {
        score_population_seq(pop, events_by_person, stuck, scoring, net)
    }
}

/// Fills every unrouted leg of every memorized plan: car legs get free-flow
/// routes, pt legs an itinerary (or a walking fallback when no service
/// connects the trip), walk/bike legs their crow-fly distance.
pub fn prepare_population(
    net: &Network,
    pop: &mut Population,
    schedule: &TransitSchedule,
    scoring: &ScoringParams,
) -> Result<()> {
    let ttf = TravelTimeField::free_flow(net);
    for person in &mut pop.persons {
        for plan in &mut person.plans {
            for i in 0..plan.num_legs() {
                if plan.leg(i).route.is_some() {
                    continue;
                }
                let origin = plan.activity(i).link;
                let dest = plan.activity(i + 1).link;
                let dep = plan.activity(i).end_time.expect("non-final activity");
                let from = net.link_endpoint(origin);
                let to = net.link_endpoint(dest);
                let route = match plan.leg(i).mode {
                    Mode::Car => Route::Links(
                        route_car(net, &ttf, None, origin, dest, dep, scoring)?.links,
                    ),
                    Mode::Pt => match pt_itinerary(schedule, net, from, to, dep) {
                        Some(conn) => Route::Transit(conn.itinerary),
                        None => Route::Teleport {
                            distance: net.euclidean(from, to),
                        },
                    },
                    Mode::Walk | Mode::Bike => Route::Teleport {
                        distance: net.euclidean(from, to),
                    },
                };
                plan.leg_mut(i).route = Some(route);
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Iteration loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeShares {
    pub car: f64,
    pub pt: f64,
    pub walk: f64,
    pub bike: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    pub iteration: usize,
    pub mean_score: f64,
    pub std_score: f64,
    pub shares: ModeShares,
    pub cordon_entries: u64,
    /// `None` for the first iteration (no delta yet).
    pub convergence_metric: Option<f64>,
}

/// One exported score record: plan score per person per iteration, with the
/// executed (selected) plan flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub iteration: u32,
    pub person: u32,
    pub score: f64,
    pub executed: bool,
}

#[derive(Debug)]
pub struct RunOutput {
    pub stats: Vec<IterationStats>,
    pub final_events: EventStream,
    pub final_stuck: usize,
    pub converged: bool,
    pub score_rows: Vec<ScoreRow>,
}

/// Runs the full co-evolutionary loop: per iteration select/innovate, run
/// the mobility simulation, score executed plans, and measure travel times
/// for the next iteration's router. Innovation is disabled after
/// `floor(iterations * innovation_stop_fraction)`.
#[allow(clippy::too_many_arguments)]
pub fn run_iterations(
    net: &Network,
    pop: &mut Population,
    schedule: &TransitSchedule,
    toll: Option<&TollScheme>,
    scoring: &ScoringParams,
    strategy: &StrategyConfig,
    iterations: usize,
    scale: f64,
    seed: u64,
    stats_cordon: Option<&Cordon>,
) -> Result<RunOutput> {
    scoring.validate()?;
    strategy.validate()?;
    if iterations == 0 {
        return Err(SimError::Config("iterations must be at least 1".to_string()));
    }
    let stage = |iteration: usize, stage: &'static str| {
        move |e: SimError| SimError::Iteration {
            iteration,
            stage,
            source: Box::new(e),
        }
    };

    prepare_population(net, pop, schedule, scoring).map_err(stage(0, "prepare"))?;

    let entry_mask: Option<Vec<bool>> = stats_cordon.map(|c| {
        let mut mask = vec![false; net.links().len()];
        for l in &c.entry_links {
            mask[l.idx()] = true;
        }
        mask
    });

    let innovation_until =
        (iterations as f64 * strategy.innovation_stop_fraction).floor() as usize;
    let mut ttf = TravelTimeField::free_flow(net);
    let mut stats: Vec<IterationStats> = Vec::with_capacity(iterations);
    let mut means: Vec<f64> = Vec::with_capacity(iterations);
    let mut score_rows: Vec<ScoreRow> = Vec::new();
    let mut final_events = EventStream::default();
    let mut final_stuck = 0usize;

    for it in 0..iterations {
        let ctx = ReplanContext {
            net,
            ttf: &ttf,
            toll,
            schedule,
            scoring,
            strategy,
            master_seed: seed,
            iteration: it,
            innovation_on: it < innovation_until,
        };
        replan_population(pop, &ctx).map_err(stage(it, "replanning"))?;

        let (events, report) = mobsim::run(net, pop, schedule, toll, scale, seed)
            .map_err(stage(it, "mobsim"))?;

        let mut events_by_person: Vec<Vec<&crate::events::Event>> = vec![Vec::new(); pop.len()];
        for ev in events.events() {
            events_by_person[ev.person as usize].push(ev);
        }
        let stuck: HashSet<u32> = report.stuck.iter().map(|s| s.person).collect();
        score_population(pop, &events_by_person, &stuck, scoring, net)
            .map_err(stage(it, "scoring"))?;

        for (p_idx, person) in pop.persons.iter().enumerate() {
            for (plan_idx, plan) in person.plans.iter().enumerate() {
                if let Some(score) = plan.score {
                    score_rows.push(ScoreRow {
                        iteration: it as u32,
                        person: p_idx as u32,
                        score,
                        executed: plan_idx == person.selected,
                    });
                }
            }
        }

        let executed: Vec<f64> = pop
            .persons
            .iter()
            .map(|p| p.selected_plan().score.unwrap_or(STUCK_SCORE))
            .collect();
        let mean = executed.iter().sum::<f64>() / executed.len().max(1) as f64;
        let var = executed
            .iter()
            .map(|s| (s - mean).powi(2))
            .sum::<f64>()
            / executed.len().max(1) as f64;
        means.push(mean);

        let mut leg_counts = [0u64; 4];
        let mut total_legs = 0u64;
        for person in &pop.persons {
            for leg in person.selected_plan().legs() {
                total_legs += 1;
                leg_counts[leg.mode as usize] += 1;
            }
        }
        let share = |mode: Mode| {
            if total_legs == 0 {
                0.0
            } else {
                leg_counts[mode as usize] as f64 / total_legs as f64
            }
        };

        let cordon_entries = match &entry_mask {
            None => 0,
            Some(mask) => events
                .events()
                .iter()
                .filter(|e| {
                    e.kind == EventKind::LinkEnter
                        && e.link.is_some_and(|l| mask[l.idx()])
                })
                .count() as u64,
        };

        stats.push(IterationStats {
            iteration: it,
            mean_score: mean,
            std_score: var.sqrt(),
            shares: ModeShares {
                car: share(Mode::Car),
                pt: share(Mode::Pt),
                walk: share(Mode::Walk),
                bike: share(Mode::Bike),
            },
            cordon_entries,
            convergence_metric: convergence_metric(&means),
        });

        ttf = build_travel_time_field(&events, net);
        final_events = events;
        final_stuck = report.stuck.len();
    }

    let converged = stats
        .last()
        .and_then(|s| s.convergence_metric)
        .is_some_and(|m| m < strategy.convergence_threshold);

    Ok(RunOutput {
        stats,
        final_events,
        final_stuck,
        converged,
        score_rows,
    })
}

/// Max relative change of the mean executed score over the last 5
/// iterations: `max |mean_j - mean_{j-1}| / (|mean_j| + 1)`.
fn convergence_metric(means: &[f64]) -> Option<f64> {
    if means.len() < 2 {
        return None;
    }
    let window_start = means.len().saturating_sub(5).max(1);
    let mut metric = 0.0f64;
    for j in window_start..means.len() {
        let delta = (means[j] - means[j - 1]).abs() / (means[j].abs() + 1.0);
        metric = metric.max(delta);
    }
    Some(metric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{act, car_leg, person, NetBuilder};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn logit_uniform_when_scores_equal() {
        let mut r = rng(42);
        let mut counts = [0usize; 2];
        let n = 10_000;
        for _ in 0..n {
            counts[logit_sample(&[3.0, 3.0], 1.0, &mut r)] += 1;
        }
        // 3 sigma of Binomial(10^4, 0.5) is 150
        let half = n / 2;
        assert!((counts[0] as i64 - half as i64).unsigned_abs() < 150);
    }

    #[test]
    fn logit_shift_invariance_is_exact() {
        // max-shift normalization makes shifted utilities bitwise identical
        let mut r1 = rng(7);
        let mut r2 = rng(7);
        let a: Vec<usize> = (0..200)
            .map(|_| logit_sample(&[1.0, 2.5, -0.5], 0.8, &mut r1))
            .collect();
        let b: Vec<usize> = (0..200)
            .map(|_| logit_sample(&[1001.0, 1002.5, 999.5], 0.8, &mut r2))
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn logit_sharpens_to_argmax() {
        let mut r = rng(9);
        let n = 10_000;
        let mut hits = 0;
        for _ in 0..n {
            if logit_sample(&[1.0, 2.0, 0.0], 50.0, &mut r) == 1 {
                hits += 1;
            }
        }
        assert!(hits as f64 / n as f64 > 0.999);
    }

    #[test]
    fn choose_mode_symmetric_within_three_sigma() {
        let mut r = rng(11);
        let options = [(Mode::Car, 1.5), (Mode::Pt, 1.5)];
        let n = 10_000;
        let car = (0..n)
            .filter(|_| choose_mode(&options, 1.0, &mut r) == Mode::Car)
            .count();
        assert!((car as i64 - 5000).unsigned_abs() < 150);
    }

    #[test]
    fn select_single_plan_is_zero() {
        let p = person("p", vec![act("home", 0, None)]);
        assert_eq!(select_plan(&p, 1.0, &mut rng(1), false), 0);
    }

    #[test]
    fn select_best_is_argmax_with_lowest_index_tie() {
        let mut p = person("p", vec![act("home", 0, None)]);
        p.plans = vec![
            Plan { elements: p.plans[0].elements.clone(), score: Some(1.0) },
            Plan { elements: p.plans[0].elements.clone(), score: Some(3.0) },
            Plan { elements: p.plans[0].elements.clone(), score: Some(2.0) },
        ];
        assert_eq!(select_plan(&p, 1.0, &mut rng(1), true), 1);
        p.plans[2].score = Some(3.0);
        assert_eq!(select_plan(&p, 1.0, &mut rng(1), true), 1);
    }

    #[test]
    fn unscored_plans_are_tried_first() {
        let mut p = person("p", vec![act("home", 0, None)]);
        p.plans = vec![
            Plan { elements: p.plans[0].elements.clone(), score: Some(10.0) },
            Plan { elements: p.plans[0].elements.clone(), score: None },
        ];
        for seed in 0..20 {
            assert_eq!(select_plan(&p, 1.0, &mut rng(seed), false), 1);
        }
    }

    #[test]
    fn equal_scores_select_uniformly() {
        let mut p = person("p", vec![act("home", 0, None)]);
        p.plans = vec![
            Plan { elements: p.plans[0].elements.clone(), score: Some(2.0) },
            Plan { elements: p.plans[0].elements.clone(), score: Some(2.0) },
        ];
        let mut r = rng(5);
        let n = 10_000;
        let first = (0..n)
            .filter(|_| select_plan(&p, 1.0, &mut r, false) == 0)
            .count();
        assert!((first as i64 - 5000).unsigned_abs() < 150);
    }

    #[test]
    fn zero_range_mutation_is_identity() {
        let plan = Plan::new(vec![
            act("home", 0, Some(8 * 3600)),
            car_leg(&[1]),
            act("work", 1, None),
        ]);
        let mutated = mutate_departure_time(&plan, 0, &mut rng(3));
        assert_eq!(mutated.activity(0).end_time, Some(8 * 3600));
    }

    #[test]
    fn mutation_stays_within_range_and_order() {
        let plan = Plan::new(vec![
            act("home", 0, Some(8 * 3600)),
            car_leg(&[1]),
            act("work", 1, Some(9 * 3600)),
            car_leg(&[0]),
            act("home", 0, None),
        ]);
        let mut r = rng(17);
        for _ in 0..500 {
            let mutated = mutate_departure_time(&plan, 1800, &mut r);
            let e0 = mutated.activity(0).end_time.unwrap();
            let e1 = mutated.activity(1).end_time.unwrap();
            assert!((8 * 3600 - 1800..=8 * 3600 + 1800).contains(&e0));
            assert!((9 * 3600 - 1800..=9 * 3600 + 1800).contains(&e1));
            assert!(e0 <= e1, "activity order must be preserved");
        }
    }

    #[test]
    fn mutation_clamps_at_next_activity() {
        let plan = Plan::new(vec![
            act("home", 0, Some(1000)),
            car_leg(&[1]),
            act("work", 1, Some(1100)),
            car_leg(&[0]),
            act("home", 0, None),
        ]);
        let mut r = rng(23);
        for _ in 0..500 {
            let mutated = mutate_departure_time(&plan, 100_000, &mut r);
            let e0 = mutated.activity(0).end_time.unwrap() as i64;
            let e1 = mutated.activity(1).end_time.unwrap() as i64;
            assert!(e0 <= e1);
            assert!(e1 <= (HORIZON - 1) as i64);
        }
    }

    #[test]
    fn single_iteration_without_innovation_scores_initial_plans() {
        // N=1 with stop fraction 0.8 -> floor(0.8) = 0 innovating iterations.
        let net = NetBuilder::default()
            .node("X", -1000.0, 0.0)
            .node("A", 0.0, 0.0)
            .node("B", 1000.0, 0.0)
            .link("XA", "X", "A", 1000.0, 3600.0, 10.0)
            .link("AB", "A", "B", 1000.0, 3600.0, 10.0)
            .link("BA", "B", "A", 1000.0, 3600.0, 10.0)
            .link("AX", "A", "X", 1000.0, 3600.0, 10.0)
            .build();
        let mut pop = Population {
            persons: vec![person(
                "p1",
                vec![
                    act("home", 0, Some(8 * 3600)),
                    car_leg(&[1]),
                    act("work", 1, Some(17 * 3600)),
                    car_leg(&[2, 3, 0]),
                    act("home", 0, None),
                ],
            )],
        };
        let schedule = TransitSchedule::default();
        let scoring = ScoringParams::default();
        let strategy = StrategyConfig::default();
        let out = run_iterations(
            &net, &mut pop, &schedule, None, &scoring, &strategy, 1, 1.0, 42, None,
        )
        .unwrap();
        assert_eq!(out.stats.len(), 1);
        assert_eq!(pop.persons[0].plans.len(), 1);
        let executed = pop.persons[0].selected_plan().score.unwrap();
        assert_eq!(out.stats[0].mean_score, executed);
        assert_eq!(out.stats[0].shares.car, 1.0);
        assert!(out.stats[0].convergence_metric.is_none());
    }

    #[test]
    fn identical_seeds_reproduce_stats() {
        let net = NetBuilder::default()
            .node("X", -1000.0, 0.0)
            .node("A", 0.0, 0.0)
            .node("B", 1000.0, 0.0)
            .link("XA", "X", "A", 1000.0, 1800.0, 10.0)
            .link("AB", "A", "B", 1000.0, 1800.0, 10.0)
            .link("BA", "B", "A", 1000.0, 1800.0, 10.0)
            .link("AX", "A", "X", 1000.0, 1800.0, 10.0)
            .build();
        let mk_pop = || Population {
            persons: (0..10)
                .map(|i| {
                    person(
                        &format!("p{i}"),
                        vec![
                            act("home", 0, Some(8 * 3600 + 60 * i)),
                            car_leg(&[1]),
                            act("work", 1, Some(17 * 3600)),
                            car_leg(&[2, 3, 0]),
                            act("home", 0, None),
                        ],
                    )
                })
                .collect(),
        };
        let schedule = TransitSchedule::default();
        let scoring = ScoringParams::default();
        let strategy = StrategyConfig::default();
        let mut pop_a = mk_pop();
        let mut pop_b = mk_pop();
        let a = run_iterations(
            &net, &mut pop_a, &schedule, None, &scoring, &strategy, 5, 1.0, 99, None,
        )
        .unwrap();
        let b = run_iterations(
            &net, &mut pop_b, &schedule, None, &scoring, &strategy, 5, 1.0, 99, None,
        )
        .unwrap();
        assert_eq!(a.stats, b.stats);
        assert_eq!(a.final_events.events(), b.final_events.events());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_replanning_agree() {
        let net = NetBuilder::default()
            .node("X", -1000.0, 0.0)
            .node("A", 0.0, 0.0)
            .node("B", 1000.0, 0.0)
            .link("XA", "X", "A", 1000.0, 1800.0, 10.0)
            .link("AB", "A", "B", 1000.0, 1800.0, 10.0)
            .link("BA", "B", "A", 1000.0, 1800.0, 10.0)
            .link("AX", "A", "X", 1000.0, 1800.0, 10.0)
            .build();
        let mk_pop = || Population {
            persons: (0..50)
                .map(|i| {
                    let mut p = person(
                        &format!("p{i}"),
                        vec![
                            act("home", 0, Some(7 * 3600 + 120 * i)),
                            car_leg(&[1]),
                            act("work", 1, Some(16 * 3600 + 60 * i)),
                            car_leg(&[2, 3, 0]),
                            act("home", 0, None),
                        ],
                    );
                    p.plans[0].score = Some(i as f64);
                    p
                })
                .collect(),
        };
        let scoring = ScoringParams::default();
        let strategy = StrategyConfig::default();
        let ttf = TravelTimeField::free_flow(&net);
        let schedule = TransitSchedule::default();
        let ctx = ReplanContext {
            net: &net,
            ttf: &ttf,
            toll: None,
            schedule: &schedule,
            scoring: &scoring,
            strategy: &strategy,
            master_seed: 31,
            iteration: 4,
            innovation_on: true,
        };
        let mut seq_pop = mk_pop();
        let mut par_pop = mk_pop();
        replan_population_seq(&mut seq_pop, &ctx).unwrap();
        replan_population_par(&mut par_pop, &ctx).unwrap();
        for (a, b) in seq_pop.persons.iter().zip(&par_pop.persons) {
            assert_eq!(a.selected, b.selected);
            assert_eq!(a.plans, b.plans);
        }
    }
}
