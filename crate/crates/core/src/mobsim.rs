//! Deterministic queue-based network loading. Executes every person's
//! selected plan simultaneously on a fixed 1 s grid over a 30 h horizon and
//! emits the canonical event stream.
//!
//! Each link is a FIFO queue with three constraints:
//! - free-flow delay: a vehicle may leave no earlier than entry + free-flow
//!   time (rounded up to the grid, at least 1 s),
//! - outflow capacity: an outflow-credit accumulator gains
//!   `capacity/3600 * scale` per second, capped at a one-vehicle burst
//!   bound; any exit (transfer or arrival) consumes one credit,
//! - storage: a vehicle may only transfer onto a link with a free slot;
//!   full links spill back.
//!
//! Links are processed in stable index order each step and vehicles FIFO
//! within a link, so identical inputs produce identical event streams.
//! walk/bike legs are teleported at fixed speeds and consume no road
//! capacity; pt legs follow the transit schedule.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::error::{Result, SimError};
use crate::events::{Event, EventKind, EventStream};
use crate::network::{Link, LinkIdx, Network};
use crate::population::{Plan, Population, PtItinerary, Route};
use crate::tolling::{TollCharger, TollScheme};
use crate::transit::TransitSchedule;
use crate::{Mode, BIKE_SPEED, HORIZON, WALK_SPEED};

/// Effective length one queued vehicle occupies, meters.
pub const EFFECTIVE_VEHICLE_LENGTH: f64 = 7.5;

/// Vehicles a link can hold at once: `max(1, floor(length*lanes/7.5) * scale)`.
pub fn storage_capacity(link: &Link, scale: f64) -> f64 {
    ((link.length * link.lanes as f64 / EFFECTIVE_VEHICLE_LENGTH).floor() * scale).max(1.0)
}

/// A traveler that did not complete its leg within the horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StuckTraveler {
    pub person: u32,
    pub leg: usize,
    /// Link the vehicle was on (or waiting to enter); `None` for teleport
    /// or pt legs still in flight at the horizon.
    pub link: Option<LinkIdx>,
}

#[derive(Debug, Clone, Default)]
pub struct MobsimReport {
    pub stuck: Vec<StuckTraveler>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TaskKind {
    EndActivity,
    TeleportArrive,
    PtBoard,
    PtAlight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Task {
    time: u32,
    seq: u64,
    person: u32,
    kind: TaskKind,
}

impl Ord for Task {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse for earliest-first.
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

impl PartialOrd for Task {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct QEntry {
    veh: u32,
    earliest_exit: u32,
}

struct LinkState {
    queue: VecDeque<QEntry>,
    /// Departing vehicles waiting for a storage slot on this link.
    entering: VecDeque<u32>,
    credit: f64,
    last_update: u32,
    cap_per_step: f64,
    burst: f64,
    storage_cap: f64,
    occupancy: u32,
    fft: u32,
}

impl LinkState {
    fn new(link: &Link, scale: f64) -> Self {
        let cap_per_step = link.capacity / 3600.0 * scale;
        LinkState {
            queue: VecDeque::new(),
            entering: VecDeque::new(),
            credit: cap_per_step.max(1.0),
            last_update: 0,
            cap_per_step,
            burst: cap_per_step.max(1.0),
            storage_cap: storage_capacity(link, scale),
            occupancy: 0,
            fft: link.free_flow_steps(),
        }
    }

    fn accrue(&mut self, t: u32) {
        if t > self.last_update {
            let dt = (t - self.last_update) as f64;
            self.credit = (self.credit + self.cap_per_step * dt).min(self.burst);
            self.last_update = t;
        }
    }

    fn has_storage(&self) -> bool {
        (self.occupancy + 1) as f64 <= self.storage_cap + 1e-9
    }

    fn is_idle(&self) -> bool {
        self.queue.is_empty() && self.entering.is_empty()
    }
}

struct Vehicle {
    person: u32,
    leg: usize,
    route: Vec<LinkIdx>,
    pos: usize,
}

struct Engine<'a> {
    net: &'a Network,
    pop: &'a Population,
    schedule: &'a TransitSchedule,
    charger: Option<TollCharger<'a>>,
    links: Vec<LinkState>,
    vehicles: Vec<Vehicle>,
    active: std::collections::BTreeSet<u32>,
    tasks: BinaryHeap<Task>,
    task_seq: u64,
    /// Index of the next leg each person will execute.
    next_leg: Vec<usize>,
    events: EventStream,
    stuck: Vec<StuckTraveler>,
}

/// Executes all selected plans. `toll = None` and a scheme whose rates are
/// all zero produce identical event streams. The `_seed` parameter is
/// reserved; the queue model itself is deterministic.
pub fn run(
    net: &Network,
    pop: &Population,
    schedule: &TransitSchedule,
    toll: Option<&TollScheme>,
    scale: f64,
    _seed: u64,
) -> Result<(EventStream, MobsimReport)> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(SimError::Config(format!(
            "flow scaling factor must be in (0, 1], got {scale}"
        )));
    }
    check_routed(pop)?;

    let mut engine = Engine {
        net,
        pop,
        schedule,
        charger: toll.map(|scheme| TollCharger::new(scheme, net, pop.len())),
        links: net.links().iter().map(|l| LinkState::new(l, scale)).collect(),
        vehicles: Vec::new(),
        active: Default::default(),
        tasks: BinaryHeap::new(),
        task_seq: 0,
        next_leg: vec![0; pop.len()],
        events: EventStream::default(),
        stuck: Vec::new(),
    };
    engine.schedule_initial_tasks();
    engine.run_loop();
    engine.flush_stuck();

    let report = MobsimReport {
        stuck: engine.stuck,
    };
    Ok((engine.events, report))
}

fn check_routed(pop: &Population) -> Result<()> {
    for person in &pop.persons {
        let plan = person.selected_plan();
        for i in 0..plan.num_legs() {
            let leg = plan.leg(i);
            let ok = match (&leg.route, leg.mode) {
                (Some(Route::Links(_)), Mode::Car) => true,
                (Some(Route::Transit(_)), Mode::Pt) => true,
                // pt trips without service fall back to a walking teleport
                (Some(Route::Teleport { .. }), Mode::Pt | Mode::Walk | Mode::Bike) => true,
                _ => false,
            };
            if !ok {
                return Err(SimError::UnroutedLeg {
                    person: person.id.clone(),
                    leg: i,
                });
            }
        }
    }
    Ok(())
}

impl<'a> Engine<'a> {
    fn plan(&self, person: u32) -> &'a Plan {
        self.pop.persons[person as usize].selected_plan()
    }

    fn emit(&mut self, event: Event) {
        self.events.push(event);
    }

    fn push_task(&mut self, time: u32, person: u32, kind: TaskKind) {
        let seq = self.task_seq;
        self.task_seq += 1;
        self.tasks.push(Task {
            time,
            seq,
            person,
            kind,
        });
    }

    fn schedule_initial_tasks(&mut self) {
        for (idx, person) in self.pop.persons.iter().enumerate() {
            let plan = person.selected_plan();
            if plan.num_legs() == 0 {
                continue;
            }
            let end = plan
                .activity(0)
                .end_time
                .expect("non-final activity has an end time");
            self.push_task(end, idx as u32, TaskKind::EndActivity);
        }
    }

    fn run_loop(&mut self) {
        let Some(first) = self.tasks.peek().map(|task| task.time) else {
            return;
        };
        let mut t = first;
        while t <= HORIZON {
            while let Some(task) = self.tasks.peek() {
                if task.time > t {
                    break;
                }
                let task = self.tasks.pop().unwrap();
                debug_assert_eq!(task.time, t, "tasks may not be scheduled in the past");
                self.handle_task(task, t);
            }

            let snapshot: Vec<u32> = self.active.iter().copied().collect();
            for li in snapshot {
                self.process_link(li as usize, t);
            }

            if self.active.is_empty() {
                match self.tasks.peek() {
                    Some(task) => t = task.time,
                    None => break,
                }
            } else {
                t += 1;
            }
        }
    }

    fn handle_task(&mut self, task: Task, t: u32) {
        match task.kind {
            TaskKind::EndActivity => self.end_activity(task.person, t),
            TaskKind::TeleportArrive => self.finish_leg(task.person, t),
            TaskKind::PtBoard => self.pt_board(task.person, t),
            TaskKind::PtAlight => self.pt_alight(task.person, t),
        }
    }

    fn end_activity(&mut self, person: u32, t: u32) {
        let plan = self.plan(person);
        let leg_idx = self.next_leg[person as usize];
        let act = plan.activity(leg_idx);
        let leg = plan.leg(leg_idx);
        self.emit(Event {
            time: t,
            kind: EventKind::ActEnd,
            person,
            link: Some(act.link),
            line: None,
            mode: None,
            amount: None,
        });
        self.emit(Event {
            time: t,
            kind: EventKind::Depart,
            person,
            link: Some(act.link),
            line: None,
            mode: Some(leg.mode),
            amount: None,
        });
        match (&leg.route, leg.mode) {
            (Some(Route::Links(route)), Mode::Car) => {
                if route.is_empty() {
                    self.finish_leg(person, t);
                } else {
                    let route = route.clone();
                    let first = route[0];
                    let veh = self.vehicles.len() as u32;
                    self.vehicles.push(Vehicle {
                        person,
                        leg: leg_idx,
                        route,
                        pos: 0,
                    });
                    let state = &self.links[first.idx()];
                    if state.entering.is_empty() && state.has_storage() {
                        self.enter_link(veh, first, t);
                    } else {
                        self.links[first.idx()].entering.push_back(veh);
                        self.active.insert(first.0);
                    }
                }
            }
            (Some(Route::Teleport { distance }), mode) => {
                let speed = if mode == Mode::Bike { BIKE_SPEED } else { WALK_SPEED };
                let duration = (distance / speed).ceil() as u32;
                if duration == 0 {
                    self.finish_leg(person, t);
                } else {
                    self.push_task(t + duration, person, TaskKind::TeleportArrive);
                }
            }
            (Some(Route::Transit(itinerary)), Mode::Pt) => {
                let ready = t + itinerary.access_walk;
                match self.board_time(itinerary, ready) {
                    Some(board) => self.push_task(board, person, TaskKind::PtBoard),
                    None => {
                        // Service has ended; fall back to walking the trip.
                        let from = self.net.link_endpoint(act.link);
                        let to = self.net.link_endpoint(plan.activity(leg_idx + 1).link);
                        let dist = self.net.euclidean(from, to);
                        let duration = (dist / WALK_SPEED).ceil() as u32;
                        if duration == 0 {
                            self.finish_leg(person, t);
                        } else {
                            self.push_task(t + duration, person, TaskKind::TeleportArrive);
                        }
                    }
                }
            }
            _ => unreachable!("checked by check_routed"),
        }
    }

    fn line_index(&self, id: &str) -> u32 {
        self.schedule
            .lines
            .iter()
            .position(|l| l.id == id)
            .expect("itineraries are resolved against the loaded schedule") as u32
    }

    fn board_time(&self, itinerary: &PtItinerary, ready: u32) -> Option<u32> {
        let line = self.schedule.line(&itinerary.line)?;
        line.next_departure(itinerary.board_stop, ready)
    }

    fn itinerary(&self, person: u32) -> &'a PtItinerary {
        let plan = self.plan(person);
        let leg = plan.leg(self.next_leg[person as usize]);
        match &leg.route {
            Some(Route::Transit(it)) => it,
            _ => unreachable!("pt tasks only exist for transit legs"),
        }
    }

    fn pt_board(&mut self, person: u32, t: u32) {
        let itinerary = self.itinerary(person);
        let line_idx = self.line_index(&itinerary.line);
        let line = &self.schedule.lines[line_idx as usize];
        let in_vehicle =
            line.stop_offset(itinerary.alight_stop) - line.stop_offset(itinerary.board_stop);
        self.emit(Event {
            time: t,
            kind: EventKind::Board,
            person,
            link: None,
            line: Some(line_idx),
            mode: None,
            amount: None,
        });
        self.push_task(t + in_vehicle, person, TaskKind::PtAlight);
    }

    fn pt_alight(&mut self, person: u32, t: u32) {
        let itinerary = self.itinerary(person);
        let line_idx = self.line_index(&itinerary.line);
        let egress = itinerary.egress_walk;
        self.emit(Event {
            time: t,
            kind: EventKind::Alight,
            person,
            link: None,
            line: Some(line_idx),
            mode: None,
            amount: None,
        });
        if egress == 0 {
            self.finish_leg(person, t);
        } else {
            self.push_task(t + egress, person, TaskKind::TeleportArrive);
        }
    }

    fn finish_leg(&mut self, person: u32, t: u32) {
        let plan = self.plan(person);
        let finished = self.next_leg[person as usize];
        self.next_leg[person as usize] += 1;
        let act = plan.activity(finished + 1);
        self.emit(Event {
            time: t,
            kind: EventKind::Arrive,
            person,
            link: Some(act.link),
            line: None,
            mode: Some(plan.leg(finished).mode),
            amount: None,
        });
        self.emit(Event {
            time: t,
            kind: EventKind::ActStart,
            person,
            link: Some(act.link),
            line: None,
            mode: None,
            amount: None,
        });
        if self.next_leg[person as usize] < plan.num_legs() {
            let end = act.end_time.expect("non-final activity has an end time");
            self.push_task(end.max(t + 1), person, TaskKind::EndActivity);
        }
    }

    fn enter_link(&mut self, veh: u32, link: LinkIdx, t: u32) {
        let person = self.vehicles[veh as usize].person;
        let state = &mut self.links[link.idx()];
        state.occupancy += 1;
        let exit = t + state.fft;
        state.queue.push_back(QEntry {
            veh,
            earliest_exit: exit,
        });
        self.active.insert(link.0);
        self.emit(Event {
            time: t,
            kind: EventKind::LinkEnter,
            person,
            link: Some(link),
            line: None,
            mode: None,
            amount: None,
        });
        if let Some(charger) = &mut self.charger {
            let exempt = self.pop.persons[person as usize].toll_exempt;
            if let Some(rate) = charger.on_link_enter(person, exempt, Mode::Car, link, t) {
                self.events.push(Event {
                    time: t,
                    kind: EventKind::Money,
                    person,
                    link: Some(link),
                    line: None,
                    mode: None,
                    amount: Some(-rate),
                });
            }
        }
    }

    fn process_link(&mut self, li: usize, t: u32) {
        self.links[li].accrue(t);

        while let Some(front) = self.links[li].queue.front() {
            if front.earliest_exit > t || self.links[li].credit < 1.0 {
                break;
            }
            let veh_id = front.veh;
            let (person, pos, route_len) = {
                let v = &self.vehicles[veh_id as usize];
                (v.person, v.pos, v.route.len())
            };
            let arriving = pos + 1 == route_len;
            if !arriving {
                let next = self.vehicles[veh_id as usize].route[pos + 1];
                if !self.links[next.idx()].has_storage() {
                    break; // spillback
                }
                self.pop_front(li, t, person);
                self.vehicles[veh_id as usize].pos += 1;
                self.enter_link(veh_id, next, t);
            } else {
                self.pop_front(li, t, person);
                self.finish_leg(person, t);
            }
        }

        while let Some(&veh_id) = self.links[li].entering.front() {
            if !self.links[li].has_storage() {
                break;
            }
            self.links[li].entering.pop_front();
            self.enter_link(veh_id, LinkIdx(li as u32), t);
        }

        if self.links[li].is_idle() {
            self.active.remove(&(li as u32));
        }
    }

    fn pop_front(&mut self, li: usize, t: u32, person: u32) {
        let state = &mut self.links[li];
        state.queue.pop_front();
        state.credit -= 1.0;
        state.occupancy -= 1;
        self.emit(Event {
            time: t,
            kind: EventKind::LinkLeave,
            person,
            link: Some(LinkIdx(li as u32)),
            line: None,
            mode: None,
            amount: None,
        });
    }

    fn flush_stuck(&mut self) {
        for (li, state) in self.links.iter().enumerate() {
            for entry in &state.queue {
                let veh = &self.vehicles[entry.veh as usize];
                self.stuck.push(StuckTraveler {
                    person: veh.person,
                    leg: veh.leg,
                    link: Some(LinkIdx(li as u32)),
                });
            }
            for &veh_id in &state.entering {
                let veh = &self.vehicles[veh_id as usize];
                self.stuck.push(StuckTraveler {
                    person: veh.person,
                    leg: veh.leg,
                    link: Some(LinkIdx(li as u32)),
                });
            }
        }
        // Teleport or pt travelers still in flight past the horizon.
        for task in self.tasks.drain() {
            if matches!(
                task.kind,
                TaskKind::TeleportArrive | TaskKind::PtBoard | TaskKind::PtAlight
            ) {
                self.stuck.push(StuckTraveler {
                    person: task.person,
                    leg: self.next_leg[task.person as usize],
                    link: None,
                });
            }
        }
        self.stuck.sort_by_key(|s| (s.person, s.leg));
    }
}
