//! The canonical event stream: a time-ordered record of everything that
//! happened during one mobility simulation. It is the single source of
//! truth for scoring and analysis and is persisted as CSV with columns
//! `time,kind,person,link,mode,amount`.
//!
//! For `board`/`alight` events the link column carries the transit line id.

use std::path::Path;

use crate::error::{Result, SimError};
use crate::network::{LinkIdx, Network};
use crate::population::Population;
use crate::transit::TransitSchedule;
use crate::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    ActEnd,
    Depart,
    LinkEnter,
    LinkLeave,
    Arrive,
    ActStart,
    Board,
    Alight,
    Money,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::ActEnd => "act_end",
            EventKind::Depart => "depart",
            EventKind::LinkEnter => "link_enter",
            EventKind::LinkLeave => "link_leave",
            EventKind::Arrive => "arrive",
            EventKind::ActStart => "act_start",
            EventKind::Board => "board",
            EventKind::Alight => "alight",
            EventKind::Money => "money",
        }
    }

    pub fn parse(s: &str) -> Option<EventKind> {
        Some(match s {
            "act_end" => EventKind::ActEnd,
            "depart" => EventKind::Depart,
            "link_enter" => EventKind::LinkEnter,
            "link_leave" => EventKind::LinkLeave,
            "arrive" => EventKind::Arrive,
            "act_start" => EventKind::ActStart,
            "board" => EventKind::Board,
            "alight" => EventKind::Alight,
            "money" => EventKind::Money,
            _ => return None,
        })
    }
}

/// One simulation event, referencing persons/links/lines by index.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: u32,
    pub kind: EventKind,
    /// Index into the population.
    pub person: u32,
    pub link: Option<LinkIdx>,
    /// Index into the transit schedule; set for board/alight.
    pub line: Option<u32>,
    pub mode: Option<Mode>,
    /// Dollars; negative for charges. Only money events carry an amount.
    pub amount: Option<f64>,
}

/// Append-only, time-ordered event sequence produced by one mobsim run.
#[derive(Debug, Clone, Default)]
pub struct EventStream {
    events: Vec<Event>,
}

impl EventStream {
    pub fn push(&mut self, event: Event) {
        debug_assert!(
            self.events.last().is_none_or(|e| e.time <= event.time),
            "event stream must be time-ordered"
        );
        self.events.push(event);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events of one person, in stream order.
    pub fn for_person(&self, person: u32) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.person == person)
    }

    pub fn write_csv(
        &self,
        net: &Network,
        pop: &Population,
        schedule: &TransitSchedule,
        path: impl AsRef<Path>,
    ) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(["time", "kind", "person", "link", "mode", "amount"])
            .map_err(|e| csv_io(path, e))?;
        for ev in &self.events {
            let link = match (ev.kind, ev.link, ev.line) {
                (EventKind::Board | EventKind::Alight, _, Some(line)) => {
                    schedule.lines[line as usize].id.clone()
                }
                (_, Some(l), _) => net.link(l).id.clone(),
                _ => String::new(),
            };
            w.write_record([
                ev.time.to_string(),
                ev.kind.as_str().to_string(),
                pop.persons[ev.person as usize].id.clone(),
                link,
                ev.mode.map(|m| m.to_string()).unwrap_or_default(),
                ev.amount.map(|a| a.to_string()).unwrap_or_default(),
            ])
            .map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| SimError::io(path, e))
    }
}

fn csv_io(path: &Path, e: csv::Error) -> SimError {
    SimError::io(path, std::io::Error::other(e))
}

/// An event as read back from a persisted CSV; ids stay external strings.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEvent {
    pub time: u32,
    pub kind: EventKind,
    pub person: String,
    /// Link id, or transit line id for board/alight, or empty.
    pub link: String,
    pub mode: String,
    pub amount: Option<f64>,
}

pub fn read_events_csv(path: impl AsRef<Path>) -> Result<Vec<RawEvent>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    {
        let headers = reader.headers().map_err(|e| csv_io(path, e))?;
        let expected = ["time", "kind", "person", "link", "mode", "amount"];
        if headers.iter().ne(expected) {
            return Err(SimError::Config(format!(
                "{}: unexpected event CSV header {:?}",
                path.display(),
                headers
            )));
        }
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_io(path, e))?;
        let field = |j: usize| record.get(j).unwrap_or("");
        let bad = |message: String| SimError::Config(format!(
            "{}: record {}: {message}",
            path.display(),
            i + 1
        ));
        let time: u32 = field(0)
            .parse()
            .map_err(|_| bad(format!("bad time {:?}", field(0))))?;
        let kind = EventKind::parse(field(1))
            .ok_or_else(|| bad(format!("unknown event kind {:?}", field(1))))?;
        let amount = if field(5).is_empty() {
            None
        } else {
            Some(
                field(5)
                    .parse()
                    .map_err(|_| bad(format!("bad amount {:?}", field(5))))?,
            )
        };
        out.push(RawEvent {
            time,
            kind,
            person: field(2).to_string(),
            link: field(3).to_string(),
            mode: field(4).to_string(),
            amount,
        });
    }
    Ok(out)
}
