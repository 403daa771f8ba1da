//! Per-link, per-time-bin experienced travel times measured from the last
//! iteration's events. The router reads these to anticipate congestion.

use std::collections::HashMap;

use crate::events::{EventKind, EventStream};
use crate::network::{LinkIdx, Network};
use crate::HORIZON;

/// Width of one aggregation bin, seconds.
pub const TTF_BIN: u32 = 900;

#[derive(Debug, Clone)]
pub struct TravelTimeField {
    /// links x bins, flattened; NaN marks an empty bin.
    bins: Vec<f64>,
    n_bins: usize,
    /// Fallback per link: free-flow time on the 1 s grid.
    free_flow: Vec<f64>,
}

impl TravelTimeField {
    /// All bins empty: every lookup returns the link's free-flow time.
    pub fn free_flow(net: &Network) -> Self {
        let n_bins = (HORIZON / TTF_BIN) as usize;
        TravelTimeField {
            bins: vec![f64::NAN; net.links().len() * n_bins],
            n_bins,
            free_flow: net
                .links()
                .iter()
                .map(|l| l.free_flow_steps() as f64)
                .collect(),
        }
    }

    /// Bin value = mean of (link_leave - link_enter) over vehicles entering
    /// the link in that bin; empty bins fall back to free-flow.
    pub fn from_events(events: &EventStream, net: &Network) -> Self {
        let mut field = TravelTimeField::free_flow(net);
        let n_bins = field.n_bins;
        let mut sums = vec![0.0f64; field.bins.len()];
        let mut counts = vec![0u32; field.bins.len()];
        // A person is on at most one link at a time.
        let mut on_link: HashMap<u32, (LinkIdx, u32)> = HashMap::new();
        for ev in events.events() {
            match ev.kind {
                EventKind::LinkEnter => {
                    on_link.insert(ev.person, (ev.link.unwrap(), ev.time));
                }
                EventKind::LinkLeave => {
                    if let Some((link, entered)) = on_link.remove(&ev.person) {
                        debug_assert_eq!(Some(link), ev.link);
                        let bin = ((entered / TTF_BIN) as usize).min(n_bins - 1);
                        let slot = link.idx() * n_bins + bin;
                        sums[slot] += (ev.time - entered) as f64;
                        counts[slot] += 1;
                    }
                }
                _ => {}
            }
        }
        for (slot, &count) in counts.iter().enumerate() {
            if count > 0 {
                field.bins[slot] = sums[slot] / count as f64;
            }
        }
        field
    }

    /// Experienced travel time for entering `link` at `t`, seconds.
    /// Piecewise constant per bin; times beyond the horizon clamp to the
    /// last bin.
    pub fn travel_time(&self, link: LinkIdx, t: f64) -> f64 {
        let bin = ((t.max(0.0) as u32 / TTF_BIN) as usize).min(self.n_bins - 1);
        let v = self.bins[link.idx() * self.n_bins + bin];
        if v.is_nan() {
            self.free_flow[link.idx()]
        } else {
            v
        }
    }

    /// Overrides one bin; used by tests to build synthetic fields.
    pub fn set_bin(&mut self, link: LinkIdx, bin: usize, value: f64) {
        let n = self.n_bins;
        self.bins[link.idx() * n + bin] = value;
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }
}

/// Builds the field the router uses in the next iteration.
pub fn build_travel_time_field(events: &EventStream, net: &Network) -> TravelTimeField {
    TravelTimeField::from_events(events, net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::Event;
    use crate::testutil::NetBuilder;

    fn enter(person: u32, link: u32, time: u32) -> Event {
        Event {
            time,
            kind: EventKind::LinkEnter,
            person,
            link: Some(LinkIdx(link)),
            line: None,
            mode: None,
            amount: None,
        }
    }

    fn leave(person: u32, link: u32, time: u32) -> Event {
        Event {
            time,
            kind: EventKind::LinkLeave,
            person,
            link: Some(LinkIdx(link)),
            line: None,
            mode: None,
            amount: None,
        }
    }

    fn net() -> Network {
        NetBuilder::default()
            .node("A", 0.0, 0.0)
            .node("B", 1000.0, 0.0)
            .link("AB", "A", "B", 1000.0, 1000.0, 10.0)
            .build()
    }

    #[test]
    fn empty_stream_gives_free_flow_everywhere() {
        let net = net();
        let field = build_travel_time_field(&EventStream::default(), &net);
        assert_eq!(field.travel_time(LinkIdx(0), 0.0), 100.0);
        assert_eq!(field.travel_time(LinkIdx(0), 1e9), 100.0);
    }

    #[test]
    fn single_observation_sets_its_bin() {
        let net = net();
        let mut stream = EventStream::default();
        // enters at 08:00, traverses in 250 s (congested)
        stream.push(enter(0, 0, 28800));
        stream.push(leave(0, 0, 29050));
        let field = build_travel_time_field(&stream, &net);
        // 28800 / 900 = bin 32, covering [28800, 29700)
        assert_eq!(field.travel_time(LinkIdx(0), 28800.0), 250.0);
        assert_eq!(field.travel_time(LinkIdx(0), 29699.0), 250.0);
        // neighboring bins stay free-flow
        assert_eq!(field.travel_time(LinkIdx(0), 29700.0), 100.0);
        assert_eq!(field.travel_time(LinkIdx(0), 28799.0), 100.0);
    }

    #[test]
    fn two_observations_average() {
        let net = net();
        let mut stream = EventStream::default();
        stream.push(enter(0, 0, 28800));
        stream.push(enter(1, 0, 28850));
        stream.push(leave(0, 0, 28900)); // 100 s
        stream.push(leave(1, 0, 29050)); // 200 s
        let field = build_travel_time_field(&stream, &net);
        assert_eq!(field.travel_time(LinkIdx(0), 28800.0), 150.0);
    }
}
