//! Reproduces the evaluation artifacts from persisted run outputs: hourly
//! link-flow profiles, pt ridership profiles, the mode-share change table,
//! trip-score statistics, cordon metrics and a GeoJSON map export. Every
//! output is a pure function of the files on disk, so re-running analysis
//! is bit-identical.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use crate::error::{Result, SimError};
use crate::events::{EventKind, RawEvent};
use crate::network::{Cordon, Network};
use crate::population::{Population, Route};
use crate::Mode;

/// Hour bins cover the 30 h horizon; hours >= 24 keep their own label
/// (24, 25, ...) instead of wrapping.
pub const HOUR_BINS: usize = 30;

fn hour_of(t: u32) -> usize {
    ((t / 3600) as usize).min(HOUR_BINS - 1)
}

// ---------------------------------------------------------------------------
// Link volumes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LinkVolumeTable {
    /// Paired car traversals per link per hour (binned by entry time),
    /// keyed by external link id; every network link has an entry.
    pub volumes: BTreeMap<String, Vec<u64>>,
    /// Mean experienced travel time / free-flow time, per link per hour.
    pub congestion: BTreeMap<String, Vec<Option<f64>>>,
    /// Unpaired enter events (vehicles still on the link at the horizon).
    pub diagnostics: Vec<String>,
}

pub fn link_volumes(events: &[RawEvent], net: &Network) -> LinkVolumeTable {
    let mut volumes: BTreeMap<String, Vec<u64>> = net
        .links()
        .iter()
        .map(|l| (l.id.clone(), vec![0u64; HOUR_BINS]))
        .collect();
    let mut time_sums: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut open: HashMap<(&str, &str), u32> = HashMap::new();

    for ev in events {
        match ev.kind {
            EventKind::LinkEnter => {
                open.insert((ev.person.as_str(), ev.link.as_str()), ev.time);
            }
            EventKind::LinkLeave => {
                if let Some(entered) = open.remove(&(ev.person.as_str(), ev.link.as_str())) {
                    let hour = hour_of(entered);
                    if let Some(v) = volumes.get_mut(ev.link.as_str()) {
                        v[hour] += 1;
                    }
                    time_sums
                        .entry(ev.link.as_str())
                        .or_insert_with(|| vec![0.0; HOUR_BINS])[hour] +=
                        (ev.time - entered) as f64;
                }
            }
            _ => {}
        }
    }

    let mut diagnostics: Vec<String> = open
        .keys()
        .map(|(person, link)| format!("unpaired link_enter: person {person} on link {link}"))
        .collect();
    diagnostics.sort();

    let mut congestion = BTreeMap::new();
    for link in net.links() {
        let fft = link.free_flow_time();
        let vols = &volumes[&link.id];
        let sums = time_sums.get(link.id.as_str());
        let row: Vec<Option<f64>> = (0..HOUR_BINS)
            .map(|h| {
                if vols[h] == 0 {
                    None
                } else {
                    let mean = sums.map(|s| s[h]).unwrap_or(0.0) / vols[h] as f64;
                    Some(mean / fft)
                }
            })
            .collect();
        congestion.insert(link.id.clone(), row);
    }

    LinkVolumeTable {
        volumes,
        congestion,
        diagnostics,
    }
}

pub fn write_link_volumes_csv(table: &LinkVolumeTable, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("link,hour,volume,congestion_index\n");
    for (link, vols) in &table.volumes {
        let congestion = &table.congestion[link];
        for h in 0..HOUR_BINS {
            let ci = congestion[h]
                .map(|c| format!("{c}"))
                .unwrap_or_default();
            out.push_str(&format!("{link},{h},{},{ci}\n", vols[h]));
        }
    }
    std::fs::write(path.as_ref(), out).map_err(|e| SimError::io(path.as_ref(), e))
}

// ---------------------------------------------------------------------------
// Transit ridership
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct PtRidership {
    /// Board events per hour.
    pub boardings: Vec<u64>,
    /// Passengers in vehicles at the end of each hour (cumulative boards
    /// minus alights).
    pub occupancy: Vec<i64>,
    pub diagnostics: Vec<String>,
}

pub fn pt_ridership(events: &[RawEvent]) -> PtRidership {
    let mut boardings = vec![0u64; HOUR_BINS];
    let mut boards_cum = vec![0i64; HOUR_BINS];
    let mut alights_cum = vec![0i64; HOUR_BINS];
    let mut onboard: HashMap<&str, u32> = HashMap::new();
    let mut diagnostics = Vec::new();
    for ev in events {
        match ev.kind {
            EventKind::Board => {
                boardings[hour_of(ev.time)] += 1;
                boards_cum[hour_of(ev.time)] += 1;
                if onboard.insert(ev.person.as_str(), ev.time).is_some() {
                    diagnostics.push(format!("person {} boarded twice", ev.person));
                }
            }
            EventKind::Alight => {
                alights_cum[hour_of(ev.time)] += 1;
                if onboard.remove(ev.person.as_str()).is_none() {
                    diagnostics.push(format!("person {} alighted without boarding", ev.person));
                }
            }
            _ => {}
        }
    }
    let mut still: Vec<_> = onboard.keys().collect();
    still.sort();
    for person in still {
        diagnostics.push(format!("person {person} still on board at horizon"));
    }
    let mut occupancy = vec![0i64; HOUR_BINS];
    let mut acc = 0i64;
    for h in 0..HOUR_BINS {
        acc += boards_cum[h] - alights_cum[h];
        occupancy[h] = acc;
    }
    PtRidership {
        boardings,
        occupancy,
        diagnostics,
    }
}

pub fn write_pt_ridership_csv(r: &PtRidership, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("hour,boardings,occupancy\n");
    for h in 0..HOUR_BINS {
        out.push_str(&format!("{h},{},{}\n", r.boardings[h], r.occupancy[h]));
    }
    std::fs::write(path.as_ref(), out).map_err(|e| SimError::io(path.as_ref(), e))
}

// ---------------------------------------------------------------------------
// Mode shares
// ---------------------------------------------------------------------------

/// Leg categories reported by the mode-share table. pt trips contribute an
/// access and an egress walk; pt trips that fell back to walking (no
/// service) count as transit walks.
pub const MODE_CATEGORIES: [&str; 7] = [
    "Car",
    "Pt",
    "Walk",
    "Bike",
    "Access walk",
    "Egress walk",
    "Transit walk",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ModeShareTable {
    /// Counts per category for the run without pricing.
    pub without: Vec<u64>,
    /// Counts per category for the run with pricing.
    pub with: Vec<u64>,
    /// (with - without) / without * 100; `None` when without is zero.
    pub change_pct: Vec<Option<f64>>,
}

fn count_leg_categories(pop: &Population) -> Vec<u64> {
    let mut counts = vec![0u64; MODE_CATEGORIES.len()];
    for person in &pop.persons {
        for leg in person.selected_plan().legs() {
            match (leg.mode, &leg.route) {
                (Mode::Car, _) => counts[0] += 1,
                (Mode::Pt, Some(Route::Transit(_))) => {
                    counts[1] += 1; // Pt
                    counts[4] += 1; // Access walk
                    counts[5] += 1; // Egress walk
                }
                (Mode::Pt, _) => counts[6] += 1, // Transit walk (no service)
                (Mode::Walk, _) => counts[2] += 1,
                (Mode::Bike, _) => counts[3] += 1,
            }
        }
    }
    counts
}

/// Trip counts per leg category for a policy population against its
/// baseline, with the paper's sign convention: negative means the policy
/// run has fewer trips in that category.
pub fn mode_share(policy: &Population, baseline: &Population) -> Result<ModeShareTable> {
    fn ids(p: &Population) -> HashSet<&str> {
        p.persons.iter().map(|p| p.id.as_str()).collect()
    }
    if ids(policy) != ids(baseline) {
        return Err(SimError::CompareMismatch(
            "populations contain different persons".to_string(),
        ));
    }
    let without = count_leg_categories(baseline);
    let with = count_leg_categories(policy);
    let change_pct = without
        .iter()
        .zip(&with)
        .map(|(&b, &w)| {
            if b == 0 {
                None
            } else {
                Some((w as f64 - b as f64) / b as f64 * 100.0)
            }
        })
        .collect();
    Ok(ModeShareTable {
        without,
        with,
        change_pct,
    })
}

/// Writes the mode-share table with the column set of the published
/// "Change in mode choice" table restricted to modeled categories.
pub fn write_mode_share_csv(table: &ModeShareTable, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("Scenario,");
    out.push_str(&MODE_CATEGORIES.join(","));
    out.push('\n');
    let row = |label: &str, counts: &[u64]| {
        let mut line = label.to_string();
        for c in counts {
            line.push_str(&format!(",{c}"));
        }
        line.push('\n');
        line
    };
    out.push_str(&row("Without pricing", &table.without));
    out.push_str(&row("With pricing", &table.with));
    out.push_str("Change ratio %");
    for c in &table.change_pct {
        match c {
            Some(v) => out.push_str(&format!(",{v:.2}")),
            None => out.push_str(",n/a"),
        }
    }
    out.push('\n');
    std::fs::write(path.as_ref(), out).map_err(|e| SimError::io(path.as_ref(), e))
}

// ---------------------------------------------------------------------------
// Score statistics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

/// Five-number summary of executed plan scores.
pub fn score_stats(pop: &Population) -> Result<ScoreStats> {
    let mut scores = Vec::with_capacity(pop.len());
    for person in &pop.persons {
        match person.selected_plan().score {
            Some(s) => scores.push(s),
            None => {
                return Err(SimError::Config(format!(
                    "person \"{}\" has an unscored selected plan",
                    person.id
                )))
            }
        }
    }
    if scores.is_empty() {
        return Err(SimError::Config("population is empty".to_string()));
    }
    scores.sort_by(f64::total_cmp);
    let n = scores.len();
    let mean = scores.iter().sum::<f64>() / n as f64;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        scores[n / 2]
    } else {
        (scores[n / 2 - 1] + scores[n / 2]) / 2.0
    };
    Ok(ScoreStats {
        mean,
        std: var.sqrt(),
        min: scores[0],
        max: scores[n - 1],
        median,
    })
}

/// Writes the trip-score table with the published column set
/// (Mean/Std/Minimum/Maximum/Median) and a with-minus-without difference row.
pub fn write_score_stats_csv(
    without: &ScoreStats,
    with: &ScoreStats,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = String::from("Scenario,Mean,Std,Minimum,Maximum,Median\n");
    let row = |label: &str, s: &ScoreStats| {
        format!(
            "{label},{:.2},{:.2},{:.2},{:.2},{:.2}\n",
            s.mean, s.std, s.min, s.max, s.median
        )
    };
    out.push_str(&row("Without pricing", without));
    out.push_str(&row("With pricing", with));
    out.push_str(&format!(
        "Difference,{:.2},{:.2},{:.2},{:.2},{:.2}\n",
        with.mean - without.mean,
        with.std - without.std,
        with.min - without.min,
        with.max - without.max,
        with.median - without.median,
    ));
    std::fs::write(path.as_ref(), out).map_err(|e| SimError::io(path.as_ref(), e))
}

// ---------------------------------------------------------------------------
// Cordon metrics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CordonMetrics {
    /// Car entries over entry links per hour.
    pub entries_per_hour: Vec<u64>,
    pub unique_entering_persons: u64,
    /// Vehicle kilometers traveled on links lying entirely inside the
    /// region (paired traversals).
    pub vkt_inside: f64,
    /// Toll revenue in dollars (minus the sum of money event amounts).
    pub revenue: f64,
}

impl CordonMetrics {
    pub fn total_entries(&self) -> u64 {
        self.entries_per_hour.iter().sum()
    }
}

pub fn cordon_metrics(events: &[RawEvent], cordon: &Cordon, net: &Network) -> CordonMetrics {
    let entry_ids: HashSet<&str> = cordon
        .entry_links
        .iter()
        .map(|l| net.link(*l).id.as_str())
        .collect();
    let inside_ids: HashMap<&str, f64> = net
        .links()
        .iter()
        .filter(|l| {
            cordon.inside_nodes.contains(&l.from) && cordon.inside_nodes.contains(&l.to)
        })
        .map(|l| (l.id.as_str(), l.length))
        .collect();

    let mut entries_per_hour = vec![0u64; HOUR_BINS];
    let mut entering: HashSet<&str> = HashSet::new();
    let mut open: HashSet<(&str, &str)> = HashSet::new();
    let mut vmt_m = 0.0f64;
    let mut revenue = 0.0f64;

    for ev in events {
        match ev.kind {
            EventKind::LinkEnter => {
                if entry_ids.contains(ev.link.as_str()) {
                    entries_per_hour[hour_of(ev.time)] += 1;
                    entering.insert(ev.person.as_str());
                }
                if inside_ids.contains_key(ev.link.as_str()) {
                    open.insert((ev.person.as_str(), ev.link.as_str()));
                }
            }
            EventKind::LinkLeave => {
                if let Some(length) = inside_ids.get(ev.link.as_str()) {
                    if open.remove(&(ev.person.as_str(), ev.link.as_str())) {
                        vmt_m += length;
                    }
                }
            }
            EventKind::Money => {
                revenue -= ev.amount.unwrap_or(0.0);
            }
            _ => {}
        }
    }

    CordonMetrics {
        entries_per_hour,
        unique_entering_persons: entering.len() as u64,
        vkt_inside: vmt_m / 1000.0,
        revenue,
    }
}

pub fn write_cordon_metrics_csv(m: &CordonMetrics, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("hour,entries\n");
    for h in 0..HOUR_BINS {
        out.push_str(&format!("{h},{}\n", m.entries_per_hour[h]));
    }
    std::fs::write(path.as_ref(), out).map_err(|e| SimError::io(path.as_ref(), e))
}

pub fn write_cordon_summary_csv(m: &CordonMetrics, path: impl AsRef<Path>) -> Result<()> {
    let out = format!(
        "total_entries,unique_entering_persons,vkt_inside,revenue\n{},{},{},{}\n",
        m.total_entries(),
        m.unique_entering_persons,
        m.vkt_inside,
        m.revenue
    );
    std::fs::write(path.as_ref(), out).map_err(|e| SimError::io(path.as_ref(), e))
}

// ---------------------------------------------------------------------------
// GeoJSON export
// ---------------------------------------------------------------------------

/// One LineString feature per link with volume and congestion-index
/// properties for the given hour. Coordinates are the scenario's planar
/// meters; any GIS viewer that accepts GeoJSON geometry can render it.
pub fn export_geojson(net: &Network, table: &LinkVolumeTable, hour: usize) -> Result<String> {
    if hour >= HOUR_BINS {
        return Err(SimError::Config(format!(
            "hour {hour} outside the {HOUR_BINS} hour horizon"
        )));
    }
    let features: Vec<serde_json::Value> = net
        .links()
        .iter()
        .map(|link| {
            let from = net.node(link.from);
            let to = net.node(link.to);
            let volume = table.volumes[&link.id][hour];
            let congestion = table.congestion[&link.id][hour];
            serde_json::json!({
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[from.x, from.y], [to.x, to.y]],
                },
                "properties": {
                    "link_id": link.id,
                    "volume": volume,
                    "congestion_index": congestion,
                },
            })
        })
        .collect();
    let collection = serde_json::json!({
        "type": "FeatureCollection",
        "features": features,
    });
    Ok(serde_json::to_string_pretty(&collection).expect("geojson serialization"))
}

// ---------------------------------------------------------------------------
// Volume deltas (pairwise comparison)
// ---------------------------------------------------------------------------

pub fn write_volume_deltas_csv(
    base: &LinkVolumeTable,
    policy: &LinkVolumeTable,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = String::from("link,hour,volume_without,volume_with,delta\n");
    for (link, base_vols) in &base.volumes {
        let policy_vols = policy.volumes.get(link);
        for h in 0..HOUR_BINS {
            let b = base_vols[h] as i64;
            let w = policy_vols.map(|v| v[h] as i64).unwrap_or(0);
            out.push_str(&format!("{link},{h},{b},{w},{}\n", w - b));
        }
    }
    std::fs::write(path.as_ref(), out).map_err(|e| SimError::io(path.as_ref(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_cordon;
    use crate::population::{Activity, Leg, Person, Plan, PlanElement, PtItinerary};
    use crate::testutil::NetBuilder;
    use std::collections::BTreeSet;

    fn raw(time: u32, kind: EventKind, person: &str, link: &str) -> RawEvent {
        RawEvent {
            time,
            kind,
            person: person.into(),
            link: link.into(),
            mode: String::new(),
            amount: None,
        }
    }

    fn two_link_net() -> Network {
        NetBuilder::default()
            .node("A", 0.0, 0.0)
            .node("B", 1000.0, 0.0)
            .node("C", 2000.0, 0.0)
            .link("AB", "A", "B", 1000.0, 1000.0, 10.0)
            .link("BC", "B", "C", 1000.0, 1000.0, 10.0)
            .build()
    }

    #[test]
    fn empty_stream_gives_zero_volumes() {
        let net = two_link_net();
        let table = link_volumes(&[], &net);
        assert!(table.volumes.values().all(|v| v.iter().all(|&x| x == 0)));
        assert!(table.diagnostics.is_empty());
    }

    #[test]
    fn volumes_bin_by_entry_hour() {
        let net = two_link_net();
        let events = vec![
            raw(8 * 3600 + 600, EventKind::LinkEnter, "p1", "AB"),
            raw(8 * 3600 + 700, EventKind::LinkLeave, "p1", "AB"),
            raw(8 * 3600 + 1200, EventKind::LinkEnter, "p2", "AB"),
            raw(8 * 3600 + 1300, EventKind::LinkLeave, "p2", "AB"),
            raw(9 * 3600 + 300, EventKind::LinkEnter, "p3", "AB"),
            raw(9 * 3600 + 400, EventKind::LinkLeave, "p3", "AB"),
        ];
        let table = link_volumes(&events, &net);
        assert_eq!(table.volumes["AB"][8], 2);
        assert_eq!(table.volumes["AB"][9], 1);
        assert_eq!(table.volumes["AB"][7], 0);
        // traversal took 100 s = free flow, congestion index 1.0
        assert_eq!(table.congestion["AB"][8], Some(1.0));
    }

    #[test]
    fn unpaired_enter_is_diagnosed() {
        let net = two_link_net();
        let events = vec![raw(100, EventKind::LinkEnter, "p1", "AB")];
        let table = link_volumes(&events, &net);
        assert_eq!(table.volumes["AB"][0], 0);
        assert_eq!(table.diagnostics.len(), 1);
        assert!(table.diagnostics[0].contains("p1"));
    }

    #[test]
    fn ridership_counts_boards_and_occupancy() {
        let mut events = Vec::new();
        for i in 0..5 {
            events.push(raw(8 * 3600 + i * 60, EventKind::Board, &format!("p{i}"), "line1"));
        }
        for i in 0..5 {
            events.push(raw(9 * 3600 + i * 60, EventKind::Alight, &format!("p{i}"), "line1"));
        }
        events.sort_by_key(|e| e.time);
        let r = pt_ridership(&events);
        assert_eq!(r.boardings[8], 5);
        assert_eq!(r.occupancy[8], 5);
        assert_eq!(r.occupancy[9], 0);
        assert!(r.occupancy.iter().all(|&o| o >= 0));
        assert!(r.diagnostics.is_empty());
    }

    fn one_person_pop(mode: Mode, route: Option<Route>) -> Population {
        Population {
            persons: vec![Person {
                id: "p1".into(),
                toll_exempt: false,
                plans: vec![Plan {
                    elements: vec![
                        PlanElement::Activity(Activity {
                            kind: "home".into(),
                            link: crate::network::LinkIdx(0),
                            end_time: Some(100),
                            typical_duration: 3600,
                        }),
                        PlanElement::Leg(Leg { mode, route }),
                        PlanElement::Activity(Activity {
                            kind: "work".into(),
                            link: crate::network::LinkIdx(1),
                            end_time: None,
                            typical_duration: 3600,
                        }),
                    ],
                    score: Some(1.0),
                }],
                selected: 0,
            }],
        }
    }

    #[test]
    fn mode_share_expands_pt_legs() {
        let itinerary = PtItinerary {
            line: "l".into(),
            board_stop: 0,
            alight_stop: 1,
            access_walk: 10,
            egress_walk: 10,
        };
        let policy = one_person_pop(Mode::Pt, Some(Route::Transit(itinerary)));
        let baseline = one_person_pop(Mode::Car, Some(Route::Links(vec![])));
        let table = mode_share(&policy, &baseline).unwrap();
        // baseline: one car leg; policy: pt + access + egress walk
        assert_eq!(table.without, vec![1, 0, 0, 0, 0, 0, 0]);
        assert_eq!(table.with, vec![0, 1, 0, 0, 1, 1, 0]);
        assert_eq!(table.change_pct[0], Some(-100.0));
        assert_eq!(table.change_pct[1], None); // 0 baseline -> n/a
    }

    #[test]
    fn mode_share_identical_populations_is_zero() {
        let pop = one_person_pop(Mode::Car, Some(Route::Links(vec![])));
        let table = mode_share(&pop, &pop).unwrap();
        assert_eq!(table.change_pct[0], Some(0.0));
    }

    #[test]
    fn mode_share_change_ratio_matches_published_rounding() {
        // 369908 car trips without pricing, 363878 with: -1.63%
        let b = 369908.0f64;
        let w = 363878.0f64;
        let ratio = (w - b) / b * 100.0;
        assert_eq!(format!("{ratio:.2}"), "-1.63");
    }

    #[test]
    fn mode_share_rejects_person_mismatch() {
        let a = one_person_pop(Mode::Car, Some(Route::Links(vec![])));
        let mut b = a.clone();
        b.persons[0].id = "p2".into();
        assert!(matches!(
            mode_share(&a, &b),
            Err(SimError::CompareMismatch(_))
        ));
    }

    #[test]
    fn score_stats_five_number_summary() {
        let mut pop = one_person_pop(Mode::Car, Some(Route::Links(vec![])));
        let person = pop.persons[0].clone();
        let mut p2 = person.clone();
        p2.id = "p2".into();
        p2.plans[0].score = Some(2.0);
        let mut p3 = person.clone();
        p3.id = "p3".into();
        p3.plans[0].score = Some(3.0);
        pop.persons.push(p2);
        pop.persons.push(p3);
        let stats = score_stats(&pop).unwrap();
        assert_eq!(stats.mean, 2.0);
        assert_eq!(stats.median, 2.0);
        assert_eq!(stats.min, 1.0);
        assert_eq!(stats.max, 3.0);
    }

    #[test]
    fn score_table_has_published_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let s = ScoreStats {
            mean: 3.6,
            std: 48.32,
            min: -567.95,
            max: 61.55,
            median: 19.48,
        };
        write_score_stats_csv(&s, &s, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("Scenario,Mean,Std,Minimum,Maximum,Median"));
        assert!(text.contains("Without pricing"));
        assert!(text.contains("With pricing"));
        assert!(text.contains("Difference,0.00,0.00,0.00,0.00,0.00"));
    }

    #[test]
    fn mode_share_table_has_published_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("modes.csv");
        let pop = one_person_pop(Mode::Car, Some(Route::Links(vec![])));
        let table = mode_share(&pop, &pop).unwrap();
        write_mode_share_csv(&table, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next(),
            Some("Scenario,Car,Pt,Walk,Bike,Access walk,Egress walk,Transit walk")
        );
        assert!(text.contains("Change ratio %"));
    }

    #[test]
    fn cordon_metrics_from_scripted_events() {
        let net = NetBuilder::default()
            .node("A", 0.0, 0.0)
            .node("B", 1000.0, 0.0)
            .node("C", 2000.0, 0.0)
            .link("AB", "A", "B", 1000.0, 1000.0, 10.0)
            .link("BC", "B", "C", 750.0, 1000.0, 10.0)
            .build();
        let cordon = build_cordon(
            &net,
            &BTreeSet::from([net.node_idx("B").unwrap(), net.node_idx("C").unwrap()]),
        )
        .unwrap();
        let mut events = vec![
            raw(7 * 3600, EventKind::LinkEnter, "p1", "AB"),
            raw(7 * 3600 + 100, EventKind::LinkLeave, "p1", "AB"),
            raw(7 * 3600 + 100, EventKind::LinkEnter, "p1", "BC"),
            raw(7 * 3600 + 175, EventKind::LinkLeave, "p1", "BC"),
        ];
        events.insert(
            1,
            RawEvent {
                time: 7 * 3600,
                kind: EventKind::Money,
                person: "p1".into(),
                link: "AB".into(),
                mode: String::new(),
                amount: Some(-9.0),
            },
        );
        let m = cordon_metrics(&events, &cordon, &net);
        assert_eq!(m.entries_per_hour[7], 1);
        assert_eq!(m.total_entries(), 1);
        assert_eq!(m.unique_entering_persons, 1);
        // only BC lies fully inside: 750 m
        assert_eq!(m.vkt_inside, 0.75);
        assert_eq!(m.revenue, 9.0);
    }

    #[test]
    fn cordon_metrics_empty_is_zero() {
        let net = two_link_net();
        let cordon = build_cordon(&net, &BTreeSet::from([net.node_idx("C").unwrap()])).unwrap();
        let m = cordon_metrics(&[], &cordon, &net);
        assert_eq!(m.total_entries(), 0);
        assert_eq!(m.unique_entering_persons, 0);
        assert_eq!(m.vkt_inside, 0.0);
        assert_eq!(m.revenue, 0.0);
    }

    #[test]
    fn geojson_has_one_feature_per_link() {
        let net = two_link_net();
        let table = link_volumes(&[], &net);
        let text = export_geojson(&net, &table, 17).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        let features = value["features"].as_array().unwrap();
        assert_eq!(features.len(), net.links().len());
        assert_eq!(features[0]["properties"]["volume"], 0);
        // coordinates round-trip node positions
        assert_eq!(
            features[0]["geometry"]["coordinates"][0][0].as_f64().unwrap(),
            0.0
        );
        assert_eq!(
            features[0]["geometry"]["coordinates"][1][0].as_f64().unwrap(),
            1000.0
        );
        assert!(export_geojson(&net, &table, 30).is_err());
    }
}
