//! Synthetic desk-scale scenarios: a grid city with a central cordon and
//! transit, a two-route bottleneck (Pigou) network, and a corridor with a
//! tolled through route and an untolled bypass.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::network::{save_network, Link, LinkIdx, Network, Node, NodeIdx};
use crate::population::{
    save_population, Activity, Leg, Person, Plan, PlanElement, Population, Route,
};
use crate::scenario::{ScenarioConfig, TollConfig, NYC_CBD_BASE};
use crate::scoring::ScoringParams;
use crate::replanning::StrategyConfig;
use crate::transit::{save_schedule, TransitLine, TransitSchedule};
use crate::Mode;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCityParams {
    /// Nodes per side.
    pub size: usize,
    pub persons: usize,
    pub seed: u64,
    /// Node spacing in meters.
    pub spacing: f64,
    /// Per-link capacity, vehicles/hour.
    pub capacity: f64,
    /// Car free speed, m/s.
    pub free_speed: f64,
    /// Fraction of toll-exempt persons.
    pub exempt_share: f64,
    pub iterations: usize,
}

impl Default for GridCityParams {
    fn default() -> Self {
        GridCityParams {
            size: 10,
            persons: 1000,
            seed: 1,
            spacing: 500.0,
            capacity: 600.0,
            free_speed: 13.89,
            exempt_share: 0.02,
            iterations: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PigouParams {
    pub persons: usize,
    pub seed: u64,
    /// Capacity of the fast route's bottleneck link, vehicles/hour.
    pub bottleneck_capacity: f64,
    /// Free-flow travel time of the fast route, seconds.
    pub fast_fft: u32,
    /// Free-flow travel time of the slow (uncongestible) route, seconds.
    pub slow_fft: u32,
    pub iterations: usize,
}

impl Default for PigouParams {
    fn default() -> Self {
        PigouParams {
            persons: 1000,
            seed: 1,
            bottleneck_capacity: 1800.0,
            fast_fft: 300,
            slow_fft: 600,
            iterations: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoRouteParams {
    pub persons: usize,
    pub seed: u64,
    pub iterations: usize,
}

impl Default for TwoRouteParams {
    fn default() -> Self {
        TwoRouteParams {
            persons: 400,
            seed: 1,
            iterations: 30,
        }
    }
}

/// Link ids of the pigou scenario's route choice, used by analyses that
/// classify agents by route.
pub const PIGOU_FAST_LINK: &str = "fast_in";
pub const PIGOU_SLOW_LINK: &str = "slow_in";

fn write_config(dir: &Path, config: &ScenarioConfig) -> Result<PathBuf> {
    let path = dir.join("config.json");
    let text = serde_json::to_string_pretty(config).expect("config serialization");
    std::fs::write(&path, text).map_err(|e| SimError::io(&path, e))?;
    Ok(path)
}

fn base_config(iterations: usize, seed: u64, transit: bool, toll: Option<TollConfig>) -> ScenarioConfig {
    ScenarioConfig {
        network: PathBuf::from("network.json"),
        population: PathBuf::from("population.json"),
        transit: transit.then(|| PathBuf::from("transit.json")),
        scoring: ScoringParams::default(),
        toll,
        strategy: StrategyConfig::default(),
        iterations,
        scale: 1.0,
        seed,
        output: PathBuf::from("run"),
    }
}

// ---------------------------------------------------------------------------
// grid-city
// ---------------------------------------------------------------------------

/// A `size x size` grid with two directed links per edge, a central cordon
/// block, transit lines along every row and column (both directions),
/// and a population of cordon commuters, through travelers and locals.
pub fn grid_city(dir: impl AsRef<Path>, params: &GridCityParams) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let size = params.size;
    if size < 5 {
        return Err(SimError::Config("grid size must be at least 5".to_string()));
    }

    let node_id = |r: usize, c: usize| format!("n{r}_{c}");
    let mut nodes = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            nodes.push(Node {
                id: node_id(r, c),
                x: c as f64 * params.spacing,
                y: r as f64 * params.spacing,
            });
        }
    }
    let node_idx = |r: usize, c: usize| NodeIdx((r * size + c) as u32);

    let mut links = Vec::new();
    let mut add_link = |from: (usize, usize), to: (usize, usize)| {
        links.push(Link {
            id: format!("{}-{}", node_id(from.0, from.1), node_id(to.0, to.1)),
            from: node_idx(from.0, from.1),
            to: node_idx(to.0, to.1),
            length: params.spacing,
            capacity: params.capacity,
            free_speed: params.free_speed,
            lanes: 1,
            modes: BTreeSet::from([Mode::Car]),
        });
    };
    for r in 0..size {
        for c in 0..size {
            if c + 1 < size {
                add_link((r, c), (r, c + 1));
                add_link((r, c + 1), (r, c));
            }
            if r + 1 < size {
                add_link((r, c), (r + 1, c));
                add_link((r + 1, c), (r, c));
            }
        }
    }

    // Central cordon block, 4x4 on the default 10x10 grid.
    let side = (size * 2 / 5).max(1);
    let start = (size - side) / 2;
    let in_block = |r: usize, c: usize| {
        (start..start + side).contains(&r) && (start..start + side).contains(&c)
    };
    let cordon: Vec<String> = (0..size)
        .flat_map(|r| (0..size).map(move |c| (r, c)))
        .filter(|&(r, c)| in_block(r, c))
        .map(|(r, c)| node_id(r, c))
        .collect();

    let net = Network::new(nodes, links, Some(cordon));
    save_network(&net, dir.join("network.json"))?;

    // Transit: lines along every row and column, both directions, so most
    // origin-destination pairs have a direct (zero-transfer) connection.
    let mut lines = Vec::new();
    let inter: u32 = (params.spacing / 16.7).round() as u32; // metro-like
    for r in 0..size {
        let stops: Vec<NodeIdx> = (0..size).map(|c| node_idx(r, c)).collect();
        let rev: Vec<NodeIdx> = stops.iter().rev().copied().collect();
        lines.push(TransitLine::new(
            format!("row{r}_east"),
            stops,
            vec![inter; size - 1],
            5 * 3600,
            25 * 3600,
            300,
        )?);
        lines.push(TransitLine::new(
            format!("row{r}_west"),
            rev,
            vec![inter; size - 1],
            5 * 3600,
            25 * 3600,
            300,
        )?);
    }
    for c in 0..size {
        let stops: Vec<NodeIdx> = (0..size).map(|r| node_idx(r, c)).collect();
        let rev: Vec<NodeIdx> = stops.iter().rev().copied().collect();
        lines.push(TransitLine::new(
            format!("col{c}_south"),
            stops,
            vec![inter; size - 1],
            5 * 3600,
            25 * 3600,
            300,
        )?);
        lines.push(TransitLine::new(
            format!("col{c}_north"),
            rev,
            vec![inter; size - 1],
            5 * 3600,
            25 * 3600,
            300,
        )?);
    }
    let schedule = TransitSchedule { lines };
    save_schedule(&schedule, &net, dir.join("transit.json"))?;

    // Incoming links per node for placing activities.
    let mut incoming: Vec<Vec<LinkIdx>> = vec![Vec::new(); net.nodes().len()];
    for (i, link) in net.links().iter().enumerate() {
        incoming[link.to.idx()].push(LinkIdx(i as u32));
    }

    let inside_nodes: Vec<(usize, usize)> = (0..size)
        .flat_map(|r| (0..size).map(move |c| (r, c)))
        .filter(|&(r, c)| in_block(r, c))
        .collect();
    let outside_nodes: Vec<(usize, usize)> = (0..size)
        .flat_map(|r| (0..size).map(move |c| (r, c)))
        .filter(|&(r, c)| !in_block(r, c))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut persons = Vec::with_capacity(params.persons);
    for i in 0..params.persons {
        let (home, work) = match i % 5 {
            // commuters into the cordon
            0..=2 => {
                let home = outside_nodes[rng.gen_range(0..outside_nodes.len())];
                let work = inside_nodes[rng.gen_range(0..inside_nodes.len())];
                (home, work)
            }
            // through travelers, west<->east or north<->south
            3 => {
                let far = size - 1 - rng.gen_range(0..2);
                let near = rng.gen_range(0..2);
                let a = rng.gen_range(0..size);
                let b = rng.gen_range(0..size);
                if rng.gen_bool(0.5) {
                    ((a, near), (b, far))
                } else {
                    ((near, a), (far, b))
                }
            }
            // locals: short trips outside the cordon
            _ => {
                let home = outside_nodes[rng.gen_range(0..outside_nodes.len())];
                let work = outside_nodes
                    .iter()
                    .filter(|&&(r, c)| {
                        let d = r.abs_diff(home.0) + c.abs_diff(home.1);
                        (1..=3).contains(&d)
                    })
                    .cloned()
                    .collect::<Vec<_>>();
                let work = work[rng.gen_range(0..work.len())];
                (home, work)
            }
        };
        let home_links = &incoming[node_idx(home.0, home.1).idx()];
        let work_links = &incoming[node_idx(work.0, work.1).idx()];
        let home_link = home_links[rng.gen_range(0..home_links.len())];
        let work_link = work_links[rng.gen_range(0..work_links.len())];
        let home_end = rng.gen_range(23400..=32400); // 06:30 - 09:00
        let work_end = home_end + rng.gen_range(28800..=32400); // 8 - 9 h later

        persons.push(Person {
            id: format!("p{i}"),
            toll_exempt: rng.gen_bool(params.exempt_share),
            plans: vec![Plan::new(vec![
                PlanElement::Activity(Activity {
                    kind: "home".into(),
                    link: home_link,
                    end_time: Some(home_end),
                    typical_duration: 12 * 3600,
                }),
                PlanElement::Leg(Leg {
                    mode: Mode::Car,
                    route: None,
                }),
                PlanElement::Activity(Activity {
                    kind: "work".into(),
                    link: work_link,
                    end_time: Some(work_end),
                    typical_duration: 8 * 3600,
                }),
                PlanElement::Leg(Leg {
                    mode: Mode::Car,
                    route: None,
                }),
                PlanElement::Activity(Activity {
                    kind: "home".into(),
                    link: home_link,
                    end_time: None,
                    typical_duration: 12 * 3600,
                }),
            ])],
            selected: 0,
        });
    }
    let pop = Population { persons };
    save_population(&pop, &net, dir.join("population.json"))?;

    let mut config = base_config(
        params.iterations,
        params.seed,
        true,
        Some(TollConfig::preset(NYC_CBD_BASE)),
    );
    // Scenario calibration: non-car alternatives carry constants so that
    // transit is the main fallback for tolled commutes while bike/walk
    // keep winning short local trips.
    config.scoring.mode_constant = crate::scoring::ModeMap {
        car: -1.0,
        pt: 0.0,
        walk: -1.0,
        bike: -3.0,
    };
    write_config(dir, &config)
}

// ---------------------------------------------------------------------------
// pigou
// ---------------------------------------------------------------------------

/// Two parallel routes between one origin and one destination: a fast route
/// with a bottleneck and a slow route with ample capacity. Agents depart
/// evenly spaced over 08:00-09:00 and make a single trip.
pub fn pigou(dir: impl AsRef<Path>, params: &PigouParams) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;

    let speed = 10.0;
    let fast_half = params.fast_fft as f64 * speed / 2.0;
    let slow_half = params.slow_fft as f64 * speed / 2.0;
    let nodes = vec![
        Node { id: "H".into(), x: -100.0, y: 0.0 },
        Node { id: "O".into(), x: 0.0, y: 0.0 },
        Node { id: "F".into(), x: fast_half, y: -500.0 },
        Node { id: "S".into(), x: slow_half, y: 500.0 },
        Node { id: "D".into(), x: fast_half * 2.0, y: 0.0 },
        Node { id: "W".into(), x: fast_half * 2.0 + 100.0, y: 0.0 },
    ];
    let idx = |i: u32| NodeIdx(i);
    let mk = |id: &str, from: u32, to: u32, length: f64, capacity: f64| Link {
        id: id.into(),
        from: idx(from),
        to: idx(to),
        length,
        capacity,
        free_speed: speed,
        lanes: 1,
        modes: BTreeSet::from([Mode::Car]),
    };
    let links = vec![
        mk("home", 0, 1, 100.0, 36000.0),
        mk(PIGOU_FAST_LINK, 1, 2, fast_half, params.bottleneck_capacity),
        mk("fast_out", 2, 4, fast_half, 36000.0),
        mk(PIGOU_SLOW_LINK, 1, 3, slow_half, 36000.0),
        mk("slow_out", 3, 4, slow_half, 36000.0),
        mk("work", 4, 5, 100.0, 36000.0),
    ];
    let net = Network::new(nodes, links, None);
    save_network(&net, dir.join("network.json"))?;

    let fast = net.link_idx(PIGOU_FAST_LINK).unwrap();
    let fast_out = net.link_idx("fast_out").unwrap();
    let slow = net.link_idx(PIGOU_SLOW_LINK).unwrap();
    let slow_out = net.link_idx("slow_out").unwrap();
    let home = net.link_idx("home").unwrap();
    let work = net.link_idx("work").unwrap();

    let mut persons = Vec::with_capacity(params.persons);
    for i in 0..params.persons {
        let depart = 28800 + (i as u64 * 3600 / params.persons as u64) as u32;
        // Seed both routes so the loop starts from a mixed assignment.
        let route = if i % 2 == 0 {
            vec![fast, fast_out, work]
        } else {
            vec![slow, slow_out, work]
        };
        persons.push(Person {
            id: format!("p{i}"),
            toll_exempt: false,
            plans: vec![Plan::new(vec![
                PlanElement::Activity(Activity {
                    kind: "home".into(),
                    link: home,
                    end_time: Some(depart),
                    typical_duration: 12 * 3600,
                }),
                PlanElement::Leg(Leg {
                    mode: Mode::Car,
                    route: Some(Route::Links(route)),
                }),
                PlanElement::Activity(Activity {
                    kind: "work".into(),
                    link: work,
                    end_time: None,
                    typical_duration: 8 * 3600,
                }),
            ])],
            selected: 0,
        });
    }
    save_population(&Population { persons }, &net, dir.join("population.json"))?;

    // Route choice is the experiment here: keep mode choice and departure
    // mutation out of the strategy mix so the split is between the two
    // roads at the given demand profile only.
    let mut config = base_config(params.iterations, params.seed, false, None);
    config.strategy.weights = crate::replanning::StrategyWeights {
        select: 0.80,
        reroute: 0.20,
        mode_choice: 0.0,
        time_mutation: 0.0,
    };
    write_config(dir, &config)
}

// ---------------------------------------------------------------------------
// two-route-cordon
// ---------------------------------------------------------------------------

/// A corridor whose short route crosses a two-node cordon and whose longer
/// bypass stays outside, in both directions. Demonstrates toll avoidance
/// and feeds the cordon analyses.
pub fn two_route_cordon(dir: impl AsRef<Path>, params: &TwoRouteParams) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;

    let nodes = vec![
        Node { id: "H".into(), x: -100.0, y: 0.0 },
        Node { id: "A".into(), x: 0.0, y: 0.0 },
        Node { id: "C1".into(), x: 1000.0, y: 0.0 },
        Node { id: "C2".into(), x: 2000.0, y: 0.0 },
        Node { id: "B".into(), x: 3000.0, y: 0.0 },
        Node { id: "W".into(), x: 3100.0, y: 0.0 },
        Node { id: "Y".into(), x: 1500.0, y: 2000.0 },
    ];
    let idx = |i: u32| NodeIdx(i);
    let mk = |id: &str, from: u32, to: u32, length: f64| Link {
        id: id.into(),
        from: idx(from),
        to: idx(to),
        length,
        capacity: 36000.0,
        free_speed: 10.0,
        lanes: 1,
        modes: BTreeSet::from([Mode::Car]),
    };
    let links = vec![
        mk("home_out", 0, 1, 100.0),
        mk("home_in", 1, 0, 100.0),
        mk("in_east", 1, 2, 1000.0),
        mk("in_west", 2, 1, 1000.0),
        mk("mid_east", 2, 3, 1000.0),
        mk("mid_west", 3, 2, 1000.0),
        mk("out_east", 3, 4, 1000.0),
        mk("out_west", 4, 3, 1000.0),
        mk("byp_up", 1, 6, 2500.0),
        mk("byp_down", 6, 1, 2500.0),
        mk("byp_on", 6, 4, 2500.0),
        mk("byp_back", 4, 6, 2500.0),
        mk("work_in", 4, 5, 100.0),
        mk("work_out", 5, 4, 100.0),
    ];
    let net = Network::new(nodes, links, Some(vec!["C1".into(), "C2".into()]));
    save_network(&net, dir.join("network.json"))?;

    let home_out = net.link_idx("home_out").unwrap();
    let work_in = net.link_idx("work_in").unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut persons = Vec::with_capacity(params.persons);
    for i in 0..params.persons {
        let home_end = rng.gen_range(25200..=32400); // 07:00 - 09:00
        let work_end = home_end + 9 * 3600;
        persons.push(Person {
            id: format!("p{i}"),
            toll_exempt: false,
            plans: vec![Plan::new(vec![
                PlanElement::Activity(Activity {
                    kind: "home".into(),
                    link: home_out,
                    end_time: Some(home_end),
                    typical_duration: 12 * 3600,
                }),
                PlanElement::Leg(Leg { mode: Mode::Car, route: None }),
                PlanElement::Activity(Activity {
                    kind: "work".into(),
                    link: work_in,
                    end_time: Some(work_end),
                    typical_duration: 8 * 3600,
                }),
                PlanElement::Leg(Leg { mode: Mode::Car, route: None }),
                PlanElement::Activity(Activity {
                    kind: "home".into(),
                    link: home_out,
                    end_time: None,
                    typical_duration: 12 * 3600,
                }),
            ])],
            selected: 0,
        });
    }
    save_population(&Population { persons }, &net, dir.join("population.json"))?;

    let config = base_config(
        params.iterations,
        params.seed,
        false,
        Some(TollConfig::preset(NYC_CBD_BASE)),
    );
    write_config(dir, &config)
}
