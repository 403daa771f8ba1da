//! Road pricing schemes: cordon tolls with time-of-day rates, once-daily
//! charging and exemptions, plus generic per-link tolls. The mobility
//! simulation consults the scheme on every car link entry and emits money
//! events for the charges it decides.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::network::{Cordon, LinkIdx, Network};
use crate::Mode;

/// The once-daily rule resets at 03:00 rather than midnight so an overnight
/// home activity spanning midnight cannot be charged twice.
pub const DAILY_RESET: u32 = 3 * 3600;

/// Half-open charging window `[start, end)` in seconds since midnight.
/// `start > end` wraps past midnight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TollPeriod {
    pub start: u32,
    pub end: u32,
    /// Dollars charged per crossing within this window.
    pub amount: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Enter,
    Exit,
    Both,
}

#[derive(Debug, Clone)]
pub enum TollKind {
    Cordon(Cordon),
    Links(Vec<LinkIdx>),
}

#[derive(Debug, Clone)]
pub struct TollScheme {
    pub kind: TollKind,
    pub periods: Vec<TollPeriod>,
    pub once_per_day: bool,
    pub charged_modes: BTreeSet<Mode>,
    pub direction: Direction,
}

impl TollScheme {
    pub fn new(
        kind: TollKind,
        periods: Vec<TollPeriod>,
        once_per_day: bool,
        charged_modes: BTreeSet<Mode>,
        direction: Direction,
    ) -> Result<Self> {
        validate_periods(&periods)?;
        Ok(TollScheme {
            kind,
            periods,
            once_per_day,
            charged_modes,
            direction,
        })
    }

    /// The CBD base plan: $9 peak (6:00-20:00), $7 off-peak (20:00-22:00),
    /// $5 overnight (22:00-6:00); passenger cars charged once daily for
    /// entering or leaving the region.
    pub fn nyc_cbd_base(cordon: Cordon) -> Self {
        TollScheme {
            kind: TollKind::Cordon(cordon),
            periods: nyc_cbd_base_periods(),
            once_per_day: true,
            charged_modes: BTreeSet::from([Mode::Car]),
            direction: Direction::Both,
        }
    }

    /// Dollars charged at `t` (wrapped to the 24 h schedule).
    pub fn rate_at(&self, t: u32) -> f64 {
        let tod = t % (24 * 3600);
        for p in &self.periods {
            let contains = if p.start <= p.end {
                tod >= p.start && tod < p.end
            } else {
                tod >= p.start || tod < p.end
            };
            if contains {
                return p.amount;
            }
        }
        // validate_periods guarantees coverage
        unreachable!("toll periods cover the day")
    }

    /// Links whose entry can trigger a charge for the configured direction.
    pub fn chargeable_links(&self) -> Vec<LinkIdx> {
        match &self.kind {
            TollKind::Links(links) => links.clone(),
            TollKind::Cordon(cordon) => {
                let mut out = Vec::new();
                if matches!(self.direction, Direction::Enter | Direction::Both) {
                    out.extend(cordon.entry_links.iter().copied());
                }
                if matches!(self.direction, Direction::Exit | Direction::Both) {
                    out.extend(cordon.exit_links.iter().copied());
                }
                out
            }
        }
    }
}

pub fn nyc_cbd_base_periods() -> Vec<TollPeriod> {
    vec![
        TollPeriod {
            start: 6 * 3600,
            end: 20 * 3600,
            amount: 9.0,
        },
        TollPeriod {
            start: 20 * 3600,
            end: 22 * 3600,
            amount: 7.0,
        },
        TollPeriod {
            start: 22 * 3600,
            end: 6 * 3600,
            amount: 5.0,
        },
    ]
}

/// Periods must partition `[0, 24h)` exactly: no gaps, no overlaps.
pub fn validate_periods(periods: &[TollPeriod]) -> Result<()> {
    const DAY: u32 = 24 * 3600;
    let fail = |msg: String| Err(SimError::TollPeriodCoverage(msg));
    if periods.is_empty() {
        return fail("no periods given".to_string());
    }
    let mut segments = Vec::new();
    for p in periods {
        if p.amount < 0.0 || !p.amount.is_finite() {
            return fail(format!("negative or non-finite amount {}", p.amount));
        }
        if p.start >= DAY || p.end > DAY {
            return fail(format!("period [{}, {}) outside [0, 24h)", p.start, p.end));
        }
        if p.start == p.end {
            return fail(format!("empty period at {}", p.start));
        }
        if p.start < p.end {
            segments.push((p.start, p.end));
        } else {
            segments.push((p.start, DAY));
            if p.end > 0 {
                segments.push((0, p.end));
            }
        }
    }
    segments.sort_unstable();
    let mut cursor = 0;
    for (start, end) in segments {
        if start > cursor {
            return fail(format!("gap between {cursor} and {start}"));
        }
        if start < cursor {
            return fail(format!("overlap at {start}"));
        }
        cursor = end;
    }
    if cursor != DAY {
        return fail(format!("gap between {cursor} and {DAY}"));
    }
    Ok(())
}

/// Index of the charging day `t` belongs to. Days roll over at
/// [`DAILY_RESET`]; times before the first reset belong to day 0.
pub fn charging_day(t: u32) -> u32 {
    if t < DAILY_RESET {
        0
    } else {
        1 + (t - DAILY_RESET) / (24 * 3600)
    }
}

/// Charge bookkeeping for one mobsim run: the scheme plus per-person
/// once-daily history, with an O(1) per-link chargeability mask.
pub struct TollCharger<'a> {
    scheme: &'a TollScheme,
    chargeable: Vec<bool>,
    /// Charging day each person was last charged in.
    charged_day: Vec<Option<u32>>,
}

impl<'a> TollCharger<'a> {
    pub fn new(scheme: &'a TollScheme, net: &Network, n_persons: usize) -> Self {
        let mut chargeable = vec![false; net.links().len()];
        for link in scheme.chargeable_links() {
            chargeable[link.idx()] = true;
        }
        TollCharger {
            scheme,
            chargeable,
            charged_day: vec![None; n_persons],
        }
    }

    /// Decides the charge for a link entry. Returns the positive dollar
    /// amount to bill, or `None` when no charge applies. Zero-rate periods
    /// never charge and do not consume the once-daily allowance.
    pub fn on_link_enter(
        &mut self,
        person: u32,
        toll_exempt: bool,
        mode: Mode,
        link: LinkIdx,
        t: u32,
    ) -> Option<f64> {
        if !self.chargeable[link.idx()]
            || toll_exempt
            || !self.scheme.charged_modes.contains(&mode)
        {
            return None;
        }
        let rate = self.scheme.rate_at(t);
        if rate == 0.0 {
            return None;
        }
        if self.scheme.once_per_day {
            let day = charging_day(t);
            let last = &mut self.charged_day[person as usize];
            if *last == Some(day) {
                return None;
            }
            *last = Some(day);
        }
        Some(rate)
    }
}
