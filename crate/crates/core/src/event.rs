//! Grid maps, regions and the two spatiotemporal event shapes.
//!
//! Cells are 0-based indices into a row-major grid. Timestamps are 1-based:
//! a trajectory slice holds the location at time `t` in element `t - 1`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A rectangular grid of `width * height` cells, each `cell_size` km on a side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMap {
    width: usize,
    height: usize,
    cell_size: f64,
}

impl GridMap {
    pub fn new(width: usize, height: usize, cell_size: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMap(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::InvalidMap(format!(
                "cell size must be a positive number of km, got {cell_size}"
            )));
        }
        Ok(Self {
            width,
            height,
            cell_size,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Number of cells.
    pub fn m(&self) -> usize {
        self.width * self.height
    }

    pub fn row_col(&self, cell: usize) -> (usize, usize) {
        (cell / self.width, cell % self.width)
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// Cell center in km, `(x, y)` measured from the grid's origin corner.
    pub fn center(&self, cell: usize) -> (f64, f64) {
        let (row, col) = self.row_col(cell);
        ((col as f64 + 0.5) * self.cell_size, (row as f64 + 0.5) * self.cell_size)
    }

    /// Euclidean distance between two cell centers in km.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (xa, ya) = self.center(a);
        let (xb, yb) = self.center(b);
        (xa - xb).hypot(ya - yb)
    }

    /// Full `m x m` distance table, row-major.
    pub fn distance_table(&self) -> Vec<f64> {
        let m = self.m();
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] = self.distance(i, j);
            }
        }
        out
    }

    pub fn check_cell(&self, cell: usize) -> Result<()> {
        if cell < self.m() {
            Ok(())
        } else {
            Err(Error::CellOutOfRange { cell, m: self.m() })
        }
    }
}

/// A non-empty set of cells, stored as a dense indicator mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Region {
    mask: Vec<bool>,
}

impl Region {
    pub fn from_mask(mask: Vec<bool>) -> Result<Self> {
        if !mask.iter().any(|&x| x) {
            return Err(Error::InvalidRegion("region has no cells".into()));
        }
        Ok(Self { mask })
    }

    pub fn from_cells(m: usize, cells: &[usize]) -> Result<Self> {
        let mut mask = vec![false; m];
        for &c in cells {
            if c >= m {
                return Err(Error::CellOutOfRange { cell: c, m });
            }
            mask[c] = true;
        }
        Self::from_mask(mask)
    }

    /// The whole map.
    pub fn full(m: usize) -> Self {
        Self { mask: vec![true; m] }
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.mask.get(cell).copied().unwrap_or(false)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn size(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// The indicator vector `s` as reals.
    pub fn indicator(&self) -> Vec<f64> {
        self.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    /// True iff the user is inside at least one region at its timestamp.
    Presence,
    /// True iff the user is inside every region at its timestamp.
    Pattern,
}

/// A Presence or Pattern event over a consecutive window of timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    kind: EventKind,
    regions: Vec<Region>,
    start: u32,
}

impl Event {
    /// Builds an event from parallel region and timestamp sequences.
    ///
    /// Timestamps must be 1-based and consecutive; all regions must live on
    /// the same map.
    pub fn new(kind: EventKind, regions: Vec<Region>, times: &[u32]) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::InvalidEvent("an event needs at least one region".into()));
        }
        if regions.len() != times.len() {
            return Err(Error::InvalidEvent(format!(
                "{} regions but {} timestamps",
                regions.len(),
                times.len()
            )));
        }
        let m = regions[0].len();
        if let Some(r) = regions.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: r.len(),
            });
        }
        if times[0] < 1 {
            return Err(Error::InvalidEvent("timestamps are 1-based".into()));
        }
        for w in times.windows(2) {
            if w[1] != w[0] + 1 {
                return Err(Error::InvalidEvent(format!(
                    "timestamps must be consecutive, found {} followed by {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self {
            kind,
            regions,
            start: times[0],
        })
    }

    /// Presence of one region over `start..=end`.
    pub fn presence(region: Region, start: u32, end: u32) -> Result<Self> {
        if end < start {
            return Err(Error::InvalidEvent(format!("empty window {start}..={end}")));
        }
        let times: Vec<u32> = (start..=end).collect();
        Self::new(EventKind::Presence, vec![region; times.len()], &times)
    }

    /// Pattern over consecutive timestamps beginning at `start`.
    pub fn pattern(regions: Vec<Region>, start: u32) -> Result<Self> {
        let times: Vec<u32> = (start..start + regions.len() as u32).collect();
        Self::new(EventKind::Pattern, regions, &times)
    }

    pub fn kind(&self) -> EventKind {
        self.kind
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn end(&self) -> u32 {
        self.start + self.regions.len() as u32 - 1
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = u32> {
        self.start..=self.end()
    }

    /// Number of cells of the map the event is defined on.
    pub fn m(&self) -> usize {
        self.regions[0].len()
    }

    /// Region active at timestamp `t`, if `t` lies in the window.
    pub fn region_at(&self, t: u32) -> Option<&Region> {
        if t < self.start {
            return None;
        }
        self.regions.get((t - self.start) as usize)
    }

    /// Evaluates the event on a trajectory (`trajectory[t - 1]` is `l_t`).
    pub fn evaluate(&self, trajectory: &[usize]) -> Result<bool> {
        let end = self.end();
        if trajectory.len() < end as usize {
            return Err(Error::MissingTimestamp(trajectory.len() as u32 + 1));
        }
        let m = self.m();
        let mut hits = self.times().zip(&self.regions).map(|(t, region)| {
            let cell = trajectory[t as usize - 1];
            if cell >= m {
                Err(Error::CellOutOfRange { cell, m })
            } else {
                Ok(region.contains(cell))
            }
        });
        match self.kind {
            EventKind::Presence => {
                let mut any = false;
                for h in hits.by_ref() {
                    any |= h?;
                }
                Ok(any)
            }
            EventKind::Pattern => {
                let mut all = true;
                for h in hits.by_ref() {
                    all &= h?;
                }
                Ok(all)
            }
        }
    }

    /// Renders the event as its Boolean formula over location-time predicates,
    /// with 1-based location names (`s1` is cell 0).
    pub fn to_expression(&self) -> String {
        let clause = |t: u32, region: &Region| {
            let mut s = String::new();
            for (k, cell) in region.cells().enumerate() {
                if k > 0 {
                    s.push('∨');
                }
                let _ = write!(s, "(l{t}=s{})", cell + 1);
            }
            s
        };
        match self.kind {
            EventKind::Presence => self
                .times()
                .zip(&self.regions)
                .map(|(t, r)| clause(t, r))
                .collect::<Vec<_>>()
                .join("∨"),
            EventKind::Pattern => {
                if self.regions.len() == 1 {
                    return clause(self.start, &self.regions[0]);
                }
                self.times()
                    .zip(&self.regions)
                    .map(|(t, r)| {
                        let c = clause(t, r);
                        if r.size() > 1 {
                            format!("({c})")
                        } else {
                            c
                        }
                    })
                    .collect::<Vec<_>>()
                    .join("∧")
            }
        }
    }

    pub fn to_spec(&self) -> EventSpec {
        EventSpec {
            kind: self.kind,
            times: self.times().collect(),
            regions: self.regions.iter().map(|r| r.cells().collect()).collect(),
        }
    }
}

/// On-disk event definition: `{kind, times, regions}` with regions given as
/// lists of 0-based cell indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: EventKind,
    pub times: Vec<u32>,
    pub regions: Vec<Vec<usize>>,
}

impl EventSpec {
    pub fn build(&self, m: usize) -> Result<Event> {
        let regions = self
            .regions
            .iter()
            .map(|cells| Region::from_cells(m, cells))
            .collect::<Result<Vec<_>>>()?;
        Event::new(self.kind, regions, &self.times)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(EventSpec),
    Many(Vec<EventSpec>),
}

/// Parses an event file holding one event object or an array of them.
pub fn parse_events(json: &str, m: usize) -> Result<Vec<Event>> {
    let specs = match serde_json::from_str::<OneOrMany>(json)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    };
    specs.iter().map(|s| s.build(m)).collect()
}

pub fn load_events(path: impl AsRef<Path>, m: usize) -> Result<Vec<Event>> {
    let text = std::fs::read_to_string(path)?;
    parse_events(&text, m)
}

pub fn write_events(path: impl AsRef<Path>, events: &[Event]) -> Result<()> {
    let specs: Vec<EventSpec> = events.iter().map(Event::to_spec).collect();
    std::fs::write(path, serde_json::to_string_pretty(&specs)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s12() -> Region {
        Region::from_mask(vec![true, true, false]).unwrap()
    }

    #[test]
    fn grid_index_roundtrip() {
        let map = GridMap::new(4, 3, 0.5).unwrap();
        assert_eq!(map.m(), 12);
        for i in 0..map.m() {
            let (r, c) = map.row_col(i);
            assert_eq!(map.index(r, c), i);
        }
        assert_eq!(map.row_col(5), (1, 1));
        assert!((map.distance(0, 5) - 0.5 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_maps_and_regions() {
        assert!(GridMap::new(0, 3, 1.0).is_err());
        assert!(GridMap::new(2, 3, 0.0).is_err());
        assert!(Region::from_mask(vec![false; 4]).is_err());
        assert!(matches!(
            Region::from_cells(3, &[3]),
            Err(Error::CellOutOfRange { cell: 3, m: 3 })
        ));
    }

    #[test]
    fn rejects_non_consecutive_and_zero_times() {
        let r = s12();
        assert!(Event::new(EventKind::Presence, vec![r.clone(), r.clone()], &[3, 5]).is_err());
        assert!(Event::new(EventKind::Presence, vec![r.clone()], &[0]).is_err());
        assert!(Event::new(EventKind::Pattern, vec![r.clone()], &[1, 2]).is_err());
        assert!(Event::new(EventKind::Pattern, vec![], &[]).is_err());
    }

    #[test]
    fn example_one_presence() {
        let e = Event::presence(s12(), 3, 4).unwrap();
        assert_eq!(e.to_expression(), "(l3=s1)∨(l3=s2)∨(l4=s1)∨(l4=s2)");
        // in s1 at t=3, outside at t=4
        assert!(e.evaluate(&[2, 2, 0, 2]).unwrap());
        assert!(e.evaluate(&[0, 0, 2, 1]).unwrap());
        assert!(!e.evaluate(&[0, 0, 2, 2]).unwrap());
    }

    #[test]
    fn example_two_pattern_expression() {
        let e = Event::pattern(vec![s12(), s12()], 2).unwrap();
        assert_eq!(e.to_expression(), "((l2=s1)∨(l2=s2))∧((l3=s1)∨(l3=s2))");
        assert!(e.evaluate(&[2, 0, 1]).unwrap());
        assert!(!e.evaluate(&[2, 0, 2]).unwrap());
    }

    #[test]
    fn single_location_event() {
        let e = Event::presence(Region::from_cells(5, &[3]).unwrap(), 7, 7).unwrap();
        assert_eq!(e.to_expression(), "(l7=s4)");
    }

    #[test]
    fn full_map_pattern_is_a_tautology() {
        let e = Event::pattern(vec![Region::full(4); 3], 2).unwrap();
        for traj in [[0, 1, 2, 3], [3, 3, 3, 3], [1, 0, 2, 1]] {
            assert!(e.evaluate(&traj).unwrap());
        }
    }

    #[test]
    fn missing_timestamp_and_bad_cell() {
        let e = Event::presence(s12(), 3, 4).unwrap();
        assert!(matches!(e.evaluate(&[0, 1, 2]), Err(Error::MissingTimestamp(4))));
        assert!(matches!(e.evaluate(&[0, 1, 7, 0]), Err(Error::CellOutOfRange { .. })));
    }

    #[test]
    fn json_roundtrip_and_single_object() {
        let e = Event::presence(s12(), 3, 4).unwrap();
        let json = serde_json::to_string(&e.to_spec()).unwrap();
        let parsed = parse_events(&json, 3).unwrap();
        assert_eq!(parsed, vec![e.clone()]);
        let list = format!("[{json},{json}]");
        assert_eq!(parse_events(&list, 3).unwrap().len(), 2);
        let raw = r#"{"kind":"pattern","times":[2,3],"regions":[[0,1],[1]]}"#;
        let p = &parse_events(raw, 3).unwrap()[0];
        assert_eq!(p.kind(), EventKind::Pattern);
        assert_eq!(p.end(), 3);
        assert!(p.region_at(3).unwrap().contains(1));
        assert!(!p.region_at(3).unwrap().contains(0));
        assert!(parse_events(r#"{"kind":"presence","times":[1],"regions":[[5]]}"#, 3).is_err());
    }
}
