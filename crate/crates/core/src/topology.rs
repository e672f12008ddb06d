//! Feeder graph: buses, lines, shortest-path distances from the source,
//! distance zones and the ramification hierarchy.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bus record as stored in a topology file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_load: bool,
}

impl Bus {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            x: None,
            y: None,
            no_load: false,
        }
    }

    pub fn at(id: impl Into<String>, x: f64, y: f64) -> Self {
        Self {
            x: Some(x),
            y: Some(y),
            ..Self::new(id)
        }
    }
}

/// Line record as stored in a topology file; endpoints are bus ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineRecord {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length_km: f64,
}

/// On-disk topology document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyFile {
    pub source: String,
    pub buses: Vec<Bus>,
    pub lines: Vec<LineRecord>,
}

/// A line with resolved endpoint indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub length_km: f64,
}

/// Immutable feeder graph. Buses and lines are addressed by their position
/// in the input; ids are unique and line lengths strictly positive.
#[derive(Debug, Clone)]
pub struct NetworkTopology {
    buses: Vec<Bus>,
    lines: Vec<Line>,
    source: usize,
    adjacency: Vec<Vec<(usize, usize)>>,
    bus_index: HashMap<String, usize>,
}

impl NetworkTopology {
    pub fn new(buses: Vec<Bus>, lines: Vec<LineRecord>, source: &str) -> Result<Self> {
        if buses.is_empty() {
            return Err(Error::Topology("no buses".into()));
        }
        let mut bus_index = HashMap::with_capacity(buses.len());
        for (i, bus) in buses.iter().enumerate() {
            if bus_index.insert(bus.id.clone(), i).is_some() {
                return Err(Error::Topology(format!("duplicate bus id `{}`", bus.id)));
            }
        }
        let source = *bus_index
            .get(source)
            .ok_or_else(|| Error::Topology(format!("source bus `{source}` not found")))?;

        let mut line_ids = HashSet::with_capacity(lines.len());
        let mut resolved = Vec::with_capacity(lines.len());
        let mut adjacency = vec![Vec::new(); buses.len()];
        for rec in lines {
            if !line_ids.insert(rec.id.clone()) {
                return Err(Error::Topology(format!("duplicate line id `{}`", rec.id)));
            }
            if !(rec.length_km.is_finite() && rec.length_km > 0.0) {
                return Err(Error::Topology(format!(
                    "line `{}` has non-positive length {}",
                    rec.id, rec.length_km
                )));
            }
            let lookup = |id: &str| {
                bus_index
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::Topology(format!("line `{}` references unknown bus `{id}`", rec.id)))
            };
            let from = lookup(&rec.from)?;
            let to = lookup(&rec.to)?;
            if from == to {
                return Err(Error::Topology(format!("line `{}` is a self-loop", rec.id)));
            }
            let li = resolved.len();
            adjacency[from].push((to, li));
            adjacency[to].push((from, li));
            resolved.push(Line {
                id: rec.id,
                from,
                to,
                length_km: rec.length_km,
            });
        }
        Ok(Self {
            buses,
            lines: resolved,
            source,
            adjacency,
            bus_index,
        })
    }

    pub fn from_file_struct(file: TopologyFile) -> Result<Self> {
        Self::new(file.buses, file.lines, &file.source)
    }

    pub fn to_file_struct(&self) -> TopologyFile {
        TopologyFile {
            source: self.buses[self.source].id.clone(),
            buses: self.buses.clone(),
            lines: self
                .lines
                .iter()
                .map(|l| LineRecord {
                    id: l.id.clone(),
                    from: self.buses[l.from].id.clone(),
                    to: self.buses[l.to].id.clone(),
                    length_km: l.length_km,
                })
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: TopologyFile = serde_json::from_str(&text)
            .map_err(|e| Error::Topology(format!("{}: {e}", path.display())))?;
        Self::from_file_struct(file)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file_struct())?)
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.bus_index.get(id).copied()
    }

    /// `(neighbor, line)` pairs incident to `bus`.
    pub fn neighbors(&self, bus: usize) -> &[(usize, usize)] {
        &self.adjacency[bus]
    }

    pub fn degree(&self, bus: usize) -> usize {
        self.adjacency[bus].len()
    }

    /// A connected graph with exactly `|V| - 1` lines.
    pub fn is_radial(&self) -> bool {
        self.lines.len() + 1 == self.buses.len() && self.reachable_count() == self.buses.len()
    }

    pub fn require_radial(&self) -> Result<()> {
        if self.is_radial() {
            Ok(())
        } else {
            Err(Error::NotRadial {
                buses: self.buses.len(),
                lines: self.lines.len(),
            })
        }
    }

    fn reachable_count(&self) -> usize {
        let mut seen = vec![false; self.buses.len()];
        let mut stack = vec![self.source];
        seen[self.source] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(w, _) in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count
    }
}

/// How path length is measured when binning buses into zones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    /// Sum of line lengths in km.
    #[default]
    Kilometers,
    /// Number of lines on the path.
    Hops,
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    bus: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (dist, bus)
        other.dist.total_cmp(&self.dist).then_with(|| other.bus.cmp(&self.bus))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path tree rooted at the source.
#[derive(Debug, Clone)]
pub struct ShortestPaths {
    /// Path length per bus under the chosen metric.
    pub distance: Vec<f64>,
    /// Path length per bus in km along the selected shortest path.
    pub distance_km: Vec<f64>,
    /// Predecessor bus on the shortest path (None for the source).
    pub parent: Vec<Option<usize>>,
    /// Line connecting each bus to its predecessor.
    pub parent_line: Vec<Option<usize>>,
    /// Buses sorted by (distance, index); parents precede children.
    pub order: Vec<usize>,
}

impl ShortestPaths {
    /// The endpoint of `line` nearer the source; ties go to the smaller index.
    pub fn upstream_endpoint(&self, line: &Line) -> usize {
        let (a, b) = (line.from, line.to);
        match self.distance[a].total_cmp(&self.distance[b]) {
            Ordering::Less => a,
            Ordering::Greater => b,
            Ordering::Equal => a.min(b),
        }
    }

    pub fn downstream_endpoint(&self, line: &Line) -> usize {
        let up = self.upstream_endpoint(line);
        if up == line.from { line.to } else { line.from }
    }

    /// Distances keyed by bus id.
    pub fn by_id(&self, topology: &NetworkTopology) -> HashMap<String, f64> {
        topology
            .buses()
            .iter()
            .zip(&self.distance)
            .map(|(b, &d)| (b.id.clone(), d))
            .collect()
    }
}

/// Dijkstra from the source. Equal-length alternatives resolve to the
/// predecessor with the smaller index so the tree is deterministic.
pub fn compute_distances(topology: &NetworkTopology, metric: DistanceMetric) -> Result<ShortestPaths> {
    let n = topology.bus_count();
    let mut distance = vec![f64::INFINITY; n];
    let mut distance_km = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut parent_line: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();

    let src = topology.source();
    distance[src] = 0.0;
    distance_km[src] = 0.0;
    heap.push(Candidate { dist: 0.0, bus: src });

    while let Some(Candidate { dist, bus }) = heap.pop() {
        if done[bus] {
            continue;
        }
        done[bus] = true;
        for &(next, li) in topology.neighbors(bus) {
            if done[next] {
                continue;
            }
            let line = &topology.lines()[li];
            let step = match metric {
                DistanceMetric::Kilometers => line.length_km,
                DistanceMetric::Hops => 1.0,
            };
            let cand = dist + step;
            let better = cand < distance[next]
                || (cand == distance[next] && parent[next].is_some_and(|p| bus < p));
            if better {
                distance[next] = cand;
                distance_km[next] = distance_km[bus] + line.length_km;
                parent[next] = Some(bus);
                parent_line[next] = Some(li);
                heap.push(Candidate { dist: cand, bus: next });
            }
        }
    }

    let unreachable: Vec<String> = (0..n)
        .filter(|&v| !done[v])
        .map(|v| topology.buses()[v].id.clone())
        .collect();
    if !unreachable.is_empty() {
        return Err(Error::Disconnected(unreachable));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| distance[a].total_cmp(&distance[b]).then(a.cmp(&b)));
    Ok(ShortestPaths {
        distance,
        distance_km,
        parent,
        parent_line,
        order,
    })
}

/// Equal-frequency zones over bus distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneAssignment {
    pub zone_count: usize,
    /// Interior bin edges after merging duplicates; zone `k` (1-based) covers
    /// `[edges[k-2], edges[k-1])` with open ends at the extremes.
    pub edges: Vec<f64>,
    pub bus_zone: Vec<usize>,
    pub line_zone: Vec<usize>,
    pub bus_distance: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ZoneAssignment {
    /// Number of zones that can hold buses after degenerate bins were merged.
    pub fn effective_zone_count(&self) -> usize {
        self.edges.len() + 1
    }

    /// Zone (1-based) for a distance under these bin edges.
    pub fn zone_of(&self, distance: f64) -> usize {
        1 + self.edges.iter().filter(|&&e| e <= distance).count()
    }

    /// Half-open interval `[lo, hi)` covered by `zone` (1-based).
    pub fn bounds(&self, zone: usize) -> (f64, f64) {
        let lo = if zone == 1 { f64::NEG_INFINITY } else { self.edges[zone - 2] };
        let hi = self.edges.get(zone - 1).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bin buses into `zone_count` quantile zones of their distance; each line
/// takes the zone of its upstream endpoint.
///
/// Bins that would be empty because quantiles coincide are merged into the
/// zone below and reported in `warnings`; the zone count itself is kept so
/// fitted models stay compatible.
pub fn assign_zones(
    topology: &NetworkTopology,
    paths: &ShortestPaths,
    zone_count: usize,
) -> Result<ZoneAssignment> {
    if zone_count == 0 {
        return Err(Error::Parameter("zone count must be >= 1".into()));
    }
    let mut sorted = paths.distance.clone();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];

    let mut edges: Vec<f64> = Vec::with_capacity(zone_count.saturating_sub(1));
    for k in 1..zone_count {
        let q = quantile(&sorted, k as f64 / zone_count as f64);
        if q > min && edges.last().is_none_or(|&last| q > last) {
            edges.push(q);
        }
    }
    let mut warnings = Vec::new();
    if edges.len() + 1 < zone_count {
        warnings.push(format!(
            "degenerate binning: {} distinct distances support only {} of {} zones; upper zones are empty",
            {
                let mut d = sorted.clone();
                d.dedup();
                d.len()
            },
            edges.len() + 1,
            zone_count
        ));
    }

    let mut zones = ZoneAssignment {
        zone_count,
        edges,
        bus_zone: Vec::new(),
        line_zone: Vec::new(),
        bus_distance: paths.distance.clone(),
        warnings,
    };
    zones.bus_zone = paths.distance.iter().map(|&d| zones.zone_of(d)).collect();
    zones.line_zone = topology
        .lines()
        .iter()
        .map(|l| zones.bus_zone[paths.upstream_endpoint(l)])
        .collect();
    Ok(zones)
}

/// Branch points of the feeder and their parent links.
#[derive(Debug, Clone, PartialEq)]
pub struct RamificationHierarchy {
    /// Source plus every bus of degree > 2, parents before children.
    pub ramification: Vec<usize>,
    /// `Pa(r)` for ramification buses other than the source.
    pub parent: Vec<Option<usize>>,
    /// For every non-ramification bus, the closest ramification bus on its
    /// path to the source.
    pub nearest: Vec<Option<usize>>,
    is_ramification: Vec<bool>,
}

impl RamificationHierarchy {
    pub fn is_ramification(&self, bus: usize) -> bool {
        self.is_ramification[bus]
    }

    /// The ramification bus whose phase `bus` carries: itself if it is one,
    /// else its nearest upstream ramification bus.
    pub fn governing(&self, bus: usize) -> usize {
        if self.is_ramification[bus] {
            bus
        } else {
            self.nearest[bus].expect("non-ramification bus without upstream ramification")
        }
    }
}

pub fn build_hierarchy(topology: &NetworkTopology, paths: &ShortestPaths) -> RamificationHierarchy {
    let n = topology.bus_count();
    let src = topology.source();
    let is_ramification: Vec<bool> = (0..n).map(|v| v == src || topology.degree(v) > 2).collect();

    // Closest ramification bus strictly upstream of each bus.
    let mut upstream: Vec<Option<usize>> = vec![None; n];
    for &v in &paths.order {
        if let Some(p) = paths.parent[v] {
            upstream[v] = if is_ramification[p] { Some(p) } else { upstream[p] };
        }
    }

    let ramification: Vec<usize> = paths.order.iter().copied().filter(|&v| is_ramification[v]).collect();
    let parent = (0..n)
        .map(|v| if is_ramification[v] && v != src { upstream[v] } else { None })
        .collect();
    let nearest = (0..n)
        .map(|v| if is_ramification[v] { None } else { upstream[v] })
        .collect();
    RamificationHierarchy {
        ramification,
        parent,
        nearest,
        is_ramification,
    }
}

/// Topology with its derived structures, ready for sampling.
#[derive(Debug, Clone)]
pub struct Feeder {
    pub topology: NetworkTopology,
    pub paths: ShortestPaths,
    pub zones: ZoneAssignment,
    pub hierarchy: RamificationHierarchy,
}

impl Feeder {
    pub fn analyze(topology: NetworkTopology, zone_count: usize, metric: DistanceMetric) -> Result<Self> {
        let paths = compute_distances(&topology, metric)?;
        let zones = assign_zones(&topology, &paths, zone_count)?;
        let hierarchy = build_hierarchy(&topology, &paths);
        Ok(Self {
            topology,
            paths,
            zones,
            hierarchy,
        })
    }

    /// Downstream bus of each line (the bus the line feeds).
    pub fn line_downstream(&self, line: usize) -> usize {
        self.paths.downstream_endpoint(&self.topology.lines()[line])
    }

    pub fn line_upstream(&self, line: usize) -> usize {
        self.paths.upstream_endpoint(&self.topology.lines()[line])
    }
}
