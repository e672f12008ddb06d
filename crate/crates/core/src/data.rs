//! Reference attribute tables (CSV) and atomic file output.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::PhaseConfig;
use crate::topology::NetworkTopology;

pub const BUS_COLUMNS: [&str; 5] = ["bus_id", "phase", "p_a_kw", "p_b_kw", "p_c_kw"];
pub const RELIABILITY_COLUMNS: [&str; 3] = ["bus_id", "caidi_hours", "caifi_count"];
pub const LINE_COLUMNS: [&str; 3] = ["line_id", "r1_ohm_per_km", "x1_ohm_per_km"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadRow {
    pub bus: usize,
    pub p_kw: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRow {
    pub bus: usize,
    pub caidi_hours: Option<f64>,
    pub caifi_count: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineRow {
    pub line: usize,
    pub r1_ohm_per_km: f64,
    pub x1_ohm_per_km: f64,
}

/// Observed attributes of a reference feeder, indexed against its topology.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingData {
    /// Observed configuration per bus; `None` where unknown.
    pub phases: Vec<Option<PhaseConfig>>,
    pub loads: Vec<LoadRow>,
    /// `None` when no reliability table was supplied.
    pub reliability: Option<Vec<ReliabilityRow>>,
    pub lines: Vec<LineRow>,
}

impl TrainingData {
    /// Read the bus and line tables and, if given, the reliability table.
    pub fn load(topology: &NetworkTopology, buses: &Path, lines: &Path, reliability: Option<&Path>) -> Result<Self> {
        let (phases, loads) = read_buses(buses, topology)?;
        Ok(Self {
            phases,
            loads,
            reliability: reliability.map(|p| read_reliability(p, topology)).transpose()?,
            lines: read_lines(lines, topology)?,
        })
    }
}

struct Table {
    file: PathBuf,
    columns: Vec<usize>,
    reader: csv::Reader<std::fs::File>,
}

struct Row<'a> {
    file: &'a Path,
    line: u64,
    record: csv::StringRecord,
    columns: &'a [usize],
    names: &'a [&'a str],
}

impl Row<'_> {
    fn err(&self, field: &str, message: impl Into<String>) -> Error {
        Error::Ingest {
            file: self.file.to_path_buf(),
            line: self.line,
            field: field.into(),
            message: message.into(),
        }
    }

    fn raw(&self, k: usize) -> &str {
        self.record.get(self.columns[k]).unwrap_or("").trim()
    }

    fn opt_f64(&self, k: usize) -> Result<Option<f64>> {
        let s = self.raw(k);
        if s.is_empty() {
            return Ok(None);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ => Err(self.err(self.names[k], format!("{s:?} is not a finite number"))),
        }
    }

    fn f64(&self, k: usize) -> Result<f64> {
        self.opt_f64(k)?.ok_or_else(|| self.err(self.names[k], "missing value"))
    }
}

impl Table {
    fn open(path: &Path, names: &[&str]) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::Ingest {
            file: path.to_path_buf(),
            line: 0,
            field: String::new(),
            message: e.to_string(),
        })?;
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
        let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
        let columns = names
            .iter()
            .map(|n| {
                headers.iter().position(|h| h.trim() == *n).ok_or_else(|| Error::Ingest {
                    file: path.to_path_buf(),
                    line: 1,
                    field: (*n).into(),
                    message: "missing column".into(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            file: path.to_path_buf(),
            columns,
            reader,
        })
    }

    fn for_each<'n>(mut self, names: &'n [&'n str], mut f: impl FnMut(&Row<'_>) -> Result<()>) -> Result<()> {
        for rec in self.reader.records() {
            let record = rec.map_err(|e| csv_err(&self.file, e))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.iter().all(|s| s.trim().is_empty()) {
                continue;
            }
            f(&Row {
                file: &self.file,
                line,
                record,
                columns: &self.columns,
                names,
            })?;
        }
        Ok(())
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Ingest {
        file: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line()),
        field: String::new(),
        message: e.to_string(),
    }
}

fn lookup(row: &Row<'_>, index: Option<usize>, field: &str, seen: &mut HashMap<usize, u64>) -> Result<usize> {
    let id = row.raw(0);
    let i = index.ok_or_else(|| row.err(field, format!("unknown id {id:?}")))?;
    if let Some(first) = seen.insert(i, row.line) {
        return Err(row.err(field, format!("duplicate id {id:?} (first on line {first})")));
    }
    Ok(i)
}

/// Bus table: a blank `phase` marks an unobserved bus, and blank power
/// columns mark a bus whose demand is unknown. Rows for `no_load` buses keep
/// their phases but never contribute demand.
pub fn read_buses(path: &Path, topology: &NetworkTopology) -> Result<(Vec<Option<PhaseConfig>>, Vec<LoadRow>)> {
    let mut phases = vec![None; topology.bus_count()];
    let mut loads = Vec::new();
    let mut seen = HashMap::new();
    Table::open(path, &BUS_COLUMNS)?.for_each(&BUS_COLUMNS, |row| {
        let bus = lookup(row, topology.bus_index(row.raw(0)), "bus_id", &mut seen)?;
        let label = row.raw(1);
        if label.is_empty() {
            return Ok(());
        }
        let config: PhaseConfig = label
            .parse()
            .map_err(|_| row.err("phase", format!("{label:?} is not a phase configuration")))?;
        phases[bus] = Some(config);
        let values = [row.opt_f64(2)?, row.opt_f64(3)?, row.opt_f64(4)?];
        if values.iter().all(Option::is_none) || topology.buses()[bus].no_load {
            return Ok(());
        }
        let active = config.phases();
        let mut p = [0.0; 3];
        for j in 0..3 {
            let v = values[j].unwrap_or(0.0);
            if v < 0.0 {
                return Err(row.err(BUS_COLUMNS[2 + j], format!("negative demand {v}")));
            }
            if !active[j] && v != 0.0 {
                return Err(row.err(BUS_COLUMNS[2 + j], format!("{v} kW on a phase absent from {config}")));
            }
            if active[j] && values[j].is_none() {
                return Err(row.err(BUS_COLUMNS[2 + j], "missing value on an active phase"));
            }
            p[j] = v;
        }
        loads.push(LoadRow { bus, p_kw: p });
        Ok(())
    })?;
    Ok((phases, loads))
}

pub fn read_reliability(path: &Path, topology: &NetworkTopology) -> Result<Vec<ReliabilityRow>> {
    let mut rows = Vec::new();
    let mut seen = HashMap::new();
    Table::open(path, &RELIABILITY_COLUMNS)?.for_each(&RELIABILITY_COLUMNS, |row| {
        let bus = lookup(row, topology.bus_index(row.raw(0)), "bus_id", &mut seen)?;
        let caidi = row.opt_f64(1)?;
        if let Some(v) = caidi {
            if v < 0.0 {
                return Err(row.err("caidi_hours", format!("duration {v} must be >= 0")));
            }
        }
        let caifi = match row.raw(2) {
            "" => None,
            s => Some(
                s.parse::<u64>()
                    .map_err(|_| row.err("caifi_count", format!("{s:?} is not a non-negative integer")))?,
            ),
        };
        rows.push(ReliabilityRow {
            bus,
            caidi_hours: caidi,
            caifi_count: caifi,
        });
        Ok(())
    })?;
    Ok(rows)
}

pub fn read_lines(path: &Path, topology: &NetworkTopology) -> Result<Vec<LineRow>> {
    let index: HashMap<&str, usize> = topology.lines().iter().enumerate().map(|(i, l)| (l.id.as_str(), i)).collect();
    let mut rows = Vec::new();
    let mut seen = HashMap::new();
    Table::open(path, &LINE_COLUMNS)?.for_each(&LINE_COLUMNS, |row| {
        let line = lookup(row, index.get(row.raw(0)).copied(), "line_id", &mut seen)?;
        let r1 = row.f64(1)?;
        let x1 = row.f64(2)?;
        if r1 <= 0.0 {
            return Err(row.err("r1_ohm_per_km", format!("resistance {r1} must be > 0")));
        }
        if x1 <= 0.0 {
            return Err(row.err("x1_ohm_per_km", format!("reactance {x1} must be > 0")));
        }
        rows.push(LineRow {
            line,
            r1_ohm_per_km: r1,
            x1_ohm_per_km: x1,
        });
        Ok(())
    })?;
    Ok(rows)
}

/// Write `bytes` to `path` through a temporary file in the same directory, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}
