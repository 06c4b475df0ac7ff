//! Plot-ready output files.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! profile written here reads back bit-for-bit and identical runs produce
//! identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use netgame::{LearningProfile, NetworkWeights, RunTrace, StrategyProfile};
use serde_json::{Map, Value};

use crate::config::ConfigError;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub struct OutputDir {
    root: PathBuf,
    events: Vec<String>,
    summary: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), events: Vec::new(), summary: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Appends a `key = value` line to `summary.txt`.
    pub fn summary(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    /// Appends one JSON object to `events.jsonl`.
    pub fn event(&mut self, kind: &str, fields: Value) {
        let mut obj = Map::new();
        obj.insert("event".into(), Value::from(kind));
        if let Value::Object(extra) = fields {
            obj.extend(extra);
        }
        self.events.push(Value::Object(obj).to_string());
    }

    pub fn write_network(&self, net: &NetworkWeights) -> io::Result<()> {
        let n = net.n_players();
        let mut out = String::from("node");
        for j in 0..n {
            write!(out, ",m{j}").unwrap();
        }
        out.push('\n');
        for i in 0..n {
            out.push_str(&i.to_string());
            for j in 0..n {
                write!(out, ",{}", net.weight(i, j)).unwrap();
            }
            out.push('\n');
        }
        fs::write(self.path("network.csv"), out)
    }

    /// `player,u0..u{d-1},m0..m{n-1}`; the link columns include the zero diagonal.
    pub fn write_profile(&self, s: &StrategyProfile) -> io::Result<()> {
        fs::write(self.path("profile.csv"), profile_csv(s))
    }

    pub fn write_trace(&self, trace: &RunTrace) -> io::Result<()> {
        let n_costs = trace.records().iter().map(|r| r.costs.len()).max().unwrap_or(0);
        let mut out = String::from("iteration,layer,round,potential,welfare,max_delta,primal_residual,dual_residual,distance_to_reference");
        for i in 0..n_costs {
            write!(out, ",cost{i}").unwrap();
        }
        out.push('\n');
        for r in trace.records() {
            write!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.iteration,
                r.layer.as_str(),
                r.round,
                opt(r.potential),
                opt(r.welfare),
                r.max_delta,
                opt(r.primal_residual),
                opt(r.dual_residual),
                opt(r.distance_to_reference)
            )
            .unwrap();
            for i in 0..n_costs {
                write!(out, ",{}", opt(r.costs.get(i).copied())).unwrap();
            }
            out.push('\n');
        }
        fs::write(self.path("trace.csv"), out)
    }

    /// Writes any headered table of numbers.
    pub fn write_table(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
        let mut out = header.join(",");
        out.push('\n');
        for row in rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        fs::write(self.path(name), out)
    }

    /// Flushes `summary.txt` and `events.jsonl`.
    pub fn finish(self) -> io::Result<()> {
        let mut summary = String::new();
        for (k, v) in &self.summary {
            writeln!(summary, "{k} = {v}").unwrap();
        }
        fs::write(self.path("summary.txt"), summary)?;
        let mut events = self.events.join("\n");
        if !events.is_empty() {
            events.push('\n');
        }
        fs::write(self.path("events.jsonl"), events)
    }
}

pub fn profile_csv(s: &StrategyProfile) -> String {
    let (n, d) = (s.n_players(), s.learning.dim());
    let mut out = String::from("player");
    for k in 0..d {
        write!(out, ",u{k}").unwrap();
    }
    for j in 0..n {
        write!(out, ",m{j}").unwrap();
    }
    out.push('\n');
    for i in 0..n {
        out.push_str(&i.to_string());
        for x in s.learning.row(i).iter() {
            write!(out, ",{x}").unwrap();
        }
        for j in 0..n {
            write!(out, ",{}", s.network.weight(i, j)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Reads a profile written by [`profile_csv`] for an `n`-player, `d`-dimensional game.
pub fn read_profile(path: &Path, n: usize, d: usize) -> Result<StrategyProfile, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read profile {}: {e}", path.display())))?;
    let fail = |msg: String| ConfigError(format!("profile {}: {msg}", path.display()));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| fail("empty file".into()))?.split(',').map(str::trim).collect();
    if header.len() != 1 + d + n {
        return Err(fail(format!("expected {} columns for {n} players in dimension {d}, found {}", 1 + d + n, header.len())));
    }
    let mut learning = Vec::with_capacity(n);
    let mut links = Vec::with_capacity(n);
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let values = cells[1..]
            .iter()
            .map(|c| c.parse::<f64>().map_err(|e| fail(format!("row {i}: {c:?}: {e}"))))
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() != d + n {
            return Err(fail(format!("row {i} has {} values", values.len())));
        }
        learning.push(DVector::from_column_slice(&values[..d]));
        links.push((0..n).filter(|&j| j != i).map(|j| values[d + j]).collect::<Vec<f64>>());
    }
    if learning.len() != n {
        return Err(fail(format!("expected {n} rows, found {}", learning.len())));
    }
    Ok(StrategyProfile { learning: LearningProfile::from_rows(learning), network: NetworkWeights::from_rows(&links) })
}
