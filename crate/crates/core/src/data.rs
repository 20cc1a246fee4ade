//! Dyadic data model: agents with covariates and outcomes on ordered pairs.
//!
//! Outcomes are stored only for observed ordered pairs `(i, j)` with `i != j`;
//! the diagonal is never represented, so no kernel sum can pick it up.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::pairwise_sum_by;

/// N agents with a K-dimensional covariate vector each (row-major storage).
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTable {
    ids: Vec<String>,
    covariates: Vec<f64>,
    dim: usize,
}

impl AgentTable {
    /// Builds a table with identifiers `"0".."N-1"`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::with_ids(ids, rows)
    }

    pub fn with_ids(ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::invalid(format!(
                "{} identifiers for {} covariate rows",
                ids.len(),
                rows.len()
            )));
        }
        if rows.len() < 2 {
            return Err(Error::invalid("at least two agents are required"));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::invalid("covariate dimension must be at least 1"));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid(format!("duplicate agent id {id:?}")));
            }
        }
        let mut covariates = Vec::with_capacity(rows.len() * dim);
        for (id, row) in ids.iter().zip(&rows) {
            if row.len() != dim {
                return Err(Error::invalid(format!(
                    "agent {id:?} has {} covariates, expected {dim}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("agent {id:?} has non-finite covariate {v}")));
            }
            covariates.extend_from_slice(row);
        }
        Ok(Self { ids, covariates, dim })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Covariate dimension K.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, agent: usize) -> &[f64] {
        &self.covariates[agent * self.dim..(agent + 1) * self.dim]
    }

    /// Arithmetic mean of each covariate coordinate.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.dim)
            .map(|k| (0..self.len()).map(|i| self.row(i)[k]).sum::<f64>() / n)
            .collect()
    }
}

/// Outcome on one observed ordered pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dyad {
    pub i: usize,
    pub j: usize,
    pub y: f64,
}

/// Agents plus outcomes on the observed ordered pairs.
///
/// Dyads are sorted by unordered pair, with `(i, j)` directly before `(j, i)`
/// for `i < j`. Kernel sums add the two directions of a pair first, so
/// swapping the roles of sender and receiver on a symmetric panel leaves
/// every sum bit-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadPanel {
    agents: AgentTable,
    dyads: Vec<Dyad>,
    // start offset of each unordered pair in `dyads`, plus a final `n`
    unit_starts: Vec<usize>,
    y_min: f64,
    y_max: f64,
}

impl DyadPanel {
    pub fn agents(&self) -> &AgentTable {
        &self.agents
    }

    pub fn dyads(&self) -> &[Dyad] {
        &self.dyads
    }

    /// Number of observed ordered pairs.
    pub fn n(&self) -> usize {
        self.dyads.len()
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn dim(&self) -> usize {
        self.agents.dim()
    }

    pub fn is_complete(&self) -> bool {
        let n_agents = self.agents.len();
        self.dyads.len() == n_agents * (n_agents - 1)
    }

    /// Smallest and largest observed outcome.
    pub fn outcome_range(&self) -> (f64, f64) {
        (self.y_min, self.y_max)
    }

    /// Pairwise sum of `term(k)` over all dyads, the two directions of each
    /// unordered pair added together first.
    pub fn sum_over_dyads<F: Fn(usize) -> f64>(&self, term: F) -> f64 {
        let starts = &self.unit_starts;
        pairwise_sum_by(starts.len() - 1, |u| {
            let (a, b) = (starts[u], starts[u + 1]);
            if b - a == 2 {
                term(a) + term(a + 1)
            } else {
                term(a)
            }
        })
    }
}

/// Assembles a panel from `(i, j, y)` records indexed by agent position.
pub fn build_panel(agents: AgentTable, records: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<DyadPanel> {
    let n_agents = agents.len();
    let mut dyads: Vec<Dyad> = Vec::new();
    for (i, j, y) in records {
        for id in [i, j] {
            if id >= n_agents {
                return Err(Error::UnknownAgent(id.to_string()));
            }
        }
        if i == j {
            return Err(Error::SelfLoop { agent: i.to_string() });
        }
        if !y.is_finite() {
            return Err(Error::invalid(format!("non-finite outcome {y} on dyad ({i}, {j})")));
        }
        dyads.push(Dyad { i, j, y });
    }
    finish_panel(agents, dyads)
}

fn finish_panel(agents: AgentTable, mut dyads: Vec<Dyad>) -> Result<DyadPanel> {
    if dyads.is_empty() {
        return Err(Error::invalid("panel has no dyads"));
    }
    dyads.sort_by_key(|d| (d.i.min(d.j), d.i.max(d.j), d.i > d.j));
    if let Some(w) = dyads.windows(2).find(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
        return Err(Error::DuplicateDyad { i: w[0].i, j: w[0].j });
    }
    let mut unit_starts = Vec::with_capacity(dyads.len() / 2 + 2);
    let mut k = 0;
    while k < dyads.len() {
        unit_starts.push(k);
        let reverse = dyads.get(k + 1).is_some_and(|d| d.i == dyads[k].j && d.j == dyads[k].i);
        k += if reverse { 2 } else { 1 };
    }
    unit_starts.push(dyads.len());
    let (y_min, y_max) = dyads.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
        (lo.min(d.y), hi.max(d.y))
    });
    Ok(DyadPanel {
        agents,
        dyads,
        unit_starts,
        y_min,
        y_max,
    })
}

/// Ordered selection of covariate coordinates forming a subvector W.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubvectorSpec {
    indices: Vec<usize>,
}

impl SubvectorSpec {
    pub fn new(indices: Vec<usize>, dim: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("subvector must select at least one coordinate"));
        }
        let mut seen = HashSet::new();
        for &k in &indices {
            if k >= dim {
                return Err(Error::invalid(format!(
                    "subvector index {k} out of range for dimension {dim}"
                )));
            }
            if !seen.insert(k) {
                return Err(Error::invalid(format!("subvector index {k} repeated")));
            }
        }
        Ok(Self { indices })
    }

    /// All K coordinates in their natural order.
    pub fn full(dim: usize) -> Self {
        Self {
            indices: (0..dim).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// d_W.
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn select(&self, x: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&k| x[k]).collect()
    }
}

/// W-coordinates of agent `agent`, in the order of `spec`.
pub fn subvector_values(panel: &DyadPanel, spec: &SubvectorSpec, agent: usize) -> Result<Vec<f64>> {
    if agent >= panel.num_agents() {
        return Err(Error::UnknownAgent(agent.to_string()));
    }
    if let Some(&k) = spec.indices().iter().find(|&&k| k >= panel.dim()) {
        return Err(Error::invalid(format!(
            "subvector index {k} out of range for dimension {}",
            panel.dim()
        )));
    }
    Ok(spec.select(panel.agents().row(agent)))
}

/// Split of the covariate coordinates into an X⁰ block and an X¹ block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    x0: Vec<usize>,
    x1: Vec<usize>,
}

impl Partition {
    pub fn new(x0: Vec<usize>, x1: Vec<usize>, dim: usize) -> Result<Self> {
        if x1.is_empty() {
            return Err(Error::invalid("X1 block must be nonempty"));
        }
        let mut seen = vec![false; dim];
        for &k in x0.iter().chain(&x1) {
            if k >= dim {
                return Err(Error::invalid(format!(
                    "partition index {k} out of range for dimension {dim}"
                )));
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::invalid(format!("partition index {k} used twice")));
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("coordinate {k} is in neither block")));
        }
        Ok(Self { x0, x1 })
    }

    /// Every coordinate in X¹, X⁰ empty.
    pub fn all_x1(dim: usize) -> Self {
        Self {
            x0: Vec::new(),
            x1: (0..dim).collect(),
        }
    }

    pub fn x0(&self) -> &[usize] {
        &self.x0
    }

    pub fn x1(&self) -> &[usize] {
        &self.x1
    }

    pub fn dim(&self) -> usize {
        self.x0.len() + self.x1.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridMode {
    #[default]
    Equispaced,
    UniformRandom,
}

/// Sorted grid of `count` points on `[lo, hi]`.
pub fn make_grid(lo: f64, hi: f64, count: usize, mode: GridMode, seed: u64) -> Result<Vec<f64>> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::BadRange { lo, hi });
    }
    if count == 0 {
        return Err(Error::invalid("grid needs at least one point"));
    }
    let grid = match mode {
        GridMode::Equispaced if count == 1 => vec![lo],
        GridMode::Equispaced => {
            let last = (count - 1) as f64;
            let mut g: Vec<f64> = (0..count).map(|k| lo + (hi - lo) * (k as f64 / last)).collect();
            g[count - 1] = hi;
            g
        }
        GridMode::UniformRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let law = Uniform::new_inclusive(lo, hi);
            let mut g: Vec<f64> = (0..count).map(|_| law.sample(&mut rng)).collect();
            g.sort_by(f64::total_cmp);
            g
        }
    };
    Ok(grid)
}

// ---------------------------------------------------------------------------
// CSV ingestion and emission

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::invalid(format!("cannot parse {what} {field:?} as a number")))
}

/// Reads `agent_id,x_1,...,x_K`.
pub fn read_agents<R: Read>(reader: R) -> Result<AgentTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || header.get(0).map(str::trim) != Some("agent_id") {
        return Err(Error::invalid("agents CSV header must be agent_id,x_1,...,x_K"));
    }
    let dim = header.len() - 1;
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = line_of(&record);
        let id = record[0].trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::invalid(format!("duplicate agent id {id:?}")).at_line(line));
        }
        let row = (1..=dim)
            .map(|k| parse_f64(&record[k], "covariate"))
            .collect::<Result<Vec<f64>>>()
            .map_err(|e| e.at_line(line))?;
        ids.push(id);
        rows.push(row);
    }
    AgentTable::with_ids(ids, rows)
}

/// Reads `i,j,y` records, resolving agent ids against `agents`.
pub fn read_dyads<R: Read>(reader: R, agents: AgentTable) -> Result<DyadPanel> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != ["i", "j", "y"] {
        return Err(Error::invalid("dyads CSV header must be i,j,y"));
    }
    let index: HashMap<&str, usize> = agents
        .ids()
        .iter()
        .enumerate()
        .map(|(k, id)| (id.as_str(), k))
        .collect();
    let mut dyads = Vec::new();
    let mut seen = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = line_of(&record);
        let lookup = |field: &str| {
            index
                .get(field.trim())
                .copied()
                .ok_or_else(|| Error::UnknownAgent(field.trim().to_string()).at_line(line))
        };
        let i = lookup(&record[0])?;
        let j = lookup(&record[1])?;
        if i == j {
            return Err(Error::SelfLoop {
                agent: record[0].trim().to_string(),
            }
            .at_line(line));
        }
        let y = parse_f64(&record[2], "outcome").map_err(|e| e.at_line(line))?;
        if !y.is_finite() {
            return Err(Error::invalid(format!("non-finite outcome {y}")).at_line(line));
        }
        if seen.insert((i, j), line).is_some() {
            return Err(Error::DuplicateDyad { i, j }.at_line(line));
        }
        dyads.push(Dyad { i, j, y });
    }
    drop(index);
    finish_panel(agents, dyads)
}

pub fn write_agents<W: Write>(writer: W, agents: &AgentTable) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["agent_id".to_string()];
    header.extend((1..=agents.dim()).map(|k| format!("x_{k}")));
    wtr.write_record(&header)?;
    for (i, id) in agents.ids().iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(agents.row(i).iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_dyads<W: Write>(writer: W, panel: &DyadPanel) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["i", "j", "y"])?;
    let ids = panel.agents().ids();
    for d in panel.dyads() {
        wtr.write_record([ids[d.i].as_str(), ids[d.j].as_str(), &d.y.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Loads a panel from an agents CSV and a dyads CSV on disk.
pub fn load_panel(agents_path: &Path, dyads_path: &Path) -> Result<DyadPanel> {
    let agents = read_agents(std::fs::File::open(agents_path)?)?;
    read_dyads(std::fs::File::open(dyads_path)?, agents)
}
