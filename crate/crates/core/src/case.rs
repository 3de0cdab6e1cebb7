//! Network case model: MATPOWER-style case parsing, validation, serialization
//! and bus admittance matrix construction.
//!
//! Angles are converted from degrees to radians and bus shunts from MW/MVAr
//! (at 1 p.u. voltage) to per-unit at the parse boundary. Everything inside
//! the crate works in per-unit and radians.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::state::StateVector;

/// The IEEE 14-bus test case shipped with the crate.
pub const IEEE14_CASE: &str = include_str!("../data/case14.m");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseError {
    #[error("syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid case: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusType {
    Pq,
    Pv,
    Slack,
}

impl BusType {
    fn from_code(code: f64) -> Option<Self> {
        match code as i64 {
            1 if code.fract() == 0.0 => Some(BusType::Pq),
            2 if code.fract() == 0.0 => Some(BusType::Pv),
            3 if code.fract() == 0.0 => Some(BusType::Slack),
            _ => None,
        }
    }

    fn code(self) -> u8 {
        match self {
            BusType::Pq => 1,
            BusType::Pv => 2,
            BusType::Slack => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: u32,
    pub bus_type: BusType,
    /// Voltage magnitude, p.u.
    pub vm: f64,
    /// Voltage angle, radians.
    pub va: f64,
    /// Shunt conductance, p.u.
    pub gs: f64,
    /// Shunt susceptance, p.u.
    pub bs: f64,
    pub base_kv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchStatus {
    InService,
    OutOfService,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from_bus: u32,
    pub to_bus: u32,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance, p.u.
    pub b_charging: f64,
    /// Off-nominal turns ratio; 1.0 for a plain line.
    pub tap: f64,
    /// Phase shift, radians.
    pub shift: f64,
    pub status: BranchStatus,
}

impl Branch {
    pub fn in_service(&self) -> bool {
        self.status == BranchStatus::InService
    }
}

/// A validated network. Bus order is the canonical state ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    base_mva: f64,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    index: BTreeMap<u32, usize>,
}

impl NetworkCase {
    pub fn new(base_mva: f64, buses: Vec<Bus>, branches: Vec<Branch>) -> Result<Self, CaseError> {
        let invalid = |msg: String| Err(CaseError::Validation(msg));
        if !(base_mva > 0.0) {
            return invalid(format!("baseMVA must be positive, got {base_mva}"));
        }
        let mut index = BTreeMap::new();
        for (pos, bus) in buses.iter().enumerate() {
            if bus.id == 0 {
                return invalid("bus id 0 is not allowed".into());
            }
            if index.insert(bus.id, pos).is_some() {
                return invalid(format!("duplicate bus id {}", bus.id));
            }
            if !(bus.vm > 0.0) {
                return invalid(format!("bus {} has non-positive voltage magnitude {}", bus.id, bus.vm));
            }
        }
        let slacks: Vec<u32> = buses
            .iter()
            .filter(|b| b.bus_type == BusType::Slack)
            .map(|b| b.id)
            .collect();
        match slacks.len() {
            0 => return invalid("no slack bus".into()),
            1 => {}
            _ => return invalid(format!("multiple slack buses: {slacks:?}")),
        }
        for (k, br) in branches.iter().enumerate() {
            for end in [br.from_bus, br.to_bus] {
                if !index.contains_key(&end) {
                    return invalid(format!("branch {} references unknown bus {}", k + 1, end));
                }
            }
            if br.from_bus == br.to_bus {
                return invalid(format!("branch {} connects bus {} to itself", k + 1, br.from_bus));
            }
            if br.in_service() && br.x == 0.0 {
                return invalid(format!(
                    "branch {} ({}-{}) has zero reactance",
                    k + 1,
                    br.from_bus,
                    br.to_bus
                ));
            }
            if !(br.tap > 0.0) {
                return invalid(format!("branch {} has non-positive tap {}", k + 1, br.tap));
            }
        }
        Ok(Self { base_mva, buses, branches, index })
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    /// Canonical position of a bus id.
    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.bus_type == BusType::Slack)
            .expect("validated case has a slack bus")
    }

    /// Index of the in-service branch joining `a` and `b` in either direction,
    /// with `true` when it is stored as `a -> b`.
    pub fn find_branch(&self, a: u32, b: u32) -> Option<(usize, bool)> {
        self.branches.iter().enumerate().find_map(|(k, br)| {
            if !br.in_service() {
                None
            } else if br.from_bus == a && br.to_bus == b {
                Some((k, true))
            } else if br.from_bus == b && br.to_bus == a {
                Some((k, false))
            } else {
                None
            }
        })
    }

    /// Write the case back in the supported grammar. Parsing the output
    /// reproduces this case exactly.
    pub fn to_matpower(&self) -> String {
        let base = self.base_mva;
        let mut out = String::new();
        let _ = writeln!(out, "function mpc = case_export");
        let _ = writeln!(out, "mpc.baseMVA = {base};");
        let _ = writeln!(out, "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin");
        let _ = writeln!(out, "mpc.bus = [");
        for bus in &self.buses {
            let gs = invert_exact(bus.gs, |v| v / base, bus.gs * base);
            let bs = invert_exact(bus.bs, |v| v / base, bus.bs * base);
            let va = invert_exact(bus.va, f64::to_radians, bus.va.to_degrees());
            let _ = writeln!(
                out,
                "\t{}\t{}\t0\t0\t{}\t{}\t1\t{}\t{}\t{}\t1\t1.1\t0.9;",
                bus.id,
                bus.bus_type.code(),
                gs,
                bs,
                bus.vm,
                va,
                bus.base_kv
            );
        }
        let _ = writeln!(out, "];");
        let _ = writeln!(out, "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus");
        let _ = writeln!(out, "mpc.branch = [");
        for br in &self.branches {
            let shift = invert_exact(br.shift, f64::to_radians, br.shift.to_degrees());
            let status = u8::from(br.in_service());
            let _ = writeln!(
                out,
                "\t{}\t{}\t{}\t{}\t{}\t0\t0\t0\t{}\t{}\t{};",
                br.from_bus, br.to_bus, br.r, br.x, br.b_charging, br.tap, shift, status
            );
        }
        let _ = writeln!(out, "];");
        out
    }
}

/// Find a value `v` near `guess` with `forward(v) == target` bit for bit, so
/// unit conversions survive a write/parse cycle. Falls back to `guess`.
fn invert_exact(target: f64, forward: impl Fn(f64) -> f64, guess: f64) -> f64 {
    if forward(guess) == target {
        return guess;
    }
    let mut lo = guess;
    let mut hi = guess;
    for _ in 0..64 {
        lo = lo.next_down();
        hi = hi.next_up();
        if forward(lo) == target {
            return lo;
        }
        if forward(hi) == target {
            return hi;
        }
    }
    guess
}

/// A non-fatal note produced while parsing, e.g. a skipped block.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

/// Parse a case and log any warnings.
pub fn parse_case(text: &str) -> Result<NetworkCase, CaseError> {
    let (case, warnings) = parse_case_with_warnings(text)?;
    for w in &warnings {
        log::warn!("line {}: {}", w.line, w.message);
    }
    Ok(case)
}

/// The built-in IEEE 14-bus case.
pub fn ieee14() -> NetworkCase {
    parse_case_with_warnings(IEEE14_CASE)
        .expect("bundled case14 parses")
        .0
}

struct Row {
    line: usize,
    values: Vec<f64>,
}

pub fn parse_case_with_warnings(text: &str) -> Result<(NetworkCase, Vec<ParseWarning>), CaseError> {
    let mut warnings = Vec::new();
    let mut base_mva: Option<f64> = None;
    let mut bus_rows: Option<Vec<Row>> = None;
    let mut branch_rows: Option<Vec<Row>> = None;

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l)));
    while let Some((line_no, line)) = lines.next() {
        let stmt = line.trim();
        if stmt.is_empty() || stmt.starts_with("function") {
            continue;
        }
        let Some((lhs, rhs)) = stmt.split_once('=') else {
            return Err(CaseError::Syntax { line: line_no, message: format!("unexpected statement `{stmt}`") });
        };
        let name = lhs.trim();
        let name = name.strip_prefix("mpc.").unwrap_or(name);
        let rhs = rhs.trim();
        if let Some(rest) = rhs.strip_prefix('[') {
            let rows = read_matrix(line_no, rest, &mut lines)?;
            match name {
                "bus" => bus_rows = Some(rows),
                "branch" => branch_rows = Some(rows),
                other => warnings.push(ParseWarning { line: line_no, message: format!("skipped block `{other}`") }),
            }
        } else if name == "baseMVA" {
            let value = rhs.trim_end_matches(';').trim();
            base_mva = Some(parse_number(value, line_no)?);
        } else {
            warnings.push(ParseWarning { line: line_no, message: format!("skipped statement `{name}`") });
        }
    }

    let base_mva = base_mva.ok_or_else(|| CaseError::Validation("missing baseMVA".into()))?;
    let bus_rows = bus_rows.ok_or_else(|| CaseError::Validation("missing bus block".into()))?;
    let branch_rows = branch_rows.ok_or_else(|| CaseError::Validation("missing branch block".into()))?;

    let mut buses = Vec::with_capacity(bus_rows.len());
    for row in &bus_rows {
        let v = &row.values;
        if v.len() < 10 {
            return Err(CaseError::Syntax { line: row.line, message: format!("bus row has {} columns, expected at least 10", v.len()) });
        }
        let id = parse_id(v[0], row.line)?;
        let bus_type = BusType::from_code(v[1]).ok_or_else(|| CaseError::Syntax {
            line: row.line,
            message: format!("unsupported bus type {}", v[1]),
        })?;
        buses.push(Bus {
            id,
            bus_type,
            vm: v[7],
            va: v[8].to_radians(),
            gs: v[4] / base_mva,
            bs: v[5] / base_mva,
            base_kv: v[9],
        });
    }

    let mut branches = Vec::with_capacity(branch_rows.len());
    for row in &branch_rows {
        let v = &row.values;
        if v.len() < 11 {
            return Err(CaseError::Syntax { line: row.line, message: format!("branch row has {} columns, expected at least 11", v.len()) });
        }
        let status = if v[10] != 0.0 { BranchStatus::InService } else { BranchStatus::OutOfService };
        branches.push(Branch {
            from_bus: parse_id(v[0], row.line)?,
            to_bus: parse_id(v[1], row.line)?,
            r: v[2],
            x: v[3],
            b_charging: v[4],
            tap: if v[8] == 0.0 { 1.0 } else { v[8] },
            shift: v[9].to_radians(),
            status,
        });
    }

    Ok((NetworkCase::new(base_mva, buses, branches)?, warnings))
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

fn parse_number(token: &str, line: usize) -> Result<f64, CaseError> {
    token.parse::<f64>().map_err(|_| CaseError::Syntax { line, message: format!("invalid number `{token}`") })
}

fn parse_id(value: f64, line: usize) -> Result<u32, CaseError> {
    if value.fract() != 0.0 || value < 1.0 || value > u32::MAX as f64 {
        return Err(CaseError::Syntax { line, message: format!("invalid bus id {value}") });
    }
    Ok(value as u32)
}

/// Read matrix rows until the closing `]`. `first` is whatever followed `[`.
fn read_matrix<'a>(
    start_line: usize,
    first: &'a str,
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
) -> Result<Vec<Row>, CaseError> {
    let mut rows = Vec::new();
    let mut pending: Vec<f64> = Vec::new();
    let mut pending_line = start_line;
    let mut current = Some((start_line, first));
    loop {
        let Some((line_no, text)) = current.take().or_else(|| lines.next()) else {
            return Err(CaseError::Syntax { line: start_line, message: "unterminated matrix block".into() });
        };
        let (body, closed) = match text.find(']') {
            Some(pos) => (&text[..pos], true),
            None => (text, false),
        };
        for (k, segment) in body.split(';').enumerate() {
            if k > 0 {
                flush_row(&mut rows, &mut pending, pending_line);
            }
            for token in segment.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
                if pending.is_empty() {
                    pending_line = line_no;
                }
                pending.push(parse_number(token, line_no)?);
            }
        }
        // A newline also terminates a row.
        flush_row(&mut rows, &mut pending, pending_line);
        if closed {
            return Ok(rows);
        }
    }
}

fn flush_row(rows: &mut Vec<Row>, pending: &mut Vec<f64>, line: usize) {
    if !pending.is_empty() {
        rows.push(Row { line, values: std::mem::take(pending) });
    }
}

/// Two-port admittances of one branch: `I_f = yff V_f + yft V_t`,
/// `I_t = ytf V_f + ytt V_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchAdmittance {
    pub from: usize,
    pub to: usize,
    pub yff: Complex64,
    pub yft: Complex64,
    pub ytf: Complex64,
    pub ytt: Complex64,
}

#[derive(Debug, Clone)]
pub struct AdmittanceMatrix {
    pub y: DMatrix<Complex64>,
    /// Aligned with `NetworkCase::branches`; `None` for out-of-service branches.
    pub branches: Vec<Option<BranchAdmittance>>,
}

impl AdmittanceMatrix {
    pub fn n_bus(&self) -> usize {
        self.y.nrows()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n_bus();
        (0..n).all(|i| (0..n).all(|j| self.y[(i, j)] == self.y[(j, i)]))
    }
}

pub fn build_ybus(case: &NetworkCase) -> AdmittanceMatrix {
    let n = case.n_bus();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (k, bus) in case.buses().iter().enumerate() {
        y[(k, k)] += Complex64::new(bus.gs, bus.bs);
    }
    let branches = case
        .branches()
        .iter()
        .map(|br| {
            if !br.in_service() {
                return None;
            }
            let f = case.bus_index(br.from_bus).expect("validated");
            let t = case.bus_index(br.to_bus).expect("validated");
            let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
            let charging = Complex64::new(0.0, br.b_charging / 2.0);
            let tap = Complex64::from_polar(br.tap, br.shift);
            let adm = BranchAdmittance {
                from: f,
                to: t,
                yff: (ys + charging) / (br.tap * br.tap),
                yft: -ys / tap.conj(),
                ytf: -ys / tap,
                ytt: ys + charging,
            };
            y[(f, f)] += adm.yff;
            y[(f, t)] += adm.yft;
            y[(t, f)] += adm.ytf;
            y[(t, t)] += adm.ytt;
            Some(adm)
        })
        .collect();
    AdmittanceMatrix { y, branches }
}

/// Solved voltage profile of the case, re-referenced so the slack angle is 0.
pub fn ground_truth_state(case: &NetworkCase) -> StateVector {
    let slack_va = case.buses()[case.slack_index()].va;
    StateVector::new(
        case.buses().iter().map(|b| b.vm).collect(),
        case.buses().iter().map(|b| b.va - slack_va).collect(),
    )
}
