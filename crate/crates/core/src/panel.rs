//! Person-period panels: the long-format data every other module consumes.
//!
//! One [`PersonPeriod`] exists per individual per interval while the
//! individual is at risk. Failure is absorbing and crossover censors, so the
//! existence of a record at interval `k` encodes `Y_{k-1} = 0` and
//! `C_{k-1} = 0`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use thiserror::Error;

/// One individual in one interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PersonPeriod {
    pub id: u64,
    /// Interval index, starting at 1.
    pub k: u32,
    /// Baseline arm.
    pub z: bool,
    /// Adherence in interval `k`.
    pub a: bool,
    /// Covariate on the adherence-component pathway (`L_{A,k}`).
    pub l_a: bool,
    /// Covariate on the outcome-component pathway (`L_{Y,k}`).
    pub l_y: bool,
    /// Failure in interval `k`.
    pub y: bool,
    /// Crossover to a non-assigned study medication in interval `k`.
    pub c: bool,
}

impl PersonPeriod {
    pub fn new(id: u64, k: u32, z: bool) -> Self {
        PersonPeriod {
            id,
            k,
            z,
            a: false,
            l_a: false,
            l_y: false,
            y: false,
            c: false,
        }
    }
}

/// Which covariate processes a panel carries.
///
/// `l_a: false` is the `L_k = (L_{Y,k}, ∅)` regime and `l_y: false` is
/// `L_k = (∅, L_{A,k})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct CovariateLayout {
    pub l_a: bool,
    pub l_y: bool,
}

impl CovariateLayout {
    pub const BOTH: CovariateLayout = CovariateLayout { l_a: true, l_y: true };
    pub const ADHERENCE_ONLY: CovariateLayout = CovariateLayout { l_a: true, l_y: false };
    pub const OUTCOME_ONLY: CovariateLayout = CovariateLayout { l_a: false, l_y: true };
    pub const NONE: CovariateLayout = CovariateLayout { l_a: false, l_y: false };

    /// Intersection of two layouts.
    pub fn restrict(self, other: CovariateLayout) -> CovariateLayout {
        CovariateLayout {
            l_a: self.l_a && other.l_a,
            l_y: self.l_y && other.l_y,
        }
    }
}

impl Default for CovariateLayout {
    fn default() -> Self {
        CovariateLayout::BOTH
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    IntervalStart,
    NonContiguous,
    RecordAfterFailure,
    RecordAfterCrossover,
    ZNotConstant,
    Horizon,
}

impl Rule {
    pub fn code(self) -> &'static str {
        match self {
            Rule::IntervalStart => "INTERVAL_START",
            Rule::NonContiguous => "NON_CONTIGUOUS",
            Rule::RecordAfterFailure => "RECORD_AFTER_FAILURE",
            Rule::RecordAfterCrossover => "RECORD_AFTER_CROSSOVER",
            Rule::ZNotConstant => "Z_NOT_CONSTANT",
            Rule::Horizon => "HORIZON",
        }
    }
}

/// A single failed structural rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: Rule,
    pub id: u64,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.rule.code(), self.id, self.detail)
    }
}

/// Every violation found while validating a panel, in (id, k) order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    /// Line-oriented `RULE<TAB>id<TAB>detail` rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.violations {
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.violations.first() {
            None => write!(f, "no violations"),
            Some(v) if self.violations.len() == 1 => write!(f, "{}", v.detail),
            Some(v) => write!(f, "{} (and {} more)", v.detail, self.violations.len() - 1),
        }
    }
}

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("invalid panel: {0}")]
    Validation(ValidationReport),
    #[error("interval {k} outside 1..={horizon}")]
    IntervalOutOfRange { k: u32, horizon: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An immutable, validated person-period panel sorted by `(id, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    periods: Vec<PersonPeriod>,
    horizon: u32,
    layout: CovariateLayout,
    crossover: bool,
    // start offset of each individual's run of records
    starts: Vec<usize>,
}

impl Panel {
    /// Sorts, validates and wraps `periods`.
    ///
    /// `horizon` of `None` means the largest observed `k`.
    pub fn new(
        mut periods: Vec<PersonPeriod>,
        horizon: Option<u32>,
        layout: CovariateLayout,
        crossover: bool,
    ) -> Result<Panel, PanelError> {
        periods.sort_by_key(|p| (p.id, p.k));
        let max_k = periods.iter().map(|p| p.k).max().unwrap_or(0);
        let horizon = horizon.unwrap_or(max_k);
        let report = validate(&periods, horizon, crossover);
        if !report.is_empty() {
            return Err(PanelError::Validation(report));
        }
        Ok(Panel::from_sorted(periods, horizon, layout, crossover))
    }

    /// Wraps records already known to be sorted and valid (simulator output,
    /// bootstrap resamples). Checked in debug builds.
    pub(crate) fn from_sorted(
        periods: Vec<PersonPeriod>,
        horizon: u32,
        layout: CovariateLayout,
        crossover: bool,
    ) -> Panel {
        debug_assert!(periods.windows(2).all(|w| (w[0].id, w[0].k) < (w[1].id, w[1].k)));
        debug_assert!(validate(&periods, horizon, crossover).is_empty());
        let mut starts = Vec::new();
        for (i, p) in periods.iter().enumerate() {
            if i == 0 || periods[i - 1].id != p.id {
                starts.push(i);
            }
        }
        Panel {
            periods,
            horizon,
            layout,
            crossover,
            starts,
        }
    }

    pub fn empty(horizon: u32) -> Panel {
        Panel::from_sorted(Vec::new(), horizon, CovariateLayout::BOTH, false)
    }

    pub fn periods(&self) -> &[PersonPeriod] {
        &self.periods
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn layout(&self) -> CovariateLayout {
        self.layout
    }

    /// Whether the panel carries a crossover column.
    pub fn has_crossover(&self) -> bool {
        self.crossover
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn n_individuals(&self) -> usize {
        self.starts.len()
    }

    /// Each individual's records as one contiguous slice, in id order.
    pub fn individuals(&self) -> impl ExactSizeIterator<Item = &[PersonPeriod]> + '_ {
        (0..self.starts.len()).map(move |i| self.individual(i))
    }

    /// The `i`-th individual (by id order).
    pub fn individual(&self, i: usize) -> &[PersonPeriod] {
        let start = self.starts[i];
        let end = self.starts.get(i + 1).copied().unwrap_or(self.periods.len());
        &self.periods[start..end]
    }

    /// Records at interval `k` in arm `z`; their existence encodes the risk set.
    pub fn at_risk(&self, k: u32, z: bool) -> Result<Vec<&PersonPeriod>, PanelError> {
        if k < 1 || k > self.horizon {
            return Err(PanelError::IntervalOutOfRange {
                k,
                horizon: self.horizon,
            });
        }
        Ok(self.periods.iter().filter(|p| p.k == k && p.z == z).collect())
    }

    /// Copy of the panel keeping the individuals for which `keep` holds.
    pub fn filter_individuals(&self, mut keep: impl FnMut(&[PersonPeriod]) -> bool) -> Panel {
        let periods = self
            .individuals()
            .filter(|recs| keep(recs))
            .flat_map(|recs| recs.iter().copied())
            .collect();
        Panel::from_sorted(periods, self.horizon, self.layout, self.crossover)
    }

    /// Same records, declared with a narrower covariate layout. Dropped
    /// covariate columns are zeroed.
    pub fn with_layout(&self, layout: CovariateLayout) -> Panel {
        let layout = self.layout.restrict(layout);
        let periods = self
            .periods
            .iter()
            .map(|p| PersonPeriod {
                l_a: p.l_a && layout.l_a,
                l_y: p.l_y && layout.l_y,
                ..*p
            })
            .collect();
        Panel::from_sorted(periods, self.horizon, layout, self.crossover)
    }

    /// Writes the panel in the CSV interchange format.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = vec!["id", "k", "z", "a"];
        if self.layout.l_a {
            header.push("l_a");
        }
        if self.layout.l_y {
            header.push("l_y");
        }
        header.push("y");
        if self.crossover {
            header.push("c");
        }
        writeln!(out, "{}", header.join(","))?;
        let bit = |b: bool| if b { '1' } else { '0' };
        let mut line = String::with_capacity(32);
        for p in &self.periods {
            line.clear();
            line.push_str(&p.id.to_string());
            line.push(',');
            line.push_str(&p.k.to_string());
            line.push(',');
            line.push(bit(p.z));
            line.push(',');
            line.push(bit(p.a));
            if self.layout.l_a {
                line.push(',');
                line.push(bit(p.l_a));
            }
            if self.layout.l_y {
                line.push(',');
                line.push(bit(p.l_y));
            }
            line.push(',');
            line.push(bit(p.y));
            if self.crossover {
                line.push(',');
                line.push(bit(p.c));
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ASCII")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Id,
    K,
    Z,
    A,
    LA,
    LY,
    Y,
    C,
}

fn parse_header(fields: &csv::StringRecord) -> Result<Vec<Column>, String> {
    let names: Vec<&str> = fields.iter().map(str::trim).collect();
    // id,k,z,a[,l_a][,l_y],y[,c]
    let mut cols = Vec::with_capacity(names.len());
    let mut it = names.iter().peekable();
    for (want, col) in [("id", Column::Id), ("k", Column::K), ("z", Column::Z), ("a", Column::A)] {
        match it.next() {
            Some(n) if *n == want => cols.push(col),
            other => {
                return Err(format!(
                    "expected header column `{want}`, found {}",
                    other.map_or("end of header".to_string(), |n| format!("`{n}`"))
                ))
            }
        }
    }
    if it.peek() == Some(&&"l_a") {
        it.next();
        cols.push(Column::LA);
    }
    if it.peek() == Some(&&"l_y") {
        it.next();
        cols.push(Column::LY);
    }
    match it.next() {
        Some(&"y") => cols.push(Column::Y),
        other => {
            return Err(format!(
                "expected header column `y`, found {}",
                other.map_or("end of header".to_string(), |n| format!("`{n}`"))
            ))
        }
    }
    match it.next() {
        None => {}
        Some(&"c") => cols.push(Column::C),
        Some(n) => return Err(format!("unexpected header column `{n}`")),
    }
    if let Some(n) = it.next() {
        return Err(format!("unexpected header column `{n}`"));
    }
    Ok(cols)
}

fn parse_bit(field: &str, name: &str) -> Result<bool, String> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(format!("column `{name}` must be 0 or 1, found `{other}`")),
    }
}

/// Reads and validates a panel from CSV text with header
/// `id,k,z,a,l_a,l_y,y[,c]`.
///
/// The `l_a` and `l_y` columns may be omitted to declare a one-sided
/// covariate layout; a missing `c` column means no crossover occurred.
pub fn ingest_csv<R: Read>(source: R) -> Result<Panel, PanelError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut records = reader.records();
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(csv_error(e, 1)),
        None => {
            return Err(PanelError::Parse {
                line: 1,
                message: "missing header row".into(),
            })
        }
    };
    let cols = parse_header(&header).map_err(|message| PanelError::Parse { line: 1, message })?;
    let layout = CovariateLayout {
        l_a: cols.contains(&Column::LA),
        l_y: cols.contains(&Column::LY),
    };
    let crossover = cols.contains(&Column::C);

    let mut periods = Vec::new();
    for (row, rec) in records.enumerate() {
        let line = row as u64 + 2;
        let rec = rec.map_err(|e| csv_error(e, line))?;
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != cols.len() {
            return Err(PanelError::Parse {
                line,
                message: format!("expected {} fields, found {}", cols.len(), rec.len()),
            });
        }
        let mut p = PersonPeriod::new(0, 0, false);
        for (field, col) in rec.iter().zip(&cols) {
            let res = match col {
                Column::Id => field
                    .trim()
                    .parse::<u64>()
                    .map(|v| p.id = v)
                    .map_err(|_| format!("id must be a non-negative integer, found `{field}`")),
                Column::K => field
                    .trim()
                    .parse::<u32>()
                    .map(|v| p.k = v)
                    .map_err(|_| format!("k must be a positive integer, found `{field}`")),
                Column::Z => parse_bit(field, "z").map(|v| p.z = v),
                Column::A => parse_bit(field, "a").map(|v| p.a = v),
                Column::LA => parse_bit(field, "l_a").map(|v| p.l_a = v),
                Column::LY => parse_bit(field, "l_y").map(|v| p.l_y = v),
                Column::Y => parse_bit(field, "y").map(|v| p.y = v),
                Column::C => parse_bit(field, "c").map(|v| p.c = v),
            };
            res.map_err(|message| PanelError::Parse { line, message })?;
        }
        periods.push(p);
    }
    Panel::new(periods, None, layout, crossover)
}

fn csv_error(e: csv::Error, line: u64) -> PanelError {
    let line = e.position().map_or(line, |p| p.line());
    PanelError::Parse {
        line,
        message: e.to_string(),
    }
}

/// Checks the structural rules on records sorted by `(id, k)`.
pub fn validate(periods: &[PersonPeriod], horizon: u32, crossover: bool) -> ValidationReport {
    let mut by_id: BTreeMap<u64, Vec<&PersonPeriod>> = BTreeMap::new();
    for p in periods {
        by_id.entry(p.id).or_default().push(p);
    }
    let mut violations = Vec::new();
    for (&id, recs) in &by_id {
        let mut push = |rule: Rule, detail: String| {
            violations.push(Violation { rule, id, detail });
        };
        if recs[0].k != 1 {
            push(
                Rule::IntervalStart,
                format!("records for id {id} start at k={} instead of 1", recs[0].k),
            );
        }
        let z = recs[0].z;
        if recs.iter().any(|p| p.z != z) {
            push(Rule::ZNotConstant, format!("z not constant for id {id}"));
        }
        for w in recs.windows(2) {
            let (prev, next) = (w[0], w[1]);
            if next.k != prev.k + 1 {
                push(
                    Rule::NonContiguous,
                    format!("id {id} jumps from k={} to k={}", prev.k, next.k),
                );
            }
            if prev.y {
                push(
                    Rule::RecordAfterFailure,
                    format!("record after failure for id {id} (failed at k={}, next k={})", prev.k, next.k),
                );
            }
            if crossover && prev.c {
                push(
                    Rule::RecordAfterCrossover,
                    format!("record after crossover for id {id} (crossed over at k={}, next k={})", prev.k, next.k),
                );
            }
        }
        if let Some(last) = recs.last() {
            if last.k > horizon {
                push(
                    Rule::Horizon,
                    format!("id {id} has k={} beyond horizon {horizon}", last.k),
                );
            }
        }
    }
    ValidationReport { violations }
}

/// A record together with the rest of its individual's history.
#[derive(Debug, Clone, Copy)]
pub struct HistoryView<'a> {
    records: &'a [PersonPeriod],
    idx: usize,
}

impl<'a> HistoryView<'a> {
    /// `records` are one individual's records; `idx` selects the current one.
    pub fn new(records: &'a [PersonPeriod], idx: usize) -> Self {
        assert!(idx < records.len(), "history index out of range");
        HistoryView { records, idx }
    }

    pub fn current(&self) -> &'a PersonPeriod {
        &self.records[self.idx]
    }

    /// The record `lag` intervals back, or `None` before interval 1.
    pub fn lagged(&self, lag: usize) -> Option<&'a PersonPeriod> {
        self.idx.checked_sub(lag).map(|i| &self.records[i])
    }
}
