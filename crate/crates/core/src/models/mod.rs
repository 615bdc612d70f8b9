//! Outcome, adherence, crossover and arm-membership models.
//!
//! Every model predicts a binary target from a short list of history
//! features. Two families are available: a saturated frequency table and a
//! pooled (over intervals) logistic regression.

mod irls;

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{CovariateLayout, HistoryView, Panel, PersonPeriod};

/// Saturated tables larger than this are refused.
const MAX_CELLS: usize = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model configuration: {0}")]
    Config(String),
    #[error("{model} model: no records to fit")]
    Empty { model: String },
    #[error("{model} model: positivity violation, no records in cell ({cell})")]
    Positivity { model: String, cell: String },
    #[error("{model} model: target takes a single value, logistic fit is degenerate")]
    Degenerate { model: String },
    #[error("{model} model: separation after {iterations} iterations ({coefficient} = {value:.3})")]
    Separation {
        model: String,
        iterations: usize,
        coefficient: String,
        value: f64,
    },
    #[error("{model} model: singular information matrix at iteration {iterations}")]
    Singular { model: String, iterations: usize },
    #[error("{model} model: no convergence in {iterations} iterations (log-likelihood {log_likelihood})")]
    NoConvergence {
        model: String,
        iterations: usize,
        log_likelihood: f64,
    },
}

/// Variable a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Outcome,
    Adherence,
    Arm,
    Crossover,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Outcome => "y",
            Target::Adherence => "a",
            Target::Arm => "z",
            Target::Crossover => "c",
        }
    }

    fn value(self, p: &PersonPeriod) -> bool {
        match self {
            Target::Outcome => p.y,
            Target::Adherence => p.a,
            Target::Arm => p.z,
            Target::Crossover => p.c,
        }
    }

    /// Outcomes are only observed on records without crossover.
    fn uses(self, p: &PersonPeriod) -> bool {
        self != Target::Outcome || !p.c
    }
}

/// Recorded panel column usable as a predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Column {
    Z,
    A,
    LA,
    LY,
}

impl Column {
    fn name(self) -> &'static str {
        match self {
            Column::Z => "z",
            Column::A => "a",
            Column::LA => "l_a",
            Column::LY => "l_y",
        }
    }

    fn get(self, p: &PersonPeriod) -> bool {
        match self {
            Column::Z => p.z,
            Column::A => p.a,
            Column::LA => p.l_a,
            Column::LY => p.l_y,
        }
    }
}

/// History feature. Lagged values before the first interval are 0.
///
/// Text form: `z`, `a`, `l_a`, `l_y`, `k`, `a_prev` (lag 1), `l_y_lag3`,
/// and products such as `z*a_prev`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Feature {
    Column { column: Column, lag: u32 },
    /// Interval index `k`, entered as a number.
    Interval,
    Interaction(Box<Feature>, Box<Feature>),
}

impl Feature {
    pub fn column(column: Column, lag: u32) -> Feature {
        Feature::Column { column, lag }
    }

    /// Value at `view`, with `z` replaced by `z_override` if given.
    pub fn eval(&self, view: &HistoryView<'_>, z_override: Option<bool>) -> u32 {
        match self {
            Feature::Column { column: Column::Z, .. } => {
                u32::from(z_override.unwrap_or(view.current().z))
            }
            Feature::Column { column, lag } => view
                .lagged(*lag as usize)
                .map_or(0, |p| u32::from(column.get(p))),
            Feature::Interval => view.current().k,
            Feature::Interaction(a, b) => a.eval(view, z_override) * b.eval(view, z_override),
        }
    }

    /// Number of distinct values over intervals `1..=horizon`.
    fn radix(&self, horizon: u32) -> usize {
        match self {
            Feature::Column { .. } => 2,
            Feature::Interval => horizon as usize + 1,
            Feature::Interaction(a, b) => (a.radix(horizon) - 1) * (b.radix(horizon) - 1) + 1,
        }
    }

    fn mentions(&self, f: &dyn Fn(&Feature) -> bool) -> bool {
        f(self)
            || match self {
                Feature::Interaction(a, b) => a.mentions(f) || b.mentions(f),
                _ => false,
            }
    }

    fn uses_column(&self, column: Column) -> bool {
        self.mentions(&|f| matches!(f, Feature::Column { column: c, .. } if *c == column))
    }

    fn max_lag(&self) -> u32 {
        match self {
            Feature::Column { lag, .. } => *lag,
            Feature::Interval => 0,
            Feature::Interaction(a, b) => a.max_lag().max(b.max_lag()),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feature::Column { column, lag: 0 } => f.write_str(column.name()),
            Feature::Column { column, lag: 1 } => write!(f, "{}_prev", column.name()),
            Feature::Column { column, lag } => write!(f, "{}_lag{lag}", column.name()),
            Feature::Interval => f.write_str("k"),
            Feature::Interaction(a, b) => write!(f, "{a}*{b}"),
        }
    }
}

impl FromStr for Feature {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split('*').map(str::trim);
        let first = parse_atom(parts.next().unwrap_or(""))?;
        parts.try_fold(first, |acc, p| {
            Ok(Feature::Interaction(Box::new(acc), Box::new(parse_atom(p)?)))
        })
    }
}

fn parse_atom(s: &str) -> Result<Feature, ModelError> {
    if s == "k" {
        return Ok(Feature::Interval);
    }
    let (base, lag) = if let Some(b) = s.strip_suffix("_prev") {
        (b, 1)
    } else if let Some((b, n)) = s.rsplit_once("_lag") {
        let lag = n
            .parse::<u32>()
            .map_err(|_| ModelError::Config(format!("bad lag in feature `{s}`")))?;
        (b, lag)
    } else {
        (s, 0)
    };
    let column = match base {
        "z" => Column::Z,
        "a" => Column::A,
        "l_a" => Column::LA,
        "l_y" => Column::LY,
        _ => return Err(ModelError::Config(format!("unknown feature `{s}`"))),
    };
    if column == Column::Z && lag > 0 {
        return Err(ModelError::Config(format!("`{s}`: arm is fixed, lags are meaningless")));
    }
    Ok(Feature::Column { column, lag })
}

impl Serialize for Feature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Feature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[default]
    Saturated,
    PooledLogistic,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Saturated => "saturated",
            Family::PooledLogistic => "pooled-logistic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub target: Target,
    pub features: Vec<Feature>,
    pub family: Family,
}

impl ModelSpec {
    pub fn new(target: Target, features: &[&str], family: Family) -> Result<ModelSpec, ModelError> {
        let features = features
            .iter()
            .map(|f| f.parse())
            .collect::<Result<Vec<_>, _>>()?;
        let spec = ModelSpec {
            target,
            features,
            family,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn saturated(target: Target, features: &[&str]) -> ModelSpec {
        ModelSpec::new(target, features, Family::Saturated).expect("static feature list")
    }

    /// Deepest lag any feature looks back.
    pub fn history_window(&self) -> u32 {
        self.features.iter().map(Feature::max_lag).max().unwrap_or(0)
    }

    /// Rejects features that are not determined before the target is drawn.
    pub fn validate(&self) -> Result<(), ModelError> {
        let forbidden = |f: &Feature| match self.target {
            Target::Arm => f.uses_column(Column::Z),
            Target::Adherence => f.mentions(&|g| {
                matches!(g, Feature::Column { column: Column::A, lag: 0 })
            }),
            Target::Outcome | Target::Crossover => false,
        };
        if let Some(f) = self.features.iter().find(|f| forbidden(f)) {
            return Err(ModelError::Config(format!(
                "feature `{f}` is not available when predicting {}",
                self.target.name()
            )));
        }
        for (i, f) in self.features.iter().enumerate() {
            if self.features[..i].contains(f) {
                return Err(ModelError::Config(format!("feature `{f}` listed twice")));
            }
        }
        Ok(())
    }

    /// Drops features built on covariates the layout does not record.
    pub fn restrict(&self, layout: CovariateLayout) -> ModelSpec {
        let features = self
            .features
            .iter()
            .filter(|f| (layout.l_a || !f.uses_column(Column::LA)) && (layout.l_y || !f.uses_column(Column::LY)))
            .cloned()
            .collect();
        ModelSpec {
            features,
            ..self.clone()
        }
    }

    pub fn describe(&self) -> String {
        let feats: Vec<String> = self.features.iter().map(|f| f.to_string()).collect();
        format!(
            "{} ~ {} [{}]",
            self.target.name(),
            if feats.is_empty() { "1".into() } else { feats.join(" + ") },
            self.family.name()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Parameters {
    /// Dense table over the mixed-radix feature index.
    Table {
        radices: Vec<usize>,
        n: Vec<u64>,
        events: Vec<u64>,
    },
    /// Intercept followed by one coefficient per feature.
    Logistic { beta: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub n_obs: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub horizon: u32,
    pub params: Parameters,
    pub diagnostics: Diagnostics,
}

fn radices(spec: &ModelSpec, horizon: u32) -> Result<Vec<usize>, ModelError> {
    let radices: Vec<usize> = spec.features.iter().map(|f| f.radix(horizon)).collect();
    let mut cells = 1usize;
    for r in &radices {
        cells = cells
            .checked_mul(*r)
            .filter(|c| *c <= MAX_CELLS)
            .ok_or_else(|| ModelError::Config(format!("too many cells for {}", spec.describe())))?;
    }
    Ok(radices)
}

fn cell_index(features: &[Feature], radices: &[usize], view: &HistoryView<'_>, z: Option<bool>) -> usize {
    features
        .iter()
        .zip(radices)
        .fold(0, |acc, (f, r)| acc * r + f.eval(view, z) as usize)
}

fn decode(mut index: usize, radices: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; radices.len()];
    for (d, r) in digits.iter_mut().zip(radices).rev() {
        *d = index % r;
        index /= r;
    }
    digits
}

/// Counts (records, events) per cell of the mixed-radix feature index.
fn tabulate(panel: &Panel, spec: &ModelSpec, radices: &[usize]) -> (Vec<u64>, Vec<u64>) {
    let cells: usize = radices.iter().product();
    let people: Vec<&[PersonPeriod]> = panel.individuals().collect();
    people
        .par_iter()
        .fold(
            || (vec![0u64; cells], vec![0u64; cells]),
            |(mut n, mut e), records| {
                for (idx, p) in records.iter().enumerate() {
                    if !spec.target.uses(p) {
                        continue;
                    }
                    let view = HistoryView::new(records, idx);
                    let c = cell_index(&spec.features, radices, &view, None);
                    n[c] += 1;
                    e[c] += u64::from(spec.target.value(p));
                }
                (n, e)
            },
        )
        .reduce(
            || (vec![0u64; cells], vec![0u64; cells]),
            |(mut n, mut e), (n2, e2)| {
                for (a, b) in n.iter_mut().zip(n2) {
                    *a += b;
                }
                for (a, b) in e.iter_mut().zip(e2) {
                    *a += b;
                }
                (n, e)
            },
        )
}

fn bernoulli_ll(events: f64, n: f64, p: f64) -> f64 {
    let mut ll = 0.0;
    if events > 0.0 {
        ll += events * p.ln();
    }
    if n - events > 0.0 {
        ll += (n - events) * (1.0 - p).ln();
    }
    ll
}

/// Fits `spec` to every record of `panel` at which its target is observed.
pub fn fit(panel: &Panel, spec: &ModelSpec) -> Result<FittedModel, ModelError> {
    spec.validate()?;
    let model = spec.target.name().to_string();
    let horizon = panel.horizon();
    let radices = radices(spec, horizon)?;
    let (n, events) = tabulate(panel, spec, &radices);
    let n_obs: u64 = n.iter().sum();
    if n_obs == 0 {
        return Err(ModelError::Empty { model });
    }
    match spec.family {
        Family::Saturated => {
            let log_likelihood = n
                .iter()
                .zip(&events)
                .filter(|(n, _)| **n > 0)
                .map(|(&n, &e)| bernoulli_ll(e as f64, n as f64, e as f64 / n as f64))
                .sum();
            Ok(FittedModel {
                spec: spec.clone(),
                horizon,
                params: Parameters::Table { radices, n, events },
                diagnostics: Diagnostics {
                    converged: true,
                    iterations: 0,
                    log_likelihood,
                    n_obs,
                },
            })
        }
        Family::PooledLogistic => {
            let total_events: u64 = events.iter().sum();
            if total_events == 0 || total_events == n_obs {
                return Err(ModelError::Degenerate { model });
            }
            let rows: Vec<irls::DesignRow> = n
                .iter()
                .zip(&events)
                .enumerate()
                .filter(|(_, (n, _))| **n > 0)
                .map(|(cell, (&n, &e))| {
                    let mut x = vec![1.0];
                    x.extend(decode(cell, &radices).into_iter().map(|d| d as f64));
                    irls::DesignRow {
                        x,
                        n: n as f64,
                        events: e as f64,
                    }
                })
                .collect();
            let fit = irls::fit(&rows, spec.features.len() + 1).map_err(|f| match f {
                irls::IrlsFailure::Singular { iterations } => ModelError::Singular { model, iterations },
                irls::IrlsFailure::Separation {
                    iterations,
                    coefficient,
                    value,
                } => ModelError::Separation {
                    coefficient: coefficient_name(spec, coefficient),
                    model,
                    iterations,
                    value,
                },
                irls::IrlsFailure::NoConvergence {
                    iterations,
                    log_likelihood,
                } => ModelError::NoConvergence {
                    model,
                    iterations,
                    log_likelihood,
                },
            })?;
            Ok(FittedModel {
                spec: spec.clone(),
                horizon,
                params: Parameters::Logistic { beta: fit.beta },
                diagnostics: Diagnostics {
                    converged: true,
                    iterations: fit.iterations,
                    log_likelihood: fit.log_likelihood,
                    n_obs,
                },
            })
        }
    }
}

fn coefficient_name(spec: &ModelSpec, i: usize) -> String {
    match i {
        0 => "intercept".into(),
        i => spec.features[i - 1].to_string(),
    }
}

impl FittedModel {
    /// `P(target = 1)` at `view`, evaluating `z` as `z_override` when given.
    pub fn prob(&self, view: &HistoryView<'_>, z_override: Option<bool>) -> Result<f64, ModelError> {
        self.prob_of(view, z_override, true)
    }

    /// `P(target = value)` at `view`.
    pub fn prob_of(&self, view: &HistoryView<'_>, z_override: Option<bool>, value: bool) -> Result<f64, ModelError> {
        match &self.params {
            Parameters::Table { radices, n, events } => {
                let c = cell_index(&self.spec.features, radices, view, z_override);
                if n[c] == 0 {
                    return Err(ModelError::Positivity {
                        model: self.spec.target.name().into(),
                        cell: self.describe_cell(c),
                    });
                }
                let hits = if value { events[c] } else { n[c] - events[c] };
                Ok(hits as f64 / n[c] as f64)
            }
            Parameters::Logistic { beta } => {
                let eta = self
                    .spec
                    .features
                    .iter()
                    .zip(&beta[1..])
                    .fold(beta[0], |acc, (f, b)| acc + b * f64::from(f.eval(view, z_override)));
                let p = irls::sigmoid(eta);
                Ok(if value { p } else { 1.0 - p })
            }
        }
    }

    fn describe_cell(&self, cell: usize) -> String {
        match &self.params {
            Parameters::Table { radices, .. } => {
                let digits = decode(cell, radices);
                let parts: Vec<String> = self
                    .spec
                    .features
                    .iter()
                    .zip(digits)
                    .map(|(f, d)| format!("{f}={d}"))
                    .collect();
                if parts.is_empty() {
                    "intercept".into()
                } else {
                    parts.join(", ")
                }
            }
            Parameters::Logistic { .. } => String::new(),
        }
    }

    /// Plain-text dump of the family, conditioning set and parameters.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        let feats: Vec<String> = self.spec.features.iter().map(|f| f.to_string()).collect();
        let _ = writeln!(out, "target: {}", self.spec.target.name());
        let _ = writeln!(out, "family: {}", self.spec.family.name());
        let _ = writeln!(out, "conditioning: {}", feats.join(", "));
        let _ = writeln!(out, "observations: {}", self.diagnostics.n_obs);
        let _ = writeln!(out, "converged: {}", self.diagnostics.converged);
        let _ = writeln!(out, "iterations: {}", self.diagnostics.iterations);
        let _ = writeln!(out, "log_likelihood: {}", self.diagnostics.log_likelihood);
        match &self.params {
            Parameters::Table { n, events, .. } => {
                let _ = writeln!(out, "cell\tn\tevents\tp");
                for (c, (&n, &e)) in n.iter().zip(events).enumerate() {
                    let p = if n > 0 {
                        (e as f64 / n as f64).to_string()
                    } else {
                        "NA".into()
                    };
                    let _ = writeln!(out, "{}\t{n}\t{e}\t{p}", self.describe_cell(c));
                }
            }
            Parameters::Logistic { beta } => {
                let _ = writeln!(out, "term\tcoefficient");
                for (i, b) in beta.iter().enumerate() {
                    let _ = writeln!(out, "{}\t{b}", coefficient_name(&self.spec, i));
                }
            }
        }
        out
    }
}

/// The nuisance models used by the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    /// Outcome given the current interval's history and arm.
    Outcome,
    /// Adherence given the current covariates and arm.
    Adherence,
    /// Arm given history and both current covariates.
    ArmGivenCovariates,
    /// Arm given history and the current adherence-side covariate.
    ArmGivenAdherenceCovariate,
    /// Arm given history through the previous interval.
    ArmGivenPast,
    Crossover,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::Outcome,
        Role::Adherence,
        Role::ArmGivenCovariates,
        Role::ArmGivenAdherenceCovariate,
        Role::ArmGivenPast,
        Role::Crossover,
    ];

    /// Section name in configuration files and snapshot file stem.
    pub fn key(self) -> &'static str {
        match self {
            Role::Outcome => "outcome",
            Role::Adherence => "adherence",
            Role::ArmGivenCovariates => "arm_full",
            Role::ArmGivenAdherenceCovariate => "arm_adherence_covariate",
            Role::ArmGivenPast => "arm_past",
            Role::Crossover => "crossover",
        }
    }

    fn index(self) -> usize {
        Role::ALL.iter().position(|r| *r == self).unwrap()
    }
}

/// One spec per [`Role`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpecs {
    specs: [ModelSpec; 6],
}

impl Default for ModelSpecs {
    /// Saturated over the order-1 history.
    fn default() -> Self {
        let s = ModelSpec::saturated;
        ModelSpecs {
            specs: [
                s(Target::Outcome, &["a_prev", "l_a", "l_y", "a", "z"]),
                s(Target::Adherence, &["a_prev", "l_a", "l_y", "z"]),
                s(Target::Arm, &["a_prev", "l_a", "l_y"]),
                s(Target::Arm, &["a_prev", "l_a"]),
                s(Target::Arm, &["a_prev"]),
                s(Target::Crossover, &["a_prev", "l_a", "l_y", "a", "z"]),
            ],
        }
    }
}

/// Per-model overrides as read from a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecOverride {
    pub family: Option<Family>,
    pub features: Option<Vec<Feature>>,
}

impl ModelSpecs {
    pub fn get(&self, role: Role) -> &ModelSpec {
        &self.specs[role.index()]
    }

    pub fn set(&mut self, role: Role, spec: ModelSpec) -> Result<(), ModelError> {
        let expected = self.specs[role.index()].target;
        if spec.target != expected {
            return Err(ModelError::Config(format!(
                "{} model must predict {}",
                role.key(),
                expected.name()
            )));
        }
        spec.validate()?;
        self.specs[role.index()] = spec;
        Ok(())
    }

    pub fn apply(&mut self, role: Role, o: &SpecOverride) -> Result<(), ModelError> {
        let mut spec = self.get(role).clone();
        if let Some(f) = o.family {
            spec.family = f;
        }
        if let Some(feats) = &o.features {
            spec.features = feats.clone();
        }
        self.set(role, spec)
    }

    pub fn is_default(&self, role: Role) -> bool {
        self.get(role) == ModelSpecs::default().get(role)
    }
}

/// Models fitted for one estimation run.
#[derive(Debug, Clone)]
pub struct FittedSet {
    /// Covariates the analysis declares as measured.
    pub layout: CovariateLayout,
    models: [Option<FittedModel>; 6],
}

impl FittedSet {
    /// Fits the models listed in `roles`, each restricted to `layout`.
    pub fn fit(panel: &Panel, specs: &ModelSpecs, layout: CovariateLayout, roles: &[Role]) -> Result<FittedSet, ModelError> {
        let mut models: [Option<FittedModel>; 6] = Default::default();
        for &role in roles {
            if models[role.index()].is_none() {
                models[role.index()] = Some(fit(panel, &specs.get(role).restrict(layout))?);
            }
        }
        Ok(FittedSet { layout, models })
    }

    pub fn from_models(layout: CovariateLayout, fitted: Vec<(Role, FittedModel)>) -> FittedSet {
        let mut models: [Option<FittedModel>; 6] = Default::default();
        for (role, m) in fitted {
            models[role.index()] = Some(m);
        }
        FittedSet { layout, models }
    }

    pub fn get(&self, role: Role) -> Result<&FittedModel, ModelError> {
        self.models[role.index()]
            .as_ref()
            .ok_or_else(|| ModelError::Config(format!("{} model was not fitted", role.key())))
    }

    pub fn fitted(&self) -> impl Iterator<Item = (Role, &FittedModel)> {
        Role::ALL
            .iter()
            .zip(&self.models)
            .filter_map(|(r, m)| m.as_ref().map(|m| (*r, m)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{ingest_csv, CovariateLayout};
    use crate::sim::{simulate_trial, ScenarioConfig};

    fn view(records: &[PersonPeriod], i: usize) -> HistoryView<'_> {
        HistoryView::new(records, i)
    }

    /// 100 records at (a_prev=1, z=1) of which 80 adhere.
    fn adherence_panel() -> Panel {
        let mut periods = Vec::new();
        for id in 0..100u64 {
            let mut first = PersonPeriod::new(id, 1, true);
            first.a = true;
            let mut second = PersonPeriod::new(id, 2, true);
            second.a = id < 80;
            periods.extend([first, second]);
        }
        Panel::new(periods, Some(2), CovariateLayout::BOTH, false).unwrap()
    }

    #[test]
    fn feature_text_round_trip() {
        for s in ["z", "a", "l_a", "l_y_prev", "a_lag3", "k", "z*a_prev", "k*l_a*a_prev"] {
            assert_eq!(s.parse::<Feature>().unwrap().to_string(), s);
        }
        assert!("q".parse::<Feature>().is_err());
        assert!("z_prev".parse::<Feature>().is_err());
        assert!("a_lagx".parse::<Feature>().is_err());
    }

    #[test]
    fn look_ahead_features_are_rejected() {
        assert!(ModelSpec::new(Target::Arm, &["z*a_prev"], Family::Saturated).is_err());
        assert!(ModelSpec::new(Target::Adherence, &["a"], Family::Saturated).is_err());
        assert!(ModelSpec::new(Target::Adherence, &["a_prev", "a_prev"], Family::Saturated).is_err());
        assert!(ModelSpec::new(Target::Outcome, &["a", "l_y"], Family::Saturated).is_ok());
    }

    #[test]
    fn saturated_cell_frequency_and_complement() {
        let panel = adherence_panel();
        let spec = ModelSpec::saturated(Target::Adherence, &["a_prev", "z"]);
        let m = fit(&panel, &spec).unwrap();
        let recs = panel.individual(0);
        assert_eq!(m.prob(&view(recs, 1), None).unwrap(), 0.8);
        assert!((m.prob_of(&view(recs, 1), None, false).unwrap() - 0.2).abs() < 1e-15);
        // a_prev=0 cell: all adhere at k=1
        assert_eq!(m.prob(&view(recs, 0), None).unwrap(), 1.0);
    }

    #[test]
    fn empty_cell_is_a_positivity_error() {
        let panel = adherence_panel();
        let spec = ModelSpec::saturated(Target::Adherence, &["a_prev", "l_a", "z"]);
        let m = fit(&panel, &spec).unwrap();
        let mut probe = panel.individual(0).to_vec();
        probe[1].l_a = true;
        match m.prob(&view(&probe, 1), None) {
            Err(ModelError::Positivity { cell, .. }) => assert_eq!(cell, "a_prev=1, l_a=1, z=1"),
            other => panic!("{other:?}"),
        }
        // z override into an unobserved arm
        assert!(m.prob(&view(&probe[..1], 0), Some(false)).is_err());
    }

    #[test]
    fn constant_target() {
        let csv = "id,k,z,a,y\n1,1,0,1,0\n2,1,1,1,0\n";
        let panel = ingest_csv(csv.as_bytes()).unwrap();
        let sat = fit(&panel, &ModelSpec::saturated(Target::Adherence, &["z"])).unwrap();
        for i in 0..2 {
            assert_eq!(sat.prob(&view(panel.individual(i), 0), None).unwrap(), 1.0);
        }
        let spec = ModelSpec::new(Target::Adherence, &["z"], Family::PooledLogistic).unwrap();
        assert!(matches!(fit(&panel, &spec), Err(ModelError::Degenerate { .. })));
    }

    #[test]
    fn zero_coefficients_predict_one_half() {
        let spec = ModelSpec::new(Target::Adherence, &["z", "a_prev"], Family::PooledLogistic).unwrap();
        let m = FittedModel {
            spec,
            horizon: 2,
            params: Parameters::Logistic { beta: vec![0.0; 3] },
            diagnostics: Diagnostics {
                converged: true,
                iterations: 0,
                log_likelihood: 0.0,
                n_obs: 0,
            },
        };
        let panel = adherence_panel();
        assert_eq!(m.prob(&view(panel.individual(3), 1), None).unwrap(), 0.5);
    }

    #[test]
    fn outcome_model_skips_crossover_records() {
        let csv = "id,k,z,a,y,c\n1,1,0,0,0,1\n2,1,0,0,1,0\n3,1,0,0,0,0\n";
        let panel = ingest_csv(csv.as_bytes()).unwrap();
        let m = fit(&panel, &ModelSpec::saturated(Target::Outcome, &[])).unwrap();
        assert_eq!(m.diagnostics.n_obs, 2);
        assert_eq!(m.prob(&view(panel.individual(0), 0), None).unwrap(), 0.5);
    }

    #[test]
    fn interval_feature_is_categorical_in_tables() {
        let csv = "id,k,z,a,y\n1,1,0,1,0\n1,2,0,0,0\n2,1,0,1,0\n2,2,0,1,0\n";
        let panel = ingest_csv(csv.as_bytes()).unwrap();
        let m = fit(&panel, &ModelSpec::saturated(Target::Adherence, &["k"])).unwrap();
        assert_eq!(m.prob(&view(panel.individual(0), 0), None).unwrap(), 1.0);
        assert_eq!(m.prob(&view(panel.individual(0), 1), None).unwrap(), 0.5);
    }

    #[test]
    fn layout_restriction_drops_unmeasured_covariates() {
        let spec = ModelSpecs::default().get(Role::Outcome).restrict(CovariateLayout::ADHERENCE_ONLY);
        let names: Vec<String> = spec.features.iter().map(|f| f.to_string()).collect();
        assert_eq!(names, ["a_prev", "l_a", "a", "z"]);
    }

    #[test]
    fn logistic_recovers_generating_adherence() {
        let cfg = ScenarioConfig::standard(1).unwrap().with_n(50_000).with_horizon(6).with_seed(3);
        let panel = simulate_trial(&cfg).unwrap();
        let spec = ModelSpec::new(Target::Adherence, &["a_prev", "z*a_prev"], Family::PooledLogistic).unwrap();
        let m = fit(&panel, &spec).unwrap();
        let probe = [
            { let mut p = PersonPeriod::new(1, 1, true); p.a = true; p },
            PersonPeriod::new(1, 2, true),
        ];
        let p = m.prob(&view(&probe, 1), None).unwrap();
        assert!((p - 0.8).abs() < 0.01, "{p}");
        assert!(m.snapshot().contains("z*a_prev"));
    }

    #[test]
    fn saturated_snapshot_lists_cells() {
        let m = fit(&adherence_panel(), &ModelSpec::saturated(Target::Adherence, &["a_prev"])).unwrap();
        let snap = m.snapshot();
        assert!(snap.contains("family: saturated"));
        assert!(snap.contains("a_prev=1\t100\t80\t0.8"));
    }

    #[test]
    fn overrides_keep_the_target() {
        let mut specs = ModelSpecs::default();
        let o = SpecOverride {
            family: Some(Family::PooledLogistic),
            features: Some(vec!["a_prev".parse().unwrap()]),
        };
        specs.apply(Role::ArmGivenPast, &o).unwrap();
        assert_eq!(specs.get(Role::ArmGivenPast).family, Family::PooledLogistic);
        assert!(!specs.is_default(Role::ArmGivenPast));
        let bad = ModelSpec::saturated(Target::Outcome, &[]);
        assert!(specs.set(Role::Adherence, bad).is_err());
    }
}
