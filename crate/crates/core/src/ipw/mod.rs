//! Inverse-probability weights for the two weighted representations of the
//! separable-effect g-formula, weighted hazards and weighted prevalences.
//!
//! Outcome-ratio weights (`W_Y`) are evaluated on arm `z_a`, adherence-ratio
//! weights (`W_A`) on arm `z_y`.

mod bootstrap;
mod estimate;

pub use bootstrap::{bootstrap, percentile, resample, BootstrapConfig, BootstrapSummary};
pub use estimate::{estimate, EstimateReport, EstimationConfig};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::EstimationError;
use crate::models::{FittedSet, ModelError, Role};
use crate::panel::{HistoryView, Panel, PersonPeriod};
use crate::risk::RiskCurve;

/// Which density ratio drives the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Variant {
    /// Outcome-density ratio, expectations over arm `z_a`.
    #[default]
    #[serde(rename = "w_y")]
    OutcomeRatio,
    /// Adherence-density ratio, expectations over arm `z_y`.
    #[serde(rename = "w_a")]
    AdherenceRatio,
}

/// The intervention `(Z_A = z_a, Z_Y = z_y)` and how to estimate it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Estimand {
    pub z_a: bool,
    pub z_y: bool,
    pub variant: Variant,
    pub simplified: bool,
    pub crossover: bool,
}

impl Estimand {
    pub fn new(z_a: bool, z_y: bool, variant: Variant) -> Estimand {
        Estimand {
            z_a,
            z_y,
            variant,
            simplified: false,
            crossover: false,
        }
    }

    /// Arm whose records carry the weights.
    pub fn arm(&self) -> bool {
        match self.variant {
            Variant::OutcomeRatio => self.z_a,
            Variant::AdherenceRatio => self.z_y,
        }
    }

    /// `W_Y_full`, `W_A_simplified`, `W_Y_crossover`, ...
    pub fn label(&self) -> &'static str {
        match (self.variant, self.crossover, self.simplified) {
            (Variant::OutcomeRatio, true, _) => "W_Y_crossover",
            (Variant::OutcomeRatio, false, false) => "W_Y_full",
            (Variant::OutcomeRatio, false, true) => "W_Y_simplified",
            (Variant::AdherenceRatio, true, _) => "W_A_crossover",
            (Variant::AdherenceRatio, false, false) => "W_A_full",
            (Variant::AdherenceRatio, false, true) => "W_A_simplified",
        }
    }

    /// Models the weights need.
    pub fn roles(&self) -> Vec<Role> {
        let mut roles = match (self.variant, self.simplified) {
            (Variant::OutcomeRatio, false) => vec![Role::Outcome, Role::ArmGivenCovariates, Role::ArmGivenAdherenceCovariate],
            (Variant::OutcomeRatio, true) => vec![Role::Outcome],
            (Variant::AdherenceRatio, false) => vec![Role::Adherence, Role::ArmGivenAdherenceCovariate, Role::ArmGivenPast],
            (Variant::AdherenceRatio, true) => vec![Role::Adherence],
        };
        if self.crossover {
            roles.push(Role::Crossover);
        }
        roles
    }

    pub fn describe(&self) -> String {
        format!(
            "z_a={} z_y={} weights={} crossover={}",
            u8::from(self.z_a),
            u8::from(self.z_y),
            self.label(),
            if self.crossover { "on" } else { "off" }
        )
    }
}

/// Weight of one at-risk record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightEntry {
    pub period: PersonPeriod,
    /// Interval-`k` factor; `weight = previous weight * factor`.
    pub factor: f64,
    /// The part of `factor` that precedes the interval's outcome and crossover.
    pub pre_factor: f64,
    /// Cumulative weight through interval `k`.
    pub weight: f64,
    /// Previous cumulative weight times `pre_factor`; weights the
    /// distribution of covariates and adherence at `k` among the at-risk.
    pub marginal_weight: f64,
}

/// Cumulative weights for every record of one arm, in panel order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSeries {
    pub label: String,
    pub z_a: bool,
    pub z_y: bool,
    pub arm: bool,
    pub entries: Vec<WeightEntry>,
    /// Entries whose weight was clipped by [`WeightSeries::cap`].
    pub capped: usize,
}

impl WeightSeries {
    /// Clips cumulative and marginal weights at `cap`, leaving factors alone.
    pub fn cap(&mut self, cap: f64) {
        for e in &mut self.entries {
            if e.weight > cap {
                e.weight = cap;
                self.capped += 1;
            }
            e.marginal_weight = e.marginal_weight.min(cap);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &WeightEntry> {
        self.entries.iter()
    }
}

fn ratio(num: f64, den: f64, p: &PersonPeriod, factor: &'static str) -> Result<f64, EstimationError> {
    if den == 0.0 {
        return Err(EstimationError::ZeroDenominator { id: p.id, k: p.k, factor });
    }
    Ok(num / den)
}

/// Accumulates `(pre_factor, factor)` per record into a series.
fn accumulate<F>(panel: &Panel, arm: bool, label: &str, z_a: bool, z_y: bool, interval: F) -> Result<WeightSeries, EstimationError>
where
    F: Fn(&HistoryView<'_>) -> Result<(f64, f64), EstimationError> + Sync,
{
    let per_person: Vec<Result<Vec<WeightEntry>, EstimationError>> = (0..panel.n_individuals())
        .into_par_iter()
        .map(|i| {
            let recs = panel.individual(i);
            if recs[0].z != arm {
                return Ok(Vec::new());
            }
            let mut w = 1.0;
            let mut out = Vec::with_capacity(recs.len());
            for j in 0..recs.len() {
                let (pre, factor) = interval(&HistoryView::new(recs, j))?;
                let entry = WeightEntry {
                    period: recs[j],
                    factor,
                    pre_factor: pre,
                    weight: w * factor,
                    marginal_weight: w * pre,
                };
                w = entry.weight;
                out.push(entry);
            }
            Ok(out)
        })
        .collect();
    let mut entries = Vec::new();
    for part in per_person {
        entries.extend(part?);
    }
    Ok(WeightSeries {
        label: label.to_string(),
        z_a,
        z_y,
        arm,
        entries,
        capped: 0,
    })
}

fn config(msg: String) -> EstimationError {
    EstimationError::Model(ModelError::Config(msg))
}

/// Outcome-ratio weights on arm `z_a`.
///
/// The full form multiplies the outcome-density ratio by two arm-probability
/// ratios; the simplified form keeps only the outcome ratio and requires an
/// analysis layout without an outcome-side covariate.
pub fn weights_y(panel: &Panel, models: &FittedSet, z_a: bool, z_y: bool, simplified: bool) -> Result<WeightSeries, EstimationError> {
    if simplified && models.layout.l_y {
        return Err(config(
            "simplified outcome-ratio weights need a layout without l_y; declare layout = \"adherence-only\" or \"none\""
                .into(),
        ));
    }
    let outcome = models.get(Role::Outcome)?;
    let arms = if simplified {
        None
    } else {
        Some((models.get(Role::ArmGivenCovariates)?, models.get(Role::ArmGivenAdherenceCovariate)?))
    };
    let label = if simplified { "W_Y_simplified" } else { "W_Y_full" };
    accumulate(panel, z_a, label, z_a, z_y, |v| {
        let p = v.current();
        let pre = match arms {
            Some((full, la)) => {
                let r1 = ratio(full.prob_of(v, None, z_y)?, full.prob_of(v, None, z_a)?, p, "arm given covariates")?;
                let r2 = ratio(la.prob_of(v, None, z_a)?, la.prob_of(v, None, z_y)?, p, "arm given adherence covariate")?;
                r1 * r2
            }
            None => 1.0,
        };
        // a crossover record's outcome is not observed; its weight is zeroed
        // by the crossover factor when that is applied
        if p.c {
            return Ok((pre, pre));
        }
        let fy = ratio(
            outcome.prob_of(v, Some(z_y), p.y)?,
            outcome.prob_of(v, Some(z_a), p.y)?,
            p,
            "outcome density",
        )?;
        Ok((pre, pre * fy))
    })
}

/// Adherence-ratio weights on arm `z_y`.
pub fn weights_a(panel: &Panel, models: &FittedSet, z_a: bool, z_y: bool, simplified: bool) -> Result<WeightSeries, EstimationError> {
    if simplified && models.layout.l_a {
        return Err(config(
            "simplified adherence-ratio weights need a layout without l_a; declare layout = \"outcome-only\" or \"none\""
                .into(),
        ));
    }
    let adherence = models.get(Role::Adherence)?;
    let arms = if simplified {
        None
    } else {
        Some((models.get(Role::ArmGivenAdherenceCovariate)?, models.get(Role::ArmGivenPast)?))
    };
    let label = if simplified { "W_A_simplified" } else { "W_A_full" };
    accumulate(panel, z_y, label, z_a, z_y, |v| {
        let p = v.current();
        let mut f = ratio(
            adherence.prob_of(v, Some(z_a), p.a)?,
            adherence.prob_of(v, Some(z_y), p.a)?,
            p,
            "adherence density",
        )?;
        if let Some((la, past)) = arms {
            f *= ratio(la.prob_of(v, None, z_a)?, la.prob_of(v, None, z_y)?, p, "arm given adherence covariate")?;
            f *= ratio(past.prob_of(v, None, z_y)?, past.prob_of(v, None, z_a)?, p, "arm given past")?;
        }
        Ok((f, f))
    })
}

/// `prod_j 1(C_j = 0) / P(C_j = 0 | history, Z = arm)` on arm `arm`.
pub fn crossover_weights(panel: &Panel, models: &FittedSet, arm: bool) -> Result<WeightSeries, EstimationError> {
    let cross = models.get(Role::Crossover)?;
    accumulate(panel, arm, "C", arm, arm, |v| {
        let p = v.current();
        if p.c {
            return Ok((1.0, 0.0));
        }
        Ok((1.0, ratio(1.0, cross.prob_of(v, Some(arm), false)?, p, "crossover")?))
    })
}

/// Multiplies crossover factors into base factors and re-accumulates.
///
/// Unit crossover factors leave every number of `base` unchanged.
pub fn compose(base: &WeightSeries, cross: &WeightSeries, label: &str) -> Result<WeightSeries, EstimationError> {
    if base.entries.len() != cross.entries.len() || base.arm != cross.arm {
        return Err(EstimationError::Domain("weight series cover different records".into()));
    }
    let mut entries = Vec::with_capacity(base.entries.len());
    let mut w = 1.0;
    for (b, c) in base.entries.iter().zip(&cross.entries) {
        if (b.period.id, b.period.k) != (c.period.id, c.period.k) {
            return Err(EstimationError::Domain("weight series cover different records".into()));
        }
        if b.period.k == 1 {
            w = 1.0;
        }
        let factor = b.factor * c.factor;
        let pre = b.pre_factor * c.pre_factor;
        let e = WeightEntry {
            period: b.period,
            factor,
            pre_factor: pre,
            weight: w * factor,
            marginal_weight: w * pre,
        };
        w = e.weight;
        entries.push(e);
    }
    Ok(WeightSeries {
        label: label.to_string(),
        z_a: base.z_a,
        z_y: base.z_y,
        arm: base.arm,
        entries,
        capped: 0,
    })
}

/// Hazards `sum(w y) / sum(w)` over the at-risk records at each `k`, and the
/// cumulative incidence built from them.
pub fn weighted_risk(panel: &Panel, w: &WeightSeries) -> RiskCurve {
    let horizon = panel.horizon() as usize;
    let mut sums = vec![(0.0, 0.0); horizon];
    for e in &w.entries {
        let s = &mut sums[e.period.k as usize - 1];
        if e.period.y {
            s.0 += e.weight;
        }
        s.1 += e.weight;
    }
    RiskCurve::from_sums(&sums)
}

/// Indicator whose prevalence [`weighted_marginal`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Indicator {
    A,
    LA,
    LY,
}

impl Indicator {
    pub fn name(self) -> &'static str {
        match self {
            Indicator::A => "a",
            Indicator::LA => "l_a",
            Indicator::LY => "l_y",
        }
    }

    pub fn of(self, p: &PersonPeriod) -> bool {
        match self {
            Indicator::A => p.a,
            Indicator::LA => p.l_a,
            Indicator::LY => p.l_y,
        }
    }
}

/// Weighted prevalence of `variable` among the at-risk records at each `k`,
/// using the marginal weights. `None` where the weighted mass is zero.
pub fn weighted_marginal(panel: &Panel, w: &WeightSeries, variable: Indicator) -> Vec<Option<f64>> {
    let horizon = panel.horizon() as usize;
    let mut hits = vec![0.0; horizon];
    let mut mass = vec![0.0; horizon];
    for e in &w.entries {
        let i = e.period.k as usize - 1;
        if variable.of(&e.period) {
            hits[i] += e.marginal_weight;
        }
        mass[i] += e.marginal_weight;
    }
    hits.iter()
        .zip(&mass)
        .map(|(&h, &m)| (m > 0.0).then(|| h / m))
        .collect()
}

/// Spread of the cumulative weights among the at-risk records at `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightDiagnostics {
    pub k: u32,
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// `(sum w)^2 / sum w^2`.
    pub ess: f64,
}

pub fn diagnostics(panel: &Panel, w: &WeightSeries) -> Vec<WeightDiagnostics> {
    let mut out: Vec<WeightDiagnostics> = (1..=panel.horizon())
        .map(|k| WeightDiagnostics {
            k,
            n: 0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            mean: 0.0,
            ess: 0.0,
        })
        .collect();
    let mut sq = vec![0.0; out.len()];
    for e in &w.entries {
        let i = e.period.k as usize - 1;
        let d = &mut out[i];
        d.n += 1;
        d.min = d.min.min(e.weight);
        d.max = d.max.max(e.weight);
        d.mean += e.weight;
        sq[i] += e.weight * e.weight;
    }
    for (d, s2) in out.iter_mut().zip(sq) {
        let total = d.mean;
        if d.n > 0 {
            d.mean = total / d.n as f64;
            d.ess = if s2 > 0.0 { total * total / s2 } else { 0.0 };
        } else {
            d.min = f64::NAN;
            d.max = f64::NAN;
            d.mean = f64::NAN;
        }
    }
    out
}

pub fn diagnostics_csv(rows: &[WeightDiagnostics]) -> String {
    let mut out = String::from("k,n,min,max,mean,ess\n");
    for d in rows {
        out.push_str(&format!("{},{},{},{},{},{}\n", d.k, d.n, d.min, d.max, d.mean, d.ess));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fit, ModelSpec, ModelSpecs, Target};
    use crate::panel::CovariateLayout;
    use crate::sim::{empirical_cumulative_incidence, empirical_prevalence, simulate_trial, LinearProb, ScenarioConfig};

    fn record(id: u64, k: u32, z: bool, a: bool, y: bool) -> PersonPeriod {
        PersonPeriod {
            a,
            y,
            ..PersonPeriod::new(id, k, z)
        }
    }

    fn panel_of(periods: Vec<PersonPeriod>, horizon: u32) -> Panel {
        Panel::new(periods, Some(horizon), CovariateLayout::NONE, false).unwrap()
    }

    fn fitted(panel: &Panel, roles: &[Role]) -> FittedSet {
        FittedSet::fit(panel, &ModelSpecs::default(), panel.layout(), roles).unwrap()
    }

    /// Outcome probabilities 0.9 under arm 1 and 0.8 under arm 0 at k = 1.
    fn outcome_world() -> Panel {
        let mut v = Vec::new();
        let mut id = 0;
        for (z, n, events) in [(true, 10, 9), (false, 10, 8)] {
            for i in 0..n {
                v.push(record(id, 1, z, false, i < events));
                id += 1;
            }
        }
        panel_of(v, 1)
    }

    #[test]
    fn outcome_ratio_arithmetic() {
        let p = outcome_world();
        let m = fitted(&p, &[Role::Outcome]);
        let w = weights_y(&p, &m, false, true, true).unwrap();
        assert_eq!(w.arm, false);
        let e = w.entries.iter().find(|e| e.period.y).unwrap();
        assert!((e.weight - 1.125).abs() < 1e-15);
        assert_eq!(e.marginal_weight, 1.0);
    }

    #[test]
    fn adherence_ratio_arithmetic() {
        let mut v = Vec::new();
        let mut id = 0;
        for (z, adherent) in [(false, 8), (true, 6)] {
            for i in 0..10 {
                v.push(record(id, 1, z, i < adherent, false));
                id += 1;
            }
        }
        let p = panel_of(v, 1);
        let m = fitted(&p, &[Role::Adherence]);
        let w = weights_a(&p, &m, false, true, true).unwrap();
        let e = w.entries.iter().find(|e| e.period.a).unwrap();
        assert!((e.weight - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn equal_components_give_unit_weights() {
        let cfg = ScenarioConfig::standard(3).unwrap().with_n(2000).with_horizon(5).with_seed(2);
        let p = simulate_trial(&cfg).unwrap();
        let m = fitted(&p, &Role::ALL[..5]);
        for z in [false, true] {
            for w in [weights_y(&p, &m, z, z, false).unwrap(), weights_a(&p, &m, z, z, false).unwrap()] {
                assert!(w.entries.iter().all(|e| e.weight == 1.0 && e.marginal_weight == 1.0));
                assert_eq!(weighted_risk(&p, &w), empirical_cumulative_incidence(&p, z));
                assert_eq!(
                    weighted_marginal(&p, &w, Indicator::A),
                    empirical_prevalence(&p, z, |r| r.a)
                );
            }
        }
    }

    #[test]
    fn weights_telescope() {
        let cfg = ScenarioConfig::standard(2).unwrap().with_n(2000).with_horizon(4).with_seed(3);
        let p = simulate_trial(&cfg).unwrap();
        let m = fitted(&p, &Role::ALL[..5]);
        let w = weights_y(&p, &m, true, false, false).unwrap();
        for pair in w.entries.windows(2) {
            if pair[1].period.id == pair[0].period.id {
                assert_eq!(pair[1].weight, pair[0].weight * pair[1].factor);
                assert_eq!(pair[1].marginal_weight, pair[0].weight * pair[1].pre_factor);
            } else {
                assert_eq!(pair[1].weight, pair[1].factor);
            }
        }
        // a sparse arm-0 cell without events gives a zero outcome ratio
        assert!(w.entries.iter().all(|e| e.weight >= 0.0 && e.weight.is_finite()));
    }

    #[test]
    fn simplified_forms_need_a_reduced_layout() {
        let cfg = ScenarioConfig::standard(2).unwrap().with_n(5000).with_horizon(2).with_seed(1);
        let p = simulate_trial(&cfg).unwrap();
        let m = fitted(&p, &[Role::Outcome, Role::Adherence]);
        let err = weights_y(&p, &m, true, false, true).unwrap_err();
        assert!(matches!(err, EstimationError::Model(ModelError::Config(_))), "{err}");
        assert!(weights_a(&p, &m, true, false, true).is_err());
        let reduced = p.with_layout(CovariateLayout::ADHERENCE_ONLY);
        let m = fitted(&reduced, &[Role::Outcome]);
        assert!(weights_y(&reduced, &m, true, false, true).is_ok());
    }

    /// Own-arm denominators of saturated models fit to the same panel are
    /// never zero, so the models here come from a panel where arm 1 never fails.
    #[test]
    fn zero_denominator_names_the_record() {
        let train = panel_of(
            vec![
                record(0, 1, true, false, false),
                record(1, 1, false, false, true),
                record(2, 1, false, false, false),
            ],
            1,
        );
        let m = fitted(&train, &[Role::Outcome]);
        let p = panel_of(vec![record(7, 1, true, false, true), record(8, 1, false, false, false)], 1);
        assert_eq!(weights_y(&p, &m, false, true, true).unwrap().entries.len(), 1);
        match weights_y(&p, &m, true, false, true).unwrap_err() {
            EstimationError::ZeroDenominator { id, k, factor } => {
                assert_eq!((id, k, factor), (7, 1, "outcome density"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn weighted_counting() {
        let v = vec![
            record(0, 1, true, false, true),
            record(1, 1, true, false, false),
            record(2, 1, true, true, false),
            record(3, 1, true, true, false),
        ];
        let p = panel_of(v, 1);
        let mut entries = Vec::new();
        for (period, w) in p.periods().iter().zip([2.0, 2.0, 1.0, 1.0]) {
            entries.push(WeightEntry {
                period: *period,
                factor: w,
                pre_factor: w,
                weight: w,
                marginal_weight: w,
            });
        }
        let w = WeightSeries {
            label: "test".into(),
            z_a: true,
            z_y: true,
            arm: true,
            entries,
            capped: 0,
        };
        let r = weighted_risk(&p, &w);
        assert!((r.points[0].hazard - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(weighted_marginal(&p, &w, Indicator::A), vec![Some(1.0 / 3.0)]);
        let d = diagnostics(&p, &w);
        assert_eq!((d[0].min, d[0].max, d[0].mean), (1.0, 2.0, 1.5));
        assert!((d[0].ess - 36.0 / 10.0).abs() < 1e-15);

        let mut capped = w.clone();
        capped.cap(1.5);
        assert_eq!(capped.capped, 2);
        assert_eq!(weighted_risk(&p, &capped).points[0].hazard, 1.5 / 5.0);
    }

    #[test]
    fn single_record_prevalence_ignores_its_weight() {
        let p = panel_of(vec![record(0, 1, true, true, false)], 1);
        let e = WeightEntry {
            period: p.periods()[0],
            factor: 7.0,
            pre_factor: 7.0,
            weight: 7.0,
            marginal_weight: 7.0,
        };
        let w = WeightSeries {
            label: "x".into(),
            z_a: true,
            z_y: true,
            arm: true,
            entries: vec![e],
            capped: 0,
        };
        assert_eq!(weighted_marginal(&p, &w, Indicator::A), vec![Some(1.0)]);
    }

    #[test]
    fn crossover_factors() {
        let cfg = ScenarioConfig::standard(1)
            .unwrap()
            .with_n(3000)
            .with_horizon(4)
            .with_seed(4)
            .with_crossover(LinearProb::constant(0.2));
        let p = simulate_trial(&cfg).unwrap();
        let m = fitted(&p, &[Role::Outcome, Role::ArmGivenCovariates, Role::ArmGivenAdherenceCovariate, Role::Crossover]);
        let c = crossover_weights(&p, &m, true).unwrap();
        let mut kept = Vec::new();
        for e in &c.entries {
            if e.period.c {
                assert_eq!(e.weight, 0.0);
            } else {
                assert!(e.factor >= 1.0);
                kept.push(e.factor);
            }
        }
        // crossover probability is 0.2 everywhere
        let mean = kept.iter().sum::<f64>() / kept.len() as f64;
        assert!((mean - 1.25).abs() < 0.02, "{mean}");
        let base = weights_y(&p, &m, true, false, false).unwrap();
        let both = compose(&base, &c, "W_Y_crossover").unwrap();
        assert!(both.entries.iter().zip(&base.entries).all(|(b, a)| b.period == a.period));
        assert!(compose(&base, &crossover_weights(&p, &m, false).unwrap(), "x").is_err());
    }

    #[test]
    fn unit_crossover_factors_leave_weights_untouched() {
        let cfg = ScenarioConfig::standard(2).unwrap().with_n(1000).with_horizon(4).with_seed(5);
        let p = simulate_trial(&cfg).unwrap();
        let m = fitted(&p, &Role::ALL[..5]);
        // a crossover model fit to C = 0 everywhere predicts P(C = 0) = 1
        let cross = fit(&p, &ModelSpec::saturated(Target::Crossover, &["a_prev", "z"])).unwrap();
        let mut all: Vec<(Role, crate::models::FittedModel)> = m.fitted().map(|(r, f)| (r, f.clone())).collect();
        all.push((Role::Crossover, cross));
        let m = FittedSet::from_models(p.layout(), all);
        for z in [false, true] {
            let c = crossover_weights(&p, &m, z).unwrap();
            assert!(c.entries.iter().all(|e| e.factor == 1.0));
            let base = weights_y(&p, &m, z, !z, false).unwrap();
            let both = compose(&base, &c, "W_Y_crossover").unwrap();
            assert_eq!(both.entries, base.entries);
        }
    }

    #[test]
    fn estimand_labels_and_roles() {
        let mut e = Estimand::new(true, false, Variant::OutcomeRatio);
        assert_eq!(e.label(), "W_Y_full");
        assert!(e.arm());
        e.simplified = true;
        assert_eq!(e.label(), "W_Y_simplified");
        assert_eq!(e.roles(), vec![Role::Outcome]);
        e.variant = Variant::AdherenceRatio;
        assert!(!e.arm());
        e.crossover = true;
        assert_eq!(e.label(), "W_A_crossover");
        assert_eq!(e.roles(), vec![Role::Adherence, Role::Crossover]);
    }
}
