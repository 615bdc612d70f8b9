use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::EstimationError;
use crate::panel::{Panel, PersonPeriod};
use crate::risk::RiskCurve;

fn default_level() -> f64 {
    0.95
}

fn default_min_success() -> f64 {
    0.8
}

/// Nonparametric bootstrap settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    pub replicates: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub seed: u64,
    /// Smallest fraction of replicates that must succeed.
    #[serde(default = "default_min_success")]
    pub min_success: f64,
}

impl BootstrapConfig {
    pub fn new(replicates: usize, level: f64, seed: u64) -> BootstrapConfig {
        BootstrapConfig {
            replicates,
            level,
            seed,
            min_success: default_min_success(),
        }
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        if self.replicates == 0 {
            return Err(EstimationError::Domain("bootstrap needs at least one replicate".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(EstimationError::Domain(format!("bootstrap level {} is not in (0, 1)", self.level)));
        }
        if !(0.0..=1.0).contains(&self.min_success) {
            return Err(EstimationError::Domain(format!(
                "bootstrap min_success {} is not in [0, 1]",
                self.min_success
            )));
        }
        Ok(())
    }
}

/// Percentile intervals for every interval of the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub successes: usize,
    /// One message per failed replicate, in replicate order.
    pub failures: Vec<String>,
    pub level: f64,
    pub intervals: Vec<(f64, f64)>,
}

impl BootstrapSummary {
    /// Attaches the intervals to `curve`.
    pub fn annotate(&self, curve: &mut RiskCurve) {
        for (p, iv) in curve.points.iter_mut().zip(&self.intervals) {
            p.interval = Some(*iv);
        }
        curve.level = Some(self.level);
    }
}

/// Linear-interpolation quantile (the usual "type 7") of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Replicate `b`: individuals drawn with replacement within each arm, so arm
/// sizes are kept. Resampled individuals are renumbered from 0.
pub fn resample(panel: &Panel, seed: u64, b: u64) -> Panel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b);
    let mut by_arm: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for i in 0..panel.n_individuals() {
        by_arm[usize::from(panel.individual(i)[0].z)].push(i);
    }
    let mut periods: Vec<PersonPeriod> = Vec::with_capacity(panel.len());
    let mut id = 0u64;
    for members in &by_arm {
        for _ in 0..members.len() {
            let pick = members[rng.gen_range(0..members.len())];
            periods.extend(panel.individual(pick).iter().map(|p| PersonPeriod { id, ..*p }));
            id += 1;
        }
    }
    Panel::from_sorted(periods, panel.horizon(), panel.layout(), panel.has_crossover())
}

/// Percentile bootstrap of a risk-curve estimator.
///
/// A replicate fails when the estimator errors or returns a curve shorter
/// than the horizon; intervals use the successes only, and at least
/// `min_success` of the replicates must succeed.
pub fn bootstrap<F>(panel: &Panel, cfg: &BootstrapConfig, estimator: F) -> Result<BootstrapSummary, EstimationError>
where
    F: Fn(&Panel) -> Result<RiskCurve, EstimationError> + Sync,
{
    cfg.validate()?;
    let horizon = panel.horizon() as usize;
    let runs: Vec<Result<Vec<f64>, String>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|b| {
            let curve = estimator(&resample(panel, cfg.seed, b)).map_err(|e| format!("replicate {b}: {e}"))?;
            if curve.len() < horizon {
                return Err(format!("replicate {b}: risk curve stops at k={}", curve.len()));
            }
            Ok(curve.risks())
        })
        .collect();
    let mut failures = Vec::new();
    let mut columns = vec![Vec::new(); horizon];
    for run in runs {
        match run {
            Ok(risks) => {
                for (col, r) in columns.iter_mut().zip(risks) {
                    col.push(r);
                }
            }
            Err(msg) => failures.push(msg),
        }
    }
    let successes = cfg.replicates - failures.len();
    let required = ((cfg.min_success * cfg.replicates as f64).ceil() as usize).max(1);
    if successes < required {
        return Err(EstimationError::TooFewReplicates {
            successes,
            replicates: cfg.replicates,
            required,
        });
    }
    let tail = (1.0 - cfg.level) / 2.0;
    let intervals = columns
        .iter_mut()
        .map(|col| {
            col.sort_by(f64::total_cmp);
            (percentile(col, tail), percentile(col, 1.0 - tail))
        })
        .collect();
    Ok(BootstrapSummary {
        replicates: cfg.replicates,
        successes,
        failures,
        level: cfg.level,
        intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{empirical_cumulative_incidence, simulate_trial, ScenarioConfig};

    fn panel() -> Panel {
        simulate_trial(&ScenarioConfig::standard(1).unwrap().with_n(400).with_horizon(3).with_seed(8)).unwrap()
    }

    fn itt(p: &Panel) -> Result<RiskCurve, EstimationError> {
        Ok(empirical_cumulative_incidence(p, true))
    }

    #[test]
    fn quantiles() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&x, 0.0), 1.0);
        assert_eq!(percentile(&x, 0.5), 3.0);
        assert_eq!(percentile(&x, 0.1), 1.4);
        assert_eq!(percentile(&x, 1.0), 5.0);
        assert_eq!(percentile(&[7.0], 0.025), 7.0);
    }

    #[test]
    fn resampling_keeps_arm_sizes() {
        let p = panel();
        let r = resample(&p, 3, 0);
        let arms = |p: &Panel| {
            let ones = p.individuals().filter(|r| r[0].z).count();
            (p.n_individuals() - ones, ones)
        };
        assert_eq!(arms(&r), arms(&p));
        assert_eq!(r, resample(&p, 3, 0));
        assert_ne!(r, resample(&p, 3, 1));
    }

    #[test]
    fn single_replicate_is_degenerate() {
        let p = panel();
        let s = bootstrap(&p, &BootstrapConfig::new(1, 0.95, 1), itt).unwrap();
        let only = empirical_cumulative_incidence(&resample(&p, 1, 0), true).risks();
        for (iv, r) in s.intervals.iter().zip(only) {
            assert_eq!(*iv, (r, r));
        }
    }

    #[test]
    fn deterministic_and_covers_the_point() {
        let p = panel();
        let cfg = BootstrapConfig::new(50, 0.95, 9);
        let a = bootstrap(&p, &cfg, itt).unwrap();
        assert_eq!(a, bootstrap(&p, &cfg, itt).unwrap());
        let point = empirical_cumulative_incidence(&p, true);
        let mut annotated = point.clone();
        a.annotate(&mut annotated);
        for pt in &annotated.points {
            let (lo, hi) = pt.interval.unwrap();
            assert!(lo <= pt.risk && pt.risk <= hi);
        }
    }

    #[test]
    fn domain_and_failure_handling() {
        let p = panel();
        let zero = bootstrap(&p, &BootstrapConfig::new(0, 0.95, 1), itt);
        assert!(matches!(zero, Err(EstimationError::Domain(_))));
        assert!(bootstrap(&p, &BootstrapConfig::new(5, 1.5, 1), itt).is_err());
        let flaky = |q: &Panel| {
            if q.periods()[0].y {
                Err(EstimationError::Domain("boom".into()))
            } else {
                itt(q)
            }
        };
        let always = |_: &Panel| Err::<RiskCurve, _>(EstimationError::Domain("boom".into()));
        let err = bootstrap(&p, &BootstrapConfig::new(10, 0.9, 1), always).unwrap_err();
        assert!(matches!(err, EstimationError::TooFewReplicates { successes: 0, replicates: 10, required: 8 }));
        let s = bootstrap(&p, &BootstrapConfig::new(10, 0.9, 1), flaky).unwrap();
        assert_eq!(s.successes + s.failures.len(), 10);
    }
}
