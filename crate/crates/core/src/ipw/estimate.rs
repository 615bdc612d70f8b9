use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Deserialize;

use super::{
    bootstrap, compose, crossover_weights, diagnostics, weighted_marginal, weighted_risk, weights_a, weights_y,
    BootstrapConfig, BootstrapSummary, Estimand, Indicator, Variant, WeightDiagnostics, WeightSeries,
};
use crate::error::{ConfigError, EstimationError};
use crate::models::{FittedSet, ModelSpecs, Role, SpecOverride};
use crate::panel::{CovariateLayout, Panel};
use crate::risk::RiskCurve;
use crate::sim::{empirical_cumulative_incidence, empirical_prevalence};

/// Everything an estimation run needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationConfig {
    pub estimand: Estimand,
    /// Covariates the analysis treats as measured; `None` uses the panel's.
    pub layout: Option<CovariateLayout>,
    /// Optional clip for cumulative weights. Off unless set.
    pub cap: Option<f64>,
    pub models: ModelSpecs,
    pub bootstrap: Option<BootstrapConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    estimand: EstimandSection,
    #[serde(default)]
    models: BTreeMap<String, SpecOverride>,
    bootstrap: Option<BootstrapConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimandSection {
    z_a: u8,
    z_y: u8,
    #[serde(default)]
    variant: Variant,
    #[serde(default)]
    simplified: bool,
    #[serde(default)]
    crossover: bool,
    layout: Option<String>,
    cap: Option<f64>,
}

fn arm(name: &str, v: u8) -> Result<bool, ConfigError> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(ConfigError::Invalid(format!("{name} must be 0 or 1, got {v}"))),
    }
}

pub fn parse_layout(name: &str) -> Result<CovariateLayout, ConfigError> {
    Ok(match name {
        "both" => CovariateLayout::BOTH,
        "adherence-only" => CovariateLayout::ADHERENCE_ONLY,
        "outcome-only" => CovariateLayout::OUTCOME_ONLY,
        "none" => CovariateLayout::NONE,
        other => {
            return Err(ConfigError::Invalid(format!(
                "unknown layout `{other}` (expected both, adherence-only, outcome-only or none)"
            )))
        }
    })
}

impl EstimationConfig {
    /// Saturated default models, no cap, no bootstrap.
    pub fn new(estimand: Estimand) -> EstimationConfig {
        EstimationConfig {
            estimand,
            layout: None,
            cap: None,
            models: ModelSpecs::default(),
            bootstrap: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<EstimationConfig, ConfigError> {
        let file: File = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let e = file.estimand;
        let mut models = ModelSpecs::default();
        for (key, o) in &file.models {
            let role = Role::ALL
                .into_iter()
                .find(|r| r.key() == key)
                .ok_or_else(|| ConfigError::Invalid(format!("unknown model section [models.{key}]")))?;
            models.apply(role, o).map_err(|err| ConfigError::Invalid(err.to_string()))?;
        }
        if let Some(c) = e.cap {
            if !(c > 0.0) {
                return Err(ConfigError::Invalid(format!("cap must be positive, got {c}")));
            }
        }
        if let Some(b) = &file.bootstrap {
            b.validate().map_err(|err| ConfigError::Invalid(err.to_string()))?;
        }
        Ok(EstimationConfig {
            estimand: Estimand {
                z_a: arm("z_a", e.z_a)?,
                z_y: arm("z_y", e.z_y)?,
                variant: e.variant,
                simplified: e.simplified,
                crossover: e.crossover,
            },
            layout: e.layout.as_deref().map(parse_layout).transpose()?,
            cap: e.cap,
            models,
            bootstrap: file.bootstrap,
        })
    }

    fn resolve_layout(&self, panel: &Panel) -> Result<CovariateLayout, EstimationError> {
        let have = panel.layout();
        let want = self.layout.unwrap_or(have);
        for (name, declared, present) in [("l_a", want.l_a, have.l_a), ("l_y", want.l_y, have.l_y)] {
            if declared && !present {
                return Err(EstimationError::Domain(format!("layout declares {name} but the panel has no {name} column")));
            }
        }
        Ok(want)
    }

    /// Fits the models and forms the (possibly crossover-augmented, capped) weights.
    pub fn weights(&self, panel: &Panel) -> Result<(WeightSeries, FittedSet), EstimationError> {
        let e = self.estimand;
        if e.crossover && !panel.has_crossover() {
            return Err(EstimationError::Domain("crossover weights requested but the panel has no c column".into()));
        }
        let layout = self.resolve_layout(panel)?;
        let models = FittedSet::fit(panel, &self.models, layout, &e.roles())?;
        let base = match e.variant {
            Variant::OutcomeRatio => weights_y(panel, &models, e.z_a, e.z_y, e.simplified)?,
            Variant::AdherenceRatio => weights_a(panel, &models, e.z_a, e.z_y, e.simplified)?,
        };
        let mut w = if e.crossover {
            compose(&base, &crossover_weights(panel, &models, e.arm())?, e.label())?
        } else {
            base
        };
        if let Some(cap) = self.cap {
            w.cap(cap);
        }
        Ok((w, models))
    }

    /// Point estimate of the risk curve only.
    pub fn risk(&self, panel: &Panel) -> Result<RiskCurve, EstimationError> {
        Ok(weighted_risk(panel, &self.weights(panel)?.0))
    }
}

/// Output of [`estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub estimand: Estimand,
    pub layout: CovariateLayout,
    pub curve: RiskCurve,
    /// Empirical cumulative incidence of arm `z_a`.
    pub itt: RiskCurve,
    pub diagnostics: Vec<WeightDiagnostics>,
    /// Weighted prevalence under the estimand, then the raw prevalence in arm `z_a`.
    pub prevalences: Vec<(Indicator, Vec<Option<f64>>, Vec<Option<f64>>)>,
    pub snapshots: Vec<(Role, String)>,
    pub bootstrap: Option<BootstrapSummary>,
    pub capped: usize,
    pub warnings: Vec<String>,
    pub metadata: Vec<(String, String)>,
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl EstimateReport {
    /// `k,variable,separable,itt`
    pub fn prevalence_csv(&self) -> String {
        let mut out = String::from("k,variable,separable,itt\n");
        for (ind, w, raw) in &self.prevalences {
            for (i, (a, b)) in w.iter().zip(raw).enumerate() {
                let _ = writeln!(out, "{},{},{},{}", i + 1, ind.name(), cell(*a), cell(*b));
            }
        }
        out
    }

    /// `key: value` lines followed by warnings.
    pub fn metadata_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "{k}: {v}");
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

fn layout_name(l: CovariateLayout) -> &'static str {
    match (l.l_a, l.l_y) {
        (true, true) => "both",
        (true, false) => "adherence-only",
        (false, true) => "outcome-only",
        (false, false) => "none",
    }
}

/// Fits the nuisance models, forms the weights and the weighted risk curve,
/// and optionally bootstraps it.
pub fn estimate(panel: &Panel, cfg: &EstimationConfig) -> Result<EstimateReport, EstimationError> {
    let e = cfg.estimand;
    let layout = cfg.resolve_layout(panel)?;
    let (w, models) = cfg.weights(panel)?;
    let mut curve = weighted_risk(panel, &w);
    let mut warnings = curve.warnings.clone();

    let mut indicators = vec![Indicator::A];
    if layout.l_a {
        indicators.push(Indicator::LA);
    }
    if layout.l_y {
        indicators.push(Indicator::LY);
    }
    let prevalences = indicators
        .into_iter()
        .map(|ind| {
            let raw = match ind {
                Indicator::A => empirical_prevalence(panel, e.z_a, |p| p.a),
                Indicator::LA => empirical_prevalence(panel, e.z_a, |p| p.l_a),
                Indicator::LY => empirical_prevalence(panel, e.z_a, |p| p.l_y),
            };
            (ind, weighted_marginal(panel, &w, ind), raw)
        })
        .collect();

    let mut metadata = vec![
        ("estimand".to_string(), e.describe()),
        ("weighted arm".to_string(), u8::from(e.arm()).to_string()),
        ("layout".to_string(), layout_name(layout).to_string()),
        (
            "prevalence".to_string(),
            "weighted mean among at-risk records; weights omit the current outcome and crossover factors".to_string(),
        ),
    ];
    for role in e.roles() {
        let spec = models.get(role)?.spec.describe();
        let tag = if cfg.models.is_default(role) { " (default form)" } else { "" };
        metadata.push((format!("model {}", role.key()), format!("{spec}{tag}")));
    }
    match cfg.cap {
        Some(cap) => {
            metadata.push(("weight cap".into(), cap.to_string()));
            metadata.push(("weights capped".into(), w.capped.to_string()));
            if w.capped > 0 {
                warnings.push(format!("{} cumulative weights clipped at {cap}; the estimand is altered", w.capped));
            }
        }
        None => metadata.push(("weight cap".into(), "none".into())),
    }
    if panel.has_crossover() && !e.crossover {
        warnings.push("panel records crossover but crossover weights are off; crossover is treated as ignorable".into());
    }

    let bootstrap = match &cfg.bootstrap {
        Some(b) => {
            let s = bootstrap(panel, b, |p| cfg.risk(p))?;
            s.annotate(&mut curve);
            metadata.push(("bootstrap".into(), format!("{} of {} replicates, level {}", s.successes, s.replicates, s.level)));
            for f in &s.failures {
                warnings.push(f.clone());
            }
            Some(s)
        }
        None => None,
    };

    Ok(EstimateReport {
        estimand: e,
        layout,
        itt: empirical_cumulative_incidence(panel, e.z_a),
        diagnostics: diagnostics(panel, &w),
        prevalences,
        snapshots: models.fitted().map(|(r, m)| (r, m.snapshot())).collect(),
        bootstrap,
        capped: w.capped,
        curve,
        warnings,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Family;
    use crate::sim::{simulate_trial, ScenarioConfig};

    const TEXT: &str = r#"
[estimand]
z_a = 1
z_y = 0
variant = "w_a"
layout = "both"
cap = 50.0

[models.adherence]
family = "pooled-logistic"
features = ["a_prev", "l_a", "l_y", "z", "z*a_prev"]

[bootstrap]
replicates = 20
seed = 3
"#;

    #[test]
    fn parses_config() {
        let c = EstimationConfig::from_toml(TEXT).unwrap();
        assert_eq!(c.estimand.variant, Variant::AdherenceRatio);
        assert!(c.estimand.z_a && !c.estimand.z_y);
        assert_eq!(c.cap, Some(50.0));
        assert_eq!(c.models.get(Role::Adherence).family, Family::PooledLogistic);
        assert!(!c.models.is_default(Role::Adherence));
        assert!(c.models.is_default(Role::Outcome));
        let b = c.bootstrap.unwrap();
        assert_eq!((b.replicates, b.level, b.seed, b.min_success), (20, 0.95, 3, 0.8));
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            "[estimand]\nz_a = 2\nz_y = 0\n",
            "[estimand]\nz_a = 1\nz_y = 0\nlayout = \"most\"\n",
            "[estimand]\nz_a = 1\nz_y = 0\n[models.weather]\nfamily = \"saturated\"\n",
            "[estimand]\nz_a = 1\nz_y = 0\n[bootstrap]\nreplicates = 0\n",
            "[estimand]\nz_a = 1\nz_y = 0\ncap = -1.0\n",
            "[estimand]\nz_a = 1\n",
            "[estimand]\nz_a = 1\nz_y = 0\ncolour = 1\n",
        ] {
            assert!(EstimationConfig::from_toml(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn end_to_end() {
        let p = simulate_trial(&ScenarioConfig::standard(2).unwrap().with_n(3000).with_horizon(4).with_seed(6)).unwrap();
        let mut cfg = EstimationConfig::from_toml(TEXT).unwrap();
        let r = estimate(&p, &cfg).unwrap();
        assert_eq!(r.curve.len(), 4);
        assert!(r.curve.points.iter().all(|pt| pt.interval.is_some()));
        assert_eq!(r.curve.level, Some(0.95));
        assert_eq!(r.prevalences.len(), 3);
        assert_eq!(r.snapshots.len(), 3);
        assert!(r.metadata_text().contains("model adherence: "));
        assert_eq!(r.prevalence_csv().lines().count(), 1 + 3 * 4);

        cfg.estimand.z_y = true;
        cfg.bootstrap = None;
        let same = estimate(&p, &cfg).unwrap();
        assert_eq!(same.curve, same.itt);

        cfg.estimand.crossover = true;
        assert!(matches!(estimate(&p, &cfg), Err(EstimationError::Domain(_))));
        cfg.estimand.crossover = false;
        let reduced = p.with_layout(CovariateLayout::NONE);
        cfg.layout = Some(CovariateLayout::BOTH);
        assert!(matches!(estimate(&reduced, &cfg), Err(EstimationError::Domain(_))));
    }
}
