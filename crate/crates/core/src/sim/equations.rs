//! Linear-probability structural equations and scenario configuration.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// A term a structural equation may load on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    APrev,
    ZA,
    ZY,
    ZAAPrev,
    ZYAPrev,
    LA,
    LY,
    A,
}

impl Term {
    pub const ALL: [Term; 8] = [
        Term::APrev,
        Term::ZA,
        Term::ZY,
        Term::ZAAPrev,
        Term::ZYAPrev,
        Term::LA,
        Term::LY,
        Term::A,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Term::APrev => "a_prev",
            Term::ZA => "z_a",
            Term::ZY => "z_y",
            Term::ZAAPrev => "z_a_a_prev",
            Term::ZYAPrev => "z_y_a_prev",
            Term::LA => "l_a",
            Term::LY => "l_y",
            Term::A => "a",
        }
    }

    fn value(self, s: &ParentState) -> f64 {
        let v = match self {
            Term::APrev => s.a_prev,
            Term::ZA => s.z_a,
            Term::ZY => s.z_y,
            Term::ZAAPrev => s.z_a && s.a_prev,
            Term::ZYAPrev => s.z_y && s.a_prev,
            Term::LA => s.l_a,
            Term::LY => s.l_y,
            Term::A => s.a,
        };
        f64::from(u8::from(v))
    }
}

/// Everything a within-interval draw can condition on. Later variables in the
/// draw order (L_A, L_Y, A, C, Y) are ignored by earlier equations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParentState {
    pub a_prev: bool,
    pub z_a: bool,
    pub z_y: bool,
    pub l_a: bool,
    pub l_y: bool,
    pub a: bool,
}

impl ParentState {
    fn all() -> impl Iterator<Item = ParentState> {
        (0u8..64).map(|bits| ParentState {
            a_prev: bits & 1 != 0,
            z_a: bits & 2 != 0,
            z_y: bits & 4 != 0,
            l_a: bits & 8 != 0,
            l_y: bits & 16 != 0,
            a: bits & 32 != 0,
        })
    }
}

impl fmt::Display for ParentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = |v: bool| u8::from(v);
        write!(
            f,
            "a_prev={}, z_a={}, z_y={}, l_a={}, l_y={}, a={}",
            b(self.a_prev),
            b(self.z_a),
            b(self.z_y),
            b(self.l_a),
            b(self.l_y),
            b(self.a)
        )
    }
}

/// `p = intercept + Σ coefficient · term`, never clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProb {
    pub intercept: f64,
    #[serde(flatten)]
    pub terms: BTreeMap<Term, f64>,
}

impl LinearProb {
    pub fn new(intercept: f64, terms: &[(Term, f64)]) -> Self {
        LinearProb {
            intercept,
            terms: terms.iter().copied().collect(),
        }
    }

    pub fn constant(p: f64) -> Self {
        LinearProb::new(p, &[])
    }

    #[inline]
    pub fn eval(&self, s: &ParentState) -> f64 {
        self.terms
            .iter()
            .fold(self.intercept, |acc, (t, c)| acc + c * t.value(s))
    }
}

/// The variables drawn each interval, in draw order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    LA,
    LY,
    A,
    C,
    Y,
}

impl Equation {
    fn allowed(self, t: Term) -> bool {
        match self {
            Equation::LA => !matches!(t, Term::LA | Term::LY | Term::A),
            Equation::LY => !matches!(t, Term::LY | Term::A),
            Equation::A => t != Term::A,
            Equation::C | Equation::Y => true,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Equation::LA => "l_a",
            Equation::LY => "l_y",
            Equation::A => "adherence",
            Equation::C => "crossover",
            Equation::Y => "y",
        }
    }
}

/// The data-generating equations of the simulated trial.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralEquations {
    pub l_a: LinearProb,
    pub l_y: LinearProb,
    pub a: LinearProb,
    pub y: LinearProb,
    /// Optional per-interval crossover hazard; `None` means crossover never occurs.
    pub crossover: Option<LinearProb>,
}

impl StructuralEquations {
    /// AKI-like covariate: `0.05 + 0.035·A_{k-1} − 0.035·Z_A·A_{k-1}`.
    pub fn default_l_a() -> LinearProb {
        LinearProb::new(0.05, &[(Term::APrev, 0.035), (Term::ZAAPrev, -0.035)])
    }

    /// Blood-pressure covariate: `0.95 − 0.60·A_{k-1} − 0.15·Z_Y·A_{k-1}`.
    pub fn default_l_y() -> LinearProb {
        LinearProb::new(0.95, &[(Term::APrev, -0.60), (Term::ZYAPrev, -0.15)])
    }

    /// Outcome: `0.035 + 0.01·L_Y − 0.03·A + 0.01·L_A`.
    pub fn default_y() -> LinearProb {
        LinearProb::new(0.035, &[(Term::LY, 0.01), (Term::A, -0.03), (Term::LA, 0.01)])
    }

    /// The three adherence models of the simulation study.
    pub fn adherence_model(model: u8) -> Result<LinearProb, ConfigError> {
        let base = [(Term::ZAAPrev, 0.2)];
        Ok(match model {
            1 => LinearProb::new(0.6, &base),
            2 => LinearProb::new(0.6, &[base[0], (Term::LA, -0.5)]),
            3 => LinearProb::new(0.6, &[base[0], (Term::LA, -0.5), (Term::LY, 0.2)]),
            m => {
                return Err(ConfigError::Invalid(format!(
                    "adherence model must be 1, 2 or 3, got {m}"
                )))
            }
        })
    }

    /// Standard equations with the given adherence model.
    pub fn standard(model: u8) -> Result<Self, ConfigError> {
        let eqs = StructuralEquations {
            l_a: Self::default_l_a(),
            l_y: Self::default_l_y(),
            a: Self::adherence_model(model)?,
            y: Self::default_y(),
            crossover: None,
        };
        eqs.validate()?;
        Ok(eqs)
    }

    fn each(&self) -> impl Iterator<Item = (Equation, &LinearProb)> {
        [
            (Equation::LA, Some(&self.l_a)),
            (Equation::LY, Some(&self.l_y)),
            (Equation::A, Some(&self.a)),
            (Equation::C, self.crossover.as_ref()),
            (Equation::Y, Some(&self.y)),
        ]
        .into_iter()
        .filter_map(|(e, p)| p.map(|p| (e, p)))
    }

    /// Rejects terms that look ahead in the draw order and any equation whose
    /// probability leaves `[0, 1]` at some parent configuration.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (eq, lp) in self.each() {
            if !lp.intercept.is_finite() || lp.terms.values().any(|c| !c.is_finite()) {
                return Err(ConfigError::Invalid(format!(
                    "{} equation has a non-finite coefficient",
                    eq.name()
                )));
            }
            if let Some(t) = lp.terms.keys().find(|t| !eq.allowed(**t)) {
                return Err(ConfigError::Invalid(format!(
                    "{} equation cannot depend on `{}` (drawn later in the interval)",
                    eq.name(),
                    t.name()
                )));
            }
            for s in ParentState::all() {
                let p = lp.eval(&s);
                if !(0.0..=1.0).contains(&p) {
                    return Err(ConfigError::Probability {
                        equation: eq.name(),
                        state: s.to_string(),
                        value: p,
                    });
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn p_l_a(&self, a_prev: bool, z_a: bool, z_y: bool) -> f64 {
        self.l_a.eval(&ParentState {
            a_prev,
            z_a,
            z_y,
            ..Default::default()
        })
    }

    #[inline]
    pub fn p_l_y(&self, a_prev: bool, z_a: bool, z_y: bool, l_a: bool) -> f64 {
        self.l_y.eval(&ParentState {
            a_prev,
            z_a,
            z_y,
            l_a,
            ..Default::default()
        })
    }

    #[inline]
    pub fn p_a(&self, a_prev: bool, z_a: bool, z_y: bool, l_a: bool, l_y: bool) -> f64 {
        self.a.eval(&ParentState {
            a_prev,
            z_a,
            z_y,
            l_a,
            l_y,
            a: false,
        })
    }

    #[inline]
    pub fn p_y(&self, s: &ParentState) -> f64 {
        self.y.eval(s)
    }

    #[inline]
    pub fn p_c(&self, s: &ParentState) -> Option<f64> {
        self.crossover.as_ref().map(|c| c.eval(s))
    }
}

/// A fully specified simulated world.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_per_arm: usize,
    pub horizon: u32,
    pub adherence_model: u8,
    pub seed: u64,
    pub equations: StructuralEquations,
    /// Component values for counterfactual runs, `(z_A, z_Y)`.
    pub referent: Option<(bool, bool)>,
}

impl ScenarioConfig {
    /// Standard trial (500,000 per arm, 24 months) for one adherence model.
    pub fn standard(model: u8) -> Result<Self, ConfigError> {
        Ok(ScenarioConfig {
            n_per_arm: 500_000,
            horizon: 24,
            adherence_model: model,
            seed: 20_240_101,
            equations: StructuralEquations::standard(model)?,
            referent: None,
        })
    }

    pub fn with_n(mut self, n_per_arm: usize) -> Self {
        self.n_per_arm = n_per_arm;
        self
    }

    pub fn with_horizon(mut self, horizon: u32) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_crossover(mut self, crossover: LinearProb) -> Self {
        self.equations.crossover = Some(crossover);
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon < 1 {
            return Err(ConfigError::Invalid("horizon must be at least 1".into()));
        }
        self.equations.validate()
    }

    /// Parses the `[trial]` / `[models]` / `[coefficients]` TOML format.
    ///
    /// ```toml
    /// [trial]
    /// n_per_arm = 1000
    /// horizon = 24
    /// seed = 7
    ///
    /// [models]
    /// adherence_model = 2
    ///
    /// [coefficients.y]
    /// intercept = 0.035
    /// l_y = 0.01
    /// a = -0.03
    /// l_a = 0.01
    /// ```
    ///
    /// Equations absent from `[coefficients]` (and `[models.adherence]`) take
    /// the standard defaults.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        file.into_config()
    }

    pub fn to_toml(&self) -> String {
        let file = ScenarioFile {
            trial: TrialSection {
                n_per_arm: self.n_per_arm,
                horizon: self.horizon,
                seed: self.seed,
                referent_za: self.referent.map(|r| u8::from(r.0)),
                referent_zy: self.referent.map(|r| u8::from(r.1)),
            },
            models: ModelsSection {
                adherence_model: self.adherence_model,
                adherence: Some(self.equations.a.clone()),
            },
            coefficients: CoefficientsSection {
                l_a: Some(self.equations.l_a.clone()),
                l_y: Some(self.equations.l_y.clone()),
                y: Some(self.equations.y.clone()),
                crossover: self.equations.crossover.clone(),
            },
        };
        toml::to_string(&file).expect("scenario config serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    trial: TrialSection,
    #[serde(default)]
    models: ModelsSection,
    #[serde(default)]
    coefficients: CoefficientsSection,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrialSection {
    n_per_arm: usize,
    horizon: u32,
    #[serde(default)]
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    referent_za: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    referent_zy: Option<u8>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelsSection {
    #[serde(default = "default_model")]
    adherence_model: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adherence: Option<LinearProb>,
}

fn default_model() -> u8 {
    1
}

impl Default for ModelsSection {
    fn default() -> Self {
        ModelsSection {
            adherence_model: default_model(),
            adherence: None,
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoefficientsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    l_a: Option<LinearProb>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    l_y: Option<LinearProb>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<LinearProb>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    crossover: Option<LinearProb>,
}

fn bit(v: u8, name: &str) -> Result<bool, ConfigError> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(ConfigError::Invalid(format!("{name} must be 0 or 1"))),
    }
}

impl ScenarioFile {
    fn into_config(self) -> Result<ScenarioConfig, ConfigError> {
        let a = match self.models.adherence {
            Some(a) => a,
            None => StructuralEquations::adherence_model(self.models.adherence_model)?,
        };
        let equations = StructuralEquations {
            l_a: self.coefficients.l_a.unwrap_or_else(StructuralEquations::default_l_a),
            l_y: self.coefficients.l_y.unwrap_or_else(StructuralEquations::default_l_y),
            a,
            y: self.coefficients.y.unwrap_or_else(StructuralEquations::default_y),
            crossover: self.coefficients.crossover,
        };
        let referent = match (self.trial.referent_za, self.trial.referent_zy) {
            (None, None) => None,
            (Some(za), Some(zy)) => Some((bit(za, "referent_za")?, bit(zy, "referent_zy")?)),
            _ => {
                return Err(ConfigError::Invalid(
                    "referent_za and referent_zy must be given together".into(),
                ))
            }
        };
        let cfg = ScenarioConfig {
            n_per_arm: self.trial.n_per_arm,
            horizon: self.trial.horizon,
            adherence_model: self.models.adherence_model,
            seed: self.trial.seed,
            equations,
            referent,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
