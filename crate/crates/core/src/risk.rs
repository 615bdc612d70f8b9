//! Discrete-time hazards and cumulative incidence.

use std::fmt::Write as _;

/// One interval of a risk curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskPoint {
    pub k: u32,
    /// Conditional probability of failure at `k` among those at risk.
    pub hazard: f64,
    /// Probability of failure by the end of `k`.
    pub risk: f64,
    /// Total (possibly weighted) mass at risk at `k`.
    pub at_risk_mass: f64,
    /// Bootstrap percentile interval for `risk`.
    pub interval: Option<(f64, f64)>,
}

/// Hazards and cumulative incidence for one intervention or arm.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RiskCurve {
    pub points: Vec<RiskPoint>,
    /// Confidence level of the intervals, when present.
    pub level: Option<f64>,
    pub warnings: Vec<String>,
}

impl RiskCurve {
    /// Builds the curve from per-interval `(event mass, at-risk mass)` sums
    /// for `k = 1..=sums.len()`, via `R_k = R_{k-1} + (1 - R_{k-1}) λ_k`.
    ///
    /// The curve stops, with a warning, at the first interval whose at-risk
    /// mass is zero.
    pub fn from_sums(sums: &[(f64, f64)]) -> RiskCurve {
        let mut points = Vec::with_capacity(sums.len());
        let mut warnings = Vec::new();
        let mut risk = 0.0;
        for (i, &(events, mass)) in sums.iter().enumerate() {
            let k = i as u32 + 1;
            if !(mass > 0.0) {
                warnings.push(format!("empty risk set at k={k}; curve truncated"));
                break;
            }
            let hazard = events / mass;
            risk += (1.0 - risk) * hazard;
            points.push(RiskPoint {
                k,
                hazard,
                risk,
                at_risk_mass: mass,
                interval: None,
            });
        }
        RiskCurve {
            points,
            level: None,
            warnings,
        }
    }

    /// Curve from known hazards (unit at-risk mass).
    pub fn from_hazards(hazards: &[f64]) -> RiskCurve {
        let sums: Vec<(f64, f64)> = hazards.iter().map(|&h| (h, 1.0)).collect();
        RiskCurve::from_sums(&sums)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_truncated(&self) -> bool {
        !self.warnings.is_empty()
    }

    pub fn risk_at(&self, k: u32) -> Option<f64> {
        self.points.iter().find(|p| p.k == k).map(|p| p.risk)
    }

    pub fn final_risk(&self) -> Option<f64> {
        self.points.last().map(|p| p.risk)
    }

    pub fn risks(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.risk).collect()
    }

    pub fn hazards(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.hazard).collect()
    }

    /// `k,lambda,risk,lo,hi,atrisk_mass`; `lo`/`hi` are empty without intervals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,lambda,risk,lo,hi,atrisk_mass\n");
        for p in &self.points {
            let (lo, hi) = match p.interval {
                Some((lo, hi)) => (lo.to_string(), hi.to_string()),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                p.k, p.hazard, p.risk, lo, hi, p.at_risk_mass
            );
        }
        out
    }
}
