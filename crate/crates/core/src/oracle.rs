//! Exact evaluation of the g-formula and of its two weighted representations
//! by enumerating every trajectory of a small discrete data-generating law.
//!
//! Trajectories are packed into a `u64`: interval `k` owns bits
//! `3(k-1) .. 3(k-1)+2` holding `l_a`, `l_y`, `a`. Outcomes need no bits
//! because only survivors carry on.

use rayon::prelude::*;

use crate::error::OracleError;
use crate::risk::RiskCurve;
use crate::sim::{ParentState, StructuralEquations};

/// Largest horizon the enumeration accepts (`2^(3K)` trajectories).
pub const MAX_HORIZON: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    LA,
    LY,
    A,
    Y,
}

impl Var {
    fn slot(self) -> u32 {
        match self {
            Var::LA => 0,
            Var::LY => 1,
            Var::A => 2,
            Var::Y => 3,
        }
    }
}

/// Observed-data law of a two-arm trial.
pub trait DiscreteDgp: Sync {
    /// `P(var_k = 1 | past, Z = z)` among survivors to `k`, where `past`
    /// holds every earlier draw (see the module docs).
    fn prob(&self, var: Var, k: u32, past: u64, z: bool) -> f64;
}

fn bit(past: u64, k: u32, slot: u32) -> bool {
    past >> (3 * (k - 1) + slot) & 1 == 1
}

fn set(past: u64, k: u32, slot: u32, value: bool) -> u64 {
    past | (u64::from(value) << (3 * (k - 1) + slot))
}

/// Structural equations evaluated with both components equal to the arm.
#[derive(Debug, Clone)]
pub struct StructuralDgp {
    pub equations: StructuralEquations,
}

impl StructuralDgp {
    pub fn new(equations: StructuralEquations) -> StructuralDgp {
        StructuralDgp { equations }
    }
}

impl DiscreteDgp for StructuralDgp {
    fn prob(&self, var: Var, k: u32, past: u64, z: bool) -> f64 {
        let s = ParentState {
            a_prev: k > 1 && bit(past, k - 1, 2),
            z_a: z,
            z_y: z,
            l_a: bit(past, k, 0),
            l_y: bit(past, k, 1),
            a: bit(past, k, 2),
        };
        let eq = &self.equations;
        match var {
            Var::LA => eq.l_a.eval(&s),
            Var::LY => eq.l_y.eval(&s),
            Var::A => eq.a.eval(&s),
            Var::Y => eq.y.eval(&s),
        }
    }
}

/// Arbitrary history-dependent law: every conditional is a hash of
/// `(seed, variable, k, full past, z)` mapped into `[0.05, 0.95]`.
#[derive(Debug, Clone, Copy)]
pub struct RandomTableDgp {
    pub seed: u64,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl DiscreteDgp for RandomTableDgp {
    fn prob(&self, var: Var, k: u32, past: u64, z: bool) -> f64 {
        let width = 3 * (k - 1) + var.slot().min(3);
        let masked = past & ((1u64 << width) - 1);
        let mut h = splitmix(self.seed);
        for part in [u64::from(var.slot()), u64::from(k), masked, u64::from(z)] {
            h = splitmix(h ^ part);
        }
        0.05 + 0.9 * ((h >> 11) as f64 / (1u64 << 53) as f64)
    }
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
struct Sum {
    total: f64,
    carry: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.total + x;
        if self.total.abs() >= x.abs() {
            self.carry += (self.total - t) + x;
        } else {
            self.carry += (x - t) + self.total;
        }
        self.total = t;
    }

    fn merge(&mut self, other: Sum) {
        self.add(other.total);
        self.add(other.carry);
    }

    fn value(self) -> f64 {
        self.total + self.carry
    }
}

/// Rejects horizons outside `1..=MAX_HORIZON`.
pub fn check_horizon(k: u32) -> Result<(), OracleError> {
    if k == 0 || k > MAX_HORIZON {
        return Err(OracleError::HorizonGuard { k, max: MAX_HORIZON });
    }
    Ok(())
}

fn bern(p: f64, value: bool) -> f64 {
    if value {
        p
    } else {
        1.0 - p
    }
}

fn describe(past: u64, k: u32) -> String {
    let mut parts = Vec::new();
    for j in 1..=k {
        parts.push(format!(
            "k={j}: l_a={} l_y={} a={}",
            u8::from(bit(past, j, 0)),
            u8::from(bit(past, j, 1)),
            u8::from(bit(past, j, 2))
        ));
    }
    parts.join("; ")
}

/// Runs `body` for each first-interval covariate/adherence combination in
/// parallel and merges the per-interval sums in a fixed order.
fn enumerate<F>(horizon: u32, body: F) -> Result<Vec<[Sum; 2]>, OracleError>
where
    F: Fn(u64, &mut Vec<[Sum; 2]>) -> Result<(), OracleError> + Sync,
{
    let parts: Vec<Result<Vec<[Sum; 2]>, OracleError>> = (0u64..8)
        .into_par_iter()
        .map(|first| {
            let mut acc = vec![[Sum::default(); 2]; horizon as usize];
            body(first, &mut acc)?;
            Ok(acc)
        })
        .collect();
    let mut total = vec![[Sum::default(); 2]; horizon as usize];
    for part in parts {
        for (t, p) in total.iter_mut().zip(part?) {
            t[0].merge(p[0]);
            t[1].merge(p[1]);
        }
    }
    Ok(total)
}

/// Exact `Pr[Y_k = 1]` for `k = 1..=horizon` from the g-formula: outcome and
/// outcome-side covariate factors under arm `z_y`, adherence-side covariate
/// and adherence factors under arm `z_a`.
pub fn enumerate_gformula(dgp: &dyn DiscreteDgp, z_a: bool, z_y: bool, horizon: u32) -> Result<Vec<f64>, OracleError> {
    check_horizon(horizon)?;
    fn walk(dgp: &dyn DiscreteDgp, za: bool, zy: bool, k: u32, horizon: u32, past: u64, first: Option<u64>, mass: f64, acc: &mut [[Sum; 2]]) {
        for combo in 0u64..8 {
            if k == 1 && first != Some(combo) {
                continue;
            }
            let (la, ly, a) = (combo & 1 == 1, combo & 2 == 2, combo & 4 == 4);
            let p1 = set(past, k, 0, la);
            let f_la = bern(dgp.prob(Var::LA, k, past, za), la);
            let p2 = set(p1, k, 1, ly);
            let f_ly = bern(dgp.prob(Var::LY, k, p1, zy), ly);
            let p3 = set(p2, k, 2, a);
            let f_a = bern(dgp.prob(Var::A, k, p2, za), a);
            let m = mass * f_la * f_ly * f_a;
            if m == 0.0 {
                continue;
            }
            let py = dgp.prob(Var::Y, k, p3, zy);
            acc[k as usize - 1][0].add(m * py);
            if k < horizon {
                walk(dgp, za, zy, k + 1, horizon, p3, None, m * (1.0 - py), acc);
            }
        }
    }
    let sums = enumerate(horizon, |first, acc| {
        walk(dgp, z_a, z_y, 1, horizon, 0, Some(first), 1.0, acc);
        Ok(())
    })?;
    let mut risk = Sum::default();
    Ok(sums
        .iter()
        .map(|s| {
            risk.add(s[0].value());
            risk.value()
        })
        .collect())
}

/// Which weighted representation to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// Outcome-ratio weights, expectations over arm `z_a`.
    Outcome,
    /// Adherence-ratio weights, expectations over arm `z_y`.
    Adherence,
}

struct WeightedWalk<'a> {
    dgp: &'a dyn DiscreteDgp,
    za: bool,
    zy: bool,
    rep: Representation,
    horizon: u32,
}

/// `Pr(Z = z | prefix)` under equal allocation, from both arms' prefix probabilities.
fn posterior(z: bool, p: [f64; 2]) -> f64 {
    p[usize::from(z)] / (p[0] + p[1])
}

impl WeightedWalk<'_> {
    fn arm_probs(&self, var: Var, k: u32, past: u64, value: bool) -> [f64; 2] {
        [
            bern(self.dgp.prob(var, k, past, false), value),
            bern(self.dgp.prob(var, k, past, true), value),
        ]
    }

    /// `prefix` holds both arms' probabilities of the history so far
    /// (survival through `k - 1` included), `gmass` its g-formula mass and
    /// `w` the cumulative weight through `k - 1`.
    #[allow(clippy::too_many_arguments)]
    fn walk(&self, k: u32, past: u64, first: Option<u64>, prefix: [f64; 2], gmass: f64, w: f64, acc: &mut [[Sum; 2]]) -> Result<(), OracleError> {
        let (za, zy) = (self.za, self.zy);
        let arm = match self.rep {
            Representation::Outcome => za,
            Representation::Adherence => zy,
        };
        let mul = |a: [f64; 2], b: [f64; 2]| [a[0] * b[0], a[1] * b[1]];
        for combo in 0u64..8 {
            if k == 1 && first != Some(combo) {
                continue;
            }
            let (la, ly, a) = (combo & 1 == 1, combo & 2 == 2, combo & 4 == 4);
            let p1 = set(past, k, 0, la);
            let p2 = set(p1, k, 1, ly);
            let p3 = set(p2, k, 2, a);
            let f_la = self.arm_probs(Var::LA, k, past, la);
            let f_ly = self.arm_probs(Var::LY, k, p1, ly);
            let f_a = self.arm_probs(Var::A, k, p2, a);
            let g = gmass * f_la[usize::from(za)] * f_ly[usize::from(zy)] * f_a[usize::from(za)];
            if g == 0.0 {
                continue;
            }
            let after_la = mul(prefix, f_la);
            let after_ly = mul(after_la, f_ly);
            let after_a = mul(after_ly, f_a);
            let state = || OracleError::Positivity {
                state: describe(p3, k),
            };
            let factor = match self.rep {
                Representation::Outcome => {
                    let d1 = posterior(za, after_ly);
                    let d2 = posterior(zy, after_la);
                    if d1 == 0.0 || d2 == 0.0 || !(d1.is_finite() && d2.is_finite()) {
                        return Err(state());
                    }
                    posterior(zy, after_ly) / d1 * (posterior(za, after_la) / d2)
                }
                Representation::Adherence => {
                    let d0 = f_a[usize::from(zy)];
                    let d1 = posterior(zy, after_la);
                    let d2 = posterior(za, prefix);
                    if d0 == 0.0 || d1 == 0.0 || d2 == 0.0 || !(d1.is_finite() && d2.is_finite()) {
                        return Err(state());
                    }
                    f_a[usize::from(za)] / d0 * (posterior(za, after_la) / d1) * (posterior(zy, prefix) / d2)
                }
            };
            let reach = after_a[usize::from(arm)];
            if reach == 0.0 {
                return Err(state());
            }
            let w_pre = w * factor;
            let py = [self.dgp.prob(Var::Y, k, p3, false), self.dgp.prob(Var::Y, k, p3, true)];
            let g_next = g * (1.0 - py[usize::from(zy)]);
            for y in [true, false] {
                let f_y = [bern(py[0], y), bern(py[1], y)];
                let f_e = f_y[usize::from(arm)];
                let w_k = match self.rep {
                    Representation::Outcome => {
                        let f_n = f_y[usize::from(zy)];
                        if f_e == 0.0 {
                            if f_n > 0.0 {
                                return Err(state());
                            }
                            continue;
                        }
                        w_pre * (f_n / f_e)
                    }
                    Representation::Adherence => w_pre,
                };
                let mass = reach * f_e * w_k;
                acc[k as usize - 1][1].add(mass);
                if y {
                    acc[k as usize - 1][0].add(mass);
                } else if k < self.horizon && g_next > 0.0 {
                    self.walk(k + 1, p3, None, mul(after_a, [1.0 - py[0], 1.0 - py[1]]), g_next, w_k, acc)?;
                }
            }
        }
        Ok(())
    }
}

/// Exact hazards `E[Y_k (1 - Y_{k-1}) W_k] / E[(1 - Y_{k-1}) W_k]` with the
/// expectation taken over the factual law of one arm, as a risk curve.
///
/// A zero denominator is reported as hazard 0; it only happens when the
/// g-formula gives no survivors at `k` (otherwise positivity fails first).
pub fn exact_weighted_representation(
    dgp: &dyn DiscreteDgp,
    z_a: bool,
    z_y: bool,
    horizon: u32,
    rep: Representation,
) -> Result<Vec<f64>, OracleError> {
    check_horizon(horizon)?;
    let walker = WeightedWalk {
        dgp,
        za: z_a,
        zy: z_y,
        rep,
        horizon,
    };
    let sums = enumerate(horizon, |first, acc| walker.walk(1, 0, Some(first), [1.0, 1.0], 1.0, 1.0, acc))?;
    let hazards: Vec<f64> = sums
        .iter()
        .map(|s| {
            let den = s[1].value();
            if den > 0.0 {
                s[0].value() / den
            } else {
                0.0
            }
        })
        .collect();
    Ok(RiskCurve::from_hazards(&hazards).risks())
}

/// Counterfactual risk and survivor prevalences from structural equations
/// under `(z_a, z_y)`, computed by forward recursion over the previous
/// adherence value (the equations are first-order Markov).
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovTruth {
    pub risk: Vec<f64>,
    pub adherence: Vec<f64>,
    pub l_a: Vec<f64>,
    pub l_y: Vec<f64>,
}

pub fn markov_truth(eqs: &StructuralEquations, z_a: bool, z_y: bool, horizon: u32) -> MarkovTruth {
    let mut alive = [1.0, 0.0];
    let mut out = MarkovTruth {
        risk: Vec::new(),
        adherence: Vec::new(),
        l_a: Vec::new(),
        l_y: Vec::new(),
    };
    let mut risk = 0.0;
    for _ in 0..horizon {
        let total = alive[0] + alive[1];
        let mut next = [0.0, 0.0];
        let (mut events, mut adh, mut la_mass, mut ly_mass) = (0.0, 0.0, 0.0, 0.0);
        for (a_prev, &m) in [false, true].iter().zip(&alive) {
            if m == 0.0 {
                continue;
            }
            for combo in 0u8..8 {
                let (la, ly, a) = (combo & 1 == 1, combo & 2 == 2, combo & 4 == 4);
                let mut s = ParentState {
                    a_prev: *a_prev,
                    z_a,
                    z_y,
                    ..Default::default()
                };
                let f_la = bern(eqs.l_a.eval(&s), la);
                s.l_a = la;
                let f_ly = bern(eqs.l_y.eval(&s), ly);
                s.l_y = ly;
                let f_a = bern(eqs.a.eval(&s), a);
                s.a = a;
                let mass = m * f_la * f_ly * f_a;
                let py = eqs.y.eval(&s);
                events += mass * py;
                next[usize::from(a)] += mass * (1.0 - py);
                if a {
                    adh += mass;
                }
                if la {
                    la_mass += mass;
                }
                if ly {
                    ly_mass += mass;
                }
            }
        }
        risk += events;
        out.risk.push(risk);
        let prev = |x: f64| if total > 0.0 { x / total } else { f64::NAN };
        out.adherence.push(prev(adh));
        out.l_a.push(prev(la_mass));
        out.l_y.push(prev(ly_mass));
        alive = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::LinearProb;

    fn structural(model: u8) -> StructuralDgp {
        StructuralDgp::new(StructuralEquations::standard(model).unwrap())
    }

    fn max_gap(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn first_interval_risk() {
        for z in [(false, false), (true, false), (true, true)] {
            let r = enumerate_gformula(&structural(1), z.0, z.1, 1).unwrap();
            assert!((r[0] - 0.027).abs() < 1e-15, "{r:?}");
        }
    }

    #[test]
    fn horizon_guard() {
        assert!(matches!(
            enumerate_gformula(&structural(1), true, false, 9),
            Err(OracleError::HorizonGuard { k: 9, max: 8 })
        ));
        assert!(enumerate_gformula(&structural(1), true, false, 0).is_err());
        assert!(exact_weighted_representation(&structural(1), true, false, 12, Representation::Outcome).is_err());
    }

    #[test]
    fn degenerate_outcomes() {
        let mut eqs = StructuralEquations::standard(2).unwrap();
        eqs.y = LinearProb::constant(0.0);
        let d = StructuralDgp::new(eqs.clone());
        assert_eq!(enumerate_gformula(&d, true, false, 3).unwrap(), vec![0.0; 3]);
        eqs.y = LinearProb::constant(1.0);
        let d = StructuralDgp::new(eqs);
        assert_eq!(enumerate_gformula(&d, true, false, 3).unwrap(), vec![1.0; 3]);
        for rep in [Representation::Outcome, Representation::Adherence] {
            let w = exact_weighted_representation(&d, true, false, 3, rep).unwrap();
            assert!(max_gap(&w, &[1.0; 3]) < 1e-12, "{w:?}");
        }
    }

    #[test]
    fn representations_match_the_gformula() {
        let dgps: Vec<(Box<dyn DiscreteDgp>, Vec<(bool, bool)>)> = vec![
            (Box::new(structural(1)), vec![(true, false), (false, true)]),
            (Box::new(structural(3)), vec![(true, false)]),
            (Box::new(RandomTableDgp { seed: 5 }), vec![(true, false), (false, true)]),
        ];
        for (d, contrasts) in &dgps {
            for &(za, zy) in contrasts {
                let g = enumerate_gformula(d.as_ref(), za, zy, 3).unwrap();
                for rep in [Representation::Outcome, Representation::Adherence] {
                    let w = exact_weighted_representation(d.as_ref(), za, zy, 3, rep).unwrap();
                    assert!(max_gap(&g, &w) < 1e-12, "{rep:?} {g:?} {w:?}");
                }
            }
        }
    }

    #[test]
    fn equal_components_give_the_factual_arm() {
        let d = RandomTableDgp { seed: 9 };
        for z in [false, true] {
            let g = enumerate_gformula(&d, z, z, 3).unwrap();
            let w = exact_weighted_representation(&d, z, z, 3, Representation::Outcome).unwrap();
            assert!(max_gap(&g, &w) < 1e-14);
        }
    }

    #[test]
    fn positivity_violation_is_named() {
        // Adherence impossible when a_prev = 1 under arm 0 only.
        let mut eqs = StructuralEquations::standard(1).unwrap();
        eqs.a = LinearProb::new(0.5, &[(crate::sim::Term::ZAAPrev, 0.5), (crate::sim::Term::APrev, -0.5)]);
        let d = StructuralDgp::new(eqs);
        let err = exact_weighted_representation(&d, true, false, 2, Representation::Adherence).unwrap_err();
        match err {
            OracleError::Positivity { state } => assert!(state.starts_with("k=1: "), "{state}"),
            other => panic!("{other:?}"),
        }
    }

    /// Under adherence model 3, arm 1 adheres surely after adhering with
    /// l_a = 0, l_y = 1, so adherence-ratio weights over arm 1 have no
    /// support for stopping there.
    #[test]
    fn model_three_lacks_support_for_the_reverse_contrast() {
        let err = exact_weighted_representation(&structural(3), false, true, 2, Representation::Adherence).unwrap_err();
        assert!(matches!(err, OracleError::Positivity { .. }));
        assert!(exact_weighted_representation(&structural(3), true, false, 2, Representation::Adherence).is_ok());
    }

    #[test]
    fn markov_recursion_matches_enumeration() {
        for model in 1..=3u8 {
            let eqs = StructuralEquations::standard(model).unwrap();
            let d = StructuralDgp::new(eqs.clone());
            let truth = markov_truth(&eqs, true, false, 6);
            let g = enumerate_gformula(&d, true, false, 6).unwrap();
            assert!(max_gap(&truth.risk, &g) < 1e-14, "model {model}");
        }
        let t = markov_truth(&StructuralEquations::standard(1).unwrap(), true, true, 1);
        assert!((t.adherence[0] - 0.6).abs() < 1e-15);
        assert!((t.l_a[0] - 0.05).abs() < 1e-15);
        assert!((t.l_y[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn random_tables_stay_in_range() {
        let d = RandomTableDgp { seed: 1 };
        for k in 1..=3 {
            for past in 0..64u64 {
                for var in [Var::LA, Var::LY, Var::A, Var::Y] {
                    let p = d.prob(var, k, past, past % 2 == 0);
                    assert!((0.05..=0.95).contains(&p));
                }
            }
        }
    }
}
