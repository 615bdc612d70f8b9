//! Two-arm trial simulation from linear-probability structural equations.
//!
//! Each individual draws from its own ChaCha stream keyed by
//! `(seed, arm, index)`, so trajectories do not depend on how many other
//! individuals are generated or in which order.

mod equations;

pub use equations::{
    Equation, LinearProb, ParentState, ScenarioConfig, StructuralEquations, Term,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::ConfigError;
use crate::panel::{CovariateLayout, Panel, PersonPeriod};
use crate::risk::RiskCurve;

const CHUNK: usize = 2048;

/// Stable identifier of individual `index` in `arm`.
pub fn individual_id(arm: bool, index: usize) -> u64 {
    2 * index as u64 + u64::from(arm)
}

/// RNG for one individual's trajectory.
pub fn individual_rng(seed: u64, arm: bool, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(arm) << 48) | index as u64);
    rng
}

/// Appends one trajectory to `out`: draw order per interval is
/// `L_A, L_Y, A, [C], Y`, stopping at failure, crossover or the horizon.
#[allow(clippy::too_many_arguments)]
fn simulate_individual(
    eqs: &StructuralEquations,
    horizon: u32,
    rng: &mut ChaCha8Rng,
    id: u64,
    tag: bool,
    z_a: bool,
    z_y: bool,
    out: &mut Vec<PersonPeriod>,
) {
    let mut a_prev = false;
    for k in 1..=horizon {
        let mut s = crate::sim::ParentState {
            a_prev,
            z_a,
            z_y,
            ..Default::default()
        };
        s.l_a = rng.gen::<f64>() < eqs.l_a.eval(&s);
        s.l_y = rng.gen::<f64>() < eqs.l_y.eval(&s);
        s.a = rng.gen::<f64>() < eqs.a.eval(&s);
        let c = match &eqs.crossover {
            Some(eq) => rng.gen::<f64>() < eq.eval(&s),
            None => false,
        };
        let y = !c && rng.gen::<f64>() < eqs.y.eval(&s);
        out.push(PersonPeriod {
            id,
            k,
            z: tag,
            a: s.a,
            l_a: s.l_a,
            l_y: s.l_y,
            y,
            c,
        });
        if y || c {
            break;
        }
        a_prev = s.a;
    }
}

/// `arms` lists `(stream arm, z tag, z_A, z_Y)` generated for every index.
fn simulate(cfg: &ScenarioConfig, arms: &[(bool, bool, bool, bool)]) -> Result<Panel, ConfigError> {
    cfg.validate()?;
    let n = cfg.n_per_arm;
    let chunks: Vec<Vec<PersonPeriod>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut out = Vec::new();
            for index in c * CHUNK..((c + 1) * CHUNK).min(n) {
                for &(arm, tag, z_a, z_y) in arms {
                    let mut rng = individual_rng(cfg.seed, arm, index);
                    let id = individual_id(tag, index);
                    simulate_individual(&cfg.equations, cfg.horizon, &mut rng, id, tag, z_a, z_y, &mut out);
                }
            }
            out
        })
        .collect();
    let periods = chunks.concat();
    Ok(Panel::from_sorted(
        periods,
        cfg.horizon,
        CovariateLayout::BOTH,
        cfg.equations.crossover.is_some(),
    ))
}

/// Factual trial: `n_per_arm` individuals per arm with `Z_A = Z_Y = Z`.
pub fn simulate_trial(cfg: &ScenarioConfig) -> Result<Panel, ConfigError> {
    simulate(cfg, &[(false, false, false, false), (true, true, true, true)])
}

/// One arm generated under the joint intervention `Z_A = z_a`, `Z_Y = z_y`.
///
/// The `z` column records `z_a`, and individuals reuse the factual streams of
/// arm `z_a`, so `(z, z)` reproduces arm `z` of [`simulate_trial`] exactly.
pub fn simulate_counterfactual(cfg: &ScenarioConfig, z_a: bool, z_y: bool) -> Result<Panel, ConfigError> {
    simulate(cfg, &[(z_a, z_a, z_a, z_y)])
}

/// Kaplan-Meier style cumulative incidence of one arm by counting.
pub fn empirical_cumulative_incidence(panel: &Panel, arm: bool) -> RiskCurve {
    let horizon = panel.horizon() as usize;
    let mut events = vec![0u64; horizon];
    let mut at_risk = vec![0u64; horizon];
    for p in panel.periods().iter().filter(|p| p.z == arm) {
        let i = p.k as usize - 1;
        at_risk[i] += 1;
        events[i] += u64::from(p.y);
    }
    let sums: Vec<(f64, f64)> = events
        .iter()
        .zip(&at_risk)
        .map(|(&e, &n)| (e as f64, n as f64))
        .collect();
    RiskCurve::from_sums(&sums)
}

/// Per-interval prevalence of an indicator among the at-risk records of an arm.
pub fn empirical_prevalence(panel: &Panel, arm: bool, variable: fn(&PersonPeriod) -> bool) -> Vec<Option<f64>> {
    let horizon = panel.horizon() as usize;
    let mut hits = vec![0u64; horizon];
    let mut n = vec![0u64; horizon];
    for p in panel.periods().iter().filter(|p| p.z == arm) {
        let i = p.k as usize - 1;
        n[i] += 1;
        hits[i] += u64::from(variable(p));
    }
    hits.iter()
        .zip(&n)
        .map(|(&h, &n)| (n > 0).then(|| h as f64 / n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{validate, Panel};

    fn small(model: u8) -> ScenarioConfig {
        ScenarioConfig::standard(model).unwrap().with_n(300).with_horizon(6).with_seed(11)
    }

    #[test]
    fn deterministic() {
        let a = simulate_trial(&small(3)).unwrap();
        let b = simulate_trial(&small(3)).unwrap();
        assert_eq!(a, b);
        let c = simulate_trial(&small(3).with_seed(12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn output_is_a_valid_panel() {
        let p = simulate_trial(&small(2)).unwrap();
        assert!(validate(p.periods(), p.horizon(), false).is_empty());
        assert_eq!(p.n_individuals(), 600);
        let reparsed = crate::panel::ingest_csv(p.to_csv_string().as_bytes()).unwrap();
        assert_eq!(reparsed.periods(), p.periods());
    }

    #[test]
    fn substreams_are_stable_under_n() {
        let small = simulate_trial(&small(1)).unwrap();
        let large = simulate_trial(&small_cfg_n(900)).unwrap();
        let keep: Vec<_> = large
            .periods()
            .iter()
            .filter(|p| p.id < 600)
            .copied()
            .collect();
        assert_eq!(keep.as_slice(), small.periods());
    }

    fn small_cfg_n(n: usize) -> ScenarioConfig {
        small(1).with_n(n)
    }

    #[test]
    fn consistency_with_factual_arm() {
        let cfg = small(3);
        let trial = simulate_trial(&cfg).unwrap();
        for z in [false, true] {
            let cf = simulate_counterfactual(&cfg, z, z).unwrap();
            let arm: Vec<_> = trial.periods().iter().filter(|p| p.z == z).copied().collect();
            assert_eq!(cf.periods(), arm.as_slice());
        }
    }

    #[test]
    fn empty_arms() {
        let p = simulate_trial(&small(1).with_n(0)).unwrap();
        assert!(p.is_empty());
        let c = empirical_cumulative_incidence(&p, true);
        assert!(c.is_empty());
        assert!(c.is_truncated());
    }

    #[test]
    fn crossover_censors_and_blanks_outcome() {
        let cfg = small(1).with_crossover(LinearProb::constant(0.3));
        let p = simulate_trial(&cfg).unwrap();
        assert!(p.has_crossover());
        assert!(p.periods().iter().any(|r| r.c));
        assert!(p.periods().iter().all(|r| !(r.c && r.y)));
        assert!(validate(p.periods(), p.horizon(), true).is_empty());
    }

    #[test]
    fn counting_incidence() {
        let csv = "id,k,z,a,l_a,l_y,y\n1,1,1,0,0,0,1\n2,1,1,0,0,0,0\n3,1,1,0,0,0,0\n4,1,1,0,0,0,0\n";
        let p = crate::panel::ingest_csv(csv.as_bytes()).unwrap();
        let c = empirical_cumulative_incidence(&p, true);
        assert_eq!(c.hazards(), vec![0.25]);

        let none = Panel::new(
            vec![PersonPeriod::new(1, 1, false), PersonPeriod::new(1, 2, false)],
            None,
            CovariateLayout::BOTH,
            false,
        )
        .unwrap();
        assert_eq!(empirical_cumulative_incidence(&none, false).risks(), vec![0.0, 0.0]);
    }

    #[test]
    fn invalid_config_is_rejected_before_drawing() {
        let mut cfg = small(1);
        cfg.equations.y = LinearProb::new(0.035, &[(Term::A, 1.0)]);
        assert!(matches!(simulate_trial(&cfg), Err(ConfigError::Probability { .. })));
    }
}
