use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use separable::graph::{check_identification, CausalDag};
use separable::ipw::{estimate, Estimand, EstimateReport, EstimationConfig, Indicator, Variant};
use separable::oracle::{enumerate_gformula, exact_weighted_representation, Representation, StructuralDgp};
use separable::panel::ingest_csv;
use separable::sim::{empirical_cumulative_incidence, empirical_prevalence, simulate_counterfactual, simulate_trial, ScenarioConfig};
use separable::{ConfigError, Error, EstimationError, PersonPeriod};

use crate::manifest::Recorder;
use crate::svg::{render, PlotPanel, Series};
use crate::{Cli, Command};

/// Per-k agreement required between the g-formula and a weighted representation.
const ORACLE_TOLERANCE: f64 = 1e-10;

/// Full-size per-arm sample, scaled by `reproduce --scale`.
const FULL_SCALE_N: f64 = 500_000.0;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Failure {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure::new(e.kind().exit_code() as u8, e.to_string())
    }
}

fn err(e: impl Into<Error>) -> Failure {
    Failure::from(e.into())
}

type Outcome<T = ()> = Result<T, Failure>;

fn read_input(path: &Path, code: u8) -> Outcome<Vec<u8>> {
    fs::read(path).map_err(|e| Failure::new(code, format!("cannot read {}: {e}", path.display())))
}

fn write_output(dir: &Path, name: &str, contents: &str, rec: &mut Recorder) -> Outcome {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Failure::new(1, format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(&path, contents).map_err(|e| Failure::new(1, format!("cannot write {}: {e}", path.display())))?;
    rec.output(name);
    Ok(())
}

fn finish(rec: Recorder, dir: &Path) -> Outcome {
    rec.finish(dir)
        .map_err(|e| Failure::new(1, format!("cannot write manifest: {e}")))
}

fn utf8(bytes: &[u8], path: &Path) -> Outcome<String> {
    String::from_utf8(bytes.to_vec())
        .map_err(|_| err(ConfigError::Parse(format!("{} is not UTF-8", path.display()))))
}

/// Scenario from `--config`, or `fallback` when none is given. Returns the
/// bytes hashed into the manifest alongside.
fn scenario(cli: &Cli, fallback: Option<ScenarioConfig>) -> Outcome<(ScenarioConfig, Vec<u8>)> {
    let (mut cfg, bytes) = match (&cli.config, fallback) {
        (Some(path), _) => {
            let bytes = read_input(path, 2)?;
            (ScenarioConfig::from_toml(&utf8(&bytes, path)?).map_err(err)?, bytes)
        }
        (None, Some(cfg)) => {
            let bytes = cfg.to_toml().into_bytes();
            (cfg, bytes)
        }
        (None, None) => return Err(err(ConfigError::Invalid("--config <scenario.toml> is required".into()))),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(err)?;
    Ok((cfg, bytes))
}

pub fn run(cli: &Cli) -> Outcome {
    fs::create_dir_all(&cli.out_dir)
        .map_err(|e| Failure::new(1, format!("cannot create {}: {e}", cli.out_dir.display())))?;
    match &cli.command {
        Command::Simulate { out } => simulate(cli, out),
        Command::Identify { graph, horizon } => identify(cli, graph, *horizon),
        Command::Estimate { panel } => estimate_cmd(cli, panel),
        Command::OracleCheck { horizon } => oracle_check(cli, *horizon),
        Command::Reproduce { scale, svg } => reproduce(cli, *scale, *svg),
    }
}

fn simulate(cli: &Cli, out: &str) -> Outcome {
    let (cfg, bytes) = scenario(cli, None)?;
    let mut rec = Recorder::new("simulate", &bytes);
    rec.seed(cfg.seed);
    let panel = match cfg.referent {
        Some((z_a, z_y)) => simulate_counterfactual(&cfg, z_a, z_y),
        None => simulate_trial(&cfg),
    }
    .map_err(err)?;
    write_output(&cli.out_dir, out, &panel.to_csv_string(), &mut rec)?;
    println!(
        "simulated {} individuals, {} person-periods -> {}",
        panel.n_individuals(),
        panel.len(),
        cli.out_dir.join(out).display()
    );
    finish(rec, &cli.out_dir)
}

fn identify(cli: &Cli, graph: &Path, horizon: Option<u32>) -> Outcome {
    let bytes = read_input(graph, 3)?;
    let mut rec = Recorder::new("identify", &bytes);
    let text = String::from_utf8(bytes).map_err(|_| Failure::new(3, format!("{} is not UTF-8", graph.display())))?;
    let dag = CausalDag::parse(&text).map_err(err)?;
    let horizon = match horizon {
        Some(k) => k,
        None => dag
            .nodes()
            .iter()
            .filter_map(|n| n.role.interval())
            .max()
            .ok_or_else(|| err(ConfigError::Invalid("graph has no time-indexed nodes; pass --horizon".into())))?,
    };
    let report = check_identification(&dag, horizon).map_err(err)?;
    let text = report.to_text();
    print!("{text}");
    write_output(&cli.out_dir, "identification.txt", &text, &mut rec)?;
    finish(rec, &cli.out_dir)
}

fn estimate_cmd(cli: &Cli, panel_path: &Path) -> Outcome {
    let (mut cfg, cfg_bytes) = match &cli.config {
        Some(path) => {
            let bytes = read_input(path, 2)?;
            (EstimationConfig::from_toml(&utf8(&bytes, path)?).map_err(err)?, bytes)
        }
        None => (
            EstimationConfig::new(Estimand::new(true, false, Variant::OutcomeRatio)),
            b"default: z_a=1 z_y=0 w_y".to_vec(),
        ),
    };
    if let (Some(seed), Some(b)) = (cli.seed, cfg.bootstrap.as_mut()) {
        b.seed = seed;
    }
    let mut rec = Recorder::new("estimate", &cfg_bytes);
    if let Some(b) = &cfg.bootstrap {
        rec.seed(b.seed);
    }
    let data = read_input(panel_path, 3)?;
    let panel = ingest_csv(data.as_slice()).map_err(err)?;
    let report = estimate(&panel, &cfg).map_err(err)?;

    let dir = &cli.out_dir;
    write_output(dir, "separable_risk.csv", &report.curve.to_csv(), &mut rec)?;
    write_output(dir, "itt_risk.csv", &report.itt.to_csv(), &mut rec)?;
    write_output(dir, "diagnostics.csv", &separable::ipw::diagnostics_csv(&report.diagnostics), &mut rec)?;
    write_output(dir, "prevalence.csv", &report.prevalence_csv(), &mut rec)?;
    write_output(dir, "metadata.txt", &report.metadata_text(), &mut rec)?;
    for (role, snap) in &report.snapshots {
        write_output(dir, &format!("models/{}.txt", role.key()), snap, &mut rec)?;
    }
    print_estimate_summary(&report);
    finish(rec, dir)
}

fn print_estimate_summary(r: &EstimateReport) {
    println!("{}", r.estimand.describe());
    if let (Some(sep), Some(itt)) = (r.curve.points.last(), r.itt.points.last()) {
        let ci = sep
            .interval
            .map(|(lo, hi)| format!(" [{lo:.4}, {hi:.4}]"))
            .unwrap_or_default();
        println!("k={}: separable risk {:.4}{ci}, arm {} risk {:.4}", sep.k, sep.risk, u8::from(r.estimand.z_a), itt.risk);
    }
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
}

fn oracle_check(cli: &Cli, horizon: Option<u32>) -> Outcome {
    let fallback = ScenarioConfig::standard(1).map_err(err)?.with_horizon(3);
    let (cfg, bytes) = scenario(cli, Some(fallback))?;
    let mut rec = Recorder::new("oracle-check", &bytes);
    let k = horizon.unwrap_or(cfg.horizon);
    if cfg.equations.crossover.is_some() {
        eprintln!("warning: the oracle enumerates the no-crossover law; the crossover equation is ignored");
    }
    let dgp = StructuralDgp::new(cfg.equations.clone());
    separable::oracle::check_horizon(k).map_err(err)?;

    let mut table = String::from("z_a,z_y,representation,max_abs_diff,status\n");
    let mut failures = 0;
    println!("{:<5} {:<5} {:<10} {:>14}  status", "z_a", "z_y", "weights", "max |diff|");
    for (z_a, z_y) in [(true, false), (false, true), (false, false), (true, true)] {
        let truth = enumerate_gformula(&dgp, z_a, z_y, k).map_err(err)?;
        let mut curve = String::from("k,risk\n");
        for (i, r) in truth.iter().enumerate() {
            let _ = writeln!(curve, "{},{r}", i + 1);
        }
        write_output(&cli.out_dir, &format!("gformula_za{}_zy{}.csv", u8::from(z_a), u8::from(z_y)), &curve, &mut rec)?;
        for (name, rep) in [("w_y", Representation::Outcome), ("w_a", Representation::Adherence)] {
            let (diff, status) = match exact_weighted_representation(&dgp, z_a, z_y, k, rep) {
                Ok(risks) => {
                    let d = truth.iter().zip(&risks).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    let status = if d < ORACLE_TOLERANCE {
                        "pass"
                    } else {
                        failures += 1;
                        "FAIL"
                    };
                    (format!("{d:.3e}"), status.to_string())
                }
                // Not a discrepancy: the representation does not exist for this law.
                Err(e) => (String::new(), format!("not applicable ({e})")),
            };
            println!("{:<5} {:<5} {:<10} {:>14}  {status}", u8::from(z_a), u8::from(z_y), name, diff);
            let _ = writeln!(table, "{},{},{name},{diff},{status}", u8::from(z_a), u8::from(z_y));
        }
    }
    write_output(&cli.out_dir, "oracle_check.csv", &table, &mut rec)?;
    finish(rec, &cli.out_dir)?;
    if failures > 0 {
        return Err(Failure::new(4, format!("{failures} equivalence checks exceeded {ORACLE_TOLERANCE:e}")));
    }
    Ok(())
}

fn column(out: &mut String, header: &[&str], cols: &[Vec<Option<f64>>]) {
    out.push_str("k,");
    out.push_str(&header.join(","));
    out.push('\n');
    let rows = cols.iter().map(Vec::len).max().unwrap_or(0);
    for i in 0..rows {
        let cells: Vec<String> = cols
            .iter()
            .map(|c| c.get(i).copied().flatten().map(|v| v.to_string()).unwrap_or_default())
            .collect();
        let _ = writeln!(out, "{},{}", i + 1, cells.join(","));
    }
}

fn some(v: Vec<f64>) -> Vec<Option<f64>> {
    v.into_iter().map(Some).collect()
}

fn weighted(r: &EstimateReport, ind: Indicator) -> Vec<Option<f64>> {
    r.prevalences
        .iter()
        .find(|(i, _, _)| *i == ind)
        .map(|(_, w, _)| w.clone())
        .unwrap_or_default()
}

fn reproduce(cli: &Cli, scale: f64, svg: bool) -> Outcome {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(err(EstimationError::Domain(format!("scale must be positive, got {scale}"))));
    }
    let n = (FULL_SCALE_N * scale).round() as usize;
    if n == 0 {
        return Err(err(EstimationError::Domain(format!("scale {scale} gives no individuals"))));
    }
    if cli.config.is_some() {
        return Err(err(ConfigError::Invalid(
            "reproduce runs the three standard scenarios and takes no --config".into(),
        )));
    }
    let mut scenarios = Vec::new();
    for m in 1..=3u8 {
        let mut cfg = ScenarioConfig::standard(m).map_err(err)?.with_n(n);
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        scenarios.push(cfg);
    }
    let hashed: String = scenarios.iter().map(ScenarioConfig::to_toml).collect();
    let mut rec = Recorder::new("reproduce", hashed.as_bytes());
    let est = EstimationConfig::new(Estimand::new(true, false, Variant::OutcomeRatio));

    for cfg in &scenarios {
        let m = cfg.adherence_model;
        rec.seed(cfg.seed);
        let panel = simulate_trial(cfg).map_err(err)?;
        let report = estimate(&panel, &est).map_err(err)?;
        let truth = separable::oracle::markov_truth(&cfg.equations, true, false, cfg.horizon);

        let arm = |z: bool| -> [Vec<Option<f64>>; 4] {
            [
                empirical_cumulative_incidence(&panel, z).risks().into_iter().map(Some).collect(),
                empirical_prevalence(&panel, z, |p: &PersonPeriod| p.a),
                empirical_prevalence(&panel, z, |p: &PersonPeriod| p.l_a),
                empirical_prevalence(&panel, z, |p: &PersonPeriod| p.l_y),
            ]
        };
        let [r0, a0, la0, ly0] = arm(false);
        let [r1, a1, la1, ly1] = arm(true);
        let sep = [
            some(report.curve.risks()),
            weighted(&report, Indicator::A),
            weighted(&report, Indicator::LA),
            weighted(&report, Indicator::LY),
        ];

        let mut total = String::new();
        column(
            &mut total,
            &["risk_z0", "risk_z1", "a_z0", "a_z1", "l_a_z0", "l_a_z1", "l_y_z0", "l_y_z1"],
            &[r0.clone(), r1.clone(), a0.clone(), a1.clone(), la0.clone(), la1.clone(), ly0.clone(), ly1.clone()],
        );
        let mut separable = String::new();
        column(
            &mut separable,
            &["risk_za1_zy0", "risk_z1", "risk_za1_zy0_truth", "a_za1_zy0", "a_z1", "l_a_za1_zy0", "l_a_z1", "l_y_za1_zy0", "l_y_z1"],
            &[
                sep[0].clone(),
                r1.clone(),
                some(truth.risk.clone()),
                sep[1].clone(),
                a1.clone(),
                sep[2].clone(),
                la1.clone(),
                sep[3].clone(),
                ly1.clone(),
            ],
        );
        let dir = format!("model{m}");
        write_output(&cli.out_dir, &format!("{dir}/total.csv"), &total, &mut rec)?;
        write_output(&cli.out_dir, &format!("{dir}/separable.csv"), &separable, &mut rec)?;
        write_output(&cli.out_dir, &format!("{dir}/metadata.txt"), &report.metadata_text(), &mut rec)?;

        if svg {
            let titles = ["cumulative incidence", "adherence", "AKI", "abnormal BP"];
            let total_cols = [(&r0, &r1), (&a0, &a1), (&la0, &la1), (&ly0, &ly1)];
            let sep_ref = [&r1, &a1, &la1, &ly1];
            let total_panels: Vec<PlotPanel<'_>> = titles
                .iter()
                .zip(total_cols)
                .map(|(t, (x, y))| PlotPanel {
                    title: t,
                    series: vec![Series { label: "z=0", values: x }, Series { label: "z=1", values: y }],
                })
                .collect();
            let sep_panels: Vec<PlotPanel<'_>> = titles
                .iter()
                .zip(sep.iter().zip(sep_ref))
                .map(|(t, (x, y))| PlotPanel {
                    title: t,
                    series: vec![
                        Series { label: "z_A=1, z_Y=0", values: x },
                        Series { label: "z=1", values: y },
                    ],
                })
                .collect();
            write_output(&cli.out_dir, &format!("{dir}/total.svg"), &render(&format!("adherence model {m}: total effect"), &total_panels), &mut rec)?;
            write_output(
                &cli.out_dir,
                &format!("{dir}/separable.svg"),
                &render(&format!("adherence model {m}: separable effect"), &sep_panels),
                &mut rec,
            )?;
        }

        let k = cfg.horizon;
        println!(
            "model {m}: n={n}/arm  R_{k} z=0 {:.4}  z=1 {:.4}  separable {:.4} (truth {:.4})",
            r0.last().copied().flatten().unwrap_or(f64::NAN),
            r1.last().copied().flatten().unwrap_or(f64::NAN),
            report.curve.final_risk().unwrap_or(f64::NAN),
            truth.risk.last().copied().unwrap_or(f64::NAN),
        );
        for w in &report.warnings {
            eprintln!("warning (model {m}): {w}");
        }
    }
    finish(rec, &cli.out_dir)
}
