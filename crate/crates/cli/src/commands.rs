//! Subcommand implementations.

use std::fs;
use std::io::Write;
use std::path::Path;

use lncsim::metrics::{Estimates, MetricError, MonteCarlo, RatioEntry, RATIO_CAVEAT};
use lncsim::oracle::{self, OracleError, OracleResult};
use lncsim::schemes::SchemeError;
use lncsim::session::SessionError;
use lncsim::sfm::serialize_sfm;
use lncsim::{approximation_report, bounds, ApproxReport, Field, FieldSpec, MemoryMode, Sfm};

use crate::config::{self, ConfigError, Experiment, ExperimentConfig, GenParams};
use crate::format::{float, header, rational};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("writing {path}: {source}")]
    Output { path: String, source: std::io::Error },
    /// The request is valid but beyond what the tool can do.
    #[error("{0}")]
    Capability(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Capability(_) => 3,
            _ => 2,
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Session(SessionError::Scheme(
                e @ (SchemeError::FieldIncompatible { .. } | SchemeError::BadPlan(_)),
            )) => CliError::Usage(e.to_string()),
            MetricError::Session(SessionError::Dimension(msg)) => CliError::Usage(msg),
            MetricError::NoCompletedTrials => CliError::Capability(
                "no trial completed within max_slots; raise --max-slots or use a scheme that can finish".into(),
            ),
            other => CliError::Capability(other.to_string()),
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    let err = |source| CliError::Output { path: path.display().to_string(), source };
    fs::create_dir_all(dir).map_err(err)?;
    fs::write(&path, contents).map_err(err)
}

fn csv_body(columns: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn describe(exp: &Experiment) -> Vec<String> {
    let r = &exp.resolved;
    vec![
        format!(
            "sfm={} N={} K={}",
            r.sfm.as_deref().unwrap_or(""),
            exp.sfm.n_receivers(),
            exp.sfm.k_packets()
        ),
        format!(
            "scheme={} field={} memory={} pe={} trials={} max_slots={}",
            exp.scheme,
            exp.field.spec(),
            exp.memory,
            serde_json::to_string(r.pe.as_ref().expect("resolved")).expect("json"),
            exp.trials,
            exp.max_slots
        ),
    ]
}

fn monte_carlo(exp: &Experiment) -> Result<Estimates, CliError> {
    let mc = MonteCarlo {
        sfm: exp.sfm.clone(),
        channel: exp.channel.clone(),
        field: exp.field.clone(),
        scheme: exp.scheme.clone(),
        memory: exp.memory,
        trials: exp.trials,
        master_seed: exp.seed,
        max_slots: exp.max_slots,
    };
    Ok(mc.run()?)
}

fn truncation_line(est: &Estimates, max_slots: usize) -> Option<String> {
    est.truncation_warning().then(|| {
        format!(
            "warning: {} of {} trials truncated at max_slots={max_slots}; estimates use completed trials only",
            est.truncated, est.trials
        )
    })
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let exp = cfg.resolve()?;
    let est = monte_carlo(&exp)?;
    let warning = truncation_line(&est, exp.max_slots);
    let mut extra = describe(&exp);
    extra.extend(warning.clone());
    let head = header("simulate", &exp.fingerprint, exp.seed, &extra);

    let rows = est
        .receivers
        .iter()
        .map(|r| {
            vec![
                (r.receiver + 1).to_string(),
                r.w.to_string(),
                rational(r.u.mean),
                float(r.u.se),
                rational(r.d.mean),
                float(r.d.se),
            ]
        })
        .collect();
    let estimates = csv_body(&["receiver", "w", "E_Un", "se_Un", "E_Dn", "se_Dn"], rows);
    write_file(&exp.out, "estimates.csv", &format!("{head}{estimates}"))?;

    let aggregate = csv_body(
        &["E_U", "se_U", "E_D", "se_D", "trials", "truncated"],
        vec![vec![
            rational(est.u.mean),
            float(est.u.se),
            rational(est.d.mean),
            float(est.d.se),
            est.trials.to_string(),
            est.truncated.to_string(),
        ]],
    );
    write_file(&exp.out, "aggregate.csv", &format!("{head}{aggregate}"))?;

    println!(
        "E[U] = {} (se {}), E[D] = {} (se {}) over {} trials; wrote {}",
        rational(est.u.mean),
        float(est.u.se),
        rational(est.d.mean),
        float(est.d.se),
        est.trials,
        exp.out.display()
    );
    if let Some(w) = warning {
        eprintln!("{w}");
    }
    Ok(())
}

fn ratio_row(kind: &str, e: &RatioEntry) -> Vec<String> {
    vec![
        kind.to_string(),
        e.receiver.map_or(String::new(), |r| (r + 1).to_string()),
        float(e.measured),
        float(e.se),
        float(e.bound),
        float(e.ratio),
        float(e.ratio_se),
    ]
}

fn summary_text(exp: &Experiment, report: &ApproxReport, erasures: bool) -> String {
    let bound_u = if erasures { "w_n / (1 - Pe_n)" } else { "w_n" };
    let bound_d = if erasures { "(w_n + 1) / (2 (1 - Pe_n))" } else { "(w_n + 1) / 2" };
    let entry = |e: &RatioEntry| {
        format!(
            "{} / {} = {} (+- {})",
            float(e.measured),
            float(e.bound),
            float(e.ratio),
            float(e.ratio_se)
        )
    };
    let who = |e: &RatioEntry| e.receiver.map_or(String::new(), |r| format!(" [receiver {}]", r + 1));
    let mut s = String::new();
    s.push_str(&format!("Ratio report over {} trials\n\n", report.trials));
    s.push_str("Bounds tested:\n");
    s.push_str(&format!(
        "  throughput, per receiver: E[U_n] >= {bound_u}, the completion time of a receiver served alone\n"
    ));
    s.push_str(&format!(
        "  delay, per receiver:      E[D_n] >= {bound_d}, the delay of a receiver served alone uncoded\n"
    ));
    s.push_str("  throughput, aggregate:    E[U] >= max_n of the per-receiver throughput bound\n");
    s.push_str(
        "  delay, aggregate:         E[D] >= w_n-weighted mean of the per-receiver delay bounds \
         (a lower bound on the optimum, not the optimum)\n\n",
    );
    s.push_str("Strong ratios (worst receiver):\n");
    s.push_str(&format!(
        "  throughput {}{}\n",
        entry(&report.strong_throughput),
        who(&report.strong_throughput)
    ));
    s.push_str(&format!("  delay      {}{}\n", entry(&report.strong_apdd), who(&report.strong_apdd)));
    s.push_str("Weak ratios (aggregate):\n");
    s.push_str(&format!("  throughput {}\n", entry(&report.weak_throughput)));
    s.push_str(&format!("  delay      {}\n\n", entry(&report.weak_apdd)));
    if exp.memory == MemoryMode::Memoryless {
        s.push_str(
            "Memoryless receivers: the throughput bound above is the full-memory limit. Memoryless \
             schedules need not reach it, and the gap can grow with K (all-pairs instances under the \
             halving scheme complete at ceil(log2 K) + 1 slots versus 2).\n\n",
        );
    }
    s.push_str(RATIO_CAVEAT);
    s.push('\n');
    s
}

pub fn ratio_report(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let exp = cfg.resolve()?;
    let est = monte_carlo(&exp)?;
    let b = bounds(&exp.sfm, Some(&exp.channel));
    let report = approximation_report(&est, &b);
    let warning = truncation_line(&est, exp.max_slots);
    let mut extra = describe(&exp);
    extra.extend(warning.clone());
    let head = header("ratio-report", &exp.fingerprint, exp.seed, &extra);

    let mut rows: Vec<Vec<String>> = Vec::new();
    rows.extend(report.throughput.iter().map(|e| ratio_row("throughput", e)));
    rows.extend(report.apdd.iter().map(|e| ratio_row("apdd", e)));
    rows.push(ratio_row("strong_throughput", &report.strong_throughput));
    rows.push(ratio_row("strong_apdd", &report.strong_apdd));
    rows.push(ratio_row("weak_throughput", &report.weak_throughput));
    rows.push(ratio_row("weak_apdd", &report.weak_apdd));
    let ratios = csv_body(&["kind", "receiver", "measured", "se", "bound", "ratio", "ratio_se"], rows);
    write_file(&exp.out, "ratios.csv", &format!("{head}{ratios}"))?;

    let summary = summary_text(&exp, &report, b.with_erasures);
    write_file(&exp.out, "summary.txt", &format!("{head}\n{summary}"))?;
    print!("{summary}");
    if let Some(w) = warning {
        eprintln!("{w}");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Objective {
    Completion,
    Apdd,
}

fn oracle_block<T>(out: &mut String, r: &OracleResult<T>, optimum: String) {
    out.push_str(&format!("field: {}\n", r.field));
    out.push_str(&format!("optimum: {optimum}\n"));
    out.push_str(&format!("nodes: {}\n", r.nodes));
    out.push_str("witness:\n");
    for v in &r.witness {
        out.push_str(&format!("{v}\n"));
    }
}

fn oracle_error(e: OracleError) -> CliError {
    match e {
        OracleError::Envelope { .. } => CliError::Capability(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

pub fn oracle(
    source: &str,
    objective: Objective,
    horizon: Option<usize>,
    field: Option<u32>,
) -> Result<(), CliError> {
    let sfm = config::load_sfm(source)?;
    let horizon = horizon.unwrap_or_else(|| oracle::default_horizon(&sfm));
    let fields: Vec<Field> = match field {
        Some(q) => vec![config::field_of_order(q)?],
        None => vec![Field::gf2()],
    };
    let settings = ExperimentConfig {
        sfm: Some(source.to_string()),
        field,
        max_slots: Some(horizon),
        scheme: Some(format!("oracle-{objective:?}").to_lowercase()),
        ..Default::default()
    };
    let mut out = header(
        "oracle",
        &config::fingerprint(&settings, &sfm),
        0,
        &[format!(
            "sfm={source} N={} K={} objective={} horizon={horizon}",
            sfm.n_receivers(),
            sfm.k_packets(),
            format!("{objective:?}").to_lowercase()
        )],
    );
    match objective {
        Objective::Completion => {
            let r = run_completion(&sfm, &fields[0], horizon, &mut out)?;
            // GF(2) can fall short of the field-agnostic limit; show where it is met
            if field.is_none() && r > sfm.max_weight() {
                out.push_str(&format!(
                    "note: GF(2) needs {r} slots but max w_n = {}; repeating over GF(4)\n",
                    sfm.max_weight()
                ));
                run_completion(&sfm, &Field::new(FieldSpec::GF4), horizon, &mut out)?;
            }
        }
        Objective::Apdd => match oracle::min_apdd(&sfm, &fields[0], horizon) {
            Ok(r) => oracle_block(&mut out, &r, rational(r.optimum)),
            Err(OracleError::Infeasible(h)) => out.push_str(&format!("optimum: infeasible within horizon {h}\n")),
            Err(e) => return Err(oracle_error(e)),
        },
    }
    print!("{out}");
    Ok(())
}

fn run_completion(sfm: &Sfm, field: &Field, horizon: usize, out: &mut String) -> Result<usize, CliError> {
    match oracle::min_completion(sfm, field, horizon) {
        Ok(r) => {
            oracle_block(out, &r, r.optimum.to_string());
            Ok(r.optimum)
        }
        Err(OracleError::Infeasible(h)) => {
            out.push_str(&format!("field: {}\noptimum: infeasible within horizon {h}\n", field.spec()));
            Ok(usize::MAX)
        }
        Err(e) => Err(oracle_error(e)),
    }
}

pub fn gen_sfm(generator: &str, params: &GenParams, out: Option<&Path>) -> Result<(), CliError> {
    let sfm = config::generate(generator, params)?;
    let source = match params.describe() {
        d if d.is_empty() => format!("gen:{generator}"),
        d => format!("gen:{generator}:{d}"),
    };
    let settings = ExperimentConfig { sfm: Some(source.clone()), seed: params.seed, ..Default::default() };
    let seed = params.seed.unwrap_or(0);
    let first = format!(
        "lncsim {} gen-sfm fingerprint={} seed={seed}",
        env!("CARGO_PKG_VERSION"),
        config::fingerprint(&settings, &sfm)
    );
    let text = serialize_sfm(&sfm, &[first, source]);
    match out {
        Some(path) => {
            fs::write(path, &text).map_err(|source| CliError::Output { path: path.display().to_string(), source })
        }
        None => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|source| CliError::Output { path: "stdout".into(), source })
        }
    }
}
