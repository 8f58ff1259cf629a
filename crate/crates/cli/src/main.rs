use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blackwell_core::blackwell::{find_blackwell, DEFAULT_TOLERANCE};
use blackwell_core::delayed_q::{experiment, run_delayed_q, LearnerConfig, Termination};
use blackwell_core::distracting::{
    annotate, diameter, gamma_star_closed_form, generate_chain, generate_two_state, vmax_trend,
    DistractingSpec,
};
use blackwell_core::regret::{blackwell_regret_with, gap_scan, lemma1_check_with, pivot_scan_with};
use blackwell_core::{
    evaluate, gain_bias, load_mdp, optimal_policy, q_values, serialize_mdp, Error, Mdp, Policy, DEFAULT_POLICY_CAP,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

const CAP_VAR: &str = "BLACKWELL_MDP_POLICY_CAP";

#[derive(Parser)]
#[command(name = "blackwell", version, about = "Exact Blackwell-optimality analysis for tabular MDPs")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Values, Q-values, gain and bias of a policy (default: optimal at --gamma).
    Analyze {
        #[command(flatten)]
        mdp: MdpArg,
        #[arg(long)]
        gamma: f64,
        #[command(flatten)]
        policy: PolicyArg,
    },
    /// Blackwell optimal policy and threshold.
    GammaStar {
        #[command(flatten)]
        mdp: MdpArg,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
    /// Blackwell regret and the below-threshold regret identity.
    Regret {
        #[command(flatten)]
        mdp: MdpArg,
        #[arg(long)]
        gamma_learn: f64,
        /// Defaults to the optimal policy at --gamma-learn.
        #[command(flatten)]
        policy: PolicyArg,
    },
    /// Action gaps, policy gaps and the maximal action gap.
    Gaps {
        #[command(flatten)]
        mdp: MdpArg,
        #[arg(long)]
        gamma: f64,
        #[command(flatten)]
        policy: PolicyArg,
    },
    /// Policy gaps of the Blackwell optimal policy below the threshold.
    PivotScan {
        #[command(flatten)]
        mdp: MdpArg,
        /// Comma-separated discounts below the threshold.
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
    },
    /// Write a generated MDP file.
    Generate {
        #[command(subcommand)]
        family: Family,
    },
    /// Diameter and the maximizing pair.
    Diameter {
        #[command(flatten)]
        mdp: MdpArg,
    },
    /// Whether every reward is transient, plus the V_max trend.
    TransientCheck {
        #[command(flatten)]
        mdp: MdpArg,
        #[arg(long, value_delimiter = ',', default_values_t = [0.9, 0.99, 0.999])]
        gammas: Vec<f64>,
    },
    /// One delayed Q-learning run.
    Learn {
        #[command(flatten)]
        mdp: MdpArg,
        #[arg(long)]
        gamma: f64,
        #[command(flatten)]
        learner: LearnerArgs,
    },
    /// Repeated delayed Q-learning runs classified by the exact oracles.
    Sweep {
        #[command(flatten)]
        mdp: MdpArg,
        #[arg(long, value_delimiter = ',', required = true)]
        gammas: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// State whose exact policy gap is reported.
        #[arg(long)]
        state: Option<String>,
        #[arg(long, value_enum, default_value_t = SweepTable::Summary)]
        table: SweepTable,
        #[command(flatten)]
        learner: LearnerArgs,
    },
}

#[derive(Subcommand)]
enum Family {
    /// Chain s0..s{h} with a distractor loop at s0.
    Chain {
        #[arg(long)]
        h: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        r_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two-state distractor with a stochastic escape.
    TwoState {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        r_d: f64,
        #[arg(long, default_value_t = 1.0)]
        r_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepTable {
    Summary,
    Runs,
}

#[derive(Args)]
struct MdpArg {
    /// MDP file.
    #[arg(long = "mdp")]
    path: PathBuf,
}

#[derive(Args)]
struct PolicyArg {
    /// Action names in state order (`a,b,...`) or `state=action` pairs.
    #[arg(long)]
    policy: Option<String>,
}

#[derive(Args)]
struct LearnerArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Samples per attempted update; heuristic default when omitted.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 10_000_000)]
    max_steps: u64,
}

enum Failure {
    Usage(String),
    Cap(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::CapExceeded { .. } => Failure::Cap(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Tabular payload shared by the JSON and CSV renderings.
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn to_json(&self) -> Value {
        json!({ "columns": self.columns, "rows": self.rows })
    }
}

struct Report {
    command: &'static str,
    inputs: Value,
    results: Map<String, Value>,
    table: Table,
    warnings: Vec<String>,
    /// Budget exhausted: output is still written, exit code 2.
    budget_hit: bool,
}

fn cap() -> Outcome<u128> {
    match std::env::var(CAP_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{CAP_VAR} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(DEFAULT_POLICY_CAP),
    }
}

fn read_mdp(arg: &MdpArg) -> Outcome<Mdp> {
    let file = fs::File::open(&arg.path)
        .map_err(|e| Failure::Usage(format!("cannot open {}: {e}", arg.path.display())))?;
    Ok(load_mdp(std::io::BufReader::new(file))?)
}

fn parse_policy(mdp: &Mdp, text: &str) -> Outcome<Policy> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.iter().all(|p| p.contains('=')) {
        let pairs: Vec<(&str, &str)> = parts.iter().map(|p| p.split_once('=').unwrap()).collect();
        return Ok(mdp.policy_from_names(&pairs)?);
    }
    if parts.len() != mdp.num_states() {
        return Err(Failure::Usage(format!(
            "policy lists {} actions, MDP has {} states",
            parts.len(),
            mdp.num_states()
        )));
    }
    let pairs: Vec<(&str, &str)> = mdp.states().iter().map(String::as_str).zip(parts).collect();
    Ok(mdp.policy_from_names(&pairs)?)
}

fn policy_or_optimal(mdp: &Mdp, arg: &PolicyArg, gamma: f64) -> Outcome<(Policy, bool)> {
    match &arg.policy {
        Some(text) => Ok((parse_policy(mdp, text)?, false)),
        None => Ok((optimal_policy(mdp, gamma)?.0, true)),
    }
}

fn policy_json(mdp: &Mdp, p: &Policy) -> Value {
    json!(mdp.describe_policy(p))
}

fn policy_cell(mdp: &Mdp, p: &Policy) -> Value {
    Value::String(p.iter().map(|&a| mdp.actions()[a].as_str()).collect::<Vec<_>>().join(" "))
}

fn num(x: f64) -> Value {
    json!(x)
}

fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

fn state_name(mdp: &Mdp, s: usize) -> Value {
    Value::String(mdp.states()[s].clone())
}

fn check_gamma(gamma: f64) -> Outcome<()> {
    Ok(blackwell_core::solver::check_discount(gamma)?)
}

fn analyze(mdp: &Mdp, path: &Path, gamma: f64, policy: &PolicyArg) -> Outcome<Report> {
    check_gamma(gamma)?;
    let (pi, is_optimal) = policy_or_optimal(mdp, policy, gamma)?;
    let values = evaluate(mdp, &pi, gamma)?;
    let q = q_values(mdp, &pi, gamma)?;
    let gb = gain_bias(mdp, &pi)?;
    let mut warnings = Vec::new();
    if gb.multichain {
        warnings.push("policy induces a multichain; gain varies by state".to_string());
    }
    let mut table = Table::new(&["state", "action", "value", "gain", "bias"]);
    for s in 0..mdp.num_states() {
        table.push(vec![
            state_name(mdp, s),
            Value::String(mdp.actions()[pi.action(s)].clone()),
            num(values.get(s)),
            num(gb.gain[s]),
            num(gb.bias[s]),
        ]);
    }
    let q_json: Map<String, Value> = (0..mdp.num_states())
        .map(|s| {
            let row: Map<String, Value> = q.row(s).map(|(a, v)| (mdp.actions()[a].clone(), num(v))).collect();
            (mdp.states()[s].clone(), Value::Object(row))
        })
        .collect();
    let mut results = Map::new();
    results.insert("policy".into(), policy_json(mdp, &pi));
    results.insert("policy_is_optimal".into(), json!(is_optimal));
    results.insert("expected_value".into(), num(values.expect(mdp.initial())));
    results.insert("q_values".into(), Value::Object(q_json));
    results.insert("multichain".into(), json!(gb.multichain));
    Ok(Report {
        command: "analyze",
        inputs: json!({ "mdp": path, "gamma": gamma, "policy": policy.policy }),
        results,
        table,
        warnings,
        budget_hit: false,
    })
}

fn gamma_star(mdp: &Mdp, path: &Path, tolerance: f64) -> Outcome<Report> {
    let report = find_blackwell(mdp, tolerance, cap()?)?;
    let annotation = annotate(mdp, &report);
    let mut table = Table::new(&["competitor", "state", "gamma", "gap", "tied"]);
    let mut crossovers = Vec::new();
    for c in &report.crossovers {
        table.push(vec![
            policy_cell(mdp, &c.competitor),
            state_name(mdp, c.state),
            opt_num(c.gamma),
            num(c.gap),
            json!(c.tied),
        ]);
        crossovers.push(json!({
            "competitor": policy_json(mdp, &c.competitor),
            "state": mdp.states()[c.state],
            "gamma": c.gamma,
            "gap": c.gap,
            "tied": c.tied,
        }));
    }
    let mut results = Map::new();
    results.insert("beta".into(), policy_json(mdp, &report.beta));
    results.insert("gamma_star".into(), num(report.gamma_star));
    results.insert("closed_form".into(), opt_num(annotation.closed_form));
    results.insert("family".into(), json!(annotation.family));
    results.insert("tolerance".into(), num(report.tolerance));
    results.insert("probe".into(), num(report.probe));
    results.insert("certified_grid".into(), json!(report.certified_grid));
    results.insert("crossovers".into(), Value::Array(crossovers));
    Ok(Report {
        command: "gamma-star",
        inputs: json!({ "mdp": path, "tolerance": tolerance }),
        results,
        table,
        warnings: report.warnings,
        budget_hit: false,
    })
}

fn key_value(pairs: Vec<(&str, Value)>) -> Table {
    let mut t = Table::new(&["quantity", "value"]);
    for (k, v) in pairs {
        t.push(vec![Value::String(k.to_string()), v]);
    }
    t
}

fn regret(mdp: &Mdp, path: &Path, gamma_learn: f64, policy: &PolicyArg) -> Outcome<Report> {
    check_gamma(gamma_learn)?;
    let (pi, is_optimal) = policy_or_optimal(mdp, policy, gamma_learn)?;
    let report = find_blackwell(mdp, DEFAULT_TOLERANCE, cap()?)?;
    let r = blackwell_regret_with(mdp, &report, &pi, gamma_learn)?;
    let mut warnings = report.warnings.clone();
    let lemma = match lemma1_check_with(mdp, &report, &pi, gamma_learn) {
        Ok(c) => Some(c),
        Err(Error::Hypothesis(msg)) => {
            warnings.push(format!("regret identity not applicable: {msg}"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let table = key_value(vec![
        ("gamma_learn", num(r.gamma_learn)),
        ("gamma_star", num(r.gamma_star)),
        ("gamma_prime", num(r.gamma_prime)),
        ("blackwell_regret", num(r.blackwell_regret)),
        ("standard_regret_at_gamma_prime", num(r.standard_regret_at_gamma_prime)),
        ("regret_at_gamma_star", opt_num(lemma.as_ref().map(|c| c.regret_at_gamma_star))),
        ("identity_holds", lemma.as_ref().map_or(Value::Null, |c| json!(c.agree))),
    ]);
    let mut results = Map::new();
    results.insert("policy".into(), policy_json(mdp, &pi));
    results.insert("policy_is_optimal".into(), json!(is_optimal));
    results.insert("beta".into(), policy_json(mdp, &report.beta));
    Ok(Report {
        command: "regret",
        inputs: json!({ "mdp": path, "gamma_learn": gamma_learn, "policy": policy.policy }),
        results,
        table,
        warnings,
        budget_hit: false,
    })
}

fn gaps(mdp: &Mdp, path: &Path, gamma: f64, policy: &PolicyArg) -> Outcome<Report> {
    check_gamma(gamma)?;
    let (pi, _) = policy_or_optimal(mdp, policy, gamma)?;
    let scan = gap_scan(mdp, &pi, gamma, cap()?)?;
    let mut table = Table::new(&["state", "action_gap", "policy_gap", "witness"]);
    for g in &scan.states {
        table.push(vec![
            state_name(mdp, g.state),
            num(g.action_gap),
            num(g.policy_gap),
            policy_cell(mdp, &g.witness_policy),
        ]);
    }
    let mut warnings = Vec::new();
    if scan.states.is_empty() {
        warnings.push("no state has more than one action".into());
    }
    let mut results = Map::new();
    results.insert("policy".into(), policy_json(mdp, &pi));
    results.insert("max_action_gap".into(), num(scan.mag));
    Ok(Report {
        command: "gaps",
        inputs: json!({ "mdp": path, "gamma": gamma, "policy": policy.policy }),
        results,
        table,
        warnings,
        budget_hit: false,
    })
}

fn pivot(mdp: &Mdp, path: &Path, gammas: Option<&[f64]>) -> Outcome<Report> {
    let cap = cap()?;
    let report = find_blackwell(mdp, DEFAULT_TOLERANCE, cap)?;
    let scan = pivot_scan_with(mdp, &report, gammas, cap)?;
    let mut warnings = report.warnings.clone();
    if scan.vacuous {
        warnings.push("gamma* = 0: no myopic discount, scan is vacuous".into());
    }
    let mut table = Table::new(&["gamma", "state", "policy_gap", "witness", "pivot"]);
    for row in &scan.rows {
        for (s, g) in row.gaps.iter().enumerate() {
            if let Some(g) = g {
                table.push(vec![
                    num(row.gamma),
                    state_name(mdp, s),
                    num(g.value),
                    policy_cell(mdp, &g.witness),
                    json!(scan.pivots.contains(&s)),
                ]);
            }
        }
    }
    let chain: Vec<Value> = scan
        .chain
        .iter()
        .map(|c| {
            json!({
                "gamma": c.gamma,
                "witness": c.witness.as_ref().map(|w| policy_json(mdp, w)),
                "beta_below_witness": c.beta_below_witness,
                "witness_grows": c.witness_grows,
                "witness_bounded_by_beta": c.witness_bounded_by_beta,
                "holds": c.holds(),
                "gap_bound": c.gap_bound,
            })
        })
        .collect();
    let mut results = Map::new();
    results.insert("beta".into(), policy_json(mdp, &scan.beta));
    results.insert("gamma_star".into(), num(scan.gamma_star));
    results.insert("vacuous".into(), json!(scan.vacuous));
    results.insert(
        "pivots".into(),
        json!(scan.pivots.iter().map(|&s| mdp.states()[s].clone()).collect::<Vec<_>>()),
    );
    results.insert("inequality_chain".into(), Value::Array(chain));
    Ok(Report {
        command: "pivot-scan",
        inputs: json!({ "mdp": path, "gammas": gammas }),
        results,
        table,
        warnings,
        budget_hit: false,
    })
}

fn generate(family: &Family) -> Outcome<Report> {
    let (mdp, spec, out, inputs) = match family {
        Family::Chain { h, eps, r_max, out } => (
            generate_chain(*h, *eps, *r_max)?,
            DistractingSpec::chain(*h, *eps, *r_max),
            out,
            json!({ "family": "chain", "h": h, "eps": eps, "r_max": r_max, "out": out }),
        ),
        Family::TwoState { p, r_d, r_max, out } => (
            generate_two_state(*p, *r_d, *r_max)?,
            DistractingSpec::two_state(*p, *r_d, *r_max),
            out,
            json!({ "family": "two_state", "p": p, "r_d": r_d, "r_max": r_max, "out": out }),
        ),
    };
    fs::write(out, serialize_mdp(&mdp)).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", out.display())))?;
    let closed = gamma_star_closed_form(&spec)?;
    let table = key_value(vec![
        ("states", json!(mdp.num_states())),
        ("actions", json!(mdp.num_actions())),
        ("gamma_star_closed_form", num(closed)),
    ]);
    let mut results = Map::new();
    results.insert("spec".into(), json!(spec));
    Ok(Report {
        command: "generate",
        inputs,
        results,
        table,
        warnings: Vec::new(),
        budget_hit: false,
    })
}

fn diameter_cmd(mdp: &Mdp, path: &Path) -> Outcome<Report> {
    let d = diameter(mdp)?;
    let table = key_value(vec![
        ("diameter", num(d.d)),
        ("from", state_name(mdp, d.from)),
        ("to", state_name(mdp, d.to)),
    ]);
    Ok(Report {
        command: "diameter",
        inputs: json!({ "mdp": path }),
        results: Map::new(),
        table,
        warnings: Vec::new(),
        budget_hit: false,
    })
}

fn transient(mdp: &Mdp, path: &Path, gammas: &[f64]) -> Outcome<Report> {
    for &g in gammas {
        check_gamma(g)?;
    }
    let trend = vmax_trend(mdp, gammas, cap()?)?;
    let verdict = &trend.transience;
    let mut table = Table::new(&["gamma", "v_max"]);
    for (g, v) in trend.gammas.iter().zip(&trend.v_max) {
        table.push(vec![num(*g), num(*v)]);
    }
    let mut warnings = Vec::new();
    if !trend.communicating {
        warnings.push("MDP is not communicating; V_max is taken over all states".into());
    }
    let mut results = Map::new();
    results.insert("all_transient".into(), json!(verdict.all_transient));
    results.insert(
        "witness".into(),
        match &verdict.witness {
            Some((p, s)) => json!({ "policy": policy_json(mdp, p), "state": mdp.states()[*s] }),
            None => Value::Null,
        },
    );
    results.insert("value_bound".into(), opt_num(verdict.value_bound));
    results.insert("communicating".into(), json!(trend.communicating));
    Ok(Report {
        command: "transient-check",
        inputs: json!({ "mdp": path, "gammas": gammas }),
        results,
        table,
        warnings,
        budget_hit: false,
    })
}

fn learner_config(mdp: &Mdp, gamma: f64, a: &LearnerArgs) -> Outcome<LearnerConfig> {
    let config = LearnerConfig::new(mdp, gamma, a.epsilon, a.delta, a.seed, a.max_steps)?;
    let config = match a.m {
        Some(m) => config.with_m(m),
        None => config,
    };
    config.validate()?;
    Ok(config)
}

fn learn(mdp: &Mdp, path: &Path, gamma: f64, a: &LearnerArgs) -> Outcome<Report> {
    let config = learner_config(mdp, gamma, a)?;
    let trace = run_delayed_q(mdp, &config)?;
    let mut table = Table::new(&["state", "action", "q", "visits", "greedy"]);
    for s in 0..mdp.num_states() {
        for (act, q) in trace.q_final[s].iter().enumerate() {
            if let Some(q) = q {
                table.push(vec![
                    state_name(mdp, s),
                    Value::String(mdp.actions()[act].clone()),
                    num(*q),
                    json!(trace.visit_counts[s][act]),
                    json!(trace.greedy_policy.action(s) == act),
                ]);
            }
        }
    }
    let budget_hit = trace.termination == Termination::StepBudget;
    let mut warnings = Vec::new();
    if a.m.is_none() {
        warnings.push(format!("m = {} from the heuristic default", config.m));
    }
    if budget_hit {
        warnings.push(format!("step budget {} exhausted", config.max_steps));
    }
    let mut results = Map::new();
    results.insert("steps_taken".into(), json!(trace.steps_taken));
    results.insert("terminated_by".into(), json!(trace.terminated_by));
    results.insert("greedy_policy".into(), policy_json(mdp, &trace.greedy_policy));
    results.insert("m".into(), json!(config.m));
    results.insert("successful_updates".into(), json!(trace.updates.len()));
    results.insert(
        "empirical_policy_gap".into(),
        match trace.empirical_policy_gap_at {
            Some((s, g)) => json!({ "state": mdp.states()[s], "value": g }),
            None => Value::Null,
        },
    );
    Ok(Report {
        command: "learn",
        inputs: json!({
            "mdp": path, "gamma": gamma, "seed": a.seed, "epsilon": a.epsilon,
            "delta": a.delta, "m": a.m, "max_steps": a.max_steps,
        }),
        results,
        table,
        warnings,
        budget_hit,
    })
}

fn sweep(
    mdp: &Mdp,
    path: &Path,
    gammas: &[f64],
    runs: usize,
    state: Option<&str>,
    which: SweepTable,
    a: &LearnerArgs,
) -> Outcome<Report> {
    let configs = gammas
        .iter()
        .map(|&g| learner_config(mdp, g, a))
        .collect::<Outcome<Vec<_>>>()?;
    let designated = state.map(|s| mdp.state_index(s)).transpose()?;
    let e = experiment(mdp, &configs, runs, designated, cap()?)?;
    let budget_hit = e.runs.iter().any(|r| r.terminated_by == "step_budget");
    let mut warnings = Vec::new();
    if a.m.is_none() {
        warnings.push("m from the heuristic default; see the per-row m column".into());
    }
    if budget_hit {
        warnings.push(format!("step budget {} exhausted in at least one run", a.max_steps));
    }
    let summary: Vec<Value> = e.rows.iter().map(|r| json!(r)).collect();
    let table = match which {
        SweepTable::Summary => {
            let mut t = Table::new(&[
                "gamma",
                "m",
                "runs",
                "mean_steps",
                "std_steps",
                "blackwell_fraction",
                "gain_optimal_fraction",
                "exact_policy_gap",
            ]);
            for r in &e.rows {
                t.push(vec![
                    num(r.gamma),
                    json!(r.m),
                    json!(r.runs),
                    num(r.mean_steps),
                    num(r.std_steps),
                    num(r.blackwell_fraction),
                    num(r.gain_optimal_fraction),
                    opt_num(r.exact_policy_gap),
                ]);
            }
            t
        }
        SweepTable::Runs => {
            let mut t = Table::new(&[
                "gamma",
                "run",
                "seed",
                "m",
                "steps",
                "terminated_by",
                "greedy_policy",
                "blackwell_optimal",
                "gain_optimal",
                "empirical_gap",
            ]);
            for r in &e.runs {
                t.push(vec![
                    num(r.gamma),
                    json!(r.run),
                    json!(r.seed),
                    json!(r.m),
                    json!(r.steps),
                    json!(r.terminated_by),
                    policy_cell(mdp, &r.greedy_policy),
                    json!(r.blackwell_optimal),
                    json!(r.gain_optimal),
                    opt_num(r.empirical_gap),
                ]);
            }
            t
        }
    };
    let mut results = Map::new();
    results.insert("beta".into(), policy_json(mdp, &e.beta));
    results.insert("gamma_star".into(), num(e.gamma_star));
    results.insert("summary".into(), Value::Array(summary));
    Ok(Report {
        command: "sweep",
        inputs: json!({
            "mdp": path, "gammas": gammas, "runs": runs, "state": state, "seed": a.seed,
            "epsilon": a.epsilon, "delta": a.delta, "m": a.m, "max_steps": a.max_steps,
        }),
        results,
        table,
        warnings,
        budget_hit,
    })
}

fn run(cli: &Cli) -> Outcome<Report> {
    match &cli.command {
        Command::Analyze { mdp, gamma, policy } => analyze(&read_mdp(mdp)?, &mdp.path, *gamma, policy),
        Command::GammaStar { mdp, tolerance } => gamma_star(&read_mdp(mdp)?, &mdp.path, *tolerance),
        Command::Regret { mdp, gamma_learn, policy } => regret(&read_mdp(mdp)?, &mdp.path, *gamma_learn, policy),
        Command::Gaps { mdp, gamma, policy } => gaps(&read_mdp(mdp)?, &mdp.path, *gamma, policy),
        Command::PivotScan { mdp, gammas } => pivot(&read_mdp(mdp)?, &mdp.path, gammas.as_deref()),
        Command::Generate { family } => generate(family),
        Command::Diameter { mdp } => diameter_cmd(&read_mdp(mdp)?, &mdp.path),
        Command::TransientCheck { mdp, gammas } => transient(&read_mdp(mdp)?, &mdp.path, gammas),
        Command::Learn { mdp, gamma, learner } => learn(&read_mdp(mdp)?, &mdp.path, *gamma, learner),
        Command::Sweep {
            mdp,
            gammas,
            runs,
            state,
            table,
            learner,
        } => sweep(&read_mdp(mdp)?, &mdp.path, gammas, *runs, state.as_deref(), *table, learner),
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn render(report: Report, format: Format) -> Outcome<(String, String)> {
    let mut results = report.results;
    results.insert("table".into(), report.table.to_json());
    let results = Value::Object(results);
    match format {
        Format::Json => {
            let envelope = json!({
                "command": report.command,
                "inputs": report.inputs,
                "results": results,
                "warnings": report.warnings,
            });
            let mut text = serde_json::to_string_pretty(&envelope).expect("serializable");
            text.push('\n');
            Ok((text, String::new()))
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&report.table.columns).expect("in-memory write");
            for row in &report.table.rows {
                w.write_record(row.iter().map(cell)).expect("in-memory write");
            }
            let text = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
            let err: String = report.warnings.iter().map(|m| format!("warning: {m}\n")).collect();
            Ok((text, err))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let format = cli.format;
    let outcome = run(&cli).and_then(|r| {
        let budget = r.budget_hit;
        render(r, format).map(|out| (out, budget))
    });
    match outcome {
        Ok(((out, err), budget_hit)) => {
            let _ = std::io::stdout().lock().write_all(out.as_bytes());
            let _ = std::io::stderr().lock().write_all(err.as_bytes());
            ExitCode::from(if budget_hit { 2 } else { 0 })
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Cap(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
