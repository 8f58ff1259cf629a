//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use blackwell_core::blackwell::{find_blackwell, BlackwellReport, DEFAULT_TOLERANCE};
use blackwell_core::chain::decompose;
use blackwell_core::delayed_q::{experiment, LearnerConfig};
use blackwell_core::distracting::{
    corollary4_adversary, corollary5_construct, gamma_star_closed_form, generate_chain, generate_two_state,
    rewards_all_transient, vmax_trend, DistractingSpec, KnownPair,
};
use blackwell_core::random::RandomFamily;
use blackwell_core::regret::{blackwell_regret_with, pivot_scan_with, standard_regret};
use blackwell_core::{
    enumerate_policies, evaluate, gain_bias, induce_chain, optimal_policy, policy_count, serialize_mdp, Mdp,
    MdpBuilder, Policy, DEFAULT_POLICY_CAP,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CAP: u128 = DEFAULT_POLICY_CAP;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn blackwell(mdp: &Mdp) -> BlackwellReport {
    find_blackwell(mdp, DEFAULT_TOLERANCE, CAP).expect("find_blackwell")
}

/// First `count` members of the random family with a positive threshold.
fn random_family(count: usize) -> Vec<(u64, Mdp, BlackwellReport)> {
    let family = RandomFamily::default();
    let mut out = Vec::new();
    let mut seed = 0;
    while out.len() < count {
        let mdp = family.sample(seed).expect("valid random MDP");
        let report = blackwell(&mdp);
        if report.gamma_star > 0.0 {
            out.push((seed, mdp, report));
        }
        seed += 1;
    }
    out
}

fn short_chain() -> Mdp {
    generate_chain(2, 0.25, 1.0).unwrap()
}

fn slow_escape() -> Mdp {
    generate_two_state(1.0 / 500.0, 0.1, 1.0).unwrap()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for h in 1..=5 {
        for r_d in [0.01, 0.1, 0.5] {
            let numeric = blackwell(&generate_chain(h, r_d, 1.0).unwrap()).gamma_star;
            let closed = gamma_star_closed_form(&DistractingSpec::chain(h, r_d, 1.0)).unwrap();
            worst = worst.max((numeric - closed).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-8 && secs < 10.0,
        format!("max |numeric - closed form| = {worst:.3e} (tol 1e-8), {secs:.2}s (limit 10s)"),
    )
}

fn criterion_2() -> Verdict {
    let report = blackwell(&slow_escape());
    let err = (report.gamma_star - 50.0 / 50.9).abs();
    let warned = report.warnings.iter().any(|w| w.contains("0.84724541"));
    verdict(
        err <= 1e-8 && warned,
        format!("gamma* = {:.12}, error {err:.3e} (tol 1e-8), warning present: {warned}", report.gamma_star),
    )
}

fn criterion_3(family: &[(u64, Mdp, BlackwellReport)]) -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (seed, mdp, report) in family {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..5 {
            let gamma_learn = rng.random_range(0.0..report.gamma_star);
            let (pi, _) = optimal_policy(mdp, gamma_learn).unwrap();
            let r_b = blackwell_regret_with(mdp, report, &pi, gamma_learn).unwrap().blackwell_regret;
            let r_star = standard_regret(mdp, &pi, report.gamma_star).unwrap();
            worst = worst.max((r_b - r_star).abs());
            checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-9 && secs < 60.0 && checked == 250,
        format!("{checked} cases, max |R_B - R(pi; gamma*)| = {worst:.3e} (tol 1e-9), {secs:.2}s (limit 60s)"),
    )
}

struct PivotOutcome {
    chain_ok: bool,
    decreasing: bool,
    final_small: bool,
    final_gap: f64,
}

fn pivot_outcome(mdp: &Mdp, report: &BlackwellReport) -> PivotOutcome {
    let grid: Vec<f64> = (1..=6)
        .map(|k| report.gamma_star - 10f64.powi(-k))
        .filter(|&g| g >= 0.0)
        .collect();
    let scan = pivot_scan_with(mdp, report, Some(&grid), CAP).unwrap();
    let gaps = scan.pivot_gaps();
    let final_gap = *gaps.last().unwrap();
    PivotOutcome {
        chain_ok: scan.chain.iter().all(|c| c.holds()),
        decreasing: gaps.windows(2).all(|w| w[1] < w[0]),
        final_small: final_gap < 1e-4,
        final_gap,
    }
}

fn criterion_4(family: &[(u64, Mdp, BlackwellReport)]) -> Verdict {
    let mut cases: Vec<(String, Mdp, BlackwellReport)> = family
        .iter()
        .map(|(seed, mdp, r)| (format!("random#{seed}"), mdp.clone(), r.clone()))
        .collect();
    for (name, mdp) in [("short_chain", short_chain()), ("slow_escape", slow_escape())] {
        let r = blackwell(&mdp);
        cases.push((name.to_string(), mdp, r));
    }
    let (mut chain_fail, mut dec_fail, mut small_fail) = (Vec::new(), Vec::new(), Vec::new());
    for (name, mdp, report) in &cases {
        let o = pivot_outcome(mdp, report);
        if !o.chain_ok {
            chain_fail.push(name.clone());
        }
        if !o.decreasing {
            dec_fail.push(name.clone());
        }
        if !o.final_small {
            small_fail.push(format!("{name} ({:.2e})", o.final_gap));
        }
    }
    let summarize = |v: &[String]| {
        if v.is_empty() {
            "none".to_string()
        } else if v.len() <= 4 {
            v.join(", ")
        } else {
            format!("{}, ... ({} total)", v[..4].join(", "), v.len())
        }
    };
    verdict(
        chain_fail.is_empty() && dec_fail.is_empty() && small_fail.is_empty(),
        format!(
            "{} instances; inequality chain fails: {}; PG not strictly decreasing: {}; final PG >= 1e-4: {}",
            cases.len(),
            summarize(&chain_fail),
            summarize(&dec_fail),
            summarize(&small_fail)
        ),
    )
}

fn criterion_5() -> Verdict {
    let mut failures = Vec::new();
    let mut count = 0;
    for gamma in [0.3, 0.5, 0.9] {
        for known in [
            KnownPair::RdRmax { r_d: 0.5, r_max: 1.0 },
            KnownPair::RdRmax { r_d: 0.6, r_max: 1.0 },
            KnownPair::RdRmax { r_d: 1.4, r_max: 2.0 },
            KnownPair::DRmax { d: 2, r_max: 1.0 },
            KnownPair::DRd { d: 2, r_d: 0.1 },
        ] {
            count += 1;
            let inst = corollary4_adversary(known, gamma).unwrap();
            let (opt, _) = optimal_policy(&inst.mdp, gamma).unwrap();
            let gain = gain_bias(&inst.mdp, &opt).unwrap().gain[0];
            let report = blackwell(&inst.mdp);
            let late = 0.5 * (1.0 + report.gamma_star);
            let (opt_late, _) = optimal_policy(&inst.mdp, late).unwrap();
            let ok = (gain - inst.spec.r_d).abs() < 1e-9 && opt_late == report.beta;
            if !ok {
                failures.push(format!("{known:?} at {gamma}: gain {gain}, late optimum {opt_late}"));
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!("{count} instances, failures: {}", if failures.is_empty() { "none".into() } else { failures.join("; ") }),
    )
}

fn criterion_6() -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for eps in [0.1, 0.01, 0.001] {
        let c = corollary5_construct(eps).unwrap();
        // independent recomputation at the reported threshold
        let vb = evaluate(&c.mdp, &c.beta, c.gamma_star).unwrap();
        let vt = evaluate(&c.mdp, &c.pi_tilde, c.gamma_star).unwrap();
        let sup = vb.values.iter().zip(&vt.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let gain_gap = gain_bias(&c.mdp, &c.beta).unwrap().gain[0] - gain_bias(&c.mdp, &c.pi_tilde).unwrap().gain[0];
        ok &= sup < eps && gain_gap > 0.4;
        parts.push(format!("eps {eps}: sup gap {sup:.2e}, gain gap {gain_gap:.3}"));
    }
    verdict(ok, parts.join("; "))
}

fn recurrent_reward_witness(mdp: &Mdp) -> bool {
    let v = rewards_all_transient(mdp, CAP).unwrap();
    match (v.all_transient, v.witness) {
        (false, Some((policy, s))) => {
            let chain = induce_chain(mdp, &policy).unwrap();
            decompose(&chain.transition).is_recurrent(s) && chain.reward[s] > 0.0
        }
        _ => false,
    }
}

fn sink_chain() -> Mdp {
    MdpBuilder::new(&["t0", "t1", "t2", "sink"], &["next", "skip"], 1.0)
        .transition(0, 0, &[(1, 1.0, 1.0)])
        .transition(0, 1, &[(3, 1.0, 0.5)])
        .transition(1, 0, &[(2, 1.0, 1.0)])
        .transition(2, 0, &[(3, 0.5, 1.0), (0, 0.5, 0.0)])
        .transition(3, 0, &[(3, 1.0, 0.0)])
        .build()
        .unwrap()
}

fn criterion_7() -> Verdict {
    let chain_ok = recurrent_reward_witness(&short_chain());
    let escape_ok = recurrent_reward_witness(&slow_escape());
    let trend = vmax_trend(&sink_chain(), &[0.9, 0.99, 0.999], CAP).unwrap();
    let hi = trend.v_max.iter().cloned().fold(f64::MIN, f64::max);
    let lo = trend.v_max.iter().cloned().fold(f64::MAX, f64::min);
    let bound = trend.transience.value_bound.unwrap_or(f64::NAN);
    let sink_ok = trend.transience.all_transient && hi - lo < bound;
    verdict(
        chain_ok && escape_ok && sink_ok,
        format!(
            "short_chain witness ok: {chain_ok}, slow_escape witness ok: {escape_ok}, sink chain transient: {}, V_max variation {:.4} vs bound {bound:.4}",
            trend.transience.all_transient,
            hi - lo
        ),
    )
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let mdp = generate_two_state(0.2, 0.1, 1.0).unwrap();
    let gs = gamma_star_closed_form(&DistractingSpec::two_state(0.2, 0.1, 1.0)).unwrap();
    let configs: Vec<LearnerConfig> = [gs - 0.01, gs + 0.05]
        .iter()
        .map(|&gamma| LearnerConfig::new(&mdp, gamma, 0.05, 0.1, 2024, 10_000_000).unwrap())
        .collect();
    let e = experiment(&mdp, &configs, 5, Some(0), CAP).unwrap();
    let low_bad = e.runs.iter().filter(|r| r.config == 0 && !r.gain_optimal).count();
    let high_beta = e.runs.iter().filter(|r| r.config == 1 && r.blackwell_optimal).count();
    let pg_low = e.rows[0].exact_policy_gap.unwrap();
    let pg_high = e.rows[1].exact_policy_gap.unwrap();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        low_bad >= 4 && high_beta >= 4 && pg_low < pg_high && secs < 300.0,
        format!(
            "m = {}/{}, non-gain-optimal below threshold {low_bad}/5, Blackwell optimal above {high_beta}/5, \
             exact PG(s_d) {pg_low:.4e} < {pg_high:.4e}, {secs:.2}s",
            configs[0].m, configs[1].m
        ),
    )
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_blackwell"))
        .args(args)
        .output()
        .expect("spawn cli");
    (out.status.code().unwrap_or(-1), out.stdout, out.stderr)
}

fn criterion_9() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let (chain, slow_escape, sink) = (p("chain.mdp"), p("slow.mdp"), p("sink.mdp"));
    std::fs::write(&sink, serialize_mdp(&sink_chain())).unwrap();
    let invocations: Vec<Vec<&str>> = vec![
        vec!["generate", "chain", "--h", "2", "--eps", "0.25", "--r-max", "1", "--out", &chain],
        vec!["generate", "two-state", "--p", "0.002", "--r-d", "0.1", "--r-max", "1", "--out", &slow_escape],
        vec!["analyze", "--mdp", &chain, "--gamma", "0.9"],
        vec!["gamma-star", "--mdp", &slow_escape],
        vec!["regret", "--mdp", &chain, "--gamma-learn", "0.3"],
        vec!["gaps", "--mdp", &slow_escape, "--gamma", "0.95"],
        vec!["pivot-scan", "--mdp", &slow_escape],
        vec!["diameter", "--mdp", &chain],
        vec!["transient-check", "--mdp", &sink],
        vec!["learn", "--mdp", &slow_escape, "--gamma", "0.5", "--seed", "3", "--m", "50"],
        vec!["sweep", "--mdp", &slow_escape, "--gammas", "0.4,0.6", "--runs", "3", "--seed", "3", "--m", "50"],
    ];
    let mut bad = Vec::new();
    for args in &invocations {
        for format in ["json", "csv"] {
            let mut full = args.clone();
            full.extend(["--format", format]);
            let a = run_cli(&full);
            let b = run_cli(&full);
            if a != b || a.0 != 0 {
                bad.push(format!("{} ({format}, exit {})", args[0], a.0));
            }
        }
    }
    verdict(
        bad.is_empty(),
        format!(
            "{} invocations run twice in two formats; mismatches or failures: {}",
            invocations.len(),
            if bad.is_empty() { "none".into() } else { bad.join(", ") }
        ),
    )
}

fn criterion_10() -> Verdict {
    let family = RandomFamily::default();
    let mut mdps: Vec<Mdp> = vec![short_chain(), slow_escape(), sink_chain()];
    let mut seed = 10_000;
    while mdps.len() < 203 {
        let mdp = family.sample(seed).unwrap();
        seed += 1;
        if policy_count(&mdp) <= 64 {
            mdps.push(mdp);
        }
    }
    let mut value_fail = 0;
    let mut beta_fail = 0;
    for mdp in &mdps {
        let policies: Vec<Policy> = enumerate_policies(mdp, 64).unwrap().collect();
        let best_at = |gamma: f64| -> (Vec<f64>, Vec<Vec<f64>>) {
            let all: Vec<Vec<f64>> = policies.iter().map(|p| evaluate(mdp, p, gamma).unwrap().values).collect();
            let best = (0..mdp.num_states())
                .map(|s| all.iter().map(|v| v[s]).fold(f64::MIN, f64::max))
                .collect();
            (best, all)
        };
        for gamma in [0.0, 0.5, 0.9, 0.99] {
            let (best, _) = best_at(gamma);
            let (_, v) = optimal_policy(mdp, gamma).unwrap();
            if v.values.iter().zip(&best).any(|(a, b)| (a - b).abs() > 1e-9 * b.abs().max(1.0)) {
                value_fail += 1;
            }
        }
        let report = blackwell(mdp);
        let beta_index = policies.iter().position(|p| *p == report.beta).unwrap();
        for k in 4..=6 {
            let (best, all) = best_at(1.0 - 10f64.powi(-k));
            let tol = 1e-9 * best.iter().cloned().fold(1.0, f64::max);
            if all[beta_index].iter().zip(&best).any(|(v, b)| *v < b - tol) {
                beta_fail += 1;
            }
        }
    }
    verdict(
        value_fail == 0 && beta_fail == 0,
        format!(
            "{} MDPs; value mismatches {value_fail}, beta not enumeration-optimal {beta_fail}",
            mdps.len()
        ),
    )
}

fn main() -> ExitCode {
    let family = random_family(50);
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        (1, "closed-form threshold on chains", Box::new(criterion_1)),
        (2, "two-state threshold and warning", Box::new(criterion_2)),
        (3, "regret identity below threshold", Box::new(|| criterion_3(&family))),
        (4, "pivot state inequality chain", Box::new(|| criterion_4(&family))),
        (5, "adversarial chain construction", Box::new(criterion_5)),
        (6, "near-indifferent construction", Box::new(criterion_6)),
        (7, "transient reward checker", Box::new(criterion_7)),
        (8, "delayed Q-learning near the threshold", Box::new(criterion_8)),
        (9, "CLI determinism", Box::new(criterion_9)),
        (10, "oracle equivalence", Box::new(criterion_10)),
    ];
    let mut failed = 0;
    for (n, name, check) in &criteria {
        let v = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                verdict(false, format!("panicked: {msg}"))
            });
        if !v.pass {
            failed += 1;
        }
        println!("acceptance {n:>2} {}: {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
