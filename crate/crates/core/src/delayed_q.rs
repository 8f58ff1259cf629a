//! Delayed Q-learning on a simulated MDP and a seeded experiment harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::blackwell::{find_blackwell, BlackwellReport, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::mdp::{Mdp, Policy};
use crate::regret::policy_gap;
use crate::solver::{check_discount, gain_bias};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnerConfig {
    pub gamma: f64,
    /// Update tolerance ε₁.
    pub epsilon: f64,
    pub delta: f64,
    /// Samples per attempted update.
    pub m: usize,
    pub seed: u64,
    /// RNG stream; the experiment harness sets it to the run index.
    pub stream: u64,
    pub max_steps: u64,
}

impl LearnerConfig {
    /// Config with the heuristic default `m`.
    pub fn new(mdp: &Mdp, gamma: f64, epsilon: f64, delta: f64, seed: u64, max_steps: u64) -> Result<Self> {
        check_discount(gamma)?;
        let m = default_m(mdp.num_states(), mdp.num_actions(), gamma, epsilon, delta)?;
        let config = LearnerConfig {
            gamma,
            epsilon,
            delta,
            m,
            seed,
            stream: 0,
            max_steps,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_discount(self.gamma)?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Parameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Parameter(format!("delta must be in (0, 1), got {}", self.delta)));
        }
        if self.m == 0 {
            return Err(Error::Parameter("m must be at least 1".into()));
        }
        Ok(())
    }
}

/// Heuristic `⌈ln(3|S||A|/δ) / (2 ε² (1−γ)²)⌉`.
pub fn default_m(states: usize, actions: usize, gamma: f64, epsilon: f64, delta: f64) -> Result<usize> {
    check_discount(gamma)?;
    if !(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("bad epsilon {epsilon} or delta {delta}")));
    }
    let num = (3.0 * (states * actions) as f64 / delta).ln();
    let den = 2.0 * epsilon * epsilon * (1.0 - gamma).powi(2);
    Ok(((num / den).ceil() as usize).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged { state: usize },
    StepBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QUpdate {
    pub step: u64,
    pub state: usize,
    pub action: usize,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnerTrace {
    pub steps_taken: u64,
    /// `converged_at_<state>` or `step_budget`.
    pub terminated_by: String,
    #[serde(skip)]
    pub termination: Termination,
    pub greedy_policy: Policy,
    /// `None` for undefined actions.
    pub q_final: Vec<Vec<Option<f64>>>,
    pub visit_counts: Vec<Vec<u64>>,
    /// Every successful update, in order.
    pub updates: Vec<QUpdate>,
    /// Q-based gap estimate at the terminal state: greedy value minus the
    /// best other action.
    pub empirical_policy_gap_at: Option<(usize, f64)>,
    pub m: usize,
}

fn label(mdp: &Mdp, t: Termination) -> String {
    match t {
        Termination::Converged { state } => format!("converged_at_{}", mdp.states()[state]),
        Termination::StepBudget => "step_budget".into(),
    }
}

fn greedy_action(q: &[Option<f64>]) -> usize {
    let mut best = None;
    for (a, v) in q.iter().enumerate() {
        if let Some(v) = *v {
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((a, v));
            }
        }
    }
    best.expect("every state has an action").0
}

fn max_q(q: &[Option<f64>]) -> f64 {
    q.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn self_loops(mdp: &Mdp, s: usize, a: usize) -> bool {
    mdp.outcomes(s, a)
        .map_or(false, |o| o.iter().all(|x| x.next == s || x.prob == 0.0))
}

fn sample(rng: &mut ChaCha8Rng, items: impl Iterator<Item = (f64, usize)>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (p, i) in items {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Runs a single continuing trajectory from a draw of the initial
/// distribution until convergence at a self-looping state or the budget.
pub fn run_delayed_q(mdp: &Mdp, config: &LearnerConfig) -> Result<LearnerTrace> {
    config.validate()?;
    let n = mdp.num_states();
    let k = mdp.num_actions();
    let gamma = config.gamma;
    let eps = config.epsilon;
    let m = config.m;
    let q_max = mdp.r_max() / (1.0 - gamma);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(config.stream);

    let mut q: Vec<Vec<Option<f64>>> = (0..n)
        .map(|s| (0..k).map(|a| mdp.is_available(s, a).then_some(q_max)).collect())
        .collect();
    let mut u = vec![vec![0.0f64; k]; n];
    let mut l = vec![vec![0usize; k]; n];
    let mut b = vec![vec![0u64; k]; n];
    let mut learn = vec![vec![true; k]; n];
    let mut visits = vec![vec![0u64; k]; n];
    let mut t_star = 0u64;
    let mut updates = Vec::new();

    let mut s = sample(&mut rng, mdp.initial().iter().copied().zip(0..));
    let mut t = 0u64;
    let termination = loop {
        let a = greedy_action(&q[s]);
        if self_loops(mdp, s, a) && !learn[s][a] && b[s][a] > t_star {
            break Termination::Converged { state: s };
        }
        if t >= config.max_steps {
            break Termination::StepBudget;
        }
        t += 1;
        let outcomes = mdp.outcomes(s, a).unwrap();
        let idx = sample(&mut rng, outcomes.iter().map(|o| o.prob).zip(0..));
        let (next, reward) = (outcomes[idx].next, outcomes[idx].reward);
        visits[s][a] += 1;

        if b[s][a] <= t_star {
            learn[s][a] = true;
        }
        if learn[s][a] {
            if l[s][a] == 0 {
                b[s][a] = t;
            }
            l[s][a] += 1;
            u[s][a] += reward + gamma * max_q(&q[next]);
            if l[s][a] == m {
                let current = q[s][a].unwrap();
                let target = u[s][a] / m as f64;
                if current - target >= 2.0 * eps {
                    let after = target + eps;
                    q[s][a] = Some(after);
                    t_star = t;
                    updates.push(QUpdate {
                        step: t,
                        state: s,
                        action: a,
                        before: current,
                        after,
                    });
                } else if b[s][a] >= t_star {
                    learn[s][a] = false;
                }
                u[s][a] = 0.0;
                l[s][a] = 0;
            }
        }
        s = next;
    };

    let greedy_policy = Policy::new((0..n).map(|s| greedy_action(&q[s])).collect());
    let empirical_policy_gap_at = match termination {
        Termination::Converged { state } => {
            let a = greedy_policy.action(state);
            let other = q[state]
                .iter()
                .enumerate()
                .filter(|&(b, v)| b != a && v.is_some())
                .map(|(_, v)| v.unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            other.is_finite().then(|| (state, q[state][a].unwrap() - other))
        }
        Termination::StepBudget => None,
    };
    Ok(LearnerTrace {
        steps_taken: t,
        terminated_by: label(mdp, termination),
        termination,
        greedy_policy,
        q_final: q,
        visit_counts: visits,
        updates,
        empirical_policy_gap_at,
        m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub config: usize,
    pub run: usize,
    pub seed: u64,
    pub gamma: f64,
    pub m: usize,
    pub steps: u64,
    pub terminated_by: String,
    pub greedy_policy: Policy,
    pub blackwell_optimal: bool,
    pub gain_optimal: bool,
    pub empirical_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub config: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub m: usize,
    pub runs: usize,
    pub mean_steps: f64,
    /// Sample standard deviation; zero for a single run.
    pub std_steps: f64,
    pub blackwell_fraction: f64,
    pub gain_optimal_fraction: f64,
    /// Exact policy gap of β at the designated state and this discount.
    pub exact_policy_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment {
    pub beta: Policy,
    pub gamma_star: f64,
    pub designated_state: Option<usize>,
    pub rows: Vec<SummaryRow>,
    pub runs: Vec<RunRecord>,
}

/// Oracle classification of a learned policy.
pub fn classify_policy(mdp: &Mdp, report: &BlackwellReport, policy: &Policy) -> Result<(bool, bool)> {
    let blackwell = *policy == report.beta || report.tied().any(|p| p == policy);
    let best = gain_bias(mdp, &report.beta)?;
    let mine = gain_bias(mdp, policy)?;
    let gain_optimal = best
        .gain
        .iter()
        .zip(&mine.gain)
        .all(|(g, h)| *h >= g - 1e-9 * g.abs().max(1.0));
    Ok((blackwell, gain_optimal))
}

/// Runs every config `runs_per_config` times; run `i` uses the config's seed
/// on RNG stream `i`.
pub fn experiment(
    mdp: &Mdp,
    configs: &[LearnerConfig],
    runs_per_config: usize,
    designated_state: Option<usize>,
    cap: u128,
) -> Result<Experiment> {
    let report = find_blackwell(mdp, DEFAULT_TOLERANCE, cap)?;
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..runs_per_config).map(move |r| (c, r)))
        .collect();
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let mut config = configs[c].clone();
            config.stream = r as u64;
            let trace = run_delayed_q(mdp, &config)?;
            let (blackwell_optimal, gain_optimal) = classify_policy(mdp, &report, &trace.greedy_policy)?;
            Ok(RunRecord {
                config: c,
                run: r,
                seed: config.seed,
                gamma: config.gamma,
                m: config.m,
                steps: trace.steps_taken,
                terminated_by: trace.terminated_by.clone(),
                greedy_policy: trace.greedy_policy,
                blackwell_optimal,
                gain_optimal,
                empirical_gap: trace.empirical_policy_gap_at.map(|(_, g)| g),
            })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    if runs_per_config > 0 {
        for (c, config) in configs.iter().enumerate() {
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.config == c).collect();
            let count = mine.len() as f64;
            let mean = mine.iter().map(|r| r.steps as f64).sum::<f64>() / count;
            let var = if mine.len() > 1 {
                mine.iter().map(|r| (r.steps as f64 - mean).powi(2)).sum::<f64>() / (count - 1.0)
            } else {
                0.0
            };
            let exact_policy_gap = match designated_state {
                Some(s) if mdp.available_actions(s).count() > 1 => {
                    Some(policy_gap(mdp, &report.beta, config.gamma, s, cap)?.value)
                }
                _ => None,
            };
            rows.push(SummaryRow {
                config: c,
                gamma: config.gamma,
                epsilon: config.epsilon,
                m: config.m,
                runs: mine.len(),
                mean_steps: mean,
                std_steps: var.sqrt(),
                blackwell_fraction: mine.iter().filter(|r| r.blackwell_optimal).count() as f64 / count,
                gain_optimal_fraction: mine.iter().filter(|r| r.gain_optimal).count() as f64 / count,
                exact_policy_gap,
            });
        }
    }
    Ok(Experiment {
        beta: report.beta.clone(),
        gamma_star: report.gamma_star,
        designated_state,
        rows,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distracting::generate_two_state;
    use crate::mdp::{MdpBuilder, DEFAULT_POLICY_CAP};

    fn config(gamma: f64, seed: u64) -> LearnerConfig {
        LearnerConfig {
            gamma,
            epsilon: 0.05,
            delta: 0.1,
            m: 200,
            seed,
            stream: 0,
            max_steps: 10_000_000,
        }
    }

    fn single_loop() -> Mdp {
        MdpBuilder::new(&["x"], &["stay"], 1.0)
            .transition(0, 0, &[(0, 1.0, 0.5)])
            .build()
            .unwrap()
    }

    #[test]
    fn default_m_formula() {
        let m = default_m(2, 2, 0.9, 0.05, 0.1).unwrap();
        let expected = ((120.0f64).ln() / (2.0 * 0.0025 * 0.01)).ceil() as usize;
        assert_eq!(m, expected);
        assert!(default_m(2, 2, 1.0, 0.05, 0.1).is_err());
        let mdp = single_loop();
        assert_eq!(LearnerConfig::new(&mdp, 0.5, 0.1, 0.1, 1, 10).unwrap().m, default_m(1, 1, 0.5, 0.1, 0.1).unwrap());
        assert!(config(0.5, 0).with_m(0).validate().is_err());
    }

    #[test]
    fn single_action_converges_near_fixed_point() {
        let mdp = single_loop();
        let c = config(0.9, 3);
        let t = run_delayed_q(&mdp, &c).unwrap();
        assert_eq!(t.termination, Termination::Converged { state: 0 });
        assert_eq!(t.terminated_by, "converged_at_x");
        assert_eq!(t.greedy_policy, Policy::new(vec![0]));
        let q = t.q_final[0][0].unwrap();
        let exact = 0.5 / (1.0 - 0.9);
        assert!(q >= exact && q - exact <= 3.0 * c.epsilon / (1.0 - 0.9), "{q}");
    }

    #[test]
    fn updates_never_increase_and_stay_in_range() {
        let mdp = generate_two_state(0.2, 0.1, 1.0).unwrap();
        for gamma in [0.3, 0.45] {
            let t = run_delayed_q(&mdp, &config(gamma, 11)).unwrap();
            let hi = 1.0 / (1.0 - gamma);
            for u in &t.updates {
                assert!(u.after < u.before && u.after >= 0.0 && u.before <= hi);
            }
            for row in &t.q_final {
                for q in row.iter().flatten() {
                    assert!((0.0..=hi).contains(q));
                }
            }
            let total: u64 = t.visit_counts.iter().flatten().sum();
            assert_eq!(total, t.steps_taken);
        }
    }

    #[test]
    fn termination_state_self_loops() {
        let mdp = generate_two_state(0.2, 0.1, 1.0).unwrap();
        for seed in 0..4 {
            let t = run_delayed_q(&mdp, &config(0.4, seed)).unwrap();
            if let Termination::Converged { state } = t.termination {
                let a = t.greedy_policy.action(state);
                assert!(mdp.outcomes(state, a).unwrap().iter().all(|o| o.next == state));
            }
        }
    }

    #[test]
    fn budget_stops_the_run() {
        let mdp = generate_two_state(0.2, 0.1, 1.0).unwrap();
        let mut c = config(0.4, 1);
        c.max_steps = 50;
        let t = run_delayed_q(&mdp, &c).unwrap();
        assert_eq!(t.termination, Termination::StepBudget);
        assert_eq!(t.steps_taken, 50);
        assert!(t.empirical_policy_gap_at.is_none());
    }

    #[test]
    fn runs_are_reproducible() {
        let mdp = generate_two_state(0.2, 0.1, 1.0).unwrap();
        let a = run_delayed_q(&mdp, &config(0.35, 9)).unwrap();
        let b = run_delayed_q(&mdp, &config(0.35, 9)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let mut other = config(0.35, 9);
        other.stream = 1;
        assert_ne!(run_delayed_q(&mdp, &other).unwrap().steps_taken, 0);
    }

    #[test]
    fn experiment_shapes() {
        let mdp = generate_two_state(0.2, 0.1, 1.0).unwrap();
        let configs = [config(0.3, 1), config(0.45, 1)];
        let e = experiment(&mdp, &configs, 0, Some(0), DEFAULT_POLICY_CAP).unwrap();
        assert!(e.rows.is_empty() && e.runs.is_empty());
        let e = experiment(&mdp, &configs, 5, Some(0), DEFAULT_POLICY_CAP).unwrap();
        assert_eq!(e.rows.len(), 2);
        assert_eq!(e.runs.len(), 10);
        assert!(e.rows.iter().all(|r| r.exact_policy_gap.is_some()));

        let single = single_loop();
        let e = experiment(&single, &[config(0.3, 1), config(0.9, 2)], 3, None, DEFAULT_POLICY_CAP).unwrap();
        assert!(e.rows.iter().all(|r| r.blackwell_fraction == 1.0 && r.gain_optimal_fraction == 1.0));
    }
}
