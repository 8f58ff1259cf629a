//! Blackwell regret, standard regret, action gaps, policy gaps and pivot
//! states.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::blackwell::{find_blackwell, BlackwellReport, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::mdp::{enumerate_policies, induce_chain, InducedChain, Mdp, Policy};
use crate::solver::{check_discount, evaluate, evaluate_chain, optimal_policy, q_values};

/// Agreement threshold for the regret identity below the threshold.
pub const LEMMA_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretReport {
    pub gamma_learn: f64,
    pub gamma_star: f64,
    /// `max(gamma_star, gamma_learn)`: both policies are evaluated here.
    pub gamma_prime: f64,
    pub blackwell_regret: f64,
    pub standard_regret_at_gamma_prime: f64,
}

/// Initial-distribution expectation of `V^β_{γ'} − V^π_{γ'}`.
pub fn blackwell_regret(mdp: &Mdp, policy: &Policy, gamma_learn: f64, cap: u128) -> Result<RegretReport> {
    check_discount(gamma_learn)?;
    let report = find_blackwell(mdp, DEFAULT_TOLERANCE, cap)?;
    blackwell_regret_with(mdp, &report, policy, gamma_learn)
}

/// [`blackwell_regret`] against an already computed Blackwell report.
pub fn blackwell_regret_with(
    mdp: &Mdp,
    report: &BlackwellReport,
    policy: &Policy,
    gamma_learn: f64,
) -> Result<RegretReport> {
    check_discount(gamma_learn)?;
    mdp.check_policy(policy)?;
    let gamma_prime = report.gamma_star.max(gamma_learn);
    let vb = evaluate(mdp, &report.beta, gamma_prime)?;
    let vp = evaluate(mdp, policy, gamma_prime)?;
    let init = mdp.initial();
    Ok(RegretReport {
        gamma_learn,
        gamma_star: report.gamma_star,
        gamma_prime,
        blackwell_regret: vb.expect(init) - vp.expect(init),
        standard_regret_at_gamma_prime: standard_regret(mdp, policy, gamma_prime)?,
    })
}

/// Initial-distribution expectation of `V*_γ − V^π_γ`.
pub fn standard_regret(mdp: &Mdp, policy: &Policy, gamma: f64) -> Result<f64> {
    check_discount(gamma)?;
    let (_, best) = optimal_policy(mdp, gamma)?;
    let vp = evaluate(mdp, policy, gamma)?;
    let init = mdp.initial();
    Ok(best.expect(init) - vp.expect(init))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub blackwell_regret: f64,
    pub regret_at_gamma_star: f64,
    pub agree: bool,
}

/// For `gamma_learn < γ*`, the Blackwell regret equals the ordinary regret
/// evaluated at `γ*`.
pub fn lemma1_check(mdp: &Mdp, policy: &Policy, gamma_learn: f64, cap: u128) -> Result<LemmaCheck> {
    let report = find_blackwell(mdp, DEFAULT_TOLERANCE, cap)?;
    lemma1_check_with(mdp, &report, policy, gamma_learn)
}

pub fn lemma1_check_with(
    mdp: &Mdp,
    report: &BlackwellReport,
    policy: &Policy,
    gamma_learn: f64,
) -> Result<LemmaCheck> {
    check_discount(gamma_learn)?;
    if gamma_learn >= report.gamma_star {
        return Err(Error::Hypothesis(format!(
            "gamma_learn = {gamma_learn} is not below gamma* = {}",
            report.gamma_star
        )));
    }
    let r_b = blackwell_regret_with(mdp, report, policy, gamma_learn)?.blackwell_regret;
    let r_star = standard_regret(mdp, policy, report.gamma_star)?;
    Ok(LemmaCheck {
        blackwell_regret: r_b,
        regret_at_gamma_star: r_star,
        agree: (r_b - r_star).abs() <= LEMMA_TOLERANCE,
    })
}

fn require_choice(mdp: &Mdp, state: usize) -> Result<()> {
    if mdp.available_actions(state).count() < 2 {
        return Err(Error::SingleAction(mdp.states()[state].clone()));
    }
    Ok(())
}

/// `V*(s) − max_{a ≠ π*(s)} Q*(s, a)` for the optimal policy at `gamma`.
pub fn action_gap(mdp: &Mdp, gamma: f64, state: usize) -> Result<f64> {
    check_discount(gamma)?;
    require_choice(mdp, state)?;
    let (policy, value) = optimal_policy(mdp, gamma)?;
    let q = q_values(mdp, &policy, gamma)?;
    let best_other = q
        .row(state)
        .filter(|&(a, _)| a != policy.action(state))
        .map(|(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(value.get(state) - best_other)
}

/// `max_s (max_a Q^π(s,a) − min_a Q^π(s,a))`.
pub fn max_action_gap(mdp: &Mdp, policy: &Policy, gamma: f64) -> Result<f64> {
    let q = q_values(mdp, policy, gamma)?;
    Ok((0..mdp.num_states()).map(|s| q.spread(s)).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyGap {
    pub state: usize,
    pub gamma: f64,
    pub value: f64,
    /// Minimizing policy; it differs from the query policy at `state`.
    pub witness: Policy,
}

/// All policies of an MDP with their induced chains, enumerated once.
struct PolicyTable {
    policies: Vec<Policy>,
    chains: Vec<InducedChain>,
}

impl PolicyTable {
    fn new(mdp: &Mdp, cap: u128) -> Result<Self> {
        let policies: Vec<Policy> = enumerate_policies(mdp, cap)?.collect();
        let chains = policies
            .iter()
            .map(|p| induce_chain(mdp, p))
            .collect::<Result<_>>()?;
        Ok(PolicyTable { policies, chains })
    }

    fn values(&self, gamma: f64) -> Result<Vec<DVector<f64>>> {
        self.chains.par_iter().map(|c| evaluate_chain(c, gamma)).collect()
    }

    fn index_of(&self, policy: &Policy) -> usize {
        self.policies.iter().position(|p| p == policy).expect("policy is enumerated")
    }

    /// Minimum `|V^base(s) − V^π'(s)|` over `π'(s) ≠ base(s)`; first
    /// minimizer in enumeration order.
    fn gap(&self, values: &[DVector<f64>], base: usize, state: usize, gamma: f64) -> Option<PolicyGap> {
        let a = self.policies[base].action(state);
        let vb = values[base][state];
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in self.policies.iter().enumerate() {
            if p.action(state) == a {
                continue;
            }
            let d = (vb - values[i][state]).abs();
            if best.map_or(true, |(_, b)| d < b) {
                best = Some((i, d));
            }
        }
        best.map(|(i, d)| PolicyGap {
            state,
            gamma,
            value: d,
            witness: self.policies[i].clone(),
        })
    }
}

pub fn policy_gap(mdp: &Mdp, policy: &Policy, gamma: f64, state: usize, cap: u128) -> Result<PolicyGap> {
    check_discount(gamma)?;
    mdp.check_policy(policy)?;
    require_choice(mdp, state)?;
    let table = PolicyTable::new(mdp, cap)?;
    let values = table.values(gamma)?;
    Ok(table
        .gap(&values, table.index_of(policy), state, gamma)
        .expect("a second action exists"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub state: usize,
    pub gamma: f64,
    /// Action gap of the discounted optimal policy at this state.
    pub action_gap: f64,
    pub policy_gap: f64,
    pub witness_policy: Policy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapScan {
    pub gamma: f64,
    pub states: Vec<GapReport>,
    /// Maximal action gap of the query policy.
    pub mag: f64,
}

/// Action and policy gaps at every state that has a choice.
pub fn gap_scan(mdp: &Mdp, policy: &Policy, gamma: f64, cap: u128) -> Result<GapScan> {
    check_discount(gamma)?;
    mdp.check_policy(policy)?;
    let table = PolicyTable::new(mdp, cap)?;
    let values = table.values(gamma)?;
    let base = table.index_of(policy);
    let mut states = Vec::new();
    for s in 0..mdp.num_states() {
        if mdp.available_actions(s).count() < 2 {
            continue;
        }
        let pg = table.gap(&values, base, s, gamma).unwrap();
        states.push(GapReport {
            state: s,
            gamma,
            action_gap: action_gap(mdp, gamma, s)?,
            policy_gap: pg.value,
            witness_policy: pg.witness,
        });
    }
    Ok(GapScan {
        gamma,
        states,
        mag: max_action_gap(mdp, policy, gamma)?,
    })
}

/// One row of the pivot-state inequality chain
/// `V^β_γ(s̃) < V^π̃_γ(s̃) < V^π̃_{γ*}(s̃) ≤ V^β_{γ*}(s̃)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainCheck {
    pub gamma: f64,
    /// Closest policy that differs from β at the pivot and beats it there
    /// at `gamma`.
    pub witness: Option<Policy>,
    pub beta_below_witness: bool,
    pub witness_grows: bool,
    pub witness_bounded_by_beta: bool,
    /// `V^β_{γ*}(s̃) − V^β_γ(s̃)`, which bounds the policy gap.
    pub gap_bound: f64,
}

impl ChainCheck {
    pub fn holds(&self) -> bool {
        self.witness.is_some() && self.beta_below_witness && self.witness_grows && self.witness_bounded_by_beta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PivotRow {
    pub gamma: f64,
    /// Policy gap of β per state; `None` at single-action states.
    pub gaps: Vec<Option<PolicyGap>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PivotScan {
    pub gamma_star: f64,
    pub beta: Policy,
    /// True when `γ* = 0`: there is no myopic discount to scan.
    pub vacuous: bool,
    pub rows: Vec<PivotRow>,
    /// States minimizing the policy gap at the discount closest to `γ*`.
    pub pivots: Vec<usize>,
    pub chain: Vec<ChainCheck>,
}

impl PivotScan {
    pub fn pivot(&self) -> Option<usize> {
        self.pivots.first().copied()
    }

    /// Policy gap at the pivot, one entry per scanned discount.
    pub fn pivot_gaps(&self) -> Vec<f64> {
        match self.pivot() {
            Some(p) => self
                .rows
                .iter()
                .map(|r| r.gaps[p].as_ref().map_or(f64::NAN, |g| g.value))
                .collect(),
            None => Vec::new(),
        }
    }
}

/// Default scan: `γ* − 10^-k` for `k = 1..8`, skipping negative values.
pub fn default_pivot_grid(gamma_star: f64) -> Vec<f64> {
    (1..=8)
        .map(|k| gamma_star - 10f64.powi(-k))
        .filter(|&g| g >= 0.0)
        .collect()
}

pub fn pivot_scan(mdp: &Mdp, gammas: Option<&[f64]>, cap: u128) -> Result<PivotScan> {
    let report = find_blackwell(mdp, DEFAULT_TOLERANCE, cap)?;
    pivot_scan_with(mdp, &report, gammas, cap)
}

pub fn pivot_scan_with(mdp: &Mdp, report: &BlackwellReport, gammas: Option<&[f64]>, cap: u128) -> Result<PivotScan> {
    let gamma_star = report.gamma_star;
    if gamma_star <= 0.0 {
        return Ok(PivotScan {
            gamma_star,
            beta: report.beta.clone(),
            vacuous: true,
            rows: Vec::new(),
            pivots: Vec::new(),
            chain: Vec::new(),
        });
    }
    let grid = match gammas {
        Some(g) => g.to_vec(),
        None => default_pivot_grid(gamma_star),
    };
    for &g in &grid {
        if !(0.0..gamma_star).contains(&g) {
            return Err(Error::Parameter(format!("scan discount {g} outside [0, gamma* = {gamma_star})")));
        }
    }
    let table = PolicyTable::new(mdp, cap)?;
    let base = table.index_of(&report.beta);
    let mut rows = Vec::with_capacity(grid.len());
    let mut all_values = Vec::with_capacity(grid.len());
    for &g in &grid {
        let values = table.values(g)?;
        let gaps = (0..mdp.num_states())
            .map(|s| table.gap(&values, base, s, g))
            .collect();
        rows.push(PivotRow { gamma: g, gaps });
        all_values.push(values);
    }

    let mut pivots = Vec::new();
    if let Some(last) = (0..grid.len()).max_by(|&a, &b| grid[a].total_cmp(&grid[b])) {
        let gaps = &rows[last].gaps;
        let best = gaps.iter().flatten().map(|g| g.value).fold(f64::INFINITY, f64::min);
        let tol = 1e-12 * best.abs().max(1e-300);
        pivots = gaps
            .iter()
            .enumerate()
            .filter_map(|(s, g)| g.as_ref().filter(|g| g.value <= best + tol).map(|_| s))
            .collect();
    }

    let mut chain = Vec::new();
    if let Some(&pivot) = pivots.first() {
        let at_star = table.values(gamma_star)?;
        let beta_star = at_star[base][pivot];
        let tol = 1e-9 * at_star[base].amax().max(1.0);
        for (k, &g) in grid.iter().enumerate() {
            let values = &all_values[k];
            let beta_now = values[base][pivot];
            let beta_action = report.beta.action(pivot);
            let witness = table
                .policies
                .iter()
                .enumerate()
                .filter(|(i, p)| p.action(pivot) != beta_action && values[*i][pivot] > beta_now)
                .min_by(|(i, _), (j, _)| values[*i][pivot].total_cmp(&values[*j][pivot]))
                .map(|(i, _)| i);
            chain.push(match witness {
                Some(i) => ChainCheck {
                    gamma: g,
                    witness: Some(table.policies[i].clone()),
                    beta_below_witness: beta_now < values[i][pivot],
                    witness_grows: values[i][pivot] < at_star[i][pivot],
                    witness_bounded_by_beta: at_star[i][pivot] <= beta_star + tol,
                    gap_bound: beta_star - beta_now,
                },
                None => ChainCheck {
                    gamma: g,
                    witness: None,
                    beta_below_witness: false,
                    witness_grows: false,
                    witness_bounded_by_beta: false,
                    gap_bound: beta_star - beta_now,
                },
            });
        }
    }

    Ok(PivotScan {
        gamma_star,
        beta: report.beta.clone(),
        vacuous: false,
        rows,
        pivots,
        chain,
    })
}
