//! Exact policy evaluation: discounted values, Q-values, discounted optimal
//! policies and average-reward gain/bias.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chain::{decompose, deviation_matrix, limiting_matrix};
use crate::error::{Error, Result};
use crate::mdp::{induce_chain, InducedChain, Mdp, Policy};

/// Discounted values of one policy at one evaluation discount.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueVector {
    pub gamma: f64,
    pub values: Vec<f64>,
}

impl ValueVector {
    pub fn get(&self, state: usize) -> f64 {
        self.values[state]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Expectation under a state distribution.
    pub fn expect(&self, weights: &[f64]) -> f64 {
        self.values.iter().zip(weights).map(|(v, w)| v * w).sum()
    }
}

pub fn check_discount(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::DiscountRange(gamma))
    }
}

/// Solves `(I − γ P) v = r` for an already-induced chain.
pub fn evaluate_chain(chain: &InducedChain, gamma: f64) -> Result<DVector<f64>> {
    check_discount(gamma)?;
    let n = chain.reward.len();
    let a = DMatrix::<f64>::identity(n, n) - &chain.transition * gamma;
    crate::linalg::solve(&a, &chain.reward, "policy evaluation")
}

pub fn evaluate(mdp: &Mdp, policy: &Policy, gamma: f64) -> Result<ValueVector> {
    check_discount(gamma)?;
    let chain = induce_chain(mdp, policy)?;
    let v = evaluate_chain(&chain, gamma)?;
    Ok(ValueVector {
        gamma,
        values: v.iter().copied().collect(),
    })
}

/// Iterative policy evaluation, kept as an independent cross-check of
/// [`evaluate`]. Stops once successive sweeps differ by less than `tol`.
pub fn evaluate_iteratively(mdp: &Mdp, policy: &Policy, gamma: f64, tol: f64) -> Result<ValueVector> {
    check_discount(gamma)?;
    mdp.check_policy(policy)?;
    let n = mdp.num_states();
    let mut v = vec![0.0; n];
    loop {
        let mut delta = 0.0f64;
        let next: Vec<f64> = (0..n)
            .map(|s| {
                mdp.outcomes(s, policy.action(s))
                    .unwrap()
                    .iter()
                    .map(|o| o.prob * (o.reward + gamma * v[o.next]))
                    .sum()
            })
            .collect();
        for (a, b) in next.iter().zip(&v) {
            delta = delta.max((a - b).abs());
        }
        v = next;
        // residual bound: |v - v*| <= γ δ / (1 - γ)
        if delta * gamma / (1.0 - gamma) < tol || delta == 0.0 {
            break;
        }
    }
    Ok(ValueVector { gamma, values: v })
}

/// Q-values; `None` where the action is unavailable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QTable {
    pub gamma: f64,
    pub values: Vec<Vec<Option<f64>>>,
}

impl QTable {
    pub fn get(&self, state: usize, action: usize) -> Option<f64> {
        self.values[state][action]
    }

    /// Defined `(action, q)` pairs at a state.
    pub fn row(&self, state: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values[state]
            .iter()
            .enumerate()
            .filter_map(|(a, q)| q.map(|q| (a, q)))
    }

    /// `max_a Q − min_a Q` at a state.
    pub fn spread(&self, state: usize) -> f64 {
        let (lo, hi) = self
            .row(state)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, q)| (lo.min(q), hi.max(q)));
        hi - lo
    }
}

/// One-step lookahead `Q(s,a) = Σ p (r + γ v(s'))` against arbitrary values.
pub fn lookahead(mdp: &Mdp, values: &[f64], gamma: f64) -> QTable {
    let values = (0..mdp.num_states())
        .map(|s| {
            (0..mdp.num_actions())
                .map(|a| {
                    mdp.outcomes(s, a).map(|os| {
                        os.iter()
                            .map(|o| o.prob * (o.reward + gamma * values[o.next]))
                            .sum()
                    })
                })
                .collect()
        })
        .collect();
    QTable { gamma, values }
}

pub fn q_values(mdp: &Mdp, policy: &Policy, gamma: f64) -> Result<QTable> {
    let v = evaluate(mdp, policy, gamma)?;
    Ok(lookahead(mdp, &v.values, gamma))
}

fn tie_tolerance(values: &[f64]) -> f64 {
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    1e-12 * scale
}

/// Greedy policy with respect to a Q-table; ties within `tol` go to the
/// lowest action index.
pub(crate) fn greedy(q: &QTable, tol: f64) -> Policy {
    Policy::new(
        (0..q.values.len())
            .map(|s| {
                let best = q.row(s).map(|(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
                q.row(s).find(|&(_, v)| v >= best - tol).map(|(a, _)| a).unwrap()
            })
            .collect(),
    )
}

/// Optimal policy for a fixed discount via exact policy iteration.
pub fn optimal_policy(mdp: &Mdp, gamma: f64) -> Result<(Policy, ValueVector)> {
    check_discount(gamma)?;
    let mut policy = Policy::new(
        (0..mdp.num_states())
            .map(|s| mdp.available_actions(s).next().unwrap())
            .collect(),
    );
    let mut value = evaluate(mdp, &policy, gamma)?;
    loop {
        let q = lookahead(mdp, &value.values, gamma);
        let tol = tie_tolerance(&value.values);
        let mut changed = false;
        let mut next = policy.clone();
        for s in 0..mdp.num_states() {
            let current = q.get(s, policy.action(s)).unwrap();
            let (best_a, best_q) = q
                .row(s)
                .fold((usize::MAX, f64::NEG_INFINITY), |acc, (a, v)| if v > acc.1 { (a, v) } else { acc });
            if best_q > current + tol {
                next = next.with_action(s, best_a);
                changed = true;
            }
        }
        if !changed {
            break;
        }
        policy = next;
        value = evaluate(mdp, &policy, gamma)?;
    }
    // canonical tie-break among optimal actions
    let q = lookahead(mdp, &value.values, gamma);
    let canonical = greedy(&q, tie_tolerance(&value.values));
    if canonical != policy {
        policy = canonical;
        value = evaluate(mdp, &policy, gamma)?;
    }
    Ok((policy, value))
}

/// Average-reward quantities of a policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainBias {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
    pub recurrent_classes: Vec<Vec<usize>>,
    /// More than one recurrent class: the gain need not be constant.
    pub multichain: bool,
}

pub fn gain_bias(mdp: &Mdp, policy: &Policy) -> Result<GainBias> {
    let chain = induce_chain(mdp, policy)?;
    gain_bias_of_chain(&chain)
}

pub fn gain_bias_of_chain(chain: &InducedChain) -> Result<GainBias> {
    let structure = decompose(&chain.transition);
    let p_star = limiting_matrix(&chain.transition, &structure)?;
    let h = deviation_matrix(&chain.transition, &p_star)?;
    let gain = &p_star * &chain.reward;
    let bias = &h * &chain.reward;
    Ok(GainBias {
        gain: gain.iter().copied().collect(),
        bias: bias.iter().copied().collect(),
        multichain: structure.recurrent_classes.len() > 1,
        recurrent_classes: structure.recurrent_classes,
    })
}


/// Coefficients `y_{-1}, y_0, …, y_{order}` of the Laurent expansion of the
/// discounted value around `γ = 1`, in powers of `ρ = (1 − γ)/γ`:
/// `V_γ = (1 + ρ) (y_{-1}/ρ + Σ_n ρ^n y_n)` with `y_{-1} = P* r` and
/// `y_n = (−1)^n H^{n+1} r`.
pub fn laurent_coefficients(mdp: &Mdp, policy: &Policy, order: usize) -> Result<Vec<Vec<f64>>> {
    let chain = induce_chain(mdp, policy)?;
    let structure = decompose(&chain.transition);
    let p_star = limiting_matrix(&chain.transition, &structure)?;
    let h = deviation_matrix(&chain.transition, &p_star)?;
    let mut out = vec![(&p_star * &chain.reward).iter().copied().collect()];
    let mut term = chain.reward.clone();
    for n in 0..=order {
        term = &h * term;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        out.push(term.iter().map(|v| sign * v).collect());
    }
    Ok(out)
}
