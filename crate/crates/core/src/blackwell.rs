//! Blackwell optimal policy, Blackwell threshold `γ*`, myopic/realizable
//! classification of discounts, and n-discount comparisons.
//!
//! `γ*` is located numerically: for every competitor policy and state, the
//! value difference `f(γ) = V^β_γ(s) − V^π_γ(s)` is scanned on a uniform grid
//! (plus a few points close to 1) and the largest sign change is refined by
//! bisection.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{enumerate_policies, induce_chain, InducedChain, Mdp, Policy};
use crate::solver::{check_discount, evaluate_chain, gain_bias, laurent_coefficients, optimal_policy, GainBias};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
/// Discount at which the Blackwell optimal policy is identified.
pub const PROBE: f64 = 1.0 - 1e-6;
/// Finer probe used once when the first probe turns out not to be stationary.
pub const REFINED_PROBE: f64 = 1.0 - 1e-9;
/// Step of the sign-change scan over `[0, 1)`.
pub const SCAN_STEP: f64 = 1.0 / 4096.0;

/// Relative threshold below which a value difference is treated as zero.
const VALUE_EPS: f64 = 1e-10;

/// Relative solve error per unit of `1/(1−γ)`, the conditioning of `I − γP`.
const SOLVE_NOISE: f64 = 1e-14;

fn relative_tol(gamma: f64) -> f64 {
    VALUE_EPS.max(SOLVE_NOISE / (1.0 - gamma))
}

fn scale_tol(values: &DVector<f64>, gamma: f64) -> f64 {
    relative_tol(gamma) * values.amax().max(1.0)
}

/// A competitor policy that beats β at some state for some discount below
/// the threshold, or one that is tied with β near `γ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossover {
    pub competitor: Policy,
    pub state: usize,
    /// Largest discount where `V^β(s) − V^π(s)` changes sign; `None` for a
    /// tied competitor.
    pub gamma: Option<f64>,
    /// `|V^β(s) − V^π(s)|` at the reported crossing (zero when tied).
    pub gap: f64,
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlackwellReport {
    pub beta: Policy,
    pub gamma_star: f64,
    pub crossovers: Vec<Crossover>,
    /// Points of `{1 − 10^-k : k = 1..6}` at or above `gamma_star` where β
    /// was checked to be optimal.
    pub certified_grid: Vec<f64>,
    pub probe: f64,
    /// Accuracy claimed for `gamma_star`. Discounts less than this below
    /// the threshold classify as realizable.
    pub tolerance: f64,
    pub warnings: Vec<String>,
}

impl BlackwellReport {
    /// Competitors that are Blackwell optimal as well.
    pub fn tied(&self) -> impl Iterator<Item = &Policy> {
        self.crossovers.iter().filter(|c| c.tied).map(|c| &c.competitor)
    }

    pub fn classify(&self, gamma: f64) -> Result<DiscountClassification> {
        check_discount(gamma)?;
        Ok(DiscountClassification {
            gamma,
            verdict: if gamma < self.gamma_star - self.tolerance {
                Verdict::Myopic
            } else {
                Verdict::BlackwellRealizable
            },
            gamma_star: self.gamma_star,
        })
    }
}

/// Values of every policy in `policies` at one discount.
fn values_at(chains: &[InducedChain], gamma: f64) -> Result<Vec<DVector<f64>>> {
    chains.iter().map(|c| evaluate_chain(c, gamma)).collect()
}

/// Indices of the policies that are optimal (within tolerance) at `gamma`.
fn optimal_indices(values: &[DVector<f64>], gamma: f64) -> Vec<usize> {
    let n = values[0].len();
    let best: Vec<f64> = (0..n)
        .map(|s| values.iter().map(|v| v[s]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let tol = relative_tol(gamma) * best.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| (0..n).all(|s| v[s] >= best[s] - tol))
        .map(|(i, _)| i)
        .collect()
}

/// Compares Laurent coefficient sequences state-wise; `Some(true)` when
/// `a` is at least as good as `b` everywhere.
fn laurent_dominates(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    let n = a[0].len();
    (0..n).all(|s| {
        for (ya, yb) in a.iter().zip(b) {
            let tol = 1e-9 * ya[s].abs().max(yb[s].abs()).max(1.0);
            if ya[s] > yb[s] + tol {
                return true;
            }
            if ya[s] < yb[s] - tol {
                return false;
            }
        }
        true
    })
}

/// Picks β among policies optimal at `probe`. Near-ties at the probe are
/// resolved by the Laurent expansion; exact ties by enumeration order.
fn select_beta(mdp: &Mdp, policies: &[Policy], chains: &[InducedChain], probe: f64) -> Result<usize> {
    let values = values_at(chains, probe)?;
    let candidates = optimal_indices(&values, probe);
    if candidates.len() == 1 {
        return Ok(candidates[0]);
    }
    let order = mdp.num_states();
    let series: Vec<Vec<Vec<f64>>> = candidates
        .iter()
        .map(|&i| laurent_coefficients(mdp, &policies[i], order))
        .collect::<Result<_>>()?;
    for (k, &i) in candidates.iter().enumerate() {
        if series.iter().all(|other| laurent_dominates(&series[k], other)) {
            return Ok(i);
        }
    }
    Ok(candidates[0])
}

/// Whether the policy at `index` is optimal at `gamma` against all others.
fn is_optimal_at(chains: &[InducedChain], index: usize, gamma: f64) -> Result<bool> {
    let values = values_at(chains, gamma)?;
    Ok(optimal_indices(&values, gamma).contains(&index))
}

fn scan_grid() -> Vec<f64> {
    let steps = (1.0 / SCAN_STEP) as usize;
    let mut grid: Vec<f64> = (0..steps).map(|k| k as f64 * SCAN_STEP).collect();
    grid.extend([1.0 - 1e-4, 1.0 - 1e-5, PROBE]);
    grid
}

/// Largest sign change of `V^β(s) − V^π(s)` per state, bisected until the
/// bracket stops shrinking in floating point.
fn crossings(
    beta: &InducedChain,
    beta_grid: &[DVector<f64>],
    competitor: &InducedChain,
    grid: &[f64],
) -> Result<Vec<Option<(f64, f64)>>> {
    let n = beta.reward.len();
    let mut found: Vec<Option<(f64, f64)>> = vec![None; n];
    let mut pending = n;
    for k in (0..grid.len()).rev() {
        let vb = &beta_grid[k];
        let vc = evaluate_chain(competitor, grid[k])?;
        let thr = scale_tol(vb, grid[k]);
        for s in 0..n {
            if found[s].is_some() || vb[s] - vc[s] >= -thr {
                continue;
            }
            // f < 0 at grid[k]; f >= 0 at the next grid point up
            let mut lo = grid[k];
            let mut hi = if k + 1 < grid.len() { grid[k + 1] } else { PROBE };
            loop {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fb = evaluate_chain(beta, mid)?;
                let fc = evaluate_chain(competitor, mid)?;
                if fb[s] - fc[s] < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            let gap = (evaluate_chain(beta, root)?[s] - evaluate_chain(competitor, root)?[s]).abs();
            found[s] = Some((root, gap));
            pending -= 1;
        }
        if pending == 0 {
            break;
        }
    }
    Ok(found)
}

/// Finds the Blackwell optimal policy and threshold by exhaustive policy
/// enumeration (bounded by `cap`).
pub fn find_blackwell(mdp: &Mdp, tolerance: f64, cap: u128) -> Result<BlackwellReport> {
    if !(tolerance > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tolerance}")));
    }
    let policies: Vec<Policy> = enumerate_policies(mdp, cap)?.collect();
    let chains: Vec<InducedChain> = policies
        .iter()
        .map(|p| induce_chain(mdp, p))
        .collect::<Result<_>>()?;
    let mut warnings = Vec::new();
    let mut probe = PROBE;
    let mut beta = select_beta(mdp, &policies, &chains, probe)?;
    if !is_optimal_at(&chains, beta, REFINED_PROBE)? {
        warnings.push(format!(
            "policy selected at probe {PROBE} is not optimal at {REFINED_PROBE}; probe refined"
        ));
        probe = REFINED_PROBE;
        beta = select_beta(mdp, &policies, &chains, probe)?;
    }

    let grid = scan_grid();
    let beta_chain = &chains[beta];
    let beta_grid: Vec<DVector<f64>> = grid
        .iter()
        .map(|&g| evaluate_chain(beta_chain, g))
        .collect::<Result<_>>()?;
    let probe_values = evaluate_chain(beta_chain, probe)?;

    let per_competitor: Vec<Result<Vec<Crossover>>> = (0..policies.len())
        .into_par_iter()
        .filter(|&i| i != beta)
        .map(|i| {
            let mut out = Vec::new();
            let at_probe = evaluate_chain(&chains[i], probe)?;
            let thr = scale_tol(&probe_values, probe);
            if (0..at_probe.len()).all(|s| (probe_values[s] - at_probe[s]).abs() <= thr) {
                out.push(Crossover {
                    competitor: policies[i].clone(),
                    state: 0,
                    gamma: None,
                    gap: 0.0,
                    tied: true,
                });
            }
            for (s, hit) in crossings(beta_chain, &beta_grid, &chains[i], &grid)?
                .into_iter()
                .enumerate()
            {
                if let Some((gamma, gap)) = hit {
                    out.push(Crossover {
                        competitor: policies[i].clone(),
                        state: s,
                        gamma: Some(gamma),
                        gap,
                        tied: false,
                    });
                }
            }
            Ok(out)
        })
        .collect();
    let mut crossovers = Vec::new();
    for c in per_competitor {
        crossovers.extend(c?);
    }
    let gamma_star = crossovers
        .iter()
        .filter_map(|c| c.gamma)
        .fold(0.0f64, f64::max);

    let mut certified_grid = Vec::new();
    for k in 1..=6 {
        let g = 1.0 - 10f64.powi(-k);
        if g < gamma_star {
            continue;
        }
        if !is_optimal_at(&chains, beta, g)? {
            return Err(Error::ProbeNonStationary(format!(
                "policy {} is not optimal at certified discount {g} >= gamma* = {gamma_star}",
                policies[beta]
            )));
        }
        certified_grid.push(g);
    }

    let mut report = BlackwellReport {
        beta: policies[beta].clone(),
        gamma_star,
        crossovers,
        certified_grid,
        probe,
        tolerance,
        warnings,
    };
    let extra = crate::distracting::annotate(mdp, &report).warnings;
    report.warnings.extend(extra);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Myopic,
    BlackwellRealizable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscountClassification {
    pub gamma: f64,
    pub verdict: Verdict,
    pub gamma_star: f64,
}

pub fn classify_discount(mdp: &Mdp, gamma: f64, cap: u128) -> Result<DiscountClassification> {
    check_discount(gamma)?;
    find_blackwell(mdp, DEFAULT_TOLERANCE, cap)?.classify(gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    Pi1Better,
    Pi2Better,
    TiedAtOrderN,
    /// Each policy is strictly better at some state.
    Incomparable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NDiscountComparison {
    pub order: i32,
    pub ordering: Ordering,
    /// Orders `n >= 1` are decided numerically rather than exactly.
    pub numeric: bool,
    pub warnings: Vec<String>,
}

fn sign_with_tol(d: f64, scale: f64) -> i8 {
    let tol = 1e-9 * scale.max(1.0);
    if d > tol {
        1
    } else if d < -tol {
        -1
    } else {
        0
    }
}

fn per_state_order_0(a: &GainBias, b: &GainBias, n: i32) -> Vec<i8> {
    (0..a.gain.len())
        .map(|s| {
            let g = sign_with_tol(a.gain[s] - b.gain[s], a.gain[s].abs().max(b.gain[s].abs()));
            if g != 0 || n < 0 {
                g
            } else {
                sign_with_tol(a.bias[s] - b.bias[s], a.bias[s].abs().max(b.bias[s].abs()))
            }
        })
        .collect()
}

/// Compares two policies in the n-discount hierarchy. Orders −1 (gain) and
/// 0 (gain, then bias) are exact; higher orders fall back to the sign of
/// `(1−γ)^{-n} (V1 − V2)` on `γ = 1 − 10^-k, k = 3..8`, used only where the
/// order-0 comparison is a tie.
pub fn compare_n_discount(mdp: &Mdp, pi1: &Policy, pi2: &Policy, n: i32) -> Result<NDiscountComparison> {
    if n < -1 {
        return Err(Error::Parameter(format!("order must be >= -1, got {n}")));
    }
    let g1 = gain_bias(mdp, pi1)?;
    let g2 = gain_bias(mdp, pi2)?;
    let mut signs = per_state_order_0(&g1, &g2, n);
    let mut warnings = Vec::new();
    let numeric = n >= 1;
    if numeric {
        let c1 = induce_chain(mdp, pi1)?;
        let c2 = induce_chain(mdp, pi2)?;
        let mut samples: Vec<Vec<i8>> = Vec::new();
        for k in 3..=8 {
            let gamma = 1.0 - 10f64.powi(-k);
            let v1 = evaluate_chain(&c1, gamma)?;
            let v2 = evaluate_chain(&c2, gamma)?;
            let scale = v1.amax().max(v2.amax()).max(1.0);
            let factor = (1.0 - gamma).powi(-n);
            samples.push(
                (0..v1.len())
                    .map(|s| {
                        let d = v1[s] - v2[s];
                        if d.abs() <= 1e-12 * scale {
                            0
                        } else if d * factor > 0.0 {
                            1
                        } else {
                            -1
                        }
                    })
                    .collect(),
            );
        }
        for (s, sign) in signs.iter_mut().enumerate() {
            if *sign != 0 {
                continue;
            }
            let last: Vec<i8> = samples[samples.len() - 3..].iter().map(|v| v[s]).collect();
            if last.iter().all(|&x| x == last[0]) {
                *sign = last[0];
            } else {
                warnings.push(format!(
                    "order-{n} comparison at state {} is not sign-stable on the probe grid; reported as tied",
                    mdp.states()[s]
                ));
            }
        }
        warnings.push(format!("order {n} compared numerically, not exactly"));
    }
    let any_pos = signs.iter().any(|&x| x > 0);
    let any_neg = signs.iter().any(|&x| x < 0);
    let ordering = match (any_pos, any_neg) {
        (false, false) => Ordering::TiedAtOrderN,
        (true, false) => Ordering::Pi1Better,
        (false, true) => Ordering::Pi2Better,
        (true, true) => Ordering::Incomparable,
    };
    Ok(NDiscountComparison {
        order: n,
        ordering,
        numeric,
        warnings,
    })
}

/// Whether β is optimal (within tolerance) at `gamma`.
pub fn beta_optimal_at(mdp: &Mdp, report: &BlackwellReport, gamma: f64) -> Result<bool> {
    let (policy, value) = optimal_policy(mdp, gamma)?;
    if policy == report.beta {
        return Ok(true);
    }
    let beta = crate::solver::evaluate(mdp, &report.beta, gamma)?;
    let tol = relative_tol(gamma) * value.max().abs().max(1.0);
    Ok(value.values.iter().zip(&beta.values).all(|(v, b)| b >= &(v - tol)))
}
