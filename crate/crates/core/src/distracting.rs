//! Distracting long-horizon MDP families: a small absorbing reward `r_d`
//! next to the start and a maximal absorbing reward `r_max` far away.
//!
//! Also hosts the hitting-time diameter, closed-form thresholds, the
//! adversarial and near-indifference constructions, and the check for
//! MDPs whose rewards are all transient.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::blackwell::{find_blackwell, BlackwellReport, DEFAULT_TOLERANCE};
use crate::chain::{absorption_times, decompose};
use crate::error::{Error, Result};
use crate::mdp::{enumerate_policies, induce_chain, Mdp, MdpBuilder, Policy};
use crate::solver::{evaluate, gain_bias, optimal_policy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Chain,
    TwoState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistractingSpec {
    pub family: Family,
    /// Hitting distance from the distractor to the high-reward state.
    pub d: f64,
    pub r_d: f64,
    pub r_max: f64,
    /// Escape probability of the two-state family; 1 for chains.
    pub p_escape: f64,
}

impl DistractingSpec {
    pub fn chain(h: usize, r_d: f64, r_max: f64) -> Self {
        DistractingSpec {
            family: Family::Chain,
            d: h as f64,
            r_d,
            r_max,
            p_escape: 1.0,
        }
    }

    pub fn two_state(p_escape: f64, r_d: f64, r_max: f64) -> Self {
        DistractingSpec {
            family: Family::TwoState,
            d: 1.0 / p_escape,
            r_d,
            r_max,
            p_escape,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.r_d > 0.0 && self.r_d < self.r_max && self.r_max.is_finite()) {
            return Err(Error::Parameter(format!(
                "need 0 < r_d < r_max, got r_d = {}, r_max = {}",
                self.r_d, self.r_max
            )));
        }
        if !(self.d >= 1.0) {
            return Err(Error::Parameter(format!("distance must be >= 1, got {}", self.d)));
        }
        if !(self.p_escape > 0.0 && self.p_escape <= 1.0) {
            return Err(Error::Parameter(format!("p_escape must be in (0, 1], got {}", self.p_escape)));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Mdp> {
        self.validate()?;
        match self.family {
            Family::Chain => generate_chain(self.d.round() as usize, self.r_d, self.r_max),
            Family::TwoState => generate_two_state(self.p_escape, self.r_d, self.r_max),
        }
    }
}

pub const CHAIN_ACTIONS: [&str; 2] = ["left", "right"];
pub const TWO_STATE_ACTIONS: [&str; 2] = ["a1", "a2"];
pub const TWO_STATE_NAMES: [&str; 2] = ["s_d", "s_H"];

/// States `s0..s{h}`. `left` moves one step toward `s0` and is a self-loop
/// paying `eps` at `s0`; `right` moves toward `s{h}` and is a self-loop
/// paying `r_max` there. Everything else pays zero. Starts at `s0`.
pub fn generate_chain(h: usize, eps: f64, r_max: f64) -> Result<Mdp> {
    if h == 0 {
        return Err(Error::Parameter("chain length must be >= 1".into()));
    }
    if !(eps > 0.0 && eps < r_max && r_max.is_finite()) {
        return Err(Error::Parameter(format!("need 0 < eps < r_max, got eps = {eps}, r_max = {r_max}")));
    }
    let names: Vec<String> = (0..=h).map(|i| format!("s{i}")).collect();
    let mut b = MdpBuilder::new(&names, &CHAIN_ACTIONS, r_max);
    for i in 0..=h {
        let left = if i == 0 { (0, 1.0, eps) } else { (i - 1, 1.0, 0.0) };
        let right = if i == h { (h, 1.0, r_max) } else { (i + 1, 1.0, 0.0) };
        b = b.transition(i, 0, &[left]).transition(i, 1, &[right]);
    }
    b.build()
}

/// `s_d`: `a1` self-loop paying `r_d`; `a2` reaches `s_H` with probability
/// `p_escape` and otherwise stays. `s_H`: `a2` self-loop paying `r_max`;
/// `a1` returns to `s_d`. Starts at `s_d`.
pub fn generate_two_state(p_escape: f64, r_d: f64, r_max: f64) -> Result<Mdp> {
    if !(p_escape > 0.0 && p_escape <= 1.0) {
        return Err(Error::Parameter(format!("p_escape must be in (0, 1], got {p_escape}")));
    }
    if !(r_d > 0.0 && r_d < r_max && r_max.is_finite()) {
        return Err(Error::Parameter(format!("need 0 < r_d < r_max, got r_d = {r_d}, r_max = {r_max}")));
    }
    let escape: Vec<(usize, f64, f64)> = if p_escape < 1.0 {
        vec![(1, p_escape, 0.0), (0, 1.0 - p_escape, 0.0)]
    } else {
        vec![(1, 1.0, 0.0)]
    };
    MdpBuilder::new(&TWO_STATE_NAMES, &TWO_STATE_ACTIONS, r_max)
        .transition(0, 0, &[(0, 1.0, r_d)])
        .transition(0, 1, &escape)
        .transition(1, 0, &[(0, 1.0, 0.0)])
        .transition(1, 1, &[(1, 1.0, r_max)])
        .build()
}

/// Recovers generator parameters when `mdp` is exactly a member of one of
/// the two families.
pub fn recognize(mdp: &Mdp) -> Option<DistractingSpec> {
    let names = mdp.states();
    if names.len() >= 2
        && mdp.actions() == CHAIN_ACTIONS
        && names.iter().enumerate().all(|(i, s)| *s == format!("s{i}"))
    {
        let h = names.len() - 1;
        let eps = mdp.expected_reward(0, 0)?;
        let candidate = generate_chain(h, eps, mdp.r_max()).ok()?;
        if &candidate == mdp {
            return Some(DistractingSpec::chain(h, eps, mdp.r_max()));
        }
    }
    if names == TWO_STATE_NAMES && mdp.actions() == TWO_STATE_ACTIONS {
        let r_d = mdp.expected_reward(0, 0)?;
        let p = mdp.prob(0, 1, 1);
        let candidate = generate_two_state(p, r_d, mdp.r_max()).ok()?;
        if &candidate == mdp {
            return Some(DistractingSpec::two_state(p, r_d, mdp.r_max()));
        }
    }
    None
}

/// Threshold computed from the family parameters: the `d`-th root of
/// `r_d / r_max` for chains, the exact indifference root for the two-state
/// family.
pub fn gamma_star_closed_form(spec: &DistractingSpec) -> Result<f64> {
    spec.validate()?;
    let ratio = spec.r_d / spec.r_max;
    Ok(match spec.family {
        Family::Chain => ratio.powf(1.0 / spec.d),
        // r_d (1 − γ(1−p)) = γ p r_max is linear in γ
        Family::TwoState => spec.r_d / (spec.p_escape * spec.r_max + spec.r_d * (1.0 - spec.p_escape)),
    })
}

/// Discount whose two-state threshold would equal `gamma`, solving the
/// indifference equation for `p_escape`.
pub fn two_state_escape_for(gamma: f64, r_d: f64, r_max: f64) -> f64 {
    // r_d − r_d γ + r_d γ p = γ p r_max
    r_d * (1.0 - gamma) / (gamma * (r_max - r_d))
}

/// Discount published for the reference two-state experiment (escape
/// probability 1/500), claimed to lie just above that MDP's threshold.
pub const REFERENCE_TWO_STATE_GAMMA: f64 = 0.84724541;

/// Adds the closed-form cross-check and, for the reference two-state
/// instance, the warning that its published discount is inconsistent with
/// the threshold the kernel implies.
pub fn annotate(mdp: &Mdp, report: &BlackwellReport) -> Annotation {
    let mut warnings = Vec::new();
    let spec = recognize(mdp);
    let closed_form = spec.as_ref().and_then(|s| gamma_star_closed_form(s).ok());
    if let Some(s) = &spec {
        if s.family == Family::TwoState
            && (s.p_escape - 1.0 / 500.0).abs() < 1e-12
            && (s.r_d - 0.1).abs() < 1e-12
            && (s.r_max - 1.0).abs() < 1e-12
        {
            let p_alt = two_state_escape_for(REFERENCE_TWO_STATE_GAMMA, s.r_d, s.r_max);
            warnings.push(format!(
                "reference discount {REFERENCE_TWO_STATE_GAMMA} is inconsistent with this MDP: \
                 p_escape = 1/500 gives gamma* = {:.10}, so that discount is myopic here; \
                 it is the threshold for p_escape = {p_alt:.6} (about 1/{:.1})",
                report.gamma_star,
                1.0 / p_alt
            ));
        }
    }
    if let Some(cf) = closed_form {
        if (cf - report.gamma_star).abs() > 1e-8 {
            warnings.push(format!(
                "closed-form gamma* {cf:.12} differs from numeric {:.12}",
                report.gamma_star
            ));
        }
    }
    Annotation {
        family: spec,
        closed_form,
        warnings,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Annotation {
    pub family: Option<DistractingSpec>,
    pub closed_form: Option<f64>,
    pub warnings: Vec<String>,
}

// ---------------------------------------------------------------------------
// Hitting times

/// Convergence threshold for the hitting-time value iteration.
const HITTING_TOL: f64 = 1e-10;

/// Minimum over policies of the expected first hitting time of `target`
/// from every state (zero at the target).
pub fn min_hitting_times(mdp: &Mdp, target: usize) -> Result<Vec<f64>> {
    let n = mdp.num_states();
    for s in 0..n {
        if !mdp.reachable_from(s)[target] {
            return Err(Error::Unreachable {
                from: mdp.states()[s].clone(),
                to: mdp.states()[target].clone(),
            });
        }
    }
    let backup = |h: &[f64], s: usize| -> (usize, f64) {
        mdp.available_actions(s)
            .map(|a| {
                let cost = 1.0
                    + mdp
                        .outcomes(s, a)
                        .unwrap()
                        .iter()
                        .filter(|o| o.next != target)
                        .map(|o| o.prob * h[o.next])
                        .sum::<f64>();
                (a, cost)
            })
            .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
    };
    let mut h = vec![0.0; n];
    loop {
        let mut delta = 0.0f64;
        for s in (0..n).filter(|&s| s != target) {
            let (_, v) = backup(&h, s);
            delta = delta.max((v - h[s]).abs());
            h[s] = v;
        }
        if delta < HITTING_TOL {
            break;
        }
    }
    // polish: solve the greedy policy's hitting-time system exactly
    let others: Vec<usize> = (0..n).filter(|&s| s != target).collect();
    if others.is_empty() {
        return Ok(h);
    }
    let m = others.len();
    let mut a = DMatrix::identity(m, m);
    for (r, &s) in others.iter().enumerate() {
        let (act, _) = backup(&h, s);
        for o in mdp.outcomes(s, act).unwrap() {
            if let Some(c) = others.iter().position(|&x| x == o.next) {
                a[(r, c)] -= o.prob;
            }
        }
    }
    if let Ok(x) = crate::linalg::solve(&a, &DVector::from_element(m, 1.0), "hitting times") {
        if x.iter().all(|v| v.is_finite() && *v >= 0.0) {
            for (r, &s) in others.iter().enumerate() {
                h[s] = x[r];
            }
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diameter {
    pub d: f64,
    pub from: usize,
    pub to: usize,
}

/// `max_{s≠s'} min_π E[τ(s, s')]`; the first maximizing ordered pair is the
/// witness.
pub fn diameter(mdp: &Mdp) -> Result<Diameter> {
    let n = mdp.num_states();
    let mut best = Diameter { d: 0.0, from: 0, to: 0 };
    for to in 0..n {
        let h = min_hitting_times(mdp, to)?;
        for from in (0..n).filter(|&s| s != to) {
            if h[from] > best.d + 1e-9 {
                best = Diameter { d: h[from], from, to };
            }
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Discount selection and constructions

/// Discount recommended with full knowledge of `(d, r_d, r_max)`:
/// `min(γ* + margin, (1 + γ*)/2)`.
pub fn corollary3_select(d: f64, r_d: f64, r_max: f64, margin: f64) -> Result<f64> {
    if margin < 0.0 {
        return Err(Error::Parameter(format!("margin must be >= 0, got {margin}")));
    }
    let gs = gamma_star_closed_form(&DistractingSpec {
        family: Family::Chain,
        d,
        r_d,
        r_max,
        p_escape: 1.0,
    })?;
    Ok((gs + margin).min(0.5 * (1.0 + gs)))
}

/// The two parameters of a chain instance that an agent is told.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KnownPair {
    RdRmax { r_d: f64, r_max: f64 },
    DRmax { d: usize, r_max: f64 },
    DRd { d: usize, r_d: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversaryInstance {
    #[serde(skip)]
    pub mdp: Mdp,
    pub spec: DistractingSpec,
    pub gamma_star: f64,
}

/// Chain instance consistent with the known pair on which `gamma` is myopic
/// (the optimal policy at `gamma` keeps collecting `r_d`) while every
/// discount from the instance's threshold onward recovers β. The free
/// parameter is placed as close to the indifference boundary as the known
/// pair allows.
pub fn corollary4_adversary(known: KnownPair, gamma: f64) -> Result<AdversaryInstance> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::DiscountRange(gamma));
    }
    let (d, r_d, r_max) = match known {
        KnownPair::RdRmax { r_d, r_max } => {
            if !(r_d > 0.0 && r_d < r_max) {
                return Err(Error::Parameter(format!("no consistent instance: r_d / r_max = {}", r_d / r_max)));
            }
            let ratio = r_d / r_max;
            // smallest d with γ^d < r_d / r_max
            let mut d = 1usize;
            while gamma.powi(d as i32) >= ratio {
                d += 1;
            }
            (d, r_d, r_max)
        }
        KnownPair::DRmax { d, r_max } => {
            if d == 0 || !(r_max > 0.0) {
                return Err(Error::Parameter("need d >= 1 and r_max > 0".into()));
            }
            let floor = gamma.powi(d as i32) * r_max;
            let r_d = floor + (0.01 * r_max).min(0.5 * (r_max - floor));
            (d, r_d, r_max)
        }
        KnownPair::DRd { d, r_d } => {
            if d == 0 || !(r_d > 0.0) {
                return Err(Error::Parameter("need d >= 1 and r_d > 0".into()));
            }
            let gd = gamma.powi(d as i32);
            let r_max = if gd > 0.0 {
                let ceiling = r_d / gd;
                ceiling - (0.01 * r_d).min(0.5 * (ceiling - r_d))
            } else {
                2.0 * r_d
            };
            if !(r_max > r_d) {
                return Err(Error::Parameter("no consistent instance for this (d, r_d, gamma)".into()));
            }
            (d, r_d, r_max)
        }
    };
    let spec = DistractingSpec::chain(d, r_d, r_max);
    let mdp = spec.generate()?;
    let gamma_star = gamma_star_closed_form(&spec)?;
    Ok(AdversaryInstance { mdp, spec, gamma_star })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearIndifference {
    #[serde(skip)]
    pub mdp: Mdp,
    pub spec: DistractingSpec,
    pub beta: Policy,
    /// β with the distractor self-loop taken at `s0`.
    pub pi_tilde: Policy,
    pub gamma_star: f64,
    pub sup_value_gap: f64,
    pub gain_gap: f64,
}

/// Chain instance with a non-gain-optimal policy whose values at `γ*` are
/// within `eps` of β's in sup norm. At the exact threshold the distractor
/// state is indifferent, so the gap is limited only by how precisely `γ*`
/// is located.
pub fn corollary5_construct(eps: f64) -> Result<NearIndifference> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
    }
    let spec = DistractingSpec::chain(2, 0.25, 1.0);
    let mdp = spec.generate()?;
    let report = find_blackwell(&mdp, DEFAULT_TOLERANCE, crate::mdp::DEFAULT_POLICY_CAP)?;
    let beta = report.beta.clone();
    let pi_tilde = beta.with_action(0, 0);
    let vb = evaluate(&mdp, &beta, report.gamma_star)?;
    let vt = evaluate(&mdp, &pi_tilde, report.gamma_star)?;
    let sup_value_gap = vb
        .values
        .iter()
        .zip(&vt.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if sup_value_gap >= eps {
        return Err(Error::Parameter(format!(
            "value gap {sup_value_gap:e} at the located threshold is not below {eps}"
        )));
    }
    let gain_gap = gain_bias(&mdp, &beta)?.gain[0] - gain_bias(&mdp, &pi_tilde)?.gain[0];
    Ok(NearIndifference {
        mdp,
        spec,
        beta,
        pi_tilde,
        gamma_star: report.gamma_star,
        sup_value_gap,
        gain_gap,
    })
}

// ---------------------------------------------------------------------------
// Transient rewards

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransienceVerdict {
    pub all_transient: bool,
    /// A policy and a recurrent state of its chain that emits a nonzero
    /// reward, when one exists.
    pub witness: Option<(Policy, usize)>,
    /// `r_max · max_π max_s E[steps before absorption]` when all rewards are
    /// transient: an upper bound on every discounted value.
    pub value_bound: Option<f64>,
}

pub fn rewards_all_transient(mdp: &Mdp, cap: u128) -> Result<TransienceVerdict> {
    let mut worst_time = 0.0f64;
    for policy in enumerate_policies(mdp, cap)? {
        let chain = induce_chain(mdp, &policy)?;
        let structure = decompose(&chain.transition);
        for class in &structure.recurrent_classes {
            for &s in class {
                let emits = mdp
                    .outcomes(s, policy.action(s))
                    .unwrap()
                    .iter()
                    .any(|o| o.prob > 0.0 && o.reward != 0.0);
                if emits {
                    return Ok(TransienceVerdict {
                        all_transient: false,
                        witness: Some((policy, s)),
                        value_bound: None,
                    });
                }
            }
        }
        let times = absorption_times(&chain.transition, &structure)?;
        worst_time = worst_time.max(times.amax());
    }
    Ok(TransienceVerdict {
        all_transient: true,
        witness: None,
        value_bound: Some(worst_time * mdp.r_max()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VmaxTrend {
    pub gammas: Vec<f64>,
    pub v_max: Vec<f64>,
    /// The maximum is over all states only when the MDP is communicating.
    pub communicating: bool,
    pub transience: TransienceVerdict,
}

/// `max_s V*_γ(s)` along a discount grid, paired with the transience
/// verdict that decides whether it stays bounded as `γ → 1`.
pub fn vmax_trend(mdp: &Mdp, gamma_grid: &[f64], cap: u128) -> Result<VmaxTrend> {
    let v_max = gamma_grid
        .iter()
        .map(|&g| optimal_policy(mdp, g).map(|(_, v)| v.max()))
        .collect::<Result<Vec<_>>>()?;
    Ok(VmaxTrend {
        gammas: gamma_grid.to_vec(),
        v_max,
        communicating: mdp.is_communicating(),
        transience: rewards_all_transient(mdp, cap)?,
    })
}
