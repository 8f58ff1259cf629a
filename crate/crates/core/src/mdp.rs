//! Tabular MDP model, validation, the on-disk document format, deterministic
//! policies and the Markov chain a policy induces.
//!
//! Rewards are attached to transitions `(s, a, s')`. Per-state expected
//! rewards are always derived from the kernel and never stored.

use std::fmt;
use std::io::Read;

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for probability-mass checks.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Default limit on the number of deterministic policies any brute-force
/// routine is allowed to enumerate.
pub const DEFAULT_POLICY_CAP: u128 = 1_000_000;

/// One successor of a state-action pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    states: Vec<String>,
    actions: Vec<String>,
    r_max: f64,
    initial: Vec<f64>,
    /// `kernel[s][a]` is `None` when action `a` is not available at `s`.
    kernel: Vec<Vec<Option<Vec<Outcome>>>>,
}

impl Mdp {
    /// Builds and validates an MDP from index-based parts.
    pub fn new(
        states: Vec<String>,
        actions: Vec<String>,
        r_max: f64,
        initial: Vec<f64>,
        kernel: Vec<Vec<Option<Vec<Outcome>>>>,
    ) -> Result<Self> {
        let mdp = Mdp {
            states,
            actions,
            r_max,
            initial,
            kernel,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::validation("states", "at least one state is required"));
        }
        if self.actions.is_empty() {
            return Err(Error::validation("actions", "at least one action is required"));
        }
        check_unique(&self.states, "states")?;
        check_unique(&self.actions, "actions")?;
        if !self.r_max.is_finite() || self.r_max < 0.0 {
            return Err(Error::validation("r_max", format!("must be finite and >= 0, got {}", self.r_max)));
        }
        let n = self.states.len();
        if self.initial.len() != n {
            return Err(Error::validation("initial", "length does not match state count"));
        }
        for (s, &p) in self.initial.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::validation(
                    format!("initial[{}]", self.states[s]),
                    format!("probability {p} outside [0, 1]"),
                ));
            }
        }
        let mass: f64 = self.initial.iter().sum();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::validation("initial", format!("probabilities sum to {mass}, expected 1")));
        }
        if self.kernel.len() != n {
            return Err(Error::validation("transitions", "row count does not match state count"));
        }
        for (s, row) in self.kernel.iter().enumerate() {
            if row.len() != self.actions.len() {
                return Err(Error::validation(
                    format!("transitions[{}]", self.states[s]),
                    "column count does not match action count",
                ));
            }
            if row.iter().all(Option::is_none) {
                return Err(Error::validation(
                    format!("transitions[{}]", self.states[s]),
                    "state has no defined action",
                ));
            }
            for (a, outcomes) in row.iter().enumerate() {
                let Some(outcomes) = outcomes else { continue };
                let path = format!("transitions[({},{})]", self.states[s], self.actions[a]);
                if outcomes.is_empty() {
                    return Err(Error::validation(path, "no successors listed"));
                }
                let mut total = 0.0;
                for o in outcomes {
                    if o.next >= n {
                        return Err(Error::validation(path, format!("successor index {} out of range", o.next)));
                    }
                    if !(0.0..=1.0).contains(&o.prob) {
                        return Err(Error::validation(path, format!("probability {} outside [0, 1]", o.prob)));
                    }
                    if !o.reward.is_finite() || o.reward < 0.0 || o.reward > self.r_max {
                        return Err(Error::validation(
                            path,
                            format!("reward {} outside [0, r_max = {}]", o.reward, self.r_max),
                        ));
                    }
                    total += o.prob;
                }
                if (total - 1.0).abs() > MASS_TOLERANCE {
                    return Err(Error::validation(path, format!("successor probabilities sum to {total}, expected 1")));
                }
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn state_index(&self, name: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == name)
    }

    /// Successor list for `(s, a)`, or `None` if `a` is unavailable at `s`.
    pub fn outcomes(&self, s: usize, a: usize) -> Option<&[Outcome]> {
        self.kernel[s][a].as_deref()
    }

    /// Indices of the actions defined at `s`, in declaration order.
    pub fn available_actions(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.kernel[s]
            .iter()
            .enumerate()
            .filter_map(|(a, o)| o.as_ref().map(|_| a))
    }

    pub fn is_available(&self, s: usize, a: usize) -> bool {
        a < self.actions.len() && self.kernel[s][a].is_some()
    }

    /// `Σ_{s'} p(s'|s,a) r(s,a,s')`.
    pub fn expected_reward(&self, s: usize, a: usize) -> Option<f64> {
        self.outcomes(s, a)
            .map(|os| os.iter().map(|o| o.prob * o.reward).sum())
    }

    /// Probability of moving from `s` to `to` under `a` (duplicate successor
    /// entries are summed).
    pub fn prob(&self, s: usize, a: usize, to: usize) -> f64 {
        self.outcomes(s, a)
            .map(|os| os.iter().filter(|o| o.next == to).map(|o| o.prob).sum())
            .unwrap_or(0.0)
    }

    /// Same MDP with every reward (and `r_max`) multiplied by `factor > 0`.
    pub fn scale_rewards(&self, factor: f64) -> Result<Mdp> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Parameter(format!("reward scale must be positive, got {factor}")));
        }
        let kernel = self
            .kernel
            .iter()
            .map(|row| {
                row.iter()
                    .map(|o| {
                        o.as_ref().map(|os| {
                            os.iter()
                                .map(|o| Outcome { reward: o.reward * factor, ..*o })
                                .collect()
                        })
                    })
                    .collect()
            })
            .collect();
        Mdp::new(
            self.states.clone(),
            self.actions.clone(),
            self.r_max * factor,
            self.initial.clone(),
            kernel,
        )
    }

    /// Same MDP with a different initial distribution.
    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Mdp> {
        Mdp::new(
            self.states.clone(),
            self.actions.clone(),
            self.r_max,
            initial,
            self.kernel.clone(),
        )
    }

    pub fn check_policy(&self, policy: &Policy) -> Result<()> {
        if policy.len() != self.num_states() {
            return Err(Error::Parameter(format!(
                "policy covers {} states, MDP has {}",
                policy.len(),
                self.num_states()
            )));
        }
        for (s, &a) in policy.iter().enumerate() {
            if !self.is_available(s, a) {
                return Err(Error::UndefinedAction {
                    state: self.states[s].clone(),
                    action: self.actions.get(a).cloned().unwrap_or_else(|| format!("#{a}")),
                });
            }
        }
        Ok(())
    }

    /// Builds a policy from `(state, action)` name pairs; unspecified states
    /// get their first available action.
    pub fn policy_from_names(&self, pairs: &[(&str, &str)]) -> Result<Policy> {
        let mut actions: Vec<usize> = (0..self.num_states())
            .map(|s| self.available_actions(s).next().expect("validated"))
            .collect();
        for &(state, action) in pairs {
            let s = self.state_index(state)?;
            let a = self.action_index(action).ok_or_else(|| Error::UndefinedAction {
                state: state.to_string(),
                action: action.to_string(),
            })?;
            actions[s] = a;
        }
        let policy = Policy::new(actions);
        self.check_policy(&policy)?;
        Ok(policy)
    }

    /// Policy that plays the same named action everywhere.
    pub fn uniform_policy(&self, action: &str) -> Result<Policy> {
        let a = self.action_index(action).ok_or_else(|| Error::Parameter(format!("unknown action {action}")))?;
        let policy = Policy::new(vec![a; self.num_states()]);
        self.check_policy(&policy)?;
        Ok(policy)
    }

    /// State name → action name, in state order.
    pub fn describe_policy(&self, policy: &Policy) -> IndexMap<String, String> {
        policy
            .iter()
            .enumerate()
            .map(|(s, &a)| (self.states[s].clone(), self.actions[a].clone()))
            .collect()
    }

    /// Union over actions of the positive-probability successor graph.
    pub(crate) fn reachable_from(&self, source: usize) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut stack = vec![source];
        seen[source] = true;
        while let Some(s) = stack.pop() {
            for a in self.available_actions(s) {
                for o in self.outcomes(s, a).unwrap() {
                    if o.prob > 0.0 && !seen[o.next] {
                        seen[o.next] = true;
                        stack.push(o.next);
                    }
                }
            }
        }
        seen
    }

    /// True when every state can reach every other under some policy.
    pub fn is_communicating(&self) -> bool {
        (0..self.num_states()).all(|s| self.reachable_from(s).into_iter().all(|r| r))
    }
}

fn check_unique(names: &[String], field: &str) -> Result<()> {
    for (i, name) in names.iter().enumerate() {
        if names[..i].contains(name) {
            return Err(Error::validation(field, format!("duplicate identifier {name:?}")));
        }
    }
    Ok(())
}

/// Deterministic stationary policy, stored as one action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Policy(Vec<usize>);

impl Policy {
    pub fn new(actions: Vec<usize>) -> Self {
        Policy(actions)
    }

    pub fn action(&self, state: usize) -> usize {
        self.0[state]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Copy of `self` with the action at `state` replaced.
    pub fn with_action(&self, state: usize, action: usize) -> Policy {
        let mut actions = self.0.clone();
        actions[state] = action;
        Policy(actions)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// Number of deterministic stationary policies, `Π_s |A(s)|` (saturating).
pub fn policy_count(mdp: &Mdp) -> u128 {
    (0..mdp.num_states())
        .map(|s| mdp.available_actions(s).count() as u128)
        .fold(1u128, |acc, k| acc.saturating_mul(k))
}

/// Every deterministic stationary policy exactly once, lexicographic over
/// the state ordering (the last state varies fastest).
pub fn enumerate_policies(mdp: &Mdp, cap: u128) -> Result<Policies> {
    let count = policy_count(mdp);
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let choices: Vec<Vec<usize>> = (0..mdp.num_states())
        .map(|s| mdp.available_actions(s).collect())
        .collect();
    Ok(Policies {
        digits: vec![0; choices.len()],
        choices,
        done: false,
        remaining: count,
    })
}

/// Odometer over per-state action choices.
#[derive(Debug, Clone)]
pub struct Policies {
    choices: Vec<Vec<usize>>,
    digits: Vec<usize>,
    done: bool,
    remaining: u128,
}

impl Iterator for Policies {
    type Item = Policy;

    fn next(&mut self) -> Option<Policy> {
        if self.done {
            return None;
        }
        let policy = Policy(
            self.digits
                .iter()
                .zip(&self.choices)
                .map(|(&d, c)| c[d])
                .collect(),
        );
        self.remaining -= 1;
        // advance, last state fastest
        let mut i = self.digits.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.digits[i] += 1;
            if self.digits[i] < self.choices[i].len() {
                break;
            }
            self.digits[i] = 0;
        }
        Some(policy)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

/// Markov reward chain obtained by fixing a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedChain {
    pub transition: DMatrix<f64>,
    pub reward: DVector<f64>,
}

pub fn induce_chain(mdp: &Mdp, policy: &Policy) -> Result<InducedChain> {
    mdp.check_policy(policy)?;
    let n = mdp.num_states();
    let mut transition = DMatrix::zeros(n, n);
    let mut reward = DVector::zeros(n);
    for s in 0..n {
        let a = policy.action(s);
        for o in mdp.outcomes(s, a).expect("checked") {
            transition[(s, o.next)] += o.prob;
            reward[s] += o.prob * o.reward;
        }
    }
    Ok(InducedChain { transition, reward })
}

// ---------------------------------------------------------------------------
// Document format

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpDocument {
    states: Vec<String>,
    actions: Vec<String>,
    r_max: f64,
    initial: IndexMap<String, f64>,
    transitions: Vec<TransitionRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionRecord {
    s: String,
    a: String,
    to: Vec<SuccessorRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuccessorRecord {
    sp: String,
    p: f64,
    r: f64,
}

pub fn load_mdp<R: Read>(source: R) -> Result<Mdp> {
    let doc: MdpDocument = serde_json::from_reader(source).map_err(|e| Error::Parse(e.to_string()))?;
    from_document(doc)
}

pub fn parse_mdp(text: &str) -> Result<Mdp> {
    load_mdp(text.as_bytes())
}

fn from_document(doc: MdpDocument) -> Result<Mdp> {
    let lookup = |names: &[String], name: &str, path: &str| {
        names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::validation(path, format!("unknown identifier {name:?}")))
    };
    let n = doc.states.len();
    let mut initial = vec![0.0; n];
    for (name, p) in &doc.initial {
        let s = lookup(&doc.states, name, "initial")?;
        initial[s] = *p;
    }
    let mut kernel: Vec<Vec<Option<Vec<Outcome>>>> = vec![vec![None; doc.actions.len()]; n];
    for (i, rec) in doc.transitions.iter().enumerate() {
        let path = format!("transitions[{i}]");
        let s = lookup(&doc.states, &rec.s, &path)?;
        let a = lookup(&doc.actions, &rec.a, &path)?;
        if kernel[s][a].is_some() {
            return Err(Error::validation(
                format!("transitions[({},{})]", rec.s, rec.a),
                "duplicate state-action record",
            ));
        }
        let outcomes = rec
            .to
            .iter()
            .map(|t| {
                Ok(Outcome {
                    next: lookup(&doc.states, &t.sp, &format!("{path}.to"))?,
                    prob: t.p,
                    reward: t.r,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        kernel[s][a] = Some(outcomes);
    }
    Mdp::new(doc.states, doc.actions, doc.r_max, initial, kernel)
}

fn to_document(mdp: &Mdp) -> MdpDocument {
    let initial = mdp
        .initial
        .iter()
        .enumerate()
        .filter(|(_, &p)| p != 0.0)
        .map(|(s, &p)| (mdp.states[s].clone(), p))
        .collect();
    let mut transitions = Vec::new();
    for s in 0..mdp.num_states() {
        for a in mdp.available_actions(s) {
            transitions.push(TransitionRecord {
                s: mdp.states[s].clone(),
                a: mdp.actions[a].clone(),
                to: mdp
                    .outcomes(s, a)
                    .unwrap()
                    .iter()
                    .map(|o| SuccessorRecord {
                        sp: mdp.states[o.next].clone(),
                        p: o.prob,
                        r: o.reward,
                    })
                    .collect(),
            });
        }
    }
    MdpDocument {
        states: mdp.states.clone(),
        actions: mdp.actions.clone(),
        r_max: mdp.r_max,
        initial,
        transitions,
    }
}

/// Serializes to the document format. Output is a pure function of the
/// model, so equal MDPs produce identical bytes.
pub fn serialize_mdp(mdp: &Mdp) -> String {
    let mut out = serde_json::to_string_pretty(&to_document(mdp)).expect("document is always serializable");
    out.push('\n');
    out
}

/// Convenience builder used by generators and tests.
#[derive(Debug, Clone)]
pub struct MdpBuilder {
    states: Vec<String>,
    actions: Vec<String>,
    r_max: f64,
    initial: Vec<f64>,
    kernel: Vec<Vec<Option<Vec<Outcome>>>>,
}

impl MdpBuilder {
    pub fn new<S: AsRef<str>, A: AsRef<str>>(states: &[S], actions: &[A], r_max: f64) -> Self {
        let states: Vec<String> = states.iter().map(|s| s.as_ref().to_string()).collect();
        let actions: Vec<String> = actions.iter().map(|a| a.as_ref().to_string()).collect();
        let n = states.len();
        let mut initial = vec![0.0; n];
        if n > 0 {
            initial[0] = 1.0;
        }
        MdpBuilder {
            kernel: vec![vec![None; actions.len()]; n],
            states,
            actions,
            r_max,
            initial,
        }
    }

    pub fn initial(mut self, initial: Vec<f64>) -> Self {
        self.initial = initial;
        self
    }

    /// Adds `(s, a) → [(s', p, r)]` by indices.
    pub fn transition(mut self, s: usize, a: usize, to: &[(usize, f64, f64)]) -> Self {
        self.kernel[s][a] = Some(
            to.iter()
                .map(|&(next, prob, reward)| Outcome { next, prob, reward })
                .collect(),
        );
        self
    }

    pub fn build(self) -> Result<Mdp> {
        Mdp::new(self.states, self.actions, self.r_max, self.initial, self.kernel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SLOW_ESCAPE: &str = r#"{
        "states": ["s_d", "s_H"],
        "actions": ["a1", "a2"],
        "r_max": 1.0,
        "initial": {"s_d": 1.0},
        "transitions": [
            {"s": "s_d", "a": "a1", "to": [{"sp": "s_d", "p": 1.0, "r": 0.1}]},
            {"s": "s_d", "a": "a2", "to": [{"sp": "s_H", "p": 0.002, "r": 0.0},
                                           {"sp": "s_d", "p": 0.998, "r": 0.0}]},
            {"s": "s_H", "a": "a1", "to": [{"sp": "s_d", "p": 1.0, "r": 0.0}]},
            {"s": "s_H", "a": "a2", "to": [{"sp": "s_H", "p": 1.0, "r": 1.0}]}
        ]
    }"#;

    #[test]
    fn loads_two_state_document() {
        let m = parse_mdp(SLOW_ESCAPE).unwrap();
        assert_eq!(m.num_states(), 2);
        assert_eq!(m.num_actions(), 2);
        assert_eq!(m.initial(), &[1.0, 0.0]);
        assert!((m.prob(0, 1, 1) - 1.0 / 500.0).abs() < 1e-15);
    }

    #[test]
    fn loads_single_state_self_loop() {
        let m = parse_mdp(
            r#"{"states":["x"],"actions":["a"],"r_max":0,"initial":{"x":1},
                "transitions":[{"s":"x","a":"a","to":[{"sp":"x","p":1.0,"r":0}]}]}"#,
        )
        .unwrap();
        assert_eq!(m.num_states(), 1);
        assert_eq!(policy_count(&m), 1);
    }

    #[test]
    fn rejects_short_probability_mass_with_path() {
        let err = parse_mdp(
            r#"{"states":["s0","s1"],"actions":["a0"],"r_max":1,"initial":{"s0":1},
                "transitions":[{"s":"s0","a":"a0","to":[{"sp":"s1","p":0.9,"r":0}]},
                               {"s":"s1","a":"a0","to":[{"sp":"s1","p":1.0,"r":0}]}]}"#,
        )
        .unwrap_err();
        match err {
            Error::Validation { path, .. } => assert!(path.contains("(s0,a0)"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_keys_and_identifiers() {
        let unknown_key = SLOW_ESCAPE.replacen("\"r_max\"", "\"gamma\": 0.9, \"r_max\"", 1);
        assert!(matches!(parse_mdp(&unknown_key), Err(Error::Parse(_))));
        let unknown_state = SLOW_ESCAPE.replacen("{\"sp\": \"s_d\", \"p\": 1.0, \"r\": 0.1}", "{\"sp\": \"nowhere\", \"p\": 1.0, \"r\": 0.1}", 1);
        assert!(matches!(parse_mdp(&unknown_state), Err(Error::Validation { .. })));
        assert!(matches!(parse_mdp("{not json"), Err(Error::Parse(_))));
    }

    #[test]
    fn rejects_reward_above_ceiling_and_negative() {
        let high = SLOW_ESCAPE.replacen("\"r_max\": 1.0", "\"r_max\": 0.5", 1);
        assert!(matches!(parse_mdp(&high), Err(Error::Validation { .. })));
        let negative = SLOW_ESCAPE.replacen("\"r\": 0.1", "\"r\": -0.1", 1);
        assert!(matches!(parse_mdp(&negative), Err(Error::Validation { .. })));
    }

    #[test]
    fn rejects_state_without_actions() {
        let err = MdpBuilder::new(&["a", "b"], &["x"], 1.0)
            .transition(0, 0, &[(0, 1.0, 0.0)])
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn induced_chain_for_slow_escape_policies() {
        let m = parse_mdp(SLOW_ESCAPE).unwrap();
        let stay = Policy::new(vec![0, 1]);
        let chain = induce_chain(&m, &stay).unwrap();
        assert_eq!(chain.transition, DMatrix::identity(2, 2));
        assert_eq!(chain.reward.as_slice(), &[0.1, 1.0]);

        let all_a2 = Policy::new(vec![1, 1]);
        let chain = induce_chain(&m, &all_a2).unwrap();
        assert!((chain.transition[(0, 0)] - 499.0 / 500.0).abs() < 1e-15);
        assert!((chain.transition[(0, 1)] - 1.0 / 500.0).abs() < 1e-15);
        assert_eq!(chain.reward.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn induced_chain_rejects_undefined_action() {
        let m = MdpBuilder::new(&["a", "b"], &["x", "y"], 1.0)
            .transition(0, 0, &[(1, 1.0, 0.0)])
            .transition(1, 0, &[(1, 1.0, 0.0)])
            .transition(1, 1, &[(0, 1.0, 0.0)])
            .build()
            .unwrap();
        let err = induce_chain(&m, &Policy::new(vec![1, 0])).unwrap_err();
        assert!(matches!(err, Error::UndefinedAction { .. }));
    }

    #[test]
    fn enumeration_counts_and_order() {
        let m = parse_mdp(SLOW_ESCAPE).unwrap();
        let all: Vec<Policy> = enumerate_policies(&m, DEFAULT_POLICY_CAP).unwrap().collect();
        assert_eq!(
            all,
            vec![
                Policy::new(vec![0, 0]),
                Policy::new(vec![0, 1]),
                Policy::new(vec![1, 0]),
                Policy::new(vec![1, 1])
            ]
        );
    }

    #[test]
    fn enumeration_cap_reports_exact_count() {
        let mut b = MdpBuilder::new(&["0", "1", "2", "3"], &["l", "r"], 1.0);
        for s in 0..4 {
            b = b.transition(s, 0, &[(s, 1.0, 0.0)]).transition(s, 1, &[((s + 1) % 4, 1.0, 0.0)]);
        }
        let m = b.build().unwrap();
        assert_eq!(enumerate_policies(&m, 100).unwrap().count(), 16);
        match enumerate_policies(&m, 10) {
            Err(Error::CapExceeded { count, cap }) => assert_eq!((count, cap), (16, 10)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn serialization_is_stable() {
        let m = parse_mdp(SLOW_ESCAPE).unwrap();
        let text = serialize_mdp(&m);
        assert_eq!(parse_mdp(&text).unwrap(), m);
        assert_eq!(serialize_mdp(&parse_mdp(&text).unwrap()), text);
    }
}
