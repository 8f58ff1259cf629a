//! Exact analysis of finite tabular MDPs around Blackwell optimality.

pub mod blackwell;
pub mod chain;
pub mod delayed_q;
pub mod distracting;
pub mod error;
mod linalg;
pub mod mdp;
pub mod random;
pub mod regret;
pub mod solver;

pub use error::{Error, Result};
pub use blackwell::{find_blackwell, BlackwellReport};
pub use delayed_q::{experiment, run_delayed_q, LearnerConfig, LearnerTrace};
pub use mdp::{enumerate_policies, induce_chain, load_mdp, parse_mdp, policy_count, serialize_mdp, InducedChain, Mdp, MdpBuilder, Outcome, Policy, DEFAULT_POLICY_CAP};
pub use solver::{evaluate, gain_bias, optimal_policy, q_values, GainBias, QTable, ValueVector};
pub use regret::{blackwell_regret, policy_gap, standard_regret, RegretReport};
