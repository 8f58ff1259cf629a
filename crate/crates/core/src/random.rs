//! Seeded random MDPs for experiments and tests.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::mdp::{Mdp, MdpBuilder};

/// Shape of a random MDP family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomFamily {
    pub max_states: usize,
    pub max_actions: usize,
    /// Probability that an action other than the first is defined at a state.
    pub density: f64,
    /// Most successors per state-action pair.
    pub max_successors: usize,
}

impl Default for RandomFamily {
    fn default() -> Self {
        RandomFamily {
            max_states: 4,
            max_actions: 3,
            density: 0.85,
            max_successors: 3,
        }
    }
}

impl RandomFamily {
    /// Member `seed` of the family: between 2 and `max_states` states, the
    /// same for actions, rewards in `[0, 1]`, uniform initial distribution.
    pub fn sample(&self, seed: u64) -> Result<Mdp> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=self.max_states.max(2));
        let k = rng.random_range(2..=self.max_actions.max(2));
        let states: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let actions: Vec<String> = (0..k).map(|i| format!("a{i}")).collect();
        let mut builder = MdpBuilder::new(&states, &actions, 1.0).initial(vec![1.0 / n as f64; n]);
        for s in 0..n {
            for a in 0..k {
                if a > 0 && !rng.random_bool(self.density) {
                    continue;
                }
                let count = rng.random_range(1..=self.max_successors.min(n));
                let next = sample(&mut rng, n, count).into_vec();
                let weights: Vec<f64> = (0..count).map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = weights.iter().sum();
                let outcomes: Vec<(usize, f64, f64)> = next
                    .iter()
                    .zip(&weights)
                    .map(|(&to, w)| (to, w / total, rng.random_range(0.0..1.0)))
                    .collect();
                builder = builder.transition(s, a, &outcomes);
            }
        }
        builder.build()
    }
}
