//! Small MDPs with known optima for checking the trainers.

use super::{Environment, Step};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Deterministic finite MDP. `next[s][a] == None` means the transition ends
/// the episode.
#[derive(Clone, Debug)]
pub struct TabularMdp {
    pub next: Vec<Vec<Option<usize>>>,
    pub reward: Vec<Vec<f64>>,
}

impl TabularMdp {
    pub fn n_states(&self) -> usize {
        self.next.len()
    }

    pub fn n_actions(&self) -> usize {
        self.next[0].len()
    }

    /// Optimal action values by value iteration.
    pub fn value_iteration(&self, gamma: f64, tol: f64) -> Vec<Vec<f64>> {
        let (ns, na) = (self.n_states(), self.n_actions());
        let mut q = vec![vec![0.0; na]; ns];
        loop {
            let v: Vec<f64> = q.iter().map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect();
            let mut diff: f64 = 0.0;
            for s in 0..ns {
                for a in 0..na {
                    let new = self.reward[s][a] + self.next[s][a].map_or(0.0, |n| gamma * v[n]);
                    diff = diff.max((new - q[s][a]).abs());
                    q[s][a] = new;
                }
            }
            if diff < tol {
                return q;
            }
        }
    }

    /// Actions within `tie` of the best value in each state.
    pub fn optimal_actions(q: &[Vec<f64>], tie: f64) -> Vec<Vec<usize>> {
        q.iter()
            .map(|row| {
                let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (0..row.len()).filter(|&a| row[a] >= best - tie).collect()
            })
            .collect()
    }
}

pub fn one_hot(i: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// 2x2 grid, cells numbered row-major. Entering cell 3 pays 1 and ends the
/// episode; entering cell 2 costs 0.5; bumping a wall keeps the agent in
/// place. Actions: up, down, left, right. Starts in cell 0.
#[derive(Clone, Debug)]
pub struct GridWorld {
    state: usize,
    t: usize,
    pub max_steps: usize,
}

impl Default for GridWorld {
    fn default() -> Self {
        GridWorld {
            state: 0,
            t: 0,
            max_steps: 20,
        }
    }
}

impl GridWorld {
    pub const GOAL: usize = 3;

    fn move_to(s: usize, a: usize) -> usize {
        let (r, c) = (s / 2, s % 2);
        let (r, c) = match a {
            0 => (r.saturating_sub(1), c),
            1 => ((r + 1).min(1), c),
            2 => (r, c.saturating_sub(1)),
            _ => (r, (c + 1).min(1)),
        };
        r * 2 + c
    }

    fn reward_for(to: usize) -> f64 {
        match to {
            Self::GOAL => 1.0,
            2 => -0.5,
            _ => 0.0,
        }
    }

    pub fn tabular() -> TabularMdp {
        let mut next = vec![vec![None; 4]; 4];
        let mut reward = vec![vec![0.0; 4]; 4];
        for s in 0..3 {
            for a in 0..4 {
                let to = Self::move_to(s, a);
                next[s][a] = (to != Self::GOAL).then_some(to);
                reward[s][a] = Self::reward_for(to);
            }
        }
        TabularMdp { next, reward }
    }
}

impl Environment for GridWorld {
    fn obs_dim(&self) -> usize {
        4
    }

    fn action_count(&self) -> usize {
        4
    }

    fn reset(&mut self) -> Option<Vec<f64>> {
        self.state = 0;
        self.t = 0;
        Some(one_hot(0, 4))
    }

    fn step(&mut self, action: usize) -> Step {
        let to = Self::move_to(self.state, action);
        self.state = to;
        self.t += 1;
        let done = to == Self::GOAL;
        Step {
            obs: one_hot(to, 4),
            reward: Self::reward_for(to),
            done,
            truncated: !done && self.t >= self.max_steps,
        }
    }
}

/// One-step episodes with Gaussian arm rewards.
#[derive(Clone, Debug)]
pub struct Bandit {
    pub means: Vec<f64>,
    pub noise_sd: f64,
    rng: ChaCha8Rng,
}

impl Bandit {
    pub fn new(means: Vec<f64>, noise_sd: f64, seed: u64) -> Self {
        Bandit {
            means,
            noise_sd,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn five_arm(seed: u64) -> Self {
        Bandit::new(vec![0.1, 0.5, 0.2, 0.9, 0.3], 0.1, seed)
    }

    pub fn best_arm(&self) -> usize {
        super::argmax(&self.means)
    }
}

impl Environment for Bandit {
    fn obs_dim(&self) -> usize {
        1
    }

    fn action_count(&self) -> usize {
        self.means.len()
    }

    fn reset(&mut self) -> Option<Vec<f64>> {
        Some(vec![1.0])
    }

    fn step(&mut self, action: usize) -> Step {
        let noise: f64 = self.rng.sample(StandardNormal);
        Step {
            obs: vec![1.0],
            reward: self.means[action] + self.noise_sd * noise,
            done: true,
            truncated: false,
        }
    }
}

/// Two states, two actions, no terminal state: action 0 stays, action 1
/// switches. Staying in state 1 pays 1, switching out of state 0 pays 0.2,
/// everything else pays 0.
pub fn two_state_mdp() -> TabularMdp {
    TabularMdp {
        next: vec![vec![Some(0), Some(1)], vec![Some(1), Some(0)]],
        reward: vec![vec![0.0, 0.2], vec![1.0, 0.0]],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gridworld_optimum() {
        let q = GridWorld::tabular().value_iteration(0.9, 1e-12);
        let opt = TabularMdp::optimal_actions(&q, 1e-9);
        assert_eq!(opt[0], vec![3]);
        assert_eq!(opt[1], vec![1]);
        assert_eq!(opt[2], vec![3]);
        assert!((q[0][3] - 0.9).abs() < 1e-9);
    }

    #[test]
    fn two_state_values() {
        // V(1) = 1 / (1 - g); Q(0, 1) = 0.2 + g V(1).
        let g = 0.5;
        let q = two_state_mdp().value_iteration(g, 1e-14);
        assert!((q[1][0] - 2.0).abs() < 1e-9);
        assert!((q[0][1] - 1.2).abs() < 1e-9);
    }
}
