//! Trainer configurations and checks against the fixture MDPs.

use hftmm_core::rl::fixtures::{one_hot, Bandit, GridWorld, TabularMdp};
use hftmm_core::rl::{argmax, dqn_train, log_softmax, ppo_train, DqnConfig, PpoConfig};

pub fn gridworld_dqn_config(seed: u64) -> DqnConfig {
    DqnConfig {
        hidden: vec![32, 32],
        lr: 1e-3,
        gamma: 0.9,
        batch_size: 32,
        buffer_capacity: 10_000,
        total_steps: 5_000,
        target_sync: 100,
        learning_starts: 100,
        seed,
        ..Default::default()
    }
}

pub fn bandit_ppo_config(seed: u64) -> PpoConfig {
    PpoConfig {
        hidden: vec![16],
        lr: 1e-3,
        rollout_steps: 32,
        minibatch_size: 32,
        updates: 2_000,
        seed,
        ..Default::default()
    }
}

/// Trains double DQN on the gridworld and compares its greedy action in
/// every non-terminal state with the value-iteration optimum.
pub fn dqn_gridworld(seed: u64) -> Result<(), String> {
    let q_star = GridWorld::tabular().value_iteration(0.9, 1e-12);
    let optimal = TabularMdp::optimal_actions(&q_star, 1e-9);
    let out = dqn_train(&mut GridWorld::default(), &gridworld_dqn_config(seed)).map_err(|e| e.to_string())?;
    if out.steps > 5_000 {
        return Err(format!("{} steps", out.steps));
    }
    for s in 0..3 {
        let a = argmax(&out.net.forward(&one_hot(s, 4)).map_err(|e| e.to_string())?);
        if !optimal[s].contains(&a) {
            return Err(format!("state {s}: action {a}, optimal {:?}", optimal[s]));
        }
    }
    Ok(())
}

/// Probability the trained PPO policy puts on the best bandit arm.
pub fn ppo_best_arm_probability(seed: u64) -> Result<f64, String> {
    let mut env = Bandit::five_arm(100 + seed);
    let out = ppo_train(&mut env, &bandit_ppo_config(seed)).map_err(|e| e.to_string())?;
    let logits = out.net.forward(&[1.0]).map_err(|e| e.to_string())?;
    Ok(log_softmax(&logits[..5])[env.best_arm()].exp())
}
