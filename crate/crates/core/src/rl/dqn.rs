//! Double DQN: the moving net picks the next action, the target net values it.

use super::{argmax, clip_grad_norm, Adam, Checkpoint, Environment, Mlp, ReplayBuffer, RlError, TrainLogRow, TrainerKind, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub total_steps: u64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Share of `total_steps` over which epsilon decays linearly.
    pub eps_fraction: f64,
    /// Gradient steps between hard copies into the target net.
    pub target_sync: u64,
    pub learning_starts: usize,
    pub train_every: u64,
    pub max_grad_norm: Option<f64>,
    pub seed: u64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            hidden: vec![64, 64],
            lr: 5e-5,
            gamma: 0.99,
            batch_size: 8192,
            buffer_capacity: 1_000_000,
            total_steps: 200_000,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_fraction: 0.3,
            target_sync: 1000,
            learning_starts: 8192,
            train_every: 1,
            max_grad_norm: Some(10.0),
            seed: 0,
        }
    }
}

pub fn epsilon_at(config: &DqnConfig, step: u64) -> f64 {
    let span = (config.eps_fraction * config.total_steps as f64).max(1.0);
    let frac = (step as f64 / span).min(1.0);
    config.eps_start + frac * (config.eps_end - config.eps_start)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DqnLossStats {
    pub loss: f64,
    pub mean_abs_td: f64,
}

/// Mean squared double-DQN error over `batch`. Overwrites `grads` with the
/// gradient with respect to the moving net's parameters; targets are
/// treated as constants.
pub fn dqn_loss(
    moving: &Mlp,
    target: &Mlp,
    batch: &[&Transition],
    gamma: f64,
    grads: &mut [f64],
) -> Result<DqnLossStats, RlError> {
    grads.iter_mut().for_each(|g| *g = 0.0);
    let n = batch.len() as f64;
    let (mut loss, mut abs_td) = (0.0, 0.0);
    let mut g_out = vec![0.0; moving.output_dim()];
    for t in batch {
        if t.a >= moving.output_dim() {
            return Err(RlError::BadAction {
                action: t.a,
                count: moving.output_dim(),
            });
        }
        let y = if t.done {
            t.r
        } else {
            let a_star = argmax(&moving.forward(&t.s_next)?);
            t.r + gamma * target.forward(&t.s_next)?[a_star]
        };
        let cache = moving.forward_cached(&t.s)?;
        let td = y - cache.output()[t.a];
        loss += td * td / n;
        abs_td += td.abs() / n;
        g_out.iter_mut().for_each(|g| *g = 0.0);
        g_out[t.a] = -2.0 * td / n;
        moving.backward(&cache, &g_out, grads);
    }
    Ok(DqnLossStats {
        loss,
        mean_abs_td: abs_td,
    })
}

pub struct DqnOutcome {
    pub net: Mlp,
    pub optimizer: Adam,
    pub rng: ChaCha8Rng,
    pub log: Vec<TrainLogRow>,
    /// Mean absolute TD error of every gradient step.
    pub td_errors: Vec<f64>,
    pub steps: u64,
}

impl DqnOutcome {
    pub fn checkpoint(&self, metadata: &str) -> Checkpoint {
        Checkpoint {
            kind: TrainerKind::Dqn,
            metadata: metadata.to_string(),
            net: self.net.clone(),
            optimizer: self.optimizer.clone(),
            rng: self.rng.clone(),
        }
    }
}

pub fn dqn_train(env: &mut dyn Environment, config: &DqnConfig) -> Result<DqnOutcome, RlError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sizes = vec![env.obs_dim()];
    sizes.extend(&config.hidden);
    sizes.push(env.action_count());
    let mut net = Mlp::new(&sizes, &mut rng);
    let mut target = net.clone();
    let mut adam = Adam::new(net.param_count(), config.lr);
    let mut grads = vec![0.0; net.param_count()];
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut log = Vec::new();
    let mut td_errors = Vec::new();
    let mut updates = 0u64;
    let mut obs = env.reset().ok_or(RlError::EnvExhausted)?;
    let (mut ep_reward, mut ep_td, mut ep_updates) = (0.0, 0.0, 0u64);
    let mut steps = 0;
    while steps < config.total_steps {
        let eps = epsilon_at(config, steps);
        let a = if rng.gen::<f64>() < eps {
            rng.gen_range(0..env.action_count())
        } else {
            argmax(&net.forward(&obs)?)
        };
        let st = env.step(a);
        steps += 1;
        ep_reward += st.reward;
        let end = st.done || st.truncated;
        buffer.push(Transition {
            s: std::mem::take(&mut obs),
            a,
            r: st.reward,
            s_next: st.obs.clone(),
            done: st.done,
        });
        if buffer.len() >= config.learning_starts.max(1) && steps % config.train_every.max(1) == 0 {
            let batch = buffer.sample(&mut rng, config.batch_size);
            let stats = dqn_loss(&net, &target, &batch, config.gamma, &mut grads)?;
            if !stats.loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(RlError::Diverged {
                    step: steps,
                    what: format!("loss {}", stats.loss),
                    checkpoint: Box::new(Checkpoint {
                        kind: TrainerKind::Dqn,
                        metadata: String::new(),
                        net,
                        optimizer: adam,
                        rng,
                    }),
                });
            }
            if let Some(m) = config.max_grad_norm {
                clip_grad_norm(&mut grads, m);
            }
            adam.step(net.params_mut(), &grads);
            updates += 1;
            if updates % config.target_sync.max(1) == 0 {
                target = net.clone();
            }
            td_errors.push(stats.mean_abs_td);
            ep_td += stats.mean_abs_td;
            ep_updates += 1;
        }
        if end {
            log.push(TrainLogRow {
                episode: log.len() as u64,
                steps,
                reward: ep_reward,
                diagnostic: (ep_updates > 0).then(|| ep_td / ep_updates as f64),
                schedule: Some(eps),
            });
            (ep_reward, ep_td, ep_updates) = (0.0, 0.0, 0);
            match env.reset() {
                Some(o) => obs = o,
                None => break,
            }
        } else {
            obs = st.obs;
        }
    }
    Ok(DqnOutcome {
        net,
        optimizer: adam,
        rng,
        log,
        td_errors,
        steps,
    })
}
