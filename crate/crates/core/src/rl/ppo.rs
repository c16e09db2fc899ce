//! Clipped-surrogate PPO with a shared policy/value network: the first
//! `n_actions` outputs are logits, the last one is the state value.

use super::{clip_grad_norm, Adam, Checkpoint, Environment, Mlp, RlError, TrainLogRow, TrainerKind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Environment steps collected per update.
    pub rollout_steps: usize,
    pub minibatch_size: usize,
    pub updates: u64,
    pub normalize_advantages: bool,
    pub max_grad_norm: Option<f64>,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            hidden: vec![64, 64],
            lr: 1e-4,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            entropy_coef: 0.01,
            value_coef: 0.5,
            rollout_steps: 2048,
            minibatch_size: 256,
            updates: 100,
            normalize_advantages: true,
            max_grad_norm: Some(0.5),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PpoSample {
    pub s: Vec<f64>,
    pub a: usize,
    pub logp_old: f64,
    pub adv: f64,
    pub ret: f64,
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PpoLossStats {
    /// Total minimised loss: `-surrogate + c_v * value_loss - c_e * entropy`.
    pub loss: f64,
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Share of samples whose ratio lies outside `[1 - clip, 1 + clip]`.
    pub clip_fraction: f64,
    /// Samples whose policy gradient is zeroed by the clipped branch.
    pub clipped_active: usize,
}

/// Loss over `batch` with its gradient written into `grads`.
pub fn ppo_loss(
    net: &Mlp,
    batch: &[&PpoSample],
    clip: f64,
    value_coef: f64,
    entropy_coef: f64,
    grads: &mut [f64],
) -> Result<PpoLossStats, RlError> {
    grads.iter_mut().for_each(|g| *g = 0.0);
    let n_actions = net.output_dim() - 1;
    let n = batch.len() as f64;
    let mut st = PpoLossStats::default();
    let mut outside = 0usize;
    let mut g_out = vec![0.0; net.output_dim()];
    for s in batch {
        if s.a >= n_actions {
            return Err(RlError::BadAction {
                action: s.a,
                count: n_actions,
            });
        }
        let cache = net.forward_cached(&s.s)?;
        let out = cache.output();
        let logp = log_softmax(&out[..n_actions]);
        let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let ratio = (logp[s.a] - s.logp_old).exp();
        if !ratio.is_finite() {
            return Err(RlError::NonFinite(format!("ratio {ratio}")));
        }
        let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
        let (u, c) = (ratio * s.adv, clipped * s.adv);
        st.surrogate += u.min(c) / n;
        if (ratio - 1.0).abs() > clip {
            outside += 1;
        }
        // The clipped branch is the minimum and constant in the parameters.
        let active = c < u;
        if active {
            st.clipped_active += 1;
        }
        let entropy: f64 = -probs.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();
        st.entropy += entropy / n;
        let v = out[n_actions];
        st.value_loss += (v - s.ret).powi(2) / n;

        let d_ratio = if active { 0.0 } else { -s.adv / n };
        for k in 0..n_actions {
            let ind = if k == s.a { 1.0 } else { 0.0 };
            let d_pol = d_ratio * ratio * (ind - probs[k]);
            let d_ent = entropy_coef / n * probs[k] * (logp[k] + entropy);
            g_out[k] = d_pol + d_ent;
        }
        g_out[n_actions] = value_coef * 2.0 * (v - s.ret) / n;
        net.backward(&cache, &g_out, grads);
    }
    st.clip_fraction = outside as f64 / n;
    st.loss = -st.surrogate + value_coef * st.value_loss - entropy_coef * st.entropy;
    Ok(st)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PpoUpdateStats {
    pub entropy: f64,
    pub clip_fraction: f64,
    pub value_loss: f64,
}

/// Runs `config.epochs` passes of shuffled minibatch steps over `batch`.
pub fn ppo_update(
    net: &mut Mlp,
    adam: &mut Adam,
    batch: &[PpoSample],
    config: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PpoUpdateStats, RlError> {
    let mut grads = vec![0.0; net.param_count()];
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut stats = PpoUpdateStats::default();
    let mut k = 0.0;
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.minibatch_size.max(1)) {
            let mb: Vec<&PpoSample> = chunk.iter().map(|&i| &batch[i]).collect();
            let s = ppo_loss(net, &mb, config.clip, config.value_coef, config.entropy_coef, &mut grads)?;
            if !s.loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(RlError::NonFinite(format!("loss {}", s.loss)));
            }
            if let Some(m) = config.max_grad_norm {
                clip_grad_norm(&mut grads, m);
            }
            adam.step(net.params_mut(), &grads);
            stats.entropy += s.entropy;
            stats.clip_fraction += s.clip_fraction;
            stats.value_loss += s.value_loss;
            k += 1.0;
        }
    }
    if k > 0.0 {
        stats.entropy /= k;
        stats.clip_fraction /= k;
        stats.value_loss /= k;
    }
    Ok(stats)
}

/// Per-step input to the advantage recursion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaeStep {
    pub reward: f64,
    pub value: f64,
    /// Value of the state reached; ignored when `done`.
    pub next_value: f64,
    pub done: bool,
    /// Last step of its trajectory segment (terminal, truncated or end of
    /// rollout).
    pub end: bool,
}

/// Generalised advantage estimates and return targets (`adv + value`).
pub fn gae_advantages(steps: &[GaeStep], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let mut adv = vec![0.0; steps.len()];
    let mut next_adv = 0.0;
    for (t, s) in steps.iter().enumerate().rev() {
        let boot = if s.done { 0.0 } else { gamma * s.next_value };
        let delta = s.reward + boot - s.value;
        let carry = if s.end { 0.0 } else { gamma * lambda * next_adv };
        adv[t] = delta + carry;
        next_adv = adv[t];
    }
    let ret = adv.iter().zip(steps).map(|(a, s)| a + s.value).collect();
    (adv, ret)
}

fn sample_action(logits: &[f64], rng: &mut ChaCha8Rng) -> (usize, f64) {
    let logp = log_softmax(logits);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, l) in logp.iter().enumerate() {
        acc += l.exp();
        if u < acc {
            return (i, *l);
        }
    }
    let last = logp.len() - 1;
    (last, logp[last])
}

pub struct PpoOutcome {
    pub net: Mlp,
    pub optimizer: Adam,
    pub rng: ChaCha8Rng,
    pub log: Vec<TrainLogRow>,
    pub updates: Vec<PpoUpdateStats>,
    pub steps: u64,
}

impl PpoOutcome {
    pub fn checkpoint(&self, metadata: &str) -> Checkpoint {
        Checkpoint {
            kind: TrainerKind::Ppo,
            metadata: metadata.to_string(),
            net: self.net.clone(),
            optimizer: self.optimizer.clone(),
            rng: self.rng.clone(),
        }
    }
}

pub fn ppo_train(env: &mut dyn Environment, config: &PpoConfig) -> Result<PpoOutcome, RlError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_actions = env.action_count();
    let mut sizes = vec![env.obs_dim()];
    sizes.extend(&config.hidden);
    sizes.push(n_actions + 1);
    let mut net = Mlp::new(&sizes, &mut rng);
    let mut adam = Adam::new(net.param_count(), config.lr);
    let mut log = Vec::new();
    let mut updates = Vec::new();
    let mut steps = 0u64;
    let mut obs = env.reset().ok_or(RlError::EnvExhausted)?;
    let mut ep_reward = 0.0;
    let mut last = PpoUpdateStats::default();
    let mut exhausted = false;
    for _ in 0..config.updates {
        let mut samples = Vec::with_capacity(config.rollout_steps);
        let mut gae = Vec::with_capacity(config.rollout_steps);
        for _ in 0..config.rollout_steps {
            let out = net.forward(&obs)?;
            let (a, logp) = sample_action(&out[..n_actions], &mut rng);
            let st = env.step(a);
            steps += 1;
            ep_reward += st.reward;
            let end = st.done || st.truncated;
            let next_value = if st.truncated && !st.done {
                net.forward(&st.obs)?[n_actions]
            } else {
                0.0
            };
            gae.push(GaeStep {
                reward: st.reward,
                value: out[n_actions],
                next_value,
                done: st.done,
                end,
            });
            samples.push(PpoSample {
                s: std::mem::take(&mut obs),
                a,
                logp_old: logp,
                adv: 0.0,
                ret: 0.0,
            });
            if end {
                log.push(TrainLogRow {
                    episode: log.len() as u64,
                    steps,
                    reward: ep_reward,
                    diagnostic: Some(last.entropy),
                    schedule: Some(last.clip_fraction),
                });
                ep_reward = 0.0;
                match env.reset() {
                    Some(o) => obs = o,
                    None => {
                        exhausted = true;
                        break;
                    }
                }
            } else {
                obs = st.obs;
            }
        }
        if gae.is_empty() {
            break;
        }
        // Within a segment the next value is the following step's value.
        for t in 0..gae.len() {
            if !gae[t].end {
                gae[t].next_value = match gae.get(t + 1) {
                    Some(n) => n.value,
                    None => net.forward(&obs)?[n_actions],
                };
            }
        }
        if let Some(l) = gae.last_mut() {
            l.end = true;
        }
        let (adv, ret) = gae_advantages(&gae, config.gamma, config.gae_lambda);
        let (mean, sd) = if config.normalize_advantages && adv.len() > 1 {
            let m = adv.iter().sum::<f64>() / adv.len() as f64;
            let v = adv.iter().map(|a| (a - m).powi(2)).sum::<f64>() / adv.len() as f64;
            (m, v.sqrt() + 1e-8)
        } else {
            (0.0, 1.0)
        };
        for ((s, a), r) in samples.iter_mut().zip(&adv).zip(&ret) {
            s.adv = (a - mean) / sd;
            s.ret = *r;
        }
        let before = (net.clone(), adam.clone(), rng.clone());
        last = match ppo_update(&mut net, &mut adam, &samples, config, &mut rng) {
            Ok(s) => s,
            Err(RlError::NonFinite(what)) => {
                return Err(RlError::Diverged {
                    step: steps,
                    what,
                    checkpoint: Box::new(Checkpoint {
                        kind: TrainerKind::Ppo,
                        metadata: String::new(),
                        net: before.0,
                        optimizer: before.1,
                        rng: before.2,
                    }),
                })
            }
            Err(e) => return Err(e),
        };
        updates.push(last);
        if exhausted {
            break;
        }
    }
    Ok(PpoOutcome {
        net,
        optimizer: adam,
        rng,
        log,
        updates,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_gae(steps: &[GaeStep], gamma: f64, lambda: f64) -> Vec<f64> {
        let delta: Vec<f64> = steps
            .iter()
            .map(|s| s.reward + if s.done { 0.0 } else { gamma * s.next_value } - s.value)
            .collect();
        (0..steps.len())
            .map(|t| {
                let mut sum = 0.0;
                let mut w = 1.0;
                for k in t..steps.len() {
                    sum += w * delta[k];
                    if steps[k].end {
                        break;
                    }
                    w *= gamma * lambda;
                }
                sum
            })
            .collect()
    }

    fn fixture() -> Vec<GaeStep> {
        let r = [1.0, -0.5, 2.0, 0.25, 3.0];
        let v = [0.3, 0.1, -0.2, 0.7, 0.4];
        (0..5)
            .map(|t| GaeStep {
                reward: r[t],
                value: v[t],
                next_value: if t + 1 < 5 { v[t + 1] } else { 0.9 },
                done: t == 2,
                end: t == 2 || t == 4,
            })
            .collect()
    }

    #[test]
    fn gae_matches_brute_force() {
        let s = fixture();
        for (g, l) in [(0.99, 0.95), (0.9, 0.5), (1.0, 1.0)] {
            let (adv, ret) = gae_advantages(&s, g, l);
            let want = brute_gae(&s, g, l);
            for t in 0..5 {
                assert!((adv[t] - want[t]).abs() < 1e-12);
                assert!((ret[t] - adv[t] - s[t].value).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gae_lambda_zero_is_td_residual() {
        let s = fixture();
        let (adv, _) = gae_advantages(&s, 0.9, 0.0);
        for t in 0..5 {
            let boot = if s[t].done { 0.0 } else { 0.9 * s[t].next_value };
            assert_eq!(adv[t], s[t].reward + boot - s[t].value);
        }
    }

    #[test]
    fn gae_zero_inputs() {
        let s = vec![
            GaeStep {
                reward: 0.0,
                value: 0.0,
                next_value: 0.0,
                done: false,
                end: false,
            };
            4
        ];
        assert_eq!(gae_advantages(&s, 0.99, 0.95).0, vec![0.0; 4]);
    }

    #[test]
    fn gae_lambda_one_is_return_minus_value() {
        let s: Vec<GaeStep> = fixture()[..3].to_vec();
        let (adv, _) = gae_advantages(&s, 0.9, 1.0);
        let g0 = 1.0 + 0.9 * (-0.5) + 0.81 * 2.0;
        assert!((adv[0] - (g0 - 0.3)).abs() < 1e-12);
    }

    fn small_batch(net: &Mlp, rng: &mut ChaCha8Rng, adv: impl Fn(usize) -> f64) -> Vec<PpoSample> {
        (0..6)
            .map(|i| {
                let s: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let out = net.forward(&s).unwrap();
                let a = i % 4;
                PpoSample {
                    logp_old: log_softmax(&out[..4])[a],
                    s,
                    a,
                    adv: adv(i),
                    ret: 0.5,
                }
            })
            .collect()
    }

    #[test]
    fn first_epoch_ratio_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::new(&[3, 8, 5], &mut rng);
        let batch = small_batch(&net, &mut rng, |i| i as f64 - 2.0);
        let refs: Vec<&PpoSample> = batch.iter().collect();
        let mut g = vec![0.0; net.param_count()];
        let s = ppo_loss(&net, &refs, 0.2, 0.0, 0.0, &mut g).unwrap();
        let mean_adv = batch.iter().map(|b| b.adv).sum::<f64>() / 6.0;
        assert!((s.surrogate - mean_adv).abs() < 1e-12);
        assert_eq!(s.clip_fraction, 0.0);
    }

    #[test]
    fn zero_advantage_zero_policy_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[3, 8, 5], &mut rng);
        let batch = small_batch(&net, &mut rng, |_| 0.0);
        let refs: Vec<&PpoSample> = batch.iter().collect();
        let mut g = vec![0.0; net.param_count()];
        ppo_loss(&net, &refs, 0.2, 0.0, 0.0, &mut g).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn log_softmax_normalises() {
        let l = log_softmax(&[1000.0, 1000.0, -1000.0]);
        let total: f64 = l.iter().map(|x| x.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((l[0] - 0.5f64.ln()).abs() < 1e-12);
    }
}
