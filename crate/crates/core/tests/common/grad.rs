//! Finite-difference gradient oracle for the DQN and PPO losses.

use hftmm_core::rl::{dqn_loss, log_softmax, ppo_loss, Mlp, PpoSample, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// `||a - b|| / max(||a||, ||b||)`, or 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Central differences of `loss` in every parameter of `net`.
pub fn numeric_gradient(net: &Mlp, loss: impl Fn(&Mlp) -> f64) -> Vec<f64> {
    let mut probe = net.clone();
    (0..net.param_count())
        .map(|i| {
            let p = net.params()[i];
            probe.params_mut()[i] = p + FD_STEP;
            let up = loss(&probe);
            probe.params_mut()[i] = p - FD_STEP;
            let down = loss(&probe);
            probe.params_mut()[i] = p;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

fn random_sizes(rng: &mut ChaCha8Rng, outputs: usize) -> Vec<usize> {
    let mut sizes = vec![rng.gen_range(2..6)];
    for _ in 0..rng.gen_range(1..3) {
        sizes.push(rng.gen_range(3..9));
    }
    sizes.push(outputs);
    sizes
}

/// Net with every parameter uniform in [-1, 1], so outputs and hidden
/// activations are far from the small-init regime.
fn random_net(rng: &mut ChaCha8Rng, sizes: &[usize]) -> Mlp {
    let n = Mlp::zeros(sizes).param_count();
    Mlp::from_parts(sizes.to_vec(), random_vec(rng, n)).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Relative error of the double-DQN loss gradient on a random net and batch.
pub fn dqn_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_actions = rng.gen_range(2..6);
    let sizes = random_sizes(&mut rng, n_actions);
    let moving = random_net(&mut rng, &sizes);
    let target = random_net(&mut rng, &sizes);
    let batch: Vec<Transition> = (0..rng.gen_range(1..9))
        .map(|_| Transition {
            s: random_vec(&mut rng, sizes[0]),
            a: rng.gen_range(0..n_actions),
            r: rng.gen_range(-2.0..2.0),
            s_next: random_vec(&mut rng, sizes[0]),
            done: rng.gen_bool(0.3),
        })
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let gamma = 0.9;
    let mut g = vec![0.0; moving.param_count()];
    dqn_loss(&moving, &target, &refs, gamma, &mut g).unwrap();
    let num = numeric_gradient(&moving, |m| {
        let mut scratch = vec![0.0; m.param_count()];
        dqn_loss(m, &target, &refs, gamma, &mut scratch).unwrap().loss
    });
    relative_error(&g, &num)
}

/// Which terms of the PPO loss to include.
#[derive(Clone, Copy, Debug)]
pub struct PpoTerms {
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub policy: bool,
}

/// Relative error of the PPO loss gradient. Old log-probabilities are set
/// so ratios lie away from the clip boundaries.
pub fn ppo_gradient_error(seed: u64, terms: PpoTerms) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_actions = rng.gen_range(2..7);
    let sizes = random_sizes(&mut rng, n_actions + 1);
    let net = random_net(&mut rng, &sizes);
    let clip = 0.2;
    let batch: Vec<PpoSample> = (0..rng.gen_range(1..9))
        .map(|_| {
            let s = random_vec(&mut rng, sizes[0]);
            let a = rng.gen_range(0..n_actions);
            let out = net.forward(&s).unwrap();
            let logp = log_softmax(&out[..n_actions])[a];
            // Ratio drawn from bands that avoid 1 - clip and 1 + clip.
            let ratio = match rng.gen_range(0..3) {
                0 => rng.gen_range(0.5..0.78),
                1 => rng.gen_range(0.82..1.18),
                _ => rng.gen_range(1.22..1.6),
            };
            PpoSample {
                s,
                a,
                logp_old: logp - f64::ln(ratio),
                adv: if terms.policy { rng.gen_range(-2.0..2.0) } else { 0.0 },
                ret: rng.gen_range(-1.0..1.0),
            }
        })
        .collect();
    let refs: Vec<&PpoSample> = batch.iter().collect();
    let mut g = vec![0.0; net.param_count()];
    ppo_loss(&net, &refs, clip, terms.value_coef, terms.entropy_coef, &mut g).unwrap();
    let num = numeric_gradient(&net, |m| {
        let mut scratch = vec![0.0; m.param_count()];
        ppo_loss(m, &refs, clip, terms.value_coef, terms.entropy_coef, &mut scratch).unwrap().loss
    });
    relative_error(&g, &num)
}
