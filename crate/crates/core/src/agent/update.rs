use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::buffer::Batch;
use super::config::{SamplerSettings, TrainConfig};
use crate::env::ActionBox;
use crate::error::{check_len, Error, Result};
use crate::nn::{AdamState, ForwardCache, NoiseLevel, ParamSet, QNetwork};
use crate::sampler::{annealed_langevin_policy, langevin_policy, NoiseSchedule, SamplerConfig};

/// Diagnostics of one gradient step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossReport {
    pub td_loss: f32,
    /// Zero for LQL.
    pub smooth_loss: f32,
    /// Mean `Q(s, a, sigma_L)` over the batch, before the step.
    pub mean_q: f32,
    /// L2 norm of the full parameter gradient.
    pub grad_norm: f32,
}

/// What the update rules need besides the networks and the batch.
#[derive(Debug, Clone)]
pub struct UpdateContext {
    pub gamma: f32,
    pub sampler: SamplerSettings,
    pub schedule: NoiseSchedule,
    pub action_box: ActionBox,
}

impl UpdateContext {
    pub fn new(cfg: &TrainConfig, action_box: ActionBox) -> Result<Self> {
        Ok(Self {
            gamma: cfg.gamma,
            sampler: cfg.sampler.clone(),
            schedule: cfg.schedule.build(cfg.sampler.epsilon)?,
            action_box,
        })
    }

    pub fn sampler_config(&self, seed: u64) -> SamplerConfig {
        self.sampler.to_config(seed, &self.action_box)
    }

    fn sigma_min(&self) -> f32 {
        self.schedule.min_sigma() as f32
    }
}

/// Draws actions from the critic's Langevin soft policy.
///
/// Noise-conditioned critics are sampled with the annealed policy over
/// `schedule`; plain critics run `schedule.total_evaluations()` steps of
/// single-level Langevin with the sampler's own step size.
pub fn policy_actions(
    q: &QNetwork,
    states: ArrayView2<f32>,
    schedule: &NoiseSchedule,
    cfg: &SamplerConfig,
) -> Result<Array2<f32>> {
    if q.is_noise_conditioned() {
        annealed_langevin_policy(q, states, schedule, cfg)
    } else {
        langevin_policy(
            q,
            states,
            cfg,
            schedule.total_evaluations(),
            schedule.min_sigma() as f32,
        )
    }
}

/// `r + gamma (1 - done) Q_target(s', a', sigma_L)` with `a'` drawn from the
/// target network's soft policy. Terminal rows skip the sampler entirely.
pub fn td_targets<R: Rng + ?Sized>(
    target: &QNetwork,
    batch: &Batch,
    ctx: &UpdateContext,
    rng: &mut R,
) -> Result<Array1<f32>> {
    // Drawn unconditionally so the stream does not depend on the batch contents.
    let seed: u64 = rng.random();
    let mut y = batch.rewards.clone();
    if ctx.gamma == 0.0 {
        return Ok(y);
    }
    let live: Vec<usize> = (0..batch.len())
        .filter(|&k| batch.dones[k] == 0.0)
        .collect();
    if live.is_empty() {
        return Ok(y);
    }
    let next = batch.next_states.select(Axis(0), &live);
    let a_next = policy_actions(
        target,
        next.view(),
        &ctx.schedule,
        &ctx.sampler_config(seed),
    )?;
    let q_next = target.values(
        next.view(),
        a_next.view(),
        NoiseLevel::Shared(ctx.sigma_min()),
    )?;
    for (&k, q) in live.iter().zip(q_next.iter()) {
        y[k] += ctx.gamma * q;
    }
    Ok(y)
}

/// Squared-error regression of consecutive row blocks of `out` toward
/// `targets`; the loss is the unweighted sum of per-block means. Returns the
/// per-block losses and the parameter gradient.
fn regress(
    q: &QNetwork,
    cache: &ForwardCache,
    out: &Array1<f32>,
    targets: &[ArrayView1<f32>],
) -> Result<(Vec<f32>, ParamSet)> {
    check_len(
        "regression rows",
        out.len(),
        targets.iter().map(|t| t.len()).sum(),
    )?;
    let mut grad_out = Array2::zeros((out.len(), 1));
    let mut losses = Vec::with_capacity(targets.len());
    let mut offset = 0;
    for t in targets {
        let n = t.len();
        let mut loss = 0.0f64;
        for k in 0..n {
            let r = out[offset + k] - t[k];
            loss += (r as f64).powi(2);
            grad_out[[offset + k, 0]] = 2.0 * r / n as f32;
        }
        losses.push((loss / n as f64) as f32);
        offset += n;
    }
    let mut grads = ParamSet::zeros_like(q.mlp());
    q.mlp().backward(cache, grad_out.view(), Some(&mut grads))?;
    Ok((losses, grads))
}

fn apply(
    q: &mut QNetwork,
    opt: &mut AdamState,
    grads: &ParamSet,
    report: LossReport,
) -> Result<LossReport> {
    let finite = report.td_loss.is_finite()
        && report.smooth_loss.is_finite()
        && report.grad_norm.is_finite();
    if !finite {
        return Err(Error::NonFinite(format!(
            "critic update (td_loss={}, smooth_loss={}, mean_q={}, grad_norm={})",
            report.td_loss, report.smooth_loss, report.mean_q, report.grad_norm
        )));
    }
    opt.step(q.mlp_mut(), grads)?;
    Ok(report)
}

/// One Adam step on the TD loss `mean (Q(s, a) - y)^2`.
pub fn lql_update<R: Rng + ?Sized>(
    q: &mut QNetwork,
    opt: &mut AdamState,
    target: &QNetwork,
    batch: &Batch,
    ctx: &UpdateContext,
    rng: &mut R,
) -> Result<LossReport> {
    let y = td_targets(target, batch, ctx, rng)?;
    let x = q.assemble_inputs(
        batch.states.view(),
        batch.actions.view(),
        NoiseLevel::Shared(ctx.sigma_min()),
    )?;
    let (out, cache) = q.forward_cached(x.view())?;
    let (losses, grads) = regress(q, &cache, &out, &[y.view()])?;
    let report = LossReport {
        td_loss: losses[0],
        smooth_loss: 0.0,
        mean_q: out.mean().unwrap_or(0.0),
        grad_norm: grads.l2_norm(),
    };
    apply(q, opt, &grads, report)
}

/// Per row: a level `i ~ U{1..L}` and `a + sigma_i xi`.
pub fn perturb_actions<R: Rng + ?Sized>(
    actions: ArrayView2<f32>,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> (Array2<f32>, Vec<f32>) {
    let mut noisy = actions.to_owned();
    let mut sigmas = Vec::with_capacity(actions.nrows());
    for mut row in noisy.rows_mut() {
        let sigma = schedule.sigmas()[rng.random_range(0..schedule.levels())] as f32;
        for a in row.iter_mut() {
            let xi: f32 = rng.sample(StandardNormal);
            *a += sigma * xi;
        }
        sigmas.push(sigma);
    }
    (noisy, sigmas)
}

/// One Adam step on TD at `sigma_L` plus the smoothing residual
/// `(Q(s, a~, sigma_i) - sg(Q(s, a, sigma_L)))^2`, both batch means, summed.
pub fn nclql_update<R: Rng + ?Sized>(
    q: &mut QNetwork,
    opt: &mut AdamState,
    target: &QNetwork,
    batch: &Batch,
    ctx: &UpdateContext,
    rng: &mut R,
) -> Result<LossReport> {
    if !q.is_noise_conditioned() {
        return Err(Error::Config(
            "the noise-smoothing update needs a noise-conditioned critic".into(),
        ));
    }
    let y = td_targets(target, batch, ctx, rng)?;
    let (noisy, sigmas) = perturb_actions(batch.actions.view(), &ctx.schedule, rng);
    let clean_x = q.assemble_inputs(
        batch.states.view(),
        batch.actions.view(),
        NoiseLevel::Shared(ctx.sigma_min()),
    )?;
    let noisy_x = q.assemble_inputs(
        batch.states.view(),
        noisy.view(),
        NoiseLevel::PerRow(&sigmas),
    )?;
    let x = concatenate(Axis(0), &[clean_x.view(), noisy_x.view()]).expect("equal widths");

    // The clean rows double as smoothing targets; copying them out detaches them.
    let n = batch.len();
    let (out, cache) = q.forward_cached(x.view())?;
    let clean = out.slice(s![..n]).to_owned();
    let (losses, grads) = regress(q, &cache, &out, &[y.view(), clean.view()])?;
    let report = LossReport {
        td_loss: losses[0],
        smooth_loss: losses[1],
        mean_q: out.slice(s![..n]).mean().unwrap_or(0.0),
        grad_norm: grads.l2_norm(),
    };
    apply(q, opt, &grads, report)
}

/// The smoothing half of the noise-conditioned update on its own: regresses
/// `Q(s, a + sigma_i xi, sigma_i)` toward fixed `clean` values.
pub fn smoothing_update<R: Rng + ?Sized>(
    q: &mut QNetwork,
    opt: &mut AdamState,
    states: ArrayView2<f32>,
    actions: ArrayView2<f32>,
    clean: ArrayView1<f32>,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<LossReport> {
    check_len("clean targets", actions.nrows(), clean.len())?;
    let (noisy, sigmas) = perturb_actions(actions, schedule, rng);
    let x = q.assemble_inputs(states, noisy.view(), NoiseLevel::PerRow(&sigmas))?;
    let (out, cache) = q.forward_cached(x.view())?;
    let (losses, grads) = regress(q, &cache, &out, &[clean])?;
    let report = LossReport {
        td_loss: 0.0,
        smooth_loss: losses[0],
        mean_q: out.mean().unwrap_or(0.0),
        grad_norm: grads.l2_norm(),
    };
    apply(q, opt, &grads, report)
}
