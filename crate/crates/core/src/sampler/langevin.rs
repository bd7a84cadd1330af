use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ActionInit, ActionValue, NoiseSchedule, SamplerConfig};
use crate::error::{check_len, Error, Result};

/// Regularizer in score normalization.
pub const SCORE_NORM_EPS: f32 = 1e-8;

/// One noise level of a Langevin run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub sigma: f32,
    pub step_size: f64,
}

/// Chain positions after one update, handed to trace observers.
#[derive(Debug)]
pub struct TraceEvent<'a> {
    /// 1-based level index.
    pub level: usize,
    /// 1-based step within the level.
    pub step: usize,
    pub sigma: f32,
    pub actions: ArrayView2<'a, f32>,
}

/// Independent, reproducible random stream for chain `chain` under `seed`.
pub fn chain_rng(seed: u64, chain: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

fn normalize_rows(g: &mut Array2<f32>) {
    for mut row in g.axis_iter_mut(Axis(0)) {
        let norm = row.iter().map(|x| x * x).sum::<f32>().sqrt();
        row.mapv_inplace(|x| x / (norm + SCORE_NORM_EPS));
    }
}

/// Score of the soft policy, `w * dQ/da`, one row per action.
///
/// With `normalize`, the raw gradient is first divided by `|dQ/da| + 1e-8`.
pub fn score<Q: ActionValue + ?Sized>(
    q: &Q,
    states: ArrayView2<f32>,
    actions: ArrayView2<f32>,
    sigma: f32,
    temperature: f32,
    normalize: bool,
) -> Result<Array2<f32>> {
    score_with_order(q, states, actions, sigma, temperature, normalize, false)
}

fn score_with_order<Q: ActionValue + ?Sized>(
    q: &Q,
    states: ArrayView2<f32>,
    actions: ArrayView2<f32>,
    sigma: f32,
    temperature: f32,
    normalize: bool,
    after_temperature: bool,
) -> Result<Array2<f32>> {
    let mut g = q.action_gradients(states, actions, sigma)?;
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!(
            "action gradient at sigma {sigma}"
        )));
    }
    if normalize && !after_temperature {
        normalize_rows(&mut g);
    }
    g *= temperature;
    if normalize && after_temperature {
        normalize_rows(&mut g);
    }
    Ok(g)
}

fn initial_actions(
    init: &ActionInit,
    chains: usize,
    dim: usize,
    rngs: &mut [ChaCha8Rng],
) -> Result<Array2<f32>> {
    let mut a = Array2::zeros((chains, dim));
    match init {
        ActionInit::StdNormal => {
            for (mut row, rng) in a.rows_mut().into_iter().zip(rngs.iter_mut()) {
                row.iter_mut().for_each(|x| *x = StandardNormal.sample(rng));
            }
        }
        ActionInit::Fixed(point) => {
            check_len("fixed initial action", dim, point.len())?;
            for mut row in a.rows_mut() {
                row.iter_mut().zip(point).for_each(|(x, &p)| *x = p);
            }
        }
        &ActionInit::UniformGrid {
            per_side,
            low,
            high,
        } => {
            let expected = u32::try_from(dim)
                .ok()
                .and_then(|d| per_side.checked_pow(d))
                .ok_or_else(|| Error::Config("grid init too large".into()))?;
            check_len("chains for grid init", expected, chains)?;
            for (k, mut row) in a.rows_mut().into_iter().enumerate() {
                let mut rest = k;
                for x in row.iter_mut() {
                    let i = rest % per_side;
                    rest /= per_side;
                    *x = if per_side == 1 {
                        (low + high) / 2.0
                    } else {
                        crate::env::grid_coord(low, high, per_side, i)
                    };
                }
            }
        }
    }
    Ok(a)
}

/// Runs `steps` Langevin updates at each level in order, chaining the final
/// sample of one level into the next:
///
/// `a <- a + (alpha/2) * score(a, sigma) + sqrt(alpha) * z`, `z ~ N(0, I)`.
///
/// One chain per row of `states`. Chain `k` draws its initial point (if random)
/// and its noise from [`chain_rng`]`(cfg.seed, k)`. The returned actions are
/// clipped to `cfg.clip` if set; intermediate iterates are too when
/// `cfg.clip_iterates` is on.
pub fn run_langevin<Q: ActionValue + ?Sized>(
    q: &Q,
    states: ArrayView2<f32>,
    levels: &[Level],
    steps: usize,
    cfg: &SamplerConfig,
    mut observer: Option<&mut dyn FnMut(&TraceEvent<'_>)>,
) -> Result<Array2<f32>> {
    cfg.validate()?;
    check_len("critic state width", q.state_dim(), states.ncols())?;
    if steps == 0 || levels.is_empty() {
        return Err(Error::Config(
            "Langevin run needs at least one level and one step".into(),
        ));
    }
    let chains = states.nrows();
    let dim = q.action_dim();
    let mut rngs: Vec<ChaCha8Rng> = (0..chains as u64).map(|k| chain_rng(cfg.seed, k)).collect();
    let mut actions = initial_actions(&cfg.init, chains, dim, &mut rngs)?;
    if let Some(bounds) = &cfg.clip {
        check_len("clip box width", dim, bounds.dim())?;
    }
    let per_step_clip = cfg.clip.as_ref().filter(|_| cfg.clip_iterates);

    for (li, level) in levels.iter().enumerate() {
        let half_step = (level.step_size / 2.0) as f32;
        let noise_scale = level.step_size.sqrt() as f32;
        for t in 1..=steps {
            let s = score_with_order(
                q,
                states,
                actions.view(),
                level.sigma,
                cfg.temperature,
                cfg.normalize_score,
                cfg.normalize_after_temperature,
            )?;
            check_len("score width", dim, s.ncols())?;
            for ((mut a, s), rng) in actions
                .rows_mut()
                .into_iter()
                .zip(s.rows())
                .zip(rngs.iter_mut())
            {
                for (x, &g) in a.iter_mut().zip(s.iter()) {
                    let z: f32 = StandardNormal.sample(rng);
                    *x += half_step * g + noise_scale * z;
                }
                if let Some(bounds) = per_step_clip {
                    bounds.clip(a.as_slice_mut().expect("standard layout"));
                }
            }
            if let Some(obs) = observer.as_deref_mut() {
                obs(&TraceEvent {
                    level: li + 1,
                    step: t,
                    sigma: level.sigma,
                    actions: actions.view(),
                });
            }
        }
    }

    if let Some(bounds) = &cfg.clip {
        for mut row in actions.rows_mut() {
            bounds.clip(row.as_slice_mut().expect("standard layout"));
        }
    }
    Ok(actions)
}

/// Plain Langevin soft policy: `steps` updates with step size `cfg.epsilon`,
/// evaluating the critic at noise level `sigma` (ignored by unconditioned critics).
pub fn langevin_policy<Q: ActionValue + ?Sized>(
    q: &Q,
    states: ArrayView2<f32>,
    cfg: &SamplerConfig,
    steps: usize,
    sigma: f32,
) -> Result<Array2<f32>> {
    let level = Level {
        sigma,
        step_size: cfg.epsilon,
    };
    run_langevin(q, states, &[level], steps, cfg, None)
}

/// Annealed Langevin soft policy over `schedule`, `T * L` score evaluations per chain.
pub fn annealed_langevin_policy<Q: ActionValue + ?Sized>(
    q: &Q,
    states: ArrayView2<f32>,
    schedule: &NoiseSchedule,
    cfg: &SamplerConfig,
) -> Result<Array2<f32>> {
    run_langevin(
        q,
        states,
        &schedule_levels(schedule),
        schedule.steps_per_level(),
        cfg,
        None,
    )
}

pub fn schedule_levels(schedule: &NoiseSchedule) -> Vec<Level> {
    schedule
        .sigmas()
        .iter()
        .enumerate()
        .map(|(i, &sigma)| Level {
            sigma: sigma as f32,
            step_size: schedule.step_size(i),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::analytic::QuadraticValue;
    use ndarray::{array, Array2};
    use std::cell::Cell;

    /// `Q(s, a) = g . a`.
    struct Linear(Vec<f32>);

    impl ActionValue for Linear {
        fn state_dim(&self) -> usize {
            1
        }
        fn action_dim(&self) -> usize {
            self.0.len()
        }
        fn action_gradients(
            &self,
            _s: ArrayView2<f32>,
            a: ArrayView2<f32>,
            _sigma: f32,
        ) -> Result<Array2<f32>> {
            Ok(Array2::from_shape_fn(a.dim(), |(_, j)| self.0[j]))
        }
    }

    struct Counting<Q> {
        inner: Q,
        calls: Cell<usize>,
        rows: Cell<usize>,
        sigmas: std::cell::RefCell<Vec<f32>>,
    }

    impl<Q: ActionValue> ActionValue for Counting<Q> {
        fn state_dim(&self) -> usize {
            self.inner.state_dim()
        }
        fn action_dim(&self) -> usize {
            self.inner.action_dim()
        }
        fn action_gradients(
            &self,
            s: ArrayView2<f32>,
            a: ArrayView2<f32>,
            sigma: f32,
        ) -> Result<Array2<f32>> {
            self.calls.set(self.calls.get() + 1);
            self.rows.set(self.rows.get() + a.nrows());
            self.sigmas.borrow_mut().push(sigma);
            self.inner.action_gradients(s, a, sigma)
        }
    }

    fn zero_states(n: usize) -> Array2<f32> {
        Array2::zeros((n, 1))
    }

    #[test]
    fn score_scales_by_temperature() {
        let q = Linear(vec![0.5, -1.5]);
        let s = score(
            &q,
            zero_states(1).view(),
            array![[0.0f32, 0.0]].view(),
            0.1,
            2.0,
            false,
        )
        .unwrap();
        assert_eq!(s.row(0).to_vec(), vec![1.0, -3.0]);
    }

    #[test]
    fn normalized_score_is_unit_direction_times_temperature() {
        let q = Linear(vec![3.0, 4.0]);
        let s = score(
            &q,
            zero_states(1).view(),
            array![[0.0f32, 0.0]].view(),
            0.1,
            7.0,
            true,
        )
        .unwrap();
        let expected = [7.0 * 3.0 / (5.0 + 1e-8), 7.0 * 4.0 / (5.0 + 1e-8)];
        assert!((s[[0, 0]] - expected[0] as f32).abs() < 1e-6);
        assert!((s[[0, 1]] - expected[1] as f32).abs() < 1e-6);
    }

    #[test]
    fn normalized_score_of_constant_critic_is_zero() {
        let q = Linear(vec![0.0, 0.0]);
        let s = score(
            &q,
            zero_states(1).view(),
            array![[1.0f32, 1.0]].view(),
            0.1,
            500.0,
            true,
        )
        .unwrap();
        assert!(s.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn normalization_after_temperature_drops_w() {
        let q = Linear(vec![3.0, 4.0]);
        let s = score_with_order(
            &q,
            zero_states(1).view(),
            array![[0.0f32, 0.0]].view(),
            0.1,
            50.0,
            true,
            true,
        )
        .unwrap();
        assert!((s[[0, 0]] - 0.6).abs() < 1e-6 && (s[[0, 1]] - 0.8).abs() < 1e-6);
    }

    #[test]
    fn nan_gradient_is_an_error() {
        let q = Linear(vec![f32::NAN, 0.0]);
        let err = score(
            &q,
            zero_states(1).view(),
            array![[0.0f32, 0.0]].view(),
            0.1,
            1.0,
            false,
        );
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn zero_score_step_is_pure_noise() {
        let q = Linear(vec![0.0, 0.0]);
        let mut cfg = SamplerConfig::new(1.0, 1e-4);
        cfg.init = ActionInit::Fixed(vec![0.0, 0.0]);
        cfg.seed = 42;
        let a = langevin_policy(&q, zero_states(1).view(), &cfg, 1, 0.001).unwrap();
        let mut rng = chain_rng(42, 0);
        let z: [f32; 2] = [
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        ];
        // sqrt(1e-4) = 0.01, so z = (1, 0) would land on (0.01, 0).
        assert_eq!(a.row(0).to_vec(), vec![0.01 * z[0], 0.01 * z[1]]);
    }

    #[test]
    fn drift_only_step_follows_half_step_size() {
        let q = Linear(vec![2.0]);
        let mut cfg = SamplerConfig::new(3.0, 1e-4);
        cfg.init = ActionInit::Fixed(vec![0.0]);
        let with_drift =
            langevin_policy(&q, zero_states(1).view(), &cfg, 1, 0.001).unwrap()[[0, 0]];
        let noise_only = langevin_policy(&Linear(vec![0.0]), zero_states(1).view(), &cfg, 1, 0.001)
            .unwrap()[[0, 0]];
        assert!(((with_drift - noise_only) as f64 - 0.5e-4 * 6.0).abs() < 1e-7);
    }

    #[test]
    fn single_level_annealing_equals_plain_langevin() {
        let q = QuadraticValue {
            dim: 2,
            variance: 0.5,
        };
        let mut cfg = SamplerConfig::new(1.0, 1e-3);
        cfg.normalize_score = true;
        cfg.seed = 9;
        let schedule = NoiseSchedule::new(vec![0.001], 20, 1e-3).unwrap();
        let annealed =
            annealed_langevin_policy(&q, zero_states(16).view(), &schedule, &cfg).unwrap();
        let plain = langevin_policy(&q, zero_states(16).view(), &cfg, 20, 0.001).unwrap();
        assert_eq!(annealed, plain);
    }

    #[test]
    fn evaluation_count_is_steps_times_levels() {
        let q = Counting {
            inner: QuadraticValue {
                dim: 2,
                variance: 1.0,
            },
            calls: Cell::new(0),
            rows: Cell::new(0),
            sigmas: Default::default(),
        };
        let cfg = SamplerConfig::new(1.0, 1e-4);
        let schedule = NoiseSchedule::geometric(0.1, 0.001, 10, 2, 1e-4).unwrap();
        annealed_langevin_policy(&q, zero_states(3).view(), &schedule, &cfg).unwrap();
        assert_eq!(q.calls.get(), 20);
        assert_eq!(q.rows.get(), 60);
        // levels are visited from largest to smallest, T times each
        {
            let sigmas = q.sigmas.borrow();
            for (i, s) in schedule.sigmas().iter().enumerate() {
                assert_eq!(sigmas[2 * i], *s as f32);
                assert_eq!(sigmas[2 * i + 1], *s as f32);
            }
        }

        q.calls.set(0);
        langevin_policy(&q, zero_states(1).view(), &cfg, 20, 0.001).unwrap();
        assert_eq!(q.calls.get(), 20);
    }

    #[test]
    fn same_seed_same_actions_and_chains_are_independent_of_batch() {
        let q = QuadraticValue {
            dim: 2,
            variance: 1.0,
        };
        let mut cfg = SamplerConfig::new(1.0, 1e-2);
        cfg.seed = 5;
        let a = langevin_policy(&q, zero_states(8).view(), &cfg, 10, 0.1).unwrap();
        let b = langevin_policy(&q, zero_states(8).view(), &cfg, 10, 0.1).unwrap();
        assert!(a
            .iter()
            .zip(b.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        let first_four = langevin_policy(&q, zero_states(4).view(), &cfg, 10, 0.1).unwrap();
        assert_eq!(first_four.row(3), a.row(3));
        let other = langevin_policy(&q, zero_states(8).view(), &cfg.with_seed(6), 10, 0.1).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn clipping_applies_to_emitted_action_only() {
        let q = Linear(vec![1.0]);
        let mut cfg = SamplerConfig::new(1.0, 1.0);
        cfg.init = ActionInit::Fixed(vec![0.0]);
        cfg.clip = Some(crate::env::ActionBox::symmetric(1, 0.25));
        let mut seen = Vec::new();
        let mut obs = |e: &TraceEvent<'_>| seen.push(e.actions[[0, 0]]);
        let out = run_langevin(
            &q,
            zero_states(1).view(),
            &[Level {
                sigma: 0.1,
                step_size: 1.0,
            }],
            5,
            &cfg,
            Some(&mut obs),
        )
        .unwrap();
        assert_eq!(seen.len(), 5);
        assert!(seen.iter().any(|x| x.abs() > 0.25), "{seen:?}");
        assert!(out[[0, 0]].abs() <= 0.25);
    }

    #[test]
    fn grid_init_covers_the_box() {
        let q = Linear(vec![0.0, 0.0]);
        let mut cfg = SamplerConfig::new(1.0, 1e-12);
        cfg.init = ActionInit::UniformGrid {
            per_side: 3,
            low: -2.0,
            high: 2.0,
        };
        let mut first = None;
        let mut obs = |e: &TraceEvent<'_>| {
            if first.is_none() {
                first = Some(e.actions.to_owned());
            }
        };
        run_langevin(
            &q,
            zero_states(9).view(),
            &[Level {
                sigma: 0.1,
                step_size: 1e-12,
            }],
            1,
            &cfg,
            Some(&mut obs),
        )
        .unwrap();
        let a = first.unwrap();
        assert!((a[[0, 0]] + 2.0).abs() < 1e-5 && (a[[0, 1]] + 2.0).abs() < 1e-5);
        assert!((a[[1, 0]]).abs() < 1e-5 && (a[[1, 1]] + 2.0).abs() < 1e-5);
        assert!((a[[8, 0]] - 2.0).abs() < 1e-5 && (a[[8, 1]] - 2.0).abs() < 1e-5);
        assert!(run_langevin(
            &q,
            zero_states(8).view(),
            &[Level {
                sigma: 0.1,
                step_size: 1e-3
            }],
            1,
            &cfg,
            None
        )
        .is_err());
    }
}
