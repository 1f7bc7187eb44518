//! Approximate best-response oracles and payoff-entry estimation.
//!
//! The generator oracle trains against one discriminator drawn from the
//! opponent mixture per iteration; the discriminator oracle draws a
//! generator independently for every fake sample in its minibatch.

use ndarray::{Array2, ArrayView2};
use rand::distr::Distribution;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{noise, DataSource, Prng};
use crate::error::{Error, Result};
use crate::meta_game::MixedStrategy;
use crate::neural::{
    d_loss, g_loss_ewc, g_loss_saturating, AdamConfig, AdamState, Arch, EwcState, LossGrad, Mlp,
    NetworkSnapshot, Role, SnapshotIds,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Training iterations per oracle call.
    pub iterations: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Batches averaged per payoff entry.
    pub payoff_batches: usize,
    pub seed: u64,
    /// Continue each best response from a stored strategy of the same
    /// player (the double-oracle loop picks the one that does best against
    /// the current opponent mixture) instead of a fresh random
    /// initialization. The optimizer state starts fresh either way.
    pub warm_start: bool,
    pub generator_arch: Arch,
    pub discriminator_arch: Arch,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            batch_size: 64,
            adam: AdamConfig::default(),
            payoff_batches: 16,
            seed: 0,
            warm_start: false,
            generator_arch: Arch::generator(2, 2),
            discriminator_arch: Arch::discriminator(2),
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("oracle iterations must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.payoff_batches == 0 {
            return Err(Error::Config("payoff_batches must be >= 1".into()));
        }
        self.generator_arch.validate()?;
        self.discriminator_arch.validate()?;
        if self.generator_arch.output_dim() != self.discriminator_arch.input_dim() {
            return Err(Error::Config(format!(
                "generator emits {} dims, discriminator reads {}",
                self.generator_arch.output_dim(),
                self.discriminator_arch.input_dim()
            )));
        }
        if self.discriminator_arch.output_dim() != 1 {
            return Err(Error::Config("discriminator must have one output".into()));
        }
        Ok(())
    }

    pub fn noise_dim(&self) -> usize {
        self.generator_arch.input_dim()
    }
}

/// A network together with its optimizer state.
#[derive(Debug, Clone)]
pub struct Learner<T: Scalar> {
    pub net: Mlp<T>,
    pub adam: AdamState<T>,
}

impl<T: Scalar> Learner<T> {
    pub fn new(net: Mlp<T>, adam: AdamConfig) -> Self {
        let adam = AdamState::new(net.param_count(), adam);
        Self { net, adam }
    }

    pub fn fresh(arch: &Arch, adam: AdamConfig, rng: &mut Prng) -> Result<Self> {
        Ok(Self::new(Mlp::new(arch.clone(), rng)?, adam))
    }

    pub fn apply(&mut self, grads: &[T]) -> Result<()> {
        let mut params = self.net.params();
        self.adam.step(&mut params, grads)?;
        self.net.set_params(&params)
    }
}

/// What the generator descends.
#[derive(Debug, Clone)]
pub enum GeneratorObjective<T: Scalar> {
    /// `E[log(1 − D(G(z)))]`.
    Saturating,
    /// `E[−log D(G(z))] + λ·w·Σ F_i (π_i − anchor_i)²`.
    Ewc(EwcState<T>),
}

impl<T: Scalar> GeneratorObjective<T> {
    fn eval(&self, d: &Mlp<T>, g: &Mlp<T>, z: ArrayView2<'_, T>) -> Result<LossGrad<T>> {
        match self {
            GeneratorObjective::Saturating => g_loss_saturating(d, g, z),
            GeneratorObjective::Ewc(ewc) => g_loss_ewc(d, g, z, ewc),
        }
    }
}

/// Result of one oracle call.
#[derive(Debug, Clone)]
pub struct OracleOutcome<T: Scalar> {
    pub snapshot: NetworkSnapshot<T>,
    /// The trained network and optimizer, for callers that keep training.
    pub learner: Learner<T>,
    /// Loss against the opponent mixture on a fixed held-out batch, before
    /// and after training.
    pub initial_loss: T,
    pub final_loss: T,
    /// How often each opponent was drawn.
    pub opponent_draws: Vec<usize>,
}

fn check_support<T: Scalar>(
    sigma: &MixedStrategy<T>,
    set: &[NetworkSnapshot<T>],
    role: Role,
) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Empty(format!("{role} support set is empty")));
    }
    if sigma.len() != set.len() {
        return Err(Error::Dimension(format!(
            "mixture over {} strategies but {} {role}s supplied",
            sigma.len(),
            set.len()
        )));
    }
    set.iter().try_for_each(|s| s.expect_role(role))
}

fn restore_all<T: Scalar>(set: &[NetworkSnapshot<T>]) -> Result<Vec<Mlp<T>>> {
    set.iter().map(NetworkSnapshot::restore).collect()
}

const HELD_OUT: usize = 256;

fn mixture_generator_loss<T: Scalar>(
    objective: &GeneratorObjective<T>,
    discs: &[Mlp<T>],
    sigma_d: &MixedStrategy<T>,
    g: &Mlp<T>,
    z: ArrayView2<'_, T>,
) -> Result<T> {
    let mut total = T::zero();
    for (d, p) in discs.iter().zip(sigma_d.probs()) {
        if *p > T::zero() {
            total += *p * objective.eval(d, g, z)?.loss;
        }
    }
    Ok(total)
}

/// Trains `learner` as a generator against `sigma_d` over `discs`.
pub fn train_generator<T: Scalar>(
    learner: &mut Learner<T>,
    objective: &GeneratorObjective<T>,
    sigma_d: &MixedStrategy<T>,
    d_set: &[NetworkSnapshot<T>],
    iterations: usize,
    batch_size: usize,
    rng: &mut Prng,
) -> Result<(T, T, Vec<usize>)> {
    check_support(sigma_d, d_set, Role::Discriminator)?;
    let discs = restore_all(d_set)?;
    let noise_dim = learner.net.arch().input_dim();
    let held_out: Array2<T> = noise(rng, noise_dim, HELD_OUT);
    let initial = mixture_generator_loss(objective, &discs, sigma_d, &learner.net, held_out.view())?;
    let sampler = sigma_d.sampler();
    let mut draws = vec![0usize; discs.len()];
    for _ in 0..iterations {
        let z: Array2<T> = noise(rng, noise_dim, batch_size);
        let j = sampler.sample(rng);
        draws[j] += 1;
        let step = objective.eval(&discs[j], &learner.net, z.view())?;
        learner.apply(&step.grads)?;
    }
    let fin = mixture_generator_loss(objective, &discs, sigma_d, &learner.net, held_out.view())?;
    Ok((initial, fin, draws))
}

/// Samples `n` points from the generator mixture: each row draws its
/// generator from `sigma_g`.
pub fn sample_generator_mixture<T: Scalar>(
    g_set: &[NetworkSnapshot<T>],
    sigma_g: &MixedStrategy<T>,
    n: usize,
    rng: &mut Prng,
) -> Result<Array2<T>> {
    check_support(sigma_g, g_set, Role::Generator)?;
    let gens = restore_all(g_set)?;
    let mut draws = vec![0usize; gens.len()];
    mixture_fakes(&gens, sigma_g, n, rng, &mut draws)
}

/// Fake minibatch where each row comes from a generator drawn from
/// `sigma_g`.
fn mixture_fakes<T: Scalar>(
    gens: &[Mlp<T>],
    sigma_g: &MixedStrategy<T>,
    n: usize,
    rng: &mut Prng,
    draws: &mut [usize],
) -> Result<Array2<T>> {
    let sampler = sigma_g.sampler();
    let noise_dim = gens[0].arch().input_dim();
    let picks: Vec<usize> = (0..n).map(|_| sampler.sample(rng)).collect();
    let z: Array2<T> = noise(rng, noise_dim, n);
    let out_dim = gens[0].arch().output_dim();
    let mut fakes = Array2::zeros((n, out_dim));
    for (k, g) in gens.iter().enumerate() {
        let rows: Vec<usize> = (0..n).filter(|&r| picks[r] == k).collect();
        if rows.is_empty() {
            continue;
        }
        draws[k] += rows.len();
        let zk = z.select(ndarray::Axis(0), &rows);
        let xk = g.forward(zk.view())?;
        for (src, &dst) in rows.iter().enumerate() {
            fakes.row_mut(dst).assign(&xk.row(src));
        }
    }
    Ok(fakes)
}

fn mixture_d_loss<T: Scalar>(
    d: &Mlp<T>,
    real: ArrayView2<'_, T>,
    fake: ArrayView2<'_, T>,
) -> Result<T> {
    Ok(d_loss(d, real, fake)?.loss)
}

/// Trains `learner` as a discriminator against `sigma_g` over `g_set`.
#[allow(clippy::too_many_arguments)]
pub fn train_discriminator<T: Scalar>(
    learner: &mut Learner<T>,
    sigma_g: &MixedStrategy<T>,
    g_set: &[NetworkSnapshot<T>],
    data: &dyn DataSource<T>,
    iterations: usize,
    batch_size: usize,
    rng: &mut Prng,
) -> Result<(T, T, Vec<usize>)> {
    check_support(sigma_g, g_set, Role::Generator)?;
    let gens = restore_all(g_set)?;
    let mut draws = vec![0usize; gens.len()];
    let mut scratch = vec![0usize; gens.len()];
    let held_real = data.sample(rng, HELD_OUT);
    if held_real.nrows() == 0 {
        return Err(Error::Empty("data source returned no samples".into()));
    }
    let held_fake = mixture_fakes(&gens, sigma_g, HELD_OUT, rng, &mut scratch)?;
    let initial = mixture_d_loss(&learner.net, held_real.view(), held_fake.view())?;
    for _ in 0..iterations {
        let real = data.sample(rng, batch_size);
        if real.nrows() == 0 {
            return Err(Error::Empty("data source returned no samples".into()));
        }
        let fake = mixture_fakes(&gens, sigma_g, batch_size, rng, &mut draws)?;
        let step = d_loss(&learner.net, real.view(), fake.view())?;
        learner.apply(&step.grads)?;
    }
    let fin = mixture_d_loss(&learner.net, held_real.view(), held_fake.view())?;
    Ok((initial, fin, draws))
}

fn starting_learner<T: Scalar>(
    arch: &Arch,
    warm: Option<&NetworkSnapshot<T>>,
    cfg: &OracleConfig,
    rng: &mut Prng,
) -> Result<Learner<T>> {
    match warm {
        Some(snap) if cfg.warm_start => {
            let net = snap.restore()?;
            if net.arch() != arch {
                return Err(Error::ArchMismatch("warm start from a different architecture".into()));
            }
            Ok(Learner::new(net, cfg.adam))
        }
        _ => Learner::fresh(arch, cfg.adam, rng),
    }
}

/// Best response of the generator player to `sigma_d`.
///
/// `warm` is the strategy to continue from when `cfg.warm_start` is set;
/// it is ignored otherwise.
pub fn generator_oracle<T: Scalar>(
    sigma_d: &MixedStrategy<T>,
    d_set: &[NetworkSnapshot<T>],
    cfg: &OracleConfig,
    warm: Option<&NetworkSnapshot<T>>,
    rng: &mut Prng,
    ids: &mut SnapshotIds,
) -> Result<OracleOutcome<T>> {
    cfg.validate()?;
    check_support(sigma_d, d_set, Role::Discriminator)?;
    let mut learner = starting_learner(&cfg.generator_arch, warm, cfg, rng)?;
    let (initial_loss, final_loss, opponent_draws) = train_generator(
        &mut learner,
        &GeneratorObjective::Saturating,
        sigma_d,
        d_set,
        cfg.iterations,
        cfg.batch_size,
        rng,
    )?;
    Ok(OracleOutcome {
        snapshot: learner.net.snapshot(Role::Generator, ids),
        learner,
        initial_loss,
        final_loss,
        opponent_draws,
    })
}

/// Best response of the discriminator player to `sigma_g`.
pub fn discriminator_oracle<T: Scalar>(
    sigma_g: &MixedStrategy<T>,
    g_set: &[NetworkSnapshot<T>],
    cfg: &OracleConfig,
    data: &dyn DataSource<T>,
    warm: Option<&NetworkSnapshot<T>>,
    rng: &mut Prng,
    ids: &mut SnapshotIds,
) -> Result<OracleOutcome<T>> {
    cfg.validate()?;
    check_support(sigma_g, g_set, Role::Generator)?;
    let mut learner = starting_learner(&cfg.discriminator_arch, warm, cfg, rng)?;
    let (initial_loss, final_loss, opponent_draws) = train_discriminator(
        &mut learner,
        sigma_g,
        g_set,
        data,
        cfg.iterations,
        cfg.batch_size,
        rng,
    )?;
    Ok(OracleOutcome {
        snapshot: learner.net.snapshot(Role::Discriminator, ids),
        learner,
        initial_loss,
        final_loss,
        opponent_draws,
    })
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the noise stream used by every payoff entry under `seed`.
///
/// All entries share real batches and noise draws (common random numbers),
/// so differences between entries reflect the networks rather than the
/// sampling.
pub fn payoff_seed(seed: u64) -> u64 {
    splitmix(seed)
}

/// Meta-game entry for `(g, d)`: the discriminator loss averaged over
/// `cfg.payoff_batches` batches. Deterministic in `cfg.seed`.
pub fn estimate_payoff<T: Scalar>(
    g: &NetworkSnapshot<T>,
    d: &NetworkSnapshot<T>,
    data: &dyn DataSource<T>,
    cfg: &OracleConfig,
) -> Result<T> {
    g.expect_role(Role::Generator)?;
    d.expect_role(Role::Discriminator)?;
    if cfg.payoff_batches == 0 || cfg.batch_size == 0 {
        return Err(Error::Config("payoff estimation needs batches".into()));
    }
    let gen = g.restore()?;
    let disc = d.restore()?;
    let mut rng = Prng::seed_from_u64(payoff_seed(cfg.seed));
    let mut total = T::zero();
    for _ in 0..cfg.payoff_batches {
        let real = data.sample(&mut rng, cfg.batch_size);
        let z: Array2<T> = noise(&mut rng, gen.arch().input_dim(), cfg.batch_size);
        let fake = gen.forward(z.view())?;
        total += d_loss(&disc, real.view(), fake.view())?.loss;
    }
    let value = total / T::of(cfg.payoff_batches as f64);
    if !value.is_finite() {
        return Err(Error::NonFinite(format!(
            "payoff of generator {} vs discriminator {} is {value}",
            g.id, d.id
        )));
    }
    Ok(value)
}

/// Estimates many entries concurrently; order of results follows `pairs`.
pub fn estimate_payoffs<T: Scalar>(
    pairs: &[(&NetworkSnapshot<T>, &NetworkSnapshot<T>)],
    data: &dyn DataSource<T>,
    cfg: &OracleConfig,
) -> Result<Vec<T>> {
    pairs
        .par_iter()
        .map(|(g, d)| estimate_payoff(g, d, data, cfg))
        .collect()
}
