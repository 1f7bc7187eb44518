//! The double-oracle training loops and an exact-oracle harness for finite
//! matrix games.

use std::fmt;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::data::{noise, DataSource, Prng};
use crate::error::{Error, Result};
use crate::meta_game::{
    prune, solve_zero_sum, termination_increments, Increments, MetaSolution, MixedStrategy,
    PayoffMatrix,
};
use crate::neural::{
    d_loss, fisher_diag, g_loss_non_saturating, g_loss_saturating, EwcState, Mlp, NetworkSnapshot, Role, SnapshotIds,
};
use crate::oracles::{
    discriminator_oracle, estimate_payoffs, generator_oracle, train_discriminator,
    train_generator, GeneratorObjective, Learner, OracleConfig,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Unbounded support sets.
    Plain,
    /// Support sets capped at `s` by pruning.
    Prune,
    /// One adaptive network per player; only the last two tasks are kept.
    Continual,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Plain => "plain",
            Variant::Prune => "prune",
            Variant::Continual => "continual",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoConfig {
    pub variant: Variant,
    pub epsilon: f64,
    /// Support capacity of the pruning variant.
    pub s: usize,
    pub max_epochs: usize,
    pub oracle: OracleConfig,
    /// Alternating updates used to train the first generator/discriminator
    /// pair.
    pub bootstrap_iterations: usize,
    /// EWC strength of the continual variant.
    pub lambda: f64,
    /// Noise samples used to estimate the Fisher diagonal.
    pub fisher_samples: usize,
    pub seed: u64,
}

impl Default for DoConfig {
    fn default() -> Self {
        let oracle = OracleConfig::default();
        Self {
            variant: Variant::Plain,
            epsilon: 5e-5,
            s: 10,
            max_epochs: 400,
            bootstrap_iterations: 10 * oracle.iterations,
            oracle,
            lambda: 100.0,
            fisher_samples: 256,
            seed: 0,
        }
    }
}

impl DoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be >= 1".into()));
        }
        if self.variant == Variant::Prune && self.s < 2 {
            return Err(Error::Config(format!("s must be >= 2, got {}", self.s)));
        }
        if self.bootstrap_iterations == 0 {
            return Err(Error::Config("bootstrap_iterations must be >= 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.fisher_samples == 0 {
            return Err(Error::Config("fisher_samples must be >= 1".into()));
        }
        self.oracle.validate()
    }

    /// Oracle settings with the run seed driving payoff estimation.
    fn oracle_cfg(&self) -> OracleConfig {
        OracleConfig {
            seed: self.seed,
            ..self.oracle.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxEpochs,
}

impl RunStatus {
    /// Process exit code: 0 when converged, 2 when the epoch budget ran out.
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Converged => 0,
            RunStatus::MaxEpochs => 2,
        }
    }
}

/// One line of the epoch log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub t: usize,
    /// Dimensions of the meta-game the termination check ran on.
    pub m: usize,
    pub n: usize,
    /// Equilibrium value of that meta-game.
    pub value: f64,
    #[serde(rename = "genInc")]
    pub gen_inc: f64,
    #[serde(rename = "disInc")]
    pub dis_inc: f64,
    /// Snapshot ids retained at the end of the epoch.
    pub support_g: Vec<u64>,
    pub support_d: Vec<u64>,
    pub snapshots_on_disk: usize,
    /// Equilibrium mixtures aligned with `support_g` / `support_d`.
    pub sigma_g: Vec<f64>,
    pub sigma_d: Vec<f64>,
    /// Shortfall of the new generator against the best stored one under the
    /// previous discriminator mixture (0 when it is at least as good).
    pub gen_br_gap: f64,
    /// Same for the new discriminator.
    pub dis_br_gap: f64,
    /// Euclidean distance of the new generator from the previous newest one
    /// (from the anchor in the continual variant).
    pub gen_displacement: f64,
    pub converged: bool,
}

/// Complete outcome of a double-oracle run.
#[derive(Debug, Clone)]
pub struct RunRecord<T: Scalar> {
    pub epochs: Vec<EpochLog>,
    pub status: RunStatus,
    /// Equilibrium over the retained supports.
    pub solution: MetaSolution<T>,
    pub matrix: PayoffMatrix<T>,
    pub generators: Vec<NetworkSnapshot<T>>,
    pub discriminators: Vec<NetworkSnapshot<T>>,
    /// Generator parameter updates spent, bootstrap included.
    pub generator_updates: usize,
}

/// State visible to an observer at the end of an epoch.
pub struct EpochView<'a, T: Scalar> {
    pub log: &'a EpochLog,
    pub matrix: &'a PayoffMatrix<T>,
    pub solution: &'a MetaSolution<T>,
    pub generators: &'a [NetworkSnapshot<T>],
    pub discriminators: &'a [NetworkSnapshot<T>],
}

/// Hooks into a run: persistence, logging and termination overrides.
pub trait Observer<T: Scalar> {
    /// Stores the retained strategies and reports how many snapshots are
    /// kept.
    fn sync_snapshots(
        &mut self,
        generators: &[NetworkSnapshot<T>],
        discriminators: &[NetworkSnapshot<T>],
    ) -> Result<usize> {
        Ok(generators.len() + discriminators.len())
    }

    fn on_epoch(&mut self, _view: &EpochView<'_, T>) -> Result<()> {
        Ok(())
    }

    /// Final say on termination; `computed` is the literal check.
    fn terminate(&mut self, _increments: &Increments<T>, computed: bool) -> bool {
        computed
    }
}

/// Observer that keeps nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoObserver;

impl<T: Scalar> Observer<T> for NoObserver {}

/// Generator loss of plain alternating GAN training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanLoss {
    /// `E[log(1 − D(G(z)))]`, as used by the oracles.
    Saturating,
    /// `E[−log D(G(z))]`.
    #[default]
    NonSaturating,
}

impl fmt::Display for GanLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GanLoss::Saturating => "saturating",
            GanLoss::NonSaturating => "non_saturating",
        })
    }
}

/// Alternating single-step GAN training: one discriminator step, then one
/// generator step, per iteration.
pub fn train_gan<T: Scalar>(
    g: &mut Learner<T>,
    d: &mut Learner<T>,
    loss: GanLoss,
    data: &dyn DataSource<T>,
    iterations: usize,
    batch_size: usize,
    rng: &mut Prng,
) -> Result<()> {
    let noise_dim = g.net.arch().input_dim();
    for _ in 0..iterations {
        let real = data.sample(rng, batch_size);
        let z: ndarray::Array2<T> = noise(rng, noise_dim, batch_size);
        let fake = g.net.forward(z.view())?;
        let step = d_loss(&d.net, real.view(), fake.view())?;
        d.apply(&step.grads)?;
        let z: ndarray::Array2<T> = noise(rng, noise_dim, batch_size);
        let step = match loss {
            GanLoss::Saturating => g_loss_saturating(&d.net, &g.net, z.view())?,
            GanLoss::NonSaturating => g_loss_non_saturating(&d.net, &g.net, z.view())?,
        };
        g.apply(&step.grads)?;
    }
    Ok(())
}

/// Result of the vanilla GAN baseline.
#[derive(Debug, Clone)]
pub struct GanRecord<T: Scalar> {
    pub generator: NetworkSnapshot<T>,
    pub discriminator: NetworkSnapshot<T>,
    pub generator_updates: usize,
}

/// Vanilla GAN with the same networks and optimizer as the oracles.
pub fn run_gan_baseline<T: Scalar>(
    oracle: &OracleConfig,
    loss: GanLoss,
    updates: usize,
    data: &dyn DataSource<T>,
    seed: u64,
) -> Result<GanRecord<T>> {
    oracle.validate()?;
    let mut rng = Prng::seed_from_u64(seed);
    let mut ids = SnapshotIds::new();
    let mut g = Learner::fresh(&oracle.generator_arch, oracle.adam, &mut rng)?;
    let mut d = Learner::fresh(&oracle.discriminator_arch, oracle.adam, &mut rng)?;
    train_gan(&mut g, &mut d, loss, data, updates, oracle.batch_size, &mut rng)?;
    Ok(GanRecord {
        generator: g.net.snapshot(Role::Generator, &mut ids),
        discriminator: d.net.snapshot(Role::Discriminator, &mut ids),
        generator_updates: updates,
    })
}

/// Runs the variant selected by `cfg.variant`.
pub fn run<T: Scalar>(
    cfg: &DoConfig,
    data: &dyn DataSource<T>,
    observer: &mut dyn Observer<T>,
) -> Result<RunRecord<T>> {
    match cfg.variant {
        Variant::Plain | Variant::Prune => run_support_sets(cfg, data, observer),
        Variant::Continual => run_continual(cfg, data, observer),
    }
}

pub fn run_do_gan<T: Scalar>(cfg: &DoConfig, data: &dyn DataSource<T>) -> Result<RunRecord<T>> {
    expect_variant(cfg, Variant::Plain)?;
    run(cfg, data, &mut NoObserver)
}

pub fn run_do_gan_p<T: Scalar>(cfg: &DoConfig, data: &dyn DataSource<T>) -> Result<RunRecord<T>> {
    expect_variant(cfg, Variant::Prune)?;
    run(cfg, data, &mut NoObserver)
}

pub fn run_do_gan_c<T: Scalar>(cfg: &DoConfig, data: &dyn DataSource<T>) -> Result<RunRecord<T>> {
    expect_variant(cfg, Variant::Continual)?;
    run(cfg, data, &mut NoObserver)
}

fn expect_variant(cfg: &DoConfig, variant: Variant) -> Result<()> {
    if cfg.variant != variant {
        return Err(Error::Config(format!(
            "expected the {variant} variant, config selects {}",
            cfg.variant
        )));
    }
    Ok(())
}

struct Bootstrap<T: Scalar> {
    g: Learner<T>,
    d: Learner<T>,
    g_snap: NetworkSnapshot<T>,
    d_snap: NetworkSnapshot<T>,
    value: T,
}

fn bootstrap<T: Scalar>(
    cfg: &DoConfig,
    ocfg: &OracleConfig,
    data: &dyn DataSource<T>,
    rng: &mut Prng,
    ids: &mut SnapshotIds,
) -> Result<Bootstrap<T>> {
    let mut g = Learner::fresh(&ocfg.generator_arch, ocfg.adam, rng)?;
    let mut d = Learner::fresh(&ocfg.discriminator_arch, ocfg.adam, rng)?;
    train_gan(
        &mut g,
        &mut d,
        GanLoss::Saturating,
        data,
        cfg.bootstrap_iterations,
        ocfg.batch_size,
        rng,
    )?;
    let g_snap = g.net.snapshot(Role::Generator, ids);
    let d_snap = d.net.snapshot(Role::Discriminator, ids);
    let value = estimate_payoffs(&[(&g_snap, &d_snap)], data, ocfg)?[0];
    Ok(Bootstrap {
        g,
        d,
        g_snap,
        d_snap,
        value,
    })
}

fn distance<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x - *y).as_f64().powi(2))
        .sum::<f64>()
        .sqrt()
}

fn support_ids<T: Scalar>(set: &[NetworkSnapshot<T>]) -> Vec<u64> {
    set.iter().map(|s| s.id).collect()
}

fn as_f64<T: Scalar>(sigma: &MixedStrategy<T>) -> Vec<f64> {
    sigma.probs().iter().map(|p| p.as_f64()).collect()
}

/// Best-response shortfalls of the newest row and column of `u` under the
/// previous mixtures, which cover all but the newest strategies.
fn br_gaps<T: Scalar>(
    u: &PayoffMatrix<T>,
    prev_g: &MixedStrategy<T>,
    prev_d: &MixedStrategy<T>,
) -> (f64, f64) {
    let (m, n) = u.dim();
    let old = u.select(&(0..m - 1).collect::<Vec<_>>(), &(0..n - 1).collect::<Vec<_>>());
    let Ok(old) = old else { return (0.0, 0.0) };
    let best_row = old
        .row_payoffs(prev_d.probs())
        .iter()
        .fold(f64::NEG_INFINITY, |a, x| a.max(x.as_f64()));
    let new_row = u
        .row(m - 1)
        .slice(ndarray::s![..n - 1])
        .dot(&prev_d.probs())
        .as_f64();
    let best_col = old
        .col_payoffs(prev_g.probs())
        .iter()
        .fold(f64::INFINITY, |a, x| a.min(x.as_f64()));
    let new_col = prev_g
        .probs()
        .dot(&u.col(n - 1).slice(ndarray::s![..m - 1]))
        .as_f64();
    ((best_row - new_row).max(0.0), (new_col - best_col).max(0.0))
}

fn run_support_sets<T: Scalar>(
    cfg: &DoConfig,
    data: &dyn DataSource<T>,
    observer: &mut dyn Observer<T>,
) -> Result<RunRecord<T>> {
    cfg.validate()?;
    let ocfg = cfg.oracle_cfg();
    let eps = T::of(cfg.epsilon);
    let mut rng = Prng::seed_from_u64(cfg.seed);
    let mut ids = SnapshotIds::new();
    let boot = bootstrap(cfg, &ocfg, data, &mut rng, &mut ids)?;
    let mut gens = vec![boot.g_snap];
    let mut discs = vec![boot.d_snap];
    let mut latest_g = gens[0].clone();
    let mut u = PayoffMatrix::singleton(boot.value)?;
    let mut sol = solve_zero_sum(&u)?;
    let mut epochs = Vec::new();
    let mut status = RunStatus::MaxEpochs;
    let mut updates = cfg.bootstrap_iterations;
    observer.sync_snapshots(&gens, &discs)?;

    for t in 1..=cfg.max_epochs {
        // Warm starts continue from the stored strategy that does best
        // against the opponent's current mixture.
        let (best_g, _) = argext(u.row_payoffs(sol.sigma_d.probs()).into_iter(), |a, b| a > b);
        let (best_d, _) = argext(u.col_payoffs(sol.sigma_g.probs()).into_iter(), |a, b| a < b);
        let g_new = generator_oracle(
            &sol.sigma_d,
            &discs,
            &ocfg,
            Some(&gens[best_g]),
            &mut rng,
            &mut ids,
        )?;
        let d_new = discriminator_oracle(
            &sol.sigma_g,
            &gens,
            &ocfg,
            data,
            Some(&discs[best_d]),
            &mut rng,
            &mut ids,
        )?;
        updates += ocfg.iterations;
        let displacement = distance(&g_new.snapshot.params, &latest_g.params);
        let (gs, ds) = (&g_new.snapshot, &d_new.snapshot);

        // New row, then new column, then the corner.
        let mut pairs: Vec<(&NetworkSnapshot<T>, &NetworkSnapshot<T>)> =
            discs.iter().map(|d| (gs, d)).collect();
        pairs.extend(gens.iter().map(|g| (g, ds)));
        pairs.push((gs, ds));
        let entries = estimate_payoffs(&pairs, data, &ocfg)?;
        let n = discs.len();
        let m = gens.len();
        let augmented = u.augment(&entries[..n], &entries[n..n + m], entries[n + m])?;

        let prev_g = sol.sigma_g.padded(1);
        let prev_d = sol.sigma_d.padded(1);
        let inc = termination_increments(&augmented, &prev_g, &prev_d)?;
        let converged = observer.terminate(&inc, inc.converged(eps));
        let (gen_br_gap, dis_br_gap) = br_gaps(&augmented, &sol.sigma_g, &sol.sigma_d);

        latest_g = g_new.snapshot.clone();
        gens.push(g_new.snapshot);
        discs.push(d_new.snapshot);
        let (am, an) = augmented.dim();
        sol = solve_zero_sum(&augmented)?;
        u = augmented;
        let value = sol.value.as_f64();

        if cfg.variant == Variant::Prune {
            let pruned = prune(&u, &sol.sigma_g, &sol.sigma_d, cfg.s)?;
            gens = pruned.kept_rows.iter().map(|&i| gens[i].clone()).collect();
            discs = pruned.kept_cols.iter().map(|&j| discs[j].clone()).collect();
            sol = MetaSolution {
                sigma_g: sol.sigma_g.restricted(&pruned.kept_rows)?,
                sigma_d: sol.sigma_d.restricted(&pruned.kept_cols)?,
                value: sol.value,
            };
            u = pruned.matrix;
        }

        let snapshots_on_disk = observer.sync_snapshots(&gens, &discs)?;
        let log = EpochLog {
            t,
            m: am,
            n: an,
            value,
            gen_inc: inc.gen_inc.as_f64(),
            dis_inc: inc.dis_inc.as_f64(),
            support_g: support_ids(&gens),
            support_d: support_ids(&discs),
            snapshots_on_disk,
            sigma_g: as_f64(&sol.sigma_g),
            sigma_d: as_f64(&sol.sigma_d),
            gen_br_gap,
            dis_br_gap,
            gen_displacement: displacement,
            converged,
        };
        observer.on_epoch(&EpochView {
            log: &log,
            matrix: &u,
            solution: &sol,
            generators: &gens,
            discriminators: &discs,
        })?;
        epochs.push(log);
        if converged {
            status = RunStatus::Converged;
            break;
        }
    }

    Ok(RunRecord {
        epochs,
        status,
        solution: sol,
        matrix: u,
        generators: gens,
        discriminators: discs,
        generator_updates: updates,
    })
}

/// Fisher diagonal of the generator, averaged over the discriminator
/// mixture.
fn mixture_fisher<T: Scalar>(
    g: &Mlp<T>,
    discs: &[NetworkSnapshot<T>],
    sigma_d: &MixedStrategy<T>,
    samples: usize,
    rng: &mut Prng,
) -> Result<Vec<T>> {
    let z: ndarray::Array2<T> = noise(rng, g.arch().input_dim(), samples);
    let mut total = vec![T::zero(); g.param_count()];
    for (snap, p) in discs.iter().zip(sigma_d.probs()) {
        if *p == T::zero() {
            continue;
        }
        let f = fisher_diag(&snap.restore()?, g, z.view())?;
        for (acc, x) in total.iter_mut().zip(f) {
            *acc += *p * x;
        }
    }
    Ok(total)
}

fn full_matrix<T: Scalar>(
    gens: &[NetworkSnapshot<T>],
    discs: &[NetworkSnapshot<T>],
    data: &dyn DataSource<T>,
    ocfg: &OracleConfig,
) -> Result<PayoffMatrix<T>> {
    let pairs: Vec<_> = gens
        .iter()
        .flat_map(|g| discs.iter().map(move |d| (g, d)))
        .collect();
    let entries = estimate_payoffs(&pairs, data, ocfg)?;
    let shape = (gens.len(), discs.len());
    PayoffMatrix::new(
        ndarray::Array2::from_shape_vec(shape, entries)
            .map_err(|e| Error::Dimension(e.to_string()))?,
    )
}

fn run_continual<T: Scalar>(
    cfg: &DoConfig,
    data: &dyn DataSource<T>,
    observer: &mut dyn Observer<T>,
) -> Result<RunRecord<T>> {
    cfg.validate()?;
    let ocfg = cfg.oracle_cfg();
    let eps = T::of(cfg.epsilon);
    let mut rng = Prng::seed_from_u64(cfg.seed);
    let mut ids = SnapshotIds::new();
    let boot = bootstrap(cfg, &ocfg, data, &mut rng, &mut ids)?;
    let (mut g_net, mut d_net) = (boot.g, boot.d);
    let mut gens = vec![boot.g_snap];
    let mut discs = vec![boot.d_snap];
    let mut u = PayoffMatrix::singleton(boot.value)?;
    let mut sol = solve_zero_sum(&u)?;
    let mut epochs = Vec::new();
    let mut status = RunStatus::MaxEpochs;
    let mut updates = cfg.bootstrap_iterations;
    observer.sync_snapshots(&gens, &discs)?;

    for t in 1..=cfg.max_epochs {
        let anchor = g_net.net.params();
        let fisher = mixture_fisher(&g_net.net, &discs, &sol.sigma_d, cfg.fisher_samples, &mut rng)?;
        let task_weight = sol.sigma_g.get(sol.sigma_g.len() - 1);
        let ewc = EwcState::new(fisher, anchor.clone(), T::of(cfg.lambda), task_weight)?;
        train_generator(
            &mut g_net,
            &GeneratorObjective::Ewc(ewc),
            &sol.sigma_d,
            &discs,
            ocfg.iterations,
            ocfg.batch_size,
            &mut rng,
        )?;
        train_discriminator(
            &mut d_net,
            &sol.sigma_g,
            &gens,
            data,
            ocfg.iterations,
            ocfg.batch_size,
            &mut rng,
        )?;
        updates += ocfg.iterations;
        let displacement = distance(&g_net.net.params(), &anchor);

        // Retain tasks t−1 and t; the previous mixture restricted to task
        // t−1 is a point mass.
        let prev_g = gens.pop().expect("non-empty support");
        let prev_d = discs.pop().expect("non-empty support");
        gens = vec![prev_g, g_net.net.snapshot(Role::Generator, &mut ids)];
        discs = vec![prev_d, d_net.net.snapshot(Role::Discriminator, &mut ids)];
        u = full_matrix(&gens, &discs, data, &ocfg)?;
        let point = MixedStrategy::pure(2, 0)?;
        let inc = termination_increments(&u, &point, &point)?;
        let converged = observer.terminate(&inc, inc.converged(eps));
        let (gen_br_gap, dis_br_gap) = br_gaps(&u, &MixedStrategy::pure(1, 0)?, &MixedStrategy::pure(1, 0)?);
        sol = solve_zero_sum(&u)?;

        let snapshots_on_disk = observer.sync_snapshots(&gens, &discs)?;
        let log = EpochLog {
            t,
            m: u.rows(),
            n: u.cols(),
            value: sol.value.as_f64(),
            gen_inc: inc.gen_inc.as_f64(),
            dis_inc: inc.dis_inc.as_f64(),
            support_g: support_ids(&gens),
            support_d: support_ids(&discs),
            snapshots_on_disk,
            sigma_g: as_f64(&sol.sigma_g),
            sigma_d: as_f64(&sol.sigma_d),
            gen_br_gap,
            dis_br_gap,
            gen_displacement: displacement,
            converged,
        };
        observer.on_epoch(&EpochView {
            log: &log,
            matrix: &u,
            solution: &sol,
            generators: &gens,
            discriminators: &discs,
        })?;
        epochs.push(log);
        if converged {
            status = RunStatus::Converged;
            break;
        }
    }

    Ok(RunRecord {
        epochs,
        status,
        solution: sol,
        matrix: u,
        generators: gens,
        discriminators: discs,
        generator_updates: updates,
    })
}

/// One iteration of double oracle on a finite game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteEpoch {
    pub t: usize,
    pub m: usize,
    pub n: usize,
    pub value: f64,
    /// Gain of the row player's exact best response over the restricted
    /// value.
    pub gen_gain: f64,
    /// Gain of the column player's exact best response, in its own payoff.
    pub dis_gain: f64,
}

/// Outcome of [`run_do_finite`].
#[derive(Debug, Clone)]
pub struct FiniteRun<T: Scalar> {
    /// Equilibrium embedded in the full game.
    pub solution: MetaSolution<T>,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub epochs: Vec<FiniteEpoch>,
}

impl<T: Scalar> FiniteRun<T> {
    pub fn iterations(&self) -> usize {
        self.epochs.len()
    }
}

fn embed<T: Scalar>(sigma: &MixedStrategy<T>, index: &[usize], len: usize) -> Result<MixedStrategy<T>> {
    let mut probs = vec![T::zero(); len];
    for (k, &i) in index.iter().enumerate() {
        probs[i] = sigma.get(k);
    }
    MixedStrategy::normalized(probs)
}

/// Double oracle with exact best responses over the rows and columns of
/// `full`, starting from one random row and column. Stops once neither best
/// response improves on the restricted value by `epsilon`.
pub fn run_do_finite<T: Scalar>(full: &PayoffMatrix<T>, epsilon: T, seed: u64) -> Result<FiniteRun<T>> {
    if !(epsilon > T::zero()) {
        return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
    }
    let (fm, fn_) = full.dim();
    let mut rng = Prng::seed_from_u64(seed);
    let mut rows = vec![rng.random_range(0..fm)];
    let mut cols = vec![rng.random_range(0..fn_)];
    let mut epochs = Vec::new();
    loop {
        let sub = full.select(&rows, &cols)?;
        let sol = solve_zero_sum(&sub)?;
        let sigma_g = embed(&sol.sigma_g, &rows, fm)?;
        let sigma_d = embed(&sol.sigma_d, &cols, fn_)?;
        let row_pay = full.row_payoffs(sigma_d.probs());
        let col_pay = full.col_payoffs(sigma_g.probs());
        let (br_row, best) = argext(row_pay.iter().copied(), |a, b| a > b);
        let (br_col, worst) = argext(col_pay.iter().copied(), |a, b| a < b);
        let gen_gain = best - sol.value;
        let dis_gain = sol.value - worst;
        epochs.push(FiniteEpoch {
            t: epochs.len() + 1,
            m: rows.len(),
            n: cols.len(),
            value: sol.value.as_f64(),
            gen_gain: gen_gain.as_f64(),
            dis_gain: dis_gain.as_f64(),
        });
        let mut grew = false;
        if gen_gain >= epsilon && !rows.contains(&br_row) {
            rows.push(br_row);
            grew = true;
        }
        if dis_gain >= epsilon && !cols.contains(&br_col) {
            cols.push(br_col);
            grew = true;
        }
        if !grew {
            return Ok(FiniteRun {
                solution: MetaSolution {
                    sigma_g,
                    sigma_d,
                    value: sol.value,
                },
                rows,
                cols,
                epochs,
            });
        }
    }
}

/// First index attaining the extreme under `better`.
fn argext<T: Scalar>(xs: impl Iterator<Item = T>, better: impl Fn(T, T) -> bool) -> (usize, T) {
    let mut best = (0, T::nan());
    for (i, x) in xs.enumerate() {
        if i == 0 || better(x, best.1) {
            best = (i, x);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::data::{GaussianMixture, GaussianMixtureConfig};
    use crate::neural::{Activation, Arch};

    fn ring() -> GaussianMixture {
        GaussianMixture::new(GaussianMixtureConfig::default()).unwrap()
    }

    fn tiny(variant: Variant, max_epochs: usize) -> DoConfig {
        DoConfig {
            variant,
            max_epochs,
            s: 3,
            bootstrap_iterations: 5,
            fisher_samples: 16,
            seed: 7,
            oracle: OracleConfig {
                iterations: 3,
                batch_size: 8,
                payoff_batches: 2,
                generator_arch: Arch::new(vec![2, 4, 2], Activation::Tanh, Activation::Identity)
                    .unwrap(),
                discriminator_arch: Arch::new(vec![2, 4, 1], Activation::Relu, Activation::Sigmoid)
                    .unwrap(),
                ..Default::default()
            },
            ..Default::default()
        }
    }

    /// Never terminates, and remembers every meta-matrix entry it has seen.
    #[derive(Default)]
    struct Recorder {
        force: Option<bool>,
        entries: HashMap<(u64, u64), f64>,
        changed: usize,
    }

    impl Observer<f64> for Recorder {
        fn on_epoch(&mut self, view: &EpochView<'_, f64>) -> Result<()> {
            for (i, g) in view.generators.iter().enumerate() {
                for (j, d) in view.discriminators.iter().enumerate() {
                    let v = view.matrix.get(i, j);
                    if let Some(old) = self.entries.insert((g.id, d.id), v) {
                        if old.to_bits() != v.to_bits() {
                            self.changed += 1;
                        }
                    }
                }
            }
            Ok(())
        }

        fn terminate(&mut self, _: &Increments<f64>, computed: bool) -> bool {
            self.force.unwrap_or(computed)
        }
    }

    fn never() -> Recorder {
        Recorder {
            force: Some(false),
            ..Default::default()
        }
    }

    #[test]
    fn forced_termination_after_one_epoch() {
        let mut obs = Recorder {
            force: Some(true),
            ..Default::default()
        };
        let rec = run(&tiny(Variant::Plain, 1), &ring(), &mut obs).unwrap();
        assert_eq!(rec.epochs.len(), 1);
        assert_eq!(rec.status, RunStatus::Converged);
        assert_eq!(rec.matrix.dim(), (2, 2));
    }

    #[test]
    fn plain_variant_grows_one_pair_per_epoch() {
        let rec = run(&tiny(Variant::Plain, 6), &ring(), &mut never()).unwrap();
        assert_eq!(rec.status, RunStatus::MaxEpochs);
        assert_eq!(rec.epochs.len(), 6);
        for e in &rec.epochs {
            assert_eq!((e.m, e.n), (e.t + 1, e.t + 1));
            assert_eq!(e.support_g.len(), e.t + 1);
            assert_eq!(e.snapshots_on_disk, 2 * (e.t + 1));
        }
        assert_eq!(rec.generator_updates, 5 + 6 * 3);
    }

    #[test]
    fn prune_variant_respects_capacity() {
        let mut cfg = tiny(Variant::Prune, 8);
        cfg.s = 2;
        let rec = run(&cfg, &ring(), &mut never()).unwrap();
        for e in &rec.epochs {
            assert!(e.m <= 3 && e.n <= 3, "pre-prune {}x{}", e.m, e.n);
            assert!(e.support_g.len() <= 2 && e.support_d.len() <= 2);
            assert!(e.snapshots_on_disk <= 4);
            assert!(e.support_g.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(rec.matrix.dim(), (2, 2));
    }

    #[test]
    fn continual_variant_keeps_two_tasks() {
        let rec = run(&tiny(Variant::Continual, 5), &ring(), &mut never()).unwrap();
        for e in &rec.epochs {
            assert_eq!((e.m, e.n), (2, 2));
            assert_eq!(e.support_g.len(), 2);
            assert_eq!(e.support_d.len(), 2);
            assert!(e.snapshots_on_disk <= 4);
        }
    }

    #[test]
    fn entries_never_change_once_estimated() {
        for variant in [Variant::Plain, Variant::Prune] {
            let mut obs = never();
            run(&tiny(variant, 6), &ring(), &mut obs).unwrap();
            assert_eq!(obs.changed, 0, "{variant}");
            assert!(!obs.entries.is_empty());
        }
    }

    #[test]
    fn identical_seeds_give_identical_records() {
        for variant in [Variant::Plain, Variant::Prune, Variant::Continual] {
            let cfg = tiny(variant, 4);
            let a = run(&cfg, &ring(), &mut never()).unwrap();
            let b = run(&cfg, &ring(), &mut never()).unwrap();
            assert_eq!(a.epochs, b.epochs, "{variant}");
            let c = run(&DoConfig { seed: 8, ..cfg }, &ring(), &mut never()).unwrap();
            assert_ne!(a.epochs, c.epochs, "{variant}");
        }
    }

    #[test]
    fn equilibrium_mixtures_match_supports() {
        let rec = run(&tiny(Variant::Prune, 5), &ring(), &mut never()).unwrap();
        for e in &rec.epochs {
            assert_eq!(e.sigma_g.len(), e.support_g.len());
            assert!((e.sigma_g.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(rec.solution.sigma_g.len(), rec.generators.len());
    }

    #[test]
    fn strong_ewc_keeps_the_generator_near_its_anchor() {
        let displacement = |lambda: f64| {
            let cfg = DoConfig {
                lambda,
                ..tiny(Variant::Continual, 1)
            };
            run(&cfg, &ring(), &mut never()).unwrap().epochs[0].gen_displacement
        };
        assert!(displacement(1e6) < displacement(0.0));
    }

    #[test]
    fn config_errors() {
        let mut cfg = tiny(Variant::Prune, 2);
        cfg.s = 1;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = DoConfig {
            epsilon: 0.0,
            ..tiny(Variant::Plain, 2)
        };
        assert!(cfg.validate().is_err());
        let cfg = DoConfig {
            max_epochs: 0,
            ..tiny(Variant::Plain, 2)
        };
        assert!(cfg.validate().is_err());
        assert!(run_do_gan_p::<f64>(&tiny(Variant::Plain, 1), &ring()).is_err());
    }

    #[test]
    fn baseline_counts_its_updates() {
        let cfg = tiny(Variant::Plain, 1);
        let rec = run_gan_baseline::<f64>(&cfg.oracle, GanLoss::NonSaturating, 10, &ring(), 1).unwrap();
        assert_eq!(rec.generator_updates, 10);
        assert_eq!(rec.generator.role, Role::Generator);
    }

    fn m(rows: &[&[f64]]) -> PayoffMatrix<f64> {
        PayoffMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn finite_matching_pennies() {
        let run = run_do_finite(&m(&[&[1.0, -1.0], &[-1.0, 1.0]]), 1e-9, 3).unwrap();
        assert!(run.solution.value.abs() < 1e-12);
        for p in run.solution.sigma_g.to_vec().into_iter().chain(run.solution.sigma_d.to_vec()) {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn finite_saddle_point_is_found_quickly() {
        let u = m(&[&[2.0, 3.0], &[0.0, 1.0]]);
        // Row 0 guarantees min(2,3) = 2; column 0 concedes at most max(2,0) = 2.
        let maximin = (0..2).map(|i| u.row(i).fold(f64::INFINITY, |a, &x| a.min(x))).fold(f64::NEG_INFINITY, f64::max);
        let minimax = (0..2).map(|j| u.col(j).fold(f64::NEG_INFINITY, |a, &x| a.max(x))).fold(f64::INFINITY, f64::min);
        assert_eq!((maximin, minimax), (2.0, 2.0));
        for seed in 0..10 {
            let run = run_do_finite(&u, 1e-9, seed).unwrap();
            assert!(run.iterations() <= 2, "seed {seed}: {}", run.iterations());
            assert_eq!(run.solution.value, 2.0);
        }
    }

    #[test]
    fn finite_matches_full_lp_on_random_games() {
        let mut rng = Prng::seed_from_u64(11);
        for trial in 0..50 {
            let rows: Vec<Vec<f64>> = (0..20)
                .map(|_| (0..20).map(|_| rng.random_range(-10.0..=10.0)).collect())
                .collect();
            let u = PayoffMatrix::from_rows(&rows).unwrap();
            let run = run_do_finite(&u, 1e-7, trial).unwrap();
            let lp = solve_zero_sum(&u).unwrap();
            assert!((run.solution.value - lp.value).abs() <= 1e-6, "trial {trial}");
            assert!(run.rows.len() <= 20 && run.cols.len() <= 20);
        }
    }

    #[test]
    fn finite_rejects_bad_epsilon() {
        assert!(run_do_finite(&m(&[&[1.0]]), 0.0, 0).is_err());
    }
}
