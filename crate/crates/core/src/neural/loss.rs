//! Adversarial losses with analytic gradients.
//!
//! Discriminator outputs are clamped to `[LOG_CLAMP, 1 − LOG_CLAMP]` before
//! any logarithm; the clamp has zero derivative where it is active.

use ndarray::{Array2, ArrayView2};

use super::mlp::{Mlp, Trace};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const LOG_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<T> {
    pub loss: T,
    pub grads: Vec<T>,
}

/// Elastic weight consolidation state for one generator task.
#[derive(Debug, Clone, PartialEq)]
pub struct EwcState<T: Scalar> {
    pub fisher: Vec<T>,
    pub anchor: Vec<T>,
    pub lambda: T,
    /// Equilibrium probability of the anchored task.
    pub task_weight: T,
}

impl<T: Scalar> EwcState<T> {
    pub fn new(fisher: Vec<T>, anchor: Vec<T>, lambda: T, task_weight: T) -> Result<Self> {
        if fisher.len() != anchor.len() {
            return Err(Error::Dimension(format!(
                "fisher has {} entries, anchor {}",
                fisher.len(),
                anchor.len()
            )));
        }
        if let Some(f) = fisher.iter().find(|f| !(**f >= T::zero()) || !f.is_finite()) {
            return Err(Error::Config(format!("fisher entry {f} is not a finite nonnegative")));
        }
        if !(lambda >= T::zero()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(task_weight >= T::zero() && task_weight <= T::one()) {
            return Err(Error::Config(format!("task weight {task_weight} outside [0, 1]")));
        }
        Ok(Self {
            fisher,
            anchor,
            lambda,
            task_weight,
        })
    }
}

struct Clamped<T> {
    value: T,
    active: bool,
}

fn clamp<T: Scalar>(p: T) -> Clamped<T> {
    let lo = T::of(LOG_CLAMP);
    let hi = T::one() - lo;
    if p < lo {
        Clamped { value: lo, active: true }
    } else if p > hi {
        Clamped { value: hi, active: true }
    } else {
        Clamped { value: p, active: false }
    }
}

/// Mean of `f(D(x))` over a traced discriminator batch and `∂/∂D(x)` of that
/// mean, with `f` and `f'` given in terms of the clamped probability.
fn mean_term<T: Scalar>(
    trace: &Trace<T>,
    f: impl Fn(T) -> T,
    df: impl Fn(T) -> T,
    scale_by_batch: bool,
) -> (T, Array2<T>) {
    let out = trace.output();
    let n = T::of(out.nrows() as f64);
    let mut total = T::zero();
    let grad = out.mapv(|p| {
        let c = clamp(p);
        total += f(c.value);
        let g = if c.active { T::zero() } else { df(c.value) };
        if scale_by_batch {
            g / n
        } else {
            g
        }
    });
    (total / n, grad)
}

fn neg_log<T: Scalar>(p: T) -> T {
    -p.ln()
}

fn neg_log_one_minus<T: Scalar>(p: T) -> T {
    -(T::one() - p).ln()
}

fn check_batch<T: Scalar>(x: ArrayView2<'_, T>, what: &str) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::Empty(format!("{what} batch is empty")));
    }
    Ok(())
}

fn check_scalar_output<T: Scalar>(d: &Mlp<T>) -> Result<()> {
    if d.arch().output_dim() != 1 {
        return Err(Error::Dimension(format!(
            "discriminator must output one probability, has {} outputs",
            d.arch().output_dim()
        )));
    }
    Ok(())
}

/// `L_D = E_x[−log D(x)] + E_z[−log(1 − D(G(z)))]` and `∂L_D/∂π_d`.
pub fn d_loss<T: Scalar>(
    d: &Mlp<T>,
    real: ArrayView2<'_, T>,
    fake: ArrayView2<'_, T>,
) -> Result<LossGrad<T>> {
    check_scalar_output(d)?;
    check_batch(real, "real")?;
    check_batch(fake, "fake")?;
    let real_trace = d.forward_trace(real)?;
    let fake_trace = d.forward_trace(fake)?;
    let (real_loss, real_g) = mean_term(&real_trace, neg_log, |p| -T::one() / p, true);
    let (fake_loss, fake_g) =
        mean_term(&fake_trace, neg_log_one_minus, |p| T::one() / (T::one() - p), true);
    let mut grads = d.backward(&real_trace, real_g.view())?.param_grads(&real_trace);
    let fake_grads = d.backward(&fake_trace, fake_g.view())?.param_grads(&fake_trace);
    for (g, f) in grads.iter_mut().zip(fake_grads) {
        *g += f;
    }
    Ok(LossGrad {
        loss: real_loss + fake_loss,
        grads,
    })
}

/// Generator loss through a frozen discriminator; `f`/`df` act on `D(G(z))`.
fn generator_term<T: Scalar>(
    d: &Mlp<T>,
    g: &Mlp<T>,
    z: ArrayView2<'_, T>,
    f: impl Fn(T) -> T,
    df: impl Fn(T) -> T,
) -> Result<LossGrad<T>> {
    check_scalar_output(d)?;
    check_batch(z, "noise")?;
    let g_trace = g.forward_trace(z)?;
    let d_trace = d.forward_trace(g_trace.output().view())?;
    let (loss, d_grad) = mean_term(&d_trace, f, df, true);
    let through_d = d.backward(&d_trace, d_grad.view())?;
    let grads = g
        .backward(&g_trace, through_d.input_grad.view())?
        .param_grads(&g_trace);
    Ok(LossGrad { loss, grads })
}

/// Saturating loss `L_G = E_z[log(1 − D(G(z)))]`, gradient w.r.t. `π_g`.
pub fn g_loss_saturating<T: Scalar>(
    d: &Mlp<T>,
    g: &Mlp<T>,
    z: ArrayView2<'_, T>,
) -> Result<LossGrad<T>> {
    generator_term(d, g, z, |p| (T::one() - p).ln(), |p| -T::one() / (T::one() - p))
}

/// Heuristic loss `E_z[−log D(G(z))]`, gradient w.r.t. `π_g`.
pub fn g_loss_non_saturating<T: Scalar>(
    d: &Mlp<T>,
    g: &Mlp<T>,
    z: ArrayView2<'_, T>,
) -> Result<LossGrad<T>> {
    generator_term(d, g, z, neg_log, |p| -T::one() / p)
}

/// `λ · w · Σ_i F_i (π_i − anchor_i)²` and its gradient.
pub fn ewc_penalty<T: Scalar>(params: &[T], ewc: &EwcState<T>) -> Result<(T, Vec<T>)> {
    if params.len() != ewc.fisher.len() {
        return Err(Error::Dimension(format!(
            "{} parameters but EWC state covers {}",
            params.len(),
            ewc.fisher.len()
        )));
    }
    let scale = ewc.lambda * ewc.task_weight;
    let mut total = T::zero();
    let grads = params
        .iter()
        .zip(&ewc.anchor)
        .zip(&ewc.fisher)
        .map(|((&p, &a), &f)| {
            let diff = p - a;
            total += f * diff * diff;
            T::of(2.0) * scale * f * diff
        })
        .collect();
    Ok((scale * total, grads))
}

/// Heuristic generator loss plus the EWC penalty.
pub fn g_loss_ewc<T: Scalar>(
    d: &Mlp<T>,
    g: &Mlp<T>,
    z: ArrayView2<'_, T>,
    ewc: &EwcState<T>,
) -> Result<LossGrad<T>> {
    let params = g.params();
    let (penalty, penalty_grads) = ewc_penalty(&params, ewc)?;
    let mut data = g_loss_non_saturating(d, g, z)?;
    for (g, p) in data.grads.iter_mut().zip(penalty_grads) {
        *g += p;
    }
    data.loss += penalty;
    Ok(data)
}

fn log_d_backward<T: Scalar>(
    d: &Mlp<T>,
    g: &Mlp<T>,
    z: ArrayView2<'_, T>,
) -> Result<(Trace<T>, super::mlp::Backward<T>)> {
    check_scalar_output(d)?;
    check_batch(z, "noise")?;
    let g_trace = g.forward_trace(z)?;
    let d_trace = d.forward_trace(g_trace.output().view())?;
    // Per-sample derivative of log D: no 1/n factor.
    let (_, d_grad) = mean_term(&d_trace, |p| p.ln(), |p| T::one() / p, false);
    let through_d = d.backward(&d_trace, d_grad.view())?;
    let back = g.backward(&g_trace, through_d.input_grad.view())?;
    Ok((g_trace, back))
}

/// `∂/∂π_g log D(G(z))` for a single noise vector (a 1-row batch).
pub fn log_d_gradient<T: Scalar>(d: &Mlp<T>, g: &Mlp<T>, z: ArrayView2<'_, T>) -> Result<Vec<T>> {
    if z.nrows() != 1 {
        return Err(Error::Dimension(format!(
            "log_d_gradient takes one noise vector, got {}",
            z.nrows()
        )));
    }
    let (trace, back) = log_d_backward(d, g, z)?;
    Ok(back.param_grads(&trace))
}

/// Diagonal Fisher information `E_z[(∂/∂π_g log D(G(z)))²]`, estimated
/// over the rows of `z`.
pub fn fisher_diag<T: Scalar>(d: &Mlp<T>, g: &Mlp<T>, z: ArrayView2<'_, T>) -> Result<Vec<T>> {
    let (trace, back) = log_d_backward(d, g, z)?;
    let n = T::of(z.nrows() as f64);
    Ok(back
        .squared_param_grads(&trace)
        .into_iter()
        .map(|s| s / n)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Activation, Arch};
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Central finite differences of `f` around `params`.
    fn numeric_grad(params: &[f64], step: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let mut p = params.to_vec();
        (0..p.len())
            .map(|i| {
                let orig = p[i];
                p[i] = orig + step;
                let up = f(&p);
                p[i] = orig - step;
                let down = f(&p);
                p[i] = orig;
                (up - down) / (2.0 * step)
            })
            .collect()
    }

    fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
        analytic
            .iter()
            .zip(numeric)
            .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
            .fold(0.0, f64::max)
    }

    fn small_pair(rng: &mut ChaCha8Rng) -> (Mlp<f64>, Mlp<f64>) {
        let g = Mlp::new(
            Arch::new(vec![2, 6, 5, 2], Activation::Tanh, Activation::Identity).unwrap(),
            rng,
        )
        .unwrap();
        let d = Mlp::new(
            Arch::new(vec![2, 7, 6, 1], Activation::Relu, Activation::Sigmoid).unwrap(),
            rng,
        )
        .unwrap();
        (g, d)
    }

    fn batch(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.5..1.5))
    }

    fn constant_d(p: f64) -> Mlp<f64> {
        let mut d = Mlp::zeros(Arch::new(vec![2, 1], Activation::Relu, Activation::Sigmoid).unwrap())
            .unwrap();
        d.layers_mut()[0].bias[0] = (p / (1.0 - p)).ln();
        d
    }

    #[test]
    fn d_loss_analytic_values() {
        let x = array![[0.1, 0.2], [0.3, 0.4]];
        let half = constant_d(0.5);
        let l = d_loss(&half, x.view(), x.view()).unwrap().loss;
        assert!((l - 2.0 * 2f64.ln()).abs() < 1e-12);

        // D(real) = 0.99, D(fake) = 0.01: −ln 0.99 − ln(1 − 0.01).
        let arch = Arch::new(vec![2, 1], Activation::Relu, Activation::Sigmoid).unwrap();
        let mut d = Mlp::zeros(arch).unwrap();
        d.layers_mut()[0].weight[[0, 0]] = (0.99f64 / 0.01).ln();
        let l = d_loss(&d, array![[1.0, 0.0]].view(), array![[-1.0, 0.0]].view())
            .unwrap()
            .loss;
        assert!((l - (-2.0 * 0.99f64.ln())).abs() < 1e-12);
        assert!((l - 0.0201).abs() < 1e-4);
    }

    #[test]
    fn d_loss_rejects_empty_batches() {
        let d = constant_d(0.5);
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(matches!(
            d_loss(&d, empty.view(), array![[0.0, 0.0]].view()),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn clamping_bounds_saturated_losses() {
        let d = constant_d(1.0 - 1e-15);
        let l = d_loss(&d, array![[0.0, 0.0]].view(), array![[0.0, 0.0]].view()).unwrap();
        assert!((l.loss - (-(1e-7f64).ln() - (1.0 - 1e-7f64).ln())).abs() < 1e-9);
        assert!(l.grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    #[allow(clippy::approx_constant)] // hand-evaluated ln 0.1
    fn generator_loss_analytic_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (g, _) = small_pair(&mut rng);
        let z = batch(&mut rng, 4);
        let l = g_loss_saturating(&constant_d(0.5), &g, z.view()).unwrap().loss;
        assert!((l - 0.5f64.ln()).abs() < 1e-12);
        let l = g_loss_saturating(&constant_d(0.9), &g, z.view()).unwrap().loss;
        assert!((l - 0.1f64.ln()).abs() < 1e-9);
        assert!((l + 2.3026).abs() < 1e-4);
    }

    #[test]
    fn ewc_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (g, _) = small_pair(&mut rng);
        let z = batch(&mut rng, 3);
        let p = g.params();
        let n = p.len();

        let off = EwcState::new(vec![1.0; n], vec![0.0; n], 0.0, 1.0).unwrap();
        let l = g_loss_ewc(&constant_d(0.5), &g, z.view(), &off).unwrap().loss;
        assert!((l - 2f64.ln()).abs() < 1e-12);

        let at_anchor = EwcState::new(vec![3.0; n], p.clone(), 50.0, 0.7).unwrap();
        assert_eq!(ewc_penalty(&p, &at_anchor).unwrap().0, 0.0);

        // F = 1, λ = 2, w = 0.5, four displacements of 0.1: 2·0.5·4·0.01.
        let ewc = EwcState::<f64>::new(vec![1.0; 4], vec![0.0; 4], 2.0, 0.5).unwrap();
        let (pen, grad) = ewc_penalty(&[0.1, 0.1, 0.1, 0.1], &ewc).unwrap();
        assert!((pen - 0.04).abs() < 1e-15);
        assert!(grad.iter().all(|&g| (g - 2.0 * 2.0 * 0.5 * 0.1).abs() < 1e-15));

        assert!(ewc_penalty(&[0.1], &ewc).is_err());
        assert!(EwcState::new(vec![-1.0], vec![0.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn ewc_penalty_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 12;
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let perm: Vec<usize> = (0..n).rev().collect();
        let pick = |v: &[f64]| perm.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let base = ewc_penalty(&p, &EwcState::new(f.clone(), a.clone(), 3.0, 0.4).unwrap()).unwrap();
        let moved = ewc_penalty(&pick(&p), &EwcState::new(pick(&f), pick(&a), 3.0, 0.4).unwrap())
            .unwrap();
        assert!((base.0 - moved.0).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let (g, d) = small_pair(&mut rng);
            assert!(g.param_count() <= 200 && d.param_count() <= 200);
            let real = batch(&mut rng, 5);
            let fake = batch(&mut rng, 4);
            let z = batch(&mut rng, 4);

            let analytic = d_loss(&d, real.view(), fake.view()).unwrap().grads;
            let numeric = numeric_grad(&d.params(), 1e-5, |p| {
                let d = Mlp::from_params(d.arch().clone(), p).unwrap();
                d_loss(&d, real.view(), fake.view()).unwrap().loss
            });
            assert!(max_rel_err(&analytic, &numeric) <= 1e-4);

            let with_g = |p: &[f64]| Mlp::from_params(g.arch().clone(), p).unwrap();
            let analytic = g_loss_saturating(&d, &g, z.view()).unwrap().grads;
            let numeric = numeric_grad(&g.params(), 1e-5, |p| {
                g_loss_saturating(&d, &with_g(p), z.view()).unwrap().loss
            });
            assert!(max_rel_err(&analytic, &numeric) <= 1e-4);

            let n = g.param_count();
            let fisher = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let anchor = g.params().iter().map(|p| p + rng.random_range(-0.2..0.2)).collect();
            let ewc = EwcState::new(fisher, anchor, 5.0, 0.6).unwrap();
            let analytic = g_loss_ewc(&d, &g, z.view(), &ewc).unwrap().grads;
            let numeric = numeric_grad(&g.params(), 1e-5, |p| {
                g_loss_ewc(&d, &with_g(p), z.view(), &ewc).unwrap().loss
            });
            assert!(max_rel_err(&analytic, &numeric) <= 1e-4);

            let z1 = z.slice(ndarray::s![0..1, ..]);
            let analytic = log_d_gradient(&d, &g, z1).unwrap();
            let numeric = numeric_grad(&g.params(), 1e-5, |p| {
                d.forward(with_g(p).forward(z1).unwrap().view()).unwrap()[[0, 0]].ln()
            });
            assert!(max_rel_err(&analytic, &numeric) <= 1e-4);
        }
    }

    #[test]
    fn fisher_of_flat_discriminator_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (g, _) = small_pair(&mut rng);
        let d = Mlp::zeros(Arch::discriminator(2)).unwrap();
        let f = fisher_diag(&d, &g, batch(&mut rng, 16).view()).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fisher_of_single_sample_is_squared_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (g, d) = small_pair(&mut rng);
        let z = batch(&mut rng, 1);
        let grad = log_d_gradient(&d, &g, z.view()).unwrap();
        let f = fisher_diag(&d, &g, z.view()).unwrap();
        for (fi, gi) in f.iter().zip(&grad) {
            assert!((fi - gi * gi).abs() <= 1e-12 * (1.0 + gi * gi));
        }
    }

    #[test]
    fn fisher_is_mean_of_per_sample_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (g, d) = small_pair(&mut rng);
        let z = batch(&mut rng, 7);
        let mut expect = vec![0.0; g.param_count()];
        for r in 0..7 {
            let gr = log_d_gradient(&d, &g, z.slice(ndarray::s![r..r + 1, ..])).unwrap();
            for (e, v) in expect.iter_mut().zip(gr) {
                *e += v * v / 7.0;
            }
        }
        let f = fisher_diag(&d, &g, z.view()).unwrap();
        for (a, b) in f.iter().zip(&expect) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        assert!(f.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn fisher_halves_agree_on_large_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (g, d) = small_pair(&mut rng);
        let z = crate::data::sample_noise::<f64>(2, 10_000, 99);
        let first = fisher_diag(&d, &g, z.slice(ndarray::s![..5_000, ..])).unwrap();
        let second = fisher_diag(&d, &g, z.slice(ndarray::s![5_000.., ..])).unwrap();
        for (a, b) in first.iter().zip(&second) {
            let scale = a.max(*b);
            if scale > 1e-6 {
                assert!((a - b).abs() <= 0.1 * scale, "{a} vs {b}");
            }
        }
    }
}
