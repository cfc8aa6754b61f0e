//! Full-gradient training loops: proximal gradient descent on dictionary
//! coefficients and plain gradient descent on coupling constants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adjoint::{coupled_grad_zetas, MisfitData};
use crate::coupled::CoupledData;
use crate::dictionary::{soft_threshold, Coeffs, DictionaryMatrix};
use crate::error::{Error, Result};
use crate::field::rel_err_vector;
use crate::scalar::Scalar;

/// Step-size schedule `init · decay^⌊e/period⌋`, further multiplied by
/// `post_tol_factor` on every epoch once the data term has reached `tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule<T> {
    pub init: T,
    pub decay_factor: T,
    pub decay_period: usize,
    pub post_tol_factor: T,
    pub tol: T,
}

impl<T: Scalar> LrSchedule<T> {
    /// A fixed step size.
    pub fn constant(lr: T) -> Self {
        Self {
            init: lr,
            decay_factor: T::one(),
            decay_period: 1,
            post_tol_factor: T::one(),
            tol: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let one = T::one();
        if !(self.init >= T::zero() && self.init.is_finite()) {
            return Err(Error::InvalidParameter("learning rate must be finite and non-negative".into()));
        }
        if !(self.decay_factor > T::zero() && self.decay_factor <= one) {
            return Err(Error::InvalidParameter("decay factor must lie in (0, 1]".into()));
        }
        if !(self.post_tol_factor > T::zero() && self.post_tol_factor <= one) {
            return Err(Error::InvalidParameter("post-tolerance factor must lie in (0, 1]".into()));
        }
        if self.decay_period == 0 {
            return Err(Error::InvalidParameter("decay period must be at least one epoch".into()));
        }
        Ok(())
    }

    /// Periodic part of the schedule at `epoch`.
    pub fn periodic_rate(&self, epoch: usize) -> T {
        let k = i32::try_from(epoch / self.decay_period).unwrap_or(i32::MAX);
        self.init * self.decay_factor.powi(k)
    }
}

/// Starting point for coefficient training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitKind {
    #[default]
    Zero,
    /// Independent uniform draws from `(−0.1, 0.1)`.
    Uniform,
}

/// Coefficient vector of length `n` drawn according to `kind`.
pub fn initial_coeffs<T: Scalar>(n: usize, kind: InitKind, seed: u64) -> Coeffs<T> {
    match kind {
        InitKind::Zero => Coeffs::zeros(n),
        InitKind::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Coeffs((0..n).map(|_| T::lit(rng.random_range(-0.1..0.1))).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    /// L1 weight; zero gives plain gradient descent.
    pub lambda: T,
    pub max_epochs: usize,
    /// Stop as soon as the total loss is at or below this value.
    pub tau: Option<T>,
    pub schedule: LrSchedule<T>,
    pub seed: u64,
    /// Halve the step size for good whenever the loss increases.
    pub halve_on_increase: bool,
}

impl<T: Scalar> TrainConfig<T> {
    pub fn new(lambda: T, max_epochs: usize, schedule: LrSchedule<T>) -> Self {
        Self {
            lambda,
            max_epochs,
            tau: None,
            schedule,
            seed: 0,
            halve_on_increase: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(self.lambda >= T::zero() && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter("lambda must be finite and non-negative".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidParameter("max_epochs must be at least 1".into()));
        }
        if let Some(t) = self.tau {
            if !(t > T::zero()) {
                return Err(Error::InvalidParameter("tau must be positive".into()));
            }
        }
        Ok(())
    }
}

/// State of one epoch, taken before that epoch's update.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRow<T> {
    pub epoch: usize,
    /// Total loss, including the L1 term.
    pub loss: T,
    /// Data term `e_ψ`.
    pub data_loss: T,
    /// Relative potential error, when the true potential is known.
    pub e_v: Option<T>,
    /// Relative coupling-constant errors, when the truth is known.
    pub e_zeta: Option<[T; 2]>,
    /// Step size of the update leaving this epoch.
    pub lr: T,
    pub params: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord<T> {
    pub rows: Vec<TrainRow<T>>,
    /// Epoch at which the post-tolerance decay switched on.
    pub tol_epoch: Option<usize>,
    /// Epoch of the returned (lowest-loss) iterate.
    pub best_epoch: usize,
}

impl<T: Scalar> TrainRecord<T> {
    pub fn last(&self) -> Option<&TrainRow<T>> {
        self.rows.last()
    }

    pub fn best(&self) -> Option<&TrainRow<T>> {
        self.rows.get(self.best_epoch)
    }

    pub fn losses(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.loss).collect()
    }
}

struct Evaluation<T> {
    data_loss: T,
    grad: Vec<T>,
}

/// Shared descent loop. Row `e` holds the iterate before update `e`; one extra
/// row holds the final iterate.
fn descend<T, E, R>(
    start: Vec<T>,
    cfg: &TrainConfig<T>,
    proximal: bool,
    mut eval: E,
    mut annotate: R,
) -> Result<(Vec<T>, TrainRecord<T>)>
where
    T: Scalar,
    E: FnMut(&[T]) -> Result<Evaluation<T>>,
    R: FnMut(&[T], &mut TrainRow<T>),
{
    cfg.validate()?;
    let sched = &cfg.schedule;
    let mut x = start;
    let mut record = TrainRecord {
        rows: Vec::with_capacity(cfg.max_epochs + 1),
        tol_epoch: None,
        best_epoch: 0,
    };
    let mut initial_loss = T::zero();
    let mut best = (T::infinity(), 0usize, x.clone());
    let mut post = T::one();
    let mut halving = T::one();
    let mut prev_loss = T::infinity();

    for epoch in 0..=cfg.max_epochs {
        let ev = match eval(&x) {
            Ok(ev) => ev,
            Err(Error::NonfiniteField | Error::NonfiniteGradient) if epoch > 0 => {
                return Err(Error::Divergence {
                    epoch,
                    loss: f64::INFINITY,
                    initial: initial_loss.as_f64(),
                })
            }
            Err(e) => return Err(e),
        };
        let penalty = if proximal {
            cfg.lambda * x.iter().map(|v| v.abs()).sum::<T>()
        } else {
            T::zero()
        };
        let loss = ev.data_loss + penalty;
        if epoch == 0 {
            initial_loss = loss;
        } else if !loss.is_finite() || loss > T::lit(1e6) * initial_loss {
            return Err(Error::Divergence {
                epoch,
                loss: loss.as_f64(),
                initial: initial_loss.as_f64(),
            });
        }
        if loss < best.0 {
            best = (loss, epoch, x.clone());
        }

        if record.tol_epoch.is_none() && ev.data_loss <= sched.tol {
            record.tol_epoch = Some(epoch);
        }
        if record.tol_epoch.is_some() {
            post = post * sched.post_tol_factor;
        }
        if cfg.halve_on_increase && loss > prev_loss {
            halving = halving * T::lit(0.5);
        }
        prev_loss = loss;
        let lr = sched.periodic_rate(epoch) * post * halving;

        let mut row = TrainRow {
            epoch,
            loss,
            data_loss: ev.data_loss,
            e_v: None,
            e_zeta: None,
            lr,
            params: x.clone(),
        };
        annotate(&x, &mut row);
        record.rows.push(row);

        let stop = cfg.tau.is_some_and(|t| loss <= t);
        if stop || epoch == cfg.max_epochs {
            break;
        }
        for (xi, gi) in x.iter_mut().zip(&ev.grad) {
            *xi = *xi - lr * *gi;
        }
        if proximal && cfg.lambda > T::zero() {
            x = soft_threshold(&Coeffs(x), lr * cfg.lambda).0;
        }
    }
    record.best_epoch = best.1;
    Ok((best.2, record))
}

/// Fits `V = Φ c` to the data by proximal gradient descent on
/// `e_ψ(c) + λ‖c‖₁`, returning the lowest-loss iterate.
pub fn train_coeffs<T: Scalar>(
    data: &MisfitData<T>,
    phi: &DictionaryMatrix<T>,
    c_init: Coeffs<T>,
    cfg: &TrainConfig<T>,
    true_potential: Option<&[T]>,
) -> Result<(Coeffs<T>, TrainRecord<T>)> {
    if c_init.len() != phi.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} initial coefficients for {} library columns",
            c_init.len(),
            phi.cols()
        )));
    }
    let eval = |c: &[T]| {
        let rep = data.grad_coeffs(phi, &Coeffs(c.to_vec()))?;
        Ok(Evaluation {
            data_loss: rep.loss,
            grad: rep.grad,
        })
    };
    let annotate = |c: &[T], row: &mut TrainRow<T>| {
        if let Some(truth) = true_potential {
            row.e_v = phi.apply(c).ok().and_then(|v| rel_err_vector(&v, truth).ok());
        }
    };
    let (c, record) = descend(c_init.0, cfg, true, eval, annotate)?;
    Ok((Coeffs(c), record))
}

/// Fits `(ζ₁, ζ₂)` by plain gradient descent on `e_ψ₁ + e_ψ₂`; `cfg.lambda` is ignored.
pub fn train_zetas<T: Scalar>(
    data: &CoupledData<T>,
    init: (T, T),
    cfg: &TrainConfig<T>,
    truth: Option<(T, T)>,
) -> Result<((T, T), TrainRecord<T>)> {
    let eval = |z: &[T]| {
        let rep = coupled_grad_zetas(data, z[0], z[1])?;
        Ok(Evaluation {
            data_loss: rep.loss,
            grad: rep.grad,
        })
    };
    let annotate = |z: &[T], row: &mut TrainRow<T>| {
        if let Some((t1, t2)) = truth {
            row.e_zeta = Some([(z[0] - t1).abs() / t1.abs(), (z[1] - t2).abs() / t2.abs()]);
        }
    };
    let (z, record) = descend(vec![init.0, init.1], cfg, false, eval, annotate)?;
    Ok(((z[0], z[1]), record))
}
