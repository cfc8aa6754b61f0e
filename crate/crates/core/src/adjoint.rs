//! Reverse-mode gradients of the data misfit `½‖ψ_N − ψ_T‖² / ‖ψ_T‖²`.
//!
//! Complex fields are treated as pairs of real fields: the adjoint of a
//! field `z` is `∂L/∂Re z + i ∂L/∂Im z`.

use num_complex::Complex;
use rayon::prelude::*;

use crate::coupled::{CoupledData, CoupledField};
use crate::dictionary::{Coeffs, DictionaryMatrix};
use crate::error::{Error, Result};
use crate::field::{rel_misfit, WaveField};
use crate::propagator::{LinearMode, ProblemParams, Propagator, StepLength};
use crate::scalar::Scalar;

/// Which parameter a gradient refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    PotentialSamples,
    Coeffs,
    Zetas,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport<T> {
    /// Data term of the loss.
    pub loss: T,
    pub grad: Vec<T>,
    pub param_kind: ParamKind,
}

impl<T: Scalar> GradientReport<T> {
    fn checked(loss: T, grad: Vec<T>, param_kind: ParamKind) -> Result<Self> {
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonfiniteGradient);
        }
        Ok(Self { loss, grad, param_kind })
    }
}

/// Central finite-difference settings.
#[derive(Debug, Clone, PartialEq)]
pub struct FdSpec<T> {
    pub step: T,
    /// Indices to probe; `None` probes all.
    pub indices: Option<Vec<usize>>,
}

impl<T: Scalar> Default for FdSpec<T> {
    fn default() -> Self {
        Self {
            step: T::lit(1e-5),
            indices: None,
        }
    }
}

/// Central differences `(L(x + h e_i) − L(x − h e_i)) / 2h`.
///
/// The result is aligned with `spec.indices` when given, and with `x0` otherwise.
pub fn fd_gradient<T, F>(loss: F, x0: &[T], spec: &FdSpec<T>) -> Result<Vec<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> Result<T> + Sync,
{
    if !(spec.step > T::zero()) {
        return Err(Error::InvalidParameter("finite-difference step must be positive".into()));
    }
    let indices: Vec<usize> = match &spec.indices {
        Some(ix) => ix.clone(),
        None => (0..x0.len()).collect(),
    };
    if let Some(&bad) = indices.iter().find(|&&i| i >= x0.len()) {
        return Err(Error::DimensionMismatch(format!(
            "probe index {bad} out of range for {} parameters",
            x0.len()
        )));
    }
    let h = spec.step;
    indices
        .par_iter()
        .map(|&i| {
            let mut x = x0.to_vec();
            x[i] = x0[i] + h;
            let up = loss(&x)?;
            x[i] = x0[i] - h;
            let down = loss(&x)?;
            Ok((up - down) / (h + h))
        })
        .collect()
}

/// Largest componentwise `|a − b| / max(|a|, |b|)`; equal components count as zero.
pub fn max_relative_deviation<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let scale = x.abs().max(y.abs());
            if scale == T::zero() {
                T::zero()
            } else {
                (x - y).abs() / scale
            }
        })
        .fold(T::zero(), T::max)
}

/// Initial field, observed final field and the forward model that links them.
#[derive(Debug, Clone)]
pub struct MisfitData<T: Scalar> {
    pub initial: WaveField<T>,
    pub target: WaveField<T>,
    pub propagator: Propagator<T>,
    target_norm_sqr: T,
}

impl<T: Scalar> MisfitData<T> {
    pub fn new(
        initial: WaveField<T>,
        target: WaveField<T>,
        params: &ProblemParams<T>,
        mode: LinearMode,
    ) -> Result<Self> {
        initial.check_same_len(&target)?;
        let target_norm_sqr = target.norm_sqr();
        if target_norm_sqr == T::zero() {
            return Err(Error::ZeroReference);
        }
        let propagator = Propagator::new(*initial.grid(), params, mode)?;
        Ok(Self {
            initial,
            target,
            propagator,
            target_norm_sqr,
        })
    }

    /// Data term at the given potential samples.
    pub fn loss(&self, potential: &[T]) -> Result<T> {
        let out = self.propagator.forward(&self.initial, potential)?;
        rel_misfit(&out, &self.target)
    }

    /// Data term and its gradient with respect to every potential sample.
    pub fn grad_potential(&self, potential: &[T]) -> Result<GradientReport<T>> {
        let prop = &self.propagator;
        let (out, tape) = prop.forward_recorded(&self.initial, potential)?;
        let loss = rel_misfit(&out, &self.target)?;

        let inv = T::one() / self.target_norm_sqr;
        let mut lam: Vec<Complex<T>> = out
            .values()
            .iter()
            .zip(self.target.values())
            .map(|(z, y)| (z - y) * inv)
            .collect();

        let g = prop.activation_g();
        let h = prop.activation_h(potential);
        let mut s_sum = vec![T::zero(); lam.len()];

        prop.linear_adjoint(&mut lam, StepLength::Half);
        for n in (0..tape.layers()).rev() {
            let u = tape.activation_inputs[n].values();
            for j in 0..lam.len() {
                let rot = Complex::from_polar(T::one(), g * u[j].norm_sqr() + h[j]);
                let v = u[j] * rot;
                let s = (lam[j] * v.conj()).im;
                s_sum[j] = s_sum[j] + s;
                lam[j] = lam[j] * rot.conj() + u[j] * (T::lit(2.0) * g * s);
            }
            let len = if n > 0 { StepLength::Full } else { StepLength::Half };
            prop.linear_adjoint(&mut lam, len);
        }

        let dh_dv = prop.phase_sign() * prop.dt();
        let grad = s_sum.into_iter().map(|s| s * dh_dv).collect();
        GradientReport::checked(loss, grad, ParamKind::PotentialSamples)
    }

    /// Data term at `V = Φ c`.
    pub fn loss_coeffs(&self, phi: &DictionaryMatrix<T>, c: &Coeffs<T>) -> Result<T> {
        self.loss(&phi.apply(c.as_slice())?)
    }

    /// Gradient with respect to dictionary coefficients, `Φᵀ ∇_V`.
    pub fn grad_coeffs(&self, phi: &DictionaryMatrix<T>, c: &Coeffs<T>) -> Result<GradientReport<T>> {
        if phi.rows() != self.initial.len() {
            return Err(Error::DimensionMismatch(format!(
                "dictionary has {} rows, grid has {} points",
                phi.rows(),
                self.initial.len()
            )));
        }
        let potential = phi.apply(c.as_slice())?;
        let gv = self.grad_potential(&potential)?;
        let grad = phi.apply_transpose(&gv.grad)?;
        GradientReport::checked(gv.loss, grad, ParamKind::Coeffs)
    }
}

/// Data term and gradient with respect to the potential samples in `p`.
pub fn misfit_grad_v<T: Scalar>(
    f0: &WaveField<T>,
    target: &WaveField<T>,
    p: &ProblemParams<T>,
) -> Result<GradientReport<T>> {
    MisfitData::new(f0.clone(), target.clone(), p, LinearMode::Spectral)?.grad_potential(&p.potential)
}

/// Data term and gradient with respect to `c`, where `V = Φ c` replaces `p.potential`.
pub fn misfit_grad_coeffs<T: Scalar>(
    f0: &WaveField<T>,
    target: &WaveField<T>,
    p: &ProblemParams<T>,
    phi: &DictionaryMatrix<T>,
    c: &Coeffs<T>,
) -> Result<GradientReport<T>> {
    MisfitData::new(f0.clone(), target.clone(), p, LinearMode::Spectral)?.grad_coeffs(phi, c)
}

/// Loss `e_ψ₁ + e_ψ₂` and its gradient with respect to `(ζ₁, ζ₂)`.
pub fn coupled_grad_zetas<T: Scalar>(data: &CoupledData<T>, zeta1: T, zeta2: T) -> Result<GradientReport<T>> {
    let prop = &data.propagator;
    let p = prop.params();
    let (out, tape) = prop.forward_recorded(&data.initial, zeta1, zeta2)?;
    let loss = rel_misfit(&out.psi1, &data.target.psi1)? + rel_misfit(&out.psi2, &data.target.psi2)?;

    let seed = |z: &WaveField<T>, y: &WaveField<T>| -> Vec<Complex<T>> {
        let inv = T::one() / y.norm_sqr();
        z.values().iter().zip(y.values()).map(|(a, b)| (a - b) * inv).collect()
    };
    let CoupledField { psi1: out1, psi2: out2 } = &out;
    let mut l1 = seed(out1, &data.target.psi1);
    let mut l2 = seed(out2, &data.target.psi2);

    let sdt = p.coupling_sign * p.dt;
    let two = T::lit(2.0);
    let (mut g1, mut g2) = (T::zero(), T::zero());

    prop.linear_adjoint(0, &mut l1, StepLength::Half);
    prop.linear_adjoint(1, &mut l2, StepLength::Half);
    for n in (0..tape.activation_inputs.len()).rev() {
        let u = tape.activation_inputs[n].psi1.values();
        let w = tape.activation_inputs[n].psi2.values();
        for j in 0..l1.len() {
            let a = u[j].norm_sqr();
            let b = w[j].norm_sqr();
            let r1 = Complex::from_polar(T::one(), (p.coupling_sign * (a + zeta1 * b) - p.potential1[j]) * p.dt);
            let r2 = Complex::from_polar(T::one(), (p.coupling_sign * (zeta2 * a + b) - p.potential2[j]) * p.dt);
            let s1 = (l1[j] * (u[j] * r1).conj()).im;
            let s2 = (l2[j] * (w[j] * r2).conj()).im;
            let grad_a = sdt * (s1 + zeta2 * s2);
            let grad_b = sdt * (zeta1 * s1 + s2);
            g1 = g1 + s1 * sdt * b;
            g2 = g2 + s2 * sdt * a;
            l1[j] = l1[j] * r1.conj() + u[j] * (two * grad_a);
            l2[j] = l2[j] * r2.conj() + w[j] * (two * grad_b);
        }
        let len = if n > 0 { StepLength::Full } else { StepLength::Half };
        prop.linear_adjoint(0, &mut l1, len);
        prop.linear_adjoint(1, &mut l2, len);
    }
    GradientReport::checked(loss, vec![g1, g2], ParamKind::Zetas)
}
