//! Layered split-step propagation for
//! `i ψ_t + β ψ_xx + γ |ψ|² ψ + V ψ = 0` with periodic boundary conditions.
//!
//! Each layer is a Strang step: a half linear step `C_h` (dispersion over
//! `Δt/2`), the pointwise phase activation `G(u; γΔt, VΔt)` and another
//! `C_h`. Adjacent half steps of consecutive layers can be merged into one
//! full step, which gives the `C_h ∘ G ∘ C ∘ … ∘ C ∘ G ∘ C_h` network form.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::{Grid1D, Spectral, SpectralSymbol, WaveField};
use crate::scalar::Scalar;

/// Equation constants and discretization of a single-field problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemParams<T> {
    pub beta: T,
    pub gamma: T,
    /// Potential samples `V(x_j)`.
    pub potential: Vec<T>,
    pub dt: T,
    /// Number of layers `N`.
    pub steps: usize,
    /// Sign in front of the phase `γ|ψ|² + V`; `+1` for the form above.
    pub phase_sign: T,
}

impl<T: Scalar> ProblemParams<T> {
    pub fn new(beta: T, gamma: T, potential: Vec<T>, dt: T, steps: usize) -> Result<Self> {
        let p = Self {
            beta,
            gamma,
            potential,
            dt,
            steps,
            phase_sign: T::one(),
        };
        p.validate(None)?;
        Ok(p)
    }

    /// Parameters covering `[0, final_time]` with `steps` layers.
    pub fn over(beta: T, gamma: T, potential: Vec<T>, final_time: T, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidParameter("layer count must be >= 1".into()));
        }
        Self::new(beta, gamma, potential, final_time / T::from_count(steps), steps)
    }

    pub fn final_time(&self) -> T {
        self.dt * T::from_count(self.steps)
    }

    pub fn with_potential(&self, potential: Vec<T>) -> Self {
        Self {
            potential,
            ..self.clone()
        }
    }

    pub(crate) fn validate(&self, m: Option<usize>) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("layer count must be >= 1".into()));
        }
        if !self.beta.is_finite() || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter("beta and gamma must be finite".into()));
        }
        if !self.potential.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("potential has non-finite samples".into()));
        }
        if let Some(m) = m {
            if self.potential.len() != m {
                return Err(Error::LengthMismatch {
                    expected: m,
                    found: self.potential.len(),
                });
            }
        }
        Ok(())
    }
}

/// How the linear sub-step is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearMode {
    /// Exact periodic propagator applied as a Fourier multiplier.
    #[default]
    Spectral,
    /// Zero-padded direct convolution with the sampled free-space kernel.
    DirectKernel,
}

/// Linear step parameters, `η = βΔt` (full) or `βΔt/2` (half).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearStepSpec<T> {
    pub eta: T,
    pub mode: LinearMode,
}

/// Fourier symbol `exp(−i η k²)` of the free linear flow over one step.
pub fn linear_symbol<T: Scalar>(eta: T, grid: &Grid1D<T>) -> SpectralSymbol<T> {
    SpectralSymbol::from_wavenumbers(grid, |k| Complex::from_polar(T::one(), -eta * k * k))
}

/// Sampled kernel `sqrt(i/(πη)) exp(−i (j dx)² / (4η)) dx` for `j = 0..M`.
pub fn direct_kernel<T: Scalar>(eta: T, grid: &Grid1D<T>) -> Result<Vec<Complex<T>>> {
    if eta == T::zero() {
        return Err(Error::SingularKernel);
    }
    let i = Complex::new(T::zero(), T::one());
    let prefactor = (i / (T::PI() * eta)).sqrt();
    let dx = grid.dx();
    let four = T::lit(4.0);
    Ok((0..grid.len())
        .map(|j| {
            let s = T::from_count(j) * dx;
            prefactor * Complex::from_polar(dx, -s * s / (four * eta))
        })
        .collect())
}

/// Zero-padded convolution `out[n] = Σ_j K[|n − j|] u[j]`.
fn direct_convolve<T: Scalar>(kernel: &[Complex<T>], buf: &mut [Complex<T>]) {
    let input = buf.to_vec();
    for (n, out) in buf.iter_mut().enumerate() {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (j, u) in input.iter().enumerate() {
            acc = acc + kernel[n.abs_diff(j)] * u;
        }
        *out = acc;
    }
}

/// The phase activation `G(u; g, h) = u exp(i (g |u|² + h))`.
pub fn nonlinear_step<T: Scalar>(f: &WaveField<T>, g: T, h: &[T]) -> Result<WaveField<T>> {
    if h.len() != f.len() {
        return Err(Error::LengthMismatch {
            expected: f.len(),
            found: h.len(),
        });
    }
    let mut values = f.values().to_vec();
    activate(&mut values, g, h, T::one());
    Ok(WaveField::from_parts_unchecked(*f.grid(), values))
}

/// In-place activation with phase `scale · (g |u|² + h)`.
#[inline]
pub(crate) fn activate<T: Scalar>(buf: &mut [Complex<T>], g: T, h: &[T], scale: T) {
    for (u, &hj) in buf.iter_mut().zip(h) {
        let phase = scale * (g * u.norm_sqr() + hj);
        *u = *u * Complex::from_polar(T::one(), phase);
    }
}

/// Fields recorded during a forward pass for the reverse sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationTape<T> {
    pub initial: WaveField<T>,
    /// Input of the activation of every layer, in layer order.
    pub activation_inputs: Vec<WaveField<T>>,
    pub final_field: WaveField<T>,
}

impl<T: Scalar> PropagationTape<T> {
    pub fn layers(&self) -> usize {
        self.activation_inputs.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StepLength {
    Half,
    Full,
}

/// Precomputed layer operators for one grid and equation.
#[derive(Debug, Clone)]
pub struct Propagator<T: Scalar> {
    grid: Grid1D<T>,
    beta: T,
    gamma: T,
    dt: T,
    steps: usize,
    phase_sign: T,
    mode: LinearMode,
    plan: Spectral<T>,
    half: SpectralSymbol<T>,
    full: SpectralSymbol<T>,
    half_kernel: Vec<Complex<T>>,
    full_kernel: Vec<Complex<T>>,
    layer_checks: bool,
}

impl<T: Scalar> Propagator<T> {
    /// Builds the operators; the potential in `params` is only checked for length.
    pub fn new(grid: Grid1D<T>, params: &ProblemParams<T>, mode: LinearMode) -> Result<Self> {
        params.validate(Some(grid.len()))?;
        let half_eta = params.beta * params.dt / T::lit(2.0);
        let full_eta = params.beta * params.dt;
        let (half_kernel, full_kernel) = match mode {
            LinearMode::Spectral => (Vec::new(), Vec::new()),
            LinearMode::DirectKernel => (
                direct_kernel(half_eta, &grid)?,
                direct_kernel(full_eta, &grid)?,
            ),
        };
        Ok(Self {
            grid,
            beta: params.beta,
            gamma: params.gamma,
            dt: params.dt,
            steps: params.steps,
            phase_sign: params.phase_sign,
            mode,
            plan: Spectral::new(grid.len()),
            half: linear_symbol(half_eta, &grid),
            full: linear_symbol(full_eta, &grid),
            half_kernel,
            full_kernel,
            layer_checks: false,
        })
    }

    /// Enables a finiteness check after every layer instead of only at the end.
    pub fn with_layer_checks(mut self, on: bool) -> Self {
        self.layer_checks = on;
        self
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn phase_sign(&self) -> T {
        self.phase_sign
    }

    pub fn mode(&self) -> LinearMode {
        self.mode
    }

    /// Nonlinear coefficient `g = ±γΔt` of the activation.
    pub(crate) fn activation_g(&self) -> T {
        self.phase_sign * self.gamma * self.dt
    }

    /// Potential term `h = ±VΔt` of the activation.
    pub(crate) fn activation_h(&self, potential: &[T]) -> Vec<T> {
        let scale = self.phase_sign * self.dt;
        potential.iter().map(|&v| scale * v).collect()
    }

    pub(crate) fn linear(&self, buf: &mut [Complex<T>], len: StepLength) {
        match (self.mode, len) {
            (LinearMode::Spectral, StepLength::Half) => self.plan.apply(buf, self.half.multipliers()),
            (LinearMode::Spectral, StepLength::Full) => self.plan.apply(buf, self.full.multipliers()),
            (LinearMode::DirectKernel, StepLength::Half) => direct_convolve(&self.half_kernel, buf),
            (LinearMode::DirectKernel, StepLength::Full) => direct_convolve(&self.full_kernel, buf),
        }
    }

    /// Applies the adjoint (conjugate transpose) of a linear step.
    pub(crate) fn linear_adjoint(&self, buf: &mut [Complex<T>], len: StepLength) {
        match self.mode {
            LinearMode::Spectral => {
                let symbol = match len {
                    StepLength::Half => &self.half,
                    StepLength::Full => &self.full,
                };
                let conj: Vec<Complex<T>> = symbol.multipliers().iter().map(|z| z.conj()).collect();
                self.plan.apply(buf, &conj);
            }
            LinearMode::DirectKernel => {
                // Symmetric Toeplitz matrix: the adjoint convolves with the conjugated kernel.
                let kernel = match len {
                    StepLength::Half => &self.half_kernel,
                    StepLength::Full => &self.full_kernel,
                };
                let conj: Vec<Complex<T>> = kernel.iter().map(|z| z.conj()).collect();
                direct_convolve(&conj, buf);
            }
        }
    }

    fn check_inputs(&self, f0: &WaveField<T>, potential: &[T]) -> Result<()> {
        if f0.len() != self.grid.len() {
            return Err(Error::LengthMismatch {
                expected: self.grid.len(),
                found: f0.len(),
            });
        }
        if potential.len() != self.grid.len() {
            return Err(Error::LengthMismatch {
                expected: self.grid.len(),
                found: potential.len(),
            });
        }
        Ok(())
    }

    fn finish(&self, values: Vec<Complex<T>>) -> Result<WaveField<T>> {
        let out = WaveField::from_parts_unchecked(self.grid, values);
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::NonfiniteField)
        }
    }

    fn layer_check(&self, buf: &[Complex<T>]) -> Result<()> {
        if self.layer_checks && !buf.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonfiniteField);
        }
        Ok(())
    }

    fn run_merged(
        &self,
        f0: &WaveField<T>,
        potential: &[T],
        mut tape: Option<&mut Vec<WaveField<T>>>,
    ) -> Result<WaveField<T>> {
        self.check_inputs(f0, potential)?;
        let g = self.activation_g();
        let h = self.activation_h(potential);
        let mut buf = f0.values().to_vec();
        self.linear(&mut buf, StepLength::Half);
        for layer in 0..self.steps {
            if layer > 0 {
                self.linear(&mut buf, StepLength::Full);
            }
            if let Some(t) = tape.as_deref_mut() {
                t.push(WaveField::from_parts_unchecked(self.grid, buf.clone()));
            }
            activate(&mut buf, g, &h, T::one());
            self.layer_check(&buf)?;
        }
        self.linear(&mut buf, StepLength::Half);
        self.finish(buf)
    }

    /// Runs all layers with interior half steps merged into full steps.
    pub fn forward(&self, f0: &WaveField<T>, potential: &[T]) -> Result<WaveField<T>> {
        self.run_merged(f0, potential, None)
    }

    /// Like [`forward`](Self::forward) and records every activation input.
    pub fn forward_recorded(
        &self,
        f0: &WaveField<T>,
        potential: &[T],
    ) -> Result<(WaveField<T>, PropagationTape<T>)> {
        let mut inputs = Vec::with_capacity(self.steps);
        let out = self.run_merged(f0, potential, Some(&mut inputs))?;
        let tape = PropagationTape {
            initial: f0.clone(),
            activation_inputs: inputs,
            final_field: out.clone(),
        };
        Ok((out, tape))
    }

    /// Literal `(C_h ∘ G ∘ C_h)^N` composition without merging.
    pub fn forward_unmerged(&self, f0: &WaveField<T>, potential: &[T]) -> Result<WaveField<T>> {
        self.check_inputs(f0, potential)?;
        let g = self.activation_g();
        let h = self.activation_h(potential);
        let mut buf = f0.values().to_vec();
        for _ in 0..self.steps {
            self.linear(&mut buf, StepLength::Half);
            activate(&mut buf, g, &h, T::one());
            self.linear(&mut buf, StepLength::Half);
            self.layer_check(&buf)?;
        }
        self.finish(buf)
    }

    /// Lie splitting: a full linear step followed by the activation, per layer.
    pub fn forward_first_order(&self, f0: &WaveField<T>, potential: &[T]) -> Result<WaveField<T>> {
        self.check_inputs(f0, potential)?;
        let g = self.activation_g();
        let h = self.activation_h(potential);
        let mut buf = f0.values().to_vec();
        for _ in 0..self.steps {
            self.linear(&mut buf, StepLength::Full);
            activate(&mut buf, g, &h, T::one());
            self.layer_check(&buf)?;
        }
        self.finish(buf)
    }

    /// Runs the Strang layers with `Δt → −Δt`, undoing [`forward`](Self::forward).
    pub fn backward_in_time(&self, f: &WaveField<T>, potential: &[T]) -> Result<WaveField<T>> {
        if self.mode != LinearMode::Spectral {
            return Err(Error::InvalidParameter(
                "time reversal needs the spectral linear step".into(),
            ));
        }
        self.check_inputs(f, potential)?;
        let g = self.activation_g();
        let h = self.activation_h(potential);
        let mut buf = f.values().to_vec();
        for _ in 0..self.steps {
            self.linear_adjoint(&mut buf, StepLength::Half);
            activate(&mut buf, g, &h, -T::one());
            self.linear_adjoint(&mut buf, StepLength::Half);
            self.layer_check(&buf)?;
        }
        self.finish(buf)
    }
}

/// Strang propagation of `f0` over `params.steps` layers, optionally taped.
pub fn propagate<T: Scalar>(
    f0: &WaveField<T>,
    params: &ProblemParams<T>,
    record: bool,
) -> Result<(WaveField<T>, Option<PropagationTape<T>>)> {
    let prop = Propagator::new(*f0.grid(), params, LinearMode::Spectral)?;
    if record {
        let (out, tape) = prop.forward_recorded(f0, &params.potential)?;
        Ok((out, Some(tape)))
    } else {
        Ok((prop.forward(f0, &params.potential)?, None))
    }
}

/// First-order (Lie) split-step propagation.
pub fn first_order_propagate<T: Scalar>(f0: &WaveField<T>, params: &ProblemParams<T>) -> Result<WaveField<T>> {
    let prop = Propagator::new(*f0.grid(), params, LinearMode::Spectral)?;
    prop.forward_first_order(f0, &params.potential)
}
