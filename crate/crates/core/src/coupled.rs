//! Two-field system with drift and cross-phase coupling,
//!
//! `i ∂ψ_j/∂t = −½ ∂²ψ_j/∂x² + i α_j ∂ψ_j/∂x + V_j ψ_j − σ f_j(|ψ₁|², |ψ₂|²) ψ_j`,
//!
//! with `f₁(a, b) = a + ζ₁ b` and `f₂(a, b) = ζ₂ a + b`. The sign `σ` of the
//! coupling term is a parameter: [`FOCUSING`] (`σ = +1`) is the convention
//! under which the sech-envelope pair in [`SolitonPair`] is an exact solution;
//! [`AS_PRINTED`] keeps `+f_j` on the right-hand side.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::{rel_misfit, Grid1D, Spectral, SpectralSymbol, WaveField};
use crate::propagator::StepLength;
use crate::scalar::Scalar;

/// Coupling sign for which the soliton pair solves the system.
pub const FOCUSING: f64 = 1.0;
/// Coupling sign matching `+f_j ψ_j` on the right-hand side.
pub const AS_PRINTED: f64 = -1.0;

/// Pair of fields on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledField<T> {
    pub psi1: WaveField<T>,
    pub psi2: WaveField<T>,
}

impl<T: Scalar> CoupledField<T> {
    pub fn new(psi1: WaveField<T>, psi2: WaveField<T>) -> Result<Self> {
        if psi1.grid() != psi2.grid() {
            return Err(Error::DimensionMismatch("coupled fields live on different grids".into()));
        }
        Ok(Self { psi1, psi2 })
    }

    pub fn grid(&self) -> &Grid1D<T> {
        self.psi1.grid()
    }
}

/// Constants and discretization of the coupled system.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledParams<T> {
    pub alpha1: T,
    pub alpha2: T,
    pub zeta1: T,
    pub zeta2: T,
    pub potential1: Vec<T>,
    pub potential2: Vec<T>,
    pub dt: T,
    pub steps: usize,
    pub coupling_sign: T,
}

impl<T: Scalar> CoupledParams<T> {
    pub fn final_time(&self) -> T {
        self.dt * T::from_count(self.steps)
    }

    pub fn with_zetas(&self, zeta1: T, zeta2: T) -> Self {
        Self {
            zeta1,
            zeta2,
            ..self.clone()
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("layer count must be >= 1".into()));
        }
        for v in [&self.potential1, &self.potential2] {
            if v.len() != m {
                return Err(Error::LengthMismatch {
                    expected: m,
                    found: v.len(),
                });
            }
        }
        let scalars = [self.alpha1, self.alpha2, self.zeta1, self.zeta2, self.coupling_sign];
        let all_finite = scalars.iter().all(|v| v.is_finite())
            && self.potential1.iter().chain(&self.potential2).all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidParameter("coupled parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Moving sech soliton pair with velocity `v`, wavenumber split `δ` and
/// amplitude parameter `α`:
///
/// `ψ_{1,2} = sqrt(2α/(1+ζ)) sech(sqrt(2α)(x − vt)) exp(i[(v ∓ δ)x − ((v² − δ²)/2 − α)t])`.
///
/// It solves the system for `ζ₁ = ζ₂ = ζ`, `V_j = 0`, `α₁ = −δ`, `α₂ = δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonPair<T> {
    pub velocity: T,
    pub delta: T,
    pub alpha: T,
    pub zeta: T,
}

impl<T: Scalar> SolitonPair<T> {
    pub fn amplitude(&self) -> T {
        (T::lit(2.0) * self.alpha / (T::one() + self.zeta)).sqrt()
    }

    /// Temporal frequency `ω` of the phase factor `e^{−iωt}`.
    pub fn frequency(&self) -> T {
        (self.velocity * self.velocity - self.delta * self.delta) / T::lit(2.0) - self.alpha
    }

    fn envelope(&self, x: T, t: T) -> T {
        let kappa = (T::lit(2.0) * self.alpha).sqrt();
        self.amplitude() / (kappa * (x - self.velocity * t)).cosh()
    }

    /// Value of field `j ∈ {1, 2}` at `(x, t)`.
    pub fn value(&self, j: usize, x: T, t: T) -> Complex<T> {
        let k = if j == 1 {
            self.velocity - self.delta
        } else {
            self.velocity + self.delta
        };
        Complex::from_polar(self.envelope(x, t), k * x - self.frequency() * t)
    }

    /// Analytic `∂ψ_j/∂t`.
    pub fn time_derivative(&self, j: usize, x: T, t: T) -> Complex<T> {
        let kappa = (T::lit(2.0) * self.alpha).sqrt();
        let arg = kappa * (x - self.velocity * t);
        // d/dt sech(arg) = sech(arg) tanh(arg) κ v
        let envelope_rate = kappa * self.velocity * arg.tanh();
        let i = Complex::new(T::zero(), T::one());
        self.value(j, x, t) * (Complex::new(envelope_rate, T::zero()) - i * self.frequency())
    }

    pub fn field(&self, grid: Grid1D<T>, t: T) -> CoupledField<T> {
        CoupledField {
            psi1: WaveField::from_fn(grid, |x| self.value(1, x, t)),
            psi2: WaveField::from_fn(grid, |x| self.value(2, x, t)),
        }
    }
}

/// Symbols `exp(−i (k²/2 − α_j k) dt)` of one full linear step per field.
pub fn coupled_linear_symbols<T: Scalar>(
    p: &CoupledParams<T>,
    grid: &Grid1D<T>,
) -> (SpectralSymbol<T>, SpectralSymbol<T>) {
    (drift_symbol(p.alpha1, p.dt, grid), drift_symbol(p.alpha2, p.dt, grid))
}

fn drift_symbol<T: Scalar>(alpha: T, dt: T, grid: &Grid1D<T>) -> SpectralSymbol<T> {
    let half = T::lit(0.5);
    SpectralSymbol::from_wavenumbers(grid, |k| {
        Complex::from_polar(T::one(), -(half * k * k - alpha * k) * dt)
    })
}

/// Coupled phase rotation `ψ_j ← ψ_j exp(i (σ f_j − V_j) dt)`.
pub fn coupled_nonlinear_step<T: Scalar>(f: &CoupledField<T>, p: &CoupledParams<T>) -> Result<CoupledField<T>> {
    let m = f.grid().len();
    p.validate(m)?;
    let mut u = f.psi1.values().to_vec();
    let mut w = f.psi2.values().to_vec();
    coupled_activate(&mut u, &mut w, p, p.zeta1, p.zeta2);
    Ok(CoupledField {
        psi1: WaveField::from_parts_unchecked(*f.grid(), u),
        psi2: WaveField::from_parts_unchecked(*f.grid(), w),
    })
}

pub(crate) fn coupled_activate<T: Scalar>(
    u: &mut [Complex<T>],
    w: &mut [Complex<T>],
    p: &CoupledParams<T>,
    zeta1: T,
    zeta2: T,
) {
    let s = p.coupling_sign;
    for j in 0..u.len() {
        let a = u[j].norm_sqr();
        let b = w[j].norm_sqr();
        let phase1 = (s * (a + zeta1 * b) - p.potential1[j]) * p.dt;
        let phase2 = (s * (zeta2 * a + b) - p.potential2[j]) * p.dt;
        u[j] = u[j] * Complex::from_polar(T::one(), phase1);
        w[j] = w[j] * Complex::from_polar(T::one(), phase2);
    }
}

/// Activation inputs of both fields, per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTape<T> {
    pub initial: CoupledField<T>,
    pub activation_inputs: Vec<CoupledField<T>>,
    pub final_field: CoupledField<T>,
}

/// Precomputed Strang layers of the coupled system.
#[derive(Debug, Clone)]
pub struct CoupledPropagator<T: Scalar> {
    grid: Grid1D<T>,
    params: CoupledParams<T>,
    plan: Spectral<T>,
    half: [SpectralSymbol<T>; 2],
    full: [SpectralSymbol<T>; 2],
}

impl<T: Scalar> CoupledPropagator<T> {
    pub fn new(grid: Grid1D<T>, params: &CoupledParams<T>) -> Result<Self> {
        params.validate(grid.len())?;
        let half_dt = params.dt / T::lit(2.0);
        Ok(Self {
            grid,
            params: params.clone(),
            plan: Spectral::new(grid.len()),
            half: [
                drift_symbol(params.alpha1, half_dt, &grid),
                drift_symbol(params.alpha2, half_dt, &grid),
            ],
            full: [
                drift_symbol(params.alpha1, params.dt, &grid),
                drift_symbol(params.alpha2, params.dt, &grid),
            ],
        })
    }

    pub fn params(&self) -> &CoupledParams<T> {
        &self.params
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub(crate) fn linear(&self, field: usize, buf: &mut [Complex<T>], len: StepLength) {
        let symbol = match len {
            StepLength::Half => &self.half[field],
            StepLength::Full => &self.full[field],
        };
        self.plan.apply(buf, symbol.multipliers());
    }

    pub(crate) fn linear_adjoint(&self, field: usize, buf: &mut [Complex<T>], len: StepLength) {
        let symbol = match len {
            StepLength::Half => &self.half[field],
            StepLength::Full => &self.full[field],
        };
        let conj: Vec<Complex<T>> = symbol.multipliers().iter().map(|z| z.conj()).collect();
        self.plan.apply(buf, &conj);
    }

    fn run(
        &self,
        f0: &CoupledField<T>,
        zeta1: T,
        zeta2: T,
        mut tape: Option<&mut Vec<CoupledField<T>>>,
    ) -> Result<CoupledField<T>> {
        if f0.grid().len() != self.grid.len() {
            return Err(Error::LengthMismatch {
                expected: self.grid.len(),
                found: f0.grid().len(),
            });
        }
        let mut u = f0.psi1.values().to_vec();
        let mut w = f0.psi2.values().to_vec();
        self.linear(0, &mut u, StepLength::Half);
        self.linear(1, &mut w, StepLength::Half);
        for layer in 0..self.params.steps {
            if layer > 0 {
                self.linear(0, &mut u, StepLength::Full);
                self.linear(1, &mut w, StepLength::Full);
            }
            if let Some(t) = tape.as_deref_mut() {
                t.push(CoupledField {
                    psi1: WaveField::from_parts_unchecked(self.grid, u.clone()),
                    psi2: WaveField::from_parts_unchecked(self.grid, w.clone()),
                });
            }
            coupled_activate(&mut u, &mut w, &self.params, zeta1, zeta2);
        }
        self.linear(0, &mut u, StepLength::Half);
        self.linear(1, &mut w, StepLength::Half);
        let out = CoupledField {
            psi1: WaveField::from_parts_unchecked(self.grid, u),
            psi2: WaveField::from_parts_unchecked(self.grid, w),
        };
        if out.psi1.is_finite() && out.psi2.is_finite() {
            Ok(out)
        } else {
            Err(Error::NonfiniteField)
        }
    }

    /// Propagates with the coupling constants stored in the parameters.
    pub fn forward(&self, f0: &CoupledField<T>) -> Result<CoupledField<T>> {
        self.run(f0, self.params.zeta1, self.params.zeta2, None)
    }

    /// Propagates with explicit coupling constants.
    pub fn forward_with(&self, f0: &CoupledField<T>, zeta1: T, zeta2: T) -> Result<CoupledField<T>> {
        self.run(f0, zeta1, zeta2, None)
    }

    pub fn forward_recorded(
        &self,
        f0: &CoupledField<T>,
        zeta1: T,
        zeta2: T,
    ) -> Result<(CoupledField<T>, CoupledTape<T>)> {
        let mut inputs = Vec::with_capacity(self.params.steps);
        let out = self.run(f0, zeta1, zeta2, Some(&mut inputs))?;
        let tape = CoupledTape {
            initial: f0.clone(),
            activation_inputs: inputs,
            final_field: out.clone(),
        };
        Ok((out, tape))
    }
}

/// Strang propagation of the coupled pair, optionally taped.
pub fn coupled_propagate<T: Scalar>(
    f0: &CoupledField<T>,
    p: &CoupledParams<T>,
    record: bool,
) -> Result<(CoupledField<T>, Option<CoupledTape<T>>)> {
    let prop = CoupledPropagator::new(*f0.grid(), p)?;
    if record {
        let (out, tape) = prop.forward_recorded(f0, p.zeta1, p.zeta2)?;
        Ok((out, Some(tape)))
    } else {
        Ok((prop.forward(f0)?, None))
    }
}

/// Initial pair, observed final pair and the solver used to fit them.
#[derive(Debug, Clone)]
pub struct CoupledData<T: Scalar> {
    pub initial: CoupledField<T>,
    pub target: CoupledField<T>,
    pub propagator: CoupledPropagator<T>,
}

impl<T: Scalar> CoupledData<T> {
    pub fn new(initial: CoupledField<T>, target: CoupledField<T>, params: &CoupledParams<T>) -> Result<Self> {
        let propagator = CoupledPropagator::new(*initial.grid(), params)?;
        if target.grid().len() != initial.grid().len() {
            return Err(Error::LengthMismatch {
                expected: initial.grid().len(),
                found: target.grid().len(),
            });
        }
        Ok(Self {
            initial,
            target,
            propagator,
        })
    }

    /// `e_ψ₁ + e_ψ₂` of the propagated pair against the target.
    pub fn loss(&self, zeta1: T, zeta2: T) -> Result<T> {
        let out = self.propagator.forward_with(&self.initial, zeta1, zeta2)?;
        Ok(rel_misfit(&out.psi1, &self.target.psi1)? + rel_misfit(&out.psi2, &self.target.psi2)?)
    }
}

/// Loss `J(ζ₁, ζ₂) = e_ψ₁ + e_ψ₂` for the given data.
pub fn coupled_loss<T: Scalar>(zeta1: T, zeta2: T, data: &CoupledData<T>) -> Result<T> {
    data.loss(zeta1, zeta2)
}
