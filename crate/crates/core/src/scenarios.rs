//! The three benchmark problems with exact solutions, a spectral residual
//! oracle for those solutions, refinement studies and the coupling-constant
//! loss landscape.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rayon::prelude::*;

use crate::adjoint::MisfitData;
use crate::coupled::{CoupledData, CoupledField, CoupledParams, CoupledPropagator, SolitonPair, FOCUSING};
use crate::dictionary::{default_library, Coeffs};
use crate::error::{Error, Result};
use crate::field::{rel_misfit, spectral_derivative, Grid1D, WaveField};
use crate::propagator::{LinearMode, ProblemParams, Propagator};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioName {
    Example1,
    Example2,
    Example3,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 3] = [Self::Example1, Self::Example2, Self::Example3];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Example1 => "example1",
            Self::Example2 => "example2",
            Self::Example3 => "example3",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scenario `{s}` (expected example1, example2 or example3)")))
    }
}

/// Equation family of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model<T> {
    /// `iψ_t + βψ_xx + σ(γ|ψ|² + V)ψ = 0`.
    Single { beta: T, gamma: T, phase_sign: T },
    /// The drift-coupled pair, with the soliton that solves it.
    Coupled {
        soliton: SolitonPair<T>,
        alpha1: T,
        alpha2: T,
        coupling_sign: T,
    },
}

/// A benchmark problem: domain, discretization and exact solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub name: ScenarioName,
    pub a: T,
    pub b: T,
    pub m: usize,
    pub steps: usize,
    pub final_time: T,
    pub model: Model<T>,
}

impl<T: Scalar> Scenario<T> {
    pub fn by_name(name: ScenarioName) -> Self {
        match name {
            ScenarioName::Example1 => Self::example1(),
            ScenarioName::Example2 => Self::example2(),
            ScenarioName::Example3 => Self::example3(),
        }
    }

    /// One-soliton Gaussian: `β = −1`, `γ = 1`, `V = 4x² − e^{−2x²}`,
    /// `ψ = e^{−x² + 2it}` on `[−10, 10]`, four layers up to `T = 1`.
    pub fn example1() -> Self {
        Self {
            name: ScenarioName::Example1,
            a: T::lit(-10.0),
            b: T::lit(10.0),
            m: 512,
            steps: 4,
            final_time: T::one(),
            model: Model::Single {
                beta: T::lit(-1.0),
                gamma: T::one(),
                phase_sign: T::one(),
            },
        }
    }

    /// Gross–Pitaevskii: `β = ½`, `γ = −1`, `V = −cos² x`,
    /// `ψ = sin(x) e^{−3it/2}` on `[0, 2π]`, one layer up to `T = 1`.
    pub fn example2() -> Self {
        Self {
            name: ScenarioName::Example2,
            a: T::zero(),
            b: T::TAU(),
            m: 512,
            steps: 1,
            final_time: T::one(),
            model: Model::Single {
                beta: T::lit(0.5),
                gamma: T::lit(-1.0),
                phase_sign: T::one(),
            },
        }
    }

    /// Coupled sech pair on `[−20, 80]` with `v = 0`, `δ = ½`, `α = 1`,
    /// `ζ₁ = ζ₂ = 2/3`, `−α₁ = α₂ = ½`; ten layers up to `T = 0.01`.
    pub fn example3() -> Self {
        let delta = T::lit(0.5);
        Self {
            name: ScenarioName::Example3,
            a: T::lit(-20.0),
            b: T::lit(80.0),
            m: 1024,
            steps: 10,
            final_time: T::lit(0.01),
            model: Model::Coupled {
                soliton: SolitonPair {
                    velocity: T::zero(),
                    delta,
                    alpha: T::one(),
                    zeta: T::lit(2.0) / T::lit(3.0),
                },
                alpha1: -delta,
                alpha2: delta,
                coupling_sign: T::lit(FOCUSING),
            },
        }
    }

    /// The sizes used in the published runs (`M = 4000` for the first two).
    pub fn full_scale(mut self) -> Self {
        if !self.is_coupled() {
            self.m = 4000;
        }
        self
    }

    pub fn with_grid_size(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_final_time(mut self, t: T) -> Self {
        self.final_time = t;
        self
    }

    pub fn with_domain(mut self, a: T, b: T) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    /// Flips the sign of the nonlinear phase in the forward model while
    /// keeping the exact solution, which must then fail the checks.
    pub fn with_flipped_phase(mut self) -> Self {
        match &mut self.model {
            Model::Single { phase_sign, .. } => *phase_sign = -*phase_sign,
            Model::Coupled { coupling_sign, .. } => *coupling_sign = -*coupling_sign,
        }
        self
    }

    pub fn is_coupled(&self) -> bool {
        matches!(self.model, Model::Coupled { .. })
    }

    pub fn grid(&self) -> Result<Grid1D<T>> {
        Grid1D::new(self.a, self.b, self.m)
    }

    pub fn dt(&self) -> T {
        self.final_time / T::from_count(self.steps)
    }

    /// Exact single-equation solution at `(x, t)`.
    fn exact_value(&self, x: T, t: T) -> Complex<T> {
        match self.name {
            ScenarioName::Example1 => Complex::from_polar((-x * x).exp(), T::lit(2.0) * t),
            _ => Complex::from_polar(x.sin(), T::lit(-1.5) * t),
        }
    }

    /// Analytic `∂ψ/∂t` of the single-equation solution.
    fn exact_time_derivative(&self, x: T, t: T) -> Complex<T> {
        let w = match self.name {
            ScenarioName::Example1 => T::lit(2.0),
            _ => T::lit(-1.5),
        };
        self.exact_value(x, t) * Complex::new(T::zero(), w)
    }

    /// True potential at `x`; zero for the coupled problem.
    pub fn potential_at(&self, x: T) -> T {
        match self.name {
            ScenarioName::Example1 => T::lit(4.0) * x * x - (T::lit(-2.0) * x * x).exp(),
            ScenarioName::Example2 => {
                let c = x.cos();
                -c * c
            }
            ScenarioName::Example3 => T::zero(),
        }
    }

    pub fn true_potential(&self) -> Result<Vec<T>> {
        Ok(self.grid()?.points().into_iter().map(|x| self.potential_at(x)).collect())
    }

    /// Coefficients of the true potential on the default library.
    pub fn true_coeffs(&self) -> Option<Coeffs<T>> {
        let lib = default_library();
        let mut c = Coeffs::zeros(lib.len());
        match self.name {
            ScenarioName::Example1 => {
                c.0[lib.index_of("x^2")?] = T::lit(4.0);
                c.0[lib.index_of("exp(-2x^2)")?] = T::lit(-1.0);
            }
            ScenarioName::Example2 => c.0[lib.index_of("cos^2(x)")?] = T::lit(-1.0),
            ScenarioName::Example3 => return None,
        }
        Some(c)
    }

    pub fn true_zetas(&self) -> Option<(T, T)> {
        match self.model {
            Model::Coupled { soliton, .. } => Some((soliton.zeta, soliton.zeta)),
            Model::Single { .. } => None,
        }
    }

    fn single_only(&self) -> Result<(T, T, T)> {
        match self.model {
            Model::Single { beta, gamma, phase_sign } => Ok((beta, gamma, phase_sign)),
            Model::Coupled { .. } => Err(Error::InvalidParameter(format!("{} is a coupled scenario", self.name))),
        }
    }

    fn coupled_only(&self) -> Result<(SolitonPair<T>, T, T, T)> {
        match self.model {
            Model::Coupled { soliton, alpha1, alpha2, coupling_sign } => Ok((soliton, alpha1, alpha2, coupling_sign)),
            Model::Single { .. } => Err(Error::InvalidParameter(format!("{} is not a coupled scenario", self.name))),
        }
    }

    pub fn exact_wave(&self, t: T) -> Result<WaveField<T>> {
        self.single_only()?;
        Ok(WaveField::from_fn(self.grid()?, |x| self.exact_value(x, t)))
    }

    pub fn exact_pair(&self, t: T) -> Result<CoupledField<T>> {
        let (soliton, ..) = self.coupled_only()?;
        Ok(soliton.field(self.grid()?, t))
    }

    /// Single-equation parameters with the true potential.
    pub fn problem_params(&self) -> Result<ProblemParams<T>> {
        let (beta, gamma, phase_sign) = self.single_only()?;
        let mut p = ProblemParams::over(beta, gamma, self.true_potential()?, self.final_time, self.steps)?;
        p.phase_sign = phase_sign;
        Ok(p)
    }

    /// Coupled parameters with the true coupling constants.
    pub fn coupled_params(&self) -> Result<CoupledParams<T>> {
        let (soliton, alpha1, alpha2, coupling_sign) = self.coupled_only()?;
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps must be at least 1".into()));
        }
        Ok(CoupledParams {
            alpha1,
            alpha2,
            zeta1: soliton.zeta,
            zeta2: soliton.zeta,
            potential1: vec![T::zero(); self.m],
            potential2: vec![T::zero(); self.m],
            dt: self.dt(),
            steps: self.steps,
            coupling_sign,
        })
    }

    /// Exact initial and final fields wired to the forward model.
    pub fn misfit_data(&self, mode: LinearMode) -> Result<MisfitData<T>> {
        MisfitData::new(
            self.exact_wave(T::zero())?,
            self.exact_wave(self.final_time)?,
            &self.problem_params()?,
            mode,
        )
    }

    pub fn coupled_data(&self) -> Result<CoupledData<T>> {
        CoupledData::new(
            self.exact_pair(T::zero())?,
            self.exact_pair(self.final_time)?,
            &self.coupled_params()?,
        )
    }

    /// `e_ψ` of the forward solve at the true parameters (summed over both
    /// fields for the coupled problem).
    pub fn forward_error(&self) -> Result<T> {
        self.forward_error_with(SplitOrder::Strang)
    }

    pub fn forward_error_with(&self, order: SplitOrder) -> Result<T> {
        if self.is_coupled() {
            if order == SplitOrder::Lie {
                return Err(Error::InvalidParameter("first-order splitting is only provided for the single equation".into()));
            }
            let data = self.coupled_data()?;
            let (z1, z2) = self.true_zetas().unwrap_or((T::zero(), T::zero()));
            return data.loss(z1, z2);
        }
        let p = self.problem_params()?;
        let prop = Propagator::new(self.grid()?, &p, LinearMode::Spectral)?;
        let f0 = self.exact_wave(T::zero())?;
        let out = match order {
            SplitOrder::Strang => prop.forward(&f0, &p.potential)?,
            SplitOrder::Lie => prop.forward_first_order(&f0, &p.potential)?,
        };
        rel_misfit(&out, &self.exact_wave(self.final_time)?)
    }
}

/// Max-norm PDE residual of the exact solution at time `t` on an `m`-point grid.
pub fn residual_check<T: Scalar>(s: &Scenario<T>, t: T, m: usize) -> Result<T> {
    residual_with_shift(s, t, m, T::zero())
}

/// Residual with the potential replaced by `V + shift`.
pub fn residual_with_shift<T: Scalar>(s: &Scenario<T>, t: T, m: usize, shift: T) -> Result<T> {
    let s = s.clone().with_grid_size(m);
    let grid = s.grid()?;
    let points = grid.points();
    let i = Complex::new(T::zero(), T::one());
    match s.model {
        Model::Single { beta, gamma, phase_sign } => {
            let psi = s.exact_wave(t)?;
            let psi_xx = spectral_derivative(&psi, 2);
            let worst = points
                .iter()
                .enumerate()
                .map(|(j, &x)| {
                    let u = psi.values()[j];
                    let v = s.potential_at(x) + shift;
                    let r = i * s.exact_time_derivative(x, t)
                        + psi_xx.values()[j] * beta
                        + u * (phase_sign * (gamma * u.norm_sqr() + v));
                    r.norm()
                })
                .fold(T::zero(), T::max);
            Ok(worst)
        }
        Model::Coupled { soliton, alpha1, alpha2, coupling_sign } => {
            let pair = soliton.field(grid, t);
            let fields = [&pair.psi1, &pair.psi2];
            let alphas = [alpha1, alpha2];
            let zeta = soliton.zeta;
            let mut worst = T::zero();
            for (idx, psi) in fields.iter().enumerate() {
                let d1 = spectral_derivative(psi, 1);
                let d2 = spectral_derivative(psi, 2);
                for (j, &x) in points.iter().enumerate() {
                    let a = pair.psi1.values()[j].norm_sqr();
                    let b = pair.psi2.values()[j].norm_sqr();
                    let f = if idx == 0 { a + zeta * b } else { zeta * a + b };
                    let u = psi.values()[j];
                    // iψ_t + ½ψ_xx − iαψ_x − Vψ + σ f ψ
                    let r = i * soliton.time_derivative(idx + 1, x, t) + d2.values()[j] * T::lit(0.5)
                        - i * d1.values()[j] * alphas[idx]
                        + u * (coupling_sign * f - shift);
                    worst = worst.max(r.norm());
                }
            }
            Ok(worst)
        }
    }
}

/// Splitting scheme used by a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitOrder {
    #[default]
    Strang,
    Lie,
}

/// Which discretization parameter a study refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refine {
    GridSize,
    Steps,
}

impl FromStr for Refine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" | "m" | "grid" => Ok(Self::GridSize),
            "N" | "n" | "steps" => Ok(Self::Steps),
            _ => Err(Error::InvalidParameter(format!("unknown refinement `{s}` (expected M or N)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow<T> {
    pub value: usize,
    pub e_psi: T,
}

impl<T: Scalar> ConvergenceRow<T> {
    /// Relative L2 error `‖num − exact‖ / ‖exact‖ = sqrt(2 e_ψ)`.
    pub fn l2_error(&self) -> T {
        (T::lit(2.0) * self.e_psi).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable<T> {
    pub refine: Refine,
    pub rows: Vec<ConvergenceRow<T>>,
}

impl<T: Scalar> ConvergenceTable<T> {
    /// Least-squares slope of `−log err` against `log value` over rows
    /// `from..`, i.e. the observed order `p` in `err ∝ value^{−p}`.
    fn fit(&self, from: usize, metric: impl Fn(&ConvergenceRow<T>) -> T) -> Option<T> {
        let tail = self.rows.get(from..)?;
        if tail.len() < 2 {
            return None;
        }
        let pts: Vec<(f64, f64)> = tail
            .iter()
            .map(|r| ((r.value as f64).ln(), metric(r).as_f64().ln()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = -sxy / sxx;
        slope.is_finite().then(|| T::lit(slope))
    }

    /// Observed order of the relative L2 error.
    pub fn l2_slope(&self, from: usize) -> Option<T> {
        self.fit(from, |r| r.l2_error())
    }

    /// Observed order of `e_ψ` itself (twice the L2 order, as `e_ψ` is squared).
    pub fn e_psi_slope(&self, from: usize) -> Option<T> {
        self.fit(from, |r| r.e_psi)
    }

    pub fn is_non_increasing(&self, rel_slack: T) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].e_psi <= w[0].e_psi * (T::one() + rel_slack))
    }
}

/// Forward error at the true parameters for each refinement value; rows
/// are computed in parallel and returned in input order.
pub fn convergence_study<T: Scalar>(
    s: &Scenario<T>,
    refine: Refine,
    values: &[usize],
    order: SplitOrder,
) -> Result<ConvergenceTable<T>> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("convergence study needs at least one value".into()));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("refinement values must be strictly increasing".into()));
    }
    let rows = values
        .par_iter()
        .map(|&v| {
            let case = match refine {
                Refine::GridSize => s.clone().with_grid_size(v),
                Refine::Steps => s.clone().with_steps(v),
            };
            Ok(ConvergenceRow {
                value: v,
                e_psi: case.forward_error_with(order)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable { refine, rows })
}

/// Evenly spaced points `lo, …, hi` (inclusive), `n ≥ 2`.
pub fn linspace<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    let step = (hi - lo) / T::from_count(n - 1);
    (0..n).map(|i| if i == n - 1 { hi } else { lo + step * T::from_count(i) }).collect()
}

/// Loss values on a tensor grid of coupling constants, row-major in `ζ₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape<T> {
    pub zeta1: Vec<T>,
    pub zeta2: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Scalar> Landscape<T> {
    pub fn value(&self, i: usize, j: usize) -> T {
        self.values[i * self.zeta2.len() + j]
    }

    /// Cell `(i, j)` with the smallest loss.
    pub fn argmin(&self) -> (usize, usize) {
        let k = self
            .values
            .iter()
            .enumerate()
            .fold((0, T::infinity()), |best, (k, &v)| if v < best.1 { (k, v) } else { best })
            .0;
        (k / self.zeta2.len(), k % self.zeta2.len())
    }

    /// `max |J(a, b) − J(b, a)|` over the grid; `None` unless both axes coincide.
    pub fn swap_defect(&self) -> Option<T> {
        if self.zeta1 != self.zeta2 {
            return None;
        }
        let n = self.zeta1.len();
        let mut worst = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.value(i, j) - self.value(j, i)).abs());
            }
        }
        Some(worst)
    }

    /// Rows `(ζ₁, ζ₂, J)` in storage order.
    pub fn rows(&self) -> impl Iterator<Item = (T, T, T)> + '_ {
        self.values.iter().enumerate().map(move |(k, &v)| {
            let n2 = self.zeta2.len();
            (self.zeta1[k / n2], self.zeta2[k % n2], v)
        })
    }
}

/// Coupled loss on the tensor grid `range1 × range2` with `n1 × n2` points.
pub fn landscape_scan<T: Scalar>(
    s: &Scenario<T>,
    range1: (T, T),
    range2: (T, T),
    n1: usize,
    n2: usize,
) -> Result<Landscape<T>> {
    if n1 < 2 || n2 < 2 {
        return Err(Error::InvalidParameter("landscape needs at least 2 points per axis".into()));
    }
    let data = s.coupled_data()?;
    let zeta1 = linspace(range1.0, range1.1, n1);
    let zeta2 = linspace(range2.0, range2.1, n2);
    let values = (0..n1 * n2)
        .into_par_iter()
        .map(|k| data.loss(zeta1[k / n2], zeta2[k % n2]))
        .collect::<Result<Vec<_>>>()?;
    Ok(Landscape { zeta1, zeta2, values })
}

/// Direct coupled forward solve at the scenario's true parameters.
pub fn coupled_forward<T: Scalar>(s: &Scenario<T>) -> Result<CoupledField<T>> {
    let p = s.coupled_params()?;
    CoupledPropagator::new(s.grid()?, &p)?.forward(&s.exact_pair(T::zero())?)
}
