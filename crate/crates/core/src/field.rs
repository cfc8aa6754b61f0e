//! Uniform periodic grids, complex wave fields and their diagonal Fourier
//! operators.
//!
//! Linear propagation steps are circular convolutions, which the discrete
//! Fourier transform diagonalizes; a [`SpectralSymbol`] is the list of
//! per-mode multipliers of such an operator. Multipliers are stored in the
//! transform's natural order (`0, 1, …, ⌈M/2⌉−1, −⌊M/2⌋, …, −1`), so that for
//! even `M` the Nyquist mode carries the wavenumber `−M/2`.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniform grid on `(a, b]` with `M` points `x_j = a + j (b − a) / M`,
/// `j = 1..=M`. The right endpoint is a grid point, the left one is not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D<T> {
    a: T,
    b: T,
    m: usize,
    dx: T,
}

impl<T: Scalar> Grid1D<T> {
    pub fn new(a: T, b: T, m: usize) -> Result<Self> {
        if !(b > a) || m < 2 || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidDomain {
                a: a.as_f64(),
                b: b.as_f64(),
                m,
            });
        }
        Ok(Self {
            a,
            b,
            m,
            dx: (b - a) / T::from_count(m),
        })
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn b(&self) -> T {
        self.b
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn length(&self) -> T {
        self.b - self.a
    }

    /// Grid point `x_j` for the 1-based index `j`.
    pub fn point(&self, j: usize) -> T {
        if j == self.m {
            self.b
        } else {
            self.a + self.length() * T::from_count(j) / T::from_count(self.m)
        }
    }

    /// All grid points `x_1 … x_M`.
    pub fn points(&self) -> Vec<T> {
        (1..=self.m).map(|j| self.point(j)).collect()
    }

    /// Integer mode index of transform bin `n` in the symmetric layout.
    pub fn mode_index(&self, n: usize) -> isize {
        if n < self.m.div_ceil(2) {
            n as isize
        } else {
            n as isize - self.m as isize
        }
    }

    /// Transform bin holding the symmetric mode index `j`.
    pub fn bin_of_mode(&self, j: isize) -> Option<usize> {
        let m = self.m as isize;
        let lo = -(m / 2);
        let hi = (m - 1) / 2;
        if j < lo || j > hi {
            return None;
        }
        Some(if j >= 0 { j as usize } else { (j + m) as usize })
    }

    /// Angular wavenumbers `k = 2π j / (b − a)` in transform order.
    pub fn wavenumbers(&self) -> Vec<T> {
        let scale = T::TAU() / self.length();
        (0..self.m)
            .map(|n| scale * T::lit(self.mode_index(n) as f64))
            .collect()
    }
}

/// Complex samples of a wave function on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField<T> {
    grid: Grid1D<T>,
    values: Vec<Complex<T>>,
}

impl<T: Scalar> WaveField<T> {
    pub fn new(grid: Grid1D<T>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if !values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonfiniteField);
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Grid1D<T>, f: impl Fn(T) -> Complex<T>) -> Self {
        let values = grid.points().into_iter().map(f).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: Grid1D<T>) -> Self {
        Self {
            grid,
            values: vec![Complex::new(T::zero(), T::zero()); grid.len()],
        }
    }

    pub(crate) fn from_parts_unchecked(grid: Grid1D<T>, values: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Unweighted squared Euclidean norm of the samples.
    pub fn norm_sqr(&self) -> T {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Multiplies every sample by `alpha`.
    pub fn scaled(&self, alpha: Complex<T>) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&z| z * alpha).collect(),
        }
    }

    pub(crate) fn check_same_len(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }
}

/// Diagonal Fourier-domain multiplier of a circular convolution operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSymbol<T> {
    multipliers: Vec<Complex<T>>,
}

impl<T: Scalar> SpectralSymbol<T> {
    /// Builds a symbol from multipliers given in transform order.
    pub fn new(multipliers: Vec<Complex<T>>) -> Self {
        Self { multipliers }
    }

    pub fn identity(m: usize) -> Self {
        Self {
            multipliers: vec![Complex::new(T::one(), T::zero()); m],
        }
    }

    /// Evaluates `f(k)` at every wavenumber of the grid.
    pub fn from_wavenumbers(grid: &Grid1D<T>, f: impl Fn(T) -> Complex<T>) -> Self {
        Self {
            multipliers: grid.wavenumbers().into_iter().map(f).collect(),
        }
    }

    pub fn multipliers(&self) -> &[Complex<T>] {
        &self.multipliers
    }

    pub fn len(&self) -> usize {
        self.multipliers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multipliers.is_empty()
    }

    /// Multiplier of the symmetric mode index `j`.
    pub fn at_mode(&self, grid: &Grid1D<T>, j: isize) -> Option<Complex<T>> {
        grid.bin_of_mode(j).map(|n| self.multipliers[n])
    }

    /// Symbol of the adjoint operator.
    pub fn conj(&self) -> Self {
        Self {
            multipliers: self.multipliers.iter().map(|z| z.conj()).collect(),
        }
    }

    /// Symbol of the composition of two diagonal operators.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(Self {
            multipliers: self
                .multipliers
                .iter()
                .zip(&other.multipliers)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    pub fn max_modulus_defect(&self) -> T {
        self.multipliers
            .iter()
            .map(|z| (z.norm() - T::one()).abs())
            .fold(T::zero(), T::max)
    }
}

/// Planned forward/inverse transforms of a fixed length.
#[derive(Clone)]
pub struct Spectral<T: Scalar> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    m: usize,
}

impl<T: Scalar> std::fmt::Debug for Spectral<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("m", &self.m).finish()
    }
}

impl<T: Scalar> Spectral<T> {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
            m,
        }
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn forward(&self, buf: &mut [Complex<T>]) {
        self.forward.process(buf);
    }

    /// Inverse transform including the `1/M` normalization.
    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        self.inverse.process(buf);
        let scale = T::one() / T::from_count(self.m);
        buf.iter_mut().for_each(|z| *z = z.scale(scale));
    }

    /// In-place `F⁻¹ diag(multipliers) F`.
    pub fn apply(&self, buf: &mut [Complex<T>], multipliers: &[Complex<T>]) {
        debug_assert_eq!(buf.len(), multipliers.len());
        self.forward.process(buf);
        let scale = T::one() / T::from_count(self.m);
        for (z, m) in buf.iter_mut().zip(multipliers) {
            *z = *z * m.scale(scale);
        }
        self.inverse.process(buf);
    }
}

/// Applies the circular convolution operator with symbol `s` to `f`.
pub fn apply_symbol<T: Scalar>(f: &WaveField<T>, s: &SpectralSymbol<T>) -> Result<WaveField<T>> {
    if f.len() != s.len() {
        return Err(Error::LengthMismatch {
            expected: f.len(),
            found: s.len(),
        });
    }
    let plan = Spectral::new(f.len());
    let mut values = f.values.clone();
    plan.apply(&mut values, s.multipliers());
    Ok(WaveField::from_parts_unchecked(f.grid, values))
}

/// Spectral derivative of the given order, `F⁻¹ (ik)^order F f`.
pub fn spectral_derivative<T: Scalar>(f: &WaveField<T>, order: u32) -> WaveField<T> {
    let i = Complex::new(T::zero(), T::one());
    let symbol = SpectralSymbol::from_wavenumbers(f.grid(), |k| (i * k).powu(order));
    let plan = Spectral::new(f.len());
    let mut values = f.values.clone();
    plan.apply(&mut values, symbol.multipliers());
    WaveField::from_parts_unchecked(f.grid, values)
}

/// Half the squared relative misfit, `½‖num − exact‖² / ‖exact‖²`.
pub fn rel_misfit<T: Scalar>(num: &WaveField<T>, exact: &WaveField<T>) -> Result<T> {
    num.check_same_len(exact)?;
    let reference = exact.norm_sqr();
    if reference <= T::zero() {
        return Err(Error::ZeroReference);
    }
    let diff: T = num
        .values
        .iter()
        .zip(&exact.values)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(T::lit(0.5) * diff / reference)
}

/// Relative Euclidean error `‖num − exact‖ / ‖exact‖` of real vectors.
pub fn rel_err_vector<T: Scalar>(v_num: &[T], v_exact: &[T]) -> Result<T> {
    if v_num.len() != v_exact.len() {
        return Err(Error::LengthMismatch {
            expected: v_exact.len(),
            found: v_num.len(),
        });
    }
    let reference: T = v_exact.iter().map(|&v| v * v).sum();
    if reference <= T::zero() {
        return Err(Error::ZeroReference);
    }
    let diff: T = v_num
        .iter()
        .zip(v_exact)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok((diff / reference).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn random_field(grid: Grid1D<f64>, rng: &mut ChaCha8Rng) -> WaveField<f64> {
        let values = (0..grid.len())
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        WaveField::new(grid, values).unwrap()
    }

    #[test]
    fn grid_spacing_and_endpoints() {
        let g = Grid1D::<f64>::new(-10.0, 10.0, 4000).unwrap();
        assert!((g.dx() - 0.005).abs() < 1e-15);
        assert_eq!(g.point(4000), 10.0);

        let g = Grid1D::<f64>::new(0.0, 1.0, 2).unwrap();
        assert_eq!(g.points(), vec![0.5, 1.0]);

        let g = Grid1D::<f64>::new(-20.0, 80.0, 1024).unwrap();
        assert_eq!(g.dx(), 100.0 / 1024.0);
        assert!((g.point(1) - (-20.0 + 100.0 / 1024.0)).abs() < 1e-13);
    }

    #[test]
    fn grid_rejects_bad_domains() {
        assert!(matches!(
            Grid1D::<f64>::new(1.0, 1.0, 8),
            Err(Error::InvalidDomain { .. })
        ));
        assert!(Grid1D::<f64>::new(2.0, 1.0, 8).is_err());
        assert!(Grid1D::<f64>::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn wavenumber_layout_even_and_odd() {
        let g = Grid1D::<f64>::new(0.0, std::f64::consts::TAU, 8).unwrap();
        let modes: Vec<isize> = (0..8).map(|n| g.mode_index(n)).collect();
        assert_eq!(modes, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(g.bin_of_mode(-4), Some(4));
        assert_eq!(g.bin_of_mode(4), None);

        let g = Grid1D::<f64>::new(0.0, std::f64::consts::TAU, 7).unwrap();
        let modes: Vec<isize> = (0..7).map(|n| g.mode_index(n)).collect();
        assert_eq!(modes, vec![0, 1, 2, 3, -3, -2, -1]);
        let k = g.wavenumbers();
        assert!((k[3] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn identity_symbol_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = Grid1D::<f64>::new(-3.0, 5.0, 64).unwrap();
        let f = random_field(g, &mut rng);
        let out = apply_symbol(&f, &SpectralSymbol::identity(64)).unwrap();
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn pure_mode_is_eigenvector() {
        for m in [16usize, 15] {
            let g = Grid1D::<f64>::new(-1.0, 2.0, m).unwrap();
            let k = g.wavenumbers();
            let mut rng = ChaCha8Rng::seed_from_u64(m as u64);
            let s = SpectralSymbol::new(
                (0..m)
                    .map(|_| c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
                    .collect(),
            );
            for (&kn, &mn) in k.iter().zip(s.multipliers()) {
                let f = WaveField::from_fn(g, |x| Complex::from_polar(1.0, kn * x));
                let out = apply_symbol(&f, &s).unwrap();
                for (o, v) in out.values().iter().zip(f.values()) {
                    assert!((o - mn * v).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unit_modulus_symbol_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = Grid1D::<f64>::new(0.0, 1.0, 256).unwrap();
        let f = random_field(g, &mut rng);
        let s = SpectralSymbol::new(
            (0..256)
                .map(|_| Complex::from_polar(1.0, rng.random_range(-3.0..3.0)))
                .collect(),
        );
        let out = apply_symbol(&f, &s).unwrap();
        assert!((out.norm() - f.norm()).abs() / f.norm() < 1e-12);
    }

    #[test]
    fn apply_symbol_length_mismatch() {
        let g = Grid1D::<f64>::new(0.0, 1.0, 8).unwrap();
        let f = WaveField::zeros(g);
        assert!(matches!(
            apply_symbol(&f, &SpectralSymbol::identity(9)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn transform_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in [8usize, 9, 100, 1023, 4096] {
            let g = Grid1D::<f64>::new(0.0, 1.0, m).unwrap();
            let f = random_field(g, &mut rng);
            let plan = Spectral::new(m);
            let mut buf = f.values().to_vec();
            plan.forward(&mut buf);
            plan.inverse(&mut buf);
            let err: f64 = buf
                .iter()
                .zip(f.values())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err / f.norm() < 1e-12, "M={m}: {err}");
        }
    }

    #[test]
    fn misfit_values() {
        let g = Grid1D::<f64>::new(0.0, 1.0, 16).unwrap();
        let exact = WaveField::from_fn(g, |x| c(x.sin() + 1.0, x));
        assert_eq!(rel_misfit(&exact, &exact).unwrap(), 0.0);
        let twice = exact.scaled(c(2.0, 0.0));
        assert!((rel_misfit(&twice, &exact).unwrap() - 0.5).abs() < 1e-15);
        let neg = exact.scaled(c(-1.0, 0.0));
        assert!((rel_misfit(&neg, &exact).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(
            rel_misfit(&exact, &WaveField::zeros(g)),
            Err(Error::ZeroReference)
        );
    }

    #[test]
    fn vector_error_values() {
        let v = vec![1.0, -2.0, 3.5];
        assert_eq!(rel_err_vector(&v, &v).unwrap(), 0.0);
        assert_eq!(rel_err_vector(&[0.0; 3], &v).unwrap(), 1.0);
        let scaled: Vec<f64> = v.iter().map(|x| 1.1 * x).collect();
        assert!((rel_err_vector(&scaled, &v).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(rel_err_vector(&v, &[0.0; 3]), Err(Error::ZeroReference));
    }

    #[test]
    fn second_derivative_of_sine() {
        let g = Grid1D::<f64>::new(0.0, std::f64::consts::TAU, 32).unwrap();
        let f = WaveField::from_fn(g, |x| c(x.sin(), 0.0));
        let d2 = spectral_derivative(&f, 2);
        for (d, v) in d2.values().iter().zip(f.values()) {
            assert!((d + v).norm() < 1e-13);
        }
    }

    #[test]
    fn single_precision_roundtrip() {
        let g = Grid1D::<f32>::new(0.0, 1.0, 64).unwrap();
        let f = WaveField::from_fn(g, |x| Complex::new(x.cos(), x));
        let s = SpectralSymbol::from_wavenumbers(&g, |k| Complex::from_polar(1.0, 0.01 * k * k));
        let out = apply_symbol(&apply_symbol(&f, &s).unwrap(), &s.conj()).unwrap();
        assert!(rel_misfit(&out, &f).unwrap() < 1e-10);
    }
}
