//! Potential parameterization `V = Φ c` over a fixed library of candidate
//! functions, and the proximal map of the L1 penalty.

pub mod expr;

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::field::Grid1D;
use crate::scalar::Scalar;

pub use expr::Expr;

/// One named candidate function.
#[derive(Debug, Clone, PartialEq)]
pub struct LibraryEntry {
    pub name: String,
    pub expr: Expr,
}

/// Ordered set of candidate functions `g_1 … g_{N_L}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Library {
    entries: Vec<LibraryEntry>,
}

const DEFAULT_ENTRIES: [(&str, &str); 10] = [
    ("x", "x"),
    ("sin(x)", "sin(x)"),
    ("cos(x)", "cos(x)"),
    ("x^2", "x^2"),
    ("sin^2(x)", "sin(x)^2"),
    ("cos^2(x)", "cos(x)^2"),
    ("exp(-x)", "exp(-x)"),
    ("exp(-2x)", "exp(-2*x)"),
    ("exp(-x^2)", "exp(-x^2)"),
    ("exp(-2x^2)", "exp(-2*x^2)"),
];

/// The ten-function library, in its fixed order:
/// `x, sin x, cos x, x², sin² x, cos² x, e^{−x}, e^{−2x}, e^{−x²}, e^{−2x²}`.
pub fn default_library() -> Library {
    Library::from_expressions(&DEFAULT_ENTRIES).expect("built-in library parses")
}

impl Library {
    pub fn new(entries: Vec<LibraryEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.name.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate library entry `{}`",
                    e.name
                )));
            }
        }
        if entries.is_empty() {
            return Err(Error::InvalidParameter("library is empty".into()));
        }
        Ok(Self { entries })
    }

    /// Parses `(name, expression)` pairs.
    pub fn from_expressions<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<Self> {
        let entries = pairs
            .iter()
            .map(|(name, src)| {
                Ok(LibraryEntry {
                    name: name.as_ref().to_string(),
                    expr: Expr::parse(src.as_ref())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    /// Subset of the default library, kept in the default order.
    pub fn select_default<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let full = default_library();
        for n in names {
            if full.index_of(n.as_ref()).is_none() {
                return Err(Error::InvalidParameter(format!(
                    "unknown library function `{}`",
                    n.as_ref()
                )));
            }
        }
        let wanted: HashSet<&str> = names.iter().map(|n| n.as_ref()).collect();
        Self::new(
            full.entries
                .into_iter()
                .filter(|e| wanted.contains(e.name.as_str()))
                .collect(),
        )
    }

    pub fn entries(&self) -> &[LibraryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn eval<T: Scalar>(&self, i: usize, x: T) -> T {
        self.entries[i].expr.eval(x)
    }
}

/// Coefficient vector `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coeffs<T>(pub Vec<T>);

impl<T: Scalar> Coeffs<T> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn l1_norm(&self) -> T {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

/// Sampled library `Φ` with `Φ e_i = (g_i(x_1), …, g_i(x_M))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryMatrix<T> {
    grid: Grid1D<T>,
    names: Vec<String>,
    columns: Vec<Vec<T>>,
}

/// Samples every library function on the grid.
pub fn assemble<T: Scalar>(lib: &Library, grid: &Grid1D<T>) -> Result<DictionaryMatrix<T>> {
    let points = grid.points();
    let mut columns = Vec::with_capacity(lib.len());
    for (i, entry) in lib.entries().iter().enumerate() {
        let col: Vec<T> = points.iter().map(|&x| lib.eval(i, x)).collect();
        if let Some(j) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonfiniteSample {
                name: entry.name.clone(),
                x: points[j].as_f64(),
            });
        }
        columns.push(col);
    }
    Ok(DictionaryMatrix {
        grid: *grid,
        names: lib.names().into_iter().map(String::from).collect(),
        columns,
    })
}

/// `V = Φ c`.
pub fn synthesize<T: Scalar>(phi: &DictionaryMatrix<T>, c: &Coeffs<T>) -> Result<Vec<T>> {
    phi.apply(c.as_slice())
}

impl<T: Scalar> DictionaryMatrix<T> {
    /// Builds a matrix from explicit columns.
    pub fn from_columns(grid: Grid1D<T>, names: Vec<String>, columns: Vec<Vec<T>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if let Some(col) = columns.iter().find(|c| c.len() != grid.len()) {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: col.len(),
            });
        }
        Ok(Self { grid, names, columns })
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn rows(&self) -> usize {
        self.grid.len()
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, i: usize) -> &[T] {
        &self.columns[i]
    }

    /// `Φ c`.
    pub fn apply(&self, c: &[T]) -> Result<Vec<T>> {
        if c.len() != self.cols() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} library columns",
                c.len(),
                self.cols()
            )));
        }
        let mut v = vec![T::zero(); self.rows()];
        for (col, &ci) in self.columns.iter().zip(c) {
            if ci == T::zero() {
                continue;
            }
            for (vj, &g) in v.iter_mut().zip(col) {
                *vj = *vj + ci * g;
            }
        }
        Ok(v)
    }

    /// `Φᵀ v`.
    pub fn apply_transpose(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.rows() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for {} library rows",
                v.len(),
                self.rows()
            )));
        }
        Ok(self
            .columns
            .iter()
            .map(|col| col.iter().zip(v).map(|(&g, &x)| g * x).sum())
            .collect())
    }

    /// Copy with unit-norm columns, plus the norms that were divided out.
    ///
    /// Coefficients `d` of the normalized matrix map back to `c_i = d_i / s_i`.
    pub fn normalized(&self) -> (Self, Vec<T>) {
        let scales: Vec<T> = self
            .columns
            .iter()
            .map(|col| {
                let n = col.iter().map(|&g| g * g).sum::<T>().sqrt();
                if n > T::zero() {
                    n
                } else {
                    T::one()
                }
            })
            .collect();
        let columns = self
            .columns
            .iter()
            .zip(&scales)
            .map(|(col, &s)| col.iter().map(|&g| g / s).collect())
            .collect();
        (
            Self {
                grid: self.grid,
                names: self.names.clone(),
                columns,
            },
            scales,
        )
    }

    /// Ratio of the largest to the smallest singular value of `Φ`.
    pub fn condition_number(&self) -> f64 {
        let m = nalgebra::DMatrix::from_fn(self.rows(), self.cols(), |r, c| self.columns[c][r].as_f64());
        let sv = m.singular_values();
        let max = sv.iter().cloned().fold(0.0, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }
}

/// Proximal map of `θ‖·‖₁`: `sign(c_i) max(|c_i| − θ, 0)`.
pub fn soft_threshold<T: Scalar>(c: &Coeffs<T>, theta: T) -> Coeffs<T> {
    Coeffs(
        c.0.iter()
            .map(|&ci| {
                let shrunk = ci.abs() - theta;
                if shrunk > T::zero() {
                    ci.signum() * shrunk
                } else {
                    T::zero()
                }
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_library_members() {
        let lib = default_library();
        assert_eq!(lib.len(), 10);
        assert_eq!(lib.eval(3, 2.0), 4.0);
        assert_eq!(lib.eval(9, 0.0), 1.0);
        assert_eq!(lib.eval(0, -3.0), -3.0);
        assert_eq!(lib.index_of("cos^2(x)"), Some(5));
    }

    #[test]
    fn select_keeps_default_order() {
        let lib = Library::select_default(&["exp(-2x^2)", "x^2"]).unwrap();
        assert_eq!(lib.names(), vec!["x^2", "exp(-2x^2)"]);
        assert!(Library::select_default(&["tan(x)"]).is_err());
    }

    #[test]
    fn custom_library_rules() {
        let lib = Library::from_expressions(&[("zero", "0*x"), ("quad", "x^2 + 1")]).unwrap();
        let g = Grid1D::<f64>::new(-1.0, 1.0, 8).unwrap();
        let phi = assemble(&lib, &g).unwrap();
        assert!(phi.column(0).iter().all(|&v| v == 0.0));
        assert!(Library::from_expressions(&[("a", "x"), ("a", "x^2")]).is_err());
        assert!(Library::from_expressions(&[("bad", "log(x)")]).is_err());
    }

    #[test]
    fn assemble_shape_and_columns() {
        let g = Grid1D::<f64>::new(-10.0, 10.0, 4000).unwrap();
        let phi = assemble(&default_library(), &g).unwrap();
        assert_eq!((phi.rows(), phi.cols()), (4000, 10));
        for i in 0..10 {
            let mut e = vec![0.0; 10];
            e[i] = 1.0;
            assert_eq!(phi.apply(&e).unwrap(), phi.column(i));
        }
    }

    #[test]
    fn assemble_reports_overflow() {
        let g = Grid1D::<f64>::new(-400.0, 0.0, 16).unwrap();
        let err = assemble(&default_library(), &g).unwrap_err();
        assert!(matches!(err, Error::NonfiniteSample { ref name, .. } if name == "exp(-2x)"));
    }

    #[test]
    fn truth_potentials() {
        let lib = default_library();
        let g = Grid1D::<f64>::new(-2.0, 2.0, 4).unwrap();
        let phi = assemble(&lib, &g).unwrap();
        let mut c = Coeffs::zeros(10);
        c.0[3] = 4.0;
        c.0[9] = -1.0;
        let v = synthesize(&phi, &c).unwrap();
        // grid points -1, 0, 1, 2
        assert_eq!(v[1], -1.0);
        assert!((v[2] - (4.0 - (-2.0f64).exp())).abs() < 1e-15);

        let mut c2 = Coeffs::zeros(10);
        c2.0[5] = -1.0;
        assert_eq!(synthesize(&phi, &c2).unwrap()[1], -1.0);
        assert!(synthesize(&phi, &Coeffs::zeros(10)).unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(
            synthesize(&phi, &Coeffs::zeros(9)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn truth_lies_in_span() {
        let g = Grid1D::<f64>::new(-10.0, 10.0, 4000).unwrap();
        let phi = assemble(&default_library(), &g).unwrap();
        let mut c = Coeffs::zeros(10);
        c.0[3] = 4.0;
        c.0[9] = -1.0;
        let v = synthesize(&phi, &c).unwrap();
        let exact: Vec<f64> = g.points().iter().map(|x| 4.0 * x * x - (-2.0 * x * x).exp()).collect();
        assert!(crate::field::rel_err_vector(&v, &exact).unwrap() < 1e-14);
    }

    #[test]
    fn soft_threshold_cases() {
        let c = Coeffs(vec![0.5f64, -0.1, -0.7, 0.0]);
        let out = soft_threshold(&c, 0.2);
        let expected = [0.3, 0.0, -0.5, 0.0];
        for (a, b) in out.0.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(soft_threshold(&c, 0.0), c);
    }

    #[test]
    fn normalization_maps_back() {
        let g = Grid1D::<f64>::new(0.0, std::f64::consts::TAU, 64).unwrap();
        let phi = assemble(&default_library(), &g).unwrap();
        let (unit, scales) = phi.normalized();
        for i in 0..10 {
            let n: f64 = unit.column(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
        let d: Vec<f64> = (0..10).map(|i| (i as f64 - 4.5) * 0.1).collect();
        let c: Vec<f64> = d.iter().zip(&scales).map(|(di, s)| di / s).collect();
        let a = unit.apply(&d).unwrap();
        let b = phi.apply(&c).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(phi.condition_number() > 1.0);
    }

    proptest! {
        #[test]
        fn synthesize_is_linear(
            c1 in proptest::collection::vec(-5.0f64..5.0, 10),
            c2 in proptest::collection::vec(-5.0f64..5.0, 10),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let g = Grid1D::<f64>::new(-3.0, 3.0, 64).unwrap();
            let phi = assemble(&default_library(), &g).unwrap();
            let mix: Vec<f64> = c1.iter().zip(&c2).map(|(x, y)| a * x + b * y).collect();
            let lhs = phi.apply(&mix).unwrap();
            let v1 = phi.apply(&c1).unwrap();
            let v2 = phi.apply(&c2).unwrap();
            for j in 0..64 {
                let rhs = a * v1[j] + b * v2[j];
                prop_assert!((lhs[j] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }
        }

        #[test]
        fn soft_threshold_is_nonexpansive(
            x in proptest::collection::vec(-3.0f64..3.0, 8),
            y in proptest::collection::vec(-3.0f64..3.0, 8),
            theta in 0.0f64..2.0,
        ) {
            let px = soft_threshold(&Coeffs(x.clone()), theta);
            let py = soft_threshold(&Coeffs(y.clone()), theta);
            let d_out: f64 = px.0.iter().zip(&py.0).map(|(a, b)| (a - b).powi(2)).sum();
            let d_in: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
            prop_assert!(d_out <= d_in + 1e-15);
        }
    }
}
