//! Explicit Runge-Kutta tableaus and the reduced Van der Houwen parameterization.
//!
//! An `s`-stage explicit method is defined by a strictly lower triangular
//! `A` matrix, a weight vector `b`, and abscissae `c` derived from the row
//! sums of `A`. In the low-storage (Van der Houwen) structure every entry of
//! `A` below the first subdiagonal is tied to the weight of its column,
//!
//! ```text
//! a[i][j] = b[j]        for j <= i - 2,
//! a[i][i-1]             free,
//! ```
//!
//! so a full scheme is determined by the `s - 1` subdiagonal entries plus
//! the `s` weights: `2s - 1` unique coefficients.

use thiserror::Error;

/// Structural errors raised when assembling tableaus from raw parts.
#[derive(Debug, Error, PartialEq)]
pub enum TableauError {
    #[error("stage count must be at least 1")]
    EmptyTableau,
    #[error("a_sub has {got} entries, expected {expected} for {s} stages")]
    SubdiagonalLength {
        s: usize,
        got: usize,
        expected: usize,
    },
    #[error("b has {got} entries, expected {expected}")]
    WeightLength { got: usize, expected: usize },
    #[error("c has {got} entries, expected {expected}")]
    AbscissaLength { got: usize, expected: usize },
    #[error("A must be {s}x{s}, row {row} has {got} entries")]
    MatrixShape { s: usize, row: usize, got: usize },
    #[error("non-finite coefficient: {what}")]
    NonFinite { what: String },
}

/// Full explicit Butcher tableau `(A, b, c)` for an `s`-stage method.
///
/// `c` is always derived from the row sums of `A`; constructors never accept
/// an independent `c`, eliminating a whole class of inconsistencies. Use
/// [`ButcherTableau::from_parts`] to hold a deliberately inconsistent
/// tableau for inspection with [`validate_tableau`].
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    /// Stage count.
    pub s: usize,
    /// `s`x`s` stage coefficient matrix, strictly lower triangular.
    pub a: Vec<Vec<f64>>,
    /// Length-`s` weight vector.
    pub b: Vec<f64>,
    /// Length-`s` abscissae, `c[i] = sum_j a[i][j]`.
    pub c: Vec<f64>,
}

impl ButcherTableau {
    /// Builds a tableau from `A` and `b`, deriving `c` from row sums.
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self, TableauError> {
        let s = a.len();
        if s == 0 {
            return Err(TableauError::EmptyTableau);
        }
        for (row, ai) in a.iter().enumerate() {
            if ai.len() != s {
                return Err(TableauError::MatrixShape {
                    s,
                    row,
                    got: ai.len(),
                });
            }
        }
        if b.len() != s {
            return Err(TableauError::WeightLength {
                got: b.len(),
                expected: s,
            });
        }
        let c = a.iter().map(|row| row.iter().sum()).collect();
        Ok(Self { s, a, b, c })
    }

    /// Builds a tableau from explicit `(A, b, c)` parts without deriving `c`.
    ///
    /// Only shapes are checked; the result may violate the explicit-structure
    /// or row-sum invariants, which [`validate_tableau`] will report.
    pub fn from_parts(a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> Result<Self, TableauError> {
        let s = a.len();
        if s == 0 {
            return Err(TableauError::EmptyTableau);
        }
        for (row, ai) in a.iter().enumerate() {
            if ai.len() != s {
                return Err(TableauError::MatrixShape {
                    s,
                    row,
                    got: ai.len(),
                });
            }
        }
        if b.len() != s {
            return Err(TableauError::WeightLength {
                got: b.len(),
                expected: s,
            });
        }
        if c.len() != s {
            return Err(TableauError::AbscissaLength {
                got: c.len(),
                expected: s,
            });
        }
        Ok(Self { s, a, b, c })
    }

    /// The classical four-stage fourth-order method.
    pub fn classical_rk4() -> Self {
        let a = vec![
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.5, 0.0, 0.0, 0.0],
            vec![0.0, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ];
        let b = vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];
        Self::new(a, b).expect("static coefficients")
    }

    /// Forward Euler as a one-stage tableau.
    pub fn forward_euler() -> Self {
        Self::new(vec![vec![0.0]], vec![1.0]).expect("static coefficients")
    }
}

/// The `2s - 1` free coefficients of the reduced Van der Houwen scheme:
/// the subdiagonal entries `a[k+1][k]` and the weights `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedParameters {
    /// Stage count.
    pub s: usize,
    /// Length `s - 1`; entry `k` is `a[k+1][k]`.
    pub a_sub: Vec<f64>,
    /// Length `s` weight vector.
    pub b: Vec<f64>,
}

impl ReducedParameters {
    pub fn new(s: usize, a_sub: Vec<f64>, b: Vec<f64>) -> Result<Self, TableauError> {
        if s == 0 {
            return Err(TableauError::EmptyTableau);
        }
        if a_sub.len() != s - 1 {
            return Err(TableauError::SubdiagonalLength {
                s,
                got: a_sub.len(),
                expected: s - 1,
            });
        }
        if b.len() != s {
            return Err(TableauError::WeightLength {
                got: b.len(),
                expected: s,
            });
        }
        for (k, v) in a_sub.iter().enumerate() {
            if !v.is_finite() {
                return Err(TableauError::NonFinite {
                    what: format!("a({},{})", k + 1, k),
                });
            }
        }
        for (j, v) in b.iter().enumerate() {
            if !v.is_finite() {
                return Err(TableauError::NonFinite {
                    what: format!("b({j})"),
                });
            }
        }
        Ok(Self { s, a_sub, b })
    }

    /// Total number of reduced coefficients, `2s - 1`.
    pub fn len(&self) -> usize {
        2 * self.s - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Reads the coefficient addressed by `r`.
    ///
    /// Panics if `r` is out of range for this stage count.
    pub fn get(&self, r: CoefficientRef) -> f64 {
        match r {
            CoefficientRef::SubdiagonalA { row } => self.a_sub[row - 1],
            CoefficientRef::WeightB { index } => self.b[index],
        }
    }

    /// Writes the coefficient addressed by `r`.
    pub fn set(&mut self, r: CoefficientRef, value: f64) {
        match r {
            CoefficientRef::SubdiagonalA { row } => self.a_sub[row - 1] = value,
            CoefficientRef::WeightB { index } => self.b[index] = value,
        }
    }

    /// Extracts the reduced parameters back out of a full tableau.
    pub fn from_tableau(t: &ButcherTableau) -> Self {
        let a_sub = (1..t.s).map(|i| t.a[i][i - 1]).collect();
        Self {
            s: t.s,
            a_sub,
            b: t.b.clone(),
        }
    }
}

/// Address of one coefficient in the reduced set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoefficientRef {
    /// `a[row][row-1]`, the free subdiagonal entry of `row` (1-based rows `1..s`).
    SubdiagonalA { row: usize },
    /// `b[index]` for `index` in `0..s`.
    WeightB { index: usize },
}

impl CoefficientRef {
    /// Position of this coefficient in the canonical reduced ordering:
    /// subdiagonal entries `a[1][0]..a[s-1][s-2]` first, then the weights.
    pub fn reduced_index(&self, s: usize) -> usize {
        match *self {
            CoefficientRef::SubdiagonalA { row } => row - 1,
            CoefficientRef::WeightB { index } => (s - 1) + index,
        }
    }

    /// Inverse of [`reduced_index`](Self::reduced_index).
    pub fn from_reduced_index(s: usize, idx: usize) -> Self {
        if idx < s - 1 {
            CoefficientRef::SubdiagonalA { row: idx + 1 }
        } else {
            CoefficientRef::WeightB {
                index: idx - (s - 1),
            }
        }
    }

    /// Whether this reference is valid for an `s`-stage reduced scheme.
    pub fn in_range(&self, s: usize) -> bool {
        match *self {
            CoefficientRef::SubdiagonalA { row } => (1..s).contains(&row),
            CoefficientRef::WeightB { index } => index < s,
        }
    }

    /// Enumerates the whole reduced set in canonical order.
    pub fn all(s: usize) -> impl Iterator<Item = CoefficientRef> {
        (0..2 * s - 1).map(move |idx| Self::from_reduced_index(s, idx))
    }
}

impl std::fmt::Display for CoefficientRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            CoefficientRef::SubdiagonalA { row } => write!(f, "a({},{})", row, row - 1),
            CoefficientRef::WeightB { index } => write!(f, "b({index})"),
        }
    }
}

/// Expands the reduced parameter set into a full tableau.
///
/// Row `i` of the result holds `b[0], .., b[i-2]` followed by the free
/// subdiagonal entry `a_sub[i-1]`; everything on and above the diagonal is
/// zero; `c` is recomputed from row sums.
pub fn apply_constraints(params: &ReducedParameters) -> Result<ButcherTableau, TableauError> {
    let s = params.s;
    if s == 0 {
        return Err(TableauError::EmptyTableau);
    }
    if params.a_sub.len() != s - 1 {
        return Err(TableauError::SubdiagonalLength {
            s,
            got: params.a_sub.len(),
            expected: s - 1,
        });
    }
    if params.b.len() != s {
        return Err(TableauError::WeightLength {
            got: params.b.len(),
            expected: s,
        });
    }
    let mut a = vec![vec![0.0; s]; s];
    for i in 1..s {
        for j in 0..i - 1 {
            a[i][j] = params.b[j];
        }
        a[i][i - 1] = params.a_sub[i - 1];
    }
    ButcherTableau::new(a, params.b.clone())
}

/// Number of free parameters left after applying `active_heuristics`
/// independent constraints: `(2s - 1) - active_heuristics`.
pub fn free_parameter_count(s: usize, active_heuristics: usize) -> usize {
    (2 * s - 1).saturating_sub(active_heuristics)
}

/// One broken tableau invariant, addressed by index.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `A[row][col]` is nonzero on or above the diagonal.
    UpperTriangleNonzero { row: usize, col: usize, value: f64 },
    /// `c[row]` does not equal the row sum of `A[row]`.
    RowSumMismatch { row: usize, c: f64, row_sum: f64 },
    /// A vector or matrix row has the wrong length.
    ShapeMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::UpperTriangleNonzero { row, col, value } => {
                write!(f, "upper-triangle nonzero at ({row},{col}): {value}")
            }
            Violation::RowSumMismatch { row, c, row_sum } => {
                write!(f, "c[{row}] = {c} does not match row sum {row_sum}")
            }
            Violation::ShapeMismatch {
                what,
                got,
                expected,
            } => write!(f, "{what} has {got} entries, expected {expected}"),
        }
    }
}

const ROW_SUM_TOL: f64 = 1e-12;

/// Checks every structural invariant and returns the violations found.
///
/// An empty result certifies: `A` strictly lower triangular, `c` equal to
/// the row sums of `A` (so `c[0] = 0`), and all shapes consistent.
pub fn validate_tableau(t: &ButcherTableau) -> Vec<Violation> {
    let mut out = Vec::new();
    let s = t.s;
    if t.a.len() != s {
        out.push(Violation::ShapeMismatch {
            what: "A",
            got: t.a.len(),
            expected: s,
        });
        return out;
    }
    for (i, row) in t.a.iter().enumerate() {
        if row.len() != s {
            out.push(Violation::ShapeMismatch {
                what: "A row",
                got: row.len(),
                expected: s,
            });
            return out;
        }
        for (j, &v) in row.iter().enumerate() {
            if j >= i && v != 0.0 {
                out.push(Violation::UpperTriangleNonzero {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    if t.b.len() != s {
        out.push(Violation::ShapeMismatch {
            what: "b",
            got: t.b.len(),
            expected: s,
        });
    }
    if t.c.len() != s {
        out.push(Violation::ShapeMismatch {
            what: "c",
            got: t.c.len(),
            expected: s,
        });
    } else {
        for i in 0..s {
            let row_sum: f64 = t.a[i].iter().sum();
            if (t.c[i] - row_sum).abs() > ROW_SUM_TOL {
                out.push(Violation::RowSumMismatch {
                    row: i,
                    c: t.c[i],
                    row_sum,
                });
            }
        }
    }
    out
}
