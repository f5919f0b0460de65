//! Dense numerical primitives shared by the whole toolkit.
//!
//! A [`Dictionary`] is a matrix of unit-norm columns ("atoms") with its Gram
//! matrix and mutual coherence cached. [`ProjectedState`] holds everything a
//! greedy selection step needs: the atoms projected onto the orthogonal
//! complement of the selected span, their normalizations, and the projected
//! residual.
//!
//! Projections are computed from an incrementally grown orthonormal basis of
//! the selected span (modified Gram–Schmidt with one re-orthogonalization
//! pass) rather than from a pseudo-inverse. The exact-tie demonstrations in
//! [`crate::adversarial`] sit on certificate boundaries, where that extra
//! orthogonality pays off.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Numerical tolerances used across the crate. Exact-equality claims (score
/// ties, closed-form correlation values) are always checked against these
/// documented constants, never against ad-hoc literals.
pub mod tol {
    /// Maximum deviation from unit norm tolerated for dictionary columns.
    pub const UNIT_NORM: f64 = 1e-12;
    /// Columns with norm below this cannot be normalized.
    pub const ZERO_COLUMN: f64 = 1e-14;
    /// Orthogonality slack for projected quantities (residual vs. selected
    /// atoms, projected atoms vs. selected span, projection idempotence).
    pub const ORTHOGONALITY: f64 = 1e-10;
    /// A projected atom with norm below this is treated as linearly
    /// dependent on the selected span (its normalized version is the zero
    /// vector, and it can never be selected).
    pub const DEGENERATE_ATOM: f64 = 1e-10;
    /// Residual norms at or below this stop a solver run early.
    pub const RESIDUAL_STOP: f64 = 1e-12;
    /// Default absolute slack when grouping scores into a tie set.
    pub const DEFAULT_TIE: f64 = 1e-9;
    /// Slack for closed-form exactness checks on the equiangular instance
    /// (projected correlations, boundary score ties).
    pub const EXACTNESS: f64 = 1e-9;
    /// Relative slack for flagging a strict inequality as sitting exactly on
    /// its boundary.
    pub const BOUNDARY: f64 = 1e-12;
    /// Slack for algebraic identities cross-checked numerically.
    pub const IDENTITY: f64 = 1e-12;
}

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("column {index} has norm below {limit:e} and cannot be normalized")]
    ZeroColumn { index: usize, limit: f64 },
    #[error("active set is rank deficient: atom {index} lies in the span of the atoms before it")]
    RankDeficientActiveSet { index: usize },
    #[error("invalid dimensions: need n >= m >= 1, got m={m}, n={n}")]
    InvalidDimensions { m: usize, n: usize },
    #[error("dimension mismatch: expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid active set: index {index} out of range or repeated (n={n})")]
    InvalidActiveSet { index: usize, n: usize },
    #[error("{path}:{line}: cannot parse {field:?} as a number")]
    Parse { path: String, line: usize, field: String },
    #[error("{path}:{line}: row has {got} fields, expected {expected}")]
    RaggedRow { path: String, line: usize, expected: usize, got: usize },
    #[error("{path}: file holds no numeric rows")]
    EmptyMatrix { path: String },
    #[error("{path}: expected a single-row or single-column file, got {rows}x{cols}")]
    NotAVector { path: String, rows: usize, cols: usize },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A dictionary of `n` unit-norm atoms in `R^m`, with cached Gram matrix and
/// mutual coherence.
#[derive(Debug, Clone)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    gram: DMatrix<f64>,
    coherence: f64,
}

impl Dictionary {
    /// Builds a dictionary by rescaling every column of `raw` to unit norm.
    pub fn normalize_columns(raw: DMatrix<f64>) -> Result<Self, LinalgError> {
        let mut atoms = raw;
        for j in 0..atoms.ncols() {
            let norm = atoms.column(j).norm();
            if norm.is_nan() || norm <= tol::ZERO_COLUMN {
                return Err(LinalgError::ZeroColumn {
                    index: j,
                    limit: tol::ZERO_COLUMN,
                });
            }
            let mut col = atoms.column_mut(j);
            col /= norm;
        }
        let gram_raw = atoms.transpose() * &atoms;
        // A'A is symmetric in exact arithmetic; symmetrize to keep the cached
        // copy symmetric to the last bit.
        let gram = (&gram_raw + gram_raw.transpose()) * 0.5;
        let mut coherence: f64 = 0.0;
        for i in 0..gram.nrows() {
            for j in (i + 1)..gram.ncols() {
                coherence = coherence.max(gram[(i, j)].abs());
            }
        }
        Ok(Self {
            atoms,
            gram,
            coherence,
        })
    }

    /// Number of rows (ambient dimension).
    pub fn m(&self) -> usize {
        self.atoms.nrows()
    }

    /// Number of atoms.
    pub fn n(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn atom(&self, i: usize) -> DVector<f64> {
        self.atoms.column(i).into_owned()
    }

    /// Mutual coherence: the largest absolute inner product between two
    /// distinct atoms (0 for a single-atom dictionary).
    pub fn mutual_coherence(&self) -> f64 {
        self.coherence
    }

    /// Synthesizes `A x` for a full-length coefficient vector.
    pub fn synthesize(&self, x: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        if x.len() != self.n() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n(),
                got: x.len(),
            });
        }
        Ok(&self.atoms * x)
    }

    fn validate_active_set(&self, active: &[usize]) -> Result<(), LinalgError> {
        let mut seen = vec![false; self.n()];
        for &i in active {
            if i >= self.n() || seen[i] {
                return Err(LinalgError::InvalidActiveSet {
                    index: i,
                    n: self.n(),
                });
            }
            seen[i] = true;
        }
        Ok(())
    }

    /// Orthonormal basis of the span of the atoms indexed by `active`.
    fn span_basis(&self, active: &[usize]) -> Result<OrthoBasis, LinalgError> {
        self.validate_active_set(active)?;
        let mut basis = OrthoBasis::new(self.m());
        for &i in active {
            if !basis.push(&self.atom(i)) {
                return Err(LinalgError::RankDeficientActiveSet { index: i });
            }
        }
        Ok(basis)
    }

    /// Projects `v` onto the orthogonal complement of the span of the atoms
    /// indexed by `active`.
    pub fn project_complement(
        &self,
        active: &[usize],
        v: &DVector<f64>,
    ) -> Result<DVector<f64>, LinalgError> {
        if v.len() != self.m() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.m(),
                got: v.len(),
            });
        }
        Ok(self.span_basis(active)?.project_complement(v))
    }

    /// Computes the projected atoms for every index outside `active`.
    /// The returned state carries a zero residual; attach the data vector
    /// with [`ProjectedState::attach_residual`] before scoring candidates.
    pub fn projected_atoms(&self, active: &[usize]) -> Result<ProjectedState, LinalgError> {
        if active.len() >= self.n() {
            return Err(LinalgError::InvalidActiveSet {
                index: self.n(),
                n: self.n(),
            });
        }
        let basis = self.span_basis(active)?;
        let mut projected = BTreeMap::new();
        let mut normalized = BTreeMap::new();
        let mut norms = BTreeMap::new();
        let in_active = {
            let mut mask = vec![false; self.n()];
            for &i in active {
                mask[i] = true;
            }
            mask
        };
        for (i, &is_active) in in_active.iter().enumerate() {
            if is_active {
                continue;
            }
            let tilde = basis.project_complement(&self.atom(i));
            let norm = tilde.norm();
            let unit = if norm < tol::DEGENERATE_ATOM {
                DVector::zeros(self.m())
            } else {
                &tilde / norm
            };
            projected.insert(i, tilde);
            normalized.insert(i, unit);
            norms.insert(i, norm);
        }
        Ok(ProjectedState {
            active_set: active.to_vec(),
            basis,
            projected_atoms: projected,
            normalized_projected_atoms: normalized,
            projected_norms: norms,
            residual: DVector::zeros(self.m()),
        })
    }
}

/// Incrementally grown orthonormal basis (modified Gram–Schmidt with one
/// re-orthogonalization pass on every operation).
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    ambient_dim: usize,
    vectors: Vec<DVector<f64>>,
}

impl OrthoBasis {
    pub fn new(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            vectors: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    fn sweep(&self, v: &mut DVector<f64>) {
        for b in &self.vectors {
            let c = b.dot(v);
            v.axpy(-c, b, 1.0);
        }
    }

    /// Component of `v` orthogonal to the basis span.
    pub fn project_complement(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        self.sweep(&mut out);
        self.sweep(&mut out);
        out
    }

    /// Extends the basis with the direction of `v` not already spanned.
    /// Returns `false` (leaving the basis unchanged) when that direction is
    /// numerically zero.
    pub fn push(&mut self, v: &DVector<f64>) -> bool {
        debug_assert_eq!(v.len(), self.ambient_dim);
        let mut w = self.project_complement(v);
        let norm = w.norm();
        if norm < tol::DEGENERATE_ATOM {
            return false;
        }
        w /= norm;
        self.vectors.push(w);
        true
    }
}

/// Snapshot of a selection step: the active set `Q`, the residual projected
/// away from `span(A_Q)`, and for every remaining atom its projection onto
/// the orthogonal complement of that span (raw and normalized).
#[derive(Debug, Clone)]
pub struct ProjectedState {
    active_set: Vec<usize>,
    basis: OrthoBasis,
    projected_atoms: BTreeMap<usize, DVector<f64>>,
    normalized_projected_atoms: BTreeMap<usize, DVector<f64>>,
    projected_norms: BTreeMap<usize, f64>,
    residual: DVector<f64>,
}

impl ProjectedState {
    pub fn active_set(&self) -> &[usize] {
        &self.active_set
    }

    /// Projects the data vector onto the orthogonal complement of the
    /// selected span and stores it as the residual.
    pub fn attach_residual(&mut self, y: &DVector<f64>) -> Result<(), LinalgError> {
        if y.len() != self.residual.len() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.residual.len(),
                got: y.len(),
            });
        }
        self.residual = self.basis.project_complement(y);
        Ok(())
    }

    pub fn residual(&self) -> &DVector<f64> {
        &self.residual
    }

    /// Projected atom for a remaining index, if `i` is outside the active set.
    pub fn projected_atom(&self, i: usize) -> Option<&DVector<f64>> {
        self.projected_atoms.get(&i)
    }

    /// Normalized projected atom (zero vector when the projection degenerates).
    pub fn normalized_projected_atom(&self, i: usize) -> Option<&DVector<f64>> {
        self.normalized_projected_atoms.get(&i)
    }

    /// Norm of the projected atom for a remaining index.
    pub fn projected_norm(&self, i: usize) -> Option<f64> {
        self.projected_norms.get(&i).copied()
    }

    /// True when the projected atom is numerically zero (atom lies in the
    /// selected span).
    pub fn is_degenerate(&self, i: usize) -> bool {
        matches!(self.projected_norms.get(&i), Some(&n) if n < tol::DEGENERATE_ATOM)
    }

    /// Indices outside the active set, ascending.
    pub fn remaining(&self) -> impl Iterator<Item = usize> + '_ {
        self.projected_atoms.keys().copied()
    }
}

/// Lower bound on the mutual coherence achievable by `n` unit-norm atoms in
/// `R^m`: sqrt((n-m)/(m(n-1))), and 0 when n = m.
pub fn welch_bound(m: usize, n: usize) -> Result<f64, LinalgError> {
    if m < 1 || n < m {
        return Err(LinalgError::InvalidDimensions { m, n });
    }
    if n == m {
        return Ok(0.0);
    }
    let (m, n) = (m as f64, n as f64);
    Ok(((n - m) / (m * (n - 1.0))).sqrt())
}

fn read_to_string(path: &Path) -> Result<String, LinalgError> {
    std::fs::read_to_string(path).map_err(|source| LinalgError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a headerless CSV matrix: one row per line, comma-separated decimal
/// numbers, atoms stored as columns.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>, LinalgError> {
    let text = read_to_string(path)?;
    let display = path.display().to_string();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let field = field.trim();
            let value: f64 = field.parse().map_err(|_| LinalgError::Parse {
                path: display.clone(),
                line: lineno + 1,
                field: field.to_string(),
            })?;
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(LinalgError::RaggedRow {
                    path: display,
                    line: lineno + 1,
                    expected: first.len(),
                    got: row.len(),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(LinalgError::EmptyMatrix { path: display });
    }
    let nrows = rows.len();
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Writes a matrix in the same headerless CSV layout `read_matrix_csv`
/// accepts. Numbers use the shortest representation that round-trips.
pub fn write_matrix_csv(path: &Path, matrix: &DMatrix<f64>) -> Result<(), LinalgError> {
    let mut out = String::new();
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", matrix[(i, j)]);
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| LinalgError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a vector stored either as a single CSV column or a single CSV row.
pub fn read_vector_csv(path: &Path) -> Result<DVector<f64>, LinalgError> {
    let matrix = read_matrix_csv(path)?;
    if matrix.ncols() == 1 {
        Ok(matrix.column(0).into_owned())
    } else if matrix.nrows() == 1 {
        Ok(matrix.row(0).transpose())
    } else {
        Err(LinalgError::NotAVector {
            path: path.display().to_string(),
            rows: matrix.nrows(),
            cols: matrix.ncols(),
        })
    }
}

/// Writes a vector as a single CSV column.
pub fn write_vector_csv(path: &Path, v: &DVector<f64>) -> Result<(), LinalgError> {
    let matrix = DMatrix::from_fn(v.len(), 1, |i, _| v[i]);
    write_matrix_csv(path, &matrix)
}
