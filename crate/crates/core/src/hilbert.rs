//! Truncated qubit ⊗ Fock space: operators, states and the dense spectral
//! routines the rest of the crate is built on.
//!
//! Basis ordering is qubit-major: `|g,0⟩ … |g,N−1⟩, |e,0⟩ … |e,N−1⟩`. The
//! excited qubit state is the +1 eigenstate of σz.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Tolerance on Hermiticity and trace used when validating states.
pub const STATE_TOLERANCE: f64 = 1e-10;
/// Most negative eigenvalue a density matrix may carry.
pub const POSITIVITY_FLOOR: f64 = -1e-9;

/// Factor dimensions of an operator or state.
///
/// A qubit-only object has `fock == 1`, a Fock-only object has `qubit == 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub qubit: usize,
    pub fock: usize,
}

impl Dims {
    pub const fn composite(dim_fock: usize) -> Self {
        Self { qubit: 2, fock: dim_fock }
    }

    pub const fn fock(dim_fock: usize) -> Self {
        Self { qubit: 1, fock: dim_fock }
    }

    pub const fn qubit() -> Self {
        Self { qubit: 2, fock: 1 }
    }

    pub const fn total(&self) -> usize {
        self.qubit * self.fock
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Qubit {
    Ground,
    Excited,
}

impl Qubit {
    pub const fn index(self) -> usize {
        match self {
            Qubit::Ground => 0,
            Qubit::Excited => 1,
        }
    }
}

/// Index of `|q, n⟩` in the composite basis.
pub fn basis_index(dims: Dims, q: Qubit, n: usize) -> usize {
    q.index() * dims.fock + n
}

/// Dense complex operator tagged with its factor dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dims: Dims,
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn from_matrix(dims: Dims, matrix: DMatrix<C64>) -> Result<Self> {
        let n = dims.total();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: matrix.nrows().max(matrix.ncols()) });
        }
        Ok(Self { dims, matrix })
    }

    pub fn zeros(dims: Dims) -> Self {
        let n = dims.total();
        Self { dims, matrix: DMatrix::zeros(n, n) }
    }

    pub fn identity(dims: Dims) -> Self {
        let n = dims.total();
        Self { dims, matrix: DMatrix::identity(n, n) }
    }

    pub fn diagonal(dims: Dims, entries: &[f64]) -> Result<Self> {
        if entries.len() != dims.total() {
            return Err(Error::DimensionMismatch { expected: dims.total(), found: entries.len() });
        }
        let diag = DVector::from_iterator(entries.len(), entries.iter().map(|&x| C64::new(x, 0.0)));
        Ok(Self { dims, matrix: DMatrix::from_diagonal(&diag) })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.total()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self { dims: self.dims, matrix: self.matrix.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Largest absolute entry.
    pub fn max_norm(&self) -> f64 {
        max_abs(&self.matrix)
    }

    /// Max-norm of `A − A†`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                let d = self.matrix[(i, j)] - self.matrix[(j, i)].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol * self.max_norm().max(1.0)
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self { dims: self.dims, matrix: &self.matrix * factor }
    }

    pub fn commutator(&self, other: &Operator) -> Self {
        &(self * other) - &(other * self)
    }

    /// Applies the operator to a column vector.
    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.matrix * v
    }

    /// `self ⊗ I_fock` for a qubit operator.
    pub fn on_qubit(&self, dim_fock: usize) -> Result<Self> {
        tensor(self, &Operator::identity(Dims::fock(dim_fock)))
    }

    /// `I_qubit ⊗ self` for a Fock operator.
    pub fn on_fock(&self) -> Result<Self> {
        tensor(&qubit_identity(), self)
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson::from_matrix(self.dims, &self.matrix)
    }

    pub fn from_json(json: &MatrixJson) -> Result<Self> {
        Self::from_matrix(Dims { qubit: json.dim_qubit, fock: json.dim_fock }, json.to_matrix()?)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dims, rhs.dims, "operator dimensions differ");
        Operator { dims: self.dims, matrix: &self.matrix + &rhs.matrix }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dims, rhs.dims, "operator dimensions differ");
        Operator { dims: self.dims, matrix: &self.matrix - &rhs.matrix }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dims, rhs.dims, "operator dimensions differ");
        Operator { dims: self.dims, matrix: &self.matrix * &rhs.matrix }
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        Operator { dims: self.dims, matrix: &self.matrix * C64::new(rhs, 0.0) }
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: C64) -> Operator {
        self.scale(rhs)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { dims: self.dims, matrix: -&self.matrix }
    }
}

/// Ladder operator `p` with `√n` on the `(n−1, n)` superdiagonal.
pub fn annihilation(dim_fock: usize) -> Result<Operator> {
    if dim_fock < 2 {
        return Err(Error::InvalidDimension(format!("Fock truncation must be at least 2, got {dim_fock}")));
    }
    let mut m = DMatrix::zeros(dim_fock, dim_fock);
    for n in 1..dim_fock {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Operator::from_matrix(Dims::fock(dim_fock), m)
}

pub fn creation(dim_fock: usize) -> Result<Operator> {
    Ok(annihilation(dim_fock)?.adjoint())
}

pub fn number(dim_fock: usize) -> Result<Operator> {
    let p = annihilation(dim_fock)?;
    Ok(&p.adjoint() * &p)
}

pub fn qubit_identity() -> Operator {
    Operator::identity(Dims::qubit())
}

/// σz with `|e⟩` as the +1 eigenstate.
pub fn sigma_z() -> Operator {
    Operator::diagonal(Dims::qubit(), &[-1.0, 1.0]).expect("2x2")
}

/// σ+ = |e⟩⟨g|.
pub fn sigma_plus() -> Operator {
    let mut m = DMatrix::zeros(2, 2);
    m[(Qubit::Excited.index(), Qubit::Ground.index())] = ONE;
    Operator { dims: Dims::qubit(), matrix: m }
}

/// σ− = |g⟩⟨e|.
pub fn sigma_minus() -> Operator {
    sigma_plus().adjoint()
}

/// Projector |e⟩⟨e| on the qubit.
pub fn excited_projector() -> Operator {
    Operator::diagonal(Dims::qubit(), &[0.0, 1.0]).expect("2x2")
}

/// Kronecker product in the fixed order qubit ⊗ fock.
pub fn tensor(a: &Operator, b: &Operator) -> Result<Operator> {
    if a.dims.fock != 1 {
        return Err(Error::InvalidDimension(format!("left factor must act on the qubit only, got {:?}", a.dims)));
    }
    if b.dims.qubit != 1 {
        return Err(Error::InvalidDimension(format!("right factor must act on the Fock space only, got {:?}", b.dims)));
    }
    Ok(Operator { dims: Dims { qubit: a.dims.qubit, fock: b.dims.fock }, matrix: a.matrix.kronecker(&b.matrix) })
}

/// Spectral decomposition of a Hermitian operator.
#[derive(Clone, Debug)]
pub struct Eigh {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, each with its largest-magnitude component real positive.
    pub vectors: Operator,
}

impl Eigh {
    pub fn vector(&self, k: usize) -> DVector<C64> {
        self.vectors.matrix.column(k).into_owned()
    }

    /// Recomposes `V diag(f(λ)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> Operator {
        let v = &self.vectors.matrix;
        let mut scaled = v.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            scaled.column_mut(k).scale_mut_complex(w);
        }
        Operator { dims: self.vectors.dims, matrix: scaled * v.adjoint() }
    }
}

trait ScaleComplex {
    fn scale_mut_complex(&mut self, w: C64);
}

impl<S: nalgebra::StorageMut<C64, nalgebra::Dyn, nalgebra::U1>> ScaleComplex for nalgebra::Matrix<C64, nalgebra::Dyn, nalgebra::U1, S> {
    fn scale_mut_complex(&mut self, w: C64) {
        for x in self.iter_mut() {
            *x *= w;
        }
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues and a fixed phase
/// convention on the eigenvectors.
pub fn eigh(h: &Operator) -> Result<Eigh> {
    if !h.is_hermitian(STATE_TOLERANCE) {
        return Err(Error::ContractViolation(format!(
            "eigh requires a Hermitian operator (max |H − H†| = {:e})",
            h.hermiticity_error()
        )));
    }
    Ok(eigh_unchecked(h))
}

pub(crate) fn eigh_unchecked(h: &Operator) -> Eigh {
    let n = h.dim();
    let eig = h.matrix.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vectors = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (k, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..n {
            if col[i].norm() > col[pivot].norm() + 1e-14 {
                pivot = i;
            }
        }
        let phase = if col[pivot].norm() > 0.0 { col[pivot].conj() / col[pivot].norm() } else { ONE };
        for i in 0..n {
            vectors[(i, k)] = col[i] * phase;
        }
    }
    Eigh { values, vectors: Operator { dims: h.dims, matrix: vectors } }
}

/// `exp(−i H t)` for Hermitian `H`, via its eigendecomposition.
pub fn unitary_propagator(h: &Operator, t: f64) -> Result<Operator> {
    let e = eigh(h)?;
    Ok(e.map(|lam| C64::from_polar(1.0, -lam * t)))
}

/// Principal square root of a positive semidefinite operator; eigenvalues
/// below zero are floored at zero first.
pub fn sqrt_psd(a: &Operator) -> Operator {
    let mut h = a.clone();
    hermitize(&mut h.matrix);
    eigh_unchecked(&h).map(|lam| C64::new(lam.max(0.0).sqrt(), 0.0))
}

pub(crate) fn hermitize(m: &mut DMatrix<C64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
        m[(j, j)] = C64::new(m[(j, j)].re, 0.0);
    }
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.norm()))
}

/// Dense complex product through the blocked `zgemm` kernel; nalgebra's
/// generic product is several times slower for complex scalars.
pub(crate) fn matmul(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    assert_eq!(a.ncols(), b.nrows());
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut c = DMatrix::zeros(m, n);
    // SAFETY: Complex64 is repr(C) {re, im}, layout-identical to [f64; 2];
    // nalgebra storage is column-major and contiguous.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateKind {
    Ket,
    Density,
}

/// Pure or mixed state on a (possibly composite) truncated space.
#[derive(Clone, Debug, PartialEq)]
pub enum QuantumState {
    Ket { dims: Dims, amplitudes: DVector<C64> },
    Density { dims: Dims, matrix: DMatrix<C64> },
}

impl QuantumState {
    pub fn ket(dims: Dims, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != dims.total() {
            return Err(Error::DimensionMismatch { expected: dims.total(), found: amplitudes.len() });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > STATE_TOLERANCE {
            return Err(Error::ContractViolation(format!("ket norm {norm} differs from 1")));
        }
        Ok(Self::Ket { dims, amplitudes })
    }

    /// Normalizes `amplitudes` before wrapping them.
    pub fn ket_normalized(dims: Dims, amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::ContractViolation("zero vector".into()));
        }
        Self::ket(dims, amplitudes / C64::new(norm, 0.0))
    }

    pub fn density(dims: Dims, matrix: DMatrix<C64>) -> Result<Self> {
        let n = dims.total();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: matrix.nrows() });
        }
        let op = Operator { dims, matrix };
        if op.hermiticity_error() > STATE_TOLERANCE {
            return Err(Error::ContractViolation(format!("density matrix not Hermitian ({:e})", op.hermiticity_error())));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > STATE_TOLERANCE || tr.im.abs() > STATE_TOLERANCE {
            return Err(Error::ContractViolation(format!("density matrix trace {tr} differs from 1")));
        }
        let min = eigh_unchecked(&op).values[0];
        if min < POSITIVITY_FLOOR {
            return Err(Error::Positivity { min_eigenvalue: min });
        }
        Ok(Self::Density { dims, matrix: op.matrix })
    }

    pub(crate) fn density_unchecked(dims: Dims, matrix: DMatrix<C64>) -> Self {
        Self::Density { dims, matrix }
    }

    /// `|q, n⟩` as a ket.
    pub fn basis(dims: Dims, q: Qubit, n: usize) -> Self {
        let mut v = DVector::zeros(dims.total());
        v[basis_index(dims, q, n)] = ONE;
        Self::Ket { dims, amplitudes: v }
    }

    /// Fock state `|n⟩` on a phonon-only space.
    pub fn fock(dim_fock: usize, n: usize) -> Self {
        Self::basis(Dims::fock(dim_fock), Qubit::Ground, n)
    }

    /// Diagonal mixture of Fock states on a phonon-only space.
    pub fn fock_mixture(dim_fock: usize, populations: &[f64]) -> Result<Self> {
        let mut diag = vec![0.0; dim_fock];
        if populations.len() > dim_fock {
            return Err(Error::DimensionMismatch { expected: dim_fock, found: populations.len() });
        }
        diag[..populations.len()].copy_from_slice(populations);
        Self::density(Dims::fock(dim_fock), Operator::diagonal(Dims::fock(dim_fock), &diag)?.matrix)
    }

    pub fn dims(&self) -> Dims {
        match self {
            Self::Ket { dims, .. } | Self::Density { dims, .. } => *dims,
        }
    }

    pub fn kind(&self) -> StateKind {
        match self {
            Self::Ket { .. } => StateKind::Ket,
            Self::Density { .. } => StateKind::Density,
        }
    }

    pub fn density_matrix(&self) -> DMatrix<C64> {
        match self {
            Self::Ket { amplitudes, .. } => amplitudes * amplitudes.adjoint(),
            Self::Density { matrix, .. } => matrix.clone(),
        }
    }

    pub fn to_density(&self) -> Self {
        Self::Density { dims: self.dims(), matrix: self.density_matrix() }
    }

    pub fn as_operator(&self) -> Operator {
        Operator { dims: self.dims(), matrix: self.density_matrix() }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Self::Ket { amplitudes, .. } => amplitudes.norm_squared(),
            Self::Density { matrix, .. } => matrix.trace().re,
        }
    }

    pub fn purity(&self) -> f64 {
        match self {
            Self::Ket { amplitudes, .. } => amplitudes.norm_squared().powi(2),
            Self::Density { matrix, .. } => matrix.iter().map(|x| x.norm_sqr()).sum(),
        }
    }

    /// Probabilities of every basis state.
    pub fn populations(&self) -> Vec<f64> {
        match self {
            Self::Ket { amplitudes, .. } => amplitudes.iter().map(|a| a.norm_sqr()).collect(),
            Self::Density { matrix, .. } => matrix.diagonal().iter().map(|x| x.re).collect(),
        }
    }

    pub fn expectation(&self, op: &Operator) -> C64 {
        match self {
            Self::Ket { amplitudes, .. } => amplitudes.dotc(&(&op.matrix * amplitudes)),
            Self::Density { matrix, .. } => {
                let n = matrix.nrows();
                let mut acc = ZERO;
                for i in 0..n {
                    for k in 0..n {
                        acc += matrix[(i, k)] * op.matrix[(k, i)];
                    }
                }
                acc
            }
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            Self::Ket { .. } => 0.0,
            Self::Density { .. } => {
                let mut op = self.as_operator();
                hermitize(&mut op.matrix);
                eigh_unchecked(&op).values[0]
            }
        }
    }

    /// Population of the excited qubit state.
    pub fn qubit_excited_probability(&self) -> f64 {
        let dims = self.dims();
        if dims.qubit != 2 {
            return 0.0;
        }
        let pops = self.populations();
        pops[dims.fock..].iter().sum()
    }

    /// Phonon state with the qubit traced out. Phonon-only states are returned
    /// as density matrices unchanged.
    pub fn reduced_phonon(&self) -> Self {
        let dims = self.dims();
        let rho = self.density_matrix();
        let n = dims.fock;
        let mut out = DMatrix::zeros(n, n);
        for q in 0..dims.qubit {
            let off = q * n;
            out += rho.view((off, off), (n, n));
        }
        Self::Density { dims: Dims::fock(n), matrix: out }
    }

    /// Fock-number distribution of the phonon, summed over the qubit.
    pub fn phonon_populations(&self) -> Vec<f64> {
        self.reduced_phonon().populations()
    }

    /// `|g⟩⟨g| ⊗ Tr_q ρ`: the qubit is reset to ground without touching the phonon.
    pub fn with_qubit_reset(&self) -> Self {
        let dims = self.dims();
        let phonon = self.reduced_phonon().density_matrix();
        let mut out = DMatrix::zeros(dims.total(), dims.total());
        out.view_mut((0, 0), (dims.fock, dims.fock)).copy_from(&phonon);
        Self::Density { dims, matrix: out }
    }

    /// `|g⟩⟨g| ⊗ ρ_phonon` for a phonon-only state.
    pub fn embed_with_ground_qubit(&self) -> Result<Self> {
        let dims = self.dims();
        if dims.qubit != 1 {
            return Err(Error::InvalidDimension("expected a phonon-only state".into()));
        }
        let comp = Dims::composite(dims.fock);
        let mut out = DMatrix::zeros(comp.total(), comp.total());
        out.view_mut((0, 0), (dims.fock, dims.fock)).copy_from(&self.density_matrix());
        Ok(Self::Density { dims: comp, matrix: out })
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson::from_matrix(self.dims(), &self.density_matrix())
    }

    pub fn from_json(json: &MatrixJson) -> Result<Self> {
        Self::density(Dims { qubit: json.dim_qubit, fock: json.dim_fock }, json.to_matrix()?)
    }
}

/// On-disk matrix format: row-major real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim_qubit: usize,
    pub dim_fock: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(dims: Dims, m: &DMatrix<C64>) -> Self {
        let n = m.nrows();
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Self { dim_qubit: dims.qubit, dim_fock: dims.fock, re, im }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<C64>> {
        let n = self.dim_qubit * self.dim_fock;
        if self.re.len() != n * n || self.im.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: self.re.len().min(self.im.len()) });
        }
        Ok(DMatrix::from_fn(n, n, |i, j| C64::new(self.re[i * n + j], self.im[i * n + j])))
    }
}
