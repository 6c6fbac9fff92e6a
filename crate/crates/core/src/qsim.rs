//! Dense complex linear algebra and the quantum primitives used by the
//! protocol simulation: matrices, state vectors, density matrices,
//! projector pairs of ±1-valued observables, and the weak-measurement
//! Kraus pair.
//!
//! Everything here is small (dimension ≤ 8 in practice), so operations are
//! written for clarity and numerical transparency rather than speed.

use num_complex::Complex;
use thiserror::Error;

use crate::linalg;

pub type Complex64 = Complex<f64>;

/// Tolerance for structural matrix checks (hermiticity, involution, trace).
pub const STRUCT_TOL: f64 = 1e-12;
/// Eigenvalue floor for positive semidefiniteness of density matrices.
pub const PSD_TOL: f64 = -1e-10;

#[derive(Debug, Error)]
pub enum QsimError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("operator is not a hermitian involution (residual {residual:.3e})")]
    NotInvolution { residual: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
}

// ── Complex matrices ──────────────────────────────────────────────────────

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Build from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.concat() }
    }

    /// Build a matrix with purely real entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), rows * cols);
        Self {
            rows,
            cols,
            data: entries.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.data[i * self.cols + k];
                if aik.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += aik * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        assert_eq!(self.rows, self.cols, "trace of non-square matrix");
        (0..self.rows).map(|i| self.data[i * self.cols + i]).sum()
    }

    /// Kronecker (tensor) product, `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.data[i * self.cols + j];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.data[(i * other.rows + k) * out.cols + (j * other.cols + l)] =
                            a * other.data[k * other.cols + l];
                    }
                }
            }
        }
        out
    }

    /// Largest entry-wise absolute difference from `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest deviation from hermiticity, max |M - M†|.
    pub fn hermiticity_residual(&self) -> f64 {
        self.max_abs_diff(&self.dagger())
    }

    pub fn apply(&self, ket: &Ket) -> Ket {
        assert_eq!(self.cols, ket.dim(), "operator/ket dimension mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[i] += self.data[i * self.cols + j] * ket.amp[j];
            }
        }
        Ket { amp: out }
    }

    /// Eigenvalues of a hermitian matrix, ascending.
    ///
    /// Realifies H = A + iB into the symmetric [[A, -B], [B, A]], whose
    /// spectrum is that of H with every eigenvalue doubled, then runs Jacobi
    /// and drops the duplicates.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>, QsimError> {
        let res = self.hermiticity_residual();
        if res > 1e-9 {
            return Err(QsimError::InvalidDensity(format!(
                "hermitian_eigenvalues on non-hermitian input (residual {res:.3e})"
            )));
        }
        let n = self.rows;
        let (w, _) = linalg::eigh(2 * n, &self.realify());
        // Eigenvalues come in pairs; take every other one after sorting.
        Ok(w.into_iter().step_by(2).collect())
    }

    /// Orthogonal projector onto the eigenspace of a hermitian matrix for
    /// eigenvalues within `cluster_tol` of `lambda`.
    pub fn spectral_projector(&self, lambda: f64, cluster_tol: f64) -> Result<Self, QsimError> {
        let res = self.hermiticity_residual();
        if res > 1e-9 {
            return Err(QsimError::InvalidDensity(format!(
                "spectral_projector on non-hermitian input (residual {res:.3e})"
            )));
        }
        let n = self.rows;
        let (w, v) = linalg::eigh(2 * n, &self.realify());
        // Sum of outer products over the realified eigenvectors in the
        // cluster, then read the complex projector back off the block form.
        let m = 2 * n;
        let mut p_real = vec![0.0; m * m];
        for k in 0..m {
            if (w[k] - lambda).abs() <= cluster_tol {
                for i in 0..m {
                    for j in 0..m {
                        p_real[i * m + j] += v[i * m + k] * v[j * m + k];
                    }
                }
            }
        }
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out.data[i * n + j] =
                    Complex64::new(p_real[i * m + j], p_real[(i + n) * m + j]);
            }
        }
        Ok(out)
    }

    /// Real symmetric image [[Re, -Im], [Im, Re]] of this matrix, row-major.
    fn realify(&self) -> Vec<f64> {
        let n = self.rows;
        let m = 2 * n;
        let mut out = vec![0.0; m * m];
        for i in 0..n {
            for j in 0..n {
                let z = self.data[i * n + j];
                out[i * m + j] = z.re;
                out[(i + n) * m + (j + n)] = z.re;
                out[i * m + (j + n)] = -z.im;
                out[(i + n) * m + j] = z.im;
            }
        }
        out
    }
}

/// Tensor product of two matrices, `a ⊗ b`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

// ── Pauli matrices ────────────────────────────────────────────────────────

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[
        vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, -1.0)],
        vec![Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)],
    ])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

// ── State vectors ─────────────────────────────────────────────────────────

/// Complex state vector. Norm is not enforced here; the protocol layer
/// validates unit norm where a physical state is required.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amp: Vec<Complex64>,
}

impl Ket {
    pub fn new(amplitudes: Vec<Complex64>) -> Self {
        Self { amp: amplitudes }
    }

    /// Computational basis state |k⟩ in the given dimension.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim);
        let mut amp = vec![Complex64::new(0.0, 0.0); dim];
        amp[k] = Complex64::new(1.0, 0.0);
        Self { amp }
    }

    pub fn from_real(amplitudes: &[f64]) -> Self {
        Self { amp: amplitudes.iter().map(|&x| Complex64::new(x, 0.0)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.amp.len()
    }

    pub fn amplitude(&self, k: usize) -> Complex64 {
        self.amp[k]
    }

    pub fn norm(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { amp: self.amp.iter().map(|a| a * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        Self { amp: self.amp.iter().zip(&other.amp).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        Self { amp: self.amp.iter().zip(&other.amp).map(|(a, b)| a - b).collect() }
    }

    /// Inner product ⟨self|other⟩ (conjugate-linear in `self`).
    pub fn inner(&self, other: &Self) -> Complex64 {
        assert_eq!(self.dim(), other.dim());
        self.amp.iter().zip(&other.amp).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut amp = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amp {
            for b in &other.amp {
                amp.push(a * b);
            }
        }
        Self { amp }
    }

    /// Outer product |self⟩⟨self| as a matrix.
    pub fn projector(&self) -> ComplexMatrix {
        let n = self.dim();
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, self.amp[i] * self.amp[j].conj());
            }
        }
        m
    }

    /// The maximally entangled two-qubit state (|00⟩ + |11⟩)/√2.
    pub fn phi_plus() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_real(&[r, 0.0, 0.0, r])
    }
}

// ── Density matrices ──────────────────────────────────────────────────────

/// Hermitian, unit-trace, positive-semidefinite matrix.
///
/// The constructor enforces hermiticity and unit trace to 1e-12 and
/// eigenvalues ≥ -1e-10, so a value of this type is always a valid state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self, QsimError> {
        if mat.rows() != mat.cols() {
            return Err(QsimError::InvalidDensity(format!(
                "non-square {}x{}",
                mat.rows(),
                mat.cols()
            )));
        }
        let herm = mat.hermiticity_residual();
        if herm > STRUCT_TOL {
            return Err(QsimError::InvalidDensity(format!(
                "hermiticity residual {herm:.3e}"
            )));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > STRUCT_TOL || tr.im.abs() > STRUCT_TOL {
            return Err(QsimError::InvalidDensity(format!("trace {tr} (expected 1)")));
        }
        let eigs = mat.hermitian_eigenvalues()?;
        let min = eigs.first().copied().unwrap_or(0.0);
        if min < PSD_TOL {
            return Err(QsimError::InvalidDensity(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { mat })
    }

    pub fn from_pure(ket: &Ket) -> Result<Self, QsimError> {
        let n = ket.norm();
        if (n - 1.0).abs() > 1e-10 {
            return Err(QsimError::InvalidDensity(format!(
                "pure state has norm {n}, expected 1"
            )));
        }
        Ok(Self { mat: ket.projector() })
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }
}

// ── States (pure or mixed) ────────────────────────────────────────────────

/// A quantum state under either representation.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Pure(Ket),
    Mixed(DensityMatrix),
}

impl State {
    pub fn dim(&self) -> usize {
        match self {
            State::Pure(k) => k.dim(),
            State::Mixed(d) => d.dim(),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, State::Pure(_))
    }
}

/// Expectation value ⟨O⟩ of a hermitian operator in the given state.
///
/// The imaginary part of the underlying trace must vanish to 1e-10, which
/// holds whenever `o` is hermitian; a larger imaginary part indicates a
/// caller bug and triggers an assertion.
pub fn expectation(state: &State, o: &ComplexMatrix) -> Result<f64, QsimError> {
    if o.rows() != o.cols() || o.rows() != state.dim() {
        return Err(QsimError::DimMismatch(format!(
            "operator {}x{} on state of dimension {}",
            o.rows(),
            o.cols(),
            state.dim()
        )));
    }
    let value = match state {
        State::Pure(k) => k.inner(&o.apply(k)),
        State::Mixed(d) => d.matrix().mul(o).trace(),
    };
    assert!(
        value.im.abs() <= 1e-10,
        "expectation value has imaginary part {:.3e}; operator not hermitian?",
        value.im
    );
    Ok(value.re)
}

// ── Involutions and their projectors ──────────────────────────────────────

/// Split a ±1-valued observable into its outcome projectors.
///
/// Requires `o` hermitian with o² = 1 to 1e-12. Returns (Π₊, Π₋) with
/// Π± = (1 ± o)/2, so Π₊ + Π₋ = 1 and Π₊ - Π₋ = o.
pub fn projectors_of_involution(
    o: &ComplexMatrix,
) -> Result<(ComplexMatrix, ComplexMatrix), QsimError> {
    if o.rows() != o.cols() {
        return Err(QsimError::DimMismatch(format!(
            "involution must be square, got {}x{}",
            o.rows(),
            o.cols()
        )));
    }
    let herm = o.hermiticity_residual();
    let invol = o.mul(o).max_abs_diff(&ComplexMatrix::identity(o.rows()));
    let residual = herm.max(invol);
    if residual > STRUCT_TOL {
        return Err(QsimError::NotInvolution { residual });
    }
    let id = ComplexMatrix::identity(o.rows());
    let plus = id.add(o).scale_re(0.5);
    let minus = id.sub(o).scale_re(0.5);
    Ok((plus, minus))
}

// ── Weak-measurement Kraus pair ───────────────────────────────────────────

/// Kraus operators of the binary weak measurement of σ_z with sharpness θ.
#[derive(Debug, Clone)]
pub struct KrausPair {
    pub k_plus: ComplexMatrix,
    pub k_minus: ComplexMatrix,
}

impl KrausPair {
    /// max |K₊†K₊ + K₋†K₋ - 1|, which vanishes for a trace-preserving pair.
    pub fn completeness_residual(&self) -> f64 {
        let sum = self
            .k_plus
            .dagger()
            .mul(&self.k_plus)
            .add(&self.k_minus.dagger().mul(&self.k_minus));
        sum.max_abs_diff(&ComplexMatrix::identity(self.k_plus.rows()))
    }
}

/// Kraus pair K₊ = cosθ|0⟩⟨0| + sinθ|1⟩⟨1|, K₋ = cosθ|1⟩⟨1| + sinθ|0⟩⟨0|.
///
/// θ = 0 is the projective σ_z measurement; θ = π/4 is the identity channel
/// with a fair-coin outcome.
pub fn kraus_pair(theta: f64) -> KrausPair {
    let (s, c) = theta.sin_cos();
    KrausPair {
        k_plus: ComplexMatrix::from_real(2, 2, &[c, 0.0, 0.0, s]),
        k_minus: ComplexMatrix::from_real(2, 2, &[s, 0.0, 0.0, c]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pauli_algebra() {
        let id = ComplexMatrix::identity(2);
        for p in [pauli_x(), pauli_y(), pauli_z()] {
            assert!(p.mul(&p).max_abs_diff(&id) < 1e-15);
            assert!(p.hermiticity_residual() < 1e-15);
        }
        // XY = iZ
        let xy = pauli_x().mul(&pauli_y());
        let iz = pauli_z().scale(c(0.0, 1.0));
        assert!(xy.max_abs_diff(&iz) < 1e-15);
    }

    #[test]
    fn tensor_acts_blockwise() {
        let m = tensor(&pauli_x(), &pauli_z());
        // (σx ⊗ σz)[0][2] = 1, [1][3] = -1
        assert_eq!(m.get(0, 2), c(1.0, 0.0));
        assert_eq!(m.get(1, 3), c(-1.0, 0.0));
        assert_eq!(m.get(0, 0), c(0.0, 0.0));
    }

    #[test]
    fn phi_plus_is_invariant_under_xx() {
        let phi = Ket::phi_plus();
        let xx = tensor(&pauli_x(), &pauli_x());
        assert!((xx.apply(&phi).sub(&phi)).norm() < 1e-15);
    }

    #[test]
    fn projectors_of_sigma_z() {
        let (plus, minus) = projectors_of_involution(&pauli_z()).unwrap();
        assert!(plus.max_abs_diff(&Ket::basis(2, 0).projector()) < 1e-15);
        assert!(minus.max_abs_diff(&Ket::basis(2, 1).projector()) < 1e-15);
    }

    #[test]
    fn parity_projectors_match_spectral_oracle() {
        // σz ⊗ σz has a two-fold +1 eigenspace (even parity) and a two-fold
        // -1 eigenspace; compare (1 ± O)/2 against projectors reconstructed
        // independently from the eigendecomposition.
        let zz = tensor(&pauli_z(), &pauli_z());
        let (plus, minus) = projectors_of_involution(&zz).unwrap();
        let p_oracle = zz.spectral_projector(1.0, 1e-8).unwrap();
        let m_oracle = zz.spectral_projector(-1.0, 1e-8).unwrap();
        assert!(plus.max_abs_diff(&p_oracle) < 1e-10);
        assert!(minus.max_abs_diff(&m_oracle) < 1e-10);
        // Each has rank 2.
        assert!((plus.trace().re - 2.0).abs() < 1e-12);
        assert!((minus.trace().re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_involution_is_rejected() {
        // σz + σx is hermitian but squares to 2·1.
        let bad = pauli_z().add(&pauli_x());
        match projectors_of_involution(&bad) {
            Err(QsimError::NotInvolution { residual }) => assert!(residual > 0.5),
            other => panic!("expected NotInvolution, got {other:?}"),
        }
    }

    #[test]
    fn kraus_endpoints() {
        let sharp = kraus_pair(0.0);
        assert!(sharp.k_plus.max_abs_diff(&Ket::basis(2, 0).projector()) < 1e-15);
        assert!(sharp.k_minus.max_abs_diff(&Ket::basis(2, 1).projector()) < 1e-15);
        let weak = kraus_pair(FRAC_PI_4);
        let half = ComplexMatrix::identity(2).scale_re(std::f64::consts::FRAC_1_SQRT_2);
        assert!(weak.k_plus.max_abs_diff(&half) < 1e-15);
        assert!(weak.k_minus.max_abs_diff(&half) < 1e-15);
    }

    #[test]
    fn kraus_completeness_for_many_angles() {
        for i in 0..=200 {
            let theta = -1.0 + 0.02 * i as f64;
            assert!(kraus_pair(theta).completeness_residual() < 1e-14);
        }
    }

    #[test]
    fn expectation_basics() {
        let up = State::Pure(Ket::basis(2, 0));
        assert!((expectation(&up, &pauli_z()).unwrap() - 1.0).abs() < 1e-15);
        assert!(expectation(&up, &pauli_x()).unwrap().abs() < 1e-15);
        let phi = State::Pure(Ket::phi_plus());
        let xx = tensor(&pauli_x(), &pauli_x());
        assert!((expectation(&phi, &xx).unwrap() - 1.0).abs() < 1e-15);
        // Mixed representation agrees with the pure one.
        let rho = State::Mixed(DensityMatrix::from_pure(&Ket::phi_plus()).unwrap());
        assert!((expectation(&rho, &xx).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expectation_rejects_dimension_mismatch() {
        let up = State::Pure(Ket::basis(2, 0));
        let big = ComplexMatrix::identity(4);
        assert!(matches!(expectation(&up, &big), Err(QsimError::DimMismatch(_))));
    }

    #[test]
    fn expectation_is_bilinear_in_the_observable() {
        // 100 seeded random trials: ⟨αO₁ + βO₂⟩ = α⟨O₁⟩ + β⟨O₂⟩ to 1e-10.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let dim = 4;
            let rand_herm = |rng: &mut rand_chacha::ChaCha8Rng| {
                let mut m = ComplexMatrix::zeros(dim, dim);
                for i in 0..dim {
                    m.set(i, i, c(rng.gen_range(-1.0..1.0), 0.0));
                    for j in (i + 1)..dim {
                        let z = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                        m.set(i, j, z);
                        m.set(j, i, z.conj());
                    }
                }
                m
            };
            let o1 = rand_herm(&mut rng);
            let o2 = rand_herm(&mut rng);
            let mut amp = Vec::with_capacity(dim);
            for _ in 0..dim {
                amp.push(c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
            let mut ket = Ket::new(amp);
            let n = ket.norm();
            ket = ket.scale(c(1.0 / n, 0.0));
            let state = State::Pure(ket);
            let (alpha, beta) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let combo = o1.scale_re(alpha).add(&o2.scale_re(beta));
            let lhs = expectation(&state, &combo).unwrap();
            let rhs = alpha * expectation(&state, &o1).unwrap()
                + beta * expectation(&state, &o2).unwrap();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn density_matrix_validation() {
        // Maximally mixed qubit is fine.
        let ok = DensityMatrix::new(ComplexMatrix::identity(2).scale_re(0.5));
        assert!(ok.is_ok());
        // Trace 2 rejected.
        assert!(DensityMatrix::new(ComplexMatrix::identity(2)).is_err());
        // Unit trace but indefinite: 1.5|0⟩⟨0| - 0.5|1⟩⟨1|.
        let indef = ComplexMatrix::from_real(2, 2, &[1.5, 0.0, 0.0, -0.5]);
        match DensityMatrix::new(indef) {
            Err(QsimError::InvalidDensity(msg)) => assert!(msg.contains("eigenvalue")),
            other => panic!("expected InvalidDensity, got {other:?}"),
        }
        // Non-hermitian rejected.
        let mut nh = ComplexMatrix::identity(2).scale_re(0.5);
        nh.set(0, 1, c(0.1, 0.0));
        assert!(DensityMatrix::new(nh).is_err());
    }

    #[test]
    fn hermitian_eigenvalues_of_pauli_y() {
        let w = pauli_y().hermitian_eigenvalues().unwrap();
        assert!((w[0] + 1.0).abs() < 1e-12);
        assert!((w[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kraus_at_pi8_interpolates() {
        let k = kraus_pair(FRAC_PI_8);
        assert!((k.k_plus.get(0, 0).re - FRAC_PI_8.cos()).abs() < 1e-15);
        assert!((k.k_plus.get(1, 1).re - FRAC_PI_8.sin()).abs() < 1e-15);
        assert!(k.completeness_residual() < 1e-15);
    }
}
