//! Bell functionals of the sequential scenario, the Tsirelson-like
//! boundary they carve out, and the analytic min-entropy bound used as a
//! non-sequential reference.
//!
//! With first-round correlators ⟨A_x B(y1)⟩ and second-round correlators
//! ⟨A_x B(0,y2)⟩ the three base functionals are
//!
//! * S1 = ⟨(A0+A1)B(0)⟩ + ⟨(A0-A1)B(1)⟩ (first round plays CHSH),
//! * S2 = ⟨(A0+A1)B(0,0)⟩ + ⟨(A0-A1)B(0,1)⟩ (second round plays CHSH),
//! * Sc = ⟨(A0+A1)B(0,0)⟩ + ⟨(A0-A1)B(1)⟩ (the chained pair: sharp
//!   measurements only, one from each round).
//!
//! When ⟨Sc⟩ = 2√2 the pair (⟨S1⟩, ⟨S2⟩) is confined to the disc of radius
//! √2 centered at (√2, √2); the rotated functional
//! S_θ = cos2θ·(S1-√2) + sin2θ·(S2-√2) is then bounded by √2 and the ideal
//! protocol at sharpness θ saturates it. The alternative family
//! S'_α = cosα·S₊ + sinα·S₋ with S± = (A0+A1)B(0) ± (A0-A1)B(0,1) obeys
//! ⟨S'_α⟩ ≤ 2√2 for *any* state and ±1 observables, sequential or not,
//! via an explicit sum-of-squares decomposition that [`sos_residual`]
//! evaluates term by term.

use serde::Serialize;
use thiserror::Error;

use crate::protocol::DilatedOperators;
use crate::qsim::{expectation, pauli_x, pauli_z, ComplexMatrix, Ket, QsimError, State};
use crate::scenario::{BehaviorSummary, CorrelationTable, ScenarioError};

use std::f64::consts::{FRAC_PI_4, SQRT_2};

/// Accepted overshoot above 2√2 before a CHSH value is declared
/// super-quantum rather than round-off.
pub const QUANTUM_BOUND_SLACK: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum BellError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error("operation requires a pure state")]
    RequiresPureState,
    #[error("CHSH value {s} exceeds the quantum bound 2√2")]
    SuperQuantum { s: f64 },
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
}

/// The three base functionals of a behavior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BellValues {
    pub s1: f64,
    pub s2: f64,
    pub sc: f64,
}

impl BellValues {
    pub fn from_summary(m: &BehaviorSummary) -> Self {
        let s1 = m.ab1[0][0] + m.ab1[1][0] + m.ab1[0][1] - m.ab1[1][1];
        let s2 = m.ab2[0][0] + m.ab2[1][0] + m.ab2[0][1] - m.ab2[1][1];
        let sc = m.ab2[0][0] + m.ab2[1][0] + m.ab1[0][1] - m.ab1[1][1];
        Self { s1, s2, sc }
    }
}

/// Evaluates S1, S2, Sc on a behavior (which must be physical).
pub fn bell_values(t: &CorrelationTable) -> Result<BellValues, BellError> {
    Ok(BellValues::from_summary(&t.summarize()?))
}

/// The rotated functional ⟨S_θ⟩ = cos2θ·(s1-√2) + sin2θ·(s2-√2).
pub fn s_theta(t: &CorrelationTable, theta: f64) -> Result<f64, BellError> {
    let v = bell_values(t)?;
    Ok(s_theta_of(&v, theta))
}

pub fn s_theta_of(v: &BellValues, theta: f64) -> f64 {
    (2.0 * theta).cos() * (v.s1 - SQRT_2) + (2.0 * theta).sin() * (v.s2 - SQRT_2)
}

/// ⟨S'_α⟩ = cosα·⟨S₊⟩ + sinα·⟨S₋⟩ with S± = (A0+A1)B(0) ± (A0-A1)B(0,1).
pub fn s_prime_alpha(t: &CorrelationTable, alpha: f64) -> Result<f64, BellError> {
    let m = t.summarize()?;
    let s_plus = m.ab1[0][0] + m.ab1[1][0] + m.ab2[0][1] - m.ab2[1][1];
    let s_minus = m.ab1[0][0] + m.ab1[1][0] - m.ab2[0][1] + m.ab2[1][1];
    Ok(alpha.cos() * s_plus + alpha.sin() * s_minus)
}

/// Saturation residuals of the three boundary conditions at angle θ:
/// 2√2 - ⟨Sc⟩, √2 - ⟨S_θ⟩, and the circle residual
/// (s1-√2)² + (s2-√2)² - 2. The first two are ≥ 0 (to solver precision)
/// inside the sequential quantum set and vanish on the boundary; the circle
/// residual vanishes exactly on the boundary circle and is negative inside.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryResiduals {
    pub chained: f64,
    pub rotated: f64,
    pub circle: f64,
}

pub fn boundary_residuals(
    t: &CorrelationTable,
    theta: f64,
) -> Result<BoundaryResiduals, BellError> {
    let v = bell_values(t)?;
    Ok(BoundaryResiduals {
        chained: 2.0 * SQRT_2 - v.sc,
        rotated: SQRT_2 - s_theta_of(&v, theta),
        circle: (v.s1 - SQRT_2).powi(2) + (v.s2 - SQRT_2).powi(2) - 2.0,
    })
}

// ── Sum-of-squares certificate ────────────────────────────────────────────

/// A strategy for the S'_α family: two ±1 observables per side acting on a
/// common space, plus a state. Unlike [`DilatedOperators`] there is no
/// commutation requirement between `b0` and `b01` (the 2√2 bound holds
/// without it), so the saturating single-qubit strategy is representable.
#[derive(Debug, Clone)]
pub struct SosStrategy {
    /// A0, A1 acting on the full space.
    pub alice: [ComplexMatrix; 2],
    /// B(0) acting on the full space.
    pub b0: ComplexMatrix,
    /// B(0,1) acting on the full space.
    pub b01: ComplexMatrix,
    pub state: State,
}

impl SosStrategy {
    /// Validates that all four operators are hermitian involutions on the
    /// state's space and that the two wings commute.
    pub fn new(
        alice: [ComplexMatrix; 2],
        b0: ComplexMatrix,
        b01: ComplexMatrix,
        state: State,
    ) -> Result<Self, BellError> {
        let n = state.dim();
        let id = ComplexMatrix::identity(n);
        for (name, op) in [
            ("A0", &alice[0]),
            ("A1", &alice[1]),
            ("B0", &b0),
            ("B01", &b01),
        ] {
            if op.rows() != n || op.cols() != n {
                return Err(BellError::InvalidStrategy(format!(
                    "{name} is {}x{}, state dimension is {n}",
                    op.rows(),
                    op.cols()
                )));
            }
            let herm = op.hermiticity_residual();
            let invol = op.mul(op).max_abs_diff(&id);
            if herm.max(invol) > 1e-12 {
                return Err(BellError::InvalidStrategy(format!(
                    "{name} is not a hermitian involution (residual {:.3e})",
                    herm.max(invol)
                )));
            }
        }
        for a in &alice {
            for b in [&b0, &b01] {
                let comm = a.mul(b).sub(&b.mul(a));
                if comm.max_abs_diff(&ComplexMatrix::zeros(n, n)) > 1e-12 {
                    return Err(BellError::InvalidStrategy(
                        "Alice and Bob operators must commute".into(),
                    ));
                }
            }
        }
        Ok(Self { alice, b0, b01, state })
    }

    /// ⟨S'_α⟩ evaluated directly on the operators.
    pub fn s_prime_alpha(&self, alpha: f64) -> Result<f64, BellError> {
        let sum = self.alice[0].add(&self.alice[1]);
        let diff = self.alice[0].sub(&self.alice[1]);
        let s_plus_op = sum.mul(&self.b0).add(&diff.mul(&self.b01));
        let s_minus_op = sum.mul(&self.b0).sub(&diff.mul(&self.b01));
        let op = s_plus_op.scale_re(alpha.cos()).add(&s_minus_op.scale_re(alpha.sin()));
        // Products of commuting hermitian operators need not be exactly
        // hermitian in floating point; symmetrize before taking ⟨·⟩.
        let op = op.add(&op.dagger()).scale_re(0.5);
        Ok(expectation(&self.state, &op)?)
    }
}

impl From<&DilatedOperators> for SosStrategy {
    fn from(ops: &DilatedOperators) -> Self {
        Self {
            alice: [ops.lifted_alice(0), ops.lifted_alice(1)],
            b0: ops.lifted_bob_first(0),
            b01: ops.lifted_bob_second(1),
            state: ops.state.clone(),
        }
    }
}

/// Evaluates ⟨2√2 - S'_α⟩ through its sum-of-squares decomposition,
///
///   2√2 - S'_α = (T1² + T2²)/√2,
///   T1 = sin(π/4+α)B(0) + cos(π/4+α)B(0,1) - A0,
///   T2 = sin(π/4+α)B(0) - cos(π/4+α)B(0,1) - A1,
///
/// returning the sum of the two squared-norm terms. The result is ≥ 0 by
/// construction and must agree with direct evaluation of 2√2 - ⟨S'_α⟩ to
/// 1e-10 for any state, pure or mixed.
pub fn sos_residual(strategy: &SosStrategy, alpha: f64) -> Result<f64, BellError> {
    let (s, c) = (FRAC_PI_4 + alpha).sin_cos();
    let t1 = strategy
        .b0
        .scale_re(s)
        .add(&strategy.b01.scale_re(c))
        .sub(&strategy.alice[0]);
    let t2 = strategy
        .b0
        .scale_re(s)
        .sub(&strategy.b01.scale_re(c))
        .sub(&strategy.alice[1]);
    let mut total = 0.0;
    for t in [t1, t2] {
        let sq = t.dagger().mul(&t);
        let sq = sq.add(&sq.dagger()).scale_re(0.5);
        total += expectation(&strategy.state, &sq)?;
    }
    Ok(total / SQRT_2)
}

/// The single-qubit strategy saturating ⟨S'_α⟩ = 2√2:
/// A_j = (-1)^j cos(α+π/4)σx + sin(α+π/4)σz, B(0) = σz, B(0,1) = σx on |φ+⟩.
pub fn tangent_strategy(alpha: f64) -> SosStrategy {
    let (s, c) = (alpha + FRAC_PI_4).sin_cos();
    let id = ComplexMatrix::identity(2);
    let a = |j: f64| {
        pauli_x()
            .scale_re(j * c)
            .add(&pauli_z().scale_re(s))
            .kron(&id)
    };
    SosStrategy::new(
        [a(1.0), a(-1.0)],
        id.kron(&pauli_z()),
        id.kron(&pauli_x()),
        State::Pure(Ket::phi_plus()),
    )
    .expect("tangent strategy is valid by construction")
}

/// L2 distance between |ψ⟩ and its reconstruction
/// [cos2θ·(A0+A1)/√2·B(0) + sin2θ·(A0-A1)/√2·B(0,1)]|ψ⟩.
///
/// Vanishes identically for the ideal protocol at sharpness θ: boundary
/// states are characterized by this operator identity. Requires a pure
/// state; noise makes the question ill-posed at this level.
pub fn state_characterization_residual(
    ops: &DilatedOperators,
    theta: f64,
) -> Result<f64, BellError> {
    let psi = match &ops.state {
        State::Pure(k) => k,
        State::Mixed(_) => return Err(BellError::RequiresPureState),
    };
    let za = ops.lifted_alice(0).add(&ops.lifted_alice(1)).scale_re(1.0 / SQRT_2);
    let xa = ops.lifted_alice(0).sub(&ops.lifted_alice(1)).scale_re(1.0 / SQRT_2);
    let m = za
        .mul(&ops.lifted_bob_first(0))
        .scale_re((2.0 * theta).cos())
        .add(&xa.mul(&ops.lifted_bob_second(1)).scale_re((2.0 * theta).sin()));
    Ok(psi.sub(&m.apply(psi)).norm())
}

/// Analytic one-outcome min-entropy bound from a CHSH value:
/// H = 1 - log2(1 + sqrt(2 - s²/4)) for |s| in [2, 2√2], clamped to [0, 1].
///
/// Values below 2 certify nothing (H = 0); values above 2√2 + 1e-6 are
/// rejected as super-quantum.
pub fn pironio_hmin(s: f64) -> Result<f64, BellError> {
    let mag = s.abs();
    if mag > 2.0 * SQRT_2 + QUANTUM_BOUND_SLACK {
        return Err(BellError::SuperQuantum { s });
    }
    if mag <= 2.0 {
        return Ok(0.0);
    }
    let mag = mag.min(2.0 * SQRT_2);
    let inner = (2.0 - mag * mag / 4.0).max(0.0);
    let h = 1.0 - (1.0 + inner.sqrt()).log2();
    Ok(h.clamp(0.0, 1.0))
}
