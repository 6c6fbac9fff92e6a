//! The sequential measurement protocol and its exact simulation.
//!
//! Alice holds one qubit of a (possibly noisy) maximally entangled pair and
//! measures A0 = (σz + σx)/√2 or A1 = (σz - σx)/√2. Bob first measures his
//! qubit weakly along σz with sharpness θ (y1 = 0) or projectively along σx
//! (y1 = 1), then measures the post-measurement state projectively along
//! σz (y2 = 0) or σx (y2 = 1).
//!
//! Two independent simulations of the same statistics are provided:
//!
//! * [`correlations_kraus`]: the weak measurement as a Kraus pair acting on
//!   Bob's qubit, second round by the Born rule on the updated state;
//! * [`correlations_dilated`]: the weak measurement dilated into a pair of
//!   commuting ±1 observables on Bob's qubit and a fixed ancilla
//!   cosθ|0⟩ + sinθ|1⟩, all rounds evaluated as ordinary projective
//!   measurements on the enlarged space.
//!
//! Agreement of the two tables to 1e-12 is a core correctness check.
//!
//! The noise model mixes white noise (weight p) and phase noise preserving
//! the σz ⊗ σz correlation (weight c):
//! ρ = (1-p-c)|φ+⟩⟨φ+| + p·1/4 + c·(|00⟩⟨00| + |11⟩⟨11|)/2,
//! giving visibilities ⟨σz⊗σz⟩ = 1-p and ⟨σx⊗σx⟩ = 1-p-c.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qsim::{
    expectation, kraus_pair, pauli_x, pauli_z, projectors_of_involution, tensor, ComplexMatrix,
    DensityMatrix, Ket, QsimError, State,
};
use crate::scenario::{CorrelationTable, ScenarioError};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid protocol parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Weak-measurement sharpness θ and noise weights (p white, c phase).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub theta: f64,
    pub p: f64,
    pub c: f64,
}

impl ProtocolParams {
    pub fn new(theta: f64, p: f64, c: f64) -> Result<Self, ProtocolError> {
        let params = Self { theta, p, c };
        params.validate()?;
        Ok(params)
    }

    /// Noiseless protocol at sharpness θ.
    pub fn ideal(theta: f64) -> Self {
        Self { theta, p: 0.0, c: 0.0 }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !self.theta.is_finite() {
            return Err(ProtocolError::InvalidParams(format!("theta = {}", self.theta)));
        }
        if !(self.p >= 0.0 && self.c >= 0.0 && self.p + self.c <= 1.0 + 1e-12) {
            return Err(ProtocolError::InvalidParams(format!(
                "need p, c >= 0 and p + c <= 1, got p = {}, c = {}",
                self.p, self.c
            )));
        }
        Ok(())
    }

    pub fn is_ideal(&self) -> bool {
        self.p == 0.0 && self.c == 0.0
    }
}

/// Alice's observables A0 = (σz + σx)/√2 and A1 = (σz - σx)/√2.
pub fn alice_observables() -> [ComplexMatrix; 2] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    [
        pauli_z().add(&pauli_x()).scale_re(r),
        pauli_z().sub(&pauli_x()).scale_re(r),
    ]
}

/// The two-qubit state shared by Alice and Bob under the noise model.
pub fn noisy_state(p: f64, c: f64) -> Result<DensityMatrix, ProtocolError> {
    if !(p >= 0.0 && c >= 0.0 && p + c <= 1.0 + 1e-12) {
        return Err(ProtocolError::InvalidParams(format!(
            "need p, c >= 0 and p + c <= 1, got p = {p}, c = {c}"
        )));
    }
    let phi = Ket::phi_plus().projector();
    let white = ComplexMatrix::identity(4).scale_re(0.25);
    let zero = Ket::basis(4, 0).projector(); // |00⟩⟨00|
    let three = Ket::basis(4, 3).projector(); // |11⟩⟨11|
    let phase = zero.add(&three).scale_re(0.5);
    let rho = phi
        .scale_re(1.0 - p - c)
        .add(&white.scale_re(p))
        .add(&phase.scale_re(c));
    Ok(DensityMatrix::new(rho)?)
}

/// The protocol in dilated form: Alice's qubit observables, Bob's four
/// commuting-where-required observables on qubit ⊗ ancilla, and the global
/// state on the 8-dimensional space A ⊗ B ⊗ ancilla.
#[derive(Debug, Clone)]
pub struct DilatedOperators {
    /// A0, A1 on Alice's qubit (2×2).
    pub alice: [ComplexMatrix; 2],
    /// First-round observables on Bob's pair (4×4): index y1.
    /// B(0) = σz ⊗ σz dilates the weak σz measurement; B(1) = σx ⊗ 1.
    pub bob_first: [ComplexMatrix; 2],
    /// Second-round observables (4×4): index y2, both in the y1 = 0 branch.
    /// B(0,0) = σz ⊗ 1 and B(0,1) = σx ⊗ σx; each commutes with B(0).
    pub bob_second: [ComplexMatrix; 2],
    /// Shared state: pure |φ+⟩ ⊗ (cosθ|0⟩ + sinθ|1⟩) when noiseless,
    /// otherwise ρ(p, c) ⊗ ancilla projector.
    pub state: State,
}

impl DilatedOperators {
    /// Alice's observable lifted to the full 8-dimensional space.
    pub fn lifted_alice(&self, x: usize) -> ComplexMatrix {
        tensor(&self.alice[x], &ComplexMatrix::identity(4))
    }

    /// First-round Bob observable lifted to the full space.
    pub fn lifted_bob_first(&self, y1: usize) -> ComplexMatrix {
        tensor(&ComplexMatrix::identity(2), &self.bob_first[y1])
    }

    /// Second-round Bob observable lifted to the full space.
    pub fn lifted_bob_second(&self, y2: usize) -> ComplexMatrix {
        tensor(&ComplexMatrix::identity(2), &self.bob_second[y2])
    }
}

/// Builds the dilated operators and state for the given parameters.
///
/// The construction guarantees, and tests assert, that every observable is
/// a hermitian involution and that each second-round observable commutes
/// with the first-round observable of its branch.
pub fn build_dilated(params: &ProtocolParams) -> Result<DilatedOperators, ProtocolError> {
    params.validate()?;
    let (s, c) = params.theta.sin_cos();
    let ancilla = Ket::from_real(&[c, s]);

    let bob_first = [tensor(&pauli_z(), &pauli_z()), tensor(&pauli_x(), &ComplexMatrix::identity(2))];
    let bob_second = [tensor(&pauli_z(), &ComplexMatrix::identity(2)), tensor(&pauli_x(), &pauli_x())];

    let state = if params.is_ideal() {
        State::Pure(Ket::phi_plus().tensor(&ancilla))
    } else {
        let rho4 = noisy_state(params.p, params.c)?;
        let anc_proj = ancilla.projector();
        State::Mixed(DensityMatrix::new(rho4.matrix().kron(&anc_proj))?)
    };

    Ok(DilatedOperators { alice: alice_observables(), bob_first, bob_second, state })
}

/// Exact behavior via the Kraus representation of the weak measurement.
pub fn correlations_kraus(params: &ProtocolParams) -> Result<CorrelationTable, ProtocolError> {
    params.validate()?;
    let rho = State::Mixed(noisy_state(params.p, params.c)?);
    let kraus = kraus_pair(params.theta);
    let alice = alice_observables();
    let alice_proj: Vec<[ComplexMatrix; 2]> = alice
        .iter()
        .map(|a| {
            let (plus, minus) = projectors_of_involution(a)?;
            Ok([plus, minus])
        })
        .collect::<Result<_, QsimError>>()?;
    let (z_plus, z_minus) = projectors_of_involution(&pauli_z())?;
    let (x_plus, x_minus) = projectors_of_involution(&pauli_x())?;
    let second = [[z_plus, z_minus], [x_plus, x_minus]];

    let idx = |o: i8| usize::from(o == -1);
    let table = CorrelationTable::from_fn(|x, y1, y2, a, b1, b2| {
        let pa = &alice_proj[x][idx(a)];
        if y1 == 0 {
            // Weak σz round: effect K†(b1) Π(b2 | y2) K(b1) on Bob's qubit.
            let k = if b1 == 1 { &kraus.k_plus } else { &kraus.k_minus };
            let effect = k.dagger().mul(&second[y2][idx(b2)]).mul(k);
            expectation(&rho, &tensor(pa, &effect)).expect("dimensions fixed")
        } else {
            // Projective σx round consumes the state; the second outcome is
            // a fair coin regardless of y2.
            let pb = &second[1][idx(b1)];
            0.5 * expectation(&rho, &tensor(pa, pb)).expect("dimensions fixed")
        }
    })?;
    Ok(table)
}

/// Exact behavior via the ancilla dilation; must agree with
/// [`correlations_kraus`] to 1e-12 for all parameters.
pub fn correlations_dilated(params: &ProtocolParams) -> Result<CorrelationTable, ProtocolError> {
    let ops = build_dilated(params)?;
    correlations_of(&ops)
}

/// Behavior of an explicit dilated strategy by the Born rule.
pub fn correlations_of(ops: &DilatedOperators) -> Result<CorrelationTable, ProtocolError> {
    let idx = |o: i8| usize::from(o == -1);
    let mut alice_proj = Vec::with_capacity(2);
    for x in 0..2 {
        let (plus, minus) = projectors_of_involution(&ops.lifted_alice(x))?;
        alice_proj.push([plus, minus]);
    }
    let mut first_proj = Vec::with_capacity(2);
    for y1 in 0..2 {
        let (plus, minus) = projectors_of_involution(&ops.lifted_bob_first(y1))?;
        first_proj.push([plus, minus]);
    }
    let mut second_proj = Vec::with_capacity(2);
    for y2 in 0..2 {
        let (plus, minus) = projectors_of_involution(&ops.lifted_bob_second(y2))?;
        second_proj.push([plus, minus]);
    }

    let table = CorrelationTable::from_fn(|x, y1, y2, a, b1, b2| {
        let pa = &alice_proj[x][idx(a)];
        let pb1 = &first_proj[y1][idx(b1)];
        if y1 == 0 {
            // Commuting projector triple: a single joint Born probability.
            let pb2 = &second_proj[y2][idx(b2)];
            let joint = pa.mul(pb1).mul(pb2);
            // Symmetrize away round-off so expectation sees a hermitian op.
            let joint = joint.add(&joint.dagger()).scale_re(0.5);
            expectation(&ops.state, &joint).expect("dimensions fixed")
        } else {
            let joint = pa.mul(pb1);
            let joint = joint.add(&joint.dagger()).scale_re(0.5);
            0.5 * expectation(&ops.state, &joint).expect("dimensions fixed")
        }
    })?;
    Ok(table)
}

/// The CHSH value √2·(2 - 2p - c) reached by the reference (non-sequential)
/// strategy under the same noise: both visibilities enter once.
pub fn chsh_reference(p: f64, c: f64) -> Result<f64, ProtocolError> {
    if !(p >= 0.0 && c >= 0.0 && p + c <= 1.0 + 1e-12) {
        return Err(ProtocolError::InvalidParams(format!(
            "need p, c >= 0 and p + c <= 1, got p = {p}, c = {c}"
        )));
    }
    Ok(std::f64::consts::SQRT_2 * (2.0 - 2.0 * p - c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, SQRT_2};

    fn table_max_diff(a: &CorrelationTable, b: &CorrelationTable) -> f64 {
        let mut worst = 0.0f64;
        for x in 0..2 {
            for y1 in 0..2 {
                for y2 in 0..2 {
                    for aa in [1i8, -1] {
                        for b1 in [1i8, -1] {
                            for b2 in [1i8, -1] {
                                worst = worst.max(
                                    (a.prob(x, y1, y2, aa, b1, b2)
                                        - b.prob(x, y1, y2, aa, b1, b2))
                                    .abs(),
                                );
                            }
                        }
                    }
                }
            }
        }
        worst
    }

    #[test]
    fn params_are_validated() {
        assert!(ProtocolParams::new(0.3, 0.0, 0.0).is_ok());
        assert!(ProtocolParams::new(0.3, -0.1, 0.0).is_err());
        assert!(ProtocolParams::new(0.3, 0.6, 0.5).is_err());
        assert!(ProtocolParams::new(f64::NAN, 0.0, 0.0).is_err());
        assert!(noisy_state(0.7, 0.4).is_err());
    }

    #[test]
    fn noisy_state_visibilities() {
        // ⟨σz⊗σz⟩ = 1 - p and ⟨σx⊗σx⟩ = 1 - p - c.
        let rho = State::Mixed(noisy_state(0.019, 0.017).unwrap());
        let zz = tensor(&pauli_z(), &pauli_z());
        let xx = tensor(&pauli_x(), &pauli_x());
        assert!((expectation(&rho, &zz).unwrap() - 0.981).abs() < 1e-12);
        assert!((expectation(&rho, &xx).unwrap() - 0.964).abs() < 1e-12);
    }

    #[test]
    fn dilated_operators_satisfy_the_algebra() {
        let ops = build_dilated(&ProtocolParams::new(0.37, 0.02, 0.01).unwrap()).unwrap();
        let id4 = ComplexMatrix::identity(4);
        let id2 = ComplexMatrix::identity(2);
        for a in &ops.alice {
            assert!(a.mul(a).max_abs_diff(&id2) < 1e-14);
            assert!(a.hermiticity_residual() < 1e-14);
        }
        for b in ops.bob_first.iter().chain(ops.bob_second.iter()) {
            assert!(b.mul(b).max_abs_diff(&id4) < 1e-14);
            assert!(b.hermiticity_residual() < 1e-14);
        }
        // Second-round observables commute with the first-round one of
        // their branch (y1 = 0).
        for b2 in &ops.bob_second {
            let comm = ops.bob_first[0].mul(b2).sub(&b2.mul(&ops.bob_first[0]));
            assert!(comm.max_abs_diff(&ComplexMatrix::zeros(4, 4)) < 1e-14);
        }
    }

    #[test]
    fn kraus_and_dilation_agree() {
        for (theta, p, c) in [
            (0.0, 0.0, 0.0),
            (FRAC_PI_8, 0.0, 0.0),
            (FRAC_PI_4, 0.0, 0.0),
            (0.412, 0.019, 0.017),
            (0.7, 0.05, 0.1),
            (-0.3, 0.2, 0.3),
        ] {
            let params = ProtocolParams::new(theta, p, c).unwrap();
            let a = correlations_kraus(&params).unwrap();
            let b = correlations_dilated(&params).unwrap();
            assert!(
                table_max_diff(&a, &b) < 1e-12,
                "disagreement at theta={theta}, p={p}, c={c}"
            );
        }
    }

    #[test]
    fn protocol_tables_are_physical() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let theta = rng.gen_range(-1.0..1.0);
            let p = rng.gen_range(0.0..0.6);
            let c = rng.gen_range(0.0..(1.0 - p));
            let t = correlations_kraus(&ProtocolParams::new(theta, p, c).unwrap()).unwrap();
            assert!(t.validate_no_signaling().passes(1e-12));
            assert!(t.validate_sequentiality().passes(1e-12));
        }
    }

    #[test]
    fn sharp_first_round_repeats_in_the_z_basis() {
        // θ = 0: first round is projective σz; the y2 = 0 second round must
        // repeat its outcome exactly.
        let t = correlations_kraus(&ProtocolParams::ideal(0.0)).unwrap();
        for x in 0..2 {
            let mut agree = 0.0;
            for a in [1i8, -1] {
                for b in [1i8, -1] {
                    agree += t.prob(x, 0, 0, a, b, b);
                }
            }
            assert!((agree - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn unsharp_first_round_is_unbiased_coin() {
        // θ = π/4: the weak round reveals nothing, outcomes are fair and
        // uncorrelated with Alice.
        let t = correlations_kraus(&ProtocolParams::ideal(FRAC_PI_4)).unwrap();
        let s = t.summarize().unwrap();
        assert!(s.b1[0].abs() < 1e-14);
        assert!(s.ab1[0][0].abs() < 1e-14);
        assert!(s.ab1[1][0].abs() < 1e-14);
    }

    #[test]
    fn second_outcome_in_the_x_branch_is_a_fair_coin() {
        let t = correlations_kraus(&ProtocolParams::new(0.52, 0.1, 0.05).unwrap()).unwrap();
        for x in 0..2 {
            for y2 in 0..2 {
                for a in [1i8, -1] {
                    for b1 in [1i8, -1] {
                        let plus = t.prob(x, 1, y2, a, b1, 1);
                        let minus = t.prob(x, 1, y2, a, b1, -1);
                        assert!((plus - minus).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn correlators_match_closed_forms() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for _ in 0..20 {
            let theta: f64 = rng.gen_range(-0.2..1.0);
            let p = rng.gen_range(0.0..0.4);
            let c = rng.gen_range(0.0..0.4);
            let vz = 1.0 - p;
            let vx = 1.0 - p - c;
            let t = correlations_kraus(&ProtocolParams::new(theta, p, c).unwrap()).unwrap();
            let s = t.summarize().unwrap();
            let c2 = (2.0 * theta).cos();
            let s2 = (2.0 * theta).sin();
            for x in 0..2 {
                let sign = if x == 0 { 1.0 } else { -1.0 };
                assert!((s.ab1[x][0] - c2 * vz * r).abs() < 1e-12);
                assert!((s.ab1[x][1] - sign * vx * r).abs() < 1e-12);
                assert!((s.ab2[x][0] - vz * r).abs() < 1e-12);
                assert!((s.ab2[x][1] - sign * s2 * vx * r).abs() < 1e-12);
                assert!(s.a[x].abs() < 1e-12);
            }
            assert!(s.b1[0].abs() < 1e-12);
            assert!(s.b1[1].abs() < 1e-12);
            // ⟨B(0,0)⟩ = 0 and ⟨B(0,1)⟩ = 0 for this state family.
            assert!(s.b2[0].abs() < 1e-12);
            assert!(s.b2[1].abs() < 1e-12);
        }
    }

    #[test]
    fn chsh_reference_values() {
        assert!((chsh_reference(0.0, 0.0).unwrap() - 2.0 * SQRT_2).abs() < 1e-15);
        // Model value for the first experiment row.
        assert!((chsh_reference(0.019, 0.017).unwrap() - 2.751).abs() < 0.001);
        assert!(chsh_reference(0.8, 0.5).is_err());
    }

    #[test]
    fn params_json_round_trip() {
        let p = ProtocolParams::new(FRAC_PI_8, 0.01, 0.02).unwrap();
        let js = serde_json::to_string(&p).unwrap();
        let back: ProtocolParams = serde_json::from_str(&js).unwrap();
        assert_eq!(p, back);
    }
}
