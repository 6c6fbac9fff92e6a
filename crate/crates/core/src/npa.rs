//! Noncommutative moment relaxation (NPA-style) for device-independent
//! randomness bounds.
//!
//! The measurement algebra has six generators, each the projector onto
//! outcome `+1` of a binary measurement: Alice's two settings, Bob's two
//! first-round settings, and Bob's two second-round settings for the branch
//! that keeps the state alive. Projectors are idempotent, so adjacent equal
//! letters collapse to one; Alice's letters commute with all of Bob's, and
//! on Bob's side only the gentle first-round projector commutes with the
//! second round (`[B0, B00] = [B0, B01] = 0`). Words are kept in the
//! canonical form those relations induce — collapse duplicates, sort
//! commuting neighbours — which is exactly the quotient the physics
//! imposes, no more.
//!
//! A moment matrix over a word basis is Hermitian, so it is realified into
//! a symmetric block twice the size, `[[R, -J], [J, R]]`: the upper-left
//! carries real parts, the upper-right carries `-Im`, and structural
//! equalities tie every repeated moment together (conjugate words get a
//! sign flip, self-adjoint words get their imaginary part pinned to zero).
//!
//! Probabilities are linear in the moments once negative outcomes are
//! rewritten through `Π⁻ = 1 - Π⁺`, and ±1-observable means through
//! `W = 2Π⁺ - 1`. The adversarial guessing probability of Bob's outcome
//! pair in the `(y1, y2) = (0, 1)` branch is then an SDP: one realified
//! moment block per guess value `(e1, e2)`, the observed behavior
//! constraining the sum of blocks through equalities, normalization fixing
//! the total mass, and the objective summing each block's probability of
//! agreeing with its own label. The negative log of the optimum is the
//! certified min-entropy. A CHSH-only variant (one score constraint
//! instead of a behavior) provides the non-sequential baseline.
//!
//! The behavior equalities are imposed exactly; `epsilon` is the numerical
//! margin granted when a solution is re-verified, guarding against the
//! rounding of targets stored as `f64`. It is deliberately not adversary
//! slack: the guessing probability responds to genuine constraint windows
//! as `O(√ε)`, which would swamp the bound long before machine precision
//! mattered.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::protocol::{self, ProtocolError, ProtocolParams};
use crate::scenario::{CorrelationTable, ScenarioError};
use crate::sdp::{
    self, LinearExpr, Relation, SdpProblem, SolveOptions, SolveStatus, Term,
};

/// Default verification margin for the behavior constraints: a solution may
/// miss each constrained probability or mean by this much before it is
/// rejected. Much larger than machine precision, much smaller than any
/// entropy tolerance of interest.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum NpaError {
    #[error("guessing target must be the (y1, y2) = (0, 1) branch, got ({0}, {1})")]
    UnsupportedTarget(u8, u8),
    #[error("relaxation level must be 1 or 2, got {0}")]
    BadLevel(usize),
    #[error("CHSH score {0} lies outside the quantum range")]
    SuperQuantum(f64),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("internal layout error: {0}")]
    Layout(String),
    #[error("solver did not certify a bound: {0}")]
    Solver(String),
}

/// Generators of the measurement algebra: each is the projector onto
/// outcome `+1` of the corresponding binary measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    A0,
    A1,
    B0,
    B1,
    B00,
    B01,
}

impl Letter {
    pub fn is_alice(self) -> bool {
        matches!(self, Letter::A0 | Letter::A1)
    }

    fn code(self) -> u8 {
        match self {
            Letter::A0 => 0,
            Letter::A1 => 1,
            Letter::B0 => 0,
            Letter::B1 => 1,
            Letter::B00 => 2,
            Letter::B01 => 3,
        }
    }

    fn bob_from_code(code: u8) -> Letter {
        match code {
            0 => Letter::B0,
            1 => Letter::B1,
            2 => Letter::B00,
            _ => Letter::B01,
        }
    }

    fn alice_from_code(code: u8) -> Letter {
        if code == 0 {
            Letter::A0
        } else {
            Letter::A1
        }
    }
}

/// Whether two generators commute in the sequential algebra.
pub fn commutes(a: Letter, b: Letter) -> bool {
    if a == b {
        return true;
    }
    if a.is_alice() != b.is_alice() {
        return true;
    }
    if a.is_alice() {
        return false;
    }
    // Within Bob: the weakly measured first-round projector commutes with
    // the second round; nothing else does.
    matches!(
        (a, b),
        (Letter::B0, Letter::B00)
            | (Letter::B00, Letter::B0)
            | (Letter::B0, Letter::B01)
            | (Letter::B01, Letter::B0)
    )
}

fn bob_codes_commute(a: u8, b: u8) -> bool {
    a == b || (a == 0 && (b == 2 || b == 3)) || (b == 0 && (a == 2 || a == 3))
}

/// Rewrites a single-party letter sequence to canonical form: adjacent
/// duplicates collapse to one (idempotence, stack pass), then commuting
/// neighbours are sorted ascending; both passes repeat to a fixpoint.
fn canon_seq(mut seq: Vec<u8>, comm: impl Fn(u8, u8) -> bool) -> Vec<u8> {
    loop {
        let mut changed = false;
        let mut out: Vec<u8> = Vec::with_capacity(seq.len());
        for &l in &seq {
            if out.last() == Some(&l) {
                changed = true;
            } else {
                out.push(l);
            }
        }
        seq = out;
        let mut i = 0;
        while i + 1 < seq.len() {
            if seq[i] > seq[i + 1] && comm(seq[i], seq[i + 1]) {
                seq.swap(i, i + 1);
                changed = true;
            }
            i += 1;
        }
        if !changed {
            return seq;
        }
    }
}

/// A canonical word of the measurement algebra. Cross-party commutation is
/// built into the representation: the Alice and Bob parts are stored
/// separately, each in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word {
    alice: Vec<u8>,
    bob: Vec<u8>,
}

impl Word {
    pub fn identity() -> Self {
        Word { alice: Vec::new(), bob: Vec::new() }
    }

    pub fn letter(l: Letter) -> Self {
        Self::from_letters(&[l])
    }

    /// Builds the canonical word for a product of generators, left to right.
    pub fn from_letters(letters: &[Letter]) -> Self {
        let mut alice = Vec::new();
        let mut bob = Vec::new();
        for &l in letters {
            if l.is_alice() {
                alice.push(l.code());
            } else {
                bob.push(l.code());
            }
        }
        Word {
            alice: canon_seq(alice, |_, _| false),
            bob: canon_seq(bob, bob_codes_commute),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.alice.is_empty() && self.bob.is_empty()
    }

    /// Canonical presentation: Alice letters first, then Bob letters.
    pub fn letters(&self) -> Vec<Letter> {
        self.alice
            .iter()
            .map(|&c| Letter::alice_from_code(c))
            .chain(self.bob.iter().map(|&c| Letter::bob_from_code(c)))
            .collect()
    }

    pub fn product(&self, rhs: &Word) -> Word {
        let mut alice = self.alice.clone();
        alice.extend_from_slice(&rhs.alice);
        let mut bob = self.bob.clone();
        bob.extend_from_slice(&rhs.bob);
        Word {
            alice: canon_seq(alice, |_, _| false),
            bob: canon_seq(bob, bob_codes_commute),
        }
    }

    /// The adjoint: projectors are Hermitian, so reversing the string
    /// conjugates the word.
    pub fn reversed(&self) -> Word {
        let mut alice = self.alice.clone();
        alice.reverse();
        let mut bob = self.bob.clone();
        bob.reverse();
        Word {
            alice: canon_seq(alice, |_, _| false),
            bob: canon_seq(bob, bob_codes_commute),
        }
    }

    /// Representative of the conjugation class `{w, w†}`.
    fn class_rep(&self) -> (Word, bool) {
        let rev = self.reversed();
        if rev < *self {
            (rev, true)
        } else {
            (self.clone(), false)
        }
    }
}

/// The level-`1+AB`-style basis for the sequential scenario: identity, the
/// six generators, the two commuting second-round pairs, and every Alice
/// letter times each Bob word. 21 words.
pub fn sequential_basis() -> Vec<Word> {
    use Letter::*;
    let bob_words: Vec<Vec<Letter>> =
        vec![vec![B0], vec![B1], vec![B00], vec![B01], vec![B0, B00], vec![B0, B01]];
    let mut basis = vec![Word::identity(), Word::letter(A0), Word::letter(A1)];
    for bw in &bob_words {
        basis.push(Word::from_letters(bw));
    }
    for a in [A0, A1] {
        for bw in &bob_words {
            let mut ls = vec![a];
            ls.extend_from_slice(bw);
            basis.push(Word::from_letters(&ls));
        }
    }
    basis
}

/// Word basis for the plain CHSH scenario at relaxation level 1 (generators
/// only) or 2 (all two-letter products as well).
pub fn chsh_basis(level: usize) -> Result<Vec<Word>, NpaError> {
    use Letter::*;
    let mut basis = vec![
        Word::identity(),
        Word::letter(A0),
        Word::letter(A1),
        Word::letter(B0),
        Word::letter(B1),
    ];
    match level {
        1 => Ok(basis),
        2 => {
            for pair in [
                [A0, A1],
                [A1, A0],
                [B0, B1],
                [B1, B0],
                [A0, B0],
                [A0, B1],
                [A1, B0],
                [A1, B1],
            ] {
                basis.push(Word::from_letters(&pair));
            }
            Ok(basis)
        }
        other => Err(NpaError::BadLevel(other)),
    }
}

/// Realified layout of a Hermitian moment matrix over a word basis.
///
/// For a basis of `n` words the SDP block is `2n × 2n`: entry `(i, j)` with
/// `i ≤ j < n` holds `Re ⟨w_i† w_j⟩`, entry `(i, n + j)` holds
/// `-Im ⟨w_i† w_j⟩`, and the lower-right `n × n` copy of the real part plus
/// the sign structure of the imaginary part are enforced by structural
/// equality constraints emitted per block.
pub struct MomentLayout {
    pub basis: Vec<Word>,
    /// Realified block side length, `2 * basis.len()`.
    pub dim: usize,
    re_anchor: BTreeMap<Word, (u16, u16)>,
    re_ties: Vec<((u16, u16), (u16, u16))>,
    im_pins: Vec<(u16, u16)>,
    im_ties: Vec<((u16, u16), (u16, u16), f64)>,
}

impl MomentLayout {
    pub fn new(basis: Vec<Word>) -> Self {
        let n = basis.len();
        let revs: Vec<Word> = basis.iter().map(Word::reversed).collect();
        // (class representative, conjugated?, self-adjoint class?) per cell.
        let mut info: Vec<(Word, bool, bool)> = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let u = revs[i].product(&basis[j]);
                let (rep, conj) = u.class_rep();
                let palin = rep.reversed() == rep;
                info.push((rep, conj, palin));
            }
        }

        let mut re_anchor: BTreeMap<Word, (u16, u16)> = BTreeMap::new();
        let mut re_ties = Vec::new();
        for i in 0..n {
            for j in i..n {
                let rep = &info[i * n + j].0;
                match re_anchor.get(rep) {
                    None => {
                        re_anchor.insert(rep.clone(), (i as u16, j as u16));
                    }
                    Some(&anchor) => re_ties.push(((i as u16, j as u16), anchor)),
                }
            }
        }

        let mut im_pins = Vec::new();
        let mut im_ties = Vec::new();
        let mut im_anchor: BTreeMap<Word, ((u16, u16), f64)> = BTreeMap::new();
        for i in 0..n {
            im_pins.push((i as u16, (n + i) as u16));
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (rep, conj, palin) = &info[i * n + j];
                let cell = (i as u16, (n + j) as u16);
                if *palin {
                    im_pins.push(cell);
                    continue;
                }
                let sigma = if *conj { -1.0 } else { 1.0 };
                match im_anchor.get(rep) {
                    None => {
                        im_anchor.insert(rep.clone(), (cell, sigma));
                    }
                    Some(&(anchor, sigma0)) => im_ties.push((cell, anchor, sigma * sigma0)),
                }
            }
        }

        MomentLayout { basis, dim: 2 * n, re_anchor, re_ties, im_pins, im_ties }
    }

    /// The real-part cell representing `⟨w⟩` (shared with `⟨w†⟩`), if the
    /// word's class occurs in this layout.
    pub fn real_cell(&self, w: &Word) -> Option<(usize, usize)> {
        let (rep, _) = w.class_rep();
        self.re_anchor.get(&rep).map(|&(i, j)| (i as usize, j as usize))
    }

    /// Emits the structural equalities of one realified moment block.
    fn emit_structure(&self, problem: &mut SdpProblem, block: usize) {
        let n = self.basis.len();
        let tie = |a: (u16, u16), b: (u16, u16), sign: f64| -> LinearExpr {
            LinearExpr::new(vec![
                Term::new(block, a.0 as usize, a.1 as usize, 1.0),
                Term::new(block, b.0 as usize, b.1 as usize, -sign),
            ])
        };
        for &(cell, anchor) in &self.re_ties {
            problem.add_constraint(tie(cell, anchor, 1.0), Relation::Eq, 0.0, 0.0);
        }
        // Lower-right copy of the real part.
        for i in 0..n {
            for j in i..n {
                problem.add_constraint(
                    tie(((n + i) as u16, (n + j) as u16), (i as u16, j as u16), 1.0),
                    Relation::Eq,
                    0.0,
                    0.0,
                );
            }
        }
        for &cell in &self.im_pins {
            problem.add_constraint(
                LinearExpr::new(vec![Term::new(block, cell.0 as usize, cell.1 as usize, 1.0)]),
                Relation::Eq,
                0.0,
                0.0,
            );
        }
        for &(cell, anchor, sign) in &self.im_ties {
            problem.add_constraint(tie(cell, anchor, sign), Relation::Eq, 0.0, 0.0);
        }
    }
}

/// How the observed device behavior enters the guessing SDP. `epsilon` is
/// the per-constraint verification margin in either mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GuessingConstraintMode {
    /// Constrain all 32 outcome probabilities of the kept branch
    /// (`y1 = 0`) plus the 8 first-round marginals of the discarded branch.
    FullTable { epsilon: f64 },
    /// Constrain only the 14 one- and two-point correlators (means of
    /// `A_x`, `B_y`, second-round observables, and their Alice products).
    Summary { epsilon: f64 },
}

impl Default for GuessingConstraintMode {
    fn default() -> Self {
        GuessingConstraintMode::FullTable { epsilon: DEFAULT_EPSILON }
    }
}

/// Expands a product of outcome projectors into canonical words: each
/// factor contributes `Π⁺` for outcome `+1` and `1 - Π⁺` for outcome `-1`,
/// keeping the factor order.
fn expand_outcome_projectors(factors: &[(Word, i8)]) -> BTreeMap<Word, f64> {
    let minus: Vec<usize> = factors
        .iter()
        .enumerate()
        .filter(|(_, f)| f.1 < 0)
        .map(|(i, _)| i)
        .collect();
    let mut out: BTreeMap<Word, f64> = BTreeMap::new();
    for mask in 0u32..(1 << minus.len()) {
        let mut take = vec![true; factors.len()];
        let mut sign = 1.0;
        for (bit, &fi) in minus.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                sign = -sign;
            } else {
                take[fi] = false; // the constant half of 1 - Π⁺
            }
        }
        let mut w = Word::identity();
        for (i, (fw, _)) in factors.iter().enumerate() {
            if take[i] {
                w = w.product(fw);
            }
        }
        *out.entry(w).or_insert(0.0) += sign;
    }
    out
}

/// Expands a product of ±1 observables `Π (2Π⁺_k - 1)` into canonical
/// words of the corresponding projectors.
fn expand_observable_product(projs: &[Word]) -> BTreeMap<Word, f64> {
    let k = projs.len();
    let mut out: BTreeMap<Word, f64> = BTreeMap::new();
    for mask in 0u32..(1 << k) {
        let mut w = Word::identity();
        let mut coeff = 1.0;
        for (i, pw) in projs.iter().enumerate() {
            if mask & (1 << i) != 0 {
                w = w.product(pw);
                coeff *= 2.0;
            } else {
                coeff = -coeff;
            }
        }
        *out.entry(w).or_insert(0.0) += coeff;
    }
    out
}

/// Adds one behavior equality `Σ_blocks Σ_words coeff · Re⟨word⟩ = target`,
/// verified up to `eps`.
fn add_behavior_eq(
    problem: &mut SdpProblem,
    layout: &MomentLayout,
    nblocks: usize,
    words: &BTreeMap<Word, f64>,
    target: f64,
    eps: f64,
) -> Result<(), NpaError> {
    let mut terms = Vec::with_capacity(nblocks * words.len());
    for block in 0..nblocks {
        for (w, &co) in words {
            if co == 0.0 {
                continue;
            }
            let (i, j) = layout
                .real_cell(w)
                .ok_or_else(|| NpaError::Layout(format!("word {w:?} missing from layout")))?;
            terms.push(Term::new(block, i, j, co));
        }
    }
    problem.add_constraint(LinearExpr::new(terms), Relation::Eq, target, eps);
    Ok(())
}

fn alice_word(x: u8) -> Word {
    Word::letter(if x == 0 { Letter::A0 } else { Letter::A1 })
}

fn bob_first_word(y1: u8) -> Word {
    Word::letter(if y1 == 0 { Letter::B0 } else { Letter::B1 })
}

fn bob_second_word(y2: u8) -> Word {
    Word::letter(if y2 == 0 { Letter::B00 } else { Letter::B01 })
}

/// Builds the guessing-probability relaxation for Bob's outcome pair in the
/// `(y1, y2) = (0, 1)` branch of a sequential behavior.
///
/// The problem has four realified moment blocks, one per guess
/// `(e1, e2) ∈ {+1, -1}²` in the order `(+,+), (+,-), (-,+), (-,-)`; the
/// objective is the total probability that the devices produce each block's
/// label, and `max` of it is the guessing probability.
pub fn build_guessing_problem(
    table: &CorrelationTable,
    y1: u8,
    y2: u8,
    mode: GuessingConstraintMode,
) -> Result<(SdpProblem, MomentLayout), NpaError> {
    if (y1, y2) != (0, 1) {
        return Err(NpaError::UnsupportedTarget(y1, y2));
    }
    let layout = MomentLayout::new(sequential_basis());
    let nblocks = 4;
    let mut problem = SdpProblem::new(vec![layout.dim; nblocks], true);
    for block in 0..nblocks {
        layout.emit_structure(&mut problem, block);
    }

    // Total mass of the four subnormalized blocks.
    let norm_terms: Vec<Term> = (0..nblocks).map(|b| Term::new(b, 0, 0, 1.0)).collect();
    problem.add_constraint(LinearExpr::new(norm_terms), Relation::Eq, 1.0, 0.0);

    let signs = [1i8, -1i8];
    match mode {
        GuessingConstraintMode::FullTable { epsilon } => {
            // Kept branch: all outcome probabilities for both x and both y2.
            for x in 0..2u8 {
                for y2c in 0..2u8 {
                    for &a in &signs {
                        for &b1 in &signs {
                            for &b2 in &signs {
                                let words = expand_outcome_projectors(&[
                                    (alice_word(x), a),
                                    (bob_first_word(0), b1),
                                    (bob_second_word(y2c), b2),
                                ]);
                                let target =
                                    table.prob(x as usize, 0, y2c as usize, a, b1, b2);
                                add_behavior_eq(&mut problem, &layout, nblocks, &words, target, epsilon)?;
                            }
                        }
                    }
                }
            }
            // Discarded branch: first-round marginals only (the second
            // outcome carries no information there).
            for x in 0..2u8 {
                for &a in &signs {
                    for &b1 in &signs {
                        let words = expand_outcome_projectors(&[
                            (alice_word(x), a),
                            (bob_first_word(1), b1),
                        ]);
                        let mut target = 0.0;
                        for y2c in 0..2usize {
                            for &b2 in &signs {
                                target += table.prob(x as usize, 1, y2c, a, b1, b2);
                            }
                        }
                        target /= 2.0; // averaged over the free y2 context
                        add_behavior_eq(&mut problem, &layout, nblocks, &words, target, epsilon)?;
                    }
                }
            }
        }
        GuessingConstraintMode::Summary { epsilon } => {
            let s = table.summarize()?;
            for x in 0..2usize {
                let words = expand_observable_product(&[alice_word(x as u8)]);
                add_behavior_eq(&mut problem, &layout, nblocks, &words, s.a[x], epsilon)?;
            }
            for y in 0..2usize {
                let words = expand_observable_product(&[bob_first_word(y as u8)]);
                add_behavior_eq(&mut problem, &layout, nblocks, &words, s.b1[y], epsilon)?;
            }
            for y in 0..2usize {
                let words = expand_observable_product(&[bob_second_word(y as u8)]);
                add_behavior_eq(&mut problem, &layout, nblocks, &words, s.b2[y], epsilon)?;
            }
            for x in 0..2usize {
                for y in 0..2usize {
                    let words = expand_observable_product(&[
                        alice_word(x as u8),
                        bob_first_word(y as u8),
                    ]);
                    add_behavior_eq(&mut problem, &layout, nblocks, &words, s.ab1[x][y], epsilon)?;
                }
            }
            for x in 0..2usize {
                for y in 0..2usize {
                    let words = expand_observable_product(&[
                        alice_word(x as u8),
                        bob_second_word(y as u8),
                    ]);
                    add_behavior_eq(&mut problem, &layout, nblocks, &words, s.ab2[x][y], epsilon)?;
                }
            }
        }
    }

    // Objective: each block pays out when the devices match its label.
    let guesses = [(1i8, 1i8), (1, -1), (-1, 1), (-1, -1)];
    let mut obj_terms = Vec::new();
    for (block, &(e1, e2)) in guesses.iter().enumerate() {
        let words =
            expand_outcome_projectors(&[(bob_first_word(0), e1), (bob_second_word(1), e2)]);
        for (w, co) in &words {
            if *co == 0.0 {
                continue;
            }
            let (i, j) = layout
                .real_cell(w)
                .ok_or_else(|| NpaError::Layout(format!("objective word {w:?} missing")))?;
            obj_terms.push(Term::new(block, i, j, *co));
        }
    }
    problem.objective = LinearExpr::new(obj_terms);

    Ok((problem, layout))
}

/// Builds the non-sequential baseline: the probability of guessing Alice's
/// `x = 0` outcome given only the CHSH score. Two realified moment blocks
/// (guess `+1`, guess `-1`); the score enters as a hard equality.
pub fn build_chsh_guessing_problem(
    s_target: f64,
    level: usize,
) -> Result<(SdpProblem, MomentLayout), NpaError> {
    let quantum_bound = 2.0 * std::f64::consts::SQRT_2;
    if !s_target.is_finite() || s_target.abs() > quantum_bound + crate::bell::QUANTUM_BOUND_SLACK {
        return Err(NpaError::SuperQuantum(s_target));
    }
    let layout = MomentLayout::new(chsh_basis(level)?);
    let nblocks = 2;
    let mut problem = SdpProblem::new(vec![layout.dim; nblocks], true);
    for block in 0..nblocks {
        layout.emit_structure(&mut problem, block);
    }

    let norm_terms: Vec<Term> = (0..nblocks).map(|b| Term::new(b, 0, 0, 1.0)).collect();
    problem.add_constraint(LinearExpr::new(norm_terms), Relation::Eq, 1.0, 0.0);

    // ⟨A0 B0⟩ + ⟨A0 B1⟩ + ⟨A1 B0⟩ - ⟨A1 B1⟩ summed over blocks, each mean
    // expanded in projector moments.
    let mut score: BTreeMap<Word, f64> = BTreeMap::new();
    for (x, y, sign) in [(0u8, 0u8, 1.0f64), (0, 1, 1.0), (1, 0, 1.0), (1, 1, -1.0)] {
        for (w, co) in expand_observable_product(&[alice_word(x), bob_first_word(y)]) {
            *score.entry(w).or_insert(0.0) += sign * co;
        }
    }
    let mut score_terms = Vec::new();
    for block in 0..nblocks {
        for (w, &co) in &score {
            if co == 0.0 {
                continue;
            }
            let (i, j) = layout
                .real_cell(w)
                .ok_or_else(|| NpaError::Layout("CHSH word missing".into()))?;
            score_terms.push(Term::new(block, i, j, co));
        }
    }
    problem.add_constraint(LinearExpr::new(score_terms), Relation::Eq, s_target, 0.0);

    let mut obj_terms = Vec::new();
    for (block, e) in [(0usize, 1i8), (1, -1)] {
        let words = expand_outcome_projectors(&[(alice_word(0), e)]);
        for (w, co) in &words {
            if *co == 0.0 {
                continue;
            }
            let (i, j) = layout
                .real_cell(w)
                .ok_or_else(|| NpaError::Layout("objective word missing".into()))?;
            obj_terms.push(Term::new(block, i, j, *co));
        }
    }
    problem.objective = LinearExpr::new(obj_terms);

    Ok((problem, layout))
}

/// A solved and independently re-verified guessing bound.
#[derive(Debug, Clone)]
pub struct MinEntropyCertificate {
    pub guessing_probability: f64,
    /// `-log2` of the guessing probability, clamped to `[0, ∞)`.
    pub min_entropy: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub duality_gap: f64,
    /// Worst constraint violation beyond its own tolerance, recomputed from
    /// the returned matrices.
    pub constraint_excess: f64,
    /// Most negative block eigenvalue, recomputed from the returned matrices.
    pub min_block_eigenvalue: f64,
}

/// Verification gate applied to every certificate.
pub const VERIFY_TOL: f64 = 1e-6;

/// Solves a guessing problem and certifies the result: the solution must
/// come back `Optimal` (or `Inaccurate`) **and** survive independent
/// re-verification of feasibility before any entropy is reported.
pub fn certify_guessing(
    problem: &SdpProblem,
    options: &SolveOptions,
) -> Result<MinEntropyCertificate, NpaError> {
    let sol = sdp::solve(problem, options);
    match sol.status {
        SolveStatus::Optimal | SolveStatus::Inaccurate => {}
        other => {
            return Err(NpaError::Solver(format!(
                "status {other:?} after {} iterations: {}",
                sol.iterations,
                sol.message.unwrap_or_else(|| "no diagnostic".into())
            )));
        }
    }
    let report = sdp::verify(problem, &sol);
    if !report.passes(VERIFY_TOL) {
        return Err(NpaError::Solver(format!(
            "independent verification failed: min eigenvalue {:.3e}, constraint excess {:.3e}",
            report.min_eigenvalue, report.max_constraint_violation
        )));
    }
    let g = sol.objective_value.clamp(f64::MIN_POSITIVE, 1.0);
    Ok(MinEntropyCertificate {
        guessing_probability: g,
        min_entropy: (-g.log2()).max(0.0),
        status: sol.status,
        iterations: sol.iterations,
        duality_gap: sol.duality_gap,
        constraint_excess: report.max_constraint_violation,
        min_block_eigenvalue: report.min_eigenvalue,
    })
}

/// Certified min-entropy of Bob's outcome pair in the `(y1, y2)` branch of
/// an observed behavior: build the relaxation, solve, verify, report bits.
pub fn table_min_entropy(
    table: &CorrelationTable,
    y1: u8,
    y2: u8,
    mode: GuessingConstraintMode,
    options: &SolveOptions,
) -> Result<MinEntropyCertificate, NpaError> {
    let (problem, _) = build_guessing_problem(table, y1, y2, mode)?;
    certify_guessing(&problem, options)
}

/// Convenience pipeline: simulate the protocol at `params`, build the
/// guessing relaxation for the kept branch, solve, verify, and report.
pub fn protocol_min_entropy(
    params: &ProtocolParams,
    mode: GuessingConstraintMode,
    options: &SolveOptions,
) -> Result<MinEntropyCertificate, NpaError> {
    let table = protocol::correlations_kraus(params)?;
    table_min_entropy(&table, 0, 1, mode, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol;
    use std::f64::consts::{FRAC_PI_8, SQRT_2};

    #[test]
    fn canonical_forms_respect_the_algebra() {
        use Letter::*;
        // Idempotence collapses repeats to a single projector.
        assert_eq!(Word::from_letters(&[A0, A0]).letters(), vec![A0]);
        assert_eq!(Word::from_letters(&[B01, B01, B01]).letters(), vec![B01]);
        assert_eq!(
            Word::from_letters(&[A0, A0, B0, B0]).letters(),
            vec![A0, B0]
        );
        // Non-commuting pairs keep their order.
        assert_eq!(Word::from_letters(&[A1, A0]).letters(), vec![A1, A0]);
        assert_eq!(Word::from_letters(&[B1, B0]).letters(), vec![B1, B0]);
        assert_eq!(Word::from_letters(&[B01, B00]).letters(), vec![B01, B00]);
        // The weak first-round projector slides through the second round.
        assert_eq!(Word::from_letters(&[B00, B0]).letters(), vec![B0, B00]);
        assert_eq!(Word::from_letters(&[B00, B0, B01]).letters(), vec![B0, B00, B01]);
        // ... enabling collapse at a distance.
        assert_eq!(Word::from_letters(&[B0, B00, B0]).letters(), vec![B0, B00]);
        // Cross-party letters always reorder.
        assert_eq!(
            Word::from_letters(&[B0, A0]),
            Word::from_letters(&[A0, B0])
        );
        // B1 does not commute with the second round.
        assert_eq!(Word::from_letters(&[B00, B1]).letters(), vec![B00, B1]);
    }

    #[test]
    fn reversal_is_an_involution_and_fixes_projector_words() {
        use Letter::*;
        let w = Word::from_letters(&[A0, B0, B01]);
        assert_eq!(w.reversed(), w, "B0·B01 commute, so the word is self-adjoint");
        let v = Word::from_letters(&[A0, A1]);
        assert_eq!(v.reversed().letters(), vec![A1, A0]);
        assert_eq!(v.reversed().reversed(), v);
    }

    #[test]
    fn sequential_basis_has_21_distinct_words() {
        let basis = sequential_basis();
        assert_eq!(basis.len(), 21);
        assert!(basis[0].is_identity());
        for i in 0..basis.len() {
            for j in (i + 1)..basis.len() {
                assert_ne!(basis[i], basis[j], "duplicate basis words at {i}, {j}");
            }
        }
    }

    #[test]
    fn chsh_basis_sizes_and_level_validation() {
        assert_eq!(chsh_basis(1).unwrap().len(), 5);
        assert_eq!(chsh_basis(2).unwrap().len(), 13);
        assert!(matches!(chsh_basis(3), Err(NpaError::BadLevel(3))));
    }

    #[test]
    fn outcome_expansion_matches_inclusion_exclusion() {
        use Letter::*;
        // ⟨Π⁺_B0 (1 - Π⁺_B01)⟩ = ⟨B0⟩ - ⟨B0 B01⟩.
        let words =
            expand_outcome_projectors(&[(Word::letter(B0), 1), (Word::letter(B01), -1)]);
        assert_eq!(words.get(&Word::letter(B0)), Some(&1.0));
        assert_eq!(
            words.get(&Word::from_letters(&[B0, B01])),
            Some(&-1.0)
        );
        assert_eq!(words.len(), 2);
        // Mean of a single observable: 2⟨Π⁺⟩ - 1.
        let mean = expand_observable_product(&[Word::letter(A0)]);
        assert_eq!(mean.get(&Word::identity()), Some(&-1.0));
        assert_eq!(mean.get(&Word::letter(A0)), Some(&2.0));
        // Two-point correlator: 4⟨ab⟩ - 2⟨a⟩ - 2⟨b⟩ + 1.
        let corr = expand_observable_product(&[Word::letter(A0), Word::letter(B0)]);
        assert_eq!(corr.get(&Word::from_letters(&[A0, B0])), Some(&4.0));
        assert_eq!(corr.get(&Word::letter(A0)), Some(&-2.0));
        assert_eq!(corr.get(&Word::letter(B0)), Some(&-2.0));
        assert_eq!(corr.get(&Word::identity()), Some(&1.0));
    }

    #[test]
    fn layout_places_shared_moments_in_one_cell() {
        let layout = MomentLayout::new(sequential_basis());
        assert_eq!(layout.dim, 42);
        assert_eq!(layout.real_cell(&Word::identity()), Some((0, 0)));
        // ⟨B0·B01⟩ appears both as a first-row entry and as a product of
        // generator columns; the class must resolve to a single anchor.
        let w = Word::from_letters(&[Letter::B0, Letter::B01]);
        let direct = layout.real_cell(&w).unwrap();
        assert!(direct.0 <= direct.1);
        // Words outside the span of the basis products are absent.
        let missing = Word::from_letters(&[Letter::B1, Letter::B00, Letter::B1, Letter::B01]);
        assert_eq!(layout.real_cell(&missing), None);
    }

    #[test]
    fn unsupported_guessing_targets_are_rejected() {
        let table = protocol::correlations_kraus(&ProtocolParams::ideal(FRAC_PI_8)).unwrap();
        for (y1, y2) in [(1u8, 0u8), (0, 0), (1, 1)] {
            assert!(matches!(
                build_guessing_problem(&table, y1, y2, GuessingConstraintMode::default()),
                Err(NpaError::UnsupportedTarget(_, _))
            ));
        }
    }

    #[test]
    fn chsh_super_quantum_scores_are_rejected() {
        assert!(matches!(
            build_chsh_guessing_problem(2.9, 2),
            Err(NpaError::SuperQuantum(_))
        ));
        assert!(build_chsh_guessing_problem(2.0 * SQRT_2, 2).is_ok());
    }

    #[test]
    fn chsh_guessing_at_the_quantum_boundary_is_a_coin_flip() {
        let (problem, _) = build_chsh_guessing_problem(2.0 * SQRT_2, 2).unwrap();
        let cert = certify_guessing(&problem, &SolveOptions::default()).unwrap();
        assert!(
            (cert.guessing_probability - 0.5).abs() < 1e-4,
            "G = {}",
            cert.guessing_probability
        );
        assert!((cert.min_entropy - 1.0).abs() < 3e-4);
    }

    #[test]
    fn chsh_guessing_relaxes_monotonically_with_level() {
        let g_at = |level: usize| {
            let (problem, _) = build_chsh_guessing_problem(2.6, level).unwrap();
            certify_guessing(&problem, &SolveOptions::default()).unwrap().guessing_probability
        };
        let g1 = g_at(1);
        let g2 = g_at(2);
        assert!(g1 >= g2 - 1e-7, "level 1 ({g1}) must be at least level 2 ({g2})");
        assert!(g2 > 0.5 && g2 < 1.0);
    }

    #[test]
    fn fully_depolarized_devices_certify_nothing() {
        let params = ProtocolParams::new(FRAC_PI_8, 1.0, 0.0).unwrap();
        let cert = protocol_min_entropy(
            &params,
            GuessingConstraintMode::default(),
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(
            cert.guessing_probability > 1.0 - 1e-4,
            "G = {} should be ~1 for uniform noise",
            cert.guessing_probability
        );
        assert!(cert.min_entropy < 2e-4);
    }

    #[test]
    fn ideal_protocol_certifies_nearly_two_bits() {
        let cert = protocol_min_entropy(
            &ProtocolParams::ideal(FRAC_PI_8),
            GuessingConstraintMode::default(),
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(
            cert.guessing_probability < 0.2505,
            "G = {}",
            cert.guessing_probability
        );
        assert!(cert.min_entropy > 1.99, "H = {}", cert.min_entropy);
        assert!(cert.constraint_excess <= VERIFY_TOL);
        assert!(cert.min_block_eigenvalue >= -VERIFY_TOL);
    }
}
