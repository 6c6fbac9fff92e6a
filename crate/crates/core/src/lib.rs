//! Sequential CHSH randomness: simulation, Bell functionals, and
//! device-independent min-entropy certification.
//!
//! A source party (Alice) and a pair of sequential measuring parties
//! (Bob measuring first with a weak interaction, then again projectively)
//! produce a behavior p(a, b1, b2 | x, y1, y2). This crate
//!
//! * simulates that protocol exactly, both through Kraus operators and
//!   through a unitary dilation with an ancilla ([`protocol`]),
//! * validates behaviors against no-signaling and sequentiality and
//!   reduces them to correlator summaries ([`scenario`]),
//! * evaluates the CHSH-like functionals, their Tsirelson-type boundary,
//!   and sum-of-squares / state-characterization residuals ([`bell`]),
//! * bounds an eavesdropper's guessing probability for the pair of
//!   sequential Bob outcomes with a moment-matrix (NPA-style) semidefinite
//!   relaxation ([`npa`]),
//! * and solves the resulting semidefinite programs with a self-contained
//!   primal-dual interior-point method ([`sdp`]).

pub mod bell;
pub(crate) mod linalg;
pub mod npa;
pub mod protocol;
pub mod qsim;
pub mod scenario;
pub mod sdp;
