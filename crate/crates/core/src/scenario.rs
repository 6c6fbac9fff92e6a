//! The sequential two-party measurement scenario and its behaviors.
//!
//! Alice measures with setting x and outcome a; on the other wing Bob
//! measures twice in succession, first with setting y1 and outcome b1,
//! then with setting y2 and outcome b2. A behavior is the full table
//! p(a, b1, b2 | x, y1, y2) over binary settings and ±1 outcomes:
//! 8 contexts times 8 outcome triples, 64 entries.
//!
//! Physical behaviors satisfy two families of marginal constraints:
//!
//! * no-signaling between the wings: Alice's marginal cannot depend on
//!   (y1, y2), and the joint Bob marginal cannot depend on x;
//! * sequentiality: the (a, b1) marginal cannot depend on y2, because y2 is
//!   chosen after b1 is produced.
//!
//! Validators return structured reports with the worst-violating context so
//! callers can print diagnostics, not just a pass/fail bit.

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Entry bound and per-context normalization tolerance for raw tables.
pub const TABLE_TOL: f64 = 1e-12;
/// Physicality tolerance required of a behavior before it is summarized.
pub const SUMMARY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("probability out of range at {key}: {value}")]
    OutOfRange { key: String, value: f64 },
    #[error("context {context} sums to {sum}, expected 1")]
    NotNormalized { context: String, sum: f64 },
    #[error("behavior is not physical: {0}")]
    NotPhysical(String),
    #[error("bad table key {0:?} (expected \"x,y1,y2,a,b1,b2\")")]
    BadKey(String),
    #[error("table has {0} entries, expected 64")]
    WrongEntryCount(usize),
    #[error("duplicate table key {0:?}")]
    DuplicateKey(String),
}

/// Index of one probability inside the 64-entry table.
///
/// Settings are bits; outcomes are signs with +1 first, so the layout is
/// context-major: ((x·2 + y1)·2 + y2)·8 + outcome triple.
fn slot(x: usize, y1: usize, y2: usize, a: i8, b1: i8, b2: i8) -> usize {
    debug_assert!(x < 2 && y1 < 2 && y2 < 2);
    let bit = |o: i8| -> usize {
        match o {
            1 => 0,
            -1 => 1,
            _ => panic!("outcome must be ±1, got {o}"),
        }
    };
    (((x * 2 + y1) * 2 + y2) * 2 + bit(a)) * 4 + bit(b1) * 2 + bit(b2)
}

const OUTCOMES: [i8; 2] = [1, -1];

/// Full behavior p(a, b1, b2 | x, y1, y2) over the 8 measurement contexts.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    p: [f64; 64],
}

impl CorrelationTable {
    /// Validates entry ranges and per-context normalization (to 1e-12).
    /// No-signaling and sequentiality are deliberately *not* enforced here,
    /// so that defective experimental tables can still be loaded and then
    /// diagnosed with the validators.
    pub fn new(p: [f64; 64]) -> Result<Self, ScenarioError> {
        for x in 0..2 {
            for y1 in 0..2 {
                for y2 in 0..2 {
                    let mut sum = 0.0;
                    for a in OUTCOMES {
                        for b1 in OUTCOMES {
                            for b2 in OUTCOMES {
                                let v = p[slot(x, y1, y2, a, b1, b2)];
                                if !(-TABLE_TOL..=1.0 + TABLE_TOL).contains(&v) {
                                    return Err(ScenarioError::OutOfRange {
                                        key: key_string(x, y1, y2, a, b1, b2),
                                        value: v,
                                    });
                                }
                                sum += v;
                            }
                        }
                    }
                    if (sum - 1.0).abs() > TABLE_TOL {
                        return Err(ScenarioError::NotNormalized {
                            context: format!("x={x} y1={y1} y2={y2}"),
                            sum,
                        });
                    }
                }
            }
        }
        Ok(Self { p })
    }

    /// Builds a table by evaluating `f` on every (x, y1, y2, a, b1, b2).
    pub fn from_fn(
        f: impl Fn(usize, usize, usize, i8, i8, i8) -> f64,
    ) -> Result<Self, ScenarioError> {
        let mut p = [0.0; 64];
        for x in 0..2 {
            for y1 in 0..2 {
                for y2 in 0..2 {
                    for a in OUTCOMES {
                        for b1 in OUTCOMES {
                            for b2 in OUTCOMES {
                                p[slot(x, y1, y2, a, b1, b2)] = f(x, y1, y2, a, b1, b2);
                            }
                        }
                    }
                }
            }
        }
        Self::new(p)
    }

    pub fn prob(&self, x: usize, y1: usize, y2: usize, a: i8, b1: i8, b2: i8) -> f64 {
        self.p[slot(x, y1, y2, a, b1, b2)]
    }

    /// Marginal p(a, b1 | x, y1, y2) summed over b2.
    pub fn marginal_ab1(&self, x: usize, y1: usize, y2: usize, a: i8, b1: i8) -> f64 {
        OUTCOMES.iter().map(|&b2| self.prob(x, y1, y2, a, b1, b2)).sum()
    }

    /// Checks that neither wing's marginal depends on the other's settings.
    pub fn validate_no_signaling(&self) -> NoSignalingReport {
        // Bob-side marginal p(b1, b2 | y1, y2) must not depend on x.
        let mut alice_to_bob = MarginalViolation::none();
        for y1 in 0..2 {
            for y2 in 0..2 {
                for b1 in OUTCOMES {
                    for b2 in OUTCOMES {
                        let m = |x: usize| -> f64 {
                            OUTCOMES.iter().map(|&a| self.prob(x, y1, y2, a, b1, b2)).sum()
                        };
                        let gap = (m(0) - m(1)).abs();
                        alice_to_bob.update(
                            gap,
                            format!(
                                "p(b1={}, b2={} | y1={y1}, y2={y2}) differs across x",
                                sign_str(b1),
                                sign_str(b2)
                            ),
                        );
                    }
                }
            }
        }
        // Alice's marginal p(a | x) must not depend on (y1, y2).
        let mut bob_to_alice = MarginalViolation::none();
        for x in 0..2 {
            for a in OUTCOMES {
                let m = |y1: usize, y2: usize| -> f64 {
                    let mut s = 0.0;
                    for b1 in OUTCOMES {
                        for b2 in OUTCOMES {
                            s += self.prob(x, y1, y2, a, b1, b2);
                        }
                    }
                    s
                };
                let settings = [(0, 0), (0, 1), (1, 0), (1, 1)];
                for (i, &(y1, y2)) in settings.iter().enumerate() {
                    for &(z1, z2) in &settings[i + 1..] {
                        let gap = (m(y1, y2) - m(z1, z2)).abs();
                        bob_to_alice.update(
                            gap,
                            format!(
                                "p(a={} | x={x}) differs between (y1={y1},y2={y2}) and (y1={z1},y2={z2})",
                                sign_str(a)
                            ),
                        );
                    }
                }
            }
        }
        NoSignalingReport { alice_to_bob, bob_to_alice }
    }

    /// Checks that the (a, b1) marginal does not depend on the later
    /// setting y2.
    pub fn validate_sequentiality(&self) -> SequentialityReport {
        let mut worst = MarginalViolation::none();
        for x in 0..2 {
            for y1 in 0..2 {
                for a in OUTCOMES {
                    for b1 in OUTCOMES {
                        let gap = (self.marginal_ab1(x, y1, 0, a, b1)
                            - self.marginal_ab1(x, y1, 1, a, b1))
                        .abs();
                        worst.update(
                            gap,
                            format!(
                                "p(a={}, b1={} | x={x}, y1={y1}) differs across y2",
                                sign_str(a),
                                sign_str(b1)
                            ),
                        );
                    }
                }
            }
        }
        SequentialityReport { violation: worst }
    }

    /// Reduces the behavior to the 14 means that the Bell functionals and
    /// the moment relaxation consume. Requires physicality at 1e-9.
    ///
    /// Marginals that several contexts determine are averaged over those
    /// contexts; for an exactly physical table the average equals each.
    /// ⟨B(0,y2)⟩ and ⟨A·B(0,y2)⟩ use the y1 = 0 branch, the only one where
    /// the second measurement is resolved by setting.
    pub fn summarize(&self) -> Result<BehaviorSummary, ScenarioError> {
        let ns = self.validate_no_signaling();
        if !ns.passes(SUMMARY_TOL) {
            return Err(ScenarioError::NotPhysical(format!(
                "no-signaling violated by {:.3e} ({})",
                ns.max_violation(),
                ns.worst_description()
            )));
        }
        let seq = self.validate_sequentiality();
        if !seq.passes(SUMMARY_TOL) {
            return Err(ScenarioError::NotPhysical(format!(
                "sequentiality violated by {:.3e} ({})",
                seq.violation.magnitude, seq.violation.context
            )));
        }

        let mut a = [0.0f64; 2];
        for x in 0..2 {
            let mut acc = 0.0;
            for y1 in 0..2 {
                for y2 in 0..2 {
                    for aa in OUTCOMES {
                        for b1 in OUTCOMES {
                            for b2 in OUTCOMES {
                                acc += f64::from(aa) * self.prob(x, y1, y2, aa, b1, b2);
                            }
                        }
                    }
                }
            }
            a[x] = acc / 4.0;
        }

        let mut b1_mean = [0.0f64; 2];
        for y1 in 0..2 {
            let mut acc = 0.0;
            for x in 0..2 {
                for y2 in 0..2 {
                    for aa in OUTCOMES {
                        for b1 in OUTCOMES {
                            for b2 in OUTCOMES {
                                acc += f64::from(b1) * self.prob(x, y1, y2, aa, b1, b2);
                            }
                        }
                    }
                }
            }
            b1_mean[y1] = acc / 4.0;
        }

        let mut b2_mean = [0.0f64; 2];
        for y2 in 0..2 {
            let mut acc = 0.0;
            for x in 0..2 {
                for aa in OUTCOMES {
                    for b1 in OUTCOMES {
                        for b2 in OUTCOMES {
                            acc += f64::from(b2) * self.prob(x, 0, y2, aa, b1, b2);
                        }
                    }
                }
            }
            b2_mean[y2] = acc / 2.0;
        }

        let mut ab1 = [[0.0f64; 2]; 2];
        for x in 0..2 {
            for y1 in 0..2 {
                let mut acc = 0.0;
                for y2 in 0..2 {
                    for aa in OUTCOMES {
                        for b1 in OUTCOMES {
                            for b2 in OUTCOMES {
                                acc += f64::from(aa) * f64::from(b1)
                                    * self.prob(x, y1, y2, aa, b1, b2);
                            }
                        }
                    }
                }
                ab1[x][y1] = acc / 2.0;
            }
        }

        let mut ab2 = [[0.0f64; 2]; 2];
        for x in 0..2 {
            for y2 in 0..2 {
                let mut acc = 0.0;
                for aa in OUTCOMES {
                    for b1 in OUTCOMES {
                        for b2 in OUTCOMES {
                            acc += f64::from(aa) * f64::from(b2) * self.prob(x, 0, y2, aa, b1, b2);
                        }
                    }
                }
                ab2[x][y2] = acc;
            }
        }

        Ok(BehaviorSummary { a, b1: b1_mean, b2: b2_mean, ab1, ab2 })
    }
}

fn sign_str(o: i8) -> &'static str {
    if o == 1 {
        "+"
    } else {
        "-"
    }
}

fn key_string(x: usize, y1: usize, y2: usize, a: i8, b1: i8, b2: i8) -> String {
    format!("{x},{y1},{y2},{},{},{}", sign_str(a), sign_str(b1), sign_str(b2))
}

fn parse_key(key: &str) -> Result<(usize, usize, usize, i8, i8, i8), ScenarioError> {
    let bad = || ScenarioError::BadKey(key.to_string());
    let parts: Vec<&str> = key.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return Err(bad());
    }
    let setting = |s: &str| -> Result<usize, ScenarioError> {
        match s {
            "0" => Ok(0),
            "1" => Ok(1),
            _ => Err(bad()),
        }
    };
    // "−" (U+2212) is accepted alongside ASCII "-" because typeset sources
    // often use the former.
    let outcome = |s: &str| -> Result<i8, ScenarioError> {
        match s {
            "+" => Ok(1),
            "-" | "\u{2212}" => Ok(-1),
            _ => Err(bad()),
        }
    };
    Ok((
        setting(parts[0])?,
        setting(parts[1])?,
        setting(parts[2])?,
        outcome(parts[3])?,
        outcome(parts[4])?,
        outcome(parts[5])?,
    ))
}

/// Magnitude and location of the worst violation of one marginal-equality
/// family.
#[derive(Debug, Clone, Serialize)]
pub struct MarginalViolation {
    pub magnitude: f64,
    /// Human-readable description of the worst-violating marginal.
    pub context: String,
}

impl MarginalViolation {
    fn none() -> Self {
        Self { magnitude: 0.0, context: String::new() }
    }

    fn update(&mut self, gap: f64, context: String) {
        if gap > self.magnitude {
            self.magnitude = gap;
            self.context = context;
        }
    }
}

/// Worst violations of the two no-signaling marginal families.
#[derive(Debug, Clone, Serialize)]
pub struct NoSignalingReport {
    /// Bob-side marginal depending on x.
    pub alice_to_bob: MarginalViolation,
    /// Alice-side marginal depending on (y1, y2).
    pub bob_to_alice: MarginalViolation,
}

impl NoSignalingReport {
    pub fn max_violation(&self) -> f64 {
        self.alice_to_bob.magnitude.max(self.bob_to_alice.magnitude)
    }

    pub fn worst_description(&self) -> &str {
        if self.alice_to_bob.magnitude >= self.bob_to_alice.magnitude {
            &self.alice_to_bob.context
        } else {
            &self.bob_to_alice.context
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

/// Worst violation of the y2-independence of the (a, b1) marginal.
#[derive(Debug, Clone, Serialize)]
pub struct SequentialityReport {
    pub violation: MarginalViolation,
}

impl SequentialityReport {
    pub fn max_violation(&self) -> f64 {
        self.violation.magnitude
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.violation.magnitude <= tol
    }
}

/// The 14 means of a physical behavior: single-party means, first-round and
/// second-round correlators.
///
/// `b2` and `ab2` refer to the second measurement in the y1 = 0 branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSummary {
    /// ⟨A_x⟩ for x = 0, 1.
    pub a: [f64; 2],
    /// ⟨B(y1)⟩ for y1 = 0, 1.
    pub b1: [f64; 2],
    /// ⟨B(0, y2)⟩ for y2 = 0, 1.
    pub b2: [f64; 2],
    /// ⟨A_x B(y1)⟩ indexed [x][y1].
    pub ab1: [[f64; 2]; 2],
    /// ⟨A_x B(0, y2)⟩ indexed [x][y2].
    pub ab2: [[f64; 2]; 2],
}

// ── JSON form ─────────────────────────────────────────────────────────────
//
// A table serializes as {"p": {"x,y1,y2,a,b1,b2": value, ...}} with exactly
// 64 keys; outcomes are "+" and "-".

impl Serialize for CorrelationTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = BTreeMap::new();
        for x in 0..2 {
            for y1 in 0..2 {
                for y2 in 0..2 {
                    for a in OUTCOMES {
                        for b1 in OUTCOMES {
                            for b2 in OUTCOMES {
                                map.insert(
                                    key_string(x, y1, y2, a, b1, b2),
                                    self.prob(x, y1, y2, a, b1, b2),
                                );
                            }
                        }
                    }
                }
            }
        }
        #[derive(Serialize)]
        struct TableJson {
            p: BTreeMap<String, f64>,
        }
        TableJson { p: map }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CorrelationTable {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct TableJson {
            p: Vec<(String, f64)>,
        }
        // serde_json maps arrive as maps; accept duplicates detection by
        // deserializing into a sequence of pairs first.
        struct PairsVisitor;
        impl<'de> serde::de::Visitor<'de> for PairsVisitor {
            type Value = Vec<(String, f64)>;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a map of table keys to probabilities")
            }
            fn visit_map<M: serde::de::MapAccess<'de>>(
                self,
                mut access: M,
            ) -> Result<Self::Value, M::Error> {
                let mut out = Vec::with_capacity(64);
                while let Some((k, v)) = access.next_entry::<String, f64>()? {
                    out.push((k, v));
                }
                Ok(out)
            }
        }
        struct OuterVisitor;
        impl<'de> serde::de::Visitor<'de> for OuterVisitor {
            type Value = TableJson;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("an object with a \"p\" field")
            }
            fn visit_map<M: serde::de::MapAccess<'de>>(
                self,
                mut access: M,
            ) -> Result<Self::Value, M::Error> {
                let mut pairs = None;
                while let Some(k) = access.next_key::<String>()? {
                    if k == "p" {
                        pairs = Some(access.next_value_seed(MapSeed)?);
                    } else {
                        let _: serde::de::IgnoredAny = access.next_value()?;
                    }
                }
                pairs
                    .map(|p| TableJson { p })
                    .ok_or_else(|| M::Error::missing_field("p"))
            }
        }
        struct MapSeed;
        impl<'de> serde::de::DeserializeSeed<'de> for MapSeed {
            type Value = Vec<(String, f64)>;
            fn deserialize<D2: Deserializer<'de>>(
                self,
                deserializer: D2,
            ) -> Result<Self::Value, D2::Error> {
                deserializer.deserialize_map(PairsVisitor)
            }
        }

        let json = deserializer.deserialize_map(OuterVisitor)?;
        if json.p.len() != 64 {
            return Err(D::Error::custom(ScenarioError::WrongEntryCount(json.p.len())));
        }
        let mut p = [f64::NAN; 64];
        let mut seen = [false; 64];
        for (key, value) in &json.p {
            let (x, y1, y2, a, b1, b2) = parse_key(key).map_err(D::Error::custom)?;
            let idx = slot(x, y1, y2, a, b1, b2);
            if seen[idx] {
                return Err(D::Error::custom(ScenarioError::DuplicateKey(key.clone())));
            }
            seen[idx] = true;
            p[idx] = *value;
        }
        CorrelationTable::new(p).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform() -> CorrelationTable {
        CorrelationTable::from_fn(|_, _, _, _, _, _| 1.0 / 8.0).unwrap()
    }

    /// A local deterministic sequential strategy: a = f(x), b1 = g(y1),
    /// b2 = h(y1, y2). Exactly no-signaling and sequential.
    fn deterministic(
        f: impl Fn(usize) -> i8,
        g: impl Fn(usize) -> i8,
        h: impl Fn(usize, usize) -> i8,
    ) -> CorrelationTable {
        CorrelationTable::from_fn(|x, y1, y2, a, b1, b2| {
            if a == f(x) && b1 == g(y1) && b2 == h(y1, y2) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn uniform_table_is_physical_with_zero_means() {
        let t = uniform();
        assert!(t.validate_no_signaling().passes(1e-15));
        assert!(t.validate_sequentiality().passes(1e-15));
        let s = t.summarize().unwrap();
        for v in [s.a[0], s.a[1], s.b1[0], s.b1[1], s.b2[0], s.b2[1]] {
            assert!(v.abs() < 1e-15);
        }
        for row in s.ab1.iter().chain(s.ab2.iter()) {
            for v in row {
                assert!(v.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn normalization_is_enforced() {
        let mut p = [1.0 / 8.0; 64];
        p[0] += 1e-6;
        match CorrelationTable::new(p) {
            Err(ScenarioError::NotNormalized { sum, .. }) => {
                assert!((sum - 1.0 - 1e-6).abs() < 1e-12)
            }
            other => panic!("expected NotNormalized, got {other:?}"),
        }
    }

    #[test]
    fn negative_entries_are_rejected() {
        let mut p = [1.0 / 8.0; 64];
        p[3] -= 0.25; // makes entry negative while breaking normalization too
        p[4] += 0.25;
        assert!(matches!(CorrelationTable::new(p), Err(ScenarioError::OutOfRange { .. })));
    }

    #[test]
    fn signaling_from_alice_is_detected() {
        // b1 copies x: maximal one-way signaling, magnitude 1.
        let t = CorrelationTable::from_fn(|x, _, _, _a, b1, _b2| {
            let expect = if x == 0 { 1 } else { -1 };
            if b1 == expect {
                0.25
            } else {
                0.0
            }
        })
        .unwrap();
        let report = t.validate_no_signaling();
        assert!((report.alice_to_bob.magnitude - 0.5).abs() < 1e-15);
        assert!(!report.passes(1e-9));
        assert!(report.bob_to_alice.magnitude < 1e-15);
        assert!(t.summarize().is_err());
    }

    #[test]
    fn sequentiality_violation_is_detected() {
        // b1 copies the later setting y2; no-signaling across wings holds.
        let t = CorrelationTable::from_fn(|_x, _y1, y2, _a, b1, _b2| {
            let expect = if y2 == 0 { 1 } else { -1 };
            if b1 == expect {
                0.25
            } else {
                0.0
            }
        })
        .unwrap();
        assert!(t.validate_no_signaling().passes(1e-15));
        // p(a, b1 | x, y1) shifts by 1/2 between y2 = 0 and y2 = 1.
        let report = t.validate_sequentiality();
        assert!((report.max_violation() - 0.5).abs() < 1e-15);
        assert!(t.summarize().is_err());
    }

    #[test]
    fn deterministic_strategy_means() {
        // a = +, b1 = +, b2 = - regardless of settings.
        let t = deterministic(|_| 1, |_| 1, |_, _| -1);
        let s = t.summarize().unwrap();
        assert_eq!(s.a, [1.0, 1.0]);
        assert_eq!(s.b1, [1.0, 1.0]);
        assert_eq!(s.b2, [-1.0, -1.0]);
        assert_eq!(s.ab1, [[1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(s.ab2, [[-1.0, -1.0], [-1.0, -1.0]]);
    }

    #[test]
    fn b2_settings_reach_only_the_first_branch_summary() {
        // b2 = + exactly when y2 = 0 (legal: b2 may depend on y2).
        let t = deterministic(|_| 1, |_| 1, |_, y2| if y2 == 0 { 1 } else { -1 });
        assert!(t.validate_sequentiality().passes(1e-15));
        let s = t.summarize().unwrap();
        assert_eq!(s.b2, [1.0, -1.0]);
        assert_eq!(s.ab2, [[1.0, -1.0], [1.0, -1.0]]);
    }

    #[test]
    fn json_round_trip_preserves_the_table() {
        let t = deterministic(|x| if x == 0 { 1 } else { -1 }, |_| -1, |y1, _| {
            if y1 == 0 {
                1
            } else {
                -1
            }
        });
        let js = serde_json::to_string_pretty(&t).unwrap();
        assert!(js.contains("\"p\""));
        assert!(js.contains("0,0,0,+,+,+"));
        let back: CorrelationTable = serde_json::from_str(&js).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn json_accepts_typographic_minus() {
        let t = uniform();
        let js = serde_json::to_string(&t).unwrap();
        let fancy = js.replace('-', "\u{2212}");
        let back: CorrelationTable = serde_json::from_str(&fancy).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn json_rejects_missing_and_malformed_entries() {
        let t = uniform();
        let v: serde_json::Value = serde_json::to_value(&t).unwrap();
        // Remove one key.
        let mut missing = v.clone();
        missing["p"].as_object_mut().unwrap().remove("0,0,0,+,+,+");
        assert!(serde_json::from_value::<CorrelationTable>(missing).is_err());
        // Corrupt one key.
        let mut bad = v.clone();
        let obj = bad["p"].as_object_mut().unwrap();
        let val = obj.remove("0,0,0,+,+,+").unwrap();
        obj.insert("0,0,2,+,+,+".into(), val);
        assert!(serde_json::from_value::<CorrelationTable>(bad).is_err());
        // Missing wrapper.
        assert!(serde_json::from_str::<CorrelationTable>("{}").is_err());
    }

    #[test]
    fn relabeling_b1_flips_exactly_its_means() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            // Random mixture of deterministic sequential strategies.
            let mut p = [0.0f64; 64];
            let k = rng.gen_range(2..6);
            let mut weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
            let wsum: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= wsum;
            }
            for &w in &weights {
                let fa: [i8; 2] = [rng.gen_range(0..2) * 2 - 1, rng.gen_range(0..2) * 2 - 1];
                let gb: [i8; 2] = [rng.gen_range(0..2) * 2 - 1, rng.gen_range(0..2) * 2 - 1];
                let hb: [[i8; 2]; 2] = [
                    [rng.gen_range(0..2) * 2 - 1, rng.gen_range(0..2) * 2 - 1],
                    [rng.gen_range(0..2) * 2 - 1, rng.gen_range(0..2) * 2 - 1],
                ];
                for x in 0..2usize {
                    for y1 in 0..2usize {
                        for y2 in 0..2usize {
                            p[slot(x, y1, y2, fa[x], gb[y1], hb[y1][y2])] += w;
                        }
                    }
                }
            }
            let t = CorrelationTable::new(p).unwrap();
            let flipped = CorrelationTable::from_fn(|x, y1, y2, a, b1, b2| {
                t.prob(x, y1, y2, a, -b1, b2)
            })
            .unwrap();
            let s = t.summarize().unwrap();
            let f = flipped.summarize().unwrap();
            for x in 0..2 {
                assert!((s.a[x] - f.a[x]).abs() < 1e-12);
                for y in 0..2 {
                    assert!((s.ab1[x][y] + f.ab1[x][y]).abs() < 1e-12);
                    assert!((s.ab2[x][y] - f.ab2[x][y]).abs() < 1e-12);
                }
            }
            for y in 0..2 {
                assert!((s.b1[y] + f.b1[y]).abs() < 1e-12);
                assert!((s.b2[y] - f.b2[y]).abs() < 1e-12);
            }
        }
    }
}
