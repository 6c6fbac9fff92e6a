//! Reduction of a declarative block problem to an explicit LMI.
//!
//! Every upper-triangular entry of every block starts as a potential scalar
//! variable. Equalities are imposed exactly and shrink that set:
//!
//! * single-entry equalities pin an entry to a constant,
//! * two-entry equalities of the form `u ± v = 0` identify entries through a
//!   signed union-find (sign conflicts force both to zero, value conflicts
//!   prove infeasibility),
//! * anything wider is eliminated by Gaussian substitution on the surviving
//!   variables.
//!
//! Inequalities become scalar slack blocks, relaxed by their own
//! tolerance (an equality's tolerance instead widens verification). The result
//! is `max c·z` over `F0_j + Σ_k z_k F_jk ⪰ 0` with every `F_jk` stored as a
//! sparse list of symmetric entry stamps. Blocks whose entries were fully
//! determined are checked positive semidefinite here and withheld from the
//! optimizer. All bookkeeping uses ordered maps so the reduction (and hence
//! the solve) is deterministic.

use std::collections::BTreeMap;

use super::{LinearExpr, Relation, SdpProblem};
use crate::linalg;

/// Affine form `constant + Σ coeff · z_var` over the surviving variables.
#[derive(Debug, Clone, Default)]
pub(crate) struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

/// One PSD block of the reduced LMI, with per-variable entry stamps.
/// `cells[k]` lists `(row, col, coeff)` with `row ≤ col`; a stamp means the
/// symmetric pair of matrix entries both carry `coeff · z`.
pub(crate) struct RBlock {
    pub dim: usize,
    pub f0: Vec<f64>,
    pub vars: Vec<usize>,
    pub cells: Vec<Vec<(u32, u32, f64)>>,
}

pub(crate) struct Reduced {
    pub nvars: usize,
    pub blocks: Vec<RBlock>,
    pub obj: Vec<f64>,
    pub obj_const: f64,
    pub maximize: bool,
    /// For each original block, the affine form of each upper cell
    /// (dense `row * dim + col` indexing; below-diagonal slots unused).
    cell_affine: Vec<Vec<Affine>>,
}

impl Reduced {
    /// Rebuilds the full symmetric blocks of the original problem from a
    /// solution vector of the reduced one.
    pub(crate) fn reconstruct_blocks(&self, problem: &SdpProblem, z: &[f64]) -> Vec<Vec<f64>> {
        problem
            .block_dims
            .iter()
            .enumerate()
            .map(|(b, &d)| {
                let mut m = vec![0.0; d * d];
                for i in 0..d {
                    for j in i..d {
                        let aff = &self.cell_affine[b][i * d + j];
                        let mut v = aff.constant;
                        for &(k, c) in &aff.terms {
                            v += c * z[k];
                        }
                        m[i * d + j] = v;
                        m[j * d + i] = v;
                    }
                }
                m
            })
            .collect()
    }
}

/// Union-find over block entries where members of a class agree up to sign,
/// and a class may be pinned to a constant.
struct SignedUf {
    parent: Vec<usize>,
    /// Sign of this entry relative to its parent (±1).
    sign: Vec<f64>,
    rank: Vec<u8>,
    /// Pinned value of the class, stored at roots.
    pin: Vec<Option<f64>>,
}

impl SignedUf {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), sign: vec![1.0; n], rank: vec![0; n], pin: vec![None; n] }
    }

    /// Root and the sign of `a` relative to it, with path compression.
    fn find(&mut self, a: usize) -> (usize, f64) {
        if self.parent[a] == a {
            return (a, 1.0);
        }
        let (root, s) = self.find(self.parent[a]);
        self.parent[a] = root;
        self.sign[a] *= s;
        (root, self.sign[a])
    }

    fn pin_root(&mut self, root: usize, value: f64) -> Result<(), String> {
        match self.pin[root] {
            None => {
                self.pin[root] = Some(value);
                Ok(())
            }
            Some(old) if (old - value).abs() <= 1e-9 * (1.0 + value.abs().max(old.abs())) => Ok(()),
            Some(old) => Err(format!(
                "infeasible: an entry is pinned to both {old} and {value} by exact equalities"
            )),
        }
    }

    /// Requires `value(a) = value`.
    fn pin(&mut self, a: usize, value: f64) -> Result<(), String> {
        let (root, s) = self.find(a);
        // s is ±1, so dividing by it equals multiplying.
        self.pin_root(root, value * s)
    }

    /// Requires `value(a) = rel · value(b)` with `rel` ±1.
    fn union(&mut self, a: usize, b: usize, rel: f64) -> Result<(), String> {
        let (ra, sa) = self.find(a);
        let (rb, sb) = self.find(b);
        if ra == rb {
            if (sa - rel * sb).abs() > 1e-12 {
                // x = -x within one class: the whole class is zero.
                return self.pin_root(ra, 0.0);
            }
            return Ok(());
        }
        // value(ra) = srel · value(rb).
        let srel = rel * sb * sa;
        let (child, parent, child_to_parent) = if self.rank[ra] < self.rank[rb] {
            (ra, rb, srel)
        } else {
            (rb, ra, srel)
        };
        if self.rank[ra] == self.rank[rb] {
            self.rank[parent] += 1;
        }
        self.parent[child] = parent;
        self.sign[child] = child_to_parent;
        if let Some(pc) = self.pin[child].take() {
            // value(child-root) = child_to_parent · value(parent-root).
            self.pin_root(parent, pc * child_to_parent)?;
        }
        Ok(())
    }
}

/// Combines an expression into `global cell -> coefficient`, exact zeros
/// dropped.
fn combine(
    expr: &LinearExpr,
    dims: &[usize],
    offsets: &[usize],
) -> BTreeMap<usize, f64> {
    let mut map = BTreeMap::new();
    for t in &expr.terms {
        let (i, j) = if t.row <= t.col { (t.row, t.col) } else { (t.col, t.row) };
        let g = offsets[t.block] + i * dims[t.block] + j;
        *map.entry(g).or_insert(0.0) += t.coeff;
    }
    map.retain(|_, v| *v != 0.0);
    map
}

fn substitute_var(aff: &mut Affine, var: usize, sub: &Affine) {
    let Some(pos) = aff.terms.iter().position(|&(k, _)| k == var) else {
        return;
    };
    let (_, w) = aff.terms.remove(pos);
    aff.constant += w * sub.constant;
    for &(k, c) in &sub.terms {
        match aff.terms.iter_mut().find(|(j, _)| *j == k) {
            Some((_, existing)) => *existing += w * c,
            None => aff.terms.push((k, w * c)),
        }
    }
    aff.terms.retain(|&(_, c)| c != 0.0);
    aff.terms.sort_by_key(|&(k, _)| k);
}

pub(crate) fn reduce(problem: &SdpProblem) -> Result<Reduced, String> {
    let dims = &problem.block_dims;
    let mut offsets = Vec::with_capacity(dims.len());
    let mut total = 0usize;
    for &d in dims {
        offsets.push(total);
        total += d * d;
    }

    let mut uf = SignedUf::new(total);
    let mut general_eqs: Vec<(BTreeMap<usize, f64>, f64)> = Vec::new();
    // (combined expr, bound, is_ge): is_ge means expr ≥ bound, else expr ≤ bound.
    let mut one_sided: Vec<(BTreeMap<usize, f64>, f64, bool)> = Vec::new();

    for (ci, c) in problem.constraints.iter().enumerate() {
        let map = combine(&c.expr, dims, &offsets);
        match c.relation {
            // Equalities are always imposed exactly; their tolerance widens
            // what post-hoc verification accepts, not what the solver may do.
            Relation::Eq => match map.len() {
                0 => {
                    if c.target.abs() > 1e-9 {
                        return Err(format!(
                            "infeasible: constraint {ci} reduces to 0 = {}",
                            c.target
                        ));
                    }
                }
                1 => {
                    let (&g, &co) = map.iter().next().unwrap();
                    uf.pin(g, c.target / co)?;
                }
                2 if c.target == 0.0 => {
                    let mut it = map.iter();
                    let (&g1, &c1) = it.next().unwrap();
                    let (&g2, &c2) = it.next().unwrap();
                    if ((c1.abs() - c2.abs()) / c1.abs().max(c2.abs())).abs() < 1e-12 {
                        // c1·u + c2·v = 0  ⇒  u = (-c2/c1)·v.
                        uf.union(g1, g2, -(c2 / c1).signum())?;
                    } else {
                        general_eqs.push((map, c.target));
                    }
                }
                _ => general_eqs.push((map, c.target)),
            },
            Relation::Le => one_sided.push((map, c.target + c.tolerance, false)),
            Relation::Ge => one_sided.push((map, c.target - c.tolerance, true)),
        }
    }

    // Variable ids for unpinned classes, in deterministic scan order.
    let mut var_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    for (b, &d) in dims.iter().enumerate() {
        for i in 0..d {
            for j in i..d {
                let g = offsets[b] + i * d + j;
                let (root, _) = uf.find(g);
                if uf.pin[root].is_none() && !var_of_root.contains_key(&root) {
                    let next = var_of_root.len();
                    var_of_root.insert(root, next);
                }
            }
        }
    }

    fn base_affine(uf: &mut SignedUf, var_of_root: &BTreeMap<usize, usize>, g: usize) -> Affine {
        let (root, s) = uf.find(g);
        match uf.pin[root] {
            Some(v) => Affine { terms: Vec::new(), constant: s * v },
            None => Affine { terms: vec![(var_of_root[&root], s)], constant: 0.0 },
        }
    }

    // Expands a combined expression into pre-substitution variable space.
    fn expand(
        uf: &mut SignedUf,
        var_of_root: &BTreeMap<usize, usize>,
        map: &BTreeMap<usize, f64>,
    ) -> Affine {
        let mut out = Affine::default();
        for (&g, &co) in map {
            let base = base_affine(uf, var_of_root, g);
            out.constant += co * base.constant;
            for &(k, s) in &base.terms {
                match out.terms.iter_mut().find(|(j, _)| *j == k) {
                    Some((_, existing)) => *existing += co * s,
                    None => out.terms.push((k, co * s)),
                }
            }
        }
        out.terms.retain(|&(_, c)| c != 0.0);
        out.terms.sort_by_key(|&(k, _)| k);
        out
    }

    // Gaussian elimination of the remaining exact equalities.
    let mut subs: BTreeMap<usize, Affine> = BTreeMap::new();
    for (map, target) in &general_eqs {
        let mut aff = expand(&mut uf, &var_of_root, map);
        aff.constant -= target;
        let eliminated: Vec<usize> = subs.keys().copied().collect();
        for v in eliminated {
            let sub = subs[&v].clone();
            substitute_var(&mut aff, v, &sub);
        }
        if aff.terms.is_empty() {
            if aff.constant.abs() > 1e-9 * (1.0 + target.abs()) {
                return Err(format!(
                    "infeasible: exact equalities are mutually inconsistent (residual {})",
                    aff.constant
                ));
            }
            continue;
        }
        let (pivot, pcoeff) = aff
            .terms
            .iter()
            .copied()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap().then(b.0.cmp(&a.0)))
            .unwrap();
        let sub = Affine {
            terms: aff
                .terms
                .iter()
                .filter(|&&(k, _)| k != pivot)
                .map(|&(k, c)| (k, -c / pcoeff))
                .collect(),
            constant: -aff.constant / pcoeff,
        };
        for existing in subs.values_mut() {
            substitute_var(existing, pivot, &sub);
        }
        subs.insert(pivot, sub);
    }

    // Compact surviving variable ids.
    let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
    for id in var_of_root.values() {
        if !subs.contains_key(id) {
            let next = remap.len();
            remap.insert(*id, next);
        }
    }
    let nvars = remap.len();

    let resolve_affine = |mut aff: Affine| -> Affine {
        let eliminated: Vec<usize> =
            aff.terms.iter().map(|&(k, _)| k).filter(|k| subs.contains_key(k)).collect();
        for v in eliminated {
            substitute_var(&mut aff, v, &subs[&v]);
        }
        for (k, _) in aff.terms.iter_mut() {
            *k = remap[k];
        }
        aff.terms.sort_by_key(|&(k, _)| k);
        aff
    };

    // Materialize the original blocks.
    let mut blocks = Vec::new();
    let mut cell_affine: Vec<Vec<Affine>> = Vec::new();
    for (b, &d) in dims.iter().enumerate() {
        let mut affs = vec![Affine::default(); d * d];
        let mut f0 = vec![0.0; d * d];
        let mut per_var: BTreeMap<usize, Vec<(u32, u32, f64)>> = BTreeMap::new();
        for i in 0..d {
            for j in i..d {
                let aff =
                    resolve_affine(base_affine(&mut uf, &var_of_root, offsets[b] + i * d + j));
                f0[i * d + j] = aff.constant;
                f0[j * d + i] = aff.constant;
                for &(k, co) in &aff.terms {
                    per_var.entry(k).or_default().push((i as u32, j as u32, co));
                }
                affs[i * d + j] = aff;
            }
        }
        cell_affine.push(affs);
        if per_var.is_empty() {
            if d > 0 {
                let scale = f0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let (w, _) = linalg::eigh(d, &f0);
                if w[0] < -1e-9 * (1.0 + scale) {
                    return Err(format!(
                        "infeasible: block {b} is fully determined with min eigenvalue {:.3e}",
                        w[0]
                    ));
                }
            }
            continue;
        }
        let (vars, cells) = per_var.into_iter().unzip();
        blocks.push(RBlock { dim: d, f0, vars, cells });
    }

    // Slack blocks for the one-sided constraints.
    for (map, bound, is_ge) in &one_sided {
        let aff = resolve_affine(expand(&mut uf, &var_of_root, map));
        let (constant, flip) = if *is_ge { (aff.constant - bound, 1.0) } else { (bound - aff.constant, -1.0) };
        if aff.terms.is_empty() {
            let scale = 1.0 + bound.abs();
            if constant < -1e-9 * scale {
                return Err(format!(
                    "infeasible: a constraint on fully determined entries misses its bound by {:.3e}",
                    -constant
                ));
            }
            continue;
        }
        let vars: Vec<usize> = aff.terms.iter().map(|&(k, _)| k).collect();
        let cells: Vec<Vec<(u32, u32, f64)>> =
            aff.terms.iter().map(|&(_, c)| vec![(0u32, 0u32, flip * c)]).collect();
        blocks.push(RBlock { dim: 1, f0: vec![constant], vars, cells });
    }

    // Objective.
    let combined_obj = combine(&problem.objective, dims, &offsets);
    let obj_aff = resolve_affine(expand(&mut uf, &var_of_root, &combined_obj));
    let mut obj = vec![0.0; nvars];
    for &(k, c) in &obj_aff.terms {
        obj[k] = c;
    }

    Ok(Reduced {
        nvars,
        blocks,
        obj,
        obj_const: obj_aff.constant,
        maximize: problem.maximize,
        cell_affine,
    })
}
