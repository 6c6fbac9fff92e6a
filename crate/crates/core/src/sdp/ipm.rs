//! Primal-dual interior-point method for the reduced LMI
//! `max c·z  s.t.  S_j(z) = F0_j + Σ_k z_k F_jk ⪰ 0`.
//!
//! The LMI is the dual of a standard-form SDP under `y = -z`, `b = -c`,
//! `C = F0`, `A_k = F_k`; both sides are iterated simultaneously with
//! Nesterov-Todd scaling (the geometric mean `W` of `X` and `S⁻¹`), a
//! predictor step to gauge the achievable centering reduction, and a
//! corrector with `σ = (μ_aff/μ)³`. Each iteration factors one Schur
//! complement `M_lk = Σ_j ⟨F_jl, W_j F_jk W_j⟩`, reused by both steps.
//!
//! Eigendecompositions come from the crate's Jacobi routine; there is no
//! randomness and no unordered iteration anywhere, so runs are bit-for-bit
//! reproducible. On non-convergence the final iterate is examined for
//! Farkas-type rays: a primal ray certifies that the LMI is infeasible, a
//! dual ray that the objective is unbounded.

use super::presolve::Reduced;
use super::{IterationStat, SolveOptions, SolveStatus};
use crate::linalg;

pub(crate) struct Outcome {
    pub status: SolveStatus,
    pub z: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub trace: Vec<IterationStat>,
    pub message: Option<String>,
}

/// Dense row-major product of symmetric-sized square matrices.
fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let row = &b[k * n..(k + 1) * n];
            let dst = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in dst.iter_mut().zip(row) {
                *o += aik * bv;
            }
        }
    }
    out
}

fn symmetrize(n: usize, a: &mut [f64]) {
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
}

fn maxabs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn frob_inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Q · diag(g(w)) · Qᵀ` from an eigendecomposition.
fn from_eig(n: usize, w: &[f64], q: &[f64], g: impl Fn(f64) -> f64) -> Vec<f64> {
    let gw: Vec<f64> = w.iter().map(|&x| g(x)).collect();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for k in 0..n {
                s += q[i * n + k] * gw[k] * q[j * n + k];
            }
            out[i * n + j] = s;
            out[j * n + i] = s;
        }
    }
    out
}

/// Lower-triangular Cholesky; `None` when the matrix is not positive
/// definite to working precision.
fn cholesky(n: usize, a: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L x = rhs` in place.
fn forward_solve(n: usize, l: &[f64], x: &mut [f64]) {
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * n + k] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
}

/// Solves `Lᵀ x = rhs` in place.
fn backward_solve(n: usize, l: &[f64], x: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
}

/// Largest step α such that `P + α·D ⪰ 0`, for `P ≻ 0`; capped at `cap`.
fn max_step(n: usize, p: &[f64], d: &[f64], cap: f64) -> f64 {
    // B = L⁻¹ D L⁻ᵀ has the same inertia profile as the pencil (D, P):
    // P + αD ⪰ 0 ⇔ I + αB ⪰ 0 ⇔ α ≤ -1/λ_min(B) when λ_min < 0.
    let mut l = None;
    let mut ridge = 0.0;
    let scale = maxabs(p).max(1e-300);
    for _ in 0..4 {
        let mut pr = p.to_vec();
        if ridge > 0.0 {
            for i in 0..n {
                pr[i * n + i] += ridge;
            }
        }
        if let Some(f) = cholesky(n, &pr) {
            l = Some(f);
            break;
        }
        ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 100.0 };
    }
    let Some(l) = l else {
        return 0.0;
    };
    // Y = L⁻¹ D, column by column of D.
    let mut y = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    for c in 0..n {
        for r in 0..n {
            col[r] = d[r * n + c];
        }
        forward_solve(n, &l, &mut col);
        for r in 0..n {
            y[r * n + c] = col[r];
        }
    }
    // B = Y L⁻ᵀ ⇒ Bᵀ = L⁻¹ Yᵀ, column by column of Yᵀ (= rows of Y).
    let mut b = vec![0.0; n * n];
    for r in 0..n {
        col.copy_from_slice(&y[r * n..(r + 1) * n]);
        forward_solve(n, &l, &mut col);
        for c in 0..n {
            b[c * n + r] = col[c];
        }
    }
    symmetrize(n, &mut b);
    let bscale = maxabs(&b);
    let (w, _) = linalg::eigh(n, &b);
    let lmin = w[0];
    if lmin >= -1e-13 * (1.0 + bscale) {
        cap
    } else {
        (-1.0 / lmin).min(cap)
    }
}

/// Applies the sparse symmetric stamps of one variable to a dense matrix:
/// `out += w · stamps`.
fn add_stamps(n: usize, out: &mut [f64], stamps: &[(u32, u32, f64)], weight: f64) {
    for &(i, j, v) in stamps {
        let (i, j) = (i as usize, j as usize);
        out[i * n + j] += weight * v;
        if i != j {
            out[j * n + i] += weight * v;
        }
    }
}

/// `⟨A, M⟩` where `A` is given by symmetric stamps and `M` is dense symmetric.
fn stamp_inner(n: usize, stamps: &[(u32, u32, f64)], m: &[f64]) -> f64 {
    let mut s = 0.0;
    for &(i, j, v) in stamps {
        let (i, j) = (i as usize, j as usize);
        s += if i == j { v * m[i * n + i] } else { 2.0 * v * m[i * n + j] };
    }
    s
}

/// `W (Σ stamps) W` via outer products of W's columns.
fn scaled_stamp_matrix(n: usize, w: &[f64], stamps: &[(u32, u32, f64)]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for &(a, b, v) in stamps {
        let (a, b) = (a as usize, b as usize);
        for r in 0..n {
            let wra = w[r * n + a];
            let wrb = w[r * n + b];
            if wra == 0.0 && wrb == 0.0 {
                continue;
            }
            let dst = &mut out[r * n..(r + 1) * n];
            if a == b {
                for (c, o) in dst.iter_mut().enumerate() {
                    *o += v * wra * w[c * n + a];
                }
            } else {
                for (c, o) in dst.iter_mut().enumerate() {
                    *o += v * (wra * w[c * n + b] + wrb * w[c * n + a]);
                }
            }
        }
    }
    out
}

struct BlockWork {
    s_inv: Vec<f64>,
    /// `W F_jk W` per variable of the block, used by the Schur complement
    /// and the ΔX assembly.
    scaled: Vec<Vec<f64>>,
    /// `W Rd W`, shared between predictor and corrector right-hand sides.
    w_rd_w: Vec<f64>,
}

pub(crate) fn solve_reduced(red: &Reduced, options: &SolveOptions) -> Outcome {
    let m = red.nvars;
    let tol = options.tol;
    // Internal orientation is always "maximize".
    let c: Vec<f64> = if red.maximize {
        red.obj.clone()
    } else {
        red.obj.iter().map(|v| -v).collect()
    };

    if m == 0 {
        return Outcome {
            status: SolveStatus::Optimal,
            z: Vec::new(),
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            duality_gap: 0.0,
            trace: Vec::new(),
            message: None,
        };
    }

    let blocks = &red.blocks;
    let nb = blocks.len();
    let total_dim: usize = blocks.iter().map(|b| b.dim).sum();
    let b_vec: Vec<f64> = c.iter().map(|v| -v).collect();
    let b_scale = 1.0 + maxabs(&b_vec);
    let c_scale = 1.0 + blocks.iter().map(|bl| maxabs(&bl.f0)).fold(0.0f64, f64::max);

    // Strictly interior start: multiples of the identity on both sides.
    let tau = c_scale.max(1.0);
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(nb);
    let mut ss: Vec<Vec<f64>> = Vec::with_capacity(nb);
    for bl in blocks {
        let mut eye = vec![0.0; bl.dim * bl.dim];
        for i in 0..bl.dim {
            eye[i * bl.dim + i] = tau;
        }
        xs.push(eye.clone());
        ss.push(eye);
    }
    let mut y = vec![0.0; m];

    let mut trace: Vec<IterationStat> = Vec::new();
    let mut status = SolveStatus::Failed;
    let mut message = None;
    let mut iterations = 0;
    let (mut prs, mut drs, mut gap) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mu0 = tau * tau;
    let mut mu_last = f64::INFINITY;
    let mut stall = 0usize;

    for it in 0..options.max_iterations {
        iterations = it;
        // Residuals of both sides.
        let mut rp = vec![0.0; m];
        for (k, rpk) in rp.iter_mut().enumerate() {
            *rpk = b_vec[k];
        }
        for (j, bl) in blocks.iter().enumerate() {
            for (vi, &k) in bl.vars.iter().enumerate() {
                rp[k] -= stamp_inner(bl.dim, &bl.cells[vi], &xs[j]);
            }
        }
        let mut rd: Vec<Vec<f64>> = Vec::with_capacity(nb);
        let mut drs_now = 0.0f64;
        for (j, bl) in blocks.iter().enumerate() {
            let n = bl.dim;
            let mut r = vec![0.0; n * n];
            for (idx, &f) in bl.f0.iter().enumerate() {
                r[idx] = f - ss[j][idx];
            }
            for (vi, &k) in bl.vars.iter().enumerate() {
                add_stamps(n, &mut r, &bl.cells[vi], -y[k]);
            }
            drs_now = drs_now.max(maxabs(&r));
            rd.push(r);
        }
        let mut mu = 0.0;
        for j in 0..nb {
            mu += frob_inner(&xs[j], &ss[j]);
        }
        mu /= total_dim as f64;
        mu_last = mu;

        let pobj: f64 = blocks.iter().enumerate().map(|(j, bl)| frob_inner(&bl.f0, &xs[j])).sum();
        let dobj: f64 = b_vec.iter().zip(&y).map(|(bv, yv)| bv * yv).sum();
        prs = rp.iter().fold(0.0f64, |a, v| a.max(v.abs())) / b_scale;
        drs = drs_now / c_scale;
        gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());

        if prs <= tol && drs <= tol && gap <= tol {
            status = SolveStatus::Optimal;
            break;
        }
        if !mu.is_finite() || mu > 1e12 * mu0 {
            message = Some("iterates diverged".into());
            break;
        }

        // Nesterov-Todd scaling per block.
        let mut works: Vec<BlockWork> = Vec::with_capacity(nb);
        let mut scaling_ok = true;
        for (j, bl) in blocks.iter().enumerate() {
            let n = bl.dim;
            let (ws, qs) = linalg::eigh(n, &ss[j]);
            if ws[0] <= 0.0 {
                scaling_ok = false;
            }
            let floor = 1e-300;
            let s_half = from_eig(n, &ws, &qs, |v| v.max(floor).sqrt());
            let s_inv_half = from_eig(n, &ws, &qs, |v| 1.0 / v.max(floor).sqrt());
            let s_inv = from_eig(n, &ws, &qs, |v| 1.0 / v.max(floor));
            let mut t = matmul(n, &s_half, &matmul(n, &xs[j], &s_half));
            symmetrize(n, &mut t);
            let (wt, qt) = linalg::eigh(n, &t);
            if wt[0] <= 0.0 {
                scaling_ok = false;
            }
            let t_half = from_eig(n, &wt, &qt, |v| v.max(floor).sqrt());
            let mut w = matmul(n, &s_inv_half, &matmul(n, &t_half, &s_inv_half));
            symmetrize(n, &mut w);
            let scaled: Vec<Vec<f64>> =
                bl.cells.iter().map(|st| scaled_stamp_matrix(n, &w, st)).collect();
            let mut w_rd_w = matmul(n, &w, &matmul(n, &rd[j], &w));
            symmetrize(n, &mut w_rd_w);
            works.push(BlockWork { s_inv, scaled, w_rd_w });
        }
        if !scaling_ok {
            message = Some("scaling broke down: iterate left the cone".into());
            break;
        }

        // Schur complement, shared by predictor and corrector.
        let mut mmat = vec![0.0; m * m];
        for (j, bl) in blocks.iter().enumerate() {
            let n = bl.dim;
            for (vi, &k) in bl.vars.iter().enumerate() {
                let vks = &works[j].scaled[vi];
                for (vl, &l) in bl.vars.iter().enumerate().take(vi + 1) {
                    let val = stamp_inner(n, &bl.cells[vl], vks);
                    mmat[l * m + k] += val;
                    if l != k {
                        mmat[k * m + l] += val;
                    }
                }
            }
        }
        let mfac = {
            let mut ridge = 0.0;
            let scale = maxabs(&mmat).max(1e-300);
            let mut found = None;
            for _ in 0..4 {
                let mut mr = mmat.clone();
                if ridge > 0.0 {
                    for i in 0..m {
                        mr[i * m + i] += ridge;
                    }
                }
                if let Some(f) = cholesky(m, &mr) {
                    found = Some(f);
                    break;
                }
                ridge = if ridge == 0.0 { 1e-13 * scale } else { ridge * 100.0 };
            }
            found
        };
        let Some(mfac) = mfac else {
            message = Some("Schur complement factorization failed".into());
            break;
        };

        // One Newton solve for a given centering target; returns
        // (Δy, ΔX_j, ΔS_j).
        let newton = |sigma_mu: f64| -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
            let mut rhs = rp.clone();
            let mut gs: Vec<Vec<f64>> = Vec::with_capacity(nb);
            for (j, bl) in blocks.iter().enumerate() {
                let n = bl.dim;
                let mut g = vec![0.0; n * n];
                for idx in 0..n * n {
                    g[idx] = sigma_mu * works[j].s_inv[idx] - xs[j][idx] - works[j].w_rd_w[idx];
                }
                for (vi, &k) in bl.vars.iter().enumerate() {
                    rhs[k] -= stamp_inner(n, &bl.cells[vi], &g);
                }
                gs.push(g);
            }
            forward_solve(m, &mfac, &mut rhs);
            backward_solve(m, &mfac, &mut rhs);
            let dy = rhs;
            let mut dxs = Vec::with_capacity(nb);
            let mut dss = Vec::with_capacity(nb);
            for (j, bl) in blocks.iter().enumerate() {
                let n = bl.dim;
                let mut dx = gs[j].clone();
                for (vi, &k) in bl.vars.iter().enumerate() {
                    let vks = &works[j].scaled[vi];
                    let w = dy[k];
                    for (o, &v) in dx.iter_mut().zip(vks.iter()) {
                        *o += w * v;
                    }
                }
                symmetrize(n, &mut dx);
                let mut ds = rd[j].clone();
                for (vi, &k) in bl.vars.iter().enumerate() {
                    add_stamps(n, &mut ds, &bl.cells[vi], -dy[k]);
                }
                dxs.push(dx);
                dss.push(ds);
            }
            (dy, dxs, dss)
        };

        // Predictor: pure affine step.
        let (_dy_aff, dx_aff, ds_aff) = newton(0.0);
        let mut ap = 1.0f64;
        let mut ad = 1.0f64;
        for (j, bl) in blocks.iter().enumerate() {
            ap = ap.min(max_step(bl.dim, &xs[j], &dx_aff[j], 1.0));
            ad = ad.min(max_step(bl.dim, &ss[j], &ds_aff[j], 1.0));
        }
        let mut mu_aff = 0.0;
        for j in 0..nb {
            let n = blocks[j].dim;
            for idx in 0..n * n {
                mu_aff += (xs[j][idx] + ap * dx_aff[j][idx]) * (ss[j][idx] + ad * ds_aff[j][idx]);
            }
        }
        mu_aff /= total_dim as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        // Corrector with the adapted centering weight.
        let (dy, dx, ds) = newton(sigma * mu);
        let frac = 0.98;
        let mut ap = f64::INFINITY;
        let mut ad = f64::INFINITY;
        for (j, bl) in blocks.iter().enumerate() {
            ap = ap.min(max_step(bl.dim, &xs[j], &dx[j], 1.0 / frac));
            ad = ad.min(max_step(bl.dim, &ss[j], &ds[j], 1.0 / frac));
        }
        let ap = (frac * ap).min(1.0);
        let ad = (frac * ad).min(1.0);

        for j in 0..nb {
            for (o, &v) in xs[j].iter_mut().zip(dx[j].iter()) {
                *o += ap * v;
            }
            for (o, &v) in ss[j].iter_mut().zip(ds[j].iter()) {
                *o += ad * v;
            }
        }
        for (o, &v) in y.iter_mut().zip(dy.iter()) {
            *o += ad * v;
        }

        trace.push(IterationStat {
            mu,
            primal_residual: prs,
            dual_residual: drs,
            step_primal: ap,
            step_dual: ad,
        });

        if ap.min(ad) < 1e-7 {
            stall += 1;
            if stall >= 6 {
                message = Some("progress stalled".into());
                break;
            }
        } else {
            stall = 0;
        }
        iterations = it + 1;
    }

    if status != SolveStatus::Optimal {
        // Loose exit. The reported solution is the y-side point, so judge it
        // by its own residual plus either the gap or the complementarity:
        // problems whose feasible set has an empty interior (constraints
        // active at the quantum boundary) stall the X-side residual — which
        // contaminates the gap — while y and tr(XS) converge fine.
        if drs <= 1e-7 && (gap <= 1e-3 || mu_last <= 1e-5 * mu0.max(1.0)) {
            status = SolveStatus::Inaccurate;
            if message.is_none() {
                message = Some(format!(
                    "terminated near the boundary (gap {gap:.2e}, primal {prs:.2e})"
                ));
            }
        } else if let Some(diag) = classify_rays(red, &c, &xs, &y) {
            status = diag.0;
            message = Some(diag.1);
        } else if message.is_none() {
            message = Some(format!(
                "no convergence in {} iterations (gap {gap:.2e}, primal {prs:.2e}, dual {drs:.2e})",
                options.max_iterations
            ));
        }
    }

    let z: Vec<f64> = y.iter().map(|v| -v).collect();
    Outcome {
        status,
        z,
        iterations,
        primal_residual: prs,
        dual_residual: drs,
        duality_gap: gap,
        trace,
        message,
    }
}

/// Farkas-ray inspection of a non-converged iterate.
///
/// A normalized primal accumulation `X̂` with `⟨F_k, X̂⟩ ≈ 0` and
/// `⟨F0, X̂⟩ < 0` proves no `z` satisfies the LMI. A normalized dual ray
/// `ŷ` with `Σ ŷ_k F_k ⪯ 0` and improving objective proves unboundedness.
fn classify_rays(
    red: &Reduced,
    c: &[f64],
    xs: &[Vec<f64>],
    y: &[f64],
) -> Option<(SolveStatus, String)> {
    let m = red.nvars;
    let blocks = &red.blocks;
    let xnorm = xs.iter().map(|x| frob_inner(x, x)).sum::<f64>().sqrt();
    if xnorm > 1e-300 {
        let mut ax = vec![0.0; m];
        for (j, bl) in blocks.iter().enumerate() {
            for (vi, &k) in bl.vars.iter().enumerate() {
                ax[k] += stamp_inner(bl.dim, &bl.cells[vi], &xs[j]);
            }
        }
        let ax_inf = ax.iter().fold(0.0f64, |a, v| a.max(v.abs())) / xnorm;
        let cx = blocks
            .iter()
            .enumerate()
            .map(|(j, bl)| frob_inner(&bl.f0, &xs[j]))
            .sum::<f64>()
            / xnorm;
        if ax_inf <= 1e-7 && cx < -1e-7 {
            return Some((
                SolveStatus::Infeasible,
                "infeasible: a primal improving ray certifies the constraints exclude the PSD cone"
                    .into(),
            ));
        }
    }
    let ynorm = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if ynorm > 1e-300 {
        let yh: Vec<f64> = y.iter().map(|v| v / ynorm).collect();
        let mut lmax = f64::NEG_INFINITY;
        for bl in blocks.iter() {
            let n = bl.dim;
            let mut zmat = vec![0.0; n * n];
            for (vi, &k) in bl.vars.iter().enumerate() {
                add_stamps(n, &mut zmat, &bl.cells[vi], yh[k]);
            }
            let (w, _) = linalg::eigh(n, &zmat);
            lmax = lmax.max(w[n - 1]);
        }
        let improving: f64 = c.iter().zip(&yh).map(|(cv, yv)| -cv * yv).sum();
        if lmax <= 1e-7 && improving > 1e-7 {
            return Some((
                SolveStatus::Failed,
                "objective appears unbounded above on the feasible set".into(),
            ));
        }
    }
    None
}
