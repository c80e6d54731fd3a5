//! Convex subproblems behind the estimators.
//!
//! Everything here reduces to a small standard-form cone program
//!
//! ```text
//!   minimize    <C, X> + c' x
//!   subject to  <A_i, X> + a_i' x = b_i,   i = 1..m
//!               X  Hermitian positive semidefinite,   x >= 0
//! ```
//!
//! solved by a dense Nesterov-Todd scaled primal-dual interior-point
//! iteration with an adaptive centering parameter. Constraint matrices are
//! almost always rank-one liftings `v v^H`, which the Schur-complement
//! assembly exploits: the whole coefficient block reduces to squared
//! magnitudes of `v_i^H W v_j` products.
//!
//! The module exposes the three problem families the estimators need:
//! eigenvalue-ratio maximization under power constraints (with the trace
//! normalization scalar), trace minimization, and their interval-constrained
//! robust counterparts (semidefinite step plus a one-dimensional exact slack
//! minimization). The robust trace-minimization initializer is a projected
//! accelerated gradient method rather than a cone program; its accuracy needs
//! are mild and it keeps the quadratic slack penalty out of the SDP form.

use crate::eigen::full_eigen;
use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::{C64, CMat, CVec, RMat, RVec};

/// Coefficient matrix of one constraint (or the objective) on the PSD block.
///
/// Rank-one liftings are referenced through the problem's shared vector pool
/// so the Schur assembly can batch all scaled `v_a^H W v_b` products.
#[derive(Debug, Clone)]
pub enum PsdCoeff {
    Zero,
    /// `scale * I`
    Identity(f64),
    /// `sum_k scale_k * v_k v_k^H` over pool vectors.
    Combo(Vec<(usize, f64)>),
    /// Arbitrary Hermitian matrix.
    Dense(CMat),
}

impl PsdCoeff {
    fn inner(&self, m: &CMat, pool: &[CVec]) -> f64 {
        match self {
            PsdCoeff::Zero => 0.0,
            PsdCoeff::Identity(s) => s * m.trace().re,
            PsdCoeff::Combo(terms) => terms
                .iter()
                .map(|&(k, scale)| {
                    let v = &pool[k];
                    let mv = m * v;
                    scale * v.dotc(&mv).re
                })
                .sum(),
            PsdCoeff::Dense(d) => (d * m).trace().re,
        }
    }

    fn add_into(&self, acc: &mut CMat, weight: f64, pool: &[CVec]) {
        match self {
            PsdCoeff::Zero => {}
            PsdCoeff::Identity(s) => {
                let w = C64::new(weight * s, 0.0);
                for i in 0..acc.nrows() {
                    acc[(i, i)] += w;
                }
            }
            PsdCoeff::Combo(terms) => {
                for &(k, scale) in terms {
                    let v = &pool[k];
                    let w = C64::new(weight * scale, 0.0);
                    for c in 0..v.len() {
                        let vc = v[c].conj() * w;
                        for r in 0..v.len() {
                            acc[(r, c)] += v[r] * vc;
                        }
                    }
                }
            }
            PsdCoeff::Dense(d) => {
                let w = C64::new(weight, 0.0);
                acc.zip_apply(d, |a, b| *a += b * w);
            }
        }
    }
}

/// One linear equality constraint.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub psd: PsdCoeff,
    /// Sparse coefficients on the nonnegative scalar variables.
    pub scalars: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Standard-form cone program.
#[derive(Debug, Clone)]
pub struct ConeProblem {
    pub n: usize,
    pub num_scalars: usize,
    /// Shared rank-one vectors referenced by [`PsdCoeff::Combo`].
    pub pool: Vec<CVec>,
    pub objective_psd: PsdCoeff,
    pub objective_scalars: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy)]
pub struct IpmOptions {
    /// Relative tolerance on primal/dual residuals and duality gap.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iters: 120,
        }
    }
}

/// Outcome classification of a cone solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveStatus::Optimal => write!(f, "optimal"),
            SolveStatus::MaxIter => write!(f, "max-iter"),
            SolveStatus::Infeasible => write!(f, "infeasible"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Raw interior-point solution.
#[derive(Debug, Clone)]
pub struct IpmSolution {
    pub x_mat: HermitianMatrix,
    pub x_scalars: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub residuals: Residuals,
    pub iterations: usize,
}

struct Scaling {
    w: CMat,
    z_inv: CMat,
    w_scalars: Vec<f64>,
}

fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn psd_sqrt_pair(m: &CMat) -> (CMat, CMat) {
    // Returns (m^{1/2}, m^{-1/2}); input must be Hermitian positive definite.
    let se = hermitize(m).symmetric_eigen();
    let q = &se.eigenvectors;
    let n = m.nrows();
    let mut s = CMat::zeros(n, n);
    let mut si = CMat::zeros(n, n);
    for i in 0..n {
        let lam = se.eigenvalues[i].max(1e-300);
        s[(i, i)] = C64::new(lam.sqrt(), 0.0);
        si[(i, i)] = C64::new(1.0 / lam.sqrt(), 0.0);
    }
    (q * s * q.adjoint(), q * si * q.adjoint())
}

fn nt_scaling(x: &CMat, z: &CMat, xs: &[f64], zs: &[f64]) -> Scaling {
    let (z_half, z_ihalf) = psd_sqrt_pair(z);
    let t = hermitize(&(&z_half * x * &z_half));
    let (t_half, _) = psd_sqrt_pair(&t);
    let w = hermitize(&(&z_ihalf * t_half * &z_ihalf));
    // z^{-1} from its square root.
    let z_inv = hermitize(&(&z_ihalf * &z_ihalf));
    let w_scalars = xs
        .iter()
        .zip(zs)
        .map(|(&x, &z)| (x / z).max(1e-300).sqrt())
        .collect();
    Scaling { w, z_inv, w_scalars }
}

/// Largest step `alpha <= 1` keeping `X + alpha dX` positive semidefinite.
fn max_step_psd(x: &CMat, dx: &CMat) -> f64 {
    let n = x.nrows();
    if n == 0 {
        return 1.0;
    }
    let chol = match nalgebra::Cholesky::new(hermitize(x)) {
        Some(c) => c,
        None => return 0.0,
    };
    let l = chol.l();
    // S = L^{-1} dX L^{-H}
    let y = l.solve_lower_triangular(dx).unwrap_or_else(|| dx.clone());
    let yh = y.adjoint();
    let s = l
        .solve_lower_triangular(&yh)
        .unwrap_or_else(|| yh.clone())
        .adjoint();
    let se = hermitize(&s).symmetric_eigen();
    let min_eig = se.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig >= 0.0 {
        1.0
    } else {
        (-1.0 / min_eig).min(1.0)
    }
}

fn max_step_scalars(x: &[f64], dx: &[f64]) -> f64 {
    let mut alpha = 1.0f64;
    for (&xi, &di) in x.iter().zip(dx) {
        if di < 0.0 {
            alpha = alpha.min(-xi / di);
        }
    }
    alpha
}

/// Assemble the Schur complement `M[i][j] = <A_i, W A_j W> + sum_k a_ik a_jk w_k^2`.
fn assemble_schur(problem: &ConeProblem, scaling: &Scaling) -> RMat {
    let m = problem.constraints.len();
    let n = problem.n;
    let mut mat = RMat::zeros(m, m);

    // Pool Gram products: gram[a][b] = v_a^H W v_b and wnorm2[a] = ||W^{1/2} v_a||-style
    // terms; <v_a v_a^H, W v_b v_b^H W> = |gram[a][b]|^2 and
    // <I, W v v^H W> = ||W v||^2.
    let np = problem.pool.len();
    let (gram, wv) = if np > 0 {
        let mut vmat = CMat::zeros(n, np);
        for (col, v) in problem.pool.iter().enumerate() {
            vmat.set_column(col, v);
        }
        let wv = &scaling.w * &vmat;
        let gram = vmat.adjoint() * &wv;
        (gram, wv)
    } else {
        (CMat::zeros(0, 0), CMat::zeros(0, 0))
    };
    let w_frob2 = scaling.w.iter().map(|z| z.norm_sqr()).sum::<f64>();

    for i in 0..m {
        for j in i..m {
            let val = match (&problem.constraints[i].psd, &problem.constraints[j].psd) {
                (PsdCoeff::Zero, _) | (_, PsdCoeff::Zero) => 0.0,
                (PsdCoeff::Identity(si), PsdCoeff::Identity(sj)) => si * sj * w_frob2,
                (PsdCoeff::Identity(s), PsdCoeff::Combo(terms))
                | (PsdCoeff::Combo(terms), PsdCoeff::Identity(s)) => terms
                    .iter()
                    .map(|&(k, sk)| s * sk * wv.column(k).norm_squared())
                    .sum(),
                (PsdCoeff::Combo(ti), PsdCoeff::Combo(tj)) => {
                    let mut acc = 0.0;
                    for &(a, sa) in ti {
                        for &(b, sb) in tj {
                            acc += sa * sb * gram[(a, b)].norm_sqr();
                        }
                    }
                    acc
                }
                (PsdCoeff::Dense(_), _) | (_, PsdCoeff::Dense(_)) => {
                    let mut aj = CMat::zeros(n, n);
                    problem.constraints[j]
                        .psd
                        .add_into(&mut aj, 1.0, &problem.pool);
                    let waw = &scaling.w * aj * &scaling.w;
                    problem.constraints[i].psd.inner(&waw, &problem.pool)
                }
            };
            mat[(i, j)] = val;
            mat[(j, i)] = val;
        }
    }

    // Scalar block contributions (sparse).
    for i in 0..m {
        for &(ki, ai) in &problem.constraints[i].scalars {
            for j in 0..m {
                for &(kj, aj) in &problem.constraints[j].scalars {
                    if ki == kj {
                        let wk = scaling.w_scalars[ki];
                        mat[(i, j)] += ai * aj * wk * wk;
                    }
                }
            }
        }
    }
    mat
}

/// Solve the cone program.
pub fn solve_cone(problem: &ConeProblem, opts: IpmOptions) -> Result<IpmSolution> {
    let n = problem.n;
    let m = problem.constraints.len();
    let k = problem.num_scalars;
    if m == 0 {
        return Err(Error::Domain("cone program needs at least one constraint".into()));
    }

    let b: RVec = RVec::from_fn(m, |i, _| problem.constraints[i].rhs);
    let bnorm = b.norm();
    let mut cmat = CMat::zeros(n, n);
    problem.objective_psd.add_into(&mut cmat, 1.0, &problem.pool);
    let cnorm = (cmat.iter().map(|z| z.norm_sqr()).sum::<f64>()
        + problem.objective_scalars.iter().map(|c| c * c).sum::<f64>())
    .sqrt();

    // Infeasible start at a well-scaled multiple of the identity.
    let init = (1.0 + bnorm.max(cnorm)).min(1e6);
    let mut x = CMat::identity(n, n) * C64::new(init, 0.0);
    let mut z = CMat::identity(n, n) * C64::new(init.max(1.0), 0.0);
    let mut xs = vec![init; k];
    let mut zs = vec![init.max(1.0); k];
    let mut y = RVec::zeros(m);

    let degree = (n + k) as f64;
    let mut status = SolveStatus::MaxIter;
    let mut iterations = opts.max_iters;
    let mut residuals = Residuals {
        primal: f64::INFINITY,
        dual: f64::INFINITY,
        gap: f64::INFINITY,
    };
    let mut stall_count = 0usize;
    // Track the best iterate by worst-case relative residual; near degenerate
    // faces the iteration bounces around its numerical floor.
    let mut best_score = f64::INFINITY;
    let mut best: Option<(CMat, Vec<f64>, Residuals)> = None;
    let mut no_improve = 0usize;

    for iter in 0..opts.max_iters {
        // Residuals.
        let ax = RVec::from_fn(m, |i, _| {
            let c = &problem.constraints[i];
            let mut val = c.psd.inner(&x, &problem.pool);
            for &(kk, a) in &c.scalars {
                val += a * xs[kk];
            }
            val
        });
        let r_p = &b - &ax;

        let mut a_ty = CMat::zeros(n, n);
        for (i, c) in problem.constraints.iter().enumerate() {
            c.psd.add_into(&mut a_ty, y[i], &problem.pool);
        }
        let r_d = hermitize(&(&cmat - &z - &a_ty));
        let mut r_ds = vec![0.0f64; k];
        for kk in 0..k {
            r_ds[kk] = problem.objective_scalars.get(kk).copied().unwrap_or(0.0) - zs[kk];
        }
        for (i, c) in problem.constraints.iter().enumerate() {
            for &(kk, a) in &c.scalars {
                r_ds[kk] -= a * y[i];
            }
        }

        let compl = (&x * &z).trace().re + xs.iter().zip(&zs).map(|(a, b)| a * b).sum::<f64>();
        let mu = compl / degree;
        let pobj = problem.objective_psd.inner(&x, &problem.pool)
            + problem
                .objective_scalars
                .iter()
                .zip(&xs)
                .map(|(c, x)| c * x)
                .sum::<f64>();
        let dobj = b.dot(&y);

        let rel_p = r_p.norm() / (1.0 + bnorm);
        let rel_d = (r_d.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
            + r_ds.iter().map(|v| v * v).sum::<f64>().sqrt())
            / (1.0 + cnorm);
        let rel_gap = compl.abs() / (1.0 + pobj.abs() + dobj.abs());
        residuals = Residuals {
            primal: rel_p,
            dual: rel_d,
            gap: rel_gap,
        };

        let score = rel_p.max(rel_d).max(rel_gap);
        if score < best_score * 0.98 {
            best_score = score;
            best = Some((x.clone(), xs.clone(), residuals));
            no_improve = 0;
        } else {
            no_improve += 1;
        }

        if rel_p <= opts.tol && rel_d <= opts.tol && rel_gap <= opts.tol {
            status = SolveStatus::Optimal;
            iterations = iter;
            best = Some((x.clone(), xs.clone(), residuals));
            break;
        }
        if mu < 1e-300 || no_improve >= 12 {
            iterations = iter;
            break;
        }

        let scaling = nt_scaling(&x, &z, &xs, &zs);
        if !scaling.w.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            // The cone variables degenerated past what the scaling can
            // represent; the best iterate is as far as this run goes.
            iterations = iter;
            break;
        }
        let schur = assemble_schur(problem, &scaling);
        let chol = match cholesky_with_jitter(&schur) {
            Ok(c) => c,
            Err(_) => {
                iterations = iter;
                break;
            }
        };

        // One solve of the Newton system for a given centering target and
        // optional second-order correction from a previous direction.
        let solve_direction = |sigma_mu: f64,
                               second_order: Option<(&CMat, &CMat, &[f64], &[f64])>|
         -> (CMat, Vec<f64>, RVec, CMat, Vec<f64>) {
            // R_c = sigma*mu*Z^{-1} - X - sym(dX dZ Z^{-1}) ; scalar analog.
            let mut r_c = &scaling.z_inv * C64::new(sigma_mu, 0.0) - &x;
            let mut r_cs: Vec<f64> = (0..k).map(|i| sigma_mu / zs[i] - xs[i]).collect();
            if let Some((dxa, dza, dxsa, dzsa)) = second_order {
                let cross = dxa * dza * &scaling.z_inv;
                r_c -= hermitize(&cross);
                for i in 0..k {
                    r_cs[i] -= dxsa[i] * dzsa[i] / zs[i];
                }
            }
            let r_c = hermitize(&r_c);
            // rhs_i = r_p_i - <A_i, R_c - W R_d W> - sum_k a_ik (r_cs_k - w_k^2 r_ds_k)
            let wrdw = &scaling.w * &r_d * &scaling.w;
            let fixed = &r_c - &wrdw;
            let mut rhs = RVec::zeros(m);
            for (i, c) in problem.constraints.iter().enumerate() {
                let mut val = r_p[i] - c.psd.inner(&fixed, &problem.pool);
                for &(kk, a) in &c.scalars {
                    let wk2 = scaling.w_scalars[kk] * scaling.w_scalars[kk];
                    val -= a * (r_cs[kk] - wk2 * r_ds[kk]);
                }
                rhs[i] = val;
            }
            let dy = chol.solve(&rhs);
            // dZ = R_d - A^T dy ; dzs likewise.
            let mut dz = r_d.clone();
            for (i, c) in problem.constraints.iter().enumerate() {
                c.psd.add_into(&mut dz, -dy[i], &problem.pool);
            }
            let dz = hermitize(&dz);
            let mut dzs = r_ds.clone();
            for (i, c) in problem.constraints.iter().enumerate() {
                for &(kk, a) in &c.scalars {
                    dzs[kk] -= a * dy[i];
                }
            }
            // dX = R_c - W dZ W ; dxs likewise.
            let dx = hermitize(&(&r_c - &(&scaling.w * &dz * &scaling.w)));
            let dxs: Vec<f64> = (0..k)
                .map(|i| {
                    let wk2 = scaling.w_scalars[i] * scaling.w_scalars[i];
                    r_cs[i] - wk2 * dzs[i]
                })
                .collect();
            (dx, dxs, dy, dz, dzs)
        };

        // Predictor (affine scaling).
        let (dx_a, dxs_a, _dy_a, dz_a, dzs_a) = solve_direction(0.0, None);
        let ap = max_step_psd(&x, &dx_a).min(max_step_scalars(&xs, &dxs_a));
        let ad = max_step_psd(&z, &dz_a).min(max_step_scalars(&zs, &dzs_a));
        let mu_aff = {
            let xa = &x + &dx_a * C64::new(ap, 0.0);
            let za = &z + &dz_a * C64::new(ad, 0.0);
            let mut c = (xa * za).trace().re;
            for i in 0..k {
                c += (xs[i] + ap * dxs_a[i]) * (zs[i] + ad * dzs_a[i]);
            }
            (c / degree).max(0.0)
        };
        let sigma = ((mu_aff / mu).powi(3)).clamp(1e-8, 0.99);
        if std::env::var("IRSLIFT_IPM_TRACE").is_ok() {
            let mat_compl = (&x * &z).trace().re;
            let scal_compl: f64 = xs.iter().zip(&zs).map(|(a, b)| a * b).sum();
            eprintln!(
                "it {iter:3} mu {mu:10.3e} rp {rel_p:9.2e} rd {rel_d:9.2e} gap {rel_gap:9.2e} a_aff ({ap:6.3},{ad:6.3}) sigma {sigma:8.2e} mat {mat_compl:9.2e} scal {scal_compl:9.2e} xs0 {:9.2e} zs0 {:9.2e}",
                xs.first().copied().unwrap_or(0.0),
                zs.first().copied().unwrap_or(0.0),
            );
        }

        // Corrector with the adaptive centering target. Equal primal-dual
        // steps: unequal steps destabilize by letting one side race ahead on
        // thin feasible sets.
        let (dx, dxs, dy, dz, dzs) = solve_direction(sigma * mu, None);
        let tau = 0.99;
        let step = (tau
            * max_step_psd(&x, &dx)
                .min(max_step_scalars(&xs, &dxs))
                .min(max_step_psd(&z, &dz))
                .min(max_step_scalars(&zs, &dzs)))
        .min(1.0);
        let mut ap = step;
        let mut ad = step;

        // Backtrack until the average complementarity decreases; its
        // directional derivative is negative, so a small enough step always
        // qualifies and runaway second-order terms cannot blow the iterate up.
        for _ in 0..30 {
            let xn = hermitize(&(&x + &dx * C64::new(ap, 0.0)));
            let zn = hermitize(&(&z + &dz * C64::new(ad, 0.0)));
            let mut compl_sum = (&xn * &zn).trace().re;
            for i in 0..k {
                compl_sum += (xs[i] + ap * dxs[i]) * (zs[i] + ad * dzs[i]);
            }
            let mu_next = compl_sum / degree;
            let a = ap.min(ad);
            let decrease_ok = mu_next <= mu * (1.0 - 0.05 * a * (1.0 - sigma)) + 1e-300;
            if decrease_ok && mu_next.is_finite() {
                break;
            }
            ap *= 0.7;
            ad *= 0.7;
        }

        if ap < 1e-10 && ad < 1e-10 {
            stall_count += 1;
            if stall_count >= 3 {
                iterations = iter;
                break;
            }
        } else {
            stall_count = 0;
        }

        x = hermitize(&(&x + &dx * C64::new(ap, 0.0)));
        for i in 0..k {
            xs[i] += ap * dxs[i];
        }
        y += dy * ad;
        z = hermitize(&(&z + &dz * C64::new(ad, 0.0)));
        for i in 0..k {
            zs[i] += ad * dzs[i];
        }
    }

    // Return the best iterate seen; a near-tolerance floor still counts as
    // converged for practical purposes.
    if let Some((bx, bxs, bres)) = best {
        x = bx;
        xs = bxs;
        residuals = bres;
    }
    if status != SolveStatus::Optimal
        && residuals.primal <= 100.0 * opts.tol
        && residuals.dual <= 100.0 * opts.tol
        && residuals.gap <= 100.0 * opts.tol
    {
        status = SolveStatus::Optimal;
    }

    // Infeasibility heuristic: complementarity collapsed but the primal
    // residual refuses to.
    if status != SolveStatus::Optimal
        && residuals.primal > 1e4 * opts.tol
        && residuals.gap < opts.tol * 10.0
    {
        status = SolveStatus::Infeasible;
    }

    let objective = problem.objective_psd.inner(&x, &problem.pool)
        + problem
            .objective_scalars
            .iter()
            .zip(&xs)
            .map(|(c, x)| c * x)
            .sum::<f64>();
    Ok(IpmSolution {
        x_mat: HermitianMatrix::new(x)?,
        x_scalars: xs,
        objective,
        status,
        residuals,
        iterations,
    })
}

struct SchurFactor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl SchurFactor {
    fn solve(&self, rhs: &RVec) -> RVec {
        self.chol.solve(rhs)
    }
}

fn cholesky_with_jitter(m: &RMat) -> Result<SchurFactor> {
    let scale = m.trace().abs().max(1e-300) / m.nrows() as f64;
    let mut jitter = 0.0;
    for _ in 0..8 {
        let mut mm = m.clone();
        if jitter > 0.0 {
            for i in 0..mm.nrows() {
                mm[(i, i)] += jitter;
            }
        }
        if let Some(chol) = nalgebra::Cholesky::new(mm) {
            return Ok(SchurFactor { chol });
        }
        jitter = if jitter == 0.0 {
            1e-14 * scale
        } else {
            jitter * 100.0
        };
    }
    Err(Error::IllConditioned(
        "Schur complement not positive definite".into(),
    ))
}

// ---------------------------------------------------------------------------
// Problem wrappers
// ---------------------------------------------------------------------------

/// Symmetry class of the unknown matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryClass {
    Hermitian,
    RealSymmetric,
}

/// Measured linear constraints `p0 tr(H V_t) ~ data_t` shared by all
/// subproblems. Reflections enter as their entry vectors (the liftings stay
/// implicit).
#[derive(Debug, Clone)]
pub struct LinearMeasurementConstraints {
    pub vs: Vec<CVec>,
    pub p0: f64,
    pub data: ConstraintData,
    pub symmetry: SymmetryClass,
}

#[derive(Debug, Clone)]
pub enum ConstraintData {
    /// Exact powers (watts): `p0 tr(H V_t) = p_t`.
    Equalities(Vec<f64>),
    /// Interval reports (watts): `zeta_t <= p0 tr(H V_t) + sigma2 <= xi_t`,
    /// to be slackened by the robust estimators.
    Intervals {
        zeta: Vec<f64>,
        xi: Vec<f64>,
        sigma2: f64,
    },
}

impl LinearMeasurementConstraints {
    pub fn t_p(&self) -> usize {
        self.vs.len()
    }

    pub fn dim(&self) -> usize {
        self.vs.first().map(|v| v.len()).unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        if self.vs.is_empty() {
            return Err(Error::Domain("no measurement constraints".into()));
        }
        let n = self.dim();
        if self.vs.iter().any(|v| v.len() != n) {
            return Err(Error::Dimension("mixed reflection dimensions".into()));
        }
        if self.symmetry == SymmetryClass::RealSymmetric {
            let max_imag = self
                .vs
                .iter()
                .flat_map(|v| v.iter())
                .map(|z| z.im.abs())
                .fold(0.0f64, f64::max);
            if max_imag > 1e-12 {
                return Err(Error::Domain(
                    "real-symmetric class requires real reflections".into(),
                ));
            }
        }
        match &self.data {
            ConstraintData::Equalities(p) => {
                if p.len() != self.vs.len() {
                    return Err(Error::Dimension("power count mismatch".into()));
                }
            }
            ConstraintData::Intervals { zeta, xi, .. } => {
                if zeta.len() != self.vs.len() || xi.len() != self.vs.len() {
                    return Err(Error::Dimension("interval count mismatch".into()));
                }
                if zeta.iter().zip(xi).any(|(z, x)| z > x) {
                    return Err(Error::Domain("interval bounds out of order".into()));
                }
            }
        }
        Ok(())
    }
}

/// Solution of a normalized ratio subproblem.
#[derive(Debug, Clone)]
pub struct ConicSolution {
    /// Normalized matrix, `tr(G) = 1`, PSD.
    pub g: HermitianMatrix,
    /// Trace scalar in watt units: the de-normalized iterate is `G / gamma`.
    pub gamma: f64,
    /// Slack vector (robust problems only; empty otherwise).
    pub delta: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl ConicSolution {
    /// De-normalized estimate `G / gamma`.
    pub fn h(&self) -> HermitianMatrix {
        self.g.scale(1.0 / self.gamma)
    }
}

/// Reduce a set of equality rows `(coef vector in R^{n^2+extras}, rhs)` to an
/// independent subset; detects inconsistency among the dropped rows.
fn independent_rows(rows: &[(RVec, f64)], tol: f64) -> Result<Vec<usize>> {
    let mut basis: Vec<RVec> = Vec::new();
    let mut basis_rhs: Vec<f64> = Vec::new();
    let mut keep = Vec::new();
    let rhs_scale = rows
        .iter()
        .map(|(_, b)| b.abs())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    for (idx, (a, bval)) in rows.iter().enumerate() {
        let mut r = a.clone();
        let mut rb = *bval;
        for (q, qb) in basis.iter().zip(&basis_rhs) {
            let proj = q.dot(&r);
            r -= q * proj;
            rb -= qb * proj;
        }
        // Second pass for numerical hygiene.
        for (q, qb) in basis.iter().zip(&basis_rhs) {
            let proj = q.dot(&r);
            r -= q * proj;
            rb -= qb * proj;
        }
        let norm0 = a.norm().max(1e-300);
        if r.norm() > tol * norm0 {
            let nr = r.norm();
            basis.push(r / nr);
            basis_rhs.push(rb / nr);
            keep.push(idx);
        } else if rb.abs() > 1e-7 * rhs_scale {
            return Err(Error::SolverFailure {
                status: "infeasible".into(),
                primal: rb.abs() / rhs_scale,
                dual: 0.0,
                gap: 0.0,
            });
        }
    }
    Ok(keep)
}

fn power_scale(values: &[f64]) -> f64 {
    let s = values.iter().map(|p| p.abs()).sum::<f64>() / values.len().max(1) as f64;
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Maximize `tr(G X)` subject to `p0 tr(G V_t) = p_t gamma`, `tr(G) = 1`,
/// `G` PSD, `gamma >= 0`. The caller recovers the iterate as `G / gamma`.
///
/// The trace scalar is eliminated before solving: with a pivot record `t*`
/// of largest power, the constraints become power-ratio equalities
/// `p_{t*} p0 tr(G V_t) - p_t p0 tr(G V_{t*}) = 0`, and
/// `gamma = p0 tr(G V_{t*}) / p_{t*}` is recovered afterwards. This keeps the
/// dual attainable (the scalar's dual slack otherwise converges only in the
/// limit) without changing the feasible set.
pub fn solve_ratio_sdp(
    x: &HermitianMatrix,
    cons: &LinearMeasurementConstraints,
    tol: f64,
) -> Result<ConicSolution> {
    cons.validate()?;
    let ConstraintData::Equalities(p) = &cons.data else {
        return Err(Error::Domain(
            "ratio SDP requires equality-form constraints".into(),
        ));
    };
    let n = cons.dim();
    let s = power_scale(p);
    let pn: Vec<f64> = p.iter().map(|x| x / s).collect();

    let pivot = pn
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Domain("no measurements".into()))?;
    if pn[pivot] <= 0.0 {
        return Err(Error::Domain(
            "ratio SDP needs at least one positive power".into(),
        ));
    }

    // Combined coefficient rows (gamma eliminated), with an independence
    // filter over their coordinate vectors.
    let coords: Vec<RVec> = cons
        .vs
        .iter()
        .map(|v| HermitianMatrix::from_outer(v).coords() * cons.p0)
        .collect();
    let mut rows: Vec<(RVec, f64)> = Vec::with_capacity(cons.t_p() - 1);
    let mut row_ts: Vec<usize> = Vec::with_capacity(cons.t_p() - 1);
    for t in 0..cons.t_p() {
        if t == pivot {
            continue;
        }
        rows.push((&coords[t] * pn[pivot] - &coords[pivot] * pn[t], 0.0));
        row_ts.push(t);
    }
    let keep = independent_rows(&rows, 1e-10)?;

    // Unit-normalize each combined row; the power disparity across records
    // otherwise produces badly scaled duals.
    let pool: Vec<CVec> = cons.vs.clone();
    let mut constraints: Vec<Constraint> = keep
        .iter()
        .map(|&ri| {
            let t = row_ts[ri];
            let norm = rows[ri].0.norm().max(1e-300);
            Constraint {
                psd: PsdCoeff::Combo(vec![
                    (t, cons.p0 * pn[pivot] / norm),
                    (pivot, -cons.p0 * pn[t] / norm),
                ]),
                scalars: vec![],
                rhs: 0.0,
            }
        })
        .collect();
    constraints.push(Constraint {
        psd: PsdCoeff::Identity(1.0),
        scalars: vec![],
        rhs: 1.0,
    });

    let problem = ConeProblem {
        n,
        num_scalars: 0,
        pool,
        objective_psd: PsdCoeff::Dense(x.matrix() * C64::new(-1.0, 0.0)),
        objective_scalars: vec![],
        constraints,
    };
    let sol = solve_cone(&problem, IpmOptions { tol, ..Default::default() })?;
    let gamma_norm = (cons.p0 * sol.x_mat.quadratic_form(&cons.vs[pivot]) / pn[pivot]).max(1e-300);
    Ok(ConicSolution {
        g: sol.x_mat,
        gamma: gamma_norm / s,
        delta: Vec::new(),
        objective: -sol.objective,
        status: sol.status,
        residuals: sol.residuals,
        iterations: sol.iterations,
    })
}

/// Minimize `tr(H)` subject to `p0 tr(H V_t) = p_t`, `H` PSD.
pub fn solve_trace_min(cons: &LinearMeasurementConstraints, tol: f64) -> Result<HermitianMatrix> {
    cons.validate()?;
    let ConstraintData::Equalities(p) = &cons.data else {
        return Err(Error::Domain(
            "trace minimization requires equality-form constraints".into(),
        ));
    };
    let n = cons.dim();
    let s = power_scale(p);

    let rows: Vec<(RVec, f64)> = cons
        .vs
        .iter()
        .zip(p)
        .map(|(v, &pt)| {
            let w = HermitianMatrix::from_outer(v).coords() * cons.p0;
            (w, pt / s)
        })
        .collect();
    let keep = independent_rows(&rows, 1e-10)?;

    let pool: Vec<CVec> = cons.vs.clone();
    let constraints: Vec<Constraint> = keep
        .iter()
        .map(|&t| Constraint {
            psd: PsdCoeff::Combo(vec![(t, cons.p0)]),
            scalars: vec![],
            rhs: p[t] / s,
        })
        .collect();

    let problem = ConeProblem {
        n,
        num_scalars: 0,
        pool,
        objective_psd: PsdCoeff::Identity(1.0),
        objective_scalars: vec![],
        constraints,
    };
    let sol = solve_cone(&problem, IpmOptions { tol, ..Default::default() })?;
    if sol.status == SolveStatus::Infeasible {
        return Err(Error::SolverFailure {
            status: sol.status.to_string(),
            primal: sol.residuals.primal,
            dual: sol.residuals.dual,
            gap: sol.residuals.gap,
        });
    }
    Ok(sol.x_mat.scale(s))
}

/// Fixed-slack semidefinite step of the robust ratio problem: maximize
/// `tr(G X)` subject to
/// `gamma (zeta_t - delta_t - sigma2) <= p0 tr(G V_t) <= gamma (xi_t + delta_t - sigma2)`,
/// `tr(G) = 1`, `G` PSD, `gamma >= 0`.
pub fn solve_robust_ratio_gstep(
    x: &HermitianMatrix,
    cons: &LinearMeasurementConstraints,
    delta: &[f64],
    tol: f64,
) -> Result<ConicSolution> {
    cons.validate()?;
    let ConstraintData::Intervals { zeta, xi, sigma2 } = &cons.data else {
        return Err(Error::Domain("robust step requires interval data".into()));
    };
    if delta.len() != cons.t_p() {
        return Err(Error::Dimension("slack vector length mismatch".into()));
    }
    let n = cons.dim();

    let lo: Vec<f64> = zeta
        .iter()
        .zip(delta)
        .map(|(z, d)| z - d - sigma2)
        .collect();
    let hi: Vec<f64> = xi.iter().zip(delta).map(|(x, d)| x + d - sigma2).collect();
    let s = power_scale(&hi.iter().map(|h| h.abs()).collect::<Vec<_>>());

    // Zero-width intervals become equality rows and get the independence
    // filter; true intervals carry their own slack column and are always
    // independent.
    let width_tol = 1e-12;
    let mut eq_rows: Vec<(usize, RVec)> = Vec::new();
    let mut ineq_idx: Vec<usize> = Vec::new();
    for t in 0..cons.t_p() {
        let scale_t = hi[t].abs().max(lo[t].abs()).max(1e-300);
        if (hi[t] - lo[t]).abs() <= width_tol * scale_t {
            let w = HermitianMatrix::from_outer(&cons.vs[t]).coords() * cons.p0;
            let mut row = RVec::zeros(n * n + 1);
            row.rows_mut(0, n * n).copy_from(&w);
            row[n * n] = -0.5 * (lo[t] + hi[t]) / s;
            eq_rows.push((t, row));
        } else {
            ineq_idx.push(t);
        }
    }
    let eq_pairs: Vec<(RVec, f64)> = eq_rows.iter().map(|(_, r)| (r.clone(), 0.0)).collect();
    let keep_eq = independent_rows(&eq_pairs, 1e-10)?;

    // Scalar variables: gamma, then one slack per inequality row.
    let pool: Vec<CVec> = cons.vs.clone();
    let mut constraints: Vec<Constraint> = Vec::new();
    for &ei in &keep_eq {
        let (t, _) = eq_rows[ei];
        constraints.push(Constraint {
            psd: PsdCoeff::Combo(vec![(t, cons.p0)]),
            scalars: vec![(0, -0.5 * (lo[t] + hi[t]) / s)],
            rhs: 0.0,
        });
    }
    let mut slack = 1usize;
    for &t in &ineq_idx {
        // p0 <V_t, G> - gamma lo_t - s_lo = 0
        constraints.push(Constraint {
            psd: PsdCoeff::Combo(vec![(t, cons.p0)]),
            scalars: vec![(0, -lo[t] / s), (slack, -1.0)],
            rhs: 0.0,
        });
        // p0 <V_t, G> - gamma hi_t + s_hi = 0
        constraints.push(Constraint {
            psd: PsdCoeff::Combo(vec![(t, cons.p0)]),
            scalars: vec![(0, -hi[t] / s), (slack + 1, 1.0)],
            rhs: 0.0,
        });
        slack += 2;
    }
    constraints.push(Constraint {
        psd: PsdCoeff::Identity(1.0),
        scalars: vec![],
        rhs: 1.0,
    });

    let num_scalars = slack;
    let problem = ConeProblem {
        n,
        num_scalars,
        pool,
        objective_psd: PsdCoeff::Dense(x.matrix() * C64::new(-1.0, 0.0)),
        objective_scalars: vec![0.0; num_scalars],
        constraints,
    };
    let sol = solve_cone(&problem, IpmOptions { tol, ..Default::default() })?;
    let gamma_norm = sol.x_scalars[0].max(1e-300);
    Ok(ConicSolution {
        g: sol.x_mat,
        gamma: gamma_norm / s,
        delta: delta.to_vec(),
        objective: -sol.objective,
        status: sol.status,
        residuals: sol.residuals,
        iterations: sol.iterations,
    })
}

/// Exact slack step of the robust ratio problem: with `G` fixed, minimize
/// `||delta||^2` over the trace scale and slacks. Returns
/// `(trace_scale, delta, ||delta||^2)`; the updated iterate is
/// `G * trace_scale`.
///
/// Writing `s = 1/gamma`, each slack is the distance of `c_t s + sigma2` to
/// its interval, so the objective is a convex piecewise quadratic in `s`
/// minimized exactly over its breakpoint grid.
pub fn delta_step(
    g: &HermitianMatrix,
    cons: &LinearMeasurementConstraints,
    fallback_scale: f64,
) -> Result<(f64, Vec<f64>, f64)> {
    cons.validate()?;
    let ConstraintData::Intervals { zeta, xi, sigma2 } = &cons.data else {
        return Err(Error::Domain("slack step requires interval data".into()));
    };
    let c: Vec<f64> = cons
        .vs
        .iter()
        .map(|v| cons.p0 * g.quadratic_form(v).max(0.0))
        .collect();
    let cmax = c.iter().cloned().fold(0.0f64, f64::max);

    let slacks_at = |s: f64| -> Vec<f64> {
        c.iter()
            .zip(zeta.iter().zip(xi))
            .map(|(&ct, (&z, &x))| {
                let y = ct * s + sigma2;
                (z - y).max(y - x).max(0.0)
            })
            .collect()
    };
    let objective_at = |s: f64| slacks_at(s).iter().map(|d| d * d).sum::<f64>();

    if cmax <= 0.0 {
        // The scale does not enter the constraints at all.
        let d = slacks_at(fallback_scale);
        let f = d.iter().map(|x| x * x).sum();
        return Ok((fallback_scale, d, f));
    }

    // Breakpoints where any record's active piece changes.
    let mut bps: Vec<f64> = vec![0.0];
    for t in 0..c.len() {
        if c[t] > 1e-300 {
            for bound in [zeta[t] - sigma2, xi[t] - sigma2] {
                let s = bound / c[t];
                if s > 0.0 && s.is_finite() {
                    bps.push(s);
                }
            }
        }
    }
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bps.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1e-300));
    let sentinel = bps.last().unwrap() * 2.0 + 1.0 / cmax;
    bps.push(sentinel);

    let mut candidates: Vec<f64> = vec![fallback_scale.max(0.0)];
    for window in bps.windows(2) {
        let (a, b) = (window[0], window[1]);
        let mid = 0.5 * (a + b);
        // Active pieces at the midpoint determine the local quadratic.
        let mut qa = 0.0; // s^2 coefficient
        let mut qb = 0.0; // s coefficient
        for t in 0..c.len() {
            let y = c[t] * mid + sigma2;
            if y < zeta[t] {
                qa += c[t] * c[t];
                qb += -2.0 * c[t] * (zeta[t] - sigma2);
            } else if y > xi[t] {
                qa += c[t] * c[t];
                qb += 2.0 * c[t] * (sigma2 - xi[t]);
            }
        }
        candidates.push(a);
        candidates.push(b);
        if qa > 0.0 {
            candidates.push((-qb / (2.0 * qa)).clamp(a, b));
        } else {
            candidates.push(mid);
        }
    }
    let best_f = candidates
        .iter()
        .map(|&s| objective_at(s))
        .fold(f64::INFINITY, f64::min);
    // The optimum may be attained on a whole interval (zero slack region);
    // take the midpoint of the optimal set for a centered, deterministic
    // scale. Convexity makes every point between two optima optimal.
    let near: Vec<f64> = candidates
        .iter()
        .cloned()
        .filter(|&s| objective_at(s) <= best_f + 1e-14 * (1.0 + best_f))
        .collect();
    let s_lo = near.iter().cloned().fold(f64::INFINITY, f64::min);
    let s_hi = near.iter().cloned().fold(0.0f64, f64::max);
    let s_opt = 0.5 * (s_lo + s_hi);
    let f_opt = objective_at(s_opt);
    Ok((s_opt, slacks_at(s_opt), f_opt))
}

/// Options for the projected-gradient robust trace minimizer.
#[derive(Debug, Clone, Copy)]
pub struct RobustTraceMinOptions {
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for RobustTraceMinOptions {
    fn default() -> Self {
        Self {
            max_iters: 4000,
            rel_tol: 1e-11,
        }
    }
}

/// Robust trace minimization: minimize `tr(H) + rho ||delta||^2` over PSD `H`
/// with `delta` the interval violations. Solved as a smooth convex problem in
/// `H` alone (the optimal slack per record is the distance to its interval)
/// by accelerated projected gradient descent.
///
/// Powers are normalized to unit mean internally so the penalty weight keeps
/// a consistent meaning across absolute power scales.
pub fn robust_trace_min(
    cons: &LinearMeasurementConstraints,
    rho: f64,
    opts: RobustTraceMinOptions,
) -> Result<(HermitianMatrix, Vec<f64>)> {
    cons.validate()?;
    let ConstraintData::Intervals { zeta, xi, sigma2 } = &cons.data else {
        return Err(Error::Domain("robust trace-min requires interval data".into()));
    };
    if rho <= 0.0 {
        return Err(Error::Domain("penalty weight must be positive".into()));
    }
    let n = cons.dim();
    let t_p = cons.t_p();
    let mids: Vec<f64> = zeta.iter().zip(xi).map(|(a, b)| 0.5 * (a + b)).collect();
    let s = power_scale(&mids);
    let zeta_n: Vec<f64> = zeta.iter().map(|z| z / s).collect();
    let xi_n: Vec<f64> = xi.iter().map(|x| x / s).collect();
    let sigma2_n = sigma2 / s;

    // Lipschitz constant of the penalty gradient: 2 rho p0^2 lambda_max(sum of
    // lifted outer products) via power iteration on the Gram matrix.
    let gram = {
        let mut wmat = RMat::zeros(n * n, t_p);
        for (t, v) in cons.vs.iter().enumerate() {
            wmat.set_column(t, &(HermitianMatrix::from_outer(v).coords() * cons.p0));
        }
        wmat.transpose() * wmat
    };
    let mut pv = RVec::from_element(t_p, 1.0 / (t_p as f64).sqrt());
    let mut lam = 1.0;
    for _ in 0..80 {
        let next = &gram * &pv;
        lam = next.norm();
        if lam <= 0.0 {
            break;
        }
        pv = next / lam;
    }
    let lip = (2.0 * rho * lam).max(1e-10);
    let step = 1.0 / lip;

    let project = |m: &HermitianMatrix| -> HermitianMatrix {
        let pairs = full_eigen(m);
        let mut acc = HermitianMatrix::zeros(n);
        for p in pairs {
            if p.value > 0.0 {
                acc = acc.add(&HermitianMatrix::from_outer(&p.vector).scale(p.value));
            }
        }
        acc
    };

    let violations = |h: &HermitianMatrix| -> Vec<f64> {
        cons.vs
            .iter()
            .enumerate()
            .map(|(t, v)| {
                let y = cons.p0 * h.quadratic_form(v) + sigma2_n;
                (zeta_n[t] - y).max(y - xi_n[t]).max(0.0)
            })
            .collect()
    };
    let objective = |h: &HermitianMatrix| -> f64 {
        h.trace() + rho * violations(h).iter().map(|d| d * d).sum::<f64>()
    };
    let gradient = |h: &HermitianMatrix| -> HermitianMatrix {
        let mut grad = HermitianMatrix::identity(n);
        for (t, v) in cons.vs.iter().enumerate() {
            let y = cons.p0 * h.quadratic_form(v) + sigma2_n;
            let e = if y < zeta_n[t] {
                y - zeta_n[t]
            } else if y > xi_n[t] {
                y - xi_n[t]
            } else {
                continue;
            };
            grad = grad.add(&HermitianMatrix::from_outer(v).scale(2.0 * rho * e * cons.p0));
        }
        grad
    };

    let mut h = HermitianMatrix::zeros(n);
    let mut h_prev = h.clone();
    let mut t_momentum = 1.0f64;
    let mut f_prev = objective(&h);
    for _ in 0..opts.max_iters {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_momentum * t_momentum).sqrt());
        let beta = (t_momentum - 1.0) / t_next;
        let y = h.add(&h.sub(&h_prev).scale(beta));
        let g = gradient(&y);
        let next = project(&y.sub(&g.scale(step)));
        let f_next = objective(&next);
        // Restart acceleration on objective increase.
        if f_next > f_prev {
            t_momentum = 1.0;
            let g0 = gradient(&h);
            let next0 = project(&h.sub(&g0.scale(step)));
            let f0 = objective(&next0);
            h_prev = h.clone();
            h = next0;
            if (f_prev - f0).abs() <= opts.rel_tol * f_prev.abs().max(1e-300) {
                f_prev = f0;
                break;
            }
            f_prev = f0;
            continue;
        }
        h_prev = h;
        h = next;
        t_momentum = t_next;
        if (f_prev - f_next).abs() <= opts.rel_tol * f_prev.abs().max(1e-300) {
            f_prev = f_next;
            break;
        }
        f_prev = f_next;
    }
    let _ = f_prev;

    let h_out = h.scale(s);
    // Slacks in watt units for the de-normalized iterate.
    let delta: Vec<f64> = cons
        .vs
        .iter()
        .enumerate()
        .map(|(t, v)| {
            let y = cons.p0 * h_out.quadratic_form(v) + sigma2;
            (zeta[t] - y).max(y - xi[t]).max(0.0)
        })
        .collect();
    Ok((h_out, delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::random_reflection;
    use crate::rngutil::{complex_normal, rng_from_seed};

    fn reflections(n_irs: usize, bits: u32, t_p: usize, seed: u64) -> Vec<CVec> {
        let mut rng = rng_from_seed(seed);
        (0..t_p)
            .map(|_| random_reflection(n_irs, bits, &mut rng).entries())
            .collect()
    }

    fn random_channel(n: usize, seed: u64) -> CVec {
        let mut rng = rng_from_seed(seed);
        CVec::from_fn(n, |_, _| complex_normal(&mut rng, 1.0))
    }

    #[test]
    fn trace_min_feasible_point_and_psd() {
        let n = 4;
        let h_true = random_channel(n, 1);
        let truth = HermitianMatrix::from_outer(&h_true);
        let vs = reflections(n - 1, 2, 9, 2);
        let p0 = 1.7;
        let p: Vec<f64> = vs.iter().map(|v| p0 * truth.quadratic_form(v)).collect();
        let cons = LinearMeasurementConstraints {
            vs,
            p0,
            data: ConstraintData::Equalities(p.clone()),
            symmetry: SymmetryClass::Hermitian,
        };
        let h = solve_trace_min(&cons, 1e-9).unwrap();
        // Feasibility.
        for (t, v) in cons.vs.iter().enumerate() {
            let val = p0 * h.quadratic_form(v);
            assert!(
                (val - p[t]).abs() <= 1e-6 * p[t].abs().max(1e-12),
                "t={t}: {val} vs {}",
                p[t]
            );
        }
        // Minimality: no feasible PSD matrix can beat the truth's trace by
        // much, and trace-min must not exceed the feasible truth.
        assert!(h.trace() <= truth.trace() * (1.0 + 1e-6));
        let eigs = full_eigen(&h);
        assert!(eigs.last().unwrap().value >= -1e-8 * h.trace());
    }

    #[test]
    fn trace_min_zero_channel() {
        let n = 4;
        let vs = reflections(n - 1, 1, 6, 3);
        let cons = LinearMeasurementConstraints {
            vs,
            p0: 1.0,
            data: ConstraintData::Equalities(vec![0.0; 6]),
            symmetry: SymmetryClass::Hermitian,
        };
        let h = solve_trace_min(&cons, 1e-9).unwrap();
        assert!(h.frobenius_norm() < 1e-7);
    }

    #[test]
    fn trace_min_detects_inconsistent_duplicate() {
        let n = 3;
        let mut vs = reflections(n - 1, 1, 4, 4);
        vs.push(vs[0].clone());
        let mut p = vec![1.0, 2.0, 3.0, 4.0];
        p.push(p[0] * 2.0); // same reflection, contradictory power
        let cons = LinearMeasurementConstraints {
            vs,
            p0: 1.0,
            data: ConstraintData::Equalities(p),
            symmetry: SymmetryClass::Hermitian,
        };
        assert!(solve_trace_min(&cons, 1e-9).is_err());
    }

    #[test]
    fn ratio_sdp_attains_feasible_truth_bound() {
        let n = 4;
        let h_true = random_channel(n, 5);
        let truth = HermitianMatrix::from_outer(&h_true);
        let vs = reflections(n - 1, 2, 10, 6);
        let p0 = 2.0;
        let p: Vec<f64> = vs.iter().map(|v| p0 * truth.quadratic_form(v)).collect();
        let cons = LinearMeasurementConstraints {
            vs,
            p0,
            data: ConstraintData::Equalities(p.clone()),
            symmetry: SymmetryClass::Hermitian,
        };
        let x = {
            let top = crate::eigen::top_eigenpairs(&truth, 1, Default::default()).unwrap();
            HermitianMatrix::from_outer(&top[0].vector)
        };
        let sol = solve_ratio_sdp(&x, &cons, 1e-9).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        // The normalized truth is feasible with objective 1, so the optimum
        // cannot be below it.
        assert!(
            sol.objective >= 1.0 - 1e-6,
            "objective {} below feasible bound",
            sol.objective
        );
        assert!((sol.g.trace() - 1.0).abs() <= 1e-8);
        // Feasibility of the de-normalized iterate.
        let h = sol.h();
        for (t, v) in cons.vs.iter().enumerate() {
            let val = p0 * h.quadratic_form(v);
            assert!(
                (val - p[t]).abs() <= 1e-5 * p[t].abs().max(1e-12),
                "t={t}: {val} vs {}",
                p[t]
            );
        }
    }

    #[test]
    fn ratio_sdp_frozen_reference_objective() {
        // Hand-built real-symmetric instance solved once with an independent
        // convex solver (CVXPY/Clarabel); objective frozen here.
        //
        //   N = 4, p0 = 1, binary reflections, truth h = [1, -2, 0.5, 1.25],
        //   X = normalized outer product of x = [1, 1, 1, 1]/2.
        let n = 4;
        let signs: [[f64; 4]; 6] = [
            [1.0, 1.0, 1.0, 1.0],
            [1.0, -1.0, 1.0, 1.0],
            [-1.0, 1.0, 1.0, 1.0],
            [1.0, 1.0, -1.0, 1.0],
            [-1.0, -1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0, 1.0],
        ];
        let h = CVec::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(-2.0, 0.0),
            C64::new(0.5, 0.0),
            C64::new(1.25, 0.0),
        ]);
        let truth = HermitianMatrix::from_outer(&h);
        let vs: Vec<CVec> = signs
            .iter()
            .map(|s| CVec::from_fn(n, |i, _| C64::new(s[i], 0.0)))
            .collect();
        let p: Vec<f64> = vs.iter().map(|v| truth.quadratic_form(v)).collect();
        let x_dir = CVec::from_element(n, C64::new(0.5, 0.0));
        let x = HermitianMatrix::from_outer(&x_dir);
        let cons = LinearMeasurementConstraints {
            vs,
            p0: 1.0,
            data: ConstraintData::Equalities(p),
            symmetry: SymmetryClass::RealSymmetric,
        };
        let sol = solve_ratio_sdp(&x, &cons, 1e-9).unwrap();
        // CVXPY (SCS, eps 1e-12) objective for this exact instance:
        let reference = 0.020642201834904735f64;
        assert!(
            (sol.objective - reference).abs() <= 1e-5 * reference.abs(),
            "objective {} vs reference {reference}",
            sol.objective
        );
    }

    #[test]
    fn robust_gstep_zero_width_matches_ratio_sdp() {
        let n = 4;
        let h_true = random_channel(n, 8);
        let truth = HermitianMatrix::from_outer(&h_true);
        let vs = reflections(n - 1, 2, 9, 9);
        let p0 = 1.0;
        let p: Vec<f64> = vs.iter().map(|v| p0 * truth.quadratic_form(v)).collect();
        let x = {
            let top = crate::eigen::top_eigenpairs(&truth, 1, Default::default()).unwrap();
            HermitianMatrix::from_outer(&top[0].vector)
        };
        let eq = LinearMeasurementConstraints {
            vs: vs.clone(),
            p0,
            data: ConstraintData::Equalities(p.clone()),
            symmetry: SymmetryClass::Hermitian,
        };
        let iv = LinearMeasurementConstraints {
            vs,
            p0,
            data: ConstraintData::Intervals {
                zeta: p.clone(),
                xi: p.clone(),
                sigma2: 0.0,
            },
            symmetry: SymmetryClass::Hermitian,
        };
        let a = solve_ratio_sdp(&x, &eq, 1e-9).unwrap();
        let b = solve_robust_ratio_gstep(&x, &iv, &vec![0.0; 9], 1e-9).unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-6);
    }

    #[test]
    fn robust_gstep_feasible_truth_bound_with_slack() {
        let n = 4;
        let h_true = random_channel(n, 10);
        let truth = HermitianMatrix::from_outer(&h_true);
        let vs = reflections(n - 1, 1, 8, 11);
        let p0 = 1.0;
        let sigma2 = 0.05;
        let p: Vec<f64> = vs.iter().map(|v| p0 * truth.quadratic_form(v)).collect();
        // Intervals of +-10% around the noisy-shifted powers.
        let zeta: Vec<f64> = p.iter().map(|x| (x + sigma2) * 0.9).collect();
        let xi: Vec<f64> = p.iter().map(|x| (x + sigma2) * 1.1).collect();
        let truth_r = truth.real_part();
        let x = {
            let pairs = crate::eigen::top_eigenpairs(&truth_r, 2, Default::default()).unwrap();
            HermitianMatrix::from_outer(&pairs[0].vector)
                .add(&HermitianMatrix::from_outer(&pairs[1].vector))
        };
        let cons = LinearMeasurementConstraints {
            vs,
            p0,
            data: ConstraintData::Intervals { zeta, xi, sigma2 },
            symmetry: SymmetryClass::RealSymmetric,
        };
        let sol = solve_robust_ratio_gstep(&x, &cons, &vec![0.0; 8], 1e-9).unwrap();
        // truth_r / tr is feasible (its powers sit inside the intervals), and
        // its objective under X is the generalized ratio of truth_r.
        let feasible_obj = truth_r.inner(&x) / truth_r.trace();
        assert!(
            sol.objective >= feasible_obj - 1e-6,
            "{} < {}",
            sol.objective,
            feasible_obj
        );
    }

    #[test]
    fn delta_step_zero_when_g_feasible() {
        let n = 4;
        let h_true = random_channel(n, 12);
        let truth = HermitianMatrix::from_outer(&h_true);
        let vs = reflections(n - 1, 2, 7, 13);
        let p0 = 1.0;
        let sigma2 = 0.01;
        let p: Vec<f64> = vs.iter().map(|v| p0 * truth.quadratic_form(v)).collect();
        let zeta: Vec<f64> = p.iter().map(|x| (x + sigma2) * 0.8).collect();
        let xi: Vec<f64> = p.iter().map(|x| (x + sigma2) * 1.2).collect();
        let cons = LinearMeasurementConstraints {
            vs,
            p0,
            data: ConstraintData::Intervals { zeta, xi, sigma2 },
            symmetry: SymmetryClass::Hermitian,
        };
        let g = truth.scale(1.0 / truth.trace());
        let (scale, delta, f) = delta_step(&g, &cons, 1.0).unwrap();
        assert!(f <= 1e-20, "objective {f}");
        assert!(delta.iter().all(|&d| d <= 1e-10));
        // The recovered scale puts every power inside its interval.
        for (t, v) in cons.vs.iter().enumerate() {
            let y = p0 * g.quadratic_form(v) * scale + sigma2;
            let (z, x) = match &cons.data {
                ConstraintData::Intervals { zeta, xi, .. } => (zeta[t], xi[t]),
                _ => unreachable!(),
            };
            assert!(z - 1e-12 <= y && y <= x + 1e-12, "t={t}: {y} not in [{z},{x}]");
        }
    }

    #[test]
    fn delta_step_matches_grid_search() {
        let n = 4;
        let h_true = random_channel(n, 14);
        let truth = HermitianMatrix::from_outer(&h_true);
        let vs = reflections(n - 1, 1, 6, 15);
        let p0 = 1.0;
        let sigma2 = 0.02;
        let p: Vec<f64> = vs.iter().map(|v| p0 * truth.quadratic_form(v)).collect();
        // Narrow, randomly offset intervals so slack is necessary.
        let mut rng = rng_from_seed(16);
        use rand::Rng as _;
        let zeta: Vec<f64> = p
            .iter()
            .map(|x| (x + sigma2) * rng.gen_range(0.95..1.05))
            .collect();
        let xi: Vec<f64> = zeta.iter().map(|z| z * 1.02).collect();
        let cons = LinearMeasurementConstraints {
            vs,
            p0,
            data: ConstraintData::Intervals { zeta, xi, sigma2 },
            symmetry: SymmetryClass::RealSymmetric,
        };
        let g = truth.real_part().scale(1.0 / truth.trace());
        let (_, _, f) = delta_step(&g, &cons, 1.0).unwrap();
        // Dense grid oracle.
        let mut best = f64::INFINITY;
        for i in 0..200_000 {
            let s = i as f64 * 1e-4;
            let mut acc = 0.0;
            for (t, v) in cons.vs.iter().enumerate() {
                let y = p0 * g.quadratic_form(v) * s + sigma2;
                let (z, x) = match &cons.data {
                    ConstraintData::Intervals { zeta, xi, .. } => (zeta[t], xi[t]),
                    _ => unreachable!(),
                };
                let d = (z - y).max(y - x).max(0.0);
                acc += d * d;
            }
            best = best.min(acc);
        }
        assert!(
            f <= best + 1e-12,
            "closed form {f} worse than grid oracle {best}"
        );
    }

    #[test]
    fn robust_trace_min_no_slack_needed() {
        // Realistic watt-scale channel: the trace/penalty trade-off leaves a
        // slack that is physically negligible.
        let n = 4;
        let h_true = random_channel(n, 17) * C64::new(3e-5, 0.0);
        let truth = HermitianMatrix::from_outer(&h_true);
        let vs = reflections(n - 1, 1, 8, 18);
        let p0 = 1.0;
        let sigma2 = 1e-12;
        let p: Vec<f64> = vs.iter().map(|v| p0 * truth.quadratic_form(v)).collect();
        let zeta: Vec<f64> = p.iter().map(|x| (x + sigma2) * 0.7).collect();
        let xi: Vec<f64> = p.iter().map(|x| (x + sigma2) * 1.3).collect();
        let cons = LinearMeasurementConstraints {
            vs,
            p0,
            data: ConstraintData::Intervals { zeta, xi, sigma2 },
            symmetry: SymmetryClass::RealSymmetric,
        };
        let (h, delta) = robust_trace_min(&cons, 10.0, Default::default()).unwrap();
        let dn = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        assert!(dn <= 1e-6, "residual slack {dn}");
        assert!(h.trace() >= 0.0);
        let eigs = full_eigen(&h);
        assert!(eigs.last().unwrap().value >= -1e-9 * h.trace().max(1e-12));
    }

    #[test]
    fn schur_combo_path_matches_dense() {
        // Same constraint expressed as a pooled combo vs dense must produce
        // the same Schur entries.
        let n = 3;
        let v1 = random_channel(n, 19);
        let v2 = random_channel(n, 20);
        let (s1, s2) = (1.3, -0.4);
        let dense = {
            let m = HermitianMatrix::from_outer(&v1)
                .scale(s1)
                .add(&HermitianMatrix::from_outer(&v2).scale(s2));
            PsdCoeff::Dense(m.matrix().clone())
        };
        let combo = PsdCoeff::Combo(vec![(0, s1), (1, s2)]);
        let mk = |psd: PsdCoeff| ConeProblem {
            n,
            num_scalars: 0,
            pool: vec![v1.clone(), v2.clone()],
            objective_psd: PsdCoeff::Identity(1.0),
            objective_scalars: vec![],
            constraints: vec![
                Constraint {
                    psd,
                    scalars: vec![],
                    rhs: 1.0,
                },
                Constraint {
                    psd: PsdCoeff::Identity(1.0),
                    scalars: vec![],
                    rhs: 1.0,
                },
            ],
        };
        // A generic PD scaling point (from a strictly interior X, Z pair).
        let mut xm = CMat::identity(n, n) * C64::new(1.4, 0.0);
        let v3 = random_channel(n, 21);
        for c in 0..n {
            for r in 0..n {
                xm[(r, c)] += v3[r] * v3[c].conj() * C64::new(0.3, 0.0);
            }
        }
        let z = CMat::identity(n, n) * C64::new(0.7, 0.0);
        let scaling = nt_scaling(&xm, &z, &[], &[]);
        let m1 = assemble_schur(&mk(combo), &scaling);
        let m2 = assemble_schur(&mk(dense), &scaling);
        assert!((&m1 - &m2).norm() <= 1e-10 * m1.norm());
    }
}
