//! Channel autocorrelation estimators.
//!
//! Two algorithm families recover the rank-one (binary phases: rank-two real)
//! autocorrelation matrix from power measurements:
//!
//! * the rank-approaching family (`lra`, `robust_lra`) alternates a top
//!   eigenvector step with a fractional semidefinite program, driving the
//!   eigenvalue ratio toward 1;
//! * the distance-minimizing family (`alra`, `robust_alra`) replaces the
//!   cone program with a closed-form least-squares update in the vectorized
//!   Hermitian space.
//!
//! The robust variants consume interval-valued (quantized) or noisy
//! measurements, debias by the noise power, and carry a slack vector for
//! interval violations. The trace-minimization baseline is also provided.

use std::time::Instant;

use serde::Serialize;

use crate::conic::{
    delta_step, robust_trace_min, solve_ratio_sdp, solve_robust_ratio_gstep, solve_trace_min,
    ConstraintData, LinearMeasurementConstraints, RobustTraceMinOptions, SolveStatus,
    SymmetryClass,
};
use crate::eigen::{full_eigen, top_eigenpairs, EigenOptions};
use crate::error::{Error, Result};
use crate::hermitian::{matrix_rank, HermitianMatrix};
use crate::measurement::{MeasurementSet, PowerRecords};
use crate::{CVec, RMat, RVec};

/// Outcome of one estimation run.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    /// Estimated autocorrelation matrix (real symmetric for binary phases).
    pub estimate: HermitianMatrix,
    /// Number of iterate updates performed.
    pub iterations: usize,
    /// Eigenvalue-ratio values per iterate (rank-approaching family).
    pub ratio_trace: Vec<f64>,
    /// Euclidean / penalized distance values per iterate (distance family).
    pub distance_trace: Vec<f64>,
    /// Whether the stopping criterion (rather than the iteration cap) fired.
    pub converged: bool,
    /// Wall-clock duration of the run in seconds.
    pub wall_time: f64,
    /// Index (into the iterate sequence) of the returned estimate.
    pub best_iteration: usize,
    /// Final iterate before the positive-semidefinite repair (distance
    /// family only; the rank-approaching iterates live in the cone already).
    pub raw_estimate: Option<HermitianMatrix>,
    /// Diagnostics such as pseudo-inverse fallbacks.
    pub notes: Vec<String>,
}

/// JSON-serializable summary of a run.
#[derive(Debug, Clone, Serialize)]
pub struct EstimationReport {
    pub algorithm: String,
    pub parameters: serde_json::Value,
    pub iterations: usize,
    pub ratio_trace: Vec<f64>,
    pub distance_trace: Vec<f64>,
    pub converged: bool,
    pub wall_time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nmse: Option<f64>,
}

impl EstimationResult {
    pub fn report(
        &self,
        algorithm: &str,
        parameters: serde_json::Value,
        truth: Option<&HermitianMatrix>,
    ) -> EstimationReport {
        EstimationReport {
            algorithm: algorithm.to_string(),
            parameters,
            iterations: self.iterations,
            ratio_trace: self.ratio_trace.clone(),
            distance_trace: self.distance_trace.clone(),
            converged: self.converged,
            wall_time: self.wall_time,
            nmse: truth.map(|t| nmse(&self.estimate, t).unwrap_or(f64::NAN)),
        }
    }
}

/// Options for the rank-approaching estimators.
#[derive(Debug, Clone, Copy)]
pub struct LraOptions {
    /// Eigenvalue-ratio stopping threshold.
    pub epsilon: f64,
    /// Iteration cap.
    pub max_iters: usize,
    /// Cone-solver tolerance.
    pub solver_tol: f64,
    /// Stop when the ratio improves less than this for three consecutive
    /// iterations (robust runs may plateau below `epsilon`).
    pub ratio_stall_tol: f64,
}

impl Default for LraOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.95,
            max_iters: 100,
            solver_tol: 1e-8,
            ratio_stall_tol: 1e-7,
        }
    }
}

/// Options for the distance-minimizing estimators.
#[derive(Debug, Clone, Copy)]
pub struct AlraOptions {
    pub max_iters: usize,
    /// Stop when the relative decrease of the (penalized) distance falls
    /// below this.
    pub stall_tol: f64,
}

impl Default for AlraOptions {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            stall_tol: 1e-8,
        }
    }
}

fn rank_target(bits: u32) -> usize {
    if bits == 1 {
        2
    } else {
        1
    }
}

fn symmetry_of(bits: u32) -> SymmetryClass {
    if bits == 1 {
        SymmetryClass::RealSymmetric
    } else {
        SymmetryClass::Hermitian
    }
}

fn check_bits(ms: &MeasurementSet, bits: u32) -> Result<()> {
    if ms.bits() != bits {
        return Err(Error::Domain(format!(
            "measurement set carries {}-bit reflections, estimator configured for {bits}",
            ms.bits()
        )));
    }
    Ok(())
}

fn reflection_vectors(ms: &MeasurementSet) -> Vec<CVec> {
    ms.reflections.iter().map(|r| r.entries()).collect()
}

/// Eigen step shared by all estimators: top-k pairs plus the rank-k
/// alignment target.
fn eigen_step(h: &HermitianMatrix, k: usize) -> Result<(Vec<f64>, HermitianMatrix)> {
    let pairs = top_eigenpairs(h, k, EigenOptions::default())?;
    let mut x = HermitianMatrix::zeros(h.dim());
    for p in &pairs {
        x = x.add(&HermitianMatrix::from_outer(&p.vector));
    }
    Ok((pairs.iter().map(|p| p.value).collect(), x))
}

/// Clip negative eigenvalues to zero (final-output repair for the distance
/// family, whose iterates are not constrained to the cone).
pub fn psd_repair(h: &HermitianMatrix) -> HermitianMatrix {
    let pairs = full_eigen(h);
    if pairs.iter().all(|p| p.value >= 0.0) {
        return h.clone();
    }
    let mut acc = HermitianMatrix::zeros(h.dim());
    for p in pairs {
        if p.value > 0.0 {
            acc = acc.add(&HermitianMatrix::from_outer(&p.vector).scale(p.value));
        }
    }
    acc
}

fn finalize_class(h: HermitianMatrix, bits: u32) -> HermitianMatrix {
    if bits == 1 {
        h.real_part()
    } else {
        h
    }
}

fn zero_result(n: usize, start: Instant) -> EstimationResult {
    EstimationResult {
        estimate: HermitianMatrix::zeros(n),
        iterations: 0,
        ratio_trace: Vec::new(),
        distance_trace: Vec::new(),
        converged: true,
        wall_time: start.elapsed().as_secs_f64(),
        best_iteration: 0,
        raw_estimate: None,
        notes: vec!["all-zero measurements: zero estimate".into()],
    }
}

/// Rank-approaching estimation on exact power measurements.
pub fn lra_estimate(ms: &MeasurementSet, bits: u32, opts: LraOptions) -> Result<EstimationResult> {
    lra_estimate_with_init(ms, bits, opts, None)
}

/// [`lra_estimate`] with an explicit initial iterate (defaults to the
/// trace-minimization solution).
pub fn lra_estimate_with_init(
    ms: &MeasurementSet,
    bits: u32,
    opts: LraOptions,
    init: Option<HermitianMatrix>,
) -> Result<EstimationResult> {
    let start = Instant::now();
    ms.validate()?;
    check_bits(ms, bits)?;
    let PowerRecords::Exact(p) = &ms.records else {
        return Err(Error::Domain(
            "lra_estimate requires exact measurements; use robust_lra_estimate".into(),
        ));
    };
    let n = ms.dim();
    if p.iter().all(|&x| x == 0.0) {
        return Ok(zero_result(n, start));
    }

    let cons = LinearMeasurementConstraints {
        vs: reflection_vectors(ms),
        p0: ms.p0,
        data: ConstraintData::Equalities(p.clone()),
        symmetry: symmetry_of(bits),
    };
    let k = rank_target(bits);

    let mut h = match init {
        Some(h0) => h0,
        None => solve_trace_min(&cons, opts.solver_tol)?,
    };
    let mut ratio_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0usize;

    for i in 0..=opts.max_iters {
        if h.trace() <= 0.0 {
            break;
        }
        let (values, x) = eigen_step(&h, k).map_err(|e| Error::Estimation {
            iteration: i,
            source: Box::new(e),
        })?;
        let ratio = (values.iter().sum::<f64>() / h.trace()).min(1.0);
        ratio_trace.push(ratio);
        if ratio > opts.epsilon {
            converged = true;
            break;
        }
        if i == opts.max_iters {
            break;
        }
        let sol =
            solve_ratio_sdp(&x, &cons, opts.solver_tol).map_err(|e| Error::Estimation {
                iteration: i,
                source: Box::new(e),
            })?;
        if sol.status == SolveStatus::Infeasible {
            return Err(Error::Estimation {
                iteration: i,
                source: Box::new(Error::SolverFailure {
                    status: sol.status.to_string(),
                    primal: sol.residuals.primal,
                    dual: sol.residuals.dual,
                    gap: sol.residuals.gap,
                }),
            });
        }
        h = sol.h();
        iterations += 1;
    }

    let best_iteration = iterations;
    Ok(EstimationResult {
        estimate: finalize_class(h, bits),
        iterations,
        ratio_trace,
        distance_trace: Vec::new(),
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        best_iteration,
        raw_estimate: None,
        notes: Vec::new(),
    })
}

/// Least-squares machinery over the design matrix column space, built once
/// per estimation run via a thin SVD (which doubles as the pseudo-inverse
/// path when the design matrix is rank deficient).
struct DesignSpace {
    /// Orthonormal basis of the column space of C, as rows of coordinates.
    u_r: RMat,
    /// Minimum-norm solution of `C^T w = p`.
    w0: RVec,
    rank: usize,
    t_p: usize,
}

impl DesignSpace {
    fn build(c: &RMat, p: &RVec) -> Result<(Self, Vec<String>)> {
        let mut notes = Vec::new();
        let t_p = c.ncols();
        let svd = c.clone().svd(true, true);
        let smax = svd
            .singular_values
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        let tol = 1e-10 * smax;
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        if rank == 0 {
            return Err(Error::Domain("design matrix is zero".into()));
        }
        if rank < t_p {
            notes.push(format!(
                "design matrix rank {rank} < T_p {t_p}: pseudo-inverse path"
            ));
        }
        let u = svd.u.as_ref().expect("svd u");
        let vt = svd.v_t.as_ref().expect("svd v_t");
        let mut u_r = RMat::zeros(c.nrows(), rank);
        let mut w0 = RVec::zeros(c.nrows());
        let mut col = 0;
        for i in 0..svd.singular_values.len() {
            if svd.singular_values[i] > tol {
                u_r.set_column(col, &u.column(i).into_owned());
                let coef = vt.row(i).transpose().dot(p) / svd.singular_values[i];
                w0 += u.column(i) * coef;
                col += 1;
            }
        }
        Ok((
            Self {
                u_r,
                w0,
                rank,
                t_p,
            },
            notes,
        ))
    }

    /// Projection onto the column space.
    fn project(&self, w: &RVec) -> RVec {
        &self.u_r * (self.u_r.transpose() * w)
    }
}

/// Distance-minimizing estimation on exact power measurements.
///
/// Each iteration solves the constrained alignment problem in closed form:
/// the minimum-norm feasible point plus the null-space component of the
/// scaled alignment target.
pub fn alra_estimate(
    ms: &MeasurementSet,
    bits: u32,
    opts: AlraOptions,
) -> Result<EstimationResult> {
    let start = Instant::now();
    ms.validate()?;
    check_bits(ms, bits)?;
    let PowerRecords::Exact(p) = &ms.records else {
        return Err(Error::Domain(
            "alra_estimate requires exact measurements; use robust_alra_estimate".into(),
        ));
    };
    let n = ms.dim();
    if p.iter().all(|&x| x == 0.0) {
        return Ok(zero_result(n, start));
    }
    let k = rank_target(bits);

    let c = crate::measurement::build_design_matrix(&ms.reflections, ms.p0)?;
    let pvec = RVec::from_vec(p.clone());
    let (space, mut notes) = DesignSpace::build(&c, &pvec)?;
    // Exact measurements must be consistent with the design span.
    let residual = (c.transpose() * &space.w0 - &pvec).norm();
    if residual > 1e-8 * pvec.norm().max(1e-300) {
        notes.push(format!(
            "inconsistent powers: least-squares residual {residual:.3e}"
        ));
    }

    let mut w = space.w0.clone();
    let mut distance_trace = vec![w.norm()]; // iteration 0: X = 0
    let mut converged = false;
    let mut iterations = 0usize;

    for i in 1..=opts.max_iters {
        let h = HermitianMatrix::from_coords(n, w.clone())?;
        let (values, _) = eigen_step(&h, k).map_err(|e| Error::Estimation {
            iteration: i,
            source: Box::new(e),
        })?;
        let _ = values;
        let pairs = top_eigenpairs(&h, k, EigenOptions::default())?;
        // Alignment targets: separate rank-one coordinates per eigenvector.
        let w_xs: Vec<RVec> = pairs
            .iter()
            .map(|pr| HermitianMatrix::from_outer(&pr.vector).coords().clone())
            .collect();

        // mu* solves the projected least-squares fit; w* adds the null-space
        // part of the scaled target to the minimum-norm solution.
        let (w_new, target): (RVec, RVec) = if k == 1 {
            let wx = &w_xs[0];
            let px = space.project(wx);
            let denom = wx.dot(&px);
            let mu = if denom > 1e-14 * wx.norm_squared() {
                wx.dot(&space.w0) / denom
            } else {
                0.0
            };
            (&space.w0 + (wx - &px) * mu, wx * mu)
        } else {
            let px: Vec<RVec> = w_xs.iter().map(|wx| space.project(wx)).collect();
            let mut a2 = nalgebra::Matrix2::<f64>::zeros();
            let mut b2 = nalgebra::Vector2::<f64>::zeros();
            for r in 0..2 {
                for cc in 0..2 {
                    a2[(r, cc)] = w_xs[r].dot(&px[cc]);
                }
                b2[r] = w_xs[r].dot(&space.w0);
            }
            let mu = pinv2(&a2) * b2;
            let mut w_new = space.w0.clone();
            let mut target = RVec::zeros(n * n);
            for j in 0..2 {
                w_new += (&w_xs[j] - &px[j]) * mu[j];
                target += &w_xs[j] * mu[j];
            }
            (w_new, target)
        };

        let dist = (&w_new - &target).norm();
        let prev = *distance_trace.last().unwrap();
        distance_trace.push(dist);
        w = w_new;
        iterations = i;
        if prev > 0.0 && (prev - dist) < opts.stall_tol * prev {
            converged = true;
            break;
        }
    }

    let h = HermitianMatrix::from_coords(n, w)?;
    let estimate = finalize_class(psd_repair(&h), bits);
    Ok(EstimationResult {
        estimate,
        iterations,
        ratio_trace: Vec::new(),
        distance_trace,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        best_iteration: iterations,
        raw_estimate: Some(finalize_class(h, bits)),
        notes,
    })
}

/// 2x2 symmetric pseudo-inverse with relative eigenvalue threshold.
fn pinv2(a: &nalgebra::Matrix2<f64>) -> nalgebra::Matrix2<f64> {
    let se = a.symmetric_eigen();
    let emax = se.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let mut inv = nalgebra::Matrix2::<f64>::zeros();
    if emax <= 0.0 {
        return inv;
    }
    for i in 0..2 {
        let ev = se.eigenvalues[i];
        if ev > 1e-12 * emax {
            let v = se.eigenvectors.column(i);
            inv += v * v.transpose() / ev;
        }
    }
    inv
}

/// Zero-noise measurement sets whose intervals all have zero width are
/// equivalent to exact sets.
fn as_exact_degenerate(ms: &MeasurementSet) -> Option<MeasurementSet> {
    if ms.sigma2 != 0.0 {
        return None;
    }
    let (zeta, xi) = ms.intervals();
    if zeta.iter().zip(&xi).any(|(z, x)| z != x) {
        return None;
    }
    Some(MeasurementSet {
        reflections: ms.reflections.clone(),
        records: PowerRecords::Exact(zeta),
        p0: ms.p0,
        sigma2: 0.0,
    })
}

fn interval_constraints(ms: &MeasurementSet, bits: u32) -> LinearMeasurementConstraints {
    let (zeta, xi) = ms.intervals();
    LinearMeasurementConstraints {
        vs: reflection_vectors(ms),
        p0: ms.p0,
        data: ConstraintData::Intervals {
            zeta,
            xi,
            sigma2: ms.sigma2,
        },
        symmetry: symmetry_of(bits),
    }
}

/// Robust rank-approaching estimation on noisy or quantized measurements.
///
/// Alternates the eigen step with a two-phase solve: the semidefinite step
/// maximizes alignment with the slack vector fixed, then the slack step
/// re-minimizes the interval violations with the matrix fixed. Noisy (but
/// unquantized) records enter as zero-width intervals. Returns the iterate
/// with the best eigenvalue ratio.
pub fn robust_lra_estimate(
    ms: &MeasurementSet,
    bits: u32,
    rho: f64,
    opts: LraOptions,
) -> Result<EstimationResult> {
    let start = Instant::now();
    ms.validate()?;
    check_bits(ms, bits)?;
    if matches!(ms.records, PowerRecords::Exact(_)) && ms.sigma2 > 0.0 {
        return Err(Error::Domain(
            "exact records with nonzero noise power are contradictory".into(),
        ));
    }
    // Zero noise and zero-width intervals carry no uncertainty at all: the
    // problem degenerates to the exact one.
    if let Some(exact) = as_exact_degenerate(ms) {
        return lra_estimate(&exact, bits, opts);
    }
    let n = ms.dim();
    let k = rank_target(bits);
    let cons = interval_constraints(ms, bits);

    let (h0, delta0) = robust_trace_min(&cons, rho, RobustTraceMinOptions::default())?;
    let mut h = h0;
    let mut delta = delta0;
    if h.trace() <= 0.0 {
        // Degenerate initializer; start from the centered matrix instead.
        h = HermitianMatrix::identity(n).scale(1.0 / n as f64);
        let (_, d, _) = delta_step(&h, &cons, 1.0)?;
        delta = d;
    }

    let mut ratio_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0usize;
    let mut best: (f64, HermitianMatrix, usize) = (f64::NEG_INFINITY, h.clone(), 0);
    let mut stall = 0usize;

    for i in 0..=opts.max_iters {
        let (values, x) = eigen_step(&h, k).map_err(|e| Error::Estimation {
            iteration: i,
            source: Box::new(e),
        })?;
        let ratio = (values.iter().sum::<f64>() / h.trace().max(1e-300)).min(1.0);
        let improvement = ratio - best.0;
        if ratio > best.0 {
            best = (ratio, h.clone(), i);
        }
        ratio_trace.push(ratio);
        if ratio > opts.epsilon {
            converged = true;
            break;
        }
        if i == opts.max_iters {
            break;
        }
        if i > 0 && improvement < opts.ratio_stall_tol {
            stall += 1;
            if stall >= 3 {
                break;
            }
        } else {
            stall = 0;
        }

        let gsol = solve_robust_ratio_gstep(&x, &cons, &delta, opts.solver_tol).map_err(|e| {
            Error::Estimation {
                iteration: i,
                source: Box::new(e),
            }
        })?;
        let (scale, delta_new, _) = delta_step(&gsol.g, &cons, h.trace().max(1e-300))?;
        h = gsol.g.scale(scale.max(1e-300));
        delta = delta_new;
        iterations += 1;
    }

    Ok(EstimationResult {
        estimate: finalize_class(best.1, bits),
        iterations,
        ratio_trace,
        distance_trace: Vec::new(),
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        best_iteration: best.2,
        raw_estimate: None,
        notes: Vec::new(),
    })
}

/// Robust distance-minimizing estimation on noisy or quantized measurements.
///
/// Fits interval midpoints with a quadratic penalty; the per-iteration update
/// is closed form through the regularized normal matrix, applied via the
/// low-rank identity `(I + rho C C^T)^{-1} = I - C (rho^{-1} I + C^T C)^{-1} C^T`
/// so the cost stays `O(N^2 T_p)`.
pub fn robust_alra_estimate(
    ms: &MeasurementSet,
    bits: u32,
    rho: f64,
    opts: AlraOptions,
) -> Result<EstimationResult> {
    let start = Instant::now();
    ms.validate()?;
    check_bits(ms, bits)?;
    if rho <= 0.0 {
        return Err(Error::Domain("penalty weight must be positive".into()));
    }
    if let Some(exact) = as_exact_degenerate(ms) {
        return alra_estimate(&exact, bits, opts);
    }
    let n = ms.dim();
    let k = rank_target(bits);
    let t_p = ms.len();

    let c = crate::measurement::build_design_matrix(&ms.reflections, ms.p0)?;
    let q_hat = RVec::from_vec(ms.power_surrogate());
    let r = q_hat.map(|q| q - ms.sigma2);

    // S = (rho^{-1} I + C^T C)^{-1}, factored once.
    let mut big = c.transpose() * &c;
    for i in 0..t_p {
        big[(i, i)] += 1.0 / rho;
    }
    let eigs = big.clone().symmetric_eigen().eigenvalues;
    let emax = eigs.iter().cloned().fold(0.0f64, f64::max);
    let emin = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    if emin <= 0.0 || emax / emin > 1e12 {
        return Err(Error::IllConditioned(format!(
            "regularized normal matrix condition {:.3e}; reduce rho or T_p",
            emax / emin.max(1e-300)
        )));
    }
    let chol = nalgebra::Cholesky::new(big).ok_or_else(|| {
        Error::IllConditioned("regularized normal matrix not positive definite".into())
    })?;
    let upsilon = |y: &RVec| -> RVec { y - &c * chol.solve(&(c.transpose() * y)) };

    let w_base = upsilon(&(&c * &r)) * rho;
    let phi = |w: &RVec, target: &RVec| -> f64 {
        (w - target).norm_squared() + rho * (c.transpose() * w - &r).norm_squared()
    };

    let mut w = w_base.clone();
    let mut distance_trace = vec![phi(&w, &RVec::zeros(n * n))];
    let mut converged = false;
    let mut iterations = 0usize;

    for i in 1..=opts.max_iters {
        let h = HermitianMatrix::from_coords(n, w.clone())?;
        let pairs = top_eigenpairs(&h, k, EigenOptions::default()).map_err(|e| {
            Error::Estimation {
                iteration: i,
                source: Box::new(e),
            }
        })?;
        let w_xs: Vec<RVec> = pairs
            .iter()
            .map(|pr| HermitianMatrix::from_outer(&pr.vector).coords().clone())
            .collect();
        let a: Vec<RVec> = w_xs.iter().map(|wx| upsilon(wx)).collect();

        // Exact joint minimizer over (w, mu): stationarity in w gives
        // w = Upsilon (mu . w_X) + w_base; stationarity in mu gives the
        // normal system over w_X^T (I - Upsilon) w_X.
        let (w_new, target): (RVec, RVec) = if k == 1 {
            let denom = w_xs[0].dot(&w_xs[0]) - w_xs[0].dot(&a[0]);
            let mu = if denom > 1e-14 * w_xs[0].norm_squared() {
                w_xs[0].dot(&w_base) / denom
            } else {
                0.0
            };
            (&w_base + &a[0] * mu, &w_xs[0] * mu)
        } else {
            let mut a2 = nalgebra::Matrix2::<f64>::zeros();
            let mut b2 = nalgebra::Vector2::<f64>::zeros();
            for rr in 0..2 {
                for cc in 0..2 {
                    a2[(rr, cc)] = w_xs[rr].dot(&w_xs[cc]) - w_xs[rr].dot(&a[cc]);
                }
                b2[rr] = w_xs[rr].dot(&w_base);
            }
            let mu = pinv2(&a2) * b2;
            let mut w_new = w_base.clone();
            let mut target = RVec::zeros(n * n);
            for j in 0..2 {
                w_new += &a[j] * mu[j];
                target += &w_xs[j] * mu[j];
            }
            (w_new, target)
        };

        let val = phi(&w_new, &target);
        let prev = *distance_trace.last().unwrap();
        distance_trace.push(val);
        w = w_new;
        iterations = i;
        if prev > 0.0 && (prev - val) < opts.stall_tol * prev {
            converged = true;
            break;
        }
    }

    let h = HermitianMatrix::from_coords(n, w)?;
    let estimate = finalize_class(psd_repair(&h), bits);
    Ok(EstimationResult {
        estimate,
        iterations,
        ratio_trace: Vec::new(),
        distance_trace,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        best_iteration: iterations,
        raw_estimate: Some(finalize_class(h, bits)),
        notes: Vec::new(),
    })
}

/// Trace-minimization baseline: a single convex solve, no rank shaping.
/// Exact sets use the equality form; noisy/quantized sets the penalized
/// interval form with weight `rho`.
pub fn tracemin_baseline(
    ms: &MeasurementSet,
    bits: u32,
    rho: Option<f64>,
) -> Result<EstimationResult> {
    let start = Instant::now();
    ms.validate()?;
    check_bits(ms, bits)?;
    let n = ms.dim();
    let k = rank_target(bits);

    let h = match &ms.records {
        PowerRecords::Exact(p) => {
            if p.iter().all(|&x| x == 0.0) {
                return Ok(zero_result(n, start));
            }
            let cons = LinearMeasurementConstraints {
                vs: reflection_vectors(ms),
                p0: ms.p0,
                data: ConstraintData::Equalities(p.clone()),
                symmetry: symmetry_of(bits),
            };
            solve_trace_min(&cons, 1e-8)?
        }
        _ => {
            let cons = interval_constraints(ms, bits);
            let (h, _delta) =
                robust_trace_min(&cons, rho.unwrap_or(10.0), RobustTraceMinOptions::default())?;
            h
        }
    };

    let ratio_trace = if h.trace() > 0.0 {
        let pairs = top_eigenpairs(&h, k, EigenOptions::default())?;
        vec![(pairs.iter().map(|p| p.value).sum::<f64>() / h.trace()).min(1.0)]
    } else {
        Vec::new()
    };

    Ok(EstimationResult {
        estimate: finalize_class(psd_repair(&h), bits),
        iterations: 1,
        ratio_trace,
        distance_trace: Vec::new(),
        converged: true,
        wall_time: start.elapsed().as_secs_f64(),
        best_iteration: 0,
        raw_estimate: None,
        notes: Vec::new(),
    })
}

/// Normalized squared Frobenius estimation error.
pub fn nmse(estimate: &HermitianMatrix, truth: &HermitianMatrix) -> Result<f64> {
    if estimate.dim() != truth.dim() {
        return Err(Error::Dimension("nmse dimension mismatch".into()));
    }
    let denom = truth.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::Domain("nmse undefined for zero truth".into()));
    }
    let diff = estimate.sub(truth).frobenius_norm();
    Ok((diff / denom).powi(2))
}

/// Design-matrix rank of a measurement set (diagnostic).
pub fn design_rank(ms: &MeasurementSet) -> Result<usize> {
    let c = crate::measurement::build_design_matrix(&ms.reflections, ms.p0)?;
    Ok(matrix_rank(&c, 1e-10))
}
