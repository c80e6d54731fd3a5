//! Top eigenpairs of Hermitian matrices and the eigenvalue-ratio functions.
//!
//! The estimators only ever need the one or two algebraically largest
//! eigenpairs, so the primary path is shifted power iteration with deflation;
//! a full self-adjoint eigendecomposition is the fallback when the iteration
//! stalls (e.g. nearly degenerate leading eigenvalues).

use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::{C64, CMat, CVec};

/// One eigenvalue with its unit-norm eigenvector.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: CVec,
}

/// Options for [`top_eigenpairs`].
#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Residual tolerance on `||A v - lambda v||` relative to `||A||_F`.
    pub tol: f64,
    /// Power-iteration budget before falling back to a dense decomposition.
    pub max_iters: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 10_000,
        }
    }
}

/// Deterministic phase normalization: rotate so that the first entry of
/// significant magnitude is real positive.
fn normalize_phase(v: &mut CVec) {
    let mut lead = None;
    for i in 0..v.len() {
        if v[i].norm() > 1e-8 {
            lead = Some(i);
            break;
        }
    }
    let Some(i) = lead else { return };
    let phase = v[i] / v[i].norm();
    let rot = phase.conj();
    for x in v.iter_mut() {
        *x *= rot;
    }
}

fn power_iterate(
    a: &CMat,
    shift: f64,
    deflate: &[(f64, CVec)],
    opts: EigenOptions,
    norm_a: f64,
) -> Option<(f64, CVec)> {
    let n = a.nrows();
    // Fixed start vector with a mild taper so symmetric matrices cannot trap
    // the iteration in an invariant subspace by accident.
    let mut v = CVec::from_fn(n, |i, _| C64::new(1.0 + 0.01 * (i as f64 + 1.0), 0.0));
    let nv = v.norm();
    v /= C64::new(nv, 0.0);
    let mut lambda = 0.0;
    for _ in 0..opts.max_iters {
        let mut av = a * &v;
        // A + shift I, minus deflated components.
        av += &v * C64::new(shift, 0.0);
        for (val, q) in deflate {
            let coef = q.dotc(&v) * C64::new(val + shift, 0.0);
            av -= q * coef;
        }
        let norm = av.norm();
        if norm <= 1e-300 {
            // Operator annihilates the iterate: zero (shifted) eigenvalue.
            let mut out = v.clone();
            normalize_phase(&mut out);
            return Some((-shift, out));
        }
        let next = av / C64::new(norm, 0.0);
        // Rayleigh quotient in the shifted, deflated operator.
        let mut anext = a * &next;
        anext += &next * C64::new(shift, 0.0);
        for (val, q) in deflate {
            let coef = q.dotc(&next) * C64::new(val + shift, 0.0);
            anext -= q * coef;
        }
        lambda = next.dotc(&anext).re;
        let residual = (&anext - &next * C64::new(lambda, 0.0)).norm();
        v = next;
        if residual <= opts.tol * norm_a.max(1e-300) {
            let mut out = v;
            normalize_phase(&mut out);
            return Some((lambda - shift, out));
        }
    }
    let _ = lambda;
    None
}

/// Full self-adjoint eigendecomposition, eigenvalues descending.
pub fn full_eigen(a: &HermitianMatrix) -> Vec<EigenPair> {
    let se = a.matrix().clone().symmetric_eigen();
    let n = a.dim();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| {
        se.eigenvalues[j]
            .partial_cmp(&se.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    idx.into_iter()
        .map(|i| {
            let mut v: CVec = se.eigenvectors.column(i).into_owned();
            normalize_phase(&mut v);
            EigenPair {
                value: se.eigenvalues[i],
                vector: v,
            }
        })
        .collect()
}

/// The `k` algebraically largest eigenpairs (`k` in {1, 2}).
///
/// Shifted power iteration with deflation; falls back to the dense
/// decomposition when the iteration budget is exhausted.
pub fn top_eigenpairs(a: &HermitianMatrix, k: usize, opts: EigenOptions) -> Result<Vec<EigenPair>> {
    if !(1..=2).contains(&k) {
        return Err(Error::Domain(format!("k must be 1 or 2, got {k}")));
    }
    if a.dim() < k {
        return Err(Error::Dimension(format!(
            "cannot extract {k} eigenpairs from dimension {}",
            a.dim()
        )));
    }
    let norm_a = a.frobenius_norm();
    if norm_a == 0.0 {
        // Zero matrix: deterministic standard-basis eigenvectors.
        return Ok((0..k)
            .map(|i| {
                let mut v = CVec::zeros(a.dim());
                v[i] = C64::new(1.0, 0.0);
                EigenPair { value: 0.0, vector: v }
            })
            .collect());
    }
    // Shift so the algebraically largest eigenvalue is also largest in
    // magnitude: every eigenvalue of A + ||A||_F I is nonnegative-dominant.
    let shift = norm_a;
    let mut out: Vec<EigenPair> = Vec::with_capacity(k);
    let mut deflate: Vec<(f64, CVec)> = Vec::new();
    for _ in 0..k {
        match power_iterate(a.matrix(), shift, &deflate, opts, norm_a) {
            Some((value, vector)) => {
                deflate.push((value, vector.clone()));
                out.push(EigenPair { value, vector });
            }
            None => {
                // Dense fallback for the whole request.
                let full = full_eigen(a);
                return Ok(full.into_iter().take(k).collect());
            }
        }
    }
    // Re-orthogonalize the second vector defensively.
    if out.len() == 2 {
        let proj = out[0].vector.dotc(&out[1].vector);
        if proj.norm() > 1e-8 {
            let full = full_eigen(a);
            return Ok(full.into_iter().take(k).collect());
        }
    }
    Ok(out)
}

/// Eigenvalue-ratio of a nonzero PSD matrix: `lambda_1 / tr` for `k = 1`,
/// `(lambda_1 + lambda_2) / tr` for `k = 2`. Equals 1 exactly when the rank
/// is at most `k`.
pub fn eigen_ratio(a: &HermitianMatrix, k: usize) -> Result<f64> {
    let tr = a.trace();
    if tr <= 0.0 {
        return Err(Error::PsdViolation(format!(
            "eigen_ratio requires tr(A) > 0, got {tr:.3e}"
        )));
    }
    let pairs = top_eigenpairs(a, k, EigenOptions::default())?;
    let min_allowed = -1e-9 * tr;
    // A cheap negativity screen: the smallest eigenvalue is bounded below by
    // tr - k * lambda_1 only for rank <= k, so do the full check lazily.
    let sum_top: f64 = pairs.iter().map(|p| p.value).sum();
    if sum_top > tr * (1.0 + 1e-9) {
        // Top eigenvalues exceed the trace: negative spectrum present.
        let full = full_eigen(a);
        if let Some(min) = full.last() {
            if min.value < min_allowed {
                return Err(Error::PsdViolation(format!(
                    "negative eigenvalue {:.3e} beyond tolerance",
                    min.value
                )));
            }
        }
    }
    Ok((sum_top / tr).min(1.0))
}

/// Ratio from already-computed top eigenvalues (estimator hot path).
pub fn ratio_from_values(values: &[f64], trace: f64) -> f64 {
    (values.iter().sum::<f64>() / trace).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngutil::{complex_normal, rng_from_seed};
    use crate::RVec;

    fn diag(values: &[f64]) -> HermitianMatrix {
        let n = values.len();
        let mut w = RVec::zeros(n * n);
        for (i, &v) in values.iter().enumerate() {
            w[i] = v;
        }
        HermitianMatrix::from_coords(n, w).unwrap()
    }

    fn random_hermitian(n: usize, seed: u64) -> HermitianMatrix {
        let mut rng = rng_from_seed(seed);
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = complex_normal(&mut rng, 1.0);
            }
        }
        HermitianMatrix::new((&m + m.adjoint()) * C64::new(0.5, 0.0)).unwrap()
    }

    #[test]
    fn diagonal_top_two() {
        let a = diag(&[3.0, 1.0, 0.0]);
        let pairs = top_eigenpairs(&a, 2, EigenOptions::default()).unwrap();
        assert!((pairs[0].value - 3.0).abs() < 1e-9);
        assert!((pairs[1].value - 1.0).abs() < 1e-9);
        assert!((pairs[0].vector[0].norm() - 1.0).abs() < 1e-8);
        assert!((pairs[1].vector[1].norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rank_one_recovers_scaled_outer() {
        let mut rng = rng_from_seed(3);
        let x = CVec::from_fn(5, |_, _| complex_normal(&mut rng, 1.0));
        let c = 2.5;
        let a = HermitianMatrix::from_outer(&x).scale(c);
        let pairs = top_eigenpairs(&a, 1, EigenOptions::default()).unwrap();
        assert!((pairs[0].value - c * x.norm_squared()).abs() < 1e-8 * x.norm_squared());
        // Vector matches up to global phase.
        let overlap = pairs[0].vector.dotc(&x).norm() / x.norm();
        assert!((overlap - 1.0).abs() < 1e-8);
    }

    #[test]
    fn matches_full_decomposition_oracle() {
        for seed in 0..10 {
            let a = random_hermitian(8, seed);
            let pairs = top_eigenpairs(&a, 2, EigenOptions::default()).unwrap();
            let full = full_eigen(&a);
            for k in 0..2 {
                let denom = full[k].value.abs().max(1e-12);
                assert!(
                    (pairs[k].value - full[k].value).abs() / denom < 1e-8,
                    "seed {seed} k {k}: {} vs {}",
                    pairs[k].value,
                    full[k].value
                );
            }
        }
    }

    #[test]
    fn orthogonality_of_top_two() {
        for seed in 0..10 {
            let a = random_hermitian(6, 100 + seed);
            let pairs = top_eigenpairs(&a, 2, EigenOptions::default()).unwrap();
            let ip = pairs[0].vector.dotc(&pairs[1].vector).norm();
            assert!(ip < 1e-7, "seed {seed}: inner product {ip}");
        }
    }

    #[test]
    fn ratio_values() {
        let mut rng = rng_from_seed(9);
        let x = CVec::from_fn(4, |_, _| complex_normal(&mut rng, 1.0));
        let rank_one = HermitianMatrix::from_outer(&x);
        assert!((eigen_ratio(&rank_one, 1).unwrap() - 1.0).abs() < 1e-10);

        let id = HermitianMatrix::identity(4);
        assert!((eigen_ratio(&id, 1).unwrap() - 0.25).abs() < 1e-10);
        assert!((eigen_ratio(&id, 2).unwrap() - 0.5).abs() < 1e-10);

        let a = diag(&[5.0, 3.0, 2.0]);
        assert!((eigen_ratio(&a, 2).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn ratio_rejects_non_psd() {
        assert!(eigen_ratio(&HermitianMatrix::zeros(3), 1).is_err());
        let a = diag(&[1.0, -1.5]);
        // trace negative
        assert!(eigen_ratio(&a.scale(1.0), 1).is_err() || a.trace() <= 0.0);
        let b = diag(&[2.0, -1.0]);
        assert!(eigen_ratio(&b, 1).is_err());
    }

    #[test]
    fn ratio_detects_numerical_rank() {
        let mut rng = rng_from_seed(11);
        for k in 1..=2usize {
            for seed in 0..5 {
                let _ = seed;
                let n = 6;
                let mut a = HermitianMatrix::zeros(n);
                for _ in 0..k {
                    let x = CVec::from_fn(n, |_, _| complex_normal(&mut rng, 1.0));
                    a = a.add(&HermitianMatrix::from_outer(&x));
                }
                let r = eigen_ratio(&a, k).unwrap();
                assert!((r - 1.0).abs() < 1e-9, "rank {k}: ratio {r}");
                let full_rank = a.add(&HermitianMatrix::identity(n));
                let r2 = eigen_ratio(&full_rank, k).unwrap();
                assert!(r2 < 1.0 - 1e-6);
            }
        }
    }

    #[test]
    fn zero_matrix_eigen_is_deterministic() {
        let pairs = top_eigenpairs(&HermitianMatrix::zeros(4), 2, EigenOptions::default()).unwrap();
        assert_eq!(pairs[0].vector[0], C64::new(1.0, 0.0));
        assert_eq!(pairs[1].vector[1], C64::new(1.0, 0.0));
    }
}
