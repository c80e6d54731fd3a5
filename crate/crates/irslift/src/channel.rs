//! Synthetic BS-IRS / IRS-user / BS-user channel generation.
//!
//! Channels follow geometric path loss `eta = C0 * d^-alpha` and Rician
//! fading: a deterministic line-of-sight steering component mixed with an
//! i.i.d. complex Gaussian part, both carrying the same path gain. The
//! equivalent channel stacks the per-element cascaded coefficients with the
//! direct link, and its rank-one autocorrelation is the estimation target.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::rngutil::{complex_normal, Rng};
use crate::units::{db_to_linear, dbm_to_watts};
use crate::{C64, CVec};

/// Axis-aligned box for random user placement, in meters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct UserRegion {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Scenario geometry and statistics.
///
/// All decibel-valued fields carry a `_db`/`_dbm` suffix; everything else is
/// linear. Loadable from JSON with exactly these field names.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScenarioConfig {
    pub bs_position: [f64; 3],
    pub irs_position: [f64; 3],
    pub user_region: UserRegion,
    pub nx: usize,
    pub nz: usize,
    pub c0_bu_db: f64,
    pub c0_bi_db: f64,
    pub c0_iu_db: f64,
    pub alpha_bu: f64,
    pub alpha_bi: f64,
    pub alpha_iu: f64,
    pub beta_bu: f64,
    pub beta_bi: f64,
    pub beta_iu: f64,
    pub p0_dbm: f64,
    pub sigma2_dbm: f64,
    pub b: u32,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Reference urban micro layout with a 4x4 surface; matches the standard
    /// setup except for the surface size, which is kept desk-scale.
    pub fn desk_default() -> Self {
        Self {
            bs_position: [50.0, -150.0, 20.0],
            irs_position: [-2.0, -1.0, 0.0],
            user_region: UserRegion {
                min: [0.0, 0.0, 0.0],
                max: [10.0, 10.0, 0.0],
            },
            nx: 4,
            nz: 4,
            c0_bu_db: -33.0,
            c0_bi_db: -30.0,
            c0_iu_db: -30.0,
            alpha_bu: 3.7,
            alpha_bi: 2.0,
            alpha_iu: 2.0,
            beta_bu: 0.0,
            beta_bi: 10.0,
            beta_iu: 1.0,
            p0_dbm: 30.0,
            sigma2_dbm: -90.0,
            b: 1,
            seed: 0,
        }
    }

    /// Same layout with the full 8x8 surface.
    pub fn full_scale() -> Self {
        Self {
            nx: 8,
            nz: 8,
            ..Self::desk_default()
        }
    }

    pub fn n_irs(&self) -> usize {
        self.nx * self.nz
    }

    /// Equivalent-channel dimension (surface elements plus direct link).
    pub fn n(&self) -> usize {
        self.n_irs() + 1
    }

    pub fn p0_watts(&self) -> f64 {
        dbm_to_watts(self.p0_dbm)
    }

    pub fn sigma2_watts(&self) -> f64 {
        dbm_to_watts(self.sigma2_dbm)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.nz == 0 {
            return Err(Error::Domain("nx and nz must be >= 1".into()));
        }
        if self.beta_bu < 0.0 || self.beta_bi < 0.0 || self.beta_iu < 0.0 {
            return Err(Error::Domain("Rician factors must be >= 0".into()));
        }
        if self.alpha_bu <= 0.0 || self.alpha_bi <= 0.0 || self.alpha_iu <= 0.0 {
            return Err(Error::Domain("path-loss exponents must be > 0".into()));
        }
        if self.b == 0 {
            return Err(Error::Domain("phase bits must be >= 1".into()));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Uniform draw from the user region.
    pub fn sample_user_position(&self, rng: &mut Rng) -> [f64; 3] {
        use rand::Rng as _;
        let mut p = [0.0; 3];
        for i in 0..3 {
            let (lo, hi) = (self.user_region.min[i], self.user_region.max[i]);
            p[i] = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        }
        p
    }
}

/// One sampled set of channels together with the equivalent channel and its
/// autocorrelation matrix.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// BS-IRS channel, one coefficient per reflecting element.
    pub g: CVec,
    /// IRS-user channel.
    pub h_r: CVec,
    /// BS-user direct channel.
    pub h_d: C64,
    /// Equivalent channel: element n is `g_n * conj(h_r_n)`, last entry `conj(h_d)`.
    pub h_bar: CVec,
    /// Rank-one autocorrelation `h_bar * h_bar^H`.
    pub h_bar_outer: HermitianMatrix,
}

impl ChannelRealization {
    /// Noiseless received amplitude under the cascaded form, with the
    /// per-element reflection coefficient taken as `conj(u_n)`:
    /// `h_r^H diag(u)^H g + conj(h_d)`.
    ///
    /// Equal to `v^H h_bar` with `v = [u; 1]`; both forms are exercised in
    /// tests.
    pub fn received_amplitude_cascade(&self, u: &CVec) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for n in 0..self.g.len() {
            acc += self.h_r[n].conj() * u[n].conj() * self.g[n];
        }
        acc + self.h_d.conj()
    }

    /// Noiseless received amplitude `v^H h_bar`.
    pub fn received_amplitude(&self, v: &CVec) -> C64 {
        v.dotc(&self.h_bar)
    }
}

/// Geometric path gain `10^(C0_db/10) * d^-alpha`.
pub fn path_loss(d: f64, c0_db: f64, alpha: f64) -> Result<f64> {
    if d <= 0.0 {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    Ok(db_to_linear(c0_db) * d.powf(-alpha))
}

/// 1-D steering vector `[e^{j pi 0 phi}, ..., e^{j pi (N-1) phi}]`.
fn steering_1d(n: usize, phi: f64) -> CVec {
    CVec::from_fn(n, |i, _| {
        C64::from_polar(1.0, std::f64::consts::PI * i as f64 * phi)
    })
}

/// Planar steering vector for an `nx x nz` surface:
/// `a_nx(cos(omega) sin(psi)) kron a_nz(cos(psi))`.
pub fn steering_vector(nx: usize, nz: usize, omega: f64, psi: f64) -> CVec {
    let ax = steering_1d(nx, omega.cos() * psi.sin());
    let az = steering_1d(nz, psi.cos());
    let mut out = CVec::zeros(nx * nz);
    for i in 0..nx {
        for k in 0..nz {
            out[i * nz + k] = ax[i] * az[k];
        }
    }
    out
}

/// Azimuth/elevation of the unit direction from `from` to `to`, in the
/// surface's frame (x horizontal along the surface, z vertical):
/// `cos(omega) sin(psi)` is the x direction cosine and `cos(psi)` the z one.
fn geometry_angles(from: [f64; 3], to: [f64; 3]) -> Result<(f64, f64)> {
    let d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if r <= 0.0 {
        return Err(Error::Domain("zero-distance link".into()));
    }
    let psi = (d[2] / r).clamp(-1.0, 1.0).acos();
    let sin_psi = psi.sin();
    let omega = if sin_psi.abs() < 1e-12 {
        0.0
    } else {
        ((d[0] / r) / sin_psi).clamp(-1.0, 1.0).acos()
    };
    Ok((omega, psi))
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn rician_vector(
    n_irs: usize,
    nx: usize,
    nz: usize,
    eta: f64,
    beta: f64,
    angles: (f64, f64),
    rng: &mut Rng,
) -> CVec {
    let los = steering_vector(nx, nz, angles.0, angles.1) * C64::new(eta.sqrt(), 0.0);
    let nlos = CVec::from_fn(n_irs, |_, _| complex_normal(rng, eta));
    let w_los = (beta / (1.0 + beta)).sqrt();
    let w_nlos = (1.0 / (1.0 + beta)).sqrt();
    los * C64::new(w_los, 0.0) + nlos * C64::new(w_nlos, 0.0)
}

/// Sample all three channels for a given user position and assemble the
/// equivalent channel. Deterministic given `(config, user_position, rng)`.
pub fn sample_channels(
    config: &ScenarioConfig,
    user_position: [f64; 3],
    rng: &mut Rng,
) -> Result<ChannelRealization> {
    config.validate()?;
    let n_irs = config.n_irs();

    let d_bi = distance(config.bs_position, config.irs_position);
    let d_iu = distance(config.irs_position, user_position);
    let d_bu = distance(config.bs_position, user_position);
    if d_bi <= 0.0 || d_iu <= 0.0 || d_bu <= 0.0 {
        return Err(Error::Domain(
            "degenerate geometry: zero-distance link".into(),
        ));
    }

    let eta_bi = path_loss(d_bi, config.c0_bi_db, config.alpha_bi)?;
    let eta_iu = path_loss(d_iu, config.c0_iu_db, config.alpha_iu)?;
    let eta_bu = path_loss(d_bu, config.c0_bu_db, config.alpha_bu)?;

    // Arrival direction at the surface from the BS, departure toward the user.
    let ang_bi = geometry_angles(config.irs_position, config.bs_position)?;
    let ang_iu = geometry_angles(config.irs_position, user_position)?;

    let g = rician_vector(
        n_irs,
        config.nx,
        config.nz,
        eta_bi,
        config.beta_bi,
        ang_bi,
        rng,
    );
    let h_r = rician_vector(
        n_irs,
        config.nx,
        config.nz,
        eta_iu,
        config.beta_iu,
        ang_iu,
        rng,
    );

    let h_d = if config.beta_bu == 0.0 {
        complex_normal(rng, eta_bu)
    } else {
        let w_los = (config.beta_bu / (1.0 + config.beta_bu)).sqrt();
        let w_nlos = (1.0 / (1.0 + config.beta_bu)).sqrt();
        C64::new(w_los * eta_bu.sqrt(), 0.0) + complex_normal(rng, eta_bu) * C64::new(w_nlos, 0.0)
    };

    let mut h_bar = CVec::zeros(n_irs + 1);
    for n in 0..n_irs {
        h_bar[n] = g[n] * h_r[n].conj();
    }
    h_bar[n_irs] = h_d.conj();
    let h_bar_outer = HermitianMatrix::from_outer(&h_bar);

    Ok(ChannelRealization {
        g,
        h_r,
        h_d,
        h_bar,
        h_bar_outer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::eigen_ratio;
    use crate::rngutil::rng_from_seed;

    #[test]
    fn path_loss_reference_values() {
        // -30 dB at alpha = 2, d = 10 -> 1e-3 * 1e-2.
        assert!((path_loss(10.0, -30.0, 2.0).unwrap() - 1e-5).abs() < 1e-18);
        assert!((path_loss(1.0, 0.0, 3.7).unwrap() - 1.0).abs() < 1e-15);
        // Log-domain oracle.
        let expected = 10f64.powf((-33.0 - 37.0 * 100f64.log10()) / 10.0);
        let got = path_loss(100.0, -33.0, 3.7).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected);
        assert!(path_loss(0.0, -30.0, 2.0).is_err());
    }

    #[test]
    fn steering_reference_values() {
        // omega = psi = pi/2: both phase arguments vanish.
        let s = steering_vector(
            3,
            2,
            std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
        );
        for e in s.iter() {
            assert!((e - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
        // nx = 2, nz = 1, omega = 0, psi = pi/2 -> a_2(1) = [1, -1].
        let s = steering_vector(2, 1, 0.0, std::f64::consts::FRAC_PI_2);
        assert!((s[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((s[1] - C64::new(-1.0, 0.0)).norm() < 1e-9);
        // Unit modulus entries: squared norm = element count.
        let s = steering_vector(4, 3, 0.7, 1.1);
        assert!((s.norm_squared() - 12.0).abs() < 1e-10);
    }

    #[test]
    fn los_limit_matches_steering() {
        let mut cfg = ScenarioConfig::desk_default();
        cfg.beta_bi = 1e12;
        let mut rng = rng_from_seed(1);
        let re = sample_channels(&cfg, [5.0, 5.0, 0.0], &mut rng).unwrap();
        let ang = geometry_angles(cfg.irs_position, cfg.bs_position).unwrap();
        let steer = steering_vector(cfg.nx, cfg.nz, ang.0, ang.1);
        let gn = &re.g / C64::new(re.g.norm(), 0.0);
        let sn = &steer / C64::new(steer.norm(), 0.0);
        let overlap = gn.dotc(&sn).norm();
        assert!((overlap - 1.0).abs() < 1e-5, "overlap {overlap}");
    }

    #[test]
    fn nlos_variance_matches_path_gain() {
        let mut cfg = ScenarioConfig::desk_default();
        cfg.beta_bi = 0.0;
        cfg.nx = 2;
        cfg.nz = 2;
        let mut rng = rng_from_seed(2);
        let d_bi = distance(cfg.bs_position, cfg.irs_position);
        let eta = path_loss(d_bi, cfg.c0_bi_db, cfg.alpha_bi).unwrap();
        let trials = 10_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let re = sample_channels(&cfg, [5.0, 5.0, 0.0], &mut rng).unwrap();
            acc += re.g.iter().map(|z| z.norm_sqr()).sum::<f64>() / cfg.n_irs() as f64;
        }
        let mean = acc / trials as f64;
        assert!(
            (mean - eta).abs() < 0.05 * eta,
            "mean {mean:.3e} vs eta {eta:.3e}"
        );
    }

    #[test]
    fn per_entry_power_invariant_any_beta() {
        // E[|g_n|^2] = eta for any Rician factor (both parts carry sqrt(eta)).
        let mut cfg = ScenarioConfig::desk_default();
        cfg.beta_bi = 3.0;
        cfg.nx = 2;
        cfg.nz = 2;
        let mut rng = rng_from_seed(3);
        let d_bi = distance(cfg.bs_position, cfg.irs_position);
        let eta = path_loss(d_bi, cfg.c0_bi_db, cfg.alpha_bi).unwrap();
        let trials = 10_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let re = sample_channels(&cfg, [5.0, 5.0, 0.0], &mut rng).unwrap();
            acc += re.g.iter().map(|z| z.norm_sqr()).sum::<f64>() / cfg.n_irs() as f64;
        }
        let mean = acc / trials as f64;
        assert!((mean - eta).abs() < 0.05 * eta);
    }

    #[test]
    fn autocorrelation_is_rank_one() {
        let cfg = ScenarioConfig::desk_default();
        let mut rng = rng_from_seed(4);
        let re = sample_channels(&cfg, [3.0, 7.0, 0.0], &mut rng).unwrap();
        let ratio = eigen_ratio(&re.h_bar_outer, 1).unwrap();
        assert!((ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equivalent_channel_matches_cascade_form() {
        let cfg = ScenarioConfig::desk_default();
        let mut rng = rng_from_seed(5);
        use rand::Rng as _;
        for trial in 0..100 {
            let pos = cfg.sample_user_position(&mut rng);
            let re = sample_channels(&cfg, pos, &mut rng).unwrap();
            let u = CVec::from_fn(cfg.n_irs(), |_, _| {
                let k: u32 = rng.gen_range(0..4);
                C64::from_polar(1.0, std::f64::consts::FRAC_PI_2 * k as f64)
            });
            let mut v = CVec::zeros(cfg.n());
            for i in 0..cfg.n_irs() {
                v[i] = u[i];
            }
            v[cfg.n_irs()] = C64::new(1.0, 0.0);

            let a = re.received_amplitude(&v);
            let b = re.received_amplitude_cascade(&u);
            assert!(
                (a - b).norm() <= 1e-12 * a.norm().max(b.norm()),
                "trial {trial}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn reproducible_given_seed() {
        let cfg = ScenarioConfig::desk_default();
        let mut r1 = rng_from_seed(9);
        let mut r2 = rng_from_seed(9);
        let a = sample_channels(&cfg, [1.0, 2.0, 0.0], &mut r1).unwrap();
        let b = sample_channels(&cfg, [1.0, 2.0, 0.0], &mut r2).unwrap();
        assert_eq!(a.h_bar, b.h_bar);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = ScenarioConfig::desk_default();
        let s = serde_json::to_string_pretty(&cfg).unwrap();
        assert!(s.contains("c0_bu_db"));
        assert!(s.contains("p0_dbm"));
        let back = ScenarioConfig::from_json(&s).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn degenerate_geometry_rejected() {
        let cfg = ScenarioConfig::desk_default();
        let mut rng = rng_from_seed(0);
        assert!(sample_channels(&cfg, cfg.irs_position, &mut rng).is_err());
    }
}
