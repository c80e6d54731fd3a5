//! Training reflections and power measurements.
//!
//! A training reflection is a unit-modulus vector whose entries come from the
//! `2^b`-point phase alphabet, with the last entry pinned to 1 (the direct
//! link's coefficient in the equivalent channel). Power records come in three
//! flavors: exact, noise-averaged, and quantized into RSRP-style report
//! levels. Everything is stored in watts; decibels appear only at the I/O
//! boundary.

use crate::error::{Error, Result};
use crate::hermitian::{matrix_rank, HermitianMatrix};
use crate::rngutil::{complex_normal, Rng};
use crate::{C64, CVec, RMat, RVec};

/// Discrete-phase reflection vector `v = [u; 1]` with `b`-bit entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionVector {
    /// Phase indices `d_n` in `0..2^b`; entry `n` is `e^{j 2 pi d_n / 2^b}`.
    /// The last index is always 0 (coefficient exactly 1).
    pub digits: Vec<u32>,
    pub bits: u32,
}

impl ReflectionVector {
    pub fn from_digits(digits: Vec<u32>, bits: u32) -> Result<Self> {
        if bits == 0 {
            return Err(Error::Domain("phase bits must be >= 1".into()));
        }
        let levels = 1u32 << bits;
        if digits.iter().any(|&d| d >= levels) {
            return Err(Error::Domain("phase index out of range".into()));
        }
        if digits.last() != Some(&0) {
            return Err(Error::Domain("last reflection entry must be 1".into()));
        }
        Ok(Self { digits, bits })
    }

    pub fn dim(&self) -> usize {
        self.digits.len()
    }

    /// Complex entries; unit modulus by construction. Quarter-turn phases
    /// are exact so binary liftings are exactly real.
    pub fn entries(&self) -> CVec {
        let levels = 1u64 << self.bits;
        let step = 2.0 * std::f64::consts::PI / levels as f64;
        CVec::from_fn(self.digits.len(), |i, _| {
            let d = self.digits[i] as u64;
            if (4 * d) % levels == 0 {
                match (4 * d) / levels {
                    0 => C64::new(1.0, 0.0),
                    1 => C64::new(0.0, 1.0),
                    2 => C64::new(-1.0, 0.0),
                    _ => C64::new(0.0, -1.0),
                }
            } else {
                C64::from_polar(1.0, step * d as f64)
            }
        })
    }

    /// Rank-one lifting `v v^H`.
    pub fn outer(&self) -> HermitianMatrix {
        HermitianMatrix::from_outer(&self.entries())
    }

    /// Compact digit string (base `2^b`, alphabet 0-9 then a-z).
    pub fn digit_string(&self) -> String {
        self.digits
            .iter()
            .map(|&d| std::char::from_digit(d, 36).unwrap())
            .collect()
    }

    pub fn from_digit_string(s: &str, bits: u32) -> Result<Self> {
        let digits = s
            .chars()
            .map(|c| {
                c.to_digit(36)
                    .ok_or_else(|| Error::Parse(format!("bad phase digit '{c}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_digits(digits, bits)
    }
}

/// Uniformly random reflection: i.i.d. phase indices for the first `n_irs`
/// entries, last entry 1.
pub fn random_reflection(n_irs: usize, bits: u32, rng: &mut Rng) -> ReflectionVector {
    use rand::Rng as _;
    let levels = 1u32 << bits;
    let mut digits: Vec<u32> = (0..n_irs).map(|_| rng.gen_range(0..levels)).collect();
    digits.push(0);
    ReflectionVector { digits, bits }
}

/// Exact received power `p0 * Re(v^H H v)`.
pub fn exact_power(h_bar_outer: &HermitianMatrix, v: &ReflectionVector, p0: f64) -> Result<f64> {
    if h_bar_outer.dim() != v.dim() {
        return Err(Error::Dimension(format!(
            "matrix dim {} vs reflection dim {}",
            h_bar_outer.dim(),
            v.dim()
        )));
    }
    let q = p0 * h_bar_outer.quadratic_form(&v.entries());
    let floor = -1e-12 * p0 * h_bar_outer.trace().abs();
    if q < floor {
        return Err(Error::PsdViolation(format!(
            "negative power {q:.3e} below tolerance {floor:.3e}"
        )));
    }
    Ok(q.max(0.0))
}

/// Noise-averaged power measurement: the mean of `N0` draws of
/// `|a * x + z_i|^2` with a constant-modulus pilot `x` of power `p0` and
/// `z_i ~ CN(0, sigma2)`.
pub fn noisy_power(
    h_bar: &CVec,
    v: &ReflectionVector,
    p0: f64,
    sigma2: f64,
    n0: usize,
    rng: &mut Rng,
) -> Result<f64> {
    if n0 == 0 {
        return Err(Error::Domain("averaging count must be >= 1".into()));
    }
    if h_bar.len() != v.dim() {
        return Err(Error::Dimension("h_bar/reflection length mismatch".into()));
    }
    let amp = v.entries().dotc(h_bar) * C64::new(p0.sqrt(), 0.0);
    if sigma2 == 0.0 {
        return Ok(amp.norm_sqr());
    }
    let mut acc = 0.0;
    for _ in 0..n0 {
        let z = complex_normal(rng, sigma2);
        acc += (amp + z).norm_sqr();
    }
    Ok(acc / n0 as f64)
}

/// RSRP-style report quantizer: `M` equal dB-width levels over
/// [-156, -44] dBm, level width `D = 112/M` dB.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuantizerConfig {
    /// Number of levels.
    pub m: usize,
    /// Level width in dB.
    pub d_db: f64,
}

/// Reporting range in dBm.
pub const QUANT_RANGE_DBM: (f64, f64) = (-156.0, -44.0);

impl QuantizerConfig {
    /// Build from a level width in dB (must divide the 112 dB range).
    pub fn from_width_db(d_db: f64) -> Result<Self> {
        if d_db <= 0.0 || d_db > 112.0 {
            return Err(Error::Domain(format!("level width {d_db} dB out of range")));
        }
        let m = (112.0 / d_db).round() as usize;
        if m == 0 || ((112.0 / m as f64) - d_db).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "level width {d_db} dB does not evenly divide the 112 dB range"
            )));
        }
        Ok(Self { m, d_db })
    }

    pub fn from_level_count(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Domain("level count must be >= 1".into()));
        }
        Ok(Self {
            m,
            d_db: 112.0 / m as f64,
        })
    }
}

/// One quantized record: level index plus its interval in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedPower {
    pub level: usize,
    /// Lower bound `10^(-7.4 - (l+1) D / 10)` watts.
    pub zeta: f64,
    /// Upper bound `10^(-7.4 - l D / 10)` watts.
    pub xi: f64,
}

impl QuantizedPower {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.zeta + self.xi)
    }
}

/// Quantize a positive power (watts) to its report level. Out-of-range
/// values clamp to the nearest edge level.
pub fn quantize(q: f64, cfg: &QuantizerConfig) -> Result<QuantizedPower> {
    if q <= 0.0 {
        return Err(Error::Domain(format!("power must be positive, got {q}")));
    }
    let q_dbm = crate::units::watts_to_dbm(q);
    let raw = ((QUANT_RANGE_DBM.1 - q_dbm) / cfg.d_db).floor();
    let level = if raw < 0.0 {
        0
    } else {
        (raw as usize).min(cfg.m - 1)
    };
    Ok(bounds_for_level(level, cfg))
}

/// Interval bounds of a level index, in watts.
pub fn bounds_for_level(level: usize, cfg: &QuantizerConfig) -> QuantizedPower {
    let l = level as f64;
    QuantizedPower {
        level,
        zeta: 10f64.powf(-7.4 - (l + 1.0) * cfg.d_db / 10.0),
        xi: 10f64.powf(-7.4 - l * cfg.d_db / 10.0),
    }
}

/// The recorded observations of a measurement set.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerRecords {
    /// Noise-free powers `p_t`.
    Exact(Vec<f64>),
    /// Noise-averaged powers `q_t` with the averaging count used.
    Noisy { q: Vec<f64>, n0: usize },
    /// Quantized reports with per-record interval bounds.
    Quantized {
        records: Vec<QuantizedPower>,
        n0: usize,
        quantizer: QuantizerConfig,
    },
}

/// Training reflections with their power records.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub reflections: Vec<ReflectionVector>,
    pub records: PowerRecords,
    /// Transmit power in watts.
    pub p0: f64,
    /// Noise power in watts (zero for exact sets).
    pub sigma2: f64,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.reflections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reflections.is_empty()
    }

    pub fn bits(&self) -> u32 {
        self.reflections.first().map(|r| r.bits).unwrap_or(1)
    }

    pub fn dim(&self) -> usize {
        self.reflections.first().map(|r| r.dim()).unwrap_or(0)
    }

    /// Best available scalar power surrogate per record: exact power, noisy
    /// average, or the quantization interval midpoint.
    pub fn power_surrogate(&self) -> Vec<f64> {
        match &self.records {
            PowerRecords::Exact(p) => p.clone(),
            PowerRecords::Noisy { q, .. } => q.clone(),
            PowerRecords::Quantized { records, .. } => {
                records.iter().map(|r| r.midpoint()).collect()
            }
        }
    }

    /// Interval view `[zeta_t, xi_t]` used by the robust estimators. Exact
    /// and noisy records become zero-width intervals.
    pub fn intervals(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.records {
            PowerRecords::Exact(p) => (p.clone(), p.clone()),
            PowerRecords::Noisy { q, .. } => (q.clone(), q.clone()),
            PowerRecords::Quantized { records, .. } => (
                records.iter().map(|r| r.zeta).collect(),
                records.iter().map(|r| r.xi).collect(),
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reflections.is_empty() {
            return Err(Error::Domain("measurement set is empty".into()));
        }
        let n = self.dim();
        let bits = self.bits();
        if self
            .reflections
            .iter()
            .any(|r| r.dim() != n || r.bits != bits)
        {
            return Err(Error::Dimension(
                "inconsistent reflection dimensions or bit depths".into(),
            ));
        }
        let records_len = match &self.records {
            PowerRecords::Exact(p) => {
                if p.iter().any(|&x| x < 0.0) {
                    return Err(Error::Domain("exact powers must be nonnegative".into()));
                }
                p.len()
            }
            PowerRecords::Noisy { q, n0 } => {
                if *n0 == 0 {
                    return Err(Error::Domain("averaging count must be >= 1".into()));
                }
                q.len()
            }
            PowerRecords::Quantized { records, n0, .. } => {
                if *n0 == 0 {
                    return Err(Error::Domain("averaging count must be >= 1".into()));
                }
                if records.iter().any(|r| r.zeta >= r.xi) {
                    return Err(Error::Domain("quantized record with empty interval".into()));
                }
                records.len()
            }
        };
        if records_len != self.reflections.len() {
            return Err(Error::Dimension(
                "record count does not match reflection count".into(),
            ));
        }
        Ok(())
    }

    /// CSV serialization: `t,v,...` with the record columns depending on the
    /// measurement kind.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.records {
            PowerRecords::Exact(p) => {
                out.push_str("t,v,p_watts\n");
                for (t, (r, pw)) in self.reflections.iter().zip(p).enumerate() {
                    out.push_str(&format!("{t},{},{:.17e}\n", r.digit_string(), pw));
                }
            }
            PowerRecords::Noisy { q, .. } => {
                out.push_str("t,v,q_watts\n");
                for (t, (r, qw)) in self.reflections.iter().zip(q).enumerate() {
                    out.push_str(&format!("{t},{},{:.17e}\n", r.digit_string(), qw));
                }
            }
            PowerRecords::Quantized { records, .. } => {
                out.push_str("t,v,level,zeta_watts,xi_watts\n");
                for (t, (r, rec)) in self.reflections.iter().zip(records).enumerate() {
                    out.push_str(&format!(
                        "{t},{},{},{:.17e},{:.17e}\n",
                        r.digit_string(),
                        rec.level,
                        rec.zeta,
                        rec.xi
                    ));
                }
            }
        }
        out
    }
}

/// Design matrix `C = p0 [w_1, ..., w_T]` whose columns are the vectorized
/// reflection liftings.
pub fn build_design_matrix(reflections: &[ReflectionVector], p0: f64) -> Result<RMat> {
    if reflections.is_empty() {
        return Err(Error::Domain("no reflections given".into()));
    }
    let n = reflections[0].dim();
    if reflections.iter().any(|r| r.dim() != n) {
        return Err(Error::Dimension("mixed reflection dimensions".into()));
    }
    let mut c = RMat::zeros(n * n, reflections.len());
    for (t, r) in reflections.iter().enumerate() {
        let w = r.outer();
        c.set_column(t, &(w.coords() * p0));
    }
    Ok(c)
}

/// Rank of a design matrix (relative singular-value threshold `1e-10`).
pub fn design_matrix_rank(c: &RMat) -> usize {
    matrix_rank(c, 1e-10)
}

/// Draw `t_p` reflections whose liftings are linearly independent as long as
/// the span dimension allows: each new column must increase the rank until it
/// saturates at `dimension_bound(n, b)`. Any reflection that does not help is
/// redrawn, up to 1000 retries per column.
pub fn sample_rank_enforced(
    n_irs: usize,
    bits: u32,
    t_p: usize,
    rng: &mut Rng,
) -> Result<Vec<ReflectionVector>> {
    let n = n_irs + 1;
    let bound = crate::hermitian::dimension_bound(n, bits);
    let mut basis: Vec<RVec> = Vec::new(); // orthonormal basis of accepted coords
    let mut out = Vec::with_capacity(t_p);
    for t in 0..t_p {
        if basis.len() >= bound {
            // Span saturated: nothing left to enforce.
            out.push(random_reflection(n_irs, bits, rng));
            continue;
        }
        let mut accepted = false;
        for _attempt in 0..1000 {
            let r = random_reflection(n_irs, bits, rng);
            let mut w = r.outer().coords().clone();
            let norm0 = w.norm();
            for b in &basis {
                let proj = b.dot(&w);
                w -= b * proj;
            }
            // Re-orthogonalize once for numerical hygiene.
            for b in &basis {
                let proj = b.dot(&w);
                w -= b * proj;
            }
            if w.norm() > 1e-10 * norm0 {
                let nw = w.norm();
                basis.push(w / nw);
                out.push(r);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::RankDeficient {
                attained: basis.len(),
                target: bound.min(t_p),
            });
        }
        let _ = t;
    }
    Ok(out)
}

/// Assemble an exact measurement set for a channel.
pub fn measure_exact(
    h_bar_outer: &HermitianMatrix,
    reflections: Vec<ReflectionVector>,
    p0: f64,
) -> Result<MeasurementSet> {
    let powers = reflections
        .iter()
        .map(|v| exact_power(h_bar_outer, v, p0))
        .collect::<Result<Vec<_>>>()?;
    let ms = MeasurementSet {
        reflections,
        records: PowerRecords::Exact(powers),
        p0,
        sigma2: 0.0,
    };
    ms.validate()?;
    Ok(ms)
}

/// Assemble a noise-averaged measurement set.
pub fn measure_noisy(
    h_bar: &CVec,
    reflections: Vec<ReflectionVector>,
    p0: f64,
    sigma2: f64,
    n0: usize,
    rng: &mut Rng,
) -> Result<MeasurementSet> {
    let q = reflections
        .iter()
        .map(|v| noisy_power(h_bar, v, p0, sigma2, n0, rng))
        .collect::<Result<Vec<_>>>()?;
    let ms = MeasurementSet {
        reflections,
        records: PowerRecords::Noisy { q, n0 },
        p0,
        sigma2,
    };
    ms.validate()?;
    Ok(ms)
}

/// Assemble a quantized measurement set (noisy measurement then reporting).
pub fn measure_quantized(
    h_bar: &CVec,
    reflections: Vec<ReflectionVector>,
    p0: f64,
    sigma2: f64,
    n0: usize,
    quantizer: QuantizerConfig,
    rng: &mut Rng,
) -> Result<MeasurementSet> {
    let records = reflections
        .iter()
        .map(|v| {
            let q = noisy_power(h_bar, v, p0, sigma2, n0, rng)?;
            // A zero-power draw cannot be reported; clamp to the range floor.
            let q = q.max(1e-300);
            quantize(q, &quantizer)
        })
        .collect::<Result<Vec<_>>>()?;
    let ms = MeasurementSet {
        reflections,
        records: PowerRecords::Quantized {
            records,
            n0,
            quantizer,
        },
        p0,
        sigma2,
    };
    ms.validate()?;
    Ok(ms)
}
