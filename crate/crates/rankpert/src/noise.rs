//! Seeded noise matrices and the missing-entry sampling model.
//!
//! Randomness is counter-based: row `i` of a draw reads its own ChaCha8 stream
//! (stream id built from a purpose tag and `i`), so entry `(i, j)` is a pure
//! function of the seed and its index, independent of generation order.

use std::path::PathBuf;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::skewness::VarianceProfile;

const TAG_NOISE: u64 = 1;
const TAG_MASK: u64 = 2;
const TAG_SPLIT: u64 = 3;

/// Distribution of a bounded atom with a given variance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Atom {
    /// `+-sigma` with equal probability.
    #[default]
    Rademacher,
    /// Uniform on `[-sigma sqrt(3), sigma sqrt(3)]`, clipped to `[-K, K]`.
    Uniform,
}

/// Noise family and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum NoiseKind {
    /// Symmetric matrix with independent `+-scale` entries on and above the diagonal.
    Wigner {
        #[serde(default = "one")]
        scale: f64,
    },
    /// iid entries bounded by `k` with variance `sigma2`.
    IidBounded {
        k: f64,
        sigma2: f64,
        #[serde(default)]
        atom: Atom,
    },
    /// Entry `(i, j)` is `sigma_ij` times a Rademacher sign. Variances come
    /// inline or from a headerless CSV file.
    Profile {
        k: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma2: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        profile_csv: Option<PathBuf>,
    },
    /// Each entry of `A + xi` is observed with probability `rho`;
    /// `E = rho^{-1} (A + xi)_Omega - A`.
    Sampling {
        rho: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        entry_noise: Option<Box<NoiseSpec>>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn wigner(seed: u64) -> Self {
        Self::new(NoiseKind::Wigner { scale: 1.0 }, seed)
    }

    pub fn rademacher(sigma: f64, seed: u64) -> Self {
        Self::new(
            NoiseKind::IidBounded {
                k: sigma,
                sigma2: sigma * sigma,
                atom: Atom::Rademacher,
            },
            seed,
        )
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            kind: self.kind.clone(),
            seed,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            NoiseKind::Wigner { .. } => "wigner",
            NoiseKind::IidBounded { .. } => "iid_bounded",
            NoiseKind::Profile { .. } => "profile",
            NoiseKind::Sampling { .. } => "sampling",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            NoiseKind::Wigner { scale } if !(*scale >= 0.0 && scale.is_finite()) => {
                Err(Error::InvalidSpec(format!("wigner scale {scale} must be nonnegative")))
            }
            NoiseKind::IidBounded { k, sigma2, atom } => {
                if !(*k > 0.0 && k.is_finite()) || !(*sigma2 >= 0.0 && sigma2.is_finite()) {
                    return Err(Error::InvalidSpec("iid_bounded needs K > 0 and sigma2 >= 0".into()));
                }
                if *atom == Atom::Rademacher && sigma2.sqrt() > *k {
                    return Err(Error::InvalidSpec(format!("Rademacher atom +-{} exceeds K = {k}", sigma2.sqrt())));
                }
                Ok(())
            }
            NoiseKind::Profile { sigma2, profile_csv, .. } if sigma2.is_some() == profile_csv.is_some() => Err(
                Error::InvalidSpec("profile noise needs exactly one of sigma2 or profile_csv".into()),
            ),
            NoiseKind::Sampling { rho, entry_noise } => {
                if !(*rho > 0.0 && *rho <= 1.0) {
                    return Err(Error::InvalidDensity(*rho));
                }
                match entry_noise {
                    Some(inner) if matches!(inner.kind, NoiseKind::Sampling { .. }) => {
                        Err(Error::InvalidSpec("entry noise cannot itself be sampling noise".into()))
                    }
                    Some(inner) => inner.validate(),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    /// Loads the variance profile of a `profile` spec.
    pub fn profile(&self) -> Result<Option<VarianceProfile>> {
        match &self.kind {
            NoiseKind::Profile { k, sigma2: Some(rows), .. } => {
                Ok(Some(VarianceProfile::new(DenseMatrix::from_rows(rows)?, *k)?))
            }
            NoiseKind::Profile { k, profile_csv: Some(path), .. } => Ok(Some(VarianceProfile::read_csv_file(path, *k)?)),
            _ => Ok(None),
        }
    }

    /// Entry bound `K` and variance bound `sigma^2` of the realized perturbation.
    /// Sampling noise depends on `A`, which must then be supplied.
    pub fn bound_params(&self, a: Option<&DenseMatrix>) -> Result<(f64, f64)> {
        match &self.kind {
            NoiseKind::Wigner { scale } => Ok((*scale, scale * scale)),
            NoiseKind::IidBounded { k, sigma2, .. } => Ok((*k, *sigma2)),
            NoiseKind::Profile { .. } => {
                let prof = self.profile()?.expect("profile spec");
                Ok((prof.k(), prof.max_variance()))
            }
            NoiseKind::Sampling { rho, entry_noise } => {
                let a = a.ok_or_else(|| Error::InvalidSpec("sampling noise bounds need A".into()))?;
                let amax = a.max_abs();
                let (kx, sx) = match entry_noise {
                    Some(inner) => inner.bound_params(None)?,
                    None => (0.0, 0.0),
                };
                let k = amax * ((1.0 - rho) / rho).max(1.0) + kx / rho;
                let s2 = amax * amax * (1.0 - rho) / rho + sx / rho;
                Ok((k, s2))
            }
        }
    }

    /// Draws the perturbation `E` for ground matrix `A`. Sampling specs use `A`;
    /// all other kinds only use its shape.
    pub fn realize(&self, a: &DenseMatrix) -> Result<DenseMatrix> {
        match &self.kind {
            NoiseKind::Sampling { rho, entry_noise } => {
                let mask = sample_mask(*rho, a.rows(), a.cols(), self.seed)?;
                let (e, _) = sampling_noise(a, &mask, *rho, entry_noise.as_deref())?;
                Ok(e)
            }
            _ => sample_noise(self, a.rows(), a.cols()),
        }
    }
}

fn row_rng(seed: u64, tag: u64, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 48) ^ row as u64);
    rng
}

fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn sign(bits: u64) -> f64 {
    if bits >> 63 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// `rows x cols` grid whose entry `(i, j)` is `f(i, j, u)` for the `j`-th
/// 64-bit word `u` of row `i`'s stream.
fn counter_grid(seed: u64, tag: u64, rows: usize, cols: usize, f: impl Fn(usize, usize, u64) -> f64 + Sync) -> DenseMatrix {
    let data: Vec<f64> = (0..rows)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = row_rng(seed, tag, i);
            let f = &f;
            (0..cols).map(move |j| f(i, j, rng.next_u64()))
        })
        .collect();
    DenseMatrix::new(rows, cols, data).expect("finite draws")
}

/// Draws a noise matrix. Sampling specs are rejected here; use
/// [`NoiseSpec::realize`] or [`sampling_noise`].
pub fn sample_noise(spec: &NoiseSpec, m: usize, n: usize) -> Result<DenseMatrix> {
    spec.validate()?;
    let seed = spec.seed;
    match &spec.kind {
        NoiseKind::Wigner { scale } => {
            if m != n {
                return Err(Error::Shape(format!("Wigner noise must be square, got {m}x{n}")));
            }
            let upper = counter_grid(seed, TAG_NOISE, n, n, |_, _, u| scale * sign(u));
            Ok(DenseMatrix::from_fn(n, n, |i, j| upper[(i.min(j), i.max(j))]))
        }
        NoiseKind::IidBounded { k, sigma2, atom } => {
            let s = sigma2.sqrt();
            let (k, atom) = (*k, *atom);
            Ok(counter_grid(seed, TAG_NOISE, m, n, move |_, _, u| match atom {
                Atom::Rademacher => s * sign(u),
                Atom::Uniform => (s * 3f64.sqrt() * (2.0 * unit_f64(u) - 1.0)).clamp(-k, k),
            }))
        }
        NoiseKind::Profile { .. } => {
            let prof = spec.profile()?.expect("profile spec");
            if prof.shape() != (m, n) {
                return Err(Error::Shape(format!("profile {:?} vs requested {m}x{n}", prof.shape())));
            }
            let var = prof.variances();
            Ok(counter_grid(seed, TAG_NOISE, m, n, |i, j, u| var[(i, j)].sqrt() * sign(u)))
        }
        NoiseKind::Sampling { .. } => Err(Error::InvalidSpec(
            "sampling noise depends on the ground matrix; use NoiseSpec::realize".into(),
        )),
    }
}

/// Observation pattern of a sampled matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![true; rows * cols],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    pub fn observed_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn observed_fraction(&self) -> f64 {
        self.observed_count() as f64 / self.bits.len().max(1) as f64
    }

    /// 0/1 matrix.
    pub fn to_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows, self.cols, |i, j| if self.get(i, j) { 1.0 } else { 0.0 })
    }

    pub fn write_csv_file(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for i in 0..self.rows {
            w.write_record((0..self.cols).map(|j| if self.get(i, j) { "1" } else { "0" }))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// iid Bernoulli(`rho`) observation mask.
pub fn sample_mask(rho: f64, m: usize, n: usize, seed: u64) -> Result<Mask> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidDensity(rho));
    }
    let grid = counter_grid(seed, TAG_MASK, m, n, |_, _, u| if unit_f64(u) < rho { 1.0 } else { 0.0 });
    Ok(Mask {
        rows: m,
        cols: n,
        bits: grid.as_slice().iter().map(|&v| v == 1.0).collect(),
    })
}

/// Observed entries of `A + xi` with their mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservedMatrix {
    /// `B`: observed values, zero where unobserved.
    pub values: DenseMatrix,
    pub mask: Mask,
    pub rho: f64,
}

/// `E = rho^{-1} B - A` where `B` keeps the observed entries of `A + xi`.
pub fn sampling_noise(
    a: &DenseMatrix,
    mask: &Mask,
    rho: f64,
    entry_noise: Option<&NoiseSpec>,
) -> Result<(DenseMatrix, ObservedMatrix)> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidDensity(rho));
    }
    if a.shape() != mask.shape() {
        return Err(Error::Shape(format!("A {:?} vs mask {:?}", a.shape(), mask.shape())));
    }
    let (m, n) = a.shape();
    let xi = entry_noise.map(|s| sample_noise(s, m, n)).transpose()?;
    let values = DenseMatrix::from_fn(m, n, |i, j| {
        if mask.get(i, j) {
            a[(i, j)] + xi.as_ref().map_or(0.0, |x| x[(i, j)])
        } else {
            0.0
        }
    });
    let e = DenseMatrix::from_fn(m, n, |i, j| values[(i, j)] / rho - a[(i, j)]);
    Ok((
        e,
        ObservedMatrix {
            values,
            mask: mask.clone(),
            rho,
        },
    ))
}

/// Child seed for stream `index` of a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(TAG_SPLIT << 48);
    rng.set_word_pos(2 * index as u128);
    rng.next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wigner_is_symmetric_and_bounded() {
        let e = sample_noise(&NoiseSpec::wigner(3), 50, 50).unwrap();
        assert_eq!(e, e.transpose());
        assert!(e.as_slice().iter().all(|&v| v == 1.0 || v == -1.0));
        assert!(sample_noise(&NoiseSpec::wigner(3), 4, 5).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = NoiseSpec::new(
            NoiseKind::IidBounded {
                k: 1.0,
                sigma2: 0.5,
                atom: Atom::Uniform,
            },
            11,
        );
        let a = sample_noise(&spec, 30, 20).unwrap();
        assert_eq!(a, sample_noise(&spec, 30, 20).unwrap());
        assert_ne!(a, sample_noise(&spec.with_seed(12), 30, 20).unwrap());
        assert!(a.max_abs() <= 1.0);
    }

    #[test]
    fn entries_do_not_depend_on_shape_beyond_their_row() {
        let spec = NoiseSpec::rademacher(1.0, 5);
        let small = sample_noise(&spec, 3, 4).unwrap();
        let big = sample_noise(&spec, 6, 8).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                assert_eq!(small[(i, j)], big[(i, j)]);
            }
        }
    }

    #[test]
    fn zero_profile_gives_zero() {
        let spec = NoiseSpec::new(
            NoiseKind::Profile {
                k: 1.0,
                sigma2: Some(vec![vec![0.0; 3]; 2]),
                profile_csv: None,
            },
            1,
        );
        assert_eq!(sample_noise(&spec, 2, 3).unwrap(), DenseMatrix::zeros(2, 3));
    }

    #[test]
    fn full_mask_without_noise_is_exact() {
        let a = DenseMatrix::from_fn(5, 4, |i, j| (i * j) as f64 - 2.5);
        let mask = sample_mask(1.0, 5, 4, 9).unwrap();
        assert_eq!(mask.observed_count(), 20);
        let (e, obs) = sampling_noise(&a, &mask, 1.0, None).unwrap();
        assert_eq!(e, DenseMatrix::zeros(5, 4));
        assert_eq!(obs.values, a);
    }

    #[test]
    fn sampling_noise_two_values() {
        let a = DenseMatrix::from_fn(40, 40, |_, _| 2.0);
        let rho = 0.25;
        let e = NoiseSpec::new(NoiseKind::Sampling { rho, entry_noise: None }, 4)
            .realize(&a)
            .unwrap();
        for &v in e.as_slice() {
            assert!(v == 2.0 * (1.0 - rho) / rho || v == -2.0);
        }
    }

    #[test]
    fn invalid_density_rejected() {
        assert!(matches!(sample_mask(0.0, 2, 2, 1), Err(Error::InvalidDensity(_))));
        assert!(matches!(sample_mask(1.1, 2, 2, 1), Err(Error::InvalidDensity(_))));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"kind":"sampling","params":{"rho":0.1,"entry_noise":{"kind":"iid_bounded","params":{"k":1.0,"sigma2":1.0},"seed":3}},"seed":7}"#;
        let spec = NoiseSpec::from_json(text).unwrap();
        assert_eq!(spec.seed, 7);
        let back: NoiseSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        let w = NoiseSpec::from_json(r#"{"kind":"wigner","params":{},"seed":1}"#).unwrap();
        assert_eq!(w, NoiseSpec::wigner(1));
    }

    #[test]
    fn derived_seeds_differ() {
        let s: Vec<u64> = (0..100).map(|i| derive_seed(42, i)).collect();
        let mut d = s.clone();
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), s.len());
        assert_eq!(derive_seed(42, 3), s[3]);
    }
}
