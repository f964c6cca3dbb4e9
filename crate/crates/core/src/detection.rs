//! Maximum-likelihood and linear (ZF, MMSE) detection of code matrices.
//!
//! The received block is `Y = E_s H X + N` with i.i.d. Gaussian noise of variance `N0 / 2` per
//! entry. ML searches the whole codebook. The linear detectors equalize, keep the `M` largest
//! magnitudes of every row and decode directly; when the quantized matrix is not a codeword they
//! draw a uniformly random message instead.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::codebook::{CodeMatrix, Codebook, CodebookSpec};
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    Ml,
    Zf,
    Mmse,
}

impl Detector {
    pub fn as_str(self) -> &'static str {
        match self {
            Detector::Ml => "ml",
            Detector::Zf => "zf",
            Detector::Mmse => "mmse",
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ml" => Ok(Detector::Ml),
            "zf" => Ok(Detector::Zf),
            "mmse" => Ok(Detector::Mmse),
            other => Err(invalid(format!("unknown detector '{other}'"))),
        }
    }
}

/// Intensity scale and noise level of one link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    /// Intensity multiplication factor `E_s`.
    pub e_s: f64,
    /// Noise level; every noise entry has variance `n0 / 2`.
    pub n0: f64,
}

impl LinkConfig {
    pub fn new(e_s: f64, n0: f64) -> Result<Self> {
        if !(e_s > 0.0 && e_s.is_finite() && n0 > 0.0 && n0.is_finite()) {
            return Err(invalid("E_s and N0 must be finite and positive"));
        }
        Ok(Self { e_s, n0 })
    }

    /// Sets `E_s` so that `gamma E_s n_t^2 / N0` equals the requested SNR.
    pub fn from_snr_db(snr_db: f64, spec: &CodebookSpec, n0: f64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(invalid("SNR must be finite"));
        }
        let n_t = spec.n_t() as f64;
        let e_s = 10f64.powf(snr_db / 10.0) * n0 / (spec.gamma() * n_t * n_t);
        Self::new(e_s, n0)
    }

    pub fn sigma2(&self) -> f64 {
        self.n0 / 2.0
    }

    pub fn snr_db(&self, spec: &CodebookSpec) -> f64 {
        let n_t = spec.n_t() as f64;
        10.0 * (spec.gamma() * self.e_s * n_t * n_t / self.n0).log10()
    }
}

/// `E_s H X + N` with `N` drawn from `rng`.
pub fn transmit<R: Rng + ?Sized>(
    h: &ChannelRealization,
    x: &DMatrix<f64>,
    cfg: &LinkConfig,
    rng: &mut R,
) -> DMatrix<f64> {
    let noise = Normal::new(0.0, cfg.sigma2().sqrt()).expect("positive noise variance");
    let mut y = &h.gains * x * cfg.e_s;
    y.iter_mut().for_each(|v| *v += noise.sample(rng));
    y
}

/// Outcome of one detection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Detection {
    pub message: u128,
    /// The equalized matrix was not a codeword and the message was drawn at random.
    pub fallback: bool,
}

/// Exhaustive search for `argmin ||Y - E_s H X||_F^2`; ties go to the smaller message.
pub fn ml_detect(
    y: &DMatrix<f64>,
    h: &ChannelRealization,
    codebook: &Codebook,
    cfg: &LinkConfig,
) -> Detection {
    let scaled = &h.gains * cfg.e_s;
    let mut best = (f64::INFINITY, 0usize);
    for (a, x) in codebook.real().iter().enumerate() {
        let metric = (y - &scaled * x).norm_squared();
        if metric < best.0 {
            best = (metric, a);
        }
    }
    Detection { message: best.1 as u128, fallback: false }
}

/// Per row, sets the `ones` largest-magnitude entries to 1; ties go to the lower column.
pub fn quantize_rows(x_hat: &DMatrix<f64>, ones: usize) -> CodeMatrix {
    let n = x_hat.nrows();
    let cols = x_hat.ncols();
    let mut out = CodeMatrix::zeros(n.max(cols));
    let mut order: Vec<usize> = (0..cols).collect();
    for r in 0..n {
        order.sort_by(|&a, &b| x_hat[(r, b)].abs().total_cmp(&x_hat[(r, a)].abs()).then(a.cmp(&b)));
        for &c in order.iter().take(ones) {
            out.set(r, c, 1);
        }
    }
    out
}

fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let largest = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = largest * m.nrows().max(m.ncols()) as f64 * f64::EPSILON;
    svd.pseudo_inverse(tol).expect("both singular vector sets were computed")
}

/// Zero-forcing equalizer `pinv(E_s H)`.
pub fn zf_equalizer(h: &ChannelRealization, cfg: &LinkConfig) -> DMatrix<f64> {
    pseudo_inverse(&(&h.gains * cfg.e_s))
}

/// Linear MMSE equalizer `(G^T G + N0/2 I)^-1 G^T` for the effective channel `G = E_s H`.
pub fn mmse_equalizer(h: &ChannelRealization, cfg: &LinkConfig) -> DMatrix<f64> {
    let g = &h.gains * cfg.e_s;
    let gt = g.transpose();
    let n_t = g.ncols();
    let gram = &gt * &g + DMatrix::identity(n_t, n_t) * cfg.sigma2();
    match gram.cholesky() {
        Some(chol) => chol.solve(&gt),
        None => pseudo_inverse(&g),
    }
}

fn linear_detect<R: Rng + ?Sized>(
    equalizer: &DMatrix<f64>,
    y: &DMatrix<f64>,
    spec: &CodebookSpec,
    rng: &mut R,
) -> Detection {
    let x_hat = equalizer * y;
    let candidate = quantize_rows(&x_hat, spec.ones());
    if spec.validate(&candidate) {
        if let Ok(message) = spec.decode(&candidate) {
            return Detection { message, fallback: false };
        }
    }
    Detection { message: rng.random_range(0..spec.size()), fallback: true }
}

/// Zero-forcing detection; `rng` only feeds the random fallback.
pub fn zf_detect<R: Rng + ?Sized>(
    y: &DMatrix<f64>,
    h: &ChannelRealization,
    spec: &CodebookSpec,
    cfg: &LinkConfig,
    rng: &mut R,
) -> Detection {
    linear_detect(&zf_equalizer(h, cfg), y, spec, rng)
}

/// MMSE detection; `rng` only feeds the random fallback.
pub fn mmse_detect<R: Rng + ?Sized>(
    y: &DMatrix<f64>,
    h: &ChannelRealization,
    spec: &CodebookSpec,
    cfg: &LinkConfig,
    rng: &mut R,
) -> Detection {
    linear_detect(&mmse_equalizer(h, cfg), y, spec, rng)
}

pub fn detect<R: Rng + ?Sized>(
    detector: Detector,
    y: &DMatrix<f64>,
    h: &ChannelRealization,
    codebook: &Codebook,
    cfg: &LinkConfig,
    rng: &mut R,
) -> Detection {
    match detector {
        Detector::Ml => ml_detect(y, h, codebook, cfg),
        Detector::Zf => zf_detect(y, h, codebook.spec(), cfg, rng),
        Detector::Mmse => mmse_detect(y, h, codebook.spec(), cfg, rng),
    }
}
