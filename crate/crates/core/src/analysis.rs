//! Pairwise error probability, the codeword-error union bound and mutual information.

use std::f64::consts::{E, LN_2, PI};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, ChannelRealization};
use crate::codebook::{CodeMatrix, Codebook};
use crate::detection::LinkConfig;
use crate::error::{invalid, Error, Result};
use crate::exec::map_indices;
use crate::rng::{substream, CHANNEL, MUTUAL_INFO};

/// Gaussian tail probability `Q(w) = erfc(w / sqrt 2) / 2`.
pub fn q_function(w: f64) -> f64 {
    0.5 * libm::erfc(w / std::f64::consts::SQRT_2)
}

/// `||H (X_a - X_b)||_F^2`, summed slot by slot and receiver by receiver.
pub fn distance_sq(xa: &CodeMatrix, xb: &CodeMatrix, h: &DMatrix<f64>) -> f64 {
    let n_t = xa.n();
    let mut total = 0.0;
    for s in 0..n_t {
        for j in 0..h.nrows() {
            let v: f64 = (0..n_t)
                .map(|i| h[(j, i)] * (f64::from(xa.get(i, s)) - f64::from(xb.get(i, s))))
                .sum();
            total += v * v;
        }
    }
    total
}

/// Probability that ML prefers `xb` when `xa` was sent: `Q(E_s ||H (X_a - X_b)|| / sqrt(2 N0))`.
pub fn pep(
    xa: &CodeMatrix,
    xb: &CodeMatrix,
    h: &ChannelRealization,
    cfg: &LinkConfig,
) -> Result<f64> {
    if xa == xb {
        return Err(Error::InvalidPair);
    }
    let d = distance_sq(xa, xb, &h.gains).sqrt();
    Ok(q_function(cfg.e_s * d / (2.0 * cfg.n0).sqrt()))
}

/// Sample sizes and seed for the Monte-Carlo expectations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    /// Channel draws averaged by the union bound.
    pub channel_samples: usize,
    /// `(H, X, N)` draws averaged by the mutual-information estimate.
    pub mi_samples: usize,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self { channel_samples: 1000, mi_samples: 20_000, seed: 0, parallel: true }
    }
}

impl BoundConfig {
    fn validate(&self) -> Result<()> {
        if self.channel_samples == 0 || self.mi_samples == 0 {
            return Err(invalid("sample counts must be positive"));
        }
        Ok(())
    }
}

/// Union bound on the codeword error rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UnionBound {
    /// Average of `2^(1-k) sum_{a<b} PEP`, which may exceed one.
    pub raw: f64,
    pub clamped: f64,
    /// Monte-Carlo standard error of `raw`.
    pub std_error: f64,
}

/// Channel used for sample `index`; the simulator draws trial `index`'s channel the same way.
pub fn shared_channel(model: &ChannelModel, seed: u64, index: u64) -> ChannelRealization {
    model.sample(&mut substream(seed, CHANNEL, index, 0))
}

/// Union bound for a fixed channel.
pub fn union_bound_given_channel(
    codebook: &Codebook,
    h: &ChannelRealization,
    cfg: &LinkConfig,
) -> f64 {
    let images: Vec<DMatrix<f64>> = codebook.real().iter().map(|x| &h.gains * x).collect();
    let scale = cfg.e_s / (2.0 * cfg.n0).sqrt();
    let mut sum = 0.0;
    for a in 0..images.len() {
        for b in a + 1..images.len() {
            sum += q_function(scale * (&images[a] - &images[b]).norm());
        }
    }
    2.0 * sum / codebook.len() as f64
}

/// Monte-Carlo average of the union bound over `bcfg.channel_samples` receiver placements.
pub fn cer_union_bound(
    codebook: &Codebook,
    model: &ChannelModel,
    cfg: &LinkConfig,
    bcfg: &BoundConfig,
) -> Result<UnionBound> {
    bcfg.validate()?;
    let values = map_indices(bcfg.channel_samples, bcfg.parallel, |j| {
        let h = shared_channel(model, bcfg.seed, j as u64);
        union_bound_given_channel(codebook, &h, cfg)
    });
    let (mean, se) = mean_and_se(&values);
    Ok(UnionBound { raw: mean, clamped: mean.min(1.0), std_error: se })
}

/// Differential entropy (bits) of an `n_r x n_t` matrix of i.i.d. Gaussians with variance
/// `sigma2`: `(1/2) log2((2 pi e)^(n_t n_r) sigma2^(n_t n_r))`.
pub fn noise_entropy(n_t: usize, n_r: usize, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(invalid("noise variance must be positive"));
    }
    Ok(0.5 * (n_t * n_r) as f64 * (2.0 * PI * E * sigma2).log2())
}

/// `-log2 f(y | H)` for the equal-weight Gaussian mixture centred on `E_s H X`, evaluated with
/// log-sum-exp.
pub fn mixture_surprisal(y: &DMatrix<f64>, means: &[DMatrix<f64>], sigma2: f64) -> f64 {
    let dims = y.nrows() * y.ncols();
    surprisal_from_distances(means.iter().map(|mu| (y - mu).norm_squared()), dims, sigma2)
}

/// Same as [`mixture_surprisal`] given the squared distances `||y - mu_b||^2` directly.
fn surprisal_from_distances<I: Iterator<Item = f64>>(dist_sq: I, dims: usize, sigma2: f64) -> f64 {
    let exponents: Vec<f64> = dist_sq.map(|d| -d / (2.0 * sigma2)).collect();
    let peak = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = exponents.iter().map(|e| (e - peak).exp()).sum();
    let ln_mixture = peak + sum.ln() - (exponents.len() as f64).ln();
    let ln_density = ln_mixture - 0.5 * dims as f64 * (2.0 * PI * sigma2).ln();
    -ln_density / LN_2
}

/// Mutual-information estimate in bits per slot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MiEstimate {
    pub bits_per_slot: f64,
    pub std_error: f64,
}

/// `(h(Y|H) - h(N)) / n_t` with `h(Y|H)` estimated from `bcfg.mi_samples` draws of a channel,
/// a uniformly chosen codeword and noise.
pub fn mutual_information(
    codebook: &Codebook,
    model: &ChannelModel,
    cfg: &LinkConfig,
    bcfg: &BoundConfig,
) -> Result<MiEstimate> {
    bcfg.validate()?;
    let n_t = codebook.spec().n_t();
    let n_r = model.geometry.n_r;
    let sigma2 = cfg.sigma2();
    let normal = Normal::new(0.0, sigma2.sqrt()).map_err(|e| invalid(e.to_string()))?;
    let surprisals = map_indices(bcfg.mi_samples, bcfg.parallel, |i| {
        let h = shared_channel(model, bcfg.seed, i as u64);
        let mut rng = substream(bcfg.seed, MUTUAL_INFO, i as u64, 0);
        let sent = rng.random_range(0..codebook.len());
        let noise = DMatrix::from_fn(n_r, n_t, |_, _| normal.sample(&mut rng));
        // y - mu_b = E_s H (X_sent - X_b) + N, formed without the large common mean.
        let x_sent = &codebook.real()[sent];
        let dist = codebook
            .real()
            .iter()
            .map(|x| (&h.gains * (x_sent - x) * cfg.e_s + &noise).norm_squared());
        surprisal_from_distances(dist, n_r * n_t, sigma2)
    });
    let (h_y, se) = mean_and_se(&surprisals);
    let h_n = noise_entropy(n_t, n_r, sigma2)?;
    Ok(MiEstimate { bits_per_slot: (h_y - h_n) / n_t as f64, std_error: se / n_t as f64 })
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{CodebookSpec, Method};

    /// `Q(w)` by composite Simpson integration of `exp(-w^2/2) * exp(-w t - t^2/2)`.
    fn q_by_quadrature(w: f64) -> f64 {
        let intervals = 200_000;
        let upper = 40.0;
        let step = upper / intervals as f64;
        let g = |t: f64| (-w * t - 0.5 * t * t).exp();
        let mut sum = g(0.0) + g(upper);
        for i in 1..intervals {
            let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += weight * g(i as f64 * step);
        }
        (-0.5 * w * w).exp() * sum * step / 3.0 / (2.0 * PI).sqrt()
    }

    fn spec4() -> CodebookSpec {
        CodebookSpec::new(4, 1, Method::Fill).unwrap()
    }

    #[test]
    fn q_matches_quadrature() {
        for i in 0..=80 {
            let w = i as f64 * 0.1;
            let (q, oracle) = (q_function(w), q_by_quadrature(w));
            assert!(((q - oracle) / oracle).abs() < 1e-10, "w={w} q={q} oracle={oracle}");
        }
        assert_eq!(q_function(0.0), 0.5);
    }

    #[test]
    fn pep_examples() {
        let s = spec4();
        let (xa, xb) = (s.encode(0).unwrap(), s.encode(1).unwrap());
        assert_eq!(xa.hamming_distance(&xb), 4);
        let id = ChannelRealization::from_gains(DMatrix::identity(4, 4));
        let cfg = LinkConfig::new(1.0, 1.0).unwrap();
        let p = pep(&xa, &xb, &id, &cfg).unwrap();
        assert!((p / q_by_quadrature(2f64.sqrt()) - 1.0).abs() < 1e-9);
        assert!((p - 0.078_65).abs() < 1e-5);
        assert!((p - pep(&xb, &xa, &id, &cfg).unwrap()).abs() == 0.0);

        let zero = ChannelRealization::from_gains(DMatrix::zeros(4, 4));
        assert_eq!(pep(&xa, &xb, &zero, &cfg).unwrap(), 0.5);
        assert_eq!(pep(&xa, &xa, &id, &cfg), Err(Error::InvalidPair));

        let mut prev = 1.0;
        for e in [0.1, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let p = pep(&xa, &xb, &id, &LinkConfig::new(e, 1.0).unwrap()).unwrap();
            assert!(p < prev);
            prev = p;
        }
        assert!(prev < 1e-10);
    }

    #[test]
    fn distance_matches_matrix_norm() {
        let s = CodebookSpec::new(5, 2, Method::Fill).unwrap();
        let h = DMatrix::from_fn(3, 5, |j, i| (j * 5 + i) as f64 * 0.1 + 0.3);
        let (xa, xb) = (s.encode(3).unwrap(), s.encode(40).unwrap());
        let direct = (&h * (xa.to_dmatrix() - xb.to_dmatrix())).norm_squared();
        assert!((distance_sq(&xa, &xb, &h) - direct).abs() < 1e-12);
    }

    #[test]
    fn single_pair_bound_is_the_pep() {
        let s = CodebookSpec::new(2, 1, Method::Fill).unwrap();
        let book = Codebook::new(s).unwrap();
        let h = ChannelRealization::from_gains(DMatrix::from_row_slice(1, 2, &[0.3, 0.9]));
        let cfg = LinkConfig::new(2.0, 1.0).unwrap();
        let p = pep(&book.words()[0], &book.words()[1], &h, &cfg).unwrap();
        assert!((union_bound_given_channel(&book, &h, &cfg) - p).abs() < 1e-15);
    }

    #[test]
    fn bound_reports_raw_and_clamped() {
        let book = Codebook::new(spec4()).unwrap();
        let model = ChannelModel::reference(4, 1);
        let cfg = LinkConfig::from_snr_db(0.0, book.spec(), 1.0).unwrap();
        let bcfg = BoundConfig { channel_samples: 50, ..Default::default() };
        let b = cer_union_bound(&book, &model, &cfg, &bcfg).unwrap();
        // all 120 pairs sit near Q(0) = 1/2 at negligible signal
        assert!(b.raw > 7.0 && b.raw <= 7.5);
        assert_eq!(b.clamped, 1.0);
        let serial = cer_union_bound(&book, &model, &cfg, &BoundConfig { parallel: false, ..bcfg });
        assert_eq!(serial.unwrap(), b);
    }

    #[test]
    fn noise_entropy_closed_form() {
        assert!(noise_entropy(1, 1, 1.0 / (2.0 * PI * E)).unwrap().abs() < 1e-12);
        let v = noise_entropy(2, 3, 1.0).unwrap();
        assert!((v - 3.0 * (2.0 * PI * E).log2()).abs() < 1e-12);
        assert!((v - 12.2825).abs() < 1e-3);
        let a = noise_entropy(2, 3, 0.7).unwrap();
        assert!((noise_entropy(4, 3, 0.7).unwrap() - 2.0 * a).abs() < 1e-12);
        assert!(noise_entropy(2, 2, 0.0).is_err());
    }

    #[test]
    fn noise_entropy_monte_carlo() {
        let (n_t, n_r, sigma2) = (2, 3, 1.0);
        let normal = Normal::new(0.0_f64, 1.0).unwrap();
        let mut rng = substream(31, 0, 0, 0);
        let samples = 100_000;
        let mut total = 0.0;
        for _ in 0..samples {
            let sq: f64 = (0..n_t * n_r).map(|_| normal.sample(&mut rng).powi(2)).sum();
            total +=
                (sq / (2.0 * sigma2) + 0.5 * (n_t * n_r) as f64 * (2.0 * PI * sigma2).ln()) / LN_2;
        }
        let estimate = total / samples as f64;
        assert!((estimate - noise_entropy(n_t, n_r, sigma2).unwrap()).abs() < 0.05);
    }

    #[test]
    fn mixture_surprisal_is_finite_at_extremes() {
        let book = Codebook::new(spec4()).unwrap();
        let model = ChannelModel::reference(4, 4);
        for snr in [0.0, 30.0, 60.0, 120.0, 200.0] {
            let cfg = LinkConfig::from_snr_db(snr, book.spec(), 1.0).unwrap();
            let bcfg = BoundConfig { mi_samples: 200, ..Default::default() };
            let mi = mutual_information(&book, &model, &cfg, &bcfg).unwrap();
            assert!(mi.bits_per_slot.is_finite() && mi.std_error.is_finite(), "snr={snr}");
        }
    }

    /// Independent estimator: `k - E[log2 sum_b exp(-(||Y - mu_b||^2 - ||N||^2) / 2 sigma^2)]`
    /// on fresh draws.
    fn mi_paired_oracle(
        book: &Codebook,
        model: &ChannelModel,
        cfg: &LinkConfig,
        n: usize,
    ) -> (f64, f64) {
        let sigma2 = cfg.sigma2();
        let normal = Normal::new(0.0, sigma2.sqrt()).unwrap();
        let mut rng = substream(999, 0, 0, 0);
        let k = f64::from(book.spec().k());
        let vals: Vec<f64> = (0..n)
            .map(|_| {
                let h = model.sample(&mut rng);
                let sent = rng.random_range(0..book.len());
                let noise = DMatrix::from_fn(h.gains.nrows(), book.spec().n_t(), |_, _| {
                    normal.sample(&mut rng)
                });
                let y = &h.gains * &book.real()[sent] * cfg.e_s + &noise;
                let base = noise.norm_squared();
                let exps: Vec<f64> = book
                    .real()
                    .iter()
                    .map(|x| {
                        -((&y - &h.gains * x * cfg.e_s).norm_squared() - base) / (2.0 * sigma2)
                    })
                    .collect();
                let peak = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = peak + exps.iter().map(|e| (e - peak).exp()).sum::<f64>().ln();
                k - lse / LN_2
            })
            .collect();
        let (mean, se) = mean_and_se(&vals);
        let n_t = book.spec().n_t() as f64;
        (mean / n_t, se / n_t)
    }

    #[test]
    fn mutual_information_matches_paired_estimator() {
        let book = Codebook::new(spec4()).unwrap();
        let model = ChannelModel::reference(4, 4);
        for snr in [100.0, 120.0] {
            let cfg = LinkConfig::from_snr_db(snr, book.spec(), 1.0).unwrap();
            let bcfg = BoundConfig { mi_samples: 20_000, seed: 4, ..Default::default() };
            let mi = mutual_information(&book, &model, &cfg, &bcfg).unwrap();
            let (oracle, oracle_se) = mi_paired_oracle(&book, &model, &cfg, 20_000);
            let tol = 3.0 * (mi.std_error.powi(2) + oracle_se.powi(2)).sqrt();
            assert!((mi.bits_per_slot - oracle).abs() < tol, "snr={snr} {mi:?} {oracle}");
        }
    }

    #[test]
    fn mutual_information_limits() {
        let book = Codebook::new(spec4()).unwrap();
        let model = ChannelModel::reference(4, 4);
        let bcfg = BoundConfig { mi_samples: 5_000, seed: 2, ..Default::default() };
        let low = LinkConfig::new(1e-9, 1.0).unwrap();
        let mi = mutual_information(&book, &model, &low, &bcfg).unwrap();
        assert!(mi.bits_per_slot.abs() < 3.0 * mi.std_error + 1e-9, "{mi:?}");
        let high = LinkConfig::from_snr_db(400.0, book.spec(), 1.0).unwrap();
        let mi = mutual_information(&book, &model, &high, &bcfg).unwrap();
        assert!((mi.bits_per_slot - 1.0).abs() < 0.05, "{mi:?}");
    }
}
