//! Monte-Carlo SNR sweeps: codeword error rate per detector, union-bound overlay and mutual
//! information.
//!
//! One trial draws a receiver placement, a uniform message and a noise block, and hands the same
//! received block to every requested detector, so detector comparisons are paired. Channel,
//! message and noise are keyed by the trial alone, so every SNR point (and the union bound) sees
//! the same draws and only `E_s` changes; the ML error set then shrinks pathwise as SNR grows.
//! Fallback guesses of the linear detectors are keyed by `(seed, snr index, detector, trial)`.
//! Trials run in fixed-size batches and early stopping is checked between batches, which keeps
//! serial and parallel runs identical.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{cer_union_bound, mutual_information, shared_channel, BoundConfig};
use crate::channel::ChannelModel;
use crate::codebook::{Codebook, CodebookSpec};
use crate::detection::{detect, transmit, Detector, LinkConfig};
use crate::error::{invalid, Result};
use crate::exec::map_indices;
use crate::rng::{substream, DATA, FALLBACK};

/// Noise level used by every sweep; the SNR only steers `E_s`.
pub const N0: f64 = 1.0;

/// Everything a sweep needs; together with the seed it determines every output bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub spec: CodebookSpec,
    pub model: ChannelModel,
    pub snr_grid_db: Vec<f64>,
    pub detectors: Vec<Detector>,
    /// Trial cap per SNR point.
    pub trials_per_point: u64,
    /// A point stops once every detector has at least this many errors.
    pub min_errors: u64,
    pub seed: u64,
    /// Consecutive trials sharing one channel realization.
    pub channel_hold: u64,
    /// Trials per batch between early-stopping checks.
    pub batch_size: u64,
    pub bound: BoundConfig,
    pub parallel: bool,
}

impl SweepPlan {
    /// Plan with the default trial budget: at most `10^6` trials, 200 errors, batches of 1000.
    pub fn new(spec: CodebookSpec, model: ChannelModel, snr_grid_db: Vec<f64>) -> Self {
        Self {
            spec,
            model,
            snr_grid_db,
            detectors: vec![Detector::Ml],
            trials_per_point: 1_000_000,
            min_errors: 200,
            seed: 0,
            channel_hold: 1,
            batch_size: 1000,
            bound: BoundConfig::default(),
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_grid_db.is_empty() {
            return Err(invalid("SNR grid is empty"));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(invalid("SNR grid holds a non-finite value"));
        }
        if self.trials_per_point == 0 || self.batch_size == 0 || self.channel_hold == 0 {
            return Err(invalid("trial count, batch size and channel hold must be positive"));
        }
        if self.model.geometry.n_t != self.spec.n_t() {
            return Err(invalid(format!(
                "channel has {} transmitters, codebook needs {}",
                self.model.geometry.n_t,
                self.spec.n_t()
            )));
        }
        self.model.geometry.validate()?;
        self.model.optics.validate()?;
        Ok(())
    }

    fn bound_config(&self) -> BoundConfig {
        BoundConfig { seed: self.seed, parallel: self.parallel, ..self.bound }
    }
}

/// One output row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub snr_db: f64,
    pub detector: Option<Detector>,
    pub trials: Option<u64>,
    pub errors: Option<u64>,
    pub cer: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub fallbacks: Option<u64>,
    pub bound_raw: Option<f64>,
    pub bound_clamped: Option<f64>,
    pub mi: Option<f64>,
    pub mi_se: Option<f64>,
}

impl PointRecord {
    fn empty(snr_db: f64) -> Self {
        Self {
            snr_db,
            detector: None,
            trials: None,
            errors: None,
            cer: None,
            ci_lo: None,
            ci_hi: None,
            fallbacks: None,
            bound_raw: None,
            bound_clamped: None,
            mi: None,
            mi_se: None,
        }
    }

    /// Binomial standard error of the CER estimate.
    pub fn cer_std_error(&self) -> Option<f64> {
        let (p, n) = (self.cer?, self.trials? as f64);
        Some((p * (1.0 - p) / n).sqrt())
    }
}

/// Sweep output plus the plan that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub plan: SweepPlan,
    pub version: String,
    pub records: Vec<PointRecord>,
}

impl SweepResult {
    fn new(plan: &SweepPlan, records: Vec<PointRecord>) -> Self {
        Self { plan: plan.clone(), version: env!("CARGO_PKG_VERSION").to_string(), records }
    }

    /// Records of one detector in grid order.
    pub fn detector(&self, detector: Detector) -> Vec<&PointRecord> {
        self.records.iter().filter(|r| r.detector == Some(detector)).collect()
    }
}

/// 95% Wilson score interval for `errors` out of `trials`.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = errors as f64 / n;
    let denom = 1.0 + Z * Z / n;
    let centre = (p + Z * Z / (2.0 * n)) / denom;
    let half = Z * (p * (1.0 - p) / n + Z * Z / (4.0 * n * n)).sqrt() / denom;
    let lo = if errors == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if errors == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Copy, Default)]
struct Tally {
    errors: u64,
    fallbacks: u64,
}

fn run_trial(
    plan: &SweepPlan,
    codebook: &Codebook,
    cfg: &LinkConfig,
    snr_index: u64,
    trial: u64,
) -> Vec<(bool, bool)> {
    let h = shared_channel(&plan.model, plan.seed, trial / plan.channel_hold);
    let mut data = substream(plan.seed, DATA, trial, 0);
    let sent = data.random_range(0..codebook.len());
    let y = transmit(&h, &codebook.real()[sent], cfg, &mut data);
    plan.detectors
        .iter()
        .enumerate()
        .map(|(d, &detector)| {
            let mut fallback_rng = substream(plan.seed, FALLBACK, snr_index * 16 + d as u64, trial);
            let out = detect(detector, &y, &h, codebook, cfg, &mut fallback_rng);
            (out.message != sent as u128, out.fallback)
        })
        .collect()
}

fn cer_point(
    plan: &SweepPlan,
    codebook: &Codebook,
    snr_index: usize,
    snr_db: f64,
) -> Result<Vec<PointRecord>> {
    let cfg = LinkConfig::from_snr_db(snr_db, &plan.spec, N0)?;
    let mut tallies = vec![Tally::default(); plan.detectors.len()];
    let mut trials = 0u64;
    while trials < plan.trials_per_point {
        let batch = plan.batch_size.min(plan.trials_per_point - trials);
        let outcomes = map_indices(batch as usize, plan.parallel, |i| {
            run_trial(plan, codebook, &cfg, snr_index as u64, trials + i as u64)
        });
        for outcome in outcomes {
            for (tally, (error, fallback)) in tallies.iter_mut().zip(outcome) {
                tally.errors += u64::from(error);
                tally.fallbacks += u64::from(fallback);
            }
        }
        trials += batch;
        if tallies.iter().all(|t| t.errors >= plan.min_errors) {
            break;
        }
    }
    Ok(plan
        .detectors
        .iter()
        .zip(tallies)
        .map(|(&detector, tally)| {
            let (lo, hi) = wilson_interval(tally.errors, trials);
            PointRecord {
                detector: Some(detector),
                trials: Some(trials),
                errors: Some(tally.errors),
                cer: Some(tally.errors as f64 / trials as f64),
                ci_lo: Some(lo),
                ci_hi: Some(hi),
                fallbacks: Some(tally.fallbacks),
                ..PointRecord::empty(snr_db)
            }
        })
        .collect())
}

/// Simulated codeword error rate for every SNR point and detector.
pub fn run_cer_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    plan.validate()?;
    if plan.detectors.is_empty() {
        return Err(invalid("no detectors requested"));
    }
    let codebook = Codebook::new(plan.spec)?;
    let mut records = Vec::new();
    for (i, &snr) in plan.snr_grid_db.iter().enumerate() {
        records.extend(cer_point(plan, &codebook, i, snr)?);
    }
    Ok(SweepResult::new(plan, records))
}

/// Union bound at every SNR point over the shared channel set.
pub fn run_bound_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    plan.validate()?;
    let codebook = Codebook::new(plan.spec)?;
    let bcfg = plan.bound_config();
    let mut records = Vec::new();
    for &snr in &plan.snr_grid_db {
        let cfg = LinkConfig::from_snr_db(snr, &plan.spec, N0)?;
        let bound = cer_union_bound(&codebook, &plan.model, &cfg, &bcfg)?;
        records.push(PointRecord {
            bound_raw: Some(bound.raw),
            bound_clamped: Some(bound.clamped),
            ..PointRecord::empty(snr)
        });
    }
    Ok(SweepResult::new(plan, records))
}

/// Mutual information at every SNR point.
pub fn run_mi_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    plan.validate()?;
    let codebook = Codebook::new(plan.spec)?;
    let bcfg = plan.bound_config();
    let mut records = Vec::new();
    for &snr in &plan.snr_grid_db {
        let cfg = LinkConfig::from_snr_db(snr, &plan.spec, N0)?;
        let mi = mutual_information(&codebook, &plan.model, &cfg, &bcfg)?;
        records.push(PointRecord {
            mi: Some(mi.bits_per_slot),
            mi_se: Some(mi.std_error),
            ..PointRecord::empty(snr)
        });
    }
    Ok(SweepResult::new(plan, records))
}

/// CER rows for the plan's detectors (if any) with bound and mutual-information columns filled
/// in on every row of the same SNR point.
pub fn run_sweep(plan: &SweepPlan, with_bound: bool, with_mi: bool) -> Result<SweepResult> {
    plan.validate()?;
    let per_point = |run: fn(&SweepPlan) -> Result<SweepResult>, wanted: bool| {
        if wanted {
            run(plan).map(|r| Some(r.records))
        } else {
            Ok(None)
        }
    };
    let bounds = per_point(run_bound_sweep, with_bound)?;
    let mis = per_point(run_mi_sweep, with_mi)?;
    let mut records = if plan.detectors.is_empty() {
        plan.snr_grid_db.iter().map(|&s| PointRecord::empty(s)).collect()
    } else {
        run_cer_sweep(plan)?.records
    };
    let per_snr = records.len() / plan.snr_grid_db.len();
    for (i, record) in records.iter_mut().enumerate() {
        let point = i / per_snr;
        if let Some(b) = &bounds {
            record.bound_raw = b[point].bound_raw;
            record.bound_clamped = b[point].bound_clamped;
        }
        if let Some(m) = &mis {
            record.mi = m[point].mi;
            record.mi_se = m[point].mi_se;
        }
    }
    Ok(SweepResult::new(plan, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::Method;

    fn plan(n_r: usize, grid: Vec<f64>) -> SweepPlan {
        let spec = CodebookSpec::new(4, 1, Method::Fill).unwrap();
        let mut p = SweepPlan::new(spec, ChannelModel::reference(4, n_r), grid);
        p.trials_per_point = 2000;
        p.min_errors = 50;
        p.batch_size = 250;
        p.seed = 42;
        p
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.03 && hi < 0.04);
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo < 0.5 && hi > 0.5 && (0.5 - lo - (hi - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn invalid_plans() {
        assert!(run_cer_sweep(&plan(1, vec![])).is_err());
        let mut p = plan(1, vec![0.0]);
        p.trials_per_point = 0;
        assert!(run_cer_sweep(&p).is_err());
        let mut p = plan(1, vec![0.0]);
        p.model = ChannelModel::reference(5, 1);
        assert!(run_cer_sweep(&p).is_err());
        let mut p = plan(1, vec![0.0]);
        p.detectors.clear();
        assert!(run_cer_sweep(&p).is_err());
    }

    #[test]
    fn early_stop_and_counts() {
        let mut p = plan(1, vec![0.0, 10.0]);
        p.detectors = vec![Detector::Ml, Detector::Zf, Detector::Mmse];
        let r = run_cer_sweep(&p).unwrap();
        assert_eq!(r.records.len(), 6);
        for rec in &r.records {
            // near-zero signal: every detector errs almost always, so one batch suffices
            assert_eq!(rec.trials, Some(250));
            assert!(rec.errors.unwrap() <= rec.trials.unwrap());
            assert_eq!(rec.cer.unwrap(), rec.errors.unwrap() as f64 / 250.0);
            assert!(
                rec.ci_lo.unwrap() <= rec.cer.unwrap() && rec.cer.unwrap() <= rec.ci_hi.unwrap()
            );
        }
    }

    #[test]
    fn serial_and_parallel_agree() {
        let mut p = plan(2, vec![60.0, 90.0]);
        p.detectors = vec![Detector::Ml, Detector::Zf];
        p.channel_hold = 3;
        let a = run_cer_sweep(&p).unwrap();
        let b = run_cer_sweep(&SweepPlan { parallel: false, ..p.clone() }).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(run_cer_sweep(&p).unwrap(), a);
    }

    #[test]
    fn ml_errors_nest_across_snr() {
        let mut p = plan(2, vec![50.0, 60.0, 70.0, 80.0, 100.0]);
        p.min_errors = u64::MAX;
        let errors: Vec<u64> =
            run_cer_sweep(&p).unwrap().records.iter().map(|r| r.errors.unwrap()).collect();
        assert!(errors.windows(2).all(|w| w[1] <= w[0]), "{errors:?}");
        assert!(errors[0] > errors[4]);
    }

    #[test]
    fn combined_sweep_overlays_columns() {
        let mut p = plan(1, vec![0.0, 20.0]);
        p.bound.channel_samples = 20;
        p.bound.mi_samples = 50;
        let r = run_sweep(&p, true, true).unwrap();
        assert_eq!(r.records.len(), 2);
        assert!(r
            .records
            .iter()
            .all(|x| x.bound_raw.is_some() && x.mi.is_some() && x.cer.is_some()));
        p.detectors.clear();
        let r = run_sweep(&p, true, false).unwrap();
        assert!(r.records.iter().all(|x| x.detector.is_none() && x.bound_raw.is_some()));
        assert!(r.records.iter().all(|x| x.mi.is_none()));
    }
}
