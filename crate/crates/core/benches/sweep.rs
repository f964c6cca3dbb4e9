//! Serial vs rayon-parallel sweeps.
//!
//! ```bash
//! cargo bench --bench sweep
//! cargo bench --bench sweep --no-default-features   # both arms run sequentially
//! ```

use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vlcmimo::analysis::{cer_union_bound, mutual_information, BoundConfig};
use vlcmimo::channel::ChannelModel;
use vlcmimo::codebook::{Codebook, CodebookSpec, Method};
use vlcmimo::detection::{Detector, LinkConfig};
use vlcmimo::sim::{run_cer_sweep, SweepPlan, N0};

const MODES: [(&str, bool); 2] = [("serial", false), ("parallel", true)];

fn cer_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("cer_sweep");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    for n_t in [4, 5] {
        let spec = CodebookSpec::new(n_t, 1, Method::Fill).unwrap();
        let mut plan = SweepPlan::new(spec, ChannelModel::reference(n_t, n_t), vec![80.0, 120.0]);
        plan.detectors = vec![Detector::Ml, Detector::Zf, Detector::Mmse];
        plan.trials_per_point = 8000;
        plan.min_errors = u64::MAX;
        for (name, parallel) in MODES {
            let plan = SweepPlan { parallel, ..plan.clone() };
            group.bench_with_input(BenchmarkId::new(name, n_t), &plan, |b, plan| {
                b.iter(|| black_box(run_cer_sweep(plan).unwrap()))
            });
        }
    }
    group.finish();
}

fn bounds_and_mi(c: &mut Criterion) {
    let spec = CodebookSpec::new(5, 1, Method::Fill).unwrap();
    let book = Codebook::new(spec).unwrap();
    let model = ChannelModel::reference(5, 5);
    let cfg = LinkConfig::from_snr_db(80.0, &spec, N0).unwrap();

    let mut group = c.benchmark_group("union_bound");
    group.sample_size(10);
    for (name, parallel) in MODES {
        let bcfg = BoundConfig { channel_samples: 500, parallel, ..BoundConfig::default() };
        group.bench_function(name, |b| {
            b.iter(|| black_box(cer_union_bound(&book, &model, &cfg, &bcfg).unwrap()))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("mutual_information");
    group.sample_size(10);
    for (name, parallel) in MODES {
        let bcfg = BoundConfig { mi_samples: 4000, parallel, ..BoundConfig::default() };
        group.bench_function(name, |b| {
            b.iter(|| black_box(mutual_information(&book, &model, &cfg, &bcfg).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, cer_sweep, bounds_and_mi);
criterion_main!(benches);
