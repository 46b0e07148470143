use std::hint::black_box;

use anglekit::codec::{decode, empirical_errors, encode, CodecConfig, Method};
use anglekit::loss::{encode_box_deltas, multitask_loss, AnchorBox, AssignedSample, LossConfig};
use anglekit::OrientedBox;
use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn round_trip(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let angles: Vec<f64> = (0..1024).map(|_| rng.gen_range(0.0..180.0)).collect();
    for cfg in [
        CodecConfig::default_for(Method::Mgar),
        CodecConfig::default_for(Method::Csl),
        CodecConfig::new(Method::DclGray, 256).unwrap(),
    ] {
        c.bench_function(
            &format!("encode+decode/{} {}", cfg.method(), cfg.c_theta()),
            |b| {
                b.iter(|| {
                    angles
                        .iter()
                        .map(|&t| {
                            decode(
                                &encode(black_box(t), &cfg).unwrap().ideal_prediction(),
                                &cfg,
                            )
                            .unwrap()
                        })
                        .sum::<f64>()
                })
            },
        );
    }
    let csl = CodecConfig::default_for(Method::Csl);
    c.bench_function("empirical_errors/csl step 0.01", |b| {
        b.iter(|| empirical_errors(&csl, black_box(0.01)).unwrap())
    });
}

fn loss(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let codec = CodecConfig::default_for(Method::Mgar);
    let samples: Vec<AssignedSample> = (0..256)
        .map(|_| {
            let gt = OrientedBox::canonical(
                rng.gen_range(0.0..500.0),
                rng.gen_range(0.0..500.0),
                rng.gen_range(5.0..50.0),
                rng.gen_range(5.0..50.0),
                rng.gen_range(0.0..180.0),
            )
            .unwrap();
            let anchor = AnchorBox::new(gt.cx() + 2.0, gt.cy() - 1.0, 30.0, 12.0).unwrap();
            let mut pred = encode(gt.theta(), &codec).unwrap().ideal_prediction();
            pred.regression_output = pred.regression_output.map(|t| t + rng.gen_range(-0.3..0.3));
            let objectness = rng.gen_bool(0.3);
            AssignedSample {
                objectness,
                anchor,
                gt_box: gt,
                gt_category: 0,
                pred_deltas: encode_box_deltas(&gt.xywh(), &anchor).unwrap(),
                pred_conf_logit: rng.gen_range(-3.0..3.0),
                pred_category_logits: vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
                pred_angle: pred,
                conf_target: objectness,
            }
        })
        .collect();
    let cfg = LossConfig::default();
    c.bench_function("multitask_loss/256 samples", |b| {
        b.iter(|| multitask_loss(black_box(&samples), &codec, &cfg).unwrap())
    });
}

criterion_group!(benches, round_trip, loss);
criterion_main!(benches);
