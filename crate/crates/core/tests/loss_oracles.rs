use anglekit::codec::{encode, AnglePrediction, CodecConfig, Method};
use anglekit::geometry::{rotated_iou, AxisAlignedBox, OrientedBox};
use anglekit::loss::{
    cross_entropy, decode_box_deltas, encode_box_deltas, focal_loss, ifl, ifl_weight, mse,
    multitask_loss, smooth_l1, smooth_l1_grad, AnchorBox, AssignedSample, BoxDeltas, LossConfig,
};
use proptest::prelude::*;

fn naive_focal(z: f64, y: bool, alpha: f64, gamma: f64) -> f64 {
    let p = 1.0 / (1.0 + (-z).exp());
    let (pt, at) = if y {
        (p, alpha)
    } else {
        (1.0 - p, 1.0 - alpha)
    };
    -at * (1.0 - pt).powf(gamma) * pt.ln()
}

fn naive_ce(logits: &[f64], k: usize) -> f64 {
    let total: f64 = logits.iter().map(|z| z.exp()).sum();
    -(logits[k].exp() / total).ln()
}

fn naive_giou(a: &AxisAlignedBox, b: &AxisAlignedBox) -> f64 {
    let (ax0, ax1, ay0, ay1) = (
        a.cx - a.w / 2.0,
        a.cx + a.w / 2.0,
        a.cy - a.h / 2.0,
        a.cy + a.h / 2.0,
    );
    let (bx0, bx1, by0, by1) = (
        b.cx - b.w / 2.0,
        b.cx + b.w / 2.0,
        b.cy - b.h / 2.0,
        b.cy + b.h / 2.0,
    );
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let i = iw * ih;
    let u = a.w * a.h + b.w * b.h - i;
    let c = (ax1.max(bx1) - ax0.min(bx0)) * (ay1.max(by1) - ay0.min(by0));
    i / u - (c - u) / c
}

fn naive_smooth_l1(d: f64) -> f64 {
    if d.abs() < 1.0 {
        0.5 * d * d
    } else {
        d.abs() - 0.5
    }
}

fn sample(
    objectness: bool,
    gt: (f64, f64, f64, f64, f64),
    deltas: [f64; 4],
    conf: f64,
    cat: (usize, Vec<f64>),
    angle_logits: [f64; 3],
    t: f64,
) -> AssignedSample {
    AssignedSample {
        objectness,
        anchor: AnchorBox::new(100.0, 80.0, 40.0, 16.0).unwrap(),
        gt_box: OrientedBox::new(gt.0, gt.1, gt.2, gt.3, gt.4).unwrap(),
        gt_category: cat.0,
        pred_deltas: BoxDeltas {
            tx: deltas[0],
            ty: deltas[1],
            tw: deltas[2],
            th: deltas[3],
        },
        pred_conf_logit: conf,
        pred_category_logits: cat.1,
        pred_angle: AnglePrediction {
            class_logits: angle_logits.to_vec(),
            regression_output: Some(t),
        },
        conf_target: objectness,
    }
}

fn fixture() -> Vec<AssignedSample> {
    vec![
        sample(
            true,
            (102.0, 79.0, 44.0, 15.0, 73.5),
            [0.1, -0.05, 0.05, -0.1],
            1.5,
            (2, vec![0.2, -1.0, 2.5]),
            [-2.0, 5.0, -1.0],
            3.4,
        ),
        sample(
            true,
            (98.0, 84.0, 38.0, 18.0, 12.0),
            [-0.02, 0.3, -0.1, 0.2],
            -0.5,
            (0, vec![1.0, 0.5, -0.5]),
            [1.0, 0.0, 0.5],
            3.1,
        ),
        sample(
            false,
            (150.0, 20.0, 30.0, 10.0, 170.0),
            [0.0; 4],
            -2.0,
            (1, vec![0.0, 0.0, 0.0]),
            [0.0, 0.0, 0.0],
            0.0,
        ),
        sample(
            true,
            (101.0, 81.0, 40.0, 17.0, 179.0),
            [0.0, 0.0, 0.0, 0.0],
            0.3,
            (1, vec![-0.3, 0.9, 0.1]),
            [0.3, -0.2, 4.0],
            7.7,
        ),
    ]
}

#[test]
fn four_sample_fixture_matches_term_oracle() {
    let codec = CodecConfig::default_for(Method::Mgar);
    let cfg = LossConfig::default();
    let samples = fixture();
    let got = multitask_loss(&samples, &codec, &cfg).unwrap();

    let mut terms = [0.0f64; 5];
    for s in &samples {
        terms[1] += naive_focal(s.pred_conf_logit, s.conf_target, 0.25, 2.0);
        if !s.objectness {
            continue;
        }
        let a = &s.anchor;
        let d = &s.pred_deltas;
        let pred = AxisAlignedBox {
            cx: a.x + d.tx * a.w,
            cy: a.y + d.ty * a.h,
            w: a.w * d.tw.exp(),
            h: a.h * d.th.exp(),
        };
        let gt = &s.gt_box;
        let gt_xywh = AxisAlignedBox {
            cx: gt.cx(),
            cy: gt.cy(),
            w: gt.w(),
            h: gt.h(),
        };
        terms[0] += 1.0 - naive_giou(&pred, &gt_xywh);
        terms[2] += naive_ce(&s.pred_category_logits, s.gt_category);

        // MGAR with c = 3: bins of 60 degrees, residual regressed as its square root
        let k = (gt.theta() / 60.0).floor() as usize;
        terms[3] += naive_ce(&s.pred_angle.class_logits, k);
        let target_t = (gt.theta() - 60.0 * k as f64).sqrt();
        let logits = &s.pred_angle.class_logits;
        let k_pred = (0..3).fold(0, |best, i| if logits[i] > logits[best] { i } else { best });
        let t = s.pred_angle.regression_output.unwrap();
        let theta = (60.0 * k_pred as f64 + t * t).rem_euclid(180.0);
        let pred_obb = OrientedBox::canonical(pred.cx, pred.cy, pred.w, pred.h, theta).unwrap();
        let iou = rotated_iou(&pred_obb, gt).clamp(1e-6, 1.0);
        terms[4] += naive_smooth_l1(t - target_t) * (1.0 - iou.ln());
    }
    let lambda = [2.0, 2.0, 5.0, 2.0, 0.5];
    let total: f64 = (0..5).map(|i| lambda[i] * terms[i] / 4.0).sum();

    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    assert!(
        close(got.location, terms[0]),
        "{} vs {}",
        got.location,
        terms[0]
    );
    assert!(close(got.confidence, terms[1]));
    assert!(close(got.category, terms[2]));
    assert!(close(got.angle_class, terms[3]));
    assert!(
        close(got.angle_reg, terms[4]),
        "{} vs {}",
        got.angle_reg,
        terms[4]
    );
    assert!(close(got.total, total), "{} vs {total}", got.total);
    assert!(terms.iter().all(|t| *t > 0.0));
}

#[test]
fn multitask_is_bitwise_reproducible() {
    let codec = CodecConfig::default_for(Method::Mgar);
    let a = multitask_loss(&fixture(), &codec, &LossConfig::default()).unwrap();
    let b = multitask_loss(&fixture(), &codec, &LossConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn multitask_rejects_shape_mismatch() {
    let codec = CodecConfig::new(Method::Mgar, 4).unwrap();
    assert!(multitask_loss(&fixture(), &codec, &LossConfig::default()).is_err());
    assert!(multitask_loss(&[], &codec, &LossConfig::default()).is_err());
}

#[test]
fn scalar_examples() {
    assert_eq!(smooth_l1(1.0, 0.0, 1.0), 0.5);
    assert_eq!(smooth_l1(3.0, 0.0, 1.0), 2.5);
    assert_eq!(mse(0.0, 3.0), 9.0);
    assert!((focal_loss(0.0, true, 0.5, 0.0) - 0.5 * 2f64.ln()).abs() < 1e-15);
    assert!(focal_loss(60.0, true, 0.25, 2.0) < 1e-30);
    assert!((cross_entropy(&[0.7; 5], 3).unwrap() - 5f64.ln()).abs() < 1e-12);
    assert!(cross_entropy(&[100.0, 0.0], 0).unwrap() < 1e-40);
    assert!(cross_entropy(&[1.0, 2.0], 2).is_err());
    assert_eq!(ifl_weight(1.0), 1.0);
    assert_eq!(ifl_weight((-1f64).exp()), 2.0);
    let anchor = AnchorBox::new(3.0, 4.0, 5.0, 6.0).unwrap();
    let d = encode_box_deltas(
        &AxisAlignedBox::new(3.0, 4.0, 5.0 * 1f64.exp(), 6.0).unwrap(),
        &anchor,
    )
    .unwrap();
    assert_eq!((d.tx, d.ty, d.tw, d.th), (0.0, 0.0, 1.0, 0.0));
}

#[test]
fn codec_targets_feed_residual_loss() {
    // the regression target of the fixture's first sample is the square root of 13.5
    let t = encode(73.5, &CodecConfig::default_for(Method::Mgar)).unwrap();
    assert_eq!(t.residual_target, Some(13.5f64.sqrt()));
}

proptest! {
    #[test]
    fn box_deltas_round_trip(
        x in -1e3..1e3f64, y in -1e3..1e3f64, w in 0.1..500.0f64, h in 0.1..500.0f64,
        ax in -1e3..1e3f64, ay in -1e3..1e3f64, aw in 0.1..500.0f64, ah in 0.1..500.0f64,
    ) {
        let anchor = AnchorBox::new(ax, ay, aw, ah).unwrap();
        let gt = AxisAlignedBox::new(x, y, w, h).unwrap();
        let back = decode_box_deltas(&encode_box_deltas(&gt, &anchor).unwrap(), &anchor);
        let tol = |v: f64| 1e-10 * (1.0 + v.abs());
        prop_assert!((back.cx - x).abs() <= tol(x) && (back.cy - y).abs() <= tol(y));
        prop_assert!((back.w - w).abs() <= tol(w) && (back.h - h).abs() <= tol(h));
    }

    #[test]
    fn ifl_weight_strictly_decreasing(a in 1e-9..1.0f64, b in 1e-9..=1.0f64) {
        prop_assume!(a < b);
        prop_assert!(ifl_weight(a) > ifl_weight(b));
    }

    #[test]
    fn ifl_dominates_smooth_l1(p in -10.0..10.0f64, t in -10.0..10.0f64, iou in 1e-6..=1.0f64) {
        let base = smooth_l1(p, t, 1.0);
        let v = ifl(p, t, iou).unwrap();
        prop_assert!(v >= base && base >= 0.0);
        prop_assert_eq!(ifl(t, t, iou).unwrap(), 0.0);
    }

    #[test]
    fn smooth_l1_continuous_at_beta(beta in 0.01..5.0f64, t in -5.0..5.0f64) {
        let eps = 1e-9 * beta;
        for s in [1.0, -1.0] {
            let at = t + s * beta;
            prop_assert!((smooth_l1(at - s * eps, t, beta) - smooth_l1(at + s * eps, t, beta)).abs() < 1e-8);
            prop_assert!((smooth_l1_grad(at - s * eps, t, beta) - smooth_l1_grad(at + s * eps, t, beta)).abs() < 1e-8);
        }
    }

    #[test]
    fn mse_dual_evaluation(p in -1e3..1e3f64, t in -1e3..1e3f64) {
        prop_assert!((mse(p, t) - (p * p - 2.0 * p * t + t * t)).abs() <= 1e-12 * (1.0 + p * p + t * t));
    }

    #[test]
    fn focal_matches_closed_form(z in -15.0..15.0f64, y in any::<bool>(), alpha in 0.05..0.95f64, gamma in 0.0..4.0f64) {
        let a = focal_loss(z, y, alpha, gamma);
        prop_assert!((a - naive_focal(z, y, alpha, gamma)).abs() < 1e-10);
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn cross_entropy_matches_softmax(logits in prop::collection::vec(-20.0..20.0f64, 1..12), pick in any::<prop::sample::Index>()) {
        let k = pick.index(logits.len());
        let v = cross_entropy(&logits, k).unwrap();
        prop_assert!(v >= 0.0);
        prop_assert!((v - naive_ce(&logits, k)).abs() < 1e-10);
    }

    #[test]
    fn multitask_permutation_invariant(rot in 0usize..4) {
        let codec = CodecConfig::default_for(Method::Mgar);
        let base = multitask_loss(&fixture(), &codec, &LossConfig::default()).unwrap();
        let mut perm = fixture();
        perm.rotate_left(rot);
        perm.swap(0, 3);
        let other = multitask_loss(&perm, &codec, &LossConfig::default()).unwrap();
        prop_assert!((base.total - other.total).abs() < 1e-12);
        prop_assert!((base.angle_reg - other.angle_reg).abs() < 1e-12);
    }
}
