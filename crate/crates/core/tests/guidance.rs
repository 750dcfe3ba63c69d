mod common;

use common::*;
use rand::Rng;
use splat_align::guidance::*;
use splat_align::scene::{DiffusionSchedule, ImageBuffer, RgbPlane};
use splat_align::Error;

fn closed_form(x: &ImageBuffer, target: &ImageBuffer, tau: u32, s: &DiffusionSchedule) -> Vec<f64> {
    let (a, sg) = (s.alpha(tau).unwrap(), s.sigma(tau).unwrap());
    x.rgb.iter().zip(&target.rgb).map(|(xv, tv)| s.weight(tau) * a / sg * (xv - tv)).collect()
}

#[test]
fn sds_matches_closed_form_and_ignores_noise() {
    let mut r = rng(30);
    for _ in 0..25 {
        let s = DiffusionSchedule::with_weight(r.gen_range(0.1..2.0));
        let x = random_image(&mut r, 6, 5);
        let target = random_image(&mut r, 6, 5);
        let tau = r.gen_range(1..=1000);
        let oracle = MockTargetOracle::new(OracleKind::Image, vec![target.rgb_plane()], s);
        let want = closed_form(&x, &target, tau, &s);
        for _ in 0..2 {
            let eps = RgbPlane::gaussian(&mut r, 6, 5);
            let g = sds_gradient(&x, &oracle, &Condition::None, tau, &eps, &s).unwrap();
            for (a, b) in g.rgb.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b} at tau {tau}");
            }
        }
    }
}

#[test]
fn combined_sds_is_the_vector_sum() {
    let mut r = rng(31);
    let s = DiffusionSchedule::default();
    let x = random_image(&mut r, 4, 4);
    let t1 = random_image(&mut r, 4, 4);
    let t2 = random_image(&mut r, 4, 4);
    let o1 = MockTargetOracle::new(OracleKind::Image, vec![t1.rgb_plane()], s);
    let o2 = MockTargetOracle::new(OracleKind::Video, vec![t2.rgb_plane()], s);
    let pairs: Vec<(&dyn DenoiserOracle, Condition)> = vec![(&o1, Condition::None), (&o2, Condition::None)];
    let tau = 400;
    let shared = combined_sds(&x, &pairs, tau, &[RgbPlane::gaussian(&mut r, 4, 4)], &s).unwrap();
    let independent = combined_sds(
        &x,
        &pairs,
        tau,
        &[RgbPlane::gaussian(&mut r, 4, 4), RgbPlane::gaussian(&mut r, 4, 4)],
        &s,
    )
    .unwrap();
    let (a, b) = (closed_form(&x, &t1, tau, &s), closed_form(&x, &t2, tau, &s));
    for i in 0..a.len() {
        assert!((shared.rgb[i] - (a[i] + b[i])).abs() < 1e-9);
        assert!((independent.rgb[i] - (a[i] + b[i])).abs() < 1e-9);
    }
    assert!(combined_sds(&x, &pairs, tau, &[], &s).is_err());
}

#[test]
fn refinement_gradients_follow_the_stop_gradient_form() {
    let mut r = rng(32);
    let s = DiffusionSchedule::default();
    let renders: Vec<ImageBuffer> = (0..3).map(|_| random_image(&mut r, 8, 8)).collect();
    let targets: Vec<ImageBuffer> = (0..3).map(|_| random_image(&mut r, 8, 8)).collect();
    let video = MockTargetOracle::new(OracleKind::Video, targets.iter().map(|t| t.rgb_plane()).collect(), s);
    let eps = RgbPlane::gaussian(&mut r, 8, 8);
    let tau = 250;
    let l = time_refine_loss(&renders, &video, &Condition::Text("x".into()), tau, &eps, &s).unwrap();
    let n = (8 * 8 * 3) as f64;
    let mut value = 0.0;
    for k in 0..3 {
        let cf = closed_form(&renders[k], &targets[k], tau, &s);
        for (g, c) in l.grads[k].rgb.iter().zip(&cf) {
            assert!((g - c / (n * 3.0)).abs() < 1e-12);
        }
        value += cf.iter().map(|c| c * c).sum::<f64>() / n / 3.0;
    }
    assert!((l.value - value).abs() < 1e-9 * value.max(1.0));

    let mv = MockTargetOracle::new(OracleKind::Multiview, vec![targets[0].rgb_plane()], s);
    let l = mv_refine_loss(&renders[..2], &mv, &targets[1], tau, &eps, &s).unwrap();
    let cf = closed_form(&renders[1], &targets[0], tau, &s);
    for (g, c) in l.grads[1].rgb.iter().zip(&cf) {
        assert!((g - c / (n * 2.0)).abs() < 1e-12);
    }
}

#[test]
fn refinement_checks_oracle_kind() {
    let s = DiffusionSchedule::default();
    let img = ImageBuffer::new(4, 4);
    let o = MockTargetOracle::new(OracleKind::Image, vec![img.rgb_plane()], s);
    let eps = RgbPlane::zeros(4, 4);
    assert!(time_refine_loss(std::slice::from_ref(&img), &o, &Condition::None, 10, &eps, &s).is_err());
    assert!(mv_refine_loss(std::slice::from_ref(&img), &o, &img, 10, &eps, &s).is_err());
}

#[test]
fn timestep_out_of_range_rejected() {
    let s = DiffusionSchedule::default();
    let img = ImageBuffer::new(4, 4);
    let o = MockTargetOracle::new(OracleKind::Image, vec![img.rgb_plane()], s);
    let eps = RgbPlane::zeros(4, 4);
    for tau in [0, 1001] {
        assert!(matches!(
            sds_gradient(&img, &o, &Condition::None, tau, &eps, &s),
            Err(Error::InvalidParameter(_))
        ));
    }
}

struct Broken;

impl DenoiserOracle for Broken {
    fn kind(&self) -> OracleKind {
        OracleKind::Image
    }

    fn predict_noise(&self, z: &[RgbPlane], _: &Condition, _: u32) -> splat_align::Result<Vec<RgbPlane>> {
        Ok(z.iter().map(|p| RgbPlane::zeros(p.width + 1, p.height)).collect())
    }
}

#[test]
fn misshaped_prediction_is_unavailable() {
    let s = DiffusionSchedule::default();
    let img = ImageBuffer::new(4, 4);
    let err = sds_gradient(&img, &Broken, &Condition::None, 10, &RgbPlane::zeros(4, 4), &s).unwrap_err();
    assert!(matches!(&err, Error::OracleUnavailable { detail, .. } if detail.contains("shape")));
}

fn gradient_pair(seed: u64) -> [ImageBuffer; 2] {
    let mut r = rng(seed);
    [random_image(&mut r, 8, 8), random_image(&mut r, 8, 8)]
}

#[test]
fn conflicting_oracles_settle_on_the_average() {
    let targets = gradient_pair(33);
    let setup = ConflictSetup {
        start: ImageBuffer::filled(8, 8, [0.5; 3], 1.0),
        targets: targets.clone(),
        anchor: None,
        steps: 300,
        learning_rate: 0.05,
        lambda: 0.0,
        seed: 1,
    };
    let run = conflict_descent(&setup).unwrap();
    assert!(*run.distance_to_average.last().unwrap() < 1e-3);

    let anchored = conflict_descent(&ConflictSetup {
        anchor: Some((targets[0].clone(), 1.0)),
        ..setup
    })
    .unwrap();
    let free = run.image.mse(&targets[0]);
    assert!(*anchored.distance_to_anchor.last().unwrap() <= 0.5 * free);
}
