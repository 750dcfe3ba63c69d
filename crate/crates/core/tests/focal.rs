use splat_align::focal::*;
use splat_align::render::render_mesh;
use splat_align::scene::{Camera, ImageBuffer, TriMesh};

fn scene() -> TriMesh {
    let mut m = TriMesh::icosphere(0.45, 2, [0.8, 0.3, 0.2]);
    m.merge(&TriMesh::cuboid([0.3, -0.1, -0.1], [0.8, 0.1, 0.1], [0.2, 0.8, 0.9]));
    m
}

fn config(initial: f64) -> FocalSweepConfig {
    FocalSweepConfig::from_options(
        &FocalOptions {
            initial: Some(initial),
            ..FocalOptions::default()
        },
        Camera::front(3.0, 1.0, 128, 128),
        [0.0; 3],
    )
}

#[test]
fn off_grid_focal_is_within_one_step() {
    let mesh = scene();
    let cfg = config(400.0);
    let frame = render_mesh(&mesh, &cfg.pose.with_focal(412.7), [0.0; 3]).unwrap();
    let s = sweep_focal(&mesh, &frame, &cfg).unwrap();
    assert_eq!(s.candidates.len(), 33);
    assert!((s.focal - 412.7).abs() <= 4.0, "{}", s.focal);
    let best = s.mse.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(s.mse[s.candidates.iter().position(|f| *f == s.focal).unwrap()], best);
}

#[test]
fn refinement_narrows_the_error() {
    let mesh = scene();
    let mut cfg = config(400.0);
    let frame = render_mesh(&mesh, &cfg.pose.with_focal(413.3), [0.0; 3]).unwrap();
    let coarse = sweep_focal(&mesh, &frame, &cfg).unwrap();
    cfg.refine = true;
    let fine = sweep_focal(&mesh, &frame, &cfg).unwrap();
    assert_eq!(fine.candidates.len(), 66);
    assert!((fine.focal - 413.3).abs() <= (coarse.focal - 413.3).abs());
    assert!((fine.focal - 413.3).abs() <= 0.5);
}

#[test]
fn sweeps_are_deterministic() {
    let mesh = scene();
    let cfg = config(400.0);
    let frame = render_mesh(&mesh, &cfg.pose.with_focal(390.0), [0.0; 3]).unwrap();
    assert_eq!(sweep_focal(&mesh, &frame, &cfg).unwrap(), sweep_focal(&mesh, &frame, &cfg).unwrap());
}

#[test]
fn mismatched_frame_rejected() {
    let err = sweep_focal(&scene(), &ImageBuffer::new(64, 64), &config(400.0));
    assert!(err.is_err());
}

#[test]
fn non_positive_candidates_score_infinite() {
    let mesh = scene();
    let cfg = config(40.0);
    let frame = render_mesh(&mesh, &cfg.pose.with_focal(60.0), [0.0; 3]).unwrap();
    let s = sweep_focal(&mesh, &frame, &cfg).unwrap();
    for (f, m) in s.candidates.iter().zip(&s.mse) {
        assert_eq!(*f <= 0.0, m.is_infinite());
    }
}

#[test]
fn jitter_is_uniform_around_f() {
    let (f, m) = (100.0, 8.0);
    let draws: Vec<f64> = (0..10_000).map(|s| jitter_focal(f, m, s).unwrap()).collect();
    assert!(draws.iter().all(|d| (f - m..=f + m).contains(d)));
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    // uniform on [-m, m] has standard deviation m / sqrt(3)
    let se = m / 3f64.sqrt() / (draws.len() as f64).sqrt();
    assert!((mean - f).abs() < 3.0 * se, "mean {mean}");
    let spread = draws.iter().cloned().fold(f64::MIN, f64::max) - draws.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread > 1.9 * m);
}
