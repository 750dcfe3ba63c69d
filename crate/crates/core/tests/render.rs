mod common;

use common::*;
use rand::Rng;
use splat_align::render::{render, render_backward, render_mesh, render_with_stats};
use splat_align::scene::{Camera, GaussianCloud, TriMesh};

#[test]
fn tiles_match_brute_force() {
    let mut r = rng(10);
    for _ in 0..40 {
        let n = r.gen_range(1..=64);
        let (w, h) = (r.gen_range(8..=48), r.gen_range(8..=48));
        let cloud = random_cloud(&mut r, n, 0.8);
        let cam = Camera::front(3.0, r.gen_range(30.0..60.0), w, h);
        let bg = [r.gen(), r.gen(), r.gen()];
        let fast = render(&cloud, &cam, bg).unwrap();
        let slow = naive_render(&cloud, &cam, bg);
        let diff = fast.rgb.iter().zip(&slow.rgb).chain(fast.alpha.iter().zip(&slow.alpha));
        let worst = diff.map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-6, "max diff {worst}");
    }
}

#[test]
fn oblique_view_matches_brute_force() {
    let mut r = rng(11);
    let cloud = random_cloud(&mut r, 40, 0.6);
    let cam = Camera::orbit(70.0, 20.0, 3.0, 40.0, 40, 33);
    let fast = render(&cloud, &cam, [0.1, 0.2, 0.3]).unwrap();
    let slow = naive_render(&cloud, &cam, [0.1, 0.2, 0.3]);
    let worst = fast.rgb.iter().zip(&slow.rgb).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-6);
}

#[test]
fn splat_behind_camera_is_ignored() {
    let mut cloud = GaussianCloud::default();
    cloud.push([0.0, 0.0, -5.0], [1.0, 0.0, 0.0, 0.0], [0.0; 3], [1.0; 3], 3.0);
    let cam = Camera::front(3.0, 30.0, 16, 16);
    let (img, stats) = render_with_stats(&cloud, &cam, [0.0; 3]).unwrap();
    assert_eq!(stats.visible, 0);
    assert!(img.alpha.iter().all(|a| *a == 0.0));
}

#[test]
fn render_gradients_match_central_differences() {
    let mut r = rng(12);
    let mut total = FdReport::default();
    for _ in 0..8 {
        let n = r.gen_range(1..=6);
        let cloud = random_cloud(&mut r, n, 0.5);
        let cam = Camera::front(3.0, 40.0, 16, 16);
        let up = random_grad(&mut r, 16, 16);
        let bg = [0.2, 0.1, 0.3];
        let analytic = grads_to_vec(&render_backward(&cloud, &cam, bg, &up).unwrap());
        let x = cloud_to_vec(&cloud);
        let rep = fd_check(&x, &analytic, 0..x.len(), |v| {
            let (img, stats) = render_with_stats(&vec_to_cloud(v, n), &cam, bg).unwrap();
            (dot(&up, &img), stats.signature)
        });
        total.merge(&rep);
    }
    assert!(total.worst < FD_TOL, "{total:?}");
    assert!(total.checked > 4 * total.skipped, "{total:?}");
}

#[test]
fn mesh_render_is_deterministic_and_covers_centre() {
    let mesh = TriMesh::icosphere(0.5, 1, [0.2, 0.7, 0.4]);
    let cam = Camera::front(2.5, 60.0, 32, 32);
    let a = render_mesh(&mesh, &cam, [0.0; 3]).unwrap();
    assert_eq!(a, render_mesh(&mesh, &cam, [0.0; 3]).unwrap());
    assert_eq!(a.alpha_at(16, 16), 1.0);
    assert_eq!(a.rgb_at(16, 16), [0.2, 0.7, 0.4]);
    assert_eq!(a.alpha_at(0, 0), 0.0);
}
