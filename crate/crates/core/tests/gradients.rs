mod common;

use common::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use splat_align::deform::{deform, deform_backward, DeformationField};
use splat_align::losses::*;
use splat_align::render::RenderGrads;
use splat_align::scene::{ImageBuffer, ImageGrad, VideoClip};

type Case<'a> = (&'static str, LossValue, Box<dyn Fn(&ImageBuffer) -> f64 + 'a>);

/// A field with every layer randomized so no gradient vanishes at init.
fn random_field(r: &mut ChaCha8Rng, hidden: &[usize], opacity: bool) -> DeformationField {
    let mut f = DeformationField::new(hidden, 3, 2, opacity, r.gen());
    for block in f.parameter_blocks_mut() {
        block.iter_mut().for_each(|v| *v = r.gen_range(-0.3..0.3));
    }
    f
}

fn flat_dot(a: &RenderGrads, b: &splat_align::scene::GaussianCloud) -> f64 {
    grads_to_vec(a).iter().zip(cloud_to_vec(b)).map(|(x, y)| x * y).sum()
}

#[test]
fn deform_gradients_match_central_differences() {
    let mut r = rng(20);
    let mut total = FdReport::default();
    for case in 0..6 {
        let n = r.gen_range(1..=4);
        let cloud = random_cloud(&mut r, n, 0.5);
        let field = random_field(&mut r, &[8, 8], case % 2 == 0);
        let t = r.gen_range(0.0..1.0);
        let up = random_render_grads(&mut r, n);
        let (fg, cg) = deform_backward(&cloud, t, &field, &up).unwrap();

        let theta = field_to_vec(&field);
        let analytic: Vec<f64> = fg.weights.iter().zip(&fg.bias).flat_map(|(w, b)| w.iter().chain(b)).copied().collect();
        total.merge(&fd_check(&theta, &analytic, 0..theta.len(), |v| {
            let f = vec_to_field(&field, v);
            (flat_dot(&up, &deform(&cloud, t, &f).unwrap()), relu_pattern(&f, &cloud, t))
        }));

        let x = cloud_to_vec(&cloud);
        total.merge(&fd_check(&x, &grads_to_vec(&cg), 0..x.len(), |v| {
            let c = vec_to_cloud(v, n);
            (flat_dot(&up, &deform(&c, t, &field).unwrap()), relu_pattern(&field, &c, t))
        }));
    }
    assert!(total.worst < FD_TOL, "{total:?}");
    assert!(total.checked > 10 * total.skipped, "{total:?}");
}

fn check_image_grad(x: &ImageBuffer, analytic: &ImageGrad, f: impl Fn(&ImageBuffer) -> f64) -> FdReport {
    let mut flat: Vec<f64> = x.rgb.clone();
    flat.extend(&x.alpha);
    let mut a = analytic.rgb.clone();
    a.extend(&analytic.alpha);
    let n = x.rgb.len();
    fd_check(&flat, &a, 0..flat.len(), |v| {
        let mut y = x.clone();
        y.rgb.copy_from_slice(&v[..n]);
        y.alpha.copy_from_slice(&v[n..]);
        (f(&y), ())
    })
}

#[test]
fn alignment_loss_gradients_match_central_differences() {
    let mut r = rng(21);
    let stack = FeatureStack::new(5);
    let a = random_image(&mut r, 16, 16);
    let b = random_image(&mut r, 16, 16);
    let cases: Vec<Case> = vec![
        ("mse", mse_loss(&a, &b).unwrap(), Box::new(|x| mse_loss(x, &b).unwrap().value)),
        ("mask", mask_loss(&a, &b).unwrap(), Box::new(|x| mask_loss(x, &b).unwrap().value)),
        (
            "perceptual",
            perceptual_loss(&a, &b, &stack).unwrap(),
            Box::new(|x| perceptual_loss(x, &b, &stack).unwrap().value),
        ),
        (
            "texture",
            texture_alignment(&a, &b, 0.1, &stack).unwrap(),
            Box::new(|x| texture_alignment(x, &b, 0.1, &stack).unwrap().value),
        ),
    ];
    for (name, loss, f) in cases {
        let rep = check_image_grad(&a, loss.grad(), f);
        assert!(rep.worst < FD_TOL && rep.skipped == 0, "{name}: {rep:?}");
    }
}

#[test]
fn multi_image_loss_gradients_match_central_differences() {
    let mut r = rng(22);
    let stack = FeatureStack::new(6);
    let xs: Vec<ImageBuffer> = (0..3).map(|_| random_image(&mut r, 16, 16)).collect();
    let ys: Vec<ImageBuffer> = (0..3).map(|_| random_image(&mut r, 16, 16)).collect();
    let clip = VideoClip::new(ys.clone()).unwrap();
    let ga = geometry_alignment(&xs, &ys, 0.1, &stack).unwrap();
    let ma = motion_alignment(&xs, &clip).unwrap();
    for k in 0..3 {
        let with = |x: &ImageBuffer| {
            let mut v = xs.clone();
            v[k] = x.clone();
            v
        };
        let rep = check_image_grad(&xs[k], &ga.grads[k], |x| geometry_alignment(&with(x), &ys, 0.1, &stack).unwrap().value);
        assert!(rep.worst < FD_TOL, "geometry view {k}: {rep:?}");
        let rep = check_image_grad(&xs[k], &ma.grads[k], |x| motion_alignment(&with(x), &clip).unwrap().value);
        assert!(rep.worst < FD_TOL, "motion frame {k}: {rep:?}");
    }
}
