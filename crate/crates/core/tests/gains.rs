use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spas_core::certify::gain_search;
use spas_core::examples::{ex1_build, ex1_certificate, ex1_sstar, BiasedGradientSystem};
use spas_core::geometry::{ConstraintSet, Point, SamplingPlan, TargetSet};
use spas_core::system::GainVector;

const HORIZON: usize = 400;

#[test]
fn terminal_radius_shrinks_with_gain() {
    let plan = SamplingPlan::default().with_directions(128);
    // rotation on the disc: s never vanishes on the target, so iterates spiral out of it
    let disc = TargetSet::ball(&[0.0, 0.0], 1.0);
    let proj = disc.clone();
    let s = move |y: &Point| {
        let p = proj.project(y).unwrap();
        y - &p + Point::from_vec(vec![-p[1], p[0]])
    };
    let ex = BiasedGradientSystem::new(disc, s, 1.0, ConstraintSet::all_space(2)).unwrap();
    let (sys, v) = ex1_build(&ex, &plan).unwrap();
    let s_star = ex1_sstar(&ex, &plan).unwrap();
    let spec = ex1_certificate(&ex.target, 1.0, 1.0, s_star, 4.0, 1.0, 1.0).unwrap();
    let alpha_hat = gain_search(&sys, &v, &ex.target, |_| Ok(spec.clone()), &plan, 4.0).unwrap().alpha_hat;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let seeds: Vec<Point> = (0..40)
        .map(|_| Point::from_vec(vec![rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)]))
        .collect();
    let terminal = |alpha: f64| {
        let gain = GainVector::scalar(alpha);
        seeds
            .iter()
            .flat_map(|x0| sys.rollout(x0, &gain, HORIZON).unwrap().states.into_iter().skip(HORIZON / 2))
            .map(|x| ex.target.dist(&x).unwrap())
            .fold(0.0f64, f64::max)
    };
    let radii: Vec<f64> = [1.0, 0.5, 0.25].iter().map(|k| terminal(alpha_hat * k)).collect();
    assert!(radii[0] > radii[1] && radii[1] > radii[2] && radii[2] > 0.0, "{radii:?}");
}
