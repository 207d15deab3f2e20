use dualq_statcheck::{build_distances, exceedance_test, DtwOptions, Observation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn corpus(rng: &mut ChaCha8Rng, n: usize, mean: f64) -> Vec<Observation> {
    (0..n)
        .map(|_| Observation::Scalar(mean + gaussian(rng)))
        .collect()
}

fn noisy_ramp(rng: &mut ChaCha8Rng, n: usize, slope: f64) -> Vec<Observation> {
    (0..n)
        .map(|_| {
            Observation::Series(
                (0..50)
                    .map(|t| slope * f64::from(t) + gaussian(rng))
                    .collect(),
            )
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn same_generator_is_equivalent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p: Vec<f64> = (0..40)
        .map(|_| {
            let ds = build_distances(
                &corpus(&mut rng, 30, 10.0),
                &corpus(&mut rng, 30, 10.0),
                DtwOptions::default(),
            )
            .unwrap();
            exceedance_test(&ds, "x", 30, 30).unwrap().p_hat_max
        })
        .collect();
    let med = median(p.clone());
    assert!(med < 0.05, "median {med}, all {p:?}");
}

#[test]
fn shifted_generator_is_not_equivalent() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let ds = build_distances(
            &corpus(&mut rng, 30, 10.0),
            &corpus(&mut rng, 30, 15.0),
            DtwOptions::default(),
        )
        .unwrap();
        let r = exceedance_test(&ds, "x", 30, 30).unwrap();
        assert!(r.p_hat_max > 0.5, "{r:?}");
        assert!(!r.reject_h0);
    }
}

#[test]
fn series_corpora_separate_by_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let same = build_distances(
        &noisy_ramp(&mut rng, 15, 0.2),
        &noisy_ramp(&mut rng, 15, 0.2),
        DtwOptions::default(),
    )
    .unwrap();
    let same = exceedance_test(&same, "series", 15, 15).unwrap();
    let diff = build_distances(
        &noisy_ramp(&mut rng, 15, 0.2),
        &noisy_ramp(&mut rng, 15, 0.6),
        DtwOptions::default(),
    )
    .unwrap();
    let diff = exceedance_test(&diff, "series", 15, 15).unwrap();
    assert!(same.p_hat_max < diff.p_hat_max);
    assert!(diff.p_hat_max > 0.5, "{diff:?}");
}
