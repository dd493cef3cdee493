use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use xclick_core::grabcut::{fit_gmm, GmmConfig, Rgb};

fn gaussian_blob(rng: &mut ChaCha8Rng, mean: Rgb, sd: f64, n: usize) -> Vec<Rgb> {
    let noise = Normal::new(0.0, sd).unwrap();
    (0..n).map(|_| mean.map(|m| m + noise.sample(rng))).collect()
}

#[test]
fn log_likelihood_never_decreases() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..50 {
        let clusters = rng.random_range(1..=6);
        let mut pixels = Vec::new();
        for _ in 0..clusters {
            let mean = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            let sd = rng.random_range(0.001..0.2);
            let n = rng.random_range(5..120);
            pixels.extend(gaussian_blob(&mut rng, mean, sd, n));
        }
        let cfg = GmmConfig {
            components: rng.random_range(1..=6),
            em_iterations: 20,
            seed: case,
            ..GmmConfig::default()
        };
        let fit = fit_gmm(&pixels, &cfg).unwrap();
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "case {case}: {} -> {}", w[0], w[1]);
        }
        let wsum: f64 = fit.model.components().iter().map(|g| g.weight).sum();
        assert!((wsum - 1.0).abs() < 1e-9);
    }
}

#[test]
fn recovers_two_separated_gaussians() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (a, b) = ([0.2, 0.25, 0.3], [0.8, 0.7, 0.35]);
    let mut pixels = gaussian_blob(&mut rng, a, 0.04, 1500);
    pixels.extend(gaussian_blob(&mut rng, b, 0.04, 1500));
    let cfg = GmmConfig {
        components: 2,
        em_iterations: 30,
        ..GmmConfig::default()
    };
    let fit = fit_gmm(&pixels, &cfg).unwrap();
    for truth in [a, b] {
        let t = Vector3::from(truth);
        let nearest = fit.model.components().iter().map(|g| (g.mean - t).norm()).fold(f64::INFINITY, f64::min);
        assert!(nearest < 0.02, "mean error {nearest}");
    }
}

#[test]
#[allow(clippy::needless_range_loop)]
fn single_component_is_sample_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pixels: Vec<Rgb> = (0..400).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let n = pixels.len() as f64;
    let mut mean = [0.0; 3];
    for p in &pixels {
        for c in 0..3 {
            mean[c] += p[c] / n;
        }
    }
    let mut cov = [[0.0; 3]; 3];
    for p in &pixels {
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]) / n;
            }
        }
    }
    let cfg = GmmConfig {
        components: 1,
        ..GmmConfig::default()
    };
    let fit = fit_gmm(&pixels, &cfg).unwrap();
    let g = &fit.model.components()[0];
    assert!((g.weight - 1.0).abs() < 1e-12);
    for i in 0..3 {
        assert!((g.mean[i] - mean[i]).abs() < 1e-9);
        for j in 0..3 {
            // Uniform samples have variances near 1/12, well above the floor.
            assert!((g.covariance[(i, j)] - cov[i][j]).abs() < 1e-9);
        }
    }
}
