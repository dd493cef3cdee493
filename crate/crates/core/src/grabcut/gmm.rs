//! Full-covariance Gaussian mixtures over RGB.
//!
//! Fitting is k-means++ seeding followed by EM. Covariances are kept above a
//! floor `eps` on every eigenvalue. The M-step solves the floored problem
//! exactly (eigenvalues of the weighted scatter clipped at `eps`), so EM
//! stays a true ascent method and the log-likelihood never decreases.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GrabCutError;

/// Colour with channels in `[0,1]`.
pub type Rgb = [f64; 3];

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub components: usize,
    /// Lower bound on covariance eigenvalues.
    pub floor: f64,
    pub em_iterations: usize,
    pub seed: u64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            components: 5,
            floor: 1e-3,
            em_iterations: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    pub weight: f64,
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    inverse: Matrix3<f64>,
    /// `-(3 ln 2pi + ln det) / 2`
    log_norm: f64,
}

impl Gaussian {
    fn new(weight: f64, mean: Vector3<f64>, covariance: Matrix3<f64>) -> Self {
        let det = covariance.determinant();
        let inverse = covariance.try_inverse().expect("floored covariance is invertible");
        Self {
            weight,
            mean,
            covariance,
            inverse,
            log_norm: -0.5 * (3.0 * LN_2PI + det.ln()),
        }
    }

    /// `ln N(x; mean, cov)`
    pub fn log_density(&self, x: &Vector3<f64>) -> f64 {
        let d = x - self.mean;
        self.log_norm - 0.5 * d.dot(&(self.inverse * d))
    }
}

/// Weighted mixture of [`Gaussian`]s; weights sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmModel {
    components: Vec<Gaussian>,
}

/// A fitted model with its log-likelihood before EM and after each EM step.
#[derive(Clone, Debug)]
pub struct GmmFit {
    pub model: GmmModel,
    pub log_likelihood: Vec<f64>,
}

fn vec3(c: &Rgb) -> Vector3<f64> {
    Vector3::new(c[0], c[1], c[2])
}

/// Eigenvalues of a symmetric matrix clipped from below at `floor`.
pub(crate) fn floor_covariance(s: &Matrix3<f64>, floor: f64) -> Matrix3<f64> {
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let clipped = eig.eigenvalues.map(|l| l.max(floor));
    let v = eig.eigenvectors;
    let out = v * Matrix3::from_diagonal(&clipped) * v.transpose();
    (out + out.transpose()) * 0.5
}

impl GmmModel {
    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    pub fn from_components(parts: Vec<(f64, Rgb, Matrix3<f64>)>) -> Self {
        Self {
            components: parts.into_iter().map(|(w, m, c)| Gaussian::new(w, vec3(&m), c)).collect(),
        }
    }

    /// `-ln sum_k w_k N(rgb; mu_k, Sigma_k)`
    pub fn neg_log_likelihood(&self, rgb: &Rgb) -> f64 {
        -self.log_likelihood(&vec3(rgb))
    }

    fn log_likelihood(&self, x: &Vector3<f64>) -> f64 {
        let mut terms = [f64::NEG_INFINITY; 16];
        let mut buf;
        let logs: &mut [f64] = if self.components.len() <= terms.len() {
            &mut terms[..self.components.len()]
        } else {
            buf = vec![f64::NEG_INFINITY; self.components.len()];
            &mut buf
        };
        for (l, g) in logs.iter_mut().zip(&self.components) {
            if g.weight > 0.0 {
                *l = g.weight.ln() + g.log_density(x);
            }
        }
        log_sum_exp(logs)
    }

    /// Per-component responsibilities of `rgb`; they sum to one.
    pub fn responsibilities(&self, rgb: &Rgb) -> Vec<f64> {
        let x = vec3(rgb);
        let logs: Vec<f64> = self
            .components
            .iter()
            .map(|g| if g.weight > 0.0 { g.weight.ln() + g.log_density(&x) } else { f64::NEG_INFINITY })
            .collect();
        let total = log_sum_exp(&logs);
        logs.iter().map(|l| (l - total).exp()).collect()
    }

    /// Total log-likelihood of a pixel set.
    pub fn total_log_likelihood(&self, pixels: &[Rgb]) -> f64 {
        pixels.iter().map(|p| self.log_likelihood(&vec3(p))).sum()
    }

    /// Runs `iterations` EM steps starting from this model.
    pub fn refine(&self, pixels: &[Rgb], iterations: usize, floor: f64) -> GmmFit {
        let mut model = self.clone();
        let mut trace = vec![model.total_log_likelihood(pixels)];
        for _ in 0..iterations {
            model = model.em_step(pixels, floor);
            trace.push(model.total_log_likelihood(pixels));
        }
        GmmFit {
            model,
            log_likelihood: trace,
        }
    }

    fn em_step(&self, pixels: &[Rgb], floor: f64) -> GmmModel {
        let k = self.components.len();
        let mut mass = vec![0.0; k];
        let mut first = vec![Vector3::zeros(); k];
        let mut resp = vec![0.0; k];
        let mut all = Vec::with_capacity(pixels.len() * k);
        for p in pixels {
            let x = vec3(p);
            for (r, g) in resp.iter_mut().zip(&self.components) {
                *r = if g.weight > 0.0 { g.weight.ln() + g.log_density(&x) } else { f64::NEG_INFINITY };
            }
            let total = log_sum_exp(&resp);
            for j in 0..k {
                let r = (resp[j] - total).exp();
                mass[j] += r;
                first[j] += x * r;
                all.push(r);
            }
        }
        let n = pixels.len() as f64;
        let means: Vec<Vector3<f64>> = (0..k)
            .map(|j| if mass[j] > 0.0 { first[j] / mass[j] } else { self.components[j].mean })
            .collect();
        let mut scatter = vec![Matrix3::zeros(); k];
        for (i, p) in pixels.iter().enumerate() {
            let x = vec3(p);
            for j in 0..k {
                let r = all[i * k + j];
                if r > 0.0 {
                    let d = x - means[j];
                    scatter[j] += d * d.transpose() * r;
                }
            }
        }
        let components = (0..k)
            .map(|j| {
                if mass[j] > 0.0 {
                    let cov = floor_covariance(&(scatter[j] / mass[j]), floor);
                    Gaussian::new(mass[j] / n, means[j], cov)
                } else {
                    let old = &self.components[j];
                    Gaussian::new(0.0, old.mean, old.covariance)
                }
            })
            .collect();
        GmmModel { components }
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// k-means++ centres: the first uniformly, each next with probability
/// proportional to squared distance to the nearest chosen centre.
fn kmeans_pp(pixels: &[Rgb], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    let mut centres = vec![vec3(&pixels[rng.random_range(0..pixels.len())])];
    let mut d2: Vec<f64> = pixels.iter().map(|p| (vec3(p) - centres[0]).norm_squared()).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = pixels.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..pixels.len())
        };
        let c = vec3(&pixels[idx]);
        for (d, p) in d2.iter_mut().zip(pixels) {
            *d = d.min((vec3(p) - c).norm_squared());
        }
        centres.push(c);
    }
    centres
}

/// Fits a `config.components`-component mixture to `pixels`.
///
/// Means start at k-means++ centres, every covariance at the floored
/// covariance of the whole set, weights uniform; then `em_iterations` EM
/// steps run.
pub fn fit_gmm(pixels: &[Rgb], config: &GmmConfig) -> Result<GmmFit, GrabCutError> {
    if pixels.is_empty() {
        return Err(GrabCutError::NoPixels);
    }
    if config.components == 0 {
        return Err(GrabCutError::Config("gmm components must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let centres = kmeans_pp(pixels, config.components, &mut rng);
    let n = pixels.len() as f64;
    let mean = pixels.iter().map(vec3).sum::<Vector3<f64>>() / n;
    let scatter = pixels
        .iter()
        .map(|p| {
            let d = vec3(p) - mean;
            d * d.transpose()
        })
        .sum::<Matrix3<f64>>()
        / n;
    let cov = floor_covariance(&scatter, config.floor);
    let w = 1.0 / config.components as f64;
    let start = GmmModel {
        components: centres.into_iter().map(|c| Gaussian::new(w, c, cov)).collect(),
    };
    Ok(start.refine(pixels, config.em_iterations, config.floor))
}

/// Cost of `rgb` under `model`: `-ln p(rgb)`.
pub fn neg_log_likelihood(model: &GmmModel, rgb: &Rgb) -> f64 {
    model.neg_log_likelihood(rgb)
}
