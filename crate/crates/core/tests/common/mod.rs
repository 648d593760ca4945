//! Shared test oracles: an independent projected-gradient solver for the
//! C-SVC dual and seeded synthetic fixtures.
//!
//! The solver here is deliberately written from scratch (own kernel code,
//! own stopping rule) so it can serve as a reference for the SMO path.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub bias: f64,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub gamma: f64,
}

fn kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let mut sq = 0.0;
    for (u, v) in a.iter().zip(b) {
        sq += (u - v) * (u - v);
    }
    (-gamma * sq).exp()
}

/// Projects v onto {0 <= a <= c, y'a = 0} by bisecting the multiplier of the
/// equality constraint.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let clipped = |lambda: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(&vi, &yi)| (vi - lambda * yi).clamp(0.0, c))
            .collect()
    };
    let balance = |alpha: &[f64]| -> f64 { alpha.iter().zip(y).map(|(a, yi)| a * yi).sum() };
    let bound = v.iter().fold(0.0f64, |m, &vi| m.max(vi.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if balance(&clipped(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clipped(0.5 * (lo + hi))
}

/// Solves the C-SVC dual max sum(a) - 0.5 a'Qa by projected-gradient ascent,
/// run to a much tighter KKT gap than the implementation under test.
pub fn reference_csvc(x: &[Vec<f64>], labels: &[i8], c: f64, gamma: f64) -> QpSolution {
    let n = x.len();
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            q[i * n + j] = y[i] * y[j] * kernel(&x[i], &x[j], gamma);
        }
    }
    // infinity-norm bound on Q gives a safe step size
    let lip = (0..n)
        .map(|i| (0..n).map(|j| q[i * n + j].abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let eta = 1.0 / lip;
    let mut alpha = vec![0.0; n];
    let qdot = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| q[i * n + j] * a[j]).sum())
            .collect()
    };
    for iter in 0..2_000_000usize {
        let qa = qdot(&alpha);
        if iter % 100 == 0 {
            // maximal violating pair gap, the standard C-SVC KKT measure
            let mut m_up = f64::NEG_INFINITY;
            let mut m_low = f64::INFINITY;
            for t in 0..n {
                let v = -y[t] * (qa[t] - 1.0);
                if (y[t] > 0.0 && alpha[t] < c - 1e-12) || (y[t] < 0.0 && alpha[t] > 1e-12) {
                    m_up = m_up.max(v);
                }
                if (y[t] > 0.0 && alpha[t] > 1e-12) || (y[t] < 0.0 && alpha[t] < c - 1e-12) {
                    m_low = m_low.min(v);
                }
            }
            if m_up - m_low < 1e-9 {
                break;
            }
        }
        let step: Vec<f64> = alpha
            .iter()
            .zip(&qa)
            .map(|(&a, &g)| a + eta * (1.0 - g))
            .collect();
        alpha = project(&step, &y, c);
    }
    let qa = qdot(&alpha);
    let objective =
        alpha.iter().sum::<f64>() - 0.5 * alpha.iter().zip(&qa).map(|(a, g)| a * g).sum::<f64>();
    // bias from free support vectors, otherwise the violating-pair midpoint
    let margin = 1e-7 * c;
    let free: Vec<usize> = (0..n)
        .filter(|&t| alpha[t] > margin && alpha[t] < c - margin)
        .collect();
    let bias = if !free.is_empty() {
        free.iter()
            .map(|&t| -y[t] * (qa[t] - 1.0))
            .sum::<f64>()
            / free.len() as f64
    } else {
        let mut m_up = f64::NEG_INFINITY;
        let mut m_low = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * (qa[t] - 1.0);
            if (y[t] > 0.0 && alpha[t] < c - margin) || (y[t] < 0.0 && alpha[t] > margin) {
                m_up = m_up.max(v);
            }
            if (y[t] > 0.0 && alpha[t] > margin) || (y[t] < 0.0 && alpha[t] < c - margin) {
                m_low = m_low.min(v);
            }
        }
        0.5 * (m_up + m_low)
    };
    QpSolution {
        alpha,
        objective,
        bias,
        x: x.to_vec(),
        y,
        gamma,
    }
}

impl QpSolution {
    pub fn decision(&self, point: &[f64]) -> f64 {
        self.x
            .iter()
            .zip(&self.alpha)
            .zip(&self.y)
            .map(|((xi, &a), &yi)| a * yi * kernel(xi, point, self.gamma))
            .sum::<f64>()
            + self.bias
    }
}

/// A small labeled dataset plus the hyperparameters to solve it with.
pub struct Fixture {
    pub name: &'static str,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<i8>,
    pub c: f64,
    pub gamma: f64,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn blobs(
    seed: u64,
    n_per_class: usize,
    dims: usize,
    spread: f64,
    offset: f64,
) -> (Vec<Vec<f64>>, Vec<i8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..2 * n_per_class {
        let label: i8 = if i % 2 == 0 { 1 } else { -1 };
        let centre = label as f64 * offset;
        x.push((0..dims).map(|_| centre + spread * gaussian(&mut rng)).collect());
        y.push(label);
    }
    (x, y)
}

/// Small-instance fixtures (<= 40 points) spanning separable, overlapping,
/// imbalanced, and degenerate geometries.
pub fn svm_fixtures() -> Vec<Fixture> {
    let mut fixtures = Vec::new();
    let specs: [(&'static str, u64, usize, usize, f64, f64, f64, f64); 9] = [
        ("separable_2d", 1, 10, 2, 0.3, 1.5, 1.0, 0.5),
        ("overlap_2d", 2, 12, 2, 1.0, 0.5, 1.0, 0.5),
        ("tight_c_small", 3, 10, 2, 0.8, 0.8, 0.05, 1.0),
        ("large_c", 4, 10, 3, 0.5, 1.0, 100.0, 0.3),
        ("high_dim", 5, 8, 6, 0.7, 0.9, 2.0, 0.2),
        ("wide_gamma", 6, 12, 2, 0.6, 1.0, 1.0, 5.0),
        ("narrow_gamma", 7, 12, 2, 0.6, 1.0, 1.0, 0.01),
        ("heavy_overlap", 8, 20, 2, 2.0, 0.2, 3.0, 0.7),
        ("one_dim", 9, 15, 1, 0.5, 1.0, 1.0, 1.0),
    ];
    for (name, seed, n, dims, spread, offset, c, gamma) in specs {
        let (x, y) = blobs(seed, n, dims, spread, offset);
        fixtures.push(Fixture { name, x, y, c, gamma });
    }
    // XOR pattern: not linearly separable, classic RBF case
    fixtures.push(Fixture {
        name: "xor",
        x: vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ],
        y: vec![1, 1, -1, -1],
        c: 10.0,
        gamma: 1.0,
    });
    // imbalanced: 5 positive vs 15 negative
    let (mut x, mut y) = blobs(10, 10, 2, 0.6, 1.0);
    let keep: Vec<usize> = (0..x.len())
        .filter(|&i| y[i] < 0 || i < 10)
        .collect();
    x = keep.iter().map(|&i| x[i].clone()).collect();
    y = keep.iter().map(|&i| y[i]).collect();
    fixtures.push(Fixture { name: "imbalanced", x, y, c: 2.0, gamma: 0.8 });
    fixtures
}

/// Labeled matrix with `informative` shifted dimensions followed by `noise`
/// pure-noise dimensions; used by the selection-sanity checks.
pub fn informative_noise_matrix(
    seed: u64,
    n_per_class: usize,
    informative: usize,
    noise: usize,
    shift: f64,
) -> (Vec<Vec<f64>>, Vec<i8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..2 * n_per_class {
        let label: i8 = if i % 2 == 0 { 1 } else { -1 };
        let mut row = Vec::with_capacity(informative + noise);
        for _ in 0..informative {
            row.push(label as f64 * shift + gaussian(&mut rng));
        }
        for _ in 0..noise {
            row.push(gaussian(&mut rng));
        }
        x.push(row);
        y.push(label);
    }
    (x, y)
}
