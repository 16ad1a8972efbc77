//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Maximizes the epsilon-SVR dual over `beta = [alpha; alpha*]` with
/// accelerated projected gradient. Returns the dual objective and
/// `theta = alpha - alpha*`.
pub fn svr_dual_oracle(gram: &[Vec<f64>], y: &[f64], c: f64, eps: f64) -> (f64, Vec<f64>) {
    let n = y.len();
    let theta_of = |b: &[f64]| (0..n).map(|i| b[i] - b[i + n]).collect::<Vec<f64>>();
    let k_times = |t: &[f64]| {
        (0..n)
            .map(|i| (0..n).map(|j| gram[i][j] * t[j]).sum::<f64>())
            .collect::<Vec<f64>>()
    };
    // minimize F = ½ θᵀKθ + ε Σβ − yᵀθ
    let objective = |b: &[f64]| {
        let t = theta_of(b);
        let kt = k_times(&t);
        let quad: f64 = t.iter().zip(&kt).map(|(a, b)| a * b).sum();
        let lin: f64 = t.iter().zip(y).map(|(a, b)| a * b).sum();
        0.5 * quad + eps * b.iter().sum::<f64>() - lin
    };
    let gradient = |b: &[f64]| {
        let kt = k_times(&theta_of(b));
        let mut g = vec![0.0; 2 * n];
        for i in 0..n {
            g[i] = kt[i] + eps - y[i];
            g[i + n] = -kt[i] + eps + y[i];
        }
        g
    };
    // Euclidean projection onto the box intersected with Σα = Σα*: clip(v - λa)
    // with λ found by bisection on the (monotone) balance.
    let project = |v: &[f64], out: &mut [f64]| {
        let balance = |lambda: f64| {
            let mut s = 0.0;
            for i in 0..n {
                s += (v[i] - lambda).clamp(0.0, c) - (v[i + n] + lambda).clamp(0.0, c);
            }
            s
        };
        let bound = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if balance(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lambda = 0.5 * (lo + hi);
        for i in 0..n {
            out[i] = (v[i] - lambda).clamp(0.0, c);
            out[i + n] = (v[i + n] + lambda).clamp(0.0, c);
        }
    };

    // Lipschitz constant of ∇F: 2 λmax(K) <= 2 max row sum of |K|
    let lip = 2.0
        * gram
            .iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
            .max(1e-12);
    let step = 1.0 / lip;

    let mut x = vec![0.0; 2 * n];
    let mut z = x.clone();
    let mut moved = x.clone();
    let mut x_next = x.clone();
    let mut t = 1.0f64;
    let mut f_prev = objective(&x);
    for _ in 0..200_000 {
        let g = gradient(&z);
        for i in 0..2 * n {
            moved[i] = z[i] - step * g[i];
        }
        project(&moved, &mut x_next);
        let f_next = objective(&x_next);
        // restart momentum when the objective goes up
        if f_next > f_prev {
            t = 1.0;
            z.copy_from_slice(&x);
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mut change = 0.0;
        for i in 0..2 * n {
            let delta = x_next[i] - x[i];
            change += delta * delta;
            z[i] = x_next[i] + (t - 1.0) / t_next * delta;
        }
        std::mem::swap(&mut x, &mut x_next);
        t = t_next;
        f_prev = f_next;
        if change.sqrt() < 1e-12 {
            break;
        }
    }
    (-f_prev, theta_of(&x))
}

/// `∫_a^b f` by tanh-sinh quadrature. `f` receives the abscissa and its
/// distance to `b`, computed without cancellation.
pub fn tanh_sinh(a: f64, b: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
    let h = 1.0 / 128.0;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let pi2 = std::f64::consts::FRAC_PI_2;
    let mut sum = 0.0;
    let mut k: i64 = -(4.0 / h) as i64;
    while (k as f64) * h <= 4.0 {
        let s = k as f64 * h;
        let u = pi2 * s.sinh();
        let w = pi2 * s.cosh() / u.cosh().powi(2);
        // 1 - tanh(u) = 2 / (1 + e^{2u})
        let to_b = (b - a) / (1.0 + (2.0 * u).exp());
        let x = mid + half * u.tanh();
        if w > 0.0 && to_b > 0.0 && x > a {
            sum += w * f(x, to_b);
        }
        k += 1;
    }
    sum * half * h
}

/// `P(T > t)` for Student's t by integrating the density in the angle
/// `x = sqrt(df) tan θ`, where it becomes `cos^(df-1) θ`.
pub fn t_sf_quadrature(t: f64, df: f64) -> f64 {
    let pi2 = std::f64::consts::FRAC_PI_2;
    // cos θ = sin(π/2 − θ), using the exact distance to the upper endpoint
    let integrand = |_: f64, to_top: f64| to_top.sin().powf(df - 1.0);
    let total = 2.0 * tanh_sinh(0.0, pi2, integrand);
    let theta = (t / df.sqrt()).atan();
    tanh_sinh(theta, pi2, integrand) / total
}

/// A random smooth function of `d` inputs: linear, pairwise and sine terms.
#[derive(Debug, Clone)]
pub struct RandomFn {
    pub lin: Vec<f64>,
    pub quad: Vec<Vec<f64>>,
    pub sines: Vec<f64>,
}

impl RandomFn {
    pub fn new(rng: &mut ChaCha8Rng, d: usize) -> Self {
        Self {
            lin: (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
            quad: (0..d)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
            sines: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    /// Zeroes every term touching feature `j`.
    pub fn without(mut self, j: usize) -> Self {
        self.lin[j] = 0.0;
        self.sines[j] = 0.0;
        for i in 0..self.lin.len() {
            self.quad[i][j] = 0.0;
            self.quad[j][i] = 0.0;
        }
        self
    }

    /// Makes features `i` and `j` interchangeable.
    pub fn symmetric_in(mut self, i: usize, j: usize) -> Self {
        let d = self.lin.len();
        self.lin[j] = self.lin[i];
        self.sines[j] = self.sines[i];
        for k in 0..d {
            let v = 0.5 * (self.quad[i][k] + self.quad[j][k]);
            self.quad[i][k] = v;
            self.quad[j][k] = v;
        }
        for k in 0..d {
            let v = 0.5 * (self.quad[k][i] + self.quad[k][j]);
            self.quad[k][i] = v;
            self.quad[k][j] = v;
        }
        let (a, b) = (self.quad[i][i], self.quad[j][j]);
        self.quad[i][i] = 0.5 * (a + b);
        self.quad[j][j] = 0.5 * (a + b);
        let (a, b) = (self.quad[i][j], self.quad[j][i]);
        self.quad[i][j] = 0.5 * (a + b);
        self.quad[j][i] = 0.5 * (a + b);
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let mut y = 0.0;
        for i in 0..d {
            y += self.lin[i] * x[i] + self.sines[i] * (2.0 * x[i]).sin();
            for j in 0..d {
                y += self.quad[i][j] * x[i] * x[j];
            }
        }
        y
    }
}

pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect()
}
