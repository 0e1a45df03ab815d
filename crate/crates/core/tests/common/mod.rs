#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn gaussian_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)) * std::f64::consts::FRAC_1_SQRT_2)
        .collect()
}

/// Dense row-major `n x n` complex matrix.
#[derive(Clone, Debug)]
pub struct Dense {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl Dense {
    /// `alpha x x^H + beta I`
    pub fn rank_one_plus_identity(x: &[Complex64], alpha: f64, beta: f64) -> Self {
        let n = x.len();
        let mut data = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = x[i] * x[j].conj() * alpha;
            }
            data[i * n + i] += beta;
        }
        Self { n, data }
    }

    /// Solves `A z = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut z = b.to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i * n + col].norm().total_cmp(&a[j * n + col].norm()))
                .unwrap();
            if pivot != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot * n + k);
                }
                z.swap(col, pivot);
            }
            let d = a[col * n + col];
            for row in col + 1..n {
                let f = a[row * n + col] / d;
                if f == c(0.0, 0.0) {
                    continue;
                }
                for k in col..n {
                    let v = a[col * n + k];
                    a[row * n + k] -= f * v;
                }
                let v = z[col];
                z[row] -= f * v;
            }
        }
        for row in (0..n).rev() {
            let mut acc = z[row];
            for k in row + 1..n {
                acc -= a[row * n + k] * z[k];
            }
            z[row] = acc / a[row * n + row];
        }
        z
    }
}

/// Conventional Kalman gain row `p x^H R^{-1}` with
/// `R = (p + sigma_c2) x x^H + sigma_n2 I`, by direct solve.
pub fn naive_gain(x: &[Complex64], p: f64, sigma_n2: f64, sigma_c2: f64) -> Vec<Complex64> {
    let r = Dense::rank_one_plus_identity(x, p + sigma_c2, sigma_n2);
    // R is Hermitian, so x^H R^{-1} = (R^{-1} x)^H.
    r.solve(x).into_iter().map(|v| v.conj() * p).collect()
}

/// `x^H ((1 + sigma_c2) x x^H + sigma_n2 I)^{-1} y` by direct solve.
pub fn naive_mmse(x: &[Complex64], y: &[Complex64], sigma_n2: f64, sigma_c2: f64) -> Complex64 {
    let r = Dense::rank_one_plus_identity(x, 1.0 + sigma_c2, sigma_n2);
    let z = r.solve(y);
    x.iter().zip(&z).map(|(a, b)| a.conj() * b).sum()
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max)
}

pub mod fd {
    use super::*;
    use pilotsim::estimators::{modified_kalman_step, CovarianceDerivative, FilterState, StepReport, TrackerConfig};
    use pilotsim::pilots::make_pilot_book;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub const DELTA: f64 = 1e-6;
    /// Magnitudes below this are compared absolutely (scaled by it).
    pub const FLOOR: f64 = 1e-3;

    #[derive(Debug, Clone, Copy, Default)]
    pub struct Worst {
        pub q: f64,
        pub m: f64,
        pub s: f64,
        pub grad: f64,
    }

    impl Worst {
        pub fn max(&self) -> f64 {
            self.q.max(self.m).max(self.s).max(self.grad)
        }
    }

    pub fn rel(analytic: f64, numeric: f64) -> f64 {
        (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
    }

    pub fn rel_c(analytic: Complex64, numeric: Complex64) -> f64 {
        (analytic - numeric).norm() / analytic.norm().max(numeric.norm()).max(FLOOR)
    }

    struct Trace {
        reports: Vec<StepReport>,
        states: Vec<FilterState>,
        sq_err: Vec<f64>,
    }

    fn run(
        init: FilterState,
        cfg: &TrackerConfig,
        pilots: &[Vec<Complex64>],
        ys: &[Vec<Complex64>],
    ) -> Trace {
        let mut state = init;
        let mut t = Trace { reports: vec![], states: vec![], sq_err: vec![] };
        for (x, y) in pilots.iter().zip(ys) {
            let r = modified_kalman_step(&mut state, x, y, cfg).expect("finite trajectory");
            let e2: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - r.prediction * xi).norm_sqr()).sum();
            t.reports.push(r);
            t.states.push(state);
            t.sq_err.push(e2);
        }
        t
    }

    /// Compares the analytic derivative recursions with central differences in
    /// `a` along one random trajectory of `slots` slots.
    pub fn check_trajectory(seed: u64, slots: usize, form: CovarianceDerivative) -> Worst {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tau = 16;
        let book = make_pilot_book(tau, tau).unwrap();
        let cfg = TrackerConfig {
            mu: 0.0,
            truncate: false,
            sigma_n2: rng.random_range(0.05..0.5),
            sigma_c2: rng.random_range(0.0..1.0),
            covariance_derivative: form,
            ..TrackerConfig::default()
        };
        let a0 = rng.random_range(0.2..0.98);
        let h0 = gaussian_vec(&mut rng, 1)[0];
        let p1 = rng.random_range(0.0..1.0);
        let pilots: Vec<Vec<Complex64>> = (0..slots)
            .map(|_| book.pilot(rng.random_range(0..tau)).to_vec())
            .collect();
        let ys: Vec<Vec<Complex64>> = (0..slots).map(|_| gaussian_vec(&mut rng, tau)).collect();
        let zero = c(0.0, 0.0);
        let at = |a: f64| FilterState::new(h0, a, p1, zero, 0.0);

        let base = run(at(a0), &cfg, &pilots, &ys);
        let plus = run(at(a0 + DELTA), &cfg, &pilots, &ys);
        let minus = run(at(a0 - DELTA), &cfg, &pilots, &ys);
        let d = 2.0 * DELTA;

        let mut w = Worst::default();
        for n in 0..slots {
            let (b, p, m) = (&base, &plus, &minus);
            let dq = (p.states[n].h_hat - m.states[n].h_hat) / d;
            w.q = w.q.max(rel_c(b.states[n].q, dq));
            let dg = (p.reports[n].gain - m.reports[n].gain) / d;
            w.m = w.m.max(rel(b.reports[n].gain_derivative, dg));
            let ds = (p.states[n].p - m.states[n].p) / d;
            w.s = w.s.max(rel(b.states[n].s, ds));
            let de = 0.5 * (p.sq_err[n] - m.sq_err[n]) / d;
            w.grad = w.grad.max(rel(b.reports[n].gradient, de));
        }
        w
    }
}
