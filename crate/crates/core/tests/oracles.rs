//! Numerical checks against independent references written here by hand.

use faer::Mat;
use hengrc::dynsys::{estimate_lyapunov, ks_generate, lorenz_rk4_step, KsParams, LorenzParams, SystemParams};
use hengrc::readout::ridge_solve;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lorenz_rhs(s: [f64; 3], p: &LorenzParams) -> [f64; 3] {
    [p.sigma * (s[1] - s[0]), s[0] * (p.rho - s[2]) - s[1], s[0] * s[1] - p.beta * s[2]]
}

// Classical RK4 written out independently of the library.
fn reference_flow(mut s: [f64; 3], p: &LorenzParams, t: f64, substeps: usize) -> [f64; 3] {
    let h = t / substeps as f64;
    let add = |a: [f64; 3], b: [f64; 3], c: f64| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]];
    for _ in 0..substeps {
        let k1 = lorenz_rhs(s, p);
        let k2 = lorenz_rhs(add(s, k1, h / 2.0), p);
        let k3 = lorenz_rhs(add(s, k2, h / 2.0), p);
        let k4 = lorenz_rhs(add(s, k3, h), p);
        for i in 0..3 {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    s
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[test]
fn rk4_local_error_is_fifth_order() {
    let start = [-5.76, -2.24, 29.1];
    for dt in [0.02, 0.01] {
        let one_step = |h: f64| {
            let p = LorenzParams { dt: h, ..LorenzParams::default() };
            let reference = reference_flow(start, &p, h, 100);
            dist(lorenz_rk4_step(&start, &p), reference)
        };
        let ratio = one_step(dt) / one_step(dt / 2.0);
        assert!((24.0..=40.0).contains(&ratio), "dt {dt}: ratio {ratio}");
    }
}

fn ks_run(profile: &[f64], dt: f64, time: f64) -> hengrc::TimeSeries {
    let p = KsParams {
        dt,
        initial_profile: Some(profile.to_vec()),
        transient_steps: 0,
        ..KsParams::new(22.0, 64)
    };
    ks_generate(&p, (time / dt).round() as usize, 0).unwrap()
}

// Relative L2 error of the trajectory at `dt` against the one at `dt / 2`,
// sampled at the coarse steps over the whole span.
fn halving_error(profile: &[f64], dt: f64) -> f64 {
    let (coarse, fine) = (ks_run(profile, dt, 10.0), ks_run(profile, dt / 2.0, 10.0));
    let (mut e, mut n) = (0.0, 0.0);
    for t in 0..coarse.len() {
        for (a, b) in coarse.column(t).iter().zip(fine.column(2 * t)) {
            e += (a - b) * (a - b);
            n += b * b;
        }
    }
    (e / n).sqrt()
}

#[test]
fn ks_step_halving_approaches_fourth_order() {
    // Start on the attractor rather than from the small seeded profile.
    let start = ks_generate(&KsParams::new(22.0, 64), 1, 5).unwrap().column(0).to_vec();
    let errs: Vec<f64> = [0.25, 0.125, 0.0625, 0.03125].into_iter().map(|dt| halving_error(&start, dt)).collect();
    assert!(errs[0] < 1e-3, "{errs:?}");
    for w in errs.windows(2) {
        assert!(w[1] < w[0] / 6.0, "{errs:?}");
    }
    // Stiff modes reduce the observed order at coarse steps; it recovers as dt shrinks.
    let last = errs[2] / errs[3];
    assert!((10.0..20.0).contains(&last), "{errs:?}");
}

#[test]
fn ks_amplitude_is_stationary_order_one() {
    let s = ks_generate(&KsParams::new(22.0, 64), 4000, 11).unwrap();
    let rms = |from: usize, to: usize| {
        let v: Vec<f64> = (from..to).flat_map(|t| s.column(t).to_vec()).collect();
        (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
    };
    let (first, second) = (rms(0, 2000), rms(2000, 4001));
    assert!((0.5..3.0).contains(&first), "rms {first}");
    assert!((first - second).abs() / first < 0.1, "rms {first} then {second}");
    // Regression pin for this seed.
    assert!((rms(0, 4001) - KS_L22_RMS).abs() < 1e-6, "rms {}", rms(0, 4001));
}

const KS_L22_RMS: f64 = 1.1770730908515863;

#[test]
fn lorenz_lyapunov_exponent() {
    let sys = SystemParams::Lorenz(LorenzParams::default());
    let a = estimate_lyapunov(&sys, 500.0, 42).unwrap().lambda_max;
    let b = estimate_lyapunov(&sys, 2000.0, 7).unwrap().lambda_max;
    assert!((a - 0.906).abs() <= 0.02, "lambda {a}");
    assert!((b - 0.906).abs() <= 0.02, "long rerun lambda {b}");
}

#[test]
fn ks_lyapunov_exponent_stable_across_seeds() {
    let sys = SystemParams::Ks(KsParams::new(22.0, 64));
    let l: Vec<f64> = [1, 2, 3, 4, 5]
        .into_iter()
        .map(|seed| estimate_lyapunov(&sys, 10_000.0, seed).unwrap().lambda_max)
        .collect();
    let mean = l.iter().sum::<f64>() / l.len() as f64;
    for v in &l {
        assert!(*v > 0.0 && (v - mean).abs() / mean <= 0.1, "{l:?}");
    }
}

// Dense inverse by Gauss-Jordan with partial pivoting.
fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for j in 0..n {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                for j in 0..n {
                    a[r][j] -= f * a[c][j];
                    inv[r][j] -= f * inv[c][j];
                }
            }
        }
    }
    inv
}

#[test]
fn ridge_matches_dense_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (f, t, q) = (20, 200, 3);
    let s: Vec<Vec<f64>> = (0..f).map(|_| (0..t).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y: Vec<Vec<f64>> = (0..q).map(|_| (0..t).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    for lambda in [0.0, 1e-3, 1.0] {
        // W = Y S^T (S S^T + lambda I)^-1
        let gram: Vec<Vec<f64>> = (0..f)
            .map(|i| {
                (0..f)
                    .map(|j| (0..t).map(|n| s[i][n] * s[j][n]).sum::<f64>() + if i == j { lambda } else { 0.0 })
                    .collect()
            })
            .collect();
        let inv = invert(gram);
        let ys: Vec<Vec<f64>> = (0..q)
            .map(|i| (0..f).map(|j| (0..t).map(|n| y[i][n] * s[j][n]).sum()).collect())
            .collect();
        let expect: Vec<Vec<f64>> = (0..q)
            .map(|i| (0..f).map(|j| (0..f).map(|m| ys[i][m] * inv[m][j]).sum()).collect())
            .collect();

        let w = ridge_solve(
            Mat::from_fn(f, t, |i, j| s[i][j]).as_ref(),
            Mat::from_fn(q, t, |i, j| y[i][j]).as_ref(),
            lambda,
        )
        .unwrap();
        let mut diff = 0.0;
        let mut norm = 0.0;
        for i in 0..q {
            for j in 0..f {
                diff += (w[(i, j)] - expect[i][j]).powi(2);
                norm += expect[i][j].powi(2);
            }
        }
        assert!((diff / norm).sqrt() < 1e-10, "lambda {lambda}: {}", (diff / norm).sqrt());
    }
}
