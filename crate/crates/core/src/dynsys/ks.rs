//! Kuramoto-Sivashinsky equation `y_t = -y y_x - y_xx - y_xxxx` on a periodic
//! domain `[0, L)`, discretized pseudo-spectrally on `Q` equidistant points
//! and integrated with fourth-order exponential time differencing (ETDRK4).
//!
//! The solver works on the half spectrum of a real transform, so the field
//! stays exactly real. The quadratic term is dealiased with the 2/3 rule:
//! only modes with `3m < Q` receive nonlinear forcing.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use super::{exceeds_guard, Flow};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Points on the complex contour used to evaluate the ETDRK4 coefficients.
const CONTOUR_POINTS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KsParams {
    /// Domain length `L`.
    pub domain_length: f64,
    /// Grid points `Q`.
    pub grid_points: usize,
    pub dt: f64,
    /// Starting profile; a seeded random one is drawn when absent.
    pub initial_profile: Option<Vec<f64>>,
    /// Warm-up steps discarded before the first returned column.
    pub transient_steps: usize,
}

impl Default for KsParams {
    fn default() -> Self {
        Self {
            domain_length: 22.0,
            grid_points: 64,
            dt: 0.25,
            initial_profile: None,
            transient_steps: 1000,
        }
    }
}

impl KsParams {
    pub fn new(domain_length: f64, grid_points: usize) -> Self {
        Self {
            domain_length,
            grid_points,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.grid_points;
        if q < 8 || q % 2 != 0 {
            return Err(Error::config(format!("KS grid needs an even Q >= 8, got {q}")));
        }
        if !(self.domain_length > 0.0) || !self.domain_length.is_finite() {
            return Err(Error::config(format!(
                "KS domain length must be positive, got {}",
                self.domain_length
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config(format!("KS dt must be positive, got {}", self.dt)));
        }
        if let Some(p) = &self.initial_profile {
            if p.len() != q {
                return Err(Error::mismatch(format!(
                    "initial profile has {} points, grid has {q}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::config("initial profile must be finite"));
            }
        }
        Ok(())
    }
}

/// Precomputed spectral operators and ETDRK4 coefficients for one
/// `(L, Q, dt)` combination.
pub struct KsSolver {
    q: usize,
    dt: f64,
    /// `q_m^2 - q_m^4` per retained half-spectrum mode.
    linear: Vec<f64>,
    /// `-i q_m / 2`, zeroed outside the dealiasing band.
    nonlinear: Vec<Complex64>,
    e: Vec<f64>,
    e2: Vec<f64>,
    qc: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl std::fmt::Debug for KsSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KsSolver").field("q", &self.q).field("dt", &self.dt).finish()
    }
}

struct Workspace {
    real: Vec<f64>,
    spec: Vec<Complex64>,
    scratch_fwd: Vec<Complex64>,
    scratch_inv: Vec<Complex64>,
    nv: Vec<Complex64>,
    na: Vec<Complex64>,
    nb: Vec<Complex64>,
    nc: Vec<Complex64>,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
}

impl KsSolver {
    pub fn new(params: &KsParams) -> Result<Self> {
        params.validate()?;
        let q = params.grid_points;
        let n_modes = q / 2 + 1;
        let dt = params.dt;
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(q);
        let inverse = planner.plan_fft_inverse(q);

        let mut linear = Vec::with_capacity(n_modes);
        let mut nonlinear = Vec::with_capacity(n_modes);
        for m in 0..n_modes {
            let k = 2.0 * PI * m as f64 / params.domain_length;
            linear.push(k * k - k * k * k * k);
            let g = if 3 * m < q { Complex64::new(0.0, -0.5 * k) } else { Complex64::new(0.0, 0.0) };
            nonlinear.push(g);
        }

        let roots: Vec<Complex64> = (1..=CONTOUR_POINTS)
            .map(|j| Complex64::from_polar(1.0, PI * (j as f64 - 0.5) / CONTOUR_POINTS as f64))
            .collect();
        let mut e = Vec::with_capacity(n_modes);
        let mut e2 = Vec::with_capacity(n_modes);
        let mut qc = Vec::with_capacity(n_modes);
        let mut f1 = Vec::with_capacity(n_modes);
        let mut f2 = Vec::with_capacity(n_modes);
        let mut f3 = Vec::with_capacity(n_modes);
        for &lin in &linear {
            let hl = dt * lin;
            e.push(hl.exp());
            e2.push((hl / 2.0).exp());
            let (mut sq, mut s1, mut s2, mut s3) = (Complex64::default(), Complex64::default(), Complex64::default(), Complex64::default());
            for r in &roots {
                let z = Complex64::new(hl, 0.0) + r;
                let ez = z.exp();
                let z3 = z * z * z;
                sq += ((z / 2.0).exp() - 1.0) / z;
                s1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                s2 += (2.0 + z + ez * (z - 2.0)) / z3;
                s3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
            }
            let m = CONTOUR_POINTS as f64;
            qc.push(dt * sq.re / m);
            f1.push(dt * s1.re / m);
            f2.push(dt * s2.re / m);
            f3.push(dt * s3.re / m);
        }

        Ok(Self {
            q,
            dt,
            linear,
            nonlinear,
            e,
            e2,
            qc,
            f1,
            f2,
            f3,
            forward,
            inverse,
        })
    }

    pub fn grid_points(&self) -> usize {
        self.q
    }

    fn workspace(&self) -> Workspace {
        let n = self.q / 2 + 1;
        let z = Complex64::default();
        Workspace {
            real: vec![0.0; self.q],
            spec: vec![z; n],
            scratch_fwd: self.forward.make_scratch_vec(),
            scratch_inv: self.inverse.make_scratch_vec(),
            nv: vec![z; n],
            na: vec![z; n],
            nb: vec![z; n],
            nc: vec![z; n],
            a: vec![z; n],
            b: vec![z; n],
            c: vec![z; n],
        }
    }

    fn to_spectrum(&self, profile: &[f64], ws: &mut Workspace, out: &mut [Complex64]) {
        ws.real.copy_from_slice(profile);
        self.forward
            .process_with_scratch(&mut ws.real, out, &mut ws.scratch_fwd)
            .expect("forward FFT buffer sizes are fixed at construction");
    }

    fn to_grid(&self, spectrum: &[Complex64], ws: &mut Workspace, out: &mut [f64]) {
        ws.spec.copy_from_slice(spectrum);
        let last = ws.spec.len() - 1;
        ws.spec[0].im = 0.0;
        ws.spec[last].im = 0.0;
        self.inverse
            .process_with_scratch(&mut ws.spec, out, &mut ws.scratch_inv)
            .expect("inverse FFT buffer sizes are fixed at construction");
        let scale = 1.0 / self.q as f64;
        out.iter_mut().for_each(|v| *v *= scale);
    }

    /// Dealiased spectral nonlinear term `-(1/2) d/dx (y^2)`.
    fn nonlinear_term(&self, v: &[Complex64], ws: &mut Workspace, out: &mut [Complex64]) {
        let mut grid = std::mem::take(&mut ws.real);
        self.to_grid(v, ws, &mut grid);
        grid.iter_mut().for_each(|y| *y *= *y);
        ws.real = grid;
        self.forward
            .process_with_scratch(&mut ws.real, out, &mut ws.scratch_fwd)
            .expect("forward FFT buffer sizes are fixed at construction");
        for (o, g) in out.iter_mut().zip(&self.nonlinear) {
            *o *= g;
        }
    }

    fn etdrk4_step(&self, v: &mut [Complex64], ws: &mut Workspace) {
        let mut nv = std::mem::take(&mut ws.nv);
        let mut na = std::mem::take(&mut ws.na);
        let mut nb = std::mem::take(&mut ws.nb);
        let mut nc = std::mem::take(&mut ws.nc);
        let mut a = std::mem::take(&mut ws.a);
        let mut b = std::mem::take(&mut ws.b);
        let mut c = std::mem::take(&mut ws.c);

        self.nonlinear_term(v, ws, &mut nv);
        for m in 0..v.len() {
            a[m] = v[m] * self.e2[m] + nv[m] * self.qc[m];
        }
        self.nonlinear_term(&a, ws, &mut na);
        for m in 0..v.len() {
            b[m] = v[m] * self.e2[m] + na[m] * self.qc[m];
        }
        self.nonlinear_term(&b, ws, &mut nb);
        for m in 0..v.len() {
            c[m] = a[m] * self.e2[m] + (nb[m] * 2.0 - nv[m]) * self.qc[m];
        }
        self.nonlinear_term(&c, ws, &mut nc);
        for m in 0..v.len() {
            v[m] = v[m] * self.e[m]
                + nv[m] * self.f1[m]
                + (na[m] + nb[m]) * (2.0 * self.f2[m])
                + nc[m] * self.f3[m];
        }

        ws.nv = nv;
        ws.na = na;
        ws.nb = nb;
        ws.nc = nc;
        ws.a = a;
        ws.b = b;
        ws.c = c;
    }

    /// Right-hand side of the PDE evaluated on the grid.
    pub fn rhs(&self, profile: &[f64]) -> Vec<f64> {
        let mut ws = self.workspace();
        let n = self.q / 2 + 1;
        let mut v = vec![Complex64::default(); n];
        self.to_spectrum(profile, &mut ws, &mut v);
        let mut nl = vec![Complex64::default(); n];
        self.nonlinear_term(&v, &mut ws, &mut nl);
        for m in 0..n {
            v[m] = v[m] * self.linear[m] + nl[m];
        }
        let mut out = vec![0.0; self.q];
        self.to_grid(&v, &mut ws, &mut out);
        out
    }

    /// Integrates `n_steps` from `profile`, calling `emit` with every new grid
    /// state. Stops early with a blow-up error.
    pub fn integrate(
        &self,
        profile: &[f64],
        n_steps: usize,
        mut emit: impl FnMut(usize, &[f64]),
    ) -> Result<()> {
        if profile.len() != self.q {
            return Err(Error::mismatch(format!(
                "profile has {} points, solver grid has {}",
                profile.len(),
                self.q
            )));
        }
        let mut ws = self.workspace();
        let mut v = vec![Complex64::default(); self.q / 2 + 1];
        self.to_spectrum(profile, &mut ws, &mut v);
        let mut grid = vec![0.0; self.q];
        for step in 1..=n_steps {
            self.etdrk4_step(&mut v, &mut ws);
            self.to_grid(&v, &mut ws, &mut grid);
            if let Some(magnitude) = exceeds_guard(&grid) {
                return Err(Error::BlowUp { step, magnitude });
            }
            emit(step, &grid);
        }
        Ok(())
    }
}

impl Flow for KsSolver {
    fn dim(&self) -> usize {
        self.q
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&self, state: &mut [f64]) {
        let mut ws = self.workspace();
        let mut v = vec![Complex64::default(); self.q / 2 + 1];
        self.to_spectrum(state, &mut ws, &mut v);
        self.etdrk4_step(&mut v, &mut ws);
        self.to_grid(&v, &mut ws, state);
    }
}

/// Right-hand side of the KS equation for a periodic grid profile.
pub fn ks_rhs_spectral(profile: &[f64], params: &KsParams) -> Result<Vec<f64>> {
    let solver = KsSolver::new(params)?;
    if profile.len() != params.grid_points {
        return Err(Error::mismatch(format!(
            "profile has {} points, grid has {}",
            profile.len(),
            params.grid_points
        )));
    }
    Ok(solver.rhs(profile))
}

/// Small-amplitude smooth profile: `0.1 * sum_{m=1..4} a_m sin(2 pi m x / L + phi_m)`
/// with `a_m ~ U(-1, 1)` and `phi_m ~ U(0, 2 pi)` drawn from ChaCha8 seeded by `seed`.
pub fn seeded_profile(params: &KsParams, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64)> = (0..4)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let q = params.grid_points;
    let l = params.domain_length;
    (0..q)
        .map(|j| {
            let x = j as f64 * l / q as f64;
            0.1 * modes
                .iter()
                .enumerate()
                .map(|(m, (a, phi))| a * (2.0 * PI * (m + 1) as f64 * x / l + phi).sin())
                .sum::<f64>()
        })
        .collect()
}

/// Generates `n_steps + 1` post-transient columns. `transient_steps` extra
/// steps are integrated first and dropped; the returned origin time is the
/// end of the transient.
pub fn ks_generate(params: &KsParams, n_steps: usize, seed: u64) -> Result<TimeSeries> {
    let solver = KsSolver::new(params)?;
    if n_steps == 0 {
        return Err(Error::config("n_steps must be at least 1"));
    }
    let q = params.grid_points;
    let profile = params
        .initial_profile
        .clone()
        .unwrap_or_else(|| seeded_profile(params, seed));
    let transient = params.transient_steps;
    let mut data = Vec::with_capacity(q * (n_steps + 1));
    if transient == 0 {
        data.extend_from_slice(&profile);
    }
    solver.integrate(&profile, transient + n_steps, |step, grid| {
        if step >= transient {
            data.extend_from_slice(grid);
        }
    })?;
    Ok(TimeSeries::from_parts_unchecked(
        q,
        params.dt,
        transient as f64 * params.dt,
        data,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(l: f64, q: usize) -> KsParams {
        KsParams {
            transient_steps: 0,
            ..KsParams::new(l, q)
        }
    }

    #[test]
    fn zero_profile_is_stationary() {
        let p = KsParams {
            initial_profile: Some(vec![0.0; 64]),
            ..params(22.0, 64)
        };
        assert!(ks_rhs_spectral(&[0.0; 64], &p).unwrap().iter().all(|v| *v == 0.0));
        let s = ks_generate(&p, 20, 0).unwrap();
        assert_eq!(s.len(), 21);
        assert!(s.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_mode_follows_linear_dispersion() {
        let p = params(22.0, 64);
        let eps = 1e-7;
        let k = 2.0 * PI / 22.0;
        let y: Vec<f64> = (0..64).map(|j| eps * (k * j as f64 * 22.0 / 64.0).sin()).collect();
        let rhs = ks_rhs_spectral(&y, &p).unwrap();
        let growth = k * k - k.powi(4);
        for (r, v) in rhs.iter().zip(&y) {
            // quadratic term is O(eps^2)
            assert!((r - growth * v).abs() < 1e-12, "{r} vs {}", growth * v);
        }
    }

    #[test]
    fn rhs_has_zero_mean() {
        let p = params(22.0, 64);
        for seed in 0..5 {
            let y: Vec<f64> = seeded_profile(&p, seed).iter().map(|v| v * 20.0).collect();
            let rhs = ks_rhs_spectral(&y, &p).unwrap();
            let mean = rhs.iter().sum::<f64>() / 64.0;
            let scale = y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            assert!(mean.abs() < 1e-12 * scale, "mean {mean}");
        }
    }

    #[test]
    fn validation() {
        assert!(KsSolver::new(&params(22.0, 63)).is_err());
        assert!(KsSolver::new(&params(22.0, 6)).is_err());
        assert!(KsSolver::new(&params(-1.0, 64)).is_err());
        let p = KsParams {
            initial_profile: Some(vec![0.0; 10]),
            ..params(22.0, 64)
        };
        assert!(ks_generate(&p, 5, 0).is_err());
        assert!(ks_generate(&params(22.0, 64), 0, 0).is_err());
    }

    #[test]
    fn transient_is_discarded() {
        let base = params(22.0, 64);
        let full = ks_generate(&base, 30, 3).unwrap();
        let skipped = ks_generate(&KsParams { transient_steps: 10, ..base }, 20, 3).unwrap();
        assert_eq!(skipped.len(), 21);
        assert_eq!(skipped.column(0), full.column(10));
        assert_eq!(skipped.column(20), full.column(30));
        assert_eq!(skipped.origin_time(), 2.5);
    }
}
