//! The flat-top bump `phi^` and its spatial inverse transform.
use std::sync::OnceLock;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Domain, Grid, GridFunction};
use crate::scalar::Real;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { z } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (z * pm - pm1) / (z * z - 1.0);
            let dz = pm / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

fn gl20() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre(20))
}

/// Composite Gauss-Legendre quadrature of `f` over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gl20();
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            x.iter().zip(w).map(|(xi, wi)| wi * f(mid + 0.5 * h * xi)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

/// One-dimensional profile: 1 on `[-inner, inner]`, 0 outside `(-outer, outer)`,
/// with the normalized primitive of `exp(-a / (1 - u^2))` as the transition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub inner: f64,
    pub outer: f64,
    pub sharpness: f64,
}

impl Default for BumpProfile {
    fn default() -> Self {
        BumpProfile {
            inner: 0.09,
            outer: 0.1,
            sharpness: 4.0,
        }
    }
}

const TRANSITION_PANELS: usize = 16;

impl BumpProfile {
    fn kernel(&self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            0.0
        } else {
            (-self.sharpness / (1.0 - u * u)).exp()
        }
    }

    fn mass_below(&self, u: f64) -> f64 {
        integrate(|v| self.kernel(v), -1.0, u, TRANSITION_PANELS)
    }

    fn total(&self) -> f64 {
        self.mass_below(1.0)
    }

    pub fn value_1d(&self, t: f64) -> f64 {
        let t = t.abs();
        if t <= self.inner {
            return 1.0;
        }
        if t >= self.outer {
            return 0.0;
        }
        let u = 2.0 * (t - self.inner) / (self.outer - self.inner) - 1.0;
        let v = 1.0 - self.mass_below(u) / self.total();
        v.clamp(0.0, 1.0)
    }

    pub fn value(&self, xi: &[f64]) -> f64 {
        let mut v = 1.0;
        for &t in xi {
            v *= self.value_1d(t);
            if v == 0.0 {
                break;
            }
        }
        v
    }

    /// `phi(x) = ∫ phi^(xi) e^{2 pi i x xi} d xi` in one dimension, by quadrature.
    pub fn spatial_1d(&self, x: f64) -> f64 {
        let tau = 2.0 * std::f64::consts::PI;
        let flat = if x == 0.0 {
            2.0 * self.inner
        } else {
            (tau * x * self.inner).sin() / (std::f64::consts::PI * x)
        };
        let width = self.outer - self.inner;
        let panels = ((x.abs() * width * 8.0).ceil() as usize).max(8);
        let total = self.total();
        // inner cumulative integral evaluated per node; the profile is 1 - S(u)/total
        let tail = integrate(
            |xi| {
                let u = 2.0 * (xi - self.inner) / width - 1.0;
                let v = (1.0 - self.mass_below(u) / total).clamp(0.0, 1.0);
                v * (tau * x * xi).cos()
            },
            self.inner,
            self.outer,
            panels,
        );
        flat + 2.0 * tail
    }

    pub fn spatial(&self, x: &[f64]) -> f64 {
        x.iter().map(|&t| self.spatial_1d(t)).product()
    }
}

/// Cumulative `|phi|^2` of the one-dimensional profile on `[-period/2, period/2)`, sampled
/// through one long inverse transform.
#[derive(Clone, Debug)]
pub struct SpatialMassTable {
    dt: f64,
    start: f64,
    prefix: Vec<f64>,
}

impl SpatialMassTable {
    pub fn new(profile: &BumpProfile, period: f64, samples: usize) -> Self {
        let m = samples;
        let mut a: Vec<Complex<f64>> = (0..m)
            .map(|j| {
                let k = if j < m / 2 { j as f64 } else { j as f64 - m as f64 };
                Complex::new(profile.value_1d(k / period) / period, 0.0)
            })
            .collect();
        f64::fft_plan(m, true).process(&mut a);
        let dt = period / m as f64;
        // a[j] = phi(j dt); reorder so index 0 sits at -period/2
        let mut prefix = Vec::with_capacity(m + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for i in 0..m {
            let j = (i + m / 2) % m;
            acc += a[j].norm_sqr() * dt;
            prefix.push(acc);
        }
        SpatialMassTable {
            dt,
            start: -0.5 * period,
            prefix,
        }
    }

    fn cumulative(&self, t: f64) -> f64 {
        let u = ((t - self.start) / self.dt).clamp(0.0, (self.prefix.len() - 1) as f64);
        let i = (u.floor() as usize).min(self.prefix.len() - 2);
        let w = u - i as f64;
        self.prefix[i] * (1.0 - w) + self.prefix[i + 1] * w
    }

    pub fn total(&self) -> f64 {
        *self.prefix.last().expect("nonempty table")
    }

    /// Share of `int |phi|^2` carried by `[a, b]`.
    pub fn fraction_inside(&self, a: f64, b: f64) -> f64 {
        ((self.cumulative(b) - self.cumulative(a)) / self.total()).clamp(0.0, 1.0)
    }
}

/// Samples of `phi^` on the frequency lattice of `grid`.
pub fn build_phi_hat<T: Real>(profile: &BumpProfile, grid: &Grid) -> Result<GridFunction<T>> {
    if grid.nyquist() <= profile.outer {
        return Err(Error::InvalidParameter(format!(
            "frequency span ±{} does not contain the bump support ±{}",
            grid.nyquist(),
            profile.outer
        )));
    }
    let n = grid.points_per_axis();
    let axis: Vec<f64> = (0..n).map(|k| profile.value_1d(grid.axis_freq(k))).collect();
    let data = (0..grid.len())
        .map(|i| {
            let v: f64 = grid.unravel(i).iter().map(|&k| axis[k]).product();
            Complex::new(T::of(v), T::zero())
        })
        .collect();
    GridFunction::from_vec(*grid, Domain::Frequency, data)
}
