//! Seeded unit-norm test functions.
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Tile;
use crate::grid::{Domain, GridFunction};
use crate::packets::PacketContext;
use crate::scalar::Real;

/// Largest periodization error tolerated for Gaussian packets.
pub const PERIODIZATION_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunctionKind {
    /// `exp(-pi |x - x0|^2 / w^2) e^{2 pi i xi0 x}`; the width is random unless given.
    GaussianPacket {
        #[serde(default)]
        width: Option<f64>,
    },
    /// Random complex combination of `phi_p` over tiles drawn from a pool.
    RandomWavepacketCombo {
        #[serde(default = "default_components")]
        components: usize,
    },
    /// Low-pass filtered complex white noise.
    SmoothNoise,
}

fn default_components() -> usize {
    8
}

impl std::str::FromStr for TestFunctionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-packet" => Ok(TestFunctionKind::GaussianPacket { width: None }),
            "random-wavepacket-combo" => Ok(TestFunctionKind::RandomWavepacketCombo {
                components: default_components(),
            }),
            "smooth-noise" => Ok(TestFunctionKind::SmoothNoise),
            other => Err(Error::InvalidParameter(format!("unknown test function kind '{other}'"))),
        }
    }
}

/// Relative periodization error of a 1-D Gaussian `exp(-pi t^2 / w^2)` on a box of side `l`,
/// sampled at `n` points: `max_x sum_{m != 0} g(x + m l) / max g`.
pub fn gaussian_periodization_error(w: f64, l: f64, n: usize, offset: f64) -> f64 {
    let h = l / n as f64;
    let g = |t: f64| (-std::f64::consts::PI * t * t / (w * w)).exp();
    let reach = ((w * 8.0) / l).ceil() as i64 + 1;
    (0..n)
        .map(|j| {
            let x = -0.5 * l + j as f64 * h - offset;
            (1..=reach).map(|m| g(x + m as f64 * l) + g(x - m as f64 * l)).sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Draws a test function with `||f||_2 = 1`. `pool` supplies tiles for wavepacket combinations.
pub fn random_test_function<T: Real>(
    kind: &TestFunctionKind,
    seed: u64,
    ctx: &PacketContext,
    pool: &[Tile],
) -> Result<GridFunction<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = ctx.grid;
    let f = match kind {
        TestFunctionKind::GaussianPacket { width } => {
            let l = grid.side();
            // balance spatial and spectral spread around sqrt(L h)
            let w = width.unwrap_or_else(|| (l * grid.spacing()).sqrt() * rng.gen_range(0.8..1.25));
            if !(w > 0.0) {
                return Err(Error::InvalidParameter(format!("gaussian width must be positive, got {w}")));
            }
            let x0: Vec<f64> = (0..grid.dim).map(|_| rng.gen_range(-0.1..0.1) * l).collect();
            let xi0: Vec<f64> = (0..grid.dim).map(|_| rng.gen_range(-0.1..0.1) * grid.nyquist()).collect();
            for d in 0..grid.dim {
                let space = gaussian_periodization_error(w, l, grid.points_per_axis(), x0[d]);
                // the spectrum is a Gaussian of width 1/w centred at xi0 on a span of 1/h
                let freq = gaussian_periodization_error(
                    1.0 / w,
                    2.0 * grid.nyquist(),
                    grid.points_per_axis(),
                    xi0[d],
                );
                let err = space.max(freq);
                if err > PERIODIZATION_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian of width {w} has periodization error {err:.3e} on a box of side {l}"
                    )));
                }
            }
            let tau = 2.0 * std::f64::consts::PI;
            GridFunction::from_fn(grid, Domain::Space, |x| {
                let r2: f64 = x.iter().zip(&x0).map(|(a, b)| (a - b) * (a - b)).sum();
                let ph: f64 = x.iter().zip(&xi0).map(|(a, b)| a * b).sum();
                let v = Complex::from_polar((-std::f64::consts::PI * r2 / (w * w)).exp(), tau * ph);
                Complex::new(T::of(v.re), T::of(v.im))
            })
        }
        TestFunctionKind::RandomWavepacketCombo { components } => {
            if pool.is_empty() || *components == 0 {
                return Err(Error::InvalidParameter(
                    "wavepacket combination needs a nonempty tile pool and at least one component".into(),
                ));
            }
            let mut spec = GridFunction::<T>::zeros(grid, Domain::Frequency);
            for _ in 0..*components {
                let p = &pool[rng.gen_range(0..pool.len())];
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                let c = Complex::new(T::of(re), T::of(im));
                let s = ctx.phi_spectrum::<T>(p)?;
                let data = spec.data_mut();
                for &(k, v) in s.entries() {
                    data[k] += v * c;
                }
            }
            spec.inverse()?
        }
        TestFunctionKind::SmoothNoise => {
            let cutoff = 0.25 * grid.nyquist();
            let data = (0..grid.len())
                .map(|k| {
                    let r2: f64 = grid.freq(k).iter().map(|t| t * t).sum();
                    let env = (-r2 / (cutoff * cutoff)).exp();
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex::new(T::of(re * env), T::of(im * env))
                })
                .collect();
            let spec = GridFunction::from_vec(grid, Domain::Frequency, data)?;
            spec.inverse()?
        }
    };
    let norm = f.norm();
    if !(norm > T::zero()) {
        return Err(Error::Normalization("test function vanished before normalization".into()));
    }
    Ok(f.scaled(Complex::new(T::one() / norm, T::zero())))
}
