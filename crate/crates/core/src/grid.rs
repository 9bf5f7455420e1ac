//! Periodic sampling grids and complex grid functions with a continuum-normalized DFT.
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DyadicCube;
use crate::scalar::Real;

/// The box `[-L/2, L/2)^n`, `L = 2^log2_l`, sampled with `2^s` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub log2_l: i32,
    pub s: u32,
}

impl Grid {
    pub fn new(dim: usize, log2_l: i32, s: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("grid dimension must be >= 1".into()));
        }
        if s == 0 || s as usize * dim > 30 {
            return Err(Error::InvalidParameter(format!("unsupported grid size 2^{s} per axis in {dim} dims")));
        }
        Ok(Grid { dim, log2_l, s })
    }

    pub fn side(&self) -> f64 {
        2f64.powi(self.log2_l)
    }

    pub fn points_per_axis(&self) -> usize {
        1 << self.s
    }

    pub fn len(&self) -> usize {
        self.points_per_axis().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Spatial step `h = L / 2^s`.
    pub fn spacing(&self) -> f64 {
        2f64.powi(self.log2_l - self.s as i32)
    }

    pub fn log2_spacing(&self) -> i32 {
        self.log2_l - self.s as i32
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Frequency step `1 / L`.
    pub fn freq_spacing(&self) -> f64 {
        2f64.powi(-self.log2_l)
    }

    /// Half-width of the frequency span `[-2^(s-1)/L, 2^(s-1)/L)`.
    pub fn nyquist(&self) -> f64 {
        0.5 / self.spacing()
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let n = self.points_per_axis();
        let mut idx = vec![0; self.dim];
        for d in (0..self.dim).rev() {
            idx[d] = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        let n = self.points_per_axis();
        idx.iter().fold(0, |acc, &i| acc * n + i)
    }

    pub fn axis_point(&self, i: usize) -> f64 {
        -0.5 * self.side() + i as f64 * self.spacing()
    }

    pub fn axis_freq(&self, k: usize) -> f64 {
        (k as f64 - (self.points_per_axis() / 2) as f64) * self.freq_spacing()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat).iter().map(|&i| self.axis_point(i)).collect()
    }

    pub fn freq(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat).iter().map(|&k| self.axis_freq(k)).collect()
    }

    /// Axis index of an exactly representable frequency.
    pub fn axis_freq_index(&self, xi: f64) -> Option<usize> {
        let k = xi * self.side() + (self.points_per_axis() / 2) as f64;
        if k.fract() != 0.0 || k < 0.0 || k >= self.points_per_axis() as f64 {
            return None;
        }
        Some(k as usize)
    }

    /// Axis index of the grid point at or just below `x`, if inside the box.
    pub fn axis_point_index(&self, x: f64) -> Option<usize> {
        let i = ((x + 0.5 * self.side()) / self.spacing()).floor();
        if i < 0.0 || i >= self.points_per_axis() as f64 {
            return None;
        }
        Some(i as usize)
    }

    pub fn contains_cube(&self, c: &DyadicCube) -> bool {
        let half = 0.5 * self.side();
        (0..c.dim()).all(|j| -half <= c.lo(j).to_f64() && c.hi(j).to_f64() <= half)
    }

    /// The `2^n` dyadic cubes of side `L/2` tiling the box.
    pub fn half_box_cubes(&self) -> Vec<DyadicCube> {
        let k = self.log2_l - 1;
        (0..1usize << self.dim)
            .map(|b| {
                let corner = (0..self.dim).map(|d| if b >> (self.dim - 1 - d) & 1 == 1 { 0 } else { -1 }).collect();
                DyadicCube::new(k, corner).expect("dimension at least one")
            })
            .collect()
    }

    /// Flat indices of the grid points inside a dyadic cube.
    pub fn points_in_cube(&self, c: &DyadicCube) -> Vec<usize> {
        let ranges: Vec<(usize, usize)> = (0..self.dim)
            .map(|j| {
                let lo = c.lo(j).to_f64();
                let hi = c.hi(j).to_f64();
                let n = self.points_per_axis();
                let a = (((lo + 0.5 * self.side()) / self.spacing()).ceil().max(0.0) as usize).min(n);
                let b = (((hi + 0.5 * self.side()) / self.spacing()).ceil().max(0.0) as usize).min(n);
                (a, b)
            })
            .collect();
        let mut out = Vec::new();
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        if ranges.iter().any(|r| r.0 >= r.1) {
            return out;
        }
        loop {
            out.push(self.ravel(&idx));
            let mut d = self.dim;
            loop {
                if d == 0 {
                    return out;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < ranges[d].1 {
                    break;
                }
                idx[d] = ranges[d].0;
            }
        }
    }
}

/// Whether samples live on the spatial or the frequency lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Space,
    Frequency,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T: Real> {
    grid: Grid,
    domain: Domain,
    data: Vec<Complex<T>>,
}

fn parity_sign<T: Real>(grid: &Grid, flat: usize, shift: usize) -> T {
    let s: usize = grid.unravel(flat).iter().map(|&i| i + shift).sum();
    if s.is_multiple_of(2) {
        T::one()
    } else {
        -T::one()
    }
}

fn fft_nd<T: Real>(grid: &Grid, data: &mut [Complex<T>], inverse: bool) {
    let n = grid.points_per_axis();
    let plan: Arc<dyn rustfft::Fft<T>> = T::fft_plan(n, inverse);
    let mut line = vec![Complex::<T>::zero(); n];
    let mut scratch = vec![Complex::<T>::zero(); plan.get_inplace_scratch_len()];
    for d in 0..grid.dim {
        let stride = n.pow((grid.dim - 1 - d) as u32);
        let outer = data.len() / (n * stride);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * n * stride + inner;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[base + k * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

impl<T: Real> GridFunction<T> {
    pub fn zeros(grid: Grid, domain: Domain) -> Self {
        GridFunction {
            grid,
            domain,
            data: vec![Complex::zero(); grid.len()],
        }
    }

    pub fn from_vec(grid: Grid, domain: Domain, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} samples, got {}",
                grid.len(),
                data.len()
            )));
        }
        Ok(GridFunction { grid, domain, data })
    }

    /// Samples `f(x)` (space) or `f(xi)` (frequency) at every lattice point.
    pub fn from_fn(grid: Grid, domain: Domain, f: impl Fn(&[f64]) -> Complex<T>) -> Self {
        let data = (0..grid.len())
            .map(|i| {
                let x = match domain {
                    Domain::Space => grid.point(i),
                    Domain::Frequency => grid.freq(i),
                };
                f(&x)
            })
            .collect();
        GridFunction { grid, domain, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex<T>> {
        self.data
    }

    /// Quadrature weight of one sample: `h^n` in space, `L^-n` in frequency.
    pub fn weight(&self) -> T {
        T::of(match self.domain {
            Domain::Space => self.grid.cell_volume(),
            Domain::Frequency => self.grid.freq_spacing().powi(self.grid.dim as i32),
        })
    }

    /// Discrete approximation of `f^(xi) = ∫ f(x) e^{-2 pi i x xi} dx`.
    pub fn forward(&self) -> Result<GridFunction<T>> {
        if self.domain != Domain::Space {
            return Err(Error::InvalidParameter("forward transform expects spatial samples".into()));
        }
        let g = self.grid;
        let half = g.points_per_axis() / 2;
        let mut data: Vec<Complex<T>> = self
            .data
            .iter()
            .enumerate()
            .map(|(i, v)| *v * parity_sign::<T>(&g, i, 0))
            .collect();
        fft_nd(&g, &mut data, false);
        let w = T::of(g.cell_volume());
        for (k, v) in data.iter_mut().enumerate() {
            *v *= parity_sign::<T>(&g, k, half) * w;
        }
        Ok(GridFunction {
            grid: g,
            domain: Domain::Frequency,
            data,
        })
    }

    pub fn inverse(&self) -> Result<GridFunction<T>> {
        if self.domain != Domain::Frequency {
            return Err(Error::InvalidParameter("inverse transform expects frequency samples".into()));
        }
        let g = self.grid;
        let half = g.points_per_axis() / 2;
        let mut data: Vec<Complex<T>> = self
            .data
            .iter()
            .enumerate()
            .map(|(k, v)| *v * parity_sign::<T>(&g, k, half))
            .collect();
        fft_nd(&g, &mut data, true);
        let w = T::of(g.freq_spacing().powi(g.dim as i32));
        for (i, v) in data.iter_mut().enumerate() {
            *v *= parity_sign::<T>(&g, i, 0) * w;
        }
        Ok(GridFunction {
            grid: g,
            domain: Domain::Space,
            data,
        })
    }

    pub fn norm_sq(&self) -> T {
        self.data.iter().map(|v| v.norm_sqr()).sum::<T>() * self.weight()
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, c: Complex<T>) -> Self {
        GridFunction {
            grid: self.grid,
            domain: self.domain,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add_assign_scaled(&mut self, other: &GridFunction<T>, c: Complex<T>) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * c;
        }
        Ok(())
    }

    pub fn abs(&self) -> Vec<T> {
        self.data.iter().map(|v| v.norm()).collect()
    }

    fn check_compatible(&self, other: &GridFunction<T>) -> Result<()> {
        if self.grid != other.grid || self.domain != other.domain {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Writes `<stem>.json` (header) and `<stem>.bin` (interleaved little-endian samples).
    pub fn save(&self, stem: &Path) -> Result<()> {
        let bin = stem.with_extension("bin");
        let header = FileHeader {
            dim: self.grid.dim,
            log2_l: self.grid.log2_l,
            side: self.grid.side(),
            s: self.grid.s,
            layout: "row-major".into(),
            encoding: "complex-interleaved-le".into(),
            scalar_bytes: std::mem::size_of::<T>(),
            domain: self.domain,
            data: bin
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default(),
        };
        std::fs::write(stem.with_extension("json"), serde_json::to_vec_pretty(&header)?)?;
        let mut bytes = Vec::with_capacity(self.data.len() * 2 * header.scalar_bytes);
        for v in &self.data {
            push_le(&mut bytes, v.re);
            push_le(&mut bytes, v.im);
        }
        std::fs::write(bin, bytes)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let header: FileHeader = serde_json::from_slice(&std::fs::read(stem.with_extension("json"))?)?;
        if header.layout != "row-major" || header.encoding != "complex-interleaved-le" {
            return Err(Error::Parse("unsupported grid function layout".into()));
        }
        let grid = Grid::new(header.dim, header.log2_l, header.s)?;
        let bytes = std::fs::read(stem.with_file_name(&header.data))?;
        let w = header.scalar_bytes;
        if bytes.len() != grid.len() * 2 * w {
            return Err(Error::Parse("sample file has the wrong length".into()));
        }
        let read = |chunk: &[u8]| -> T {
            let v = match w {
                4 => f32::from_le_bytes(chunk.try_into().unwrap()) as f64,
                _ => f64::from_le_bytes(chunk.try_into().unwrap()),
            };
            T::of(v)
        };
        let data = bytes
            .chunks_exact(2 * w)
            .map(|c| Complex::new(read(&c[..w]), read(&c[w..])))
            .collect();
        GridFunction::from_vec(grid, header.domain, data)
    }
}

fn push_le<T: Real>(out: &mut Vec<u8>, v: T) {
    if std::mem::size_of::<T>() == 4 {
        out.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
    } else {
        out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
}

#[derive(Serialize, Deserialize)]
struct FileHeader {
    dim: usize,
    log2_l: i32,
    side: f64,
    s: u32,
    layout: String,
    encoding: String,
    scalar_bytes: usize,
    domain: Domain,
    data: String,
}

/// Riemann-sum pairing `sum f conj(g) w`.
pub fn inner_product<T: Real>(f: &GridFunction<T>, g: &GridFunction<T>) -> Result<Complex<T>> {
    f.check_compatible(g)?;
    let s: Complex<T> = f.data.iter().zip(&g.data).map(|(a, b)| a * b.conj()).sum();
    Ok(s * f.weight())
}

/// `sup_lambda lambda |{|g| > lambda}|^{1/2}`, attained just below a sample magnitude.
pub fn weak_l2_quasinorm<T: Real>(g: &GridFunction<T>) -> T {
    weak_l2_from_magnitudes(&g.abs(), g.weight())
}

pub fn weak_l2_from_magnitudes<T: Real>(mags: &[T], cell: T) -> T {
    let mut m: Vec<T> = mags.iter().copied().filter(|v| *v > T::zero()).collect();
    m.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    m.iter()
        .enumerate()
        .map(|(i, &a)| a * (T::of((i + 1) as f64) * cell).sqrt())
        .fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_fn(grid: Grid, seed: u64) -> GridFunction<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..grid.len())
            .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        GridFunction::from_vec(grid, Domain::Space, data).unwrap()
    }

    // Direct O(N^2) transform following the continuum convention.
    fn naive_forward(f: &GridFunction<f64>) -> Vec<Complex<f64>> {
        let g = *f.grid();
        (0..g.len())
            .map(|k| {
                let xi = g.freq(k);
                f.data()
                    .iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let x = g.point(j);
                        let ph: f64 = x.iter().zip(&xi).map(|(a, b)| a * b).sum();
                        v * Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * ph)
                    })
                    .sum::<Complex<f64>>()
                    * g.cell_volume()
            })
            .collect()
    }

    #[test]
    fn forward_matches_direct_sum() {
        for (dim, l, s) in [(1, 2, 4), (2, 1, 3), (2, -1, 2), (3, 0, 2)] {
            let g = Grid::new(dim, l, s).unwrap();
            let f = random_fn(g, 7);
            let fast = f.forward().unwrap();
            for (a, b) in fast.data().iter().zip(naive_forward(&f)) {
                assert!((a - b).norm() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn round_trip_and_plancherel() {
        let g = Grid::new(2, 3, 5).unwrap();
        let f = random_fn(g, 3);
        let fh = f.forward().unwrap();
        let back = fh.inverse().unwrap();
        let scale = f.norm();
        for (a, b) in f.data().iter().zip(back.data()) {
            assert!((a - b).norm() <= 1e-12 * scale);
        }
        assert!((f.norm() - fh.norm()).abs() <= 1e-10 * f.norm());
    }

    #[test]
    fn gaussian_transform_is_gaussian() {
        let g = Grid::new(1, 4, 7).unwrap();
        let f = GridFunction::<f64>::from_fn(g, Domain::Space, |x| {
            Complex::new((-std::f64::consts::PI * x[0] * x[0]).exp(), 0.0)
        });
        let fh = f.forward().unwrap();
        for k in 0..g.len() {
            let xi = g.freq(k)[0];
            let want = (-std::f64::consts::PI * xi * xi).exp();
            assert!((fh.data()[k] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn inner_product_basics() {
        let g = Grid::new(2, 2, 3).unwrap();
        let f = random_fn(g, 1);
        let h = random_fn(g, 2);
        let ff = inner_product(&f, &f).unwrap();
        assert!(ff.im.abs() < 1e-14 && ff.re >= 0.0);
        assert!((ff.re - f.norm_sq()).abs() < 1e-12);
        let a = inner_product(&f, &h).unwrap();
        let b = inner_product(&h, &f).unwrap();
        assert!((a - b.conj()).norm() < 1e-12);
        let other = random_fn(Grid::new(2, 2, 4).unwrap(), 1);
        assert_eq!(inner_product(&f, &other), Err(Error::GridMismatch));
    }

    #[test]
    fn weak_norm_examples() {
        let g = Grid::new(2, 2, 3).unwrap();
        let zero = GridFunction::<f64>::zeros(g, Domain::Space);
        assert_eq!(weak_l2_quasinorm(&zero), 0.0);
        let ind = GridFunction::<f64>::from_fn(g, Domain::Space, |x| {
            if x[0] >= 0.0 && x[1] < 0.5 {
                Complex::new(1.0, 0.0)
            } else {
                Complex::zero()
            }
        });
        let count = ind.data().iter().filter(|v| v.re > 0.0).count();
        let measure = count as f64 * g.cell_volume();
        assert!((weak_l2_quasinorm(&ind) - measure.sqrt()).abs() < 1e-14);
        let scaled = ind.scaled(Complex::new(0.0, -3.0));
        assert!((weak_l2_quasinorm(&scaled) - 3.0 * measure.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn weak_norm_matches_level_set_scan() {
        let g = Grid::new(1, 0, 6).unwrap();
        let f = random_fn(g, 11);
        let mags = f.abs();
        let mut best: f64 = 0.0;
        for &lam in &mags {
            for eps in [1e-9, 0.0] {
                let l = lam - eps;
                let cnt = mags.iter().filter(|&&m| m > l).count();
                best = best.max(l * (cnt as f64 * g.cell_volume()).sqrt());
            }
        }
        assert!((weak_l2_quasinorm(&f) - best).abs() < 1e-8);
    }

    #[test]
    fn file_round_trip() {
        let g = Grid::new(2, 1, 3).unwrap();
        let f = random_fn(g, 5);
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("f");
        f.save(&stem).unwrap();
        let back = GridFunction::<f64>::load(&stem).unwrap();
        assert_eq!(back, f);
        let f32v = GridFunction::<f32>::from_vec(
            g,
            Domain::Frequency,
            f.data().iter().map(|v| Complex::new(v.re as f32, v.im as f32)).collect(),
        )
        .unwrap();
        f32v.save(&stem).unwrap();
        assert_eq!(GridFunction::<f32>::load(&stem).unwrap(), f32v);
    }

    #[test]
    fn single_precision_round_trip() {
        let g = Grid::new(2, 2, 4).unwrap();
        let f = GridFunction::<f32>::from_fn(g, Domain::Space, |x| Complex::new((x[0] * 0.3).sin() as f32, x[1] as f32));
        let back = f.forward().unwrap().inverse().unwrap();
        for (a, b) in f.data().iter().zip(back.data()) {
            assert!((a - b).norm() < 1e-5);
        }
    }

    #[test]
    fn points_in_cube_enumerates_members() {
        let g = Grid::new(2, 3, 4).unwrap();
        let c = DyadicCube::new(0, vec![-1, 2]).unwrap();
        let pts = g.points_in_cube(&c);
        let brute: Vec<usize> = (0..g.len()).filter(|&i| c.contains_point(&g.point(i))).collect();
        assert_eq!(pts, brute);
    }

    proptest! {
        #[test]
        fn plancherel_random(seed in 0u64..1000, s in 2u32..5, l in -2i32..4) {
            let g = Grid::new(2, l, s).unwrap();
            let f = random_fn(g, seed);
            let fh = f.forward().unwrap();
            prop_assert!((f.norm() - fh.norm()).abs() <= 1e-10 * f.norm());
        }
    }
}
