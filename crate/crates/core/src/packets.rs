//! Wave packets `phi_p` and `psi_p^zeta`, built frequency-side as sparse spectra.
use num_complex::Complex;

use crate::bump::BumpProfile;
use crate::error::{Error, Result};
use crate::geometry::{SemitileIndex, Tile};
use crate::grid::{Domain, Grid, GridFunction};
use crate::multiplier::Multiplier;
use crate::scalar::Real;

/// Grid plus bump: everything needed to sample packets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PacketContext {
    pub grid: Grid,
    pub profile: BumpProfile,
}

/// Whether `zeta` must lie in the `r`-th semitile.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZetaCheck {
    Require,
    Allow,
}

/// Frequency samples on a subset of the grid, sorted by flat index.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSpectrum<T: Real> {
    grid: Grid,
    entries: Vec<(usize, Complex<T>)>,
}

impl<T: Real> SparseSpectrum<T> {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn entries(&self) -> &[(usize, Complex<T>)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self) -> GridFunction<T> {
        let mut g = GridFunction::zeros(self.grid, Domain::Frequency);
        let data = g.data_mut();
        for &(k, v) in &self.entries {
            data[k] = v;
        }
        g
    }

    pub fn synthesize(&self) -> Result<GridFunction<T>> {
        self.to_dense().inverse()
    }

    /// `<f, self>` given the spectrum of `f`.
    pub fn pair(&self, f_hat: &GridFunction<T>) -> Result<Complex<T>> {
        if f_hat.grid() != &self.grid || f_hat.domain() != Domain::Frequency {
            return Err(Error::GridMismatch);
        }
        let d = f_hat.data();
        let s: Complex<T> = self.entries.iter().map(|&(k, v)| d[k] * v.conj()).sum();
        Ok(s * f_hat.weight())
    }

    /// `<self, other>` by merging supports.
    pub fn inner(&self, other: &SparseSpectrum<T>) -> Result<Complex<T>> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut s = Complex::new(T::zero(), T::zero());
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    s += a[i].1 * b[j].1.conj();
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(s * T::of(self.grid.freq_spacing().powi(self.grid.dim as i32)))
    }

    pub fn norm_sq(&self) -> T {
        self.entries.iter().map(|e| e.1.norm_sqr()).sum::<T>() * T::of(self.grid.freq_spacing().powi(self.grid.dim as i32))
    }

    /// Inverse transform evaluated at an arbitrary point by direct summation.
    pub fn eval_at(&self, x: &[f64]) -> Complex<f64> {
        let tau = 2.0 * std::f64::consts::PI;
        let w = self.grid.freq_spacing().powi(self.grid.dim as i32);
        let s: Complex<f64> = self
            .entries
            .iter()
            .map(|&(k, v)| {
                let xi = self.grid.freq(k);
                let ph: f64 = xi.iter().zip(x).map(|(a, b)| a * b).sum();
                Complex::new(v.re.to_f64_lossy(), v.im.to_f64_lossy()) * Complex::from_polar(1.0, tau * ph)
            })
            .sum();
        s * w
    }
}

type AxisFactor = Vec<(usize, Complex<f64>)>;

impl PacketContext {
    pub fn new(grid: Grid, profile: BumpProfile) -> Result<Self> {
        if grid.nyquist() <= profile.outer {
            return Err(Error::InvalidParameter(format!(
                "frequency span ±{} does not contain the bump support ±{}",
                grid.nyquist(),
                profile.outer
            )));
        }
        Ok(PacketContext { grid, profile })
    }

    fn check_tile(&self, p: &Tile) -> Result<()> {
        if p.dim() != self.grid.dim {
            return Err(Error::DimensionMismatch(p.dim(), self.grid.dim));
        }
        if !self.grid.contains_cube(p.time()) {
            return Err(Error::NotRepresentable {
                tile: p.to_string(),
                reason: "time cube leaves the sampling box".into(),
            });
        }
        if p.time().scale() < self.grid.log2_spacing() {
            return Err(Error::NotRepresentable {
                tile: p.to_string(),
                reason: "time cube finer than the grid spacing".into(),
            });
        }
        Ok(())
    }

    fn axis_factors(&self, p: &Tile) -> Result<Vec<AxisFactor>> {
        self.check_tile(p)?;
        let g = &self.grid;
        let side = p.time().side_f64();
        let c_time = p.time().center_f64();
        let c_freq = p.semitile_unchecked(SemitileIndex::new(1, p.dim())?).center_f64();
        let reach = self.profile.outer / side;
        let nyq = g.nyquist();
        let npts = g.points_per_axis();
        let l = g.side();
        let tau = 2.0 * std::f64::consts::PI;
        let amp = side.sqrt();
        let mut out = Vec::with_capacity(p.dim());
        for d in 0..p.dim() {
            let c = c_freq[d];
            if c - reach < -nyq || c + reach > nyq {
                return Err(Error::NotRepresentable {
                    tile: p.to_string(),
                    reason: "frequency support leaves the grid span".into(),
                });
            }
            let half = (npts / 2) as f64;
            let lo = (((c - reach) * l + half).ceil().max(0.0)) as usize;
            let hi = (((c + reach) * l + half).floor() as usize).min(npts - 1);
            let mut axis = Vec::new();
            for k in lo..=hi {
                let xi = g.axis_freq(k);
                let v = self.profile.value_1d(side * (xi - c));
                if v != 0.0 {
                    let ph = Complex::from_polar(1.0, -tau * c_time[d] * (xi - c));
                    axis.push((k, ph * (amp * v)));
                }
            }
            if axis.is_empty() {
                return Err(Error::NotRepresentable {
                    tile: p.to_string(),
                    reason: "frequency support contains no grid point".into(),
                });
            }
            out.push(axis);
        }
        Ok(out)
    }

    /// Sparse spectrum of `phi_p`.
    pub fn phi_spectrum<T: Real>(&self, p: &Tile) -> Result<SparseSpectrum<T>> {
        let axes = self.axis_factors(p)?;
        let g = self.grid;
        let mut entries: Vec<(usize, Complex<f64>)> = vec![(0, Complex::new(1.0, 0.0))];
        for axis in &axes {
            let mut next = Vec::with_capacity(entries.len() * axis.len());
            for &(flat, v) in &entries {
                for &(k, a) in axis {
                    next.push((flat * g.points_per_axis() + k, v * a));
                }
            }
            entries = next;
        }
        // row-major construction already yields ascending flat indices
        Ok(SparseSpectrum {
            grid: g,
            entries: entries
                .into_iter()
                .map(|(k, v)| (k, Complex::new(T::of(v.re), T::of(v.im))))
                .collect(),
        })
    }

    /// Sparse spectrum of `psi_p^zeta`: `m(xi - zeta) phi_p^(xi)`.
    pub fn psi_spectrum<T: Real>(
        &self,
        p: &Tile,
        zeta: &[f64],
        m: &Multiplier,
        r: SemitileIndex,
        check: ZetaCheck,
    ) -> Result<SparseSpectrum<T>> {
        if zeta.len() != p.dim() {
            return Err(Error::DimensionMismatch(zeta.len(), p.dim()));
        }
        let semi = p.semitile(r)?;
        if check == ZetaCheck::Require && !semi.contains_point(zeta) {
            return Err(Error::ZetaOutsideSemitile {
                zeta: zeta.to_vec(),
                index: r.get(),
                tile: p.to_string(),
            });
        }
        let phi = self.phi_spectrum::<T>(p)?;
        self.modulate(&phi, zeta, m)
    }

    /// Multiplies a spectrum by `m(xi - zeta)`.
    pub fn modulate<T: Real>(&self, s: &SparseSpectrum<T>, zeta: &[f64], m: &Multiplier) -> Result<SparseSpectrum<T>> {
        let g = self.grid;
        let mut entries = Vec::with_capacity(s.entries.len());
        let mut shifted = vec![0.0; g.dim];
        for &(k, v) in &s.entries {
            let xi = g.freq(k);
            for d in 0..g.dim {
                shifted[d] = xi[d] - zeta[d];
            }
            entries.push((k, v * T::of(m.eval(&shifted)?)));
        }
        Ok(SparseSpectrum { grid: g, entries })
    }

    pub fn synthesize_phi_p<T: Real>(&self, p: &Tile) -> Result<GridFunction<T>> {
        self.phi_spectrum::<T>(p)?.synthesize()
    }

    pub fn synthesize_psi_p_zeta<T: Real>(
        &self,
        p: &Tile,
        zeta: &[f64],
        m: &Multiplier,
        r: SemitileIndex,
        check: ZetaCheck,
    ) -> Result<GridFunction<T>> {
        self.psi_spectrum::<T>(p, zeta, m, r, check)?.synthesize()
    }

    /// `phi_p(x) = e^{2 pi i c(omega_p(1)) x} |I_p|^{-1/2} phi((x - c(I_p)) / side)` from the
    /// spatial profile, without any transform.
    pub fn phi_direct(&self, p: &Tile, x: &[f64]) -> Complex<f64> {
        let side = p.time().side_f64();
        let ct = p.time().center_f64();
        let cf = p.semitile_unchecked(SemitileIndex::new(1, p.dim()).expect("index 1")).center_f64();
        let mut amp = side.powf(-0.5 * p.dim() as f64);
        let mut ph = 0.0;
        for d in 0..p.dim() {
            amp *= self.profile.spatial_1d((x[d] - ct[d]) / side);
            ph += cf[d] * x[d];
        }
        Complex::from_polar(amp, 2.0 * std::f64::consts::PI * ph)
    }
}

/// Discrete `sup_x |psi(x)| |I_p|^{1/2} (1 + |x - c(I_p)| / side)^nu`, with the periodic
/// minimal-image distance.
pub fn decay_constant<T: Real>(psi: &GridFunction<T>, p: &Tile, nu: f64) -> f64 {
    let g = psi.grid();
    let side = p.time().side_f64();
    let ct = p.time().center_f64();
    let l = g.side();
    let vol = p.time().volume_f64();
    psi.data()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = g.point(i);
            let r2: f64 = x
                .iter()
                .zip(&ct)
                .map(|(a, b)| {
                    let mut d = (a - b).rem_euclid(l);
                    if d > 0.5 * l {
                        d = l - d;
                    }
                    d * d
                })
                .sum();
            v.norm().to_f64_lossy() * vol.sqrt() * (1.0 + r2.sqrt() / side).powf(nu)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DyadicCube;
    use crate::grid::inner_product;

    fn tile(k: i32, corner: &[i64], fcorner: &[i64]) -> Tile {
        Tile::new(
            DyadicCube::new(k, corner.to_vec()).unwrap(),
            DyadicCube::new(-k, fcorner.to_vec()).unwrap(),
        )
        .unwrap()
    }

    fn ctx(dim: usize, log2_l: i32, s: u32) -> PacketContext {
        PacketContext::new(Grid::new(dim, log2_l, s).unwrap(), BumpProfile::default()).unwrap()
    }

    #[test]
    fn trivial_parameters_give_the_bump() {
        // omega_p(1) centred at 0 needs omega_p = [-1/2, 1/2)^n, impossible for a dyadic cube
        // at scale 0; use the tile whose first semitile is [0,1/2)^2 and undo the modulation
        let c = ctx(2, 6, 9);
        let p = tile(0, &[-1, -1], &[0, 0]);
        let phi = c.synthesize_phi_p::<f64>(&p).unwrap();
        let bump = crate::bump::build_phi_hat::<f64>(&c.profile, &c.grid).unwrap().inverse().unwrap();
        let g = c.grid;
        let mut err: f64 = 0.0;
        for i in 0..g.len() {
            let x = g.point(i);
            let shift = Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * 0.25 * (x[0] + x[1]));
            let y: Vec<f64> = x.iter().map(|t| t + 0.5).collect();
            if let (Some(a), Some(b)) = (g.axis_point_index(y[0]), g.axis_point_index(y[1])) {
                let want = bump.data()[g.ravel(&[a, b])];
                err = err.max((phi.data()[i] * shift - want).norm());
            }
        }
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn support_vanishes_outside_first_semitile() {
        let c = ctx(2, 5, 9);
        for p in [tile(0, &[1, -2], &[3, -1]), tile(-1, &[3, 5], &[2, 1]), tile(1, &[-2, 0], &[0, 0])] {
            let dense = c.phi_spectrum::<f64>(&p).unwrap().to_dense();
            let semi = p.semitile(SemitileIndex::new(1, 2).unwrap()).unwrap();
            let center = semi.center_f64();
            let true_half = c.profile.outer / p.time().side_f64();
            for k in 0..c.grid.len() {
                let xi = c.grid.freq(k);
                let v = dense.data()[k];
                if !semi.contains_point(&xi) {
                    assert_eq!(v, Complex::new(0.0, 0.0));
                }
                if xi.iter().zip(&center).any(|(a, b)| (a - b).abs() >= true_half) {
                    assert_eq!(v, Complex::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn spectrum_matches_transform_of_synthesis() {
        let c = ctx(2, 5, 8);
        let p = tile(0, &[2, -3], &[1, 2]);
        let s = c.phi_spectrum::<f64>(&p).unwrap();
        let back = s.synthesize().unwrap().forward().unwrap();
        let dense = s.to_dense();
        let err = back
            .data()
            .iter()
            .zip(dense.data())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn inner_products_agree_between_domains() {
        let c = ctx(2, 5, 8);
        let p = tile(0, &[0, -1], &[0, 0]);
        let q = tile(-1, &[1, -2], &[0, 0]);
        let sp = c.phi_spectrum::<f64>(&p).unwrap();
        let sq = c.phi_spectrum::<f64>(&q).unwrap();
        let a = sp.inner(&sq).unwrap();
        assert!(a.norm() > 1e-6);
        let b = inner_product(&sp.synthesize().unwrap(), &sq.synthesize().unwrap()).unwrap();
        assert!((a - b).norm() < 1e-12);
        let pair = sq.pair(&sp.synthesize().unwrap().forward().unwrap()).unwrap();
        assert!((pair - a).norm() < 1e-12);
        assert!((sp.norm_sq() - sp.synthesize().unwrap().norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn constant_multiplier_reproduces_phi() {
        let c = ctx(2, 5, 8);
        let p = tile(0, &[1, 1], &[0, 3]);
        let r = SemitileIndex::new(4, 2).unwrap();
        let zeta = p.semitile(r).unwrap().center_f64();
        let a = c.synthesize_psi_p_zeta::<f64>(&p, &zeta, &Multiplier::ConstantOne, r, ZetaCheck::Require).unwrap();
        let b = c.synthesize_phi_p::<f64>(&p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zeta_policy() {
        let c = ctx(2, 5, 8);
        let p = tile(0, &[1, 1], &[0, 3]);
        let r = SemitileIndex::new(2, 2).unwrap();
        let m = Multiplier::riesz(0);
        assert!(matches!(
            c.psi_spectrum::<f64>(&p, &[0.25, 3.25], &m, r, ZetaCheck::Require),
            Err(Error::ZetaOutsideSemitile { .. })
        ));
        assert!(c.psi_spectrum::<f64>(&p, &[0.25, 3.75], &m, r, ZetaCheck::Require).is_ok());
        // a grid frequency inside the support hits the singularity once checks are off
        let xi = c.grid.freq(c.phi_spectrum::<f64>(&p).unwrap().entries()[0].0);
        assert!(matches!(
            c.psi_spectrum::<f64>(&p, &xi, &m, r, ZetaCheck::Allow),
            Err(Error::MultiplierSingularity)
        ));
    }

    #[test]
    fn psi_norm_bounded_by_phi_norm() {
        let c = ctx(2, 5, 8);
        let p = tile(-1, &[1, 1], &[1, -2]);
        let r = SemitileIndex::new(3, 2).unwrap();
        let zeta = p.semitile(r).unwrap().center_f64();
        for m in [Multiplier::riesz(0), Multiplier::riesz(1), Multiplier::HalfSpaceSign { kappa: 2.0 }] {
            let psi = c.psi_spectrum::<f64>(&p, &zeta, &m, r, ZetaCheck::Require).unwrap();
            assert!(psi.norm_sq() <= c.phi_spectrum::<f64>(&p).unwrap().norm_sq() * (1.0 + 1e-15));
        }
    }

    #[test]
    fn unrepresentable_tiles_are_rejected() {
        let c = ctx(2, 3, 5);
        // frequency cube far outside the span
        assert!(c.phi_spectrum::<f64>(&tile(0, &[0, 0], &[5, 0])).is_err());
        // time cube outside the box
        assert!(c.phi_spectrum::<f64>(&tile(0, &[7, 0], &[0, 0])).is_err());
        // finer than the grid spacing
        assert!(c.phi_spectrum::<f64>(&tile(-3, &[0, 0], &[0, 0])).is_err());
    }

    #[test]
    fn pointwise_evaluation_matches_fft() {
        let c = ctx(2, 4, 6);
        let p = tile(0, &[1, -1], &[0, 1]);
        let s = c.phi_spectrum::<f64>(&p).unwrap();
        let f = s.synthesize().unwrap();
        for i in [0usize, 77, 1000, 2080, 4095] {
            assert!((f.data()[i] - s.eval_at(&c.grid.point(i))).norm() < 1e-12);
        }
    }

    #[test]
    fn f32_packets_track_f64() {
        let c = ctx(2, 5, 8);
        let p = tile(0, &[1, 1], &[0, 3]);
        let a = c.synthesize_phi_p::<f32>(&p).unwrap();
        let b = c.synthesize_phi_p::<f64>(&p).unwrap();
        let err = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| ((x.re as f64 - y.re).powi(2) + (x.im as f64 - y.im).powi(2)).sqrt())
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
    }
}
