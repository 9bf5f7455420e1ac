//! Coefficients `<f, phi_p>` and cached packet spectra for a finite tile set.
use std::collections::HashMap;

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Tile;
use crate::grid::{inner_product, Domain, GridFunction};
use crate::packets::{PacketContext, SparseSpectrum};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct TileWeights<T: Real> {
    ctx: PacketContext,
    tiles: Vec<Tile>,
    index: HashMap<Tile, usize>,
    coeffs: Vec<Complex<T>>,
    spectra: Vec<SparseSpectrum<T>>,
    f_norm: f64,
}

impl<T: Real> TileWeights<T> {
    /// Spectra for every tile and coefficients against `f` (given in space).
    pub fn compute(ctx: &PacketContext, f: &GridFunction<T>, tiles: &[Tile]) -> Result<Self> {
        if f.grid() != &ctx.grid {
            return Err(Error::GridMismatch);
        }
        let f_hat = match f.domain() {
            Domain::Space => f.forward()?,
            Domain::Frequency => f.clone(),
        };
        let mut seen = HashMap::new();
        let mut unique = Vec::with_capacity(tiles.len());
        for t in tiles {
            if !seen.contains_key(t) {
                seen.insert(t.clone(), unique.len());
                unique.push(t.clone());
            }
        }
        let spectra: Vec<SparseSpectrum<T>> = unique
            .par_iter()
            .map(|p| ctx.phi_spectrum::<T>(p))
            .collect::<Result<_>>()?;
        let coeffs = spectra.iter().map(|s| s.pair(&f_hat)).collect::<Result<_>>()?;
        Ok(TileWeights {
            ctx: *ctx,
            tiles: unique,
            index: seen,
            coeffs,
            spectra,
            f_norm: f.norm().to_f64_lossy(),
        })
    }

    pub fn ctx(&self) -> &PacketContext {
        &self.ctx
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    /// `||f||_2` of the function the coefficients were taken against.
    pub fn f_norm(&self) -> f64 {
        self.f_norm
    }

    pub fn index_of(&self, p: &Tile) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn coeff(&self, p: &Tile) -> Result<Complex<T>> {
        self.index_of(p)
            .map(|i| self.coeffs[i])
            .ok_or_else(|| Error::InvalidParameter(format!("no coefficient for tile {p}")))
    }

    /// `|<f, phi_p>|^2` in double precision.
    pub fn coeff_sq(&self, p: &Tile) -> Result<f64> {
        let c = self.coeff(p)?;
        let (re, im) = (c.re.to_f64_lossy(), c.im.to_f64_lossy());
        Ok(re * re + im * im)
    }

    pub fn spectrum(&self, p: &Tile) -> Result<&SparseSpectrum<T>> {
        self.index_of(p)
            .map(|i| &self.spectra[i])
            .ok_or_else(|| Error::InvalidParameter(format!("no spectrum for tile {p}")))
    }

    /// Same packets, coefficients multiplied by `lambda`.
    pub fn scaled(&self, lambda: Complex<T>) -> Self {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c *= lambda;
        }
        out.f_norm *= lambda.norm().to_f64_lossy();
        out
    }

    /// Largest `|coeff - <f, phi_p>|` with the pairing redone in space.
    pub fn recompute_delta(&self, f: &GridFunction<T>) -> Result<f64> {
        let f_space = match f.domain() {
            Domain::Space => f.clone(),
            Domain::Frequency => f.inverse()?,
        };
        let deltas: Vec<f64> = self
            .spectra
            .par_iter()
            .zip(&self.coeffs)
            .map(|(s, c)| {
                let direct = inner_product(&f_space, &s.synthesize()?)?;
                Ok((direct - c).norm().to_f64_lossy())
            })
            .collect::<Result<_>>()?;
        Ok(deltas.into_iter().fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bump::BumpProfile;
    use crate::geometry::{generate_universe, DyadicCube};
    use crate::grid::Grid;
    use crate::testfn::{random_test_function, TestFunctionKind};

    #[test]
    fn coefficients_agree_with_spatial_pairing() {
        let ctx = PacketContext::new(Grid::new(2, 3, 6).unwrap(), BumpProfile::default()).unwrap();
        let u = generate_universe(
            2,
            0,
            1,
            &DyadicCube::new(2, vec![0, 0]).unwrap(),
            &DyadicCube::new(1, vec![0, 0]).unwrap(),
        )
        .unwrap();
        let f = random_test_function::<f64>(&TestFunctionKind::SmoothNoise, 3, &ctx, &u).unwrap();
        let mut tiles = u[..20].to_vec();
        tiles.push(u[0].clone());
        let w = TileWeights::compute(&ctx, &f, &tiles).unwrap();
        assert_eq!(w.tiles().len(), 20);
        assert!(w.recompute_delta(&f).unwrap() < 1e-10);
        let l = w.scaled(Complex::new(2.0, 0.0));
        assert!((l.coeff_sq(&u[3]).unwrap() - 4.0 * w.coeff_sq(&u[3]).unwrap()).abs() < 1e-14);
        assert!(w.coeff(&u[40]).is_err());
    }
}
