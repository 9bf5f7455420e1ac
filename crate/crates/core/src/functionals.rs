//! Mass, energy, `Delta` and the `G_J` measure against grid-resolved `E` and `N`.
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DirectionField, SetIndicator};
use crate::geometry::{DyadicCube, SemitileIndex, Tile};
use crate::scalar::Real;
use crate::trees::{r_tree_under, Tree};
use crate::weights::TileWeights;

/// Default mass kernel exponent per dimension: `(1 + |x - c| / side)^{-10 n}`.
pub const DEFAULT_MASS_EXPONENT: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassValue {
    pub value: f64,
    pub witness: Option<Tile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyValue {
    pub value: f64,
    pub witness: Option<Tile>,
}

/// `h^n sum_{x in E, N(x) in omega_u} |I_u|^{-1} (1 + |x - c(I_u)| / side)^{-exponent n}`.
pub fn mass_integral(u: &Tile, e: &SetIndicator, n: &DirectionField, exponent: f64) -> f64 {
    let g = e.grid();
    let c = u.time().center_f64();
    let side = u.time().side_f64();
    let power = -exponent * u.dim() as f64;
    let mut s = 0.0;
    for i in e.members() {
        if !n.in_cube(i, u.freq()) {
            continue;
        }
        let x = g.point(i);
        let d: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        s += (1.0 + d / side).powf(power);
    }
    s * g.cell_volume() / u.time().volume_f64()
}

/// Per-tile integrals over a universe; sups in the mass are taken over this universe.
#[derive(Clone, Debug)]
pub struct MassTable {
    universe: Vec<Tile>,
    index: HashMap<Tile, usize>,
    q: Vec<f64>,
    exponent: f64,
}

impl MassTable {
    pub fn new(universe: &[Tile], e: &SetIndicator, n: &DirectionField, exponent: f64) -> Result<Self> {
        if e.grid() != n.grid() {
            return Err(Error::GridMismatch);
        }
        if !(exponent > 0.0) {
            return Err(Error::InvalidParameter(format!("mass exponent must be positive, got {exponent}")));
        }
        let q = universe.par_iter().map(|u| mass_integral(u, e, n, exponent)).collect();
        let index = universe.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(MassTable {
            universe: universe.to_vec(),
            index,
            q,
            exponent,
        })
    }

    pub fn universe(&self) -> &[Tile] {
        &self.universe
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn q(&self, u: &Tile) -> Option<f64> {
        self.index.get(u).map(|&i| self.q[i])
    }

    /// `sup_{u >= p}` over the universe; ties go to the first dominating tile in universe order.
    pub fn mass_single(&self, p: &Tile) -> Result<MassValue> {
        let mut best: Option<(f64, usize)> = None;
        for (i, u) in self.universe.iter().enumerate() {
            if p.leq(u) && best.is_none_or(|(v, _)| self.q[i] > v) {
                best = Some((self.q[i], i));
            }
        }
        best.map(|(value, i)| MassValue {
            value,
            witness: Some(self.universe[i].clone()),
        })
        .ok_or_else(|| Error::NoAdmissibleTile(p.to_string()))
    }

    pub fn mass(&self, p: &[Tile]) -> Result<MassValue> {
        let mut out = MassValue {
            value: 0.0,
            witness: None,
        };
        for t in p {
            let m = self.mass_single(t)?;
            if out.witness.is_none() || m.value > out.value {
                out = m;
            }
        }
        Ok(out)
    }
}

/// `(|I_top|^{-1} sum_{p in tiles} |<f, phi_p>|^2)^{1/2}`.
pub fn delta<T: Real>(tiles: &[Tile], top: &Tile, w: &TileWeights<T>) -> Result<f64> {
    let mut s = 0.0;
    for p in tiles {
        s += w.coeff_sq(p)?;
    }
    Ok((s / top.time().volume_f64()).sqrt())
}

/// Sup over universe tops of `delta` of the maximal `r`-tree of `p` under that top.
pub fn energy<T: Real>(p: &[Tile], w: &TileWeights<T>, r: SemitileIndex, universe: &[Tile]) -> Result<EnergyValue> {
    let mut out = EnergyValue {
        value: 0.0,
        witness: None,
    };
    if p.is_empty() {
        return Ok(out);
    }
    let values: Vec<f64> = universe
        .par_iter()
        .map(|t| delta(&r_tree_under(p, t, r), t, w))
        .collect::<Result<_>>()?;
    for (t, v) in universe.iter().zip(values) {
        if v > out.value {
            out = EnergyValue {
                value: v,
                witness: Some(t.clone()),
            };
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GjMeasure {
    pub measure: f64,
    pub mu: f64,
    /// `measure / (mu |J|)`, zero when the measure vanishes.
    pub ratio: f64,
    /// Positive measure while `mu = 0`.
    pub inconsistent: bool,
}

/// `|J ∩ ⋃_{p in T, |I_p| > 2^n |J|} E ∩ N^{-1}[omega_{p(r)}]|`.
pub fn g_j_measure(
    t: &Tree,
    j: &DyadicCube,
    e: &SetIndicator,
    n: &DirectionField,
    r: SemitileIndex,
    mu: f64,
) -> Result<GjMeasure> {
    if e.grid() != n.grid() {
        return Err(Error::GridMismatch);
    }
    let g = e.grid();
    let big = 2f64.powi(j.dim() as i32) * j.volume_f64();
    let semis: Vec<DyadicCube> = t
        .tiles()
        .iter()
        .filter(|p| p.time().volume_f64() > big)
        .map(|p| p.semitile(r))
        .collect::<Result<_>>()?;
    let count = g
        .points_in_cube(j)
        .into_iter()
        .filter(|&i| e.contains(i) && semis.iter().any(|w| n.in_cube(i, w)))
        .count();
    let measure = count as f64 * g.cell_volume();
    let inconsistent = mu == 0.0 && measure > 0.0;
    let ratio = if measure == 0.0 {
        0.0
    } else if mu == 0.0 {
        f64::INFINITY
    } else {
        measure / (mu * j.volume_f64())
    };
    Ok(GjMeasure {
        measure,
        mu,
        ratio,
        inconsistent,
    })
}
