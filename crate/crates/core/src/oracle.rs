//! Slow reference evaluations used to cross-check the fast paths.
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::field::{DirectionField, SetIndicator};
use crate::functionals::{EnergyValue, MassValue};
use crate::geometry::{DyadicCube, SemitileIndex, Tile};

/// Containment through exact endpoint comparisons.
fn cube_within(inner: &DyadicCube, outer: &DyadicCube) -> bool {
    (0..inner.dim()).all(|j| outer.lo(j) <= inner.lo(j) && inner.hi(j) <= outer.hi(j))
}

fn point_in(x: &[f64], c: &DyadicCube) -> bool {
    (0..c.dim()).all(|j| c.lo(j).to_f64() <= x[j] && x[j] < c.hi(j).to_f64())
}

/// Tiles `u >= p` in the universe, found by walking time ancestors and frequency descendants.
pub fn dominating_tiles(p: &Tile, universe: &[Tile]) -> Vec<Tile> {
    let members: HashSet<&Tile> = universe.iter().collect();
    let top = universe.iter().map(|t| t.scale()).max().unwrap_or(p.scale());
    let mut out = Vec::new();
    let mut time = p.time().clone();
    for k in p.scale()..=top {
        for w in p.freq().subcubes(-k) {
            if let Ok(u) = Tile::new(time.clone(), w) {
                if members.contains(&u) {
                    out.push(u);
                }
            }
        }
        time = time.parent();
    }
    out
}

/// Mass integrand summed over every grid point, membership tested from the cube endpoints.
pub fn mass_integral(u: &Tile, e: &SetIndicator, n: &DirectionField, exponent: f64) -> f64 {
    let g = e.grid();
    let c = u.time().center_f64();
    let side = u.time().side_f64();
    let mut s = 0.0;
    for i in 0..g.len() {
        if !e.contains(i) || !point_in(n.at(i), u.freq()) {
            continue;
        }
        let x = g.point(i);
        let d2: f64 = (0..x.len()).map(|j| (x[j] - c[j]).powi(2)).sum();
        s += 1.0 / (1.0 + d2.sqrt() / side).powf(exponent * x.len() as f64);
    }
    s * g.cell_volume() * side.powi(-(u.dim() as i32))
}

pub fn mass_single(p: &Tile, e: &SetIndicator, n: &DirectionField, universe: &[Tile], exponent: f64) -> Result<MassValue> {
    let cands = dominating_tiles(p, universe);
    if cands.is_empty() {
        return Err(Error::NoAdmissibleTile(p.to_string()));
    }
    let mut best = MassValue {
        value: f64::NEG_INFINITY,
        witness: None,
    };
    for u in cands {
        let v = mass_integral(&u, e, n, exponent);
        if v > best.value {
            best = MassValue {
                value: v,
                witness: Some(u),
            };
        }
    }
    Ok(best)
}

pub fn mass(p: &[Tile], e: &SetIndicator, n: &DirectionField, universe: &[Tile], exponent: f64) -> Result<f64> {
    let mut m: f64 = 0.0;
    for t in p {
        m = m.max(mass_single(t, e, n, universe, exponent)?.value);
    }
    Ok(m)
}

/// Whether `p` belongs to the `r`-tree under `t`, by endpoint comparisons.
pub fn in_r_tree(p: &Tile, t: &Tile, r: SemitileIndex) -> bool {
    let semi = |q: &Tile| q.semitile(r).expect("index valid for dimension");
    cube_within(p.time(), t.time()) && cube_within(t.freq(), p.freq()) && cube_within(&semi(t), &semi(p))
}

/// Energy from the definition: every top, the maximal `r`-tree found tile by tile.
pub fn energy(p: &[Tile], coeff_sq: &dyn Fn(&Tile) -> f64, r: SemitileIndex, universe: &[Tile]) -> EnergyValue {
    let mut best = EnergyValue {
        value: 0.0,
        witness: None,
    };
    for t in universe {
        let s: f64 = p.iter().filter(|q| in_r_tree(q, t, r)).map(coeff_sq).sum();
        let v = (s / t.time().volume_f64()).sqrt();
        if v > best.value {
            best = EnergyValue {
                value: v,
                witness: Some(t.clone()),
            };
        }
    }
    best
}

/// Energy as a max over every subset of `p` that forms an `r`-tree under some universe top.
pub fn energy_exhaustive(p: &[Tile], coeff_sq: &dyn Fn(&Tile) -> f64, r: SemitileIndex, universe: &[Tile]) -> f64 {
    assert!(p.len() <= 16, "exhaustive energy is exponential in |P|");
    let mut best: f64 = 0.0;
    for t in universe {
        for mask in 1u32..(1 << p.len()) {
            let subset: Vec<&Tile> = (0..p.len()).filter(|i| mask >> i & 1 == 1).map(|i| &p[i]).collect();
            if subset.iter().all(|q| in_r_tree(q, t, r)) {
                let s: f64 = subset.iter().map(|q| coeff_sq(q)).sum();
                best = best.max((s / t.time().volume_f64()).sqrt());
            }
        }
    }
    best
}

/// `(m(. - zeta) f^)` back in space through direct `O(N^2)` transforms in both directions.
pub fn multiplier_apply_direct(
    grid: &crate::grid::Grid,
    f: &[num_complex::Complex<f64>],
    m: &crate::multiplier::Multiplier,
    zeta: &[f64],
) -> Vec<num_complex::Complex<f64>> {
    use num_complex::Complex;
    let tau = 2.0 * std::f64::consts::PI;
    let pts: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.point(i)).collect();
    let fr: Vec<Vec<f64>> = (0..grid.len()).map(|k| grid.freq(k)).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let spec: Vec<Complex<f64>> = fr
        .iter()
        .map(|xi| {
            let s: Complex<f64> = pts
                .iter()
                .zip(f)
                .map(|(x, v)| v * Complex::from_polar(1.0, -tau * dot(x, xi)))
                .sum();
            let shifted: Vec<f64> = xi.iter().zip(zeta).map(|(a, b)| a - b).collect();
            s * grid.cell_volume() * m.eval_or_zero(&shifted)
        })
        .collect();
    let fw = grid.freq_spacing().powi(grid.dim as i32);
    pts.iter()
        .map(|x| {
            let s: Complex<f64> = fr
                .iter()
                .zip(&spec)
                .map(|(xi, v)| v * Complex::from_polar(1.0, tau * dot(x, xi)))
                .sum();
            s * fw
        })
        .collect()
}
