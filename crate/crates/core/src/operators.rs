//! Packet-sum operators and the inequality checks assembled from them.
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bump::SpatialMassTable;
use crate::error::{Error, Result};
use crate::field::{DirectionField, SetIndicator};
use crate::geometry::{DyadicCube, SemitileIndex, Tile};
use crate::grid::{Domain, Grid, GridFunction};
use crate::multiplier::Multiplier;
use crate::packets::ZetaCheck;
use crate::scalar::Real;
use crate::selection::Instance;
use crate::trees::{j_partition_roots, r_tree_under, Tree};
use crate::weights::TileWeights;

/// Tolerance on `||f||_2 = 1` and `|E| <= 1` for the model sum.
pub const NORMALIZATION_TOL: f64 = 1e-9;

fn c64<T: Real>(c: Complex<T>) -> Complex<f64> {
    Complex::new(c.re.to_f64_lossy(), c.im.to_f64_lossy())
}

fn dedup(p: &[Tile]) -> Vec<&Tile> {
    let mut seen = HashSet::new();
    p.iter().filter(|t| seen.insert(*t)).collect()
}

fn zeta_key(z: &[f64]) -> Vec<u64> {
    z.iter().map(|v| v.to_bits()).collect()
}

/// `sum over p with zeta in omega_{p(r)} of <f, phi_p> psi_p^zeta`, one inverse transform.
pub fn eval_b_zeta_r<T: Real>(
    w: &TileWeights<T>,
    zeta: &[f64],
    p: &[Tile],
    m: &Multiplier,
    r: SemitileIndex,
) -> Result<GridFunction<T>> {
    let ctx = w.ctx();
    if zeta.len() != ctx.grid.dim {
        return Err(Error::DimensionMismatch(zeta.len(), ctx.grid.dim));
    }
    let mut spec = GridFunction::<T>::zeros(ctx.grid, Domain::Frequency);
    for q in dedup(p) {
        if !q.semitile(r)?.contains_point(zeta) {
            continue;
        }
        let c = w.coeff(q)?;
        let s = ctx.modulate(w.spectrum(q)?, zeta, m)?;
        let d = spec.data_mut();
        for &(k, v) in s.entries() {
            d[k] += v * c;
        }
    }
    spec.inverse()
}

/// Cells grouped by their exact direction value, in a fixed order.
fn cells_by_direction(n: &DirectionField, cells: impl Iterator<Item = usize>) -> Vec<(Vec<f64>, Vec<usize>)> {
    let mut groups: BTreeMap<Vec<u64>, (Vec<f64>, Vec<usize>)> = BTreeMap::new();
    for i in cells {
        let z = n.at(i);
        groups.entry(zeta_key(z)).or_insert_with(|| (z.to_vec(), Vec::new())).1.push(i);
    }
    groups.into_values().collect()
}

/// `x -> B_{N(x)}^r f(x)`, one `eval_b_zeta_r` per distinct value of `N`.
pub fn eval_b_n_r<T: Real>(
    w: &TileWeights<T>,
    n: &DirectionField,
    p: &[Tile],
    m: &Multiplier,
    r: SemitileIndex,
) -> Result<GridFunction<T>> {
    let g = w.ctx().grid;
    if n.grid() != &g {
        return Err(Error::GridMismatch);
    }
    let groups = cells_by_direction(n, 0..g.len());
    let parts: Vec<(Vec<usize>, GridFunction<T>)> = groups
        .into_par_iter()
        .map(|(z, cells)| Ok((cells, eval_b_zeta_r(w, &z, p, m, r)?)))
        .collect::<Result<_>>()?;
    let mut out = GridFunction::<T>::zeros(g, Domain::Space);
    let d = out.data_mut();
    for (cells, b) in parts {
        for i in cells {
            d[i] = b.data()[i];
        }
    }
    Ok(out)
}

/// Frequencies for the sup: level 0 is the centres of `omega_{p(r)}`; level `l` adds the
/// points `corner + j side / 2^l`. Each level contains the previous one.
pub fn zeta_levels(p: &[Tile], r: SemitileIndex, level: u32) -> Result<Vec<Vec<f64>>> {
    let mut set: BTreeSet<Vec<u64>> = BTreeSet::new();
    for q in dedup(p) {
        let w = q.semitile(r)?;
        set.insert(zeta_key(&w.center_f64()));
        if level == 0 {
            continue;
        }
        let per = 1usize << level;
        let side = w.side_f64();
        let lo: Vec<f64> = (0..w.dim()).map(|d| w.lo(d).to_f64()).collect();
        let total = per.pow(w.dim() as u32);
        for mut flat in 0..total {
            let mut z = vec![0.0; w.dim()];
            for d in (0..w.dim()).rev() {
                z[d] = lo[d] + (flat % per) as f64 * side / per as f64;
                flat /= per;
            }
            set.insert(zeta_key(&z));
        }
    }
    Ok(set
        .into_iter()
        .map(|k| k.into_iter().map(f64::from_bits).collect())
        .collect())
}

/// Pointwise `max over zeta in zetas of |B_zeta^r f|`. A lower bound for the sup over all of
/// frequency space.
pub fn eval_sup_b<T: Real>(
    w: &TileWeights<T>,
    p: &[Tile],
    m: &Multiplier,
    r: SemitileIndex,
    zetas: &[Vec<f64>],
) -> Result<GridFunction<T>> {
    if zetas.is_empty() {
        return Err(Error::Empty("frequency set for the sup".into()));
    }
    let g = w.ctx().grid;
    let best = zetas
        .par_iter()
        .map(|z| -> Result<Vec<T>> { Ok(eval_b_zeta_r(w, z, p, m, r)?.abs()) })
        .try_reduce(
            || vec![T::zero(); g.len()],
            |a, b| Ok(a.into_iter().zip(b).map(|(x, y)| x.max(y)).collect()),
        )?;
    GridFunction::from_vec(g, Domain::Space, best.into_iter().map(|v| Complex::new(v, T::zero())).collect())
}

/// Everything the localized pairings `<1_{E ∩ N^{-1}[omega_{p(r)}]}, psi_p^N>` depend on.
#[derive(Clone, Copy)]
pub struct PairingInput<'a, T: Real> {
    pub e: &'a SetIndicator,
    pub n: &'a DirectionField,
    pub weights: &'a TileWeights<T>,
    pub m: Multiplier,
    pub r: SemitileIndex,
}

impl<'a, T: Real> PairingInput<'a, T> {
    pub fn from_instance(inst: &Instance<'a, T>, m: Multiplier) -> Self {
        PairingInput {
            e: inst.e,
            n: inst.n,
            weights: inst.weights,
            m,
            r: inst.r,
        }
    }

    fn check(&self) -> Result<()> {
        let g = &self.weights.ctx().grid;
        if self.e.grid() != g || self.n.grid() != g {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// How packet values at grid points are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Evaluation {
    /// Cached spectrum, multiplier applied, one inverse transform per frequency.
    Transform,
    /// Spectrum rebuilt from the tile and summed at each point.
    Direct,
}

/// `psi_p^{N(x)}(x)` for `x` in `E ∩ N^{-1}[omega_{p(r)}]`, cells ascending.
#[derive(Clone, Debug, Default)]
struct Localized {
    cells: Vec<usize>,
    values: Vec<Complex<f64>>,
}

impl Localized {
    fn integral(&self, cell: f64) -> Complex<f64> {
        self.values.iter().sum::<Complex<f64>>() * cell
    }
}

fn localize<T: Real>(p: &Tile, inp: &PairingInput<T>, how: Evaluation) -> Result<Localized> {
    let ctx = inp.weights.ctx();
    let g = ctx.grid;
    let semi = p.semitile(inp.r)?;
    let mut pairs: Vec<(usize, Complex<f64>)> = Vec::new();
    match how {
        Evaluation::Transform => {
            let cells = inp.e.members().filter(|&i| inp.n.in_cube(i, &semi));
            for (z, cells) in cells_by_direction(inp.n, cells) {
                let psi = ctx.modulate(inp.weights.spectrum(p)?, &z, &inp.m)?.synthesize()?;
                pairs.extend(cells.into_iter().map(|i| (i, c64(psi.data()[i]))));
            }
        }
        Evaluation::Direct => {
            let mut spectra: HashMap<Vec<u64>, crate::packets::SparseSpectrum<f64>> = HashMap::new();
            for i in 0..g.len() {
                let z = inp.n.at(i);
                if !inp.e.contains(i) || !semi.contains_point(z) {
                    continue;
                }
                let key = zeta_key(z);
                if !spectra.contains_key(&key) {
                    spectra.insert(key.clone(), ctx.psi_spectrum::<f64>(p, z, &inp.m, inp.r, ZetaCheck::Require)?);
                }
                pairs.push((i, spectra[&key].eval_at(&g.point(i))));
            }
        }
    }
    pairs.sort_by_key(|e| e.0);
    Ok(Localized {
        cells: pairs.iter().map(|e| e.0).collect(),
        values: pairs.iter().map(|e| e.1).collect(),
    })
}

fn localize_all<T: Real>(p: &[&Tile], inp: &PairingInput<T>, how: Evaluation) -> Result<Vec<Localized>> {
    p.par_iter().map(|q| localize(q, inp, how)).collect()
}

/// `sum_p |<1_{E ∩ N^{-1}[omega_{p(r)}]}, psi_p^N> <phi_p, f>|` by the chosen evaluation.
pub fn model_sum_with<T: Real>(p: &[Tile], inp: &PairingInput<T>, how: Evaluation) -> Result<f64> {
    inp.check()?;
    let fnorm = inp.weights.f_norm();
    if (fnorm - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Normalization(format!("||f||_2 = {fnorm}, expected 1")));
    }
    let me = inp.e.measure();
    if me > 1.0 + NORMALIZATION_TOL {
        return Err(Error::Normalization(format!("|E| = {me} exceeds 1")));
    }
    let tiles = dedup(p);
    let loc = localize_all(&tiles, inp, how)?;
    let cell = inp.weights.ctx().grid.cell_volume();
    let mut s = 0.0;
    for (q, l) in tiles.iter().zip(&loc) {
        s += (c64(inp.weights.coeff(q)?) * l.integral(cell)).norm();
    }
    Ok(s)
}

pub fn model_sum<T: Real>(p: &[Tile], inp: &PairingInput<T>) -> Result<f64> {
    model_sum_with(p, inp, Evaluation::Transform)
}

pub struct TreeInequalityInput<'a, T: Real> {
    pub tree: &'a Tree,
    /// Unit-modulus factors in tree order; `None` picks the ones that make every term of the
    /// integral of `F` nonnegative.
    pub phases: Option<Vec<Complex<f64>>>,
    pub inst: &'a Instance<'a, T>,
    pub m: Multiplier,
}

impl<T: Real> TreeInequalityInput<'_, T> {
    fn pairing(&self) -> PairingInput<'_, T> {
        PairingInput::from_instance(self.inst, self.m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeInequalityReport {
    pub tiles: usize,
    pub lhs: f64,
    pub lhs_oracle: f64,
    pub oracle_delta: f64,
    pub top_volume: f64,
    pub energy: f64,
    pub mass: f64,
    /// `lhs / (|I_T| energy mass)`, zero for `0/0`.
    pub ratio: f64,
    /// `|sum_p alpha_p c_p int_{E_p} psi_p^N|`, equal to `lhs` for the default phases.
    pub phased_integral: f64,
    /// `||F||_1` over the box.
    pub f_l1: f64,
    pub k1: f64,
    pub k2: f64,
    pub partition_cubes: usize,
    /// `phased_integral <= f_l1 <= k1 + k2`.
    pub split_holds: bool,
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn check_phases(ph: &[Complex<f64>], len: usize) -> Result<()> {
    if ph.len() != len {
        return Err(Error::InvalidParameter(format!("{} phases for {len} tiles", ph.len())));
    }
    if let Some(a) = ph.iter().find(|a| (a.norm() - 1.0).abs() > 1e-12) {
        return Err(Error::InvalidParameter(format!("phase {a} is not of modulus one")));
    }
    Ok(())
}

fn absorbing_phase(z: Complex<f64>) -> Complex<f64> {
    let r = z.norm();
    if r == 0.0 {
        Complex::new(1.0, 0.0)
    } else {
        z.conj() / r
    }
}

/// Flat cell index to position in `cubes`; errors unless every cell lies in exactly one.
fn cell_owners(g: &Grid, cubes: &[DyadicCube]) -> Result<Vec<usize>> {
    let mut owner = vec![usize::MAX; g.len()];
    for (ji, j) in cubes.iter().enumerate() {
        for i in g.points_in_cube(j) {
            if owner[i] != usize::MAX {
                return Err(Error::InvalidParameter(format!("cell {i} lies in two partition cubes")));
            }
            owner[i] = ji;
        }
    }
    if owner.contains(&usize::MAX) {
        return Err(Error::InvalidParameter("partition leaves cells uncovered".into()));
    }
    Ok(owner)
}

fn big_against(p: &Tile, j: &DyadicCube) -> bool {
    // |I_p| > 2^n |J|
    p.scale() > j.scale() + 1
}

/// The tree sum restricted to `T`, its normalization, and the `K_1`/`K_2` split over the
/// partition of the box into maximal `J` with `3J` free of time cubes.
pub fn tree_inequality_check<T: Real>(input: &TreeInequalityInput<T>) -> Result<TreeInequalityReport> {
    let inp = input.pairing();
    inp.check()?;
    let ctx = inp.weights.ctx();
    let g = ctx.grid;
    let cell = g.cell_volume();
    let tree = input.tree;
    let tiles: Vec<&Tile> = tree.tiles().iter().collect();
    let loc = localize_all(&tiles, &inp, Evaluation::Transform)?;
    let direct = localize_all(&tiles, &inp, Evaluation::Direct)?;
    let coeffs: Vec<Complex<f64>> = tiles.iter().map(|q| Ok(c64(inp.weights.coeff(q)?))).collect::<Result<_>>()?;
    let terms: Vec<Complex<f64>> = coeffs.iter().zip(&loc).map(|(c, l)| c * l.integral(cell)).collect();
    let lhs: f64 = terms.iter().map(|t| t.norm()).sum();
    let lhs_oracle: f64 = coeffs
        .iter()
        .zip(&direct)
        .map(|(c, l)| {
            let s: Complex<f64> = l.values.iter().map(|v| c * v * cell).sum();
            s.norm()
        })
        .sum();
    let phases = match &input.phases {
        Some(ph) => {
            check_phases(ph, tiles.len())?;
            ph.clone()
        }
        None => terms.iter().map(|t| absorbing_phase(*t)).collect(),
    };
    let phased_integral = terms.iter().zip(&phases).map(|(t, a)| t * a).sum::<Complex<f64>>().norm();

    let cubes = j_partition_roots(tree, &g.half_box_cubes())?;
    let owner = cell_owners(&g, &cubes)?;
    let mut total = vec![Complex::new(0.0, 0.0); g.len()];
    let mut big = vec![Complex::new(0.0, 0.0); g.len()];
    let mut k1 = 0.0;
    for (i, q) in tiles.iter().enumerate() {
        let ac = phases[i] * coeffs[i];
        for (&x, v) in loc[i].cells.iter().zip(&loc[i].values) {
            let val = ac * v;
            total[x] += val;
            if big_against(q, &cubes[owner[x]]) {
                big[x] += val;
            } else {
                k1 += val.norm() * cell;
            }
        }
    }
    let f_l1: f64 = total.iter().map(|v| v.norm()).sum::<f64>() * cell;
    let k2: f64 = big.iter().map(|v| v.norm()).sum::<f64>() * cell;
    let slack = |a: f64| a * (1.0 + 1e-12) + 1e-15;
    let split_holds = phased_integral <= slack(f_l1) && f_l1 <= slack(k1 + k2);

    let energy = input.inst.energy_of(tree.tiles())?;
    let mass = input.inst.mass_of(tree.tiles())?;
    let top_volume = tree.top_volume();
    Ok(TreeInequalityReport {
        tiles: tiles.len(),
        lhs,
        lhs_oracle,
        oracle_delta: (lhs - lhs_oracle).abs(),
        top_volume,
        energy,
        mass,
        ratio: ratio_or_zero(lhs, top_volume * energy * mass),
        phased_integral,
        f_l1,
        k1,
        k2,
        partition_cubes: cubes.len(),
        split_holds,
    })
}

/// Largest share of `||phi_p||_2^2` that falls outside the sampling box, over `tiles`.
pub fn packet_leakage(tiles: &[Tile], grid: &Grid, table: &SpatialMassTable) -> f64 {
    let half = 0.5 * grid.side();
    tiles
        .iter()
        .map(|p| {
            let side = p.time().side_f64();
            let c = p.time().center_f64();
            let inside: f64 = c
                .iter()
                .map(|&cd| table.fraction_inside((-half - cd) / side, (half - cd) / side))
                .product();
            1.0 - inside
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesselReport {
    pub tiles: usize,
    pub lhs_sq: f64,
    pub lhs_sq_oracle: f64,
    /// Relative gap between the dense and Gram-sum values.
    pub oracle_delta: f64,
    /// `epsilon^2 sum_j |I_{T_j}|`.
    pub budget: f64,
    pub ratio: f64,
}

/// `||sum_{p in U} <f, phi_p> phi_p||_2^2` against `epsilon^2 sum |I_{T_j}|` for `U` the union
/// of the trees.
pub fn bessel_check<T: Real>(trees: &[Tree], w: &TileWeights<T>, epsilon: f64) -> Result<BesselReport> {
    let all: Vec<Tile> = trees.iter().flat_map(|t| t.tiles().iter().cloned()).collect();
    let u = dedup(&all);
    let g = w.ctx().grid;
    let mut spec = vec![Complex::new(0.0, 0.0); g.len()];
    for q in &u {
        let c = c64(w.coeff(q)?);
        for &(k, v) in w.spectrum(q)?.entries() {
            spec[k] += c * c64(v);
        }
    }
    let fw = g.freq_spacing().powi(g.dim as i32);
    let lhs_sq = spec.iter().map(|v| v.norm_sqr()).sum::<f64>() * fw;
    let rows: Vec<Complex<f64>> = u
        .par_iter()
        .map(|p| {
            let cp = c64(w.coeff(p)?);
            let sp = w.spectrum(p)?;
            let mut s = Complex::new(0.0, 0.0);
            for q in &u {
                let cq = c64(w.coeff(q)?);
                s += cp * cq.conj() * c64(sp.inner(w.spectrum(q)?)?);
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let lhs_sq_oracle = rows.iter().sum::<Complex<f64>>().re;
    let scale = lhs_sq.abs().max(lhs_sq_oracle.abs());
    let budget = epsilon * epsilon * trees.iter().map(|t| t.top_volume()).sum::<f64>();
    Ok(BesselReport {
        tiles: u.len(),
        lhs_sq,
        lhs_sq_oracle,
        oracle_delta: if scale == 0.0 { 0.0 } else { (lhs_sq - lhs_sq_oracle).abs() / scale },
        budget,
        ratio: ratio_or_zero(lhs_sq, budget),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim1Report {
    pub j: DyadicCube,
    /// Size of the `r`-tree part the claim is about.
    pub t2_len: usize,
    /// Points of `J` where some tile of that part is active.
    pub active_points: usize,
    /// `max_{x in J} |F_{2J}(x)|` from the scale window.
    pub lhs: f64,
    /// Same maximum from the active sets recomputed point by point.
    pub lhs_oracle: f64,
    pub oracle_delta: f64,
    /// (point, tile) pairs where the window and the direct active set disagree.
    pub window_mismatches: usize,
    pub g1_sup: f64,
    pub g2_sup: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Spatial samples of `sum_p a_p s_p` for spectra `s_p`.
fn dense_sum(g: Grid, parts: &[(Complex<f64>, crate::packets::SparseSpectrum<f64>)]) -> Result<Vec<f64>> {
    let mut spec = GridFunction::<f64>::zeros(g, Domain::Frequency);
    let d = spec.data_mut();
    for (a, s) in parts {
        for &(k, v) in s.entries() {
            d[k] += a * v;
        }
    }
    Ok(spec.inverse()?.abs())
}

/// Largest mean of `vals` over dyadic `I` with `J ⊆ I ⊆ root`; cubes without grid points skipped.
fn sup_average(g: &Grid, vals: &[f64], j: &DyadicCube, root: &DyadicCube) -> f64 {
    let mut best: f64 = 0.0;
    let mut i = j.clone();
    loop {
        let pts = g.points_in_cube(&i);
        if !pts.is_empty() {
            best = best.max(pts.iter().map(|&x| vals[x]).sum::<f64>() / pts.len() as f64);
        }
        if i.scale() >= root.scale() {
            break;
        }
        i = i.parent();
    }
    best
}

/// Pointwise bound of the large-scale part `F_{2J}` by maximal averages of `G_1`, `G_2`, for
/// each cube in `js`. Computations run in double precision.
pub fn claim1_checks<T: Real>(input: &TreeInequalityInput<T>, js: &[DyadicCube]) -> Result<Vec<Claim1Report>> {
    let inp = input.pairing();
    inp.check()?;
    let ctx = *inp.weights.ctx();
    let g = ctx.grid;
    let cell = g.cell_volume();
    let n = g.dim as i64;
    let tree = input.tree;
    let r = inp.r;
    let tiles: Vec<&Tile> = tree.tiles().iter().collect();
    let phases = match &input.phases {
        Some(ph) => {
            check_phases(ph, tiles.len())?;
            ph.clone()
        }
        None => {
            let loc = localize_all(&tiles, &inp, Evaluation::Transform)?;
            tiles
                .iter()
                .zip(&loc)
                .map(|(q, l)| Ok(absorbing_phase(c64(inp.weights.coeff(q)?) * l.integral(cell))))
                .collect::<Result<_>>()?
        }
    };
    let t2: Vec<Tile> = r_tree_under(tree.tiles(), tree.top(), r);
    let t2_set: HashSet<&Tile> = t2.iter().collect();
    // (tile, alpha_p c_p, omega_{p(r)}) for the r-tree part, in tree order
    let members: Vec<(&Tile, Complex<f64>, DyadicCube)> = tiles
        .iter()
        .enumerate()
        .filter(|(_, q)| t2_set.contains(**q))
        .map(|(i, q)| Ok((*q, phases[i] * c64(inp.weights.coeff(q)?), q.semitile(r)?)))
        .collect::<Result<_>>()?;

    let xi0 = tree.top().freq().center_f64();
    let g1_parts: Vec<_> = members
        .iter()
        .map(|(q, a, _)| {
            let s = ctx.phi_spectrum::<f64>(q)?;
            Ok((*a, ctx.modulate(&s, &xi0, &inp.m)?))
        })
        .collect::<Result<_>>()?;
    let g2_parts: Vec<_> = members
        .iter()
        .map(|(q, a, _)| Ok((*a, ctx.phi_spectrum::<f64>(q)?)))
        .collect::<Result<_>>()?;
    let g1 = dense_sum(g, &g1_parts)?;
    let g2 = dense_sum(g, &g2_parts)?;
    let roots = g.half_box_cubes();

    let mut psi_cache: HashMap<(usize, Vec<u64>), GridFunction<f64>> = HashMap::new();
    let mut out = Vec::with_capacity(js.len());
    for j in js {
        let root = roots
            .iter()
            .find(|w| w.contains(j))
            .ok_or_else(|| Error::InvalidParameter(format!("cube {j} is not inside the box")))?;
        let mut lhs: f64 = 0.0;
        let mut lhs_oracle: f64 = 0.0;
        let mut active_points = 0;
        let mut window_mismatches = 0;
        for x in g.points_in_cube(j) {
            if !inp.e.contains(x) {
                continue;
            }
            let z = inp.n.at(x);
            let active: Vec<usize> = (0..members.len())
                .filter(|&k| big_against(members[k].0, j) && members[k].2.contains_point(z))
                .collect();
            if active.is_empty() {
                continue;
            }
            active_points += 1;
            let k_plus = active.iter().map(|&k| members[k].0.scale() as i64).min().expect("nonempty");
            let k_s = active.iter().map(|&k| members[k].0.scale() as i64).max().expect("nonempty");
            // |omega_-| < |omega_p| <= |omega_+| in exponent form, |omega_-| = |omega_s| 2^{-n}
            let window: Vec<usize> = (0..members.len())
                .filter(|&k| {
                    let e = -n * members[k].0.scale() as i64;
                    -n * k_s - n < e && e <= -n * k_plus
                })
                .collect();
            window_mismatches += window.iter().filter(|k| !active.contains(k)).count();
            window_mismatches += active.iter().filter(|k| !window.contains(k)).count();
            let key = zeta_key(z);
            let point = g.point(x);
            let mut f = Complex::new(0.0, 0.0);
            for &k in &window {
                let cache_key = (k, key.clone());
                if !psi_cache.contains_key(&cache_key) {
                    let psi = ctx
                        .psi_spectrum::<f64>(members[k].0, z, &inp.m, r, ZetaCheck::Allow)?
                        .synthesize()?;
                    psi_cache.insert(cache_key.clone(), psi);
                }
                f += members[k].1 * psi_cache[&cache_key].data()[x];
            }
            let mut fo = Complex::new(0.0, 0.0);
            for &k in &active {
                let s = ctx.psi_spectrum::<f64>(members[k].0, z, &inp.m, r, ZetaCheck::Require)?;
                fo += members[k].1 * s.eval_at(&point);
            }
            lhs = lhs.max(f.norm());
            lhs_oracle = lhs_oracle.max(fo.norm());
        }
        let g1_sup = sup_average(&g, &g1, j, root);
        let g2_sup = sup_average(&g, &g2, j, root);
        let rhs = g1_sup + g2_sup;
        out.push(Claim1Report {
            j: j.clone(),
            t2_len: members.len(),
            active_points,
            lhs,
            lhs_oracle,
            oracle_delta: (lhs - lhs_oracle).abs(),
            window_mismatches,
            g1_sup,
            g2_sup,
            rhs,
            ratio: ratio_or_zero(lhs, rhs),
        });
    }
    Ok(out)
}

pub fn claim1_check<T: Real>(input: &TreeInequalityInput<T>, j: &DyadicCube) -> Result<Claim1Report> {
    Ok(claim1_checks(input, std::slice::from_ref(j))?.remove(0))
}

/// `x -> (m(. - zeta) f^)(x)`, with `m(0) := 0`.
pub fn modulated_multiplier<T: Real>(f_hat: &GridFunction<T>, m: &Multiplier, zeta: &[f64]) -> Result<GridFunction<T>> {
    if f_hat.domain() != Domain::Frequency {
        return Err(Error::InvalidParameter("expected a spectrum".into()));
    }
    let g = *f_hat.grid();
    if zeta.len() != g.dim {
        return Err(Error::DimensionMismatch(zeta.len(), g.dim));
    }
    let mut out = f_hat.clone();
    let mut shifted = vec![0.0; g.dim];
    for (k, v) in out.data_mut().iter_mut().enumerate() {
        let xi = g.freq(k);
        for d in 0..g.dim {
            shifted[d] = xi[d] - zeta[d];
        }
        *v *= T::of(m.eval_or_zero(&shifted));
    }
    out.inverse()
}

/// Pointwise `max over zeta of |e^{2 pi i zeta x} B (e^{-2 pi i zeta x} f)|`, multiplier side.
pub fn sjolin_operator<T: Real>(f: &GridFunction<T>, m: &Multiplier, zetas: &[Vec<f64>]) -> Result<GridFunction<T>> {
    if zetas.is_empty() {
        return Err(Error::Empty("frequency set for the maximal operator".into()));
    }
    m.validate(f.grid().dim)?;
    let f_hat = match f.domain() {
        Domain::Space => f.forward()?,
        Domain::Frequency => f.clone(),
    };
    let g = *f.grid();
    let best = zetas
        .par_iter()
        .map(|z| -> Result<Vec<T>> { Ok(modulated_multiplier(&f_hat, m, z)?.abs()) })
        .try_reduce(
            || vec![T::zero(); g.len()],
            |a, b| Ok(a.into_iter().zip(b).map(|(x, y)| x.max(y)).collect()),
        )?;
    GridFunction::from_vec(g, Domain::Space, best.into_iter().map(|v| Complex::new(v, T::zero())).collect())
}
