//! Mass pruning, energy pruning and the level-by-level decomposition, each with a certificate.
use std::cmp::Ordering;
use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DirectionField, SetIndicator};
use crate::functionals::{delta, energy, MassTable};
use crate::geometry::{tile_order_key, Dyadic, LexOrder, SemitileIndex, Tile};
use crate::oracle;
use crate::scalar::Real;
use crate::trees::{decompose_into_trees, maximal_elements, r_tree_under, Tree};
use crate::weights::TileWeights;

/// Everything the selections read: the universe standing in for all tiles, `E`, `N`,
/// the mass table over the universe, the coefficients and the semitile index `r`.
pub struct Instance<'a, T: Real> {
    pub universe: &'a [Tile],
    pub e: &'a SetIndicator,
    pub n: &'a DirectionField,
    pub mass: &'a MassTable,
    pub weights: &'a TileWeights<T>,
    pub r: SemitileIndex,
}

impl<T: Real> Instance<'_, T> {
    pub fn dim(&self) -> usize {
        self.e.grid().dim
    }

    pub fn mass_of(&self, p: &[Tile]) -> Result<f64> {
        Ok(self.mass.mass(p)?.value)
    }

    pub fn energy_of(&self, p: &[Tile]) -> Result<f64> {
        Ok(energy(p, self.weights, self.r, self.universe)?.value)
    }

    /// Mass and energy recomputed through the reference paths.
    pub fn oracle_mass_of(&self, p: &[Tile]) -> Result<f64> {
        oracle::mass(p, self.e, self.n, self.universe, self.mass.exponent())
    }

    pub fn oracle_energy_of(&self, p: &[Tile]) -> Result<f64> {
        for t in p {
            self.weights.coeff_sq(t)?;
        }
        let c = |t: &Tile| self.weights.coeff_sq(t).expect("checked above");
        Ok(oracle::energy(p, &c, self.r, self.universe).value)
    }
}

pub fn set_minus(a: &[Tile], b: &[Tile]) -> Vec<Tile> {
    let drop: HashSet<&Tile> = b.iter().collect();
    a.iter().filter(|t| !drop.contains(t)).cloned().collect()
}

fn sum_volumes<'a>(tops: impl IntoIterator<Item = &'a Tile>) -> f64 {
    tops.into_iter().map(|t| t.time().volume_f64()).sum()
}

/// Witnesses of one annulus class and the greedy selection made inside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleClass {
    pub k: u32,
    pub members: Vec<Tile>,
    pub selected: Vec<Tile>,
    /// `sum_{U_k} |I_u|`.
    pub member_volume: f64,
    /// `sum_{V_k} 2^{(k+2)n} |I_v|`.
    pub enlarged_selected_volume: f64,
    /// `sum_{V_k} |E ∩ N^{-1}[omega_v] ∩ 2^k I_v|`.
    pub selected_set_measure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassPruneResult {
    pub mu: f64,
    pub kept: Vec<Tile>,
    pub residual: Vec<Tile>,
    pub tree_cover: Vec<Tree>,
    /// `(p, u(p))` for every kept tile.
    pub witnesses: Vec<(Tile, Tile)>,
    pub u_max: Vec<Tile>,
    /// Constant in the annulus classes `C mu |I_u| 2^{9kn} < |E ∩ N^{-1}[omega_u] ∩ 2^k I_u|`.
    pub class_constant: f64,
    pub classes: Vec<ScaleClass>,
    /// Maximal witnesses that fell in no class; always empty when the bookkeeping is sound.
    pub unclassified: Vec<Tile>,
    pub sum_tops: f64,
    /// `sum_tops * mu`.
    pub counting_product: f64,
    /// Kept tiles whose witness lay under more than one maximal witness.
    pub ambiguous_assignments: usize,
    pub flags: Vec<String>,
}

/// `1 / (4 sum_{k>=0} w_k 2^{9kn})` with `w_0 = 1`, `w_k = (1 + 2^{k-2})^{-a n}`.
pub fn annulus_class_constant(n: usize, exponent: f64) -> Result<f64> {
    if exponent <= 9.0 {
        return Err(Error::InvalidParameter(format!(
            "annulus classes need a mass exponent above 9 per dimension, got {exponent}"
        )));
    }
    let a = exponent * n as f64;
    let nf = n as f64;
    let mut s = 1.0;
    for k in 1..2000 {
        let kf = k as f64;
        let term = (9.0 * kf * nf * std::f64::consts::LN_2 - a * (1.0 + 2f64.powf(kf - 2.0)).ln()).exp();
        s += term;
        if term < 1e-17 * s {
            break;
        }
    }
    Ok(1.0 / (4.0 * s))
}

/// `|E ∩ N^{-1}[omega_u] ∩ 2^k I_u|` with the enlarged box taken half-open.
pub fn enlarged_set_measure(u: &Tile, k: u32, e: &SetIndicator, n: &DirectionField) -> f64 {
    let b = u.time().enlarge(Dyadic::pow2(k as i32));
    let g = e.grid();
    let count = e
        .members()
        .filter(|&i| n.in_cube(i, u.freq()) && b.contains_point_half_open(&g.point(i)))
        .count();
    count as f64 * g.cell_volume()
}

fn covers_grid(u: &Tile, k: u32, half: f64) -> bool {
    let b = u.time().enlarge(Dyadic::pow2(k as i32));
    (0..u.dim()).all(|j| b.lo[j].to_f64() <= -half && b.hi[j].to_f64() > half)
}

fn enlarged_overlap(a: &Tile, b: &Tile, k: u32) -> bool {
    let s = Dyadic::pow2(k as i32);
    a.freq().intersects(b.freq()) && a.time().enlarge(s).interiors_intersect(&b.time().enlarge(s))
}

/// Greedy: largest `|I_v|` first (ties by time corner, then frequency corner), keeping tiles whose
/// enlarged rectangle `(2^k I_v) x omega_v` misses every earlier pick.
pub fn greedy_disjoint_enlargements(members: &[Tile], k: u32) -> Vec<Tile> {
    let mut order = members.to_vec();
    order.sort_by(|a, b| {
        b.scale()
            .cmp(&a.scale())
            .then_with(|| a.time().corner().cmp(b.time().corner()))
            .then_with(|| a.freq().corner().cmp(b.freq().corner()))
    });
    let mut picked: Vec<Tile> = Vec::new();
    for v in order {
        if picked.iter().all(|w| !enlarged_overlap(&v, w, k)) {
            picked.push(v);
        }
    }
    picked
}

pub fn prune_mass<T: Real>(p: &[Tile], inst: &Instance<T>) -> Result<MassPruneResult> {
    let n = inst.dim();
    let class_constant = annulus_class_constant(n, inst.mass.exponent())?;
    let mut out = MassPruneResult {
        mu: 0.0,
        kept: Vec::new(),
        residual: p.to_vec(),
        tree_cover: Vec::new(),
        witnesses: Vec::new(),
        u_max: Vec::new(),
        class_constant,
        classes: Vec::new(),
        unclassified: Vec::new(),
        sum_tops: 0.0,
        counting_product: 0.0,
        ambiguous_assignments: 0,
        flags: Vec::new(),
    };
    if p.is_empty() {
        out.flags.push("empty input".into());
        return Ok(out);
    }
    let singles = p
        .iter()
        .map(|t| inst.mass.mass_single(t))
        .collect::<Result<Vec<_>>>()?;
    let mu = singles.iter().map(|m| m.value).fold(0.0, f64::max);
    out.mu = mu;
    if mu == 0.0 {
        out.flags.push("zero mass: nothing kept".into());
        return Ok(out);
    }
    let mut residual = Vec::new();
    for (t, m) in p.iter().zip(&singles) {
        if m.value > mu / 4.0 {
            out.kept.push(t.clone());
            out.witnesses.push((t.clone(), m.witness.clone().expect("positive mass has a witness")));
        } else {
            residual.push(t.clone());
        }
    }
    out.residual = residual;
    let witnesses: Vec<Tile> = out.witnesses.iter().map(|w| w.1.clone()).collect();
    let mut u_max = maximal_elements(&witnesses);
    u_max.sort_by(|a, b| tile_order_key(a).cmp(&tile_order_key(b)));
    let mut buckets: Vec<Vec<Tile>> = vec![Vec::new(); u_max.len()];
    for (t, u) in &out.witnesses {
        let hits: Vec<usize> = (0..u_max.len()).filter(|&i| u.leq(&u_max[i])).collect();
        if hits.len() > 1 {
            out.ambiguous_assignments += 1;
        }
        buckets[hits[0]].push(t.clone());
    }
    if out.ambiguous_assignments > 0 {
        out.flags.push(format!(
            "{} witnesses lay under several maximal witnesses; lowest in order used",
            out.ambiguous_assignments
        ));
    }
    for (top, tiles) in u_max.iter().zip(buckets) {
        out.tree_cover.push(Tree::new(top.clone(), tiles)?);
    }
    out.sum_tops = sum_volumes(&u_max);
    out.counting_product = out.sum_tops * mu;

    // annulus classes over the maximal witnesses
    let g = inst.e.grid();
    let half = 0.5 * g.side();
    let profiles: Vec<Vec<(u32, bool)>> = u_max
        .par_iter()
        .map(|u| {
            let mut rows = Vec::new();
            let mut k = 0u32;
            loop {
                let m = enlarged_set_measure(u, k, inst.e, inst.n);
                let thr = class_constant * mu * u.time().volume_f64() * 2f64.powf(9.0 * k as f64 * n as f64);
                rows.push((k, thr < m));
                if covers_grid(u, k, half) {
                    break;
                }
                k += 1;
            }
            rows
        })
        .collect();
    let k_top = profiles.iter().flat_map(|r| r.iter().map(|x| x.0)).max().unwrap_or(0);
    for k in 0..=k_top {
        let members: Vec<Tile> = u_max
            .iter()
            .zip(&profiles)
            .filter(|(_, rows)| rows.iter().any(|&(kk, inside)| kk == k && inside))
            .map(|(u, _)| u.clone())
            .collect();
        if members.is_empty() {
            continue;
        }
        let selected = greedy_disjoint_enlargements(&members, k);
        let grow = 2f64.powi(((k + 2) as usize * n) as i32);
        out.classes.push(ScaleClass {
            k,
            member_volume: sum_volumes(&members),
            enlarged_selected_volume: selected.iter().map(|v| grow * v.time().volume_f64()).sum(),
            selected_set_measure: selected.iter().map(|v| enlarged_set_measure(v, k, inst.e, inst.n)).sum(),
            members,
            selected,
        });
    }
    out.unclassified = u_max
        .iter()
        .zip(&profiles)
        .filter(|(_, rows)| rows.iter().all(|r| !r.1))
        .map(|(u, _)| u.clone())
        .collect();
    out.u_max = u_max;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectedTree {
    pub top: Tile,
    /// The selected `r`-tree `T_j'`.
    pub core: Vec<Tile>,
    /// Every remaining tile below the top, `T_j`.
    pub full: Vec<Tile>,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyPruneResult {
    pub epsilon: f64,
    pub kept: Vec<Tile>,
    pub residual: Vec<Tile>,
    pub trees: Vec<SelectedTree>,
    pub sum_tops: f64,
    /// `sum_tops * epsilon^2`.
    pub counting_product: f64,
    pub flags: Vec<String>,
}

impl EnergyPruneResult {
    pub fn full_trees(&self) -> Result<Vec<Tree>> {
        self.trees.iter().map(|t| Tree::new(t.top.clone(), t.full.clone())).collect()
    }
}

/// Order of candidate tops: centre of the frequency cube under `order`, then `|I|`, then time corner.
fn top_precedence(order: &LexOrder, a: &Tile, b: &Tile) -> Ordering {
    order
        .compare(&a.freq().center(), &b.freq().center())
        .then_with(|| a.scale().cmp(&b.scale()))
        .then_with(|| a.time().corner().cmp(b.time().corner()))
}

/// Candidates of one round: tops whose maximal `r`-tree in `remaining` reaches `threshold`.
pub fn qualifying_trees<T: Real>(remaining: &[Tile], inst: &Instance<T>, threshold: f64) -> Result<Vec<SelectedTree>> {
    let found: Vec<Option<SelectedTree>> = inst
        .universe
        .par_iter()
        .map(|t| {
            let core = r_tree_under(remaining, t, inst.r);
            if core.is_empty() {
                return Ok(None);
            }
            let d = delta(&core, t, inst.weights)?;
            Ok((d >= threshold).then(|| SelectedTree {
                top: t.clone(),
                core,
                full: Vec::new(),
                delta: d,
            }))
        })
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().collect())
}

pub fn prune_energy<T: Real>(p: &[Tile], inst: &Instance<T>) -> Result<EnergyPruneResult> {
    let epsilon = inst.energy_of(p)?;
    let mut out = EnergyPruneResult {
        epsilon,
        kept: Vec::new(),
        residual: p.to_vec(),
        trees: Vec::new(),
        sum_tops: 0.0,
        counting_product: 0.0,
        flags: Vec::new(),
    };
    if epsilon == 0.0 {
        out.flags.push("zero energy: nothing to prune".into());
        return Ok(out);
    }
    let order = LexOrder::for_semitile(inst.r, inst.dim());
    let mut remaining = p.to_vec();
    loop {
        let cands = qualifying_trees(&remaining, inst, 0.5 * epsilon)?;
        let Some(mut best) = cands.into_iter().min_by(|a, b| top_precedence(&order, &a.top, &b.top)) else {
            break;
        };
        best.full = remaining.iter().filter(|q| q.leq(&best.top)).cloned().collect();
        remaining = set_minus(&remaining, &best.full);
        out.kept.extend(best.full.iter().cloned());
        out.trees.push(best);
    }
    out.residual = remaining;
    out.sum_tops = sum_volumes(out.trees.iter().map(|t| &t.top));
    out.counting_product = out.sum_tops * epsilon * epsilon;
    Ok(out)
}

/// Violations of the geometric consequences for selected trees: for `p` in `T_j'` and `u` in
/// any `T_k'` with `omega_p ⊆ omega_{u(1)}`, `I_u` misses `I_{T_j}`, and two such `u` have disjoint
/// time cubes.
pub fn separation_violations(trees: &[SelectedTree]) -> Vec<String> {
    let first = |u: &Tile| u.semitile(SemitileIndex::new(1, u.dim()).expect("index 1")).expect("index 1");
    let all: Vec<(usize, &Tile)> = trees
        .iter()
        .enumerate()
        .flat_map(|(k, t)| t.core.iter().map(move |u| (k, u)))
        .collect();
    let mut bad = Vec::new();
    for tj in trees {
        for p in &tj.core {
            let above: Vec<&Tile> = all
                .iter()
                .filter(|(_, u)| first(u).contains(p.freq()))
                .map(|(_, u)| *u)
                .collect();
            for u in &above {
                if u.time().intersects(tj.top.time()) {
                    bad.push(format!("{u} meets the top of the tree holding {p}"));
                }
            }
            for (a, u) in above.iter().enumerate() {
                for v in &above[a + 1..] {
                    if u != v && u.time().intersects(v.time()) {
                        bad.push(format!("{u} and {v} overlap above {p}"));
                    }
                }
            }
        }
    }
    bad
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    /// Gap between the fast value and its reference recomputation, when one was made.
    #[serde(default)]
    pub oracle_delta: Option<f64>,
}

impl InequalityCheck {
    pub fn le(name: &str, lhs: f64, rhs: f64) -> Self {
        InequalityCheck {
            name: name.into(),
            lhs,
            rhs,
            pass: lhs <= rhs,
            oracle_delta: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelCase {
    Start,
    BothSmall,
    EnergyLarge,
    MassLarge,
    BothLargeEnergySettled,
    BothLargeEnergyPruned,
    /// Remainder of zero mass and energy, placed as plain trees.
    Null,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub j: i64,
    pub case: LevelCase,
    pub tiles: Vec<Tile>,
    pub trees: Vec<Tree>,
    pub sum_tops: f64,
    pub mass_calls: usize,
    pub energy_calls: usize,
    pub checks: Vec<InequalityCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCertificate {
    pub dim: usize,
    pub m0: i64,
    pub initial_energy: f64,
    pub initial_mass: f64,
    /// Largest `sum_tops * mu` over mass prunings.
    pub c1: f64,
    /// Largest `sum_tops * epsilon^2` over energy prunings.
    pub c2: f64,
    /// `n (c1 + c2)`; raised to 1 when a null level had to be placed.
    pub c0: f64,
    pub levels: Vec<Level>,
    pub disjoint: bool,
    pub covers: bool,
    /// `sum_j sum_k |I_{T_jk}| 2^{jn} min(1, 2^{(2j+2)n})`.
    pub tail_sum: f64,
    #[serde(default)]
    pub model_value: Option<f64>,
    pub all_pass: bool,
}

pub const LEVEL_FLOOR_DEPTH: i64 = 64;

fn pow2(e: i64) -> f64 {
    2f64.powi(e as i32)
}

/// Least `m` with `value <= 2^{m s}`.
fn least_exponent(value: f64, s: i64) -> i64 {
    if value <= 0.0 {
        return i64::MIN;
    }
    let mut m = (value.log2() / s as f64).ceil() as i64;
    while pow2(m * s) < value {
        m += 1;
    }
    while pow2((m - 1) * s) >= value {
        m -= 1;
    }
    m
}

struct Pending {
    case: LevelCase,
    tiles: Vec<Tile>,
    trees: Vec<Tree>,
    mass_calls: usize,
    energy_calls: usize,
}

pub fn decompose_main<T: Real>(p: &[Tile], inst: &Instance<T>) -> Result<DecompositionCertificate> {
    let n = inst.dim() as i64;
    let p = {
        let mut seen = HashSet::new();
        p.iter().filter(|t| seen.insert((*t).clone())).cloned().collect::<Vec<_>>()
    };
    let e0 = inst.energy_of(&p)?;
    let mass0 = inst.mass_of(&p)?;
    let m0 = if p.is_empty() || (e0 == 0.0 && mass0 == 0.0) {
        0
    } else {
        least_exponent(e0, n).max(least_exponent(mass0, 2 * n))
    };
    let mut c1: f64 = 0.0;
    let mut c2: f64 = 0.0;
    let mut pending: Vec<(i64, Pending)> = vec![(
        m0,
        Pending {
            case: LevelCase::Start,
            tiles: Vec::new(),
            trees: Vec::new(),
            mass_calls: 0,
            energy_calls: 0,
        },
    )];
    let mut rest = p.clone();
    let mut m = m0;
    let mut null_needed = false;
    while !rest.is_empty() {
        let j = m - 1;
        if j < m0 - LEVEL_FLOOR_DEPTH {
            return Err(Error::NonTermination(m0 - LEVEL_FLOOR_DEPTH));
        }
        let te = pow2(j * n);
        let tm = pow2(2 * j * n);
        let er = inst.energy_of(&rest)?;
        let mr = inst.mass_of(&rest)?;
        if er == 0.0 && mr == 0.0 {
            null_needed = true;
            break;
        }
        let mut lv = Pending {
            case: LevelCase::BothSmall,
            tiles: Vec::new(),
            trees: Vec::new(),
            mass_calls: 0,
            energy_calls: 0,
        };
        let mass_loop = |rest: &mut Vec<Tile>, lv: &mut Pending, c1: &mut f64| -> Result<()> {
            while inst.mass_of(rest)? > tm {
                let r = prune_mass(rest, inst)?;
                if r.kept.is_empty() {
                    return Err(Error::NonTermination(j));
                }
                *c1 = c1.max(r.counting_product);
                lv.mass_calls += 1;
                lv.tiles.extend(r.kept.iter().cloned());
                lv.trees.extend(r.tree_cover);
                *rest = r.residual;
            }
            Ok(())
        };
        let energy_loop = |rest: &mut Vec<Tile>, lv: &mut Pending, c2: &mut f64| -> Result<()> {
            while inst.energy_of(rest)? > te {
                let r = prune_energy(rest, inst)?;
                if r.kept.is_empty() {
                    return Err(Error::NonTermination(j));
                }
                *c2 = c2.max(r.counting_product);
                lv.energy_calls += 1;
                lv.tiles.extend(r.kept.iter().cloned());
                lv.trees.extend(r.full_trees()?);
                *rest = r.residual;
            }
            Ok(())
        };
        match (er > te, mr > tm) {
            (false, false) => {}
            (true, false) => {
                lv.case = LevelCase::EnergyLarge;
                energy_loop(&mut rest, &mut lv, &mut c2)?;
            }
            (false, true) => {
                lv.case = LevelCase::MassLarge;
                mass_loop(&mut rest, &mut lv, &mut c1)?;
            }
            (true, true) => {
                mass_loop(&mut rest, &mut lv, &mut c1)?;
                if inst.energy_of(&rest)? <= te {
                    lv.case = LevelCase::BothLargeEnergySettled;
                } else {
                    lv.case = LevelCase::BothLargeEnergyPruned;
                    energy_loop(&mut rest, &mut lv, &mut c2)?;
                }
            }
        }
        pending.push((j, lv));
        m = j;
    }
    let mut c0 = n as f64 * (c1 + c2);
    if null_needed {
        c0 = c0.max(1.0);
        let trees = decompose_into_trees(&rest);
        let s = sum_volumes(trees.iter().map(|t| t.top()));
        let mut j = m - 1;
        while s > c0 * pow2(-2 * j * n) {
            j -= 1;
        }
        for k in (j + 1..m).rev() {
            pending.push((
                k,
                Pending {
                    case: LevelCase::BothSmall,
                    tiles: Vec::new(),
                    trees: Vec::new(),
                    mass_calls: 0,
                    energy_calls: 0,
                },
            ));
        }
        pending.push((
            j,
            Pending {
                case: LevelCase::Null,
                tiles: rest.clone(),
                trees,
                mass_calls: 0,
                energy_calls: 0,
            },
        ));
    }

    let mut levels = Vec::with_capacity(pending.len());
    let mut removed: Vec<Tile> = Vec::new();
    let mut tail_sum = 0.0;
    for (j, lv) in pending {
        removed.extend(lv.tiles.iter().cloned());
        let after = set_minus(&p, &removed);
        let sum_tops = sum_volumes(lv.trees.iter().map(|t| t.top()));
        tail_sum += sum_tops * pow2(j * n) * pow2((2 * j + 2) * n).min(1.0);
        let checks = vec![
            InequalityCheck::le("energy of level", inst.energy_of(&lv.tiles)?, pow2((j + 1) * n)),
            InequalityCheck::le("mass of level", inst.mass_of(&lv.tiles)?, pow2((2 * j + 2) * n)),
            InequalityCheck::le("energy of remainder", inst.energy_of(&after)?, pow2(j * n)),
            InequalityCheck::le("mass of remainder", inst.mass_of(&after)?, pow2(2 * j * n)),
            InequalityCheck::le("tops of level", sum_tops, c0 * pow2(-2 * j * n)),
            trees_partition_check(&lv.tiles, &lv.trees),
        ];
        levels.push(Level {
            j,
            case: lv.case,
            tiles: lv.tiles,
            trees: lv.trees,
            sum_tops,
            mass_calls: lv.mass_calls,
            energy_calls: lv.energy_calls,
            checks,
        });
    }
    let all: Vec<&Tile> = levels.iter().flat_map(|l| l.tiles.iter()).collect();
    let distinct: HashSet<&Tile> = all.iter().copied().collect();
    let disjoint = distinct.len() == all.len();
    let covers = distinct.len() == p.len() && p.iter().all(|t| distinct.contains(t));
    let all_pass = disjoint && covers && levels.iter().all(|l| l.checks.iter().all(|c| c.pass));
    Ok(DecompositionCertificate {
        dim: n as usize,
        m0,
        initial_energy: e0,
        initial_mass: mass0,
        c1,
        c2,
        c0,
        levels,
        disjoint,
        covers,
        tail_sum,
        model_value: None,
        all_pass,
    })
}

/// Trees whose tiles sit under their tops and together list the level exactly once.
fn trees_partition_check(tiles: &[Tile], trees: &[Tree]) -> InequalityCheck {
    let mut listed: Vec<&Tile> = trees.iter().flat_map(|t| t.tiles().iter()).collect();
    let valid = trees.iter().all(|t| t.tiles().iter().all(|q| q.leq(t.top())));
    let mut want: Vec<&Tile> = tiles.iter().collect();
    listed.sort();
    want.sort();
    let mismatch = if valid && listed == want { 0.0 } else { 1.0 };
    InequalityCheck::le("trees cover level", mismatch, 0.0)
}

/// Recomputes every mass and energy check of a certificate through the reference paths and
/// records the gap; a check passes only if both values satisfy it.
pub fn verify_certificate<T: Real>(
    cert: &mut DecompositionCertificate,
    p: &[Tile],
    inst: &Instance<T>,
) -> Result<f64> {
    let n = cert.dim as i64;
    let mut removed: Vec<Tile> = Vec::new();
    let mut worst: f64 = 0.0;
    for lv in &mut cert.levels {
        removed.extend(lv.tiles.iter().cloned());
        let after = set_minus(p, &removed);
        let j = lv.j;
        let redo = [
            inst.oracle_energy_of(&lv.tiles)?,
            inst.oracle_mass_of(&lv.tiles)?,
            inst.oracle_energy_of(&after)?,
            inst.oracle_mass_of(&after)?,
        ];
        let bounds = [
            pow2((j + 1) * n),
            pow2((2 * j + 2) * n),
            pow2(j * n),
            pow2(2 * j * n),
        ];
        for ((c, v), b) in lv.checks.iter_mut().zip(redo).zip(bounds) {
            let d = (c.lhs - v).abs();
            worst = worst.max(d);
            c.oracle_delta = Some(d);
            c.pass = c.lhs <= c.rhs && v <= b;
        }
    }
    cert.all_pass = cert.disjoint && cert.covers && cert.levels.iter().all(|l| l.checks.iter().all(|c| c.pass));
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bump::BumpProfile;
    use crate::functionals::DEFAULT_MASS_EXPONENT;
    use crate::geometry::{generate_universe, DyadicCube};
    use crate::grid::{Domain, Grid, GridFunction};
    use crate::packets::PacketContext;
    use crate::testfn::{random_test_function, TestFunctionKind};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        universe: Vec<Tile>,
        e: SetIndicator,
        n: DirectionField,
        mass: MassTable,
        weights: TileWeights<f64>,
    }

    impl Fixture {
        fn new(seed: u64, zero_f: bool) -> Self {
            let ctx = PacketContext::new(Grid::new(2, 3, 6).unwrap(), BumpProfile::default()).unwrap();
            let universe = generate_universe(
                2,
                0,
                1,
                &DyadicCube::new(2, vec![0, 0]).unwrap(),
                &DyadicCube::new(1, vec![0, 0]).unwrap(),
            )
            .unwrap();
            let g = ctx.grid;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = SetIndicator::new(g, (0..g.len()).map(|_| rng.gen_bool(0.04)).collect()).unwrap();
            let r = SemitileIndex::last(2);
            let mut vals = Vec::new();
            for _ in 0..g.len() {
                vals.extend(universe.choose(&mut rng).unwrap().semitile(r).unwrap().center_f64());
            }
            let n = DirectionField::new(g, vals).unwrap();
            let mass = MassTable::new(&universe, &e, &n, DEFAULT_MASS_EXPONENT).unwrap();
            let f = if zero_f {
                GridFunction::zeros(g, Domain::Space)
            } else {
                random_test_function(&TestFunctionKind::RandomWavepacketCombo { components: 12 }, seed, &ctx, &universe)
                    .unwrap()
            };
            let weights = TileWeights::compute(&ctx, &f, &universe).unwrap();
            Fixture {
                universe,
                e,
                n,
                mass,
                weights,
            }
        }

        fn inst(&self) -> Instance<'_, f64> {
            Instance {
                universe: &self.universe,
                e: &self.e,
                n: &self.n,
                mass: &self.mass,
                weights: &self.weights,
                r: SemitileIndex::last(2),
            }
        }

        fn sample(&self, seed: u64, count: usize) -> Vec<Tile> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
            self.universe.choose_multiple(&mut rng, count).cloned().collect()
        }
    }

    #[test]
    fn class_constant_is_positive_and_needs_decay() {
        let c = annulus_class_constant(2, 10.0).unwrap();
        assert!(c > 0.0 && c < 0.25);
        assert!(annulus_class_constant(2, 9.0).is_err());
    }

    #[test]
    fn mass_pruning_contracts() {
        let fx = Fixture::new(1, false);
        let inst = fx.inst();
        let empty = prune_mass(&[], &inst).unwrap();
        assert!(empty.kept.is_empty() && empty.sum_tops == 0.0);
        for seed in 0..6 {
            let fx = Fixture::new(seed, false);
            let inst = fx.inst();
            let p = fx.sample(seed, 60);
            let r = prune_mass(&p, &inst).unwrap();
            assert_eq!(r.kept.len() + r.residual.len(), p.len());
            let resid = inst.oracle_mass_of(&r.residual).unwrap();
            assert!(resid <= 0.25 * r.mu, "{resid} > mu / 4");
            for t in &r.kept {
                assert!(inst.mass.mass_single(t).unwrap().value > 0.25 * r.mu);
            }
            let covered: usize = r.tree_cover.iter().map(|t| t.len()).sum();
            assert_eq!(covered, r.kept.len());
            assert!(r.tree_cover.iter().all(|t| !t.is_empty()));
            assert!(r.unclassified.is_empty());
            let total_e = fx.e.measure();
            for c in &r.classes {
                assert!(c.member_volume <= c.enlarged_selected_volume);
                assert!(c.selected_set_measure <= total_e + 1e-12);
                for (a, v) in c.selected.iter().enumerate() {
                    for w in &c.selected[a + 1..] {
                        assert!(!enlarged_overlap(v, w, c.k));
                    }
                }
            }
        }
    }

    #[test]
    fn energy_pruning_contracts() {
        let fz = Fixture::new(3, true);
        let r0 = prune_energy(&fz.sample(0, 20), &fz.inst()).unwrap();
        assert!(r0.kept.is_empty() && !r0.flags.is_empty());
        for seed in 0..6 {
            let fx = Fixture::new(seed, false);
            let inst = fx.inst();
            let p = fx.sample(seed, 60);
            let r = prune_energy(&p, &inst).unwrap();
            assert!(inst.oracle_energy_of(&r.residual).unwrap() <= 0.5 * r.epsilon);
            for t in &r.trees {
                assert!(t.delta >= 0.5 * r.epsilon);
            }
            let mut seen = HashSet::new();
            for t in &r.trees {
                for q in &t.full {
                    assert!(seen.insert(q.clone()));
                }
                assert!(t.core.iter().all(|q| t.full.contains(q)));
            }
            assert!(separation_violations(&r.trees).is_empty());
        }
        let fx = Fixture::new(9, false);
        let single = vec![fx.universe[17].clone()];
        let r = prune_energy(&single, &fx.inst()).unwrap();
        assert_eq!(r.kept, single);
    }

    /// Replays every round by enumerating all subsets of the remaining tiles that form `r`-trees.
    fn replay(p: &[Tile], inst: &Instance<f64>) -> Vec<Tile> {
        let eps = oracle::energy_exhaustive(p, &|t| inst.weights.coeff_sq(t).unwrap(), inst.r, inst.universe);
        let order = LexOrder::for_semitile(inst.r, inst.dim());
        let mut rest = p.to_vec();
        let mut tops = Vec::new();
        loop {
            let mut best: Option<Tile> = None;
            for t in inst.universe {
                for mask in 1u32..(1 << rest.len()) {
                    let sub: Vec<Tile> = (0..rest.len()).filter(|i| mask >> i & 1 == 1).map(|i| rest[i].clone()).collect();
                    if !sub.iter().all(|q| oracle::in_r_tree(q, t, inst.r)) {
                        continue;
                    }
                    let s: f64 = sub.iter().map(|q| inst.weights.coeff_sq(q).unwrap()).sum();
                    if (s / t.time().volume_f64()).sqrt() >= 0.5 * eps
                        && best.as_ref().is_none_or(|b| top_precedence(&order, t, b) == Ordering::Less)
                    {
                        best = Some(t.clone());
                    }
                }
            }
            let Some(t) = best else { break };
            rest.retain(|q| !q.leq(&t));
            tops.push(t);
        }
        tops
    }

    #[test]
    fn energy_selection_order_matches_replay() {
        for seed in 0..8 {
            let fx = Fixture::new(seed, false);
            let inst = fx.inst();
            let p = fx.sample(seed + 100, 3);
            let got: Vec<Tile> = prune_energy(&p, &inst).unwrap().trees.into_iter().map(|t| t.top).collect();
            assert_eq!(got, replay(&p, &inst));
        }
    }

    #[test]
    fn decomposition_certificates() {
        let fx = Fixture::new(0, false);
        let cert = decompose_main(&[], &fx.inst()).unwrap();
        assert!(cert.all_pass && cert.levels.len() == 1 && cert.levels[0].tiles.is_empty());
        for seed in 0..4 {
            let fx = Fixture::new(seed, false);
            let inst = fx.inst();
            let p = fx.sample(seed, 80);
            let mut cert = decompose_main(&p, &inst).unwrap();
            assert_eq!(cert.levels[0].case, LevelCase::Start);
            assert!(cert.levels[0].checks.iter().all(|c| c.pass));
            assert!(cert.disjoint && cert.covers);
            assert!(cert.all_pass, "{:#?}", cert.levels.iter().map(|l| &l.checks).collect::<Vec<_>>());
            let d = verify_certificate(&mut cert, &p, &inst).unwrap();
            assert!(d < 1e-10 && cert.all_pass);
            assert!(cert.tail_sum.is_finite());
        }
        let fz = Fixture::new(2, true);
        let p = fz.sample(1, 30);
        let cert = decompose_main(&p, &fz.inst()).unwrap();
        assert!(cert.covers && cert.all_pass);
    }
}
