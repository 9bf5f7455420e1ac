//! Seeded ensembles, experiment drivers and report emission.
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bump::{BumpProfile, SpatialMassTable};
use crate::error::{Error, Result};
use crate::field::{DirectionField, SetIndicator};
use crate::functionals::{MassTable, DEFAULT_MASS_EXPONENT};
use crate::geometry::{generate_universe, tile_order_key, DyadicCube, SemitileIndex, Tile};
use crate::grid::{weak_l2_from_magnitudes, weak_l2_quasinorm, Domain, Grid, GridFunction};
use crate::multiplier::Multiplier;
use crate::operators::{
    bessel_check, claim1_checks, eval_sup_b, packet_leakage, sjolin_operator, tree_inequality_check,
    zeta_levels, TreeInequalityInput,
};
use crate::oracle;
use crate::packets::{decay_constant, PacketContext, ZetaCheck};
use crate::selection::{
    annulus_class_constant, decompose_main, prune_energy, prune_mass, separation_violations, verify_certificate,
    InequalityCheck, Instance,
};
use crate::testfn::{random_test_function, TestFunctionKind};
use crate::trees::{j_partition_roots, Tree};
use crate::weights::TileWeights;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    /// Box side `L = 2^log2_l`.
    pub log2_l: i32,
    /// `2^s` points per axis.
    pub s: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniverseParams {
    pub k_min: i32,
    pub k_max: i32,
    pub time_box: DyadicCube,
    pub freq_box: DyadicCube,
}

/// A grid and the tile universe living on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub grid: GridParams,
    pub universe: UniverseParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ensembles {
    pub counting: usize,
    pub decompose: usize,
    pub trees: usize,
    pub weak_l2: usize,
    pub sjolin: usize,
}

impl Default for Ensembles {
    fn default() -> Self {
        Ensembles {
            counting: 100,
            decompose: 50,
            trees: 200,
            weak_l2: 100,
            sjolin: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest accepted gap between a fast value and its reference recomputation.
    pub oracle: f64,
    /// Relative error allowed for `C f = |f|` under the constant multiplier.
    pub identity: f64,
    /// Gap allowed between the multiplier path and the direct-transform oracle.
    pub multiplier_oracle: f64,
    /// Relative band around counting baselines.
    pub counting_band: f64,
    /// Relative band around the remaining baselines.
    pub band: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            oracle: 1e-8,
            identity: 1e-12,
            multiplier_oracle: 1e-10,
            counting_band: 0.2,
            band: 0.25,
        }
    }
}

/// Empirical constants a run is compared against when given.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub c_bessel: Option<f64>,
    pub c_claim1: Option<f64>,
    pub weak_ratio_max: Option<f64>,
    pub sjolin_weak_ratio_max: Option<f64>,
}

impl Constants {
    fn get(&self, name: &str) -> Option<f64> {
        match name {
            "c1" => self.c1,
            "c2" => self.c2,
            "c3" => self.c3,
            "c_bessel" => self.c_bessel,
            "c_claim1" => self.c_claim1,
            "weak_ratio_max" => self.weak_ratio_max,
            "sjolin_weak_ratio_max" => self.sjolin_weak_ratio_max,
            _ => None,
        }
    }

    fn set(&mut self, name: &str, v: f64) {
        let slot = match name {
            "c1" => &mut self.c1,
            "c2" => &mut self.c2,
            "c3" => &mut self.c3,
            "c_bessel" => &mut self.c_bessel,
            "c_claim1" => &mut self.c_claim1,
            "weak_ratio_max" => &mut self.weak_ratio_max,
            "sjolin_weak_ratio_max" => &mut self.sjolin_weak_ratio_max,
            _ => return,
        };
        *slot = Some(v);
    }
}

fn default_tile_count() -> usize {
    200
}
fn default_tree_tiles() -> usize {
    30
}
fn default_multiplier() -> Multiplier {
    Multiplier::riesz(0)
}
fn default_nu() -> f64 {
    3.0
}
fn default_exponent() -> f64 {
    DEFAULT_MASS_EXPONENT
}
fn default_levels() -> u32 {
    2
}
fn default_stride() -> usize {
    4
}
fn default_target() -> f64 {
    0.5
}
fn default_test_function() -> TestFunctionKind {
    TestFunctionKind::RandomWavepacketCombo { components: 8 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub grid: GridParams,
    pub universe: UniverseParams,
    /// Separate scene for the tree inequality and the pointwise claim; the main one otherwise.
    #[serde(default)]
    pub tree_scene: Option<Scene>,
    #[serde(default)]
    pub ensembles: Ensembles,
    /// Tiles drawn per instance, capped by the universe size.
    #[serde(default = "default_tile_count")]
    pub tile_count: usize,
    #[serde(default = "default_tree_tiles")]
    pub max_tree_tiles: usize,
    #[serde(default)]
    pub seed: u64,
    /// Semitile index, `2^n` when absent.
    #[serde(default)]
    pub r: Option<usize>,
    #[serde(default = "default_multiplier")]
    pub multiplier: Multiplier,
    /// Decay exponent for the packet diagnostic.
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_exponent")]
    pub mass_exponent: f64,
    /// Refinement levels of the frequency set for the sup, `0..=zeta_levels`.
    #[serde(default = "default_levels")]
    pub zeta_levels: u32,
    /// Lattice stride of the frequencies for the maximal multiplier operator.
    #[serde(default = "default_stride")]
    pub sjolin_stride: usize,
    /// `|E|` requested from the set generator.
    #[serde(default = "default_target")]
    pub e_target: f64,
    #[serde(default = "default_test_function")]
    pub test_function: TestFunctionKind,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub baselines: Constants,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    pub fn main_scene(&self) -> Scene {
        Scene {
            grid: self.grid.clone(),
            universe: self.universe.clone(),
        }
    }

    pub fn tree_scene(&self) -> Scene {
        self.tree_scene.clone().unwrap_or_else(|| self.main_scene())
    }

    pub fn semitile(&self) -> Result<SemitileIndex> {
        match self.r {
            Some(i) => SemitileIndex::new(i, self.dim).map_err(|e| Error::Config(e.to_string())),
            None => Ok(SemitileIndex::last(self.dim)),
        }
    }

    /// Every consistency requirement, checked before any computation.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dim == 0 {
            return bad("dimension must be positive".into());
        }
        let main = World::build(self.dim, &self.main_scene())?;
        World::build(self.dim, &self.tree_scene())?;
        let tree = World::build(self.dim, &self.tree_scene())?;
        if !tree.universe.iter().any(|t| t.scale() > self.tree_scene().universe.k_min) {
            return bad("the tree scene needs at least two scales".into());
        }
        if self.tile_count == 0 || self.tile_count > main.universe.len() {
            return bad(format!(
                "tile_count {} outside 1..={}",
                self.tile_count,
                main.universe.len()
            ));
        }
        if self.max_tree_tiles == 0 {
            return bad("max_tree_tiles must be positive".into());
        }
        self.semitile()?;
        self.multiplier.validate(self.dim).map_err(|e| Error::Config(e.to_string()))?;
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return bad(format!("nu must be positive, got {}", self.nu));
        }
        annulus_class_constant(self.dim, self.mass_exponent).map_err(|e| Error::Config(e.to_string()))?;
        if self.zeta_levels > 4 {
            return bad(format!("zeta_levels {} exceeds 4", self.zeta_levels));
        }
        if self.sjolin_stride == 0 {
            return bad("sjolin_stride must be positive".into());
        }
        if !(self.e_target > 0.0 && self.e_target <= 1.0) {
            return bad(format!("e_target {} outside (0, 1]", self.e_target));
        }
        for w in [&main, &tree] {
            e_cell_count(w, self.e_target).map_err(|e| Error::Config(e.to_string()))?;
        }
        let t = &self.tolerances;
        if [t.oracle, t.identity, t.multiplier_oracle, t.counting_band, t.band]
            .iter()
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return bad("tolerances must be positive".into());
        }
        Ok(())
    }
}

/// Grid, packets and the full tile universe of a scene.
#[derive(Clone, Debug)]
pub struct World {
    pub ctx: PacketContext,
    pub universe: Vec<Tile>,
    pub time_box: DyadicCube,
}

impl World {
    pub fn build(dim: usize, scene: &Scene) -> Result<Self> {
        let cfg = |e: Error| Error::Config(e.to_string());
        let grid = Grid::new(dim, scene.grid.log2_l, scene.grid.s).map_err(cfg)?;
        let u = &scene.universe;
        // resolve the finest time cube with at least 8 points per axis
        if grid.spacing() > 2f64.powi(u.k_min) / 8.0 {
            return Err(Error::Config(format!(
                "grid spacing {} does not resolve time scale {}",
                grid.spacing(),
                u.k_min
            )));
        }
        let ctx = PacketContext::new(grid, BumpProfile::default()).map_err(cfg)?;
        let universe = generate_universe(dim, u.k_min, u.k_max, &u.time_box, &u.freq_box).map_err(cfg)?;
        if universe.is_empty() {
            return Err(Error::Config("empty universe".into()));
        }
        if !grid.contains_cube(&u.time_box) {
            return Err(Error::Config(format!("time box {} leaves the grid", u.time_box)));
        }
        for t in &universe {
            ctx.phi_spectrum::<f64>(t).map_err(cfg)?;
        }
        Ok(World {
            ctx,
            universe,
            time_box: u.time_box.clone(),
        })
    }

    pub fn grid(&self) -> Grid {
        self.ctx.grid
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of instance `i` in a named stream.
pub fn instance_seed(base: u64, stream: &str, i: usize) -> u64 {
    let tag = stream
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    mix(mix(base) ^ mix(tag) ^ mix(i as u64 + 1))
}

/// `count` distinct tiles, uniform without replacement, in canonical order.
pub fn random_tile_set(seed: u64, universe: &[Tile], count: usize) -> Result<Vec<Tile>> {
    if count > universe.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot draw {count} tiles from a universe of {}",
            universe.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Tile> = universe.choose_multiple(&mut rng, count).cloned().collect();
    out.sort_by(|a, b| tile_order_key(a).cmp(&tile_order_key(b)));
    Ok(out)
}

fn window_cells(w: &World) -> Vec<usize> {
    w.grid().points_in_cube(&w.time_box)
}

fn e_cell_count(w: &World, target: f64) -> Result<usize> {
    let g = w.grid();
    let count = (target / g.cell_volume()).round() as usize;
    let avail = window_cells(w).len();
    if count == 0 || count > avail {
        return Err(Error::InvalidParameter(format!(
            "|E| = {target} needs {count} cells but the time box offers 1..={avail}"
        )));
    }
    Ok(count)
}

/// `E`: the cells of the universe time box where low-pass noise is largest, as many as the
/// target measure asks for. `N`: constant on cubes of the finest time scale, each value the
/// centre of `omega_{p(r)}` for a random universe tile.
pub fn random_e_and_n(
    seed: u64,
    world: &World,
    target: f64,
    r: SemitileIndex,
) -> Result<(SetIndicator, DirectionField)> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::InvalidParameter(format!("target measure {target} outside (0, 1]")));
    }
    let g = world.grid();
    let count = e_cell_count(world, target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k_min = world.universe.iter().map(|t| t.scale()).min().expect("nonempty universe");
    let cutoff = 0.5 * 2f64.powi(-k_min);
    let spec: Vec<Complex<f64>> = (0..g.len())
        .map(|k| {
            let r2: f64 = g.freq(k).iter().map(|t| t * t).sum();
            let v: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.sample(StandardNormal);
            Complex::new(v, u) * (-r2 / (cutoff * cutoff)).exp()
        })
        .collect();
    let noise = GridFunction::from_vec(g, Domain::Frequency, spec)?.inverse()?;
    let mut cells = window_cells(world);
    // descending noise, ties by index
    cells.sort_by(|&a, &b| {
        noise.data()[b]
            .re
            .partial_cmp(&noise.data()[a].re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut member = vec![false; g.len()];
    for &i in &cells[..count] {
        member[i] = true;
    }
    let e = SetIndicator::new(g, member)?;

    let block = 2f64.powi(k_min);
    let mut values: BTreeMap<Vec<i64>, Vec<f64>> = BTreeMap::new();
    let mut flat = Vec::with_capacity(g.len() * g.dim);
    for i in 0..g.len() {
        let key: Vec<i64> = g.point(i).iter().map(|x| (x / block).floor() as i64).collect();
        let v = values.entry(key).or_insert_with(|| {
            let t = world.universe.choose(&mut rng).expect("nonempty universe");
            t.semitile_unchecked(r).center_f64()
        });
        flat.extend_from_slice(v);
    }
    let n = DirectionField::new(g, flat)?;
    Ok((e, n))
}

/// Which experiment to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    CountingMass,
    CountingEnergy,
    Decompose,
    TreeInequality,
    Bessel,
    WeakL2,
    Sjolin,
    Claim1,
    All,
}

impl Experiment {
    pub const SINGLE: [Experiment; 8] = [
        Experiment::CountingMass,
        Experiment::CountingEnergy,
        Experiment::Decompose,
        Experiment::TreeInequality,
        Experiment::Bessel,
        Experiment::WeakL2,
        Experiment::Sjolin,
        Experiment::Claim1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::CountingMass => "counting-mass",
            Experiment::CountingEnergy => "counting-energy",
            Experiment::Decompose => "decompose",
            Experiment::TreeInequality => "tree-inequality",
            Experiment::Bessel => "bessel",
            Experiment::WeakL2 => "weak-l2",
            Experiment::Sjolin => "sjolin",
            Experiment::Claim1 => "claim1",
            Experiment::All => "all",
        }
    }

    fn ensemble(self, e: &Ensembles) -> usize {
        match self {
            Experiment::CountingMass | Experiment::CountingEnergy | Experiment::Bessel => e.counting,
            Experiment::Decompose => e.decompose,
            Experiment::TreeInequality | Experiment::Claim1 => e.trees,
            Experiment::WeakL2 => e.weak_l2,
            Experiment::Sjolin => e.sjolin,
            Experiment::All => 0,
        }
    }

    pub fn parts(self) -> Vec<Experiment> {
        match self {
            Experiment::All => Self::SINGLE.to_vec(),
            e => vec![e],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::SINGLE
            .iter()
            .chain(std::iter::once(&Experiment::All))
            .find(|e| e.name() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance: usize,
    pub seed: u64,
    pub values: BTreeMap<String, f64>,
    pub checks: Vec<InequalityCheck>,
    #[serde(default)]
    pub flags: Vec<String>,
    pub pass: bool,
}

impl InstanceRecord {
    fn new(instance: usize, seed: u64) -> Self {
        InstanceRecord {
            instance,
            seed,
            ..Default::default()
        }
    }

    fn value(&mut self, k: &str, v: f64) {
        self.values.insert(k.into(), v);
    }

    /// `lhs <= rhs` for the fast value, and for the reference value when given.
    fn le(&mut self, name: &str, lhs: f64, rhs: f64, oracle_lhs: Option<f64>) {
        let mut c = InequalityCheck::le(name, lhs, rhs);
        if let Some(o) = oracle_lhs {
            c.oracle_delta = Some((lhs - o).abs());
            c.pass = c.pass && o <= rhs;
        } else {
            c.oracle_delta = Some(0.0);
        }
        self.checks.push(c);
    }

    /// A fast/reference agreement recorded as `gap <= tol`.
    fn agree(&mut self, name: &str, gap: f64, tol: f64) {
        let mut c = InequalityCheck::le(name, gap, tol);
        c.oracle_delta = Some(gap);
        self.checks.push(c);
    }

    fn finish(mut self) -> Self {
        self.pass = self.flags.is_empty() && self.checks.iter().all(|c| c.pass);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub name: String,
    pub instances: usize,
    pub passed: usize,
    pub records: Vec<InstanceRecord>,
    /// Ensemble maxima of the recorded empirical constants.
    pub constants: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Largest share of `||phi_p||^2` outside the box, main universe.
    pub leakage_main: f64,
    /// Same for the tree scene.
    pub leakage_tree: f64,
    /// Largest `sup |psi_p^zeta| |I_p|^{1/2} (1 + |x - c(I_p)|/side)^nu` over sampled tiles.
    pub decay_constant: f64,
    pub grid_spacing: f64,
    pub box_side: f64,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub experiment: Experiment,
    pub verify_oracles: bool,
    pub experiments: Vec<ExperimentOutcome>,
    pub constants: Constants,
    pub diagnostics: Diagnostics,
    pub checks: Vec<AcceptanceCheck>,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Run the slow reference paths on every instance instead of a sample.
    pub verify_oracles: bool,
}

struct Draw {
    e: SetIndicator,
    n: DirectionField,
    f: GridFunction<f64>,
    mass: MassTable,
    weights: TileWeights<f64>,
}

impl Draw {
    fn new(cfg: &ExperimentConfig, world: &World, seed: u64, r: SemitileIndex, weigh: &[Tile]) -> Result<Self> {
        let (e, n) = random_e_and_n(mix(seed ^ 1), world, cfg.e_target, r)?;
        let f = random_test_function::<f64>(&cfg.test_function, mix(seed ^ 2), &world.ctx, &world.universe)?;
        let mass = MassTable::new(&world.universe, &e, &n, cfg.mass_exponent)?;
        let weights = TileWeights::compute(&world.ctx, &f, weigh)?;
        Ok(Draw { e, n, f, mass, weights })
    }

    fn inst<'a>(&'a self, world: &'a World, r: SemitileIndex) -> Instance<'a, f64> {
        Instance {
            universe: &world.universe,
            e: &self.e,
            n: &self.n,
            mass: &self.mass,
            weights: &self.weights,
            r,
        }
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    main: &'a World,
    tree: &'a World,
    r: SemitileIndex,
    opts: RunOptions,
}

fn counting_instance(c: &Ctx, i: usize, seed: u64, which: Experiment) -> Result<InstanceRecord> {
    let mut rec = InstanceRecord::new(i, seed);
    let tiles = random_tile_set(mix(seed ^ 3), &c.main.universe, c.cfg.tile_count)?;
    let d = Draw::new(c.cfg, c.main, seed, c.r, &c.main.universe)?;
    let inst = d.inst(c.main, c.r);
    rec.value("tiles", tiles.len() as f64);
    rec.value("e_measure", d.e.measure());
    if c.opts.verify_oracles {
        rec.agree("coefficients recomputed in space", d.weights.recompute_delta(&d.f)?, c.cfg.tolerances.oracle);
    }
    match which {
        Experiment::CountingMass => {
            let res = prune_mass(&tiles, &inst)?;
            let mu_oracle = inst.oracle_mass_of(&tiles)?;
            rec.agree("mass of P", (res.mu - mu_oracle).abs(), c.cfg.tolerances.oracle);
            let fast = inst.mass_of(&res.residual)?;
            let slow = inst.oracle_mass_of(&res.residual)?;
            rec.le("residual mass <= mass/4", fast, res.mu / 4.0, Some(slow));
            let g = c.main.grid();
            for cl in &res.classes {
                let members: f64 = cl.members.iter().map(|u| u.time().volume_f64()).sum();
                let enlarged: f64 = cl
                    .selected
                    .iter()
                    .map(|v| 2f64.powi((cl.k as i32 + 2) * c.cfg.dim as i32) * v.time().volume_f64())
                    .sum();
                let mut chk = InequalityCheck::le(
                    &format!("class {} volume", cl.k),
                    cl.member_volume,
                    cl.enlarged_selected_volume,
                );
                chk.oracle_delta =
                    Some((cl.member_volume - members).abs().max((cl.enlarged_selected_volume - enlarged).abs()));
                chk.pass = chk.pass && members <= enlarged;
                rec.checks.push(chk);
                let measure: f64 = cl
                    .selected
                    .iter()
                    .map(|v| enlarged_measure_direct(v, cl.k, &d.e, &d.n, &g))
                    .sum();
                rec.le(&format!("class {} set measure", cl.k), cl.selected_set_measure, d.e.measure(), Some(measure));
            }
            rec.le("unclassified witnesses", res.unclassified.len() as f64, 0.0, None);
            let covered: usize = res.tree_cover.iter().map(|t| t.len()).sum();
            let cover_ok = covered == res.kept.len()
                && res.tree_cover.iter().all(|t| t.tiles().iter().all(|p| p.leq(t.top())));
            rec.le("kept tiles covered by trees", if cover_ok { 0.0 } else { 1.0 }, 0.0, None);
            rec.value("mu", res.mu);
            rec.value("kept", res.kept.len() as f64);
            rec.value("sum_tops", res.sum_tops);
            rec.value("c1", res.counting_product);
            rec.value("ambiguous", res.ambiguous_assignments as f64);
            rec.flags.extend(res.flags.iter().filter(|f| f.starts_with("error")).cloned());
        }
        Experiment::CountingEnergy | Experiment::Bessel => {
            let res = prune_energy(&tiles, &inst)?;
            let eps_oracle = inst.oracle_energy_of(&tiles)?;
            rec.agree("energy of P", (res.epsilon - eps_oracle).abs(), c.cfg.tolerances.oracle);
            let cores: Vec<Tree> = res
                .trees
                .iter()
                .map(|t| Tree::new(t.top.clone(), t.core.clone()))
                .collect::<Result<_>>()?;
            if which == Experiment::CountingEnergy {
                let fast = inst.energy_of(&res.residual)?;
                let slow = inst.oracle_energy_of(&res.residual)?;
                rec.le("residual energy <= energy/2", fast, res.epsilon / 2.0, Some(slow));
                for (k, t) in res.trees.iter().enumerate() {
                    let s: f64 = t.core.iter().map(|p| d.weights.coeff_sq(p)).sum::<Result<f64>>()?;
                    let direct = (s / t.top.time().volume_f64()).sqrt();
                    let mut chk = InequalityCheck::le(&format!("tree {k} energy >= energy/2"), res.epsilon / 2.0, t.delta);
                    chk.oracle_delta = Some((t.delta - direct).abs());
                    chk.pass = chk.pass && res.epsilon / 2.0 <= direct;
                    rec.checks.push(chk);
                    let r_ok = t.core.iter().all(|p| oracle::in_r_tree(p, &t.top, c.r));
                    rec.le(&format!("tree {k} is an r-tree"), if r_ok { 0.0 } else { 1.0 }, 0.0, None);
                }
                let viol = separation_violations(&res.trees);
                rec.le("separation violations", viol.len() as f64, 0.0, None);
                rec.value("epsilon", res.epsilon);
                rec.value("trees", res.trees.len() as f64);
                rec.value("sum_tops", res.sum_tops);
                rec.value("c2", res.counting_product);
            } else {
                let b = bessel_check(&cores, &d.weights, res.epsilon)?;
                rec.agree("gram sum agreement", b.oracle_delta, c.cfg.tolerances.oracle);
                rec.value("epsilon", res.epsilon);
                rec.value("lhs_sq", b.lhs_sq);
                rec.value("budget", b.budget);
                rec.value("c_bessel", b.ratio);
                if !b.ratio.is_finite() {
                    rec.flags.push("bessel ratio is not finite".into());
                }
            }
        }
        _ => unreachable!("counting experiments only"),
    }
    Ok(rec.finish())
}

/// `|E ∩ N^{-1}[omega_v] ∩ 2^k I_v|` from floating point box bounds, every cell visited.
fn enlarged_measure_direct(v: &Tile, k: u32, e: &SetIndicator, n: &DirectionField, g: &Grid) -> f64 {
    let c = v.time().center_f64();
    let half = 0.5 * 2f64.powi(k as i32) * v.time().side_f64();
    let lo: Vec<f64> = (0..v.dim()).map(|d| v.freq().lo(d).to_f64()).collect();
    let hi: Vec<f64> = (0..v.dim()).map(|d| v.freq().hi(d).to_f64()).collect();
    let count = (0..g.len())
        .filter(|&i| {
            if !e.contains(i) {
                return false;
            }
            let x = g.point(i);
            let z = n.at(i);
            (0..x.len()).all(|d| c[d] - half <= x[d] && x[d] < c[d] + half && lo[d] <= z[d] && z[d] < hi[d])
        })
        .count();
    count as f64 * g.cell_volume()
}

fn decompose_instance(c: &Ctx, i: usize, seed: u64) -> Result<InstanceRecord> {
    let mut rec = InstanceRecord::new(i, seed);
    let tiles = random_tile_set(mix(seed ^ 3), &c.main.universe, c.cfg.tile_count)?;
    let d = Draw::new(c.cfg, c.main, seed, c.r, &c.main.universe)?;
    let inst = d.inst(c.main, c.r);
    let mut cert = match decompose_main(&tiles, &inst) {
        Ok(cert) => cert,
        Err(Error::NonTermination(j)) => {
            rec.flags.push(format!("descent did not terminate above level {j}"));
            return Ok(rec.finish());
        }
        Err(e) => return Err(e),
    };
    let worst = verify_certificate(&mut cert, &tiles, &inst)?;
    for lv in &cert.levels {
        for chk in &lv.checks {
            let mut chk = chk.clone();
            chk.name = format!("level {}: {}", lv.j, chk.name);
            if chk.oracle_delta.is_none() {
                chk.oracle_delta = Some(0.0);
            }
            rec.checks.push(chk);
        }
    }
    rec.agree("certificate recomputation", worst, c.cfg.tolerances.oracle);
    rec.le("levels disjoint", if cert.disjoint { 0.0 } else { 1.0 }, 0.0, None);
    rec.le("levels cover P", if cert.covers { 0.0 } else { 1.0 }, 0.0, None);
    if !cert.all_pass {
        rec.flags.push("certificate rejected".into());
    }
    rec.value("m0", cert.m0 as f64);
    rec.value("levels", cert.levels.len() as f64);
    rec.value("c0", cert.c0);
    rec.value("c1", cert.c1);
    rec.value("c2", cert.c2);
    rec.value("tail_sum", cert.tail_sum);
    Ok(rec.finish())
}

fn random_tree(c: &Ctx, seed: u64) -> Result<Tree> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ 4));
    let top_scale = c.tree.universe.iter().map(|t| t.scale()).max().expect("nonempty universe");
    let tops: Vec<&Tile> = c.tree.universe.iter().filter(|t| t.scale() == top_scale).collect();
    let top = (*tops.choose(&mut rng).expect("some top")).clone();
    let below: Vec<Tile> = c.tree.universe.iter().filter(|q| q.leq(&top)).cloned().collect();
    let k = rng.gen_range(1..=below.len().min(c.cfg.max_tree_tiles));
    let mut tiles: Vec<Tile> = below.choose_multiple(&mut rng, k).cloned().collect();
    tiles.sort_by(|a, b| tile_order_key(a).cmp(&tile_order_key(b)));
    Tree::new(top, tiles)
}

fn tree_instance(c: &Ctx, i: usize, seed: u64, which: Experiment) -> Result<InstanceRecord> {
    let mut rec = InstanceRecord::new(i, seed);
    let tree = random_tree(c, seed)?;
    let d = Draw::new(c.cfg, c.tree, seed, c.r, tree.tiles())?;
    // energy and mass of a tree only look at its own tiles
    let inst = d.inst(c.tree, c.r);
    let input = TreeInequalityInput {
        tree: &tree,
        phases: None,
        inst: &inst,
        m: c.cfg.multiplier,
    };
    let tol = c.cfg.tolerances.oracle;
    rec.value("tiles", tree.len() as f64);
    match which {
        Experiment::TreeInequality => {
            let rep = tree_inequality_check(&input)?;
            rec.agree("tree sum recomputed pointwise", rep.oracle_delta, tol);
            rec.le("integral of F <= ||F||_1", rep.phased_integral, rep.f_l1 * (1.0 + 1e-12) + 1e-15, None);
            rec.le("||F||_1 <= K1 + K2", rep.f_l1, (rep.k1 + rep.k2) * (1.0 + 1e-12) + 1e-15, None);
            if !rep.ratio.is_finite() {
                rec.flags.push("tree ratio is not finite".into());
            }
            rec.value("lhs", rep.lhs);
            rec.value("top_volume", rep.top_volume);
            rec.value("energy", rep.energy);
            rec.value("mass", rep.mass);
            rec.value("c3", rep.ratio);
            rec.value("k1", rep.k1);
            rec.value("k2", rep.k2);
            rec.value("partition_cubes", rep.partition_cubes as f64);
        }
        Experiment::Claim1 => {
            let cubes = j_partition_roots(&tree, &c.tree.grid().half_box_cubes())?;
            let reps = claim1_checks(&input, &cubes)?;
            let worst = reps.iter().map(|r| r.oracle_delta).fold(0.0, f64::max);
            let mism: usize = reps.iter().map(|r| r.window_mismatches).sum();
            rec.agree("large-scale part recomputed from active sets", worst, tol);
            rec.le("window and active set disagreements", mism as f64, 0.0, None);
            let ratio = reps.iter().map(|r| r.ratio).fold(0.0, f64::max);
            if !ratio.is_finite() {
                rec.flags.push("claim ratio is not finite".into());
            }
            rec.value("cubes", reps.len() as f64);
            rec.value("active_points", reps.iter().map(|r| r.active_points).sum::<usize>() as f64);
            rec.value("lhs_max", reps.iter().map(|r| r.lhs).fold(0.0, f64::max));
            rec.value("c_claim1", ratio);
        }
        _ => unreachable!("tree experiments only"),
    }
    Ok(rec.finish())
}

/// `max over zetas of |B_zeta f(x)|`, every packet value summed directly at `x`.
fn sup_b_direct(w: &TileWeights<f64>, p: &[Tile], m: &Multiplier, r: SemitileIndex, zetas: &[Vec<f64>], x: &[f64]) -> Result<f64> {
    let ctx = w.ctx();
    let mut best: f64 = 0.0;
    for z in zetas {
        let mut s = Complex::new(0.0, 0.0);
        for q in p {
            if q.semitile(r)?.contains_point(z) {
                s += w.coeff(q)? * ctx.psi_spectrum::<f64>(q, z, m, r, ZetaCheck::Require)?.eval_at(x);
            }
        }
        best = best.max(s.norm());
    }
    Ok(best)
}

/// `sup_lambda lambda |{|g| > lambda}|^{1/2}` with the level sets counted afresh per candidate.
fn weak_l2_direct(mags: &[f64], cell: f64) -> f64 {
    mags.iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| {
            // just below l the level set also contains the points equal to l
            let count = mags.iter().filter(|&&v| v >= l).count();
            l * (count as f64 * cell).sqrt()
        })
        .fold(0.0, f64::max)
}

fn weak_instance(c: &Ctx, i: usize, seed: u64) -> Result<InstanceRecord> {
    let mut rec = InstanceRecord::new(i, seed);
    let tiles = random_tile_set(mix(seed ^ 3), &c.main.universe, c.cfg.tile_count)?;
    let f = random_test_function::<f64>(&c.cfg.test_function, mix(seed ^ 2), &c.main.ctx, &c.main.universe)?;
    let w = TileWeights::compute(&c.main.ctx, &f, &tiles)?;
    let g = c.main.grid();
    let m = c.cfg.multiplier;
    let mut prev: Option<Vec<f64>> = None;
    let mut violations = 0usize;
    let mut last = Vec::new();
    let mut level0 = Vec::new();
    for level in 0..=c.cfg.zeta_levels {
        let zs = zeta_levels(&tiles, c.r, level)?;
        let sup: Vec<f64> = eval_sup_b(&w, &tiles, &m, c.r, &zs)?.data().iter().map(|v| v.re).collect();
        let weak = weak_l2_from_magnitudes(&sup, g.cell_volume()) / f.norm();
        rec.value(&format!("weak_level_{level}"), weak);
        if let Some(p) = &prev {
            violations += p.iter().zip(&sup).filter(|(a, b)| a > b).count();
        }
        if level == 0 {
            level0 = zs.clone();
        }
        prev = Some(sup.clone());
        last = sup;
    }
    rec.le("pointwise drops under refinement", violations as f64, 0.0, None);
    let weak = weak_l2_from_magnitudes(&last, g.cell_volume());
    rec.agree("weak quasinorm recounted", (weak - weak_l2_direct(&last, g.cell_volume())).abs(), c.cfg.tolerances.oracle);
    // the coarsest sup recomputed by direct summation at a few points
    let coarse: Vec<f64> = eval_sup_b(&w, &tiles, &m, c.r, &level0)?.data().iter().map(|v| v.re).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ 5));
    let probes = if c.opts.verify_oracles { 16 } else { 3 };
    let mut gap: f64 = 0.0;
    for _ in 0..probes {
        let x = rng.gen_range(0..g.len());
        gap = gap.max((coarse[x] - sup_b_direct(&w, &tiles, &m, c.r, &level0, &g.point(x))?).abs());
    }
    rec.agree("sup recomputed at probe points", gap, c.cfg.tolerances.oracle);
    rec.value("f_norm", f.norm());
    rec.value("weak_ratio", weak / f.norm());
    Ok(rec.finish())
}

/// Lattice frequencies with the given stride inside half the Nyquist span.
pub fn sjolin_frequencies(g: &Grid, stride: usize) -> Vec<Vec<f64>> {
    let half = 0.5 * g.nyquist();
    let axis: Vec<f64> = (0..g.points_per_axis())
        .step_by(stride)
        .map(|k| g.axis_freq(k))
        .filter(|v| v.abs() <= half)
        .collect();
    let mut out = vec![Vec::new()];
    for _ in 0..g.dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

fn sjolin_instance(c: &Ctx, i: usize, seed: u64) -> Result<InstanceRecord> {
    let mut rec = InstanceRecord::new(i, seed);
    let g = c.main.grid();
    let f = random_test_function::<f64>(&c.cfg.test_function, mix(seed ^ 2), &c.main.ctx, &c.main.universe)?;
    let zs = sjolin_frequencies(&g, c.cfg.sjolin_stride);
    let cf = sjolin_operator(&f, &c.cfg.multiplier, &zs)?;
    let id = sjolin_operator(&f, &Multiplier::ConstantOne, &zs)?;
    let fmax = f.data().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let gap = id
        .data()
        .iter()
        .zip(f.data())
        .map(|(a, b)| (a.re - b.norm()).abs())
        .fold(0.0, f64::max)
        / fmax;
    rec.agree("constant multiplier gives |f|", gap, c.cfg.tolerances.identity);
    if i == 0 || c.opts.verify_oracles {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ 6));
        let z = zs[rng.gen_range(0..zs.len())].clone();
        let fast = crate::operators::modulated_multiplier(&f.forward()?, &c.cfg.multiplier, &z)?;
        let slow = oracle::multiplier_apply_direct(&g, f.data(), &c.cfg.multiplier, &z);
        let gap = fast.data().iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        rec.agree("single frequency against direct transforms", gap, c.cfg.tolerances.multiplier_oracle);
    }
    let weak = weak_l2_quasinorm(&cf) / f.norm();
    rec.value("frequencies", zs.len() as f64);
    rec.value("sjolin_weak_ratio", weak);
    if !weak.is_finite() {
        rec.flags.push("weak ratio is not finite".into());
    }
    Ok(rec.finish())
}

fn run_instance(c: &Ctx, which: Experiment, i: usize) -> InstanceRecord {
    let seed = instance_seed(c.cfg.seed, which.name(), i);
    // the bessel ensemble reuses the energy ensemble draws
    let seed = match which {
        Experiment::Bessel => instance_seed(c.cfg.seed, Experiment::CountingEnergy.name(), i),
        Experiment::Claim1 => instance_seed(c.cfg.seed, Experiment::TreeInequality.name(), i),
        _ => seed,
    };
    let out = match which {
        Experiment::CountingMass | Experiment::CountingEnergy | Experiment::Bessel => counting_instance(c, i, seed, which),
        Experiment::Decompose => decompose_instance(c, i, seed),
        Experiment::TreeInequality | Experiment::Claim1 => tree_instance(c, i, seed, which),
        Experiment::WeakL2 => weak_instance(c, i, seed),
        Experiment::Sjolin => sjolin_instance(c, i, seed),
        Experiment::All => unreachable!("expanded by the caller"),
    };
    out.unwrap_or_else(|e| {
        let mut rec = InstanceRecord::new(i, seed);
        rec.flags.push(format!("error: {e}"));
        rec.finish()
    })
}

fn constant_keys(which: Experiment) -> &'static [(&'static str, &'static str)] {
    match which {
        Experiment::CountingMass => &[("c1", "c1")],
        Experiment::CountingEnergy => &[("c2", "c2")],
        Experiment::Bessel => &[("c_bessel", "c_bessel")],
        Experiment::TreeInequality => &[("c3", "c3")],
        Experiment::Claim1 => &[("c_claim1", "c_claim1")],
        Experiment::WeakL2 => &[("weak_ratio_max", "weak_ratio")],
        Experiment::Sjolin => &[("sjolin_weak_ratio_max", "sjolin_weak_ratio")],
        _ => &[],
    }
}

fn diagnostics(c: &Ctx) -> Result<Diagnostics> {
    let table = SpatialMassTable::new(&c.main.ctx.profile, 4096.0, 1 << 16);
    let mut d = Diagnostics {
        leakage_main: packet_leakage(&c.main.universe, &c.main.grid(), &table),
        leakage_tree: packet_leakage(&c.tree.universe, &c.tree.grid(), &table),
        grid_spacing: c.main.grid().spacing(),
        box_side: c.main.grid().side(),
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(mix(c.cfg.seed ^ 7));
    let sample: Vec<&Tile> = c.main.universe.choose_multiple(&mut rng, 8).collect();
    for p in sample {
        let z = p.semitile(c.r)?.center_f64();
        let psi = c.main.ctx.synthesize_psi_p_zeta::<f64>(p, &z, &c.cfg.multiplier, c.r, ZetaCheck::Require)?;
        d.decay_constant = d.decay_constant.max(decay_constant(&psi, p, c.cfg.nu));
    }
    d.notes.push("the sup over frequencies is taken over a finite set and is a lower bound".into());
    d.notes.push("packet values are periodic on the sampling box; leakage gives the share lost to wrap-around".into());
    Ok(d)
}

/// Runs `which` over its ensemble and assembles the report. Configuration problems surface as
/// `Error::Config` before any computation.
pub fn run_experiment(cfg: &ExperimentConfig, which: Experiment, opts: RunOptions) -> Result<Report> {
    run_experiment_timed(cfg, which, opts).map(|(r, _)| r)
}

/// As [`run_experiment`], also returning wall-clock seconds per experiment.
pub fn run_experiment_timed(
    cfg: &ExperimentConfig,
    which: Experiment,
    opts: RunOptions,
) -> Result<(Report, Vec<(String, f64)>)> {
    cfg.validate()?;
    for part in which.parts() {
        if part.ensemble(&cfg.ensembles) == 0 {
            return Err(Error::Config(format!("empty ensemble for {part}")));
        }
    }
    let main = World::build(cfg.dim, &cfg.main_scene())?;
    let tree = World::build(cfg.dim, &cfg.tree_scene())?;
    let c = Ctx {
        cfg,
        main: &main,
        tree: &tree,
        r: cfg.semitile()?,
        opts,
    };
    let mut outcomes = Vec::new();
    let mut constants = Constants::default();
    let mut checks = Vec::new();
    let mut timings = Vec::new();
    for part in which.parts() {
        let size = part.ensemble(&cfg.ensembles);
        let (records, secs) = timed(|| -> Vec<InstanceRecord> {
            (0..size).into_par_iter().map(|i| run_instance(&c, part, i)).collect()
        });
        timings.push((part.name().to_string(), secs));
        let passed = records.iter().filter(|r| r.pass).count();
        checks.push(AcceptanceCheck {
            name: format!("{part}: instances pass"),
            pass: passed == size,
            detail: format!("{passed}/{size}"),
        });
        let mut found = BTreeMap::new();
        for (name, key) in constant_keys(part) {
            let vals: Vec<f64> = records.iter().filter_map(|r| r.values.get(*key).copied()).collect();
            let v = vals.iter().copied().fold(0.0, f64::max);
            let finite = !vals.is_empty() && vals.iter().all(|x| x.is_finite());
            checks.push(AcceptanceCheck {
                name: format!("{part}: {name} finite"),
                pass: finite,
                detail: format!("{v}"),
            });
            if let Some(b) = cfg.baselines.get(name) {
                let band = if matches!(part, Experiment::CountingMass | Experiment::CountingEnergy) {
                    cfg.tolerances.counting_band
                } else {
                    cfg.tolerances.band
                };
                checks.push(AcceptanceCheck {
                    name: format!("{part}: {name} near baseline"),
                    pass: (v - b).abs() <= band * b.abs(),
                    detail: format!("{v} vs {b} (band {band})"),
                });
            }
            constants.set(name, v);
            found.insert(name.to_string(), v);
        }
        outcomes.push(ExperimentOutcome {
            name: part.name().into(),
            instances: size,
            passed,
            records,
            constants: found,
        });
    }
    let diagnostics = diagnostics(&c)?;
    let pass = checks.iter().all(|c| c.pass);
    let report = Report {
        config: cfg.clone(),
        experiment: which,
        verify_oracles: opts.verify_oracles,
        experiments: outcomes,
        constants,
        diagnostics,
        checks,
        pass,
    };
    Ok((report, timings))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Per-instance rows of one experiment.
pub fn outcome_csv(o: &ExperimentOutcome) -> String {
    let keys: std::collections::BTreeSet<&String> = o.records.iter().flat_map(|r| r.values.keys()).collect();
    let mut s = String::from("instance,seed,pass,worst_oracle_delta");
    for k in &keys {
        s.push(',');
        s.push_str(&csv_field(k));
    }
    s.push_str(",flags\n");
    for r in &o.records {
        let worst = r.checks.iter().filter_map(|c| c.oracle_delta).fold(0.0, f64::max);
        s.push_str(&format!("{},{},{},{:e}", r.instance, r.seed, r.pass, worst));
        for k in &keys {
            s.push(',');
            if let Some(v) = r.values.get(*k) {
                s.push_str(&format!("{v:e}"));
            }
        }
        s.push(',');
        s.push_str(&csv_field(&r.flags.join("; ")));
        s.push('\n');
    }
    s
}

/// `report.json`, one CSV per experiment and two-column plot data files under `out`.
pub fn write_report(report: &Report, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("report.json"), serde_json::to_string_pretty(report)?)?;
    for o in &report.experiments {
        fs::write(out.join(format!("{}.csv", o.name)), outcome_csv(o))?;
        let (x, y) = match o.name.as_str() {
            "tree-inequality" => ("tiles", "c3"),
            "weak-l2" => ("f_norm", "weak_ratio"),
            "counting-mass" => ("mu", "sum_tops"),
            "counting-energy" => ("epsilon", "sum_tops"),
            _ => continue,
        };
        let mut s = format!("# {x} {y}\n");
        for r in &o.records {
            if let (Some(a), Some(b)) = (r.values.get(x), r.values.get(y)) {
                s.push_str(&format!("{a:e} {b:e}\n"));
            }
        }
        fs::write(out.join(format!("{}.dat", o.name)), s)?;
    }
    Ok(())
}

/// Grid files for the first instance: `E`, `N`, `f`, the sup over frequencies and the maximal
/// multiplier operator.
pub fn write_sample_fields(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let world = World::build(cfg.dim, &cfg.main_scene())?;
    let r = cfg.semitile()?;
    let seed = instance_seed(cfg.seed, Experiment::WeakL2.name(), 0);
    let (e, n) = random_e_and_n(mix(seed ^ 1), &world, cfg.e_target, r)?;
    let tiles = random_tile_set(mix(seed ^ 3), &world.universe, cfg.tile_count)?;
    let f = random_test_function::<f64>(&cfg.test_function, mix(seed ^ 2), &world.ctx, &world.universe)?;
    let w = TileWeights::compute(&world.ctx, &f, &tiles)?;
    let zs = zeta_levels(&tiles, r, cfg.zeta_levels)?;
    let dir = out.join("fields");
    fs::create_dir_all(&dir)?;
    e.save(&dir.join("e"))?;
    n.save(&dir.join("n"))?;
    f.save(&dir.join("f"))?;
    eval_sup_b(&w, &tiles, &cfg.multiplier, r, &zs)?.save(&dir.join("sup_b"))?;
    let sz = sjolin_frequencies(&world.grid(), cfg.sjolin_stride);
    sjolin_operator(&f, &cfg.multiplier, &sz)?.save(&dir.join("sjolin"))?;
    Ok(())
}

/// Wall-clock seconds per experiment, kept apart from the report so reruns compare equal.
pub fn timed<R>(f: impl FnOnce() -> R) -> (R, f64) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed().as_secs_f64())
}
