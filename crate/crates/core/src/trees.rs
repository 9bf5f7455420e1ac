//! Trees, i-trees, maximal elements and the window partition by `3J`.
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{tile_order_key, Dyadic, DyadicCube, SemitileIndex, Tile};

/// A set of tiles lying below a common top (which need not be a member).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tree {
    top: Tile,
    tiles: Vec<Tile>,
}

impl Tree {
    pub fn new(top: Tile, tiles: Vec<Tile>) -> Result<Self> {
        if let Some(bad) = tiles.iter().find(|p| !p.leq(&top)) {
            return Err(Error::InvalidParameter(format!("tile {bad} does not lie below top {top}")));
        }
        Ok(Tree { top, tiles })
    }

    pub fn top(&self) -> &Tile {
        &self.top
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// `|I_T|`.
    pub fn top_volume(&self) -> f64 {
        self.top.time().volume_f64()
    }

    /// Whether `omega_{T(i)} ⊆ omega_{p(i)}` for every member.
    pub fn is_itree(&self, i: SemitileIndex) -> bool {
        let t = self.top.semitile_unchecked(i);
        self.tiles.iter().all(|p| p.semitile_unchecked(i).contains(&t))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ITree {
    pub tree: Tree,
    pub i: SemitileIndex,
}

fn dedup(p: &[Tile]) -> Vec<Tile> {
    let mut seen = std::collections::HashSet::new();
    p.iter().filter(|t| seen.insert((*t).clone())).cloned().collect()
}

/// Members not strictly below another member; pairwise disjoint.
pub fn maximal_elements(p: &[Tile]) -> Vec<Tile> {
    let p = dedup(p);
    p.iter()
        .filter(|a| !p.iter().any(|b| b != *a && a.leq(b)))
        .cloned()
        .collect()
}

/// Trees topped by the maximal elements; a tile under several tops goes to the one first
/// in (scale, time corner, frequency corner) order.
pub fn decompose_into_trees(p: &[Tile]) -> Vec<Tree> {
    let mut tops = maximal_elements(p);
    tops.sort_by(|a, b| tile_order_key(a).cmp(&tile_order_key(b)));
    let mut buckets: Vec<Vec<Tile>> = vec![Vec::new(); tops.len()];
    for t in dedup(p) {
        let k = tops
            .iter()
            .position(|top| t.leq(top))
            .expect("every tile lies below a maximal element");
        buckets[k].push(t);
    }
    tops.into_iter()
        .zip(buckets)
        .map(|(top, tiles)| Tree { top, tiles })
        .collect()
}

/// The `2^n` i-trees of `t` (index `i` at position `i - 1`); tiles sharing the top's
/// frequency cube go to `r`.
pub fn split_into_itrees(t: &Tree, r: SemitileIndex) -> Vec<ITree> {
    let n = t.top.dim();
    let count = 1usize << n;
    let mut buckets: Vec<Vec<Tile>> = vec![Vec::new(); count];
    for p in &t.tiles {
        let i = if p.freq() == t.top.freq() {
            r.get()
        } else {
            (1..=count)
                .find(|&i| {
                    let i = SemitileIndex::new(i, n).expect("in range");
                    p.semitile_unchecked(i).contains(&t.top.semitile_unchecked(i))
                })
                .expect("a strictly finer frequency cube sits in one semitile")
        };
        buckets[i - 1].push(p.clone());
    }
    buckets
        .into_iter()
        .enumerate()
        .map(|(k, tiles)| ITree {
            tree: Tree {
                top: t.top.clone(),
                tiles,
            },
            i: SemitileIndex::new(k + 1, n).expect("in range"),
        })
        .collect()
}

/// The maximal `r`-tree of `p` under `top`.
pub fn r_tree_under(p: &[Tile], top: &Tile, r: SemitileIndex) -> Vec<Tile> {
    let tr = top.semitile_unchecked(r);
    p.iter()
        .filter(|q| q.leq(top) && q.semitile_unchecked(r).contains(&tr))
        .cloned()
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPartition {
    pub window: DyadicCube,
    pub coarsest_scale: i32,
    pub cubes: Vec<DyadicCube>,
    /// Set when the tree had no tiles and the partition is the plain cap-scale grid.
    pub empty_tree: bool,
}

/// Whether `3J` contains some `I_p`.
pub fn triple_contains_any(j: &DyadicCube, times: &[DyadicCube]) -> bool {
    let b = j.enlarge(Dyadic::int(3));
    times.iter().any(|i| b.contains_cube(i))
}

/// Maximal dyadic `J ⊆ window`, of scale at most `coarsest_scale`, with `3J` containing no `I_p`.
pub fn j_partition(t: &Tree, window: &DyadicCube, coarsest_scale: i32) -> Result<WindowPartition> {
    if let Some(p) = t.tiles.iter().find(|p| !window.contains(p.time())) {
        return Err(Error::InvalidParameter(format!("window {window} does not contain the time cube of {p}")));
    }
    let roots = if window.scale() > coarsest_scale {
        window.subcubes(coarsest_scale)
    } else {
        vec![window.clone()]
    };
    let cubes = refine_roots(t, roots);
    Ok(WindowPartition {
        window: window.clone(),
        coarsest_scale,
        cubes,
        empty_tree: t.tiles.is_empty(),
    })
}

fn refine_roots(t: &Tree, roots: Vec<DyadicCube>) -> Vec<DyadicCube> {
    let times: Vec<DyadicCube> = t.tiles.iter().map(|p| p.time().clone()).collect();
    let mut cubes = Vec::new();
    let mut stack: Vec<DyadicCube> = roots.into_iter().rev().collect();
    while let Some(j) = stack.pop() {
        if triple_contains_any(&j, &times) {
            stack.extend(j.children().into_iter().rev());
        } else {
            cubes.push(j);
        }
    }
    cubes
}

/// The same stopping rule started from several disjoint roots; every `I_p` must lie in one.
pub fn j_partition_roots(t: &Tree, roots: &[DyadicCube]) -> Result<Vec<DyadicCube>> {
    if let Some(p) = t.tiles.iter().find(|p| !roots.iter().any(|w| w.contains(p.time()))) {
        return Err(Error::InvalidParameter(format!("no root contains the time cube of {p}")));
    }
    Ok(refine_roots(t, roots.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_universe;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cube(k: i32, c: &[i64]) -> DyadicCube {
        DyadicCube::new(k, c.to_vec()).unwrap()
    }

    fn tile(k: i32, c: &[i64], f: &[i64]) -> Tile {
        Tile::new(cube(k, c), cube(-k, f)).unwrap()
    }

    fn universe() -> Vec<Tile> {
        generate_universe(2, 0, 2, &cube(2, &[0, 0]), &cube(0, &[0, 0])).unwrap()
    }

    #[test]
    fn maximal_examples() {
        let p = tile(0, &[0, 0], &[0, 0]);
        assert_eq!(maximal_elements(std::slice::from_ref(&p)), vec![p.clone()]);
        let q = tile(1, &[0, 0], &[0, 0]);
        let t = tile(2, &[0, 0], &[0, 0]);
        assert!(p.leq(&q) && q.leq(&t));
        assert_eq!(maximal_elements(&[p.clone(), q.clone(), t.clone()]), vec![t.clone()]);
        let a = tile(0, &[0, 0], &[0, 0]);
        let b = tile(0, &[3, 3], &[0, 0]);
        assert_eq!(maximal_elements(&[a.clone(), b.clone()]), vec![a, b]);
        assert!(decompose_into_trees(&[]).is_empty());
        let chain = decompose_into_trees(&[p, q, t.clone()]);
        assert_eq!(chain.len(), 1);
        assert_eq!(chain[0].top(), &t);
        assert_eq!(chain[0].len(), 3);
    }

    #[test]
    fn random_decompositions_cover_and_have_disjoint_tops() {
        let u = universe();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p: Vec<Tile> = u.choose_multiple(&mut rng, 50).cloned().collect();
            let trees = decompose_into_trees(&p);
            let mut all: Vec<Tile> = trees.iter().flat_map(|t| t.tiles().to_vec()).collect();
            assert_eq!(all.len(), p.len());
            all.sort();
            let mut want = p.clone();
            want.sort();
            assert_eq!(all, want);
            for (i, a) in trees.iter().enumerate() {
                assert!(a.tiles().iter().all(|q| q.leq(a.top())));
                for b in &trees[i + 1..] {
                    assert!(!a.top().intersects(b.top()));
                }
            }
        }
    }

    #[test]
    fn itree_split() {
        let r = SemitileIndex::new(2, 2).unwrap();
        let top = tile(2, &[0, 0], &[0, 0]);
        let only_top = Tree::new(top.clone(), vec![top.clone()]).unwrap();
        let parts = split_into_itrees(&only_top, r);
        assert_eq!(parts.len(), 4);
        assert_eq!(parts[1].tree.len(), 1);
        // tiles whose last semitile holds the top's last semitile
        let last = SemitileIndex::last(2);
        let top = tile(2, &[0, 0], &[1, 1]);
        let t = Tree::new(top.clone(), vec![tile(1, &[0, 0], &[0, 0]), tile(1, &[1, 1], &[0, 0])]).unwrap();
        let parts = split_into_itrees(&t, r);
        assert_eq!(parts[3].tree.len(), 2);
        assert!(parts[3].tree.is_itree(last));
        let u = universe();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let p: Vec<Tile> = u.choose_multiple(&mut rng, 40).cloned().collect();
            for tree in decompose_into_trees(&p) {
                let parts = split_into_itrees(&tree, r);
                let total: usize = parts.iter().map(|s| s.tree.len()).sum();
                assert_eq!(total, tree.len());
                for s in &parts {
                    for q in s.tree.tiles() {
                        let ok = q.semitile(s.i).unwrap().contains(&tree.top().semitile(s.i).unwrap());
                        assert!(ok);
                    }
                }
            }
        }
    }

    /// Brute force: every dyadic subcube of the window at or below the cap, checked directly.
    fn check_partition(t: &Tree, part: &WindowPartition) {
        let times: Vec<DyadicCube> = t.tiles().iter().map(|p| p.time().clone()).collect();
        let w = &part.window;
        let vol: f64 = part.cubes.iter().map(|c| c.volume_f64()).sum();
        assert_eq!(vol, w.volume_f64());
        for (i, a) in part.cubes.iter().enumerate() {
            assert!(w.contains(a));
            assert!(a.scale() <= part.coarsest_scale);
            assert!(!triple_contains_any(a, &times));
            for b in &part.cubes[i + 1..] {
                assert!(!a.intersects(b));
            }
            if a.scale() < part.coarsest_scale.min(w.scale()) {
                assert!(triple_contains_any(&a.parent(), &times), "{a} is not maximal");
            }
        }
        let min_scale = part.cubes.iter().map(|c| c.scale()).min().unwrap();
        for k in min_scale..=part.coarsest_scale.min(w.scale()) {
            for j in w.subcubes(k) {
                if !triple_contains_any(&j, &times) {
                    assert!(part.cubes.iter().any(|c| c.contains(&j)), "{j} uncovered by a maximal cube");
                }
            }
        }
    }

    #[test]
    fn partition_around_a_unit_cube() {
        let p = tile(0, &[0, 0], &[0, 0]);
        let t = Tree::new(p.clone(), vec![p]).unwrap();
        let window = cube(3, &[0, 0]);
        let part = j_partition(&t, &window, 2).unwrap();
        check_partition(&t, &part);
        let near = part.cubes.iter().filter(|c| c.contains_point(&[0.1, 0.1])).collect::<Vec<_>>();
        assert_eq!(near.len(), 1);
        assert!(near[0].side_f64() < 1.0);
        assert!(part.cubes.iter().any(|c| c.contains_point(&[7.5, 7.5]) && c.scale() == 1));
        let empty = Tree::new(tile(0, &[0, 0], &[0, 0]), vec![]).unwrap();
        let part = j_partition(&empty, &window, 2).unwrap();
        assert!(part.empty_tree);
        assert_eq!(part.cubes.len(), 4);
    }

    #[test]
    fn random_partitions_verified() {
        let u = universe();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let window = cube(4, &[0, 0]);
        for _ in 0..20 {
            let p: Vec<Tile> = u.choose_multiple(&mut rng, 12).cloned().collect();
            for tree in decompose_into_trees(&p) {
                for cap in [1, 3] {
                    check_partition(&tree, &j_partition(&tree, &window, cap).unwrap());
                }
            }
        }
        let far = Tree::new(tile(2, &[0, 0], &[0, 0]), vec![tile(2, &[0, 0], &[0, 0])]).unwrap();
        assert!(j_partition(&far, &cube(1, &[0, 0]), 1).is_err());
    }
}
