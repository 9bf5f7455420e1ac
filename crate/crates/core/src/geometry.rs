//! Exact dyadic geometry: dyadic rationals, cubes, tiles and the tile order.
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A dyadic rational `num * 2^exp`, kept normalized (odd numerator, or zero with `exp = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: i64,
    exp: i32,
}

fn narrow(v: i128) -> i64 {
    i64::try_from(v).expect("dyadic numerator overflow")
}

impl Dyadic {
    pub fn new(num: i64, exp: i32) -> Self {
        if num == 0 {
            return Dyadic { num: 0, exp: 0 };
        }
        let tz = num.trailing_zeros() as i32;
        Dyadic {
            num: num >> tz,
            exp: exp + tz,
        }
    }

    pub fn int(v: i64) -> Self {
        Dyadic::new(v, 0)
    }

    pub fn pow2(k: i32) -> Self {
        Dyadic { num: 1, exp: k }
    }

    pub fn zero() -> Self {
        Dyadic { num: 0, exp: 0 }
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn exp(&self) -> i32 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 * 2f64.powi(self.exp)
    }

    // Numerators of `self` and `other` over the common denominator 2^-e.
    fn align(&self, other: &Dyadic) -> (i128, i128, i32) {
        if self.num == 0 {
            return (0, other.num as i128, other.exp);
        }
        if other.num == 0 {
            return (self.num as i128, 0, self.exp);
        }
        let e = self.exp.min(other.exp);
        let sa = (self.exp - e) as u32;
        let sb = (other.exp - e) as u32;
        assert!(sa < 63 && sb < 63, "dyadic exponent spread too large");
        ((self.num as i128) << sa, (other.num as i128) << sb, e)
    }

    fn from_wide(v: i128, exp: i32) -> Self {
        if v == 0 {
            return Dyadic::zero();
        }
        let tz = v.trailing_zeros() as i32;
        Dyadic {
            num: narrow(v >> tz),
            exp: exp + tz,
        }
    }

    pub fn abs(self) -> Self {
        Dyadic {
            num: self.num.abs(),
            exp: self.exp,
        }
    }

    pub fn mul_int(self, k: i64) -> Self {
        Dyadic::from_wide(self.num as i128 * k as i128, self.exp)
    }

    pub fn scale2(self, k: i32) -> Self {
        if self.num == 0 {
            self
        } else {
            Dyadic {
                num: self.num,
                exp: self.exp + k,
            }
        }
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        let (a, b, e) = self.align(&rhs);
        Dyadic::from_wide(a + b, e)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        let (a, b, e) = self.align(&rhs);
        Dyadic::from_wide(a - b, e)
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic {
            num: -self.num,
            exp: self.exp,
        }
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        Dyadic::from_wide(self.num as i128 * rhs.num as i128, self.exp + rhs.exp)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.align(other);
        a.cmp(&b)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp >= 0 {
            write!(f, "{}", (self.num as i128) << self.exp)
        } else {
            write!(f, "{}/2^{}", self.num, -self.exp)
        }
    }
}

/// Cascade comparison of two vectors: the first differing coordinate decides.
pub fn lex_compare(a: &[Dyadic], b: &[Dyadic]) -> Result<Ordering> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    Ok(LexOrder::standard(a.len()).compare(a, b))
}

/// A lexicographic order with a chosen coordinate precedence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexOrder {
    precedence: Vec<usize>,
}

impl LexOrder {
    pub fn standard(n: usize) -> Self {
        LexOrder {
            precedence: (0..n).collect(),
        }
    }

    /// Order in which semitile `1` precedes semitile `r` coordinate-wise: the first
    /// coordinate on which semitile `r` sits in the upper half takes precedence.
    pub fn for_semitile(r: SemitileIndex, n: usize) -> Self {
        let bits = r.offsets(n);
        let lead = bits.iter().position(|&b| b == 1).unwrap_or(0);
        let mut precedence = vec![lead];
        precedence.extend((0..n).filter(|&j| j != lead));
        LexOrder { precedence }
    }

    pub fn precedence(&self) -> &[usize] {
        &self.precedence
    }

    pub fn compare<K: Ord>(&self, a: &[K], b: &[K]) -> Ordering {
        for &j in &self.precedence {
            match a[j].cmp(&b[j]) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }

    pub fn compare_f64(&self, a: &[f64], b: &[f64]) -> Ordering {
        for &j in &self.precedence {
            match a[j].total_cmp(&b[j]) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

/// The cube `prod_j [m_j 2^k, (m_j + 1) 2^k)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    scale: i32,
    corner: Vec<i64>,
}

fn floor_shift(v: i64, d: u32) -> i64 {
    if d >= 63 {
        if v < 0 {
            -1
        } else {
            0
        }
    } else {
        v >> d
    }
}

impl DyadicCube {
    pub fn new(scale: i32, corner: Vec<i64>) -> Result<Self> {
        if corner.is_empty() {
            return Err(Error::InvalidParameter("cube dimension must be >= 1".into()));
        }
        Ok(DyadicCube { scale, corner })
    }

    /// `[m 2^k, (m+1) 2^k)^n` with equal corner coordinates.
    pub fn diagonal(n: usize, scale: i32, m: i64) -> Self {
        DyadicCube {
            scale,
            corner: vec![m; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    pub fn scale(&self) -> i32 {
        self.scale
    }

    pub fn corner(&self) -> &[i64] {
        &self.corner
    }

    pub fn side(&self) -> Dyadic {
        Dyadic::pow2(self.scale)
    }

    pub fn volume(&self) -> Dyadic {
        Dyadic::pow2(self.scale * self.dim() as i32)
    }

    pub fn side_f64(&self) -> f64 {
        2f64.powi(self.scale)
    }

    pub fn volume_f64(&self) -> f64 {
        2f64.powi(self.scale * self.dim() as i32)
    }

    pub fn lo(&self, j: usize) -> Dyadic {
        Dyadic::new(self.corner[j], self.scale)
    }

    pub fn hi(&self, j: usize) -> Dyadic {
        Dyadic::new(self.corner[j] + 1, self.scale)
    }

    pub fn center(&self) -> Vec<Dyadic> {
        self.corner
            .iter()
            .map(|&m| Dyadic::new(2 * m + 1, self.scale - 1))
            .collect()
    }

    pub fn center_f64(&self) -> Vec<f64> {
        self.center().iter().map(Dyadic::to_f64).collect()
    }

    pub fn contains(&self, other: &DyadicCube) -> bool {
        if self.dim() != other.dim() || other.scale > self.scale {
            return false;
        }
        let d = (self.scale - other.scale) as u32;
        self.corner
            .iter()
            .zip(&other.corner)
            .all(|(&a, &b)| floor_shift(b, d) == a)
    }

    pub fn intersects(&self, other: &DyadicCube) -> bool {
        self.contains(other) || other.contains(self)
    }

    /// Half-open membership of a point.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        let s = self.side_f64();
        self.corner.iter().zip(x).all(|(&m, &xi)| {
            let lo = m as f64 * s;
            lo <= xi && xi < lo + s
        })
    }

    pub fn parent(&self) -> DyadicCube {
        DyadicCube {
            scale: self.scale + 1,
            corner: self.corner.iter().map(|&m| m >> 1).collect(),
        }
    }

    /// The `2^n` children in lexicographic order of their centers.
    pub fn children(&self) -> Vec<DyadicCube> {
        let n = self.dim();
        (0..1usize << n)
            .map(|idx| {
                let corner = (0..n)
                    .map(|j| 2 * self.corner[j] + ((idx >> (n - 1 - j)) & 1) as i64)
                    .collect();
                DyadicCube {
                    scale: self.scale - 1,
                    corner,
                }
            })
            .collect()
    }

    /// All dyadic subcubes of scale `k <= scale`, in lexicographic corner order.
    pub fn subcubes(&self, k: i32) -> Vec<DyadicCube> {
        if k > self.scale {
            return Vec::new();
        }
        let d = (self.scale - k) as u32;
        assert!(d < 31, "subdivision too deep");
        let per = 1i64 << d;
        let n = self.dim();
        let total = (per as usize).pow(n as u32);
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0i64; n];
        for _ in 0..total {
            let corner = (0..n).map(|j| self.corner[j] * per + idx[j]).collect();
            out.push(DyadicCube { scale: k, corner });
            for j in (0..n).rev() {
                idx[j] += 1;
                if idx[j] < per {
                    break;
                }
                idx[j] = 0;
            }
        }
        out
    }

    /// The closed box `aI` with the same center and `a` times the side.
    pub fn enlarge(&self, a: Dyadic) -> ClosedBox {
        let half = (a * self.side()).scale2(-1);
        let c = self.center();
        ClosedBox {
            lo: c.iter().map(|&x| x - half).collect(),
            hi: c.iter().map(|&x| x + half).collect(),
        }
    }

    pub fn as_box(&self) -> ClosedBox {
        self.enlarge(Dyadic::int(1))
    }

    /// Euclidean distance from a point to the closed cube.
    pub fn distance_to_point(&self, x: &[f64]) -> f64 {
        self.as_box().distance_to_point(x)
    }
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:(", self.scale)?;
        for (j, m) in self.corner.iter().enumerate() {
            if j > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for DyadicCube {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("malformed cube '{s}'"));
        let (k, rest) = s.trim().split_once(':').ok_or_else(bad)?;
        let scale: i32 = k.trim().parse().map_err(|_| bad())?;
        let inner = rest
            .trim()
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let corner = inner
            .split(',')
            .map(|t| t.trim().parse::<i64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        DyadicCube::new(scale, corner)
    }
}

impl Serialize for DyadicCube {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DyadicCube {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Closed box with dyadic corners; used for non-dyadic enlargements such as `3J`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosedBox {
    pub lo: Vec<Dyadic>,
    pub hi: Vec<Dyadic>,
}

impl ClosedBox {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains_cube(&self, c: &DyadicCube) -> bool {
        (0..self.dim()).all(|j| self.lo[j] <= c.lo(j) && c.hi(j) <= self.hi[j])
    }

    /// Whether the half-open cube meets the closed box.
    pub fn meets_cube(&self, c: &DyadicCube) -> bool {
        (0..self.dim()).all(|j| self.lo[j] < c.hi(j) && c.lo(j) <= self.hi[j])
    }

    pub fn interiors_intersect(&self, other: &ClosedBox) -> bool {
        (0..self.dim()).all(|j| self.lo[j] < other.hi[j] && other.lo[j] < self.hi[j])
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|j| self.lo[j].to_f64() <= x[j] && x[j] <= self.hi[j].to_f64())
    }

    /// Membership in `[lo, hi)`.
    pub fn contains_point_half_open(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|j| self.lo[j].to_f64() <= x[j] && x[j] < self.hi[j].to_f64())
    }

    pub fn distance_to_point(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|j| {
                let lo = self.lo[j].to_f64();
                let hi = self.hi[j].to_f64();
                let d = if x[j] < lo {
                    lo - x[j]
                } else if x[j] > hi {
                    x[j] - hi
                } else {
                    0.0
                };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Index `i` in `1..=2^n` of a frequency semitile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SemitileIndex(usize);

impl SemitileIndex {
    pub fn new(i: usize, n: usize) -> Result<Self> {
        let max = 1usize << n;
        if i == 0 || i > max {
            return Err(Error::SemitileOutOfRange { index: i, max });
        }
        Ok(SemitileIndex(i))
    }

    /// The last index `2^n`.
    pub fn last(n: usize) -> Self {
        SemitileIndex(1 << n)
    }

    pub fn get(&self) -> usize {
        self.0
    }

    /// Upper-half flags per coordinate; coordinate 1 is the most significant.
    pub fn offsets(&self, n: usize) -> Vec<u8> {
        let b = self.0 - 1;
        (0..n).map(|j| ((b >> (n - 1 - j)) & 1) as u8).collect()
    }
}

/// A tile `I x omega` with `|I| |omega| = 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tile {
    time: DyadicCube,
    freq: DyadicCube,
}

impl Tile {
    pub fn new(time: DyadicCube, freq: DyadicCube) -> Result<Self> {
        if time.dim() != freq.dim() {
            return Err(Error::DimensionMismatch(time.dim(), freq.dim()));
        }
        if freq.scale() != -time.scale() {
            return Err(Error::InvalidParameter(format!(
                "frequency scale {} must be the negative of time scale {}",
                freq.scale(),
                time.scale()
            )));
        }
        Ok(Tile { time, freq })
    }

    pub fn dim(&self) -> usize {
        self.time.dim()
    }

    pub fn time(&self) -> &DyadicCube {
        &self.time
    }

    pub fn freq(&self) -> &DyadicCube {
        &self.freq
    }

    pub fn scale(&self) -> i32 {
        self.time.scale()
    }

    pub fn semitile(&self, i: SemitileIndex) -> Result<DyadicCube> {
        let n = self.dim();
        let i = SemitileIndex::new(i.get(), n)?;
        Ok(self.semitile_unchecked(i))
    }

    pub(crate) fn semitile_unchecked(&self, i: SemitileIndex) -> DyadicCube {
        let bits = i.offsets(self.dim());
        DyadicCube {
            scale: self.freq.scale - 1,
            corner: self
                .freq
                .corner
                .iter()
                .zip(bits)
                .map(|(&m, b)| 2 * m + b as i64)
                .collect(),
        }
    }

    /// `I_p ⊆ I_q` and `omega_q ⊆ omega_p`.
    pub fn leq(&self, q: &Tile) -> bool {
        q.time.contains(&self.time) && self.freq.contains(&q.freq)
    }

    /// Intersection as subsets of the time-frequency plane.
    pub fn intersects(&self, q: &Tile) -> bool {
        self.time.intersects(&q.time) && self.freq.intersects(&q.freq)
    }
}

/// Checked form of [`Tile::leq`].
pub fn tile_leq(p: &Tile, q: &Tile) -> Result<bool> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(p.dim(), q.dim()));
    }
    Ok(p.leq(q))
}

impl fmt::Display for Tile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.time, self.freq)
    }
}

impl FromStr for Tile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('|')
            .ok_or_else(|| Error::Parse(format!("malformed tile '{s}'")))?;
        Tile::new(a.parse()?, b.parse()?)
    }
}

impl Serialize for Tile {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Tile {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All tiles with time scale in `k_min..=k_max`, `I ⊆ time_box`, `omega ⊆ freq_box`,
/// ordered by scale, then time corner, then frequency corner.
pub fn generate_universe(
    n: usize,
    k_min: i32,
    k_max: i32,
    time_box: &DyadicCube,
    freq_box: &DyadicCube,
) -> Result<Vec<Tile>> {
    if k_min > k_max {
        return Err(Error::InvalidParameter(format!("k_min {k_min} > k_max {k_max}")));
    }
    if time_box.dim() != n {
        return Err(Error::DimensionMismatch(n, time_box.dim()));
    }
    if freq_box.dim() != n {
        return Err(Error::DimensionMismatch(n, freq_box.dim()));
    }
    if time_box.scale() < k_min {
        return Err(Error::InvalidParameter(format!(
            "time box of scale {} is smaller than the finest time scale {k_min}",
            time_box.scale()
        )));
    }
    if freq_box.scale() < -k_max {
        return Err(Error::InvalidParameter(format!(
            "frequency box of scale {} is smaller than the finest frequency scale {}",
            freq_box.scale(),
            -k_max
        )));
    }
    let mut out = Vec::new();
    for k in k_min..=k_max {
        let times = time_box.subcubes(k);
        let freqs = freq_box.subcubes(-k);
        for t in &times {
            for w in &freqs {
                out.push(Tile {
                    time: t.clone(),
                    freq: w.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// Canonical order key: scale, then time corner, then frequency corner.
pub fn tile_order_key(t: &Tile) -> (i32, &[i64], &[i64]) {
    (t.scale(), t.time().corner(), t.freq().corner())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(num: i64, exp: i32) -> Dyadic {
        Dyadic::new(num, exp)
    }

    fn cube(k: i32, c: &[i64]) -> DyadicCube {
        DyadicCube::new(k, c.to_vec()).unwrap()
    }

    fn tile(k: i32, t: &[i64], w: &[i64]) -> Tile {
        Tile::new(cube(k, t), cube(-k, w)).unwrap()
    }

    #[test]
    fn lex_examples() {
        let v = |a: i64, b: i64| vec![Dyadic::int(a), Dyadic::int(b)];
        assert_eq!(lex_compare(&v(1, 2), &v(1, 3)).unwrap(), Ordering::Less);
        assert_eq!(lex_compare(&v(2, 0), &v(1, 9)).unwrap(), Ordering::Greater);
        assert_eq!(lex_compare(&v(1, 2), &v(1, 2)).unwrap(), Ordering::Equal);
        assert!(lex_compare(&v(1, 2), &[Dyadic::int(1)]).is_err());
    }

    #[test]
    fn dyadic_arithmetic_is_exact() {
        assert_eq!(d(1, -1) + d(1, -1), Dyadic::int(1));
        assert_eq!(d(3, -2) - d(1, -2), d(1, -1));
        assert_eq!(d(3, -2) * Dyadic::int(4), Dyadic::int(3));
        assert!(d(1, -40) > Dyadic::zero());
        assert!(d(-1, 5) < d(1, -5));
        assert_eq!(d(12, 0), d(3, 2));
    }

    #[test]
    fn volume_and_center() {
        let c = cube(-2, &[1, -3, 0]);
        assert_eq!(c.volume(), Dyadic::pow2(-6));
        assert_eq!(c.center(), vec![d(3, -3), d(-5, -3), d(1, -3)]);
    }

    #[test]
    fn semitile_examples() {
        let p = tile(0, &[0, 0], &[0, 0]);
        let s = |i| p.semitile(SemitileIndex::new(i, 2).unwrap()).unwrap();
        assert_eq!(s(1), cube(-1, &[0, 0]));
        assert_eq!(s(2), cube(-1, &[0, 1]));
        assert_eq!(s(3), cube(-1, &[1, 0]));
        assert_eq!(s(4), cube(-1, &[1, 1]));
        assert!(SemitileIndex::new(5, 2).is_err());
        assert!(SemitileIndex::new(0, 2).is_err());
    }

    #[test]
    fn semitiles_follow_center_order() {
        let p = tile(1, &[3, -2, 5], &[-1, 4, 2]);
        let subs: Vec<_> = (1..=8)
            .map(|i| p.semitile(SemitileIndex::new(i, 3).unwrap()).unwrap())
            .collect();
        for w in subs.windows(2) {
            assert_eq!(lex_compare(&w[0].center(), &w[1].center()).unwrap(), Ordering::Less);
        }
        for s in &subs {
            assert!(p.freq().contains(s));
            assert_eq!(s.volume().scale2(3), p.freq().volume());
        }
    }

    #[test]
    fn leq_examples() {
        let p = tile(0, &[0, 0], &[0, 0]);
        let q = Tile::new(cube(1, &[0, 0]), cube(-1, &[0, 0])).unwrap();
        assert!(p.leq(&q));
        assert!(p.leq(&p));
        let far = tile(0, &[4, 4], &[0, 0]);
        assert!(!p.leq(&far) && !far.leq(&p));
    }

    #[test]
    fn universe_examples() {
        let b = DyadicCube::diagonal(2, 1, 0);
        assert_eq!(generate_universe(2, 0, 0, &b, &b).unwrap().len(), 16);
        let u = generate_universe(2, 0, 1, &b, &b).unwrap();
        assert_eq!(u.len(), 32);
        assert!(generate_universe(2, 1, 0, &b, &b).is_err());
        assert!(generate_universe(2, 2, 2, &b, &b).is_err());
        for w in u.windows(2) {
            assert!(tile_order_key(&w[0]) < tile_order_key(&w[1]));
        }
    }

    #[test]
    fn universe_matches_brute_force() {
        let tb = cube(2, &[0, -1]);
        let fb = cube(0, &[1, 0]);
        let u = generate_universe(2, -1, 1, &tb, &fb).unwrap();
        let mut brute = Vec::new();
        for k in -1..=1 {
            for a in -20..20 {
                for b in -20..20 {
                    for c in -20..20 {
                        for e in -20..20 {
                            let t = tile(k, &[a, b], &[c, e]);
                            if tb.contains(t.time()) && fb.contains(t.freq()) {
                                brute.push(t);
                            }
                        }
                    }
                }
            }
        }
        brute.sort_by(|x, y| tile_order_key(x).cmp(&tile_order_key(y)));
        assert_eq!(u, brute);
    }

    #[test]
    fn text_round_trip() {
        let p = tile(-3, &[5, -7], &[0, 12]);
        let s = p.to_string();
        assert_eq!(s, "-3:(5,-7)|3:(0,12)");
        assert_eq!(s.parse::<Tile>().unwrap(), p);
        let j = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<Tile>(&j).unwrap(), p);
        assert!("0:(1)|1:(2)".parse::<Tile>().is_err());
    }

    #[test]
    fn permuted_order_separates_semitiles() {
        for n in 1..=3usize {
            for r in 2..=(1usize << n) {
                let ord = LexOrder::for_semitile(SemitileIndex::new(r, n).unwrap(), n);
                let p = tile(0, &vec![0; n], &vec![0; n]);
                let a = p.semitile(SemitileIndex::new(1, n).unwrap()).unwrap();
                let b = p.semitile(SemitileIndex::new(r, n).unwrap()).unwrap();
                // every corner of the first semitile precedes the whole of semitile r
                assert_eq!(ord.compare(&a.center(), &b.center()), Ordering::Less);
                for s in 0..32u32 {
                    let frac = |j: usize, salt: u32| ((s * 7 + salt * 13 + j as u32 * 5) % 16) as f64 / 16.0;
                    let eta: Vec<f64> = (0..n).map(|j| a.lo(j).to_f64() + frac(j, 1) * 0.5).collect();
                    let xi: Vec<f64> = (0..n).map(|j| b.lo(j).to_f64() + frac(j, 2) * 0.5).collect();
                    assert_eq!(ord.compare_f64(&eta, &xi), Ordering::Less);
                }
            }
        }
        assert_eq!(LexOrder::for_semitile(SemitileIndex::last(3), 3), LexOrder::standard(3));
    }

    fn brute_lex(a: &[Dyadic], b: &[Dyadic]) -> Ordering {
        let n = a.len();
        for j in 0..n {
            if (0..j).all(|i| a[i] == b[i]) && a[j] < b[j] {
                return Ordering::Less;
            }
        }
        if a == b {
            Ordering::Equal
        } else {
            Ordering::Greater
        }
    }

    fn arb_cube(n: usize) -> impl Strategy<Value = DyadicCube> {
        (-4i32..4, proptest::collection::vec(-12i64..12, n))
            .prop_map(|(k, c)| DyadicCube::new(k, c).unwrap())
    }

    proptest! {
        #[test]
        fn nested_or_disjoint(a in arb_cube(2), b in arb_cube(2)) {
            let meet = (0..2).all(|j| a.lo(j) < b.hi(j) && b.lo(j) < a.hi(j));
            prop_assert_eq!(meet, a.contains(&b) || b.contains(&a));
        }

        #[test]
        fn lex_matches_cascade(
            a in proptest::collection::vec((-50i64..50, -3i32..3), 3),
            b in proptest::collection::vec((-50i64..50, -3i32..3), 3),
        ) {
            let a: Vec<_> = a.into_iter().map(|(m, e)| Dyadic::new(m, e)).collect();
            let b: Vec<_> = b.into_iter().map(|(m, e)| Dyadic::new(m, e)).collect();
            prop_assert_eq!(lex_compare(&a, &b).unwrap(), brute_lex(&a, &b));
            prop_assert_eq!(lex_compare(&b, &a).unwrap(), brute_lex(&a, &b).reverse());
        }

        #[test]
        fn semitiles_partition(k in -3i32..3, t in proptest::collection::vec(-5i64..5, 2),
                               w in proptest::collection::vec(-5i64..5, 2),
                               x in proptest::collection::vec(-64i64..64, 2)) {
            let p = Tile::new(DyadicCube::new(k, t).unwrap(), DyadicCube::new(-k, w).unwrap()).unwrap();
            let pt: Vec<f64> = x.iter().map(|&v| v as f64 / 16.0).collect();
            let hits = (1..=4)
                .filter(|&i| p.semitile(SemitileIndex::new(i, 2).unwrap()).unwrap().contains_point(&pt))
                .count();
            prop_assert_eq!(hits, usize::from(p.freq().contains_point(&pt)));
        }

        #[test]
        fn intersecting_tiles_are_comparable(
            k1 in -3i32..3, k2 in -3i32..3,
            a in proptest::collection::vec(-6i64..6, 2), b in proptest::collection::vec(-6i64..6, 2),
            c in proptest::collection::vec(-6i64..6, 2), e in proptest::collection::vec(-6i64..6, 2),
        ) {
            let p = Tile::new(DyadicCube::new(k1, a).unwrap(), DyadicCube::new(-k1, c).unwrap()).unwrap();
            let q = Tile::new(DyadicCube::new(k2, b).unwrap(), DyadicCube::new(-k2, e).unwrap()).unwrap();
            if p.intersects(&q) {
                prop_assert!(p.leq(&q) || q.leq(&p));
            }
        }

        #[test]
        fn cube_text_round_trip(c in arb_cube(3)) {
            prop_assert_eq!(c.to_string().parse::<DyadicCube>().unwrap(), c);
        }
    }
}
