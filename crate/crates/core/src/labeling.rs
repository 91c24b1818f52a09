//! The abelian group `(Z/c)^X` of labelings of a finite ground set.
//!
//! A [`Labeling`] assigns a residue modulo `c` to every site of a
//! [`GroundSet`]; absent sites carry residue 0. Two storage forms are used and
//! chosen deterministically from `(c, |X|)`: a packed bit vector when `c = 2`
//! and the ground set is below the dense threshold (addition is word-level
//! XOR), and a sparse ordered map otherwise. Zero residues are never stored,
//! so structural equality is group equality.
//!
//! A [`Block`] is a distinguished subset of sites. Restricting a labeling to a
//! block yields the canonical representative of its image in the quotient by
//! the subgroup of labelings vanishing on that block.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SieveError};

/// Default largest ground set stored densely when `c = 2`.
pub const DEFAULT_DENSE_THRESHOLD: usize = 1 << 16;

/// Identifier of one coordinate of the labeling group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    /// Edge `{a, b}` of a complete graph on positive integers, `a < b`.
    Edge(u32, u32),
    /// Edge of the square grid `Z^2`, smaller endpoint first.
    GridEdge([i32; 2], [i32; 2]),
    /// Integer cell of `[t]`.
    Cell(u32),
    /// Anonymous coordinate of an explicit `(Z/c)^m`.
    Coord(u32),
}

impl Site {
    /// Edge of the complete graph with endpoints in either order.
    pub fn edge(a: u32, b: u32) -> Site {
        if a < b {
            Site::Edge(a, b)
        } else {
            Site::Edge(b, a)
        }
    }

    /// Grid edge with endpoints in either order.
    pub fn grid_edge(p: [i32; 2], q: [i32; 2]) -> Site {
        if p <= q {
            Site::GridEdge(p, q)
        } else {
            Site::GridEdge(q, p)
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::Edge(a, b) => write!(f, "e{a}-{b}"),
            Site::GridEdge(p, q) => write!(f, "g({};{})({};{})", p[0], p[1], q[0], q[1]),
            Site::Cell(i) => write!(f, "i{i}"),
            Site::Coord(i) => write!(f, "x{i}"),
        }
    }
}

fn parse_point(s: &str) -> Option<[i32; 2]> {
    let inner = s.strip_prefix('(')?.strip_suffix(')')?;
    let (x, y) = inner.split_once(';')?;
    Some([x.parse().ok()?, y.parse().ok()?])
}

impl FromStr for Site {
    type Err = SieveError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || SieveError::Parse(format!("malformed site identifier {s:?}"));
        let s = s.trim();
        let (tag, rest) = s.split_at(s.chars().next().map_or(0, char::len_utf8));
        match tag {
            "e" => {
                let (a, b) = rest.split_once('-').ok_or_else(bad)?;
                let a: u32 = a.parse().map_err(|_| bad())?;
                let b: u32 = b.parse().map_err(|_| bad())?;
                if a == b {
                    return Err(bad());
                }
                Ok(Site::edge(a, b))
            }
            "g" => {
                let split = rest.find(")(").ok_or_else(bad)?;
                let p = parse_point(&rest[..=split]).ok_or_else(bad)?;
                let q = parse_point(&rest[split + 1..]).ok_or_else(bad)?;
                Ok(Site::grid_edge(p, q))
            }
            "i" => Ok(Site::Cell(rest.parse().map_err(|_| bad())?)),
            "x" => Ok(Site::Coord(rest.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

/// Compact identity of a ground set carried by every labeling and block, used
/// to reject mixing elements of different groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundTag {
    len: u32,
    fingerprint: u64,
    dense_threshold: u32,
}

impl GroundTag {
    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn words(&self) -> usize {
        self.len().div_ceil(64)
    }

    fn dense(&self, modulus: u32) -> bool {
        modulus == 2 && self.len <= self.dense_threshold
    }
}

/// Ordered, duplicate-free list of sites with a stable index bijection.
#[derive(Debug, Clone)]
pub struct GroundSet {
    sites: Vec<Site>,
    index: HashMap<Site, u32>,
    tag: GroundTag,
}

impl PartialEq for GroundSet {
    fn eq(&self, other: &Self) -> bool {
        self.tag == other.tag && self.sites == other.sites
    }
}

impl Eq for GroundSet {}

impl GroundSet {
    pub fn new(sites: Vec<Site>) -> Result<Self> {
        Self::with_dense_threshold(sites, DEFAULT_DENSE_THRESHOLD)
    }

    pub fn with_dense_threshold(sites: Vec<Site>, dense_threshold: usize) -> Result<Self> {
        let len = u32::try_from(sites.len())
            .map_err(|_| SieveError::Parameter("ground set larger than 2^32 sites".into()))?;
        let mut index = HashMap::with_capacity(sites.len());
        // FNV-1a over the textual site identifiers; stable across runs.
        let mut fingerprint: u64 = 0xcbf2_9ce4_8422_2325;
        for (i, site) in sites.iter().enumerate() {
            if index.insert(*site, i as u32).is_some() {
                return Err(SieveError::Structural(format!("duplicate site {site}")));
            }
            for byte in site.to_string().bytes().chain(std::iter::once(b'|')) {
                fingerprint ^= u64::from(byte);
                fingerprint = fingerprint.wrapping_mul(0x0100_0000_01b3);
            }
        }
        let dense_threshold = u32::try_from(dense_threshold).unwrap_or(u32::MAX);
        Ok(GroundSet {
            sites,
            index,
            tag: GroundTag {
                len,
                fingerprint,
                dense_threshold,
            },
        })
    }

    /// Edges `{a, b}` of the complete graph on `[t]`, ordered lexicographically.
    pub fn complete_graph(t: u32) -> Self {
        let mut sites = Vec::with_capacity((t as usize) * (t as usize).saturating_sub(1) / 2);
        for a in 1..=t {
            for b in a + 1..=t {
                sites.push(Site::Edge(a, b));
            }
        }
        Self::new(sites).expect("complete graph edges are distinct")
    }

    /// Edges of the grid with every endpoint coordinate in `[-radius, radius]`.
    pub fn grid_window(radius: i32) -> Self {
        let mut sites = Vec::new();
        for x in -radius..=radius {
            for y in -radius..=radius {
                if x < radius {
                    sites.push(Site::GridEdge([x, y], [x + 1, y]));
                }
                if y < radius {
                    sites.push(Site::GridEdge([x, y], [x, y + 1]));
                }
            }
        }
        Self::new(sites).expect("grid edges are distinct")
    }

    /// Cells `1..=t`.
    pub fn cells(t: u32) -> Self {
        Self::new((1..=t).map(Site::Cell).collect()).expect("cells are distinct")
    }

    /// Anonymous coordinates `0..m`.
    pub fn coords(m: u32) -> Self {
        Self::new((0..m).map(Site::Coord).collect()).expect("coordinates are distinct")
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, index: u32) -> Site {
        self.sites[index as usize]
    }

    pub fn index_of(&self, site: &Site) -> Option<u32> {
        self.index.get(site).copied()
    }

    pub fn tag(&self) -> GroundTag {
        self.tag
    }

    /// The identity element of `(Z/c)^X`.
    pub fn zero(&self, modulus: u32) -> Labeling {
        Labeling::zero(self.tag, modulus)
    }

    /// A labeling from `(site index, residue)` pairs; residues are reduced mod `c`
    /// and later entries for the same site overwrite earlier ones.
    pub fn labeling<I>(&self, modulus: u32, entries: I) -> Result<Labeling>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        check_modulus(modulus)?;
        let mut f = self.zero(modulus);
        for (site, residue) in entries {
            if site as usize >= self.len() {
                return Err(SieveError::Structural(format!(
                    "site index {site} outside a ground set of {} sites",
                    self.len()
                )));
            }
            f.set(site, residue % modulus);
        }
        Ok(f)
    }

    /// Same as [`GroundSet::labeling`] but keyed by site identifiers.
    pub fn labeling_by_site<I>(&self, modulus: u32, entries: I) -> Result<Labeling>
    where
        I: IntoIterator<Item = (Site, u32)>,
    {
        let indexed = entries
            .into_iter()
            .map(|(site, r)| {
                self.index_of(&site)
                    .map(|i| (i, r))
                    .ok_or_else(|| SieveError::Structural(format!("site {site} not in ground set")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.labeling(modulus, indexed)
    }
}

fn check_modulus(modulus: u32) -> Result<()> {
    if modulus < 2 {
        return Err(SieveError::Parameter(format!("modulus must be at least 2, got {modulus}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Repr {
    Bits(Vec<u64>),
    Sparse(BTreeMap<u32, u32>),
}

/// Element of `(Z/c)^X` in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Labeling {
    modulus: u32,
    ground: GroundTag,
    repr: Repr,
}

impl Labeling {
    fn zero(ground: GroundTag, modulus: u32) -> Self {
        let repr = if ground.dense(modulus) {
            Repr::Bits(vec![0; ground.words()])
        } else {
            Repr::Sparse(BTreeMap::new())
        };
        Labeling {
            modulus,
            ground,
            repr,
        }
    }

    /// The identity of the same group as `self`.
    pub fn identity_like(&self) -> Self {
        Self::zero(self.ground, self.modulus)
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn ground(&self) -> GroundTag {
        self.ground
    }

    pub fn is_zero(&self) -> bool {
        match &self.repr {
            Repr::Bits(words) => words.iter().all(|&w| w == 0),
            Repr::Sparse(map) => map.is_empty(),
        }
    }

    /// Residue at a site index.
    pub fn get(&self, site: u32) -> u32 {
        match &self.repr {
            Repr::Bits(words) => {
                let word = words.get(site as usize / 64).copied().unwrap_or(0);
                ((word >> (site % 64)) & 1) as u32
            }
            Repr::Sparse(map) => map.get(&site).copied().unwrap_or(0),
        }
    }

    /// Overwrite one residue (already reduced mod `c`), keeping canonical form.
    pub(crate) fn set(&mut self, site: u32, residue: u32) {
        debug_assert!(residue < self.modulus);
        debug_assert!((site as usize) < self.ground.len());
        match &mut self.repr {
            Repr::Bits(words) => {
                let bit = 1u64 << (site % 64);
                let word = &mut words[site as usize / 64];
                if residue == 0 {
                    *word &= !bit;
                } else {
                    *word |= bit;
                }
            }
            Repr::Sparse(map) => {
                if residue == 0 {
                    map.remove(&site);
                } else {
                    map.insert(site, residue);
                }
            }
        }
    }

    /// Nonzero `(site index, residue)` pairs in increasing site order.
    pub fn entries(&self) -> Box<dyn Iterator<Item = (u32, u32)> + '_> {
        match &self.repr {
            Repr::Bits(words) => Box::new(words.iter().enumerate().flat_map(|(w, &word)| {
                BitIter(word).map(move |b| ((w * 64 + b) as u32, 1))
            })),
            Repr::Sparse(map) => Box::new(map.iter().map(|(&s, &r)| (s, r))),
        }
    }

    /// Sites carrying a nonzero residue, in increasing index order.
    pub fn support(&self) -> Vec<u32> {
        self.entries().map(|(s, _)| s).collect()
    }

    pub fn support_len(&self) -> usize {
        match &self.repr {
            Repr::Bits(words) => words.iter().map(|w| w.count_ones() as usize).sum(),
            Repr::Sparse(map) => map.len(),
        }
    }

    fn check_compatible(&self, other: &Labeling) -> Result<()> {
        if self.modulus != other.modulus {
            return Err(SieveError::Structural(format!(
                "modulus mismatch: {} vs {}",
                self.modulus, other.modulus
            )));
        }
        if self.ground != other.ground {
            return Err(SieveError::Structural("labelings live on different ground sets".into()));
        }
        Ok(())
    }

    /// Group law: componentwise sum mod `c`.
    pub fn add(&self, other: &Labeling) -> Result<Labeling> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    /// In-place group law.
    pub fn add_assign(&mut self, other: &Labeling) -> Result<()> {
        self.check_compatible(other)?;
        let c = self.modulus;
        match (&mut self.repr, &other.repr) {
            (Repr::Bits(a), Repr::Bits(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x ^= *y;
                }
            }
            (Repr::Sparse(a), Repr::Sparse(b)) => {
                for (&site, &r) in b {
                    let entry = a.entry(site).or_insert(0);
                    *entry = (*entry + r) % c;
                    if *entry == 0 {
                        a.remove(&site);
                    }
                }
            }
            _ => unreachable!("representation is a function of (modulus, ground set)"),
        }
        Ok(())
    }

    /// Group inverse.
    pub fn negate(&self) -> Labeling {
        let c = self.modulus;
        let repr = match &self.repr {
            Repr::Bits(words) => Repr::Bits(words.clone()),
            Repr::Sparse(map) => Repr::Sparse(map.iter().map(|(&s, &r)| (s, c - r)).collect()),
        };
        Labeling {
            modulus: c,
            ground: self.ground,
            repr,
        }
    }

    /// `self` added to itself `n` times.
    pub fn scale(&self, n: u64) -> Labeling {
        let c = u64::from(self.modulus);
        let mut out = self.identity_like();
        for (s, r) in self.entries() {
            out.set(s, ((u64::from(r) * (n % c)) % c) as u32);
        }
        out
    }

    /// Canonical representative of the image in the block quotient: agrees
    /// with `self` on the block and vanishes elsewhere.
    pub fn restrict(&self, block: &Block) -> Labeling {
        debug_assert_eq!(self.ground, block.ground);
        let repr = match &self.repr {
            Repr::Bits(words) => {
                Repr::Bits(words.iter().zip(&block.mask).map(|(w, m)| w & m).collect())
            }
            Repr::Sparse(map) => {
                if map.len() <= block.sites.len() {
                    Repr::Sparse(
                        map.iter()
                            .filter(|(s, _)| block.contains(**s))
                            .map(|(&s, &r)| (s, r))
                            .collect(),
                    )
                } else {
                    Repr::Sparse(
                        block
                            .sites
                            .iter()
                            .filter_map(|s| map.get(s).map(|&r| (*s, r)))
                            .collect(),
                    )
                }
            }
        };
        Labeling {
            modulus: self.modulus,
            ground: self.ground,
            repr,
        }
    }

    /// Canonical text form `c=<modulus>; <site>:<residue>,...` in site index order.
    pub fn to_text(&self, ground: &GroundSet) -> String {
        let body: Vec<String> = self
            .entries()
            .map(|(s, r)| format!("{}:{r}", ground.site(s)))
            .collect();
        format!("c={}; {}", self.modulus, body.join(","))
    }

    /// Inverse of [`Labeling::to_text`].
    pub fn parse(text: &str, ground: &GroundSet) -> Result<Labeling> {
        let (head, body) = text
            .split_once(';')
            .ok_or_else(|| SieveError::Parse(format!("missing ';' in labeling {text:?}")))?;
        let modulus: u32 = head
            .trim()
            .strip_prefix("c=")
            .and_then(|m| m.parse().ok())
            .ok_or_else(|| SieveError::Parse(format!("malformed modulus in {text:?}")))?;
        check_modulus(modulus)?;
        let mut f = ground.zero(modulus);
        for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (site, residue) = item
                .rsplit_once(':')
                .ok_or_else(|| SieveError::Parse(format!("malformed entry {item:?}")))?;
            let site: Site = site.parse()?;
            let index = ground
                .index_of(&site)
                .ok_or_else(|| SieveError::Parse(format!("site {site} not in ground set")))?;
            let residue: u32 = residue
                .parse()
                .map_err(|_| SieveError::Parse(format!("malformed residue in {item:?}")))?;
            if residue >= modulus {
                return Err(SieveError::Parse(format!("residue {residue} not reduced mod {modulus}")));
            }
            f.set(index, residue);
        }
        Ok(f)
    }
}

impl PartialOrd for Labeling {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic on `(modulus, ground, nonzero entries)`; consistent with `Eq`.
impl Ord for Labeling {
    fn cmp(&self, other: &Self) -> Ordering {
        self.modulus
            .cmp(&other.modulus)
            .then(self.ground.cmp(&other.ground))
            .then_with(|| self.entries().cmp(other.entries()))
    }
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let b = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(b)
    }
}

/// A labeled subset `B_l` of the ground set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    label: u32,
    sites: Vec<u32>,
    mask: Vec<u64>,
    ground: GroundTag,
}

impl Block {
    /// Site indices are sorted and deduplicated.
    pub fn new(label: u32, sites: impl IntoIterator<Item = u32>, ground: &GroundSet) -> Result<Self> {
        let mut sites: Vec<u32> = sites.into_iter().collect();
        sites.sort_unstable();
        sites.dedup();
        let tag = ground.tag();
        let mut mask = vec![0u64; tag.words()];
        for &s in &sites {
            if s as usize >= ground.len() {
                return Err(SieveError::Structural(format!(
                    "block {label}: site index {s} outside the ground set"
                )));
            }
            mask[s as usize / 64] |= 1 << (s % 64);
        }
        Ok(Block {
            label,
            sites,
            mask,
            ground: tag,
        })
    }

    pub fn from_sites(label: u32, sites: &[Site], ground: &GroundSet) -> Result<Self> {
        let indices = sites
            .iter()
            .map(|s| {
                ground
                    .index_of(s)
                    .ok_or_else(|| SieveError::Structural(format!("block {label}: site {s} not in ground set")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(label, indices, ground)
    }

    pub fn label(&self) -> u32 {
        self.label
    }

    pub fn sites(&self) -> &[u32] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn ground(&self) -> GroundTag {
        self.ground
    }

    pub fn contains(&self, site: u32) -> bool {
        self.mask
            .get(site as usize / 64)
            .is_some_and(|w| (w >> (site % 64)) & 1 == 1)
    }

    pub fn is_disjoint(&self, other: &Block) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| a & b == 0)
    }

    /// Residues of `f` on the block sites, in block order.
    pub fn coordinates(&self, f: &Labeling) -> Vec<u32> {
        self.sites.iter().map(|&s| f.get(s)).collect()
    }

    /// Mixed-radix index of the image of `f` in the block quotient
    /// (first block site is the least significant digit).
    pub fn quotient_index(&self, f: &Labeling) -> u64 {
        let c = u64::from(f.modulus());
        self.sites
            .iter()
            .rev()
            .fold(0u64, |acc, &s| acc * c + u64::from(f.get(s)))
    }

    /// Canonical representative with the given quotient index.
    pub fn element(&self, ground: &GroundSet, modulus: u32, mut index: u64) -> Labeling {
        let c = u64::from(modulus);
        let mut f = ground.zero(modulus);
        for &s in &self.sites {
            f.set(s, (index % c) as u32);
            index /= c;
        }
        f
    }
}
