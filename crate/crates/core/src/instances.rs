//! Block systems for monochromatic triangles in edge colorings of complete
//! graphs, 4-cycles in subgraphs of the square grid, and monochromatic
//! arithmetic progressions in colorings of `[t]`, each with its target sets
//! `Theta_l`.

use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::BlockSystem;
use crate::error::{Result, SieveError};
use crate::labeling::{Block, GroundSet, Labeling, Site};
use crate::walk::BlockDetector;

/// Largest block quotient enumerated by [`Instance::theta_density`].
pub const DENSITY_ENUMERATION_CAP: u64 = 10_000_000;

/// How far the constructors enforce the theorem hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceMode {
    #[default]
    Strict,
    /// Accepts `R < 3` and blocks on fewer than three vertices; such blocks
    /// never contain a triangle.
    Permissive,
}

/// Vertex sets `I_l` of a coloring instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Partition {
    /// `I_l = {3l-2, 3l-1, 3l}`.
    Triples,
    /// `I_l = {l(l+1)/2, ..., l(l+1)/2 + l}`.
    Triangular,
    Custom(Vec<Vec<u32>>),
}

/// Block layout of a grid instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridScale {
    /// Annuli `E(D(0, 2l+2)) \ E(D(0, 2l))`.
    Paper,
    /// Annuli `E(D(0, r_l)) \ E(D(0, r_{l-1}))` for increasing radii
    /// `r_0 < r_1 < ...` (`r_0 = 0` gives a full disc as block 1).
    Reduced { radii: Vec<i32> },
    /// Explicit blocks of grid edges, written as site identifiers.
    Custom { blocks: Vec<Vec<String>> },
}

fn default_true() -> bool {
    true
}

/// Serializable description of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceSpec {
    Coloring {
        r: u32,
        c: u32,
        partition: Partition,
        #[serde(default)]
        mode: InstanceMode,
        /// Whether color 0 counts as a color for monochromatic triangles.
        #[serde(default = "default_true")]
        zero_is_color: bool,
    },
    Grid {
        r: u32,
        scale: GridScale,
    },
    Ap {
        s: u32,
        q: u32,
        c: u32,
        r: u32,
    },
}

/// When a tuple of sites is an occurrence of the pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchRule {
    /// All residues equal; with `zero_counts = false` the common value must be nonzero.
    Monochromatic { zero_counts: bool },
    /// All residues nonzero (edges present).
    AllPresent,
}

impl MatchRule {
    fn matches(self, values: impl Iterator<Item = u32>) -> bool {
        match self {
            MatchRule::Monochromatic { zero_counts } => {
                let mut values = values;
                let Some(first) = values.next() else {
                    return false;
                };
                (zero_counts || first != 0) && values.all(|v| v == first)
            }
            MatchRule::AllPresent => values.into_iter().all(|v| v != 0),
        }
    }
}

/// Occurrences of a pattern as tuples of positions, plus the match rule.
#[derive(Debug, Clone)]
pub struct PatternTable {
    pub rule: MatchRule,
    pub patterns: Vec<Vec<u32>>,
}

impl PatternTable {
    /// Whether some occurrence matches, reading residues through `value`.
    pub fn matches(&self, value: impl Fn(u32) -> u32) -> bool {
        self.patterns
            .iter()
            .any(|p| self.rule.matches(p.iter().map(|&i| value(i))))
    }

    fn localize(&self, block: &Block) -> PatternTable {
        let local = |site: u32| block.sites().binary_search(&site).expect("pattern inside block") as u32;
        PatternTable {
            rule: self.rule,
            patterns: self
                .patterns
                .iter()
                .map(|p| p.iter().map(|&s| local(s)).collect())
                .collect(),
        }
    }
}

/// Triangles of `K_t` whose three edges all lie in `block`, as site indices.
pub fn triangle_patterns(block: &Block, ground: &GroundSet) -> Vec<Vec<u32>> {
    let vertices: BTreeSet<u32> = block
        .sites()
        .iter()
        .filter_map(|&s| match ground.site(s) {
            Site::Edge(a, b) => Some([a, b]),
            _ => None,
        })
        .flatten()
        .collect();
    let vertices: Vec<u32> = vertices.into_iter().collect();
    let edge = |a: u32, b: u32| ground.index_of(&Site::edge(a, b)).filter(|&i| block.contains(i));
    let mut out = Vec::new();
    for (x, &a) in vertices.iter().enumerate() {
        for (y, &b) in vertices.iter().enumerate().skip(x + 1) {
            for &c in &vertices[y + 1..] {
                if let (Some(e1), Some(e2), Some(e3)) = (edge(a, b), edge(a, c), edge(b, c)) {
                    out.push(vec![e1, e2, e3]);
                }
            }
        }
    }
    out
}

/// The four edges of the unit square with lower-left corner `p`, if all exist.
fn unit_square(ground: &GroundSet, p: [i32; 2]) -> Option<Vec<u32>> {
    let [x, y] = p;
    [
        Site::grid_edge([x, y], [x + 1, y]),
        Site::grid_edge([x, y + 1], [x + 1, y + 1]),
        Site::grid_edge([x, y], [x, y + 1]),
        Site::grid_edge([x + 1, y], [x + 1, y + 1]),
    ]
    .iter()
    .map(|s| ground.index_of(s))
    .collect()
}

/// Unit squares with all four edges in `block`.
pub fn square_patterns(block: &Block, ground: &GroundSet) -> Vec<Vec<u32>> {
    block
        .sites()
        .iter()
        .filter_map(|&s| match ground.site(s) {
            Site::GridEdge(p, q) if q == [p[0] + 1, p[1]] => unit_square(ground, p),
            _ => None,
        })
        .filter(|sq| sq.iter().all(|&e| block.contains(e)))
        .collect()
}

/// Progressions of length `s` inside the block's cells, which must form an
/// arithmetic progression themselves.
pub fn ap_patterns(block: &Block, s: u32) -> Vec<Vec<u32>> {
    let n = block.len() as u32;
    if s == 0 || s > n {
        return Vec::new();
    }
    let sites = block.sites();
    let mut out = Vec::new();
    if s == 1 {
        return sites.iter().map(|&x| vec![x]).collect();
    }
    for d in 1..=(n - 1) / (s - 1) {
        for a in 0..n - (s - 1) * d {
            out.push((0..s).map(|j| sites[(a + j * d) as usize]).collect());
        }
    }
    out
}

/// True iff some triangle inside the block is monochromatic (color 0 included).
pub fn detect_mono_triangle(f: &Labeling, block: &Block, ground: &GroundSet) -> bool {
    PatternTable {
        rule: MatchRule::Monochromatic { zero_counts: true },
        patterns: triangle_patterns(block, ground),
    }
    .matches(|s| f.get(s))
}

/// True iff some unit square inside the block has all four edges present.
pub fn detect_four_cycle(g: &Labeling, block: &Block, ground: &GroundSet) -> bool {
    PatternTable {
        rule: MatchRule::AllPresent,
        patterns: square_patterns(block, ground),
    }
    .matches(|s| g.get(s))
}

/// True iff some length-`s` progression inside the block is monochromatic.
pub fn detect_mono_ap(f: &Labeling, block: &Block, s: u32) -> bool {
    PatternTable {
        rule: MatchRule::Monochromatic { zero_counts: true },
        patterns: ap_patterns(block, s),
    }
    .matches(|x| f.get(x))
}

/// How [`Instance::theta_density`] evaluates `|Theta_l| / n_l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityMode {
    Exact,
    LowerBound,
}

/// A block system with per-block target sets.
#[derive(Debug, Clone)]
pub struct Instance {
    spec: InstanceSpec,
    system: Arc<BlockSystem>,
    tables: Vec<PatternTable>,
    anywhere: PatternTable,
    lower_bounds: Vec<f64>,
}

impl Instance {
    pub fn build(spec: &InstanceSpec) -> Result<Self> {
        match spec {
            InstanceSpec::Coloring {
                r,
                c,
                partition,
                mode,
                zero_is_color,
            } => make_coloring_instance(*r, *c, partition, *mode, *zero_is_color),
            InstanceSpec::Grid { r, scale } => make_grid_instance(*r, scale),
            InstanceSpec::Ap { s, q, c, r } => make_ap_instance(*s, *q, *c, *r),
        }
    }

    pub fn spec(&self) -> &InstanceSpec {
        &self.spec
    }

    pub fn system(&self) -> &Arc<BlockSystem> {
        &self.system
    }

    /// Block-local pattern table of block `l`.
    pub fn table(&self, l: u32) -> Result<&PatternTable> {
        self.system.block(l)?;
        Ok(&self.tables[l as usize - 1])
    }

    /// Occurrences anywhere in the ground set, as site indices.
    pub fn anywhere(&self) -> &PatternTable {
        &self.anywhere
    }

    /// `rho_l(f) in Theta_l`.
    pub fn detect(&self, l: u32, f: &Labeling) -> Result<bool> {
        let block = self.system.block(l)?;
        Ok(self.in_theta(l, &block.coordinates(f)))
    }

    /// Whether the pattern occurs anywhere in a full labeling.
    pub fn detect_anywhere(&self, f: &Labeling) -> bool {
        self.anywhere.matches(|s| f.get(s))
    }

    /// Same as [`Instance::detect_anywhere`] on a dense residue vector indexed by site.
    pub fn detect_anywhere_dense(&self, residues: &[u32]) -> bool {
        self.anywhere.matches(|s| residues[s as usize])
    }

    /// The guaranteed lower bound on `|Theta_l| / n_l` (0 for blocks that
    /// cannot contain the pattern).
    pub fn density_lower_bound(&self, l: u32) -> Result<f64> {
        self.system.block(l)?;
        Ok(self.lower_bounds[l as usize - 1])
    }

    pub fn theta_density(&self, l: u32, mode: DensityMode) -> Result<f64> {
        match mode {
            DensityMode::LowerBound => self.density_lower_bound(l),
            DensityMode::Exact => {
                let block = self.system.block(l)?;
                let c = u64::from(self.system.modulus());
                let n = (0..block.len())
                    .try_fold(1u64, |acc, _| acc.checked_mul(c).filter(|&v| v <= DENSITY_ENUMERATION_CAP))
                    .ok_or_else(|| {
                        SieveError::capacity(
                            format!("density enumeration of block {l}"),
                            format!("{c}^{}", block.len()),
                            DENSITY_ENUMERATION_CAP,
                        )
                    })?;
                let table = &self.tables[l as usize - 1];
                let m = block.len();
                let hits = (0..n)
                    .into_par_iter()
                    .filter(|&i| {
                        let mut coords = vec![0u32; m];
                        let mut rest = i;
                        for v in coords.iter_mut() {
                            *v = (rest % c) as u32;
                            rest /= c;
                        }
                        table.matches(|p| coords[p as usize])
                    })
                    .count();
                Ok(hits as f64 / n as f64)
            }
        }
    }
}

impl BlockDetector for Instance {
    fn in_theta(&self, l: u32, coords: &[u32]) -> bool {
        self.tables[l as usize - 1].matches(|p| coords[p as usize])
    }
}

fn assemble(
    spec: InstanceSpec,
    system: BlockSystem,
    rule: MatchRule,
    global: Vec<Vec<u32>>,
    patterns: impl Fn(&Block) -> Vec<Vec<u32>>,
    lower_bound: impl Fn(&Block, usize) -> f64,
) -> Instance {
    let tables = system
        .blocks()
        .iter()
        .map(|b| {
            PatternTable {
                rule,
                patterns: patterns(b),
            }
            .localize(b)
        })
        .collect::<Vec<_>>();
    let lower_bounds = system
        .blocks()
        .iter()
        .zip(&tables)
        .map(|(b, t)| lower_bound(b, t.patterns.len()))
        .collect();
    Instance {
        spec,
        system: Arc::new(system),
        tables,
        anywhere: PatternTable { rule, patterns: global },
        lower_bounds,
    }
}

/// Vertex sets `I_1, ..., I_R`.
pub fn coloring_partition(r: u32, partition: &Partition) -> Result<Vec<Vec<u32>>> {
    Ok(match partition {
        Partition::Triples => (1..=r).map(|l| vec![3 * l - 2, 3 * l - 1, 3 * l]).collect(),
        Partition::Triangular => (1..=r)
            .map(|l| {
                let first = l * (l + 1) / 2;
                (first..=first + l).collect()
            })
            .collect(),
        Partition::Custom(sets) => {
            if sets.len() != r as usize {
                return Err(SieveError::Parameter(format!("{} vertex sets for R = {r}", sets.len())));
            }
            sets.clone()
        }
    })
}

pub fn make_coloring_instance(
    r: u32,
    c: u32,
    partition: &Partition,
    mode: InstanceMode,
    zero_is_color: bool,
) -> Result<Instance> {
    if r == 0 {
        return Err(SieveError::Parameter("R must be positive".into()));
    }
    if mode == InstanceMode::Strict && r < 3 {
        return Err(SieveError::Parameter(format!("R = {r} < 3; use permissive mode")));
    }
    if c < 3 {
        log::warn!("coloring instance with c = {c} < 3 is outside the theorem hypotheses");
    }
    let sets = coloring_partition(r, partition)?;
    let mut seen = BTreeSet::new();
    for (l, set) in sets.iter().enumerate() {
        let distinct: BTreeSet<u32> = set.iter().copied().collect();
        if distinct.len() != set.len() || distinct.contains(&0) {
            return Err(SieveError::Structural(format!(
                "vertex set {} must hold distinct positive vertices",
                l + 1
            )));
        }
        if mode == InstanceMode::Strict && set.len() < 3 {
            return Err(SieveError::Structural(format!(
                "vertex set {} has i = {} < 3; use permissive mode",
                l + 1,
                set.len()
            )));
        }
        if !seen.is_disjoint(&distinct) {
            return Err(SieveError::Structural(format!("vertex set {} overlaps an earlier one", l + 1)));
        }
        seen.extend(distinct);
    }
    let max_vertex = seen.iter().next_back().copied().unwrap_or(0);
    let t = max_vertex.max(3 * r + 1);
    let ground = Arc::new(GroundSet::complete_graph(t));
    let blocks = sets
        .iter()
        .enumerate()
        .map(|(l, set)| {
            let mut v = set.clone();
            v.sort_unstable();
            let edges: Vec<Site> = v
                .iter()
                .enumerate()
                .flat_map(|(x, &a)| v[x + 1..].iter().map(move |&b| Site::Edge(a, b)))
                .collect();
            Block::from_sites(l as u32 + 1, &edges, &ground)
        })
        .collect::<Result<Vec<_>>>()?;
    let system = BlockSystem::new(ground.clone(), c, blocks)?;
    let all = Block::new(0, 0..ground.len() as u32, &ground)?;
    let global = triangle_patterns(&all, &ground);
    let spec = InstanceSpec::Coloring {
        r,
        c,
        partition: partition.clone(),
        mode,
        zero_is_color,
    };
    let cf = f64::from(c);
    Ok(assemble(
        spec,
        system,
        MatchRule::Monochromatic {
            zero_counts: zero_is_color,
        },
        global,
        |b| triangle_patterns(b, &ground),
        |_, count| if count > 0 && zero_is_color { cf.powi(-2) } else { 0.0 },
    ))
}

/// Grid edges of the disc `D(0, m)`.
pub fn disc_edges(m: i32) -> BTreeSet<Site> {
    GroundSet::grid_window(m).sites().iter().copied().collect()
}

fn annulus(outer: i32, inner: i32) -> Vec<Site> {
    let inside = if inner > 0 { disc_edges(inner) } else { BTreeSet::new() };
    disc_edges(outer).difference(&inside).copied().collect()
}

pub fn make_grid_instance(r: u32, scale: &GridScale) -> Result<Instance> {
    if r == 0 {
        return Err(SieveError::Parameter("R must be positive".into()));
    }
    let r_i = i32::try_from(r).map_err(|_| SieveError::Parameter("R too large".into()))?;
    let site_blocks: Vec<Vec<Site>> = match scale {
        GridScale::Paper => (1..=r_i).map(|l| annulus(2 * l + 2, 2 * l)).collect(),
        GridScale::Reduced { radii } => {
            if radii.len() != r as usize + 1 {
                return Err(SieveError::Parameter(format!(
                    "reduced scale needs R + 1 = {} radii, got {}",
                    r + 1,
                    radii.len()
                )));
            }
            if radii[0] < 0 || radii.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SieveError::Structural("radii must be nonnegative and increasing".into()));
            }
            radii.windows(2).map(|w| annulus(w[1], w[0])).collect()
        }
        GridScale::Custom { blocks } => {
            if blocks.len() != r as usize {
                return Err(SieveError::Parameter(format!("{} custom blocks for R = {r}", blocks.len())));
            }
            blocks
                .iter()
                .map(|b| {
                    b.iter()
                        .map(|s| match s.parse::<Site>()? {
                            site @ Site::GridEdge(..) => Ok(site),
                            other => Err(SieveError::Structural(format!("{other} is not a grid edge"))),
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let radius = site_blocks
        .iter()
        .flatten()
        .map(|s| match s {
            Site::GridEdge(p, q) => p.iter().chain(q).map(|v| v.abs()).max().unwrap_or(0),
            _ => 0,
        })
        .max()
        .unwrap_or(1)
        .max(1);
    let ground = Arc::new(GroundSet::grid_window(radius));
    let blocks = site_blocks
        .iter()
        .enumerate()
        .map(|(l, sites)| Block::from_sites(l as u32 + 1, sites, &ground))
        .collect::<Result<Vec<_>>>()?;
    for b in &blocks {
        if square_patterns(b, &ground).is_empty() {
            return Err(SieveError::Structural(format!("block {} contains no unit square", b.label())));
        }
    }
    let system = BlockSystem::new(ground.clone(), 2, blocks)?;
    let all = Block::new(0, 0..ground.len() as u32, &ground)?;
    let global = square_patterns(&all, &ground);
    Ok(assemble(
        InstanceSpec::Grid {
            r,
            scale: scale.clone(),
        },
        system,
        MatchRule::AllPresent,
        global,
        |b| square_patterns(b, &ground),
        |_, _| 1.0 / 16.0,
    ))
}

pub fn make_ap_instance(s: u32, q: u32, c: u32, r: u32) -> Result<Instance> {
    if s == 0 {
        return Err(SieveError::Parameter("progression length s must be at least 1".into()));
    }
    if r <= s {
        return Err(SieveError::Parameter(format!("need R > s, got R = {r}, s = {s}")));
    }
    if q < r {
        return Err(SieveError::Structural(format!(
            "q = {q} < R = {r}: I_1 and I_{} share the cell {}, so the blocks overlap",
            1 + q,
            1 + q
        )));
    }
    if c < 3 {
        log::warn!("progression instance with c = {c} < 3 is outside the theorem hypotheses");
    }
    let t = r + q * (2 * s - 1);
    let ground = Arc::new(GroundSet::cells(t));
    let blocks = (1..=r)
        .map(|l| {
            let cells: Vec<Site> = (0..2 * s).map(|j| Site::Cell(l + q * j)).collect();
            Block::from_sites(l, &cells, &ground)
        })
        .collect::<Result<Vec<_>>>()?;
    let system = BlockSystem::new(ground.clone(), c, blocks)?;
    let global = system.blocks().iter().flat_map(|b| ap_patterns(b, s)).collect();
    let cf = f64::from(c);
    Ok(assemble(
        InstanceSpec::Ap { s, q, c, r },
        system,
        MatchRule::Monochromatic { zero_counts: true },
        global,
        |b| ap_patterns(b, s),
        |_, _| cf.powi(-(s as i32)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triples(r: u32, c: u32) -> Instance {
        make_coloring_instance(r, c, &Partition::Triples, InstanceMode::Strict, true).unwrap()
    }

    #[test]
    fn triples_have_27_states() {
        let inst = triples(3, 3);
        let bs = inst.system();
        assert_eq!(bs.blocks().len(), 3);
        for l in 1..=3 {
            assert_eq!(bs.block(l).unwrap().len(), 3);
            assert_eq!(bs.quotient_order(l).unwrap().to_u128(), Some(27));
        }
        assert_eq!(bs.ground().len(), 10 * 9 / 2);
    }

    #[test]
    fn triangular_partition_modes() {
        assert!(make_coloring_instance(3, 3, &Partition::Triangular, InstanceMode::Strict, true).is_err());
        let inst = make_coloring_instance(3, 3, &Partition::Triangular, InstanceMode::Permissive, true).unwrap();
        let sizes: Vec<usize> = inst.system().blocks().iter().map(Block::len).collect();
        assert_eq!(sizes, vec![1, 3, 6]);
        assert!(inst.table(1).unwrap().patterns.is_empty());
        assert_eq!(inst.density_lower_bound(1).unwrap(), 0.0);
        let zero = inst.system().zero();
        assert!(!inst.detect(1, &zero).unwrap());
        assert!(inst.detect(2, &zero).unwrap());
    }

    #[test]
    fn overlapping_custom_partition_is_rejected() {
        let p = Partition::Custom(vec![vec![1, 2, 3], vec![3, 4, 5], vec![6, 7, 8]]);
        assert!(make_coloring_instance(3, 3, &p, InstanceMode::Strict, true).is_err());
        assert!(make_coloring_instance(2, 3, &Partition::Triples, InstanceMode::Strict, true).is_err());
    }

    #[test]
    fn triangle_detection() {
        let inst = triples(3, 3);
        let bs = inst.system();
        let g = bs.ground();
        let block = bs.block(1).unwrap();
        assert!(detect_mono_triangle(&bs.zero(), block, g));
        let rainbow = g
            .labeling_by_site(3, [(Site::Edge(1, 2), 0), (Site::Edge(1, 3), 1), (Site::Edge(2, 3), 2)])
            .unwrap();
        assert!(!detect_mono_triangle(&rainbow, block, g));
        assert!(!inst.detect(1, &rainbow).unwrap());
        assert!(inst.detect(2, &rainbow).unwrap());
    }

    #[test]
    fn coloring_density_is_one_ninth() {
        let inst = triples(3, 3);
        let d = inst.theta_density(1, DensityMode::Exact).unwrap();
        assert!((d - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(inst.theta_density(1, DensityMode::LowerBound).unwrap(), 1.0 / 9.0);
    }

    #[test]
    fn uncolored_zero_mode() {
        let inst = make_coloring_instance(3, 3, &Partition::Triples, InstanceMode::Strict, false).unwrap();
        assert!(!inst.detect(1, &inst.system().zero()).unwrap());
        let d = inst.theta_density(1, DensityMode::Exact).unwrap();
        assert!((d - 2.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn grid_counts() {
        for l in 1..=10 {
            assert_eq!(disc_edges(l).len() as i32, 4 * l * (2 * l + 1));
        }
        let inst = make_grid_instance(3, &GridScale::Paper).unwrap();
        for l in 1..=3u32 {
            assert_eq!(inst.system().block(l).unwrap().len() as u32, 64 * l + 40);
        }
    }

    #[test]
    fn grid_outer_square_is_detected() {
        let inst = make_grid_instance(2, &GridScale::Paper).unwrap();
        let bs = inst.system();
        let g = bs.ground();
        for l in 1..=2i32 {
            let p = [2 * l + 1, 2 * l + 1];
            let square = unit_square(g, p).unwrap();
            let f = g.labeling(2, square.iter().map(|&e| (e, 1))).unwrap();
            assert!(inst.detect(l as u32, &f).unwrap());
            assert!(detect_four_cycle(&f, bs.block(l as u32).unwrap(), g));
            assert!(inst.detect_anywhere(&f));
        }
        assert!(!inst.detect(1, &bs.zero()).unwrap());
        assert!(!inst.detect_anywhere(&bs.zero()));
    }

    #[test]
    fn single_square_block_density() {
        let sq = ["g(0;0)(1;0)", "g(0;1)(1;1)", "g(0;0)(0;1)", "g(1;0)(1;1)"];
        let scale = GridScale::Custom {
            blocks: vec![sq.iter().map(|s| s.to_string()).collect()],
        };
        let inst = make_grid_instance(1, &scale).unwrap();
        assert_eq!(inst.theta_density(1, DensityMode::Exact).unwrap(), 1.0 / 16.0);
        let bad = GridScale::Custom {
            blocks: vec![vec![sq[0].to_string(), sq[1].to_string()]],
        };
        assert!(make_grid_instance(1, &bad).is_err());
    }

    #[test]
    fn reduced_grid_blocks() {
        let inst = make_grid_instance(1, &GridScale::Reduced { radii: vec![0, 1] }).unwrap();
        assert_eq!(inst.system().block(1).unwrap().len(), 12);
        assert!(make_grid_instance(1, &GridScale::Reduced { radii: vec![1, 1] }).is_err());
    }

    #[test]
    fn ap_blocks() {
        let inst = make_ap_instance(3, 5, 3, 5).unwrap();
        let bs = inst.system();
        assert_eq!(bs.ground().len(), 30);
        let mut cover = BTreeSet::new();
        for l in 1..=5 {
            let b = bs.block(l).unwrap();
            let cells: Vec<Site> = b.sites().iter().map(|&s| bs.ground().site(s)).collect();
            assert_eq!(cells, (0..6).map(|j| Site::Cell(l + 5 * j)).collect::<Vec<_>>());
            cover.extend(b.sites().iter().copied());
        }
        assert_eq!(cover.len(), 30);
        assert_eq!(bs.quotient_order(1).unwrap().to_u128(), Some(729));
        assert!(make_ap_instance(3, 2, 3, 5).is_err());
    }

    #[test]
    fn ap_detection() {
        let inst = make_ap_instance(3, 5, 6, 5).unwrap();
        let bs = inst.system();
        let g = bs.ground();
        let block = bs.block(1).unwrap();
        let mono = g
            .labeling_by_site(6, (0..6).map(|j| (Site::Cell(1 + 5 * j), if j < 3 { 4 } else { j })))
            .unwrap();
        assert!(detect_mono_ap(&mono, block, 3));
        let injective = g.labeling_by_site(6, (0..6).map(|j| (Site::Cell(1 + 5 * j), j))).unwrap();
        assert!(!detect_mono_ap(&injective, block, 3));
        assert!(!inst.detect(1, &injective).unwrap());
    }

    #[test]
    fn ap_density_exceeds_bound() {
        let inst = make_ap_instance(2, 3, 3, 3).unwrap();
        let exact = inst.theta_density(1, DensityMode::Exact).unwrap();
        assert!(exact >= 1.0 / 9.0);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = InstanceSpec::Coloring {
            r: 4,
            c: 3,
            partition: Partition::Custom(vec![vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 9], vec![10, 11, 12]]),
            mode: InstanceMode::Strict,
            zero_is_color: true,
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<InstanceSpec>(&text).unwrap(), spec);
        let grid: InstanceSpec = serde_json::from_str(r#"{"kind":"grid","r":2,"scale":"paper"}"#).unwrap();
        assert_eq!(Instance::build(&grid).unwrap().system().blocks().len(), 2);
    }
}
