use cayley_sieve::instances::{
    DensityMode, GridScale, Instance, InstanceMode, InstanceSpec, Partition,
};
use cayley_sieve::labeling::{Labeling, Site};
use proptest::prelude::*;

fn coloring(r: u32, c: u32, partition: Partition, zero_is_color: bool) -> Instance {
    Instance::build(&InstanceSpec::Coloring {
        r,
        c,
        partition,
        mode: InstanceMode::Permissive,
        zero_is_color,
    })
    .unwrap()
}

fn random_labeling(inst: &Instance, values: &[u32]) -> Labeling {
    let bs = inst.system();
    let c = bs.modulus();
    bs.ground()
        .labeling(c, values[..bs.ground().len()].iter().enumerate().map(|(i, &v)| (i as u32, v % c)))
        .unwrap()
}

fn find(parent: &mut [usize], x: usize) -> usize {
    if parent[x] != x {
        let root = find(parent, parent[x]);
        parent[x] = root;
    }
    parent[x]
}

/// Fraction of `c`-colorings of `K_n` with a monochromatic triangle, by
/// inclusion-exclusion over sets of triangles forced to be monochromatic.
fn mono_triangle_fraction(n: usize, c: u32) -> f64 {
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let id = |a: usize, b: usize| edges.iter().position(|&e| e == (a.min(b), a.max(b))).unwrap();
    let mut triangles = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for d in b + 1..n {
                triangles.push([id(a, b), id(a, d), id(b, d)]);
            }
        }
    }
    let mut union = 0i64;
    for mask in 1u32..(1 << triangles.len()) {
        let mut parent: Vec<usize> = (0..edges.len()).collect();
        for (t, tri) in triangles.iter().enumerate() {
            if mask >> t & 1 == 1 {
                let r0 = find(&mut parent, tri[0]);
                for &e in &tri[1..] {
                    let re = find(&mut parent, e);
                    parent[re] = r0;
                }
            }
        }
        let comps = (0..edges.len()).filter(|&e| find(&mut parent, e) == e).count();
        let term = i64::from(c).pow(comps as u32);
        union += if mask.count_ones() % 2 == 1 { term } else { -term };
    }
    union as f64 / f64::from(c).powi(edges.len() as i32)
}

#[test]
fn four_vertex_block_density_matches_inclusion_exclusion() {
    for c in [2, 3] {
        let inst = coloring(3, c, Partition::Triangular, true);
        assert_eq!(inst.system().block(3).unwrap().len(), 6);
        let exact = inst.theta_density(3, DensityMode::Exact).unwrap();
        let oracle = mono_triangle_fraction(4, c);
        assert!((exact - oracle).abs() < 1e-12, "c = {c}: {exact} vs {oracle}");
        assert!(exact >= inst.theta_density(3, DensityMode::LowerBound).unwrap());
    }
}

#[test]
fn triple_block_densities() {
    for c in [3u32, 4, 5] {
        let with_zero = coloring(3, c, Partition::Triples, true);
        let without = coloring(3, c, Partition::Triples, false);
        let cf = f64::from(c);
        for l in 1..=3 {
            let a = with_zero.theta_density(l, DensityMode::Exact).unwrap();
            let b = without.theta_density(l, DensityMode::Exact).unwrap();
            assert!((a - cf.powi(-2)).abs() < 1e-15);
            assert!((b - (cf - 1.0) / cf.powi(3)).abs() < 1e-15);
            assert!(a >= with_zero.density_lower_bound(l).unwrap());
        }
    }
}

/// Two unit squares sharing the edge x = 1.
fn domino() -> InstanceSpec {
    let edges = [
        ([0, 0], [1, 0]),
        ([1, 0], [2, 0]),
        ([0, 1], [1, 1]),
        ([1, 1], [2, 1]),
        ([0, 0], [0, 1]),
        ([1, 0], [1, 1]),
        ([2, 0], [2, 1]),
    ];
    InstanceSpec::Grid {
        r: 1,
        scale: GridScale::Custom {
            blocks: vec![edges.iter().map(|&(p, q)| Site::grid_edge(p, q).to_string()).collect()],
        },
    }
}

#[test]
fn domino_density_by_inclusion_exclusion() {
    let inst = Instance::build(&domino()).unwrap();
    let exact = inst.theta_density(1, DensityMode::Exact).unwrap();
    assert_eq!(exact, 2.0 / 16.0 - 1.0 / 128.0);
}

#[test]
fn exact_densities_dominate_lower_bounds() {
    let specs = [
        InstanceSpec::Ap { s: 2, q: 4, c: 3, r: 4 },
        InstanceSpec::Ap { s: 3, q: 5, c: 3, r: 5 },
        InstanceSpec::Grid {
            r: 1,
            scale: GridScale::Reduced { radii: vec![0, 1] },
        },
        domino(),
    ];
    for spec in &specs {
        let inst = Instance::build(spec).unwrap();
        for l in 1..=inst.system().blocks().len() as u32 {
            let exact = inst.theta_density(l, DensityMode::Exact).unwrap();
            let lower = inst.density_lower_bound(l).unwrap();
            assert!(exact >= lower, "{spec:?} block {l}: {exact} < {lower}");
        }
    }
}

#[test]
fn paper_grid_blocks_and_square_counts() {
    let inst = Instance::build(&InstanceSpec::Grid { r: 10, scale: GridScale::Paper }).unwrap();
    let bs = inst.system();
    let ground = bs.ground();
    for l in 1..=10u32 {
        let block = bs.block(l).unwrap();
        assert_eq!(block.len() as u32, 64 * l + 40);
        let m = 2 * l as i32 + 2;
        let inside = |s: Site| ground.index_of(&s).is_some_and(|i| block.contains(i));
        let mut squares = 0;
        for x in -m..m {
            for y in -m..m {
                let sides = [
                    Site::grid_edge([x, y], [x + 1, y]),
                    Site::grid_edge([x, y + 1], [x + 1, y + 1]),
                    Site::grid_edge([x, y], [x, y + 1]),
                    Site::grid_edge([x + 1, y], [x + 1, y + 1]),
                ];
                if sides.into_iter().all(inside) {
                    squares += 1;
                }
            }
        }
        assert_eq!(squares, 16 * (l as usize + 1));
        assert_eq!(inst.table(l).unwrap().patterns.len(), squares);
    }
}

#[test]
fn blocks_are_pairwise_disjoint() {
    let specs = [
        InstanceSpec::Coloring {
            r: 6,
            c: 3,
            partition: Partition::Triangular,
            mode: InstanceMode::Permissive,
            zero_is_color: true,
        },
        InstanceSpec::Grid { r: 5, scale: GridScale::Paper },
        InstanceSpec::Ap { s: 3, q: 7, c: 3, r: 7 },
    ];
    for spec in &specs {
        let inst = Instance::build(spec).unwrap();
        let blocks = inst.system().blocks();
        for (i, a) in blocks.iter().enumerate() {
            for b in &blocks[i + 1..] {
                assert!(a.sites().iter().all(|s| !b.contains(*s)), "{spec:?}");
            }
        }
    }
}

#[test]
fn overlapping_progressions_are_rejected() {
    assert!(Instance::build(&InstanceSpec::Ap { s: 2, q: 3, c: 3, r: 4 }).is_err());
    assert!(Instance::build(&InstanceSpec::Ap { s: 4, q: 9, c: 3, r: 4 }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn detection_ignores_other_blocks(
        values in prop::collection::vec(0u32..3, 91),
        noise in prop::collection::vec(0u32..3, 91),
        l in 1u32..=4,
    ) {
        let inst = coloring(4, 3, Partition::Triples, true);
        let f = random_labeling(&inst, &values);
        let block = inst.system().block(l).unwrap();
        let mixed: Vec<u32> = values
            .iter()
            .zip(&noise)
            .enumerate()
            .map(|(i, (&v, &n))| if block.contains(i as u32) { v } else { n })
            .collect();
        let g = random_labeling(&inst, &mixed);
        prop_assert_eq!(inst.detect(l, &f).unwrap(), inst.detect(l, &g).unwrap());
        prop_assert_eq!(inst.detect(l, &f).unwrap(), inst.detect(l, &f.restrict(block)).unwrap());
    }

    #[test]
    fn progression_detection_matches_brute_force(
        values in prop::collection::vec(0u32..3, 64),
        s in 2u32..=3,
    ) {
        let r = s + 2;
        let q = r + 1;
        let inst = Instance::build(&InstanceSpec::Ap { s, q, c: 3, r }).unwrap();
        let bs = inst.system();
        let ground = bs.ground();
        let f = random_labeling(&inst, &values);
        for l in 1..=r {
            let block = bs.block(l).unwrap();
            let cells: Vec<(u32, u32)> = block
                .sites()
                .iter()
                .map(|&i| match ground.site(i) {
                    Site::Cell(x) => (x, f.get(i)),
                    other => panic!("unexpected site {other}"),
                })
                .collect();
            let mut brute = false;
            for (a, &(x0, v0)) in cells.iter().enumerate() {
                for &(x1, _) in &cells[a + 1..] {
                    let d = x1 - x0;
                    let progression: Option<Vec<u32>> = (0..s)
                        .map(|j| cells.iter().find(|&&(x, _)| x == x0 + j * d).map(|&(_, v)| v))
                        .collect();
                    if progression.is_some_and(|p| p.iter().all(|&v| v == v0)) {
                        brute = true;
                    }
                }
            }
            prop_assert_eq!(inst.detect(l, &f).unwrap(), brute);
        }
    }

    #[test]
    fn block_detection_implies_global_detection(values in prop::collection::vec(0u32..3, 91)) {
        let inst = coloring(4, 3, Partition::Triples, true);
        let f = random_labeling(&inst, &values);
        let any_block = (1..=4).any(|l| inst.detect(l, &f).unwrap());
        if any_block {
            prop_assert!(inst.detect_anywhere(&f));
        }
        let dense: Vec<u32> = (0..inst.system().ground().len() as u32).map(|i| f.get(i)).collect();
        prop_assert_eq!(inst.detect_anywhere(&f), inst.detect_anywhere_dense(&dense));
    }
}
