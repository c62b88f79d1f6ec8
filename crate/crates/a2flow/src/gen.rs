//! Construction of guaranteed-valid desk-scale flow categories and
//! controlled invalid mutants.
//!
//! Every family populates its 0-dimensional moduli from algebraic structure
//! constants and then pairs the resulting fiber-product classes into
//! 1-dimensional components. Each class is even precisely because the
//! defining identity holds mod 2 (a square-zero differential, an
//! associative product, the strict 2-category axioms), and constructors
//! reject odd classes rather than repair them. Matchings inside a class are
//! lexicographic; the extracted operations and all checks only see
//! parities, so they are matching-independent.

use crate::flowcat::{
    fiber_pairs, EdgeRec, Endpoint, FlowCat2, GenId, PointRec, ShapeMax, TwoMorSig,
};
use crate::novikov::{Energy, EnergyCap};
use crate::onecat::{MorId, OneCat};
use crate::shapes::{glue_evals, Collection, EvalGrid};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GenError {
    NotSquareZero,
    NotAssociative(String),
    AxiomViolated(String),
    OddClass(String),
    NoEdges,
}

impl fmt::Display for GenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenError::NotSquareZero => write!(f, "matrix does not square to zero mod 2"),
            GenError::NotAssociative(m) => write!(f, "product table not associative: {m}"),
            GenError::AxiomViolated(m) => write!(f, "strict 2-category axiom fails: {m}"),
            GenError::OddClass(m) => write!(f, "odd boundary class, cannot pair: {m}"),
            GenError::NoEdges => write!(f, "category has no edges"),
        }
    }
}

impl std::error::Error for GenError {}

/// Family tag with parameters, the provenance record of a generated
/// category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GenSpec {
    Trivial,
    SquareZero { dim: usize, seed: u64 },
    AssocZ2,
    AssocIdempotent,
    Strict2Cat,
}

impl fmt::Display for GenSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenSpec::Trivial => write!(f, "trivial"),
            GenSpec::SquareZero { dim, seed } => write!(f, "square_zero dim={dim} seed={seed}"),
            GenSpec::AssocZ2 => write!(f, "assoc_z2"),
            GenSpec::AssocIdempotent => write!(f, "assoc_idempotent"),
            GenSpec::Strict2Cat => write!(f, "strict_2cat"),
        }
    }
}

pub fn generate(spec: &GenSpec, cap: EnergyCap, epsilon: Energy) -> Result<FlowCat2, GenError> {
    match spec {
        GenSpec::Trivial => Ok(gen_trivial(cap, epsilon)),
        GenSpec::SquareZero { dim, seed } => {
            let n = random_square_zero_matrix(*dim, *seed);
            let names: Vec<String> = (0..*dim).map(|i| format!("u{i}")).collect();
            let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
            gen_square_zero(&refs, &n, cap, epsilon)
        }
        GenSpec::AssocZ2 => {
            // group algebra of Z/2: basis e, g with g*g = e
            let table = vec![
                vec![vec![true, false], vec![false, true]],
                vec![vec![false, true], vec![true, false]],
            ];
            gen_assoc_algebra(&["e", "g"], &table, cap, epsilon)
        }
        GenSpec::AssocIdempotent => gen_assoc_algebra(&["x"], &[vec![vec![true]]], cap, epsilon),
        GenSpec::Strict2Cat => gen_strict_2cat(&z2_whiskered_data(), cap, epsilon),
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A random matrix over the two-element field with square zero: a block
/// upper-triangular seed conjugated by random elementary matrices.
pub fn random_square_zero_matrix(dim: usize, seed: u64) -> Vec<Vec<bool>> {
    let mut state = seed ^ 0xa2f10f;
    let w = dim / 2;
    let mut n = vec![vec![false; dim]; dim];
    for row in 0..w {
        for col in w..dim {
            n[row][col] = splitmix64(&mut state) % 2 == 1;
        }
    }
    // conjugate by E = I + e_{ij}; over F2, E is its own inverse
    for _ in 0..4 * dim {
        let i = (splitmix64(&mut state) as usize) % dim;
        let j = (splitmix64(&mut state) as usize) % dim;
        if i == j {
            continue;
        }
        // N <- E N E with E = I + e_{ij}: row i += row j, then col j += col i
        for c in 0..dim {
            let v = n[j][c];
            n[i][c] ^= v;
        }
        for r in 0..dim {
            let v = n[r][i];
            n[r][j] ^= v;
        }
    }
    n
}

fn matrix_square_is_zero(n: &[Vec<bool>]) -> bool {
    let d = n.len();
    for i in 0..d {
        for j in 0..d {
            let mut acc = false;
            for k in 0..d {
                acc ^= n[i][k] && n[k][j];
            }
            if acc {
                return false;
            }
        }
    }
    true
}

/// Groups all fiber pairs within the verification range into classes and
/// pairs each class lexicographically into edges. Fails on an odd class.
fn pair_all_edges(fc: &mut FlowCat2) -> Result<(), GenError> {
    let check_cap = fc.check_cap();
    let mut new_edges = Vec::new();
    for l in crate::flowcat::pairing_collections(fc) {
        let mut classes: BTreeMap<(EvalGrid<GenId>, Energy), Vec<Endpoint>> = BTreeMap::new();
        for pair in fiber_pairs(fc, &l, check_cap) {
            let left = &fc.points[&pair.left];
            let right = &fc.points[&pair.right];
            let glued = glue_evals(&pair.desc, &left.evals, &right.evals)
                .expect("fiber pairs glue by construction");
            classes
                .entry((glued, pair.energy))
                .or_default()
                .push(Endpoint {
                    desc: pair.desc,
                    left: pair.left,
                    right: pair.right,
                });
        }
        for ((evals, energy), mut ends) in classes {
            if ends.len() % 2 != 0 {
                return Err(GenError::OddClass(format!(
                    "collection {} class at energy {} has {} boundary points",
                    crate::flowcat::collection_text(&fc.cat, &l),
                    energy,
                    ends.len()
                )));
            }
            ends.sort();
            for chunk in ends.chunks(2) {
                new_edges.push(EdgeRec {
                    collection: l.clone(),
                    evals: evals.clone(),
                    energy,
                    ends: chunk.to_vec(),
                });
            }
        }
    }
    for e in new_edges {
        fc.add_edge(e);
    }
    Ok(())
}

/// One object, its identity 1-morphism, one 2-morphism generator, and no
/// moduli at all.
pub fn gen_trivial(cap: EnergyCap, epsilon: Energy) -> FlowCat2 {
    let cat = OneCat::single_object();
    let mut sig = TwoMorSig::new();
    let one = cat.mor_by_name("1").unwrap();
    sig.add_gen(&cat, "u", one, one);
    FlowCat2::new(
        cat,
        sig,
        ShapeMax {
            r_max: 1,
            a_max: 1,
            mass_max: vec![3],
        },
        cap,
        epsilon,
    )
}

/// Realizes a square-zero matrix as the differential of a flow category:
/// one point per nonzero entry at energy 1 in the one-slot moduli, then
/// edges pairing the even composition classes at energy 2.
pub fn gen_square_zero(
    basis: &[&str],
    n_matrix: &[Vec<bool>],
    cap: EnergyCap,
    epsilon: Energy,
) -> Result<FlowCat2, GenError> {
    if !matrix_square_is_zero(n_matrix) {
        return Err(GenError::NotSquareZero);
    }
    let cat = OneCat::single_object();
    let one = cat.mor_by_name("1").unwrap();
    let mut sig = TwoMorSig::new();
    let gens: Vec<GenId> = basis
        .iter()
        .map(|name| sig.add_gen(&cat, name, one, one))
        .collect();
    let mut fc = FlowCat2::new(
        cat,
        sig,
        ShapeMax {
            r_max: 1,
            a_max: 1,
            mass_max: vec![3],
        },
        cap,
        epsilon,
    );
    let x = fc.cat.object_by_name("X").unwrap();
    let coll = Collection::new(&fc.cat, vec![x, x], vec![vec![vec![one, one]]]).unwrap();
    for (row, out_gen) in gens.iter().enumerate() {
        for (col, in_gen) in gens.iter().enumerate() {
            if n_matrix[row][col] {
                fc.add_point(PointRec {
                    collection: coll.clone(),
                    evals: EvalGrid {
                        alpha: vec![vec![vec![*in_gen]]],
                        beta: vec![*out_gen],
                    },
                    energy: Energy::ONE,
                    stratum: Some(crate::wpoly::top_stratum(&coll.shape())),
                });
            }
        }
    }
    pair_all_edges(&mut fc)?;
    Ok(fc)
}

/// Realizes an associative product table as a binary operation at energy 1;
/// edges pair the two association orders at energy 2.
pub fn gen_assoc_algebra(
    basis: &[&str],
    table: &[Vec<Vec<bool>>],
    cap: EnergyCap,
    epsilon: Energy,
) -> Result<FlowCat2, GenError> {
    let d = basis.len();
    // associativity of the structure constants mod 2
    let coeff = |x: usize, y: usize, z: usize| table[x][y][z];
    for x in 0..d {
        for y in 0..d {
            for z in 0..d {
                for w in 0..d {
                    let mut lhs = false;
                    let mut rhs = false;
                    for v in 0..d {
                        lhs ^= coeff(x, y, v) && coeff(v, z, w);
                        rhs ^= coeff(y, z, v) && coeff(x, v, w);
                    }
                    if lhs != rhs {
                        return Err(GenError::NotAssociative(format!(
                            "({} {} {})",
                            basis[x], basis[y], basis[z]
                        )));
                    }
                }
            }
        }
    }
    let cat = OneCat::single_object();
    let one = cat.mor_by_name("1").unwrap();
    let mut sig = TwoMorSig::new();
    let gens: Vec<GenId> = basis
        .iter()
        .map(|name| sig.add_gen(&cat, name, one, one))
        .collect();
    let mut fc = FlowCat2::new(
        cat,
        sig,
        ShapeMax {
            r_max: 1,
            a_max: 1,
            mass_max: vec![3],
        },
        cap,
        epsilon,
    );
    let x = fc.cat.object_by_name("X").unwrap();
    let coll = Collection::new(&fc.cat, vec![x, x], vec![vec![vec![one, one, one]]]).unwrap();
    for xi in 0..d {
        for yi in 0..d {
            for (zi, gz) in gens.iter().enumerate() {
                if table[xi][yi][zi] {
                    fc.add_point(PointRec {
                        collection: coll.clone(),
                        evals: EvalGrid {
                            alpha: vec![vec![vec![gens[xi], gens[yi]]]],
                            beta: vec![*gz],
                        },
                        energy: Energy::ONE,
                        stratum: Some(crate::wpoly::top_stratum(&coll.shape())),
                    });
                }
            }
        }
    }
    pair_all_edges(&mut fc)?;
    Ok(fc)
}

/// Explicit strict 2-category data over the two-element field: finite
/// 2-cell bases with vertical and horizontal composition given on basis
/// elements as sums of basis elements.
#[derive(Clone, Debug)]
pub struct Strict2Data {
    pub cat: OneCat,
    /// (name, source 1-morphism, target 1-morphism)
    pub gens: Vec<(String, String, String)>,
    /// identity 2-cell per 1-morphism name
    pub units: BTreeMap<String, String>,
    /// vertical composite on basis pairs (first, then), as basis sums
    pub vertical: BTreeMap<(String, String), Vec<String>>,
    /// horizontal composite on composable basis pairs, as basis sums
    pub horizontal: BTreeMap<(String, String), Vec<String>>,
}

/// Two objects joined by one 1-morphism; each endomorphism 2-cell space is
/// the group algebra of Z/2, whiskering acts through the evident
/// isomorphisms.
pub fn z2_whiskered_data() -> Strict2Data {
    let mut cat = OneCat::new();
    let p = cat.add_object("P").unwrap();
    let q = cat.add_object("Q").unwrap();
    let idp = cat.add_mor("idP", p, p).unwrap();
    let idq = cat.add_mor("idQ", q, q).unwrap();
    let f = cat.add_mor("f", p, q).unwrap();
    cat.set_identity(p, idp);
    cat.set_identity(q, idq);
    cat.set_compose(idp, idp, idp);
    cat.set_compose(idq, idq, idq);
    cat.set_compose(idp, f, f);
    cat.set_compose(f, idq, f);

    let gens = vec![
        ("oneP".into(), "idP".into(), "idP".into()),
        ("aP".into(), "idP".into(), "idP".into()),
        ("onef".into(), "f".into(), "f".into()),
        ("cf".into(), "f".into(), "f".into()),
        ("oneQ".into(), "idQ".into(), "idQ".into()),
        ("bQ".into(), "idQ".into(), "idQ".into()),
    ];
    let mut units = BTreeMap::new();
    units.insert("idP".into(), "oneP".into());
    units.insert("f".into(), "onef".into());
    units.insert("idQ".into(), "oneQ".into());

    // each space is F2[Z/2]: unit and involution
    let mut vertical = BTreeMap::new();
    let spaces: Vec<(&str, &str)> = vec![("oneP", "aP"), ("onef", "cf"), ("oneQ", "bQ")];
    for (unit, inv) in &spaces {
        let u = unit.to_string();
        let v = inv.to_string();
        vertical.insert((u.clone(), u.clone()), vec![u.clone()]);
        vertical.insert((u.clone(), v.clone()), vec![v.clone()]);
        vertical.insert((v.clone(), u.clone()), vec![v.clone()]);
        vertical.insert((v.clone(), v.clone()), vec![u.clone()]);
    }

    // horizontal composition through the isomorphisms aP -> cf <- bQ
    let mut horizontal = BTreeMap::new();
    fn phi(x: &str) -> &'static str {
        match x {
            "oneP" | "oneQ" => "onef",
            "aP" | "bQ" => "cf",
            other => unreachable!("{other} has no whisker image"),
        }
    }
    fn mul_f(x: &str, y: &str) -> &'static str {
        match (x, y) {
            ("onef", "onef") | ("cf", "cf") => "onef",
            ("onef", "cf") | ("cf", "onef") => "cf",
            _ => unreachable!(),
        }
    }
    for x in ["oneP", "aP"] {
        for y in ["oneP", "aP"] {
            let z = match (x, y) {
                ("aP", "aP") => "oneP",
                ("aP", _) | (_, "aP") => "aP",
                _ => "oneP",
            };
            horizontal.insert((x.into(), y.into()), vec![z.into()]);
        }
        for y in ["onef", "cf"] {
            horizontal.insert((x.into(), y.into()), vec![mul_f(phi(x), y).into()]);
        }
    }
    for x in ["onef", "cf"] {
        for y in ["oneQ", "bQ"] {
            horizontal.insert((x.into(), y.into()), vec![mul_f(x, phi(y)).into()]);
        }
    }
    for x in ["oneQ", "bQ"] {
        for y in ["oneQ", "bQ"] {
            let z = match (x, y) {
                ("bQ", "bQ") => "oneQ",
                ("bQ", _) | (_, "bQ") => "bQ",
                _ => "oneQ",
            };
            horizontal.insert((x.into(), y.into()), vec![z.into()]);
        }
    }
    Strict2Data {
        cat,
        gens,
        units,
        vertical,
        horizontal,
    }
}

/// The terminal strict 2-category: one object, one 1-morphism, one 2-cell.
pub fn terminal_2cat_data() -> Strict2Data {
    let cat = OneCat::single_object();
    let mut units = BTreeMap::new();
    units.insert("1".into(), "e".into());
    let mut vertical = BTreeMap::new();
    vertical.insert(("e".into(), "e".into()), vec!["e".into()]);
    let mut horizontal = BTreeMap::new();
    horizontal.insert(("e".into(), "e".into()), vec!["e".into()]);
    Strict2Data {
        cat,
        gens: vec![("e".into(), "1".into(), "1".into())],
        units,
        vertical,
        horizontal,
    }
}

struct Strict2 {
    sig: TwoMorSig,
    unit_of: BTreeMap<MorId, GenId>,
    vertical: BTreeMap<(GenId, GenId), Vec<GenId>>,
    horizontal: BTreeMap<(GenId, GenId), Vec<GenId>>,
}

impl Strict2 {
    fn v(&self, x: GenId, y: GenId) -> &[GenId] {
        self.vertical
            .get(&(x, y))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    fn h(&self, x: GenId, y: GenId) -> &[GenId] {
        self.horizontal
            .get(&(x, y))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// mod-2 sum of a linear map applied to a basis sum
    fn map_sum(&self, xs: &[GenId], f: impl Fn(GenId) -> Vec<GenId>) -> Vec<GenId> {
        let mut counts: BTreeMap<GenId, usize> = BTreeMap::new();
        for &x in xs {
            for y in f(x) {
                *counts.entry(y).or_default() += 1;
            }
        }
        counts
            .into_iter()
            .filter(|(_, c)| c % 2 == 1)
            .map(|(g, _)| g)
            .collect()
    }
}

fn build_strict2(data: &Strict2Data) -> Result<(OneCat, Strict2), GenError> {
    let cat = data.cat.clone();
    cat.validate()
        .map_err(|e| GenError::AxiomViolated(e.to_string()))?;
    let mut sig = TwoMorSig::new();
    for (name, src, tgt) in &data.gens {
        let s = cat
            .mor_by_name(src)
            .ok_or_else(|| GenError::AxiomViolated(format!("unknown 1-morphism {src}")))?;
        let t = cat
            .mor_by_name(tgt)
            .ok_or_else(|| GenError::AxiomViolated(format!("unknown 1-morphism {tgt}")))?;
        sig.add_gen(&cat, name, s, t);
    }
    let gid = |name: &str| -> Result<GenId, GenError> {
        sig.by_name(name)
            .ok_or_else(|| GenError::AxiomViolated(format!("unknown 2-cell {name}")))
    };
    let mut unit_of = BTreeMap::new();
    for (mor, unit) in &data.units {
        let m = cat
            .mor_by_name(mor)
            .ok_or_else(|| GenError::AxiomViolated(format!("unknown 1-morphism {mor}")))?;
        unit_of.insert(m, gid(unit)?);
    }
    let mut vertical = BTreeMap::new();
    for ((x, y), sum) in &data.vertical {
        let sum: Result<Vec<GenId>, GenError> = sum.iter().map(|s| gid(s)).collect();
        vertical.insert((gid(x)?, gid(y)?), sum?);
    }
    let mut horizontal = BTreeMap::new();
    for ((x, y), sum) in &data.horizontal {
        let sum: Result<Vec<GenId>, GenError> = sum.iter().map(|s| gid(s)).collect();
        horizontal.insert((gid(x)?, gid(y)?), sum?);
    }
    let s2 = Strict2 {
        sig,
        unit_of,
        vertical,
        horizontal,
    };

    // axioms, exhaustively on basis elements
    let gens: Vec<GenId> = s2.sig.gen_ids().collect();
    let composable_v = |x: GenId, y: GenId| s2.sig.tgt(x) == s2.sig.src(y);
    for &x in &gens {
        // vertical units
        let ux = s2.unit_of[&s2.sig.src(x)];
        let tx = s2.unit_of[&s2.sig.tgt(x)];
        if s2.v(ux, x) != [x] || s2.v(x, tx) != [x] {
            return Err(GenError::AxiomViolated(format!(
                "vertical unit at {}",
                s2.sig.name(x)
            )));
        }
        for &y in &gens {
            if !composable_v(x, y) {
                continue;
            }
            for &z in &gens {
                if !composable_v(y, z) {
                    continue;
                }
                let lhs = s2.map_sum(s2.v(x, y), |w| s2.v(w, z).to_vec());
                let rhs = s2.map_sum(s2.v(y, z), |w| s2.v(x, w).to_vec());
                if lhs != rhs {
                    return Err(GenError::AxiomViolated(format!(
                        "vertical associativity at ({}, {}, {})",
                        s2.sig.name(x),
                        s2.sig.name(y),
                        s2.sig.name(z)
                    )));
                }
            }
        }
    }
    let composable_h = |x: GenId, y: GenId| cat.tgt(s2.sig.src(x)) == cat.src(s2.sig.src(y));
    for &x in &gens {
        for &y in &gens {
            if !composable_h(x, y) {
                continue;
            }
            if s2.h(x, y).is_empty() && cat.compose2(s2.sig.src(x), s2.sig.src(y)).is_ok() {
                return Err(GenError::AxiomViolated(format!(
                    "horizontal table missing ({}, {})",
                    s2.sig.name(x),
                    s2.sig.name(y)
                )));
            }
            // interchange on basis quadruples
            for &xp in &gens {
                if !composable_v(x, xp) {
                    continue;
                }
                for &yp in &gens {
                    if !composable_v(y, yp) || !composable_h(xp, yp) {
                        continue;
                    }
                    let lhs = {
                        let vx = s2.v(x, xp).to_vec();
                        let vy = s2.v(y, yp).to_vec();
                        let mut counts: BTreeMap<GenId, usize> = BTreeMap::new();
                        for &a in &vx {
                            for &b in &vy {
                                for g in s2.h(a, b) {
                                    *counts.entry(*g).or_default() += 1;
                                }
                            }
                        }
                        counts
                            .into_iter()
                            .filter(|(_, c)| c % 2 == 1)
                            .map(|(g, _)| g)
                            .collect::<Vec<_>>()
                    };
                    let rhs = {
                        let hx = s2.h(x, y).to_vec();
                        let hy = s2.h(xp, yp).to_vec();
                        let mut counts: BTreeMap<GenId, usize> = BTreeMap::new();
                        for &a in &hx {
                            for &b in &hy {
                                for g in s2.v(a, b) {
                                    *counts.entry(*g).or_default() += 1;
                                }
                            }
                        }
                        counts
                            .into_iter()
                            .filter(|(_, c)| c % 2 == 1)
                            .map(|(g, _)| g)
                            .collect::<Vec<_>>()
                    };
                    if lhs != rhs {
                        return Err(GenError::AxiomViolated(format!(
                            "interchange at ({}, {}, {}, {})",
                            s2.sig.name(x),
                            s2.sig.name(y),
                            s2.sig.name(xp),
                            s2.sig.name(yp)
                        )));
                    }
                }
            }
        }
    }
    Ok((cat, s2))
}

/// Realizes a strict 2-category: the binary vertical composition at energy
/// 1, whiskering and horizontal composition at energy 0, all differentials
/// and curvature zero, Cartesian products for two blocks, and edges pairing
/// every equation class in range.
///
/// An energy scheme with horizontal structure at level zero is forced: the
/// two routes around each width-2 equation differ by one whisker insertion,
/// so a positive whisker energy would leave odd classes.
pub fn gen_strict_2cat(
    data: &Strict2Data,
    cap: EnergyCap,
    epsilon: Energy,
) -> Result<FlowCat2, GenError> {
    let (cat, s2) = build_strict2(data)?;
    let bounds = ShapeMax {
        r_max: 2,
        a_max: 2,
        mass_max: vec![3, 2],
    };
    let mut fc = FlowCat2::new(cat, s2.sig.clone(), bounds.clone(), cap, epsilon);

    // all single-block collections within bounds
    let a1_bounds = ShapeMax {
        r_max: 2,
        a_max: 1,
        mass_max: bounds.mass_max.clone(),
    };
    let collections = crate::linearize::all_collections(&fc.cat, &a1_bounds);
    for coll in &collections {
        let shape = coll.shape();
        if shape.r() == 1 && shape.n[0][0] == 2 {
            // vertical composition points at energy 1
            let col = &coll.grid[0][0];
            for x in s2.sig.between(col[0], col[1]) {
                for y in s2.sig.between(col[1], col[2]) {
                    for &q in s2.v(x, y) {
                        fc.add_point(PointRec {
                            collection: coll.clone(),
                            evals: EvalGrid {
                                alpha: vec![vec![vec![x, y]]],
                                beta: vec![q],
                            },
                            energy: Energy::ONE,
                            stratum: Some(crate::wpoly::top_stratum(&shape)),
                        });
                    }
                }
            }
        }
        if shape.r() == 2 && shape.mass() == 1 {
            // whiskering at energy 0
            let (ci, other) = if shape.n[0][0] == 1 { (0, 1) } else { (1, 0) };
            let col = &coll.grid[0][ci];
            let passive = coll.grid[0][other][0];
            let unit = s2.unit_of[&passive];
            for x in s2.sig.between(col[0], col[1]) {
                let whiskered = if ci == 0 {
                    s2.h(x, unit)
                } else {
                    s2.h(unit, x)
                };
                for &q in whiskered {
                    let alpha = if ci == 0 {
                        vec![vec![vec![x], Vec::new()]]
                    } else {
                        vec![vec![Vec::new(), vec![x]]]
                    };
                    fc.add_point(PointRec {
                        collection: coll.clone(),
                        evals: EvalGrid {
                            alpha,
                            beta: vec![q],
                        },
                        energy: Energy::ZERO,
                        stratum: Some(crate::wpoly::top_stratum(&shape)),
                    });
                }
            }
        }
        if shape.r() == 2 && shape.n[0] == vec![1, 1] {
            // horizontal composition at energy 0
            let col1 = &coll.grid[0][0];
            let col2 = &coll.grid[0][1];
            for x in s2.sig.between(col1[0], col1[1]) {
                for y in s2.sig.between(col2[0], col2[1]) {
                    for &q in s2.h(x, y) {
                        fc.add_point(PointRec {
                            collection: coll.clone(),
                            evals: EvalGrid {
                                alpha: vec![vec![vec![x], vec![y]]],
                                beta: vec![q],
                            },
                            energy: Energy::ZERO,
                            stratum: Some(crate::wpoly::top_stratum(&shape)),
                        });
                    }
                }
            }
        }
    }

    // two-block products of the stored single-block points
    let singles: Vec<(u32, PointRec)> = fc.points.iter().map(|(&id, p)| (id, p.clone())).collect();
    for (_, p1) in &singles {
        for (_, p2) in &singles {
            if p1.collection.objects != p2.collection.objects
                || p1.collection.r() != p2.collection.r()
            {
                continue;
            }
            let product = Collection {
                objects: p1.collection.objects.clone(),
                grid: vec![p1.collection.grid[0].clone(), p2.collection.grid[0].clone()],
            };
            if !fc.bounds.admits(&product.shape()) {
                continue;
            }
            let energy = p1.energy + p2.energy;
            if !fc.cap.keeps(energy.rat()) {
                continue;
            }
            let stratum = match (&p1.stratum, &p2.stratum) {
                (Some(a), Some(b)) if a.ts == b.ts => Some(crate::wpoly::Coppice {
                    ts: a.ts.clone(),
                    blocks: vec![a.blocks[0].clone(), b.blocks[0].clone()],
                }),
                _ => None,
            };
            fc.add_point(PointRec {
                collection: product,
                evals: EvalGrid {
                    alpha: vec![p1.evals.alpha[0].clone(), p2.evals.alpha[0].clone()],
                    beta: vec![p1.evals.beta[0], p2.evals.beta[0]],
                },
                energy,
                stratum,
            });
        }
    }

    pair_all_edges(&mut fc)?;
    Ok(fc)
}

/// Equation classes left with odd parity if the given point disappears:
/// the glued classes of fiber pairs through the point, counted mod 2
/// within the verification range.
pub fn odd_classes_after_removal(
    fc: &FlowCat2,
    point: u32,
) -> Vec<(Collection, EvalGrid<GenId>, Energy)> {
    let check_cap = fc.check_cap();
    let mut parity: BTreeMap<(Collection, EvalGrid<GenId>, Energy), bool> = BTreeMap::new();
    for l in crate::flowcat::pairing_collections(fc) {
        for pair in fiber_pairs(fc, &l, check_cap) {
            // one toggle per removed pair object, including self-pairs
            let through = pair.left == point || pair.right == point;
            if through {
                let left = &fc.points[&pair.left];
                let right = &fc.points[&pair.right];
                let glued =
                    glue_evals(&pair.desc, &left.evals, &right.evals).expect("stored pairs glue");
                let slot = parity.entry((l.clone(), glued, pair.energy)).or_default();
                *slot = !*slot;
            }
        }
    }
    parity
        .into_iter()
        .filter(|(_, odd)| *odd)
        .map(|(k, _)| k)
        .collect()
}

/// The seed-chosen edge and endpoint that [`mutate_break`] removes: the
/// first candidate, counting cyclically from the seeded start, whose
/// in-side point leaves at least one odd equation class behind.
pub fn break_locus(fc: &FlowCat2, seed: u64) -> Result<(u32, Endpoint), GenError> {
    let mut state = seed ^ 0x5eed;
    let mut candidates: Vec<(u32, Endpoint)> = Vec::new();
    for (&id, e) in &fc.edges {
        for ep in &e.ends {
            candidates.push((id, ep.clone()));
        }
    }
    if candidates.is_empty() {
        return Err(GenError::NoEdges);
    }
    let start = (splitmix64(&mut state) as usize) % candidates.len();
    for k in 0..candidates.len() {
        let (id, ep) = &candidates[(start + k) % candidates.len()];
        if !odd_classes_after_removal(fc, ep.left).is_empty() {
            return Ok((*id, ep.clone()));
        }
    }
    // fall back to the seeded candidate; validation still fails
    Ok(candidates[start].clone())
}

/// Removes the in-side point of a seed-chosen edge endpoint, leaving the
/// endpoint record dangling: validation fails at the orphaned pair, and the
/// extracted tensors acquire an unbalanced equation term at each odd class
/// of the removed point.
pub fn mutate_break(fc: &FlowCat2, seed: u64) -> Result<FlowCat2, GenError> {
    let (_, ep) = break_locus(fc, seed)?;
    let mut out = fc.clone();
    out.points.remove(&ep.left);
    Ok(out)
}

/// Removes a seed-chosen endpoint record, keeping all points: the result
/// still loads from disk but fails validation at the orphaned fiber pair.
pub fn mutate_drop_endpoint(fc: &FlowCat2, seed: u64) -> Result<FlowCat2, GenError> {
    let mut state = seed ^ 0xd409;
    let edges: Vec<u32> = fc
        .edges
        .iter()
        .filter(|(_, e)| !e.ends.is_empty())
        .map(|(&id, _)| id)
        .collect();
    if edges.is_empty() {
        return Err(GenError::NoEdges);
    }
    let edge_id = edges[(splitmix64(&mut state) as usize) % edges.len()];
    let mut out = fc.clone();
    let ends = &mut out.edges.get_mut(&edge_id).unwrap().ends;
    let k = (splitmix64(&mut state) as usize) % ends.len();
    ends.remove(k);
    Ok(out)
}
