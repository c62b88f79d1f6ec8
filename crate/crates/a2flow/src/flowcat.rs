//! Desk-scale flow categories: finite 2-morphism generator sets plus stored
//! 0- and 1-dimensional moduli tables with boundary pairings and energies.
//!
//! Only the 0-dimensional part (counts) and the 1-dimensional part
//! (relations) are stored; that is exactly what the linearization uses.
//! Closed 1-dimensional components carry no endpoints and are ignored by
//! every count.

use crate::novikov::{Energy, EnergyCap};
use crate::onecat::{MorId, ObjId, OneCat};
use crate::shapes::{
    desc_collections, enum_desc, glue_evals, Collection, Descriptor, EvalGrid, Shape,
};
use crate::wpoly::{gamma_graft, is_valid_stratum, Coppice};
use std::collections::BTreeMap;
use std::fmt;

/// Generator of a 2-morphism space between two parallel 1-morphisms.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct GenId(pub u32);

#[derive(Clone, Debug)]
struct GenData {
    name: String,
    src: MorId,
    tgt: MorId,
}

/// Finite sets of 2-morphism generators per ordered pair of parallel
/// 1-morphisms.
#[derive(Clone, Debug, Default)]
pub struct TwoMorSig {
    gens: Vec<GenData>,
}

impl TwoMorSig {
    pub fn new() -> TwoMorSig {
        TwoMorSig::default()
    }

    pub fn add_gen(&mut self, cat: &OneCat, name: &str, src: MorId, tgt: MorId) -> GenId {
        assert!(
            cat.src(src) == cat.src(tgt) && cat.tgt(src) == cat.tgt(tgt),
            "2-morphism generators connect parallel 1-morphisms"
        );
        self.add_gen_raw(name, src, tgt)
    }

    /// Adds a generator without the parallel-endpoints check; the loader
    /// verifies endpoints itself.
    pub fn add_gen_raw(&mut self, name: &str, src: MorId, tgt: MorId) -> GenId {
        assert!(
            self.gens.iter().all(|g| g.name != name),
            "duplicate generator name {name}"
        );
        self.gens.push(GenData {
            name: name.to_string(),
            src,
            tgt,
        });
        GenId(self.gens.len() as u32 - 1)
    }

    pub fn gen_ids(&self) -> impl Iterator<Item = GenId> + '_ {
        (0..self.gens.len() as u32).map(GenId)
    }

    pub fn name(&self, g: GenId) -> &str {
        &self.gens[g.0 as usize].name
    }

    pub fn by_name(&self, name: &str) -> Option<GenId> {
        self.gens
            .iter()
            .position(|g| g.name == name)
            .map(|i| GenId(i as u32))
    }

    pub fn src(&self, g: GenId) -> MorId {
        self.gens[g.0 as usize].src
    }

    pub fn tgt(&self, g: GenId) -> MorId {
        self.gens[g.0 as usize].tgt
    }

    /// Generators of 2Mor(l, l').
    pub fn between(&self, l: MorId, l_prime: MorId) -> Vec<GenId> {
        self.gen_ids()
            .filter(|&g| self.src(g) == l && self.tgt(g) == l_prime)
            .collect()
    }
}

/// Shape bounds of the stored data: width, block count, and a per-width
/// bound on the total point mass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeMax {
    pub r_max: usize,
    pub a_max: usize,
    /// mass_max[r-1] bounds the total of the n matrix at width r
    pub mass_max: Vec<u32>,
}

impl ShapeMax {
    pub fn admits(&self, shape: &Shape) -> bool {
        let r = shape.r();
        r <= self.r_max
            && shape.a() <= self.a_max
            && r <= self.mass_max.len()
            && shape.mass() <= self.mass_max[r - 1]
    }
}

/// A 0-dimensional moduli point: evaluation data, energy, and an optional
/// stratum label in the fiber product of 2-associahedra.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointRec {
    pub collection: Collection,
    pub evals: EvalGrid<GenId>,
    pub energy: Energy,
    pub stratum: Option<Coppice>,
}

/// One boundary point of a 1-dimensional component: the descriptor and the
/// two fiber-product factors, referenced by point id.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Endpoint {
    pub desc: Descriptor,
    pub left: u32,
    pub right: u32,
}

/// A 1-dimensional moduli component: exactly two endpoints, or none for a
/// circle component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeRec {
    pub collection: Collection,
    pub evals: EvalGrid<GenId>,
    pub energy: Energy,
    pub ends: Vec<Endpoint>,
}

#[derive(Clone, Debug)]
pub struct FlowCat2 {
    pub cat: OneCat,
    pub sig: TwoMorSig,
    pub points: BTreeMap<u32, PointRec>,
    pub edges: BTreeMap<u32, EdgeRec>,
    pub bounds: ShapeMax,
    pub cap: EnergyCap,
    pub epsilon: Energy,
    next_id: u32,
}

impl FlowCat2 {
    pub fn new(
        cat: OneCat,
        sig: TwoMorSig,
        bounds: ShapeMax,
        cap: EnergyCap,
        epsilon: Energy,
    ) -> FlowCat2 {
        FlowCat2 {
            cat,
            sig,
            points: BTreeMap::new(),
            edges: BTreeMap::new(),
            bounds,
            cap,
            epsilon,
            next_id: 0,
        }
    }

    pub fn set_next_id(&mut self, id: u32) {
        self.next_id = id;
    }

    pub fn add_point(&mut self, p: PointRec) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        self.points.insert(id, p);
        id
    }

    pub fn add_edge(&mut self, e: EdgeRec) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        self.edges.insert(id, e);
        id
    }

    pub fn points_of(&self, l: &Collection) -> Vec<(u32, &PointRec)> {
        self.points
            .iter()
            .filter(|(_, p)| &p.collection == l)
            .map(|(&id, p)| (id, p))
            .collect()
    }

    pub fn edges_of(&self, l: &Collection) -> Vec<(u32, &EdgeRec)> {
        self.edges
            .iter()
            .filter(|(_, e)| &e.collection == l)
            .map(|(&id, e)| (id, e))
            .collect()
    }

    pub fn stored_collections(&self) -> Vec<Collection> {
        let mut out: Vec<Collection> = self
            .points
            .values()
            .map(|p| p.collection.clone())
            .chain(self.edges.values().map(|e| e.collection.clone()))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// The verification range: glued energies up to cap - epsilon, so that
    /// truncation near the cap never produces false positives.
    pub fn check_cap(&self) -> EnergyCap {
        match self.cap {
            EnergyCap::Unbounded => EnergyCap::Unbounded,
            EnergyCap::Bounded(c) => {
                let margin = c.rat() - self.epsilon.rat();
                if margin.is_negative() {
                    EnergyCap::Bounded(Energy::ZERO)
                } else {
                    EnergyCap::Bounded(Energy::new(margin))
                }
            }
        }
    }
}

/// Collections over which fiber pairs may occur: everything within the
/// declared bounds, plus anything stored (bounds violations are reported
/// separately but still checked for pairing).
pub fn pairing_collections(fc: &FlowCat2) -> Vec<Collection> {
    let mut out = crate::linearize::all_collections(&fc.cat, &fc.bounds);
    out.extend(fc.stored_collections());
    out.sort();
    out.dedup();
    out
}

/// A fiber-product pair of stored points, tagged by descriptor.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct FiberPair {
    pub desc: Descriptor,
    pub left: u32,
    pub right: u32,
    pub energy: Energy,
}

/// All fiber-product pairs of stored points over a collection whose glued
/// energy is within the cap, in a deterministic order.
pub fn fiber_pairs(fc: &FlowCat2, l: &Collection, cap: EnergyCap) -> Vec<FiberPair> {
    let shape = l.shape();
    let mut out = Vec::new();
    let descs = match enum_desc(&shape, fc.cap, fc.epsilon) {
        Ok(d) => d,
        Err(_) => return out,
    };
    for desc in descs {
        let Ok((l_in, l_out)) = desc_collections(&fc.cat, l, &desc) else {
            continue;
        };
        for (li, lp) in fc.points_of(&l_in) {
            for (ri, rp) in fc.points_of(&l_out) {
                let energy = lp.energy + rp.energy;
                if !cap.keeps(energy.rat()) {
                    continue;
                }
                if glue_evals(&desc, &lp.evals, &rp.evals).is_ok() {
                    out.push(FiberPair {
                        desc: desc.clone(),
                        left: li,
                        right: ri,
                        energy,
                    });
                }
            }
        }
    }
    out.sort();
    out
}

/// One validation failure, with its clause and locus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub clause: char,
    pub locus: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "clause ({}) at {}: {}",
            self.clause, self.locus, self.message
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub violations: Vec<Violation>,
}

impl Report {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            writeln!(f, "0 violations")
        } else {
            writeln!(f, "{} violations", self.violations.len())?;
            for v in &self.violations {
                writeln!(f, "  {}", v)?;
            }
            Ok(())
        }
    }
}

fn eval_grid_well_typed(
    cat: &OneCat,
    sig: &TwoMorSig,
    l: &Collection,
    ev: &EvalGrid<GenId>,
) -> Result<(), String> {
    let shape = l.shape();
    if ev.shape() != shape || ev.beta.len() != shape.a() {
        return Err("eval grid shape mismatch".to_string());
    }
    for j in 1..=shape.a() {
        for i in 1..=shape.r() {
            for k in 1..=shape.n[j - 1][i - 1] as usize {
                let g = *ev.alpha_slot(i, j, k);
                let (lo, hi) = l.slot_pair(i, j, k);
                if sig.src(g) != lo || sig.tgt(g) != hi {
                    return Err(format!("alpha slot (i={i}, j={j}, k={k}) mistyped"));
                }
            }
        }
        let (bot, top) = l
            .composed_endpoints(cat, j)
            .map_err(|e| format!("composed endpoints: {e}"))?;
        let b = ev.beta[j - 1];
        if sig.src(b) != bot || sig.tgt(b) != top {
            return Err(format!("beta slot {j} mistyped"));
        }
    }
    Ok(())
}

/// Validates the stored moduli tables. The report is empty exactly when
/// every edge endpoint glues correctly with additive energy (a), the edge
/// endpoints biject onto the fiber pairs within the verification range (b),
/// zero-shape points carry positive energy (c), and optional stratum labels
/// glue to strata of the right shape (d).
pub fn validate(fc: &FlowCat2) -> Report {
    let mut violations = Vec::new();
    let check_cap = fc.check_cap();

    // bounds and typing
    for (&id, p) in &fc.points {
        let shape = p.collection.shape();
        if !fc.bounds.admits(&shape) {
            violations.push(Violation {
                clause: 'a',
                locus: format!("point p{id}"),
                message: format!("shape {shape} outside declared bounds"),
            });
        }
        if !fc.cap.keeps(p.energy.rat()) {
            violations.push(Violation {
                clause: 'a',
                locus: format!("point p{id}"),
                message: format!("energy {} above cap", p.energy),
            });
        }
        if let Err(msg) = eval_grid_well_typed(&fc.cat, &fc.sig, &p.collection, &p.evals) {
            violations.push(Violation {
                clause: 'a',
                locus: format!("point p{id}"),
                message: msg,
            });
        }
        if shape.is_zero() && p.energy.is_zero() {
            violations.push(Violation {
                clause: 'c',
                locus: format!("point p{id}"),
                message: "zero-shape point with zero energy".to_string(),
            });
        }
    }

    // edges: structure, gluing, additivity, stratum labels
    let mut matched: BTreeMap<(Collection, FiberPair), u32> = BTreeMap::new();
    for (&id, e) in &fc.edges {
        if !(e.ends.is_empty() || e.ends.len() == 2) {
            violations.push(Violation {
                clause: 'a',
                locus: format!("edge e{id}"),
                message: format!("{} endpoints; a component has 2 or none", e.ends.len()),
            });
        }
        if let Err(msg) = eval_grid_well_typed(&fc.cat, &fc.sig, &e.collection, &e.evals) {
            violations.push(Violation {
                clause: 'a',
                locus: format!("edge e{id}"),
                message: msg,
            });
        }
        for (which, ep) in e.ends.iter().enumerate() {
            let locus = format!("edge e{id} endpoint {which}");
            let (left, right) = match (fc.points.get(&ep.left), fc.points.get(&ep.right)) {
                (Some(l), Some(r)) => (l, r),
                _ => {
                    violations.push(Violation {
                        clause: 'b',
                        locus,
                        message: format!(
                            "endpoint references missing point p{} or p{}",
                            ep.left, ep.right
                        ),
                    });
                    continue;
                }
            };
            match glue_evals(&ep.desc, &left.evals, &right.evals) {
                Ok(glued) => {
                    if glued != e.evals {
                        violations.push(Violation {
                            clause: 'a',
                            locus: locus.clone(),
                            message: "glued evals differ from the edge evals".to_string(),
                        });
                    }
                }
                Err(err) => violations.push(Violation {
                    clause: 'a',
                    locus: locus.clone(),
                    message: err.to_string(),
                }),
            }
            if left.energy + right.energy != e.energy {
                violations.push(Violation {
                    clause: 'a',
                    locus: locus.clone(),
                    message: format!(
                        "endpoint energies {} + {} do not add to edge energy {}",
                        left.energy, right.energy, e.energy
                    ),
                });
            }
            // clause (b) bookkeeping within the verification range
            let pair_energy = left.energy + right.energy;
            if check_cap.keeps(pair_energy.rat()) {
                let key = (
                    e.collection.clone(),
                    FiberPair {
                        desc: ep.desc.clone(),
                        left: ep.left,
                        right: ep.right,
                        energy: pair_energy,
                    },
                );
                if matched.insert(key, id).is_some() {
                    violations.push(Violation {
                        clause: 'b',
                        locus,
                        message: "fiber pair hit by more than one endpoint".to_string(),
                    });
                    continue;
                }
            }
            // clause (d): stratum labels, when present on both factors
            if let (Some(ls), Some(rs)) = (&left.stratum, &right.stratum) {
                match gamma_graft(&ep.desc, ls, rs) {
                    Ok(glued) => {
                        if glued.shape() != e.collection.shape() || !is_valid_stratum(&glued) {
                            violations.push(Violation {
                                clause: 'd',
                                locus: format!("edge e{id} endpoint {which}"),
                                message: "glued stratum is not a stratum of the edge shape"
                                    .to_string(),
                            });
                        }
                    }
                    Err(err) => violations.push(Violation {
                        clause: 'd',
                        locus: format!("edge e{id} endpoint {which}"),
                        message: err.to_string(),
                    }),
                }
            }
        }
    }

    // clause (b): every fiber pair within range is matched; pairs can sit
    // over collections with nothing stored, so scan every in-bounds
    // collection as well
    for l in pairing_collections(fc) {
        for pair in fiber_pairs(fc, &l, check_cap) {
            let key = (l.clone(), pair.clone());
            if matched.remove(&key).is_none() {
                violations.push(Violation {
                    clause: 'b',
                    locus: format!(
                        "collection {} pair {} (p{}, p{})",
                        collection_text(&fc.cat, &l),
                        pair.desc,
                        pair.left,
                        pair.right
                    ),
                    message: "fiber pair not matched by any edge endpoint".to_string(),
                });
            }
        }
    }
    // endpoints whose pair does not exist (e.g. a deleted point elsewhere)
    for ((l, pair), edge) in matched {
        violations.push(Violation {
            clause: 'b',
            locus: format!(
                "edge e{edge} over {} pair {} (p{}, p{})",
                collection_text(&fc.cat, &l),
                pair.desc,
                pair.left,
                pair.right
            ),
            message: "endpoint does not correspond to a stored fiber pair".to_string(),
        });
    }

    violations
        .sort_by(|a, b| (a.clause, &a.locus, &a.message).cmp(&(b.clause, &b.locus, &b.message)));
    Report { violations }
}

/// Restriction to the morphism category between two objects: keeps exactly
/// the width-1 single-block collections over the pair.
pub fn restrict_to_mor(fc: &FlowCat2, m0: ObjId, m1: ObjId) -> FlowCat2 {
    let keep = |l: &Collection| l.r() == 1 && l.a() == 1 && l.objects == vec![m0, m1];
    let mut out = FlowCat2::new(
        fc.cat.clone(),
        fc.sig.clone(),
        ShapeMax {
            r_max: 1,
            a_max: 1,
            mass_max: vec![fc.bounds.mass_max.first().copied().unwrap_or(0)],
        },
        fc.cap,
        fc.epsilon,
    );
    out.next_id = fc.next_id;
    for (&id, p) in &fc.points {
        if keep(&p.collection) {
            out.points.insert(id, p.clone());
        }
    }
    for (&id, e) in &fc.edges {
        if keep(&e.collection) {
            out.edges.insert(id, e.clone());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductError(pub String);

impl fmt::Display for ProductError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "product extension: {}", self.0)
    }
}

impl std::error::Error for ProductError {}

fn concat_evals(grids: &[&EvalGrid<GenId>]) -> EvalGrid<GenId> {
    EvalGrid {
        alpha: grids.iter().flat_map(|g| g.alpha.clone()).collect(),
        beta: grids.iter().flat_map(|g| g.beta.clone()).collect(),
    }
}

fn stack_collections(factors: &[&Collection]) -> Collection {
    Collection {
        objects: factors[0].objects.clone(),
        grid: factors.iter().flat_map(|c| c.grid.clone()).collect(),
    }
}

fn lift_desc(desc: &Descriptor, block: usize) -> Descriptor {
    match desc {
        Descriptor::Type1 { i, j, s, t } => {
            debug_assert_eq!(*j, 1);
            Descriptor::Type1 {
                i: *i,
                j: block + 1,
                s: *s,
                t: *t,
            }
        }
        Descriptor::Type3 { j, parts } => {
            debug_assert_eq!(*j, 1);
            Descriptor::Type3 {
                j: block + 1,
                parts: parts.clone(),
            }
        }
        // widths 1 and 2 admit no type-2 descriptors
        Descriptor::Type2 { .. } => unreachable!("type-2 descriptor on a width <= 2 factor"),
    }
}

/// Extends a width-`r_c` single-block category by Cartesian products: the
/// fiber products over K_1 and K_2 are honest products, so the data for
/// a >= 2 is generated blockwise from the a = 1 data. Endpoint descriptors
/// lift with their block index; the other blocks pass through unchanged.
pub fn product_extend(fc: &FlowCat2, r_c: usize) -> Result<FlowCat2, ProductError> {
    if r_c > 2 {
        return Err(ProductError(format!(
            "fiber products over K_{r_c} are not Cartesian"
        )));
    }
    let mut out = fc.clone();
    out.bounds.a_max = out.bounds.a_max.max(2);

    // base collections: width r_c, single block, stored in the input
    let mut base: Vec<Collection> = fc
        .stored_collections()
        .into_iter()
        .filter(|l| l.r() == r_c && l.a() == 1)
        .collect();
    base.sort();
    base.dedup();

    let tuples_for = |a: usize| -> Vec<Vec<Collection>> {
        let mut tuples: Vec<Vec<Collection>> = vec![Vec::new()];
        for _ in 0..a {
            let mut next = Vec::new();
            for partial in &tuples {
                for b in &base {
                    if partial.is_empty() || partial[0].objects == b.objects {
                        let mut p = partial.clone();
                        p.push(b.clone());
                        next.push(p);
                    }
                }
            }
            tuples = next;
        }
        tuples
    };

    let point_combos = |tuple: &[Collection]| -> Vec<Vec<(u32, PointRec)>> {
        let mut combos: Vec<Vec<(u32, PointRec)>> = vec![Vec::new()];
        for l in tuple {
            let choices: Vec<(u32, PointRec)> = fc
                .points_of(l)
                .into_iter()
                .map(|(id, p)| (id, p.clone()))
                .collect();
            let mut next = Vec::new();
            for partial in &combos {
                for c in &choices {
                    let mut p = partial.clone();
                    p.push(c.clone());
                    next.push(p);
                }
            }
            combos = next;
        }
        combos
    };

    // phase 1: all product points, registered by their factor ids; points
    // already present with identical data are adopted instead of duplicated
    let mut claimable: BTreeMap<u32, PointRec> = fc
        .points
        .iter()
        .filter(|(_, p)| p.collection.a() >= 2 && p.collection.r() == r_c)
        .map(|(&id, p)| (id, p.clone()))
        .collect();
    let mut registry: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
    for a in 2..=out.bounds.a_max {
        for tuple in tuples_for(a) {
            let refs: Vec<&Collection> = tuple.iter().collect();
            let product = stack_collections(&refs);
            if !out.bounds.admits(&product.shape()) {
                continue;
            }
            for combo in point_combos(&tuple) {
                let energy = combo
                    .iter()
                    .fold(Energy::ZERO, |acc, (_, p)| acc + p.energy);
                if !out.cap.keeps(energy.rat()) {
                    continue;
                }
                let grids: Vec<&EvalGrid<GenId>> = combo.iter().map(|(_, p)| &p.evals).collect();
                let stratum = combo
                    .iter()
                    .map(|(_, p)| p.stratum.clone())
                    .collect::<Option<Vec<_>>>()
                    .and_then(|strata| {
                        let ts = strata[0].ts.clone();
                        if strata.iter().any(|s| s.ts != ts) {
                            return None;
                        }
                        Some(Coppice {
                            ts,
                            blocks: strata.into_iter().flat_map(|s| s.blocks).collect(),
                        })
                    });
                let rec = PointRec {
                    collection: product.clone(),
                    evals: concat_evals(&grids),
                    energy,
                    stratum,
                };
                let existing = claimable
                    .iter()
                    .find(|(_, p)| **p == rec)
                    .map(|(&id, _)| id);
                let id = match existing {
                    Some(id) => {
                        claimable.remove(&id);
                        id
                    }
                    None => out.add_point(rec),
                };
                registry.insert(combo.iter().map(|(i, _)| *i).collect(), id);
            }
        }
    }

    // phase 2: product edges with one edge factor, endpoints lifted
    for a in 2..=out.bounds.a_max {
        for tuple in tuples_for(a) {
            let refs: Vec<&Collection> = tuple.iter().collect();
            let product = stack_collections(&refs);
            if !out.bounds.admits(&product.shape()) {
                continue;
            }
            for j0 in 0..a {
                let edge_table = fc.edges_of(&tuple[j0]);
                if edge_table.is_empty() {
                    continue;
                }
                let mut others_tuple: Vec<Collection> = tuple.clone();
                others_tuple.remove(j0);
                for others in point_combos(&others_tuple) {
                    for (_, e) in &edge_table {
                        let energy = others.iter().fold(e.energy, |acc, (_, p)| acc + p.energy);
                        if !out.cap.keeps(energy.rat()) {
                            continue;
                        }
                        let mut grids: Vec<&EvalGrid<GenId>> = Vec::with_capacity(a);
                        let mut oi = 0;
                        for jj in 0..a {
                            if jj == j0 {
                                grids.push(&e.evals);
                            } else {
                                grids.push(&others[oi].1.evals);
                                oi += 1;
                            }
                        }
                        let mut ends = Vec::with_capacity(e.ends.len());
                        let mut liftable = true;
                        for ep in &e.ends {
                            match lift_endpoint(j0, a, ep, &others, &registry) {
                                Some(lifted) => ends.push(lifted),
                                None => {
                                    // the lifted fiber factor would exceed
                                    // the block bounds; the pair does not
                                    // exist in the stored universe
                                    liftable = false;
                                    break;
                                }
                            }
                        }
                        if !liftable {
                            continue;
                        }
                        let rec = EdgeRec {
                            collection: product.clone(),
                            evals: concat_evals(&grids),
                            energy,
                            ends,
                        };
                        if out.edges.values().any(|x| *x == rec) {
                            continue;
                        }
                        out.add_edge(rec);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Lifts one endpoint of a factor edge at block `j0`: the factor half that
/// stacks with the passthrough blocks is replaced by the registered product
/// point; the other half is shared with the factor category.
fn lift_endpoint(
    j0: usize,
    a: usize,
    ep: &Endpoint,
    others: &[(u32, PointRec)],
    registry: &BTreeMap<Vec<u32>, u32>,
) -> Option<Endpoint> {
    let lifted_desc = lift_desc(&ep.desc, j0);
    let key_with = |shared: u32| -> Vec<u32> {
        let mut key = Vec::with_capacity(a);
        let mut oi = 0;
        for jj in 0..a {
            if jj == j0 {
                key.push(shared);
            } else {
                key.push(others[oi].0);
                oi += 1;
            }
        }
        key
    };
    match &ep.desc {
        Descriptor::Type1 { .. } => {
            let left = *registry.get(&key_with(ep.left))?;
            Some(Endpoint {
                desc: lifted_desc,
                left,
                right: ep.right,
            })
        }
        Descriptor::Type3 { parts, .. } => {
            if parts.len() != 1 {
                // a width <= 2 single-block factor only ever pairs b = 1
                return None;
            }
            let right = *registry.get(&key_with(ep.right))?;
            Some(Endpoint {
                desc: lifted_desc,
                left: ep.left,
                right,
            })
        }
        Descriptor::Type2 { .. } => None,
    }
}

/// Deterministic text for a collection, used in reports and files.
pub fn collection_text(cat: &OneCat, l: &Collection) -> String {
    let objs: Vec<&str> = l.objects.iter().map(|&o| cat.object_name(o)).collect();
    let blocks: Vec<String> = l
        .grid
        .iter()
        .map(|block| {
            block
                .iter()
                .map(|col| {
                    col.iter()
                        .map(|&m| cat.mor_name(m).to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect::<Vec<_>>()
                .join("/")
        })
        .collect();
    format!("{}!{}", objs.join(","), blocks.join(";"))
}
