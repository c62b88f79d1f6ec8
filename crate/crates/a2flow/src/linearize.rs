//! Extraction of the linear operations from a flow category by Novikov
//! counting, and exact verification of the curved A-infinity and
//! (A-infinity,2) equations and the fiber-compatibility laws.
//!
//! Every equation is a finite sum once partition sizes are bounded through
//! the energy cap: each padding zero part inserts a tensor of valuation at
//! least epsilon, so the omitted terms sit above the cap. Sums are
//! evaluated on generator grids; linearity extends them uniquely.

use crate::flowcat::{FlowCat2, GenId, ShapeMax, TwoMorSig};
use crate::novikov::{nov_count, Energy, EnergyCap, NovElem};
use crate::onecat::{MorId, ObjId, OneCat};
use crate::shapes::{desc_collections, enum_desc, glue_evals, Collection, Descriptor, EvalGrid};
use std::collections::BTreeMap;
use std::fmt;

/// The linear operation attached to one collection: a Novikov coefficient
/// per (input grid, output tuple) of 2-morphism generators. Zero entries
/// are absent.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NovTensor {
    pub entries: BTreeMap<EvalGrid<GenId>, NovElem>,
}

impl NovTensor {
    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn min_valuation(&self) -> Option<crate::rat::Rat> {
        self.entries.values().filter_map(|v| v.valuation()).min()
    }
}

/// A family of extracted tensors with its ambient data.
#[derive(Clone, Debug)]
pub struct TensorFamily {
    pub cat: OneCat,
    pub sig: TwoMorSig,
    pub tensors: BTreeMap<Collection, NovTensor>,
    pub bounds: ShapeMax,
    pub cap: EnergyCap,
    pub epsilon: Energy,
}

impl TensorFamily {
    pub fn tensor(&self, l: &Collection) -> Option<&NovTensor> {
        self.tensors.get(l)
    }

    fn check_cap(&self) -> EnergyCap {
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

/// Counts the stored 0-dimensional points of one collection, grouped by
/// evaluation data and graded by energy, truncated at the cap.
pub fn extract_mu(fc: &FlowCat2, l: &Collection) -> NovTensor {
    let mut by_evals: BTreeMap<EvalGrid<GenId>, Vec<Energy>> = BTreeMap::new();
    for (_, p) in fc.points_of(l) {
        by_evals.entry(p.evals.clone()).or_default().push(p.energy);
    }
    let mut entries = BTreeMap::new();
    for (ev, energies) in by_evals {
        let count = nov_count(energies).truncate(fc.cap);
        if !count.is_zero() {
            entries.insert(ev, count);
        }
    }
    NovTensor { entries }
}

/// Extracts tensors for every stored collection.
pub fn extract_all(fc: &FlowCat2) -> TensorFamily {
    let mut tensors = BTreeMap::new();
    for l in fc.stored_collections() {
        let t = extract_mu(fc, &l);
        if !t.is_zero() {
            tensors.insert(l, t);
        }
    }
    TensorFamily {
        cat: fc.cat.clone(),
        sig: fc.sig.clone(),
        tensors,
        bounds: fc.bounds.clone(),
        cap: fc.cap,
        epsilon: fc.epsilon,
    }
}

/// One failed equation instance: the collection, the (input grid, output
/// tuple) class, the nonzero sum, and the per-descriptor contributions.
#[derive(Clone, Debug)]
pub struct Residual {
    pub collection: Collection,
    pub evals: EvalGrid<GenId>,
    pub value: NovElem,
    pub terms: Vec<(Descriptor, NovElem)>,
}

impl Residual {
    pub fn render(&self, cat: &OneCat, sig: &TwoMorSig) -> String {
        let slots: Vec<String> = self
            .evals
            .alpha
            .iter()
            .flatten()
            .flatten()
            .map(|&g| sig.name(g).to_string())
            .collect();
        let outs: Vec<String> = self
            .evals
            .beta
            .iter()
            .map(|&g| sig.name(g).to_string())
            .collect();
        let mut s = format!(
            "residual at {} | input ({}) | output ({}) | value {}",
            crate::flowcat::collection_text(cat, &self.collection),
            slots.join(","),
            outs.join(","),
            self.value
        );
        for (d, v) in &self.terms {
            s.push_str(&format!("\n    term {d}: {v}"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckError {
    NonConvergence(String),
    Desc(crate::shapes::DescError),
}

impl fmt::Display for CheckError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckError::NonConvergence(m) => write!(f, "nonconvergence: {m}"),
            CheckError::Desc(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CheckError {}

impl From<crate::shapes::DescError> for CheckError {
    fn from(e: crate::shapes::DescError) -> CheckError {
        CheckError::Desc(e)
    }
}

/// Requires every zero-shape tensor to have valuation at least epsilon;
/// otherwise the curvature insertions do not converge.
fn check_positive_energy(fam: &TensorFamily) -> Result<(), CheckError> {
    for (l, t) in &fam.tensors {
        if !l.shape().is_zero() {
            continue;
        }
        if let Some(v) = t.min_valuation() {
            if v < fam.epsilon.rat() {
                return Err(CheckError::NonConvergence(format!(
                    "zero-shape tensor at {} has valuation {}",
                    crate::flowcat::collection_text(&fam.cat, l),
                    v
                )));
            }
        }
    }
    Ok(())
}

/// The equation sum for one collection, walking every descriptor and
/// pairing the in/out tensors along the fiber condition. Returns the
/// per-class sums together with per-descriptor term attribution.
fn equation_sums(
    fam: &TensorFamily,
    l: &Collection,
) -> Result<BTreeMap<EvalGrid<GenId>, (NovElem, Vec<(Descriptor, NovElem)>)>, CheckError> {
    let shape = l.shape();
    let mut acc: BTreeMap<EvalGrid<GenId>, (NovElem, Vec<(Descriptor, NovElem)>)> = BTreeMap::new();
    for desc in enum_desc(&shape, fam.cap, fam.epsilon)? {
        let Ok((l_in, l_out)) = desc_collections(&fam.cat, l, &desc) else {
            continue;
        };
        let (Some(t_in), Some(t_out)) = (fam.tensor(&l_in), fam.tensor(&l_out)) else {
            continue;
        };
        for (ev_in, c_in) in &t_in.entries {
            for (ev_out, c_out) in &t_out.entries {
                let Ok(glued) = glue_evals(&desc, ev_in, ev_out) else {
                    continue;
                };
                let contribution = c_in.mul(c_out, fam.cap);
                if contribution.is_zero() {
                    continue;
                }
                let slot = acc.entry(glued).or_default();
                slot.0 = slot.0.add(&contribution);
                match slot.1.iter_mut().find(|(d, _)| d == &desc) {
                    Some((_, v)) => *v = v.add(&contribution),
                    None => slot.1.push((desc.clone(), contribution)),
                }
            }
        }
    }
    Ok(acc)
}

fn residuals_for(
    fam: &TensorFamily,
    collections: &[Collection],
) -> Result<Vec<Residual>, CheckError> {
    check_positive_energy(fam)?;
    let check_cap = fam.check_cap();
    let mut out = Vec::new();
    for l in collections {
        for (evals, (sum, terms)) in equation_sums(fam, l)? {
            let value = sum.truncate(check_cap);
            if !value.is_zero() {
                out.push(Residual {
                    collection: l.clone(),
                    evals,
                    value,
                    terms,
                });
            }
        }
    }
    Ok(out)
}

/// All collections over the category within the given bounds.
pub fn all_collections(cat: &OneCat, bounds: &ShapeMax) -> Vec<Collection> {
    let mut out = Vec::new();
    for r in 1..=bounds.r_max {
        let mass_max = bounds.mass_max.get(r - 1).copied().unwrap_or(0);
        // object chains with composable nonempty hom sets
        let mut chains: Vec<Vec<ObjId>> = cat.objects().map(|o| vec![o]).collect();
        for _ in 0..r {
            let mut next = Vec::new();
            for chain in &chains {
                let last = *chain.last().unwrap();
                for o in cat.objects() {
                    if !cat.mors_between(last, o).is_empty() {
                        let mut c = chain.clone();
                        c.push(o);
                        next.push(c);
                    }
                }
            }
            chains = next;
        }
        for chain in chains {
            for a in 1..=bounds.a_max {
                for matrix in matrices(r, a, mass_max) {
                    // fill the grid with every choice of 1-morphisms
                    let mut grids: Vec<Vec<Vec<Vec<MorId>>>> = vec![Vec::new()];
                    for row in &matrix {
                        let mut block_choices: Vec<Vec<Vec<MorId>>> = vec![Vec::new()];
                        for (i, &n) in row.iter().enumerate() {
                            let homs = cat.mors_between(chain[i], chain[i + 1]);
                            let mut cols: Vec<Vec<MorId>> = vec![Vec::new()];
                            for _ in 0..=n {
                                let mut next = Vec::new();
                                for col in &cols {
                                    for &m in &homs {
                                        let mut c = col.clone();
                                        c.push(m);
                                        next.push(c);
                                    }
                                }
                                cols = next;
                            }
                            let mut next = Vec::new();
                            for block in &block_choices {
                                for col in &cols {
                                    let mut b = block.clone();
                                    b.push(col.clone());
                                    next.push(b);
                                }
                            }
                            block_choices = next;
                        }
                        let mut next = Vec::new();
                        for grid in &grids {
                            for block in &block_choices {
                                let mut g = grid.clone();
                                g.push(block.clone());
                                next.push(g);
                            }
                        }
                        grids = next;
                    }
                    for grid in grids {
                        if let Ok(c) = Collection::new(cat, chain.clone(), grid) {
                            out.push(c);
                        }
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// All a-by-r matrices of nonnegative integers with total at most mass.
fn matrices(r: usize, a: usize, mass: u32) -> Vec<Vec<Vec<u32>>> {
    fn rows(r: usize, budget: u32) -> Vec<(Vec<u32>, u32)> {
        if r == 0 {
            return vec![(Vec::new(), 0)];
        }
        let mut out = Vec::new();
        for v in 0..=budget {
            for (rest, used) in rows(r - 1, budget - v) {
                let mut row = vec![v];
                row.extend(rest);
                out.push((row, used + v));
            }
        }
        out
    }
    fn go(r: usize, a: usize, budget: u32) -> Vec<Vec<Vec<u32>>> {
        if a == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for (row, used) in rows(r, budget) {
            for rest in go(r, a - 1, budget - used) {
                let mut m = vec![row.clone()];
                m.extend(rest);
                out.push(m);
            }
        }
        out
    }
    go(r, a, mass)
}

/// Verifies the (A-infinity,2)-equations for every collection within the
/// given bounds, exactly, up to the cap-minus-epsilon verification range.
pub fn check_a2(fam: &TensorFamily, bounds: &ShapeMax) -> Result<Vec<Residual>, CheckError> {
    let collections = all_collections(&fam.cat, bounds);
    residuals_for(fam, &collections)
}

/// The curved A-infinity case: width-1 single-block collections only.
pub fn check_a_infty(fam: &TensorFamily, n_max: u32) -> Result<Vec<Residual>, CheckError> {
    let bounds = ShapeMax {
        r_max: 1,
        a_max: 1,
        mass_max: vec![n_max],
    };
    let collections = all_collections(&fam.cat, &bounds);
    residuals_for(fam, &collections)
}

/// Restriction of a family to the width-1 single-block tensors over a fixed
/// object pair.
pub fn restrict_linear(fam: &TensorFamily, m0: ObjId, m1: ObjId) -> TensorFamily {
    let mut tensors = BTreeMap::new();
    for (l, t) in &fam.tensors {
        if l.r() == 1 && l.a() == 1 && l.objects == vec![m0, m1] {
            tensors.insert(l.clone(), t.clone());
        }
    }
    TensorFamily {
        cat: fam.cat.clone(),
        sig: fam.sig.clone(),
        tensors,
        bounds: ShapeMax {
            r_max: 1,
            a_max: 1,
            mass_max: vec![fam.bounds.mass_max.first().copied().unwrap_or(0)],
        },
        cap: fam.cap,
        epsilon: fam.epsilon,
    }
}

#[derive(Clone, Debug, Default)]
pub struct CompatReport {
    pub violations: Vec<String>,
}

impl CompatReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Whether every stored multi-block tensor of width `r_c` factors as the
/// coefficientwise Novikov product of its blockwise single-block tensors.
pub fn check_fiber_compat_linear(fam: &TensorFamily, r_c: usize) -> CompatReport {
    let mut violations = Vec::new();
    let zero = NovTensor::default();
    for (l, t) in &fam.tensors {
        if l.r() != r_c || l.a() < 2 {
            continue;
        }
        // expected entries: products over blockwise entries
        let blocks: Vec<Collection> = (1..=l.a()).map(|j| l.block(j)).collect();
        let block_tensors: Vec<&NovTensor> = blocks
            .iter()
            .map(|b| fam.tensor(b).unwrap_or(&zero))
            .collect();
        let mut expected: BTreeMap<EvalGrid<GenId>, NovElem> = BTreeMap::new();
        let mut combos: Vec<(Vec<&EvalGrid<GenId>>, NovElem)> = vec![(Vec::new(), NovElem::one())];
        for bt in &block_tensors {
            let mut next = Vec::new();
            for (grids, coeff) in &combos {
                for (ev, c) in &bt.entries {
                    let mut g = grids.clone();
                    g.push(ev);
                    next.push((g, coeff.mul(c, fam.cap)));
                }
            }
            combos = next;
        }
        for (grids, coeff) in combos {
            if coeff.is_zero() {
                continue;
            }
            let glued = EvalGrid {
                alpha: grids.iter().flat_map(|g| g.alpha.clone()).collect(),
                beta: grids.iter().flat_map(|g| g.beta.clone()).collect(),
            };
            let slot = expected.entry(glued).or_default();
            *slot = slot.add(&coeff);
        }
        expected.retain(|_, v| !v.is_zero());
        let got = &t.entries;
        let keys: std::collections::BTreeSet<&EvalGrid<GenId>> =
            expected.keys().chain(got.keys()).collect();
        for k in keys {
            let e = expected.get(k).cloned().unwrap_or_default();
            let g = got.get(k).cloned().unwrap_or_default();
            if e != g {
                violations.push(format!(
                    "tensor at {} entry differs from the blockwise product: {} vs {}",
                    crate::flowcat::collection_text(&fam.cat, l),
                    g,
                    e
                ));
            }
        }
    }
    CompatReport { violations }
}

/// Re-derives the first bifunctor relation with figure-eight corrections
/// from the width-2 tensors, using the blockwise factored route: for each
/// 2-morphism generator x between parallel 1-morphisms L01, L01' and each
/// composable L12,
///   0 = mu2,1_(1,0)(mu1,1_(1)(x)) + sum_b mu1,1_(b)(fig8 ... mu2,1_(1,0)(x) ... fig8).
/// Preconditions: the disk curvature tensors vanish and the figure-eight
/// tensors have valuation at least epsilon.
pub fn bifunctor_identity_check(fam: &TensorFamily) -> Result<Vec<Residual>, CheckError> {
    // disk curvature must vanish
    for (l, t) in &fam.tensors {
        if l.r() == 1 && l.a() == 1 && l.shape().is_zero() && !t.is_zero() {
            return Err(CheckError::NonConvergence(format!(
                "disk curvature tensor at {} is nonzero",
                crate::flowcat::collection_text(&fam.cat, l)
            )));
        }
    }
    check_positive_energy(fam)?;
    let check_cap = fam.check_cap();
    let cat = &fam.cat;
    let slack = match fam.cap {
        EnergyCap::Unbounded => 1i64,
        EnergyCap::Bounded(c) => {
            let q = c.rat() / fam.epsilon.rat();
            q.numer() / q.denom() + if q.numer() % q.denom() != 0 { 1 } else { 0 }
        }
    };
    let b_max = slack.max(1) as usize;

    let mut out = Vec::new();
    for l01 in cat.mor_ids() {
        for l01p in cat.mor_ids() {
            if cat.src(l01) != cat.src(l01p) || cat.tgt(l01) != cat.tgt(l01p) {
                continue;
            }
            for l12 in cat.mor_ids() {
                if cat.src(l12) != cat.tgt(l01) {
                    continue;
                }
                let m0 = cat.src(l01);
                let m1 = cat.tgt(l01);
                let m2 = cat.tgt(l12);
                let whisker = Collection::new(
                    cat,
                    vec![m0, m1, m2],
                    vec![vec![vec![l01, l01p], vec![l12]]],
                )
                .map_err(|e| CheckError::NonConvergence(e.to_string()))?;
                let mu1_coll = Collection::new(cat, vec![m0, m1], vec![vec![vec![l01, l01p]]])
                    .map_err(|e| CheckError::NonConvergence(e.to_string()))?;
                let fig8_at = |l: MorId| -> Result<Collection, CheckError> {
                    Collection::new(cat, vec![m0, m1, m2], vec![vec![vec![l], vec![l12]]])
                        .map_err(|e| CheckError::NonConvergence(e.to_string()))
                };
                let fig8_lo = fig8_at(l01)?;
                let fig8_hi = fig8_at(l01p)?;
                let c_lo = cat
                    .compose2(l01, l12)
                    .map_err(|e| CheckError::NonConvergence(e.to_string()))?;
                let c_hi = cat
                    .compose2(l01p, l12)
                    .map_err(|e| CheckError::NonConvergence(e.to_string()))?;

                for x in fam.sig.between(l01, l01p) {
                    // class sums per output generator
                    let mut sums: BTreeMap<GenId, NovElem> = BTreeMap::new();
                    let add = |sums: &mut BTreeMap<GenId, NovElem>, q: GenId, v: NovElem| {
                        let slot = sums.entry(q).or_default();
                        *slot = slot.add(&v);
                    };
                    // term 1: whisker after the differential
                    if let (Some(t_mu1), Some(t_w)) = (fam.tensor(&mu1_coll), fam.tensor(&whisker))
                    {
                        for (ev1, c1) in &t_mu1.entries {
                            if ev1.alpha[0][0] != vec![x] {
                                continue;
                            }
                            let y = ev1.beta[0];
                            for (evw, cw) in &t_w.entries {
                                if evw.alpha[0][0] != vec![y] {
                                    continue;
                                }
                                add(&mut sums, evw.beta[0], c1.mul(cw, fam.cap));
                            }
                        }
                    }
                    // sum over b and the position of the whiskered factor
                    for b in 1..=b_max {
                        for pos in 1..=b {
                            // factor entries: position pos carries x, the
                            // others are figure-eight corrections
                            let mut factor_lists: Vec<Vec<(GenId, NovElem)>> = Vec::new();
                            let mut feasible = true;
                            for slot in 1..=b {
                                let list: Vec<(GenId, NovElem)> = if slot == pos {
                                    fam.tensor(&whisker)
                                        .map(|t| {
                                            t.entries
                                                .iter()
                                                .filter(|(ev, _)| ev.alpha[0][0] == vec![x])
                                                .map(|(ev, c)| (ev.beta[0], c.clone()))
                                                .collect()
                                        })
                                        .unwrap_or_default()
                                } else {
                                    let coll = if slot < pos { &fig8_lo } else { &fig8_hi };
                                    fam.tensor(coll)
                                        .map(|t| {
                                            t.entries
                                                .iter()
                                                .map(|(ev, c)| (ev.beta[0], c.clone()))
                                                .collect()
                                        })
                                        .unwrap_or_default()
                                };
                                if list.is_empty() {
                                    feasible = false;
                                    break;
                                }
                                factor_lists.push(list);
                            }
                            if !feasible {
                                continue;
                            }
                            // the vertical chain collection
                            let mut col = Vec::with_capacity(b + 1);
                            for lvl in 0..=b {
                                col.push(if lvl < pos { c_lo } else { c_hi });
                            }
                            let chain_coll = Collection::new(cat, vec![m0, m2], vec![vec![col]])
                                .map_err(|e| CheckError::NonConvergence(e.to_string()))?;
                            let Some(t_chain) = fam.tensor(&chain_coll) else {
                                continue;
                            };
                            let mut tuples: Vec<(Vec<GenId>, NovElem)> =
                                vec![(Vec::new(), NovElem::one())];
                            for list in &factor_lists {
                                let mut nexts = Vec::new();
                                for (qs, coeff) in &tuples {
                                    for (q, c) in list {
                                        let mut v = qs.clone();
                                        v.push(*q);
                                        nexts.push((v, coeff.mul(c, fam.cap)));
                                    }
                                }
                                tuples = nexts;
                            }
                            for (qs, coeff) in tuples {
                                if coeff.is_zero() {
                                    continue;
                                }
                                for (evc, cc) in &t_chain.entries {
                                    if evc.alpha[0][0] != qs {
                                        continue;
                                    }
                                    add(&mut sums, evc.beta[0], coeff.mul(cc, fam.cap));
                                }
                            }
                        }
                    }
                    for (q, v) in sums {
                        let value = v.truncate(check_cap);
                        if !value.is_zero() {
                            out.push(Residual {
                                collection: whisker.clone(),
                                evals: EvalGrid {
                                    alpha: vec![vec![vec![x], Vec::new()]],
                                    beta: vec![q],
                                },
                                value,
                                terms: Vec::new(),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
