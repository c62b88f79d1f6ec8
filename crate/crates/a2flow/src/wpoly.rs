//! Strata of 2-associahedra and of fiber products of 2-associahedra over
//! associahedra, as tree-pairs and coppices.
//!
//! A stratum of the fiber product for shape (r, a, n) is a shared seam tree
//! (a stratum of K_r) together with one bubble tree per block. Bubble trees
//! alternate component and seam layers; each seam is mapped to a seam-tree
//! vertex, marked points sit on leaf-mapped seams, and a component attached
//! at a seam mapping to vertex x either spreads over the children of x or
//! sits vertically at x itself. The face poset is generated from the top
//! stratum by three local move families: collision of a run of points or
//! nodes on one seam, collision of a window of children of a seam-tree
//! vertex (which refines the seam tree), and full collision of one
//! component's seams.
//!
//! Stability of a component: (#seams) + (#children of its seams) >= 3, with
//! pointless blocks and the one-point r = 1 block kept in their canonical
//! exceptional form. Every non-root component carries at least one marked
//! point. These rules reproduce the identification of W_(n) with K_n, the
//! trivial 2-associahedron over two pointless seams, and the identification
//! of all-zero shapes with associahedra via the forgetful map; the Euler
//! characteristic of every enumerated face poset is checked to be 1 in the
//! test suite.

use crate::onecat::OneCat;
use crate::shapes::{Collection, Descriptor, Shape, SplitState};
use crate::trees::{graft_k, KTree};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Seam tree with preorder vertex ids and span bookkeeping.
#[derive(Clone, Debug)]
pub struct Ts {
    pub tree: KTree,
    /// children ids per vertex, preorder ids
    pub children: Vec<Vec<usize>>,
    /// 1-based leaf number for leaves
    pub leaf_index: Vec<Option<usize>>,
    /// leaf span (lo, hi) per vertex, 1-based inclusive
    pub span: Vec<(usize, usize)>,
    /// path of child indices from the root, per vertex
    pub path: Vec<Vec<usize>>,
}

impl Ts {
    pub fn build(tree: &KTree) -> Ts {
        let mut ts = Ts {
            tree: tree.clone(),
            children: Vec::new(),
            leaf_index: Vec::new(),
            span: Vec::new(),
            path: Vec::new(),
        };
        fn go(t: &KTree, ts: &mut Ts, next_leaf: &mut usize, path: Vec<usize>) -> usize {
            let id = ts.children.len();
            ts.children.push(Vec::new());
            ts.leaf_index.push(None);
            ts.span.push((0, 0));
            ts.path.push(path.clone());
            match t {
                KTree::Leaf => {
                    *next_leaf += 1;
                    ts.leaf_index[id] = Some(*next_leaf);
                    ts.span[id] = (*next_leaf, *next_leaf);
                }
                KTree::Node(kids) => {
                    let mut childs = Vec::with_capacity(kids.len());
                    for (c, k) in kids.iter().enumerate() {
                        let mut p = path.clone();
                        p.push(c);
                        childs.push(go(k, ts, next_leaf, p));
                    }
                    let lo = ts.span[childs[0]].0;
                    let hi = ts.span[*childs.last().unwrap()].1;
                    ts.children[id] = childs;
                    ts.span[id] = (lo, hi);
                }
            }
            id
        }
        let mut next_leaf = 0;
        go(tree, &mut ts, &mut next_leaf, Vec::new());
        ts
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.leaf_index[v].is_some()
    }

    pub fn leaf_id(&self, leaf: usize) -> usize {
        self.leaf_index
            .iter()
            .position(|&l| l == Some(leaf))
            .expect("leaf number in range")
    }

    pub fn id_of_path(&self, path: &[usize]) -> usize {
        self.path
            .iter()
            .position(|p| p == path)
            .expect("path exists")
    }

    pub fn vertex_count(&self) -> usize {
        self.children.len()
    }

    pub fn internal_vertices(&self) -> Vec<usize> {
        (0..self.vertex_count())
            .filter(|&v| !self.is_leaf(v))
            .collect()
    }
}

/// Child of a seam: a marked point or an attached component.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Kid {
    Mark,
    Comp(Comp),
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Seam {
    /// preorder id of the seam-tree vertex this seam maps to
    pub target: usize,
    pub kids: Vec<Kid>,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Comp {
    pub seams: Vec<Seam>,
}

impl Comp {
    pub fn kid_count(&self) -> usize {
        self.seams.iter().map(|s| s.kids.len()).sum()
    }

    pub fn mark_count(&self) -> usize {
        self.seams
            .iter()
            .flat_map(|s| &s.kids)
            .map(|k| match k {
                Kid::Mark => 1,
                Kid::Comp(c) => c.mark_count(),
            })
            .sum()
    }
}

/// One tree-pair: a bubble tree over a shared seam tree (one block of a
/// coppice; a stratum of a single 2-associahedron when a = 1).
pub type TreePair = Comp;

/// A stratum of an iterated fiber product of 2-associahedra: tree-pairs for
/// every block referencing one shared seam tree.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Coppice {
    pub ts: KTree,
    pub blocks: Vec<Comp>,
}

impl Coppice {
    pub fn shape(&self) -> Shape {
        let ts = Ts::build(&self.ts);
        let r = self.ts.leaf_count();
        let rows = self
            .blocks
            .iter()
            .map(|b| {
                let mut row = vec![0u32; r];
                count_marks(b, &ts, &mut row);
                row
            })
            .collect();
        Shape::new(rows)
    }

    pub fn dim(&self) -> i64 {
        let ts = Ts::build(&self.ts);
        let mut d: i64 = ts
            .internal_vertices()
            .iter()
            .map(|&v| ts.children[v].len() as i64 - 2)
            .sum();
        for b in &self.blocks {
            d += comp_dim(b);
        }
        d
    }

    /// False exactly for the unstable-configuration strata: pointless
    /// blocks, one-point r = 1 blocks, and nothing else.
    pub fn all_blocks_stable_configs(&self) -> bool {
        let r = self.ts.leaf_count();
        self.blocks.iter().all(|b| {
            let m = b.mark_count();
            m >= 2 || (m == 1 && r >= 2)
        })
    }
}

fn count_marks(c: &Comp, ts: &Ts, row: &mut Vec<u32>) {
    for s in &c.seams {
        for k in &s.kids {
            match k {
                Kid::Mark => {
                    let leaf = ts.leaf_index[s.target].expect("marks sit on leaf seams");
                    row[leaf - 1] += 1;
                }
                Kid::Comp(inner) => count_marks(inner, ts, row),
            }
        }
    }
}

fn comp_dim(c: &Comp) -> i64 {
    let k = c.seams.len();
    let p = c.kid_count();
    let local = if k == 1 {
        if p >= 2 {
            p as i64 - 2
        } else {
            0
        }
    } else if p >= 1 {
        p as i64 - 1
    } else {
        0
    };
    local
        + c.seams
            .iter()
            .flat_map(|s| &s.kids)
            .map(|kid| match kid {
                Kid::Mark => 0,
                Kid::Comp(inner) => comp_dim(inner),
            })
            .sum::<i64>()
}

/// Forgetful projection to the associahedron: the shared seam tree.
pub fn forgetful(cop: &Coppice) -> KTree {
    cop.ts.clone()
}

fn canonical_pointless(ts: &Ts) -> Comp {
    if ts.vertex_count() == 1 {
        return Comp {
            seams: vec![Seam {
                target: 0,
                kids: Vec::new(),
            }],
        };
    }
    Comp {
        seams: ts.children[0]
            .iter()
            .map(|&v| Seam {
                target: v,
                kids: Vec::new(),
            })
            .collect(),
    }
}

fn top_block(ts: &Ts, row: &[u32]) -> Comp {
    let r = row.len();
    if row.iter().all(|&x| x == 0) {
        return canonical_pointless(ts);
    }
    if r == 1 {
        return Comp {
            seams: vec![Seam {
                target: 0,
                kids: vec![Kid::Mark; row[0] as usize],
            }],
        };
    }
    Comp {
        seams: ts.children[0]
            .iter()
            .map(|&v| Seam {
                target: v,
                kids: vec![Kid::Mark; row[ts.leaf_index[v].unwrap() - 1] as usize],
            })
            .collect(),
    }
}

/// The open stratum of the fiber product for a shape.
pub fn top_stratum(shape: &Shape) -> Coppice {
    let ts_tree = KTree::corolla(shape.r());
    let ts = Ts::build(&ts_tree);
    Coppice {
        ts: ts_tree,
        blocks: shape.n.iter().map(|row| top_block(&ts, row)).collect(),
    }
}

/// Structural and stability validity of a coppice for its own shape.
pub fn is_valid_stratum(cop: &Coppice) -> bool {
    let ts = Ts::build(&cop.ts);
    if !cop.ts.is_stable() {
        return false;
    }
    let r = cop.ts.leaf_count();
    for block in &cop.blocks {
        let mass = block.mark_count();
        if mass == 0 {
            if *block != canonical_pointless(&ts) {
                return false;
            }
            continue;
        }
        if r == 1 && mass == 1 {
            let one_point = Comp {
                seams: vec![Seam {
                    target: 0,
                    kids: vec![Kid::Mark],
                }],
            };
            if *block != one_point {
                return false;
            }
            continue;
        }
        if !comp_valid(block, &ts, true) {
            return false;
        }
    }
    true
}

fn cut_is_allowed(c: &Comp, ts: &Ts, at: usize) -> bool {
    let targets: Vec<usize> = c.seams.iter().map(|s| s.target).collect();
    targets == vec![at] || (!ts.is_leaf(at) && targets == ts.children[at])
}

fn comp_valid(c: &Comp, ts: &Ts, is_root: bool) -> bool {
    if is_root && !cut_is_allowed(c, ts, 0) {
        return false;
    }
    let k = c.seams.len();
    let p = c.kid_count();
    if k + p < 3 {
        return false;
    }
    if !is_root && c.mark_count() == 0 {
        return false;
    }
    for s in &c.seams {
        for kid in &s.kids {
            match kid {
                Kid::Mark => {
                    if !ts.is_leaf(s.target) {
                        return false;
                    }
                }
                Kid::Comp(inner) => {
                    if !cut_is_allowed(inner, ts, s.target) {
                        return false;
                    }
                    if !comp_valid(inner, ts, false) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Groupings of the kid lists of `t` parallel seams into `b` aligned runs
/// of consecutive (possibly empty) segments, every group nonempty overall.
/// `b` ranges over 0 (only when all lists are empty) up to the total count.
fn groupings(kid_lists: &[Vec<Kid>]) -> Vec<Vec<Vec<Vec<Kid>>>> {
    // result: list of choices; each choice is a list of groups; each group
    // is one segment per seam
    let total: usize = kid_lists.iter().map(|k| k.len()).sum();
    let mut out = Vec::new();
    if total == 0 {
        out.push(Vec::new());
        return out;
    }
    fn splits(list: &[Kid], b: usize) -> Vec<Vec<Vec<Kid>>> {
        // ordered splits into b possibly-empty consecutive segments
        if b == 0 {
            return if list.is_empty() {
                vec![vec![]]
            } else {
                vec![]
            };
        }
        let mut out = Vec::new();
        for first in 0..=list.len() {
            for rest in splits(&list[first..], b - 1) {
                let mut v = vec![list[..first].to_vec()];
                v.extend(rest);
                out.push(v);
            }
        }
        out
    }
    for b in 1..=total {
        let per_seam: Vec<Vec<Vec<Vec<Kid>>>> = kid_lists.iter().map(|l| splits(l, b)).collect();
        let mut acc: Vec<Vec<Vec<Vec<Kid>>>> = vec![Vec::new()];
        for seam_choices in &per_seam {
            let mut next = Vec::new();
            for partial in &acc {
                for choice in seam_choices {
                    let mut p = partial.clone();
                    p.push(choice.clone());
                    next.push(p);
                }
            }
            acc = next;
        }
        'choice: for per_seam_segs in acc {
            // transpose to groups
            let mut groups = Vec::with_capacity(b);
            for g in 0..b {
                let segs: Vec<Vec<Kid>> = per_seam_segs.iter().map(|s| s[g].clone()).collect();
                if segs.iter().all(|s| s.is_empty()) {
                    continue 'choice;
                }
                groups.push(segs);
            }
            out.push(groups);
        }
    }
    out
}

fn group_to_comp(targets: &[usize], group: Vec<Vec<Kid>>) -> Comp {
    Comp {
        seams: targets
            .iter()
            .zip(group)
            .map(|(&v, kids)| Seam { target: v, kids })
            .collect(),
    }
}

/// All one-step collisions of a run of two or more children on a single
/// seam anywhere in the component.
fn v_move_variants(c: &Comp) -> Vec<Comp> {
    let mut out = Vec::new();
    for (si, seam) in c.seams.iter().enumerate() {
        let len = seam.kids.len();
        for t in 2..=len {
            for lo in 0..=(len - t) {
                let bubble = Comp {
                    seams: vec![Seam {
                        target: seam.target,
                        kids: seam.kids[lo..lo + t].to_vec(),
                    }],
                };
                let mut kids: Vec<Kid> = seam.kids[..lo].to_vec();
                kids.push(Kid::Comp(bubble));
                kids.extend_from_slice(&seam.kids[lo + t..]);
                let mut nc = c.clone();
                nc.seams[si].kids = kids;
                out.push(nc);
            }
        }
        for (ki, kid) in seam.kids.iter().enumerate() {
            if let Kid::Comp(inner) = kid {
                for variant in v_move_variants(inner) {
                    let mut nc = c.clone();
                    nc.seams[si].kids[ki] = Kid::Comp(variant);
                    out.push(nc);
                }
            }
        }
    }
    out
}

/// All one-step full collisions of the seams of a single spreading
/// component mapping to `x`, anywhere in the tree.
fn t3_move_variants(c: &Comp, ts: &Ts, x: usize) -> Vec<Comp> {
    let mut out = Vec::new();
    let targets: Vec<usize> = c.seams.iter().map(|s| s.target).collect();
    if !ts.is_leaf(x) && targets == ts.children[x] && c.seams.len() >= 2 {
        let kid_lists: Vec<Vec<Kid>> = c.seams.iter().map(|s| s.kids.clone()).collect();
        for groups in groupings(&kid_lists) {
            let bubbles: Vec<Kid> = groups
                .into_iter()
                .map(|g| Kid::Comp(group_to_comp(&ts.children[x], g)))
                .collect();
            out.push(Comp {
                seams: vec![Seam {
                    target: x,
                    kids: bubbles,
                }],
            });
        }
    }
    for (si, seam) in c.seams.iter().enumerate() {
        for (ki, kid) in seam.kids.iter().enumerate() {
            if let Kid::Comp(inner) = kid {
                for variant in t3_move_variants(inner, ts, x) {
                    let mut nc = c.clone();
                    nc.seams[si].kids[ki] = Kid::Comp(variant);
                    out.push(nc);
                }
            }
        }
    }
    out
}

/// Refines the seam tree by inserting a vertex over children
/// `lo..lo+t` of `x`. Returns the new tree and the id remapping.
fn refine_ts(ts: &Ts, x: usize, lo: usize, t: usize) -> (KTree, Vec<usize>, usize) {
    fn rebuild(t_old: &KTree, path_to_x: &[usize], lo: usize, t: usize) -> KTree {
        if path_to_x.is_empty() {
            match t_old {
                KTree::Node(kids) => {
                    let mut new_kids: Vec<KTree> = kids[..lo].to_vec();
                    new_kids.push(KTree::Node(kids[lo..lo + t].to_vec()));
                    new_kids.extend_from_slice(&kids[lo + t..]);
                    KTree::Node(new_kids)
                }
                KTree::Leaf => unreachable!("refinement point is internal"),
            }
        } else {
            match t_old {
                KTree::Node(kids) => {
                    let mut new_kids = kids.clone();
                    new_kids[path_to_x[0]] = rebuild(&kids[path_to_x[0]], &path_to_x[1..], lo, t);
                    KTree::Node(new_kids)
                }
                KTree::Leaf => unreachable!(),
            }
        }
    }
    let new_tree = rebuild(&ts.tree, &ts.path[x], lo, t);
    let new_ts = Ts::build(&new_tree);
    let x_path = ts.path[x].clone();
    let mut id_map = vec![usize::MAX; ts.vertex_count()];
    for v in 0..ts.vertex_count() {
        let p = &ts.path[v];
        let new_path: Vec<usize> = if p.len() > x_path.len() && p[..x_path.len()] == x_path[..] {
            let c = p[x_path.len()];
            let mut np = x_path.clone();
            if (lo..lo + t).contains(&c) {
                np.push(lo);
                np.push(c - lo);
            } else if c >= lo + t {
                np.push(c - t + 1);
            } else {
                np.push(c);
            }
            np.extend_from_slice(&p[x_path.len() + 1..]);
            np
        } else {
            p.clone()
        };
        id_map[v] = new_ts.id_of_path(&new_path);
    }
    let mut rho_path = x_path;
    rho_path.push(lo);
    let rho = new_ts.id_of_path(&rho_path);
    (new_tree, id_map, rho)
}

fn retarget(c: &Comp, id_map: &[usize]) -> Comp {
    Comp {
        seams: c
            .seams
            .iter()
            .map(|s| Seam {
                target: id_map[s.target],
                kids: s
                    .kids
                    .iter()
                    .map(|k| match k {
                        Kid::Mark => Kid::Mark,
                        Kid::Comp(inner) => Kid::Comp(retarget(inner, id_map)),
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// All rewrites of an already retargeted component under a seam-tree
/// refinement: every component whose seam targets still read
/// `stale` (the pre-refinement cut with the window expanded) merges its
/// window seams into one seam at `rho`, with all grouping choices.
fn refine_variants(
    c: &Comp,
    stale: &[usize],
    lo: usize,
    t: usize,
    rho: usize,
    rho_children: &[usize],
) -> Vec<Comp> {
    let mut seam_kid_choices: Vec<Vec<Vec<Kid>>> = Vec::with_capacity(c.seams.len());
    for seam in &c.seams {
        let mut per_kid: Vec<Vec<Kid>> = Vec::with_capacity(seam.kids.len());
        for kid in &seam.kids {
            match kid {
                Kid::Mark => per_kid.push(vec![Kid::Mark]),
                Kid::Comp(inner) => per_kid.push(
                    refine_variants(inner, stale, lo, t, rho, rho_children)
                        .into_iter()
                        .map(Kid::Comp)
                        .collect(),
                ),
            }
        }
        let mut combos: Vec<Vec<Kid>> = vec![Vec::new()];
        for choices in per_kid {
            let mut next = Vec::new();
            for partial in &combos {
                for ch in &choices {
                    let mut p = partial.clone();
                    p.push(ch.clone());
                    next.push(p);
                }
            }
            combos = next;
        }
        seam_kid_choices.push(combos);
    }
    let mut comp_variants: Vec<Vec<Seam>> = vec![Vec::new()];
    for (seam, kid_choices) in c.seams.iter().zip(seam_kid_choices) {
        let mut next = Vec::new();
        for partial in &comp_variants {
            for kids in &kid_choices {
                let mut p = partial.clone();
                p.push(Seam {
                    target: seam.target,
                    kids: kids.clone(),
                });
                next.push(p);
            }
        }
        comp_variants = next;
    }

    let targets: Vec<usize> = c.seams.iter().map(|s| s.target).collect();
    let spans = targets == stale;
    let mut out = Vec::new();
    for seams in comp_variants {
        if spans {
            let window: Vec<Vec<Kid>> = seams[lo..lo + t].iter().map(|s| s.kids.clone()).collect();
            for groups in groupings(&window) {
                let bubbles: Vec<Kid> = groups
                    .into_iter()
                    .map(|g| Kid::Comp(group_to_comp(rho_children, g)))
                    .collect();
                let mut new_seams: Vec<Seam> = seams[..lo].to_vec();
                new_seams.push(Seam {
                    target: rho,
                    kids: bubbles,
                });
                new_seams.extend_from_slice(&seams[lo + t..]);
                out.push(Comp { seams: new_seams });
            }
        } else {
            out.push(Comp { seams });
        }
    }
    out
}

/// All codimension-1 degenerations of a stratum.
pub fn degenerations(cop: &Coppice) -> Vec<Coppice> {
    let ts = Ts::build(&cop.ts);
    let mut out: BTreeSet<Coppice> = BTreeSet::new();

    // point/node collisions on a single seam of a single block
    for (bi, block) in cop.blocks.iter().enumerate() {
        for variant in v_move_variants(block) {
            let mut blocks = cop.blocks.clone();
            blocks[bi] = variant;
            out.insert(Coppice {
                ts: cop.ts.clone(),
                blocks,
            });
        }
    }

    // full collision of one spreading component, per vertex and block
    for x in ts.internal_vertices() {
        for (bi, block) in cop.blocks.iter().enumerate() {
            for variant in t3_move_variants(block, &ts, x) {
                let mut blocks = cop.blocks.clone();
                blocks[bi] = variant;
                out.insert(Coppice {
                    ts: cop.ts.clone(),
                    blocks,
                });
            }
        }
    }

    // seam-tree refinements: a proper window of the children of a vertex
    for x in ts.internal_vertices() {
        let deg = ts.children[x].len();
        for t in 2..deg {
            for lo in 0..=(deg - t) {
                let (new_tree, id_map, rho) = refine_ts(&ts, x, lo, t);
                let new_ts = Ts::build(&new_tree);
                let rho_children = new_ts.children[rho].clone();
                // cut pattern left behind by pure retargeting
                let new_x = id_map[x];
                let mut stale: Vec<usize> = new_ts.children[new_x][..lo].to_vec();
                stale.extend_from_slice(&rho_children);
                stale.extend_from_slice(&new_ts.children[new_x][lo + 1..]);
                let mut block_variants: Vec<Vec<Comp>> = Vec::with_capacity(cop.blocks.len());
                for block in &cop.blocks {
                    let retargeted = retarget(block, &id_map);
                    block_variants.push(refine_variants(
                        &retargeted,
                        &stale,
                        lo,
                        t,
                        rho,
                        &rho_children,
                    ));
                }
                let mut combos: Vec<Vec<Comp>> = vec![Vec::new()];
                for choices in &block_variants {
                    let mut next = Vec::new();
                    for partial in &combos {
                        for ch in choices {
                            let mut p = partial.clone();
                            p.push(ch.clone());
                            next.push(p);
                        }
                    }
                    combos = next;
                }
                for blocks in combos {
                    out.insert(Coppice {
                        ts: new_tree.clone(),
                        blocks,
                    });
                }
            }
        }
    }

    out.into_iter()
        .filter(|c| is_valid_stratum(c) && c.dim() == cop.dim() - 1)
        .collect()
}

/// Face poset of the fiber product for a shape: strata, dimensions, and
/// covering relations.
#[derive(Clone, Debug)]
pub struct FacePoset {
    pub shape: Shape,
    pub strata: Vec<Coppice>,
    pub dims: Vec<i64>,
    /// (higher stratum index, lower stratum index), dim difference 1
    pub covers: Vec<(usize, usize)>,
    pub top: usize,
}

impl FacePoset {
    pub fn fvector(&self) -> Vec<usize> {
        crate::trees::fvector(self.dims.iter().copied())
    }

    pub fn euler_char(&self) -> i64 {
        crate::trees::euler_char(self.dims.iter().copied())
    }

    pub fn index_of(&self, cop: &Coppice) -> Option<usize> {
        self.strata.binary_search(cop).ok()
    }

    pub fn faces_of(&self, idx: usize) -> Vec<usize> {
        self.covers
            .iter()
            .filter(|&&(hi, _)| hi == idx)
            .map(|&(_, lo)| lo)
            .collect()
    }

    /// All saturated chains from the top stratum down to `idx`.
    pub fn chains_to(&self, idx: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = vec![vec![self.top]];
        while let Some(chain) = stack.pop() {
            let last = *chain.last().unwrap();
            if last == idx {
                out.push(chain);
                continue;
            }
            if self.dims[last] <= self.dims[idx] {
                continue;
            }
            for lo in self.faces_of(last) {
                let mut c = chain.clone();
                c.push(lo);
                stack.push(c);
            }
        }
        out.sort();
        out
    }

    /// DOT rendering: one node per stratum labelled with its dimension, one
    /// edge per covering relation.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph faces {\n");
        for (i, (cop, d)) in self.strata.iter().zip(&self.dims).enumerate() {
            s.push_str(&format!(
                "  s{} [label=\"dim {} | {}\"];\n",
                i,
                d,
                coppice_text(cop)
            ));
        }
        for &(hi, lo) in &self.covers {
            s.push_str(&format!("  s{} -> s{};\n", hi, lo));
        }
        s.push_str("}\n");
        s
    }
}

/// Deterministic one-line rendering of a coppice.
pub fn coppice_text(cop: &Coppice) -> String {
    fn comp_text(c: &Comp) -> String {
        let seams: Vec<String> = c
            .seams
            .iter()
            .map(|s| {
                let kids: Vec<String> = s
                    .kids
                    .iter()
                    .map(|k| match k {
                        Kid::Mark => ".".to_string(),
                        Kid::Comp(inner) => comp_text(inner),
                    })
                    .collect();
                format!("{}@{}", s.target, kids.join(""))
            })
            .collect();
        format!("[{}]", seams.join(" "))
    }
    let blocks: Vec<String> = cop.blocks.iter().map(comp_text).collect();
    format!("{} {}", cop.ts, blocks.join(" "))
}

/// Enumerates the face poset of the fiber product for a shape by breadth
/// first search from the top stratum.
pub fn enum_fiber(shape: &Shape) -> FacePoset {
    let top = top_stratum(shape);
    debug_assert!(is_valid_stratum(&top), "top stratum must be valid");
    let mut dims: BTreeMap<Coppice, i64> = BTreeMap::new();
    let mut covers: BTreeSet<(Coppice, Coppice)> = BTreeSet::new();
    let mut frontier = vec![top.clone()];
    dims.insert(top.clone(), top.dim());
    while let Some(c) = frontier.pop() {
        for d in degenerations(&c) {
            covers.insert((c.clone(), d.clone()));
            if !dims.contains_key(&d) {
                dims.insert(d.clone(), d.dim());
                frontier.push(d);
            }
        }
    }
    let strata: Vec<Coppice> = dims.keys().cloned().collect();
    let dim_list: Vec<i64> = strata.iter().map(|c| dims[c]).collect();
    let index: BTreeMap<&Coppice, usize> = strata.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let cover_list: Vec<(usize, usize)> = covers
        .iter()
        .map(|(hi, lo)| (index[hi], index[lo]))
        .collect();
    let top_idx = index[&top];
    FacePoset {
        shape: shape.clone(),
        strata,
        dims: dim_list,
        covers: cover_list,
        top: top_idx,
    }
}

/// Strata of a single 2-associahedron W_n. With `stable_only`, the
/// unstable-configuration strata (pointless shapes and the one-point r = 1
/// shape) are filtered out.
pub fn enum_w(n: &[u32], stable_only: bool) -> Vec<Coppice> {
    let poset = enum_fiber(&Shape::new(vec![n.to_vec()]));
    poset
        .strata
        .into_iter()
        .filter(|c| !stable_only || c.all_blocks_stable_configs())
        .collect()
}

pub fn w_dim(tp: &Coppice) -> i64 {
    tp.dim()
}

/// Graded bijection between the strata of W_(n) and of K_n, n >= 1.
pub fn w_as_k_iso(n: u32) -> Vec<(Coppice, KTree)> {
    fn comp_to_ktree(c: &Comp) -> KTree {
        assert_eq!(c.seams.len(), 1);
        let kids: Vec<KTree> = c.seams[0]
            .kids
            .iter()
            .map(|k| match k {
                Kid::Mark => KTree::Leaf,
                Kid::Comp(inner) => comp_to_ktree(inner),
            })
            .collect();
        if kids.is_empty() {
            // pointless block; its image is the bare leaf
            KTree::Leaf
        } else if kids.len() == 1 && c.seams[0].kids == vec![Kid::Mark] {
            KTree::Leaf
        } else {
            KTree::Node(kids)
        }
    }
    enum_w(&[n], false)
        .into_iter()
        .map(|c| {
            let k = comp_to_ktree(&c.blocks[0]);
            (c, k)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraftError {
    ShapeMismatch(String),
}

impl fmt::Display for GraftError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraftError::ShapeMismatch(m) => write!(f, "shape mismatch: {m}"),
        }
    }
}

impl std::error::Error for GraftError {}

/// Replaces the marks selected by `targets` (column, 1-based occurrence)
/// with the given components, counting occurrences in traversal order.
fn replace_marks(
    c: &Comp,
    ts: &Ts,
    counts: &mut Vec<u32>,
    targets: &mut BTreeMap<(usize, u32), Comp>,
) -> Comp {
    Comp {
        seams: c
            .seams
            .iter()
            .map(|s| Seam {
                target: s.target,
                kids: s
                    .kids
                    .iter()
                    .map(|k| match k {
                        Kid::Mark => {
                            let col = ts.leaf_index[s.target].unwrap();
                            counts[col - 1] += 1;
                            match targets.remove(&(col, counts[col - 1])) {
                                Some(repl) => Kid::Comp(repl),
                                None => Kid::Mark,
                            }
                        }
                        Kid::Comp(inner) => Kid::Comp(replace_marks(inner, ts, counts, targets)),
                    })
                    .collect(),
            })
            .collect(),
    }
}

fn delete_pointless(c: &Comp) -> Comp {
    Comp {
        seams: c
            .seams
            .iter()
            .map(|s| Seam {
                target: s.target,
                kids: s
                    .kids
                    .iter()
                    .filter_map(|k| match k {
                        Kid::Mark => Some(Kid::Mark),
                        Kid::Comp(inner) => {
                            if inner.mark_count() == 0 {
                                None
                            } else {
                                Some(Kid::Comp(delete_pointless(inner)))
                            }
                        }
                    })
                    .collect(),
            })
            .collect(),
    }
}

fn splice_chains(c: &Comp, is_root: bool) -> Comp {
    let mut c = Comp {
        seams: c
            .seams
            .iter()
            .map(|s| Seam {
                target: s.target,
                kids: s
                    .kids
                    .iter()
                    .map(|k| match k {
                        Kid::Mark => Kid::Mark,
                        Kid::Comp(inner) => {
                            let spliced = splice_chains(inner, false);
                            if spliced.seams.len() == 1 && spliced.seams[0].kids.len() == 1 {
                                spliced.seams[0].kids[0].clone()
                            } else {
                                Kid::Comp(spliced)
                            }
                        }
                    })
                    .collect(),
            })
            .collect(),
    };
    if is_root {
        while c.seams.len() == 1 && c.seams[0].kids.len() == 1 {
            match c.seams[0].kids[0].clone() {
                Kid::Comp(inner) => c = inner,
                Kid::Mark => break,
            }
        }
    }
    c
}

/// Canonical form after gluing: pointless bubbles disappear, single-child
/// shells are spliced out, pointless blocks revert to the canonical pair.
pub fn normalize(cop: &Coppice) -> Coppice {
    let ts = Ts::build(&cop.ts);
    Coppice {
        ts: cop.ts.clone(),
        blocks: cop
            .blocks
            .iter()
            .map(|b| {
                if b.mark_count() == 0 {
                    canonical_pointless(&ts)
                } else {
                    let mut cur = b.clone();
                    loop {
                        let next = splice_chains(&delete_pointless(&cur), true);
                        if next == cur {
                            break;
                        }
                        cur = next;
                    }
                    cur
                }
            })
            .collect(),
    }
}

/// Glues two strata along a boundary decomposition descriptor. `outer` is a
/// stratum of the descriptor's in shape and `inner` of its out shape; the
/// result is the corresponding stratum of the glued shape, in canonical
/// form. The seam tree is untouched for types 1 and 3 and grafted for
/// type 2.
pub fn gamma_graft(
    desc: &Descriptor,
    outer: &Coppice,
    inner: &Coppice,
) -> Result<Coppice, GraftError> {
    let shape_of = |c: &Coppice| c.shape();
    match desc {
        Descriptor::Type1 { i, j, s, t } => {
            if inner.ts != KTree::Leaf || inner.blocks.len() != 1 {
                return Err(GraftError::ShapeMismatch(
                    "inner must have r = a = 1".into(),
                ));
            }
            let inner_marks = inner.blocks[0].mark_count() as u32;
            if inner_marks != *t {
                return Err(GraftError::ShapeMismatch(format!(
                    "inner mass {} != t {}",
                    inner_marks, t
                )));
            }
            let ts = Ts::build(&outer.ts);
            let leaf = ts.leaf_id(*i);
            // the inner tree-pair's seams all target its single vertex
            let retargeted = retarget(&inner.blocks[0], &[leaf]);
            let mut blocks = outer.blocks.clone();
            let mut targets = BTreeMap::new();
            targets.insert((*i, *s + 1), retargeted);
            let mut counts = vec![0u32; outer.ts.leaf_count()];
            blocks[j - 1] = replace_marks(&outer.blocks[j - 1], &ts, &mut counts, &mut targets);
            if !targets.is_empty() {
                return Err(GraftError::ShapeMismatch(format!(
                    "no mark at column {} position {}",
                    i,
                    s + 1
                )));
            }
            Ok(normalize(&Coppice {
                ts: outer.ts.clone(),
                blocks,
            }))
        }
        Descriptor::Type2 { s, t: _, parts } => {
            let in_shape = shape_of(outer);
            if parts.len() != in_shape.a() {
                return Err(GraftError::ShapeMismatch("block count".into()));
            }
            let outer_ts = Ts::build(&outer.ts);
            let inner_ts_tree = forgetful(inner);
            let glued_tree = graft_k(&outer.ts, &inner_ts_tree, s + 1)
                .map_err(|e| GraftError::ShapeMismatch(e.to_string()))?;
            let glued_ts = Ts::build(&glued_tree);
            // id maps into the glued tree
            let graft_leaf_path = outer_ts.path[outer_ts.leaf_id(s + 1)].clone();
            let mut outer_map = vec![usize::MAX; outer_ts.vertex_count()];
            for v in 0..outer_ts.vertex_count() {
                outer_map[v] = glued_ts.id_of_path(&outer_ts.path[v]);
            }
            let inner_ts = Ts::build(&inner_ts_tree);
            let mut inner_map = vec![usize::MAX; inner_ts.vertex_count()];
            for v in 0..inner_ts.vertex_count() {
                let mut p = graft_leaf_path.clone();
                p.extend_from_slice(&inner_ts.path[v]);
                inner_map[v] = glued_ts.id_of_path(&p);
            }
            let mut blocks = Vec::with_capacity(parts.len());
            let mut offset = 0usize;
            for (jb, block_parts) in parts.iter().enumerate() {
                let mut targets = BTreeMap::new();
                for (l, _part) in block_parts.iter().enumerate() {
                    let inner_block = retarget(&inner.blocks[offset + l], &inner_map);
                    targets.insert((s + 1, l as u32 + 1), inner_block);
                }
                offset += block_parts.len();
                let host = retarget(&outer.blocks[jb], &outer_map);
                // marks are counted in the glued tree's leaf numbering, so
                // count with the outer leaf numbering instead: outer column
                // s+1 is the graft column
                let mut counts = vec![0u32; outer.ts.leaf_count()];
                let host_block = replace_marks_outer_cols(
                    &host,
                    &glued_ts,
                    &outer_col_of_glued(&outer_ts, &outer_map, &glued_ts),
                    &mut counts,
                    &mut targets,
                );
                if !targets.is_empty() {
                    return Err(GraftError::ShapeMismatch(format!(
                        "middle column of block {} too short",
                        jb + 1
                    )));
                }
                blocks.push(host_block);
            }
            Ok(normalize(&Coppice {
                ts: glued_tree,
                blocks,
            }))
        }
        Descriptor::Type3 { j, parts } => {
            if outer.ts != KTree::Leaf || outer.blocks.len() != 1 {
                return Err(GraftError::ShapeMismatch(
                    "outer must have r = a = 1".into(),
                ));
            }
            let b = parts.len();
            let out_shape = shape_of(inner);
            if inner.blocks.len() != out_shape.a() || inner.blocks.len() + 1 < *j + b {
                return Err(GraftError::ShapeMismatch("out block count".into()));
            }
            let glued_tree = inner.ts.clone();
            let glued_ts = Ts::build(&glued_tree);
            // outer chain: every seam retargets to the root vertex
            let chain = retarget(&outer.blocks[0], &[0]);
            let mut targets = BTreeMap::new();
            for l in 0..b {
                targets.insert((1, l as u32 + 1), inner.blocks[j - 1 + l].clone());
            }
            // outer columns: the single r = 1 column holds the b marks
            let mut counts = vec![0u32; 1];
            let fused = replace_marks_at_root(&chain, &mut counts, &mut targets);
            if !targets.is_empty() {
                return Err(GraftError::ShapeMismatch(format!(
                    "outer chain has fewer than {} marks",
                    b
                )));
            }
            let _ = glued_ts;
            let mut blocks: Vec<Comp> = inner.blocks[..j - 1].to_vec();
            blocks.push(fused);
            blocks.extend_from_slice(&inner.blocks[j - 1 + b..]);
            Ok(normalize(&Coppice {
                ts: glued_tree,
                blocks,
            }))
        }
    }
}

/// Column number of a glued-tree leaf in the outer tree's numbering; the
/// graft column is where the inner tree's leaves land.
fn outer_col_of_glued(outer_ts: &Ts, outer_map: &[usize], glued_ts: &Ts) -> Vec<usize> {
    let mut col = vec![0usize; glued_ts.vertex_count()];
    for v in 0..outer_ts.vertex_count() {
        if let Some(leaf) = outer_ts.leaf_index[v] {
            // every glued vertex in the subtree at outer leaf v belongs to
            // the outer column `leaf`
            let base = outer_map[v];
            let base_path = &glued_ts.path[base];
            for g in 0..glued_ts.vertex_count() {
                let p = &glued_ts.path[g];
                if p.len() >= base_path.len() && p[..base_path.len()] == base_path[..] {
                    col[g] = leaf;
                }
            }
        }
    }
    col
}

fn replace_marks_outer_cols(
    c: &Comp,
    glued_ts: &Ts,
    outer_col: &[usize],
    counts: &mut Vec<u32>,
    targets: &mut BTreeMap<(usize, u32), Comp>,
) -> Comp {
    Comp {
        seams: c
            .seams
            .iter()
            .map(|s| Seam {
                target: s.target,
                kids: s
                    .kids
                    .iter()
                    .map(|k| match k {
                        Kid::Mark => {
                            let col = outer_col[s.target];
                            counts[col - 1] += 1;
                            match targets.remove(&(col, counts[col - 1])) {
                                Some(repl) => Kid::Comp(repl),
                                None => Kid::Mark,
                            }
                        }
                        Kid::Comp(inner) => Kid::Comp(replace_marks_outer_cols(
                            inner, glued_ts, outer_col, counts, targets,
                        )),
                    })
                    .collect(),
            })
            .collect(),
    }
}

fn replace_marks_at_root(
    c: &Comp,
    counts: &mut Vec<u32>,
    targets: &mut BTreeMap<(usize, u32), Comp>,
) -> Comp {
    Comp {
        seams: c
            .seams
            .iter()
            .map(|s| Seam {
                target: s.target,
                kids: s
                    .kids
                    .iter()
                    .map(|k| match k {
                        Kid::Mark => {
                            counts[0] += 1;
                            match targets.remove(&(1, counts[0])) {
                                Some(repl) => Kid::Comp(repl),
                                None => Kid::Mark,
                            }
                        }
                        Kid::Comp(inner) => {
                            Kid::Comp(replace_marks_at_root(inner, counts, targets))
                        }
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// The codimension-1 strata of the fiber product, each tagged with the
/// unique descriptor producing it from the top strata of its two factors.
pub fn boundary_strata(shape: &Shape) -> Vec<(Descriptor, Coppice)> {
    let poset = enum_fiber(shape);
    let top_dim = poset.dims[poset.top];
    let mut out = Vec::new();
    for (idx, cop) in poset.strata.iter().enumerate() {
        if poset.dims[idx] != top_dim - 1 {
            continue;
        }
        out.push((recover_descriptor(shape, cop), cop.clone()));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Reads off the descriptor of a codimension-1 stratum from its structure.
fn recover_descriptor(shape: &Shape, cop: &Coppice) -> Descriptor {
    let ts = Ts::build(&cop.ts);
    let r = shape.r();
    if cop.ts != KTree::corolla(r) {
        // type 2: one extra internal vertex rho under the root
        let root_children = &ts.children[0];
        let rho_pos = root_children
            .iter()
            .position(|&v| !ts.is_leaf(v))
            .expect("codim-1 refined tree has one internal child");
        let rho = root_children[rho_pos];
        let t = ts.children[rho].len();
        let s = ts.span[rho].0 - 1;
        let mut parts = Vec::with_capacity(shape.a());
        for block in &cop.blocks {
            let seam = block
                .seams
                .iter()
                .find(|sm| sm.target == rho)
                .expect("block root spreads over the root");
            let mut block_parts: Vec<Vec<u32>> = Vec::new();
            for kid in &seam.kids {
                match kid {
                    Kid::Comp(c) => {
                        block_parts.push(c.seams.iter().map(|sm| sm.kids.len() as u32).collect())
                    }
                    Kid::Mark => unreachable!("marks cannot sit on a merged seam"),
                }
            }
            if block_parts.is_empty() {
                block_parts.push(vec![0; t]);
            }
            parts.push(block_parts);
        }
        return Descriptor::Type2 { s, t, parts };
    }
    // corolla: type 3 if some block root has a single root-targeted seam
    for (jb, block) in cop.blocks.iter().enumerate() {
        if r >= 2 && block.seams.len() == 1 && block.seams[0].target == 0 {
            let parts: Vec<Vec<u32>> = block.seams[0]
                .kids
                .iter()
                .map(|k| match k {
                    Kid::Comp(c) => c.seams.iter().map(|sm| sm.kids.len() as u32).collect(),
                    Kid::Mark => unreachable!(),
                })
                .collect();
            return Descriptor::Type3 { j: jb + 1, parts };
        }
    }
    // type 1: the unique bubble on a leaf seam of a block root
    for (jb, block) in cop.blocks.iter().enumerate() {
        for seam in &block.seams {
            let mut before = 0u32;
            for kid in &seam.kids {
                match kid {
                    Kid::Mark => before += 1,
                    Kid::Comp(c) => {
                        let i = ts.leaf_index[seam.target].expect("type-1 bubble on a leaf seam");
                        return Descriptor::Type1 {
                            i,
                            j: jb + 1,
                            s: before,
                            t: c.kid_count() as u32,
                        };
                    }
                }
            }
        }
    }
    unreachable!("codim-1 stratum matches no move family")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelError {
    ShapeMismatch(String),
    Composition(String),
    ConditionViolated(String),
}

impl fmt::Display for LabelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelError::ShapeMismatch(m) => write!(f, "labeling shape mismatch: {m}"),
            LabelError::Composition(m) => write!(f, "labeling composition failed: {m}"),
            LabelError::ConditionViolated(m) => write!(f, "labeling condition violated: {m}"),
        }
    }
}

impl std::error::Error for LabelError {}

/// Label sequences for every seam of every block, in traversal order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labeling {
    /// per block: (seam target vertex, labels), one entry per seam in
    /// depth-first order
    pub by_block: Vec<Vec<(usize, Vec<crate::onecat::MorId>)>>,
}

/// The canonical labeling induced by a collection on a coppice of the same
/// shape: the label left of a child records how many marked points of each
/// column lie strictly below it.
pub fn induced_labeling(
    cat: &OneCat,
    l: &Collection,
    cop: &Coppice,
) -> Result<Labeling, LabelError> {
    if cop.shape() != l.shape() {
        return Err(LabelError::ShapeMismatch(format!(
            "coppice shape {} vs collection shape {}",
            cop.shape(),
            l.shape()
        )));
    }
    let ts = Ts::build(&cop.ts);
    let mut by_block = Vec::with_capacity(cop.blocks.len());
    for (jb, block) in cop.blocks.iter().enumerate() {
        let mut counts = vec![0usize; cop.ts.leaf_count()];
        let mut labels = Vec::new();
        walk_labels(cat, l, jb, block, &ts, &mut counts, &mut labels)
            .map_err(|e| LabelError::Composition(e.to_string()))?;
        by_block.push(labels);
    }
    Ok(Labeling { by_block })
}

fn walk_labels(
    cat: &OneCat,
    l: &Collection,
    jb: usize,
    c: &Comp,
    ts: &Ts,
    counts: &mut Vec<usize>,
    out: &mut Vec<(usize, Vec<crate::onecat::MorId>)>,
) -> Result<(), crate::onecat::CatError> {
    for seam in &c.seams {
        let (lo, hi) = ts.span[seam.target];
        let gap_label = |cat: &OneCat, counts: &[usize]| -> Result<_, crate::onecat::CatError> {
            let chain: Vec<crate::onecat::MorId> = (lo..=hi)
                .map(|i| l.grid[jb][i - 1][counts[i - 1]])
                .collect();
            cat.compose_chain(&chain)
        };
        let mut labels = vec![gap_label(cat, counts)?];
        let my_index = out.len();
        out.push((seam.target, Vec::new()));
        for kid in &seam.kids {
            match kid {
                Kid::Mark => {
                    let col = ts.leaf_index[seam.target].unwrap();
                    counts[col - 1] += 1;
                }
                Kid::Comp(inner) => {
                    walk_labels(cat, l, jb, inner, ts, counts, out)?;
                }
            }
            labels.push(gap_label(cat, counts)?);
        }
        out[my_index].1 = labels;
    }
    Ok(())
}

/// Verifies the three labeling conditions for an explicit labeling of a
/// coppice (endpoint typing, matching across the covering order on each
/// seam level, and the composition condition at spreading components).
pub fn check_labeling(
    cat: &OneCat,
    l: &Collection,
    cop: &Coppice,
    labeling: &Labeling,
) -> Result<(), LabelError> {
    let reference = induced_labeling(cat, l, cop)?;
    if labeling.by_block.len() != reference.by_block.len() {
        return Err(LabelError::ShapeMismatch("block count".into()));
    }
    for (jb, (got, want)) in labeling
        .by_block
        .iter()
        .zip(&reference.by_block)
        .enumerate()
    {
        if got.len() != want.len() {
            return Err(LabelError::ShapeMismatch(format!(
                "seam count in block {}",
                jb + 1
            )));
        }
        for (si, ((gt, gl), (wt, wl))) in got.iter().zip(want).enumerate() {
            if gt != wt || gl.len() != wl.len() {
                return Err(LabelError::ShapeMismatch(format!(
                    "seam {} of block {}",
                    si,
                    jb + 1
                )));
            }
            if gl != wl {
                return Err(LabelError::ConditionViolated(format!(
                    "labels at seam {} of block {} do not satisfy the matching conditions",
                    si,
                    jb + 1
                )));
            }
        }
    }
    Ok(())
}

/// The factor collections of a stratum: one per single-seam component (in
/// block-then-traversal order) and one per internal seam-tree vertex with
/// spreading components (in preorder).
pub fn decomposition_shapes(
    cat: &OneCat,
    l: &Collection,
    cop: &Coppice,
) -> Result<(Vec<Collection>, Vec<Collection>), LabelError> {
    let ts = Ts::build(&cop.ts);
    let _ = induced_labeling(cat, l, cop)?; // validates shape + composability
                                            // collect per-seam labels keyed by component identity during a walk
    struct FactorWalk<'a> {
        cat: &'a OneCat,
        l: &'a Collection,
        ts: &'a Ts,
        jb: usize,
        counts: Vec<usize>,
        alphas: Vec<Collection>,
        rho_rows: BTreeMap<usize, Vec<Vec<Vec<crate::onecat::MorId>>>>,
    }
    impl<'a> FactorWalk<'a> {
        fn gap(&self, lo: usize, hi: usize) -> Result<crate::onecat::MorId, LabelError> {
            let chain: Vec<crate::onecat::MorId> = (lo..=hi)
                .map(|i| self.l.grid[self.jb][i - 1][self.counts[i - 1]])
                .collect();
            self.cat
                .compose_chain(&chain)
                .map_err(|e| LabelError::Composition(e.to_string()))
        }

        fn walk(&mut self, c: &Comp) -> Result<(), LabelError> {
            // gather this component's per-seam label columns
            let mut columns = Vec::with_capacity(c.seams.len());
            for seam in &c.seams {
                let (lo, hi) = self.ts.span[seam.target];
                let mut labels = vec![self.gap(lo, hi)?];
                for kid in &seam.kids {
                    match kid {
                        Kid::Mark => {
                            let col = self.ts.leaf_index[seam.target].unwrap();
                            self.counts[col - 1] += 1;
                        }
                        Kid::Comp(inner) => self.walk(inner)?,
                    }
                    labels.push(self.gap(lo, hi)?);
                }
                columns.push(labels);
            }
            if c.seams.len() == 1 {
                let (lo, hi) = self.ts.span[c.seams[0].target];
                let objects = vec![self.l.objects[lo - 1], self.l.objects[hi]];
                let col = columns.into_iter().next().unwrap();
                let coll = Collection::new(self.cat, objects, vec![vec![col]])
                    .map_err(|e| LabelError::Composition(e.to_string()))?;
                self.alphas.push(coll);
            } else {
                // spreading component over the parent of its seam targets
                let rho = self
                    .ts
                    .internal_vertices()
                    .into_iter()
                    .find(|&v| {
                        self.ts.children[v] == c.seams.iter().map(|s| s.target).collect::<Vec<_>>()
                    })
                    .expect("spreading component covers a vertex");
                self.rho_rows.entry(rho).or_default().push(columns);
            }
            Ok(())
        }
    }
    let mut alphas = Vec::new();
    let mut rho_rows: BTreeMap<usize, Vec<Vec<Vec<crate::onecat::MorId>>>> = BTreeMap::new();
    for (jb, block) in cop.blocks.iter().enumerate() {
        let mut w = FactorWalk {
            cat,
            l,
            ts: &ts,
            jb,
            counts: vec![0usize; cop.ts.leaf_count()],
            alphas: Vec::new(),
            rho_rows: BTreeMap::new(),
        };
        w.walk(block)?;
        alphas.extend(w.alphas);
        for (rho, rows) in w.rho_rows {
            rho_rows.entry(rho).or_default().extend(rows);
        }
    }
    let mut rhos = Vec::new();
    for (rho, rows) in rho_rows {
        let kids = &ts.children[rho];
        let mut objects = Vec::with_capacity(kids.len() + 1);
        objects.push(l.objects[ts.span[kids[0]].0 - 1]);
        for &k in kids {
            objects.push(l.objects[ts.span[k].1]);
        }
        let coll = Collection::new(cat, objects, rows)
            .map_err(|e| LabelError::Composition(e.to_string()))?;
        rhos.push(coll);
    }
    Ok((alphas, rhos))
}

/// Path-independence of iterated boundary decompositions: every saturated
/// chain from the top stratum to `idx` is replayed as a sequence of
/// descriptor splits at the collection level, and all replays must admit a
/// common final state up to renaming of internal eval tokens, matching the
/// stratum's own decomposition. Descriptor inference from a cover step can
/// be ambiguous on degenerate grids, so all consistent inferences are
/// explored.
pub fn assoc_check(
    cat: &OneCat,
    l: &Collection,
    poset: &FacePoset,
    idx: usize,
) -> Result<bool, LabelError> {
    let chains = poset.chains_to(idx);
    if chains.is_empty() {
        return Ok(true);
    }
    let mut want = factor_multiset(cat, l, &poset.strata[idx])?;
    want.sort();
    let mut per_chain: Vec<Vec<SplitState>> = Vec::new();
    for chain in &chains {
        // every replay must reproduce the stratum's own factors
        let states: Vec<SplitState> = replay_chain_all(cat, l, poset, chain)?
            .into_iter()
            .filter(|st| {
                let mut got: Vec<Collection> = st
                    .entries
                    .iter()
                    .map(|(c, _)| c.clone())
                    .filter(|c| !c.shape().is_zero())
                    .collect();
                got.sort();
                got == want
            })
            .collect();
        if states.is_empty() {
            return Ok(false);
        }
        per_chain.push(states);
    }
    let base = SplitState::start(l).token_base();
    // some wiring of the first chain must match every other chain
    'candidate: for s1 in &per_chain[0] {
        for other in &per_chain[1..] {
            if !other
                .iter()
                .any(|s2| crate::shapes::split_states_match(s1, s2, base))
            {
                continue 'candidate;
            }
        }
        return Ok(true);
    }
    Ok(false)
}

/// All replays of a poset chain as descriptor splits, branching over every
/// consistent (entry, descriptor) inference per step.
fn replay_chain_all(
    cat: &OneCat,
    l: &Collection,
    poset: &FacePoset,
    chain: &[usize],
) -> Result<Vec<SplitState>, LabelError> {
    let mut states = vec![SplitState::start_blockwise(l)];
    for step in chain.windows(2) {
        let (hi, lo) = (step[0], step[1]);
        let before = factor_multiset(cat, l, &poset.strata[hi])?;
        let after = factor_multiset(cat, l, &poset.strata[lo])?;
        let (removed, added) = multiset_diff(&before, &after);
        if removed.is_empty() && added.is_empty() {
            continue; // pure seam-tree refinement with no spreading factors
        }
        if removed.len() != 1 {
            return Ok(Vec::new());
        }
        let host = &removed[0];
        let mut added_sorted = added.clone();
        added_sorted.sort();
        let mut next = Vec::new();
        for st in &states {
            for (idx, (entry, _)) in st.entries.iter().enumerate() {
                if entry != host {
                    continue;
                }
                for d in candidate_descs(&host.shape()) {
                    let Ok((l_in, l_out)) = crate::shapes::split_pieces(cat, host, &d) else {
                        continue;
                    };
                    let mut produced = vec![l_in];
                    produced.extend(l_out);
                    produced.retain(|c| !c.shape().is_zero());
                    produced.sort();
                    if produced == added_sorted {
                        let mut branch = st.clone();
                        branch
                            .split(cat, idx, &d)
                            .map_err(|e| LabelError::Composition(e.to_string()))?;
                        next.push(branch);
                    }
                }
            }
        }
        states = next;
        if states.is_empty() {
            return Ok(Vec::new());
        }
    }
    Ok(states)
}

fn factor_multiset(
    cat: &OneCat,
    l: &Collection,
    cop: &Coppice,
) -> Result<Vec<Collection>, LabelError> {
    let (alphas, rhos) = decomposition_shapes(cat, l, cop)?;
    let mut v: Vec<Collection> = alphas.into_iter().chain(rhos).collect();
    v.retain(|c| !c.shape().is_zero());
    v.sort();
    Ok(v)
}

fn multiset_diff(
    before: &[Collection],
    after: &[Collection],
) -> (Vec<Collection>, Vec<Collection>) {
    let mut removed = Vec::new();
    let mut after_pool: Vec<Option<&Collection>> = after.iter().map(Some).collect();
    for b in before {
        if let Some(slot) = after_pool
            .iter_mut()
            .find(|s| s.map(|c| c == b).unwrap_or(false))
        {
            *slot = None;
        } else {
            removed.push(b.clone());
        }
    }
    let added: Vec<Collection> = after_pool.into_iter().flatten().cloned().collect();
    (removed, added)
}

/// Descriptor candidates used to match observed stratum-level splits: one
/// bubble carries every part, so partitions have only nonzero parts, and a
/// type-2 window with no content produces no parts at all.
fn candidate_descs(shape: &Shape) -> Vec<Descriptor> {
    let (r, a) = (shape.r(), shape.a());
    let mut out = Vec::new();
    for j in 1..=a {
        for i in 1..=r {
            let n = shape.n[j - 1][i - 1];
            for s in 0..=n {
                for t in 2..=(n - s).max(0) {
                    out.push(Descriptor::Type1 { i, j, s, t });
                }
            }
        }
    }
    if r >= 3 {
        for t in 2..=(r - 1) {
            for s in 0..=(r - t) {
                let mut per_block: Vec<Vec<Vec<Vec<u32>>>> = Vec::with_capacity(a);
                for row in &shape.n {
                    let window: Vec<u32> = row[s..s + t].to_vec();
                    let mass: u32 = window.iter().sum();
                    let mut choices = if mass == 0 {
                        vec![Vec::new()]
                    } else {
                        Vec::new()
                    };
                    choices.extend(nonzero_partitions(&window));
                    per_block.push(choices);
                }
                let mut acc: Vec<Vec<Vec<Vec<u32>>>> = vec![Vec::new()];
                for choices in &per_block {
                    let mut next = Vec::new();
                    for partial in &acc {
                        for c in choices {
                            let mut p = partial.clone();
                            p.push(c.clone());
                            next.push(p);
                        }
                    }
                    acc = next;
                }
                for parts in acc {
                    out.push(Descriptor::Type2 { s, t, parts });
                }
            }
        }
    }
    if r >= 2 {
        for j in 1..=a {
            for parts in nonzero_partitions(&shape.n[j - 1]) {
                out.push(Descriptor::Type3 { j, parts });
            }
        }
    }
    out
}

/// Ordered partitions of `target` into parts that are each nonzero; the
/// part count is bounded by the mass.
fn nonzero_partitions(target: &[u32]) -> Vec<Vec<Vec<u32>>> {
    fn go(rest: &[u32], acc: &mut Vec<Vec<u32>>, out: &mut Vec<Vec<Vec<u32>>>) {
        if rest.iter().all(|&x| x == 0) {
            if !acc.is_empty() {
                out.push(acc.clone());
            }
            return;
        }
        // choose the next part: any vector 0 <= p <= rest, p != 0
        fn parts_under(rest: &[u32]) -> Vec<Vec<u32>> {
            let mut out = vec![Vec::new()];
            for &x in rest {
                let mut next = Vec::new();
                for p in &out {
                    for v in 0..=x {
                        let mut q = p.clone();
                        q.push(v);
                        next.push(q);
                    }
                }
                out = next;
            }
            out.retain(|p| p.iter().any(|&v| v > 0));
            out
        }
        for p in parts_under(rest) {
            let new_rest: Vec<u32> = rest.iter().zip(&p).map(|(&r, &v)| r - v).collect();
            acc.push(p);
            go(&new_rest, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    go(target, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::novikov::{Energy, EnergyCap};
    use crate::onecat::OneCat;
    use crate::shapes::desc_collections;
    use crate::trees::enum_k;

    fn shape1(row: Vec<u32>) -> Shape {
        Shape::new(vec![row])
    }

    #[test]
    fn w_11_is_an_interval_with_two_type3_vertices() {
        let poset = enum_fiber(&shape1(vec![1, 1]));
        assert_eq!(poset.strata.len(), 3);
        assert_eq!(poset.fvector(), vec![2, 1]);
        assert_eq!(poset.euler_char(), 1);
        let b = boundary_strata(&shape1(vec![1, 1]));
        assert_eq!(b.len(), 2);
        assert!(b.iter().all(|(d, _)| d.type_tag() == 3));
    }

    #[test]
    fn pointless_shapes_match_associahedra() {
        // W_{(0,0)} is a single point
        let poset = enum_fiber(&shape1(vec![0, 0]));
        assert_eq!(poset.strata.len(), 1);
        assert_eq!(poset.dims, vec![0]);
        // W_{(0,0,0)} matches K_3 через the forgetful map, with dims
        let poset = enum_fiber(&shape1(vec![0, 0, 0]));
        let mut image: Vec<(KTree, i64)> = poset
            .strata
            .iter()
            .zip(&poset.dims)
            .map(|(c, &d)| (forgetful(c), d))
            .collect();
        image.sort();
        let mut want: Vec<(KTree, i64)> = enum_k(3)
            .into_iter()
            .map(|t| (t.clone(), t.dim()))
            .collect();
        want.sort();
        assert_eq!(image, want);
    }

    #[test]
    fn w_n_matches_k_n() {
        for n in 1..=4u32 {
            let pairs = w_as_k_iso(n);
            let mut ks: Vec<KTree> = pairs.iter().map(|(_, k)| k.clone()).collect();
            ks.sort();
            let mut want = enum_k(n as usize);
            want.sort();
            assert_eq!(ks, want, "W_({n}) vs K_{n}");
            for (cop, k) in &pairs {
                assert_eq!(cop.dim(), k.dim(), "grading at n={n}");
            }
        }
    }

    #[test]
    fn exceptional_point_strata() {
        assert_eq!(enum_w(&[0], false).len(), 1);
        assert_eq!(enum_w(&[1], false).len(), 1);
        assert!(enum_w(&[1], false)[0].dim() == 0);
        // stable-only filters the unstable configurations out
        assert_eq!(enum_w(&[1], true).len(), 0);
        assert_eq!(enum_w(&[2], true).len(), 1);
    }

    #[test]
    fn euler_characteristic_is_one_on_small_shapes() {
        for row in [
            vec![3],
            vec![4],
            vec![1, 1],
            vec![2, 0],
            vec![2, 1],
            vec![1, 0, 0],
            vec![1, 1, 1],
            vec![0, 0, 0, 0],
        ] {
            let poset = enum_fiber(&shape1(row.clone()));
            assert_eq!(poset.euler_char(), 1, "chi of W_{row:?}");
        }
    }

    #[test]
    fn forgetful_is_surjective_on_small_shapes() {
        for row in [vec![1, 0, 0], vec![1, 1, 1], vec![2, 1]] {
            let r = row.len();
            let poset = enum_fiber(&shape1(row.clone()));
            let image: std::collections::BTreeSet<KTree> =
                poset.strata.iter().map(forgetful).collect();
            let want: std::collections::BTreeSet<KTree> = enum_k(r).into_iter().collect();
            assert_eq!(image, want, "pi onto K_{r} for W_{row:?}");
        }
    }

    #[test]
    fn fiber_products_over_a_point_are_products() {
        // K_2 is a point, so the fiber product is a product of posets
        let w11 = enum_fiber(&shape1(vec![1, 1])).strata.len();
        let both = enum_fiber(&Shape::new(vec![vec![1, 1], vec![0, 0]]));
        assert_eq!(both.strata.len(), w11);
        let square = enum_fiber(&Shape::new(vec![vec![1, 1], vec![1, 1]]));
        assert_eq!(square.strata.len(), w11 * w11);
        assert_eq!(square.euler_char(), 1);
        // r = 1: point x point over K_1
        let pp = enum_fiber(&Shape::new(vec![vec![1], vec![1]]));
        assert_eq!(pp.strata.len(), 1);
    }

    #[test]
    fn boundary_tags_glue_back() {
        for shape in [
            shape1(vec![1, 1]),
            shape1(vec![2, 0]),
            shape1(vec![3]),
            shape1(vec![1, 0, 0]),
            Shape::new(vec![vec![1, 1], vec![0, 0]]),
        ] {
            for (d, stratum) in boundary_strata(&shape) {
                let (in_shape, out_shape) = crate::shapes::desc_shapes(&shape, &d).unwrap();
                let glued =
                    gamma_graft(&d, &top_stratum(&in_shape), &top_stratum(&out_shape)).unwrap();
                assert_eq!(glued, stratum, "desc {d} on shape {shape}");
            }
        }
    }

    #[test]
    fn degenerate_type1_gluings_normalize() {
        // gluing two one-point factors along t = 2 gives the point W_(2)
        let d = Descriptor::Type1 {
            i: 1,
            j: 1,
            s: 0,
            t: 2,
        };
        let one = top_stratum(&shape1(vec![1]));
        let two = top_stratum(&shape1(vec![2]));
        let glued = gamma_graft(&d, &one, &two).unwrap();
        assert_eq!(glued, two);
        // t = 0 inserts a pointless bubble which normalizes away; the glued
        // shape is ((1)) since the in factor carries one extra slot
        let d = Descriptor::Type1 {
            i: 1,
            j: 1,
            s: 1,
            t: 0,
        };
        let zero = top_stratum(&shape1(vec![0]));
        let glued = gamma_graft(&d, &two, &zero).unwrap();
        assert_eq!(glued, one);
    }

    #[test]
    fn type2_graft_commutes_with_forgetful() {
        // forgetful(gamma_graft(type-2)) = graft_k of the forgetful images
        let shape = shape1(vec![1, 0, 0]);
        for (d, stratum) in boundary_strata(&shape) {
            if let Descriptor::Type2 { s, .. } = &d {
                let (in_shape, out_shape) = crate::shapes::desc_shapes(&shape, &d).unwrap();
                let outer = top_stratum(&in_shape);
                let inner = top_stratum(&out_shape);
                let glued = gamma_graft(&d, &outer, &inner).unwrap();
                let want = graft_k(&forgetful(&outer), &forgetful(&inner), s + 1).unwrap();
                assert_eq!(forgetful(&glued), want);
                assert_eq!(glued, stratum);
            }
        }
    }

    #[test]
    fn labeling_and_decomposition_on_w11_vertex() {
        // distinct 1-morphisms so the labels are informative
        let mut cat = OneCat::new();
        let m0 = cat.add_object("M0").unwrap();
        let m1 = cat.add_object("M1").unwrap();
        let m2 = cat.add_object("M2").unwrap();
        let ids: Vec<_> = [m0, m1, m2]
            .iter()
            .map(|&o| {
                let id = cat
                    .add_mor(&format!("i{}", cat.object_name(o)), o, o)
                    .unwrap();
                cat.set_identity(o, id);
                id
            })
            .collect();
        let a0 = cat.add_mor("a0", m0, m1).unwrap();
        let a1 = cat.add_mor("a1", m0, m1).unwrap();
        let b0 = cat.add_mor("b0", m1, m2).unwrap();
        let b1 = cat.add_mor("b1", m1, m2).unwrap();
        // products with names ab{i}{k}
        let mut prod = std::collections::BTreeMap::new();
        for (ai, &a) in [a0, a1].iter().enumerate() {
            for (bi, &b) in [b0, b1].iter().enumerate() {
                let p = cat.add_mor(&format!("c{ai}{bi}"), m0, m2).unwrap();
                prod.insert((a, b), p);
            }
        }
        for m in cat.mor_ids().collect::<Vec<_>>() {
            for &i in &ids {
                if cat.tgt(m) == cat.src(i) {
                    cat.set_compose(m, i, m);
                }
                if cat.tgt(i) == cat.src(m) {
                    cat.set_compose(i, m, m);
                }
            }
        }
        for (&(a, b), &p) in &prod {
            cat.set_compose(a, b, p);
        }

        let l = Collection::new(
            &cat,
            vec![m0, m1, m2],
            vec![vec![vec![a0, a1], vec![b0, b1]]],
        )
        .unwrap();

        let poset = enum_fiber(&shape1(vec![1, 1]));
        // top decomposes as ([], [L])
        let top = &poset.strata[poset.top];
        let (alphas, rhos) = decomposition_shapes(&cat, &l, top).unwrap();
        assert!(alphas.is_empty());
        assert_eq!(rhos, vec![l.clone()]);

        // the vertex with partition (1,0)+(0,1): alpha of shape ((2)) over
        // the composites, rho of shape (2,2,((1,0),(0,1)))
        let d = Descriptor::Type3 {
            j: 1,
            parts: vec![vec![1, 0], vec![0, 1]],
        };
        let vertex = poset
            .strata
            .iter()
            .find(|c| {
                poset.dims[poset.index_of(c).unwrap()] == 0
                    && recover_descriptor(&shape1(vec![1, 1]), c) == d
            })
            .unwrap();
        let (alphas, rhos) = decomposition_shapes(&cat, &l, vertex).unwrap();
        assert_eq!(alphas.len(), 1);
        assert_eq!(rhos.len(), 1);
        assert_eq!(alphas[0].shape(), shape1(vec![2]));
        assert_eq!(rhos[0].shape(), Shape::new(vec![vec![1, 0], vec![0, 1]]));
        // alpha column lists the three composites c00, c10, c11
        let want_col = vec![prod[&(a0, b0)], prod[&(a1, b0)], prod[&(a1, b1)]];
        assert_eq!(alphas[0].grid[0][0], want_col);
        // matches desc_collections up to the same data
        let (l_in, l_out) = desc_collections(&cat, &l, &d).unwrap();
        assert_eq!(alphas[0], l_in);
        assert_eq!(rhos[0], l_out);

        // labeling checker accepts the induced labeling and rejects a
        // corrupted one
        let induced = induced_labeling(&cat, &l, vertex).unwrap();
        check_labeling(&cat, &l, vertex, &induced).unwrap();
        let mut bad = induced.clone();
        bad.by_block[0][0].1[0] = prod[&(a1, b1)];
        assert!(matches!(
            check_labeling(&cat, &l, vertex, &bad),
            Err(LabelError::ConditionViolated(_))
        ));
    }

    #[test]
    fn assoc_check_codim_2() {
        let cat = OneCat::single_object();
        let o = cat.object_by_name("X").unwrap();
        let m = cat.mor_by_name("1").unwrap();
        for shape in [shape1(vec![4]), shape1(vec![1, 1, 1]), shape1(vec![2, 1])] {
            let r = shape.r();
            let grid: Vec<Vec<Vec<crate::onecat::MorId>>> = vec![shape.n[0]
                .iter()
                .map(|&n| vec![m; n as usize + 1])
                .collect()];
            let l = Collection::new(&cat, vec![o; r + 1], grid).unwrap();
            let poset = enum_fiber(&shape);
            let top_dim = poset.dims[poset.top];
            for idx in 0..poset.strata.len() {
                if poset.dims[idx] == top_dim - 2 {
                    assert!(
                        assoc_check(&cat, &l, &poset, idx).unwrap(),
                        "assoc at {} in {}",
                        coppice_text(&poset.strata[idx]),
                        shape
                    );
                }
            }
        }
    }

    #[test]
    fn descriptor_enum_agrees_with_boundary_on_nonzero_columns() {
        // every boundary tag appears in enum_desc's output
        let shape = shape1(vec![2, 1]);
        let descs =
            crate::shapes::enum_desc(&shape, EnergyCap::Bounded(Energy::from_int(2)), Energy::ONE)
                .unwrap();
        for (d, _) in boundary_strata(&shape) {
            assert!(descs.contains(&d), "{d} missing from enum_desc");
        }
    }
}
