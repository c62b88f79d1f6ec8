//! Shapes of 1-morphism collections, the three families of boundary
//! decomposition descriptors, the induced in/out collections, and the
//! eval-grid gluing bookkeeping.
//!
//! A shape is a width `r >= 1`, a block count `a >= 1`, and an `a x r`
//! matrix of nonnegative integers. A collection fills the shape with
//! 1-morphisms: block `j`, column `i` holds `n[j][i] + 1` parallel
//! 1-morphisms from object `i-1` to object `i`.

use crate::novikov::{Energy, EnergyCap};
use crate::onecat::{CatError, MorId, ObjId, OneCat};

use std::fmt;
use std::str::FromStr;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Shape {
    /// rows of the matrix, one per block; all rows have equal length r >= 1
    pub n: Vec<Vec<u32>>,
}

impl Shape {
    pub fn new(n: Vec<Vec<u32>>) -> Shape {
        assert!(!n.is_empty(), "a >= 1");
        assert!(!n[0].is_empty(), "r >= 1");
        assert!(n.iter().all(|row| row.len() == n[0].len()));
        Shape { n }
    }

    pub fn r(&self) -> usize {
        self.n[0].len()
    }

    pub fn a(&self) -> usize {
        self.n.len()
    }

    pub fn mass(&self) -> u32 {
        self.n.iter().flatten().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.mass() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .n
            .iter()
            .map(|row| {
                row.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        write!(f, "{}", rows.join(";"))
    }
}

impl FromStr for Shape {
    type Err = String;
    fn from_str(s: &str) -> Result<Shape, String> {
        let mut rows = Vec::new();
        for row in s.split(';') {
            let mut r = Vec::new();
            for cell in row.split(',') {
                r.push(
                    cell.trim()
                        .parse::<u32>()
                        .map_err(|_| format!("bad shape cell {cell:?}"))?,
                );
            }
            rows.push(r);
        }
        if rows.is_empty() || rows[0].is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
            return Err(format!("bad shape {s:?}"));
        }
        Ok(Shape::new(rows))
    }
}

/// A shaped grid of 1-morphisms with its ambient objects.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Collection {
    /// objects M_0 .. M_r
    pub objects: Vec<ObjId>,
    /// grid[j][i] lists the n[j][i] + 1 parallel 1-morphisms M_{i-1} -> M_i
    pub grid: Vec<Vec<Vec<MorId>>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShapeError {
    EndpointMismatch { i: usize, j: usize, k: usize },
    EmptyColumn { i: usize, j: usize },
    BadObjects,
    Cat(CatError),
}

impl fmt::Display for ShapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeError::EndpointMismatch { i, j, k } => {
                write!(f, "endpoint mismatch at (i={i}, j={j}, k={k})")
            }
            ShapeError::EmptyColumn { i, j } => write!(f, "empty column at (i={i}, j={j})"),
            ShapeError::BadObjects => write!(f, "object chain has wrong length"),
            ShapeError::Cat(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ShapeError {}

impl From<CatError> for ShapeError {
    fn from(e: CatError) -> ShapeError {
        ShapeError::Cat(e)
    }
}

impl Collection {
    /// Validates endpoints and the derived composed endpoints.
    pub fn new(
        cat: &OneCat,
        objects: Vec<ObjId>,
        grid: Vec<Vec<Vec<MorId>>>,
    ) -> Result<Collection, ShapeError> {
        if objects.len() < 2 || grid.is_empty() {
            return Err(ShapeError::BadObjects);
        }
        let r = objects.len() - 1;
        for (j, block) in grid.iter().enumerate() {
            if block.len() != r {
                return Err(ShapeError::BadObjects);
            }
            for (i, col) in block.iter().enumerate() {
                if col.is_empty() {
                    return Err(ShapeError::EmptyColumn { i: i + 1, j: j + 1 });
                }
                for (k, &m) in col.iter().enumerate() {
                    if cat.src(m) != objects[i] || cat.tgt(m) != objects[i + 1] {
                        return Err(ShapeError::EndpointMismatch {
                            i: i + 1,
                            j: j + 1,
                            k,
                        });
                    }
                }
            }
        }
        let c = Collection { objects, grid };
        // composed endpoints must exist in the category
        for j in 1..=c.shape().a() {
            c.composed_endpoints(cat, j)?;
        }
        Ok(c)
    }

    pub fn shape(&self) -> Shape {
        Shape::new(
            self.grid
                .iter()
                .map(|block| block.iter().map(|col| col.len() as u32 - 1).collect())
                .collect(),
        )
    }

    pub fn r(&self) -> usize {
        self.objects.len() - 1
    }

    pub fn a(&self) -> usize {
        self.grid.len()
    }

    /// Bottom and top composed 1-morphisms of block `j` (1-based):
    /// L^{j,0}_{01} o ... o L^{j,0}_{(r-1)r} and the all-top version.
    pub fn composed_endpoints(&self, cat: &OneCat, j: usize) -> Result<(MorId, MorId), ShapeError> {
        let block = &self.grid[j - 1];
        let bottoms: Vec<MorId> = block.iter().map(|col| col[0]).collect();
        let tops: Vec<MorId> = block.iter().map(|col| *col.last().unwrap()).collect();
        Ok((cat.compose_chain(&bottoms)?, cat.compose_chain(&tops)?))
    }

    /// The consecutive pair of 1-morphisms under eval slot (i, j, k), all
    /// 1-based with 1 <= k <= n[j][i].
    pub fn slot_pair(&self, i: usize, j: usize, k: usize) -> (MorId, MorId) {
        let col = &self.grid[j - 1][i - 1];
        (col[k - 1], col[k])
    }

    /// Block `j` as a stand-alone one-block collection.
    pub fn block(&self, j: usize) -> Collection {
        Collection {
            objects: self.objects.clone(),
            grid: vec![self.grid[j - 1].clone()],
        }
    }
}

/// Convenience constructor mirroring the spec operation name.
pub fn make_collection(
    cat: &OneCat,
    objects: Vec<ObjId>,
    grid: Vec<Vec<Vec<MorId>>>,
) -> Result<Collection, ShapeError> {
    Collection::new(cat, objects, grid)
}

/// One boundary decomposition datum. Indices `i`, `j` are 1-based.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Descriptor {
    /// Collision of marked points s+1..s+t on column i of block j.
    Type1 { i: usize, j: usize, s: u32, t: u32 },
    /// Collision of columns s+1..s+t (0 <= s, 2 <= t <= r-1), with an
    /// ordered partition of each block's column window; parts[j-1] lists
    /// the b^j parts, each a vector of length t.
    Type2 {
        s: usize,
        t: usize,
        parts: Vec<Vec<Vec<u32>>>,
    },
    /// Full-width collision on block j with an ordered partition of the
    /// block row into b parts, each a vector of length r.
    Type3 { j: usize, parts: Vec<Vec<u32>> },
}

impl Descriptor {
    pub fn type_tag(&self) -> u8 {
        match self {
            Descriptor::Type1 { .. } => 1,
            Descriptor::Type2 { .. } => 2,
            Descriptor::Type3 { .. } => 3,
        }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn part_list(parts: &[Vec<u32>]) -> String {
            let inner: Vec<String> = parts
                .iter()
                .map(|p| {
                    p.iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect();
            format!("[{}]", inner.join("|"))
        }
        match self {
            Descriptor::Type1 { i, j, s, t } => write!(f, "T1({i},{j},{s},{t})"),
            Descriptor::Type2 { s, t, parts } => {
                write!(f, "T2({s},{t}")?;
                for block in parts {
                    write!(f, ";{}", part_list(block))?;
                }
                write!(f, ")")
            }
            Descriptor::Type3 { j, parts } => write!(f, "T3({j};{})", part_list(parts)),
        }
    }
}

impl FromStr for Descriptor {
    type Err = String;
    fn from_str(s: &str) -> Result<Descriptor, String> {
        let bad = || format!("bad descriptor {s:?}");
        let s = s.trim();
        let body = |prefix: &str| -> Option<&str> { s.strip_prefix(prefix)?.strip_suffix(')') };
        fn parse_parts(s: &str) -> Result<Vec<Vec<u32>>, String> {
            let inner = s
                .strip_prefix('[')
                .and_then(|x| x.strip_suffix(']'))
                .ok_or_else(|| format!("bad part list {s:?}"))?;
            inner
                .split('|')
                .map(|p| {
                    p.split(',')
                        .map(|x| {
                            x.trim()
                                .parse::<u32>()
                                .map_err(|_| format!("bad part {p:?}"))
                        })
                        .collect()
                })
                .collect()
        }
        if let Some(b) = body("T1(") {
            let xs: Vec<&str> = b.split(',').collect();
            if xs.len() != 4 {
                return Err(bad());
            }
            return Ok(Descriptor::Type1 {
                i: xs[0].trim().parse().map_err(|_| bad())?,
                j: xs[1].trim().parse().map_err(|_| bad())?,
                s: xs[2].trim().parse().map_err(|_| bad())?,
                t: xs[3].trim().parse().map_err(|_| bad())?,
            });
        }
        if let Some(b) = body("T2(") {
            let mut pieces = b.split(';');
            let head = pieces.next().ok_or_else(bad)?;
            let (s_str, t_str) = head.split_once(',').ok_or_else(bad)?;
            let parts: Result<Vec<_>, _> = pieces.map(parse_parts).collect();
            let parts = parts?;
            if parts.is_empty() {
                return Err(bad());
            }
            return Ok(Descriptor::Type2 {
                s: s_str.trim().parse().map_err(|_| bad())?,
                t: t_str.trim().parse().map_err(|_| bad())?,
                parts,
            });
        }
        if let Some(b) = body("T3(") {
            let (j_str, parts_str) = b.split_once(';').ok_or_else(bad)?;
            return Ok(Descriptor::Type3 {
                j: j_str.trim().parse().map_err(|_| bad())?,
                parts: parse_parts(parts_str)?,
            });
        }
        Err(bad())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DescError {
    InvalidForShape(String),
    NonpositiveEpsilon,
}

impl fmt::Display for DescError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DescError::InvalidForShape(d) => write!(f, "descriptor {d} invalid for shape"),
            DescError::NonpositiveEpsilon => {
                write!(f, "nonpositive epsilon with unbounded partitions")
            }
        }
    }
}

impl std::error::Error for DescError {}

/// Checks the structural constraints of a descriptor against a shape.
/// Type-2 partitions must have at least one part per block.
pub fn desc_valid(shape: &Shape, d: &Descriptor) -> bool {
    if let Descriptor::Type2 { parts, .. } = d {
        if parts.iter().any(|block| block.is_empty()) {
            return false;
        }
    }
    desc_valid_relaxed(shape, d)
}

/// Like [`desc_valid`] but allows empty type-2 partition blocks, the
/// convention for a column window that carries nothing at all (no bubble
/// forms). Splitting a collection accepts this relaxed form.
pub fn desc_valid_relaxed(shape: &Shape, d: &Descriptor) -> bool {
    let (r, a) = (shape.r(), shape.a());
    match d {
        Descriptor::Type1 { i, j, s, t } => {
            (1..=r).contains(i) && (1..=a).contains(j) && s + t <= shape.n[j - 1][i - 1]
        }
        Descriptor::Type2 { s, t, parts } => {
            if r < 3 || *t < 2 || *t > r - 1 || s + t > r || parts.len() != a {
                return false;
            }
            parts.iter().enumerate().all(|(jb, block)| {
                block.iter().all(|p| p.len() == *t)
                    && (0..*t)
                        .all(|c| block.iter().map(|p| p[c]).sum::<u32>() == shape.n[jb][s + c])
            })
        }
        Descriptor::Type3 { j, parts } => {
            r >= 2
                && (1..=a).contains(j)
                && !parts.is_empty()
                && parts.iter().all(|p| p.len() == r)
                && (0..r).all(|i| parts.iter().map(|p| p[i]).sum::<u32>() == shape.n[j - 1][i])
        }
    }
}

/// In/out shapes of the two fiber-product factors of a descriptor.
pub fn desc_shapes(shape: &Shape, d: &Descriptor) -> Result<(Shape, Shape), DescError> {
    if !desc_valid_relaxed(shape, d) {
        return Err(DescError::InvalidForShape(d.to_string()));
    }
    Ok(match d {
        Descriptor::Type1 { i, j, s: _, t } => {
            let mut n = shape.n.clone();
            n[j - 1][i - 1] = n[j - 1][i - 1] - t + 1;
            (Shape::new(n), Shape::new(vec![vec![*t]]))
        }
        Descriptor::Type2 { s, t, parts } => {
            let mut in_rows = Vec::with_capacity(shape.a());
            for (jb, row) in shape.n.iter().enumerate() {
                let mut new_row: Vec<u32> = row[..*s].to_vec();
                new_row.push(parts[jb].len() as u32);
                new_row.extend_from_slice(&row[s + t..]);
                in_rows.push(new_row);
            }
            let out_rows: Vec<Vec<u32>> = parts.iter().flatten().cloned().collect();
            (Shape::new(in_rows), Shape::new(out_rows))
        }
        Descriptor::Type3 { j, parts } => {
            let b = parts.len();
            let mut out_rows: Vec<Vec<u32>> = shape.n[..j - 1].to_vec();
            out_rows.extend(parts.iter().cloned());
            out_rows.extend_from_slice(&shape.n[*j..]);
            (Shape::new(vec![vec![b as u32]]), Shape::new(out_rows))
        }
    })
}

/// Ordered partitions of `target` into `b` parts in Z_{>=0}^t, for all
/// 1 <= b <= bmax, optionally requiring every part to be nonzero.
fn ordered_partitions(target: &[u32], bmax: usize, nonzero_parts: bool) -> Vec<Vec<Vec<u32>>> {
    fn split_one(total: u32, parts: usize) -> Vec<Vec<u32>> {
        // ordered compositions of `total` into `parts` nonnegative integers
        if parts == 0 {
            return if total == 0 { vec![vec![]] } else { vec![] };
        }
        let mut out = Vec::new();
        for first in 0..=total {
            for rest in split_one(total - first, parts - 1) {
                let mut v = vec![first];
                v.extend(rest);
                out.push(v);
            }
        }
        out
    }
    let mut out = Vec::new();
    for b in 1..=bmax {
        // independent compositions per coordinate, then transpose
        let per_coord: Vec<Vec<Vec<u32>>> = target.iter().map(|&x| split_one(x, b)).collect();
        let mut acc: Vec<Vec<Vec<u32>>> = vec![Vec::new()];
        for coord in &per_coord {
            let mut next = Vec::new();
            for partial in &acc {
                for comp in coord {
                    let mut p = partial.clone();
                    p.push(comp.clone());
                    next.push(p);
                }
            }
            acc = next;
        }
        for cols in acc {
            // cols[c][l] is coordinate c of part l; transpose to parts
            let parts: Vec<Vec<u32>> = (0..b)
                .map(|l| (0..target.len()).map(|c| cols[c][l]).collect())
                .collect();
            if nonzero_parts && parts.iter().any(|p| p.iter().all(|&x| x == 0)) {
                continue;
            }
            out.push(parts);
        }
    }
    out
}

fn part_count_bound(mass: u32, cap: EnergyCap, epsilon: Energy) -> Result<usize, DescError> {
    let slack = match cap {
        EnergyCap::Unbounded => 1i64,
        EnergyCap::Bounded(c) => {
            if epsilon.is_zero() {
                return Err(DescError::NonpositiveEpsilon);
            }
            // ceil(cap / epsilon)
            let q = c.rat() / epsilon.rat();
            let num = q.numer();
            let den = q.denom();
            num / den + if num % den != 0 { 1 } else { 0 }
        }
    };
    // part counts b satisfy b < slack + mass
    Ok(((slack + mass as i64 - 1).max(0)) as usize)
}

/// All descriptors for a shape. Partition part counts are bounded so that
/// every omitted term carries at least `ceil(cap/epsilon)` zero parts and
/// hence has valuation above the cap.
pub fn enum_desc(
    shape: &Shape,
    cap: EnergyCap,
    epsilon: Energy,
) -> Result<Vec<Descriptor>, DescError> {
    let (r, a) = (shape.r(), shape.a());
    let mut out = Vec::new();
    for j in 1..=a {
        for i in 1..=r {
            let n = shape.n[j - 1][i - 1];
            for s in 0..=n {
                for t in 0..=(n - s) {
                    out.push(Descriptor::Type1 { i, j, s, t });
                }
            }
        }
    }
    if r >= 3 {
        for t in 2..=(r - 1) {
            for s in 0..=(r - t) {
                // choose a partition per block of its column window
                let mut per_block: Vec<Vec<Vec<Vec<u32>>>> = Vec::with_capacity(a);
                for row in &shape.n {
                    let window: Vec<u32> = row[s..s + t].to_vec();
                    let bmax = part_count_bound(window.iter().sum(), cap, epsilon)?;
                    per_block.push(ordered_partitions(&window, bmax.max(1), false));
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
            let row = &shape.n[j - 1];
            let bmax = part_count_bound(row.iter().sum(), cap, epsilon)?;
            for parts in ordered_partitions(row, bmax.max(1), false) {
                out.push(Descriptor::Type3 { j, parts });
            }
        }
    }
    out.sort();
    Ok(out)
}

fn partial_sums(parts: &[Vec<u32>], coord: usize) -> Vec<u32> {
    // S_0 = 0, S_l = m^1 + ... + m^l at the given coordinate
    let mut sums = vec![0u32];
    for p in parts {
        sums.push(sums.last().unwrap() + p[coord]);
    }
    sums
}

/// The in/out collections of a descriptor, built from the displayed
/// matrices; composed entries use the category composition table.
pub fn desc_collections(
    cat: &OneCat,
    l: &Collection,
    d: &Descriptor,
) -> Result<(Collection, Collection), ShapeError> {
    match split_pieces(cat, l, d)? {
        (l_in, Some(l_out)) => Ok((l_in, l_out)),
        (_, None) => Err(ShapeError::BadObjects),
    }
}

/// Like [`desc_collections`], but a type-2 split over a window that carries
/// nothing at all has no out factor: the seam collision is pure base-space
/// geometry. Such splits return `None` for the out piece.
pub fn split_pieces(
    cat: &OneCat,
    l: &Collection,
    d: &Descriptor,
) -> Result<(Collection, Option<Collection>), ShapeError> {
    let shape = l.shape();
    assert!(
        desc_valid_relaxed(&shape, d),
        "descriptor invalid for collection"
    );
    let r = l.r();
    match d {
        Descriptor::Type1 { i, j, s, t } => {
            let (s, t) = (*s as usize, *t as usize);
            let mut in_grid = l.grid.clone();
            let col = &l.grid[j - 1][i - 1];
            let mut new_col: Vec<MorId> = col[..=s].to_vec();
            new_col.extend_from_slice(&col[s + t..]);
            in_grid[j - 1][i - 1] = new_col;
            let l_in = Collection::new(cat, l.objects.clone(), in_grid)?;
            let out_col: Vec<MorId> = col[s..=s + t].to_vec();
            let l_out = Collection::new(
                cat,
                vec![l.objects[i - 1], l.objects[*i]],
                vec![vec![out_col]],
            )?;
            Ok((l_in, Some(l_out)))
        }
        Descriptor::Type2 { s, t, parts } => {
            let mut in_objects: Vec<ObjId> = l.objects[..=*s].to_vec();
            in_objects.extend_from_slice(&l.objects[s + t..]);
            let mut in_grid = Vec::with_capacity(l.a());
            for (jb, block) in l.grid.iter().enumerate() {
                let mut new_block: Vec<Vec<MorId>> = block[..*s].to_vec();
                let mut mid = Vec::with_capacity(parts[jb].len() + 1);
                for l_idx in 0..=parts[jb].len() {
                    let chain: Vec<MorId> = (0..*t)
                        .map(|c| block[s + c][partial_sums(&parts[jb], c)[l_idx] as usize])
                        .collect();
                    mid.push(cat.compose_chain(&chain)?);
                }
                new_block.push(mid);
                new_block.extend_from_slice(&block[s + t..]);
                in_grid.push(new_block);
            }
            let l_in = Collection::new(cat, in_objects, in_grid)?;

            if parts.iter().all(|block| block.is_empty()) {
                return Ok((l_in, None));
            }
            let out_objects: Vec<ObjId> = l.objects[*s..=s + t].to_vec();
            let mut out_grid = Vec::new();
            for (jb, block_parts) in parts.iter().enumerate() {
                for (p_idx, part) in block_parts.iter().enumerate() {
                    let mut out_block = Vec::with_capacity(*t);
                    for c in 0..*t {
                        let base = partial_sums(block_parts, c)[p_idx] as usize;
                        let col: Vec<MorId> = (0..=part[c] as usize)
                            .map(|k| l.grid[jb][s + c][base + k])
                            .collect();
                        out_block.push(col);
                    }
                    out_grid.push(out_block);
                }
            }
            let l_out = Collection::new(cat, out_objects, out_grid)?;
            Ok((l_in, Some(l_out)))
        }
        Descriptor::Type3 { j, parts } => {
            let b = parts.len();
            let block = &l.grid[j - 1];
            let mut in_col = Vec::with_capacity(b + 1);
            for l_idx in 0..=b {
                let chain: Vec<MorId> = (0..r)
                    .map(|i| block[i][partial_sums(parts, i)[l_idx] as usize])
                    .collect();
                in_col.push(cat.compose_chain(&chain)?);
            }
            let l_in = Collection::new(cat, vec![l.objects[0], l.objects[r]], vec![vec![in_col]])?;

            let mut out_grid: Vec<Vec<Vec<MorId>>> = l.grid[..j - 1].to_vec();
            for (p_idx, part) in parts.iter().enumerate() {
                let mut out_block = Vec::with_capacity(r);
                for i in 0..r {
                    let base = partial_sums(parts, i)[p_idx] as usize;
                    let col: Vec<MorId> =
                        (0..=part[i] as usize).map(|k| block[i][base + k]).collect();
                    out_block.push(col);
                }
                out_grid.push(out_block);
            }
            out_grid.extend_from_slice(&l.grid[*j..]);
            let l_out = Collection::new(cat, l.objects.clone(), out_grid)?;
            Ok((l_in, Some(l_out)))
        }
    }
}

/// Evaluation data over a collection: one generator per consecutive pair
/// slot (alpha) and one per block (beta). The generator type is abstract so
/// the same plumbing serves both 2-morphism generators and symbolic tokens.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct EvalGrid<G> {
    /// alpha[j][i] has length n[j][i] (slot k is index k-1)
    pub alpha: Vec<Vec<Vec<G>>>,
    /// beta[j] for each block
    pub beta: Vec<G>,
}

impl<G: Clone + Eq + fmt::Debug> EvalGrid<G> {
    pub fn shape(&self) -> Shape {
        Shape::new(
            self.alpha
                .iter()
                .map(|block| block.iter().map(|col| col.len() as u32).collect())
                .collect(),
        )
    }

    pub fn alpha_slot(&self, i: usize, j: usize, k: usize) -> &G {
        &self.alpha[j - 1][i - 1][k - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiberMismatch {
    /// offending in-collection alpha slot (i, j, k), 1-based
    pub slot: (usize, usize, usize),
}

impl fmt::Display for FiberMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "fiber condition violated at alpha slot (i={}, j={}, k={})",
            self.slot.0, self.slot.1, self.slot.2
        )
    }
}

impl std::error::Error for FiberMismatch {}

/// Glues the eval grids of the two fiber factors into the eval grid of the
/// glued collection, checking the fiber condition.
pub fn glue_evals<G: Clone + Eq + fmt::Debug>(
    d: &Descriptor,
    ev_in: &EvalGrid<G>,
    ev_out: &EvalGrid<G>,
) -> Result<EvalGrid<G>, FiberMismatch> {
    match d {
        Descriptor::Type1 { i, j, s, t: _ } => {
            let s = *s as usize;
            if *ev_in.alpha_slot(*i, *j, s + 1) != ev_out.beta[0] {
                return Err(FiberMismatch {
                    slot: (*i, *j, s + 1),
                });
            }
            let mut alpha = ev_in.alpha.clone();
            let in_col = &ev_in.alpha[j - 1][i - 1];
            let mut col: Vec<G> = in_col[..s].to_vec();
            col.extend_from_slice(&ev_out.alpha[0][0]);
            col.extend_from_slice(&in_col[s + 1..]);
            alpha[j - 1][i - 1] = col;
            Ok(EvalGrid {
                alpha,
                beta: ev_in.beta.clone(),
            })
        }
        Descriptor::Type2 { s, t, parts } => {
            let a = parts.len();
            let mut offset = 0usize;
            for (jb, block_parts) in parts.iter().enumerate() {
                for l in 1..=block_parts.len() {
                    if *ev_in.alpha_slot(s + 1, jb + 1, l) != ev_out.beta[offset + l - 1] {
                        return Err(FiberMismatch {
                            slot: (s + 1, jb + 1, l),
                        });
                    }
                }
                offset += block_parts.len();
            }
            let r_in = ev_in.alpha[0].len();
            let r = r_in + t - 1;
            let mut alpha = Vec::with_capacity(a);
            let mut offset = 0usize;
            for (jb, block_parts) in parts.iter().enumerate() {
                let mut block = Vec::with_capacity(r);
                for i in 0..r {
                    if i < *s {
                        block.push(ev_in.alpha[jb][i].clone());
                    } else if i < s + t {
                        let c = i - s;
                        let mut col = Vec::new();
                        for (p_idx, _part) in block_parts.iter().enumerate() {
                            col.extend_from_slice(&ev_out.alpha[offset + p_idx][c]);
                        }
                        block.push(col);
                    } else {
                        block.push(ev_in.alpha[jb][i - t + 1].clone());
                    }
                }
                alpha.push(block);
                offset += block_parts.len();
            }
            Ok(EvalGrid {
                alpha,
                beta: ev_in.beta.clone(),
            })
        }
        Descriptor::Type3 { j, parts } => {
            let b = parts.len();
            for l in 1..=b {
                if *ev_in.alpha_slot(1, 1, l) != ev_out.beta[j - 1 + (l - 1)] {
                    return Err(FiberMismatch { slot: (1, 1, l) });
                }
            }
            let a_out = ev_out.alpha.len();
            let a = a_out - b + 1;
            let r = ev_out.alpha[0].len();
            let mut alpha = Vec::with_capacity(a);
            let mut beta = Vec::with_capacity(a);
            for jb in 0..a {
                if jb + 1 < *j {
                    alpha.push(ev_out.alpha[jb].clone());
                    beta.push(ev_out.beta[jb].clone());
                } else if jb + 1 == *j {
                    let mut block = Vec::with_capacity(r);
                    for i in 0..r {
                        let mut col = Vec::new();
                        for p_idx in 0..b {
                            col.extend_from_slice(&ev_out.alpha[j - 1 + p_idx][i]);
                        }
                        block.push(col);
                    }
                    alpha.push(block);
                    beta.push(ev_in.beta[0].clone());
                } else {
                    alpha.push(ev_out.alpha[jb + b - 1].clone());
                    beta.push(ev_out.beta[jb + b - 1].clone());
                }
            }
            Ok(EvalGrid { alpha, beta })
        }
    }
}

/// Symbolic token for tracking eval-slot plumbing.
pub type Token = u32;

/// State of an iterated decomposition: an ordered list of collections with
/// token-filled eval grids. Fresh tokens are introduced at each split for
/// the fiber-linked slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitState {
    pub entries: Vec<(Collection, EvalGrid<Token>)>,
    next_token: Token,
}

impl SplitState {
    /// Starts from a single collection with distinct tokens everywhere.
    pub fn start(l: &Collection) -> SplitState {
        let shape = l.shape();
        let mut next = 0;
        let mut fresh = || {
            next += 1;
            next - 1
        };
        let alpha = shape
            .n
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&n| (0..n).map(|_| fresh()).collect())
                    .collect()
            })
            .collect();
        let beta = (0..shape.a()).map(|_| fresh()).collect();
        SplitState {
            entries: vec![(l.clone(), EvalGrid { alpha, beta })],
            next_token: next,
        }
    }

    /// Starts from the blockwise decomposition of a width-1 collection: the
    /// fiber product over a point is a product, so the open stratum already
    /// factors into its blocks. Token assignment matches [`SplitState::start`].
    pub fn start_blockwise(l: &Collection) -> SplitState {
        let st = SplitState::start(l);
        if l.r() != 1 || l.a() == 1 {
            return st;
        }
        let (_, grid) = &st.entries[0];
        let entries = (1..=l.a())
            .map(|j| {
                (
                    l.block(j),
                    EvalGrid {
                        alpha: vec![grid.alpha[j - 1].clone()],
                        beta: vec![grid.beta[j - 1]],
                    },
                )
            })
            .collect();
        SplitState {
            entries,
            next_token: st.next_token,
        }
    }

    fn fresh(&mut self) -> Token {
        self.next_token += 1;
        self.next_token - 1
    }

    /// Token watermark; on a freshly started state this is the number of
    /// top-level slots, below which tokens are shared across descendants.
    pub fn token_base(&self) -> Token {
        self.next_token
    }

    /// Splits entry `idx` along descriptor `d`; the in-factor replaces the
    /// entry and the out-factor is inserted right after it.
    pub fn split(&mut self, cat: &OneCat, idx: usize, d: &Descriptor) -> Result<(), ShapeError> {
        let (l, ev) = self.entries[idx].clone();
        let (l_in, l_out) = split_pieces(cat, &l, d)?;
        let Some(l_out) = l_out else {
            // a pure seam collision: the entry keeps its tokens, only the
            // columns merge
            let shape_in = l_in.shape();
            let mut alpha: Vec<Vec<Vec<Token>>> = Vec::with_capacity(shape_in.a());
            let Descriptor::Type2 { s, t, .. } = d else {
                unreachable!("only type-2 windows can be empty")
            };
            for (jb, block) in ev.alpha.iter().enumerate() {
                let mut new_block: Vec<Vec<Token>> = block[..*s].to_vec();
                new_block.push(Vec::new());
                new_block.extend_from_slice(&block[s + t..]);
                let _ = jb;
                alpha.push(new_block);
            }
            self.entries[idx] = (
                l_in,
                EvalGrid {
                    alpha,
                    beta: ev.beta.clone(),
                },
            );
            return Ok(());
        };
        let (shape_in, shape_out) = (l_in.shape(), l_out.shape());
        let mut ev_in = EvalGrid {
            alpha: shape_in
                .n
                .iter()
                .map(|row| row.iter().map(|&n| vec![Token::MAX; n as usize]).collect())
                .collect(),
            beta: vec![Token::MAX; shape_in.a()],
        };
        let mut ev_out = EvalGrid {
            alpha: shape_out
                .n
                .iter()
                .map(|row| row.iter().map(|&n| vec![Token::MAX; n as usize]).collect())
                .collect(),
            beta: vec![Token::MAX; shape_out.a()],
        };
        match d {
            Descriptor::Type1 { i, j, s, t } => {
                let (s, t) = (*s as usize, *t as usize);
                for (jb, block) in ev.alpha.iter().enumerate() {
                    for (ib, col) in block.iter().enumerate() {
                        if jb == j - 1 && ib == i - 1 {
                            for k in 0..s {
                                ev_in.alpha[jb][ib][k] = col[k];
                            }
                            for k in 0..t {
                                ev_out.alpha[0][0][k] = col[s + k];
                            }
                            for k in s + t..col.len() {
                                ev_in.alpha[jb][ib][k - t + 1] = col[k];
                            }
                        } else {
                            ev_in.alpha[jb][ib] = col.clone();
                        }
                    }
                }
                let f = self.fresh();
                ev_in.alpha[j - 1][i - 1][s] = f;
                ev_out.beta[0] = f;
                ev_in.beta = ev.beta.clone();
            }
            Descriptor::Type2 { s, t, parts } => {
                let mut offset = 0usize;
                for (jb, block_parts) in parts.iter().enumerate() {
                    for (ib, col) in ev.alpha[jb].iter().enumerate() {
                        if ib < *s {
                            ev_in.alpha[jb][ib] = col.clone();
                        } else if ib < s + t {
                            let c = ib - s;
                            let sums = partial_sums(block_parts, c);
                            for (p_idx, part) in block_parts.iter().enumerate() {
                                for k in 0..part[c] as usize {
                                    ev_out.alpha[offset + p_idx][c][k] =
                                        col[sums[p_idx] as usize + k];
                                }
                            }
                        } else {
                            ev_in.alpha[jb][ib - t + 1] = col.clone();
                        }
                    }
                    for l in 0..block_parts.len() {
                        let f = self.fresh();
                        ev_in.alpha[jb][*s][l] = f;
                        ev_out.beta[offset + l] = f;
                    }
                    offset += block_parts.len();
                }
                ev_in.beta = ev.beta.clone();
            }
            Descriptor::Type3 { j, parts } => {
                let b = parts.len();
                let r = ev.alpha[0].len();
                for jb in 0..ev.alpha.len() {
                    if jb + 1 < *j {
                        ev_out.alpha[jb] = ev.alpha[jb].clone();
                        ev_out.beta[jb] = ev.beta[jb];
                    } else if jb + 1 == *j {
                        for i in 0..r {
                            let sums = partial_sums(parts, i);
                            for (p_idx, part) in parts.iter().enumerate() {
                                for k in 0..part[i] as usize {
                                    ev_out.alpha[j - 1 + p_idx][i][k] =
                                        ev.alpha[jb][i][sums[p_idx] as usize + k];
                                }
                            }
                        }
                        ev_in.beta[0] = ev.beta[jb];
                    } else {
                        ev_out.alpha[jb + b - 1] = ev.alpha[jb].clone();
                        ev_out.beta[jb + b - 1] = ev.beta[jb];
                    }
                }
                for l in 0..b {
                    let f = self.fresh();
                    ev_in.alpha[0][0][l] = f;
                    ev_out.beta[j - 1 + l] = f;
                }
            }
        }
        self.entries[idx] = (l_in, ev_in);
        self.entries.insert(idx + 1, (l_out, ev_out));
        Ok(())
    }
}

/// Whether two descriptor chains applied to the same collection produce the
/// same final decomposition: equal collection multisets and matching eval
/// plumbing up to a renaming of the internal fresh tokens.
pub fn assoc_shape_commute(
    cat: &OneCat,
    l: &Collection,
    chain1: &[(usize, Descriptor)],
    chain2: &[(usize, Descriptor)],
) -> Result<bool, ShapeError> {
    let run = |chain: &[(usize, Descriptor)]| -> Result<SplitState, ShapeError> {
        let mut st = SplitState::start(l);
        for (idx, d) in chain {
            st.split(cat, *idx, d)?;
        }
        Ok(st)
    };
    let s1 = run(chain1)?;
    let s2 = run(chain2)?;
    let base = SplitState::start(l).next_token;
    Ok(states_match(&s1, &s2, base))
}

/// Backtracking search for a bijection of entries and of fresh tokens
/// (tokens below `base` are shared and must match identically).
pub fn split_states_match(s1: &SplitState, s2: &SplitState, base: Token) -> bool {
    states_match(s1, s2, base)
}

fn states_match(s1: &SplitState, s2: &SplitState, base: Token) -> bool {
    if s1.entries.len() != s2.entries.len() {
        return false;
    }
    fn grid_tokens(g: &EvalGrid<Token>) -> Vec<Token> {
        let mut v: Vec<Token> = g.alpha.iter().flatten().flatten().copied().collect();
        v.extend(&g.beta);
        v
    }
    fn try_entry(
        s1: &SplitState,
        s2: &SplitState,
        base: Token,
        used: &mut Vec<bool>,
        map: &mut std::collections::BTreeMap<Token, Token>,
        rmap: &mut std::collections::BTreeMap<Token, Token>,
        pos: usize,
    ) -> bool {
        if pos == s1.entries.len() {
            return true;
        }
        let (c1, g1) = &s1.entries[pos];
        'candidates: for cand in 0..s2.entries.len() {
            if used[cand] {
                continue;
            }
            let (c2, g2) = &s2.entries[cand];
            if c1 != c2 {
                continue;
            }
            let (t1, t2) = (grid_tokens(g1), grid_tokens(g2));
            if t1.len() != t2.len() {
                continue;
            }
            let mut added: Vec<Token> = Vec::new();
            let mut ok = true;
            for (&a, &b) in t1.iter().zip(t2.iter()) {
                if a < base || b < base {
                    if a != b {
                        ok = false;
                        break;
                    }
                    continue;
                }
                match (map.get(&a), rmap.get(&b)) {
                    (None, None) => {
                        map.insert(a, b);
                        rmap.insert(b, a);
                        added.push(a);
                    }
                    (Some(&b2), _) if b2 == b => {}
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                used[cand] = true;
                if try_entry(s1, s2, base, used, map, rmap, pos + 1) {
                    return true;
                }
                used[cand] = false;
            }
            for a in added {
                let b = map.remove(&a).unwrap();
                rmap.remove(&b);
            }
            if !ok {
                continue 'candidates;
            }
        }
        false
    }
    let mut used = vec![false; s2.entries.len()];
    try_entry(
        s1,
        s2,
        base,
        &mut used,
        &mut std::collections::BTreeMap::new(),
        &mut std::collections::BTreeMap::new(),
        0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::novikov::Energy;

    fn single() -> (OneCat, ObjId, MorId) {
        let cat = OneCat::single_object();
        let o = cat.object_by_name("X").unwrap();
        let m = cat.mor_by_name("1").unwrap();
        (cat, o, m)
    }

    fn chain_collection(cat: &OneCat, o: ObjId, m: MorId, n: u32) -> Collection {
        Collection::new(cat, vec![o, o], vec![vec![vec![m; n as usize + 1]]]).unwrap()
    }

    #[test]
    fn type1_count_for_shape_2() {
        let shape = Shape::new(vec![vec![2]]);
        let ds = enum_desc(&shape, EnergyCap::Bounded(Energy::from_int(2)), Energy::ONE).unwrap();
        let t1: Vec<_> = ds.iter().filter(|d| d.type_tag() == 1).collect();
        assert_eq!(t1.len(), 6);
        assert!(ds.iter().all(|d| d.type_tag() == 1)); // r = 1: no type 2 or 3
    }

    #[test]
    fn type3_bound_matches_cap_over_epsilon() {
        // shape (2,1,((1,0))), cap 2, eps 1: exactly b=1 [(1,0)] and the two
        // b=2 paddings with one zero part
        let shape = Shape::new(vec![vec![1, 0]]);
        let ds = enum_desc(&shape, EnergyCap::Bounded(Energy::from_int(2)), Energy::ONE).unwrap();
        let t3: Vec<_> = ds.iter().filter(|d| d.type_tag() == 3).collect();
        assert_eq!(t3.len(), 3);
        let texts: Vec<String> = t3.iter().map(|d| d.to_string()).collect();
        assert!(texts.contains(&"T3(1;[1,0])".to_string()));
        assert!(texts.contains(&"T3(1;[1,0|0,0])".to_string()));
        assert!(texts.contains(&"T3(1;[0,0|1,0])".to_string()));
    }

    #[test]
    fn no_type2_below_width_3() {
        let shape = Shape::new(vec![vec![1, 1]]);
        let ds = enum_desc(&shape, EnergyCap::Bounded(Energy::from_int(2)), Energy::ONE).unwrap();
        assert!(ds.iter().all(|d| d.type_tag() != 2));
    }

    #[test]
    fn desc_shapes_examples() {
        // Type1 on ((n)): in ((n-t+1)), out ((t))
        let shape = Shape::new(vec![vec![4]]);
        let d = Descriptor::Type1 {
            i: 1,
            j: 1,
            s: 1,
            t: 2,
        };
        let (i, o) = desc_shapes(&shape, &d).unwrap();
        assert_eq!(i, Shape::new(vec![vec![3]]));
        assert_eq!(o, Shape::new(vec![vec![2]]));

        // Type2 on (3,1,n) with s=0, t=2, one part (n1,n2): in (2,1,((1,n3)))
        let shape = Shape::new(vec![vec![2, 1, 3]]);
        let d = Descriptor::Type2 {
            s: 0,
            t: 2,
            parts: vec![vec![vec![2, 1]]],
        };
        let (i, o) = desc_shapes(&shape, &d).unwrap();
        assert_eq!(i, Shape::new(vec![vec![1, 3]]));
        assert_eq!(o, Shape::new(vec![vec![2, 1]]));

        // Type3 on (2,1,((1,1))) with (1,0)+(0,1): in ((2)), out (2,2,...)
        let shape = Shape::new(vec![vec![1, 1]]);
        let d = Descriptor::Type3 {
            j: 1,
            parts: vec![vec![1, 0], vec![0, 1]],
        };
        let (i, o) = desc_shapes(&shape, &d).unwrap();
        assert_eq!(i, Shape::new(vec![vec![2]]));
        assert_eq!(o, Shape::new(vec![vec![1, 0], vec![0, 1]]));
    }

    #[test]
    fn descriptor_text_round_trip() {
        let ds = [
            Descriptor::Type1 {
                i: 2,
                j: 1,
                s: 0,
                t: 3,
            },
            Descriptor::Type2 {
                s: 1,
                t: 2,
                parts: vec![vec![vec![1, 0], vec![0, 1]], vec![vec![0, 0]]],
            },
            Descriptor::Type3 {
                j: 2,
                parts: vec![vec![1, 0], vec![0, 0]],
            },
        ];
        for d in ds {
            let text = d.to_string();
            let back: Descriptor = text.parse().unwrap();
            assert_eq!(back, d);
        }
    }

    #[test]
    fn collection_validation() {
        let mut cat = OneCat::new();
        let p = cat.add_object("P").unwrap();
        let q = cat.add_object("Q").unwrap();
        let ip = cat.add_mor("1P", p, p).unwrap();
        let iq = cat.add_mor("1Q", q, q).unwrap();
        let fm = cat.add_mor("f", p, q).unwrap();
        cat.set_identity(p, ip);
        cat.set_identity(q, iq);
        cat.set_compose(ip, ip, ip);
        cat.set_compose(iq, iq, iq);
        cat.set_compose(ip, fm, fm);
        cat.set_compose(fm, iq, fm);

        // valid 1x1
        Collection::new(&cat, vec![p, q], vec![vec![vec![fm]]]).unwrap();
        // wrong target
        let err = Collection::new(&cat, vec![p, q], vec![vec![vec![ip]]]).unwrap_err();
        assert_eq!(err, ShapeError::EndpointMismatch { i: 1, j: 1, k: 0 });
        // composed endpoints via the table
        let c = Collection::new(&cat, vec![p, p, q], vec![vec![vec![ip], vec![fm]]]).unwrap();
        assert_eq!(c.composed_endpoints(&cat, 1).unwrap(), (fm, fm));
    }

    #[test]
    fn glue_type1_identity_reshuffle() {
        let (cat, o, m) = single();
        let l = chain_collection(&cat, o, m, 3);
        let d = Descriptor::Type1 {
            i: 1,
            j: 1,
            s: 1,
            t: 1,
        };
        let mut st = SplitState::start(&l);
        st.split(&cat, 0, &d).unwrap();
        let (l_in, ev_in) = st.entries[0].clone();
        let (l_out, ev_out) = st.entries[1].clone();
        assert_eq!(l_in.shape(), Shape::new(vec![vec![3]]));
        assert_eq!(l_out.shape(), Shape::new(vec![vec![1]]));
        let glued = glue_evals(&d, &ev_in, &ev_out).unwrap();
        // t=1: glued alpha is ev_in's alpha with the fiber slot replaced by
        // ev_out's single alpha entry
        assert_eq!(glued.alpha[0][0][1], ev_out.alpha[0][0][0]);
        assert_eq!(glued.alpha[0][0][0], ev_in.alpha[0][0][0]);
        assert_eq!(glued.beta, ev_in.beta);
    }

    #[test]
    fn glue_fiber_violation_is_reported() {
        let (cat, o, m) = single();
        let l = chain_collection(&cat, o, m, 2);
        let d = Descriptor::Type1 {
            i: 1,
            j: 1,
            s: 0,
            t: 2,
        };
        let mut st = SplitState::start(&l);
        st.split(&cat, 0, &d).unwrap();
        let (_, ev_in) = st.entries[0].clone();
        let (_, mut ev_out) = st.entries[1].clone();
        ev_out.beta[0] = 9999;
        let err = glue_evals(&d, &ev_in, &ev_out).unwrap_err();
        assert_eq!(err.slot, (1, 1, 1));
    }

    #[test]
    fn disjoint_insertions_commute() {
        let (cat, o, m) = single();
        let l = chain_collection(&cat, o, m, 4);
        // two disjoint type-1 insertions on an r=1 chain, both orders
        let d_left = Descriptor::Type1 {
            i: 1,
            j: 1,
            s: 0,
            t: 2,
        };
        // after the left split the right window shifts: on the original L the
        // right insertion is at s=2, t=2; applied first it is unchanged.
        let chain1 = vec![
            (
                0,
                Descriptor::Type1 {
                    i: 1,
                    j: 1,
                    s: 2,
                    t: 2,
                },
            ),
            (0, d_left.clone()),
        ];
        let chain2 = vec![
            (0, d_left),
            (
                0,
                Descriptor::Type1 {
                    i: 1,
                    j: 1,
                    s: 1,
                    t: 2,
                },
            ),
        ];
        assert!(assoc_shape_commute(&cat, &l, &chain1, &chain2).unwrap());
    }

    #[test]
    fn nested_insertions_commute() {
        let (cat, o, m) = single();
        let l = chain_collection(&cat, o, m, 4);
        // insertion within the insertion: inner window sits inside the outer
        let chain1 = vec![
            (
                0,
                Descriptor::Type1 {
                    i: 1,
                    j: 1,
                    s: 0,
                    t: 3,
                },
            ),
            (
                1,
                Descriptor::Type1 {
                    i: 1,
                    j: 1,
                    s: 1,
                    t: 2,
                },
            ),
        ];
        let chain2 = vec![
            (
                0,
                Descriptor::Type1 {
                    i: 1,
                    j: 1,
                    s: 1,
                    t: 2,
                },
            ),
            (
                0,
                Descriptor::Type1 {
                    i: 1,
                    j: 1,
                    s: 0,
                    t: 2,
                },
            ),
        ];
        assert!(assoc_shape_commute(&cat, &l, &chain1, &chain2).unwrap());
    }

    #[test]
    fn different_splits_do_not_commute() {
        let (cat, o, m) = single();
        let l = chain_collection(&cat, o, m, 4);
        let chain1 = vec![(
            0,
            Descriptor::Type1 {
                i: 1,
                j: 1,
                s: 0,
                t: 2,
            },
        )];
        let chain2 = vec![(
            0,
            Descriptor::Type1 {
                i: 1,
                j: 1,
                s: 2,
                t: 2,
            },
        )];
        assert!(!assoc_shape_commute(&cat, &l, &chain1, &chain2).unwrap());
    }
}
