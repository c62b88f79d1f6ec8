//! Planar rooted trees: the strata of the associahedra, with operadic
//! grafting and brute-force enumeration.

use std::fmt;

/// Planar rooted tree. Every internal vertex has at least two children;
/// the one-leaf tree is a bare leaf. Leaves are numbered 1..r in planar
/// (preorder) order.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KTree {
    Leaf,
    Node(Vec<KTree>),
}

impl KTree {
    /// Single internal vertex with `r` leaves (the top stratum of K_r).
    pub fn corolla(r: usize) -> KTree {
        assert!(r >= 1);
        if r == 1 {
            KTree::Leaf
        } else {
            KTree::Node(vec![KTree::Leaf; r])
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            KTree::Leaf => 1,
            KTree::Node(kids) => kids.iter().map(|k| k.leaf_count()).sum(),
        }
    }

    pub fn internal_count(&self) -> usize {
        match self {
            KTree::Leaf => 0,
            KTree::Node(kids) => 1 + kids.iter().map(|k| k.internal_count()).sum::<usize>(),
        }
    }

    /// Stratum dimension inside K_r: (r - 1) - #internal vertices.
    pub fn dim(&self) -> i64 {
        self.leaf_count() as i64 - 1 - self.internal_count() as i64
    }

    pub fn is_stable(&self) -> bool {
        match self {
            KTree::Leaf => true,
            KTree::Node(kids) => kids.len() >= 2 && kids.iter().all(|k| k.is_stable()),
        }
    }
}

impl fmt::Display for KTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KTree::Leaf => write!(f, "*"),
            KTree::Node(kids) => {
                write!(f, "(")?;
                for k in kids {
                    write!(f, "{}", k)?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Debug for KTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// All stable planar trees with `r` leaves, i.e. the strata of K_r,
/// in a deterministic order.
pub fn enum_k(r: usize) -> Vec<KTree> {
    assert!(r >= 1);
    let mut out = enum_trees(r);
    out.sort();
    out
}

fn enum_trees(r: usize) -> Vec<KTree> {
    if r == 1 {
        return vec![KTree::Leaf];
    }
    let mut out = Vec::new();
    // choose the root arity m >= 2 and a composition of r into m parts
    for m in 2..=r {
        for comp in compositions(r, m) {
            let child_choices: Vec<Vec<KTree>> = comp.iter().map(|&n| enum_trees(n)).collect();
            let mut stack: Vec<Vec<KTree>> = vec![Vec::new()];
            for choices in &child_choices {
                let mut next = Vec::new();
                for partial in &stack {
                    for c in choices {
                        let mut p = partial.clone();
                        p.push(c.clone());
                        next.push(p);
                    }
                }
                stack = next;
            }
            out.extend(stack.into_iter().map(KTree::Node));
        }
    }
    out
}

/// Compositions of `total` into exactly `parts` positive integers.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn go(total: usize, parts: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            if total >= 1 {
                acc.push(total);
                out.push(acc.clone());
                acc.pop();
            }
            return;
        }
        for first in 1..=total.saturating_sub(parts - 1) {
            acc.push(first);
            go(total - first, parts - 1, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    go(total, parts, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotOutOfRange {
    pub slot: usize,
    pub leaves: usize,
}

impl fmt::Display for SlotOutOfRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "slot {} out of range for {} leaves",
            self.slot, self.leaves
        )
    }
}

impl std::error::Error for SlotOutOfRange {}

/// Operadic grafting: replaces leaf number `slot` (1-based) of `outer` by
/// `inner`. With `outer` in K_{r-t+1} and `inner` in K_t the result lies
/// in K_r.
pub fn graft_k(outer: &KTree, inner: &KTree, slot: usize) -> Result<KTree, SlotOutOfRange> {
    let leaves = outer.leaf_count();
    if slot == 0 || slot > leaves {
        return Err(SlotOutOfRange { slot, leaves });
    }
    fn rebuild(t: &KTree, inner: &KTree, counter: &mut usize, slot: usize) -> KTree {
        match t {
            KTree::Leaf => {
                *counter += 1;
                if *counter == slot {
                    inner.clone()
                } else {
                    KTree::Leaf
                }
            }
            KTree::Node(kids) => KTree::Node(
                kids.iter()
                    .map(|k| rebuild(k, inner, counter, slot))
                    .collect(),
            ),
        }
    }
    let mut counter = 0usize;
    Ok(rebuild(outer, inner, &mut counter, slot))
}

/// Sum of (-1)^dim over a list of stratum dimensions.
pub fn euler_char<I: IntoIterator<Item = i64>>(dims: I) -> i64 {
    dims.into_iter()
        .map(|d| if d % 2 == 0 { 1 } else { -1 })
        .sum()
}

/// Counts strata by dimension, listed from dimension 0 upward.
pub fn fvector<I: IntoIterator<Item = i64>>(dims: I) -> Vec<usize> {
    let mut counts: Vec<usize> = Vec::new();
    for d in dims {
        assert!(d >= 0, "negative stratum dimension");
        let d = d as usize;
        if counts.len() <= d {
            counts.resize(d + 1, 0);
        }
        counts[d] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_associahedra() {
        assert_eq!(enum_k(1).len(), 1);
        assert_eq!(enum_k(2).len(), 1);
        let k3 = enum_k(3);
        assert_eq!(k3.len(), 3);
        assert_eq!(fvector(k3.iter().map(|t| t.dim())), vec![2, 1]);
        let k4 = enum_k(4);
        assert_eq!(k4.len(), 11);
        assert_eq!(fvector(k4.iter().map(|t| t.dim())), vec![5, 5, 1]);
        assert_eq!(euler_char(k4.iter().map(|t| t.dim())), 1);
    }

    #[test]
    fn graft_basics() {
        let c2 = KTree::corolla(2);
        let left_comb = graft_k(&c2, &c2, 1).unwrap();
        assert_eq!(
            left_comb,
            KTree::Node(vec![
                KTree::Node(vec![KTree::Leaf, KTree::Leaf]),
                KTree::Leaf
            ])
        );
        // grafting into the one-leaf tree is the identity on the inner tree
        let t = KTree::corolla(3);
        assert_eq!(graft_k(&KTree::Leaf, &t, 1).unwrap(), t);
        assert!(graft_k(&c2, &c2, 3).is_err());
    }

    #[test]
    fn graft_image_covers_proper_faces_of_k4() {
        let mut got = std::collections::BTreeSet::new();
        for t_outer in 2..=3usize {
            let r_outer = 4 - t_outer + 1;
            for outer in enum_k(r_outer) {
                for inner in enum_k(t_outer) {
                    for slot in 1..=r_outer {
                        got.insert(graft_k(&outer, &inner, slot).unwrap());
                    }
                }
            }
        }
        let proper: std::collections::BTreeSet<_> =
            enum_k(4).into_iter().filter(|t| t.dim() < 2).collect();
        assert_eq!(got, proper);
        assert_eq!(proper.len(), 10);
    }
}
