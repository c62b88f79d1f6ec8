//! Universal Novikov field with mod-2 coefficients and exact rational
//! exponents, plus energy-graded counting of finite point sets.
//!
//! An element is a finite set of exponents, each standing for a term `T^e`
//! with coefficient 1 in the two-element field. Addition is symmetric
//! difference, multiplication is convolution with exponents added and
//! coefficients multiplied mod 2. Every multiplication chain carries an
//! [`EnergyCap`] so that truncated series stay closed under the operations.

use crate::rat::Rat;
use std::fmt;
use std::str::FromStr;

/// Nonnegative exact rational energy value.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Energy(Rat);

impl Energy {
    pub fn new(r: Rat) -> Energy {
        assert!(!r.is_negative(), "energies are nonnegative");
        Energy(r)
    }

    pub const ZERO: Energy = Energy(Rat::ZERO);
    pub const ONE: Energy = Energy(Rat::ONE);

    pub fn from_int(n: u32) -> Energy {
        Energy(Rat::from_int(n as i64))
    }

    pub fn rat(&self) -> Rat {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl std::ops::Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        Energy(self.0 + rhs.0)
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Energy {
    type Err = crate::rat::ParseRatError;
    fn from_str(s: &str) -> Result<Energy, Self::Err> {
        let r: Rat = s.parse()?;
        if r.is_negative() {
            return Err(crate::rat::ParseRatError(s.to_string()));
        }
        Ok(Energy(r))
    }
}

/// Truncation contract attached to multiplication chains. `Unbounded` keeps
/// every term.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EnergyCap {
    Bounded(Energy),
    Unbounded,
}

impl EnergyCap {
    pub fn keeps(&self, e: Rat) -> bool {
        match self {
            EnergyCap::Bounded(cap) => e <= cap.rat(),
            EnergyCap::Unbounded => true,
        }
    }
}

impl fmt::Display for EnergyCap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnergyCap::Bounded(e) => write!(f, "{}", e),
            EnergyCap::Unbounded => write!(f, "unbounded"),
        }
    }
}

/// Element of the Novikov field: strictly increasing exponents, no
/// duplicates, each with implicit coefficient 1 mod 2.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NovElem {
    terms: Vec<Rat>,
}

impl NovElem {
    pub fn zero() -> NovElem {
        NovElem { terms: Vec::new() }
    }

    pub fn one() -> NovElem {
        NovElem::monomial(Rat::ZERO)
    }

    /// The single term `T^e`.
    pub fn monomial(e: Rat) -> NovElem {
        NovElem { terms: vec![e] }
    }

    /// Canonical form from an arbitrary multiset of exponents: exponents
    /// appearing an even number of times cancel.
    pub fn from_exponents<I: IntoIterator<Item = Rat>>(exps: I) -> NovElem {
        let mut terms: Vec<Rat> = exps.into_iter().collect();
        terms.sort();
        let mut out = Vec::with_capacity(terms.len());
        let mut i = 0;
        while i < terms.len() {
            let mut j = i + 1;
            while j < terms.len() && terms[j] == terms[i] {
                j += 1;
            }
            if (j - i) % 2 == 1 {
                out.push(terms[i]);
            }
            i = j;
        }
        NovElem { terms: out }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn exponents(&self) -> &[Rat] {
        &self.terms
    }

    /// Least exponent; `None` for the zero element (valuation +infinity).
    pub fn valuation(&self) -> Option<Rat> {
        self.terms.first().copied()
    }

    pub fn add(&self, other: &NovElem) -> NovElem {
        // symmetric difference of two sorted strictly-increasing lists
        let (a, b) = (&self.terms, &other.terms);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        NovElem { terms: out }
    }

    /// Truncated convolution: exponents add, coefficients multiply mod 2,
    /// terms above the cap are dropped.
    pub fn mul(&self, other: &NovElem, cap: EnergyCap) -> NovElem {
        let mut exps = Vec::with_capacity(self.terms.len() * other.terms.len());
        for &x in &self.terms {
            for &y in &other.terms {
                let e = x + y;
                if cap.keeps(e) {
                    exps.push(e);
                }
            }
        }
        NovElem::from_exponents(exps)
    }

    /// Drops terms with exponent above the cap (the cap itself is kept).
    pub fn truncate(&self, cap: EnergyCap) -> NovElem {
        NovElem {
            terms: self
                .terms
                .iter()
                .copied()
                .filter(|&e| cap.keeps(e))
                .collect(),
        }
    }
}

/// Novikov count of a finite multiset of energies: for each distinct energy
/// the coefficient is the parity of its multiplicity.
pub fn nov_count<I: IntoIterator<Item = Energy>>(points: I) -> NovElem {
    NovElem::from_exponents(points.into_iter().map(|e| e.rat()))
}

impl fmt::Display for NovElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for e in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if e.is_zero() {
                write!(f, "1")?;
            } else {
                write!(f, "T^{}", e)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for NovElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseNovError(pub String);

impl fmt::Display for ParseNovError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid Novikov element: {}", self.0)
    }
}

impl std::error::Error for ParseNovError {}

impl FromStr for NovElem {
    type Err = ParseNovError;
    fn from_str(s: &str) -> Result<NovElem, ParseNovError> {
        let s = s.trim();
        let bad = || ParseNovError(s.to_string());
        if s == "0" {
            return Ok(NovElem::zero());
        }
        let mut exps = Vec::new();
        for part in s.split('+') {
            let part = part.trim();
            if part == "1" {
                exps.push(Rat::ZERO);
            } else if let Some(e) = part.strip_prefix("T^") {
                let e: Rat = e.parse().map_err(|_| bad())?;
                exps.push(e);
            } else {
                return Err(bad());
            }
        }
        let n = NovElem::from_exponents(exps.clone());
        // reject non-canonical input so parsing is bit-exact
        if n.terms.len() != exps.len() || !exps.windows(2).all(|w| w[0] < w[1]) {
            return Err(bad());
        }
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(n: i64, d: i64) -> NovElem {
        NovElem::monomial(Rat::new(n, d))
    }

    #[test]
    fn add_is_char_2() {
        assert!(t(1, 1).add(&t(1, 1)).is_zero());
        let a = NovElem::one().add(&t(1, 1)); // 1 + T
        let b = t(1, 1).add(&t(2, 1)); // T + T^2
        assert_eq!(a.add(&b), NovElem::one().add(&t(2, 1)));
        assert_eq!(NovElem::zero().add(&a), a);
    }

    #[test]
    fn mul_squares_in_char_2() {
        let a = NovElem::one().add(&t(1, 1));
        assert_eq!(
            a.mul(&a, EnergyCap::Unbounded),
            NovElem::one().add(&t(2, 1))
        );
        assert_eq!(t(1, 2).mul(&t(1, 2), EnergyCap::Unbounded), t(1, 1));
    }

    #[test]
    fn count_and_product_match() {
        // #{1,2} * #{1} = (T + T^2) T = T^2 + T^3, and equals the count of
        // the Cartesian product with summed energies.
        let a = nov_count([Energy::from_int(1), Energy::from_int(2)]);
        let b = nov_count([Energy::from_int(1)]);
        let prod = a.mul(&b, EnergyCap::Unbounded);
        let direct = nov_count([
            Energy::from_int(1) + Energy::from_int(1),
            Energy::from_int(2) + Energy::from_int(1),
        ]);
        assert_eq!(prod, direct);
    }

    #[test]
    fn count_parity() {
        let e1 = Energy::from_int(1);
        assert_eq!(nov_count([e1, e1, Energy::from_int(2)]), t(2, 1));
        assert!(nov_count([]).is_zero());
        assert_eq!(
            nov_count([Energy::new(Rat::new(1, 2)), Energy::new(Rat::new(3, 2))]),
            t(1, 2).add(&t(3, 2))
        );
    }

    #[test]
    fn truncation() {
        let cap2 = EnergyCap::Bounded(Energy::from_int(2));
        let x = NovElem::one().add(&t(3, 1));
        assert_eq!(x.truncate(cap2), NovElem::one());
        assert_eq!(x.truncate(EnergyCap::Unbounded), x);
        // cap boundary is inclusive
        assert_eq!(t(2, 1).add(&t(4, 1)).truncate(cap2), t(2, 1));
    }

    #[test]
    fn valuation() {
        assert_eq!(t(1, 1).add(&t(2, 1)).valuation(), Some(Rat::from_int(1)));
        assert_eq!(NovElem::zero().valuation(), None);
        assert_eq!(NovElem::one().add(&t(1, 1)).valuation(), Some(Rat::ZERO));
    }

    #[test]
    fn display_parse_round_trip() {
        for s in ["0", "1", "T^2", "1 + T^1/2 + T^3", "T^5/2 + T^7"] {
            let n: NovElem = s.parse().unwrap();
            assert_eq!(n.to_string(), s);
        }
        assert!("T^1 + T^1".parse::<NovElem>().is_err());
        assert!("T^2 + T^1".parse::<NovElem>().is_err());
    }
}

#[cfg(test)]
mod prop_tests {
    use super::*;
    use crate::rat::Rat;
    use proptest::prelude::*;

    fn arb_elem() -> impl Strategy<Value = NovElem> {
        proptest::collection::vec((0i64..12, 1i64..4), 0..5)
            .prop_map(|v| NovElem::from_exponents(v.into_iter().map(|(n, d)| Rat::new(n, d))))
    }

    proptest! {
        #[test]
        fn field_laws(x in arb_elem(), y in arb_elem(), z in arb_elem()) {
            let cap = EnergyCap::Bounded(Energy::from_int(8));
            prop_assert_eq!(x.add(&y), y.add(&x));
            prop_assert_eq!(x.add(&y).add(&z), x.add(&y.add(&z)));
            prop_assert!(x.add(&x).is_zero());
            prop_assert_eq!(x.mul(&y, cap), y.mul(&x, cap));
            prop_assert_eq!(
                x.mul(&y, cap).mul(&z, cap).truncate(cap),
                x.mul(&y.mul(&z, cap), cap).truncate(cap)
            );
            prop_assert_eq!(x.mul(&y.add(&z), cap), x.mul(&y, cap).add(&x.mul(&z, cap)));
        }

        #[test]
        fn count_is_additive_and_multiplicative(
            a in proptest::collection::vec(0i64..5, 0..6),
            b in proptest::collection::vec(0i64..5, 0..6),
        ) {
            let ea: Vec<Energy> = a.iter().map(|&x| Energy::new(Rat::from_int(x))).collect();
            let eb: Vec<Energy> = b.iter().map(|&x| Energy::new(Rat::from_int(x))).collect();
            let union = nov_count(ea.iter().chain(eb.iter()).copied().collect::<Vec<_>>());
            prop_assert_eq!(union, nov_count(ea.clone()).add(&nov_count(eb.clone())));
            let cartesian: Vec<Energy> = ea
                .iter()
                .flat_map(|&x| eb.iter().map(move |&y| x + y))
                .collect();
            prop_assert_eq!(
                nov_count(cartesian),
                nov_count(ea).mul(&nov_count(eb), EnergyCap::Unbounded)
            );
        }
    }
}
