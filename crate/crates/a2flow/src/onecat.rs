//! Finite ambient 1-category: objects, 1-morphisms with source/target, a
//! total composition table on composable pairs, and identities.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ObjId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct MorId(pub u32);

#[derive(Clone, Debug)]
struct MorData {
    name: String,
    src: ObjId,
    tgt: ObjId,
}

#[derive(Clone, Debug, Default)]
pub struct OneCat {
    object_names: Vec<String>,
    mors: Vec<MorData>,
    compose: BTreeMap<(MorId, MorId), MorId>,
    identity: BTreeMap<ObjId, MorId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CatError {
    DuplicateName(String),
    UnknownName(String),
    NotComposable(String, String),
    MissingComposite(String, String),
    BadComposite(String),
    NotAssociative(String, String, String),
    BadIdentity(String),
}

impl fmt::Display for CatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CatError::DuplicateName(n) => write!(f, "duplicate name {n}"),
            CatError::UnknownName(n) => write!(f, "unknown name {n}"),
            CatError::NotComposable(a, b) => write!(f, "{a} and {b} are not composable"),
            CatError::MissingComposite(a, b) => write!(f, "no composite recorded for {a} ; {b}"),
            CatError::BadComposite(m) => write!(f, "composite has wrong endpoints: {m}"),
            CatError::NotAssociative(a, b, c) => {
                write!(f, "composition not associative on ({a}, {b}, {c})")
            }
            CatError::BadIdentity(m) => write!(f, "identity law fails at {m}"),
        }
    }
}

impl std::error::Error for CatError {}

impl OneCat {
    pub fn new() -> OneCat {
        OneCat::default()
    }

    pub fn add_object(&mut self, name: &str) -> Result<ObjId, CatError> {
        if self.object_names.iter().any(|n| n == name) {
            return Err(CatError::DuplicateName(name.to_string()));
        }
        self.object_names.push(name.to_string());
        Ok(ObjId(self.object_names.len() as u32 - 1))
    }

    pub fn add_mor(&mut self, name: &str, src: ObjId, tgt: ObjId) -> Result<MorId, CatError> {
        if self.mors.iter().any(|m| m.name == name) {
            return Err(CatError::DuplicateName(name.to_string()));
        }
        self.mors.push(MorData {
            name: name.to_string(),
            src,
            tgt,
        });
        Ok(MorId(self.mors.len() as u32 - 1))
    }

    pub fn set_compose(&mut self, first: MorId, then: MorId, result: MorId) {
        self.compose.insert((first, then), result);
    }

    pub fn set_identity(&mut self, obj: ObjId, mor: MorId) {
        self.identity.insert(obj, mor);
    }

    pub fn objects(&self) -> impl Iterator<Item = ObjId> + '_ {
        (0..self.object_names.len() as u32).map(ObjId)
    }

    pub fn mor_ids(&self) -> impl Iterator<Item = MorId> + '_ {
        (0..self.mors.len() as u32).map(MorId)
    }

    pub fn object_name(&self, o: ObjId) -> &str {
        &self.object_names[o.0 as usize]
    }

    pub fn mor_name(&self, m: MorId) -> &str {
        &self.mors[m.0 as usize].name
    }

    pub fn object_by_name(&self, name: &str) -> Option<ObjId> {
        self.object_names
            .iter()
            .position(|n| n == name)
            .map(|i| ObjId(i as u32))
    }

    pub fn mor_by_name(&self, name: &str) -> Option<MorId> {
        self.mors
            .iter()
            .position(|m| m.name == name)
            .map(|i| MorId(i as u32))
    }

    pub fn src(&self, m: MorId) -> ObjId {
        self.mors[m.0 as usize].src
    }

    pub fn tgt(&self, m: MorId) -> ObjId {
        self.mors[m.0 as usize].tgt
    }

    pub fn identity_of(&self, o: ObjId) -> Option<MorId> {
        self.identity.get(&o).copied()
    }

    pub fn mors_between(&self, src: ObjId, tgt: ObjId) -> Vec<MorId> {
        self.mor_ids()
            .filter(|&m| self.src(m) == src && self.tgt(m) == tgt)
            .collect()
    }

    /// Composite of `first: A -> B` followed by `then: B -> C`.
    pub fn compose2(&self, first: MorId, then: MorId) -> Result<MorId, CatError> {
        if self.tgt(first) != self.src(then) {
            return Err(CatError::NotComposable(
                self.mor_name(first).to_string(),
                self.mor_name(then).to_string(),
            ));
        }
        self.compose.get(&(first, then)).copied().ok_or_else(|| {
            CatError::MissingComposite(
                self.mor_name(first).to_string(),
                self.mor_name(then).to_string(),
            )
        })
    }

    /// Composite of a nonempty composable chain, left to right.
    pub fn compose_chain(&self, chain: &[MorId]) -> Result<MorId, CatError> {
        assert!(!chain.is_empty());
        let mut acc = chain[0];
        for &m in &chain[1..] {
            acc = self.compose2(acc, m)?;
        }
        Ok(acc)
    }

    /// Exhaustively checks that the table is total and associative on
    /// composable pairs/triples and that identities satisfy the unit laws.
    pub fn validate(&self) -> Result<(), CatError> {
        for a in self.mor_ids() {
            for b in self.mor_ids() {
                if self.tgt(a) != self.src(b) {
                    continue;
                }
                let ab = self.compose2(a, b)?;
                if self.src(ab) != self.src(a) || self.tgt(ab) != self.tgt(b) {
                    return Err(CatError::BadComposite(self.mor_name(ab).to_string()));
                }
                for c in self.mor_ids() {
                    if self.tgt(b) != self.src(c) {
                        continue;
                    }
                    let bc = self.compose2(b, c)?;
                    if self.compose2(ab, c)? != self.compose2(a, bc)? {
                        return Err(CatError::NotAssociative(
                            self.mor_name(a).to_string(),
                            self.mor_name(b).to_string(),
                            self.mor_name(c).to_string(),
                        ));
                    }
                }
            }
        }
        for o in self.objects() {
            let id = self
                .identity_of(o)
                .ok_or_else(|| CatError::BadIdentity(self.object_name(o).to_string()))?;
            if self.src(id) != o || self.tgt(id) != o {
                return Err(CatError::BadIdentity(self.mor_name(id).to_string()));
            }
            for m in self.mor_ids() {
                if self.src(m) == o && self.compose2(id, m)? != m {
                    return Err(CatError::BadIdentity(self.mor_name(m).to_string()));
                }
                if self.tgt(m) == o && self.compose2(m, id)? != m {
                    return Err(CatError::BadIdentity(self.mor_name(m).to_string()));
                }
            }
        }
        Ok(())
    }

    /// One object, its identity morphism, nothing else.
    pub fn single_object() -> OneCat {
        let mut c = OneCat::new();
        let o = c.add_object("X").unwrap();
        let id = c.add_mor("1", o, o).unwrap();
        c.set_compose(id, id, id);
        c.set_identity(o, id);
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_object_validates() {
        OneCat::single_object().validate().unwrap();
    }

    #[test]
    fn chain_category() {
        // P -f-> Q with identities
        let mut c = OneCat::new();
        let p = c.add_object("P").unwrap();
        let q = c.add_object("Q").unwrap();
        let ip = c.add_mor("1P", p, p).unwrap();
        let iq = c.add_mor("1Q", q, q).unwrap();
        let f = c.add_mor("f", p, q).unwrap();
        c.set_identity(p, ip);
        c.set_identity(q, iq);
        c.set_compose(ip, ip, ip);
        c.set_compose(iq, iq, iq);
        c.set_compose(ip, f, f);
        c.set_compose(f, iq, f);
        c.validate().unwrap();
        assert_eq!(c.compose_chain(&[ip, f, iq]).unwrap(), f);
    }

    #[test]
    fn missing_composite_is_an_error() {
        let mut c = OneCat::new();
        let p = c.add_object("P").unwrap();
        let ip = c.add_mor("1P", p, p).unwrap();
        c.set_identity(p, ip);
        assert!(matches!(
            c.validate(),
            Err(CatError::MissingComposite(_, _))
        ));
    }

    #[test]
    fn broken_associativity_detected() {
        let mut c = OneCat::new();
        let p = c.add_object("P").unwrap();
        let e = c.add_mor("e", p, p).unwrap();
        let u = c.add_mor("u", p, p).unwrap();
        c.set_identity(p, e);
        // u*u = e but (u*u)*u = e*u = u while u*(u*u) would need u*e = e to break
        c.set_compose(e, e, e);
        c.set_compose(e, u, u);
        c.set_compose(u, e, e); // wrong on purpose
        c.set_compose(u, u, e);
        assert!(c.validate().is_err());
    }
}
