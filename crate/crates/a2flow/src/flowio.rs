//! Versioned interchange format for flow categories.
//!
//! Structured text, one record per line. Sections appear in a fixed order:
//! header lines, then OBJECTS, ONEMORS (morphisms, identity assignments,
//! and the composition table), TWOMOR_GENERATORS, POINTS, EDGES. All
//! energies are rationals `p/q`, all references are stable string ids.
//! The parser rejects unknown sections and malformed fields with a line
//! locus; saving a loaded file reproduces it byte for byte.
//!
//! ```text
//! A2FLOW-FC 1
//! SHAPE_MAX 1 1 3
//! CAP 3
//! EPSILON 1
//! OBJECTS
//! X
//! ONEMORS
//! 1 X X
//! IDENT X 1
//! COMP 1 1 1
//! TWOMOR_GENERATORS
//! u 1 1
//! v 1 1
//! POINTS
//! p0 | X,X!1,1 | u | v | 1 | -
//! EDGES
//! e1 | X,X!1,1 | u | u | 2 | T1(1,1,0,1)~p0~p0 & T1(1,1,0,1)~p0~p0
//! ```
//!
//! Point lines hold `id | collection | alpha | beta | energy | stratum`;
//! a collection is `objects!block;block` with `/` between columns and `,`
//! within; alpha uses the same nesting with `-` for an empty column;
//! a stratum is `-` or a seam tree followed by one bracketed bubble tree
//! per block.

use crate::flowcat::{EdgeRec, Endpoint, FlowCat2, GenId, PointRec, ShapeMax, TwoMorSig};
use crate::novikov::{Energy, EnergyCap};
use crate::onecat::{MorId, ObjId, OneCat};
use crate::shapes::{Collection, Descriptor, EvalGrid};
use crate::trees::KTree;
use crate::wpoly::{Comp, Coppice, Kid, Seam};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IoError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for IoError {}

fn err(line: usize, message: impl Into<String>) -> IoError {
    IoError {
        line,
        message: message.into(),
    }
}

pub fn save(fc: &FlowCat2) -> String {
    let mut out = String::new();
    out.push_str("A2FLOW-FC 1\n");
    out.push_str(&format!(
        "SHAPE_MAX {} {}{}\n",
        fc.bounds.r_max,
        fc.bounds.a_max,
        fc.bounds
            .mass_max
            .iter()
            .map(|m| format!(" {m}"))
            .collect::<String>()
    ));
    out.push_str(&format!("CAP {}\n", fc.cap));
    out.push_str(&format!("EPSILON {}\n", fc.epsilon));
    out.push_str("OBJECTS\n");
    for o in fc.cat.objects() {
        out.push_str(fc.cat.object_name(o));
        out.push('\n');
    }
    out.push_str("ONEMORS\n");
    for m in fc.cat.mor_ids() {
        out.push_str(&format!(
            "{} {} {}\n",
            fc.cat.mor_name(m),
            fc.cat.object_name(fc.cat.src(m)),
            fc.cat.object_name(fc.cat.tgt(m))
        ));
    }
    for o in fc.cat.objects() {
        if let Some(id) = fc.cat.identity_of(o) {
            out.push_str(&format!(
                "IDENT {} {}\n",
                fc.cat.object_name(o),
                fc.cat.mor_name(id)
            ));
        }
    }
    for f in fc.cat.mor_ids() {
        for g in fc.cat.mor_ids() {
            if fc.cat.tgt(f) == fc.cat.src(g) {
                if let Ok(h) = fc.cat.compose2(f, g) {
                    out.push_str(&format!(
                        "COMP {} {} {}\n",
                        fc.cat.mor_name(f),
                        fc.cat.mor_name(g),
                        fc.cat.mor_name(h)
                    ));
                }
            }
        }
    }
    out.push_str("TWOMOR_GENERATORS\n");
    for g in fc.sig.gen_ids() {
        out.push_str(&format!(
            "{} {} {}\n",
            fc.sig.name(g),
            fc.cat.mor_name(fc.sig.src(g)),
            fc.cat.mor_name(fc.sig.tgt(g))
        ));
    }
    out.push_str("POINTS\n");
    for (&id, p) in &fc.points {
        out.push_str(&format!(
            "p{} | {} | {} | {} | {} | {}\n",
            id,
            collection_text(fc, &p.collection),
            alpha_text(fc, &p.evals),
            beta_text(fc, &p.evals),
            p.energy,
            p.stratum
                .as_ref()
                .map(coppice_io_text)
                .unwrap_or_else(|| "-".to_string())
        ));
    }
    out.push_str("EDGES\n");
    for (&id, e) in &fc.edges {
        let ends: Vec<String> = e
            .ends
            .iter()
            .map(|ep| format!("{}~p{}~p{}", ep.desc, ep.left, ep.right))
            .collect();
        out.push_str(&format!(
            "e{} | {} | {} | {} | {} | {}\n",
            id,
            collection_text(fc, &e.collection),
            alpha_text(fc, &e.evals),
            beta_text(fc, &e.evals),
            e.energy,
            if ends.is_empty() {
                "-".to_string()
            } else {
                ends.join(" & ")
            }
        ));
    }
    out
}

fn collection_text(fc: &FlowCat2, l: &Collection) -> String {
    crate::flowcat::collection_text(&fc.cat, l)
}

fn alpha_text(fc: &FlowCat2, ev: &EvalGrid<GenId>) -> String {
    ev.alpha
        .iter()
        .map(|block| {
            block
                .iter()
                .map(|col| {
                    if col.is_empty() {
                        "-".to_string()
                    } else {
                        col.iter()
                            .map(|&g| fc.sig.name(g).to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    }
                })
                .collect::<Vec<_>>()
                .join("/")
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn beta_text(fc: &FlowCat2, ev: &EvalGrid<GenId>) -> String {
    ev.beta
        .iter()
        .map(|&g| fc.sig.name(g).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Seam tree followed by the bubble trees, e.g. `(**) [1@.. 2@.]`.
pub fn coppice_io_text(c: &Coppice) -> String {
    crate::wpoly::coppice_text(c)
}

pub fn parse_coppice(s: &str) -> Result<Coppice, String> {
    let s = s.trim();
    let (ts_str, rest) = s
        .split_once(' ')
        .ok_or_else(|| format!("bad stratum {s:?}"))?;
    let ts = parse_ktree(ts_str)?;
    let mut blocks = Vec::new();
    let mut rest = rest.trim();
    while !rest.is_empty() {
        let (comp, tail) = parse_comp(rest)?;
        blocks.push(comp);
        rest = tail.trim_start();
    }
    if blocks.is_empty() {
        return Err(format!("stratum {s:?} has no blocks"));
    }
    Ok(Coppice { ts, blocks })
}

pub fn parse_ktree(s: &str) -> Result<KTree, String> {
    fn go(chars: &[u8], pos: &mut usize) -> Result<KTree, String> {
        match chars.get(*pos) {
            Some(b'*') => {
                *pos += 1;
                Ok(KTree::Leaf)
            }
            Some(b'(') => {
                *pos += 1;
                let mut kids = Vec::new();
                while chars.get(*pos) != Some(&b')') {
                    if *pos >= chars.len() {
                        return Err("unclosed ( in tree".to_string());
                    }
                    kids.push(go(chars, pos)?);
                }
                *pos += 1;
                Ok(KTree::Node(kids))
            }
            _ => Err(format!("bad tree at byte {pos:?}")),
        }
    }
    let chars = s.as_bytes();
    let mut pos = 0;
    let t = go(chars, &mut pos)?;
    if pos != chars.len() {
        return Err(format!("trailing input in tree {s:?}"));
    }
    Ok(t)
}

/// `[1@.. 2@.]` with nested `[...]` for attached components.
fn parse_comp(s: &str) -> Result<(Comp, &str), String> {
    let s = s
        .strip_prefix('[')
        .ok_or_else(|| format!("component must start with [ in {s:?}"))?;
    let mut seams = Vec::new();
    let mut rest = s;
    loop {
        rest = rest.trim_start();
        if let Some(tail) = rest.strip_prefix(']') {
            return Ok((Comp { seams }, tail));
        }
        let at = rest
            .find('@')
            .ok_or_else(|| format!("seam needs target@kids in {rest:?}"))?;
        let target: usize = rest[..at]
            .parse()
            .map_err(|_| format!("bad seam target in {rest:?}"))?;
        rest = &rest[at + 1..];
        let mut kids = Vec::new();
        loop {
            if let Some(tail) = rest.strip_prefix('.') {
                kids.push(Kid::Mark);
                rest = tail;
            } else if rest.starts_with('[') {
                let (comp, tail) = parse_comp(rest)?;
                kids.push(Kid::Comp(comp));
                rest = tail;
            } else {
                break;
            }
        }
        seams.push(Seam { target, kids });
    }
}

struct Parser<'a> {
    fc: &'a FlowCat2,
}

impl<'a> Parser<'a> {
    fn object(&self, name: &str, line: usize) -> Result<ObjId, IoError> {
        self.fc
            .cat
            .object_by_name(name)
            .ok_or_else(|| err(line, format!("unknown object {name}")))
    }

    fn mor(&self, name: &str, line: usize) -> Result<MorId, IoError> {
        self.fc
            .cat
            .mor_by_name(name)
            .ok_or_else(|| err(line, format!("unknown 1-morphism {name}")))
    }

    fn two_gen(&self, name: &str, line: usize) -> Result<GenId, IoError> {
        self.fc
            .sig
            .by_name(name)
            .ok_or_else(|| err(line, format!("unknown 2-morphism generator {name}")))
    }

    fn collection(&self, s: &str, line: usize) -> Result<Collection, IoError> {
        let (objs, blocks) = s
            .split_once('!')
            .ok_or_else(|| err(line, format!("collection needs objects!grid in {s:?}")))?;
        let objects: Result<Vec<ObjId>, IoError> = objs
            .split(',')
            .map(|o| self.object(o.trim(), line))
            .collect();
        let objects = objects?;
        let mut grid = Vec::new();
        for block in blocks.split(';') {
            let mut cols = Vec::new();
            for col in block.split('/') {
                let mors: Result<Vec<MorId>, IoError> =
                    col.split(',').map(|m| self.mor(m.trim(), line)).collect();
                cols.push(mors?);
            }
            grid.push(cols);
        }
        Collection::new(&self.fc.cat, objects, grid)
            .map_err(|e| err(line, format!("bad collection: {e}")))
    }

    fn evals(&self, alpha: &str, beta: &str, line: usize) -> Result<EvalGrid<GenId>, IoError> {
        let mut a = Vec::new();
        for block in alpha.split(';') {
            let mut cols = Vec::new();
            for col in block.split('/') {
                let col = col.trim();
                if col == "-" || col.is_empty() {
                    cols.push(Vec::new());
                } else {
                    let gens: Result<Vec<GenId>, IoError> = col
                        .split(',')
                        .map(|g| self.two_gen(g.trim(), line))
                        .collect();
                    cols.push(gens?);
                }
            }
            a.push(cols);
        }
        let b: Result<Vec<GenId>, IoError> = beta
            .split(',')
            .map(|g| self.two_gen(g.trim(), line))
            .collect();
        Ok(EvalGrid { alpha: a, beta: b? })
    }
}

fn point_id(s: &str, line: usize) -> Result<u32, IoError> {
    s.strip_prefix('p')
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| err(line, format!("bad point id {s}")))
}

pub fn load(text: &str) -> Result<FlowCat2, IoError> {
    let mut lines = text.lines().enumerate().peekable();
    let mut next = |what: &str| -> Result<(usize, String), IoError> {
        lines
            .next()
            .map(|(i, l)| (i + 1, l.to_string()))
            .ok_or_else(|| err(0, format!("missing {what}")))
    };
    let (ln, header) = next("header")?;
    if header != "A2FLOW-FC 1" {
        return Err(err(ln, format!("unsupported header {header:?}")));
    }
    let (ln, sm) = next("SHAPE_MAX")?;
    let fields: Vec<&str> = sm.split_whitespace().collect();
    if fields.len() < 3 || fields[0] != "SHAPE_MAX" {
        return Err(err(ln, "expected SHAPE_MAX r a mass..."));
    }
    let r_max: usize = fields[1].parse().map_err(|_| err(ln, "bad r_max"))?;
    let a_max: usize = fields[2].parse().map_err(|_| err(ln, "bad a_max"))?;
    let mass_max: Result<Vec<u32>, IoError> = fields[3..]
        .iter()
        .map(|f| f.parse().map_err(|_| err(ln, "bad mass bound")))
        .collect();
    let mass_max = mass_max?;
    if mass_max.len() != r_max {
        return Err(err(ln, "SHAPE_MAX needs one mass bound per width"));
    }
    let (ln, cap_line) = next("CAP")?;
    let cap = match cap_line.strip_prefix("CAP ") {
        Some("unbounded") => EnergyCap::Unbounded,
        Some(v) => EnergyCap::Bounded(
            v.parse::<Energy>()
                .map_err(|_| err(ln, format!("bad cap {v:?}")))?,
        ),
        None => return Err(err(ln, "expected CAP")),
    };
    let (ln, eps_line) = next("EPSILON")?;
    let epsilon: Energy = eps_line
        .strip_prefix("EPSILON ")
        .ok_or_else(|| err(ln, "expected EPSILON"))?
        .parse()
        .map_err(|_| err(ln, "bad epsilon"))?;

    let mut fc = FlowCat2::new(
        OneCat::new(),
        TwoMorSig::new(),
        ShapeMax {
            r_max,
            a_max,
            mass_max,
        },
        cap,
        epsilon,
    );

    #[derive(PartialEq)]
    enum Section {
        Objects,
        OneMors,
        TwoMors,
        Points,
        Edges,
    }
    let (ln, sec) = next("OBJECTS")?;
    if sec != "OBJECTS" {
        return Err(err(ln, "expected OBJECTS"));
    }
    let mut section = Section::Objects;
    let mut max_id = 0u32;
    for (ln0, raw) in lines {
        let ln = ln0 + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            return Err(err(ln, "blank line"));
        }
        match line {
            "ONEMORS" => {
                section = Section::OneMors;
                continue;
            }
            "TWOMOR_GENERATORS" => {
                section = Section::TwoMors;
                continue;
            }
            "POINTS" => {
                section = Section::Points;
                continue;
            }
            "EDGES" => {
                section = Section::Edges;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Objects => {
                fc.cat
                    .add_object(line)
                    .map_err(|e| err(ln, e.to_string()))?;
            }
            Section::OneMors => {
                let f: Vec<&str> = line.split_whitespace().collect();
                match f.as_slice() {
                    ["IDENT", o, m] => {
                        let p = Parser { fc: &fc };
                        let (o, m) = (p.object(o, ln)?, p.mor(m, ln)?);
                        fc.cat.set_identity(o, m);
                    }
                    ["COMP", a, b, c] => {
                        let p = Parser { fc: &fc };
                        let (a, b, c) = (p.mor(a, ln)?, p.mor(b, ln)?, p.mor(c, ln)?);
                        fc.cat.set_compose(a, b, c);
                    }
                    [name, src, tgt] => {
                        let p = Parser { fc: &fc };
                        let (s, t) = (p.object(src, ln)?, p.object(tgt, ln)?);
                        fc.cat
                            .add_mor(name, s, t)
                            .map_err(|e| err(ln, e.to_string()))?;
                    }
                    _ => return Err(err(ln, format!("bad ONEMORS record {line:?}"))),
                }
            }
            Section::TwoMors => {
                let f: Vec<&str> = line.split_whitespace().collect();
                let [name, src, tgt] = f.as_slice() else {
                    return Err(err(ln, format!("bad generator record {line:?}")));
                };
                let p = Parser { fc: &fc };
                let (s, t) = (p.mor(src, ln)?, p.mor(tgt, ln)?);
                if fc.cat.src(s) != fc.cat.src(t) || fc.cat.tgt(s) != fc.cat.tgt(t) {
                    return Err(err(ln, format!("generator {name} endpoints not parallel")));
                }
                fc.sig.add_gen_raw(name, s, t);
            }
            Section::Points | Section::Edges => {
                let fields: Vec<&str> = line.split(" | ").collect();
                if fields.len() != 6 {
                    return Err(err(ln, format!("expected 6 fields, got {}", fields.len())));
                }
                let p = Parser { fc: &fc };
                let collection = p.collection(fields[1], ln)?;
                let evals = p.evals(fields[2], fields[3], ln)?;
                let energy: Energy = fields[4]
                    .parse()
                    .map_err(|_| err(ln, format!("bad energy {:?}", fields[4])))?;
                if section == Section::Points {
                    let id = point_id(fields[0], ln)?;
                    let stratum = if fields[5] == "-" {
                        None
                    } else {
                        Some(parse_coppice(fields[5]).map_err(|e| err(ln, e))?)
                    };
                    max_id = max_id.max(id + 1);
                    if fc
                        .points
                        .insert(
                            id,
                            PointRec {
                                collection,
                                evals,
                                energy,
                                stratum,
                            },
                        )
                        .is_some()
                    {
                        return Err(err(ln, format!("duplicate point id p{id}")));
                    }
                } else {
                    let id = fields[0]
                        .strip_prefix('e')
                        .and_then(|n| n.parse::<u32>().ok())
                        .ok_or_else(|| err(ln, format!("bad edge id {:?}", fields[0])))?;
                    let mut ends = Vec::new();
                    if fields[5] != "-" {
                        for ep in fields[5].split(" & ") {
                            let parts: Vec<&str> = ep.split('~').collect();
                            let [d, l, r] = parts.as_slice() else {
                                return Err(err(ln, format!("bad endpoint {ep:?}")));
                            };
                            let desc: Descriptor = d.parse().map_err(|e: String| err(ln, e))?;
                            ends.push(Endpoint {
                                desc,
                                left: point_id(l, ln)?,
                                right: point_id(r, ln)?,
                            });
                        }
                    }
                    max_id = max_id.max(id + 1);
                    if fc
                        .edges
                        .insert(
                            id,
                            EdgeRec {
                                collection,
                                evals,
                                energy,
                                ends,
                            },
                        )
                        .is_some()
                    {
                        return Err(err(ln, format!("duplicate edge id e{id}")));
                    }
                }
            }
        }
    }
    // referential integrity: endpoints must cite stored points
    for (&id, e) in &fc.edges {
        for ep in &e.ends {
            for p in [ep.left, ep.right] {
                if !fc.points.contains_key(&p) {
                    return Err(err(
                        0,
                        format!("edge e{id} endpoint references missing point id p{p}"),
                    ));
                }
            }
        }
    }
    fc.set_next_id(max_id);
    Ok(fc)
}
