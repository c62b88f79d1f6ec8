//! Batch command-line interface: enumeration, validation, extraction,
//! checking, generation, and DOT export. One job per invocation; outputs
//! are deterministic byte for byte.

use a2flow::flowcat::{validate, FlowCat2, ShapeMax};
use a2flow::flowio;
use a2flow::gen::{generate, mutate_drop_endpoint, GenSpec};
use a2flow::linearize::{
    bifunctor_identity_check, check_a2, check_a_infty, check_fiber_compat_linear, extract_all,
};
use a2flow::novikov::{Energy, EnergyCap};
use a2flow::shapes::{enum_desc, Shape};
use a2flow::trees::{enum_k, euler_char, fvector, KTree};
use a2flow::wpoly::{coppice_text, enum_fiber, enum_w};
use std::collections::BTreeMap;
use std::process::ExitCode;

const USAGE: &str = "\
usage: a2flow <command> [flags]

commands:
  k enum --r R [--fvector]          strata of the associahedron K_R
  w enum --n N [--fvector] [--stable-only]
                                    strata of the 2-associahedron W_N,
                                    N like 1,1
  fiber enum --n M [--fvector]      strata of a fiber product, M like
                                    1,1;0,0 (one row per block)
  desc --n M --cap C --epsilon E    boundary decomposition descriptors
  validate --in F                   validate a flow category file
  mu --in F [--out F2]              extract the linear operations
  check ainf|a2|compat|bifunctor --in F [--shape-max R,A,M1[,M2..]]
                                    verify the equations exactly
  gen --family NAME [--seed S] [--cap C] [--epsilon E] [--in F] --out F2
                                    families: trivial square_zero assoc_z2
                                    assoc_idempotent strict_2cat
                                    drop_endpoint (needs --in)
  export dot --n M --out F          face poset as a DOT graph

flags take rationals as p/q and shapes as comma/semicolon matrices;
exit status is 0 on success, 1 on violations or residuals, 2 on usage
or file errors.";

struct Flags {
    values: BTreeMap<String, String>,
    bools: Vec<String>,
}

fn parse_flags(args: &[String]) -> Result<Flags, String> {
    let mut values = BTreeMap::new();
    let mut bools = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        let name = a
            .strip_prefix("--")
            .ok_or_else(|| format!("unexpected argument {a:?}"))?;
        match name {
            "fvector" | "stable-only" => {
                bools.push(name.to_string());
                i += 1;
            }
            "r" | "n" | "cap" | "epsilon" | "in" | "out" | "seed" | "family" | "shape-max" => {
                let v = args
                    .get(i + 1)
                    .ok_or_else(|| format!("flag --{name} needs a value"))?;
                values.insert(name.to_string(), v.clone());
                i += 2;
            }
            _ => return Err(format!("unknown flag --{name}")),
        }
    }
    Ok(Flags { values, bools })
}

impl Flags {
    fn need(&self, name: &str) -> Result<&str, String> {
        self.values
            .get(name)
            .map(|s| s.as_str())
            .ok_or_else(|| format!("missing required flag --{name}"))
    }

    fn get(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(|s| s.as_str())
    }

    fn has(&self, name: &str) -> bool {
        self.bools.iter().any(|b| b == name)
    }
}

fn parse_cap(s: &str) -> Result<EnergyCap, String> {
    if s == "unbounded" {
        return Ok(EnergyCap::Unbounded);
    }
    s.parse::<Energy>()
        .map(EnergyCap::Bounded)
        .map_err(|_| format!("bad cap {s:?}"))
}

fn parse_shape_max(s: &str) -> Result<ShapeMax, String> {
    let parts: Result<Vec<u32>, _> = s.split(',').map(|x| x.trim().parse::<u32>()).collect();
    let parts = parts.map_err(|_| format!("bad shape-max {s:?}"))?;
    if parts.len() < 3 {
        return Err("shape-max needs r,a and one mass bound per width".to_string());
    }
    let r_max = parts[0] as usize;
    if parts.len() != 2 + r_max {
        return Err("shape-max needs one mass bound per width".to_string());
    }
    Ok(ShapeMax {
        r_max,
        a_max: parts[1] as usize,
        mass_max: parts[2..].to_vec(),
    })
}

fn load_file(path: &str) -> Result<FlowCat2, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
    flowio::load(&text).map_err(|e| format!("{path}: {e}"))
}

fn write_out(path: Option<&str>, content: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| format!("cannot write {p}: {e}")),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run() -> Result<u8, String> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() {
        return Err(USAGE.to_string());
    }
    match args[0].as_str() {
        "k" => {
            if args.get(1).map(|s| s.as_str()) != Some("enum") {
                return Err(USAGE.to_string());
            }
            let flags = parse_flags(&args[2..])?;
            let r: usize = flags
                .need("r")?
                .parse()
                .map_err(|_| "bad --r".to_string())?;
            if r < 1 {
                return Err("--r must be at least 1".to_string());
            }
            let trees = enum_k(r);
            if flags.has("fvector") {
                let fv = fvector(trees.iter().map(KTree::dim));
                println!(
                    "{}",
                    fv.iter()
                        .map(|c| c.to_string())
                        .collect::<Vec<_>>()
                        .join(" ")
                );
            } else {
                for t in &trees {
                    println!("dim {} {}", t.dim(), t);
                }
                println!(
                    "total {} euler {}",
                    trees.len(),
                    euler_char(trees.iter().map(KTree::dim))
                );
            }
            Ok(0)
        }
        "w" => {
            if args.get(1).map(|s| s.as_str()) != Some("enum") {
                return Err(USAGE.to_string());
            }
            let flags = parse_flags(&args[2..])?;
            let n: Vec<u32> = flags
                .need("n")?
                .split(',')
                .map(|x| x.trim().parse::<u32>().map_err(|_| "bad --n".to_string()))
                .collect::<Result<_, _>>()?;
            let strata = enum_w(&n, flags.has("stable-only"));
            if flags.has("fvector") {
                let fv = fvector(strata.iter().map(|c| c.dim()));
                println!(
                    "{}",
                    fv.iter()
                        .map(|c| c.to_string())
                        .collect::<Vec<_>>()
                        .join(" ")
                );
            } else {
                for c in &strata {
                    println!("dim {} {}", c.dim(), coppice_text(c));
                }
                println!(
                    "total {} euler {}",
                    strata.len(),
                    euler_char(strata.iter().map(|c| c.dim()))
                );
            }
            Ok(0)
        }
        "fiber" => {
            if args.get(1).map(|s| s.as_str()) != Some("enum") {
                return Err(USAGE.to_string());
            }
            let flags = parse_flags(&args[2..])?;
            let shape: Shape = flags.need("n")?.parse()?;
            let poset = enum_fiber(&shape);
            if flags.has("fvector") {
                println!(
                    "{}",
                    poset
                        .fvector()
                        .iter()
                        .map(|c| c.to_string())
                        .collect::<Vec<_>>()
                        .join(" ")
                );
            } else {
                for (c, d) in poset.strata.iter().zip(&poset.dims) {
                    println!("dim {} {}", d, coppice_text(c));
                }
                println!("total {} euler {}", poset.strata.len(), poset.euler_char());
            }
            Ok(0)
        }
        "desc" => {
            let flags = parse_flags(&args[1..])?;
            let shape: Shape = flags.need("n")?.parse()?;
            let cap = parse_cap(flags.need("cap")?)?;
            let epsilon: Energy = flags
                .need("epsilon")?
                .parse()
                .map_err(|_| "bad --epsilon".to_string())?;
            let descs = enum_desc(&shape, cap, epsilon).map_err(|e| e.to_string())?;
            for d in &descs {
                println!("{d}");
            }
            println!("total {}", descs.len());
            Ok(0)
        }
        "validate" => {
            let flags = parse_flags(&args[1..])?;
            let fc = load_file(flags.need("in")?)?;
            let report = validate(&fc);
            print!("{report}");
            Ok(if report.is_empty() { 0 } else { 1 })
        }
        "mu" => {
            let flags = parse_flags(&args[1..])?;
            let fc = load_file(flags.need("in")?)?;
            let fam = extract_all(&fc);
            let mut out = String::new();
            for (l, t) in &fam.tensors {
                for (ev, v) in &t.entries {
                    let ins: Vec<&str> = ev
                        .alpha
                        .iter()
                        .flatten()
                        .flatten()
                        .map(|&g| fam.sig.name(g))
                        .collect();
                    let outs: Vec<&str> = ev.beta.iter().map(|&g| fam.sig.name(g)).collect();
                    out.push_str(&format!(
                        "mu {} ({}) -> ({}) = {}\n",
                        a2flow::flowcat::collection_text(&fam.cat, l),
                        ins.join(","),
                        outs.join(","),
                        v
                    ));
                }
            }
            write_out(flags.get("out"), &out)?;
            Ok(0)
        }
        "check" => {
            let kind = args.get(1).map(|s| s.as_str()).unwrap_or("");
            let flags = parse_flags(&args[2..])?;
            let fc = load_file(flags.need("in")?)?;
            let fam = extract_all(&fc);
            let bounds = match flags.get("shape-max") {
                Some(s) => parse_shape_max(s)?,
                None => fc.bounds.clone(),
            };
            match kind {
                "ainf" => {
                    let n_max = bounds.mass_max.first().copied().unwrap_or(0);
                    let residuals = check_a_infty(&fam, n_max).map_err(|e| e.to_string())?;
                    for r in &residuals {
                        println!("{}", r.render(&fam.cat, &fam.sig));
                    }
                    println!("{} residuals", residuals.len());
                    Ok(if residuals.is_empty() { 0 } else { 1 })
                }
                "a2" => {
                    let residuals = check_a2(&fam, &bounds).map_err(|e| e.to_string())?;
                    for r in &residuals {
                        println!("{}", r.render(&fam.cat, &fam.sig));
                    }
                    println!("{} residuals", residuals.len());
                    Ok(if residuals.is_empty() { 0 } else { 1 })
                }
                "compat" => {
                    let mut bad = 0;
                    for r_c in [1usize, 2] {
                        if r_c > bounds.r_max {
                            continue;
                        }
                        let rep = check_fiber_compat_linear(&fam, r_c);
                        for v in &rep.violations {
                            println!("r_c={r_c}: {v}");
                        }
                        println!(
                            "r_c={} {}",
                            r_c,
                            if rep.ok() {
                                "compatible"
                            } else {
                                "incompatible"
                            }
                        );
                        if !rep.ok() {
                            bad += 1;
                        }
                    }
                    Ok(if bad == 0 { 0 } else { 1 })
                }
                "bifunctor" => {
                    let residuals = bifunctor_identity_check(&fam).map_err(|e| e.to_string())?;
                    for r in &residuals {
                        println!("{}", r.render(&fam.cat, &fam.sig));
                    }
                    println!("{} residuals", residuals.len());
                    Ok(if residuals.is_empty() { 0 } else { 1 })
                }
                _ => Err(USAGE.to_string()),
            }
        }
        "gen" => {
            let flags = parse_flags(&args[1..])?;
            let family = flags.need("family")?;
            let seed: u64 = match flags.get("seed") {
                Some(s) => s.parse().map_err(|_| "bad --seed".to_string())?,
                None => 0,
            };
            let cap = match flags.get("cap") {
                Some(s) => parse_cap(s)?,
                None => EnergyCap::Bounded(Energy::from_int(3)),
            };
            let epsilon: Energy = match flags.get("epsilon") {
                Some(s) => s.parse().map_err(|_| "bad --epsilon".to_string())?,
                None => Energy::ONE,
            };
            let fc = match family {
                "trivial" => generate(&GenSpec::Trivial, cap, epsilon),
                "square_zero" => generate(
                    &GenSpec::SquareZero {
                        dim: 2 + (seed as usize % 7),
                        seed,
                    },
                    cap,
                    epsilon,
                ),
                "assoc_z2" => generate(&GenSpec::AssocZ2, cap, epsilon),
                "assoc_idempotent" => generate(&GenSpec::AssocIdempotent, cap, epsilon),
                "strict_2cat" => generate(&GenSpec::Strict2Cat, cap, epsilon),
                "drop_endpoint" => {
                    let base = load_file(flags.need("in")?)?;
                    mutate_drop_endpoint(&base, seed)
                }
                _ => return Err(format!("unknown family {family:?}")),
            }
            .map_err(|e| e.to_string())?;
            write_out(Some(flags.need("out")?), &flowio::save(&fc))?;
            Ok(0)
        }
        "export" => {
            if args.get(1).map(|s| s.as_str()) != Some("dot") {
                return Err(USAGE.to_string());
            }
            let flags = parse_flags(&args[2..])?;
            let shape: Shape = flags.need("n")?.parse()?;
            let poset = enum_fiber(&shape);
            write_out(flags.get("out"), &poset.to_dot())?;
            Ok(0)
        }
        "--help" | "help" => {
            println!("{USAGE}");
            Ok(0)
        }
        _ => Err(USAGE.to_string()),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}
