//! End-to-end checks of the generator corpus through validation,
//! extraction, and the exact equation checkers.

use a2flow::flowcat::{fiber_pairs, restrict_to_mor, validate, FlowCat2, PointRec};
use a2flow::flowio;
use a2flow::gen::*;
use a2flow::linearize::*;
use a2flow::novikov::{Energy, EnergyCap};
use a2flow::shapes::{Collection, EvalGrid};

fn cap3() -> EnergyCap {
    EnergyCap::Bounded(Energy::from_int(3))
}

fn eps1() -> Energy {
    Energy::ONE
}

fn a2_clean(fc: &FlowCat2) -> Vec<Residual> {
    let fam = extract_all(fc);
    check_a2(&fam, &fc.bounds).unwrap()
}

#[test]
fn trivial_category_is_clean() {
    let fc = gen_trivial(cap3(), eps1());
    assert!(validate(&fc).is_empty());
    let fam = extract_all(&fc);
    assert!(fam.tensors.is_empty());
    assert!(a2_clean(&fc).is_empty());
}

#[test]
fn elementary_nilpotent_needs_no_edges() {
    // N(u) = v, N(v) = 0
    let n = vec![vec![false, false], vec![true, false]];
    let fc = gen_square_zero(&["u", "v"], &n, cap3(), eps1()).unwrap();
    assert!(validate(&fc).is_empty());
    assert!(fc.edges.is_empty());
    let fam = extract_all(&fc);
    let coll = fam.tensors.keys().next().unwrap().clone();
    let t = fam.tensor(&coll).unwrap();
    // mu_1(u) = T * v and nothing else
    assert_eq!(t.entries.len(), 1);
    let (ev, val) = t.entries.iter().next().unwrap();
    assert_eq!(fam.sig.name(ev.alpha[0][0][0]), "u");
    assert_eq!(fam.sig.name(ev.beta[0]), "v");
    assert_eq!(val.to_string(), "T^1");
    assert!(check_a_infty(&fam, 3).unwrap().is_empty());
}

#[test]
fn square_zero_corpus_is_clean() {
    for seed in 0..20u64 {
        let dim = 2 + (seed as usize % 7);
        let n = random_square_zero_matrix(dim, seed);
        let fc = gen_square_zero(
            &(0..dim)
                .map(|i| format!("u{i}"))
                .collect::<Vec<_>>()
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>(),
            &n,
            cap3(),
            eps1(),
        )
        .unwrap();
        let report = validate(&fc);
        assert!(report.is_empty(), "seed {seed}: {report}");
        let fam = extract_all(&fc);
        assert!(check_a_infty(&fam, 3).unwrap().is_empty(), "seed {seed}");
        assert!(a2_clean(&fc).is_empty(), "seed {seed}");
    }
}

#[test]
fn square_zero_pair_count_matches_matrix_paths() {
    let n = random_square_zero_matrix(6, 11);
    let fc = gen_square_zero(&["a", "b", "c", "d", "e", "f"], &n, cap3(), eps1()).unwrap();
    let coll = fc.stored_collections()[0].clone();
    let pairs = fiber_pairs(&fc, &coll, fc.cap);
    // each pair is one two-step path through the matrix
    let mut path_count = 0usize;
    for i in 0..6 {
        for j in 0..6 {
            for k in 0..6 {
                if n[j][i] && n[k][j] {
                    path_count += 1;
                }
            }
        }
    }
    assert_eq!(pairs.len(), path_count);
    assert!(path_count % 2 == 0);
}

#[test]
fn broken_differential_shows_residual_with_valuation_two() {
    // d(u) = v, d(v) = w: d^2 != 0, bypassing the constructor check
    let cat = a2flow::onecat::OneCat::single_object();
    let one = cat.mor_by_name("1").unwrap();
    let mut sig = a2flow::flowcat::TwoMorSig::new();
    let gens: Vec<_> = ["u", "v", "w"]
        .iter()
        .map(|name| sig.add_gen(&cat, name, one, one))
        .collect();
    let mut fc = FlowCat2::new(
        cat,
        sig,
        a2flow::flowcat::ShapeMax {
            r_max: 1,
            a_max: 1,
            mass_max: vec![3],
        },
        cap3(),
        eps1(),
    );
    let x = fc.cat.object_by_name("X").unwrap();
    let coll = Collection::new(&fc.cat, vec![x, x], vec![vec![vec![one, one]]]).unwrap();
    for (src, tgt) in [(0, 1), (1, 2)] {
        fc.add_point(PointRec {
            collection: coll.clone(),
            evals: EvalGrid {
                alpha: vec![vec![vec![gens[src]]]],
                beta: vec![gens[tgt]],
            },
            energy: Energy::ONE,
            stratum: None,
        });
    }
    assert!(!validate(&fc).is_empty());
    let fam = extract_all(&fc);
    let residuals = check_a_infty(&fam, 2).unwrap();
    assert_eq!(residuals.len(), 1);
    assert_eq!(residuals[0].value.valuation().unwrap().to_string(), "2");
}

#[test]
fn group_algebra_and_idempotent_are_clean() {
    for spec in [GenSpec::AssocZ2, GenSpec::AssocIdempotent] {
        let fc = generate(&spec, cap3(), eps1()).unwrap();
        let report = validate(&fc);
        assert!(report.is_empty(), "{spec}: {report}");
        let fam = extract_all(&fc);
        assert!(check_a_infty(&fam, 3).unwrap().is_empty(), "{spec}");
    }
    // the group algebra needs edges for the associativity classes
    let fc = generate(&GenSpec::AssocZ2, cap3(), eps1()).unwrap();
    assert!(!fc.edges.is_empty());
}

#[test]
fn non_associative_table_is_rejected() {
    // x*x = y, x*y = x, y*x = y, y*y = y is not associative
    let table = vec![
        vec![vec![false, true], vec![true, false]],
        vec![vec![false, true], vec![false, true]],
    ];
    assert!(matches!(
        gen_assoc_algebra(&["x", "y"], &table, cap3(), eps1()),
        Err(GenError::NotAssociative(_))
    ));
}

#[test]
fn strict_2cat_instances_are_clean() {
    for data in [terminal_2cat_data(), z2_whiskered_data()] {
        let fc = gen_strict_2cat(&data, cap3(), eps1()).unwrap();
        let report = validate(&fc);
        assert!(report.is_empty(), "{report}");
        let residuals = a2_clean(&fc);
        assert!(
            residuals.is_empty(),
            "{}",
            residuals[0].render(&fc.cat, &fc.sig)
        );
        let fam = extract_all(&fc);
        for r_c in [1, 2] {
            let compat = check_fiber_compat_linear(&fam, r_c);
            assert!(compat.ok(), "r_c={r_c}: {:?}", compat.violations);
        }
        assert!(bifunctor_identity_check(&fam).unwrap().is_empty());
    }
}

#[test]
fn broken_interchange_is_rejected() {
    let mut data = z2_whiskered_data();
    // horizontal of (aP, onef) redirected to the unit breaks interchange
    data.horizontal
        .insert(("aP".into(), "onef".into()), vec!["onef".into()]);
    assert!(matches!(
        gen_strict_2cat(&data, cap3(), eps1()),
        Err(GenError::AxiomViolated(_))
    ));
}

#[test]
fn mutation_fails_validation_and_leaves_a_residual() {
    let n = random_square_zero_matrix(6, 3);
    let names: Vec<String> = (0..6).map(|i| format!("u{i}")).collect();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let fc = gen_square_zero(&refs, &n, cap3(), eps1()).unwrap();
    assert!(!fc.edges.is_empty(), "corpus instance should need edges");
    let broken = mutate_break(&fc, 5).unwrap();
    let report = validate(&broken);
    assert!(
        report.violations.iter().any(|v| v.clause == 'b'),
        "{report}"
    );
    let fam = extract_all(&broken);
    let residuals = check_a_infty(&fam, 3).unwrap();
    assert!(!residuals.is_empty());
}

#[test]
fn mutating_the_trivial_category_errors() {
    let fc = gen_trivial(cap3(), eps1());
    assert!(matches!(mutate_break(&fc, 0), Err(GenError::NoEdges)));
}

#[test]
fn round_trip_is_byte_identical() {
    for spec in [
        GenSpec::Trivial,
        GenSpec::SquareZero { dim: 5, seed: 9 },
        GenSpec::AssocZ2,
        GenSpec::Strict2Cat,
    ] {
        let fc = generate(&spec, cap3(), eps1()).unwrap();
        let text = flowio::save(&fc);
        let loaded = flowio::load(&text).unwrap_or_else(|e| panic!("{spec}: {e}\n{text}"));
        let again = flowio::save(&loaded);
        assert_eq!(text, again, "round trip for {spec}");
    }
}

#[test]
fn missing_point_reference_fails_to_load() {
    let n = random_square_zero_matrix(4, 2);
    let fc = gen_square_zero(&["a", "b", "c", "d"], &n, cap3(), eps1()).unwrap();
    if fc.edges.is_empty() {
        return;
    }
    let broken = mutate_break(&fc, 1).unwrap();
    let text = flowio::save(&broken);
    let err = flowio::load(&text).unwrap_err();
    assert!(err.message.contains("missing point id"), "{err}");
}

#[test]
fn dropped_endpoint_loads_but_fails_validation() {
    let fc = generate(&GenSpec::AssocZ2, cap3(), eps1()).unwrap();
    let broken = mutate_drop_endpoint(&fc, 7).unwrap();
    let text = flowio::save(&broken);
    let loaded = flowio::load(&text).unwrap();
    let report = validate(&loaded);
    assert!(report.violations.iter().any(|v| v.clause == 'b'));
}

#[test]
fn restriction_commutes_with_extraction() {
    let fc = generate(&GenSpec::Strict2Cat, cap3(), eps1()).unwrap();
    let p = fc.cat.object_by_name("P").unwrap();
    let q = fc.cat.object_by_name("Q").unwrap();
    for (m0, m1) in [(p, p), (p, q), (q, q)] {
        let restricted = restrict_to_mor(&fc, m0, m1);
        assert!(validate(&restricted).is_empty());
        let lhs = extract_all(&restricted).tensors;
        let rhs = restrict_linear(&extract_all(&fc), m0, m1).tensors;
        assert_eq!(lhs, rhs);
        let fam = extract_all(&restricted);
        assert!(check_a_infty(&fam, 3).unwrap().is_empty());
    }
}

#[test]
fn product_extension_validates_and_factors() {
    let n = random_square_zero_matrix(4, 7);
    let fc = gen_square_zero(&["a", "b", "c", "d"], &n, cap3(), eps1()).unwrap();
    let extended = a2flow::flowcat::product_extend(&fc, 1).unwrap();
    let report = validate(&extended);
    assert!(report.is_empty(), "{report}");
    let fam = extract_all(&extended);
    let compat = check_fiber_compat_linear(&fam, 1);
    assert!(compat.ok(), "{:?}", compat.violations);
    assert!(check_a2(&fam, &extended.bounds).unwrap().is_empty());

    let strict = generate(&GenSpec::Strict2Cat, cap3(), eps1()).unwrap();
    let extended = a2flow::flowcat::product_extend(&strict, 2).unwrap();
    let report = validate(&extended);
    assert!(report.is_empty(), "{report}");
}

#[test]
fn matching_choice_does_not_affect_extraction() {
    // reversing the pairing order within classes changes the edges but not
    // the points, so the tensors and all checks agree
    let fc = generate(&GenSpec::AssocZ2, cap3(), eps1()).unwrap();
    let mut alt = fc.clone();
    let ids: Vec<u32> = alt.edges.keys().copied().collect();
    for id in ids {
        let e = alt.edges.get_mut(&id).unwrap();
        e.ends.reverse();
    }
    assert!(validate(&alt).is_empty());
    assert_eq!(extract_all(&fc).tensors, extract_all(&alt).tensors);
}

#[test]
fn perturbed_figure_eight_breaks_the_bifunctor_identity() {
    // an asymmetric figure-eight correction on only one of the two
    // composite 1-morphisms leaves a visible residual; hand-built tensors
    // with distinct parallel 1-morphisms g0, g1
    let cat = {
        let mut c = a2flow::onecat::OneCat::new();
        let p = c.add_object("P").unwrap();
        let m = c.add_object("M").unwrap();
        let q = c.add_object("Q").unwrap();
        let ip = c.add_mor("idP", p, p).unwrap();
        let im = c.add_mor("idM", m, m).unwrap();
        let iq = c.add_mor("idQ", q, q).unwrap();
        let g0 = c.add_mor("g0", p, m).unwrap();
        let g1 = c.add_mor("g1", p, m).unwrap();
        let h = c.add_mor("h", m, q).unwrap();
        let g0h = c.add_mor("g0h", p, q).unwrap();
        let g1h = c.add_mor("g1h", p, q).unwrap();
        c.set_identity(p, ip);
        c.set_identity(m, im);
        c.set_identity(q, iq);
        for x in [ip, im, iq, g0, g1, h, g0h, g1h] {
            let (s, t) = (c.src(x), c.tgt(x));
            c.set_compose(c.identity_of(s).unwrap(), x, x);
            c.set_compose(x, c.identity_of(t).unwrap(), x);
        }
        c.set_compose(g0, h, g0h);
        c.set_compose(g1, h, g1h);
        c
    };
    let p = cat.object_by_name("P").unwrap();
    let m = cat.object_by_name("M").unwrap();
    let q = cat.object_by_name("Q").unwrap();
    let g0 = cat.mor_by_name("g0").unwrap();
    let g1 = cat.mor_by_name("g1").unwrap();
    let h = cat.mor_by_name("h").unwrap();
    let g0h = cat.mor_by_name("g0h").unwrap();
    let g1h = cat.mor_by_name("g1h").unwrap();
    let mut sig = a2flow::flowcat::TwoMorSig::new();
    let x = sig.add_gen(&cat, "x", g0, g1);
    let e00 = sig.add_gen(&cat, "e00", g0h, g0h);
    let wx = sig.add_gen(&cat, "wx", g0h, g1h);
    let one = a2flow::novikov::NovElem::one;
    let t1 = || a2flow::novikov::NovElem::monomial(a2flow::rat::Rat::from_int(1));
    let mut tensors = std::collections::BTreeMap::new();
    // whisker x -> wx at energy 0
    let whisker = Collection::new(&cat, vec![p, m, q], vec![vec![vec![g0, g1], vec![h]]]).unwrap();
    let mut t = NovTensor::default();
    t.entries.insert(
        EvalGrid {
            alpha: vec![vec![vec![x], Vec::new()]],
            beta: vec![wx],
        },
        one(),
    );
    tensors.insert(whisker, t);
    // binary vertical composition entry v(e00, wx) = wx at energy 1
    let chain = Collection::new(&cat, vec![p, q], vec![vec![vec![g0h, g0h, g1h]]]).unwrap();
    let mut t = NovTensor::default();
    t.entries.insert(
        EvalGrid {
            alpha: vec![vec![vec![e00, wx]]],
            beta: vec![wx],
        },
        t1(),
    );
    tensors.insert(chain, t);
    let fam_base = TensorFamily {
        cat: cat.clone(),
        sig: sig.clone(),
        tensors: tensors.clone(),
        bounds: a2flow::flowcat::ShapeMax {
            r_max: 2,
            a_max: 1,
            mass_max: vec![3, 1],
        },
        cap: cap3(),
        epsilon: eps1(),
    };
    assert!(bifunctor_identity_check(&fam_base).unwrap().is_empty());
    // now perturb: a figure-eight correction on g0 o h only
    let fig8 = Collection::new(&cat, vec![p, m, q], vec![vec![vec![g0], vec![h]]]).unwrap();
    let mut t = NovTensor::default();
    t.entries.insert(
        EvalGrid {
            alpha: vec![vec![Vec::new(), Vec::new()]],
            beta: vec![e00],
        },
        t1(),
    );
    tensors.insert(fig8, t);
    let fam = TensorFamily {
        cat,
        sig,
        tensors,
        bounds: a2flow::flowcat::ShapeMax {
            r_max: 2,
            a_max: 1,
            mass_max: vec![3, 1],
        },
        cap: cap3(),
        epsilon: eps1(),
    };
    let residuals = bifunctor_identity_check(&fam).unwrap();
    assert!(!residuals.is_empty());
}

#[test]
fn perturbed_compat_tensor_reports_a_locus() {
    let fc = generate(&GenSpec::Strict2Cat, cap3(), eps1()).unwrap();
    let mut fam = extract_all(&fc);
    // flip one multi-block entry
    let key = fam
        .tensors
        .keys()
        .find(|l| l.a() == 2 && l.r() == 2)
        .cloned()
        .expect("a two-block tensor exists");
    let t = fam.tensors.get_mut(&key).unwrap();
    let ev = t.entries.keys().next().unwrap().clone();
    t.entries.insert(
        ev,
        a2flow::novikov::NovElem::monomial(a2flow::rat::Rat::from_int(2)),
    );
    let compat = check_fiber_compat_linear(&fam, 2);
    assert!(!compat.ok());
    assert!(compat.violations[0].contains("tensor at"));
}

#[test]
fn chain_map_whiskering_satisfies_the_bifunctor_identity() {
    // hand-built tensors: mu_1 entries and a whisker that commutes with
    // them; all figure-eight tensors zero
    let cat = {
        let mut c = a2flow::onecat::OneCat::new();
        let p = c.add_object("P").unwrap();
        let q = c.add_object("Q").unwrap();
        let ip = c.add_mor("idP", p, p).unwrap();
        let iq = c.add_mor("idQ", q, q).unwrap();
        let f = c.add_mor("f", p, q).unwrap();
        c.set_identity(p, ip);
        c.set_identity(q, iq);
        c.set_compose(ip, ip, ip);
        c.set_compose(iq, iq, iq);
        c.set_compose(ip, f, f);
        c.set_compose(f, iq, f);
        c
    };
    let p = cat.object_by_name("P").unwrap();
    let q = cat.object_by_name("Q").unwrap();
    let ip = cat.mor_by_name("idP").unwrap();
    let f = cat.mor_by_name("f").unwrap();
    let mut sig = a2flow::flowcat::TwoMorSig::new();
    let u = sig.add_gen(&cat, "u", ip, ip);
    let v = sig.add_gen(&cat, "v", ip, ip);
    let wu = sig.add_gen(&cat, "wu", f, f);
    let wv = sig.add_gen(&cat, "wv", f, f);
    let mu1 = Collection::new(&cat, vec![p, p], vec![vec![vec![ip, ip]]]).unwrap();
    let mu1f = Collection::new(&cat, vec![p, q], vec![vec![vec![f, f]]]).unwrap();
    let whisker = Collection::new(&cat, vec![p, p, q], vec![vec![vec![ip, ip], vec![f]]]).unwrap();
    let entry = |alpha: Vec<Vec<Vec<a2flow::flowcat::GenId>>>, beta| EvalGrid { alpha, beta };
    let t1 = Energy::ONE;
    let mut tensors = std::collections::BTreeMap::new();
    // d(u) = v on idP and d(wu) = wv on f
    let mut t = NovTensor::default();
    t.entries.insert(
        entry(vec![vec![vec![u]]], vec![v]),
        a2flow::novikov::NovElem::monomial(t1.rat()),
    );
    tensors.insert(mu1.clone(), t);
    let mut t = NovTensor::default();
    t.entries.insert(
        entry(vec![vec![vec![wu]]], vec![wv]),
        a2flow::novikov::NovElem::monomial(t1.rat()),
    );
    tensors.insert(mu1f.clone(), t);
    // whiskering u -> wu, v -> wv at energy 0: a chain map
    let mut t = NovTensor::default();
    t.entries.insert(
        entry(vec![vec![vec![u], Vec::new()]], vec![wu]),
        a2flow::novikov::NovElem::one(),
    );
    t.entries.insert(
        entry(vec![vec![vec![v], Vec::new()]], vec![wv]),
        a2flow::novikov::NovElem::one(),
    );
    tensors.insert(whisker.clone(), t);
    let fam = TensorFamily {
        cat,
        sig,
        tensors,
        bounds: a2flow::flowcat::ShapeMax {
            r_max: 2,
            a_max: 1,
            mass_max: vec![2, 1],
        },
        cap: cap3(),
        epsilon: eps1(),
    };
    assert!(bifunctor_identity_check(&fam).unwrap().is_empty());
}

#[test]
fn endpoint_classes_are_even_and_pairs_balance() {
    for spec in [
        GenSpec::SquareZero { dim: 6, seed: 13 },
        GenSpec::AssocZ2,
        GenSpec::Strict2Cat,
    ] {
        let fc = generate(&spec, cap3(), eps1()).unwrap();
        // endpoint multiset grouped by (collection, glued evals, energy)
        // has even cardinality
        let mut classes: std::collections::BTreeMap<_, usize> = Default::default();
        for e in fc.edges.values() {
            for ep in &e.ends {
                let left = &fc.points[&ep.left];
                let right = &fc.points[&ep.right];
                let glued =
                    a2flow::shapes::glue_evals(&ep.desc, &left.evals, &right.evals).unwrap();
                *classes
                    .entry((e.collection.clone(), glued, left.energy + right.energy))
                    .or_default() += 1;
            }
        }
        assert!(classes.values().all(|&c| c % 2 == 0), "{spec}");
        // validate-empty implies per-class fiber-pair parity zero
        assert!(validate(&fc).is_empty());
        let check_cap = fc.check_cap();
        let mut pair_classes: std::collections::BTreeMap<_, usize> = Default::default();
        for l in a2flow::flowcat::pairing_collections(&fc) {
            for pair in fiber_pairs(&fc, &l, check_cap) {
                let left = &fc.points[&pair.left];
                let right = &fc.points[&pair.right];
                let glued =
                    a2flow::shapes::glue_evals(&pair.desc, &left.evals, &right.evals).unwrap();
                *pair_classes
                    .entry((l.clone(), glued, pair.energy))
                    .or_default() += 1;
            }
        }
        assert!(pair_classes.values().all(|&c| c % 2 == 0), "{spec}");
    }
}

#[test]
fn residuals_are_monotone_under_the_cap() {
    // residuals at a lower cap are the truncations of residuals at a
    // higher cap, on a mutated category checked at both
    let fc = generate(
        &GenSpec::SquareZero { dim: 6, seed: 2 },
        EnergyCap::Bounded(Energy::from_int(4)),
        eps1(),
    )
    .unwrap();
    let broken = mutate_break(&fc, 1).unwrap();
    let fam_hi = extract_all(&broken);
    let mut fam_lo = fam_hi.clone();
    fam_lo.cap = cap3();
    let lo_cap = EnergyCap::Bounded(Energy::from_int(2));
    for t in fam_lo.tensors.values_mut() {
        for v in t.entries.values_mut() {
            *v = v.truncate(fam_lo.cap);
        }
        t.entries.retain(|_, v| !v.is_zero());
    }
    let hi = check_a_infty(&fam_hi, 3).unwrap();
    let lo = check_a_infty(&fam_lo, 3).unwrap();
    let key = |r: &Residual| (r.collection.clone(), r.evals.clone());
    let hi_map: std::collections::BTreeMap<_, _> =
        hi.iter().map(|r| (key(r), r.value.clone())).collect();
    for r in &lo {
        let hi_val = hi_map.get(&key(r)).cloned().unwrap_or_default();
        assert_eq!(r.value, hi_val.truncate(lo_cap), "class truncation");
    }
    for (k, v) in &hi_map {
        if !v.truncate(lo_cap).is_zero() {
            assert!(lo.iter().any(|r| &key(r) == k), "missing low-cap residual");
        }
    }
}

#[test]
fn circle_components_are_ignored() {
    // an edge with no endpoints contributes nothing and validates
    let mut fc = gen_trivial(cap3(), eps1());
    let x = fc.cat.object_by_name("X").unwrap();
    let one = fc.cat.mor_by_name("1").unwrap();
    let u = fc.sig.by_name("u").unwrap();
    let coll = Collection::new(&fc.cat, vec![x, x], vec![vec![vec![one, one]]]).unwrap();
    fc.add_edge(a2flow::flowcat::EdgeRec {
        collection: coll,
        evals: EvalGrid {
            alpha: vec![vec![vec![u]]],
            beta: vec![u],
        },
        energy: Energy::ONE,
        ends: Vec::new(),
    });
    assert!(validate(&fc).is_empty());
    assert!(extract_all(&fc).tensors.is_empty());
}

#[test]
fn identical_eval_classes_cancel_in_extraction() {
    // two points with the same evals and energy count to zero
    let mut fc = gen_trivial(cap3(), eps1());
    let x = fc.cat.object_by_name("X").unwrap();
    let one = fc.cat.mor_by_name("1").unwrap();
    let u = fc.sig.by_name("u").unwrap();
    let coll = Collection::new(&fc.cat, vec![x, x], vec![vec![vec![one, one]]]).unwrap();
    for _ in 0..2 {
        fc.add_point(PointRec {
            collection: coll.clone(),
            evals: EvalGrid {
                alpha: vec![vec![vec![u]]],
                beta: vec![u],
            },
            energy: Energy::ONE,
            stratum: None,
        });
    }
    let fam = extract_all(&fc);
    assert!(fam.tensors.is_empty());
}

#[test]
fn width_one_check_reduces_to_the_a_infinity_check() {
    // on width-1 families the full equation walker and the A-infinity
    // checker enumerate the same terms and agree residual for residual
    let fc = generate(&GenSpec::SquareZero { dim: 5, seed: 8 }, cap3(), eps1()).unwrap();
    let broken = mutate_break(&fc, 2).unwrap();
    let fam = extract_all(&broken);
    let via_a2 = check_a2(&fam, &broken.bounds).unwrap();
    let via_ainf = check_a_infty(&fam, 3).unwrap();
    let key = |r: &Residual| (r.collection.clone(), r.evals.clone(), r.value.clone());
    let mut a: Vec<_> = via_a2.iter().map(key).collect();
    let mut b: Vec<_> = via_ainf.iter().map(key).collect();
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[test]
fn circle_components_round_trip() {
    let mut fc = gen_trivial(cap3(), eps1());
    let x = fc.cat.object_by_name("X").unwrap();
    let one = fc.cat.mor_by_name("1").unwrap();
    let u = fc.sig.by_name("u").unwrap();
    let coll = Collection::new(&fc.cat, vec![x, x], vec![vec![vec![one, one]]]).unwrap();
    fc.add_edge(a2flow::flowcat::EdgeRec {
        collection: coll,
        evals: EvalGrid {
            alpha: vec![vec![vec![u]]],
            beta: vec![u],
        },
        energy: Energy::ONE,
        ends: Vec::new(),
    });
    let text = flowio::save(&fc);
    let loaded = flowio::load(&text).unwrap();
    assert_eq!(flowio::save(&loaded), text);
    assert_eq!(loaded.edges.len(), 1);
    assert!(loaded.edges.values().next().unwrap().ends.is_empty());
}

#[test]
fn octagon_boundary_matches_the_descriptor_index_set() {
    // the (2,1)-row space: one point-collision face plus one face per
    // ordered partition of (2,1) into nonzero parts, so its boundary is an
    // octagon
    let shape = a2flow::shapes::Shape::new(vec![vec![2, 1]]);
    let tagged = a2flow::wpoly::boundary_strata(&shape);
    assert_eq!(tagged.len(), 8);
    let type1 = tagged.iter().filter(|(d, _)| d.type_tag() == 1).count();
    let type3 = tagged.iter().filter(|(d, _)| d.type_tag() == 3).count();
    assert_eq!((type1, type3), (1, 7));
    let poset = a2flow::wpoly::enum_fiber(&shape);
    assert_eq!(poset.fvector(), vec![8, 8, 1]);
    assert_eq!(poset.euler_char(), 1);
}

#[test]
fn restriction_of_valid_categories_is_valid() {
    for spec in [
        GenSpec::Trivial,
        GenSpec::SquareZero { dim: 6, seed: 17 },
        GenSpec::AssocZ2,
        GenSpec::Strict2Cat,
    ] {
        let fc = generate(&spec, cap3(), eps1()).unwrap();
        assert!(validate(&fc).is_empty());
        let objects: Vec<_> = fc.cat.objects().collect();
        for &m0 in &objects {
            for &m1 in &objects {
                let restricted = restrict_to_mor(&fc, m0, m1);
                let report = validate(&restricted);
                assert!(report.is_empty(), "{spec} at pair: {report}");
            }
        }
    }
}

#[test]
fn strict_restriction_is_the_vertical_composition_structure() {
    let fc = generate(&GenSpec::Strict2Cat, cap3(), eps1()).unwrap();
    let p = fc.cat.object_by_name("P").unwrap();
    let restricted = restrict_to_mor(&fc, p, p);
    let fam = extract_all(&restricted);
    let idp = fc.cat.mor_by_name("idP").unwrap();
    let onep = fc.sig.by_name("oneP").unwrap();
    let ap = fc.sig.by_name("aP").unwrap();
    let coll = Collection::new(&fc.cat, vec![p, p], vec![vec![vec![idp, idp, idp]]]).unwrap();
    let t = fam.tensor(&coll).expect("binary operation present");
    // aP * aP = oneP at energy 1, the group law of the 2-cell space
    let entry = t
        .entries
        .get(&EvalGrid {
            alpha: vec![vec![vec![ap, ap]]],
            beta: vec![onep],
        })
        .expect("group law entry");
    assert_eq!(entry.to_string(), "T^1");
    // and nothing maps aP * aP to aP
    assert!(t
        .entries
        .get(&EvalGrid {
            alpha: vec![vec![vec![ap, ap]]],
            beta: vec![ap],
        })
        .is_none());
}

#[test]
fn every_two_dimensional_associative_algebra_is_clean() {
    // exhaustive: all 256 binary product tables on a 2-element basis over
    // the two-element field; the associative ones must all yield valid
    // categories with no residuals
    let mut associative = 0;
    for mask in 0u32..256 {
        let bit = |k: u32| mask >> k & 1 == 1;
        let table = vec![
            vec![vec![bit(0), bit(1)], vec![bit(2), bit(3)]],
            vec![vec![bit(4), bit(5)], vec![bit(6), bit(7)]],
        ];
        match gen_assoc_algebra(&["x", "y"], &table, cap3(), eps1()) {
            Ok(fc) => {
                associative += 1;
                let report = validate(&fc);
                assert!(report.is_empty(), "mask {mask}: {report}");
                let fam = extract_all(&fc);
                assert!(
                    check_a_infty(&fam, 3).unwrap().is_empty(),
                    "mask {mask} has residuals"
                );
            }
            Err(GenError::NotAssociative(_)) => {}
            Err(e) => panic!("mask {mask}: unexpected {e}"),
        }
    }
    // a healthy fraction of tables is associative (including zero)
    assert!(associative > 20, "only {associative} associative tables");
}

#[test]
fn loader_rejects_unknown_and_malformed_records() {
    let fc = generate(&GenSpec::AssocZ2, cap3(), eps1()).unwrap();
    let text = flowio::save(&fc);
    // unknown section header
    let broken = text.replace("TWOMOR_GENERATORS", "TWOMOR_THINGS");
    let err = flowio::load(&broken).unwrap_err();
    assert!(err.line > 0);
    // an extra field inside a point record
    let broken: String = text
        .lines()
        .map(|l| {
            if l.starts_with("p0 ") {
                format!("{l} | extra\n")
            } else {
                format!("{l}\n")
            }
        })
        .collect();
    assert!(flowio::load(&broken).is_err());
    // a foreign header version
    let broken = text.replace("A2FLOW-FC 1", "A2FLOW-FC 2");
    assert!(flowio::load(&broken).is_err());
    // truncations never panic
    for cut in (0..text.len()).step_by(97) {
        let _ = flowio::load(&text[..cut]);
    }
}

#[test]
fn boundary_of_the_two_by_two_shape_matches_the_partition_count() {
    // ordered partitions of (2,2) into b nonzero parts: 7 for two parts,
    // 12 for three, 6 for four; plus one point-collision face per seam
    let shape = a2flow::shapes::Shape::new(vec![vec![2, 2]]);
    let tagged = a2flow::wpoly::boundary_strata(&shape);
    let type1 = tagged.iter().filter(|(d, _)| d.type_tag() == 1).count();
    let by_b: Vec<usize> = (2..=4)
        .map(|b| {
            tagged
                .iter()
                .filter(|(d, _)| match d {
                    a2flow::shapes::Descriptor::Type3 { parts, .. } => parts.len() == b,
                    _ => false,
                })
                .count()
        })
        .collect();
    assert_eq!(type1, 2);
    assert_eq!(by_b, vec![7, 12, 6]);
    assert_eq!(tagged.len(), 27);
    let poset = a2flow::wpoly::enum_fiber(&shape);
    assert_eq!(poset.euler_char(), 1);
    assert_eq!(poset.fvector()[2], 27);
}

#[test]
fn path_independence_holds_at_codimension_three() {
    // vertices of the three-dimensional (2,2)-row space sit at the end of
    // many distinct maximal chains
    let shape = a2flow::shapes::Shape::new(vec![vec![2, 2]]);
    let cat = a2flow::onecat::OneCat::single_object();
    let o = cat.object_by_name("X").unwrap();
    let m = cat.mor_by_name("1").unwrap();
    let l = Collection::new(&cat, vec![o, o, o], vec![vec![vec![m; 3], vec![m; 3]]]).unwrap();
    let poset = a2flow::wpoly::enum_fiber(&shape);
    let top_dim = poset.dims[poset.top];
    let mut checked = 0;
    for idx in 0..poset.strata.len() {
        if poset.dims[idx] == top_dim - 3 {
            assert!(
                a2flow::wpoly::assoc_check(&cat, &l, &poset, idx).unwrap(),
                "codim-3 stratum {idx}"
            );
            checked += 1;
            if checked == 6 {
                break;
            }
        }
    }
    assert!(checked > 0);
}
