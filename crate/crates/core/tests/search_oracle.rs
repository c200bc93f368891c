use std::collections::BTreeSet;

use gsdf::corpus::{default_corpus_dir, family_paths};
use gsdf::record::load_family;
use gsdf::search::{reduced_form, search, SearchProblem, Structure};
use gsdf::{ParameterSet, ResidueSet, UnitSubgroup};

type Mask = u64;
type Key = (u32, [Mask; 4]);

fn rot(x: Mask, d: u32, v: u32) -> Mask {
    let full = (1u64 << v) - 1;
    ((x << d) | (x >> (v - d))) & full
}

fn scale(x: Mask, mu: u32, v: u32) -> Mask {
    (0..v).filter(|&r| x >> r & 1 == 1).fold(0, |acc, r| acc | 1 << (r * mu % v))
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn inverse(mu: u32, v: u32) -> u32 {
    (1..v).find(|&x| x * mu % v == 1).unwrap()
}

/// `#{(a, b) : a - b = d}` summed over blocks, via `|X ∩ (X + d)|`.
fn is_family(blocks: &[Mask; 4], v: u32, lambda: u32) -> bool {
    (1..v).all(|d| blocks.iter().map(|&b| (b & rot(b, d, v)).count_ones()).sum::<u32>() == lambda)
}

/// Every `(mu, [X0, X1, muX1, mu^2 X1])` of the given structure, by exhaustion.
fn brute(v: u32, k0: u32, k: u32, lambda: u32, spin: bool, pool0: &[Mask], pool1: &[Mask]) -> BTreeSet<Key> {
    let mut out = BTreeSet::new();
    let cube = |m: u32| m * m % v * m % v;
    for mu in (2..v).filter(|&m| gcd(m, v) == 1) {
        if spin != (cube(mu) == 1) {
            continue;
        }
        for &x1 in pool1.iter().filter(|x| x.count_ones() == k) {
            let x2 = scale(x1, mu, v);
            let x3 = scale(x2, mu, v);
            if !spin && scale(x3, mu, v) == x1 {
                continue;
            }
            for &x0 in pool0.iter().filter(|x| x.count_ones() == k0) {
                let b = [x0, x1, x2, x3];
                if is_family(&b, v, lambda) {
                    out.insert((mu, b));
                }
            }
        }
    }
    out
}

fn mask(x: &ResidueSet) -> Mask {
    x.iter().fold(0, |acc, r| acc | 1 << r)
}

/// Search output closed under `(X0, X1, X2, X3; mu) -> (X0, X3, X2, X1; mu^-1)`.
fn closed(problem: &SearchProblem) -> (BTreeSet<Key>, bool) {
    let out = search(problem).unwrap();
    let v = problem.params.v;
    let mut keys = BTreeSet::new();
    for s in &out.solutions {
        let b: [Mask; 4] = std::array::from_fn(|i| mask(s.family.block(i)));
        keys.insert((s.mu, b));
        keys.insert((inverse(s.mu, v), [b[0], b[3], b[2], b[1]]));
    }
    (keys, out.exhausted)
}

/// GS-type special sets `(v; k0, k, k, k; lambda)` with `0 < k0, k < v`.
fn special_sets(v: u32) -> Vec<(u32, u32, u32)> {
    let mut out = Vec::new();
    for k0 in 1..v {
        for k in 1..v {
            let total = k0 * (k0 - 1) + 3 * k * (k - 1);
            if total % (v - 1) != 0 {
                continue;
            }
            let lambda = total / (v - 1);
            if k0 + 3 * k == lambda + v {
                out.push((k0, k, lambda));
            }
        }
    }
    out
}

#[test]
fn search_matches_exhaustion_for_small_moduli() {
    let mut compared = 0;
    for v in [5u32, 7, 9, 11, 13] {
        let all: Vec<Mask> = (0..1u64 << v).collect();
        for (k0, k, lambda) in special_sets(v) {
            for (structure, spin) in [(Structure::Spin, true), (Structure::Slide, false)] {
                let want = brute(v, k0, k, lambda, spin, &all, &all);
                let problem = SearchProblem::new(ParameterSet::special(v, k0, k, lambda), structure);
                let (got, exhausted) = closed(&problem);
                assert!(exhausted);
                assert_eq!(got, want, "({v}; {k0}, {k}; {lambda}) {structure}");
                compared += want.len();
            }
        }
    }
    assert!(compared > 1000, "{compared}");
}

#[test]
fn group_search_matches_exhaustion_over_orbit_unions() {
    let v = 31;
    let h = UnitSubgroup::closure(v, &[5]).unwrap();
    assert_eq!(h.elements().len(), 3);
    let orbits: Vec<Mask> = h.orbits().into_iter().map(|o| o.into_iter().fold(0, |a, r| a | 1 << r)).collect();
    let unions: Vec<Mask> = (0..1u64 << orbits.len())
        .map(|s| (0..orbits.len()).filter(|&i| s >> i & 1 == 1).fold(0, |a, i| a | orbits[i]))
        .collect();
    for (k0, k, lambda) in [(12, 13, 20), (10, 15, 24)] {
        let want = brute(v, k0, k, lambda, false, &unions, &unions);
        let problem = SearchProblem::new(ParameterSet::special(v, k0, k, lambda), Structure::Slide).with_group(h.clone());
        let (got, exhausted) = closed(&problem);
        assert!(exhausted);
        assert!(!want.is_empty());
        assert_eq!(got, want, "({v}; {k0}, {k}; {lambda})");
        // no spin multiplier exists for this subgroup
        let spin = SearchProblem::new(ParameterSet::special(v, k0, k, lambda), Structure::Spin).with_group(h.clone());
        assert!(search(&spin).unwrap().solutions.is_empty());
    }
}

#[test]
fn spectral_filter_is_lossless() {
    let cases = [
        SearchProblem::new(ParameterSet::special(13, 4, 5, 6), Structure::Either),
        SearchProblem::new(ParameterSet::special(19, 6, 8, 11), Structure::Spin).with_reduced_translations(true),
        SearchProblem::new(ParameterSet::special(31, 12, 13, 20), Structure::Slide)
            .with_group(UnitSubgroup::closure(31, &[5]).unwrap()),
    ];
    for p in cases {
        let on = search(&p.clone().with_spectral_filter(true)).unwrap();
        let off = search(&p.clone().with_spectral_filter(false)).unwrap();
        assert!(on.exhausted && off.exhausted);
        assert!(on.nodes_explored <= off.nodes_explored);
        let key = |o: &gsdf::SearchOutcome| o.solutions.iter().map(|s| (s.mu, s.family.clone())).collect::<Vec<_>>();
        assert_eq!(key(&on), key(&off), "{:?}", p.params);
    }
}

#[test]
fn output_is_independent_of_thread_count() {
    let p = SearchProblem::new(ParameterSet::special(19, 6, 8, 11), Structure::Spin).with_reduced_translations(true);
    let runs: Vec<Vec<_>> = [1, 2, 4]
        .into_iter()
        .map(|t| search(&p.clone().with_threads(t)).unwrap().solutions.into_iter().map(|s| (s.mu, s.family)).collect())
        .collect();
    assert!(!runs[0].is_empty());
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn reduced_output_is_the_reduced_raw_output() {
    for (v, k0, k, lambda, structure) in [(13, 4, 5, 6, Structure::Either), (13, 3, 6, 8, Structure::Either)] {
        let raw = SearchProblem::new(ParameterSet::special(v, k0, k, lambda), structure);
        let red = raw.clone().with_reduced_translations(true);
        let raw_out = search(&raw).unwrap();
        let red_out = search(&red).unwrap();
        assert!(raw_out.exhausted && red_out.exhausted);
        let raw_set: BTreeSet<_> = raw_out
            .solutions
            .iter()
            .flat_map(|s| [(s.mu, s.family.clone()), (inverse(s.mu, v), s.family.swap_outer())])
            .collect();
        let red_set: BTreeSet<_> = red_out.solutions.iter().map(|s| (s.mu, s.family.clone())).collect();
        assert!(red_set.is_subset(&raw_set));
        assert!(red_set.len() < raw_out.solutions.len());
        for s in &raw_out.solutions {
            let r = reduced_form(&red, &s.family, s.mu).unwrap();
            let swapped = reduced_form(&red, &s.family.swap_outer(), inverse(s.mu, v)).unwrap();
            assert!(
                red_set.contains(&(s.mu, r)) || red_set.contains(&(inverse(s.mu, v), swapped)),
                "v={v} mu={}",
                s.mu
            );
        }
    }
}

#[test]
fn limit_and_budget_stop_early() {
    let p = SearchProblem::new(ParameterSet::special(13, 4, 5, 6), Structure::Either);
    let out = search(&p.clone().with_limit(1)).unwrap();
    assert_eq!(out.solutions.len(), 1);
    assert!(!out.exhausted);
    let out = search(&p.with_node_budget(5)).unwrap();
    assert!(!out.exhausted);
}

/// Searches each corpus entry under its own multiplier, subgroup and printed
/// symmetry; whenever a run is exhausted the entry must be among the results.
#[test]
fn corpus_rediscovery_within_budget() {
    let mut found = Vec::new();
    let mut unfinished = Vec::new();
    for path in family_paths(&default_corpus_dir()).unwrap() {
        let Ok(rec) = load_family(&path) else { continue };
        let (Ok(f), Some(mu), Some(structure)) = (rec.family(), rec.mu(), rec.annotations.structure) else { continue };
        let Ok(report) = gsdf::classify(&f, mu) else { continue };
        if report.kind != structure || !gsdf::verify(&f).valid {
            continue;
        }
        let structure = match structure {
            gsdf::StructureKind::Spin => Structure::Spin,
            gsdf::StructureKind::Slide => Structure::Slide,
            _ => continue,
        };
        let mut p = SearchProblem::new(gsdf::verify(&f).params.unwrap(), structure)
            .with_mu(mu)
            .with_reduced_translations(true)
            .with_node_budget(2_000_000);
        if let Some(h) = rec.subgroup().unwrap() {
            p = p.with_group(h);
        }
        if let Some(sym) = rec.annotations.symbol.as_deref() {
            let (c0, c1) = gsdf::search::parse_symmetry(sym).unwrap();
            p = p.with_symmetry(c0, c1);
        }
        let out = search(&p).unwrap();
        let target = reduced_form(&p, &f, mu).unwrap();
        let hit = out.solutions.iter().any(|s| s.mu == mu && s.family == target);
        if out.exhausted {
            assert!(hit, "{} not rediscovered by an exhausted search", rec.name());
        }
        if hit {
            found.push(rec.name());
        } else {
            unfinished.push(rec.name());
        }
    }
    println!("rediscovered {}: {found:?}", found.len());
    println!("budget exhausted before reaching {}: {unfinished:?}", unfinished.len());
    assert!(found.len() >= 20, "{found:?}");
}
