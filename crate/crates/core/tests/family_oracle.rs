use gsdf::corpus::{default_corpus_dir, family_paths};
use gsdf::record::{load_family, FamilyRecord};
use gsdf::family::{paf, SymmetryType};
use gsdf::zmod;
use gsdf::{
    check_parameters, classify, complement_block, difference_counts, find_multipliers, verify,
    DifferenceFamily, ParameterSet, ResidueSet, StructureKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Counts `#{(a, b) in X×X : a - b = d}` over all four blocks by enumerating pairs.
fn brute_counts(blocks: &[Vec<u32>; 4], v: u32) -> Vec<u32> {
    let mut c = vec![0u32; v as usize];
    for b in blocks {
        for &x in b {
            for &y in b {
                if x != y {
                    c[((x + v - y) % v) as usize] += 1;
                }
            }
        }
    }
    c
}

fn brute_is_family(blocks: &[Vec<u32>; 4], v: u32) -> Option<u32> {
    let c = brute_counts(blocks, v);
    let lambda = *c.get(1)?;
    c[1..].iter().all(|&x| x == lambda).then_some(lambda)
}

fn random_blocks(rng: &mut ChaCha8Rng, v: u32) -> [Vec<u32>; 4] {
    std::array::from_fn(|_| {
        let k = rng.gen_range(0..=v);
        let mut all: Vec<u32> = (0..v).collect();
        for i in 0..k as usize {
            let j = rng.gen_range(i..v as usize);
            all.swap(i, j);
        }
        let mut b = all[..k as usize].to_vec();
        b.sort_unstable();
        b
    })
}

fn to_family(blocks: &[Vec<u32>; 4], v: u32) -> DifferenceFamily {
    DifferenceFamily::new(std::array::from_fn(|i| {
        ResidueSet::from_residues(v, blocks[i].iter().copied()).unwrap()
    }))
    .unwrap()
}

/// Records that parse; malformed entries are covered by the corpus report.
fn records() -> Vec<FamilyRecord> {
    family_paths(&default_corpus_dir())
        .unwrap()
        .iter()
        .filter_map(|p| load_family(p).ok())
        .collect()
}

fn small_corpus() -> Vec<DifferenceFamily> {
    records()
        .iter()
        .filter(|r| r.v <= 31)
        .filter_map(|r| r.family().ok())
        .filter(|f| verify(f).valid)
        .collect()
}

/// Random candidates plus valid families obtained from small corpus entries by
/// per-block translation, a common unit multiplier and block complementation.
fn candidates() -> Vec<([Vec<u32>; 4], u32)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a5f);
    let mut out = Vec::new();
    for _ in 0..1000 {
        let v = 2 * rng.gen_range(0..16) + 1;
        out.push((random_blocks(&mut rng, v), v));
    }
    for f in small_corpus() {
        let v = f.modulus();
        let units = zmod::units(v);
        for _ in 0..10 {
            let u = units[rng.gen_range(0..units.len())];
            let mut g = f.clone();
            if rng.gen_bool(0.5) {
                g = complement_block(&g, rng.gen_range(0..4)).unwrap();
            }
            let blocks: [Vec<u32>; 4] = std::array::from_fn(|i| {
                let t = rng.gen_range(0..v);
                g.block(i).scale(u).unwrap().translate(t).to_vec()
            });
            out.push((blocks, v));
        }
    }
    out
}

#[test]
fn verify_agrees_with_brute_force() {
    let mut valid = 0;
    for (blocks, v) in candidates() {
        let f = to_family(&blocks, v);
        let ver = verify(&f);
        let oracle = brute_is_family(&blocks, v);
        assert_eq!(ver.valid, oracle.is_some() || v == 1, "v={v} {blocks:?}");
        if let (Some(p), Some(lambda)) = (ver.params, oracle) {
            assert_eq!(p.lambda, lambda);
            valid += 1;
        }
        assert_eq!(ver.per_d[1..], brute_counts(&blocks, v)[1..]);
    }
    assert!(valid >= 100, "only {valid} valid candidates exercised");
}

#[test]
fn paf_sum_identity_matches_verify() {
    for (blocks, v) in candidates() {
        if v == 1 {
            continue;
        }
        let f = to_family(&blocks, v);
        let n: i64 = f.sizes().iter().map(|&k| k as i64).sum::<i64>()
            - brute_counts(&blocks, v)[1] as i64;
        let pafs: Vec<Vec<i64>> = f.blocks().iter().map(paf).collect();
        let sums: Vec<i64> = (1..v as usize).map(|s| pafs.iter().map(|p| p[s]).sum()).collect();
        // a family is exactly a 4-tuple whose summed PAF is constant off zero
        let constant = sums.iter().all(|&x| x == sums[0]);
        assert_eq!(constant, verify(&f).valid, "v={v}");
        if constant {
            assert_eq!(sums[0], 4 * (v as i64 - n), "v={v}");
        }
    }
}

#[test]
fn difference_counts_match_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let v = 2 * rng.gen_range(1..40) + 1;
        let b = random_blocks(&mut rng, v);
        let x = ResidueSet::from_residues(v, b[0].iter().copied()).unwrap();
        let got = difference_counts(&x);
        let want = brute_counts(&[b[0].clone(), vec![], vec![], vec![]], v);
        assert_eq!(got[1..], want[1..]);
    }
}

#[test]
fn complementing_a_block_shifts_the_parameters() {
    for f in small_corpus() {
        let p = verify(&f).params.unwrap();
        for i in 0..4 {
            let g = complement_block(&f, i).unwrap();
            let q = verify(&g).params.expect("still a family");
            assert_eq!(q.k[i], p.v - p.k[i]);
            assert_eq!(q.lambda as i64, p.lambda as i64 + p.v as i64 - 2 * p.k[i] as i64);
        }
    }
}

#[test]
fn parameter_identity_mutation_fails() {
    let c = check_parameters(&ParameterSet::special(7, 4, 2, 2));
    assert!(!c.well_formed);
    let c = check_parameters(&ParameterSet::special(7, 3, 2, 2));
    assert!(c.well_formed && c.gs_type && c.special && c.square_ok == Some(true));
}

#[test]
fn inverse_pair_is_spin_for_every_corpus_spin_entry() {
    let mut checked = 0;
    for rec in records() {
        let (Ok(f), Some(mu)) = (rec.family(), rec.mu()) else { continue };
        let r = classify(&f, mu).unwrap();
        if r.kind != StructureKind::Spin {
            continue;
        }
        let inv = zmod::inverse(f.modulus(), mu).unwrap();
        let partner = classify(&f.swap_outer(), inv).unwrap();
        assert_eq!(partner.kind, StructureKind::Spin, "{}", rec.name());
        assert!(find_multipliers(&f.swap_outer()).iter().any(|r| r.mu == inv));
        checked += 1;
    }
    assert!(checked >= 40, "{checked}");
}

#[test]
fn spin_multipliers_stabilize_x1_under_the_cube() {
    for rec in records() {
        let Ok(f) = rec.family() else { continue };
        for r in find_multipliers(&f).into_iter().filter(|r| r.kind == StructureKind::Spin) {
            let v = f.modulus();
            let cube = zmod::mul_mod(zmod::mul_mod(r.mu, r.mu, v), r.mu, v);
            assert_eq!(f.block(1).scale(cube).unwrap(), *f.block(1), "{} mu={}", rec.name(), r.mu);
        }
    }
}

#[test]
fn symbol_letters() {
    let v = 7;
    let skew = ResidueSet::from_residues(v, [1, 2, 4]).unwrap();
    let sym = skew.union(&skew.negate()).unwrap();
    assert_eq!(SymmetryType::of(&skew), SymmetryType::Skew);
    assert_eq!(SymmetryType::of(&sym), SymmetryType::Symmetric);
    assert_eq!(SymmetryType::of(&ResidueSet::from_residues(v, [0, 1]).unwrap()), SymmetryType::Neither);
}
