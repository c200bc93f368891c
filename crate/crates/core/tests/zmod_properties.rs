use gsdf::zmod::{self, ResidueSet, UnitSubgroup};
use proptest::prelude::*;

fn odd_modulus() -> impl Strategy<Value = u32> {
    (0u32..60).prop_map(|h| 2 * h + 1)
}

fn set_mod(v: u32) -> impl Strategy<Value = ResidueSet> {
    prop::collection::vec(0..v, 0..=v as usize)
        .prop_map(move |xs| ResidueSet::from_residues(v, xs).unwrap())
}

fn modulus_and_set() -> impl Strategy<Value = (u32, ResidueSet)> {
    odd_modulus().prop_flat_map(|v| (Just(v), set_mod(v)))
}

fn modulus_set_unit() -> impl Strategy<Value = (u32, ResidueSet, u32)> {
    modulus_and_set().prop_flat_map(|(v, x)| {
        let units = zmod::units(v);
        (Just(v), Just(x), prop::sample::select(units))
    })
}

/// Membership by definition, element by element.
fn naive_scale(x: &ResidueSet, mu: u32) -> Vec<u32> {
    let v = x.modulus();
    let mut out: Vec<u32> = x.iter().map(|r| (r as u64 * mu as u64 % v as u64) as u32).collect();
    out.sort_unstable();
    out
}

proptest! {
    #[test]
    fn negate_is_an_involution((_v, x) in modulus_and_set()) {
        prop_assert_eq!(x.negate().negate(), x);
    }

    #[test]
    fn complement_is_an_involution((v, x) in modulus_and_set()) {
        let c = x.complement();
        prop_assert_eq!(c.len() + x.len(), v as usize);
        prop_assert_eq!(c.intersection_len(&x), 0);
        prop_assert_eq!(c.complement(), x);
    }

    #[test]
    fn scale_matches_definition_and_inverts((v, x, mu) in modulus_set_unit()) {
        let y = x.scale(mu).unwrap();
        prop_assert_eq!(y.to_vec(), naive_scale(&x, mu));
        let inv = zmod::inverse(v, mu).unwrap();
        prop_assert_eq!(y.scale(inv).unwrap(), x);
    }

    #[test]
    fn scaling_preserves_symmetry_classes((_v, x, mu) in modulus_set_unit()) {
        let y = x.scale(mu).unwrap();
        prop_assert_eq!(y.is_symmetric(), x.is_symmetric());
        prop_assert_eq!(y.is_skew(), x.is_skew());
    }

    #[test]
    fn translate_by_t_then_minus_t((v, x) in modulus_and_set(), t in 0u32..200) {
        let t = t % v;
        let back = (v - t) % v;
        prop_assert_eq!(x.translate(t).translate(back), x.clone());
        let naive: Vec<u32> = {
            let mut w: Vec<u32> = x.iter().map(|r| (r + t) % v).collect();
            w.sort_unstable();
            w
        };
        prop_assert_eq!(x.translate(t).to_vec(), naive);
    }

    #[test]
    fn skew_sets_have_half_the_nonzero_residues((v, x) in modulus_and_set()) {
        if x.is_skew() {
            prop_assert_eq!(x.len() as u32, (v - 1) / 2);
            prop_assert!(!x.contains(0));
        }
        let mut s = x.clone();
        s.remove(0);
        let sym = s.union(&s.negate()).unwrap();
        prop_assert!(sym.is_symmetric());
    }

    #[test]
    fn expanded_orbits_are_invariant((v, _x, g) in modulus_set_unit(), reps in prop::collection::vec(0u32..200, 0..6)) {
        let h = UnitSubgroup::closure(v, &[g]).unwrap();
        let reps: Vec<u32> = reps.into_iter().map(|r| r % v).collect();
        let set = h.expand_orbits(&reps).unwrap();
        for &e in h.elements() {
            prop_assert_eq!(set.scale(e).unwrap(), set.clone());
        }
        let back = h.orbit_reps(&set).expect("invariant set has reps");
        prop_assert_eq!(h.expand_orbits(&back).unwrap(), set);
    }

    #[test]
    fn orbits_partition_the_residues((v, _x, g) in modulus_set_unit()) {
        let h = UnitSubgroup::closure(v, &[g]).unwrap();
        let mut seen = vec![false; v as usize];
        for orbit in h.orbits() {
            for r in orbit {
                prop_assert!(!seen[r as usize]);
                seen[r as usize] = true;
            }
        }
        prop_assert!(seen.into_iter().all(|s| s));
    }
}

#[test]
fn unit_orders_divide_group_order() {
    for v in (3..200).step_by(2) {
        let units = zmod::units(v);
        for &u in &units {
            let o = zmod::unit_order(v, u).unwrap();
            assert_eq!(units.len() as u32 % o, 0, "v={v} u={u}");
        }
    }
}
