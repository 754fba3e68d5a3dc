use proptest::prelude::*;

use wsp4::cartan;
use wsp4::characters::{character, check_psi, lowest_layer_ok, nonnegative_integral};
use wsp4::classifier::{enumerate_modules, h_system, phi_label, psi_label, psi_orbits, Level};
use wsp4::mode_algebra::{commutator, modes_up_to};
use wsp4::qz_series::{QZSeries, SeriesJson};
use wsp4::rat::{q, qi, Q};

const ORDER: usize = 5;
const WINDOW: (i64, i64) = (-3, 3);

fn series() -> impl Strategy<Value = QZSeries> {
    let width = (WINDOW.1 - WINDOW.0 + 1) as usize;
    (prop::collection::vec(-4i64..=4, (ORDER + 1) * width), -3i64..=3, 1i64..=4).prop_map(move |(cs, a, d)| {
        let mut s = QZSeries::zero(q(a, d), q(-a, d), ORDER, WINDOW);
        for (i, c) in cs.into_iter().enumerate() {
            // Sparse on purpose so products stay inside the window often.
            if i % 3 == 0 {
                s.set(i / width, WINDOW.0 + (i % width) as i64, qi(c));
            }
        }
        s
    })
}

fn small_series() -> impl Strategy<Value = QZSeries> {
    (prop::collection::vec(-3i64..=3, (ORDER + 1) * 3)).prop_map(|cs| {
        let mut s = QZSeries::zero(qi(0), qi(0), ORDER, (-1, 1));
        for (i, c) in cs.into_iter().enumerate() {
            s.set(i / 3, -1 + (i % 3) as i64, qi(c));
        }
        s
    })
}

fn admissible_level() -> impl Strategy<Value = Level> {
    prop_oneof![
        prop::sample::select(vec![4i64, 5, 7, 8, 10, 11, 13]).prop_map(Level::principal),
        prop::sample::select(vec![5i64, 7, 9, 11, 13]).prop_map(Level::coprincipal),
    ]
}

fn rational() -> impl Strategy<Value = Q> {
    (-40i64..=40, 1i64..=12).prop_map(|(n, d)| q(n, d))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn addition_commutes(a in series(), b in series()) {
        let mut same = QZSeries::zero(a.q_offset().clone(), a.z_offset().clone(), ORDER, WINDOW);
        for (n, m, c) in b.terms() {
            same.set(n as usize, m, c);
        }
        let b = same;
        prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
    }

    #[test]
    fn product_commutes_and_associates(a in small_series(), b in small_series(), c in small_series()) {
        prop_assert_eq!(a.mul(&b, None), b.mul(&a, None));
        prop_assert_eq!(a.mul(&b, None).mul(&c, None), a.mul(&b.mul(&c, None), None));
    }

    #[test]
    fn geometric_division_inverts(a in series(), n in 0usize..=3, m in -2i64..=2) {
        prop_assume!(n > 0 || m != 0);
        let mut g = a.clone();
        g.div_one_minus_monomial(n, m).unwrap();
        g.mul_one_minus_monomial(n, m);
        prop_assert_eq!(g, a);
    }

    #[test]
    fn invert_z_is_an_involution(a in series()) {
        prop_assert_eq!(a.invert_z().invert_z(), a);
    }

    #[test]
    fn json_round_trip(a in series()) {
        let text = serde_json::to_string(&a.to_json()).unwrap();
        let back: SeriesJson = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(QZSeries::from_json(&back).unwrap(), a);
    }

    #[test]
    fn central_charge_matches_closed_form(k in rational()) {
        prop_assume!(k != qi(-3));
        prop_assert_eq!(cartan::central_charge(&k).unwrap(), cartan::central_charge_closed(&k).unwrap());
    }

    #[test]
    fn commutator_is_antisymmetric(k in rational(), i in 0usize..81, j in 0usize..81) {
        prop_assume!(k != qi(-3));
        let modes = modes_up_to(4);
        let (a, b) = (modes[i % modes.len()], modes[j % modes.len()]);
        let mut s = commutator(a, b, &k);
        s.add(&commutator(b, a, &k));
        prop_assert!(s.is_zero());
    }

    #[test]
    fn label_symmetries(lv in admissible_level()) {
        let labels = enumerate_modules(&lv).unwrap();
        let mut keys: Vec<_> = labels.iter().map(|l| l.key()).collect();
        keys.sort();
        let mut images: Vec<_> = labels.iter().map(|l| psi_label(l, &lv).unwrap().key()).collect();
        images.sort();
        prop_assert_eq!(&images, &keys);
        for l in &labels {
            prop_assert_eq!(phi_label(&phi_label(l, &lv).unwrap(), &lv).unwrap().key(), l.key());
            prop_assert!(h_system(l, &lv.k).iter().all(|x| *x == qi(0)));
        }
        let covered: usize = psi_orbits(&lv).unwrap().iter().map(Vec::len).sum();
        prop_assert_eq!(covered, labels.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn characters_are_sane(p in prop::sample::select(vec![4i64, 5, 7, 8]), principal in any::<bool>(), pick in 0usize..1000) {
        let lv = if principal || p % 2 == 0 { Level::principal(p) } else { Level::coprincipal(p) };
        let labels = enumerate_modules(&lv).unwrap();
        let lab = &labels[pick % labels.len()];
        let ch = character(lab, &lv, 4).unwrap();
        prop_assert!(nonnegative_integral(&ch));
        prop_assert!(lowest_layer_ok(&ch, lab));
        prop_assert!(check_psi(lab, &lv, 4).unwrap().passed());
    }
}
