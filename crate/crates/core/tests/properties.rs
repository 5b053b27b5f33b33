use proptest::prelude::*;
use rand::Rng;

use specdeg::euler_ring::{limit_class_equal, DirectLimitClass, GroupDescriptor, RingElement, SubgroupClass};
use specdeg::findim::{grad_degree, linear_degree, GradientField};
use specdeg::hamiltonian::{grad_H, HamiltonianSpec, HamiltonianTerm, LoopState};
use specdeg::region::Region;
use specdeg::selftest::{random_element, random_rep, random_sym_op, ring_groups, rng};
use specdeg::srep::{Layout, Rep};

fn group_strategy() -> impl Strategy<Value = GroupDescriptor> {
    prop::sample::select(ring_groups())
}

fn element(group: GroupDescriptor) -> impl Strategy<Value = RingElement> {
    let classes: Vec<SubgroupClass> = match group {
        GroupDescriptor::Circle => std::iter::once(SubgroupClass::Full)
            .chain((1..=6).map(SubgroupClass::FiniteCyclic))
            .collect(),
        GroupDescriptor::Cyclic(_) => group.divisors().into_iter().map(SubgroupClass::Divisor).collect(),
    };
    prop::collection::vec(-20i64..=20, classes.len()).prop_map(move |cs| {
        RingElement::from_terms(group, classes.iter().copied().zip(cs)).unwrap()
    })
}

fn triple() -> impl Strategy<Value = (RingElement, RingElement, RingElement)> {
    group_strategy().prop_flat_map(|g| (element(g), element(g), element(g)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ring_is_commutative_and_associative((a, b, c) in triple()) {
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert_eq!(&a - &a, RingElement::zero(a.group()));
    }

    #[test]
    fn units_invert((a, _, _) in triple()) {
        let one = RingElement::unit(a.group());
        match a.invert() {
            Some(inv) => prop_assert_eq!(&a * &inv, one),
            None => prop_assert!(!a.is_unit()),
        }
        if a.is_unit() {
            prop_assert!(a.invert().is_some());
        }
    }

    #[test]
    fn serialization_round_trips((a, _, _) in triple()) {
        let json = serde_json::to_string(&a.to_serialized()).unwrap();
        let terms: Vec<specdeg::euler_ring::SerializedTerm> = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(RingElement::from_serialized(a.group(), &terms).unwrap(), a);
    }

    #[test]
    fn finite_classes_multiply_to_zero(k in 1u64..10, l in 1u64..10, c in -5i64..5) {
        let g = GroupDescriptor::Circle;
        let x = RingElement::from_terms(g, [(SubgroupClass::FiniteCyclic(k), c)]).unwrap();
        let y = RingElement::basis(g, SubgroupClass::FiniteCyclic(l)).unwrap();
        prop_assert!((&x * &y).is_zero());
    }

    #[test]
    fn limit_classes_form_an_equivalence(seed in any::<u64>(), l1 in 0usize..4, l2 in 0usize..4, l3 in 0usize..4) {
        let g = GroupDescriptor::Circle;
        let mut r = rng(seed);
        let mults: Vec<RingElement> = (0..6)
            .map(|_| {
                let unit = if seed % 2 == 0 { 1 } else { -1 };
                let k = r.random_range(1..=5u64);
                RingElement::from_terms(g, [(SubgroupClass::Full, unit), (SubgroupClass::FiniteCyclic(k), 1)]).unwrap()
            })
            .collect();
        let base = DirectLimitClass::new(0, random_element(g, &mut r), mults.clone());
        let at = |l: usize| DirectLimitClass::new(l, base.push_to(l).unwrap(), mults.clone());
        let (a, b, c) = (at(l1), at(l2), at(l3));
        prop_assert!(limit_class_equal(&a, &a).unwrap());
        prop_assert_eq!(limit_class_equal(&a, &b).unwrap(), limit_class_equal(&b, &a).unwrap());
        prop_assert!(limit_class_equal(&a, &b).unwrap() && limit_class_equal(&b, &c).unwrap());
        prop_assert!(limit_class_equal(&a, &c).unwrap());
        let other = DirectLimitClass::new(l1, &a.value + &RingElement::unit(g), mults.clone());
        prop_assert!(!limit_class_equal(&a, &other).unwrap());
    }

    #[test]
    fn linear_degree_is_multiplicative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (r1, r2) = (random_rep(&mut r), random_rep(&mut r));
        let (b1, b2) = (random_sym_op(&r1, &mut r), random_sym_op(&r2, &mut r));
        let d1 = linear_degree(&b1).unwrap();
        let d2 = linear_degree(&b2).unwrap();
        prop_assert_eq!(linear_degree(&b1.direct_sum(&b2)).unwrap(), &d1 * &d2);
        prop_assert!(d1.invert().is_some());
    }

    #[test]
    fn linear_field_degree_matches_spectral_count(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rep = random_rep(&mut r);
        let b = random_sym_op(&rep, &mut r);
        let f = GradientField::linear(&b, Region::centered_ball(rep.dim(), 1.0)).unwrap();
        prop_assert_eq!(grad_degree(&f).unwrap(), linear_degree(&b).unwrap());
    }

    #[test]
    fn disjoint_domains_add(c in 0.2f64..0.8) {
        // x ↦ x³ − c²x has zeros 0 and ±c
        let layout = Layout::single(Rep::trivial(1));
        let field = |center: f64, radius: f64| {
            GradientField::new(layout.clone(), Region::ball(vec![center], radius), move |x: &[f64]| {
                vec![x[0] * x[0] * x[0] - c * c * x[0]]
            })
            .unwrap()
        };
        let r = c / 3.0;
        let left = field(-c, r);
        let mid = field(0.0, r);
        let d = grad_degree(&left.disjoint_union(&mid).unwrap()).unwrap();
        prop_assert_eq!(d, &grad_degree(&left).unwrap() + &grad_degree(&mid).unwrap());
        let whole = field(0.0, 1.0 + c);
        let parts = &(&grad_degree(&left).unwrap() + &grad_degree(&mid).unwrap()) + &grad_degree(&field(c, r)).unwrap();
        prop_assert_eq!(grad_degree(&whole).unwrap(), parts);
    }

    #[test]
    fn layout_action_is_an_isometry(seed in any::<u64>(), theta in -7.0f64..7.0) {
        let mut r = rng(seed);
        let rep = random_rep(&mut r);
        let layout = Layout::single(rep.clone());
        let x: Vec<f64> = (0..rep.dim()).map(|i| ((seed >> (i % 60)) & 7) as f64 - 3.5).collect();
        let y = layout.act(theta, &x);
        let n = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
        prop_assert!((n(&x) - n(&y)).abs() <= 1e-9 * (1.0 + n(&x)));
        let back = layout.act(-theta, &y);
        for (a, b) in x.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn hamiltonian_gradient_commutes_with_time_shift(
        coeffs in prop::collection::vec(-1.0f64..1.0, 4),
        x in prop::collection::vec(-0.7f64..0.7, 10),
        theta in 0.0f64..6.3,
    ) {
        let terms = vec![
            HamiltonianTerm { exps: vec![2, 0], coeff: coeffs[0] },
            HamiltonianTerm { exps: vec![1, 1], coeff: coeffs[1] },
            HamiltonianTerm { exps: vec![3, 1], coeff: coeffs[2] },
            HamiltonianTerm { exps: vec![0, 4], coeff: coeffs[3] },
        ];
        let spec = HamiltonianSpec::new(1, terms, 1.0).unwrap();
        let z = LoopState::from_coords(1, &x);
        let a = grad_H(&spec, &z.shift(theta), 64).unwrap().to_coords();
        let b = grad_H(&spec, &z, 64).unwrap().shift(theta).to_coords();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() < 1e-9 * (1.0 + u.abs()));
        }
    }
}
