use std::sync::Arc;

use specdeg::corpus::{corpus, ladder, normalization_map, quartic_hamiltonian, well};
use specdeg::euler_ring::{GroupDescriptor, RingElement, SubgroupClass};
use specdeg::findim::{grad_degree, orbit_normal_form_degree, GradientField, OrbitNormalForm};
use specdeg::galerkin::{
    certify_margin, deg_infinite, deg_infinite_with, restriction_consistency, GalerkinOptions, GraphDomain,
    LocalMapSpec, SpectralMultiplier, Truncation,
};
use specdeg::hamiltonian::{degree_jump, hamiltonian_map, loop_operator, HamiltonianSpec};
use specdeg::region::Region;
use specdeg::srep::{Layout, Rep};

fn s1(terms: &[(SubgroupClass, i64)]) -> RingElement {
    RingElement::from_terms(GroupDescriptor::Circle, terms.iter().copied()).unwrap()
}

#[test]
fn quartic_tail_shrinks_with_level() {
    let f = hamiltonian_map(&quartic_hamiltonian(1, 0.3), 1.0).unwrap();
    let tails: Vec<f64> = (1..=4).map(|n| certify_margin(&f, n).unwrap().tail_bound).collect();
    assert!(tails.windows(2).all(|w| w[1] <= w[0] * 1.0001), "{tails:?}");
    assert!(tails[3] < tails[0]);
    assert!(certify_margin(&f, 1).unwrap().certified());
}

#[test]
fn single_precision_pipeline() {
    let op = ladder();
    let f64_map = normalization_map(op, 2.0);
    assert!(deg_infinite(&f64_map).unwrap().value.is_unit());
    let op32 = loop_operator::<f32>(1);
    let f32_map = LocalMapSpec::new(
        op32,
        Arc::new(SpectralMultiplier::<f32>::minus_kernel_projection()),
        GraphDomain::centered_ball(2.0f32),
    );
    let d = deg_infinite(&f32_map).unwrap();
    assert_eq!(d.value, RingElement::unit(GroupDescriptor::Circle));
}

#[test]
fn fixed_truncation_reports_requested_level() {
    let f = normalization_map(well(), 1.0);
    let opts = GalerkinOptions::default().with_truncation(Truncation::Fixed(3));
    let d = deg_infinite_with(&f, &opts).unwrap();
    assert_eq!(d.level, 3);
    assert!(d.value.is_unit());
    assert_eq!(d.limit_class.level, 3);
}

#[test]
fn restriction_to_smaller_ball() {
    let c = corpus();
    let dw = c.iter().find(|c| c.name == "double well +1").unwrap();
    let u = GraphDomain::ball(vec![1.0], 0.6);
    let w = GraphDomain::ball(vec![1.0], 0.1);
    assert!(restriction_consistency(&dw.map, &u, &w).unwrap());
    // a ball that also captures the zero at the origin changes the degree
    let big = GraphDomain::ball(vec![0.5], 0.62);
    let v = deg_infinite(&dw.map.with_domain(big)).unwrap().value;
    assert_eq!(v, s1(&[(SubgroupClass::FiniteCyclic(1), 1)]));
}

#[test]
fn degree_jumps_across_resonance() {
    let spec = HamiltonianSpec::harmonic(1, 0.5);
    let t = degree_jump(&spec, &[0.5, 1.5, 2.5], 1.0, &GalerkinOptions::default()).unwrap();
    let values: Vec<String> = t.rows.iter().map(|r| r.value.to_string()).collect();
    assert_eq!(values, ["1", "1 - [S1/Z1]", "1 - [S1/Z1] - [S1/Z2]"]);
    assert_eq!(t.jumps.len(), 2);
}

#[test]
fn orbit_normal_forms() {
    let layout = Layout::single(Rep::new(1, [(2, 1), (4, 1)]));
    let x0 = [0.0, 1.0, 0.0, 0.5, 0.5];
    let o = OrbitNormalForm::through_point(&layout, &x0);
    assert_eq!(o.isotropy, SubgroupClass::FiniteCyclic(2));
    assert_eq!(orbit_normal_form_degree(&o), s1(&[(SubgroupClass::FiniteCyclic(2), 1)]));
}

#[test]
fn translated_field_keeps_degree() {
    let layout = Layout::single(Rep::new(1, [(1, 1)]));
    let f = GradientField::new(layout, Region::centered_ball(3, 1.0), |x: &[f64]| {
        vec![x[0] * x[0] * x[0] - 0.25 * x[0], -x[1], -x[2]]
    })
    .unwrap();
    let d = grad_degree(&f).unwrap();
    let g = f.translated(&[0.4, 0.0, 0.0]).unwrap();
    assert_eq!(grad_degree(&g).unwrap(), d);
}
