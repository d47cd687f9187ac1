use std::f64::consts::{FRAC_PI_2, TAU};

use proptest::prelude::*;
use torus_ergodic::torus::{hormander_rank, lie_bracket, wrap_coord, CatalogProblem, TorusPoint, VectorField};

fn fields_at(p: &torus_ergodic::SdeProblem, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut f = vec![0.0; p.dim()];
    let mut g = vec![0.0; p.dim() * p.noise_dim()];
    p.drift_into(x, &mut f);
    p.diffusion_into(x, &mut g);
    (f, g)
}

proptest! {
    #[test]
    fn fields_are_periodic(x in prop::collection::vec(-20.0f64..20.0, 2), axis in 0usize..2) {
        for c in CatalogProblem::ALL {
            let p = c.build();
            let x = &x[..p.dim()];
            let i = axis % p.dim();
            let mut y = x.to_vec();
            y[i] += TAU;
            let y = TorusPoint::wrap(&y).unwrap();
            let (fx, gx) = fields_at(&p, x);
            let (fy, gy) = fields_at(&p, y.coords());
            for (a, b) in fx.iter().zip(&fy).chain(gx.iter().zip(&gy)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn wrap_is_idempotent_and_in_range(x in -1e6f64..1e6) {
        let w = wrap_coord(x);
        prop_assert!((0.0..TAU).contains(&w));
        prop_assert_eq!(wrap_coord(w), w);
    }

    #[test]
    fn wrap_matches_rem_euclid(x in -100.0f64..100.0) {
        let r = x.rem_euclid(TAU);
        let expected = if r >= TAU { 0.0 } else { r };
        prop_assert_eq!(wrap_coord(x), expected);
    }

    #[test]
    fn grad1d_drift_is_minus_potential_gradient(x in 0.0f64..TAU) {
        let p = CatalogProblem::Grad1d.build();
        prop_assert!(p.gradient_defect(&[x], 1e-6).unwrap() <= 1e-10);
    }

    #[test]
    fn bracket_is_antisymmetric_and_bilinear(x0 in 0.0f64..TAU, x1 in 0.0f64..TAU, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let hypo = CatalogProblem::Hypo2d.build();
        let f = hypo.drift_field();
        let g = VectorField::new(|x: &[f64]| vec![x[0].cos() * x[1].sin(), (2.0 * x[0]).sin()]);
        let h = VectorField::new(|x: &[f64]| vec![x[1].cos(), x[0].cos() + x[1]]);
        let x = [x0, x1];
        let fg = lie_bracket(&f, &g, &x);
        let gf = lie_bracket(&g, &f, &x);
        for i in 0..2 {
            prop_assert!((fg[i] + gf[i]).abs() <= 1e-6);
        }
        let combo = VectorField::new({
            let (g, h) = (g.clone(), h.clone());
            move |x: &[f64]| {
                let (u, v) = (g.eval(x), h.eval(x));
                vec![a * u[0] + b * v[0], a * u[1] + b * v[1]]
            }
        });
        let lhs = lie_bracket(&f, &combo, &x);
        let fh = lie_bracket(&f, &h, &x);
        for i in 0..2 {
            prop_assert!((lhs[i] - (a * fg[i] + b * fh[i])).abs() <= 1e-6);
        }
    }
}

#[test]
fn wrap_at_the_period_maps_to_zero() {
    assert_eq!(wrap_coord(TAU), 0.0);
    assert_eq!(wrap_coord(0.0), 0.0);
    assert_eq!(wrap_coord(-TAU), 0.0);
}

#[test]
fn bracket_examples() {
    let hypo = CatalogProblem::Hypo2d.build();
    let e2 = VectorField::constant(vec![0.0, 1.0]);
    let v = lie_bracket(&e2, &hypo.drift_field(), &[0.0, 0.0]);
    assert!((v[0] - 1.0).abs() <= 1e-6 && v[1].abs() <= 1e-6);
    let f = hypo.drift_field();
    assert!(lie_bracket(&f, &f, &[0.3, 1.2]).iter().all(|c| c.abs() <= 1e-9));
    let c = VectorField::constant(vec![2.0, -1.0]);
    assert!(lie_bracket(&c, &e2, &[0.3, 1.2]).iter().all(|c| *c == 0.0));
}

#[test]
fn hormander_rank_examples() {
    let hypo = CatalogProblem::Hypo2d.build();
    assert_eq!(hormander_rank(&hypo, &[0.0, 0.0], 0), 1);
    assert_eq!(hormander_rank(&hypo, &[0.0, 0.0], 1), 2);
    assert_eq!(hormander_rank(&hypo, &[0.0, FRAC_PI_2], 0), 2);
}

#[test]
fn hypo2d_bracket_condition_holds_on_a_grid() {
    let hypo = CatalogProblem::Hypo2d.build();
    for i in 0..64 {
        for j in 0..64 {
            let x = [TAU * i as f64 / 64.0, TAU * j as f64 / 64.0];
            assert_eq!(hormander_rank(&hypo, &x, 2), 2, "at {x:?}");
        }
    }
}
