//! Property tests for the structural invariants: derivative exactness and
//! linearity, distortion identities, rotation invariance, level-curve
//! residuals, boundary traces, and test-field construction.

use num_complex::Complex64;
use proptest::prelude::*;

use conformal_lab::beltrami::{level_relation_residual, level_solve, level_x_for_fraction};
use conformal_lab::boundary::{sine_family, trace_on_mesh};
use conformal_lab::distortion::{distortion, energy_star, pairwise_sum};
use conformal_lab::mesh::{build_disk_mesh, wirtinger, DiscreteMap, WirtingerDerivs};
use conformal_lab::profile::power_profile;
use conformal_lab::variation::random_test_field;

fn complex_in(r: f64) -> impl Strategy<Value = Complex64> {
    (-r..r, -r..r).prop_map(|(x, y)| Complex64::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wirtinger_exact_on_affine_maps(
        a in complex_in(2.0),
        b in complex_in(2.0),
        c in complex_in(2.0),
        level in 0u32..3,
    ) {
        let mesh = build_disk_mesh(level).unwrap();
        let map = DiscreteMap::from_fn(&mesh, |z| a + b * z + c * z.conj());
        let d = wirtinger(&mesh, &map).unwrap();
        let scale = 1.0 + b.norm() + c.norm();
        for t in 0..mesh.n_triangles() {
            prop_assert!((d.h_w[t] - b).norm() <= 1e-13 * scale);
            prop_assert!((d.h_wbar[t] - c).norm() <= 1e-13 * scale);
        }
    }

    #[test]
    fn wirtinger_is_linear(
        a in complex_in(1.0),
        b in complex_in(1.0),
        c in complex_in(1.0),
    ) {
        let mesh = build_disk_mesh(2).unwrap();
        let m1 = DiscreteMap::from_fn(&mesh, |z| z * z);
        let m2 = DiscreteMap::from_fn(&mesh, |z| z.conj() * z + Complex64::new(0.3, 0.0));
        let combo = DiscreteMap::new(
            &mesh,
            m1.values()
                .iter()
                .zip(m2.values())
                .map(|(v1, v2)| a + b * v1 + c * v2)
                .collect(),
        )
        .unwrap();
        let d1 = wirtinger(&mesh, &m1).unwrap();
        let d2 = wirtinger(&mesh, &m2).unwrap();
        let dc = wirtinger(&mesh, &combo).unwrap();
        for t in 0..mesh.n_triangles() {
            let expect_w = b * d1.h_w[t] + c * d2.h_w[t];
            let expect_wb = b * d1.h_wbar[t] + c * d2.h_wbar[t];
            prop_assert!((dc.h_w[t] - expect_w).norm() <= 1e-12);
            prop_assert!((dc.h_wbar[t] - expect_wb).norm() <= 1e-12);
        }
    }

    #[test]
    fn distortion_identities_hold(hw in complex_in(2.0), hwb in complex_in(2.0)) {
        prop_assume!(hw.norm_sqr() > hwb.norm_sqr() + 1e-6);
        let field = distortion(&WirtingerDerivs { h_w: vec![hw], h_wbar: vec![hwb] });
        let t = &field.tris[0];
        prop_assert!(t.k >= 1.0);
        prop_assert!((t.k * t.jac - t.normsq).abs() <= 1e-12 * t.normsq);
        let mu2 = t.mu.unwrap().norm_sqr();
        prop_assert!(mu2 < 1.0);
        prop_assert!((t.k - (1.0 + mu2) / (1.0 - mu2)).abs() <= 1e-12 * t.k);
        // Operator-norm reconciliation.
        let mu = mu2.sqrt();
        let k_op = (1.0 + mu) / (1.0 - mu);
        prop_assert!((t.h_w.norm() + t.h_wbar.norm()).powi(2) <= k_op * t.jac * (1.0 + 1e-12));
        prop_assert!((t.k - 0.5 * (k_op + 1.0 / k_op)).abs() <= 1e-12 * t.k);
    }

    #[test]
    fn distortion_rotation_invariant(
        hw in complex_in(2.0),
        hwb in complex_in(2.0),
        alpha in -3.2f64..3.2,
    ) {
        prop_assume!(hw.norm_sqr() > hwb.norm_sqr() + 1e-6);
        let r = Complex64::from_polar(1.0, alpha);
        let k0 = distortion(&WirtingerDerivs { h_w: vec![hw], h_wbar: vec![hwb] }).tris[0].k;
        let post = distortion(&WirtingerDerivs { h_w: vec![r * hw], h_wbar: vec![r * hwb] }).tris[0].k;
        let pre = distortion(&WirtingerDerivs { h_w: vec![hw * r], h_wbar: vec![hwb * r.conj()] }).tris[0].k;
        prop_assert!((post - k0).abs() <= 1e-13 * k0);
        prop_assert!((pre - k0).abs() <= 1e-13 * k0);
    }

    #[test]
    fn level_solve_residual_and_range(
        p in 1.05f64..4.0,
        logk in -2.0f64..3.0,
        s in 0.02f64..0.98,
    ) {
        let k = 10f64.powf(logk);
        let x = level_x_for_fraction(p, k, s);
        let y = level_solve(p, k, x).unwrap().unwrap();
        prop_assert!(y > 0.0 && y < x);
        prop_assert!(level_relation_residual(p, k, x, y) <= 1e-12);
        // The recovered fraction matches the one the grid targeted.
        prop_assert!((y / x - s).abs() <= 1e-9 * s);
    }

    #[test]
    fn level_function_monotone_in_y(
        p in 1.05f64..4.0,
        x in 0.1f64..10.0,
        s1 in 0.01f64..0.99,
        s2 in 0.01f64..0.99,
    ) {
        prop_assume!((s1 - s2).abs() > 1e-6);
        let f = |s: f64| ((1.0 + s * s) / (1.0 - s * s)).powf(p - 1.0) * x * x * s;
        let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
        prop_assert!(f(lo) < f(hi));
    }

    #[test]
    fn sine_trace_on_circle_and_ordered(eps in -0.45f64..0.45, m in 1u32..3) {
        prop_assume!(eps.abs() * (m as f64) < 0.95);
        let mesh = build_disk_mesh(2).unwrap();
        let h0 = sine_family(eps, m).unwrap();
        let trace = trace_on_mesh(&h0, &mesh);
        let mut wraps = 0;
        for (j, v) in trace.iter().enumerate() {
            prop_assert!((v.norm() - 1.0).abs() <= 1e-14);
            let next = trace[(j + 1) % trace.len()];
            if next.arg() - v.arg() <= 0.0 {
                wraps += 1;
            }
        }
        prop_assert_eq!(wraps, 1);
    }

    #[test]
    fn energy_invariant_under_post_rotation(alpha in -3.2f64..3.2, p in 1.0f64..3.0) {
        let mesh = build_disk_mesh(2).unwrap();
        let prof = power_profile(p).unwrap();
        let base = DiscreteMap::from_fn(&mesh, |z| z + 0.2 * z.conj() * z.norm_sqr());
        let e0 = energy_star(&mesh, &base, &prof).unwrap();
        let r = Complex64::from_polar(1.0, alpha);
        let rotated = DiscreteMap::new(&mesh, base.values().iter().map(|v| r * v).collect()).unwrap();
        let e1 = energy_star(&mesh, &rotated, &prof).unwrap();
        prop_assert!((e1 - e0).abs() <= 1e-12 * e0);
    }

    #[test]
    fn test_fields_respect_their_contract(seed in 0u64..1000, delta in 0.05f64..0.45) {
        let mesh = build_disk_mesh(2).unwrap();
        let phi = random_test_field(&mesh, seed, delta, 0.45).unwrap();
        for (i, v) in mesh.vertices().iter().enumerate() {
            if mesh.is_boundary(i) || v.norm() > 1.0 - delta {
                prop_assert_eq!(phi.values()[i], Complex64::new(0.0, 0.0));
            }
        }
        let g = phi.max_gradient(&mesh).unwrap();
        prop_assert!(g > 0.0 && g <= 0.45);
        // Determinism in the seed.
        let again = random_test_field(&mesh, seed, delta, 0.45).unwrap();
        prop_assert_eq!(phi.values(), again.values());
    }

    #[test]
    fn pairwise_sum_agrees_with_kahan_scale(n in 1usize..2000) {
        let xs: Vec<f64> = (0..n).map(|i| ((i * 37 + 11) % 101) as f64 * 0.013 - 0.5).collect();
        let naive: f64 = xs.iter().sum();
        prop_assert!((pairwise_sum(&xs) - naive).abs() <= 1e-10 * (1.0 + naive.abs()));
    }
}
