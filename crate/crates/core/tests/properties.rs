//! Property-based invariants across the tail algebra and the conjugate
//! machinery: monotonicity closure, symmetry, domination, convexity, and
//! probe soundness on randomly drawn inputs.

use chaos_tails::cramer::{young_fenchel, CramerProfile, ScalarCurve};
use chaos_tails::norms::{norm_from_moments, NormFamily};
use chaos_tails::tail::{
    product_tail, product_tail_closed_form, tail_second_moment, truncation_bound, TailFunction,
};
use proptest::prelude::*;

fn parametric_strategy() -> impl Strategy<Value = TailFunction> {
    (1.0f64..4.0, 0.2f64..4.0, 0.4f64..4.0, prop_oneof![Just(0.0f64), 0.0f64..0.6])
        .prop_map(|(y, k, q, rho)| TailFunction::parametric(y, k, q, rho).unwrap())
}

fn assert_valid_tail(t: &TailFunction, x_hi: f64) {
    let mut prev = 1.0f64;
    for j in 0..=400 {
        let x = x_hi * j as f64 / 400.0;
        let v = t.eval(x);
        assert!((0.0..=1.0).contains(&v), "value {v} out of range at x={x}");
        assert!(v <= prev + 1e-12, "not nonincreasing at x={x}");
        prev = v;
    }
    assert_eq!(t.eval(0.0), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Every operator output is a valid tail function: starts at one, stays
    /// in [0, 1], never increases.
    #[test]
    fn operator_outputs_stay_valid((t, g) in (parametric_strategy(), parametric_strategy())) {
        let composed = product_tail(&t, &g);
        assert_valid_tail(&composed, 40.0);
        let truncated = truncation_bound(&t).unwrap();
        assert_valid_tail(&truncated, 40.0);
    }

    /// Product composition is symmetric in its arguments (the infimum set
    /// is identical after the substitution y -> x/y).
    #[test]
    fn product_composition_is_symmetric((t, g) in (parametric_strategy(), parametric_strategy())) {
        let tg = product_tail(&t, &g);
        let gt = product_tail(&g, &t);
        for j in 1..=40 {
            let x = 1.2 * j as f64;
            let a = tg.eval(x);
            let b = gt.eval(x);
            let denom = a.max(b).max(1e-300);
            prop_assert!((a - b).abs() / denom <= 1e-9, "x={x}: {a} vs {b}");
        }
    }

    /// The closed-form product family is a relaxation: it dominates the
    /// numeric composition at the composition's own grid nodes on the probe
    /// window.
    #[test]
    fn closed_form_product_dominates((t, g) in (parametric_strategy(), parametric_strategy())) {
        let closed = product_tail_closed_form(&t, &g).unwrap();
        let composed = product_tail(&t, &g);
        let (xs, ts) = composed.grid_nodes().unwrap();
        let k3 = closed.parametric_params().unwrap().1;
        for (&x, &c) in xs.iter().zip(ts) {
            if !(2.0..=50.0 * k3.max(1.0)).contains(&x) {
                continue;
            }
            prop_assert!(
                closed.eval(x) >= c * (1.0 - 1e-9),
                "domination fails at x={x}: {} vs {c}",
                closed.eval(x)
            );
        }
    }

    /// Any probe level gives a valid upper value for the truncation bound
    /// (the infimum property).
    #[test]
    fn truncation_probe_soundness(t in parametric_strategy(), v0 in 0.2f64..6.0, xi in 1usize..30) {
        let w = truncation_bound(&t).unwrap();
        let x = 0.5 * xi as f64;
        let probe = (-(x * x) / (8.0 * v0 * v0)).exp()
            + 4.0 / (x * x) * tail_second_moment(&t, v0).unwrap();
        prop_assert!(w.eval(x) <= probe.min(1.0) * (1.0 + 1e-3), "x={x}, v0={v0}");
    }

    /// The aggregate envelope dominates the single-block envelope.
    #[test]
    fn chi_dominates_phi(sigma2 in 0.2f64..4.0, l in 0.05f64..8.0) {
        let p = CramerProfile::quadratic(sigma2);
        prop_assert!(p.chi(l).unwrap() >= p.phi_at(l) - 1e-12);
        let p4 = CramerProfile::new(
            ScalarCurve::analytic(move |u: f64| sigma2 * u * u + 0.1 * u.powi(4)),
            f64::INFINITY,
        ).unwrap();
        prop_assert!(p4.chi(l).unwrap() >= p4.phi_at(l) - 1e-12);
    }

    /// Conjugates are convex and nondecreasing on the half-line.
    #[test]
    fn conjugate_is_convex(a in 0.3f64..3.0, b in 0.0f64..0.5) {
        let chi = ScalarCurve::analytic(move |l: f64| a * l * l + b * l.powi(4));
        let xs: Vec<f64> = (0..=200).map(|j| 8.0 * j as f64 / 200.0).collect();
        let out = young_fenchel(&chi, f64::INFINITY, &xs);
        let h = xs[1] - xs[0];
        for w in out.windows(3) {
            let second = w[2].1 - 2.0 * w[1].1 + w[0].1;
            prop_assert!(second >= -1e-9 * (1.0 + w[1].1.abs()), "second difference {second}");
            prop_assert!(w[1].1 + 1e-12 >= w[0].1, "not nondecreasing");
        }
        let _ = h;
    }

    /// Norms scale linearly with the moment sequence.
    #[test]
    fn norm_recovery_is_homogeneous(c in 0.1f64..10.0, q in 0.5f64..4.0) {
        let base: Vec<(f64, f64)> = (1..=24).map(|p| (p as f64, (p as f64).powf(0.7))).collect();
        let scaled: Vec<(f64, f64)> = base.iter().map(|&(p, m)| (p, c * m)).collect();
        let family = NormFamily::Gq { q };
        let n1 = norm_from_moments(&base, &family).unwrap().value;
        let n2 = norm_from_moments(&scaled, &family).unwrap().value;
        prop_assert!((n2 - c * n1).abs() <= 1e-9 * n2.max(1.0));
    }
}

/// Double conjugation recovers a convex sampled curve (up to grid
/// tolerance) away from the domain edges.
#[test]
fn double_conjugation_recovers_convex_curves() {
    for (a, b) in [(0.5, 0.0), (1.0, 0.1), (0.25, 0.4)] {
        let ls: Vec<f64> = (0..=2000).map(|j| 5.0 * j as f64 / 2000.0).collect();
        let ys: Vec<f64> = ls.iter().map(|l| a * l * l + b * l.powi(3)).collect();
        let chi = ScalarCurve::from_points(ls.clone(), ys.clone()).unwrap();
        // conjugate on a subgradient-covering x-grid
        let slope_end = (ys[2000] - ys[1999]) / (ls[2000] - ls[1999]);
        let xs: Vec<f64> = (0..=2000).map(|j| slope_end * j as f64 / 2000.0).collect();
        let conj = young_fenchel(&chi, f64::INFINITY, &xs);
        let (cx, cy): (Vec<f64>, Vec<f64>) = conj.into_iter().unzip();
        let star = ScalarCurve::from_points(cx, cy).unwrap();
        // biconjugate back on interior points of the original domain
        for j in (100..=1200).step_by(100) {
            let l = ls[j];
            let back = young_fenchel(&star, f64::INFINITY, &[l])[0].1;
            let expect = a * l * l + b * l.powi(3);
            assert!(
                (back - expect).abs() <= 1e-4 * (1.0 + expect),
                "a={a}, b={b}, l={l}: {back} vs {expect}"
            );
        }
    }
}

/// The refined operator never exceeds the plain truncation bound.
#[test]
fn refined_bound_is_dominated_by_truncation_bound() {
    for q in [1.5f64, 2.0, 3.0] {
        let t = TailFunction::parametric(1.0, 1.0, q, 0.0).unwrap();
        let profile = CramerProfile::weibull_symmetric(q, 1.0).unwrap();
        let w = truncation_bound(&t).unwrap();
        let wbar = chaos_tails::cramer::cramer_refined_bound(&t, &profile).unwrap();
        for j in 0..=120 {
            let x = 15.0 * j as f64 / 120.0;
            assert!(
                wbar.eval(x) <= w.eval(x) * (1.0 + 1e-9),
                "q={q}, x={x}: {} vs {}",
                wbar.eval(x),
                w.eval(x)
            );
        }
    }
}
