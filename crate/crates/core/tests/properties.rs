use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rdx_core::eqmodel::{classify_regime, closed_form_exponents, self_similar_exponents, EquationDescriptor, FormKind};
use rdx_core::exponents::{fujita_pair, l_constants, p_jl, p_l};
use rdx_core::pde::{integrate, GridConfig, OuterBc, RunStatus};
use rdx_core::profiles::{shoot, BehaviorClass, ShootOptions, ShootTarget};
use rdx_core::solutions::{
    explicit_backward_p1, explicit_profile_1d, rescale, stationary_singular, ClosedFormSolution,
};
use rdx_core::transforms::{build, main_transform, TransformKind};
use rdx_core::wire::{fmt_g, parse_real};
use rdx_core::Field;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn radial(m: f64, p: f64, n: f64, s1: f64, s2: f64) -> EquationDescriptor {
    EquationDescriptor::radial(m, p, n, s1, s2).unwrap()
}

prop_compose! {
    fn admissible()(
        m in 1.0..4.0f64,
        p in 1.0..6.0f64,
        n in 1.0..12.0f64,
        s1 in -1.99..5.0f64,
        s2 in -1.99..5.0f64,
    ) -> EquationDescriptor {
        radial(m, p, n, s1, s2)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exponent_system_matches_closed_form(d in admissible()) {
        prop_assume!(d.l_value().abs() > 1e-3);
        for kind in [FormKind::Forward, FormKind::Backward] {
            let form = self_similar_exponents(&d, kind).unwrap();
            let (a, b) = closed_form_exponents(&d, kind).unwrap();
            prop_assert!(rel(form.alpha, a) < 1e-12, "{kind:?} alpha {} vs {a}", form.alpha);
            if b != 0.0 {
                prop_assert!(rel(form.beta, b) < 1e-12, "{kind:?} beta {} vs {b}", form.beta);
            } else {
                prop_assert!(form.beta.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn self_similar_sign_law(m in 1.05..4.0f64, frac in 0.0..0.95f64, n in 1.0..12.0f64, s1 in -1.99..5.0f64, s2 in -1.99..5.0f64) {
        let p = 1.0 + frac * (m - 1.0);
        let d = radial(m, p, n, s1, s2);
        let l = d.l_value();
        prop_assume!(l.abs() > 1e-6);
        let kind = if l > 0.0 { FormKind::Backward } else { FormKind::Forward };
        let form = self_similar_exponents(&d, kind).unwrap();
        prop_assert!(form.alpha > 0.0 && form.beta > 0.0, "{kind:?}: alpha {} beta {}", form.alpha, form.beta);
    }

    #[test]
    fn separate_variable_alpha(m in 1.01..5.0f64, n in 1.0..12.0f64, s1 in -1.99..5.0f64, s2 in -1.99..5.0f64) {
        let form = self_similar_exponents(&radial(m, m, n, s1, s2), FormKind::SeparateVariable).unwrap();
        prop_assert_eq!(form.alpha, 1.0 / (m - 1.0));
        prop_assert_eq!(form.beta, 0.0);
    }

    #[test]
    fn classify_is_pure(d in admissible()) {
        // reports may hold NaN, so compare the wire form
        let a = serde_json::to_string(&classify_regime(&d)).unwrap();
        let b = serde_json::to_string(&classify_regime(&d.clone())).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn equal_weights_collapse_l_sigma(m in 1.0..4.0f64, p in 1.0..6.0f64, n in 1.0..12.0f64, s in -1.99..5.0f64) {
        let l = l_constants(&radial(m, p, n, s, s)).l_sigma;
        let expect = (s + 2.0) * (p - 1.0);
        prop_assert!((l - expect).abs() <= 1e-12 * (1.0 + expect.abs()), "{l} vs {expect}");
    }

    #[test]
    fn fujita_through_main_transform(d in admissible()) {
        prop_assume!(d.n + d.sigma1 > 0.05);
        let map = main_transform(&d).unwrap();
        let via_map = d.m + (map.target.sigma2 + 2.0) / map.target.n;
        let direct = fujita_pair(&d).p_f.unwrap();
        prop_assert!(rel(via_map, direct) < 1e-12, "{via_map} vs {direct}");
    }

    #[test]
    fn fujita_monotone_in_weights(d in admissible(), step in 0.01..1.0f64) {
        prop_assume!(d.n + d.sigma1 > 0.0);
        let base = fujita_pair(&d).p_f.unwrap();
        let up2 = fujita_pair(&radial(d.m, d.p, d.n, d.sigma1, d.sigma2 + step)).p_f.unwrap();
        let up1 = fujita_pair(&radial(d.m, d.p, d.n, d.sigma1 + step, d.sigma2)).p_f.unwrap();
        prop_assert!(up2 > base);
        prop_assert!(up1 < base);
    }

    #[test]
    fn supercritical_exponents_infinite_below_threshold(m in 1.0..4.0f64, n in 1.0..40.0f64, s in -2.0..5.0f64) {
        let below = n <= 10.0 + 4.0 * s;
        prop_assert_eq!(p_jl(m, n, s) == f64::INFINITY, below);
        prop_assert_eq!(p_l(m, n, s) == f64::INFINITY, below);
        if !below {
            prop_assert!(p_jl(m, n, s).is_finite() && p_l(m, n, s).is_finite());
        }
    }

    #[test]
    fn second_critical_identity(d in admissible()) {
        match fujita_pair(&d).mu {
            Some(mu) => prop_assert!((mu * (d.p - d.m) - (d.sigma2 + 2.0)).abs() <= 1e-12 * (1.0 + d.sigma2.abs() + mu.abs())),
            None => prop_assert!(d.p <= d.m),
        }
    }

    #[test]
    fn power_maps_satisfy_structure_condition(d in admissible()) {
        for kind in [TransformKind::Main, TransformKind::Second] {
            if let Ok(map) = build(kind, &d) {
                prop_assert!(map.structure_defect().abs() < 1e-12, "{kind:?}: {}", map.structure_defect());
            }
        }
    }

    #[test]
    fn log_maps_satisfy_structure_condition(m in 1.0..4.0f64, n in 1.0..12.0f64, s2 in -1.99..5.0f64, p_off in 0.01..4.0f64) {
        // sigma1 = -2 qualifies for both log maps when m = 1
        let d = radial(m, m + p_off, n, -2.0, s2);
        let map = build(TransformKind::Euler, &d);
        if m > 1.0 {
            prop_assert!(map.unwrap().structure_defect().abs() < 1e-12);
        }
        let semilinear = radial(1.0, 1.0 + p_off, n, -2.0, s2);
        prop_assert!(build(TransformKind::Fisher, &semilinear).unwrap().structure_defect().abs() < 1e-12);
        // the L = 0 branch, with sigma2 placed on the critical surface
        let s1 = 0.5;
        let m2 = m + 0.5;
        let p = m2 + p_off;
        let s2c = ((s1 * (m2 - p)) - 2.0 * (p - 1.0)) / (m2 - 1.0);
        let crit = radial(m2, p, n, s1, s2c);
        prop_assert!(build(TransformKind::Euler, &crit).unwrap().structure_defect().abs() < 1e-12);
    }

    #[test]
    fn main_transform_weight_range(m in 1.0..4.0f64, p in 1.0..6.0f64, n in 2.0..12.0f64, s1 in -1.99..5.0f64, s2 in -2.0..5.0f64) {
        let map = main_transform(&radial(m, p, n, s1, s2)).unwrap();
        prop_assert!(map.target.sigma2 >= -2.0 - 1e-12);
        let equal = main_transform(&radial(m, p, n, s1, s1)).unwrap();
        prop_assert_eq!(equal.target.sigma2, 0.0);
    }

    #[test]
    fn criticality_is_transform_invariant(m in 1.0..4.0f64, p in 1.0..6.0f64, n in 2.0..12.0f64, s1 in -1.99..5.0f64, s2 in -1.99..5.0f64) {
        let d = radial(m, p, n, s1, s2);
        let map = main_transform(&d).unwrap();
        let t = &map.target;
        let l_target = t.sigma2 * (m - 1.0) + 2.0 * (p - 1.0);
        // theta * L_target = L_sigma identically
        let scale = 1.0 + d.l_value().abs() + s1.abs() + s2.abs();
        prop_assert!((map.theta * l_target - d.l_value()).abs() < 1e-12 * scale);
        // pick sigma2 on the critical surface
        prop_assume!(m > 1.0 + 1e-3);
        let s2c = (s1 * (m - p) - 2.0 * (p - 1.0)) / (m - 1.0);
        prop_assume!(s2c > -2.0);
        let dc = radial(m, p, n, s1, s2c);
        let tc = main_transform(&dc).unwrap().target;
        prop_assert!((tc.sigma2 * (m - 1.0) + 2.0 * (p - 1.0)).abs() < 1e-12 * (1.0 + s1.abs() + s2c.abs()));
    }

    #[test]
    fn wire_format_round_trips(x in prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::INFINITE) {
        let back = parse_real(&fmt_g(x)).unwrap();
        if x.is_infinite() || x == 0.0 {
            prop_assert_eq!(back, x);
        } else {
            prop_assert!(rel(back, x) <= 5e-12, "{x} -> {} -> {back}", fmt_g(x));
        }
    }
}

fn smooth(r: f64, t: f64) -> f64 {
    (1.0 + 0.3 * t) / (1.0 + r * r) + 0.5 * (-r / 3.0).exp() * (2.0 + (t).sin())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pull_back_inverts_push_forward(d in admissible(), seed in any::<u64>()) {
        prop_assume!(d.n + d.sigma1 > 0.05);
        let mut maps = Vec::new();
        for kind in [TransformKind::Main, TransformKind::Second] {
            if let Ok(map) = build(kind, &d) {
                maps.push(map);
            }
        }
        maps.push(build(TransformKind::Euler, &radial(d.m.max(1.5), d.p, d.n, -2.0, d.sigma2)).unwrap());
        maps.push(build(TransformKind::Fisher, &radial(1.0, d.p.max(1.5), d.n, -2.0, d.sigma2)).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for map in &maps {
            let back = map.pull_back(map.push_forward(smooth));
            for _ in 0..2500 {
                let (r, t) = (rng.gen_range(0.01..20.0), rng.gen_range(0.0..5.0));
                let (u, v) = (smooth(r, t), back.try_eval(r, t).unwrap());
                prop_assert!(rel(u, v) < 1e-12, "{:?} at ({r}, {t}): {u} vs {v}", map.kind);
            }
        }
    }

    #[test]
    fn stationary_solution_is_time_independent(m in 1.0..3.0f64, n in 3.0..12.0f64, s2 in -1.0..3.0f64, above in 0.05..3.0f64, r in 0.01..50.0f64, t1 in 0.0..10.0f64, t2 in 0.0..10.0f64) {
        let p = m * (n + s2) / (n - 2.0) + above;
        let sol = stationary_singular(&radial(m, p, n, s2, s2)).unwrap();
        prop_assert_eq!(sol.evaluate(r, t1).to_bits(), sol.evaluate(r, t2).to_bits());
    }

    #[test]
    fn rescale_is_a_group_action(m in 1.1..3.0f64, frac in 0.0..0.9f64, n in 1.0..12.0f64, s1 in -1.5..4.0f64, l1 in 0.1..10.0f64, l2 in 0.1..10.0f64, r in 0.01..5.0f64, t in 0.0..3.0f64) {
        let p = 1.0 + frac * (m - 1.0);
        let s2 = (s1 * (m - p) - 2.0 * (p - 1.0)) / (m - 1.0);
        prop_assume!(s2 > -2.0);
        let d = radial(m, p, n, s1, s2);
        prop_assume!(d.is_critical());
        let base = ClosedFormSolution::from_fn("probe", d, None, |r: f64, t: f64| Ok((-r * r).exp() * (1.0 + t)));
        let twice = rescale(&rescale(&base, l1).unwrap(), l2).unwrap();
        let once = rescale(&base, l1 * l2).unwrap();
        let (a, b) = (twice.evaluate(r, t), once.evaluate(r, t));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300), "{a} vs {b}");
    }

    #[test]
    fn explicit_interface_is_bracket_root(m in 1.2..4.0f64, s1 in -1.5..4.0f64, tb in 0.5..3.0f64, frac in 0.05..0.95f64) {
        let sol = explicit_backward_p1(m, s1, Some(tb)).unwrap();
        let t = frac * tb;
        let (a, b) = (sol.constants["A"], sol.constants["B"]);
        let d = sol.descriptor.sigma2 - s1;
        let root = (a / (b * (tb - t))).powf(1.0 / d);
        let r0 = sol.interface_radius(t).unwrap();
        prop_assert!(rel(r0, root) < 1e-8, "{r0} vs {root}");
        prop_assert!(sol.evaluate(r0 * (1.0 - 1e-6), t) > 0.0);
        prop_assert_eq!(sol.evaluate(r0 * (1.0 + 1e-6), t), 0.0);
    }
}

fn bump(amplitude: f64, radius: f64) -> impl Fn(f64) -> f64 {
    move |r| if r < radius { amplitude * (1.0 - (r / radius).powi(2)).powi(2) } else { 0.0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn nonnegative_data_stays_nonnegative(m in 1.0..3.0f64, p in 1.0..3.0f64, s2 in 0.0..2.0f64, kappa in -2.0..1.0f64, amp in 0.0..2.0f64, radius in 0.5..4.0f64) {
        let d = radial(m, p, 3.0, 0.0, s2).with_coeff("reaction", kappa);
        let cfg = GridConfig { r_max: 6.0, nr: 61, t_end: 0.05, outer_bc: OuterBc::ZeroFlux, ..GridConfig::default() };
        let (gs, _) = integrate(&d, bump(amp, radius), &cfg).unwrap();
        for u in &gs.u {
            prop_assert!(u.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn larger_data_blows_up_sooner(amp in 6.0..12.0f64, extra in 0.05..1.0f64) {
        let d = radial(2.0, 2.2, 3.0, 0.0, 0.0);
        let cfg = GridConfig { r_max: 6.0, nr: 61, t_end: 5.0, ..GridConfig::default() };
        let time = |a: f64| {
            let (gs, report) = integrate(&d, bump(a, 3.0), &cfg).unwrap();
            match gs.status {
                RunStatus::BlowUp { t_detect } => t_detect,
                _ => { assert!(!report.detected); f64::INFINITY }
            }
        };
        let (tu, tv) = (time(amp), time(amp * (1.0 + extra)));
        prop_assert!(tv.is_finite());
        prop_assert!(tu >= tv, "T(u0) = {tu} < T(v0) = {tv}");
    }

    #[test]
    fn compact_profiles_have_zero_flux(s2 in 0.1..0.5f64) {
        let d = radial(2.0, 2.0, 3.0, 0.0, s2);
        let form = self_similar_exponents(&d, FormKind::SeparateVariable).unwrap();
        let opts = ShootOptions { param_range: (1e-6, 1e6), scan_points: 60, ..Default::default() };
        let prof = shoot(&d, &form, BehaviorClass::PosOrigin, ShootTarget::CompactSupport, &opts).unwrap();
        let xi0 = prof.xi0.unwrap();
        let fm_max = prof.samples.iter().map(|s| s.f.powf(d.m)).fold(0.0, f64::max);
        let flux = prof.meta().interface_flux.unwrap();
        prop_assert!(flux.abs() < 1e-6 * fm_max, "flux {flux} at xi0 {xi0}");
    }

    #[test]
    fn start_radius_does_not_move_profile(eps in 0.002..0.02f64) {
        let exact = explicit_profile_1d(2.0).unwrap();
        let solve = |e: f64| {
            let opts = ShootOptions { eps: e, xi_max: 10.0, ..Default::default() };
            shoot(&exact.descriptor, &exact.form, BehaviorClass::CPower1, ShootTarget::CompactSupport, &opts)
                .unwrap()
                .eval(1.0)
                .unwrap()
        };
        let (a, b) = (solve(eps), solve(eps / 2.0));
        prop_assert!(rel(a, b) < 1e-6, "f(1): {a} vs {b}");
    }
}

#[test]
fn field_trait_covers_closures() {
    let f = |x: f64, t: f64| x + t;
    assert_eq!(Field::eval(&f, 1.0, 2.0), 3.0);
}
