use camoforge::device::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SETS: usize = 10_000;

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn random_cmp(rng: &mut ChaCha8Rng) -> CmpParams {
    CmpParams {
        k: rng.gen_range(1.0..500.0),
        z0: rng.gen_range(500.0..5000.0),
        z1: rng.gen_range(0.0..1000.0),
        t: rng.gen_range(0.0..20.0),
        rho0: rng.gen_range(0.01..=1.0),
    }
}

fn random_xt(rng: &mut ChaCha8Rng) -> CrosstalkParams {
    CrosstalkParams {
        c_adj: rng.gen_range(0.0..10.0),
        c_gnd_v: rng.gen_range(0.01..10.0),
        c_gnd_a: rng.gen_range(0.01..10.0),
        r_victim: rng.gen_range(0.01..100.0),
        r_aggressor: rng.gen_range(0.01..100.0),
    }
}

#[test]
fn ild_is_continuous_at_the_breakpoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..SETS {
        let mut p = random_cmp(&mut rng);
        p.t = p.rho0 * p.z1 / p.k;
        let at = ild_thickness(&p).unwrap();
        // Just before the breakpoint the step branch applies.
        let mut before = p;
        before.t = p.t * (1.0 - 1e-15);
        let left = ild_thickness(&before).unwrap();
        // Both branches reduce to z0 - z1 at the breakpoint.
        let expected = p.z0 - p.z1;
        assert!(rel(left, at) <= 1e-9, "{p:?}: {left} vs {at}");
        assert!(rel(at, expected) <= 1e-9, "{p:?}: {at} vs {expected}");
    }
}

#[test]
fn ild_step_branch_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    for _ in 0..SETS {
        let p = random_cmp(&mut rng);
        let tb = p.breakpoint();
        if tb <= 0.0 {
            continue;
        }
        let t1 = rng.gen_range(0.0..tb);
        let t2 = rng.gen_range(t1..tb);
        if t2 <= t1 {
            continue;
        }
        let z = |t: f64, rho0: f64| ild_thickness(&CmpParams { t, rho0, ..p }).unwrap();
        assert!(z(t2, p.rho0) < z(t1, p.rho0), "{p:?} t {t1} {t2}");
        // Raising the density keeps t below the (growing) breakpoint.
        if t1 > 0.0 {
            let rho_hi = (p.rho0 * 1.5).min(1.0);
            if rho_hi > p.rho0 {
                assert!(z(t1, rho_hi) > z(t1, p.rho0), "{p:?}");
            }
        }
        checked += 1;
    }
    assert!(checked > SETS / 2);
}

#[test]
fn ild_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..SETS {
        let p = random_cmp(&mut rng);
        let expected = if p.t < p.rho0 * p.z1 / p.k {
            p.z0 - p.k * p.t / p.rho0
        } else {
            p.z0 - p.z1 - p.k * p.t + p.rho0 * p.z1
        };
        assert!(rel(ild_thickness(&p).unwrap(), expected) <= 1e-12);
    }
}

#[test]
fn coupling_ratio_is_a_fraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..SETS {
        let p = random_xt(&mut rng);
        let k = crosstalk_ratio_k(&p).unwrap();
        // delta_v = ratio / (1 + k) * dv, so ratio = delta_v(1) * (1 + k).
        let ratio = crosstalk_delta_v(&p, 1.0).unwrap() * (1.0 + k);
        let expected = p.c_adj / (p.c_gnd_v + p.c_adj);
        assert!((0.0..=1.0).contains(&ratio), "{p:?}: {ratio}");
        assert!((ratio - expected).abs() <= 1e-12);
    }
}

#[test]
fn delta_v_is_linear_in_the_aggressor_swing() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..SETS {
        let p = random_xt(&mut rng);
        let a = rng.gen_range(0.0..3.0);
        let b = rng.gen_range(0.0..3.0);
        let sum = crosstalk_delta_v(&p, a + b).unwrap();
        let parts = crosstalk_delta_v(&p, a).unwrap() + crosstalk_delta_v(&p, b).unwrap();
        assert!((sum - parts).abs() <= 1e-12 * sum.abs().max(1.0));
    }
}

#[test]
fn swapping_roles_inverts_k() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..SETS {
        let p = random_xt(&mut rng);
        let k = crosstalk_ratio_k(&p).unwrap();
        let ks = crosstalk_ratio_k(&p.swapped()).unwrap();
        assert!(rel(ks, 1.0 / k) <= 1e-12, "{p:?}: {k} {ks}");
    }
}

#[test]
fn raising_thresholds_never_creates_effects() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..SETS {
        let p = random_xt(&mut rng);
        let dv = rng.gen_range(0.0..2.0);
        let lo = rng.gen_range(0.01..1.0);
        let hi = rng.gen_range(lo..2.0);
        let env = |v_th: f64| SignalEnv { v_dd: 3.0, v_th, slack: 50.0 };
        if classify_crosstalk(&p, dv, &env(lo)).unwrap() == EffectClass::NoEffect {
            assert_eq!(classify_crosstalk(&p, dv, &env(hi)).unwrap(), EffectClass::NoEffect);
        }

        let delay = rng.gen_range(1.0..500.0);
        let factor = rng.gen_range(1.0..4.0);
        let s_lo = rng.gen_range(0.0..500.0);
        let s_hi = rng.gen_range(s_lo..1000.0);
        let slack = |slack: f64| SignalEnv { slack, ..SignalEnv::default() };
        if classify_timing(delay, factor, &slack(s_lo)).unwrap() == EffectClass::NoEffect {
            assert_eq!(classify_timing(delay, factor, &slack(s_hi)).unwrap(), EffectClass::NoEffect);
        }

        let c = random_cmp(&mut rng);
        let h_lo = rng.gen_range(1.0..3000.0);
        let h_hi = rng.gen_range(h_lo..6000.0);
        if let Ok(EffectClass::NoEffect) = classify_via(&c, h_lo) {
            assert_eq!(classify_via(&c, h_hi).unwrap(), EffectClass::NoEffect);
        }
    }
}

#[test]
fn worked_examples() {
    let cmp = CmpParams { k: 100.0, z0: 1000.0, z1: 500.0, t: 2.0, rho0: 0.5 };
    assert!(rel(cmp.breakpoint(), 2.5) <= 1e-12);
    assert!(rel(ild_thickness(&cmp).unwrap(), 600.0) <= 1e-12);
    assert_eq!(classify_via(&cmp, 550.0).unwrap(), EffectClass::StuckAt0);
    assert_eq!(classify_via(&cmp, 600.0).unwrap(), EffectClass::NoEffect);

    let xt = CrosstalkParams { c_adj: 1e-15, c_gnd_v: 3e-15, c_gnd_a: 3e-15, r_victim: 100.0, r_aggressor: 100.0 };
    assert!(rel(crosstalk_ratio_k(&xt).unwrap(), 1.0) <= 1e-12);
    assert!(rel(crosstalk_delta_v(&xt, 1.0).unwrap(), 0.125) <= 1e-12);
    let env = SignalEnv { v_dd: 1.0, v_th: 0.2, slack: 50.0 };
    assert_eq!(classify_crosstalk(&xt, 1.0, &env).unwrap(), EffectClass::NoEffect);

    let env = SignalEnv::default();
    assert_eq!(classify_timing(100.0, 2.0, &env).unwrap(), EffectClass::TimingFault);
    assert_eq!(classify_timing(100.0, 1.5, &env).unwrap(), EffectClass::NoEffect);
    assert!(rel(line_delay_factor(100.0, 50.0).unwrap(), 2.0) <= 1e-12);
}

#[test]
fn invalid_parameters_are_domain_errors() {
    let good = CmpParams { k: 100.0, z0: 1000.0, z1: 500.0, t: 2.0, rho0: 0.5 };
    for bad in [
        CmpParams { k: 0.0, ..good },
        CmpParams { rho0: 0.0, ..good },
        CmpParams { rho0: 1.5, ..good },
        CmpParams { t: -1.0, ..good },
    ] {
        assert!(ild_thickness(&bad).is_err(), "{bad:?}");
    }
    let xt = CrosstalkParams { c_adj: 1.0, c_gnd_v: 1.0, c_gnd_a: 1.0, r_victim: 0.0, r_aggressor: 1.0 };
    assert!(crosstalk_ratio_k(&xt).is_err());
    assert!(line_delay_factor(100.0, 0.0).is_err());
    assert!(line_delay_factor(100.0, 150.0).is_err());
    assert!(classify_timing(0.0, 2.0, &SignalEnv::default()).is_err());
}
