//! End-to-end properties of the public pipeline: every claim `solve` makes
//! is accepted by the verifier, forced engines stay on their own route,
//! verification catches tampering, and the JSON formats round-trip.

use padic_diaglin::generators::uniform_system;
use padic_diaglin::{
    solve, verify, Certificate, CertificateKind, DiagLinSystem, EngineChoice, PadicContext, Payload, SolveInput,
    SolveOptions,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One `(k, p)` pair per engine family, with the route prefix it produces.
const FAMILIES: [(u32, u64, EngineChoice, &str); 4] = [
    (4, 2, EngineChoice::Pow2, "pow2"),
    (4, 5, EngineChoice::Pm1, "pm1"),
    (6, 3, EngineChoice::Ppm1, "ppm1"),
    (4, 7, EngineChoice::Contract, "contract"),
];

fn opts(engine: EngineChoice, fallbacks: bool) -> SolveOptions {
    SolveOptions { precision: 10, budget: 100_000, engine, fallbacks }
}

#[test]
fn every_claim_verifies_across_engine_families() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (k, p, _, name) in FAMILIES {
        let ctx = PadicContext::small(p, k);
        let (mut solved, mut other) = (0, 0);
        for n in 0..1000 {
            // Sizes from tiny to the solubility bound s = k² + 2, so that unresolved and
            // degenerate inputs are exercised alongside the guaranteed case.
            let s = rng.gen_range(2..=(k * k + 2) as usize);
            let bound = [5, 1000, 1_000_000][n % 3];
            let sys = uniform_system(s, bound, &mut rng);
            let cert = solve(&sys, &ctx, &opts(EngineChoice::Auto, true)).unwrap();
            if cert.kind == CertificateKind::Unresolved {
                other += 1;
                continue;
            }
            let rep = verify(&cert, &sys);
            assert!(rep.ok, "{name} #{n}: {:?} on {sys:?}", rep.failure);
            solved += 1;
        }
        assert!(solved > 500, "{name}: only {solved} solved ({other} unresolved)");
    }
}

#[test]
fn forced_engines_stay_on_their_route() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (k, p, engine, prefix) in FAMILIES {
        let ctx = PadicContext::small(p, k);
        for _ in 0..25 {
            let sys = uniform_system((k * k + 2) as usize, 1_000_000, &mut rng);
            let cert = solve(&sys, &ctx, &opts(engine, false)).unwrap();
            assert!(cert.is_solution(), "{prefix}: {:?}", cert.payload);
            assert!(cert.route[0].starts_with(prefix), "{prefix}: route {:?}", cert.route);
            assert!(verify(&cert, &sys).ok);
        }
    }
}

#[test]
fn verifier_rejects_tampered_certificates() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (k, p, _, name) in FAMILIES {
        let ctx = PadicContext::small(p, k);
        let sys = uniform_system((k * k + 2) as usize, 1_000_000, &mut rng);
        let cert = solve(&sys, &ctx, &opts(EngineChoice::Auto, true)).unwrap();
        assert!(verify(&cert, &sys).ok);

        // A different input system.
        let mut other = sys.clone();
        other.a[0] += 1;
        assert!(!verify(&cert, &other).ok, "{name}: accepted for another system");

        // A corrupted witness.
        let mut bad = cert.clone();
        match &mut bad.payload {
            Payload::Pair { x, .. } | Payload::Newton { x, .. } | Payload::Exact { x } => {
                for v in x.iter_mut() {
                    *v *= p;
                }
            }
            other => panic!("{name}: unexpected payload {other:?}"),
        }
        assert!(!verify(&bad, &sys).ok, "{name}: accepted a non-primitive witness");

        // A claim of a different kind.
        let mut bad = cert.clone();
        bad.kind = CertificateKind::InsolubilityDescent;
        assert!(!verify(&bad, &sys).ok, "{name}: accepted a mislabelled certificate");
    }
}

fn small_system() -> impl Strategy<Value = DiagLinSystem> {
    (2usize..12).prop_flat_map(|s| {
        (
            proptest::collection::vec(-1_000_000_000i64..1_000_000_000, s),
            proptest::collection::vec(-1_000_000_000i64..1_000_000_000, s),
        )
            .prop_map(|(a, b)| DiagLinSystem::from_i64(&a, &b))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn input_json_round_trips(sys in small_system(), which in 0usize..4) {
        let (k, p, _, _) = FAMILIES[which];
        let ctx = PadicContext::small(p, k);
        let input = SolveInput::from_system(&sys, &ctx);
        let text = serde_json::to_string(&input).unwrap();
        let back: SolveInput = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &input);
        prop_assert_eq!(back.into_parts().unwrap(), (sys, ctx));
    }

    #[test]
    fn certificate_json_round_trips(seed in any::<u64>(), which in 0usize..4) {
        let (k, p, _, _) = FAMILIES[which];
        let ctx = PadicContext::small(p, k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = uniform_system((k * k + 2) as usize, 1_000_000, &mut rng);
        let cert = solve(&sys, &ctx, &opts(EngineChoice::Auto, true)).unwrap();
        let text = serde_json::to_string(&cert).unwrap();
        let back: Certificate = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &cert);
        prop_assert!(verify(&back, &sys).ok);
    }
}
