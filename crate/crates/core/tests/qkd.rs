use proptest::prelude::*;
use qgp_core::qkd::*;

fn eve(q: f64) -> EveMode {
    EveMode::InterceptResend { intercept_prob: q }
}

fn params(noise: f64, loss: f64, eve_mode: EveMode) -> ChannelParams {
    ChannelParams {
        noise_flip_prob: noise,
        loss_prob: loss,
        eve_mode,
    }
}

#[test]
fn full_intercept_resend_gives_quarter_error_rate() {
    let pulses = exchange_pulses(100_000, &params(0.0, 0.0, eve(1.0)), 11).unwrap();
    let (a, b) = sift(&pulses);
    let rate = sifted_error_rate(&a, &b);
    assert!((rate - 0.25).abs() <= 0.01, "rate {rate}");
}

#[test]
fn sifted_fraction_matches_binomial_expectation() {
    let n = 100_000;
    let (a, _) = sift(&exchange_pulses(n, &params(0.0, 0.0, EveMode::None), 12).unwrap());
    let frac = a.len() as f64 / n as f64;
    assert!((frac - 0.5).abs() <= 0.005, "fraction {frac}");

    for loss in [0.3, 0.9] {
        let (a, _) = sift(&exchange_pulses(n, &params(0.0, loss, EveMode::None), 13).unwrap());
        let p = (1.0 - loss) / 2.0;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        let frac = a.len() as f64 / n as f64;
        assert!((frac - p).abs() <= 3.0 * sigma, "loss {loss}: {frac} vs {p}");
    }
}

#[test]
fn sampled_qber_estimate_tracks_noise() {
    let pulses = exchange_pulses(100_000, &params(0.05, 0.0, EveMode::None), 14).unwrap();
    let (a, b) = sift(&pulses);
    let est = estimate_qber(&a, &b, 0.5, 99).unwrap();
    assert!((est.qber - 0.05).abs() <= 0.01, "qber {}", est.qber);
    assert_eq!(est.remaining_alice.len() + est.sample_size, a.len());
}

#[test]
fn low_noise_exchange_distills_a_key() {
    let key = run_exchange(50_000, &params(0.01, 0.0, EveMode::None), 0.11, 21).unwrap();
    assert!(key.key_bits.len() >= 128);
    assert!(key.qber < 0.02);
}

#[test]
fn intercept_resend_exchange_raises_alarm() {
    match run_exchange(50_000, &params(0.0, 0.0, eve(1.0)), 0.11, 22) {
        Err(ExchangeAbort::QberAlarm { qber }) => assert!((qber - 0.25).abs() < 0.02, "qber {qber}"),
        other => panic!("expected alarm, got {other:?}"),
    }
}

#[test]
fn exchange_is_deterministic() {
    let p = params(0.02, 0.1, eve(0.1));
    assert_eq!(run_exchange(20_000, &p, 0.11, 5), run_exchange(20_000, &p, 0.11, 5));
    assert_ne!(run_exchange(20_000, &p, 0.11, 5), run_exchange(20_000, &p, 0.11, 6));
}

#[test]
fn invalid_threshold_rejected() {
    let r = run_exchange(1000, &ChannelParams::default(), 0.5, 1);
    assert!(matches!(r, Err(ExchangeAbort::Invalid(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pulses_are_deterministic(seed in any::<u64>(), noise in 0.0..=1.0f64, loss in 0.0..=1.0f64, q in 0.0..=1.0f64) {
        let p = params(noise, loss, eve(q));
        prop_assert_eq!(exchange_pulses(300, &p, seed).unwrap(), exchange_pulses(300, &p, seed).unwrap());
    }

    #[test]
    fn lost_exactly_when_erased_and_eve_only_when_active(seed in any::<u64>(), loss in 0.0..=1.0f64) {
        let pulses = exchange_pulses(300, &params(0.1, loss, EveMode::None), seed).unwrap();
        prop_assert!(pulses.iter().all(|p| !p.eve_intercepted));
        if loss == 0.0 {
            prop_assert!(pulses.iter().all(|p| p.bob_bit.is_some()));
        }
    }

    #[test]
    fn sifting_structure(seed in any::<u64>(), loss in 0.0..0.9f64) {
        let pulses = exchange_pulses(500, &params(0.05, loss, eve(0.5)), seed).unwrap();
        let (a, b) = sift(&pulses);
        prop_assert_eq!(&a.source_positions, &b.source_positions);
        prop_assert_eq!(a.bits.len(), a.source_positions.len());
        for (k, &i) in a.source_positions.iter().enumerate() {
            let p = &pulses[i];
            prop_assert_eq!(p.alice_basis, p.bob_basis);
            prop_assert_eq!(p.bob_bit, Some(b.bits[k]));
            prop_assert_eq!(p.alice_bit, a.bits[k]);
        }
        let kept = pulses.iter().filter(|p| p.bob_bit.is_some() && p.alice_basis == p.bob_basis).count();
        prop_assert_eq!(kept, a.len());
    }

    #[test]
    fn amplification_length_formula(n in 200usize..20_000, qber in 0.0..0.2f64, leaked in 0usize..2000, seed in any::<[u8; 32]>()) {
        let key = vec![1u8; n];
        let expect = (n as f64 * (1.0 - 2.0 * binary_entropy(qber))).floor() as i64 - leaked as i64 - 64;
        match privacy_amplify(&key, qber, leaked, &seed) {
            Ok(m) => {
                prop_assert!(expect >= 128);
                prop_assert_eq!(m.key_bits.len() as i64, expect);
            }
            Err(AbortInsufficientKey) => prop_assert!(expect < 128),
        }
    }

    #[test]
    fn reconciliation_result_equals_alice_or_fails(seed in any::<u64>(), errors in 0usize..20) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let bits: Vec<u8> = (0..1000).map(|_| u8::from(rng.gen::<bool>())).collect();
        let alice = SiftedKey { bits: bits.clone(), source_positions: (0..1000).collect() };
        let mut bob = alice.clone();
        for _ in 0..errors {
            let i = rng.gen_range(0..1000);
            bob.bits[i] ^= 1;
        }
        if let Ok(r) = reconcile_with_passes(&alice, &bob, 0.01, MAX_RECONCILE_PASSES, seed) {
            prop_assert_eq!(r.corrected_bob, bits);
        }
    }
}
