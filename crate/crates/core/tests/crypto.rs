use cvnn::crypto::*;
use cvnn::decode::global_order;
use cvnn::patterns::{similarity, TargetPattern};
use cvnn::CvnnError;

fn hello() -> (SecretKey, Ciphertext, PublicParams) {
    let public = PublicParams::default();
    let key = keygen(random_seed_material(2024), public.n());
    let ct = encrypt("HELLO", &key, &public, &Schedule::default()).unwrap();
    (key, ct, public)
}

#[test]
fn hello_is_five_inputs_one_second_apart() {
    let (key, ct, public) = hello();
    assert_eq!(build_alphabet(&public).unwrap().len(), 27);
    assert_eq!(ct.len(), 5);
    for w in ct.inputs.windows(2) {
        assert!((w[1].apply_time_s - w[0].apply_time_s - 1.0).abs() < 1e-12);
    }
    let report = decrypt_detailed(&ct, &key, &public).unwrap();
    assert_eq!(report.plaintext, "HELLO");
    assert_eq!(report.letters.len(), 5);
}

#[test]
fn ciphertext_survives_json() {
    let (key, ct, public) = hello();
    let text = serde_json::to_string(&ct).unwrap();
    let back: Ciphertext = serde_json::from_str(&text).unwrap();
    assert_eq!(back, ct);
    assert_eq!(decrypt(&back, &key, &public).unwrap(), "HELLO");
}

#[test]
fn both_key_file_forms_decrypt() {
    let (key, ct, public) = hello();
    for file in [key.to_file(), key.to_expanded_file()] {
        let text = serde_json::to_string(&file).unwrap();
        let parsed: KeyFile = serde_json::from_str(&text).unwrap();
        let k = parsed.resolve(public.n()).unwrap();
        assert_eq!(decrypt(&ct, &k, &public).unwrap(), "HELLO");
    }
}

#[test]
fn late_inputs_do_not_decrypt() {
    let public = PublicParams::default();
    for s in 0..10u64 {
        let key = keygen(random_seed_material(300 + s), public.n());
        let ct = encrypt("HELLO", &key, &public, &Schedule::default()).unwrap();
        assert_ne!(decrypt(&ct.shifted(0.5), &key, &public).unwrap(), "HELLO", "seed {s}");
    }
}

#[test]
fn independent_keys_start_uncorrelated() {
    let n = 256;
    let mean: f64 = (0..200u64)
        .map(|s| {
            let a = keygen(random_seed_material(2 * s), n);
            let b = keygen(random_seed_material(2 * s + 1), n);
            similarity(&TargetPattern::from_complex(&a.initial_state).unwrap(), &b.initial()).unwrap()
        })
        .sum::<f64>()
        / 200.0;
    let rayleigh = (std::f64::consts::PI / (4.0 * n as f64)).sqrt();
    assert!((mean - rayleigh).abs() < 0.2 * rayleigh, "{mean} vs {rayleigh}");
}

#[test]
fn wrong_keys_fail_and_drift_toward_synchrony() {
    let (_, ct, public) = hello();
    let stats = random_attack_eval(&ct, "HELLO", &public, 100, 0.5, 8).unwrap();
    assert_eq!(stats.successes, 0);
    assert_eq!(stats.max_letter_similarity.len(), 100);

    let early: f64 = (0..8u64)
        .map(|s| late_global_order(&ct, &keygen(random_seed_material(900 + s), 256), &public, 0.0).unwrap())
        .sum();
    let late: f64 = (0..8u64)
        .map(|s| late_global_order(&ct, &keygen(random_seed_material(900 + s), 256), &public, 30.0).unwrap())
        .sum();
    assert!(late > early, "{late} vs {early}");
    assert!(global_order(&ct.inputs[0].values).unwrap() < 0.5);
}

#[test]
fn malformed_ciphertexts_are_rejected() {
    let (key, ct, public) = hello();
    let mut v = ct.clone();
    v.version += 1;
    assert!(matches!(decrypt(&v, &key, &public), Err(CvnnError::HeaderMismatch(_))));
    let mut h = ct.clone();
    h.key_hops = Some(vec![KeyHop {
        from_input: 2,
        key_id: "b".into(),
    }]);
    assert!(matches!(decrypt(&h, &key, &public), Err(CvnnError::Unsupported(_))));
    assert!(matches!(
        encrypt("HI!", &key, &public, &Schedule::default()),
        Err(CvnnError::UnknownCharacter('!'))
    ));
}
