use daxiot_core::crypto::{
    aead_decrypt, aead_encrypt, ecdh_1pu_receiver, ecdh_1pu_sender, ecdh_es,
    generate_signing_keypair, kdf, kdf_info, sign, to_agreement_keypair, verify, AeadEnvelope,
    Nonce, SharedSecret, CONTEXT_1PU, CONTEXT_ES,
};
use proptest::prelude::*;

fn pair(seed: [u8; 32]) -> daxiot_core::crypto::AgreementKeyPair {
    to_agreement_keypair(&generate_signing_keypair(Some(&seed)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn es_and_1pu_agree_between_party_forms(eph in any::<[u8; 32]>(), snd in any::<[u8; 32]>(), rcv in any::<[u8; 32]>()) {
        let (e, s, r) = (pair(eph), pair(snd), pair(rcv));
        let es_ctx = kdf_info(CONTEXT_ES, "did:key:zEph", "did:web:b.com");
        prop_assert_eq!(
            ecdh_es(&e, &r.public(), &es_ctx).unwrap(),
            ecdh_es(&r, &e.public(), &es_ctx).unwrap()
        );
        let pu_ctx = kdf_info(CONTEXT_1PU, "did:key:zStatic", "did:web:b.com");
        prop_assert_eq!(
            ecdh_1pu_sender(&s, &e, &r.public(), &pu_ctx).unwrap(),
            ecdh_1pu_receiver(&r, &e.public(), &s.public(), &pu_ctx).unwrap()
        );
    }

    #[test]
    fn converted_pairs_agree_pairwise(a in any::<[u8; 32]>(), b in any::<[u8; 32]>()) {
        let (x, y) = (pair(a), pair(b));
        let k1 = ecdh_es(&x, &y.public(), b"ctx").unwrap();
        let k2 = ecdh_es(&y, &x.public(), b"ctx").unwrap();
        prop_assert_eq!(k1, k2);
    }

    #[test]
    fn kdf_output_is_not_a_slice_of_its_input(secret in prop::collection::vec(any::<u8>(), 64), wide: bool, ctx in prop::collection::vec(any::<u8>(), 1..40)) {
        let input = if wide { &secret[..] } else { &secret[..32] };
        let out = kdf(&SharedSecret::new(input).unwrap(), &ctx).unwrap();
        prop_assert!(input.windows(32).all(|w| w != out));
    }

    #[test]
    fn aead_roundtrip(key in any::<[u8; 32]>(), pt in prop::collection::vec(any::<u8>(), 0..512), ad in prop::collection::vec(any::<u8>(), 0..64)) {
        let (a, b) = (pair(key), pair([7; 32]));
        let k = ecdh_es(&a, &b.public(), b"ctx").unwrap();
        let env = aead_encrypt(&k, Nonce::random(), &pt, &ad);
        let parsed = AeadEnvelope::from_bytes(&env.to_bytes()).unwrap();
        prop_assert_eq!(aead_decrypt(&k, &parsed, &ad).unwrap(), pt);
    }

    #[test]
    fn signatures_are_deterministic(seed in any::<[u8; 32]>(), msg in prop::collection::vec(any::<u8>(), 0..256)) {
        let kp = generate_signing_keypair(Some(&seed)).unwrap();
        let (s1, s2) = (sign(&kp, &msg), sign(&kp, &msg));
        prop_assert_eq!(s1, s2);
        prop_assert!(verify(&kp.public(), &msg, &s1).is_ok());
    }
}
