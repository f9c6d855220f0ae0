use cropchain_ledger::{
    read_chain, write_chain, Address, Chain, ChainConfig, PredictionRecord, StoreError,
};
use proptest::prelude::*;

fn chain_with(records: &[(String, [f64; 7])]) -> Chain {
    let mut c = Chain::genesis(ChainConfig::default());
    let sender = Address::derived("node");
    for (i, (name, v)) in records.iter().enumerate() {
        let r = PredictionRecord::from_readings(name.clone(), *v).unwrap();
        c.submit_prediction(sender, &r, 1_710_969_600 + i as u64)
            .unwrap();
    }
    c
}

fn persisted(c: &Chain) -> Vec<u8> {
    let mut bytes = Vec::new();
    write_chain(c, &mut bytes).unwrap();
    bytes
}

#[test]
fn every_single_bit_flip_in_a_block_line_is_rejected() {
    let records: Vec<_> = ["rice", "maize", "coffee", "jute"]
        .iter()
        .enumerate()
        .map(|(i, n)| {
            (
                n.to_string(),
                [90.0 + i as f64, 42.0, 43.0, 20.88, 82.0, 6.5, 202.94],
            )
        })
        .collect();
    let bytes = persisted(&chain_with(&records));
    let header_end = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
    let mut flipped = bytes.clone();
    for i in header_end..bytes.len() {
        for bit in 0..8 {
            flipped[i] ^= 1 << bit;
            assert!(
                read_chain(&flipped[..]).is_err(),
                "flip of bit {bit} at byte {i} went unnoticed"
            );
            flipped[i] ^= 1 << bit;
        }
    }
    assert!(read_chain(&flipped[..]).is_ok());
}

fn records() -> impl Strategy<Value = Vec<(String, [f64; 7])>> {
    proptest::collection::vec(
        ("[a-z]{1,12}", proptest::array::uniform7(0.0f64..500.0)),
        1..12,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn persist_then_load_is_identity(recs in records()) {
        let c = chain_with(&recs);
        let back = read_chain(&persisted(&c)[..]).unwrap();
        prop_assert_eq!(back.canonical_bytes(), c.canonical_bytes());
        prop_assert_eq!(back.contract_state(), c.contract_state());
        prop_assert_eq!(back.verify_chain(), Ok(()));
    }

    #[test]
    fn honest_chains_verify(recs in records()) {
        let c = chain_with(&recs);
        prop_assert_eq!(c.verify_chain(), Ok(()));
        prop_assert_eq!(c.blocks().len(), recs.len() + 1);
        for (i, b) in c.blocks().iter().enumerate() {
            prop_assert_eq!(b.transactions.len(), usize::from(i > 0));
            prop_assert!(b.gas_used <= b.gas_limit);
            if i > 0 {
                prop_assert_eq!(b.parent_hash, c.blocks()[i - 1].hash);
            }
        }
    }

    #[test]
    fn random_flip_is_rejected(recs in records(), pick in any::<prop::sample::Index>(), bit in 0u8..8) {
        let mut bytes = persisted(&chain_with(&recs));
        let header_end = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
        let i = header_end + pick.index(bytes.len() - header_end);
        bytes[i] ^= 1 << bit;
        let rejected = matches!(read_chain(&bytes[..]), Err(StoreError::Corrupt { .. } | StoreError::Tampered(_)));
        prop_assert!(rejected);
    }

    #[test]
    fn state_mutation_is_detected(recs in records(), pick in any::<prop::sample::Index>(), field in 0usize..8, delta in 1u64..1000) {
        let mut c = chain_with(&recs);
        let i = pick.index(c.contract_state().len());
        let r = &mut c.contract_state_mut()[i];
        match field {
            0 => r.crop_name.push('x'),
            1 => r.n += delta,
            2 => r.p += delta,
            3 => r.k += delta,
            4 => r.ph += delta,
            5 => r.rain += delta,
            6 => r.temp += delta,
            _ => r.hum += delta,
        }
        let v = c.verify_chain().unwrap_err();
        prop_assert_eq!(v.block, i as u64 + 1);
    }
}
