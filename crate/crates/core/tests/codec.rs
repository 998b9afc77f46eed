mod common;

use common::*;
use num_bigint::BigUint;
use typesize::codec::string_of_index;
use typesize::{Codeword, GridParams, TypeSizeCodec};

#[test]
fn larger_classes_get_longer_codewords() {
    let fam = ternary();
    let codec = TypeSizeCodec::quantized(fam, &GridParams::unit(2).at(6).unwrap(), 1 << 20).unwrap();
    let classes = codec.index().classes();
    let order = codec.ordering().order();
    for w in order.windows(2) {
        let (a, b) = (&classes[w[0]], &classes[w[1]]);
        assert!((&a.size, &a.key) < (&b.size, &b.key));
    }
    // Codeword length never decreases along the rank order.
    let mut last = 0;
    for k in 0u32..729 {
        let k = BigUint::from(k);
        let len = TypeSizeCodec::length_of_rank(&k);
        assert_eq!(len, string_of_index(&k).len());
        assert!(len >= last);
        last = len;
        let seq = codec.unrank(&k).unwrap();
        assert_eq!(codec.rank(&seq).unwrap(), k);
    }
}

#[test]
fn ranks_are_a_permutation() {
    let fam = bernoulli();
    let codec = TypeSizeCodec::point(fam, &bernoulli_lattice(), 10, 1 << 20).unwrap();
    let mut seen = vec![false; 1024];
    for seq in all_sequences(2, 10) {
        let r: usize = codec.rank(&seq).unwrap().try_into().unwrap();
        assert!(!seen[r]);
        seen[r] = true;
    }
    assert!(seen.iter().all(|&s| s));
    assert!(codec.unrank(&BigUint::from(1024u32)).is_err());
}

#[test]
fn first_codewords_are_shortest() {
    let fam = bernoulli();
    let codec = TypeSizeCodec::quantized(fam, &GridParams::unit(1).at(4).unwrap(), 1 << 20).unwrap();
    // Singleton classes {0000} and {1111} come first.
    assert_eq!(codec.encode(&[0, 0, 0, 0]).unwrap(), Codeword::empty());
    assert_eq!(codec.encode(&[1, 1, 1, 1]).unwrap().to_string(), "0");
}

#[test]
fn out_of_range_codeword_is_corrupt() {
    let fam = bernoulli();
    let codec = TypeSizeCodec::quantized(fam, &GridParams::unit(1).at(3).unwrap(), 1 << 20).unwrap();
    // 8 sequences use ranks 0..8; rank 8 is "001".
    let word: Codeword = "001".parse().unwrap();
    assert!(matches!(codec.decode(&word), Err(typesize::Error::Corrupt(_))));
}
