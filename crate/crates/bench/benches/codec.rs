use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use typesize::{FamilySpec, GridParams, TypeSizeCodec};

fn ternary() -> FamilySpec {
    FamilySpec::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]], 8.0).unwrap()
}

fn sequence(n: usize) -> Vec<usize> {
    (0..n).map(|i| (i * 7 + i / 3) % 3).collect()
}

fn encode_decode(c: &mut Criterion) {
    let mut group = c.benchmark_group("ternary_codec");
    for n in [32u32, 128, 512] {
        let grid = GridParams::unit(2).at(n).unwrap();
        let codec = TypeSizeCodec::quantized(ternary(), &grid, 5_000_000).unwrap();
        let seq = sequence(n as usize);
        let word = codec.encode(&seq).unwrap();
        group.bench_with_input(BenchmarkId::new("encode", n), &seq, |b, seq| {
            b.iter(|| codec.encode(black_box(seq)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("decode", n), &word, |b, word| {
            b.iter(|| codec.decode(black_box(word)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, encode_decode);
criterion_main!(benches);
