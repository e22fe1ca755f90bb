use criterion::{black_box, criterion_group, criterion_main, Criterion};
use nmforge_core::bitlin::BitVector;
use nmforge_core::extlib::{ip_extract, samp, ExtractorKind, SeededExtractorSpec};
use nmforge_core::field2m::FieldSpec;
use nmforge_core::nmcode::CodewordScheme;
use nmforge_core::nmx::{comm_nmext, ilext, CompiledProfile};
use nmforge_core::rng::substream;
use rand::Rng;

fn bench_codeword(c: &mut Criterion) {
    let scheme = CodewordScheme::builtin("toy20").unwrap();
    let mut rng = substream(1, "bench");
    let msg = BitVector::from_u64(0b1011, scheme.k());
    c.bench_function("encode_toy20", |b| {
        b.iter(|| scheme.encode(black_box(&msg), &mut rng).unwrap())
    });
    let cw = scheme.encode(&msg, &mut rng).unwrap();
    c.bench_function("decode_toy20", |b| {
        b.iter(|| scheme.decode(black_box(&cw)).unwrap())
    });
}

fn bench_extractors(c: &mut Criterion) {
    let comp = CompiledProfile::builtin("toy20").unwrap();
    let mut rng = substream(2, "bench");
    let z = BitVector::random(comp.block_len(), &mut rng);
    c.bench_function("ilext_toy20", |b| {
        b.iter(|| ilext(&comp, black_box(&z)).unwrap())
    });
    let x = BitVector::random(10, &mut rng);
    let y = BitVector::random(10, &mut rng);
    c.bench_function("comm_nmext_toy20", |b| {
        b.iter(|| comm_nmext(&comp, black_box(&x), black_box(&y)).unwrap())
    });
    let field = FieldSpec::default_for(4);
    let xa = BitVector::random(64, &mut rng);
    let ya = BitVector::random(64, &mut rng);
    c.bench_function("ip_extract_gf16_r16", |b| {
        b.iter(|| ip_extract(black_box(&xa), black_box(&ya), &field, 16).unwrap())
    });
}

fn bench_sampler(c: &mut Criterion) {
    let spec = SeededExtractorSpec::new(ExtractorKind::StrongHash, 12, 6, 4, 8).unwrap();
    let mut rng = substream(3, "bench");
    let x = BitVector::from_u64(rng.gen_range(0..1 << 12), 12);
    c.bench_function("samp_strong_hash_d6", |b| {
        b.iter(|| samp(&spec, black_box(&x), 16).unwrap())
    });
}

criterion_group!(benches, bench_codeword, bench_extractors, bench_sampler);
criterion_main!(benches);
