use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use huewave::clustering::{kmeans, KMeansParams};
use huewave::colormetrics::{color_histogram, coherence_fraction, null_distribution, within_cluster_similarity};
use huewave::scattering::embed;
use huewave::ColorMode;
use huewave_bench::{bank, stripe_embeddings, stripe_histograms, stripes};

fn scattering(c: &mut Criterion) {
    let mut g = c.benchmark_group("scattering");
    g.sample_size(10);
    g.bench_function("filter_bank_300", |b| b.iter(|| bank(black_box(300))));
    let img = &stripes(1, 300)[0];
    let bank300 = bank(300);
    for mode in [ColorMode::Jzazbz, ColorMode::Grayscale] {
        g.bench_function(format!("embed_300_{mode}"), |b| b.iter(|| embed(black_box(img), mode, &bank300).unwrap()));
    }
    g.finish();
}

fn color_metrics(c: &mut Criterion) {
    let img = &stripes(1, 300)[0];
    c.bench_function("histogram_300", |b| b.iter(|| color_histogram(black_box(img)).unwrap()));

    let hists = stripe_histograms(1000);
    let labels: Vec<usize> = (0..hists.len()).map(|i| i % 10).collect();
    c.bench_function("within_cluster_similarity_1000", |b| b.iter(|| within_cluster_similarity(&hists, &labels).unwrap()));
    let mut g = c.benchmark_group("nulls");
    g.sample_size(10);
    g.bench_function("similarity_null_1000x10", |b| b.iter(|| null_distribution(&hists, &labels, 10, 0).unwrap()));
    g.finish();

    let points: Vec<[f64; 3]> =
        (0..1000).map(|i| { let t = i as f64; [(t * 0.37).sin(), (t * 0.91).cos(), (t * 0.13).sin()] }).collect();
    c.bench_function("coherence_fraction_1000", |b| b.iter(|| coherence_fraction(&points, &labels).unwrap()));
}

fn clustering(c: &mut Criterion) {
    let emb = stripe_embeddings(1000);
    let mut g = c.benchmark_group("kmeans");
    g.sample_size(10);
    g.bench_function("k10_1000x48", |b| {
        b.iter_batched(|| KMeansParams::default(), |p| kmeans(&emb, &p).unwrap(), BatchSize::SmallInput)
    });
    g.finish();
}

criterion_group!(benches, scattering, color_metrics, clustering);
criterion_main!(benches);
