use std::fs;

use huewave::datagen::{
    gen_blocks, gen_stripes, load_cifar10, load_image_dir, read_dataset, read_manifest, write_dataset, write_png, BlockSpec,
    CifarRecord, StripeSpec, CIFAR_RECORD_LEN, MANIFEST_FILE,
};
use huewave::raster::Raster;
use huewave::{Error, SrgbPixel};

fn gradient(w: usize, h: usize, k: u8) -> Raster<SrgbPixel> {
    Raster::from_fn(w, h, |x, y| SrgbPixel::new((x * 7) as u8 ^ k, (y * 5) as u8, k))
}

#[test]
fn directory_ingest_skips_corrupt_files() {
    let dir = tempfile::tempdir().unwrap();
    for (i, name) in ["b.png", "a.png", "c.png"].iter().enumerate() {
        write_png(&dir.path().join(name), &gradient(12 + i, 9, i as u8)).unwrap();
    }
    fs::write(dir.path().join("broken.png"), b"definitely not a png").unwrap();
    fs::write(dir.path().join("notes.txt"), b"ignored").unwrap();

    let load = load_image_dir(dir.path()).unwrap();
    let ids: Vec<&str> = load.records.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, ["a", "b", "c"]);
    assert_eq!(load.failures.len(), 1);
    assert_eq!(load.failures[0].0, "broken");
    assert!(matches!(load.failures[0].1, Error::Decode { .. }));
    let a = &load.records[0];
    assert_eq!(a.pixels, gradient(13, 9, 1));
    assert_eq!(a.central_mask.area(), 13 * 9);

    let empty = tempfile::tempdir().unwrap();
    assert!(load_image_dir(empty.path()).is_err());
}

#[test]
fn dataset_round_trip_is_pixel_exact() {
    let dir = tempfile::tempdir().unwrap();
    let spec = StripeSpec { size: 40, border_width: 6, stripe_width: 5, seed: 11, ..StripeSpec::default() };
    let mut recs = gen_stripes(5, &spec).unwrap();
    recs.extend(gen_blocks(3, &BlockSpec { size: 40, border_width: 6, seed: 2, ..BlockSpec::default() }).unwrap());
    write_dataset(dir.path(), &recs).unwrap();
    assert_eq!(read_manifest(&dir.path().join(MANIFEST_FILE)).unwrap().len(), 8);
    assert_eq!(read_dataset(dir.path()).unwrap(), recs);
}

#[test]
fn manifests_are_deterministic() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let spec = StripeSpec { size: 32, border_width: 4, stripe_width: 4, seed: 7, ..StripeSpec::default() };
    write_dataset(d1.path(), &gen_stripes(20, &spec).unwrap()).unwrap();
    write_dataset(d2.path(), &gen_stripes(20, &spec).unwrap()).unwrap();
    let read = |d: &tempfile::TempDir| fs::read(d.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(read(&d1), read(&d2));
}

#[test]
fn cifar_batch_file_loads_and_upsamples() {
    let dir = tempfile::tempdir().unwrap();
    let recs: Vec<CifarRecord> =
        (0..4).map(|i| CifarRecord { label: i as u8 * 3, pixels: gradient(32, 32, i as u8 * 40) }).collect();
    let bytes: Vec<u8> = recs.iter().flat_map(CifarRecord::to_bytes).collect();
    assert_eq!(bytes.len(), 4 * CIFAR_RECORD_LEN);
    let path = dir.path().join("data_batch_1.bin");
    fs::write(&path, &bytes).unwrap();

    let imgs = load_cifar10(&path, 96).unwrap();
    assert_eq!(imgs.len(), 4);
    assert_eq!(imgs[2].id, "data_batch_1_00002_label6");
    assert_eq!((imgs[2].width(), imgs[2].height()), (96, 96));
    // every source pixel becomes a 3x3 block
    assert_eq!(imgs[3].pixels.get(3 * 17 + 2, 3 * 5), recs[3].pixels.get(17, 5));

    fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
    assert!(load_cifar10(&path, 96).is_err());
}
