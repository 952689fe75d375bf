//! Parsing checks against the official MNIST files, when available.
//! Without the files under `data/mnist/` (or `$SPARSENET_MNIST_DIR`)
//! these tests print a skip notice and pass vacuously.

use std::path::{Path, PathBuf};

use sparsenet::data::{load_mnist, Split};

fn mnist_dir() -> Option<PathBuf> {
    let candidates = [
        std::env::var("SPARSENET_MNIST_DIR").ok().map(PathBuf::from),
        Some(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")),
    ];
    candidates
        .into_iter()
        .flatten()
        .find(|dir| dir.join("t10k-images-idx3-ubyte").exists())
}

#[test]
fn official_test_set_parses() {
    let Some(dir) = mnist_dir() else {
        println!("skipping: official MNIST files not found");
        return;
    };
    let ds = load_mnist(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
        Split::Test,
    )
    .unwrap();
    assert_eq!(ds.len(), 10_000);
    assert_eq!(ds.feature_dim(), 784);
    assert_eq!(ds.classes(), 10);
    assert!(ds
        .features()
        .data()
        .iter()
        .all(|&v| (0.0..=1.0).contains(&v)));
    // All ten digits appear.
    let mut seen = [false; 10];
    for &y in ds.labels() {
        seen[y] = true;
    }
    assert!(seen.iter().all(|&s| s));
}

#[test]
fn official_train_set_parses() {
    let Some(dir) = mnist_dir() else {
        println!("skipping: official MNIST files not found");
        return;
    };
    let ds = load_mnist(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
        Split::Train,
    )
    .unwrap();
    assert_eq!(ds.len(), 60_000);
    assert_eq!(ds.feature_dim(), 784);
}
