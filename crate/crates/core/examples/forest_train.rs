//! Fit a forest on a small hand-built matrix, predict, and round-trip the
//! model through JSON.
//!
//! cargo run --example forest_train

use leakprobe::rng::Stream;
use leakprobe::{accuracy, fit, FeatureMatrix, ForestConfig, RandomForestModel};

fn main() -> leakprobe::Result<()> {
    // class is 1 when x + y > 1, with a noise column
    let mut rng = Stream::new(7);
    let (mut values, mut labels) = (Vec::new(), Vec::new());
    for _ in 0..400 {
        let (x, y, noise) = (rng.unit(), rng.unit(), rng.unit());
        values.extend([x, y, noise]);
        labels.push(usize::from(x + y > 1.0));
    }
    let matrix = FeatureMatrix::new(3, values, labels, 2)?;
    let (train, test) = (matrix.select(&(0..300).collect::<Vec<_>>()), matrix.select(&(300..400).collect::<Vec<_>>()));

    let config = ForestConfig { n_trees: 50, seed: 1, ..ForestConfig::default() };
    let model = fit(&train, &config)?;
    println!("test accuracy {:.1}%", accuracy(&model, &test)?);
    println!("predict [0.9, 0.9, 0.5] -> class {}", model.predict(&[0.9, 0.9, 0.5])?);

    let json = model.to_json()?;
    let back = RandomForestModel::from_json(&json)?;
    println!("model {} bytes, fingerprint {}", json.len(), &model.fingerprint()[..16]);
    assert_eq!(back.fingerprint(), model.fingerprint());
    Ok(())
}
