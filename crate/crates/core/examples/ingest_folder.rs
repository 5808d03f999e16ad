//! Load a class-per-directory image tree and print its class index.
//!
//! cargo run --example ingest_folder -- <root>
//! Without an argument a small synthetic tree is written to a temp dir first.

use leakprobe::dataset::write_image_folder;
use leakprobe::{generate, load_image_folder, SynthConfig};

fn main() -> leakprobe::Result<()> {
    let root = match std::env::args().nth(1) {
        Some(root) => std::path::PathBuf::from(root),
        None => {
            let dir = std::env::temp_dir().join("leakprobe-ingest-example");
            let cfg = SynthConfig { n_classes: 3, n_per_class: 4, width: 16, height: 16, ..SynthConfig::default() };
            write_image_folder(&generate(&cfg)?, &dir)?;
            dir
        }
    };

    let set = load_image_folder(&root)?;
    println!("{}: {} images, {} classes", set.name, set.len(), set.n_classes());
    for (name, idx) in &set.class_index {
        let n = set.records.iter().filter(|r| &r.label == name).count();
        println!("  {idx}  {name}  ({n} images)");
    }
    set.write_manifest(std::io::stdout().lock())
}
