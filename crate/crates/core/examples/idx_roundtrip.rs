//! Encode a tiny digit-style IDX pair, write it and load it back.
//!
//! cargo run --example idx_roundtrip

use leakprobe::idx::{encode_images, encode_labels};
use leakprobe::load_idx_pair;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // one 4x4 image per digit, brightness = digit * 20
    let images: Vec<Vec<u8>> = (0..10u8).map(|d| vec![d * 20; 16]).collect();
    let refs: Vec<&[u8]> = images.iter().map(|v| v.as_slice()).collect();
    let labels: Vec<u8> = (0..10).collect();

    let dir = std::env::temp_dir().join("leakprobe-idx-example");
    std::fs::create_dir_all(&dir)?;
    let (img_path, lbl_path) = (dir.join("images-idx3-ubyte"), dir.join("labels-idx1-ubyte"));
    std::fs::write(&img_path, encode_images(4, 4, &refs))?;
    std::fs::write(&lbl_path, encode_labels(&labels))?;

    let set = load_idx_pair(&img_path, &lbl_path)?;
    println!("loaded {} images of {}x{}", set.len(), set.records[0].width, set.records[0].height);
    for r in &set.records {
        println!("  label {} first pixel {}", r.label, r.pixels[0]);
    }
    Ok(())
}
