//! The 8-pixel probe on a 4x4 gradient, where pixel (x, y) = 10*y + x.
//!
//! cargo run --example eight_pixel_probe

use leakprobe::probes::eight_pixel_coords;
use leakprobe::{eight_pixel_probe, ImageRecord};

fn main() -> leakprobe::Result<()> {
    let pixels: Vec<u8> = (0..4u8).flat_map(|y| (0..4u8).map(move |x| 10 * y + x)).collect();
    let img = ImageRecord::new("gradient", "demo", 4, 4, 1, pixels)?;

    let probe = eight_pixel_probe(&img)?;
    for ((x, y), v) in eight_pixel_coords(4, 4).iter().zip(&probe.features) {
        println!("({x}, {y}) -> {v}");
    }
    Ok(())
}
