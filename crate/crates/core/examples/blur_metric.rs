//! Laplacian-variance sharpness before and after box blurring, plus the
//! mask-aware variant that ignores blacked-out pixels.
//!
//! cargo run --example blur_metric

use leakprobe::synthgen::box_blur;
use leakprobe::{blur_metric, masked_blur_metric, ImageRecord};

fn main() -> leakprobe::Result<()> {
    let (w, h) = (32, 32);
    let checker: Vec<u8> = (0..w * h).map(|i| if (i % w + i / w) % 2 == 0 { 200 } else { 40 }).collect();
    let img = ImageRecord::new("checker", "demo", w, h, 1, checker)?;

    for radius in 0..4 {
        let blurred = box_blur(&img, radius);
        println!("radius {radius}: blur score {:.1}", blur_metric(&blurred)?);
    }

    // black out the left half; the full-frame score sees the mask edge
    let mut masked = img.clone();
    for y in 0..h {
        for x in 0..w / 2 {
            masked.pixels[y * w + x] = 0;
        }
    }
    println!("masked: full frame {:.1}, unmasked pixels only {:.1}", blur_metric(&masked)?, masked_blur_metric(&masked)?);
    Ok(())
}
