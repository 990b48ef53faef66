//! Imports an SVG sketch, normalizes it, splits it into the five cumulative
//! stroke groups and shows the ten crops of the last group as ASCII art.
//!
//! cargo run --release --example sketch_raster

use dualsketch::sketch::{normalize_sketch, parse_sketch, rasterize, split_stroke_groups, ten_crop_sequence, Bitmap, Canvas, SketchFormat};

const HOUSE: &str = r#"<svg xmlns="http://www.w3.org/2000/svg" width="200" height="200">
  <path d="M40 180 L40 90 L160 90 L160 180 Z"/>
  <path d="M30 95 L100 30 L170 95"/>
  <polyline points="85,180 85,130 115,130 115,180"/>
  <path d="M55 110 h20 v20 h-20 z"/>
  <path d="M125 110 h20 v20 h-20 z"/>
  <path d="M130 60 C130 40 140 30 150 30"/>
</svg>"#;

fn ascii(b: &Bitmap, step: usize) -> String {
    let mut s = String::new();
    for y in (0..b.height).step_by(step) {
        for x in (0..b.width).step_by(step) {
            s.push(if b.get(x, y) > 0.0 { '#' } else { '.' });
        }
        s.push('\n');
    }
    s
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sketch = parse_sketch(HOUSE.as_bytes(), SketchFormat::Svg)?;
    let sketch = normalize_sketch(&sketch, Canvas::square(256));
    println!("{} strokes, bounding box {:?}", sketch.stroke_count(), sketch.bounding_box());

    let groups = split_stroke_groups(&sketch)?;
    for (j, g) in groups.iter().enumerate() {
        println!("group {}: first {} strokes", j + 1, g.stroke_count());
    }

    let bitmap = rasterize(groups.last().unwrap(), 72, 2.25);
    println!("\nfull sketch at 72 px:\n{}", ascii(&bitmap, 2));

    let crops = ten_crop_sequence(&bitmap, 64)?;
    let names = ["top-left", "bottom-left", "top-right", "bottom-right", "center"];
    for (i, c) in crops.iter().enumerate() {
        let flipped = if i % 2 == 1 { " (mirrored)" } else { "" };
        println!("crop {i}: {}{flipped}, {} ink pixels", names[i / 2], c.foreground_count());
    }
    println!("\ncenter crop:\n{}", ascii(&crops[8], 2));
    Ok(())
}
