//! Fixtures and a runner shared by the CLI test targets.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geoseg_core::coco::{serialize_dataset, serialize_results, DatasetDoc, HeightClassScheme, ImageRecord, Instance};
use geoseg_core::geometry::{rasterize, PixelMask, Polygon};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn geoseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoseg"))
        .args(args)
        .env_remove("GEOSEG_CONFIG")
        .env_remove("GEOSEG_LOG")
        .output()
        .expect("spawn geoseg")
}

pub fn path_arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn write_doc(path: &Path, doc: &DatasetDoc) {
    std::fs::write(path, serialize_dataset(doc)).unwrap();
}

pub fn write_preds(path: &Path, preds: &[Instance]) {
    std::fs::write(path, serialize_results(preds)).unwrap();
}

pub fn rect_mask(w: u32, h: u32, x0: f64, y0: f64, x1: f64, y1: f64) -> PixelMask {
    rasterize(&Polygon::rect(x0, y0, x1, y1), w, h).unwrap()
}

pub fn building(id: u64, image_id: u64, mask: PixelMask, height_m: f64) -> Instance {
    let class = HeightClassScheme::default().class_of(height_m).unwrap();
    Instance::from_mask(id, image_id, class, mask).with_height(height_m)
}

/// A 60 m tower annotated inside the footprint of its 12 m podium.
pub fn skyscraper() -> DatasetDoc {
    DatasetDoc {
        images: vec![ImageRecord::new(1, "tower.png", 32, 32)],
        annotations: vec![
            building(1, 1, rect_mask(32, 32, 2.0, 2.0, 22.0, 22.0), 12.0),
            building(2, 1, rect_mask(32, 32, 8.0, 8.0, 14.0, 14.0), 60.0),
        ],
        categories: HeightClassScheme::default().categories(),
        ..Default::default()
    }
}

/// One wide class-1 detection over two adjacent class-1 buildings.
///
/// Each building is 10x10 (100 px); the detection spans both plus the
/// 2-pixel gap (220 px). Pairwise IOU 100/220, union IOU 200/220.
pub fn under_detection() -> (DatasetDoc, Vec<Instance>) {
    let (w, h) = (32, 16);
    let doc = DatasetDoc {
        images: vec![ImageRecord::new(1, "pair.png", w, h)],
        annotations: vec![
            building(1, 1, rect_mask(w, h, 0.0, 0.0, 10.0, 10.0), 10.0),
            building(2, 1, rect_mask(w, h, 12.0, 0.0, 22.0, 10.0), 10.0),
        ],
        categories: HeightClassScheme::default().categories(),
        ..Default::default()
    };
    let pred = Instance::from_mask(101, 1, 1, rect_mask(w, h, 0.0, 0.0, 22.0, 10.0)).with_score(0.9);
    (doc, vec![pred])
}

/// Two class-1 detections splitting one 20x10 class-1 building.
///
/// Detection areas 90 and 80 give IOUs 90/200 and 80/200; their union
/// covers 170/200.
pub fn over_detection() -> (DatasetDoc, Vec<Instance>) {
    let (w, h) = (32, 16);
    let doc = DatasetDoc {
        images: vec![ImageRecord::new(1, "long.png", w, h)],
        annotations: vec![building(1, 1, rect_mask(w, h, 0.0, 0.0, 20.0, 10.0), 10.0)],
        categories: HeightClassScheme::default().categories(),
        ..Default::default()
    };
    let preds = vec![
        Instance::from_mask(101, 1, 1, rect_mask(w, h, 0.0, 0.0, 9.0, 10.0)).with_score(0.9),
        Instance::from_mask(102, 1, 1, rect_mask(w, h, 9.0, 0.0, 17.0, 10.0)).with_score(0.8),
    ];
    (doc, preds)
}

/// Synthetic multi-scene corpus with podium/tower pairs that overlap, for
/// end-to-end runs. Returns the dataset and one grey PNG per scene.
pub fn synthetic_scenes(seed: u64, scenes: u64, w: u32, h: u32) -> (DatasetDoc, Vec<(String, Vec<u8>)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scheme = HeightClassScheme::default();
    let mut doc = DatasetDoc {
        categories: scheme.categories(),
        ..Default::default()
    };
    let mut images = Vec::new();
    let mut next = 1u64;
    for s in 1..=scenes {
        let name = format!("scene_{s:02}.png");
        doc.images.push(ImageRecord::new(s, name.clone(), w, h));
        for _ in 0..rng.gen_range(60..90) {
            let (bw, bh) = (rng.gen_range(12.0..60.0), rng.gen_range(12.0..60.0));
            let x0 = rng.gen_range(0.0..w as f64 - 4.0);
            let y0 = rng.gen_range(0.0..h as f64 - 4.0);
            let poly = Polygon::rect(x0, y0, (x0 + bw).min(w as f64), (y0 + bh).min(h as f64));
            let mask = rasterize(&poly, w, h).unwrap();
            if mask.is_empty() {
                continue;
            }
            let height = rng.gen_range(3.0..30.0f64).round();
            doc.annotations.push(building(next, s, mask, height));
            next += 1;
            if rng.gen_bool(0.3) {
                let (tx, ty) = (x0 + bw * 0.25, y0 + bh * 0.25);
                let tower = Polygon::rect(tx, ty, (tx + bw * 0.4).min(w as f64), (ty + bh * 0.4).min(h as f64));
                let mask = rasterize(&tower, w, h).unwrap();
                if !mask.is_empty() {
                    let height = rng.gen_range(30.0..120.0f64).round();
                    doc.annotations.push(building(next, s, mask, height));
                    next += 1;
                }
            }
        }
        let img = image::GrayImage::from_fn(w, h, |x, y| {
            image::Luma([((x * 7 + y * 3 + s as u32 * 31) % 251) as u8])
        });
        let mut png = Vec::new();
        image::DynamicImage::ImageLuma8(img)
            .write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
            .unwrap();
        images.push((name, png));
    }
    (doc, images)
}

fn shifted(m: &PixelMask, dx: i32, dy: i32) -> PixelMask {
    let (w, h) = m.dims();
    let src = m.to_row_major();
    let mut out = vec![false; src.len()];
    for y in 0..h as i32 {
        for x in 0..w as i32 {
            let (sx, sy) = (x - dx, y - dy);
            if sx >= 0 && sy >= 0 && sx < w as i32 && sy < h as i32 {
                out[(y * w as i32 + x) as usize] = src[(sy * w as i32 + sx) as usize];
            }
        }
    }
    PixelMask::from_row_major(w, h, &out).unwrap()
}

/// Imperfect detections derived from `doc`: jittered copies of most
/// instances with occasional class errors, plus a few spurious boxes.
pub fn noisy_predictions(doc: &DatasetDoc, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_classes = doc.categories.len() as u64;
    let mut preds = Vec::new();
    let mut next = 1u64;
    for a in &doc.annotations {
        let img = doc.image(a.image_id).unwrap();
        // whole tiles occasionally get a weak detector, so some fail screening
        let recall = if a.image_id % 7 == 3 { 0.2 } else { 0.85 };
        if !rng.gen_bool(recall) {
            continue;
        }
        let m = a.mask_at(img.width, img.height).unwrap();
        let m = shifted(&m, rng.gen_range(-2..=2), rng.gen_range(-2..=2));
        if m.is_empty() {
            continue;
        }
        let class = if rng.gen_bool(0.15) {
            rng.gen_range(1..=n_classes)
        } else {
            a.category_id
        };
        let score = (rng.gen_range(0.3..1.0f64) * 100.0).round() / 100.0;
        preds.push(Instance::from_mask(next, a.image_id, class, m).with_score(score));
        next += 1;
    }
    for img in &doc.images {
        if rng.gen_bool(0.3) {
            let x0 = rng.gen_range(0.0..img.width as f64 - 8.0);
            let y0 = rng.gen_range(0.0..img.height as f64 - 8.0);
            let m = rect_mask(img.width, img.height, x0, y0, x0 + 8.0, y0 + 8.0);
            let score = (rng.gen_range(0.0..1.0f64) * 100.0).round() / 100.0;
            preds.push(Instance::from_mask(next, img.id, rng.gen_range(1..=n_classes), m).with_score(score));
            next += 1;
        }
    }
    preds
}

/// Relative paths of every file under `root`, sorted.
pub fn files_under(root: &Path) -> Vec<PathBuf> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<PathBuf>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
