use super::{GeometryError, PixelMask, Result};

/// One or more closed rings of `(x, y)` pixel coordinates. The first ring is
/// the exterior; later rings are holes or extra parts, resolved by even-odd
/// fill.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub rings: Vec<Vec<(f64, f64)>>,
}

impl Polygon {
    pub fn new(rings: Vec<Vec<(f64, f64)>>) -> Self {
        Self { rings }
    }

    /// Axis-aligned rectangle with corners `(x0, y0)` and `(x1, y1)`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)]])
    }

    /// COCO flat coordinate lists `[x1, y1, x2, y2, ...]`, one per ring.
    pub fn from_flat(rings: &[Vec<f64>]) -> Self {
        Self::new(
            rings
                .iter()
                .map(|r| r.chunks_exact(2).map(|p| (p[0], p[1])).collect())
                .collect(),
        )
    }

    pub fn to_flat(&self) -> Vec<Vec<f64>> {
        self.rings
            .iter()
            .map(|r| r.iter().flat_map(|&(x, y)| [x, y]).collect())
            .collect()
    }

    fn usable_rings(&self) -> Result<Vec<&[(f64, f64)]>> {
        let rings: Vec<&[(f64, f64)]> = self
            .rings
            .iter()
            .filter(|r| r.len() >= 3)
            .map(|r| r.as_slice())
            .collect();
        if rings.is_empty() {
            return Err(GeometryError::DegenerateGeometry(
                "no ring has at least 3 vertices".into(),
            ));
        }
        if rings
            .iter()
            .flat_map(|r| r.iter())
            .any(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(GeometryError::DegenerateGeometry("non-finite vertex coordinate".into()));
        }
        Ok(rings)
    }
}

/// Rasterizes `poly` onto a `width` x `height` grid.
///
/// Pixel `(x, y)` is set iff its center `(x + 0.5, y + 0.5)` is inside the
/// polygon under the even-odd rule. Only pixels of the grid are considered, so
/// geometry outside the image is clipped away.
pub fn rasterize(poly: &Polygon, width: u32, height: u32) -> Result<PixelMask> {
    let rings = poly.usable_rings()?;
    let empty = PixelMask::empty(width, height)?;

    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in rings.iter().flat_map(|r| r.iter()) {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    let clamp = |v: f64, hi: u32| v.max(0.0).min(hi as f64) as u32;
    let (x_lo, x_hi) = (clamp(min_x.floor(), width), clamp(max_x.ceil(), width));
    let (y_lo, y_hi) = (clamp(min_y.floor(), height), clamp(max_y.ceil(), height));
    if x_lo >= x_hi || y_lo >= y_hi {
        return Ok(empty);
    }

    let edges: Vec<((f64, f64), (f64, f64))> = rings
        .iter()
        .flat_map(|r| (0..r.len()).map(move |i| (r[i], r[(i + 1) % r.len()])))
        .filter(|(a, b)| a.1 != b.1)
        .collect();

    // Local bitmap over the clipped bounding box, column-major.
    let (bw, bh) = ((x_hi - x_lo) as usize, (y_hi - y_lo) as usize);
    let mut local = vec![false; bw * bh];
    let mut crossings: Vec<f64> = Vec::new();
    for row in 0..bh {
        let cy = (y_lo as usize + row) as f64 + 0.5;
        crossings.clear();
        for &((x0, y0), (x1, y1)) in &edges {
            if (y0 > cy) != (y1 > cy) {
                crossings.push((x1 - x0) * (cy - y0) / (y1 - y0) + x0);
            }
        }
        crossings.sort_by(f64::total_cmp);
        for span in crossings.chunks_exact(2) {
            // pixel centers c with span[0] <= c < span[1]
            let start = first_center_at_or_after(span[0], x_lo, bw);
            let end = first_center_at_or_after(span[1], x_lo, bw);
            for col in start..end {
                local[col * bh + row] = true;
            }
        }
    }

    let h = height as u64;
    let intervals = (0..bw).flat_map(|col| {
        let base = (x_lo as u64 + col as u64) * h + y_lo as u64;
        let column = &local[col * bh..(col + 1) * bh];
        runs_of(column).map(move |(s, e)| (base + s as u64, base + e as u64))
    });
    PixelMask::from_intervals(width, height, intervals.collect::<Vec<_>>())
}

fn first_center_at_or_after(t: f64, x_lo: u32, len: usize) -> usize {
    let center = |col: usize| (x_lo as usize + col) as f64 + 0.5;
    let guess = (t - 0.5 - x_lo as f64).ceil();
    let mut col = guess.max(0.0).min(len as f64) as usize;
    while col > 0 && center(col - 1) >= t {
        col -= 1;
    }
    while col < len && center(col) < t {
        col += 1;
    }
    col
}

fn runs_of(column: &[bool]) -> impl Iterator<Item = (usize, usize)> + '_ {
    let mut i = 0;
    std::iter::from_fn(move || {
        while i < column.len() && !column[i] {
            i += 1;
        }
        if i >= column.len() {
            return None;
        }
        let start = i;
        while i < column.len() && column[i] {
            i += 1;
        }
        Some((start, i))
    })
}
