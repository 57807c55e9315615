use super::{GeometryError, Result};

/// Tight axis-aligned pixel box: `x`, `y` of the top-left pixel plus extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl BoundingBox {
    pub fn as_xywh(&self) -> [f64; 4] {
        [self.x as f64, self.y as f64, self.width as f64, self.height as f64]
    }

    /// True when the two boxes share at least one pixel.
    pub fn overlaps(&self, other: &BoundingBox) -> bool {
        self.x < other.x + other.width
            && other.x < self.x + self.width
            && self.y < other.y + other.height
            && other.y < self.y + self.height
    }
}

/// Binary raster region stored as column-major run-length counts.
///
/// The runs are kept canonical: the first count is background and may be
/// zero, every later count is positive, and the counts sum to
/// `width * height`. Two masks are equal iff their pixels are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PixelMask {
    width: u32,
    height: u32,
    runs: Vec<u32>,
}

fn check_dims(width: u32, height: u32) -> Result<u64> {
    let n = width as u64 * height as u64;
    if width == 0 || height == 0 || n > u32::MAX as u64 {
        return Err(GeometryError::InvalidDimensions { width, height });
    }
    Ok(n)
}

impl PixelMask {
    pub fn empty(width: u32, height: u32) -> Result<Self> {
        let n = check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            runs: vec![n as u32],
        })
    }

    pub fn full(width: u32, height: u32) -> Result<Self> {
        let n = check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            runs: vec![0, n as u32],
        })
    }

    /// Builds a mask from COCO uncompressed counts.
    ///
    /// Zero-length runs after the first are folded into their neighbours, so
    /// any count list with the right total is accepted and canonicalized.
    pub fn from_runs(width: u32, height: u32, counts: &[u32]) -> Result<Self> {
        let n = check_dims(width, height)?;
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        if total != n {
            return Err(GeometryError::RunLengthMismatch {
                expected: n,
                actual: total,
            });
        }
        let mut runs: Vec<u32> = Vec::with_capacity(counts.len() + 1);
        // runs[i] has value i % 2; track the value of counts[j] by j % 2.
        for (j, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let value = j % 2;
            if runs.is_empty() {
                if value == 1 {
                    runs.push(0);
                }
                runs.push(c);
            } else if (runs.len() - 1) % 2 == value {
                *runs.last_mut().unwrap() += c;
            } else {
                runs.push(c);
            }
        }
        Ok(Self { width, height, runs })
    }

    /// Builds a mask from ascending, non-overlapping half-open foreground
    /// intervals of column-major pixel indices.
    pub(crate) fn from_intervals<I>(width: u32, height: u32, intervals: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, u64)>,
    {
        let n = check_dims(width, height)?;
        let mut runs = Vec::new();
        let mut cursor = 0u64;
        let mut open: Option<(u64, u64)> = None;
        let flush = |runs: &mut Vec<u32>, cursor: &mut u64, (s, e): (u64, u64)| {
            runs.push((s - *cursor) as u32);
            runs.push((e - s) as u32);
            *cursor = e;
        };
        for (s, e) in intervals {
            debug_assert!(s <= e && e <= n);
            if s == e {
                continue;
            }
            match open {
                Some((os, oe)) if s <= oe => open = Some((os, oe.max(e))),
                Some(prev) => {
                    flush(&mut runs, &mut cursor, prev);
                    open = Some((s, e));
                }
                None => open = Some((s, e)),
            }
        }
        if let Some(prev) = open {
            flush(&mut runs, &mut cursor, prev);
        }
        if cursor < n || runs.is_empty() {
            runs.push((n - cursor) as u32);
        }
        Ok(Self { width, height, runs })
    }

    /// Builds a mask from ascending column-major indices of foreground pixels.
    pub fn from_sorted_indices<I>(width: u32, height: u32, indices: I) -> Result<Self>
    where
        I: IntoIterator<Item = u64>,
    {
        Self::from_intervals(width, height, indices.into_iter().map(|i| (i, i + 1)))
    }

    /// `pixels[x * height + y]` is pixel `(x, y)`.
    pub fn from_column_major(width: u32, height: u32, pixels: &[bool]) -> Result<Self> {
        let n = check_dims(width, height)?;
        if pixels.len() as u64 != n {
            return Err(GeometryError::RunLengthMismatch {
                expected: n,
                actual: pixels.len() as u64,
            });
        }
        let mut runs = Vec::new();
        let mut current = false;
        let mut count = 0u32;
        for &p in pixels {
            if p != current {
                runs.push(count);
                count = 0;
                current = p;
            }
            count += 1;
        }
        runs.push(count);
        Ok(Self { width, height, runs })
    }

    /// `pixels[y * width + x]` is pixel `(x, y)`.
    pub fn from_row_major(width: u32, height: u32, pixels: &[bool]) -> Result<Self> {
        let n = check_dims(width, height)?;
        if pixels.len() as u64 != n {
            return Err(GeometryError::RunLengthMismatch {
                expected: n,
                actual: pixels.len() as u64,
            });
        }
        let (w, h) = (width as usize, height as usize);
        let indices = (0..w)
            .flat_map(|x| (0..h).map(move |y| (x, y)))
            .enumerate()
            .filter(|&(_, (x, y))| pixels[y * w + x])
            .map(|(i, _)| i as u64);
        Self::from_sorted_indices(width, height, indices)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Canonical uncompressed counts.
    pub fn runs(&self) -> &[u32] {
        &self.runs
    }

    pub fn into_runs(self) -> Vec<u32> {
        self.runs
    }

    /// Half-open column-major index intervals of the foreground runs.
    pub fn foreground_intervals(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        let mut cursor = 0u64;
        self.runs.iter().enumerate().filter_map(move |(i, &c)| {
            let start = cursor;
            cursor += c as u64;
            (i % 2 == 1).then_some((start, cursor))
        })
    }

    pub fn area(&self) -> u64 {
        self.runs.iter().skip(1).step_by(2).map(|&c| c as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.len() == 1
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        if x >= self.width || y >= self.height {
            return false;
        }
        let idx = x as u64 * self.height as u64 + y as u64;
        self.foreground_intervals()
            .take_while(|&(s, _)| s <= idx)
            .any(|(s, e)| s <= idx && idx < e)
    }

    pub fn to_column_major(&self) -> Vec<bool> {
        let mut out = vec![false; self.runs.iter().map(|&c| c as usize).sum()];
        for (s, e) in self.foreground_intervals() {
            out[s as usize..e as usize].fill(true);
        }
        out
    }

    pub fn to_row_major(&self) -> Vec<bool> {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut out = vec![false; w * h];
        for (s, e) in self.foreground_intervals() {
            for i in s as usize..e as usize {
                let (x, y) = (i / h, i % h);
                out[y * w + x] = true;
            }
        }
        out
    }

    /// Tight bounding box of the foreground, `None` for an empty mask.
    pub fn bbox(&self) -> Option<BoundingBox> {
        let h = self.height as u64;
        let mut x_min = u64::MAX;
        let mut x_max = 0u64;
        let mut y_min = u64::MAX;
        let mut y_max = 0u64;
        let mut any = false;
        for (s, e) in self.foreground_intervals() {
            any = true;
            let (x1, y1) = (s / h, s % h);
            let (x2, y2) = ((e - 1) / h, (e - 1) % h);
            x_min = x_min.min(x1);
            x_max = x_max.max(x2);
            if x1 == x2 {
                y_min = y_min.min(y1);
                y_max = y_max.max(y2);
            } else {
                // spans a column boundary, so both the last and first rows are hit
                y_min = 0;
                y_max = h - 1;
            }
        }
        any.then(|| BoundingBox {
            x: x_min as u32,
            y: y_min as u32,
            width: (x_max - x_min + 1) as u32,
            height: (y_max - y_min + 1) as u32,
        })
    }

    /// Cuts the window `[x0, x0 + width) x [y0, y0 + height)` out of this
    /// mask. Window pixels that fall outside the source are background.
    pub fn crop(&self, x0: u32, y0: u32, width: u32, height: u32) -> Result<Self> {
        check_dims(width, height)?;
        let h = self.height as u64;
        let (x0, y0) = (x0 as u64, y0 as u64);
        let (x_end, y_end) = (x0 + width as u64, y0 + height as u64);
        let out_h = height as u64;
        let mut intervals = Vec::new();
        for (s, e) in self.foreground_intervals() {
            let c_first = s / h;
            let c_last = (e - 1) / h;
            let lo = c_first.max(x0);
            let hi = c_last.min(x_end.saturating_sub(1));
            if x_end == 0 || lo > hi {
                continue;
            }
            for c in lo..=hi {
                let r_start = if c == c_first { s % h } else { 0 };
                let r_end = if c == c_last { (e - 1) % h + 1 } else { h };
                let r0 = r_start.max(y0);
                let r1 = r_end.min(y_end);
                if r0 < r1 {
                    let base = (c - x0) * out_h;
                    intervals.push((base + r0 - y0, base + r1 - y0));
                }
            }
        }
        Self::from_intervals(width, height, intervals)
    }

    /// COCO compressed (LEB128-like, delta coded) string form of the counts.
    pub fn to_coco_string(&self) -> String {
        let mut s = String::new();
        for (i, &cnt) in self.runs.iter().enumerate() {
            let mut x = cnt as i64;
            if i > 2 {
                x -= self.runs[i - 2] as i64;
            }
            loop {
                let mut c = (x & 0x1f) as u8;
                x >>= 5;
                let more = if c & 0x10 != 0 { x != -1 } else { x != 0 };
                if more {
                    c |= 0x20;
                }
                s.push((c + 48) as char);
                if !more {
                    break;
                }
            }
        }
        s
    }

    /// Parses COCO compressed counts.
    pub fn from_coco_string(width: u32, height: u32, s: &str) -> Result<Self> {
        let bytes = s.as_bytes();
        let mut counts: Vec<i64> = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let mut x: i64 = 0;
            let mut shift = 0;
            let mut more = true;
            while more {
                let Some(&b) = bytes.get(i) else {
                    return Err(GeometryError::InvalidRleString("truncated".into()));
                };
                if !(48..48 + 64).contains(&b) || shift > 55 {
                    return Err(GeometryError::InvalidRleString(format!(
                        "unexpected byte {b:#x} at {i}"
                    )));
                }
                let c = (b - 48) as i64;
                i += 1;
                x |= (c & 0x1f) << shift;
                more = c & 0x20 != 0;
                shift += 5;
            }
            if x & (1 << (shift - 1)) != 0 {
                x |= !0i64 << shift;
            }
            if counts.len() > 2 {
                x += counts[counts.len() - 2];
            }
            if !(0..=u32::MAX as i64).contains(&x) {
                return Err(GeometryError::InvalidRleString(format!("count {x} out of range")));
            }
            counts.push(x);
        }
        let counts: Vec<u32> = counts.into_iter().map(|c| c as u32).collect();
        Self::from_runs(width, height, &counts)
    }
}

fn same_dims(a: &PixelMask, b: &PixelMask) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(GeometryError::DimensionMismatch {
            left_width: a.width,
            left_height: a.height,
            right_width: b.width,
            right_height: b.height,
        });
    }
    Ok(())
}

/// Number of pixels foreground in both masks.
pub fn intersection_area(a: &PixelMask, b: &PixelMask) -> Result<u64> {
    same_dims(a, b)?;
    let mut ia = a.foreground_intervals().peekable();
    let mut ib = b.foreground_intervals().peekable();
    let mut total = 0u64;
    while let (Some(&(sa, ea)), Some(&(sb, eb))) = (ia.peek(), ib.peek()) {
        let lo = sa.max(sb);
        let hi = ea.min(eb);
        if lo < hi {
            total += hi - lo;
        }
        if ea <= eb {
            ia.next();
        } else {
            ib.next();
        }
    }
    Ok(total)
}

/// Intersection over union. Two empty masks have no defined IOU.
pub fn iou(a: &PixelMask, b: &PixelMask) -> Result<f64> {
    let inter = intersection_area(a, b)?;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Err(GeometryError::UndefinedIou);
    }
    Ok(inter as f64 / union as f64)
}

/// `max(I / area(a), I / area(b))`: 1.0 whenever one mask contains the other,
/// however different their sizes.
pub fn max_overlap_ratio(a: &PixelMask, b: &PixelMask) -> Result<f64> {
    let inter = intersection_area(a, b)?;
    let (area_a, area_b) = (a.area(), b.area());
    if area_a == 0 || area_b == 0 {
        return Err(GeometryError::EmptyMask);
    }
    Ok(inter as f64 / area_a.min(area_b) as f64)
}

/// Pixel-wise OR of one or more masks of identical size.
pub fn union_masks<'a, I>(masks: I) -> Result<PixelMask>
where
    I: IntoIterator<Item = &'a PixelMask>,
{
    let mut iter = masks.into_iter();
    let first = iter.next().ok_or(GeometryError::EmptyInput)?;
    let mut intervals: Vec<(u64, u64)> = first.foreground_intervals().collect();
    for m in iter {
        same_dims(first, m)?;
        intervals.extend(m.foreground_intervals());
    }
    intervals.sort_unstable();
    PixelMask::from_intervals(first.width, first.height, intervals)
}
