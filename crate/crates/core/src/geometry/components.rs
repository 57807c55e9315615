//! Connected component labeling with a two-pass union-find.

use super::{PixelMask, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    /// Edge neighbours only.
    Four,
    /// Edge and corner neighbours.
    #[default]
    Eight,
}

impl Connectivity {
    pub fn from_neighbours(n: u8) -> Option<Self> {
        match n {
            4 => Some(Self::Four),
            8 => Some(Self::Eight),
            _ => None,
        }
    }

    pub fn neighbours(self) -> u8 {
        match self {
            Self::Four => 4,
            Self::Eight => 8,
        }
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        // label 0 is reserved for background
        Self { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        // keep the smaller label as root so roots follow scan order
        if ra < rb {
            self.parent[rb as usize] = ra;
        } else if rb < ra {
            self.parent[ra as usize] = rb;
        }
    }
}

/// Splits the foreground of `mask` into maximal connected regions.
///
/// Components are ordered by their first pixel in row-major scan order
/// (smallest `y`, then smallest `x`). Their areas sum to `mask.area()`.
pub fn connected_components(mask: &PixelMask, connectivity: Connectivity) -> Result<Vec<PixelMask>> {
    if mask.is_empty() {
        return Ok(Vec::new());
    }
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let pixels = mask.to_row_major();
    let mut labels = vec![0u32; w * h];
    let mut sets = DisjointSet::new();

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !pixels[i] {
                continue;
            }
            let mut neighbours = [0u32; 4];
            let mut count = 0;
            let mut push = |label: u32| {
                if label != 0 {
                    neighbours[count] = label;
                    count += 1;
                }
            };
            if x > 0 {
                push(labels[i - 1]);
            }
            if y > 0 {
                push(labels[i - w]);
                if connectivity == Connectivity::Eight {
                    if x > 0 {
                        push(labels[i - w - 1]);
                    }
                    if x + 1 < w {
                        push(labels[i - w + 1]);
                    }
                }
            }
            labels[i] = match neighbours[..count].iter().min() {
                None => sets.make(),
                Some(&first) => {
                    for &n in &neighbours[..count] {
                        sets.union(first, n);
                    }
                    first
                }
            };
        }
    }

    // Roots are the smallest label of each set, and labels are created in
    // scan order, so ordering by root reproduces row-major first-pixel order.
    let mut slot = vec![u32::MAX; sets.parent.len()];
    let mut n_components = 0usize;
    for label in 1..sets.parent.len() as u32 {
        let root = sets.find(label);
        if slot[root as usize] == u32::MAX {
            slot[root as usize] = n_components as u32;
            n_components += 1;
        }
        slot[label as usize] = slot[root as usize];
    }

    let mut indices: Vec<Vec<u64>> = vec![Vec::new(); n_components];
    for x in 0..w {
        for y in 0..h {
            let label = labels[y * w + x];
            if label != 0 {
                indices[slot[label as usize] as usize].push((x * h + y) as u64);
            }
        }
    }
    indices
        .into_iter()
        .map(|idx| PixelMask::from_sorted_indices(mask.width(), mask.height(), idx))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(w: u32, h: u32, rows: &[&str]) -> PixelMask {
        let px: Vec<bool> = rows.iter().flat_map(|r| r.chars().map(|c| c == '#')).collect();
        PixelMask::from_row_major(w, h, &px).unwrap()
    }

    #[test]
    fn empty_mask_has_no_components() {
        let m = PixelMask::empty(5, 5).unwrap();
        assert!(connected_components(&m, Connectivity::Eight).unwrap().is_empty());
    }

    #[test]
    fn solid_square_is_one_component() {
        let m = mask(4, 4, &["....", ".##.", ".##.", "...."]);
        let cc = connected_components(&m, Connectivity::Four).unwrap();
        assert_eq!(cc, vec![m]);
    }

    #[test]
    fn diagonal_pixels_depend_on_connectivity() {
        let m = mask(3, 3, &["#..", ".#.", "..."]);
        assert_eq!(connected_components(&m, Connectivity::Four).unwrap().len(), 2);
        assert_eq!(connected_components(&m, Connectivity::Eight).unwrap().len(), 1);
    }

    #[test]
    fn ordering_follows_first_pixel_in_scan_order() {
        // the right blob starts on row 0, the left one on row 1
        let m = mask(6, 4, &["....##", "##..##", "##....", "......"]);
        let cc = connected_components(&m, Connectivity::Four).unwrap();
        assert_eq!(cc.len(), 2);
        assert!(cc[0].get(4, 0));
        assert!(cc[1].get(0, 1));
    }

    #[test]
    fn u_shape_merges_labels() {
        let m = mask(5, 3, &["#...#", "#...#", "#####"]);
        let cc = connected_components(&m, Connectivity::Four).unwrap();
        assert_eq!(cc.len(), 1);
        assert_eq!(cc[0].area(), 9);
        // anti-diagonal staircase only joins under 8-connectivity
        let m = mask(4, 4, &["...#", "..#.", ".#..", "#..."]);
        assert_eq!(connected_components(&m, Connectivity::Four).unwrap().len(), 4);
        assert_eq!(connected_components(&m, Connectivity::Eight).unwrap().len(), 1);
    }
}
