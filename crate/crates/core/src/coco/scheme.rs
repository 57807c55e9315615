use super::{Category, CocoError, Result};

/// Ordered bin edges in meters. With edges `[e1, ..., ek]` the classes are
/// `[0, e1]`, `(e1, e2]`, ..., `(ek, inf)`, numbered from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightClassScheme {
    edges: Vec<f64>,
}

impl Default for HeightClassScheme {
    fn default() -> Self {
        Self {
            edges: vec![15.0, 40.0],
        }
    }
}

impl HeightClassScheme {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.is_empty() {
            return Err(CocoError::InvalidScheme("at least one edge is required".into()));
        }
        if edges.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(CocoError::InvalidScheme(format!(
                "edges must be finite and non-negative: {edges:?}"
            )));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CocoError::InvalidScheme(format!(
                "edges must be strictly increasing: {edges:?}"
            )));
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn num_classes(&self) -> usize {
        self.edges.len() + 1
    }

    /// Category id of the first bin whose upper edge is `>= height_m`.
    pub fn class_of(&self, height_m: f64) -> Result<u64> {
        if !height_m.is_finite() || height_m < 0.0 {
            return Err(CocoError::InvalidHeight(height_m));
        }
        let idx = self
            .edges
            .iter()
            .position(|&e| height_m <= e)
            .unwrap_or(self.edges.len());
        Ok(idx as u64 + 1)
    }

    /// `"0m-15m"`, `"15m-40m"`, `"40m+"` for the default edges.
    pub fn class_names(&self) -> Vec<String> {
        let mut lower = 0.0;
        let mut names = Vec::with_capacity(self.num_classes());
        for &e in &self.edges {
            names.push(format!("{lower}m-{e}m"));
            lower = e;
        }
        names.push(format!("{lower}m+"));
        names
    }

    pub fn categories(&self) -> Vec<Category> {
        self.class_names()
            .into_iter()
            .enumerate()
            .map(|(i, name)| Category::new(i as u64 + 1, name))
            .collect()
    }

    /// True when `categories` is exactly this scheme's table.
    pub fn matches_categories(&self, categories: &[Category]) -> bool {
        let expected = self.categories();
        categories.len() == expected.len()
            && categories
                .iter()
                .zip(&expected)
                .all(|(a, b)| a.id == b.id && a.name == b.name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bins() {
        let s = HeightClassScheme::default();
        assert_eq!(s.class_names(), ["0m-15m", "15m-40m", "40m+"]);
        assert_eq!(s.class_of(0.0).unwrap(), 1);
        assert_eq!(s.class_of(10.0).unwrap(), 1);
        assert_eq!(s.class_of(15.0).unwrap(), 1);
        assert_eq!(s.class_of(15.01).unwrap(), 2);
        assert_eq!(s.class_of(40.0).unwrap(), 2);
        assert_eq!(s.class_of(41.0).unwrap(), 3);
        assert!(matches!(s.class_of(-1.0), Err(CocoError::InvalidHeight(_))));
        assert!(s.class_of(f64::NAN).is_err());
    }

    #[test]
    fn edge_validation() {
        assert!(HeightClassScheme::new(vec![]).is_err());
        assert!(HeightClassScheme::new(vec![15.0, 15.0]).is_err());
        assert!(HeightClassScheme::new(vec![40.0, 15.0]).is_err());
        let s = HeightClassScheme::new(vec![12.5]).unwrap();
        assert_eq!(s.class_names(), ["0m-12.5m", "12.5m+"]);
    }
}
