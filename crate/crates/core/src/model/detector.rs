use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle on the detector plane, in grid coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub class_id: usize,
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl Region {
    pub fn contains(&self, r: usize, c: usize) -> bool {
        r >= self.row && r < self.row + self.height && c >= self.col && c < self.col + self.width
    }

    pub fn area(&self) -> usize {
        self.height * self.width
    }

    fn overlaps(&self, other: &Region) -> bool {
        self.row < other.row + other.height
            && other.row < self.row + self.height
            && self.col < other.col + other.width
            && other.col < self.col + self.width
    }
}

/// One labeled detection region per class on an `n × n` output plane.
/// Class ids are exactly `0..regions.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorLayout {
    n: usize,
    size_ratio: f64,
    regions: Vec<Region>,
}

impl DetectorLayout {
    pub fn new(n: usize, size_ratio: f64, mut regions: Vec<Region>) -> Result<Self> {
        regions.sort_by_key(|r| r.class_id);
        let layout = Self {
            n,
            size_ratio,
            regions,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Square regions in centered rows of at most four. Ten classes give
    /// rows of 3/4/3; the row and column pitch is `n/5` and the region side
    /// is `round(size_ratio · n/5)`.
    pub fn standard(n: usize, classes: usize, size_ratio: f64) -> Result<Self> {
        if classes == 0 {
            return Err(Error::config("classes", "need at least one class"));
        }
        if !(size_ratio > 0.0 && size_ratio <= 1.0) {
            return Err(Error::config("size_ratio", "must lie in (0, 1]"));
        }
        let spacing = n as f64 / 5.0;
        let side = ((size_ratio * spacing).round() as usize).max(1);
        let counts = row_counts(classes);
        let rows = counts.len();
        let half = n as f64 / 2.0;
        let mut regions = Vec::with_capacity(classes);
        for (r, &cnt) in counts.iter().enumerate() {
            let cy = half + (r as f64 - (rows as f64 - 1.0) / 2.0) * spacing;
            for j in 0..cnt {
                let cx = half + (j as f64 - (cnt as f64 - 1.0) / 2.0) * spacing;
                let row = corner(cy, side, n)?;
                let col = corner(cx, side, n)?;
                regions.push(Region {
                    class_id: regions.len(),
                    row,
                    col,
                    height: side,
                    width: side,
                });
            }
        }
        Self::new(n, size_ratio, regions)
    }

    pub fn validate(&self) -> Result<()> {
        if self.regions.is_empty() {
            return Err(Error::config("detector.regions", "no regions"));
        }
        for (i, r) in self.regions.iter().enumerate() {
            if r.class_id != i {
                return Err(Error::config(
                    "detector.regions",
                    format!("class ids must be 0..{} without repeats", self.regions.len()),
                ));
            }
            if r.area() == 0 {
                return Err(Error::config(
                    "detector.regions",
                    format!("region for class {i} is empty"),
                ));
            }
            if r.row + r.height > self.n || r.col + r.width > self.n {
                return Err(Error::config(
                    "detector.regions",
                    format!("region for class {i} extends past the {0}×{0} grid", self.n),
                ));
            }
            for other in &self.regions[..i] {
                if r.overlaps(other) {
                    return Err(Error::config(
                        "detector.regions",
                        format!("regions {} and {i} overlap", other.class_id),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size_ratio(&self) -> f64 {
        self.size_ratio
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn classes(&self) -> usize {
        self.regions.len()
    }

    /// Per-pixel class id, or `None` outside every region.
    pub fn label_map(&self) -> Vec<Option<usize>> {
        let mut map = vec![None; self.n * self.n];
        for reg in &self.regions {
            for r in reg.row..reg.row + reg.height {
                for c in reg.col..reg.col + reg.width {
                    map[r * self.n + c] = Some(reg.class_id);
                }
            }
        }
        map
    }
}

fn row_counts(classes: usize) -> Vec<usize> {
    let rows = classes.div_ceil(4);
    let base = classes / rows;
    let extra = classes % rows;
    // extras go to the rows nearest the middle
    let mid = (rows as f64 - 1.0) / 2.0;
    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&a, &b| {
        let da = (a as f64 - mid).abs();
        let db = (b as f64 - mid).abs();
        da.total_cmp(&db).then(a.cmp(&b))
    });
    let mut counts = vec![base; rows];
    for &r in order.iter().take(extra) {
        counts[r] += 1;
    }
    counts
}

fn corner(center: f64, side: usize, n: usize) -> Result<usize> {
    let start = (center - side as f64 / 2.0).round();
    if start < 0.0 || start as usize + side > n {
        return Err(Error::config(
            "size_ratio",
            format!("regions of side {side} do not fit a {n}×{n} grid"),
        ));
    }
    Ok(start as usize)
}
