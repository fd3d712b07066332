//! Coarse pass shared by the mesh and point rasterizers: primitives are
//! binned into square pixel tiles by a conservative screen-space bounding box.

/// Screen-space bounding box in NDC: `[xmin, xmax, ymin, ymax]`.
pub type NdcBox = [f64; 4];

/// Inclusive pixel range `(row_min, row_max, col_min, col_max)` that may
/// contain pixel centers inside `bbox`, or `None` when it misses the image.
/// One extra pixel of margin on every side absorbs rounding.
pub fn pixel_range(
    bbox: NdcBox,
    height: usize,
    width: usize,
) -> Option<(usize, usize, usize, usize)> {
    let [xmin, xmax, ymin, ymax] = bbox;
    if !(xmin.is_finite() && xmax.is_finite() && ymin.is_finite() && ymax.is_finite()) {
        return None;
    }
    let h = height as f64;
    let w = width as f64;
    // pixel i has center row coordinate i + 0.5
    let rmin = ((1.0 - ymax) * h / 2.0 - 0.5).floor() - 1.0;
    let rmax = ((1.0 - ymin) * h / 2.0 - 0.5).ceil() + 1.0;
    let cmin = ((xmin + 1.0) * w / 2.0 - 0.5).floor() - 1.0;
    let cmax = ((xmax + 1.0) * w / 2.0 - 0.5).ceil() + 1.0;
    if rmax < 0.0 || cmax < 0.0 || rmin > h - 1.0 || cmin > w - 1.0 {
        return None;
    }
    Some((
        rmin.max(0.0) as usize,
        rmax.min(h - 1.0) as usize,
        cmin.max(0.0) as usize,
        cmax.min(w - 1.0) as usize,
    ))
}

/// Per-tile primitive lists for every batch element.
#[derive(Clone, Debug)]
pub struct TileBins {
    tile: usize,
    tiles_y: usize,
    tiles_x: usize,
    bins: Vec<Vec<u32>>,
}

impl TileBins {
    /// `items` yields `(element, primitive id, bbox)` in ascending id order,
    /// which keeps every bin sorted by id.
    pub fn build(
        batch: usize,
        height: usize,
        width: usize,
        tile: usize,
        items: impl Iterator<Item = (usize, usize, NdcBox)>,
    ) -> Self {
        let tile = tile.max(1);
        let tiles_y = height.div_ceil(tile);
        let tiles_x = width.div_ceil(tile);
        let mut bins = vec![Vec::new(); batch * tiles_y * tiles_x];
        for (element, id, bbox) in items {
            let Some((r0, r1, c0, c1)) = pixel_range(bbox, height, width) else {
                continue;
            };
            for ty in r0 / tile..=r1 / tile {
                for tx in c0 / tile..=c1 / tile {
                    bins[(element * tiles_y + ty) * tiles_x + tx].push(id as u32);
                }
            }
        }
        Self {
            tile,
            tiles_y,
            tiles_x,
            bins,
        }
    }

    pub fn bin(&self, element: usize, row: usize, col: usize) -> &[u32] {
        let ty = row / self.tile;
        let tx = col / self.tile;
        &self.bins[(element * self.tiles_y + ty) * self.tiles_x + tx]
    }

    pub fn total_entries(&self) -> usize {
        self.bins.iter().map(Vec::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::pixel_center_ndc;

    #[test]
    fn range_covers_all_centers_in_box() {
        let (h, w) = (37, 53);
        let bbox = [-0.31, 0.12, -0.77, 0.05];
        let (r0, r1, c0, c1) = pixel_range(bbox, h, w).unwrap();
        for i in 0..h {
            for j in 0..w {
                let [x, y] = pixel_center_ndc(h, w, i, j);
                if x >= bbox[0] && x <= bbox[1] && y >= bbox[2] && y <= bbox[3] {
                    assert!(i >= r0 && i <= r1 && j >= c0 && j <= c1);
                }
            }
        }
    }

    #[test]
    fn offscreen_box_is_dropped() {
        assert!(pixel_range([1.5, 2.0, -0.1, 0.1], 16, 16).is_none());
        assert!(pixel_range([-0.1, 0.1, -3.0, -1.5], 16, 16).is_none());
    }
}
