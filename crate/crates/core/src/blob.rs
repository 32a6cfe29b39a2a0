//! Connected-component blob proposals on binned event frames: a
//! dependency-free stand-in detector for wiring up and testing the
//! detect → fuse → evaluate path.

use std::collections::VecDeque;

use crate::detections::DetectionSet;
use crate::frame::PolarityGrid;
use crate::geometry::BoundingBox;

pub const BLOB_CLASS: &str = "object";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobParams {
    /// Components smaller than this many pixels are discarded.
    pub min_area: usize,
    pub connectivity: Connectivity,
    /// A pixel is active when |polarity sum| reaches this count.
    pub activity_threshold: i32,
}

impl Default for BlobParams {
    fn default() -> BlobParams {
        // min_area 20 is roughly the smallest car-sized blob at 346x260
        BlobParams {
            min_area: 20,
            connectivity: Connectivity::Four,
            activity_threshold: 1,
        }
    }
}

/// Groups active pixels into connected components; each component of at
/// least `min_area` pixels becomes a box (its bounding rectangle) with
/// confidence = pixel count / rectangle area, class "object". The frame id
/// encodes the window start so downstream stages can pair frames by name.
pub fn detect_blobs(grid: &PolarityGrid, params: &BlobParams) -> DetectionSet {
    assert!(params.min_area >= 1, "min_area must be at least 1");
    assert!(
        params.activity_threshold >= 1,
        "activity_threshold must be at least 1"
    );
    let (w, h) = (grid.width as usize, grid.height as usize);
    let active = |x: usize, y: usize| {
        grid.get(x as u16, y as u16).unsigned_abs() >= params.activity_threshold as u32
    };

    let neighbors_4: &[(i64, i64)] = &[(1, 0), (-1, 0), (0, 1), (0, -1)];
    let neighbors_8: &[(i64, i64)] = &[
        (1, 0),
        (-1, 0),
        (0, 1),
        (0, -1),
        (1, 1),
        (1, -1),
        (-1, 1),
        (-1, -1),
    ];
    let neighbors = match params.connectivity {
        Connectivity::Four => neighbors_4,
        Connectivity::Eight => neighbors_8,
    };

    let mut visited = vec![false; w * h];
    let mut boxes = Vec::new();
    let mut queue = VecDeque::new();
    for start_y in 0..h {
        for start_x in 0..w {
            if visited[start_y * w + start_x] || !active(start_x, start_y) {
                continue;
            }
            let (mut min_x, mut max_x, mut min_y, mut max_y) = (start_x, start_x, start_y, start_y);
            let mut count = 0usize;
            visited[start_y * w + start_x] = true;
            queue.push_back((start_x, start_y));
            while let Some((x, y)) = queue.pop_front() {
                count += 1;
                min_x = min_x.min(x);
                max_x = max_x.max(x);
                min_y = min_y.min(y);
                max_y = max_y.max(y);
                for (dx, dy) in neighbors {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if !visited[ny * w + nx] && active(nx, ny) {
                        visited[ny * w + nx] = true;
                        queue.push_back((nx, ny));
                    }
                }
            }
            if count < params.min_area {
                continue;
            }
            let (bw, bh) = (max_x - min_x + 1, max_y - min_y + 1);
            let confidence = count as f64 / (bw * bh) as f64;
            boxes.push(
                BoundingBox::new(
                    min_x as f64,
                    min_y as f64,
                    (max_x + 1) as f64,
                    (max_y + 1) as f64,
                    confidence,
                    BLOB_CLASS,
                )
                .expect("component rectangle is a valid box"),
            );
        }
    }
    DetectionSet {
        frame_id: format!("{:012}", grid.t0),
        t_us: grid.t0,
        boxes,
        source: "blob".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_from(rows: &[&str]) -> PolarityGrid {
        let h = rows.len() as u16;
        let w = rows[0].len() as u16;
        let mut g = PolarityGrid::new(w, h, 0, 10_000);
        for (y, row) in rows.iter().enumerate() {
            for (x, c) in row.chars().enumerate() {
                let v = match c {
                    '.' => 0,
                    '+' => 1,
                    '-' => -1,
                    d => d.to_digit(10).unwrap() as i32,
                };
                g.add(x as u16, y as u16, v);
            }
        }
        g
    }

    fn pset(min_area: usize, connectivity: Connectivity) -> BlobParams {
        BlobParams {
            min_area,
            connectivity,
            activity_threshold: 1,
        }
    }

    #[test]
    fn empty_grid_yields_no_detections() {
        let g = PolarityGrid::new(16, 16, 30_000, 10_000);
        let out = detect_blobs(&g, &BlobParams::default());
        assert!(out.boxes.is_empty());
        assert_eq!(out.frame_id, "000000030000");
        assert_eq!(out.t_us, 30_000);
        assert_eq!(out.source, "blob");
    }

    #[test]
    fn solid_block_has_confidence_one() {
        let mut g = PolarityGrid::new(32, 32, 0, 10_000);
        for y in 5..15 {
            for x in 7..17 {
                g.add(x, y, 1);
            }
        }
        let out = detect_blobs(&g, &BlobParams::default());
        assert_eq!(out.boxes.len(), 1);
        let b = &out.boxes[0];
        assert_eq!((b.x0, b.y0, b.x1, b.y1), (7.0, 5.0, 17.0, 15.0));
        assert_eq!(b.confidence, 1.0);
        assert_eq!(b.class_label, BLOB_CLASS);
    }

    #[test]
    fn polarity_sign_is_ignored() {
        let g = grid_from(&["+-+", "-+-", "+-+"]);
        let out = detect_blobs(&g, &pset(1, Connectivity::Four));
        assert_eq!(out.boxes.len(), 1);
        assert_eq!(out.boxes[0].confidence, 1.0);
    }

    #[test]
    fn min_area_discards_small_components() {
        let g = grid_from(&[
            "++........",
            "++........",
            "......++++",
            "......++++",
            "......++++",
        ]);
        let out = detect_blobs(&g, &pset(5, Connectivity::Four));
        assert_eq!(out.boxes.len(), 1);
        assert_eq!(out.boxes[0].x0, 6.0);
    }

    #[test]
    fn diagonal_pixels_split_under_four_connectivity() {
        let g = grid_from(&["+.", ".+"]);
        assert_eq!(
            detect_blobs(&g, &pset(1, Connectivity::Four)).boxes.len(),
            2
        );
        assert_eq!(
            detect_blobs(&g, &pset(1, Connectivity::Eight)).boxes.len(),
            1
        );
    }

    #[test]
    fn activity_threshold_gates_weak_pixels() {
        let g = grid_from(&["12", "21"]);
        let strong = detect_blobs(
            &g,
            &BlobParams {
                min_area: 1,
                connectivity: Connectivity::Four,
                activity_threshold: 2,
            },
        );
        assert_eq!(strong.boxes.len(), 2);
    }

    #[test]
    fn donut_confidence_is_density() {
        let g = grid_from(&["+++", "+.+", "+++"]);
        let out = detect_blobs(&g, &pset(1, Connectivity::Four));
        assert_eq!(out.boxes.len(), 1);
        assert!((out.boxes[0].confidence - 8.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn matches_flood_fill_oracle_on_random_grids() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..60 {
            let w = rng.gen_range(4..=64);
            let h = rng.gen_range(4..=64);
            let mut g = PolarityGrid::new(w, h, 0, 10_000);
            for y in 0..h {
                for x in 0..w {
                    if rng.gen_bool(0.35) {
                        g.add(x, y, if rng.gen_bool(0.5) { 1 } else { -1 });
                    }
                }
            }
            for connectivity in [Connectivity::Four, Connectivity::Eight] {
                let fast = detect_blobs(&g, &pset(1, connectivity));
                let slow = oracle_components(&g, connectivity);
                let mut got: Vec<(usize, usize, usize, usize, usize)> = fast
                    .boxes
                    .iter()
                    .map(|b| {
                        let area = ((b.x1 - b.x0) * (b.y1 - b.y0)) as usize;
                        let count = (b.confidence * area as f64).round() as usize;
                        (
                            b.x0 as usize,
                            b.y0 as usize,
                            b.x1 as usize,
                            b.y1 as usize,
                            count,
                        )
                    })
                    .collect();
                got.sort_unstable();
                let mut want = slow;
                want.sort_unstable();
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn eight_connectivity_never_more_components() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..40 {
            let mut g = PolarityGrid::new(24, 24, 0, 10_000);
            for y in 0..24 {
                for x in 0..24 {
                    if rng.gen_bool(0.3) {
                        g.add(x, y, 1);
                    }
                }
            }
            let four = detect_blobs(&g, &pset(1, Connectivity::Four)).boxes.len();
            let eight = detect_blobs(&g, &pset(1, Connectivity::Eight)).boxes.len();
            assert!(eight <= four);
        }
    }

    /// Recursive flood fill, structured nothing like the BFS implementation.
    fn oracle_components(
        grid: &PolarityGrid,
        connectivity: Connectivity,
    ) -> Vec<(usize, usize, usize, usize, usize)> {
        let (w, h) = (grid.width as usize, grid.height as usize);
        let mut label = vec![0usize; w * h];
        let mut next = 0usize;
        fn fill(grid: &PolarityGrid, label: &mut [usize], x: i64, y: i64, id: usize, eight: bool) {
            let (w, h) = (grid.width as i64, grid.height as i64);
            if x < 0 || y < 0 || x >= w || y >= h {
                return;
            }
            let idx = (y * w + x) as usize;
            if label[idx] != 0 || grid.get(x as u16, y as u16) == 0 {
                return;
            }
            label[idx] = id;
            fill(grid, label, x + 1, y, id, eight);
            fill(grid, label, x - 1, y, id, eight);
            fill(grid, label, x, y + 1, id, eight);
            fill(grid, label, x, y - 1, id, eight);
            if eight {
                fill(grid, label, x + 1, y + 1, id, eight);
                fill(grid, label, x + 1, y - 1, id, eight);
                fill(grid, label, x - 1, y + 1, id, eight);
                fill(grid, label, x - 1, y - 1, id, eight);
            }
        }
        for y in 0..h {
            for x in 0..w {
                if grid.get(x as u16, y as u16) != 0 && label[y * w + x] == 0 {
                    next += 1;
                    fill(
                        grid,
                        &mut label,
                        x as i64,
                        y as i64,
                        next,
                        matches!(connectivity, Connectivity::Eight),
                    );
                }
            }
        }
        let mut out = Vec::new();
        for id in 1..=next {
            let (mut x0, mut y0, mut x1, mut y1, mut n) = (usize::MAX, usize::MAX, 0, 0, 0);
            for y in 0..h {
                for x in 0..w {
                    if label[y * w + x] == id {
                        x0 = x0.min(x);
                        y0 = y0.min(y);
                        x1 = x1.max(x + 1);
                        y1 = y1.max(y + 1);
                        n += 1;
                    }
                }
            }
            out.push((x0, y0, x1, y1, n));
        }
        out
    }
}
