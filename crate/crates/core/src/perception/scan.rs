//! Depth-like range scans ray-marched through the occupancy grid.

use crate::world::{OccupancyGrid, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub ray_count: usize,
    /// Field of view, radians, centered on the heading.
    pub fov: f64,
    pub max_range: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            ray_count: 64,
            fov: std::f64::consts::FRAC_PI_2,
            max_range: 5.0,
        }
    }
}

/// Distances along rays ordered from the left edge of the field of view to the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeScan {
    pub ranges: Vec<f64>,
    pub max_range: f64,
    pub fov: f64,
}

impl RangeScan {
    /// Angle of ray `i` relative to the heading (positive = left).
    pub fn ray_offset(&self, i: usize) -> f64 {
        let n = self.ranges.len();
        if n < 2 {
            return 0.0;
        }
        self.fov / 2.0 - self.fov * i as f64 / (n - 1) as f64
    }

    /// Top-down grayscale rendering centered on the sensor, facing up: free
    /// space along each ray is drawn light, hit points dark, the rest mid-gray.
    pub fn rasterize(&self, size: usize) -> Vec<u8> {
        let mut img = vec![128u8; size * size];
        let scale = (size as f64 / 2.0 - 1.0) / self.max_range;
        let c = size as f64 / 2.0;
        for (i, &r) in self.ranges.iter().enumerate() {
            let a = std::f64::consts::FRAC_PI_2 + self.ray_offset(i);
            let steps = (r * scale).ceil() as usize;
            for s in 0..=steps {
                let d = (s as f64).min(r * scale);
                let (x, y) = (c + d * a.cos(), c - d * a.sin());
                if x >= 0.0 && y >= 0.0 && (x as usize) < size && (y as usize) < size {
                    let hit = s == steps && r < self.max_range;
                    img[y as usize * size + x as usize] = if hit { 0 } else { 230 };
                }
            }
        }
        img
    }

    /// PNG-encoded [`RangeScan::rasterize`] output.
    pub fn to_png(&self, size: usize) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, size as u32, size as u32);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().expect("png header to memory");
            w.write_image_data(&self.rasterize(size)).expect("png data to memory");
        }
        out
    }
}

/// Casts `cfg.ray_count` rays from `base`. A ray stops at the entry point of
/// the first blocked cell; rays that leave the grid or exceed the range read
/// `max_range`.
pub fn range_scan(grid: &OccupancyGrid, base: Vec2, heading: f64, cfg: &ScanConfig) -> RangeScan {
    let mut scan = RangeScan {
        ranges: vec![cfg.max_range; cfg.ray_count],
        max_range: cfg.max_range,
        fov: cfg.fov,
    };
    for i in 0..cfg.ray_count {
        let dir = Vec2::from_angle(heading + scan.ray_offset(i));
        let hit = grid.traverse(base, dir, cfg.max_range, |cell, _| grid.is_free(cell));
        if let Some(t) = hit {
            scan.ranges[i] = t.clamp(1e-3, cfg.max_range);
        }
    }
    scan
}
