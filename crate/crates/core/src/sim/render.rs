//! Bird's-eye-view rasterizer.
//!
//! The window is centered on the ego longitudinally and on the road
//! laterally, so the road stays put and traffic scrolls past.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::Scene;

/// Side of the square raster, pixels.
pub const BEV_SIZE: u32 = 336;
const PX_PER_M: f64 = 4.0;
const DASH_ON_M: f64 = 3.0;
const DASH_PERIOD_M: f64 = 9.0;

pub const GROUND: Rgb<u8> = Rgb([100, 100, 100]);
pub const LINE: Rgb<u8> = Rgb([255, 255, 255]);
pub const EGO: Rgb<u8> = Rgb([40, 200, 40]);
pub const OTHER: Rgb<u8> = Rgb([40, 90, 230]);
pub const TRAIL: Rgb<u8> = Rgb([170, 170, 170]);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage(pub RgbImage);

impl RasterImage {
    pub fn width(&self) -> u32 {
        self.0.width()
    }

    pub fn height(&self) -> u32 {
        self.0.height()
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        self.0.get_pixel(x, y).0
    }

    pub fn to_png(&self) -> Vec<u8> {
        let mut buf = Cursor::new(Vec::new());
        self.0.write_to(&mut buf, ImageFormat::Png).expect("in-memory png encoding");
        buf.into_inner()
    }

    pub fn save_png(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_png())
    }
}

struct Camera {
    x0: f64,
    y0: f64,
}

impl Camera {
    fn col(&self, x: f64) -> f64 {
        f64::from(BEV_SIZE) / 2.0 + (x - self.x0) * PX_PER_M
    }

    fn row(&self, y: f64) -> f64 {
        f64::from(BEV_SIZE) / 2.0 + (y - self.y0) * PX_PER_M
    }
}

fn fill_rect(img: &mut RgbImage, left: f64, top: f64, right: f64, bottom: f64, color: Rgb<u8>) {
    let size = f64::from(BEV_SIZE);
    let c0 = left.round().clamp(0.0, size) as u32;
    let c1 = right.round().clamp(0.0, size) as u32;
    let r0 = top.round().clamp(0.0, size) as u32;
    let r1 = bottom.round().clamp(0.0, size) as u32;
    for r in r0..r1 {
        for c in c0..c1 {
            img.put_pixel(c, r, color);
        }
    }
}

/// Rasterize `scene` with `history` drawn as trail boxes underneath.
pub fn render_bev(scene: &Scene, history: &[Pose]) -> RasterImage {
    let cfg = &scene.config;
    let (lo, hi) = cfg.road_bounds();
    let cam = Camera { x0: scene.ego.x, y0: (lo + hi) / 2.0 };
    let mut img = RgbImage::from_pixel(BEV_SIZE, BEV_SIZE, GROUND);
    let size = f64::from(BEV_SIZE);

    for edge in [lo, hi] {
        let r = cam.row(edge);
        fill_rect(&mut img, 0.0, r - 1.0, size, r + 1.0, LINE);
    }

    // dashes are anchored to world x so they scroll with the ego
    let x_left = scene.ego.x - size / 2.0 / PX_PER_M;
    let first = (x_left / DASH_PERIOD_M).floor() as i64;
    let count = (size / PX_PER_M / DASH_PERIOD_M).ceil() as i64 + 1;
    for lane in 0..cfg.lanes.saturating_sub(1) {
        let r = cam.row(cfg.lane_center(lane) + cfg.lane_width / 2.0);
        for k in first..=first + count {
            let start = k as f64 * DASH_PERIOD_M;
            fill_rect(&mut img, cam.col(start), r - 0.5, cam.col(start + DASH_ON_M), r + 0.5, LINE);
        }
    }

    let half_l = cfg.vehicle_length / 2.0 * PX_PER_M;
    let half_w = cfg.vehicle_width / 2.0 * PX_PER_M;
    let draw = |img: &mut RgbImage, p: Pose, color| {
        let (c, r) = (cam.col(p.x), cam.row(p.y));
        fill_rect(img, c - half_l, r - half_w, c + half_l, r + half_w, color);
    };
    for &p in history {
        draw(&mut img, p, TRAIL);
    }
    for o in &scene.others {
        draw(&mut img, o.pose(), OTHER);
    }
    draw(&mut img, scene.ego.pose(), EGO);

    RasterImage(img)
}
