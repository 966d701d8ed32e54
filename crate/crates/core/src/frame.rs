//! Grayscale frames and oriented patch sampling.

use crate::error::{Error, Result};
use crate::geometry::{PatchDims, TargetState};

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::config(format!(
                "frame must be non-empty, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::config(format!(
                "frame {width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::config(format!(
                "pixel intensity {bad} outside [0, 1]"
            )));
        }
        Ok(Frame {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!((0.0..=1.0).contains(&value));
        Frame {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    /// 8-bit samples mapped to `v / 255`.
    pub fn from_u8(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        Frame::new(
            width,
            height,
            data.iter().map(|&v| f64::from(v) / 255.0).collect(),
        )
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    /// Panics if `value` is outside `[0, 1]`.
    pub fn set(&mut self, col: usize, row: usize, value: f64) {
        assert!((0.0..=1.0).contains(&value), "intensity {value} outside [0, 1]");
        self.pixels[row * self.width + col] = value;
    }

    /// Bilinear interpolation at frame coordinates `(x, y)`, or `None` when the
    /// point is outside the image area `[0, width] x [0, height]`.
    pub fn interpolate(&self, x: f64, y: f64) -> Option<f64> {
        if !(0.0..=self.width as f64).contains(&x) || !(0.0..=self.height as f64).contains(&y) {
            return None;
        }
        // Shift to pixel-center coordinates.
        let fx = x - 0.5;
        let fy = y - 0.5;
        let x0 = fx.floor();
        let y0 = fy.floor();
        let tx = fx - x0;
        let ty = fy - y0;
        let max_c = self.width as i64 - 1;
        let max_r = self.height as i64 - 1;
        let c0 = (x0 as i64).clamp(0, max_c) as usize;
        let c1 = (x0 as i64 + 1).clamp(0, max_c) as usize;
        let r0 = (y0 as i64).clamp(0, max_r) as usize;
        let r1 = (y0 as i64 + 1).clamp(0, max_r) as usize;
        let top = lerp(self.get(c0, r0), self.get(c1, r0), tx);
        let bottom = lerp(self.get(c0, r1), self.get(c1, r1), tx);
        Some(lerp(top, bottom, ty))
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + (b - a) * t
    }
}

/// Local offsets of patch sample `(u, v)` from the target center, along and
/// across the forward axis.
fn grid_offset(u: u32, v: u32, dims: PatchDims) -> (f64, f64) {
    (
        f64::from(u) + 0.5 - 0.5 * f64::from(dims.length),
        f64::from(v) + 0.5 - 0.5 * f64::from(dims.width),
    )
}

/// Samples the frame on the `length x width` grid centered at the target and
/// rotated by its heading.
///
/// The result is laid out row-major with `width` rows of `length` samples, so
/// a pose with `theta == 0` reads the patch as it appears in the frame.
/// Samples falling outside the frame take `out_of_bounds`.
pub fn sample_patch(
    frame: &Frame,
    state: &TargetState,
    dims: PatchDims,
    out_of_bounds: f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(dims.area());
    sample_patch_with(frame, state, dims, out_of_bounds, |v| out.push(v));
    out
}

/// Streaming form of [`sample_patch`]: `sink` receives the samples in order.
pub fn sample_patch_with(
    frame: &Frame,
    state: &TargetState,
    dims: PatchDims,
    out_of_bounds: f64,
    mut sink: impl FnMut(f64),
) {
    let (sin, cos) = state.theta.sin_cos();
    for v in 0..dims.width {
        for u in 0..dims.length {
            let (du, dv) = grid_offset(u, v, dims);
            let x = state.x + du * cos - dv * sin;
            let y = state.y + du * sin + dv * cos;
            sink(frame.interpolate(x, y).unwrap_or(out_of_bounds));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gradient(width: usize, height: usize) -> Frame {
        let pixels = (0..height)
            .flat_map(|r| (0..width).map(move |c| ((c * 7 + r * 13) % 256) as f64 / 255.0))
            .collect();
        Frame::new(width, height, pixels).unwrap()
    }

    #[test]
    fn rejects_bad_frames() {
        assert!(Frame::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Frame::new(1, 1, vec![1.5]).is_err());
        assert!(Frame::new(0, 1, vec![]).is_err());
    }

    #[test]
    fn constant_frame_gives_constant_patch() {
        let frame = Frame::filled(200, 100, 0.5);
        for theta in [0.0, 0.3, 1.7, -2.5] {
            let patch = sample_patch(
                &frame,
                &TargetState::new(100.2, 50.9, theta),
                PatchDims::default(),
                0.9,
            );
            assert_eq!(patch.len(), 320);
            assert!(patch.iter().all(|&v| (v - 0.5).abs() < 1e-15));
        }
    }

    #[test]
    fn axis_aligned_integer_pose_copies_window() {
        let frame = gradient(120, 80);
        let dims = PatchDims::default();
        let patch = sample_patch(&frame, &TargetState::new(60.0, 40.0, 0.0), dims, 0.0);
        for v in 0..10 {
            for u in 0..32 {
                assert_eq!(patch[v * 32 + u], frame.get(60 - 16 + u, 40 - 5 + v));
            }
        }
    }

    #[test]
    fn quarter_turn_matches_nearest_neighbor_oracle() {
        let pixels = (0..80)
            .flat_map(|r: usize| (0..120).map(move |c: usize| ((c / 4 + r / 4) % 2) as f64))
            .collect();
        let frame = Frame::new(120, 80, pixels).unwrap();
        let dims = PatchDims::default();
        let state = TargetState::new(60.0, 40.0, PI / 2.0);
        let patch = sample_patch(&frame, &state, dims, 0.0);

        // Forward axis points to +y, lateral axis to -x.
        let mut oracle = Vec::new();
        for v in 0..10 {
            for u in 0..32 {
                let du = u as f64 + 0.5 - 16.0;
                let dv = v as f64 + 0.5 - 5.0;
                let x = 60.0 - dv;
                let y = 40.0 + du;
                oracle.push(frame.get(x.floor() as usize, y.floor() as usize));
            }
        }
        let mad: f64 = patch
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / patch.len() as f64;
        assert!(mad < 0.1, "mean abs diff {mad}");
    }

    #[test]
    fn out_of_bounds_samples_use_fill() {
        let frame = Frame::filled(50, 50, 0.2);
        let patch = sample_patch(&frame, &TargetState::new(0.0, 25.0, 0.0), PatchDims::default(), 0.7);
        // Left half of the patch lies at x < 0.
        for v in 0..10 {
            assert_eq!(patch[v * 32], 0.7);
            assert_eq!(patch[v * 32 + 31], 0.2);
        }
    }
}
