//! Target poses, oriented target rectangles and their pixel overlap.
//!
//! Pixel `(col, row)` covers the unit square `[col, col + 1) x [row, row + 1)`
//! of frame coordinates, so its center sits at `(col + 0.5, row + 0.5)`. A
//! target at integer coordinates with `theta == 0` therefore covers exactly
//! `length x width` whole pixels.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `[-pi, pi)`.
///
/// Panics on a non-finite angle.
pub fn normalize_angle(theta: f64) -> f64 {
    assert!(theta.is_finite(), "angle must be finite, got {theta}");
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let wrapped = (theta + PI).rem_euclid(TAU) - PI;
    // rem_euclid may round up to exactly TAU.
    if wrapped >= PI {
        wrapped - TAU
    } else {
        wrapped.max(-PI)
    }
}

/// Smallest signed difference `a - b`, wrapped into `[-pi, pi)`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

/// Pose of a single target: center position in pixels and heading in radians.
///
/// The heading is the direction of the target's long (forward) axis and is
/// kept in `[-pi, pi)` by every constructor in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl TargetState {
    /// Panics if any component is non-finite.
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        assert!(
            x.is_finite() && y.is_finite(),
            "target position must be finite, got ({x}, {y})"
        );
        TargetState {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn distance_to(&self, other: &TargetState) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && (-PI..PI).contains(&self.theta)
    }
}

/// One hypothesis for the poses of all `n` targets. Index `i` always refers to
/// the same physical target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointParticle(pub Vec<TargetState>);

impl JointParticle {
    pub fn new(targets: Vec<TargetState>) -> Self {
        JointParticle(targets)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn targets(&self) -> &[TargetState] {
        &self.0
    }
}

impl std::ops::Index<usize> for JointParticle {
    type Output = TargetState;

    fn index(&self, i: usize) -> &TargetState {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for JointParticle {
    fn index_mut(&mut self, i: usize) -> &mut TargetState {
        &mut self.0[i]
    }
}

/// Size of the target rectangle / appearance patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchDims {
    /// Pixels along the forward axis.
    pub length: u32,
    /// Pixels across the forward axis.
    pub width: u32,
}

impl Default for PatchDims {
    fn default() -> Self {
        PatchDims {
            length: 32,
            width: 10,
        }
    }
}

impl PatchDims {
    pub fn new(length: u32, width: u32) -> Result<Self> {
        let dims = PatchDims { length, width };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 || self.width == 0 {
            return Err(Error::config(format!(
                "patch dimensions must be positive, got {}x{}",
                self.length, self.width
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> usize {
        self.length as usize * self.width as usize
    }

    /// Distance from the center to a corner.
    pub fn half_diagonal(&self) -> f64 {
        0.5 * f64::from(self.length).hypot(f64::from(self.width))
    }
}

/// Inclusive range of pixel indices whose centers may fall inside a shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelBounds {
    pub col_min: i64,
    pub col_max: i64,
    pub row_min: i64,
    pub row_max: i64,
}

impl PixelBounds {
    pub fn intersect(&self, other: &PixelBounds) -> Option<PixelBounds> {
        let b = PixelBounds {
            col_min: self.col_min.max(other.col_min),
            col_max: self.col_max.min(other.col_max),
            row_min: self.row_min.max(other.row_min),
            row_max: self.row_max.min(other.row_max),
        };
        (b.col_min <= b.col_max && b.row_min <= b.row_max).then_some(b)
    }
}

/// The oriented `length x width` rectangle a target occupies.
///
/// Containment is half-open along both local axes (`-L/2 <= u < L/2`), which
/// makes axis-aligned rectangles cover exactly `length * width` pixel centers.
#[derive(Debug, Clone, Copy)]
pub struct OrientedRect {
    cx: f64,
    cy: f64,
    cos: f64,
    sin: f64,
    half_length: f64,
    half_width: f64,
}

impl OrientedRect {
    pub fn new(state: &TargetState, dims: PatchDims) -> Self {
        let (sin, cos) = state.theta.sin_cos();
        OrientedRect {
            cx: state.x,
            cy: state.y,
            cos,
            sin,
            half_length: 0.5 * f64::from(dims.length),
            half_width: 0.5 * f64::from(dims.width),
        }
    }

    pub fn contains(&self, px: f64, py: f64) -> bool {
        let dx = px - self.cx;
        let dy = py - self.cy;
        let u = dx * self.cos + dy * self.sin;
        let v = -dx * self.sin + dy * self.cos;
        (-self.half_length..self.half_length).contains(&u)
            && (-self.half_width..self.half_width).contains(&v)
    }

    pub fn contains_pixel(&self, col: i64, row: i64) -> bool {
        self.contains(col as f64 + 0.5, row as f64 + 0.5)
    }

    /// Pixels whose centers could lie inside the rectangle.
    pub fn pixel_bounds(&self) -> PixelBounds {
        let ex = self.half_length * self.cos.abs() + self.half_width * self.sin.abs();
        let ey = self.half_length * self.sin.abs() + self.half_width * self.cos.abs();
        PixelBounds {
            col_min: (self.cx - ex - 0.5).floor() as i64,
            col_max: (self.cx + ex - 0.5).ceil() as i64,
            row_min: (self.cy - ey - 0.5).floor() as i64,
            row_max: (self.cy + ey - 0.5).ceil() as i64,
        }
    }

    /// Calls `f(col, row)` for every pixel whose center is inside the rectangle.
    pub fn for_each_pixel(&self, mut f: impl FnMut(i64, i64)) {
        let b = self.pixel_bounds();
        for row in b.row_min..=b.row_max {
            for col in b.col_min..=b.col_max {
                if self.contains_pixel(col, row) {
                    f(col, row);
                }
            }
        }
    }
}

/// Number of integer pixel centers covered by both target rectangles.
pub fn rect_overlap_count(a: &TargetState, b: &TargetState, dims: PatchDims) -> u32 {
    let reach = 2.0 * dims.half_diagonal();
    let (dx, dy) = (a.x - b.x, a.y - b.y);
    if dx * dx + dy * dy > reach * reach {
        return 0;
    }
    let ra = OrientedRect::new(a, dims);
    let rb = OrientedRect::new(b, dims);
    let Some(bounds) = ra.pixel_bounds().intersect(&rb.pixel_bounds()) else {
        return 0;
    };
    let mut count = 0;
    for row in bounds.row_min..=bounds.row_max {
        for col in bounds.col_min..=bounds.col_max {
            if ra.contains_pixel(col, row) && rb.contains_pixel(col, row) {
                count += 1;
            }
        }
    }
    count
}
