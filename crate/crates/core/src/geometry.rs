//! Planar primitives shared by every other module: points, poses, directed
//! segments and their line forms.
//!
//! Angles are radians throughout and normalized into the half-open interval
//! `(-π, π]`.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Wraps an angle into `(-π, π]`. Non-finite input is passed through.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Checked variant of [`wrap_angle`] that rejects NaN and infinities.
pub fn norm_angle(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    Ok(wrap_angle(a))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unit vector with the given heading.
    pub fn unit(angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c, s)
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

/// Robot pose in the world frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    /// Builds a pose, normalizing `theta`.
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub const fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    /// Maps a point from this pose's local frame to the world frame.
    #[inline]
    pub fn transform_point(&self, p: Point) -> Point {
        let (s, c) = self.theta.sin_cos();
        Point::new(c * p.x - s * p.y + self.x, s * p.x + c * p.y + self.y)
    }

    /// Maps a world point into this pose's local frame.
    pub fn inverse_transform_point(&self, p: Point) -> Point {
        let (s, c) = self.theta.sin_cos();
        let dx = p.x - self.x;
        let dy = p.y - self.y;
        Point::new(c * dx + s * dy, -s * dx + c * dy)
    }

    /// `self ⊕ delta`, with `delta` expressed in this pose's frame.
    pub fn compose(&self, delta: &Pose2D) -> Pose2D {
        let p = self.transform_point(delta.position());
        Pose2D::new(p.x, p.y, self.theta + delta.theta)
    }

    /// Relative motion `self⁻¹ ⊕ other`.
    pub fn between(&self, other: &Pose2D) -> Pose2D {
        let p = self.inverse_transform_point(other.position());
        Pose2D::new(p.x, p.y, other.theta - self.theta)
    }
}

/// Directed line segment with a merge weight and an optional map index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSegment {
    start: Point,
    end: Point,
    weight: u32,
    index: Option<usize>,
}

impl LineSegment {
    /// Creates a segment of weight 1 with no index.
    pub fn new(start: Point, end: Point) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::NonFinite("segment endpoint"));
        }
        if start == end {
            return Err(Error::DegenerateSegment {
                x: start.x,
                y: start.y,
            });
        }
        Ok(Self {
            start,
            end,
            weight: 1,
            index: None,
        })
    }

    pub fn from_coords(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        Self::new(Point::new(x1, y1), Point::new(x2, y2))
    }

    /// Sets the weight. Zero is clamped to 1.
    pub fn with_weight(mut self, weight: u32) -> Self {
        self.weight = weight.max(1);
        self
    }

    pub fn with_index(mut self, index: Option<usize>) -> Self {
        self.index = index;
        self
    }

    pub fn start(&self) -> Point {
        self.start
    }

    pub fn end(&self) -> Point {
        self.end
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }

    pub fn index(&self) -> Option<usize> {
        self.index
    }

    pub fn center(&self) -> Point {
        self.start.midpoint(self.end)
    }

    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }

    /// Vector from start to end.
    pub fn delta(&self) -> Point {
        self.end - self.start
    }

    /// Unit direction from start to end.
    pub fn direction(&self) -> Point {
        let d = self.delta();
        d * (1.0 / d.norm())
    }

    /// Heading of the start→end vector in `(-π, π]`.
    pub fn heading(&self) -> f64 {
        let d = self.delta();
        wrap_angle(d.y.atan2(d.x))
    }

    /// Same segment with start and end swapped.
    pub fn reversed(&self) -> Self {
        Self {
            start: self.end,
            end: self.start,
            ..*self
        }
    }

    pub fn general_form(&self) -> GeneralLineForm {
        GeneralLineForm::through(self.start, self.end)
    }

    /// Orthogonal projection of `p` onto the infinite line through the segment.
    pub fn project(&self, p: Point) -> Point {
        let u = self.direction();
        self.start + u * (p - self.start).dot(u)
    }

    /// Signed abscissa of the projection of `p`, measured from `start` along
    /// the segment direction.
    pub fn abscissa(&self, p: Point) -> f64 {
        (p - self.start).dot(self.direction())
    }

    /// Rigid transform of both endpoints from `pose`'s frame to the world
    /// frame. Weight and index are carried over.
    pub fn transformed(&self, pose: &Pose2D) -> Self {
        Self {
            start: pose.transform_point(self.start),
            end: pose.transform_point(self.end),
            ..*self
        }
    }
}

/// Normalized line `A·x + B·y + C = 0` with `A² + B² = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneralLineForm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GeneralLineForm {
    /// Line through two distinct points; the normal is the direction rotated
    /// by +90°.
    pub fn through(p: Point, q: Point) -> Self {
        let d = q - p;
        let len = d.norm();
        let a = -d.y / len;
        let b = d.x / len;
        Self {
            a,
            b,
            c: -(a * p.x + b * p.y),
        }
    }

    /// Line through `p` with the given heading.
    pub fn from_point_heading(p: Point, heading: f64) -> Self {
        let (s, c) = heading.sin_cos();
        Self {
            a: -s,
            b: c,
            c: s * p.x - c * p.y,
        }
    }

    #[inline]
    pub fn signed_distance(&self, p: Point) -> f64 {
        self.a * p.x + self.b * p.y + self.c
    }

    #[inline]
    pub fn distance(&self, p: Point) -> f64 {
        self.signed_distance(p).abs()
    }
}

/// Convenience wrapper over [`LineSegment::general_form`].
pub fn to_general_form(s: &LineSegment) -> GeneralLineForm {
    s.general_form()
}

pub fn point_to_line_distance(p: Point, line: &GeneralLineForm) -> f64 {
    line.distance(p)
}

pub fn project_onto(p: Point, s: &LineSegment) -> Point {
    s.project(p)
}

pub fn transform_to_global(s: &LineSegment, pose: &Pose2D) -> LineSegment {
    s.transformed(pose)
}
