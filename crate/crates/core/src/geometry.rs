//! Primitive shapes, rigid poses, surface point clouds and nearest-neighbor
//! queries.
//!
//! Nearest-neighbor semantics are those of an exhaustive linear scan: the
//! minimizing point wins and ties go to the lowest index.

use std::f64::consts::{PI, TAU};

use nalgebra::{Isometry3, Rotation3, Translation3, UnitQuaternion, Vector3};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Position in meters plus roll/pitch/yaw in radians (extrinsic x, y, z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Vec3::zeros(),
            roll: 0.0,
            pitch: 0.0,
            yaw: 0.0,
        }
    }

    pub fn new(position: Vec3, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self {
            position,
            roll: wrap_angle(roll),
            pitch: wrap_angle(pitch),
            yaw: wrap_angle(yaw),
        }
    }

    /// Planar pose on the table: `(x, y, theta)` at height `z`.
    pub fn planar(x: f64, y: f64, z: f64, theta: f64) -> Self {
        Self::new(Vec3::new(x, y, z), 0.0, 0.0, theta)
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.roll, self.pitch, self.yaw)
    }

    pub fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(
            Translation3::from(self.position),
            UnitQuaternion::from_rotation_matrix(&self.rotation()),
        )
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        let (roll, pitch, yaw) = iso.rotation.euler_angles();
        Self::new(iso.translation.vector, roll, pitch, yaw)
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation() * p + self.position
    }

    /// `self * other`: `other` expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::from_isometry(&(self.isometry() * other.isometry()))
    }

    pub fn inverse(&self) -> Pose {
        Pose::from_isometry(&self.isometry().inverse())
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.roll.is_finite()
            && self.pitch.is_finite()
            && self.yaw.is_finite()
    }
}

/// A single primitive. Extents are full lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Box { x: f64, y: f64, z: f64 },
    Cylinder { radius: f64, height: f64 },
    Sphere { radius: f64 },
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let extents: &[(&str, f64)] = match self {
            Shape::Box { x, y, z } => &[("x", *x), ("y", *y), ("z", *z)],
            Shape::Cylinder { radius, height } => &[("radius", *radius), ("height", *height)],
            Shape::Sphere { radius } => &[("radius", *radius)],
        };
        for (name, v) in extents {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::InvalidShape(format!(
                    "{self:?}: extent `{name}` must be finite and strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn surface_area(&self) -> f64 {
        match *self {
            Shape::Box { x, y, z } => 2.0 * (x * y + y * z + x * z),
            Shape::Cylinder { radius, height } => TAU * radius * (radius + height),
            Shape::Sphere { radius } => 2.0 * TAU * radius * radius,
        }
    }

    /// Radius of the smallest origin-centered circle enclosing the xy footprint.
    pub fn footprint_radius(&self) -> f64 {
        match *self {
            Shape::Box { x, y, .. } => 0.5 * x.hypot(y),
            Shape::Cylinder { radius, .. } | Shape::Sphere { radius } => radius,
        }
    }

    pub fn half_height(&self) -> f64 {
        match *self {
            Shape::Box { z, .. } => 0.5 * z,
            Shape::Cylinder { height, .. } => 0.5 * height,
            Shape::Sphere { radius } => radius,
        }
    }

    fn patches(&self, offset: Vec3, out: &mut Vec<Patch>) {
        match *self {
            Shape::Box { x, y, z } => {
                let h = Vec3::new(x, y, z) * 0.5;
                for axis in 0..3 {
                    let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                    let area = 4.0 * h[u] * h[v];
                    for sign in [-1.0, 1.0] {
                        out.push(Patch {
                            area,
                            offset,
                            kind: PatchKind::BoxFace {
                                axis,
                                sign,
                                half: h,
                            },
                        });
                    }
                }
            }
            Shape::Cylinder { radius, height } => {
                let cap = PI * radius * radius;
                for sign in [-1.0, 1.0] {
                    out.push(Patch {
                        area: cap,
                        offset,
                        kind: PatchKind::Disc {
                            radius,
                            z: sign * 0.5 * height,
                        },
                    });
                }
                out.push(Patch {
                    area: TAU * radius * height,
                    offset,
                    kind: PatchKind::Side { radius, height },
                });
            }
            Shape::Sphere { radius } => out.push(Patch {
                area: self.surface_area(),
                offset,
                kind: PatchKind::Sphere { radius },
            }),
        }
    }
}

/// A primitive placed at an offset in its body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub shape: Shape,
    #[serde(default = "Vec3::zeros")]
    pub offset: Vec3,
}

/// Union of one or more primitives, the stand-in for a scanned mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub parts: Vec<Part>,
}

impl Body {
    pub fn single(shape: Shape) -> Self {
        Self {
            parts: vec![Part {
                shape,
                offset: Vec3::zeros(),
            }],
        }
    }

    pub fn pair(a: Shape, a_offset: Vec3, b: Shape, b_offset: Vec3) -> Self {
        Self {
            parts: vec![
                Part {
                    shape: a,
                    offset: a_offset,
                },
                Part {
                    shape: b,
                    offset: b_offset,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.parts.is_empty() {
            return Err(Error::InvalidShape("body has no parts".into()));
        }
        for p in &self.parts {
            p.shape.validate()?;
            if !p.offset.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidShape("non-finite part offset".into()));
            }
        }
        Ok(())
    }

    pub fn footprint_radius(&self) -> f64 {
        self.parts
            .iter()
            .map(|p| p.offset.xy().norm() + p.shape.footprint_radius())
            .fold(0.0, f64::max)
    }

    /// Whether a point in the body frame lies inside the body grown by `margin`.
    pub fn contains(&self, p: &Vec3, margin: f64) -> bool {
        self.parts.iter().any(|part| {
            let q = p - part.offset;
            match part.shape {
                Shape::Box { x, y, z } => {
                    q.x.abs() <= 0.5 * x + margin
                        && q.y.abs() <= 0.5 * y + margin
                        && q.z.abs() <= 0.5 * z + margin
                }
                Shape::Cylinder { radius, height } => {
                    q.xy().norm() <= radius + margin && q.z.abs() <= 0.5 * height + margin
                }
                Shape::Sphere { radius } => q.norm() <= radius + margin,
            }
        })
    }

    /// Lowest point of the body in its own frame.
    pub fn min_z(&self) -> f64 {
        self.parts
            .iter()
            .map(|p| p.offset.z - p.shape.half_height())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn surface_area(&self) -> f64 {
        self.parts.iter().map(|p| p.shape.surface_area()).sum()
    }
}

#[derive(Debug, Clone, Copy)]
struct Patch {
    area: f64,
    offset: Vec3,
    kind: PatchKind,
}

#[derive(Debug, Clone, Copy)]
enum PatchKind {
    BoxFace { axis: usize, sign: f64, half: Vec3 },
    Disc { radius: f64, z: f64 },
    Side { radius: f64, height: f64 },
    Sphere { radius: f64 },
}

impl Patch {
    fn sample<R: Rng>(&self, rng: &mut R) -> Vec3 {
        let local = match self.kind {
            PatchKind::BoxFace { axis, sign, half } => {
                let mut p = Vec3::zeros();
                p[axis] = sign * half[axis];
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                p[u] = rng.random_range(-half[u]..=half[u]);
                p[v] = rng.random_range(-half[v]..=half[v]);
                p
            }
            PatchKind::Disc { radius, z } => {
                let r = radius * rng.random::<f64>().sqrt();
                let a = rng.random_range(0.0..TAU);
                Vec3::new(r * a.cos(), r * a.sin(), z)
            }
            PatchKind::Side { radius, height } => {
                let a = rng.random_range(0.0..TAU);
                let z = rng.random_range(-0.5 * height..=0.5 * height);
                Vec3::new(radius * a.cos(), radius * a.sin(), z)
            }
            PatchKind::Sphere { radius } => loop {
                let d = Vec3::new(
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                );
                let n = d.norm();
                if n > 1e-12 {
                    break d * (radius / n);
                }
            },
        };
        local + self.offset
    }
}

/// Where a cloud came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudSource {
    pub body: Body,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub source: Option<CloudSource>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Vec3>) -> Self {
        Self {
            points,
            source: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.points.is_empty() {
            return None;
        }
        let sum: Vec3 = self.points.iter().sum();
        Some(sum / self.points.len() as f64)
    }
}

/// Samples `n` points uniformly over the surface of a single primitive
/// centered at the origin.
pub fn sample_primitive_cloud(shape: &Shape, n: usize, seed: u64) -> Result<PointCloud> {
    sample_body_cloud(&Body::single(*shape), n, seed)
}

/// Samples `n` points uniformly (by area) over every face of every part.
pub fn sample_body_cloud(body: &Body, n: usize, seed: u64) -> Result<PointCloud> {
    body.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument(
            "point count must be at least 1".into(),
        ));
    }
    let mut patches = Vec::new();
    for part in &body.parts {
        part.shape.patches(part.offset, &mut patches);
    }
    let weights = WeightedIndex::new(patches.iter().map(|p| p.area))
        .map_err(|e| Error::InvalidShape(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| patches[weights.sample(&mut rng)].sample(&mut rng))
        .collect();
    Ok(PointCloud {
        points,
        source: Some(CloudSource {
            body: body.clone(),
            seed,
        }),
    })
}

/// Adds isotropic gaussian jitter to every point.
pub fn jitter_cloud(cloud: &PointCloud, sigma: f64, seed: u64) -> PointCloud {
    if sigma <= 0.0 {
        return cloud.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let n = Vec3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            p + n * sigma
        })
        .collect();
    PointCloud {
        points,
        source: cloud.source.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    /// `cloud[index] - query`
    pub vector: Vec3,
    pub distance: f64,
    pub index: usize,
}

pub fn nearest_vector(query: &Vec3, cloud: &PointCloud) -> Result<Nearest> {
    let mut best = None::<(usize, f64)>;
    for (i, p) in cloud.points.iter().enumerate() {
        let d2 = (p - query).norm_squared();
        match best {
            Some((_, b)) if d2 >= b => {}
            _ => best = Some((i, d2)),
        }
    }
    let (index, _) = best.ok_or(Error::EmptyCloud)?;
    let vector = cloud.points[index] - query;
    Ok(Nearest {
        vector,
        distance: vector.norm(),
        index,
    })
}

/// Sum over keypoints of the distance to the nearest cloud point.
pub fn total_nn_distance(keypoints: &[Vec3], cloud: &PointCloud) -> Result<f64> {
    if keypoints.is_empty() {
        return Err(Error::InvalidArgument("no keypoints".into()));
    }
    keypoints
        .iter()
        .map(|k| nearest_vector(k, cloud).map(|n| n.distance))
        .sum()
}

/// Moves a cloud from its local frame into the frame given by `pose`.
pub fn transform_cloud(cloud: &PointCloud, pose: &Pose) -> PointCloud {
    let rot = pose.rotation();
    PointCloud {
        points: cloud
            .points
            .iter()
            .map(|p| rot * p + pose.position)
            .collect(),
        source: cloud.source.clone(),
    }
}
