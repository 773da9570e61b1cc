use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::TypeError;

/// Cartesian position or displacement in meters.
pub type Vec3 = Vector3<f64>;

pub fn vec3(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z)
}

pub fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Rigid pose. The orientation is kept as a unit quaternion and serialized
/// as `[w, x, y, z]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
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
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn from_position(position: Vec3) -> Self {
        Self {
            position,
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn new(position: Vec3, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    /// Builds a pose from `[w, x, y, z]` quaternion components, rejecting
    /// quaternions whose norm is more than 1e-6 away from one.
    pub fn from_wxyz(position: Vec3, q: [f64; 4]) -> Result<Self, TypeError> {
        if !is_finite(&position) || q.iter().any(|c| !c.is_finite()) {
            return Err(TypeError::NonFinite);
        }
        let quat = Quaternion::new(q[0], q[1], q[2], q[3]);
        if (quat.norm() - 1.0).abs() > 1e-6 {
            return Err(TypeError::NotUnitQuaternion(quat.norm()));
        }
        Ok(Self {
            position,
            orientation: Unit::new_normalize(quat),
        })
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.orientation * p + self.position
    }

    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.orientation.inverse() * (p - self.position)
    }

    /// `self ∘ other`, i.e. `other` expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: self.transform_point(&other.position),
            orientation: self.orientation * other.orientation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose {
            position: -(inv * self.position),
            orientation: inv,
        }
    }

    /// Angle in radians between the body z axis and the world z axis.
    pub fn tilt_angle(&self) -> f64 {
        let z = self.orientation * Vec3::z();
        z.z.clamp(-1.0, 1.0).acos()
    }
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    position: [f64; 3],
    orientation: [f64; 4],
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            position: [self.position.x, self.position.y, self.position.z],
            orientation: self.wxyz(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(deserializer)?;
        let [x, y, z] = repr.position;
        Pose::from_wxyz(vec3(x, y, z), repr.orientation).map_err(serde::de::Error::custom)
    }
}

/// Axis-aligned bounding box, `min <= max` componentwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self, TypeError> {
        if !is_finite(&min) || !is_finite(&max) {
            return Err(TypeError::NonFinite);
        }
        if (0..3).any(|i| min[i] > max[i]) {
            return Err(TypeError::InvertedBox);
        }
        Ok(Self { min, max })
    }

    /// Cube of half-width `half` around `center`.
    pub fn cube(center: Vec3, half: f64) -> Self {
        let h = Vec3::repeat(half);
        Self {
            min: center - h,
            max: center + h,
        }
    }

    /// Tight box around a point set. Returns `None` for an empty set.
    pub fn from_points<'a, I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a Vec3>,
    {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let (min, max) = iter.fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        Some(Self { min, max })
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn half_extents(&self) -> Vec3 {
        (self.max - self.min) * 0.5
    }

    pub fn inflate(&self, margin: f64) -> Self {
        let m = Vec3::repeat(margin);
        Self {
            min: self.min - m,
            max: self.max + m,
        }
    }

    /// Closed-interval overlap test on the given axes.
    pub fn overlaps_on(&self, other: &Aabb, axes: &[usize]) -> bool {
        axes.iter()
            .all(|&i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        self.overlaps_on(other, &[0, 1, 2])
    }

    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        if !self.intersects(other) {
            return None;
        }
        Some(Aabb {
            min: self.min.sup(&other.min),
            max: self.max.inf(&other.max),
        })
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.min[i] && other.max[i] <= self.max[i])
    }

    pub fn contains_point(&self, p: &Vec3) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    /// Euclidean distance from `p` to the box; zero inside.
    pub fn distance_to(&self, p: &Vec3) -> f64 {
        let clamped = p.sup(&self.min).inf(&self.max);
        (p - clamped).norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn pose_rejects_non_unit_quaternion() {
        assert!(Pose::from_wxyz(Vec3::zeros(), [1.0, 0.0, 0.0, 0.0]).is_ok());
        assert!(matches!(
            Pose::from_wxyz(Vec3::zeros(), [1.1, 0.0, 0.0, 0.0]),
            Err(TypeError::NotUnitQuaternion(_))
        ));
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let rot = UnitQuaternion::from_axis_angle(&Vec3::x_axis(), 0.7);
        let a = Pose::new(vec3(0.3, -0.2, 1.0), rot);
        let id = a.compose(&a.inverse());
        assert!(id.position.norm() < 1e-12);
        assert!(id.orientation.angle() < 1e-12);
    }

    #[test]
    fn tilt_angle_of_quarter_turn() {
        let rot = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), FRAC_PI_2);
        let p = Pose::new(Vec3::zeros(), rot);
        assert!((p.tilt_angle() - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn aabb_distance_and_intersection() {
        let a = Aabb::cube(Vec3::zeros(), 0.5);
        assert_eq!(a.distance_to(&Vec3::zeros()), 0.0);
        assert!((a.distance_to(&vec3(1.5, 0.0, 0.0)) - 1.0).abs() < 1e-12);
        let b = Aabb::cube(vec3(0.9, 0.0, 0.0), 0.5);
        let i = a.intersection(&b).unwrap();
        assert!((i.center().x - 0.45).abs() < 1e-12);
        assert!(Aabb::new(vec3(1.0, 0.0, 0.0), Vec3::zeros()).is_err());
    }

    #[test]
    fn pose_json_uses_wxyz() {
        let p = Pose::from_position(vec3(1.0, 2.0, 3.0));
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"position":[1.0,2.0,3.0],"orientation":[1.0,0.0,0.0,0.0]}"#);
        let back: Pose = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
