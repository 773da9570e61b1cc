//! Scene files: JSON description of primitive shapes, sampled into point
//! clouds with a fixed seed.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ObjectKind, SceneObject, World, WorldError};
use crate::types::{vec3, Aabb, ObjectId, Pose, Vec3};

/// Default start pose of the end effector when a scene does not give one.
pub const HOME_POSITION: [f64; 3] = [0.0, -0.35, 0.45];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub seed: u64,
    pub objects: Vec<ObjectSpec>,
    /// `[x, y, z, qw, qx, qy, qz]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gripper_pose: Option<[f64; 7]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Full side lengths.
    Box([f64; 3]),
    /// Radius and height, axis along local z.
    Cylinder([f64; 2]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    pub shape: Shape,
    /// `[x, y, z, qw, qx, qy, qz]`
    pub pose: [f64; 7],
    pub kind: ObjectKind,
    pub graspable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handle_region: Option<RegionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flap_region: Option<RegionSpec>,
    pub points_per_object: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folded: Option<bool>,
    /// Support surfaces such as the table are excluded from pose jitter.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fixed: bool,
}

fn schema(msg: impl Into<String>) -> WorldError {
    WorldError::Schema(msg.into())
}

fn pose_from_array(a: &[f64; 7], what: &str) -> Result<Pose, WorldError> {
    Pose::from_wxyz(vec3(a[0], a[1], a[2]), [a[3], a[4], a[5], a[6]])
        .map_err(|e| schema(format!("{what}: {e}")))
}

fn region(spec: &RegionSpec, what: &str) -> Result<Aabb, WorldError> {
    let [a, b, c] = spec.min;
    let [d, e, f] = spec.max;
    Aabb::new(vec3(a, b, c), vec3(d, e, f)).map_err(|err| schema(format!("{what}: {err}")))
}

/// Per-object RNG stream derived from the scene seed.
fn object_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Samples `n` surface points plus the extreme points that pin the local
/// bounding box to the nominal shape.
pub fn sample_cloud(shape: &Shape, n: usize, rng: &mut impl Rng) -> Result<Vec<Vec3>, WorldError> {
    match *shape {
        Shape::Box([sx, sy, sz]) => {
            if ![sx, sy, sz].iter().all(|s| s.is_finite() && *s > 0.0) {
                return Err(schema(format!("box extents must be positive, got {:?}", [sx, sy, sz])));
            }
            let h = vec3(sx / 2.0, sy / 2.0, sz / 2.0);
            let mut pts: Vec<Vec3> = (0..8)
                .map(|i| {
                    let s = |bit: usize| if i & bit == 0 { -1.0 } else { 1.0 };
                    vec3(s(1) * h.x, s(2) * h.y, s(4) * h.z)
                })
                .collect();
            let areas = [sy * sz, sx * sz, sx * sy];
            let total: f64 = areas.iter().sum::<f64>() * 2.0;
            for _ in 0..n {
                let mut pick = rng.random::<f64>() * total / 2.0;
                let mut axis = 0;
                while axis < 2 && pick > areas[axis] {
                    pick -= areas[axis];
                    axis += 1;
                }
                let mut p = vec3(
                    rng.random_range(-h.x..=h.x),
                    rng.random_range(-h.y..=h.y),
                    rng.random_range(-h.z..=h.z),
                );
                p[axis] = if rng.random::<bool>() { h[axis] } else { -h[axis] };
                pts.push(p);
            }
            Ok(pts)
        }
        Shape::Cylinder([r, height]) => {
            if !(r.is_finite() && r > 0.0 && height.is_finite() && height > 0.0) {
                return Err(schema(format!("cylinder needs positive radius and height, got {:?}", [r, height])));
            }
            let hz = height / 2.0;
            let mut pts = Vec::with_capacity(n + 8);
            for z in [-hz, hz] {
                pts.extend([vec3(r, 0.0, z), vec3(-r, 0.0, z), vec3(0.0, r, z), vec3(0.0, -r, z)]);
            }
            let cap = std::f64::consts::PI * r * r;
            let side = 2.0 * std::f64::consts::PI * r * height;
            for _ in 0..n {
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                if rng.random::<f64>() * (2.0 * cap + side) < side {
                    let z = rng.random_range(-hz..=hz);
                    pts.push(vec3(r * theta.cos(), r * theta.sin(), z));
                } else {
                    let rho = r * rng.random::<f64>().sqrt();
                    let z = if rng.random::<bool>() { hz } else { -hz };
                    pts.push(vec3(rho * theta.cos(), rho * theta.sin(), z));
                }
            }
            Ok(pts)
        }
    }
}

impl ObjectSpec {
    fn build(&self, seed: u64, index: usize) -> Result<SceneObject, WorldError> {
        let id = ObjectId::new(self.id.clone()).map_err(|e| schema(e.to_string()))?;
        if id.is_gripper() {
            return Err(schema("`gripper` is reserved for the end effector"));
        }
        if self.points_per_object == 0 {
            return Err(schema(format!("{id}: points_per_object must be at least 1")));
        }
        let pose = pose_from_array(&self.pose, id.as_str())?;
        let cloud = sample_cloud(&self.shape, self.points_per_object, &mut object_rng(seed, index))?;
        let handle = self.handle_region.as_ref().map(|r| region(r, "handle_region")).transpose()?;
        let flap = self.flap_region.as_ref().map(|r| region(r, "flap_region")).transpose()?;
        match self.kind {
            ObjectKind::Articulated if handle.is_none() => {
                return Err(schema(format!("{id}: articulated objects need a handle_region")));
            }
            ObjectKind::Foldable if flap.is_none() => {
                return Err(schema(format!("{id}: foldable objects need a flap_region")));
            }
            _ => {}
        }
        if self.joint.is_some() && self.kind != ObjectKind::Articulated {
            return Err(schema(format!("{id}: only articulated objects have a joint")));
        }
        if self.folded.is_some() && self.kind != ObjectKind::Foldable {
            return Err(schema(format!("{id}: only foldable objects can be folded")));
        }
        let joint = match self.kind {
            ObjectKind::Articulated => {
                let j = self.joint.unwrap_or(0.0);
                if !(0.0..=1.0).contains(&j) {
                    return Err(schema(format!("{id}: joint {j} outside [0, 1]")));
                }
                Some(j)
            }
            _ => None,
        };
        let folded = (self.kind == ObjectKind::Foldable).then(|| self.folded.unwrap_or(false));
        let mut obj = SceneObject::new(id, cloud, pose, self.kind, self.graspable)?;
        obj.joint = joint;
        obj.folded = folded;
        obj.handle_region = handle;
        obj.flap_region = flap;
        obj.fixed = self.fixed;
        Ok(obj)
    }
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<Self, WorldError> {
        serde_json::from_str(text).map_err(|e| schema(e.to_string()))
    }

    pub fn build(&self) -> Result<World, WorldError> {
        let mut objects = BTreeMap::new();
        for (i, spec) in self.objects.iter().enumerate() {
            let obj = spec.build(self.seed, i)?;
            if objects.contains_key(&obj.id) {
                return Err(WorldError::DuplicateObject(obj.id.clone()));
            }
            objects.insert(obj.id.clone(), obj);
        }
        let gripper_pose = match &self.gripper_pose {
            Some(p) => pose_from_array(p, "gripper_pose")?,
            None => Pose::from_position(Vec3::from(HOME_POSITION)),
        };
        Ok(World::assemble(objects, gripper_pose, self.seed))
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<World, WorldError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| WorldError::Io(format!("{}: {e}", path.display())))?;
    SceneFile::parse(&text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(id: &str, shape: Shape, at: [f64; 3]) -> ObjectSpec {
        ObjectSpec {
            id: id.into(),
            shape,
            pose: [at[0], at[1], at[2], 1.0, 0.0, 0.0, 0.0],
            kind: ObjectKind::Rigid,
            graspable: false,
            handle_region: None,
            flap_region: None,
            points_per_object: 50,
            joint: None,
            folded: None,
            fixed: false,
        }
    }

    #[test]
    fn bottle_and_table_scene() {
        let scene = SceneFile {
            seed: 3,
            objects: vec![
                spec("table", Shape::Box([1.0, 1.0, 0.05]), [0.0, 0.0, -0.025]),
                spec("bottle", Shape::Cylinder([0.03, 0.2]), [0.0, 0.0, 0.1]),
            ],
            gripper_pose: None,
        };
        let world = scene.build().unwrap();
        assert_eq!(world.objects().count(), 2);
        let b = world.object(&crate::types::oid("bottle")).unwrap().aabb();
        assert!((b.min - vec3(-0.03, -0.03, 0.0)).norm() < 1e-12);
        assert!((b.max - vec3(0.03, 0.03, 0.2)).norm() < 1e-12);
        assert_eq!(world.gripper_pose().position, Vec3::from(HOME_POSITION));
    }

    #[test]
    fn rejects_duplicates_and_flat_boxes() {
        let dup = SceneFile {
            seed: 0,
            objects: vec![
                spec("a", Shape::Box([0.1, 0.1, 0.1]), [0.0; 3]),
                spec("a", Shape::Box([0.1, 0.1, 0.1]), [1.0, 0.0, 0.0]),
            ],
            gripper_pose: None,
        };
        assert_eq!(dup.build().unwrap_err(), WorldError::DuplicateObject(crate::types::oid("a")));
        let flat = SceneFile {
            seed: 0,
            objects: vec![spec("a", Shape::Box([0.1, 0.0, 0.1]), [0.0; 3])],
            gripper_pose: None,
        };
        assert!(matches!(flat.build(), Err(WorldError::Schema(_))));
    }

    #[test]
    fn same_seed_same_cloud() {
        let s = Shape::Cylinder([0.04, 0.1]);
        let a = sample_cloud(&s, 40, &mut object_rng(9, 2)).unwrap();
        let b = sample_cloud(&s, 40, &mut object_rng(9, 2)).unwrap();
        let c = sample_cloud(&s, 40, &mut object_rng(10, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn parses_json_schema() {
        let text = r#"{"seed": 1, "objects": [
            {"id": "mw", "shape": {"box": [0.4, 0.3, 0.3]}, "pose": [0, 0, 0.15, 1, 0, 0, 0],
             "kind": "articulated", "graspable": false, "points_per_object": 10,
             "handle_region": {"min": [0.1, -0.4, -0.05], "max": [0.2, -0.14, 0.05]}, "joint": 1.0}
        ]}"#;
        let world = SceneFile::parse(text).unwrap().build().unwrap();
        assert_eq!(world.object(&crate::types::oid("mw")).unwrap().joint(), Some(1.0));
        let bad = text.replace("\"joint\": 1.0", "\"joint\": 1.0, \"color\": 2");
        assert!(matches!(SceneFile::parse(&bad), Err(WorldError::Schema(_))));
    }
}
