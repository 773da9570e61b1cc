//! Deterministic kinematic simulator.
//!
//! Objects are labelled point clouds with a pose. The end effector follows
//! commanded poses exactly; a grasped object moves rigidly with it. Contacts
//! are reported, never prevented.

mod demo;
mod scene;
pub mod targets;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::types::{canonical_collision, Aabb, CollisionPair, ObjectId, Pose, TypeError, Vec3};

pub use demo::{scripted_demo, ScriptedDemo, TimedCollisions, DEMO_RATE, TILT_ANGLE};
pub use scene::{load_scene, sample_cloud, ObjectSpec, RegionSpec, SceneFile, Shape, HOME_POSITION};

/// Inflation applied to every box before the overlap test.
pub const COLLISION_MARGIN: f64 = 0.005;
/// Half side of the cube standing in for the gripper.
pub const GRIPPER_HALF_WIDTH: f64 = 0.01;
/// A closing gripper grasps objects whose box is at most this far away.
pub const GRASP_REACH: f64 = 0.02;
pub const OPEN_THRESHOLD: f64 = 0.9;
pub const CLOSED_THRESHOLD: f64 = 0.1;
/// Tilt angle above which an object counts as tilted (30 degrees).
pub const TILT_THRESHOLD: f64 = std::f64::consts::FRAC_PI_6;
/// A handle only follows the gripper while the gripper's drag progress is
/// this close to the current joint value.
pub const HANDLE_CAPTURE: f64 = 0.25;
/// Consecutive contact steps after which a carried object is knocked loose.
pub const KNOCK_STEPS: u32 = 3;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("io error: {0}")]
    Io(String),
    #[error("scene schema error: {0}")]
    Schema(String),
    #[error("duplicate object `{0}`")]
    DuplicateObject(ObjectId),
    #[error("unknown object `{0}`")]
    UnknownObject(ObjectId),
    #[error("time step must be positive, got {0}")]
    BadTimestep(f64),
    #[error("infeasible task: {0}")]
    InfeasibleTask(String),
    #[error(transparent)]
    Type(#[from] TypeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Rigid,
    Container,
    Articulated,
    Foldable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneObject {
    pub id: ObjectId,
    pub kind: ObjectKind,
    pub graspable: bool,
    /// Excluded from pose jitter (support surfaces).
    pub fixed: bool,
    /// Object-frame box the gripper drags to move the joint.
    pub handle_region: Option<Aabb>,
    /// Object-frame box the gripper drags along +x to fold the object.
    pub flap_region: Option<Aabb>,
    cloud: Vec<Vec3>,
    pose: Pose,
    joint: Option<f64>,
    folded: Option<bool>,
    world_box: Aabb,
    fold_drag: f64,
    fold_armed: bool,
}

impl SceneObject {
    pub fn new(
        id: ObjectId,
        cloud: Vec<Vec3>,
        pose: Pose,
        kind: ObjectKind,
        graspable: bool,
    ) -> Result<Self, WorldError> {
        if cloud.is_empty() {
            return Err(WorldError::Schema(format!("{id}: empty point cloud")));
        }
        if !cloud.iter().all(crate::types::is_finite) {
            return Err(TypeError::NonFinite.into());
        }
        let world_box = Self::box_of(&cloud, &pose);
        Ok(Self {
            id,
            kind,
            graspable,
            fixed: false,
            handle_region: None,
            flap_region: None,
            cloud,
            pose,
            joint: (kind == ObjectKind::Articulated).then_some(0.0),
            folded: (kind == ObjectKind::Foldable).then_some(false),
            world_box,
            fold_drag: 0.0,
            fold_armed: true,
        })
    }

    /// Rigid cuboid whose cloud is its eight corners.
    pub fn cuboid(id: ObjectId, size: Vec3, pose: Pose, graspable: bool) -> Result<Self, WorldError> {
        let mut unused = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let cloud = sample_cloud(&Shape::Box([size.x, size.y, size.z]), 0, &mut unused)?;
        Self::new(id, cloud, pose, ObjectKind::Rigid, graspable)
    }

    fn box_of(cloud: &[Vec3], pose: &Pose) -> Aabb {
        let pts: Vec<Vec3> = cloud.iter().map(|p| pose.transform_point(p)).collect();
        Aabb::from_points(&pts).expect("cloud is nonempty")
    }

    pub fn cloud(&self) -> &[Vec3] {
        &self.cloud
    }

    /// Cloud points in the world frame.
    pub fn world_points(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.cloud.iter().map(|p| self.pose.transform_point(p))
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn set_pose(&mut self, pose: Pose) {
        self.world_box = Self::box_of(&self.cloud, &pose);
        self.pose = pose;
    }

    /// Bounding box of the transformed cloud.
    pub fn aabb(&self) -> Aabb {
        self.world_box
    }

    pub fn joint(&self) -> Option<f64> {
        self.joint
    }

    pub fn folded(&self) -> Option<bool> {
        self.folded
    }

    pub fn is_open(&self) -> bool {
        self.joint.is_some_and(|j| j >= OPEN_THRESHOLD)
    }

    pub fn is_closed(&self) -> bool {
        self.joint.is_some_and(|j| j <= CLOSED_THRESHOLD)
    }

    pub fn is_tilted(&self) -> bool {
        self.pose.tilt_angle() > TILT_THRESHOLD
    }

    pub fn is_folded(&self) -> bool {
        self.folded == Some(true)
    }

    /// Extent of the object-frame cloud along local x.
    fn local_x_extent(&self) -> f64 {
        let (lo, hi) = self
            .cloud
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)));
        hi - lo
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Attachment {
    id: ObjectId,
    /// Object pose expressed in the gripper frame.
    offset: Pose,
}

/// Contact pairs at one instant, canonical and sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub pairs: BTreeSet<CollisionPair>,
}

impl CollisionReport {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, pair: &CollisionPair) -> bool {
        self.pairs.contains(pair)
    }

    pub fn iter(&self) -> impl Iterator<Item = &CollisionPair> {
        self.pairs.iter()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    objects: BTreeMap<ObjectId, SceneObject>,
    gripper_pose: Pose,
    gripper_closed: bool,
    attached: Option<Attachment>,
    sim_time: f64,
    rng_seed: u64,
    contact_streak: u32,
}

impl World {
    fn assemble(objects: BTreeMap<ObjectId, SceneObject>, gripper_pose: Pose, rng_seed: u64) -> Self {
        Self {
            objects,
            gripper_pose,
            gripper_closed: false,
            attached: None,
            sim_time: 0.0,
            rng_seed,
            contact_streak: 0,
        }
    }

    pub fn new(gripper_pose: Pose, rng_seed: u64) -> Self {
        Self::assemble(BTreeMap::new(), gripper_pose, rng_seed)
    }

    pub fn insert_object(&mut self, obj: SceneObject) -> Result<(), WorldError> {
        if obj.id.is_gripper() || self.objects.contains_key(&obj.id) {
            return Err(WorldError::DuplicateObject(obj.id));
        }
        self.objects.insert(obj.id.clone(), obj);
        Ok(())
    }

    pub fn objects(&self) -> impl Iterator<Item = &SceneObject> {
        self.objects.values()
    }

    pub fn object_ids(&self) -> impl Iterator<Item = &ObjectId> {
        self.objects.keys()
    }

    pub fn object(&self, id: &ObjectId) -> Option<&SceneObject> {
        self.objects.get(id)
    }

    pub fn get(&self, id: &ObjectId) -> Result<&SceneObject, WorldError> {
        self.objects.get(id).ok_or_else(|| WorldError::UnknownObject(id.clone()))
    }

    pub fn contains(&self, id: &ObjectId) -> bool {
        id.is_gripper() || self.objects.contains_key(id)
    }

    pub fn gripper_pose(&self) -> &Pose {
        &self.gripper_pose
    }

    pub fn gripper_position(&self) -> Vec3 {
        self.gripper_pose.position
    }

    pub fn gripper_closed(&self) -> bool {
        self.gripper_closed
    }

    pub fn gripper_box(&self) -> Aabb {
        Aabb::cube(self.gripper_pose.position, GRIPPER_HALF_WIDTH)
    }

    pub fn attached(&self) -> Option<&ObjectId> {
        self.attached.as_ref().map(|a| &a.id)
    }

    pub fn sim_time(&self) -> f64 {
        self.sim_time
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Bounding box of an object, or of the gripper cube for `gripper`.
    pub fn bounding_box(&self, id: &ObjectId) -> Result<Aabb, WorldError> {
        if id.is_gripper() {
            Ok(self.gripper_box())
        } else {
            Ok(self.get(id)?.aabb())
        }
    }

    /// Sets the joint of an articulated object, clamped to `[0, 1]`.
    pub fn set_joint(&mut self, id: &ObjectId, value: f64) -> Result<(), WorldError> {
        let obj = self.objects.get_mut(id).ok_or_else(|| WorldError::UnknownObject(id.clone()))?;
        match obj.joint.as_mut() {
            Some(j) => {
                *j = value.clamp(0.0, 1.0);
                Ok(())
            }
            None => Err(WorldError::InfeasibleTask(format!("{id} has no joint"))),
        }
    }

    /// Moves an object that is not currently grasped.
    pub fn place_object(&mut self, id: &ObjectId, pose: Pose) -> Result<(), WorldError> {
        if self.attached() == Some(id) {
            return Err(WorldError::InfeasibleTask(format!("{id} is held by the gripper")));
        }
        let obj = self.objects.get_mut(id).ok_or_else(|| WorldError::UnknownObject(id.clone()))?;
        obj.set_pose(pose);
        Ok(())
    }

    /// Commands the end effector to `target` and advances time by `dt`.
    ///
    /// Order within a step: motion (the grasped object follows), gripper
    /// transition (attach on close, detach and settle on open), handle and
    /// flap mechanics, then the knock check on the carried object.
    pub fn step_to(&mut self, target: Pose, gripper_closed: bool, dt: f64) -> Result<(), WorldError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(WorldError::BadTimestep(dt));
        }
        if !crate::types::is_finite(&target.position) {
            return Err(TypeError::NonFinite.into());
        }
        let previous = self.gripper_pose.position;
        self.gripper_pose = target;
        if let Some(att) = &self.attached {
            let pose = target.compose(&att.offset);
            self.objects.get_mut(&att.id).expect("attached object exists").set_pose(pose);
        }
        match (self.gripper_closed, gripper_closed) {
            (false, true) => self.try_attach(),
            (true, false) => self.release(),
            _ => {}
        }
        self.gripper_closed = gripper_closed;
        self.update_mechanisms(previous);
        self.check_knock();
        self.sim_time += dt;
        Ok(())
    }

    fn try_attach(&mut self) {
        let p = self.gripper_pose.position;
        let nearest = self
            .objects
            .values()
            .filter(|o| o.graspable)
            .map(|o| (o.aabb().distance_to(&p), &o.id))
            .filter(|(d, _)| *d <= GRASP_REACH)
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        if let Some((_, id)) = nearest {
            let id = id.clone();
            let offset = self.gripper_pose.inverse().compose(self.objects[&id].pose());
            self.attached = Some(Attachment { id, offset });
            self.contact_streak = 0;
        }
    }

    fn release(&mut self) {
        if let Some(att) = self.attached.take() {
            self.settle(&att.id);
        }
        self.contact_streak = 0;
    }

    /// Drops an object straight down onto the highest surface beneath it.
    fn settle(&mut self, id: &ObjectId) {
        let b = self.objects[id].aabb();
        let support = self
            .objects
            .values()
            .filter(|o| &o.id != id)
            .map(|o| o.aabb())
            .filter(|s| s.max.z <= b.min.z + 1e-9 && s.overlaps_on(&b, &[0, 1]))
            .map(|s| s.max.z)
            .fold(f64::NEG_INFINITY, f64::max);
        if support.is_finite() {
            let obj = self.objects.get_mut(id).expect("settled object exists");
            let mut pose = *obj.pose();
            pose.position.z -= b.min.z - support;
            obj.set_pose(pose);
        }
    }

    fn update_mechanisms(&mut self, previous: Vec3) {
        let g = self.gripper_pose.position;
        for obj in self.objects.values_mut() {
            if let (Some(region), Some(joint)) = (obj.handle_region, obj.joint) {
                let local = obj.pose.inverse_transform_point(&g);
                if region.contains_point(&local) {
                    let (back, front) = (region.max.y, region.min.y);
                    let progress = (back - local.y) / (back - front);
                    if (progress - joint).abs() <= HANDLE_CAPTURE {
                        obj.joint = Some(progress.clamp(0.0, 1.0));
                    }
                }
            }
            if let Some(region) = obj.flap_region {
                let local = obj.pose.inverse_transform_point(&g);
                if region.contains_point(&local) {
                    let prev_local = obj.pose.inverse_transform_point(&previous);
                    if obj.fold_armed && region.contains_point(&prev_local) {
                        obj.fold_drag += (local.x - prev_local.x).max(0.0);
                        if obj.fold_drag >= 0.5 * obj.local_x_extent() {
                            obj.folded = obj.folded.map(|f| !f);
                            obj.fold_armed = false;
                            obj.fold_drag = 0.0;
                        }
                    }
                } else {
                    obj.fold_armed = true;
                    obj.fold_drag = 0.0;
                }
            }
        }
    }

    /// A carried object pressed against another loose graspable object for
    /// several consecutive steps slips out of the gripper.
    fn check_knock(&mut self) {
        let Some(att) = &self.attached else {
            return;
        };
        let held = self.objects[&att.id].aabb().inflate(COLLISION_MARGIN);
        let touching = self
            .objects
            .values()
            .filter(|o| o.graspable && o.id != att.id)
            .any(|o| o.aabb().inflate(COLLISION_MARGIN).intersects(&held));
        if touching {
            self.contact_streak += 1;
            if self.contact_streak >= KNOCK_STEPS {
                self.release();
            }
        } else {
            self.contact_streak = 0;
        }
    }

    /// Pairs whose margin-inflated boxes overlap. The gripper takes part as a
    /// small cube; it never collides with the object it holds.
    pub fn collisions(&self) -> CollisionReport {
        let mut boxes: Vec<(&ObjectId, Aabb)> = self
            .objects
            .values()
            .map(|o| (&o.id, o.aabb().inflate(COLLISION_MARGIN)))
            .collect();
        let gripper = ObjectId::gripper();
        boxes.push((&gripper, self.gripper_box().inflate(COLLISION_MARGIN)));
        let held = self.attached();
        let mut pairs = BTreeSet::new();
        for (i, (a, ba)) in boxes.iter().enumerate() {
            for (b, bb) in &boxes[i + 1..] {
                let holding = (a.is_gripper() && Some(*b) == held) || (b.is_gripper() && Some(*a) == held);
                if !holding && ba.intersects(bb) {
                    pairs.insert(canonical_collision((*a).clone(), (*b).clone()).expect("ids are distinct"));
                }
            }
        }
        CollisionReport { pairs }
    }

    /// Centre of the overlap between the inflated boxes of a colliding pair.
    pub fn overlap_center(&self, pair: &CollisionPair) -> Result<Option<Vec3>, WorldError> {
        let a = self.bounding_box(pair.first())?.inflate(COLLISION_MARGIN);
        let b = self.bounding_box(pair.second())?.inflate(COLLISION_MARGIN);
        Ok(a.intersection(&b).map(|i| i.center()))
    }

    /// Gaussian perturbation of the x/y position of every loose object.
    pub fn jitter(&mut self, rng: &mut impl Rng, sigma: f64) {
        if sigma <= 0.0 {
            return;
        }
        let normal = Normal::new(0.0, sigma).expect("positive sigma");
        let held = self.attached().cloned();
        for obj in self.objects.values_mut() {
            if obj.fixed || Some(&obj.id) == held.as_ref() {
                continue;
            }
            let mut pose = *obj.pose();
            pose.position.x += normal.sample(rng);
            pose.position.y += normal.sample(rng);
            obj.set_pose(pose);
        }
    }
}
