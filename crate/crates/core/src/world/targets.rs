//! Geometric targets read off the scene: where to grasp, where a handle
//! starts and ends, where a carried object should come to rest.
//!
//! Scripted demonstrations and the executor both use these, so a rollout
//! aimed at a target lands where the demonstration did.

use super::{World, WorldError};
use crate::types::{vec3, Aabb, ObjectId, Vec3};

/// Grasp point depth below the top of the object's box.
pub const GRASP_DEPTH: f64 = 0.03;
/// Height of a placed object's bottom above a container's floor.
pub const INTO_CLEARANCE: f64 = 0.03;
/// Height of a placed object's bottom above the surface it is placed on.
pub const PLACE_CLEARANCE: f64 = 0.005;
/// Gap between a placed object and the front face of its reference.
pub const FRONT_GAP: f64 = 0.05;

fn require<'a>(world: &'a World, id: &ObjectId) -> Result<&'a super::SceneObject, WorldError> {
    world.get(id)
}

pub fn grasp_point(world: &World, id: &ObjectId) -> Result<Vec3, WorldError> {
    let b = require(world, id)?.aabb();
    let c = b.center();
    Ok(vec3(c.x, c.y, b.max.z - GRASP_DEPTH))
}

fn handle_point(world: &World, id: &ObjectId, front: bool) -> Result<Vec3, WorldError> {
    let obj = require(world, id)?;
    let r = obj
        .handle_region
        .ok_or_else(|| WorldError::InfeasibleTask(format!("{id} has no handle")))?;
    let c = r.center();
    let y = if front { r.min.y + 0.01 } else { r.max.y - 0.02 };
    Ok(obj.pose().transform_point(&vec3(c.x, y, c.z)))
}

/// Handle position with the joint closed.
pub fn handle_back(world: &World, id: &ObjectId) -> Result<Vec3, WorldError> {
    handle_point(world, id, false)
}

/// Handle position with the joint fully open.
pub fn handle_front(world: &World, id: &ObjectId) -> Result<Vec3, WorldError> {
    handle_point(world, id, true)
}

fn flap_point(world: &World, id: &ObjectId, end: bool) -> Result<Vec3, WorldError> {
    let obj = require(world, id)?;
    let r = obj
        .flap_region
        .ok_or_else(|| WorldError::InfeasibleTask(format!("{id} has no flap")))?;
    let x = if end { r.max.x - 0.01 } else { r.min.x + 0.01 };
    let local = vec3(x, r.center().y, r.min.z + 0.025);
    Ok(obj.pose().transform_point(&local))
}

/// Where a fold drag starts (the -x edge of the flap).
pub fn flap_start(world: &World, id: &ObjectId) -> Result<Vec3, WorldError> {
    flap_point(world, id, false)
}

/// Where a fold drag ends (the +x edge of the flap).
pub fn flap_end(world: &World, id: &ObjectId) -> Result<Vec3, WorldError> {
    flap_point(world, id, true)
}

/// Centre for `obj` resting inside `container`.
pub fn into_center(world: &World, obj: &ObjectId, container: &ObjectId) -> Result<Vec3, WorldError> {
    let h = require(world, obj)?.aabb().half_extents();
    let y = require(world, container)?.aabb();
    let c = y.center();
    Ok(vec3(c.x, c.y, y.min.z + INTO_CLEARANCE + h.z))
}

/// Centre for `obj` resting on top of `base`.
pub fn on_top_center(world: &World, obj: &ObjectId, base: &ObjectId) -> Result<Vec3, WorldError> {
    let h = require(world, obj)?.aabb().half_extents();
    let y = require(world, base)?.aabb();
    let c = y.center();
    Ok(vec3(c.x, c.y, y.max.z + PLACE_CLEARANCE + h.z))
}

/// Centre for `obj` standing in front of (world -y) `reference`.
pub fn in_front_center(world: &World, obj: &ObjectId, reference: &ObjectId) -> Result<Vec3, WorldError> {
    let h = require(world, obj)?.aabb().half_extents();
    let y = require(world, reference)?.aabb();
    Ok(vec3(
        y.center().x,
        y.min.y - h.y - FRONT_GAP,
        y.min.z + PLACE_CLEARANCE + h.z,
    ))
}

/// Gripper position that brings the centre of `obj` to `center`, keeping
/// the current gripper-to-object offset.
pub fn carry_goal(world: &World, obj: &ObjectId, center: Vec3) -> Result<Vec3, WorldError> {
    let c = require(world, obj)?.aabb().center();
    Ok(world.gripper_position() + (center - c))
}

/// Top of the highest surface under `footprint` that lies below `below`,
/// ignoring `exclude`. `None` when nothing is underneath.
pub fn support_height(world: &World, footprint: &Aabb, below: f64, exclude: &ObjectId) -> Option<f64> {
    world
        .objects()
        .filter(|o| &o.id != exclude)
        .map(|o| o.aabb())
        .filter(|b| b.max.z <= below + 1e-9 && b.overlaps_on(footprint, &[0, 1]))
        .map(|b| b.max.z)
        .reduce(f64::max)
}
