//! Scripted demonstrations: minimum-jerk segments through hand-placed via
//! points, replayed in the simulator to record the contacts they cause.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::targets::{self, PLACE_CLEARANCE};
use super::{CollisionReport, World, WorldError};
use crate::types::{vec3, ObjectId, Pose, PrimitiveTaskName, Trajectory, Vec3, Verb};

/// Sample rate of every scripted demonstration.
pub const DEMO_RATE: f64 = 100.0;
/// Height of the approach point above a grasp or handle target.
const APPROACH: f64 = 0.13;
/// Carried objects are lifted this much and slid close to the table.
const CARRY_LIFT: f64 = 0.01;
/// Net displacement of the `move` demonstration.
const MOVE_OFFSET: [f64; 3] = [-0.20, 0.0, 0.0];
const TILT_LIFT: f64 = 0.05;
const RELEASE_LIFT: f64 = 0.06;
/// Seconds the arm rests at the final via point before the recording stops.
const FINAL_HOLD: f64 = 0.2;
/// Tilt rotation about world x (radians).
pub const TILT_ANGLE: f64 = -std::f64::consts::FRAC_PI_3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedCollisions {
    pub time: f64,
    pub report: CollisionReport,
}

#[derive(Clone, Debug)]
pub struct ScriptedDemo {
    pub task: PrimitiveTaskName,
    pub trajectory: Trajectory,
    pub collision_log: Vec<TimedCollisions>,
    pub pre_world: World,
    pub post_world: World,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Grip {
    Open,
    Closed,
    CloseAtEnd,
}

struct Plan {
    via: Vec<(Vec3, f64)>,
    orientation: UnitQuaternion<f64>,
    grip: Grip,
}

fn infeasible(msg: String) -> WorldError {
    WorldError::InfeasibleTask(msg)
}

fn min_jerk(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

fn require_held(world: &World, x: &ObjectId) -> Result<(), WorldError> {
    if world.attached() == Some(x) {
        Ok(())
    } else {
        Err(infeasible(format!("{x} is not held by the gripper")))
    }
}

/// Gripper via point that puts the held object's centre at `center`.
fn carry(world: &World, x: &ObjectId, center: Vec3) -> Result<Vec3, WorldError> {
    targets::carry_goal(world, x, center)
}

fn plan(world: &World, task: &PrimitiveTaskName) -> Result<Plan, WorldError> {
    for a in task.args() {
        world.get(a).map_err(|_| infeasible(format!("no object `{a}` in the scene")))?;
    }
    let x = task.subject();
    let here = world.gripper_position();
    let q = world.gripper_pose().orientation;
    let up = |h: f64| vec3(0.0, 0.0, h);
    let plan = |via, grip| Plan {
        via,
        orientation: q,
        grip,
    };
    Ok(match task.verb() {
        Verb::Grasp => {
            let obj = world.get(x)?;
            if !obj.graspable {
                return Err(infeasible(format!("{x} cannot be grasped")));
            }
            if let Some(held) = world.attached() {
                return Err(infeasible(format!("the gripper already holds {held}")));
            }
            let g = targets::grasp_point(world, x)?;
            plan(vec![(g + up(APPROACH), 1.2), (g, 0.8)], Grip::CloseAtEnd)
        }
        Verb::Release => {
            require_held(world, x)?;
            plan(vec![(here + up(RELEASE_LIFT), 0.8)], Grip::Open)
        }
        Verb::Open => {
            let back = targets::handle_back(world, x)?;
            let front = targets::handle_front(world, x)?;
            plan(vec![(back + up(APPROACH), 1.2), (back, 0.6), (front, 1.0)], Grip::Open)
        }
        Verb::Close => {
            let back = targets::handle_back(world, x)?;
            let front = targets::handle_front(world, x)?;
            let retreat = vec3(here.x, front.y - 0.05, front.z);
            let beside = vec3(front.x, front.y - 0.05, front.z);
            plan(
                vec![(retreat, 0.8), (beside, 0.8), (front, 0.5), (back, 1.0)],
                Grip::Open,
            )
        }
        Verb::Fold => {
            let start = targets::flap_start(world, x)?;
            let end = targets::flap_end(world, x)?;
            plan(vec![(start + up(0.08), 1.2), (start, 0.6), (end, 1.0)], Grip::Open)
        }
        Verb::Tilt => {
            require_held(world, x)?;
            let tilt = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), TILT_ANGLE);
            Plan {
                via: vec![(here + up(TILT_LIFT), 1.5)],
                orientation: tilt * q,
                grip: Grip::Closed,
            }
        }
        Verb::Move => {
            require_held(world, x)?;
            let b = world.get(x)?.aabb();
            let c = b.center();
            let lifted = c + up(CARRY_LIFT);
            let over = lifted + Vec3::from(MOVE_OFFSET);
            let mut footprint = b;
            footprint.min += over - c;
            footprint.max += over - c;
            let floor = targets::support_height(world, &footprint, b.min.z + CARRY_LIFT, x)
                .ok_or_else(|| infeasible(format!("nothing to set {x} down on")))?;
            let rest = vec3(over.x, over.y, floor + PLACE_CLEARANCE + b.half_extents().z);
            plan(
                vec![(carry(world, x, lifted)?, 0.5), (carry(world, x, over)?, 1.2), (carry(world, x, rest)?, 0.5)],
                Grip::Closed,
            )
        }
        Verb::MoveInTo => {
            require_held(world, x)?;
            let y = &task.args()[1];
            let c = world.get(x)?.aabb().center();
            let goal = targets::into_center(world, x, y)?;
            let h = world.get(x)?.aabb().half_extents();
            let yb = world.get(y)?.aabb();
            let lifted = c + up(CARRY_LIFT);
            let staging = vec3(goal.x, yb.min.y - h.y - 0.06, goal.z.max(lifted.z));
            plan(
                vec![(carry(world, x, lifted)?, 0.5), (carry(world, x, staging)?, 1.4), (carry(world, x, goal)?, 0.8)],
                Grip::Closed,
            )
        }
        Verb::MoveOnTop => {
            require_held(world, x)?;
            let y = &task.args()[1];
            let c = world.get(x)?.aabb().center();
            let h = world.get(x)?.aabb().half_extents();
            let goal = targets::on_top_center(world, x, y)?;
            let cruise = world.get(y)?.aabb().max.z + 0.05 + h.z;
            plan(
                vec![
                    (carry(world, x, vec3(c.x, c.y, cruise))?, 0.8),
                    (carry(world, x, vec3(goal.x, goal.y, cruise))?, 1.0),
                    (carry(world, x, goal)?, 0.6),
                ],
                Grip::Closed,
            )
        }
        Verb::MoveInFront => {
            require_held(world, x)?;
            let y = &task.args()[1];
            let c = world.get(x)?.aabb().center();
            let goal = targets::in_front_center(world, x, y)?;
            let lifted = c + up(CARRY_LIFT);
            let cruise = vec3(goal.x, goal.y, lifted.z.max(goal.z));
            plan(
                vec![(carry(world, x, lifted)?, 0.5), (carry(world, x, cruise)?, 1.4), (carry(world, x, goal)?, 0.5)],
                Grip::Closed,
            )
        }
    })
}

fn sample(start: &Pose, plan: &Plan) -> Result<Trajectory, WorldError> {
    let moving: f64 = plan.via.iter().map(|(_, d)| d).sum();
    let n = ((moving + FINAL_HOLD) * DEMO_RATE).round() as usize + 1;
    let mut poses = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / DEMO_RATE;
        let mut from = start.position;
        let mut t0 = 0.0;
        let mut position = plan.via.last().expect("plans have via points").0;
        for &(to, d) in &plan.via {
            if t <= t0 + d {
                position = from + (to - from) * min_jerk((t - t0) / d);
                break;
            }
            from = to;
            t0 += d;
        }
        let orientation = start.orientation.slerp(&plan.orientation, min_jerk((t / moving).min(1.0)));
        let closed = match plan.grip {
            Grip::Open => false,
            Grip::Closed => true,
            Grip::CloseAtEnd => k + 1 == n,
        };
        poses.push((Pose::new(position, orientation), closed));
    }
    Ok(Trajectory::from_poses(0.0, DEMO_RATE, poses)?)
}

/// Builds the hand-authored trajectory for `task` from the current scene and
/// replays it on a copy of `world`, logging every contact observed.
pub fn scripted_demo(world: &World, task: &PrimitiveTaskName) -> Result<ScriptedDemo, WorldError> {
    let plan = plan(world, task)?;
    let trajectory = sample(world.gripper_pose(), &plan)?;
    let mut replay = world.clone();
    let mut collision_log = Vec::with_capacity(trajectory.len());
    for s in &trajectory.samples()[1..] {
        replay.step_to(s.pose, s.gripper_closed, 1.0 / DEMO_RATE)?;
        collision_log.push(TimedCollisions {
            time: replay.sim_time(),
            report: replay.collisions(),
        });
    }
    Ok(ScriptedDemo {
        task: task.clone(),
        trajectory,
        collision_log,
        pre_world: world.clone(),
        post_world: replay,
    })
}
