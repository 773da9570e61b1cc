use std::collections::BTreeSet;

use condmp_core::library::scene;
use condmp_core::world::{scripted_demo, targets, SceneObject, World, WorldError, GRASP_REACH};
use condmp_core::{canonical_collision, oid, parse_task_name, vec3, Pose, Vec3};
use proptest::prelude::*;

fn task(s: &str) -> condmp_core::PrimitiveTaskName {
    parse_task_name(s).unwrap()
}

#[test]
fn scripted_grasp_ends_holding_the_bottle() {
    let w = scene("kitchen").unwrap();
    let demo = scripted_demo(&w, &task("grasp bottle")).unwrap();
    assert_eq!(demo.post_world.attached(), Some(&oid("bottle")));
    assert!(demo.trajectory.last().gripper_closed);
    // independent check against the scene: the closing pose was within reach
    let end = demo.trajectory.last().pose.position;
    let b = w.bounding_box(&oid("bottle")).unwrap();
    let d = (0..3)
        .map(|k| (b.min[k] - end[k]).max(end[k] - b.max[k]).max(0.0))
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    assert!(d <= GRASP_REACH, "{d}");
}

#[test]
fn scripted_open_swings_the_door() {
    let w = scene("kitchen").unwrap();
    let demo = scripted_demo(&w, &task("open microwave")).unwrap();
    assert!(demo.post_world.get(&oid("microwave")).unwrap().joint().unwrap() >= 0.9);
}

#[test]
fn scripted_demo_of_missing_object_is_infeasible() {
    let w = scene("kitchen").unwrap();
    assert!(matches!(
        scripted_demo(&w, &task("grasp ghost")),
        Err(WorldError::InfeasibleTask(_))
    ));
}

#[test]
fn replaying_commands_is_bit_identical() {
    let w = scene("kitchen").unwrap();
    let demo = scripted_demo(&w, &task("grasp bottle")).unwrap();
    let run = || {
        let mut states = Vec::new();
        let mut r = w.clone();
        for s in &demo.trajectory.samples()[1..] {
            r.step_to(s.pose, s.gripper_closed, 0.01).unwrap();
            states.push(format!("{r:?}"));
        }
        states
    };
    assert_eq!(run(), run());
}

fn holding_bottle() -> World {
    let mut w = scene("kitchen").unwrap();
    let g = targets::grasp_point(&w, &oid("bottle")).unwrap();
    w.step_to(Pose::from_position(g), false, 0.01).unwrap();
    w.step_to(Pose::from_position(g), true, 0.01).unwrap();
    assert_eq!(w.attached(), Some(&oid("bottle")));
    w
}

fn relative(w: &World) -> Pose {
    w.gripper_pose().inverse().compose(w.get(&oid("bottle")).unwrap().pose())
}

proptest! {
    #[test]
    fn carried_object_keeps_its_offset(
        moves in proptest::collection::vec(((-0.3f64..0.3, -0.3f64..0.3, 0.55f64..0.9), -1.0f64..1.0), 1..30)
    ) {
        let mut w = holding_bottle();
        let start = relative(&w);
        for ((x, y, z), yaw) in moves {
            let q = nalgebra::UnitQuaternion::from_euler_angles(0.0, 0.0, yaw);
            w.step_to(Pose::new(vec3(x, y, z), q), true, 0.01).unwrap();
            prop_assert_eq!(w.attached(), Some(&oid("bottle")));
            let now = relative(&w);
            prop_assert!((now.position - start.position).amax() <= 1e-9);
            prop_assert!(now.orientation.angle_to(&start.orientation) <= 1e-9);
        }
    }

    #[test]
    fn joints_stay_in_range(
        path in proptest::collection::vec((0.3f64..1.0, -0.1f64..0.1, 0.05f64..0.25), 1..80),
        start in 0.0f64..=1.0,
    ) {
        let mut w = scene("kitchen").unwrap();
        w.set_joint(&oid("microwave"), start).unwrap();
        for (x, y, z) in path {
            w.step_to(Pose::from_position(vec3(x, y, z)), false, 0.01).unwrap();
            let j = w.get(&oid("microwave")).unwrap().joint().unwrap();
            prop_assert!((0.0..=1.0).contains(&j), "{}", j);
        }
    }

    #[test]
    fn collisions_do_not_depend_on_names(
        boxes in proptest::collection::vec(((-0.3f64..0.3, -0.3f64..0.3, -0.3f64..0.3), 0.05f64..0.3), 2..5),
    ) {
        let names = ["a", "b", "c", "d"];
        let renamed = ["d", "c", "b", "a"];
        let build = |ids: &[&str]| {
            let mut w = World::new(Pose::from_position(vec3(3.0, 3.0, 3.0)), 0);
            for (i, ((x, y, z), side)) in boxes.iter().enumerate() {
                let obj = SceneObject::cuboid(oid(ids[i]), Vec3::repeat(*side), Pose::from_position(vec3(*x, *y, *z)), false).unwrap();
                w.insert_object(obj).unwrap();
            }
            w.collisions().pairs
        };
        let original = build(&names);
        let relabelled: BTreeSet<_> = build(&renamed)
            .into_iter()
            .map(|p| {
                let back = |id: &condmp_core::ObjectId| oid(names[renamed.iter().position(|r| *r == id.as_str()).unwrap()]);
                canonical_collision(back(p.first()), back(p.second())).unwrap()
            })
            .collect();
        prop_assert_eq!(original, relabelled);
    }
}
