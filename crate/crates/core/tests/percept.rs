use std::time::Instant;

use condmp_core::percept::{current_conditions, relation_holds, state_holds, ENUMERATED_RELATIONS};
use condmp_core::world::{ObjectKind, SceneObject, World};
use condmp_core::{oid, vec3, ConditionAtom, ObjectStatePredicate, Pose, SpatialRelation, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 0.01;

/// Reference semantics on raw points: every quantifier ranges over the
/// transformed clouds, with no bounding boxes involved.
fn oracle(s: &[Vec3], rel: SpatialRelation, o: &[Vec3]) -> bool {
    let all = |f: &dyn Fn(&Vec3, &Vec3) -> bool| s.iter().all(|p| o.iter().all(|q| f(p, q)));
    let any = |f: &dyn Fn(&Vec3, &Vec3) -> bool| s.iter().any(|p| o.iter().any(|q| f(p, q)));
    // projections on axis k share a point iff some subject point is not right of
    // some object point and vice versa
    let overlap = |k: usize| any(&|p, q| p[k] <= q[k]) && any(&|p, q| q[k] <= p[k]);
    match rel {
        SpatialRelation::Above => all(&|p, q| p.z >= q.z - EPS) && overlap(0) && overlap(1),
        SpatialRelation::Below => all(&|p, q| q.z >= p.z - EPS) && overlap(0) && overlap(1),
        SpatialRelation::Inside => s.iter().all(|p| {
            (0..3).all(|k| o.iter().any(|q| q[k] - EPS <= p[k]) && o.iter().any(|q| p[k] <= q[k] + EPS))
        }),
        SpatialRelation::Outside => !oracle(s, SpatialRelation::Inside, o),
        SpatialRelation::InFrontOf => all(&|p, q| p.y <= q.y + EPS) && overlap(0) && overlap(2),
    }
}

const ALL_RELATIONS: [SpatialRelation; 5] = [
    SpatialRelation::Above,
    SpatialRelation::Below,
    SpatialRelation::Inside,
    SpatialRelation::Outside,
    SpatialRelation::InFrontOf,
];

fn cloud(rng: &mut ChaCha8Rng, half: Vec3) -> Vec<Vec3> {
    let n = rng.random_range(8..40);
    (0..n)
        .map(|_| {
            vec3(
                rng.random_range(-half.x..=half.x),
                rng.random_range(-half.y..=half.y),
                rng.random_range(-half.z..=half.z),
            )
        })
        .collect()
}

fn random_pose(rng: &mut ChaCha8Rng, centre: Vec3) -> Pose {
    if rng.random_bool(0.3) {
        let yaw = rng.random_range(-3.1..3.1);
        Pose::new(centre, nalgebra::UnitQuaternion::from_euler_angles(0.0, 0.0, yaw))
    } else {
        Pose::from_position(centre)
    }
}

/// Two objects whose placement is biased toward the boundaries of the
/// relations: stacked, nested, in front, or anywhere nearby.
fn random_scene(rng: &mut ChaCha8Rng) -> World {
    let half = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        vec3(rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi))
    };
    let ob_half = half(rng, 0.05, 0.25);
    let sb_half = half(rng, 0.02, 0.15);
    let near = |rng: &mut ChaCha8Rng, s: f64| rng.random_range(-s..s);
    let centre = match rng.random_range(0..4) {
        0 => vec3(near(rng, 0.2), near(rng, 0.2), ob_half.z + sb_half.z + near(rng, 0.03)),
        1 => vec3(near(rng, 0.1), near(rng, 0.1), near(rng, 0.1)),
        2 => vec3(near(rng, 0.2), -(ob_half.y + sb_half.y) + near(rng, 0.03), near(rng, 0.2)),
        _ => vec3(near(rng, 0.5), near(rng, 0.5), near(rng, 0.5)),
    };
    let mut w = World::new(Pose::from_position(vec3(5.0, 5.0, 5.0)), 0);
    let o = cloud(rng, ob_half);
    let s = cloud(rng, sb_half);
    let o_pose = random_pose(rng, Vec3::zeros());
    let s_pose = random_pose(rng, centre);
    w.insert_object(SceneObject::new(oid("o"), o, o_pose, ObjectKind::Rigid, false).unwrap())
        .unwrap();
    w.insert_object(SceneObject::new(oid("s"), s, s_pose, ObjectKind::Rigid, true).unwrap())
        .unwrap();
    w
}

fn points(w: &World, id: &str) -> Vec<Vec3> {
    w.get(&oid(id)).unwrap().world_points().collect()
}

#[test]
fn box_predicates_match_the_point_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut agree = 0;
    let mut true_counts = [0usize; 5];
    for _ in 0..1000 {
        let w = random_scene(&mut rng);
        let (sp, op) = (points(&w, "s"), points(&w, "o"));
        for (k, rel) in ALL_RELATIONS.into_iter().enumerate() {
            for (a, b, ap, bp) in [("s", "o", &sp, &op), ("o", "s", &op, &sp)] {
                let fast = relation_holds(&w, &oid(a), rel, &oid(b)).unwrap();
                let slow = oracle(ap, rel, bp);
                assert_eq!(fast, slow, "{a} {rel:?} {b}");
                agree += 1;
                true_counts[k] += usize::from(fast);
            }
        }
    }
    assert_eq!(agree, 1000 * 5 * 2);
    // the scene mix must exercise both outcomes of every relation
    assert!(true_counts.iter().all(|&c| c > 0 && c < 2000), "{true_counts:?}");
    assert!(started.elapsed().as_secs_f64() < 10.0);
}

fn cuboid_world(boxes: &[(&str, Vec3, Vec3)]) -> World {
    let mut w = World::new(Pose::from_position(vec3(5.0, 5.0, 5.0)), 0);
    for (id, size, c) in boxes {
        w.insert_object(SceneObject::cuboid(oid(id), *size, Pose::from_position(*c), true).unwrap())
            .unwrap();
    }
    w
}

fn v3(range: std::ops::Range<f64>) -> impl Strategy<Value = Vec3> {
    (range.clone(), range.clone(), range).prop_map(|(x, y, z)| vec3(x, y, z))
}

proptest! {
    #[test]
    fn above_implies_below(sa in v3(0.02..0.4), sb in v3(0.02..0.4), ca in v3(-0.3..0.3), cb in v3(-0.3..0.3)) {
        let w = cuboid_world(&[("a", sa, ca), ("b", sb, cb)]);
        let (a, b) = (oid("a"), oid("b"));
        if relation_holds(&w, &a, SpatialRelation::Above, &b).unwrap() {
            prop_assert!(relation_holds(&w, &b, SpatialRelation::Below, &a).unwrap());
        }
    }

    #[test]
    fn inside_and_outside_are_complementary(sa in v3(0.02..0.4), sb in v3(0.02..0.4), ca in v3(-0.2..0.2), cb in v3(-0.2..0.2)) {
        let w = cuboid_world(&[("a", sa, ca), ("b", sb, cb)]);
        for (s, o) in [(oid("a"), oid("b")), (oid("b"), oid("a"))] {
            let inside = relation_holds(&w, &s, SpatialRelation::Inside, &o).unwrap();
            let outside = relation_holds(&w, &s, SpatialRelation::Outside, &o).unwrap();
            prop_assert!(inside != outside);
        }
    }

    #[test]
    fn lifting_over_an_overlapping_object_makes_it_above(
        sa in v3(0.02..0.3),
        sb in v3(0.02..0.3),
        dx in -1.0f64..1.0,
        dy in -1.0f64..1.0,
        extra in 0.0f64..0.5,
    ) {
        // side by side on the same base, offset so the xy projections still overlap
        let offset = vec3(dx * (sa.x + sb.x) / 2.0 * 0.99, dy * (sa.y + sb.y) / 2.0 * 0.99, (sa.z - sb.z) / 2.0);
        let lift = sb.z + 2.0 * EPS + extra;
        let w = cuboid_world(&[("a", sa, offset + vec3(0.0, 0.0, lift)), ("b", sb, Vec3::zeros())]);
        prop_assert!(relation_holds(&w, &oid("a"), SpatialRelation::Above, &oid("b")).unwrap());
    }

    #[test]
    fn current_conditions_lists_every_true_atom(
        boxes in proptest::collection::vec((v3(0.02..0.3), v3(-0.3..0.3)), 2..5),
        hold in proptest::option::of(0usize..4),
    ) {
        let names = ["a", "b", "c", "d"];
        let specs: Vec<_> = boxes.iter().enumerate().map(|(i, (s, c))| (names[i], *s, *c)).collect();
        let mut w = cuboid_world(&specs);
        if let Some(h) = hold.filter(|h| *h < specs.len()) {
            // close the gripper on the object's centre so it attaches
            let c = specs[h].2;
            let mut free = w.clone();
            free.step_to(Pose::from_position(c), false, 0.01).unwrap();
            free.step_to(Pose::from_position(c), true, 0.01).unwrap();
            w = free;
        }
        let listed = current_conditions(&w);
        for (s, _, _) in &specs {
            for (o, _, _) in &specs {
                if s == o {
                    continue;
                }
                for rel in ENUMERATED_RELATIONS {
                    if relation_holds(&w, &oid(s), rel, &oid(o)).unwrap() {
                        let atom = ConditionAtom::relation(oid(s), rel, oid(o)).unwrap();
                        prop_assert!(listed.contains(&atom), "{atom}");
                    }
                }
            }
            let g = ObjectStatePredicate::Grasping { gripper: oid("gripper"), obj: oid(s) };
            if state_holds(&w, &g).unwrap() {
                prop_assert!(listed.contains(&ConditionAtom::State(g)));
            }
        }
    }
}
