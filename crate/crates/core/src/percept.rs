//! Spatial relations and object states read from the simulated point clouds.
//!
//! Relations are evaluated on the bounding boxes of the transformed clouds
//! with a 1 cm tolerance. World -y is "front".

use crate::types::{Aabb, ConditionAtom, ObjectId, ObjectStatePredicate, SpatialRelation};
use crate::world::World;

/// Tolerance shared by every geometric predicate.
pub const RELATION_EPS: f64 = 0.01;

/// Relations listed by [`current_conditions`]. `Outside` holds for nearly
/// every pair and is only evaluated on demand.
pub const ENUMERATED_RELATIONS: [SpatialRelation; 4] = [
    SpatialRelation::Above,
    SpatialRelation::Below,
    SpatialRelation::Inside,
    SpatialRelation::InFrontOf,
];

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PerceptError {
    #[error("unknown object `{0}`")]
    UnknownObject(ObjectId),
    #[error("`{0}` cannot be related to itself")]
    SameObject(ObjectId),
    #[error("`{0}` is not a gripper")]
    NotAGripper(ObjectId),
}

/// The box-level definition of each relation, `subject rel object`.
pub fn boxes_related(subject: &Aabb, rel: SpatialRelation, object: &Aabb) -> bool {
    match rel {
        SpatialRelation::Above => subject.min.z >= object.max.z - RELATION_EPS && subject.overlaps_on(object, &[0, 1]),
        SpatialRelation::Below => boxes_related(object, SpatialRelation::Above, subject),
        SpatialRelation::Inside => object.inflate(RELATION_EPS).contains_box(subject),
        SpatialRelation::Outside => !boxes_related(subject, SpatialRelation::Inside, object),
        SpatialRelation::InFrontOf => {
            subject.max.y <= object.min.y + RELATION_EPS && subject.overlaps_on(object, &[0, 2])
        }
    }
}

fn bbox(world: &World, id: &ObjectId) -> Result<Aabb, PerceptError> {
    world
        .bounding_box(id)
        .map_err(|_| PerceptError::UnknownObject(id.clone()))
}

pub fn relation_holds(
    world: &World,
    subject: &ObjectId,
    rel: SpatialRelation,
    object: &ObjectId,
) -> Result<bool, PerceptError> {
    if subject == object {
        return Err(PerceptError::SameObject(subject.clone()));
    }
    Ok(boxes_related(&bbox(world, subject)?, rel, &bbox(world, object)?))
}

pub fn state_holds(world: &World, pred: &ObjectStatePredicate) -> Result<bool, PerceptError> {
    let obj = |id: &ObjectId| world.get(id).map_err(|_| PerceptError::UnknownObject(id.clone()));
    Ok(match pred {
        ObjectStatePredicate::Grasping { gripper, obj: o } => {
            if !gripper.is_gripper() {
                return Err(PerceptError::NotAGripper(gripper.clone()));
            }
            obj(o)?;
            world.attached() == Some(o)
        }
        ObjectStatePredicate::Open(o) => obj(o)?.is_open(),
        ObjectStatePredicate::Closed(o) => obj(o)?.is_closed(),
        ObjectStatePredicate::Tilted(o) => obj(o)?.is_tilted(),
        ObjectStatePredicate::Folded(o) => obj(o)?.is_folded(),
    })
}

pub fn atom_holds(world: &World, atom: &ConditionAtom) -> Result<bool, PerceptError> {
    match atom {
        ConditionAtom::Relation {
            subject,
            relation,
            object,
        } => relation_holds(world, subject, *relation, object),
        ConditionAtom::State(p) => state_holds(world, p),
        ConditionAtom::Not(inner) => atom_holds(world, inner).map(|b| !b),
    }
}

/// Every true relation between scene objects (except `Outside`) followed by
/// every true object state, in a fixed order.
pub fn current_conditions(world: &World) -> Vec<ConditionAtom> {
    let objects: Vec<_> = world.objects().collect();
    let mut atoms = Vec::new();
    for s in &objects {
        for o in &objects {
            if s.id == o.id {
                continue;
            }
            let (sb, ob) = (s.aabb(), o.aabb());
            for rel in ENUMERATED_RELATIONS {
                if boxes_related(&sb, rel, &ob) {
                    atoms.push(ConditionAtom::Relation {
                        subject: s.id.clone(),
                        relation: rel,
                        object: o.id.clone(),
                    });
                }
            }
        }
    }
    if let Some(held) = world.attached() {
        atoms.push(ConditionAtom::grasping(held.clone()));
    }
    for o in &objects {
        let id = || o.id.clone();
        if o.is_open() {
            atoms.push(ConditionAtom::State(ObjectStatePredicate::Open(id())));
        }
        if o.is_closed() {
            atoms.push(ConditionAtom::State(ObjectStatePredicate::Closed(id())));
        }
        if o.is_tilted() {
            atoms.push(ConditionAtom::State(ObjectStatePredicate::Tilted(id())));
        }
        if o.is_folded() {
            atoms.push(ConditionAtom::State(ObjectStatePredicate::Folded(id())));
        }
    }
    atoms
}

/// Conjunction check; `unmet` keeps the input order.
pub fn atoms_satisfied(world: &World, atoms: &[ConditionAtom]) -> Result<(bool, Vec<ConditionAtom>), PerceptError> {
    let mut unmet = Vec::new();
    for a in atoms {
        if !atom_holds(world, a)? {
            unmet.push(a.clone());
        }
    }
    Ok((unmet.is_empty(), unmet))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{oid, vec3, Pose, Vec3};
    use crate::world::SceneObject;

    fn world(objs: &[(&str, Vec3, f64)]) -> World {
        let mut w = World::new(Pose::from_position(vec3(5.0, 5.0, 5.0)), 0);
        for (id, c, side) in objs {
            w.insert_object(SceneObject::cuboid(oid(id), Vec3::repeat(*side), Pose::from_position(*c), true).unwrap())
                .unwrap();
        }
        w
    }

    #[test]
    fn stacked_cubes() {
        let w = world(&[("a", vec3(0.0, 0.0, 1.0), 1.0), ("b", Vec3::zeros(), 1.0)]);
        let (a, b) = (oid("a"), oid("b"));
        assert!(relation_holds(&w, &a, SpatialRelation::Above, &b).unwrap());
        assert!(relation_holds(&w, &b, SpatialRelation::Below, &a).unwrap());
        assert!(!relation_holds(&w, &b, SpatialRelation::Above, &a).unwrap());
    }

    #[test]
    fn nested_cubes() {
        let w = world(&[("small", Vec3::zeros(), 0.2), ("big", Vec3::zeros(), 1.0)]);
        let (s, b) = (oid("small"), oid("big"));
        assert!(relation_holds(&w, &s, SpatialRelation::Inside, &b).unwrap());
        assert!(!relation_holds(&w, &s, SpatialRelation::Outside, &b).unwrap());
        assert!(relation_holds(&w, &b, SpatialRelation::Outside, &s).unwrap());
    }

    #[test]
    fn front_is_negative_y() {
        let w = world(&[("a", vec3(0.0, -1.0, 0.0), 0.5), ("b", Vec3::zeros(), 0.5)]);
        assert!(relation_holds(&w, &oid("a"), SpatialRelation::InFrontOf, &oid("b")).unwrap());
        assert!(!relation_holds(&w, &oid("b"), SpatialRelation::InFrontOf, &oid("a")).unwrap());
    }

    #[test]
    fn unknown_objects_are_errors() {
        let w = world(&[("a", Vec3::zeros(), 0.5)]);
        assert_eq!(
            relation_holds(&w, &oid("a"), SpatialRelation::Above, &oid("ghost")),
            Err(PerceptError::UnknownObject(oid("ghost")))
        );
    }

    #[test]
    fn satisfied_lists_unmet_in_order() {
        let w = world(&[("a", vec3(0.0, 0.0, 1.0), 1.0), ("b", Vec3::zeros(), 1.0)]);
        assert_eq!(atoms_satisfied(&w, &[]).unwrap(), (true, vec![]));
        let above: ConditionAtom = "a above b".parse().unwrap();
        let grasp = ConditionAtom::grasping(oid("a"));
        assert_eq!(
            atoms_satisfied(&w, &[above.clone(), grasp.clone()]).unwrap(),
            (false, vec![grasp.clone()])
        );
        assert_eq!(atoms_satisfied(&w, &[grasp.clone().negate()]).unwrap(), (true, vec![]));
    }

    #[test]
    fn enumeration_skips_outside() {
        let w = world(&[("a", vec3(0.0, 0.0, 1.0), 1.0), ("b", Vec3::zeros(), 1.0)]);
        let atoms = current_conditions(&w);
        assert_eq!(atoms.len(), 2);
        assert!(atoms.iter().all(|a| !matches!(
            a,
            ConditionAtom::Relation {
                relation: SpatialRelation::Outside,
                ..
            }
        )));
    }
}
