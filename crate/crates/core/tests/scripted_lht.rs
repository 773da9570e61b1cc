use std::collections::BTreeSet;

use condmp_core::percept::current_conditions;
use condmp_core::world::{load_scene, scripted_demo, World};
use condmp_core::{oid, parse_task_name, ConditionAtom};

fn scene(name: &str) -> World {
    load_scene(format!("{}/data/scenes/{name}.json", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn run(scene_name: &str, tasks: &[&str]) -> Vec<(World, World, BTreeSet<String>)> {
    let mut w = scene(scene_name);
    let mut out = Vec::new();
    for t in tasks {
        let demo = scripted_demo(&w, &parse_task_name(t).unwrap()).unwrap_or_else(|e| panic!("{t}: {e}"));
        let pairs = demo
            .collision_log
            .iter()
            .flat_map(|c| c.report.iter().map(|p| format!("{}-{}", p.first(), p.second())))
            .collect();
        w = demo.post_world.clone();
        out.push((demo.pre_world, demo.post_world, pairs));
    }
    out
}

fn show(label: &str, steps: &[(World, World, BTreeSet<String>)]) {
    for (i, (pre, post, pairs)) in steps.iter().enumerate() {
        let a: BTreeSet<String> = current_conditions(pre).iter().map(ConditionAtom::to_string).collect();
        let b: BTreeSet<String> = current_conditions(post).iter().map(ConditionAtom::to_string).collect();
        eprintln!("{label}[{i}] added {:?}", b.difference(&a).collect::<Vec<_>>());
        eprintln!("{label}[{i}] removed {:?}", a.difference(&b).collect::<Vec<_>>());
        eprintln!("{label}[{i}] collisions {pairs:?}");
    }
}

#[test]
fn lht1_put_bottle_in_microwave() {
    let s = run("kitchen_open", &["grasp bottle", "moveinto bottle microwave", "release bottle", "close microwave"]);
    show("lht1", &s);
    assert_eq!(s[0].1.attached(), Some(&oid("bottle")));
    let end = &s[3].1;
    assert!(end.get(&oid("microwave")).unwrap().is_closed());
    assert!(end.attached().is_none());
}

#[test]
fn lht2_open_then_move() {
    let s = run("kitchen", &["open microwave", "grasp bottle", "move bottle", "release bottle"]);
    show("lht2", &s);
    assert!(s[0].1.get(&oid("microwave")).unwrap().is_open());
}

#[test]
fn lht3_fold_and_stack() {
    let s = run("kitchen", &["fold towel", "grasp bottle", "moveontop bottle box", "release bottle"]);
    show("lht3", &s);
    assert!(s[0].1.get(&oid("towel")).unwrap().is_folded());
}

#[test]
fn lht4_front_and_tilt() {
    let s = run("kitchen", &["grasp bottle", "moveinfront bottle microwave", "tilt bottle", "release bottle"]);
    show("lht4", &s);
    assert!(s[2].1.get(&oid("bottle")).unwrap().is_tilted());
}
