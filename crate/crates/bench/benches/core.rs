use std::hint::black_box;

use condmp_core::exec::{ExecConfig, Executor, FixedSource};
use condmp_core::library::{ground_truth, scene, DemoLibrary};
use condmp_core::llm::{generate_for_task, parse_condition, render_condition, GenOptions};
use condmp_core::percept::current_conditions;
use condmp_core::{dmp, parse_task_name, Verb};
use criterion::{criterion_group, criterion_main, Criterion};

fn dmp_benches(c: &mut Criterion) {
    let lib = DemoLibrary::record().unwrap();
    let demo = condmp_core::world::scripted_demo(&scene("kitchen_open").unwrap(), &parse_task_name("grasp bottle").unwrap())
        .unwrap()
        .trajectory;
    c.bench_function("dmp_fit_grasp", |b| b.iter(|| dmp::fit(black_box(&demo), 30).unwrap()));
    let model = &lib.record_for(Verb::Grasp).unwrap().dmp;
    c.bench_function("dmp_rollout_grasp", |b| {
        b.iter(|| dmp::rollout(model, model.start(), black_box(model.goal()), model.demo_duration_s, 100.0).unwrap())
    });
}

fn percept_benches(c: &mut Criterion) {
    let w = scene("kitchen").unwrap();
    c.bench_function("current_conditions_kitchen", |b| b.iter(|| current_conditions(black_box(&w))));
}

fn condition_benches(c: &mut Criterion) {
    let gt = ground_truth();
    let text = render_condition(&gt[7]);
    let name = parse_task_name(&gt[7].task_name).unwrap();
    c.bench_function("parse_condition", |b| b.iter(|| parse_condition(black_box(&text), &name).condition.unwrap()));
    let mock = condmp_core::bench::mock_backend();
    let task = parse_task_name("moveinto mug microwave").unwrap();
    c.bench_function("generate_condition_mock", |b| {
        b.iter(|| generate_for_task(&mock, black_box(&task), &gt, GenOptions::default()).unwrap())
    });
}

fn exec_benches(c: &mut Criterion) {
    let lib = DemoLibrary::record().unwrap();
    let src = FixedSource::new(ground_truth());
    let exec = Executor::new(&lib, &src, ExecConfig::default());
    let start = scene("kitchen").unwrap();
    let task = parse_task_name("move bottle").unwrap();
    c.bench_function("run_task_move_with_spawned_grasp", |b| {
        b.iter(|| {
            let mut w = start.clone();
            exec.run_task(&mut w, black_box(&task))
        })
    });
}

criterion_group!(benches, dmp_benches, percept_benches, condition_benches, exec_benches);
criterion_main!(benches);
