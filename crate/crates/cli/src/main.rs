use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use condmp_core::bench::{
    self, mock_backend, parse_json, render, run_bench, run_lht_suite, Arm, BenchConfig, Format, LhtCase,
};
use condmp_core::cond::save_demo;
use condmp_core::dmp::{self, DEFAULT_N_BASIS};
use condmp_core::exec::{raw_rollout, ConditionSource, ExecConfig, Executor, FromEnvSource, LlmSource};
use condmp_core::library::{ground_truth, scene, DemoLibrary, LHT_SCRIPTS};
use condmp_core::llm::{generate_for_task, render_condition, ChatBackend, GenOptions, RemoteEndpoint};
use condmp_core::world::scripted_demo;
use condmp_core::{parse_task_name, Trajectory};

#[derive(Parser)]
#[command(name = "condmp", version, about = "Condition-guided movement primitives in a kinematic kitchen")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    /// Extracted from the recorded demonstrations.
    Env,
    /// A chat endpoint configured through LLM_API_URL, LLM_MODEL and LLM_API_KEY.
    Llm,
    /// Canned answers built from the hand-labelled conditions.
    Mock,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArmArg {
    NoCond,
    FromEnv,
    FromLlm,
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    Same,
    NovelObjects,
    NovelPrimitive,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => Format::Text,
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Record the scripted demonstrations and save one learned record per verb.
    Demo {
        #[arg(long, default_value = "demos")]
        out: PathBuf,
    },
    /// Fit a movement primitive to a trajectory file and report how well it
    /// reproduces it.
    Learn {
        trajectory: PathBuf,
        #[arg(long, default_value_t = DEFAULT_N_BASIS)]
        basis: usize,
        /// Where to write the fitted model.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the condition of a primitive task.
    Gencond {
        task: String,
        #[arg(long, value_enum, default_value = "mock")]
        source: Source,
        /// Ask relations and object states in two separate chats.
        #[arg(long)]
        two_chat: bool,
        /// Withhold examples of the task's own verb.
        #[arg(long)]
        exclude_same_verb: bool,
    },
    /// Run one primitive task and print its execution events.
    RunPt {
        task: String,
        #[arg(long, default_value = "kitchen")]
        scene: String,
        #[arg(long, value_enum, default_value = "from-env")]
        arm: ArmArg,
    },
    /// Success rates of the long-horizon scripts.
    RunLht {
        #[arg(long, value_enum, default_value = "all")]
        case: CaseArg,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Run every suite and write tables, episode reports and traces.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render a JSON result table.
    Report {
        table: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Demo { out } => demo(&out),
        Command::Learn { trajectory, basis, out } => learn(&trajectory, basis, out.as_deref()),
        Command::Gencond {
            task,
            source,
            two_chat,
            exclude_same_verb,
        } => gencond(&task, source, GenOptions {
            two_chat,
            exclude_same_verb,
            ..GenOptions::default()
        }),
        Command::RunPt { task, scene, arm } => run_pt(&task, &scene, arm),
        Command::RunLht {
            case,
            episodes,
            seed,
            format,
        } => {
            let cases = match case {
                CaseArg::Same => vec![LhtCase::SameAsDemo],
                CaseArg::NovelObjects => vec![LhtCase::NovelObjects],
                CaseArg::NovelPrimitive => vec![LhtCase::NovelPrimitive],
                CaseArg::All => LhtCase::ALL.to_vec(),
            };
            let cfg = BenchConfig {
                episodes_per_cell: episodes,
                seed,
                ..BenchConfig::default()
            };
            let lib = DemoLibrary::record()?;
            let result = run_lht_suite(&cfg, &lib, &cases)?;
            print!("{}", render(&result.table, format.into())?);
            Ok(())
        }
        Command::Bench {
            config,
            seed,
            episodes,
            out,
        } => {
            let mut cfg = match config {
                Some(p) => BenchConfig::load(&p)?,
                None => BenchConfig::default(),
            };
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.episodes_per_cell = episodes.unwrap_or(cfg.episodes_per_cell);
            cfg.out = out.unwrap_or(cfg.out);
            let lib = DemoLibrary::record()?;
            let result = run_bench(&cfg, &lib)?;
            for table in [&result.primitive.table, &result.primitive_clean.table, &result.lht.table] {
                println!("{}", render(table, Format::Text)?);
            }
            eprintln!("wrote results to {}", cfg.out.display());
            Ok(())
        }
        Command::Report { table, format, out } => {
            let text = std::fs::read_to_string(&table).with_context(|| format!("reading {}", table.display()))?;
            let parsed = parse_json(&text)?;
            match out {
                Some(path) => bench::report(&parsed, format.into(), path)?,
                None => print!("{}", render(&parsed, format.into())?),
            }
            Ok(())
        }
    }
}

fn demo(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut done = std::collections::BTreeSet::new();
    for script in &LHT_SCRIPTS {
        let mut world = scene(script.scene)?;
        for task in script.tasks() {
            let demo = scripted_demo(&world, &task)?;
            world = demo.post_world.clone();
            if !done.insert(task.verb()) {
                continue;
            }
            let stem = task.verb().keyword();
            let traj = out.join(format!("{stem}.trajectory.json"));
            std::fs::write(&traj, serde_json::to_string(&demo.trajectory)?)?;
            let record = condmp_core::cond::DemoRecord::from_demo(&demo)?;
            save_demo(&record, out.join(format!("{stem}.json")))?;
            println!("{task}: {} samples, {:.2} s", demo.trajectory.len(), record.demo_duration);
        }
    }
    Ok(())
}

fn learn(path: &Path, basis: usize, out: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let demo: Trajectory = serde_json::from_str(&text)?;
    let model = dmp::fit(&demo, basis)?;
    let first = demo.first().pose.position;
    let last = demo.last().pose.position;
    let repro = dmp::rollout(&model, first, last, model.demo_duration_s, demo.sample_rate())?;
    let n = demo.len().min(repro.len());
    let sq: f64 = demo
        .positions()
        .zip(repro.positions())
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    println!("rmse {:.6} m over {n} samples", (sq / n as f64).sqrt());
    println!("endpoint error {:.6} m", (repro.last().pose.position - last).norm());
    if let Some(out) = out {
        std::fs::write(out, serde_json::to_string_pretty(&model)?)?;
    }
    Ok(())
}

fn backend_for(source: Source) -> Result<Box<dyn ChatBackend>> {
    Ok(match source {
        Source::Mock => Box::new(mock_backend()),
        Source::Llm => Box::new(RemoteEndpoint::from_env()?),
        Source::Env => bail!("the env source needs no chat backend"),
    })
}

fn gencond(task: &str, source: Source, opts: GenOptions) -> Result<()> {
    let task = parse_task_name(task)?;
    if let Source::Env = source {
        let lib = DemoLibrary::record()?;
        let cond = FromEnvSource { library: &lib }.condition(&task)?;
        print!("{}", render_condition(&cond));
        return Ok(());
    }
    let backend = backend_for(source)?;
    let outcome = generate_for_task(backend.as_ref(), &task, &ground_truth(), opts)?;
    match outcome.condition {
        Some(cond) => {
            eprintln!("{:?} after {} attempt(s)", outcome.verdict, outcome.attempts);
            print!("{}", render_condition(&cond));
            Ok(())
        }
        None => bail!(
            "generation failed ({:?}): {}",
            outcome.verdict,
            outcome.reason.unwrap_or_default()
        ),
    }
}

fn run_pt(task: &str, scene_name: &str, arm: ArmArg) -> Result<()> {
    let task = parse_task_name(task)?;
    let lib = DemoLibrary::record()?;
    let mut world = scene(scene_name)?;
    let cfg = ExecConfig::default();
    let env = FromEnvSource { library: &lib };
    let llm = LlmSource::new(mock_backend(), ground_truth(), GenOptions::default());
    let source: &dyn ConditionSource = match arm {
        ArmArg::NoCond => {
            raw_rollout(&mut world, &task, lib.record_for(task.verb())?, &cfg)?;
            let ok = bench::truth_for(&task)
                .map(|c| condmp_core::percept::atoms_satisfied(&world, &c.post_conditions))
                .transpose()?
                .is_some_and(|(ok, _)| ok);
            println!("{}", serde_json::json!({ "arm": Arm::NoCond, "success": ok, "time": world.sim_time() }));
            return Ok(());
        }
        ArmArg::FromEnv => &env,
        ArmArg::FromLlm => &llm,
    };
    let (trace, terminal) = Executor::new(&lib, source, cfg).run_task(&mut world, &task);
    for event in &trace.events {
        println!("{}", serde_json::to_string(event)?);
    }
    eprintln!("{terminal:?}");
    Ok(())
}
