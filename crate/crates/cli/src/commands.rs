use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use abr5g_core::experiment::{self, evaluate, write_atomic, write_evaluation, Aggregates, ExperimentPlan, TrainPlan};
use abr5g_core::rl::{train_with, Checkpoint, EpochStats, TrainOutput, Trainer};
use abr5g_core::scenarios::Scenario;
use abr5g_core::traces::{mahimahi, parse_csv, synthesize, write_csv};
use abr5g_core::{Error, SyntheticSpec, ThroughputTrace};
use log::{info, warn};

use crate::error::{CliError, Result};
use crate::{EvalArgs, IngestArgs, ReportArgs, SynthArgs, TrainArgs};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e).into())
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).map_err(CliError::from)
}

fn base_dir(file: &Path) -> PathBuf {
    file.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trace".into())
}

fn summary_line(trace: &ThroughputTrace, out: &Path) -> String {
    format!(
        "{}: {:.1} s, mean {:.0} kbps, min {:.0} kbps, max {:.0} kbps -> {}",
        trace.name(),
        trace.duration_s(),
        trace.mean_kbps(),
        trace.min_kbps(),
        trace.max_kbps(),
        out.display()
    )
}

/// Expands directories to their files with extension `ext`, sorted.
fn expand(paths: &[PathBuf], ext: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let entries = fs::read_dir(p).map_err(|e| Error::io(p, e))?;
            let mut found = Vec::new();
            for entry in entries {
                let path = entry.map_err(|e| Error::io(p, e))?.path();
                if path.is_file() && path.extension().is_some_and(|x| x == ext) {
                    found.push(path);
                }
            }
            if found.is_empty() {
                warn!("no *.{ext} files in {}", p.display());
            }
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::Usage("no input traces".into()));
    }
    Ok(files)
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let ext = if args.from_mahimahi { "mahi" } else { "csv" };
    let files = expand(&args.paths, ext)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    for path in &files {
        let text = read(path)?;
        let name = stem(path);
        let trace = if args.from_mahimahi {
            let ts = mahimahi::parse(&text).map_err(|e| CliError::in_file(path, e))?;
            mahimahi::from_mahimahi(&ts, args.bucket_ms, None, args.mtu).map_err(|e| CliError::in_file(path, e))?
        } else {
            parse_csv(&text).map_err(|e| CliError::in_file(path, e))?
        };
        let trace = trace.with_name(name.clone());
        let out = if args.to_mahimahi {
            let out = args.out.join(format!("{name}.mahi"));
            write(&out, mahimahi::render(&mahimahi::to_mahimahi(&trace, args.mtu)).as_bytes())?;
            out
        } else {
            let out = args.out.join(format!("{name}.csv"));
            write(&out, write_csv(&trace).as_bytes())?;
            out
        };
        println!("{}", summary_line(&trace, &out));
    }
    Ok(())
}

fn parse_preset(name: &str) -> Result<Scenario> {
    serde_json::from_value(serde_json::Value::String(name.into()))
        .map_err(|_| CliError::Usage(format!("unknown preset `{name}`")))
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let (prefix, spec) = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let spec = SyntheticSpec::from_json(&read(path)?).map_err(|e| CliError::in_file(path, e))?;
            (stem(path), spec)
        }
        (None, Some(p)) => {
            let scenario = parse_preset(p)?;
            (scenario.as_str().to_string(), scenario.spec(0))
        }
        (None, None) => return Err(CliError::Usage("need --config or --preset".into())),
    };
    let base = args.seed.unwrap_or(spec.seed);
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    for i in 0..args.count {
        let spec = spec.with_seed(base.wrapping_add(i as u64));
        let name = format!("{prefix}_{i:03}");
        let trace = synthesize(&spec)?.with_name(name.clone());
        let out = args.out.join(format!("{name}.csv"));
        write(&out, write_csv(&trace).as_bytes())?;
        println!("{}", summary_line(&trace, &out));
    }
    Ok(())
}

fn print_aggregates(agg: &Aggregates) {
    let Some(reference) = &agg.reference else {
        println!("no reference algorithm; scores are raw");
        return;
    };
    let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{:+.1}%", v * 100.0));
    println!("{reference} vs best conventional: {}", pct(agg.vs_best_conventional));
    println!("{reference} vs learned baseline: {}", pct(agg.vs_baseline));
    for gap in &agg.per_algorithm {
        println!("  vs {}: {} over {} groups", gap.algorithm, pct(Some(gap.mean_improvement)), gap.groups);
    }
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let mut plan = ExperimentPlan::load(&args.plan).map_err(|e| CliError::in_file(&args.plan, e))?;
    if let Some(seed) = args.seed {
        plan.seed = seed;
    }
    let base = base_dir(&args.plan);
    let out = args.out.clone().unwrap_or_else(|| base.join(&plan.out));
    let eval = evaluate(&plan, &base, args.jobs)?;
    write_evaluation(&eval, &out)?;
    for w in &eval.warnings {
        warn!("{w}");
    }
    println!("{} rows -> {}", eval.rows.len(), out.display());
    print_aggregates(&eval.summary.aggregates);
    match eval.failed() {
        0 => Ok(()),
        failed => Err(CliError::Partial {
            failed,
            total: eval.rows.len(),
        }),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn train_log(log: &[EpochStats]) -> String {
    let mut out =
        String::from("epoch,entropy_weight,samples,mean_reward,mean_entropy,mean_advantage,critic_loss,validation_qoe\n");
    for s in log {
        let u = s.update.as_ref();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.epoch,
            s.entropy_weight,
            u.map(|u| u.samples.to_string()).unwrap_or_default(),
            opt(u.map(|u| u.mean_reward)),
            opt(u.map(|u| u.mean_entropy)),
            opt(u.map(|u| u.mean_advantage)),
            opt(u.map(|u| u.critic_loss)),
            opt(s.validation_qoe),
        );
    }
    out
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::from)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn write_training(out: &Path, plan: &TrainPlan, start_epoch: usize, result: &TrainOutput) -> Result<()> {
    write(&out.join("best.ckpt"), &result.best.encode()?)?;
    write(&out.join("last.ckpt"), &result.last.encode()?)?;
    let best = &result.summaries[result.best_index];
    write(
        &out.join("checkpoints.json"),
        &json_bytes(&serde_json::json!({
            "start_epoch": start_epoch,
            "best_epoch": best.epoch,
            "best_validation_qoe": best.validation_qoe,
            "checkpoints": result.summaries,
        }))?,
    )?;
    write(&out.join("train_log.csv"), train_log(&result.log).as_bytes())?;
    write(&out.join("config.json"), &json_bytes(plan)?)
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let mut plan = TrainPlan::load(&args.config).map_err(|e| CliError::in_file(&args.config, e))?;
    if let Ok(mut entries) = fs::read_dir(&args.out) {
        if entries.next().is_some() && !args.force {
            return Err(CliError::Usage(format!(
                "output directory {} is not empty; pass --force to overwrite",
                args.out.display()
            )));
        }
    } else if args.out.exists() {
        return Err(CliError::Usage(format!("{} is not a directory", args.out.display())));
    }
    let trainer = match &args.resume {
        Some(path) => {
            let ckpt = Checkpoint::read(path)?;
            if ckpt.meta.sim != plan.sim || ckpt.meta.ladder != plan.ladder {
                warn!("{}: sim or ladder differs from the config; using the checkpoint's", path.display());
            }
            plan.sim = ckpt.meta.sim.clone();
            plan.ladder = ckpt.meta.ladder.clone();
            Trainer::resume(&ckpt, args.epochs)?
        }
        None => {
            if let Some(e) = args.epochs {
                plan.train.epochs = e;
            }
            if let Some(s) = args.seed {
                plan.train.seed = s;
            }
            Trainer::new(&plan.ladder, &plan.sim, &plan.train)?
        }
    };
    plan.train = trainer.config().clone();
    let start_epoch = trainer.epoch();
    let data = plan.data(&base_dir(&args.config))?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    info!(
        "training epochs {start_epoch}..{} on {} traces ({} mix, {} validation)",
        plan.train.epochs,
        data.train.len(),
        data.mix.len(),
        data.validation.len()
    );
    let result = train_with(trainer, &data, &mut |ckpt| {
        info!("epoch {}: validation QoE {}", ckpt.meta.epoch, opt(ckpt.meta.validation_qoe));
        Ok(())
    })?;
    write_training(&args.out, &plan, start_epoch, &result)?;
    let best = &result.summaries[result.best_index];
    println!(
        "trained to epoch {}; best epoch {} (validation QoE {}) -> {}",
        result.last.meta.epoch,
        best.epoch,
        opt(best.validation_qoe),
        args.out.display()
    );
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let rep = experiment::report(&args.dir, args.reference.as_deref())?;
    println!("{} rows -> {}", rep.rows.len(), args.dir.join("normalized.csv").display());
    print_aggregates(&rep.aggregates);
    Ok(())
}
