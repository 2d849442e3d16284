//! Acceptance suite: one pass/fail line per criterion.
//!
//! `ABR5G_ACCEPTANCE=1,3,8` runs a subset.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use abr5g_core::abr::{AbrPolicy, Mpc, MpcParams, PolicyKind};
use abr5g_core::qoe::{chunk_reward, quality, session_qoe, session_qoe_legacy};
use abr5g_core::rl::{
    gradient_check, gradient_check_with, ActorCritic, Checkpoint, RlPolicy, TrainConfig, TrainData, Trainer,
};
use abr5g_core::scenarios::Scenario;
use abr5g_core::simulator::{chunk_size_bits, download_chunk, run_session, HISTORY_LEN};
use abr5g_core::traces::mahimahi::{bucket_rates, to_mahimahi};
use abr5g_core::traces::Sample;
use abr5g_core::{
    BitrateLadder, MetricId, Observation, QoeMetric, Representation, SessionRecord, SimConfig, StreamSession,
    ThroughputTrace, TraceSource,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ABR5G_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "qoe hand-check vectors", c1_qoe_vectors),
        (2, "downgrade-only smoothness never scores lower", c2_smoothness),
        (3, "simulator matches 1 ms packet oracle", c3_simulator),
        (4, "mpc equals exhaustive enumeration", c4_mpc),
        (5, "gradient check", c5_gradients),
        (6, "rl sanity convergence", c6_convergence),
        (7, "eval and train are byte-identical on rerun", c7_determinism),
        (8, "desk-scale policy vs baselines", c8_desk_scale),
        (9, "mahimahi round trip", c9_mahimahi),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t0 = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {id} PASS {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} FAIL {name}: {detail} ({secs:.1} s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

const P1080: usize = 5;
const P2160: usize = 7;
const P4320: usize = 9;

fn c1_qoe_vectors() -> Outcome {
    let l = BitrateLadder::uhd();
    let hd = QoeMetric::builtin(MetricId::Hd);
    let record = SessionRecord::from_pairs(&[(P1080, 0.0), (P2160, 0.5), (P1080, 0.0)]);
    let eq2 = session_qoe(&hd, &l, &record).map_err(|e| e.to_string())?;
    check(eq2 == 25.5, || format!("hd session {eq2}, want 25.5"))?;
    let clean = SessionRecord::from_pairs(&[(P1080, 0.0), (P2160, 0.0), (P1080, 0.0)]);
    let eq1 = session_qoe_legacy(&hd, &l, &clean).map_err(|e| e.to_string())?;
    check(eq1 == 25.0, || format!("symmetric-penalty session {eq1}, want 25.0"))?;

    let reward = |prev, cur, stall, mu| chunk_reward(&hd, &l, prev, cur, stall, mu).unwrap();
    check(reward(Some(P2160), P1080, 0.0, None) == 0.0, || "downgrade reward".into())?;
    check(reward(Some(P1080), P2160, 0.0, None) == 25.0, || "upgrade reward".into())?;
    check(reward(None, P4320, 1.0, Some(80.0)) == -30.0, || "stall reward".into())?;

    let log = QoeMetric::builtin(MetricId::Log);
    let top = quality(&log, &l, P4320).map_err(|e| e.to_string())?;
    check(top == 375f64.ln(), || format!("log top {top}"))?;
    check((top - 5.93).abs() < 0.01, || format!("log top {top} vs 5.93"))?;
    check(log.mu == 5.93, || format!("log mu {}", log.mu))?;

    let resolutions = [144, 240, 360, 480, 720, 1080, 1440, 2160, 2880, 4320];
    let tables: [(MetricId, f64, [f64; 10]); 3] = [
        (MetricId::Smartphone, 25.0, [1., 10., 25., 35., 42., 45., 47., 48., 49., 50.]),
        (MetricId::Tv, 45.0, [1., 8., 18., 24., 30., 35., 42., 46., 48., 50.]),
        (MetricId::Vr, 50.0, [1., 6., 14., 18., 25., 32., 38., 42., 46., 50.]),
    ];
    let mut entries = 0;
    for (id, mu, table) in tables {
        let m = QoeMetric::builtin(id);
        check(m.mu == mu, || format!("{id} mu {}", m.mu))?;
        for (rung, want) in table.iter().enumerate() {
            check(l.representations()[rung].resolution == resolutions[rung], || "ladder resolution".into())?;
            let got = quality(&m, &l, rung).map_err(|e| e.to_string())?;
            check(got == *want, || format!("{id} rung {rung}: {got} vs {want}"))?;
            entries += 1;
        }
    }
    for (id, mu) in [(MetricId::Lin, 37.5), (MetricId::Hd, 24.0)] {
        check(QoeMetric::builtin(id).mu == mu, || format!("{id} mu"))?;
    }
    Ok(format!("25.5 / 25.0 / ln 375 = {top:.4}; {entries} table entries verbatim"))
}

fn c2_smoothness() -> Outcome {
    let l = BitrateLadder::uhd();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut equal = 0;
    let sessions = 10_000;
    for i in 0..sessions {
        let metric = QoeMetric::builtin(MetricId::ALL[i % MetricId::ALL.len()]);
        let q = metric.qualities(&l).unwrap();
        let n = rng.random_range(1..60);
        let pairs: Vec<(usize, f64)> = (0..n)
            .map(|_| {
                let stall = if rng.random::<f64>() < 0.7 { 0.0 } else { rng.random::<f64>() * 5.0 };
                (rng.random_range(0..10), stall)
            })
            .collect();
        let record = SessionRecord::from_pairs(&pairs);
        let new = session_qoe(&metric, &l, &record).unwrap();
        let old = session_qoe_legacy(&metric, &l, &record).unwrap();
        let upgrades = pairs.windows(2).any(|w| q[w[1].0] > q[w[0].0]);
        check(new >= old, || format!("session {i}: {new} < {old}"))?;
        check((new == old) == !upgrades, || format!("session {i}: equality {} vs upgrades {upgrades}", new == old))?;
        equal += usize::from(new == old);
    }
    Ok(format!("{sessions} sessions, {equal} without upgrades scored equal"))
}

fn random_trace(rng: &mut ChaCha8Rng) -> ThroughputTrace {
    let mut t = 0;
    let mut samples = Vec::new();
    for i in 0..rng.random_range(1..10) {
        let rate = if i == 0 || rng.random::<f64>() < 0.85 {
            rng.random_range(300.0..150_000.0)
        } else {
            0.0
        };
        samples.push(Sample::new(t, rate));
        t += rng.random_range(20..3000);
    }
    ThroughputTrace::new("random", TraceSource::Synthetic, samples, t).unwrap()
}

/// Delivers one millisecond of link capacity at a time, with the trace
/// looping, and returns the end of the millisecond in which the payload
/// completes.
fn packet_sim(trace: &ThroughputTrace, start_s: f64, payload_bits: f64) -> f64 {
    let period_ms = trace.duration_ms();
    let rate_in_ms = |k: u64| {
        let within = k % period_ms;
        let s = trace.samples().iter().rev().find(|s| s.t_ms <= within).unwrap();
        s.throughput_kbps
    };
    let a = start_s * 1000.0;
    let mut k = a.floor() as u64;
    let mut got = rate_in_ms(k) * (k as f64 + 1.0 - a);
    while got < payload_bits {
        k += 1;
        got += rate_in_ms(k);
    }
    (k as f64 + 1.0 - a) / 1000.0
}

struct RandomPolicy(ChaCha8Rng);

impl AbrPolicy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn decide(&mut self, _: &Observation, ladder: &BitrateLadder) -> usize {
        self.0.random_range(0..ladder.len())
    }
}

fn c3_simulator() -> Outcome {
    let l = BitrateLadder::uhd();
    let cfg = SimConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let instances = 1000;
    for i in 0..instances {
        let trace = random_trace(&mut rng);
        let rung = rng.random_range(0..10);
        let cursor = rng.random_range(0.0..trace.duration_s());
        let mut s = StreamSession::starting_at(cursor);
        s.buffer_s = rng.random_range(0.0..cfg.buffer_capacity_s);
        let o = download_chunk(&mut s, &trace, &l, rung, &cfg).map_err(|e| e.to_string())?;
        let payload = chunk_size_bits(&l, rung, &cfg).unwrap() / cfg.payload_efficiency;
        let expect = cfg.rtt_s() + packet_sim(&trace, cursor + cfg.rtt_s(), payload);
        let err = (o.download_time_s - expect).abs();
        worst = worst.max(err);
        check(err <= 0.002, || format!("instance {i}: {} vs oracle {expect}", o.download_time_s))?;
        check(o.buffer_after_s <= cfg.buffer_capacity_s + 1e-9, || format!("instance {i}: buffer {}", o.buffer_after_s))?;
    }

    let mut decisions = 0;
    for seed in 0..50 {
        let trace = random_trace(&mut rng);
        let sim = SimConfig { total_chunks: 120, ..cfg.clone() };
        let run = run_session(&trace, &mut RandomPolicy(ChaCha8Rng::seed_from_u64(seed)), &l, &sim).unwrap();
        for obs in &run.observations {
            check(obs.buffer_s <= cfg.buffer_capacity_s, || format!("decision buffer {}", obs.buffer_s))?;
            decisions += 1;
        }
    }

    // 23.5 s buffered, 0.1 s download: 25.4 s after the chunk, one 2 s pause
    let sim = SimConfig {
        link_rtt_ms: 50,
        payload_efficiency: 1.0,
        ..cfg.clone()
    };
    let trace = ThroughputTrace::constant(4000.0, 60_000).unwrap();
    let mut s = StreamSession::new();
    s.buffer_s = 23.5;
    let o = download_chunk(&mut s, &trace, &l, 0, &sim).map_err(|e| e.to_string())?;
    check((o.download_time_s - 0.1).abs() < 1e-9, || format!("download {}", o.download_time_s))?;
    check(o.pause_s == 2.0, || format!("pause {}", o.pause_s))?;
    check((o.buffer_after_s - 23.4).abs() < 1e-9, || format!("buffer after {}", o.buffer_after_s))?;
    Ok(format!(
        "{instances} instances, worst gap {:.3} ms; {decisions} decisions within capacity; pause example holds",
        worst * 1000.0
    ))
}

/// Scores every rung sequence over the horizon with the prediction taken
/// as the harmonic mean of the last five throughputs.
fn enumerate_mpc(ladder: &BitrateLadder, obs: &Observation, horizon: usize, cfg: &SimConfig) -> usize {
    let recent = &obs.past_throughputs_kbps[HISTORY_LEN - 5..];
    let pred = recent.len() as f64 / recent.iter().map(|v| 1.0 / v).sum::<f64>();
    let metric = QoeMetric::builtin(MetricId::Hd);
    let q = metric.qualities(ladder).unwrap();
    let n = q.len();
    let depth = horizon.min(obs.chunks_remaining).max(1);
    let mut best = (f64::NEG_INFINITY, 0);
    for code in 0..n.pow(depth as u32) {
        let seq: Vec<usize> = (0..depth).map(|i| code / n.pow((depth - 1 - i) as u32) % n).collect();
        let mut buffer = obs.buffer_s;
        let mut prev = obs.last_rung.map(|r| q[r]);
        let mut total = 0.0;
        for &r in &seq {
            let dt = obs.next_chunk_bits[r] / (pred * 1000.0);
            let stall = (dt - buffer).max(0.0);
            buffer = (buffer - dt).max(0.0) + cfg.chunk_duration_s;
            while buffer > cfg.buffer_capacity_s + 1e-9 {
                buffer -= cfg.pause_s();
            }
            total += q[r] - metric.mu * stall - prev.map_or(0.0, |p: f64| (p - q[r]).max(0.0));
            prev = Some(q[r]);
        }
        if total > best.0 {
            best = (total, seq[0]);
        }
    }
    best.1
}

fn c4_mpc() -> Outcome {
    let uhd = BitrateLadder::uhd();
    let cfg = SimConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cases = 500;
    let mut by_rung = [0usize; 4];
    for i in 0..cases {
        let mut picks: Vec<usize> = (0..10).collect();
        while picks.len() > 4 {
            picks.remove(rng.random_range(0..picks.len()));
        }
        let ladder = BitrateLadder::new(picks.iter().map(|&r| uhd.representations()[r]).collect::<Vec<Representation>>())
            .map_err(|e| e.to_string())?;
        let horizon = rng.random_range(1..=3);
        let center = rng.random_range(100f64.ln()..60_000f64.ln()).exp();
        let mut past = [0.0; HISTORY_LEN];
        for v in &mut past {
            *v = center * rng.random_range(0.5..1.5);
        }
        let obs = Observation {
            buffer_s: rng.random_range(0.0..1.0f64).powi(2) * cfg.buffer_capacity_s,
            past_throughputs_kbps: past,
            past_download_times_s: [1.0; HISTORY_LEN],
            next_chunk_bits: (0..4).map(|r| chunk_size_bits(&ladder, r, &cfg).unwrap()).collect(),
            chunks_remaining: rng.random_range(1..6),
            last_rung: if rng.random::<f64>() < 0.8 { Some(rng.random_range(0..4)) } else { None },
        };
        let mut mpc = Mpc::new(MpcParams {
            horizon,
            ..MpcParams::default()
        });
        let got = mpc.decide(&obs, &ladder);
        let want = enumerate_mpc(&ladder, &obs, horizon, &cfg);
        check(got == want, || format!("case {i}: mpc {got}, enumeration {want}"))?;
        by_rung[got] += 1;
    }
    Ok(format!("{cases} cases exact; first-rung spread {by_rung:?}"))
}

fn c5_gradients() -> Outcome {
    let arch = TrainConfig::default().architecture(10);
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let net = ActorCritic::<f64>::new(arch, 100 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input: Vec<f64> = (0..arch.input_dim()).map(|_| rng.random_range(0.0..1.5)).collect();
        let action = rng.random_range(0..10);
        let report = gradient_check(&net, &input, action, 100, 1e-4, seed).map_err(|e| e.to_string())?;
        check(report.coordinates.len() >= 200, || format!("net {seed}: {} coordinates", report.coordinates.len()))?;
        check(report.passed(), || format!("net {seed}: max relative error {:e}", report.max_rel_error))?;
        worst = worst.max(report.max_rel_error);

        let flipped = gradient_check_with(&net, &input, action, 100, 1e-4, seed, &|_, g| {
            g.iter_mut().for_each(|x| *x = -*x)
        })
        .map_err(|e| e.to_string())?;
        check(!flipped.passed(), || format!("net {seed}: sign-flipped gradient passed"))?;
    }
    Ok(format!("5 networks x 200 coordinates, worst relative error {worst:.2e}; sign flip rejected"))
}

fn c6_convergence() -> Outcome {
    let arch = TrainConfig::default().architecture(2);
    let cfg = TrainConfig::default();
    let run = abr5g_core::rl::bandit(arch, &[1.0, 0.0], &cfg, 0.0, 0, 0.9, 5000, 6).map_err(|e| e.to_string())?;
    let updates = run.updates_to_target.ok_or_else(|| format!("bandit stuck at {:?}", run.final_probabilities))?;

    let sim = SimConfig::default();
    let trace = ThroughputTrace::constant(200_000.0, 1_800_000).unwrap();
    let data = TrainData {
        train: vec![trace.clone()],
        mix: vec![],
        validation: vec![trace.clone()],
    };
    let tc = TrainConfig {
        epochs: 2000,
        workers: 4,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(&BitrateLadder::uhd(), &sim, &tc).map_err(|e| e.to_string())?;
    let mut mean_rung = 0.0;
    while !trainer.is_done() {
        trainer.run_epoch(&data).map_err(|e| e.to_string())?;
        if trainer.epoch() % 50 == 0 {
            let mut policy = RlPolicy::from_checkpoint(&trainer.checkpoint(None), &sim).map_err(|e| e.to_string())?;
            let ladder = policy.ladder().clone();
            mean_rung = run_session(&trace, &mut policy, &ladder, &sim).unwrap().record.mean_rung();
            if mean_rung >= 8.0 {
                break;
            }
        }
    }
    check(mean_rung >= 8.0, || format!("mean rung {mean_rung} after {} epochs", trainer.epoch()))?;
    Ok(format!(
        "bandit P > 0.9 after {updates} updates; 200 Mbps mean rung {mean_rung:.2} at epoch {}",
        trainer.epoch()
    ))
}

fn abr5g(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_abr5g"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("abr5g {args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr))
    })
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(files_under(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn same_tree(a: &Path, b: &Path) -> Result<usize, String> {
    let (fa, fb) = (files_under(a), files_under(b));
    let rel = |fs: &[PathBuf], root: &Path| fs.iter().map(|f| f.strip_prefix(root).unwrap().to_path_buf()).collect::<Vec<_>>();
    check(rel(&fa, a) == rel(&fb, b), || format!("{} and {} hold different files", a.display(), b.display()))?;
    for (x, y) in fa.iter().zip(&fb) {
        check(fs::read(x).unwrap() == fs::read(y).unwrap(), || format!("{} differs", x.display()))?;
    }
    Ok(fa.len())
}

const DETERMINISM_TRAIN: &str = r#"{
  "train": {"epochs": 6, "workers": 3, "episode_chunks": 40, "filters": 32, "hidden": 32, "checkpoint_every": 3, "seed": 9},
  "traces": [{"name": "drive", "preset": "driving", "window": {"duration_s": 600}},
             {"name": "rural", "preset": "rural_train", "window": {"duration_s": 600}}],
  "mix": [{"name": "lte", "preset": "lte"}],
  "validation": [{"name": "val", "preset": "concert", "seed": 50, "window": {"duration_s": 300}}]
}"#;

const DETERMINISM_PLAN: &str = r#"{
  "scenarios": [{"name": "drive", "preset": "driving", "seed": 1, "window": {"duration_s": 240}},
                {"name": "rural", "preset": "rural_train", "seed": 2, "window": {"duration_s": 240}}],
  "algorithms": [{"name": "pensieve_5g", "policy": {"kind": "rl", "checkpoint": "t1/best.ckpt"}},
                 {"name": "bb", "policy": {"kind": "bb"}},
                 {"name": "rb", "policy": {"kind": "rb"}},
                 {"name": "bola", "policy": {"kind": "bola"}},
                 {"name": "mpc", "policy": {"kind": "mpc"}},
                 {"name": "robust_mpc", "policy": {"kind": "robust_mpc"}}],
  "metrics": ["lin", "log", "hd", "smartphone", "tv", "vr"],
  "sim": {"total_chunks": 100},
  "reference": "pensieve_5g",
  "seed": 21
}"#;

fn c7_determinism() -> Outcome {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    fs::write(dir.join("train.json"), DETERMINISM_TRAIN).unwrap();
    fs::write(dir.join("plan.json"), DETERMINISM_PLAN).unwrap();
    abr5g(dir, &["train", "--config", "train.json", "--out", "t1"])?;
    abr5g(dir, &["train", "--config", "train.json", "--out", "t2"])?;
    let train_files = same_tree(&dir.join("t1"), &dir.join("t2"))?;
    abr5g(dir, &["eval", "--plan", "plan.json", "--out", "e1"])?;
    abr5g(dir, &["eval", "--plan", "plan.json", "--out", "e2", "--jobs", "3"])?;
    let eval_files = same_tree(&dir.join("e1"), &dir.join("e2"))?;
    Ok(format!("train: {train_files} files identical; eval: {eval_files} files identical"))
}

/// Epochs, workers and validation interval of the desk-scale runs.
const DESK_EPOCHS: usize = 4000;
const DESK_WORKERS: usize = 2;
const DESK_CHECKPOINT_EVERY: usize = 250;

fn desk_data() -> TrainData {
    let mut train = Vec::new();
    for s in Scenario::STANDALONE {
        for seed in 0..4 {
            train.push(s.synthesize(seed).unwrap());
        }
    }
    TrainData {
        train,
        mix: (0..4).map(|s| Scenario::Lte.synthesize(s).unwrap()).collect(),
        validation: Scenario::STANDALONE.iter().map(|s| s.synthesize(500).unwrap()).collect(),
    }
}

fn desk_train(ladder: &BitrateLadder, sim: &SimConfig, cfg: TrainConfig, data: &TrainData) -> Result<Checkpoint, String> {
    let cfg = TrainConfig {
        epochs: DESK_EPOCHS,
        workers: DESK_WORKERS,
        checkpoint_every: DESK_CHECKPOINT_EVERY,
        ..cfg
    };
    let out = abr5g_core::rl::train(data, ladder, sim, &cfg).map_err(|e| e.to_string())?;
    Ok(out.best)
}

fn hd_score(kind_or_policy: &mut dyn AbrPolicy, ladder: &BitrateLadder, trace: &ThroughputTrace, sim: &SimConfig) -> f64 {
    let run = run_session(trace, kind_or_policy, ladder, sim).unwrap();
    session_qoe(&QoeMetric::builtin(MetricId::Hd), ladder, &run.record).unwrap()
}

fn c8_desk_scale() -> Outcome {
    let sim = SimConfig::default();
    let uhd = BitrateLadder::uhd();
    let data = desk_data();
    let best = desk_train(&uhd, &sim, TrainConfig::default(), &data)?;
    let (legacy, legacy_sim) = TrainConfig::original_setting();
    let original = desk_train(&legacy, &legacy_sim, TrainConfig::original(), &data)?;

    let baselines = [
        PolicyKind::Bb(Default::default()),
        PolicyKind::Rb(Default::default()),
        PolicyKind::Bola(Default::default()),
        PolicyKind::Mpc {
            horizon: 5,
            metric: MetricId::Hd,
        },
        PolicyKind::RobustMpc {
            horizon: 5,
            metric: MetricId::Hd,
        },
    ];
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for scenario in Scenario::EVALUATION {
        let trace = scenario.synthesize(1000).unwrap();
        let mut policy = RlPolicy::from_checkpoint(&best, &sim).map_err(|e| e.to_string())?;
        let ladder = policy.ladder().clone();
        let rl = hd_score(&mut policy, &ladder, &trace, &sim);
        let (mut top, mut top_name) = (f64::NEG_INFINITY, "");
        for kind in &baselines {
            let (mut p, l) = kind.build(&uhd, &sim).map_err(|e| e.to_string())?;
            let q = hd_score(p.as_mut(), &l, &trace, &sim);
            if q > top {
                (top, top_name) = (q, kind.label());
            }
        }
        let ratio = rl / top;
        lines.push(format!("{} {ratio:.3} of {top_name}", scenario.as_str()));
        if !(rl >= 0.95 * top) {
            failures.push(format!("{}: {rl:.0} < 0.95 x {top_name} {top:.0}", scenario.as_str()));
        }
        if scenario == Scenario::NrDcWalking {
            let mut old = RlPolicy::from_checkpoint(&original, &sim).map_err(|e| e.to_string())?;
            let old_ladder = old.ladder().clone();
            let old_q = hd_score(&mut old, &old_ladder, &trace, &sim);
            lines.push(format!("nr_dc original-config {old_q:.0} vs {rl:.0}"));
            if !(rl > old_q) {
                failures.push(format!("nr_dc: {rl:.0} does not exceed original-config {old_q:.0}"));
            }
        }
    }
    let summary = format!(
        "best epoch {} (validation {:.0}); {}",
        best.meta.epoch,
        best.meta.validation_qoe.unwrap_or(f64::NAN),
        lines.join(", ")
    );
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", failures.join("; ")))
    }
}

fn c9_mahimahi() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_packets: f64 = 0.0;
    for i in 0..100 {
        let bucket_ms = [100u64, 500, 1000][i % 3];
        let n = rng.random_range(1..40);
        let mut rates: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < 0.1 { 0.0 } else { rng.random_range(0.0..150_000.0) })
            .collect();
        rates[0] = rates[0].max(100.0);
        let trace = ThroughputTrace::from_rates("r", TraceSource::Synthetic, bucket_ms, &rates).unwrap();
        let back = bucket_rates(&to_mahimahi(&trace, 1500), bucket_ms, Some(trace.duration_ms()), 1500)
            .map_err(|e| e.to_string())?;
        check(back.len() == rates.len(), || format!("trace {i}: {} buckets, want {}", back.len(), rates.len()))?;
        let packet_kbps = 12_000.0 / bucket_ms as f64;
        for (b, (want, got)) in rates.iter().zip(&back).enumerate() {
            let packets = (want - got).abs() / packet_kbps;
            worst_packets = worst_packets.max(packets);
            check(packets <= 1.0 + 1e-9, || format!("trace {i} bucket {b}: {got} vs {want}"))?;
        }
    }
    Ok(format!("100 traces, worst bucket error {worst_packets:.3} packets"))
}
