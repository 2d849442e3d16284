//! Chunk-level playback simulation.
//!
//! Each chunk request costs one link RTT, then transfers
//! `chunk_bits / payload_efficiency` bits against the looped trace. Playback
//! drains the buffer while the download runs; if the buffer empties the
//! remainder of the download is a stall. Once the new chunk lands, the
//! client waits `pause_on_full_ms` at a time (playback continuing) until the
//! buffer is back under capacity.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::abr::AbrPolicy;
use crate::error::{Error, Result};
use crate::qoe::{BitrateLadder, SessionRecord};
use crate::traces::ThroughputTrace;

/// Number of past chunks visible to policies.
pub const HISTORY_LEN: usize = 8;

const BUFFER_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub chunk_duration_s: f64,
    pub buffer_capacity_s: f64,
    pub pause_on_full_ms: u64,
    pub link_rtt_ms: u64,
    pub payload_efficiency: f64,
    pub total_chunks: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            chunk_duration_s: 2.0,
            buffer_capacity_s: 24.0,
            pause_on_full_ms: 2000,
            link_rtt_ms: 80,
            payload_efficiency: 0.95,
            // 13 minutes of 2 s chunks
            total_chunks: 390,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("simulator: {what}")));
        if !(self.chunk_duration_s.is_finite() && self.chunk_duration_s > 0.0) {
            return bad("chunk_duration_s must be positive");
        }
        if !(self.buffer_capacity_s.is_finite() && self.buffer_capacity_s >= self.chunk_duration_s) {
            return bad("buffer_capacity_s must be at least one chunk");
        }
        if self.pause_on_full_ms == 0 {
            return bad("pause_on_full_ms must be positive");
        }
        if !(self.payload_efficiency > 0.0 && self.payload_efficiency <= 1.0) {
            return bad("payload_efficiency must lie in (0, 1]");
        }
        if self.total_chunks == 0 {
            return bad("total_chunks must be positive");
        }
        Ok(())
    }

    pub fn rtt_s(&self) -> f64 {
        self.link_rtt_ms as f64 / 1000.0
    }

    pub fn pause_s(&self) -> f64 {
        self.pause_on_full_ms as f64 / 1000.0
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeOverride {
    pub chunk: usize,
    pub rung: usize,
    pub bits: f64,
}

/// Per-chunk size overrides on top of the constant-bitrate default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<SizeOverride>", into = "Vec<SizeOverride>")]
pub struct ChunkManifest {
    sizes: HashMap<(usize, usize), f64>,
}

impl ChunkManifest {
    pub fn insert(&mut self, chunk: usize, rung: usize, bits: f64) {
        self.sizes.insert((chunk, rung), bits);
    }

    pub fn get(&self, chunk: usize, rung: usize) -> Option<f64> {
        self.sizes.get(&(chunk, rung)).copied()
    }
}

impl From<Vec<SizeOverride>> for ChunkManifest {
    fn from(v: Vec<SizeOverride>) -> Self {
        let mut m = Self::default();
        for o in v {
            m.insert(o.chunk, o.rung, o.bits);
        }
        m
    }
}

impl From<ChunkManifest> for Vec<SizeOverride> {
    fn from(m: ChunkManifest) -> Self {
        let mut v: Vec<_> = m
            .sizes
            .into_iter()
            .map(|((chunk, rung), bits)| SizeOverride { chunk, rung, bits })
            .collect();
        v.sort_by_key(|o| (o.chunk, o.rung));
        v
    }
}

/// Constant-bitrate chunk size: bitrate × 1000 × chunk duration.
pub fn chunk_size_bits(ladder: &BitrateLadder, rung: usize, config: &SimConfig) -> Result<f64> {
    Ok(ladder.bitrate_kbps(rung)? * 1000.0 * config.chunk_duration_s)
}

/// What a policy sees before choosing the next chunk's rung.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub buffer_s: f64,
    /// Oldest first; zero-padded at the front until enough chunks elapsed.
    pub past_throughputs_kbps: [f64; HISTORY_LEN],
    pub past_download_times_s: [f64; HISTORY_LEN],
    /// Size of the next chunk at every rung.
    pub next_chunk_bits: Vec<f64>,
    pub chunks_remaining: usize,
    pub last_rung: Option<usize>,
}

impl Observation {
    /// Most recent throughput samples, newest last, skipping padding.
    pub fn recent_throughputs(&self, window: usize) -> impl Iterator<Item = f64> + '_ {
        let filled: Vec<f64> = self
            .past_throughputs_kbps
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .collect();
        let skip = filled.len().saturating_sub(window);
        filled.into_iter().skip(skip)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkOutcome {
    pub index: usize,
    pub rung: usize,
    pub chunk_bits: f64,
    pub download_time_s: f64,
    pub rebuffer_s: f64,
    pub pause_s: f64,
    pub buffer_before_s: f64,
    pub buffer_after_s: f64,
}

impl ChunkOutcome {
    pub fn throughput_kbps(&self) -> f64 {
        self.chunk_bits / self.download_time_s / 1000.0
    }
}

/// Mutable playback state of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSession {
    pub clock_s: f64,
    pub buffer_s: f64,
    pub next_chunk: usize,
    pub last_rung: Option<usize>,
    /// Position in the (looped) trace.
    pub cursor_s: f64,
    start_cursor_s: f64,
    throughputs: [f64; HISTORY_LEN],
    download_times: [f64; HISTORY_LEN],
}

impl Default for StreamSession {
    fn default() -> Self {
        Self::new()
    }
}

impl StreamSession {
    pub fn new() -> Self {
        Self::starting_at(0.0)
    }

    /// A fresh session whose first request goes out `cursor_s` into the trace.
    pub fn starting_at(cursor_s: f64) -> Self {
        Self {
            clock_s: 0.0,
            buffer_s: 0.0,
            next_chunk: 0,
            last_rung: None,
            cursor_s,
            start_cursor_s: cursor_s,
            throughputs: [0.0; HISTORY_LEN],
            download_times: [0.0; HISTORY_LEN],
        }
    }

    pub fn reset(&mut self) {
        *self = Self::starting_at(self.start_cursor_s);
    }

    pub fn is_complete(&self, config: &SimConfig) -> bool {
        self.next_chunk >= config.total_chunks
    }

    fn record_history(&mut self, throughput_kbps: f64, download_s: f64) {
        self.throughputs.rotate_left(1);
        self.throughputs[HISTORY_LEN - 1] = throughput_kbps;
        self.download_times.rotate_left(1);
        self.download_times[HISTORY_LEN - 1] = download_s;
    }
}

/// Everything a session plays against: trace, ladder, timing and sizes.
#[derive(Debug, Clone, Copy)]
pub struct Playback<'a> {
    pub trace: &'a ThroughputTrace,
    pub ladder: &'a BitrateLadder,
    pub config: &'a SimConfig,
    pub manifest: Option<&'a ChunkManifest>,
}

impl<'a> Playback<'a> {
    pub fn new(trace: &'a ThroughputTrace, ladder: &'a BitrateLadder, config: &'a SimConfig) -> Self {
        Self {
            trace,
            ladder,
            config,
            manifest: None,
        }
    }

    pub fn with_manifest(mut self, manifest: &'a ChunkManifest) -> Self {
        self.manifest = Some(manifest);
        self
    }

    pub fn chunk_bits(&self, chunk: usize, rung: usize) -> Result<f64> {
        let cbr = chunk_size_bits(self.ladder, rung, self.config)?;
        Ok(self.manifest.and_then(|m| m.get(chunk, rung)).unwrap_or(cbr))
    }

    pub fn observe(&self, session: &StreamSession) -> Observation {
        let chunk = session.next_chunk.min(self.config.total_chunks.saturating_sub(1));
        let next_chunk_bits = (0..self.ladder.len())
            .map(|r| self.chunk_bits(chunk, r).expect("rung within ladder"))
            .collect();
        Observation {
            buffer_s: session.buffer_s,
            past_throughputs_kbps: session.throughputs,
            past_download_times_s: session.download_times,
            next_chunk_bits,
            chunks_remaining: self.config.total_chunks.saturating_sub(session.next_chunk),
            last_rung: session.last_rung,
        }
    }

    /// Downloads the next chunk at `rung` and advances the session.
    pub fn download_chunk(&self, session: &mut StreamSession, rung: usize) -> Result<ChunkOutcome> {
        if session.is_complete(self.config) {
            return Err(Error::SessionComplete);
        }
        let cfg = self.config;
        let index = session.next_chunk;
        let bits = self.chunk_bits(index, rung)?;
        let rtt = cfg.rtt_s();
        let transfer = self
            .trace
            .time_to_deliver(session.cursor_s + rtt, bits / cfg.payload_efficiency)?;
        let download = rtt + transfer;

        let buffer_before = session.buffer_s;
        let rebuffer = (download - buffer_before).max(0.0);
        let mut buffer = (buffer_before - download).max(0.0) + cfg.chunk_duration_s;
        let mut pause = 0.0;
        while buffer > cfg.buffer_capacity_s + BUFFER_EPS {
            buffer = (buffer - cfg.pause_s()).max(0.0);
            pause += cfg.pause_s();
        }

        session.clock_s += download + pause;
        session.cursor_s += download + pause;
        session.buffer_s = buffer;
        session.next_chunk += 1;
        session.last_rung = Some(rung);
        session.record_history(bits / download / 1000.0, download);

        Ok(ChunkOutcome {
            index,
            rung,
            chunk_bits: bits,
            download_time_s: download,
            rebuffer_s: rebuffer,
            pause_s: pause,
            buffer_before_s: buffer_before,
            buffer_after_s: buffer,
        })
    }

    /// Plays the whole video, consulting `policy` before every chunk.
    pub fn run_session<P: AbrPolicy + ?Sized>(&self, policy: &mut P) -> Result<SessionRun> {
        self.config.validate()?;
        let mut session = StreamSession::new();
        let mut run = SessionRun::default();
        while !session.is_complete(self.config) {
            let obs = self.observe(&session);
            let rung = policy.decide(&obs, self.ladder);
            if rung >= self.ladder.len() {
                return Err(Error::PolicyFault {
                    chunk: session.next_chunk,
                    reason: format!("{} chose rung {rung} on a {}-rung ladder", policy.name(), self.ladder.len()),
                });
            }
            let outcome = self.download_chunk(&mut session, rung)?;
            run.record.push(rung, outcome.rebuffer_s);
            run.outcomes.push(outcome);
            run.observations.push(obs);
        }
        run.final_clock_s = session.clock_s;
        run.final_buffer_s = session.buffer_s;
        Ok(run)
    }
}

/// Free-function form of [`Playback::download_chunk`].
pub fn download_chunk(
    session: &mut StreamSession,
    trace: &ThroughputTrace,
    ladder: &BitrateLadder,
    rung: usize,
    config: &SimConfig,
) -> Result<ChunkOutcome> {
    Playback::new(trace, ladder, config).download_chunk(session, rung)
}

/// Free-function form of [`Playback::run_session`].
pub fn run_session<P: AbrPolicy + ?Sized>(
    trace: &ThroughputTrace,
    policy: &mut P,
    ladder: &BitrateLadder,
    config: &SimConfig,
) -> Result<SessionRun> {
    Playback::new(trace, ladder, config).run_session(policy)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionRun {
    pub record: SessionRecord,
    pub outcomes: Vec<ChunkOutcome>,
    pub observations: Vec<Observation>,
    pub final_clock_s: f64,
    pub final_buffer_s: f64,
}

impl SessionRun {
    /// One row per chunk: index, rung, bits, download, rebuffer, pause, buffer.
    pub fn chunk_log_csv(&self) -> String {
        let mut out =
            String::from("index,rung,bits,download_time_s,rebuffer_s,pause_s,buffer_after_s\n");
        for o in &self.outcomes {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{:.6}",
                o.index, o.rung, o.chunk_bits, o.download_time_s, o.rebuffer_s, o.pause_s, o.buffer_after_s
            );
        }
        out
    }
}
