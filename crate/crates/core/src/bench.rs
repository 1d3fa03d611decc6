//! The phased block workload, configurations A to E, and the metrics the
//! difficulty comparison is built from.

use std::fmt::{self, Write as _};
use std::io;
use std::str::FromStr;
use std::thread;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clock::FixedClock;
use crate::ledger::{
    keypair_from_seed, mine_block, seed_from_label, AdaptiveDifficulty, Block, Chain, DifficultyParams, Params, Scalar,
    SecretKey, Transaction, TxDraft, TxKind,
};

pub const BENCH_AGENT_ID: &str = "bench-agent-001";
pub const BLOCKS_PER_PHASE: usize = 5;
pub const BLOCKS_PER_RUN: usize = 4 * BLOCKS_PER_PHASE;
const CLOCK_ORIGIN_MS: i64 = 1_700_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Idle,
    Normal,
    Emergency,
    Recovery,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Idle, Phase::Normal, Phase::Emergency, Phase::Recovery];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Idle => "IDLE",
            Phase::Normal => "NORMAL",
            Phase::Emergency => "EMERGENCY",
            Phase::Recovery => "RECOVERY",
        }
    }

    /// Inclusive transaction-count range per block.
    pub fn tx_range(self) -> (usize, usize) {
        match self {
            Phase::Idle => (1, 2),
            Phase::Normal => (4, 6),
            Phase::Emergency => (10, 15),
            Phase::Recovery => (2, 3),
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConfigId {
    A,
    B,
    C,
    D,
    E,
}

impl ConfigId {
    pub const ALL: [ConfigId; 5] = [ConfigId::A, ConfigId::B, ConfigId::C, ConfigId::D, ConfigId::E];

    pub fn params(self) -> DifficultyParams {
        let adaptive = |window, min, max, base, v_low, v_high| DifficultyParams {
            window,
            min,
            max,
            base,
            v_low,
            v_high,
            static_value: None,
        };
        match self {
            ConfigId::A => DifficultyParams::fixed(2),
            ConfigId::B => DifficultyParams::fixed(3),
            ConfigId::C => DifficultyParams::balanced(),
            ConfigId::D => adaptive(1, 1, 5, 3, 4.0, 8.0),
            ConfigId::E => adaptive(5, 2, 4, 3, 2.0, 12.0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ConfigId::A => "static d=2",
            ConfigId::B => "static d=3",
            ConfigId::C => "adaptive balanced",
            ConfigId::D => "adaptive aggressive",
            ConfigId::E => "adaptive conservative",
        }
    }
}

impl fmt::Display for ConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ConfigId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConfigId::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown bench config {s:?} (A-E)"))
    }
}

/// 20 (phase, tx count) pairs, five blocks per phase in order.
pub fn generate_workload(seed: u64) -> Vec<(Phase, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Phase::ALL
        .iter()
        .flat_map(|p| std::iter::repeat_n(*p, BLOCKS_PER_PHASE))
        .map(|p| {
            let (lo, hi) = p.tx_range();
            (p, rng.random_range(lo..=hi))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMetric {
    pub config: ConfigId,
    pub run: usize,
    pub block: usize,
    pub phase: Phase,
    pub tx_count: usize,
    pub difficulty: u32,
    pub mining_ms: f64,
    pub nonce_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub config: ConfigId,
    pub run: usize,
    pub seed: u64,
    pub blocks: Vec<BlockMetric>,
}

impl RunMetrics {
    pub fn total_tx(&self) -> usize {
        self.blocks.iter().map(|b| b.tx_count).sum()
    }

    pub fn total_mining_ms(&self) -> f64 {
        self.blocks.iter().map(|b| b.mining_ms).sum()
    }

    pub fn total_nonces(&self) -> u64 {
        self.blocks.iter().map(|b| b.nonce_count).sum()
    }

    /// Transactions per second of mining time.
    pub fn throughput(&self) -> f64 {
        let secs = self.total_mining_ms() / 1000.0;
        if secs > 0.0 {
            self.total_tx() as f64 / secs
        } else {
            f64::INFINITY
        }
    }

    fn phase_blocks(&self, phase: Phase) -> impl Iterator<Item = &BlockMetric> {
        self.blocks.iter().filter(move |b| b.phase == phase)
    }

    /// Nonces hashed to commit the whole emergency burst.
    pub fn emergency_nonces(&self) -> u64 {
        self.phase_blocks(Phase::Emergency).map(|b| b.nonce_count).sum()
    }

    pub fn emergency_ms(&self) -> f64 {
        self.phase_blocks(Phase::Emergency).map(|b| b.mining_ms).sum()
    }

    /// Latency of the first block of the burst.
    pub fn emergency_first_block_ms(&self) -> f64 {
        self.phase_blocks(Phase::Emergency).next().map_or(0.0, |b| b.mining_ms)
    }
}

fn bench_key() -> SecretKey {
    keypair_from_seed(&seed_from_label(BENCH_AGENT_ID))
        .expect("32-byte seed")
        .0
}

/// Signed synthetic decisions on distinct devices, so none collide.
pub fn synthetic_txs(sk: &SecretKey, tag: &str, count: usize, timestamp_ms: i64) -> Vec<Transaction> {
    (0..count)
        .map(|i| {
            let mut params = Params::new();
            params.insert("seq".into(), Scalar::Int(i as i64));
            TxDraft {
                tx_id: format!("{tag}-{i:02}"),
                agent_id: BENCH_AGENT_ID.into(),
                kind: TxKind::Decision,
                device_id: Some(format!("bench-device-{i:02}")),
                action: "set_state".into(),
                params,
                confidence: 1.0,
                timestamp_ms,
            }
            .seal_and_sign(sk)
        })
        .collect()
}

/// Mines one run's workload on a fresh chain.
pub fn run_once(config: ConfigId, run: usize, seed: u64) -> RunMetrics {
    let sk = bench_key();
    let mut chain = Chain::new(config.params());
    let blocks = generate_workload(seed)
        .into_iter()
        .enumerate()
        .map(|(i, (phase, tx_count))| {
            let ts = CLOCK_ORIGIN_MS + i as i64 * 1000;
            let txs = synthetic_txs(&sk, &format!("s{seed}-b{i:02}"), tx_count, ts);
            let difficulty = chain.current_difficulty();
            let start = Instant::now();
            let mined = chain.append(txs, &FixedClock(ts));
            let mining_ms = start.elapsed().as_secs_f64() * 1000.0;
            BlockMetric {
                config,
                run,
                block: i,
                phase,
                tx_count,
                difficulty,
                mining_ms,
                nonce_count: mined.nonce_count,
            }
        })
        .collect();
    RunMetrics {
        config,
        run,
        seed,
        blocks,
    }
}

/// `runs` runs with workload seeds `seed, seed+1, ...`. With `parallel`
/// each run mines on its own thread and chain.
pub fn run_bench(config: ConfigId, runs: usize, seed: u64, parallel: bool) -> Vec<RunMetrics> {
    if parallel {
        thread::scope(|s| {
            let handles: Vec<_> = (0..runs)
                .map(|r| s.spawn(move || run_once(config, r, seed + r as u64)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("bench run panicked"))
                .collect()
        })
    } else {
        (0..runs).map(|r| run_once(config, r, seed + r as u64)).collect()
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "config",
    "run",
    "block",
    "phase",
    "tx_count",
    "difficulty",
    "mining_ms",
    "nonce_count",
];

/// One row per block per run.
pub fn export_csv<W: io::Write>(metrics: &[RunMetrics], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for b in metrics.iter().flat_map(|m| &m.blocks) {
        w.write_record([
            b.config.to_string(),
            b.run.to_string(),
            b.block.to_string(),
            b.phase.to_string(),
            b.tx_count.to_string(),
            b.difficulty.to_string(),
            format!("{:.3}", b.mining_ms),
            b.nonce_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Per-config medians across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config: ConfigId,
    pub runs: usize,
    pub mining_ms: f64,
    pub nonces: f64,
    pub throughput_tx_s: f64,
    pub emergency_ms: f64,
    pub emergency_nonces: f64,
    pub min_difficulty: u32,
    pub max_difficulty: u32,
}

pub fn summarize(config: ConfigId, runs: &[RunMetrics]) -> ConfigSummary {
    let col = |f: &dyn Fn(&RunMetrics) -> f64| {
        let mut v: Vec<f64> = runs.iter().map(f).collect();
        median(&mut v)
    };
    let ds = || runs.iter().flat_map(|r| r.blocks.iter().map(|b| b.difficulty));
    ConfigSummary {
        config,
        runs: runs.len(),
        mining_ms: col(&|r| r.total_mining_ms()),
        nonces: col(&|r| r.total_nonces() as f64),
        throughput_tx_s: col(&|r| r.throughput()),
        emergency_ms: col(&|r| r.emergency_ms()),
        emergency_nonces: col(&|r| r.emergency_nonces() as f64),
        min_difficulty: ds().min().unwrap_or(0),
        max_difficulty: ds().max().unwrap_or(0),
    }
}

pub fn summary_table(rows: &[ConfigSummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<6} {:<22} {:>12} {:>12} {:>12} {:>14} {:>14} {:>6}",
        "config", "profile", "mining ms", "nonces", "tx/s", "emergency ms", "emerg nonces", "d"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<6} {:<22} {:>12.2} {:>12.0} {:>12.1} {:>14.2} {:>14.0} {:>3}-{}",
            r.config.to_string(),
            r.config.label(),
            r.mining_ms,
            r.nonces,
            r.throughput_tx_s,
            r.emergency_ms,
            r.emergency_nonces,
            r.min_difficulty,
            r.max_difficulty
        );
    }
    s
}

/// Difficulty each block of a tx-count schedule is mined at. Pure controller
/// replay; nothing is hashed.
pub fn difficulty_trace(params: &DifficultyParams, tx_counts: &[usize]) -> Vec<u32> {
    let mut c = AdaptiveDifficulty::new(params.clone());
    tx_counts
        .iter()
        .map(|n| {
            let d = c.current();
            c.record_block(*n);
            d
        })
        .collect()
}

/// Nonce counts of `blocks` single-transaction blocks mined at `difficulty`.
pub fn nonce_samples(difficulty: u32, blocks: usize, seed: u64) -> Vec<u64> {
    let sk = bench_key();
    let genesis = Block::genesis(difficulty);
    (0..blocks)
        .map(|i| {
            let ts = CLOCK_ORIGIN_MS + i as i64;
            let txs = synthetic_txs(&sk, &format!("n{seed}-d{difficulty}-{i}"), 1, ts);
            mine_block(txs, &genesis, difficulty, &FixedClock(ts)).nonce_count
        })
        .collect()
}

/// Emergency-burst effort of `config` for each of `trials` workload seeds.
/// The chain state entering the burst comes from mining the IDLE and NORMAL
/// blocks first.
pub fn emergency_response(config: ConfigId, trials: usize, seed: u64) -> Vec<(u64, f64)> {
    (0..trials)
        .map(|t| {
            let m = run_until_recovery(config, seed + t as u64);
            (m.emergency_nonces(), m.emergency_ms())
        })
        .collect()
}

fn run_until_recovery(config: ConfigId, seed: u64) -> RunMetrics {
    let sk = bench_key();
    let mut chain = Chain::new(config.params());
    let mut blocks = Vec::new();
    for (i, (phase, tx_count)) in generate_workload(seed).into_iter().enumerate() {
        if phase == Phase::Recovery {
            break;
        }
        let ts = CLOCK_ORIGIN_MS + i as i64 * 1000;
        let txs = synthetic_txs(&sk, &format!("e{seed}-b{i:02}"), tx_count, ts);
        let difficulty = chain.current_difficulty();
        let start = Instant::now();
        let mined = chain.append(txs, &FixedClock(ts));
        blocks.push(BlockMetric {
            config,
            run: 0,
            block: i,
            phase,
            tx_count,
            difficulty,
            mining_ms: start.elapsed().as_secs_f64() * 1000.0,
            nonce_count: mined.nonce_count,
        });
    }
    RunMetrics {
        config,
        run: 0,
        seed,
        blocks,
    }
}
