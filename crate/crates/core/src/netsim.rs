//! Networked closed loop: controller -> erasure channel -> buffered actuator -> plant.
//!
//! At every step the controller designs a packet from `x(k)` and sends it.
//! The channel drops it with probability `p_drop`, except that after
//! `max_consecutive` drops in a row the next packet is always delivered. A
//! delivered packet overwrites the actuator buffer and its first entry is
//! applied; on a drop the next buffered entry is applied instead.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)` (rand_chacha), a
//! fully specified, platform-independent generator. A Bernoulli draw takes the
//! top 53 bits of one `u64` as a uniform in `[0, 1)` and drops when it is
//! below `p_drop`.

use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lifting::HorizonData;
use crate::numerics::norm2;
use crate::plant::PlantModel;
use crate::solvers::{l1_design, omp_design_with, ControlPacket, OmpSelection};
use crate::synthesis::SynthesisResult;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in `[0, 1)` with 53 bits of resolution.
pub fn uniform53(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    p_drop: f64,
    max_consecutive: usize,
    consecutive_drops: usize,
}

impl ChannelModel {
    pub fn new(p_drop: f64, max_consecutive: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_drop) {
            return Err(Error::InvalidParameter(format!("p_drop = {p_drop} outside [0, 1]")));
        }
        Ok(Self {
            p_drop,
            max_consecutive,
            consecutive_drops: 0,
        })
    }

    /// Channel for a buffer of length `horizon`: at most `horizon - 1` drops in a row.
    pub fn for_horizon(p_drop: f64, horizon: usize) -> Result<Self> {
        Self::new(p_drop, horizon.saturating_sub(1))
    }

    pub fn p_drop(&self) -> f64 {
        self.p_drop
    }

    pub fn max_consecutive(&self) -> usize {
        self.max_consecutive
    }

    pub fn consecutive_drops(&self) -> usize {
        self.consecutive_drops
    }

    /// One transmission; `true` when the packet is delivered.
    pub fn step(&mut self, rng: &mut impl RngCore) -> bool {
        if self.consecutive_drops >= self.max_consecutive {
            self.consecutive_drops = 0;
            return true;
        }
        if uniform53(rng) < self.p_drop {
            self.consecutive_drops += 1;
            false
        } else {
            self.consecutive_drops = 0;
            true
        }
    }
}

/// Actuator-side packet buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferState {
    contents: Vec<f64>,
    cursor: usize,
}

impl BufferState {
    /// Zero-filled buffer; until the first delivery the plant receives 0.
    pub fn new(horizon: usize) -> Self {
        Self {
            contents: vec![0.0; horizon],
            cursor: 0,
        }
    }

    pub fn contents(&self) -> &[f64] {
        &self.contents
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Returns the input to apply this step.
    pub fn apply(&mut self, delivered: Option<&[f64]>) -> Result<f64> {
        if let Some(packet) = delivered {
            if packet.len() != self.contents.len() {
                return Err(Error::dims(
                    format!("{}-entry packet", self.contents.len()),
                    format!("{}-entry packet", packet.len()),
                ));
            }
            self.contents.copy_from_slice(packet);
            self.cursor = 0;
        }
        let Some(&u) = self.contents.get(self.cursor) else {
            return Err(Error::BufferExhausted { cursor: self.cursor });
        };
        self.cursor += 1;
        Ok(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PacketSolver {
    Omp(OmpSelection),
    L1 { lambda: f64, fixed_bound: f64 },
}

impl PacketSolver {
    pub fn design(&self, h: &HorizonData, syn: &SynthesisResult, x: &[f64]) -> Result<ControlPacket> {
        match *self {
            PacketSolver::Omp(selection) => omp_design_with(h, &syn.w, x, selection),
            PacketSolver::L1 { lambda, fixed_bound } => l1_design(h, x, lambda, fixed_bound),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub solver: PacketSolver,
    pub x0: Vec<f64>,
    pub steps: usize,
    pub p_drop: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub state: Vec<f64>,
    pub norm_x: f64,
    /// Input applied at step k.
    pub input: f64,
    pub dropped: bool,
    /// `||u(x(k))||_0` of the packet designed at step k.
    pub sparsity: usize,
    /// Wall-clock packet design time in microseconds; not deterministic.
    pub design_time_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub seed: u64,
    pub records: Vec<StepRecord>,
}

impl SimTrace {
    pub fn norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.norm_x).collect()
    }

    pub fn drops(&self) -> usize {
        self.records.iter().filter(|r| r.dropped).count()
    }

    /// `x(k)^T P x(k)` at every step where a packet was delivered.
    pub fn lyapunov_at_receptions(&self, p: &crate::numerics::Matrix) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter(|r| !r.dropped)
            .map(|r| (r.k, p.quad_form(&r.state)))
            .collect()
    }

    pub fn mean_sparsity(&self) -> f64 {
        mean(self.records.iter().map(|r| r.sparsity as f64))
    }

    pub fn mean_design_time_us(&self) -> f64 {
        mean(self.records.iter().map(|r| r.design_time_us))
    }
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    values.sum::<f64>() / n as f64
}

/// Simulates one closed-loop trial for `spec.steps` plant updates. The trace
/// holds `steps + 1` records (k = 0..=steps); the packet designed at the final
/// state is recorded for its sparsity but not applied.
pub fn run_trial(
    plant: &PlantModel,
    h: &HorizonData,
    syn: &SynthesisResult,
    spec: &TrialSpec,
    seed: u64,
) -> Result<SimTrace> {
    if spec.x0.len() != plant.dim() {
        return Err(Error::dims(
            format!("{}-vector x0", plant.dim()),
            format!("{}-vector", spec.x0.len()),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let mut channel = ChannelModel::for_horizon(spec.p_drop, h.horizon())?;
    let mut buffer = BufferState::new(h.horizon());
    let mut x = spec.x0.clone();
    let mut records = Vec::with_capacity(spec.steps + 1);

    for k in 0..=spec.steps {
        let started = Instant::now();
        let packet = spec.solver.design(h, syn, &x)?;
        let design_time_us = started.elapsed().as_secs_f64() * 1e6;

        let delivered = channel.step(&mut rng);
        let input = buffer.apply(delivered.then_some(packet.coeffs.as_slice()))?;
        records.push(StepRecord {
            k,
            state: x.clone(),
            norm_x: norm2(&x),
            input,
            dropped: !delivered,
            sparsity: packet.sparsity(),
            design_time_us,
        });
        if k < spec.steps {
            x = plant.step(&x, input)?;
        }
    }
    Ok(SimTrace { seed, records })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub seed: u64,
    pub initial_norm: f64,
    pub final_norm: f64,
    pub drops: usize,
    pub mean_sparsity: f64,
    pub mean_design_time_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    /// Per-k mean of `||x(k)||_2` over trials.
    pub mean_norm_x: Vec<f64>,
    /// Per-k mean of `||u(x(k))||_0` over trials.
    pub mean_sparsity: Vec<f64>,
    pub trials: Vec<TrialSummary>,
}

impl MonteCarloResult {
    pub fn mean_design_time_us(&self) -> f64 {
        mean(self.trials.iter().map(|t| t.mean_design_time_us))
    }

    pub fn overall_mean_sparsity(&self) -> f64 {
        mean(self.mean_sparsity.iter().copied())
    }
}

/// Runs `trials` independent trials with seeds `base_seed + t`. Aggregation
/// is a sequential reduction in trial order, so `parallel` does not change
/// any output value.
pub fn run_montecarlo(
    plant: &PlantModel,
    h: &HorizonData,
    syn: &SynthesisResult,
    spec: &TrialSpec,
    trials: usize,
    base_seed: u64,
    parallel: bool,
) -> Result<MonteCarloResult> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..trials as u64).map(|t| base_seed.wrapping_add(t)).collect();
    let run = |&seed: &u64| run_trial(plant, h, syn, spec, seed);
    let traces: Vec<SimTrace> = if parallel {
        seeds.par_iter().map(run).collect::<Result<_>>()?
    } else {
        seeds.iter().map(run).collect::<Result<_>>()?
    };

    let len = spec.steps + 1;
    let mut norm_sum = vec![0.0; len];
    let mut sparsity_sum = vec![0.0; len];
    for trace in &traces {
        for (i, r) in trace.records.iter().enumerate() {
            norm_sum[i] += r.norm_x;
            sparsity_sum[i] += r.sparsity as f64;
        }
    }
    let scale = 1.0 / trials as f64;
    let summaries = traces
        .iter()
        .map(|t| TrialSummary {
            seed: t.seed,
            initial_norm: t.records[0].norm_x,
            final_norm: t.records[len - 1].norm_x,
            drops: t.drops(),
            mean_sparsity: t.mean_sparsity(),
            mean_design_time_us: t.mean_design_time_us(),
        })
        .collect();
    Ok(MonteCarloResult {
        mean_norm_x: norm_sum.into_iter().map(|v| v * scale).collect(),
        mean_sparsity: sparsity_sum.into_iter().map(|v| v * scale).collect(),
        trials: summaries,
    })
}
