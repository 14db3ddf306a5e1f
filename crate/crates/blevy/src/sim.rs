//! Event-driven simulation of the branching Lévy process.
//!
//! A run is driven by a min-heap of pending death times. Particles are only
//! evaluated lazily: a particle's position is advanced by a single exact Lévy
//! increment when it dies and when a checkpoint sweep needs its position,
//! never on a time grid. Dead particles are dropped as soon as their
//! offspring are pushed, so memory holds the live population only (plus the
//! full genealogy when recording is requested).
//!
//! Determinism contract: a run consumes one random stream, derived from
//! `(master_seed, stream)`, in a fixed event order (lifetime at creation;
//! motion increment, offspring count, then displacements at a death;
//! per-particle motion increments at a checkpoint sweep). Re-running with the
//! same configuration, checkpoints, cap and seed record reproduces the
//! `RunResult` bit for bit.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::kahan::NeumaierSum;
use crate::model::{Coupling, DerivedConstants, ModelConfig, ModelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid checkpoints: {reason}")]
    InvalidCheckpoints { reason: &'static str },
    #[error("no surviving run within {attempts} attempts")]
    MaxAttemptsExhausted { attempts: u32 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Identifies the random stream of one replicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct SeedRecord {
    pub master_seed: u64,
    pub stream: u64,
}

impl SeedRecord {
    pub fn new(master_seed: u64, stream: u64) -> Self {
        SeedRecord {
            master_seed,
            stream,
        }
    }

    fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Observables of one run at one checkpoint time.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointStats {
    pub t: f64,
    /// Number of live particles.
    pub pop: u64,
    /// Compensated sum of live positions.
    pub sum_pos: f64,
    /// `sum_pos - r * t * pop`, computed exactly in that form.
    pub centered_sum: f64,
    /// `exp(-lambda_hat t) * centered_sum`.
    pub martingale: f64,
    /// `exp(-lambda_hat t) * pop`.
    pub w_stat: f64,
    /// `sum_pos / pop - r * t`; absent when the population is extinct.
    pub mean_dev: Option<f64>,
}

/// One finished run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub checkpoints: Vec<f64>,
    /// One entry per checkpoint, in order. `None` for checkpoints past the
    /// point where the run was stopped by the population cap.
    pub rows: Vec<Option<CheckpointStats>>,
    /// Population alive at the final checkpoint (capped runs count as
    /// surviving: the population exceeded the cap).
    pub survived: bool,
    pub capped: bool,
    pub seed: SeedRecord,
}

/// A surviving run together with the number of rejection-sampling attempts
/// that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SurvivingRun {
    pub run: RunResult,
    pub attempts: u32,
}

/// Genealogy record of one particle, kept only when recording is requested.
#[derive(Clone, Debug, PartialEq)]
pub struct GenRecord {
    /// Ulam-Harris label: the sequence of child indices from the root (whose
    /// label is empty). A child's path extends its parent's by one index.
    pub path: Vec<u32>,
    pub birth: f64,
    pub death: f64,
    /// Position at birth (parent death position plus own displacement).
    pub birth_pos: f64,
    /// Brood size produced at death; `None` if the particle never died within
    /// the simulated horizon.
    pub n_children: Option<u32>,
}

/// Every particle ever created by one recorded run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Genealogy {
    pub records: Vec<GenRecord>,
}

impl Genealogy {
    /// Particles alive at `t`: born no later than `t`, death strictly after.
    pub fn live_at(&self, t: f64) -> Vec<&GenRecord> {
        self.records
            .iter()
            .filter(|r| r.birth <= t && t < r.death)
            .collect()
    }
}

/// True when `a` is a strict ancestor of `b` in Ulam-Harris labeling.
pub fn is_strict_ancestor(a: &[u32], b: &[u32]) -> bool {
    a.len() < b.len() && b[..a.len()] == *a
}

struct Particle {
    path: Vec<u32>,
    death: f64,
    pos: f64,
    last_eval: f64,
    record: u32,
}

/// Max-heap entry ordered so the earliest death pops first.
struct ByDeath(Particle);

impl PartialEq for ByDeath {
    fn eq(&self, other: &Self) -> bool {
        self.0.death == other.0.death
    }
}
impl Eq for ByDeath {}
impl PartialOrd for ByDeath {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ByDeath {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.death.total_cmp(&self.0.death)
    }
}

/// Checks that a checkpoint grid is non-empty, finite, non-negative, and
/// strictly increasing.
pub fn validate_checkpoints(checkpoints: &[f64]) -> Result<(), SimError> {
    if checkpoints.is_empty() {
        return Err(SimError::InvalidCheckpoints {
            reason: "checkpoint list is empty",
        });
    }
    if !checkpoints[0].is_finite() || checkpoints[0] < 0.0 {
        return Err(SimError::InvalidCheckpoints {
            reason: "first checkpoint must be finite and non-negative",
        });
    }
    for pair in checkpoints.windows(2) {
        if !pair[1].is_finite() || pair[1] <= pair[0] {
            return Err(SimError::InvalidCheckpoints {
                reason: "checkpoints must be finite and strictly increasing",
            });
        }
    }
    Ok(())
}

/// Runs one replicate and reports the observables at every checkpoint.
///
/// `cap` bounds the live population; a run that would exceed it stops early
/// with `capped = true` and absent rows from that point on.
pub fn simulate(
    config: &ModelConfig,
    checkpoints: &[f64],
    cap: usize,
    seed: SeedRecord,
) -> Result<RunResult, SimError> {
    validate_checkpoints(checkpoints)?;
    let dc = config.derived_constants()?;
    let mut rng = seed.rng();
    Ok(run_once(
        config,
        &dc,
        checkpoints,
        cap,
        &mut rng,
        seed,
        None,
    ))
}

/// Like [`simulate`], additionally returning the full genealogy (every
/// particle ever created). Intended for invariant checks at small scale.
pub fn simulate_recorded(
    config: &ModelConfig,
    checkpoints: &[f64],
    cap: usize,
    seed: SeedRecord,
) -> Result<(RunResult, Genealogy), SimError> {
    validate_checkpoints(checkpoints)?;
    let dc = config.derived_constants()?;
    let mut rng = seed.rng();
    let mut records = Vec::new();
    let run = run_once(
        config,
        &dc,
        checkpoints,
        cap,
        &mut rng,
        seed,
        Some(&mut records),
    );
    Ok((run, Genealogy { records }))
}

/// Rejection-samples runs from one stream until one survives to the final
/// checkpoint, up to `max_attempts`.
pub fn simulate_surviving(
    config: &ModelConfig,
    checkpoints: &[f64],
    cap: usize,
    max_attempts: u32,
    seed: SeedRecord,
) -> Result<SurvivingRun, SimError> {
    validate_checkpoints(checkpoints)?;
    let dc = config.derived_constants()?;
    let mut rng = seed.rng();
    for attempt in 1..=max_attempts {
        let run = run_once(config, &dc, checkpoints, cap, &mut rng, seed, None);
        if run.survived {
            return Ok(SurvivingRun {
                run,
                attempts: attempt,
            });
        }
    }
    Err(SimError::MaxAttemptsExhausted {
        attempts: max_attempts,
    })
}

fn run_once(
    config: &ModelConfig,
    dc: &DerivedConstants,
    checkpoints: &[f64],
    cap: usize,
    rng: &mut ChaCha8Rng,
    seed: SeedRecord,
    mut recorder: Option<&mut Vec<GenRecord>>,
) -> RunResult {
    let lifetime = Exp::new(config.lambda).expect("validated lifetime rate");
    let root_death = lifetime.sample(rng);
    if let Some(rec) = recorder.as_deref_mut() {
        rec.push(GenRecord {
            path: Vec::new(),
            birth: 0.0,
            death: root_death,
            birth_pos: 0.0,
            n_children: None,
        });
    }
    let mut heap = BinaryHeap::new();
    heap.push(ByDeath(Particle {
        path: Vec::new(),
        death: root_death,
        pos: 0.0,
        last_eval: 0.0,
        record: 0,
    }));

    let mut rows: Vec<Option<CheckpointStats>> = Vec::with_capacity(checkpoints.len());
    let mut capped = false;

    'grid: for &t in checkpoints {
        // Death events up to and including t; a particle dying exactly at a
        // checkpoint is already replaced by its brood there.
        while heap.peek().is_some_and(|entry| entry.0.death <= t) {
            let ByDeath(mut parent) = heap.pop().expect("peeked entry");
            let dt = parent.death - parent.last_eval;
            parent.pos += config
                .motion
                .sample_increment(dt, rng)
                .expect("non-negative duration");
            let brood = config.offspring.sample(rng);
            if heap.len() + brood as usize > cap {
                capped = true;
                break 'grid;
            }
            let shared_displacement = match config.coupling {
                Coupling::Shared if brood > 0 => Some(config.displacement.sample(rng)),
                _ => None,
            };
            for child_index in 1..=brood {
                let displacement =
                    shared_displacement.unwrap_or_else(|| config.displacement.sample(rng));
                let mut path = parent.path.clone();
                path.push(child_index);
                let death = parent.death + lifetime.sample(rng);
                let record = match recorder.as_deref_mut() {
                    Some(rec) => {
                        rec.push(GenRecord {
                            path: path.clone(),
                            birth: parent.death,
                            death,
                            birth_pos: parent.pos + displacement,
                            n_children: None,
                        });
                        (rec.len() - 1) as u32
                    }
                    None => 0,
                };
                heap.push(ByDeath(Particle {
                    path,
                    death,
                    pos: parent.pos + displacement,
                    last_eval: parent.death,
                    record,
                }));
            }
            if let Some(rec) = recorder.as_deref_mut() {
                rec[parent.record as usize].n_children = Some(brood);
            }
        }

        // Checkpoint sweep: advance every live particle to t and accumulate
        // positions in the heap's internal order, which is deterministic for
        // a fixed stream.
        let mut live = heap.into_vec();
        let mut sum = NeumaierSum::new();
        for ByDeath(particle) in live.iter_mut() {
            let dt = t - particle.last_eval;
            particle.pos += config
                .motion
                .sample_increment(dt, rng)
                .expect("non-negative duration");
            particle.last_eval = t;
            sum.add(particle.pos);
        }
        heap = BinaryHeap::from(live);

        let pop = heap.len() as u64;
        let popf = pop as f64;
        let sum_pos = sum.value();
        let centered_sum = sum_pos - dc.r * t * popf;
        let decay = (-dc.lambda_hat * t).exp();
        rows.push(Some(CheckpointStats {
            t,
            pop,
            sum_pos,
            centered_sum,
            martingale: decay * centered_sum,
            w_stat: decay * popf,
            mean_dev: (pop > 0).then(|| sum_pos / popf - dc.r * t),
        }));
    }

    while rows.len() < checkpoints.len() {
        rows.push(None);
    }
    let survived = capped
        || rows
            .last()
            .and_then(|row| row.as_ref())
            .is_some_and(|row| row.pop > 0);
    RunResult {
        checkpoints: checkpoints.to_vec(),
        rows,
        survived,
        capped,
        seed,
    }
}
