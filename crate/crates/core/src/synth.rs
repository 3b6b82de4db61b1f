//! Seeded random instance generation, used for property tests and for
//! building small exhaustively-enumerable problems.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::instance::{Alternative, Instance, JobSpec, OperationSpec, Time};

/// Shape parameters for [`random_instance`]. Ranges are inclusive.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub jobs: usize,
    pub machines: usize,
    pub ops_per_job: (usize, usize),
    /// Machines per operation; capped at `machines`. Ignored when
    /// `total_flexibility` is set.
    pub flexibility: (usize, usize),
    pub duration: (Time, Time),
    /// Every operation runs on every machine.
    pub total_flexibility: bool,
}

pub fn random_instance(name: &str, cfg: &SynthConfig, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs = Vec::with_capacity(cfg.jobs);
    for _ in 0..cfg.jobs {
        let n_ops = rng.gen_range(cfg.ops_per_job.0..=cfg.ops_per_job.1).max(1);
        let mut operations = Vec::with_capacity(n_ops);
        for _ in 0..n_ops {
            let k = if cfg.total_flexibility {
                cfg.machines
            } else {
                rng.gen_range(cfg.flexibility.0..=cfg.flexibility.1).clamp(1, cfg.machines)
            };
            let mut machines: Vec<usize> = (0..cfg.machines).collect();
            // partial Fisher-Yates: the first k entries become the sample
            for i in 0..k {
                let j = rng.gen_range(i..machines.len());
                machines.swap(i, j);
            }
            machines.truncate(k);
            machines.sort_unstable();
            let alternatives = machines
                .into_iter()
                .map(|machine| Alternative {
                    machine,
                    duration: rng.gen_range(cfg.duration.0..=cfg.duration.1).max(1),
                })
                .collect();
            operations.push(OperationSpec { alternatives });
        }
        jobs.push(JobSpec { operations });
    }
    Instance::from_parts(name, cfg.machines, jobs)
}

/// Deterministic family of tiny instances (at most `max_ops` operations in
/// total) for oracle-backed tests.
pub fn tiny_instances(count: usize, max_ops: usize, seed: u64) -> Vec<Instance> {
    let mut out = Vec::with_capacity(count);
    let mut attempt = 0u64;
    while out.len() < count {
        let s = seed.wrapping_add(attempt);
        attempt += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0x7469_6e79);
        let jobs = rng.gen_range(2..=3);
        let cfg = SynthConfig {
            jobs,
            machines: rng.gen_range(2..=3),
            ops_per_job: (1, (max_ops / jobs).max(1)),
            flexibility: (1, 3),
            duration: (1, 9),
            total_flexibility: false,
        };
        let inst = random_instance(&format!("tiny{:02}", out.len()), &cfg, s);
        if inst.total_ops() >= 2 && inst.total_ops() <= max_ops {
            out.push(inst);
        }
    }
    out
}
