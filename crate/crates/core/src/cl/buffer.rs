//! Fixed-capacity replay buffer with per-task quota and reservoir
//! insertion policies.

use crate::error::{Error, Result};
use crate::seeds;
use crate::streams::Task;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// How entries are admitted and evicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferPolicy {
    /// Down-sample at task boundaries so task `i` of `t` seen tasks holds
    /// at most `ceil(m/t)` entries.
    PerTaskQuota,
    /// Classic reservoir sampling over a stream of insertions.
    Reservoir,
}

/// One stored example.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferEntry {
    pub input: Vec<f32>,
    pub label: usize,
    /// Model logits at storage time; present only for logit-matching
    /// strategies.
    pub stored_logits: Option<Vec<f64>>,
    pub task_id: usize,
    /// Training-time class mask of the originating task, when the
    /// scenario uses one.
    pub class_mask: Option<Vec<bool>>,
}

/// Capacity-bounded store of past training examples.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    policy: BufferPolicy,
    entries: Vec<BufferEntry>,
    items_seen: u64,
    tasks_seen: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, policy: BufferPolicy) -> Self {
        ReplayBuffer {
            capacity,
            policy,
            entries: Vec::new(),
            items_seen: 0,
            tasks_seen: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn policy(&self) -> BufferPolicy {
        self.policy
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn items_seen(&self) -> u64 {
        self.items_seen
    }

    pub fn tasks_seen(&self) -> usize {
        self.tasks_seen
    }

    pub fn entries(&self) -> &[BufferEntry] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut Vec<BufferEntry> {
        &mut self.entries
    }

    pub(crate) fn set_tasks_seen(&mut self, t: usize) {
        self.tasks_seen = t;
    }

    /// Number of stored entries originating from tasks other than
    /// `task_id`.
    pub fn prior_task_len(&self, task_id: usize) -> usize {
        self.entries.iter().filter(|e| e.task_id != task_id).count()
    }

    /// Task-boundary insertion under the per-task quota policy: every
    /// stored task is down-sampled (seeded, uniform) to its allocation and
    /// up to one allocation of the finished task's labelled examples is
    /// inserted.
    pub fn insert_task_end(&mut self, task: &Task, class_mask: Option<&[bool]>, seed: u64) -> Result<()> {
        if self.policy != BufferPolicy::PerTaskQuota {
            return Err(Error::contract(
                "insert_task_end requires the per-task quota policy",
            ));
        }
        let mut rng = seeds::rng(seed, &[seeds::label::BUFFER, task.task_id() as u64]);
        self.tasks_seen += 1;
        let t = self.tasks_seen;
        // allocations: floor(m/t) each, remainder spread over the first
        // groups; per-task counts never exceed ceil(m/t) and the total
        // never exceeds m
        let base = self.capacity / t;
        let remainder = self.capacity % t;
        let mut task_ids: Vec<usize> = self.entries.iter().map(|e| e.task_id).collect();
        task_ids.sort_unstable();
        task_ids.dedup();
        let alloc = |slot: usize| base + usize::from(slot < remainder);

        let mut kept: Vec<BufferEntry> = Vec::new();
        for (slot, &tid) in task_ids.iter().enumerate() {
            let mut group: Vec<BufferEntry> = self
                .entries
                .iter()
                .filter(|e| e.task_id == tid)
                .cloned()
                .collect();
            let quota = alloc(slot);
            if group.len() > quota {
                let mut idx: Vec<usize> = (0..group.len()).collect();
                idx.shuffle(&mut rng);
                idx.truncate(quota);
                idx.sort_unstable();
                group = idx.into_iter().map(|i| group[i].clone()).collect();
            }
            kept.extend(group);
        }

        let quota_new = alloc(task_ids.len());
        let (inputs, labels) = task.labelled_examples();
        let n = labels.len();
        let take = quota_new.min(n);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        idx.truncate(take);
        idx.sort_unstable();
        for i in idx {
            kept.push(BufferEntry {
                input: inputs.row(i).iter().map(|&v| v as f32).collect(),
                label: labels[i],
                stored_logits: None,
                task_id: task.task_id(),
                class_mask: class_mask.map(<[bool]>::to_vec),
            });
        }
        self.items_seen += take as u64;
        self.entries = kept;
        debug_assert!(self.entries.len() <= self.capacity);
        Ok(())
    }

    /// Classic reservoir insertion: the first `m` items are stored, item
    /// `k > m` replaces a uniform slot with probability `m/k`.
    pub fn reservoir_insert(&mut self, entry: BufferEntry, rng: &mut ChaCha8Rng) -> Result<()> {
        if self.policy != BufferPolicy::Reservoir {
            return Err(Error::contract(
                "reservoir_insert requires the reservoir policy",
            ));
        }
        self.items_seen += 1;
        if self.entries.len() < self.capacity {
            self.entries.push(entry);
        } else {
            let j = rng.gen_range(0..self.items_seen as usize);
            if j < self.capacity {
                self.entries[j] = entry;
            }
        }
        Ok(())
    }

    /// `k` uniform-with-replacement entry indices.
    pub fn sample_indices(&self, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
        if self.entries.is_empty() {
            return Err(Error::contract("cannot sample from an empty buffer"));
        }
        Ok((0..k).map(|_| rng.gen_range(0..self.entries.len())).collect())
    }

    /// `k` uniform-with-replacement indices among entries from tasks
    /// other than `exclude_task`. Returns an error when no such entry
    /// exists.
    pub fn sample_prior_indices(
        &self,
        exclude_task: usize,
        k: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>> {
        let eligible: Vec<usize> = (0..self.entries.len())
            .filter(|&i| self.entries[i].task_id != exclude_task)
            .collect();
        if eligible.is_empty() {
            return Err(Error::contract("no prior-task entries to sample"));
        }
        Ok((0..k)
            .map(|_| eligible[rng.gen_range(0..eligible.len())])
            .collect())
    }

    /// Deterministic uniform-with-replacement batch, the seeded public
    /// form of [`ReplayBuffer::sample_indices`].
    pub fn replay_batch(&self, k: usize, seed: u64) -> Result<Vec<&BufferEntry>> {
        let mut rng = seeds::rng(seed, &[seeds::label::REPLAY]);
        let idx = self.sample_indices(k, &mut rng)?;
        Ok(idx.into_iter().map(|i| &self.entries[i]).collect())
    }
}
