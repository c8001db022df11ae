//! Clustering state: per-observation assignments plus per-cluster counts,
//! sufficient statistics and atoms, with cheap single-observation moves.
//!
//! Empty clusters are removed as soon as they appear; the last cluster is
//! swapped into the vacated slot and the affected assignments relabeled,
//! so cluster indices always form a contiguous `0..K` range.

use crate::data::GroupedDataset;
use crate::levy::ClusterCounts;
use rand::Rng;

/// One active cluster: group occupancy, the sum of assigned values, and
/// the current atom (cluster mean parameter).
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub counts: ClusterCounts,
    /// Σ x over assigned observations, kept as a sum so removal is exact
    /// up to floating-point addition.
    pub sum: f64,
    pub atom: f64,
}

impl Cluster {
    /// Number of assigned observations, same as `counts.total()`.
    pub fn size(&self) -> usize {
        self.counts.total()
    }
}

/// Where to put a detached observation back.
#[derive(Debug, Clone, Copy)]
pub enum AttachTarget {
    Existing(usize),
    New { atom: f64 },
}

/// What [`PartitionState::detach`] did: the cluster the observation left,
/// whether that cluster was removed, and (if so) the old index of the
/// cluster that was swapped into its slot.
#[derive(Debug, Clone, Copy)]
pub struct DetachOutcome {
    pub cluster: usize,
    pub removed: bool,
    pub moved_from: Option<usize>,
}

/// A single recount discrepancy, reported by [`PartitionState::recount`].
#[derive(Debug, Clone, PartialEq)]
pub enum RecountMismatch {
    GroupCount { cluster: usize, group: usize, stored: usize, actual: usize },
    Total { cluster: usize, stored: usize, actual: usize },
    Sum { cluster: usize, stored: f64, actual: f64 },
    EmptyCluster { cluster: usize },
    Unassigned { group: usize, index: usize },
    BadLabel { group: usize, index: usize, label: usize },
}

/// Result of a recount-from-scratch audit; empty means the incremental
/// state matches the assignments exactly.
#[derive(Debug, Clone, Default)]
pub struct RecountReport {
    pub mismatches: Vec<RecountMismatch>,
}

impl RecountReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionState {
    /// `assignments[i][j]` is the cluster of observation `j` in group `i`,
    /// or `None` while it is detached.
    assignments: Vec<Vec<Option<usize>>>,
    clusters: Vec<Cluster>,
    n_groups: usize,
}

impl PartitionState {
    /// Every observation in one shared cluster (the default initialization).
    pub fn single_cluster(data: &GroupedDataset) -> Self {
        let d = data.n_groups();
        let mut q = vec![0usize; d];
        let mut sum = 0.0;
        for (i, group) in data.groups().iter().enumerate() {
            q[i] = group.len();
            sum += group.iter().sum::<f64>();
        }
        Self {
            assignments: data.groups().iter().map(|g| vec![Some(0); g.len()]).collect(),
            clusters: vec![Cluster { counts: ClusterCounts::new(q), sum, atom: 0.0 }],
            n_groups: d,
        }
    }

    /// One cluster per (non-empty) group.
    pub fn per_group(data: &GroupedDataset) -> Self {
        let d = data.n_groups();
        let mut state = Self { assignments: Vec::new(), clusters: Vec::new(), n_groups: d };
        for (i, group) in data.groups().iter().enumerate() {
            if group.is_empty() {
                state.assignments.push(Vec::new());
                continue;
            }
            let k = state.clusters.len();
            let mut q = vec![0usize; d];
            q[i] = group.len();
            state.clusters.push(Cluster {
                counts: ClusterCounts::new(q),
                sum: group.iter().sum(),
                atom: 0.0,
            });
            state.assignments.push(vec![Some(k); group.len()]);
        }
        state
    }

    /// Uniformly random assignment to at most `k0` clusters; empty labels
    /// are compacted away.
    pub fn random<R: Rng>(data: &GroupedDataset, k0: usize, rng: &mut R) -> Self {
        assert!(k0 >= 1);
        let d = data.n_groups();
        let mut clusters: Vec<Cluster> = (0..k0)
            .map(|_| Cluster { counts: ClusterCounts::new(vec![0; d]), sum: 0.0, atom: 0.0 })
            .collect();
        let mut assignments = Vec::with_capacity(d);
        for (i, group) in data.groups().iter().enumerate() {
            let mut labels = Vec::with_capacity(group.len());
            for &x in group {
                let k = rng.random_range(0..k0);
                clusters[k].counts.increment(i);
                clusters[k].sum += x;
                labels.push(Some(k));
            }
            assignments.push(labels);
        }
        // drop empty labels, remapping the survivors onto 0..K
        let mut remap = vec![usize::MAX; k0];
        let mut kept = Vec::new();
        for (k, c) in clusters.into_iter().enumerate() {
            if c.size() > 0 {
                remap[k] = kept.len();
                kept.push(c);
            }
        }
        for labels in &mut assignments {
            for a in labels.iter_mut() {
                *a = a.map(|k| remap[k]);
            }
        }
        Self { assignments, clusters: kept, n_groups: d }
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    /// Number of active clusters.
    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn cluster(&self, k: usize) -> &Cluster {
        &self.clusters[k]
    }

    pub fn set_atom(&mut self, k: usize, atom: f64) {
        self.clusters[k].atom = atom;
    }

    /// Current cluster of observation `(group, index)`, `None` if detached.
    pub fn assignment(&self, group: usize, index: usize) -> Option<usize> {
        self.assignments[group][index]
    }

    /// Per-cluster count vectors, in cluster order.
    pub fn count_vectors(&self) -> Vec<ClusterCounts> {
        self.clusters.iter().map(|c| c.counts.clone()).collect()
    }

    /// Removes observation `(group, index)` with value `x` from its
    /// cluster. Panics if it is already detached. If its cluster empties
    /// it is removed and the last cluster takes its slot.
    pub fn detach(&mut self, group: usize, index: usize, x: f64) -> DetachOutcome {
        let k = self.assignments[group][index]
            .take()
            .expect("detach of an already detached observation");
        let cluster = &mut self.clusters[k];
        cluster.counts.decrement(group);
        cluster.sum -= x;
        if cluster.counts.total() == 0 {
            let last = self.clusters.len() - 1;
            self.clusters.swap_remove(k);
            let moved_from = if k != last {
                for labels in &mut self.assignments {
                    for a in labels.iter_mut() {
                        if *a == Some(last) {
                            *a = Some(k);
                        }
                    }
                }
                Some(last)
            } else {
                None
            };
            DetachOutcome { cluster: k, removed: true, moved_from }
        } else {
            DetachOutcome { cluster: k, removed: false, moved_from: None }
        }
    }

    /// Puts a detached observation into an existing cluster or a fresh one.
    /// Returns the cluster index it landed in. Panics if the observation is
    /// attached or the target index is out of range.
    pub fn attach(&mut self, group: usize, index: usize, x: f64, target: AttachTarget) -> usize {
        assert!(
            self.assignments[group][index].is_none(),
            "attach of an observation that is still assigned"
        );
        let k = match target {
            AttachTarget::Existing(k) => {
                assert!(k < self.clusters.len(), "attach to nonexistent cluster {k}");
                let cluster = &mut self.clusters[k];
                cluster.counts.increment(group);
                cluster.sum += x;
                k
            }
            AttachTarget::New { atom } => {
                let k = self.clusters.len();
                self.clusters.push(Cluster {
                    counts: ClusterCounts::singleton(self.n_groups, group),
                    sum: x,
                    atom,
                });
                k
            }
        };
        self.assignments[group][index] = Some(k);
        k
    }

    /// Recomputes every count and sum from the assignments and compares
    /// against the incremental state. Detached observations are reported.
    pub fn recount(&self, data: &GroupedDataset) -> RecountReport {
        let mut report = RecountReport::default();
        let k = self.clusters.len();
        let mut q = vec![vec![0usize; self.n_groups]; k];
        let mut sums = vec![0.0f64; k];
        for (i, group) in data.groups().iter().enumerate() {
            for (j, &x) in group.iter().enumerate() {
                match self.assignments[i][j] {
                    None => report.mismatches.push(RecountMismatch::Unassigned { group: i, index: j }),
                    Some(label) if label >= k => {
                        report.mismatches.push(RecountMismatch::BadLabel { group: i, index: j, label })
                    }
                    Some(label) => {
                        q[label][i] += 1;
                        sums[label] += x;
                    }
                }
            }
        }
        for (label, cluster) in self.clusters.iter().enumerate() {
            let actual_total: usize = q[label].iter().sum();
            if actual_total == 0 {
                report.mismatches.push(RecountMismatch::EmptyCluster { cluster: label });
            }
            for i in 0..self.n_groups {
                if cluster.counts.count(i) != q[label][i] {
                    report.mismatches.push(RecountMismatch::GroupCount {
                        cluster: label,
                        group: i,
                        stored: cluster.counts.count(i),
                        actual: q[label][i],
                    });
                }
            }
            if cluster.counts.total() != actual_total {
                report.mismatches.push(RecountMismatch::Total {
                    cluster: label,
                    stored: cluster.counts.total(),
                    actual: actual_total,
                });
            }
            if (cluster.sum - sums[label]).abs() > 1e-8 * (1.0 + sums[label].abs()) {
                report.mismatches.push(RecountMismatch::Sum {
                    cluster: label,
                    stored: cluster.sum,
                    actual: sums[label],
                });
            }
        }
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::GroupedDataset;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_data() -> GroupedDataset {
        GroupedDataset::from_groups(vec![vec![1.0, 2.0, 3.0], vec![10.0, 20.0]])
    }

    #[test]
    fn single_cluster_init_counts_match_group_sizes() {
        let data = small_data();
        let state = PartitionState::single_cluster(&data);
        assert_eq!(state.n_clusters(), 1);
        assert_eq!(state.cluster(0).counts.counts(), &[3, 2]);
        assert_eq!(state.cluster(0).sum, 36.0);
        assert!(state.recount(&data).is_clean());
    }

    #[test]
    fn detach_of_singleton_removes_cluster() {
        let data = small_data();
        let mut state = PartitionState::single_cluster(&data);
        // move one observation out into its own cluster, then detach it again
        state.detach(1, 0, 10.0);
        state.attach(1, 0, 10.0, AttachTarget::New { atom: 9.0 });
        assert_eq!(state.n_clusters(), 2);
        let out = state.detach(1, 0, 10.0);
        assert!(out.removed);
        assert_eq!(state.n_clusters(), 1);
        state.attach(1, 0, 10.0, AttachTarget::Existing(0));
        assert!(state.recount(&data).is_clean());
    }

    #[test]
    fn detach_then_reattach_restores_state() {
        let data = small_data();
        let mut state = PartitionState::single_cluster(&data);
        let before = state.clone();
        let out = state.detach(0, 1, 2.0);
        assert!(!out.removed);
        assert_eq!(state.cluster(0).counts.counts(), &[2, 2]);
        assert_eq!(state.cluster(0).counts.total(), 4);
        state.attach(0, 1, 2.0, AttachTarget::Existing(out.cluster));
        assert_eq!(state.cluster(0).counts, before.cluster(0).counts);
        assert!((state.cluster(0).sum - before.cluster(0).sum).abs() < 1e-12);
    }

    #[test]
    #[should_panic(expected = "already detached")]
    fn double_detach_panics() {
        let data = small_data();
        let mut state = PartitionState::single_cluster(&data);
        state.detach(0, 0, 1.0);
        state.detach(0, 0, 1.0);
    }

    #[test]
    fn swap_compaction_relabels_moved_cluster() {
        let data = GroupedDataset::from_groups(vec![vec![1.0, 2.0, 3.0]]);
        let mut state = PartitionState::single_cluster(&data);
        // clusters: 0 = {obs0}, 1 = {obs1}, 2 = {obs2}
        state.detach(0, 1, 2.0);
        state.attach(0, 1, 2.0, AttachTarget::New { atom: 0.0 });
        state.detach(0, 2, 3.0);
        state.attach(0, 2, 3.0, AttachTarget::New { atom: 0.0 });
        assert_eq!(state.n_clusters(), 3);
        // emptying cluster 0 must pull cluster 2 into slot 0
        let out = state.detach(0, 0, 1.0);
        assert!(out.removed);
        assert_eq!(out.moved_from, Some(2));
        assert_eq!(state.assignment(0, 2), Some(0));
        state.attach(0, 0, 1.0, AttachTarget::Existing(1));
        assert!(state.recount(&data).is_clean());
    }

    #[test]
    fn recount_flags_injected_corruption() {
        let data = small_data();
        let mut state = PartitionState::single_cluster(&data);
        state.clusters[0].counts.increment(0); // corrupt on purpose
        let report = state.recount(&data);
        assert!(!report.is_clean());
        assert!(report.mismatches.iter().any(|m| matches!(
            m,
            RecountMismatch::GroupCount { cluster: 0, group: 0, .. }
        )));
    }

    #[test]
    fn per_group_and_random_inits_are_consistent() {
        let data = small_data();
        let state = PartitionState::per_group(&data);
        assert_eq!(state.n_clusters(), 2);
        assert!(state.recount(&data).is_clean());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let state = PartitionState::random(&data, 4, &mut rng);
        assert!(state.n_clusters() >= 1 && state.n_clusters() <= 4);
        assert!(state.recount(&data).is_clean());
    }

    #[test]
    fn long_random_walk_of_moves_keeps_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let data = GroupedDataset::from_groups(vec![
            (0..40).map(|i| i as f64).collect(),
            (0..25).map(|i| -(i as f64)).collect(),
            (0..35).map(|i| 0.5 * i as f64).collect(),
        ]);
        let mut state = PartitionState::single_cluster(&data);
        for _ in 0..10_000 {
            let i = rng.random_range(0..3);
            let j = rng.random_range(0..data.groups()[i].len());
            let x = data.groups()[i][j];
            state.detach(i, j, x);
            if state.n_clusters() == 0 || rng.random_range(0..4) == 0 {
                state.attach(i, j, x, AttachTarget::New { atom: 0.0 });
            } else {
                let k = rng.random_range(0..state.n_clusters());
                state.attach(i, j, x, AttachTarget::Existing(k));
            }
        }
        assert!(state.recount(&data).is_clean());
    }

    proptest! {
        #[test]
        fn random_move_sequences_always_recount_clean(seed in 0u64..500, moves in 1usize..400) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = GroupedDataset::from_groups(vec![
                (0..7).map(|i| i as f64).collect(),
                (0..5).map(|i| 10.0 + i as f64).collect(),
            ]);
            let mut state = PartitionState::random(&data, 3, &mut rng);
            for _ in 0..moves {
                let i = rng.random_range(0..2usize);
                let j = rng.random_range(0..data.groups()[i].len());
                let x = data.groups()[i][j];
                state.detach(i, j, x);
                if state.n_clusters() == 0 || rng.random_range(0..3) == 0 {
                    state.attach(i, j, x, AttachTarget::New { atom: 0.0 });
                } else {
                    let k = rng.random_range(0..state.n_clusters());
                    state.attach(i, j, x, AttachTarget::Existing(k));
                }
            }
            prop_assert!(state.recount(&data).is_clean());
            // labels form a contiguous range
            for k in 0..state.n_clusters() {
                prop_assert!(state.cluster(k).size() >= 1);
            }
        }
    }
}
