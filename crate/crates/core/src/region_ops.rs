//! Region extraction and merging on top of a sign map.
//!
//! Pixels sharing a sign value form 4-connected regions, labeled in raster
//! order of first encounter. Regions then merge bottom-up: each round joins
//! the adjacent pair whose mean intensities are closest, until a target
//! region count is reached. [`merge_once`] applies a single round literally;
//! [`merge_to_target`] reaches the same states through a priority queue and
//! is what the pipeline runs.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};

use crate::error::Error;
use crate::fmt::format_sig12;
use crate::pgm_io::{GrayImage, LabelMap, SignMap};

/// Per-region summary maintained through merges.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionStats {
    /// Current region id; always equals the region's index in the partition.
    pub region_id: u32,
    pub pixel_count: usize,
    /// Mean image intensity over the region's pixels.
    pub mean_gray: f64,
    /// Ids of regions sharing at least one 4-neighbor interface.
    pub neighbors: BTreeSet<u32>,
}

/// A label map plus per-region statistics that stay consistent with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    label_map: LabelMap,
    regions: Vec<RegionStats>,
}

impl Partition {
    pub fn label_map(&self) -> &LabelMap {
        &self.label_map
    }

    pub fn regions(&self) -> &[RegionStats] {
        &self.regions
    }

    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    /// CSV with header `region_id,pixel_count,mean_gray`, one row per region
    /// in id order; means carry at least twelve significant digits.
    pub fn regions_csv(&self) -> String {
        let mut out = String::from("region_id,pixel_count,mean_gray\n");
        for region in &self.regions {
            out.push_str(&region.region_id.to_string());
            out.push(',');
            out.push_str(&region.pixel_count.to_string());
            out.push(',');
            out.push_str(&format_sig12(region.mean_gray));
            out.push('\n');
        }
        out
    }
}

/// Labels maximal 4-connected runs of equal sign. Ids are assigned in raster
/// order of each region's first pixel; means come from the image.
pub fn group_regions(signs: &SignMap, img: &GrayImage) -> Result<Partition, Error> {
    let (w, h) = (signs.width(), signs.height());
    if (w, h) != (img.width(), img.height()) {
        return Err(Error::DimensionMismatch {
            left_width: w,
            left_height: h,
            right_width: img.width(),
            right_height: img.height(),
        });
    }
    let n = w * h;
    // One label per pixel in the worst case, plus the sentinel.
    if n >= u32::MAX as usize {
        return Err(Error::ImageTooLarge {
            width: w,
            height: h,
        });
    }

    const UNLABELED: u32 = u32::MAX;
    let s = signs.signs();
    let mut labels = vec![UNLABELED; n];
    let mut next_label = 0u32;
    let mut queue = VecDeque::new();
    for seed in 0..n {
        if labels[seed] != UNLABELED {
            continue;
        }
        let label = next_label;
        next_label += 1;
        labels[seed] = label;
        queue.push_back(seed);
        while let Some(idx) = queue.pop_front() {
            let (x, y) = (idx % w, idx / w);
            let mut visit = |nidx: usize| {
                if labels[nidx] == UNLABELED && s[nidx] == s[idx] {
                    labels[nidx] = label;
                    queue.push_back(nidx);
                }
            };
            if x > 0 {
                visit(idx - 1);
            }
            if x + 1 < w {
                visit(idx + 1);
            }
            if y > 0 {
                visit(idx - w);
            }
            if y + 1 < h {
                visit(idx + w);
            }
        }
    }

    let region_count = next_label as usize;
    let mut counts = vec![0usize; region_count];
    let mut sums = vec![0.0f64; region_count];
    for (&label, &g) in labels.iter().zip(img.intensities()) {
        counts[label as usize] += 1;
        sums[label as usize] += g;
    }

    let mut neighbor_sets = vec![BTreeSet::new(); region_count];
    for y in 0..h {
        for x in 0..w {
            let here = labels[y * w + x];
            let mut link = |other: u32| {
                if other != here {
                    neighbor_sets[here as usize].insert(other);
                    neighbor_sets[other as usize].insert(here);
                }
            };
            if x + 1 < w {
                link(labels[y * w + x + 1]);
            }
            if y + 1 < h {
                link(labels[(y + 1) * w + x]);
            }
        }
    }

    let regions = (0..region_count)
        .map(|i| RegionStats {
            region_id: i as u32,
            pixel_count: counts[i],
            mean_gray: sums[i] / counts[i] as f64,
            neighbors: std::mem::take(&mut neighbor_sets[i]),
        })
        .collect();
    Ok(Partition {
        label_map: LabelMap::from_raw(w, h, labels, region_count),
        regions,
    })
}

/// Adjacency pairs `(low, high)` over region ids, in ascending order.
pub fn build_rag(partition: &Partition) -> BTreeSet<(u32, u32)> {
    let mut rag = BTreeSet::new();
    for region in &partition.regions {
        for &neighbor in &region.neighbors {
            if region.region_id < neighbor {
                rag.insert((region.region_id, neighbor));
            }
        }
    }
    rag
}

/// Pixel-count-weighted mean of two merged regions. Shared by both merge
/// entry points so their arithmetic agrees to the bit.
fn merged_mean(count_a: usize, mean_a: f64, count_b: usize, mean_b: f64) -> f64 {
    let ca = count_a as f64;
    let cb = count_b as f64;
    (ca * mean_a + cb * mean_b) / (ca + cb)
}

/// Merge priority of an adjacent pair, lower first.
fn pair_diff(mean_low_id: f64, mean_high_id: f64) -> f64 {
    (mean_low_id - mean_high_id).abs()
}

/// Joins the adjacent pair with the closest means; ties pick the
/// lexicographically smallest `(low, high)` id pair. The merged region keeps
/// the lower id and every id above the absorbed one shifts down by one, so
/// ids stay contiguous and order-preserving.
pub fn merge_once(partition: &Partition) -> Result<Partition, Error> {
    let count = partition.region_count();
    if count < 2 {
        return Err(Error::TooFewRegions { count });
    }
    let regions = &partition.regions;
    let mut best: Option<(f64, u32, u32)> = None;
    for &(a, b) in &build_rag(partition) {
        let diff = pair_diff(regions[a as usize].mean_gray, regions[b as usize].mean_gray);
        if best.is_none_or(|(best_diff, _, _)| diff < best_diff) {
            best = Some((diff, a, b));
        }
    }
    let (_, a, b) = best.expect("a partition of a grid with 2+ regions has adjacent pairs");
    Ok(apply_merge(partition, a, b))
}

fn apply_merge(partition: &Partition, a: u32, b: u32) -> Partition {
    debug_assert!(a < b);
    let remap = |label: u32| {
        if label == b {
            a
        } else if label > b {
            label - 1
        } else {
            label
        }
    };
    let labels: Vec<u32> = partition
        .label_map
        .labels()
        .iter()
        .map(|&l| remap(l))
        .collect();

    let old = &partition.regions;
    let (ra, rb) = (&old[a as usize], &old[b as usize]);
    let mut regions = Vec::with_capacity(old.len() - 1);
    for region in old {
        if region.region_id == b {
            continue;
        }
        let (pixel_count, mean_gray, neighbors) = if region.region_id == a {
            (
                ra.pixel_count + rb.pixel_count,
                merged_mean(ra.pixel_count, ra.mean_gray, rb.pixel_count, rb.mean_gray),
                ra.neighbors
                    .union(&rb.neighbors)
                    .copied()
                    .filter(|&n| n != a && n != b)
                    .map(remap)
                    .collect(),
            )
        } else {
            (
                region.pixel_count,
                region.mean_gray,
                region.neighbors.iter().copied().map(remap).collect(),
            )
        };
        regions.push(RegionStats {
            region_id: remap(region.region_id),
            pixel_count,
            mean_gray,
            neighbors,
        });
    }

    let (w, h) = (partition.label_map.width(), partition.label_map.height());
    Partition {
        label_map: LabelMap::from_raw(w, h, labels, regions.len()),
        regions,
    }
}

/// Candidate pair in the merge queue; stamps tie it to the merge history of
/// both regions so superseded entries can be recognized and dropped.
#[derive(Debug, PartialEq)]
struct PairEntry {
    diff: f64,
    a: u32,
    b: u32,
    stamp_a: u64,
    stamp_b: u64,
}

impl Eq for PairEntry {}

impl Ord for PairEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.diff
            .total_cmp(&other.diff)
            .then_with(|| (self.a, self.b, self.stamp_a, self.stamp_b)
                .cmp(&(other.a, other.b, other.stamp_a, other.stamp_b)))
    }
}

impl PartialOrd for PairEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Repeats closest-pair merging until at most `target` regions remain
/// (`target` is clamped to 1; a partition already at or below it is returned
/// unchanged). Produces exactly the partition that iterating [`merge_once`]
/// would, including bit-identical means: both draw the pair priority from
/// [`pair_diff`] and the combined mean from [`merged_mean`], and because
/// [`merge_once`]'s id compaction preserves relative order, its
/// lexicographic tie-break agrees with this queue's ordering by the ids
/// regions held when merging started.
pub fn merge_to_target(partition: &Partition, target: usize) -> Partition {
    let target = target.max(1);
    let initial_count = partition.region_count();
    if initial_count <= target {
        return partition.clone();
    }

    let mut alive = vec![true; initial_count];
    let mut counts: Vec<usize> = partition.regions.iter().map(|r| r.pixel_count).collect();
    let mut means: Vec<f64> = partition.regions.iter().map(|r| r.mean_gray).collect();
    let mut neighbor_sets: Vec<BTreeSet<u32>> = partition
        .regions
        .iter()
        .map(|r| r.neighbors.clone())
        .collect();
    let mut stamps = vec![0u64; initial_count];
    let mut parents: Vec<u32> = (0..initial_count as u32).collect();

    let mut heap = BinaryHeap::new();
    for &(a, b) in &build_rag(partition) {
        heap.push(Reverse(PairEntry {
            diff: pair_diff(means[a as usize], means[b as usize]),
            a,
            b,
            stamp_a: 0,
            stamp_b: 0,
        }));
    }

    let mut live = initial_count;
    while live > target {
        let Reverse(entry) = heap
            .pop()
            .expect("live regions on a connected grid always have adjacent pairs");
        let (a, b) = (entry.a as usize, entry.b as usize);
        if !alive[a] || !alive[b] || stamps[a] != entry.stamp_a || stamps[b] != entry.stamp_b {
            continue;
        }

        means[a] = merged_mean(counts[a], means[a], counts[b], means[b]);
        counts[a] += counts[b];
        alive[b] = false;
        parents[b] = entry.a;
        stamps[a] += 1;
        live -= 1;

        let absorbed = std::mem::take(&mut neighbor_sets[b]);
        neighbor_sets[a].remove(&entry.b);
        for &n in &absorbed {
            if n == entry.a {
                continue;
            }
            neighbor_sets[n as usize].remove(&entry.b);
            neighbor_sets[n as usize].insert(entry.a);
            neighbor_sets[a].insert(n);
        }
        for &n in &neighbor_sets[a] {
            let (lo, hi) = if entry.a < n { (entry.a, n) } else { (n, entry.a) };
            heap.push(Reverse(PairEntry {
                diff: pair_diff(means[lo as usize], means[hi as usize]),
                a: lo,
                b: hi,
                stamp_a: stamps[lo as usize],
                stamp_b: stamps[hi as usize],
            }));
        }
    }

    // Survivors take fresh contiguous ids in the order of their original ids,
    // matching the order iterated compaction would leave them in.
    let mut ranks = vec![0u32; initial_count];
    let mut next_rank = 0u32;
    for (i, &is_alive) in alive.iter().enumerate() {
        if is_alive {
            ranks[i] = next_rank;
            next_rank += 1;
        }
    }
    let root = |parents: &mut [u32], start: u32| -> u32 {
        let mut i = start;
        while parents[i as usize] != i {
            parents[i as usize] = parents[parents[i as usize] as usize];
            i = parents[i as usize];
        }
        i
    };
    let labels: Vec<u32> = partition
        .label_map
        .labels()
        .iter()
        .map(|&l| ranks[root(&mut parents, l) as usize])
        .collect();
    let regions: Vec<RegionStats> = (0..initial_count)
        .filter(|&i| alive[i])
        .map(|i| RegionStats {
            region_id: ranks[i],
            pixel_count: counts[i],
            mean_gray: means[i],
            neighbors: neighbor_sets[i]
                .iter()
                .map(|&n| ranks[n as usize])
                .collect(),
        })
        .collect();

    let (w, h) = (partition.label_map.width(), partition.label_map.height());
    Partition {
        label_map: LabelMap::from_raw(w, h, labels, regions.len()),
        regions,
    }
}
