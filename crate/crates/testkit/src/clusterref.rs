//! From-scratch agglomerative clustering oracle.
//!
//! Recomputes point distances from raw vectors at every step (no cached
//! distance matrix), keeps clusters as sorted index vectors (no id map),
//! and merges the closest pair while its linkage distance stays within the
//! threshold. Distances sum in ascending member order, matching the
//! canonical accumulation order of the implementation under test, so the
//! partitions must agree exactly — not merely approximately.

use flowmine_core::cluster::Linkage;

fn unit_normalize(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| {
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            p.iter().map(|v| v / norm).collect()
        })
        .collect()
}

fn point_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn merge_distance(linkage: Linkage, unit: &[Vec<f64>], a: &[usize], b: &[usize]) -> f64 {
    match linkage {
        Linkage::Average => {
            let mut sum = 0.0;
            for &x in a {
                for &y in b {
                    sum += point_distance(&unit[x], &unit[y]);
                }
            }
            sum / ((a.len() * b.len()) as f64)
        }
        Linkage::Complete => {
            let mut max = f64::NEG_INFINITY;
            for &x in a {
                for &y in b {
                    max = max.max(point_distance(&unit[x], &unit[y]));
                }
            }
            max
        }
        Linkage::Single => {
            let mut min = f64::INFINITY;
            for &x in a {
                for &y in b {
                    min = min.min(point_distance(&unit[x], &unit[y]));
                }
            }
            min
        }
    }
}

/// Partition of point indices by naive agglomerative clustering.
///
/// Points are unit-normalized and compared by Euclidean distance. The pair
/// with the strictly smallest linkage distance merges while that distance
/// is at most `threshold`; distance ties keep the earliest pair in
/// smallest-member order. Clusters come back with ascending members,
/// ordered by their smallest member.
pub fn reference_partition(
    points: &[Vec<f64>],
    threshold: f64,
    linkage: Linkage,
) -> Vec<Vec<usize>> {
    let unit = unit_normalize(points);
    let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let d = merge_distance(linkage, &unit, &clusters[a], &clusters[b]);
                let better = match best {
                    None => true,
                    Some((best_d, _, _)) => d.total_cmp(&best_d).is_lt(),
                };
                if better {
                    best = Some((d, a, b));
                }
            }
        }
        match best {
            Some((d, a, b)) if d <= threshold => {
                let absorbed = clusters.remove(b);
                clusters[a].extend(absorbed);
                clusters[a].sort_unstable();
                clusters.sort_by_key(|c| c[0]);
            }
            _ => break,
        }
    }
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_collapse_and_distant_points_stay_apart() {
        let points = vec![
            vec![1.0, 0.0],
            vec![2.0, 0.0], // same direction as the first: distance 0
            vec![0.0, 1.0],
        ];
        let partition = reference_partition(&points, 0.5, Linkage::Average);
        assert_eq!(partition, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn zero_threshold_still_merges_coincident_points() {
        let points = vec![vec![0.0, 3.0], vec![0.0, 5.0]];
        assert_eq!(
            reference_partition(&points, 0.0, Linkage::Single),
            vec![vec![0, 1]]
        );
    }

    #[test]
    fn empty_input_yields_no_clusters() {
        assert!(reference_partition(&[], 1.0, Linkage::Complete).is_empty());
    }
}
