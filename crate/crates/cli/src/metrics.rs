use std::collections::BTreeMap;
use std::fmt::Display;

use crate::runner::{Algorithm, RunRecord};

/// z-value of a two-sided 95 % normal interval.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct RmsePoint {
    pub group_key: String,
    pub alg: Algorithm,
    pub rmse: f64,
    /// Half-width of the 95 % interval, from the normal approximation of the
    /// mean squared error propagated through the square root.
    pub ci95: f64,
    pub n: usize,
}

/// RMSE per `(key, algorithm)`; records mapped to `None` are skipped.
/// Output is sorted by key, then algorithm.
pub fn compute_rmse<K: Ord + Display>(
    records: &[RunRecord],
    key: impl Fn(&RunRecord) -> Option<K>,
) -> Vec<RmsePoint> {
    let mut groups: BTreeMap<(K, Algorithm), Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(k) = key(r) {
            let e = r.error();
            groups.entry((k, r.alg)).or_default().push(e * e);
        }
    }
    groups
        .into_iter()
        .map(|((k, alg), sq)| {
            let n = sq.len();
            let mean = sq.iter().sum::<f64>() / n as f64;
            let rmse = mean.sqrt();
            let ci95 = if n < 2 || rmse == 0.0 {
                0.0
            } else {
                let var = sq.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64;
                Z95 * (var / n as f64).sqrt() / (2.0 * rmse)
            };
            RmsePoint {
                group_key: k.to_string(),
                alg,
                rmse,
                ci95,
                n,
            }
        })
        .collect()
}

/// Neighbour-count bucket used by the sparse-connectivity experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct NeighborBucket(pub usize);

impl NeighborBucket {
    pub const TOP: usize = 4;

    pub fn of(neighbors: usize) -> Self {
        NeighborBucket(neighbors.min(Self::TOP))
    }
}

impl Display for NeighborBucket {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0 >= Self::TOP {
            write!(f, "{}+", Self::TOP)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use coloc_core::Position2D;

    fn rec(err: (f64, f64), alg: Algorithm) -> RunRecord {
        RunRecord {
            run: 0,
            slot: 1,
            agent: 0,
            alg,
            truth: Position2D::new(0.0, 0.0),
            estimate: Position2D::new(err.0, err.1),
            neighbors: 3,
        }
    }

    #[test]
    fn three_four_five() {
        let pts = compute_rmse(&[rec((3.0, 4.0), Algorithm::EkfStdf)], |_| Some(0));
        assert_eq!(pts.len(), 1);
        assert!((pts[0].rmse - 5.0).abs() < 1e-12);
        assert_eq!(pts[0].ci95, 0.0);
        assert_eq!(pts[0].n, 1);
    }

    #[test]
    fn mean_of_squares() {
        let recs = [
            rec((0.0, 0.0), Algorithm::Spawn),
            rec((0.0, 2.0), Algorithm::Spawn),
        ];
        let pts = compute_rmse(&recs, |_| Some("all"));
        assert!((pts[0].rmse - 2f64.sqrt()).abs() < 1e-12);
        assert!(pts[0].ci95 > 0.0);
    }

    #[test]
    fn groups_by_algorithm_and_skips_none() {
        let recs = [
            rec((1.0, 0.0), Algorithm::Spawn),
            rec((2.0, 0.0), Algorithm::EkfStdf),
        ];
        let pts = compute_rmse(&recs, |r| (r.alg == Algorithm::Spawn).then_some(1));
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].alg, Algorithm::Spawn);
    }

    #[test]
    fn bucket_labels() {
        assert_eq!(NeighborBucket::of(0).to_string(), "0");
        assert_eq!(NeighborBucket::of(9).to_string(), "4+");
    }
}
