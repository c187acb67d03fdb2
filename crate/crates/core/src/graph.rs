//! δ-neighbourhood graph with cached kernel weights.
//!
//! Brute-force search; every row is computed independently so the result does
//! not depend on the thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{dist_sq, KernelConfig};
use crate::zoo::PointCloud;

const ROW_CHUNK: usize = 512;

/// Distance below which two samples count as the same point.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// Symmetric CSR adjacency of samples within the cutoff radius, self-loops included.
#[derive(Clone, Debug)]
pub struct NeighborGraph {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    /// Φ_t χ_δ per edge.
    weights: Vec<f64>,
}

impl NeighborGraph {
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn weights(&self, i: usize) -> &[f64] {
        &self.weights[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.neighbors(i)
            .iter()
            .zip(self.weights(i))
            .map(|(&j, &w)| (j as usize, w))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn mean_degree(&self) -> f64 {
        self.edge_count() as f64 / self.len() as f64
    }

    /// Σ_j Φ_t χ_δ(x_i, x_j), self term included.
    pub fn kernel_sum(&self, i: usize) -> f64 {
        self.weights(i).iter().sum()
    }

    /// Samples whose only neighbour is themselves.
    pub fn isolated(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.degree(i) <= 1).collect()
    }

    /// Number of connected components.
    pub fn components(&self) -> usize {
        let m = self.len();
        let mut seen = vec![false; m];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..m {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(i) = stack.pop() {
                for &j in self.neighbors(i) {
                    let j = j as usize;
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        count
    }
}

/// All pairs with Φ_t χ_δ > 0.
pub fn build_graph(cloud: &PointCloud, config: &KernelConfig) -> Result<NeighborGraph> {
    config.validate()?;
    let m = cloud.len();
    if m > u32::MAX as usize {
        return Err(Error::Unsupported(format!("{m} samples")));
    }
    let d2max = config.delta * config.delta;
    let mut offsets = Vec::with_capacity(m + 1);
    offsets.push(0);
    let mut neighbors = Vec::new();
    let mut weights = Vec::new();
    for start in (0..m).step_by(ROW_CHUNK) {
        let end = (start + ROW_CHUNK).min(m);
        let rows: Vec<(Vec<u32>, Vec<f64>)> = (start..end)
            .into_par_iter()
            .map(|i| {
                let p = cloud.point(i);
                let mut nb = Vec::new();
                let mut wt = Vec::new();
                for (j, q) in cloud.iter().enumerate() {
                    let r2 = dist_sq(p, q);
                    if r2 < d2max {
                        let w = config.weight_sq(r2);
                        if w > 0.0 {
                            nb.push(j as u32);
                            wt.push(w);
                        }
                    }
                }
                (nb, wt)
            })
            .collect();
        for (nb, wt) in rows {
            neighbors.extend(nb);
            weights.extend(wt);
            offsets.push(neighbors.len());
        }
    }
    neighbors.shrink_to_fit();
    weights.shrink_to_fit();
    Ok(NeighborGraph {
        offsets,
        neighbors,
        weights,
    })
}

/// Distance from each sample to its k-th nearest other sample.
pub fn kth_neighbor_distances(cloud: &PointCloud, k: usize) -> Vec<f64> {
    let m = cloud.len();
    if m < 2 || k == 0 {
        return Vec::new();
    }
    let k = k.min(m - 1);
    (0..m)
        .into_par_iter()
        .map(|i| {
            let p = cloud.point(i);
            // ascending list of the k smallest squared distances
            let mut best = vec![f64::INFINITY; k];
            for (j, q) in cloud.iter().enumerate() {
                if j == i {
                    continue;
                }
                let r2 = dist_sq(p, q);
                if r2 < best[k - 1] {
                    let mut pos = k - 1;
                    while pos > 0 && best[pos - 1] > r2 {
                        best[pos] = best[pos - 1];
                        pos -= 1;
                    }
                    best[pos] = r2;
                }
            }
            best[k - 1].sqrt()
        })
        .collect()
}

/// Nearest-neighbour distance and index per sample.
pub fn nearest_neighbors(cloud: &PointCloud) -> Vec<(f64, usize)> {
    let m = cloud.len();
    (0..m)
        .into_par_iter()
        .map(|i| {
            let p = cloud.point(i);
            let mut best = (f64::INFINITY, i);
            for (j, q) in cloud.iter().enumerate() {
                if j != i {
                    let r2 = dist_sq(p, q);
                    if r2 < best.0 {
                        best = (r2, j);
                    }
                }
            }
            (best.0.sqrt(), best.1)
        })
        .collect()
}

/// Pairs (i, j), i < j, of coincident samples.
pub fn duplicate_pairs(cloud: &PointCloud) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = nearest_neighbors(cloud)
        .into_iter()
        .enumerate()
        .filter(|(_, (r, _))| *r <= DUPLICATE_TOL)
        .map(|(i, (_, j))| (i.min(j), i.max(j)))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Rejects clouds with coincident samples or a cutoff below the minimum spacing.
pub fn check_sampling(cloud: &PointCloud, config: &KernelConfig) -> Result<()> {
    if cloud.len() < 2 {
        return Ok(());
    }
    let nn = nearest_neighbors(cloud);
    if let Some((i, &(_, j))) = nn.iter().enumerate().find(|(_, (r, _))| *r <= DUPLICATE_TOL) {
        return Err(Error::DuplicatePoints {
            first: i.min(j),
            second: i.max(j),
        });
    }
    let spacing = nn.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    if config.delta < spacing {
        return Err(Error::CutoffBelowSpacing {
            delta: config.delta,
            spacing,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{sample, ManifoldSpec};

    #[test]
    fn tiny_cutoff_leaves_only_self_loops() {
        let cloud = sample(&ManifoldSpec::sphere(2, 1.0).unwrap(), 50, 1).unwrap();
        let cfg = KernelConfig::new(1e-8, 1e-3, 2, 4.0 * std::f64::consts::PI).unwrap();
        let g = build_graph(&cloud, &cfg).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.neighbors(i), &[i as u32]);
        }
        assert_eq!(g.isolated().len(), 50);
        assert!(matches!(
            check_sampling(&cloud, &cfg),
            Err(Error::CutoffBelowSpacing { .. })
        ));
    }

    #[test]
    fn huge_cutoff_gives_complete_graph() {
        let cloud = sample(&ManifoldSpec::sphere(2, 1.0).unwrap(), 40, 2).unwrap();
        let cfg = KernelConfig::new(0.1, 10.0, 2, 4.0 * std::f64::consts::PI).unwrap();
        let g = build_graph(&cloud, &cfg).unwrap();
        assert_eq!(g.edge_count(), 40 * 40);
        assert_eq!(g.components(), 1);
    }

    #[test]
    fn adjacency_is_symmetric() {
        let cloud = sample(&ManifoldSpec::flat_torus(2).unwrap(), 300, 4).unwrap();
        let cfg = KernelConfig::new(0.02, 0.6, 2, 1.0).unwrap();
        let g = build_graph(&cloud, &cfg).unwrap();
        for i in 0..g.len() {
            for (j, w) in g.row(i) {
                let back = g.row(j).find(|&(k, _)| k == i).expect("symmetric");
                assert_eq!(back.1, w);
                assert!(w > 0.0);
            }
        }
    }

    #[test]
    fn duplicates_are_found() {
        let mut rows: Vec<Vec<f64>> = sample(&ManifoldSpec::sphere(2, 1.0).unwrap(), 30, 5)
            .unwrap()
            .iter()
            .map(|p| p.to_vec())
            .collect();
        rows.push(rows[7].clone());
        let cloud = PointCloud::from_rows(&rows, 2).unwrap();
        assert_eq!(duplicate_pairs(&cloud), vec![(7, 30)]);
        let cfg = KernelConfig::new(0.01, 1.0, 2, 1.0).unwrap();
        assert!(matches!(
            check_sampling(&cloud, &cfg),
            Err(Error::DuplicatePoints { first: 7, second: 30 })
        ));
    }

    #[test]
    fn kth_distance_on_a_line() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0]).collect();
        let cloud = PointCloud::from_rows(&rows, 1).unwrap();
        let d = kth_neighbor_distances(&cloud, 2);
        assert_eq!(d[0], 2.0);
        assert_eq!(d[5], 1.0);
        assert_eq!(d[9], 2.0);
    }
}
