use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AnomalyError;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average unsuccessful-search path length in a binary search tree of n
/// nodes; normalises isolation depths.
pub fn c_factor(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthLimit {
    /// ceil(log2 sample_size), the usual choice.
    Auto,
    /// Grow until every point is isolated.
    Unlimited,
    At(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    pub trees: usize,
    /// Points drawn (without replacement) per tree; `None` uses min(256, n).
    pub sample_size: Option<usize>,
    pub max_depth: DepthLimit,
    pub seed: u64,
}

impl ForestConfig {
    pub fn new(trees: usize, seed: u64) -> Self {
        Self {
            trees,
            sample_size: None,
            max_depth: DepthLimit::Auto,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        size: usize,
    },
    Split {
        dim: usize,
        at: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone)]
pub struct IsolationForest {
    trees: Vec<Node>,
    sample_size: usize,
}

fn build(points: &[&[f64]], depth: usize, limit: Option<usize>, rng: &mut ChaCha8Rng) -> Node {
    if points.len() <= 1 || limit.is_some_and(|l| depth >= l) {
        return Node::Leaf { size: points.len() };
    }
    let dims = points[0].len();
    let spread: Vec<(usize, f64, f64)> = (0..dims)
        .filter_map(|d| {
            let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p[d]), hi.max(p[d]))
            });
            (hi > lo).then_some((d, lo, hi))
        })
        .collect();
    if spread.is_empty() {
        return Node::Leaf { size: points.len() };
    }
    let (dim, lo, hi) = spread[rng.random_range(0..spread.len())];
    let mut at = lo + rng.random::<f64>() * (hi - lo);
    if at <= lo {
        at = lo + (hi - lo) * 0.5;
    }
    let (left, right): (Vec<&[f64]>, Vec<&[f64]>) = points.iter().partition(|p| p[dim] < at);
    Node::Split {
        dim,
        at,
        left: Box::new(build(&left, depth + 1, limit, rng)),
        right: Box::new(build(&right, depth + 1, limit, rng)),
    }
}

fn path_length(node: &Node, x: &[f64], depth: usize) -> f64 {
    match node {
        Node::Leaf { size } => depth as f64 + c_factor(*size),
        Node::Split { dim, at, left, right } => {
            if x[*dim] < *at {
                path_length(left, x, depth + 1)
            } else {
                path_length(right, x, depth + 1)
            }
        }
    }
}

impl IsolationForest {
    pub fn fit(points: &[Vec<f64>], config: ForestConfig) -> Result<Self, AnomalyError> {
        if points.len() < 2 {
            return Err(AnomalyError::TooFewPoints {
                need: 2,
                got: points.len(),
            });
        }
        let dims = points[0].len();
        if dims == 0 || points.iter().any(|p| p.len() != dims) {
            return Err(AnomalyError::Shape);
        }
        let psi = config.sample_size.unwrap_or(256).clamp(2, points.len());
        let limit = match config.max_depth {
            DepthLimit::Auto => Some((psi as f64).log2().ceil() as usize),
            DepthLimit::Unlimited => None,
            DepthLimit::At(d) => Some(d),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let trees = (0..config.trees.max(1))
            .map(|_| {
                let sample: Vec<&[f64]> = if psi == points.len() {
                    points.iter().map(Vec::as_slice).collect()
                } else {
                    rand::seq::index::sample(&mut rng, points.len(), psi)
                        .into_iter()
                        .map(|i| points[i].as_slice())
                        .collect()
                };
                build(&sample, 0, limit, &mut rng)
            })
            .collect();
        Ok(Self {
            trees,
            sample_size: psi,
        })
    }

    /// Mean path length of `x` over all trees.
    pub fn mean_depth(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| path_length(t, x, 0)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        2f64.powf(-self.mean_depth(x) / c_factor(self.sample_size))
    }
}

/// Standard isolation-forest scores in [0, 1]; higher is more anomalous.
/// Subsample min(256, n), depth limit ceil(log2 subsample).
pub fn isolation_forest_scores(points: &[Vec<f64>], trees: usize, seed: u64) -> Result<Vec<f64>, AnomalyError> {
    if points.len() < 8 {
        return Err(AnomalyError::TooFewPoints {
            need: 8,
            got: points.len(),
        });
    }
    let forest = IsolationForest::fit(points, ForestConfig::new(trees, seed))?;
    Ok(points.iter().map(|p| forest.score(p)).collect())
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    fn cluster_with_outlier() -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts: Vec<Vec<f64>> = (0..100)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        pts.push(vec![25.0, -30.0]);
        pts
    }

    #[test]
    fn outlier_scores_highest() {
        let pts = cluster_with_outlier();
        let s = isolation_forest_scores(&pts, 100, 7).unwrap();
        let argmax = (0..s.len()).max_by(|a, b| s[*a].total_cmp(&s[*b])).unwrap();
        assert_eq!(argmax, 100);
        assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn deterministic_under_seed() {
        let pts = cluster_with_outlier();
        assert_eq!(
            isolation_forest_scores(&pts, 50, 3).unwrap(),
            isolation_forest_scores(&pts, 50, 3).unwrap()
        );
    }

    #[test]
    fn needs_eight_points() {
        assert!(isolation_forest_scores(&vec![vec![0.0]; 7], 10, 0).is_err());
    }

    #[test]
    fn c_factor_values() {
        assert_eq!(c_factor(1), 0.0);
        assert_eq!(c_factor(2), 1.0);
        // 2 (ln 255 + gamma) - 2 * 255 / 256
        assert!((c_factor(256) - 10.244_770_920_116_851).abs() < 1e-9);
    }

    /// Exact expected isolation depth of point `i` in a fully grown random
    /// tree over `set` (a bitmask): uniform over spread dimensions, split
    /// point uniform over the range, so the expectation is a length-weighted
    /// sum over the gaps between sorted coordinates.
    fn exact_depth(pts: &[[f64; 2]], set: u32, i: usize, memo: &mut HashMap<(u32, usize), f64>) -> f64 {
        if set.count_ones() <= 1 {
            return 0.0;
        }
        if let Some(v) = memo.get(&(set, i)) {
            return *v;
        }
        let members: Vec<usize> = (0..pts.len()).filter(|j| set & (1 << j) != 0).collect();
        let mut dims = Vec::new();
        for d in 0..2 {
            let mut vals: Vec<f64> = members.iter().map(|j| pts[*j][d]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            if vals.len() > 1 {
                dims.push((d, vals));
            }
        }
        if dims.is_empty() {
            return 0.0;
        }
        let mut total = 0.0;
        for (d, vals) in &dims {
            let range = vals[vals.len() - 1] - vals[0];
            let mut e = 0.0;
            for w in vals.windows(2) {
                let p = (w[1] - w[0]) / range;
                let side: u32 = members
                    .iter()
                    .filter(|j| (pts[**j][*d] < w[1]) == (pts[i][*d] < w[1]))
                    .fold(0, |acc, j| acc | (1 << j));
                e += p * exact_depth(pts, side, i, memo);
            }
            total += e / dims.len() as f64;
        }
        let v = 1.0 + total;
        memo.insert((set, i), v);
        v
    }

    #[test]
    fn depths_match_exhaustive_enumeration() {
        let pts: [[f64; 2]; 16] = [
            [0.0, 0.0],
            [1.0, 0.2],
            [0.3, 1.1],
            [1.2, 1.0],
            [0.6, 0.5],
            [0.1, 0.7],
            [0.9, 0.8],
            [0.4, 0.1],
            [1.4, 0.4],
            [0.7, 1.3],
            [0.2, 0.4],
            [1.1, 0.6],
            [0.5, 0.9],
            [0.8, 0.3],
            [6.0, 5.0],
            [3.0, -2.0],
        ];
        let mut memo = HashMap::new();
        let full = (1u32 << 16) - 1;
        let exact: Vec<f64> = (0..16).map(|i| exact_depth(&pts, full, i, &mut memo)).collect();

        let as_vecs: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
        let forest = IsolationForest::fit(
            &as_vecs,
            ForestConfig {
                trees: 4000,
                sample_size: Some(16),
                max_depth: DepthLimit::Unlimited,
                seed: 11,
            },
        )
        .unwrap();
        for (i, p) in as_vecs.iter().enumerate() {
            let est = forest.mean_depth(p);
            assert!(
                (est - exact[i]).abs() < 0.12,
                "point {i}: forest {est} vs exact {}",
                exact[i]
            );
        }
        // Rankings agree wherever the exact depths are clearly separated.
        for a in 0..16 {
            for b in 0..16 {
                if exact[a] + 0.3 < exact[b] {
                    assert!(forest.mean_depth(&as_vecs[a]) < forest.mean_depth(&as_vecs[b]));
                }
            }
        }
    }
}
