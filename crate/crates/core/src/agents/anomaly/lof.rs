use super::AnomalyError;

/// Distance floor that keeps reachability densities finite for duplicates.
pub const LOF_EPSILON: f64 = 1e-9;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Local outlier factor with exactly `k` neighbours per point (ties broken
/// by index). Values near 1 are inliers; larger is more isolated.
pub fn lof_scores(points: &[Vec<f64>], k: usize) -> Result<Vec<f64>, AnomalyError> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(AnomalyError::BadK { k, n });
    }
    let dims = points[0].len();
    if points.iter().any(|p| p.len() != dims) {
        return Err(AnomalyError::Shape);
    }

    let mut neighbours = Vec::with_capacity(n);
    let mut k_dist = Vec::with_capacity(n);
    for (i, p) in points.iter().enumerate() {
        let mut d: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(j, q)| (dist(p, q), j))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.truncate(k);
        k_dist.push(d[k - 1].0);
        neighbours.push(d);
    }

    let lrd: Vec<f64> = neighbours
        .iter()
        .map(|nb| {
            let mean_reach = nb.iter().map(|(d, j)| d.max(k_dist[*j])).sum::<f64>() / k as f64;
            1.0 / mean_reach.max(LOF_EPSILON)
        })
        .collect();

    Ok(neighbours
        .iter()
        .enumerate()
        .map(|(i, nb)| nb.iter().map(|(_, j)| lrd[*j]).sum::<f64>() / (k as f64 * lrd[i]))
        .collect())
}
