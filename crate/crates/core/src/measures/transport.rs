//! Exact quadratic transport between discrete measures (transportation simplex).

use std::collections::VecDeque;

use super::DiscreteMeasure;
use crate::error::{Error, Result};

/// Combined support handled by [`t2_distance`].
pub const EXACT_SUPPORT_LIMIT: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub cost: f64,
    /// Basic cells `(source, sink, mass)`; degenerate cells carry zero mass.
    pub flows: Vec<(usize, usize, f64)>,
    pub pivots: usize,
}

/// `T₂(mu, nu)`: optimal expected squared distance over couplings.
///
/// Exact for combined support up to [`EXACT_SUPPORT_LIMIT`] atoms.
pub fn t2_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if mu.len() + nu.len() > EXACT_SUPPORT_LIMIT {
        return Err(Error::Capability(format!(
            "combined support {} exceeds the exact-solver limit of {EXACT_SUPPORT_LIMIT}; \
             subsample the measures first",
            mu.len() + nu.len()
        )));
    }
    t2_distance_with_limit(mu, nu, usize::MAX)
}

/// As [`t2_distance`], bounded instead by the number of plan cells
/// (`|supp mu| * |supp nu|`). Suited to tall problems such as many path
/// endpoints against a handful of atoms.
pub fn t2_distance_with_limit(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    max_cells: usize,
) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::Input(format!(
            "measures live in dimensions {} and {}",
            mu.dim(),
            nu.dim()
        )));
    }
    let (a, b) = (mu.support(), nu.support());
    if a.len().saturating_mul(b.len()) > max_cells {
        return Err(Error::Capability(format!(
            "{} x {} transport plan exceeds {max_cells} cells; subsample the measures first",
            a.len(),
            b.len()
        )));
    }
    let cost: Vec<f64> = (0..a.len())
        .flat_map(|i| {
            let (x, b) = (a.atom(i), &b);
            (0..b.len()).map(move |j| x.iter().zip(b.atom(j)).map(|(p, q)| (p - q).powi(2)).sum())
        })
        .collect();
    Ok(solve_transport(a.weights(), b.weights(), &cost)?.cost)
}

/// Balanced transportation problem with a row-major `supply.len() x demand.len()`
/// cost table.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportPlan> {
    let (m, k) = (supply.len(), demand.len());
    if m == 0 || k == 0 || cost.len() != m * k {
        return Err(Error::Input("transport problem shape mismatch".into()));
    }
    let c = |i: usize, j: usize| cost[i * k + j];

    // north-west corner start: exactly m + k - 1 basic cells forming a spanning tree
    let mut basis: Vec<(usize, usize, f64)> = Vec::with_capacity(m + k - 1);
    let (mut s, mut d) = (supply[0], demand[0]);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = s.min(d).max(0.0);
        basis.push((i, j, x));
        s -= x;
        d -= x;
        if i == m - 1 && j == k - 1 {
            break;
        }
        if (s <= d && i < m - 1) || j == k - 1 {
            i += 1;
            s = supply[i];
        } else {
            j += 1;
            d = demand[j];
        }
    }

    let scale = cost.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-300);
    let tol = 1e-12 * scale;
    let max_pivots = 50 * (m + k) * (m.min(k) + 1) + 1000;
    let nodes = m + k; // rows 0..m, columns m..m+k
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; k];
    let mut pivots = 0;

    loop {
        for a in adj.iter_mut() {
            a.clear();
        }
        for (e, &(bi, bj, _)) in basis.iter().enumerate() {
            adj[bi].push(e);
            adj[m + bj].push(e);
        }

        // dual potentials over the basis tree
        let mut seen = vec![false; nodes];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        u[0] = 0.0;
        while let Some(node) = queue.pop_front() {
            for &e in &adj[node] {
                let (bi, bj, _) = basis[e];
                let (next, is_col) = if node < m { (m + bj, true) } else { (bi, false) };
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                if is_col {
                    v[bj] = c(bi, bj) - u[bi];
                } else {
                    u[bi] = c(bi, bj) - v[bj];
                }
                queue.push_back(next);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Numerical("transport basis lost its spanning-tree shape".into()));
        }

        // Dantzig entering rule
        let mut best = (-tol, usize::MAX, usize::MAX);
        for ii in 0..m {
            let row = &cost[ii * k..(ii + 1) * k];
            for (jj, &cij) in row.iter().enumerate() {
                let r = cij - u[ii] - v[jj];
                if r < best.0 {
                    best = (r, ii, jj);
                }
            }
        }
        if best.1 == usize::MAX {
            break;
        }
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Numerical(format!("transport simplex exceeded {max_pivots} pivots")));
        }
        let (ei, ej) = (best.1, best.2);

        // tree path from row ei to column ej
        let mut parent: Vec<Option<usize>> = vec![None; nodes];
        let mut seen = vec![false; nodes];
        seen[ei] = true;
        let mut queue = VecDeque::from([ei]);
        while let Some(node) = queue.pop_front() {
            if node == m + ej {
                break;
            }
            for &e in &adj[node] {
                let (bi, bj, _) = basis[e];
                let next = if node < m { m + bj } else { bi };
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some(e);
                    queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = m + ej;
        while node != ei {
            let e = parent[node].expect("tree path exists");
            path.push(e);
            let (bi, bj, _) = basis[e];
            node = if node < m { m + bj } else { bi };
        }
        path.reverse(); // path[0] touches row ei and loses mass

        let (mut theta, mut leave) = (f64::INFINITY, usize::MAX);
        for &e in path.iter().step_by(2) {
            if basis[e].2 < theta {
                theta = basis[e].2;
                leave = e;
            }
        }
        for (step, &e) in path.iter().enumerate() {
            if step % 2 == 0 {
                basis[e].2 = (basis[e].2 - theta).max(0.0);
            } else {
                basis[e].2 += theta;
            }
        }
        basis[leave] = (ei, ej, theta);
    }

    let total = basis.iter().map(|&(bi, bj, x)| x * c(bi, bj)).sum();
    Ok(TransportPlan { cost: total, flows: basis, pivots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(points.iter().map(|&p| vec![p]).collect(), weights.to_vec()).unwrap()
    }

    #[test]
    fn identical_measures_cost_nothing() {
        let mu = line(&[0.0, 1.0, 3.0], &[0.2, 0.5, 0.3]);
        assert_relative_eq!(t2_distance(&mu, &mu).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn diracs_cost_squared_distance() {
        let a = DiscreteMeasure::dirac(vec![1.0, 2.0]).unwrap();
        let b = DiscreteMeasure::dirac(vec![-1.0, 0.5]).unwrap();
        assert_relative_eq!(t2_distance(&a, &b).unwrap(), 4.0 + 2.25);
    }

    #[test]
    fn quarter_mass_shift() {
        // couplings: pi00 = x in [0, 1/4], cost 3/4 - 2x; the two vertices are the oracle
        let mu = line(&[0.0, 1.0], &[0.5, 0.5]);
        let nu = line(&[0.0, 1.0], &[0.25, 0.75]);
        let vertex_costs = [0.75_f64, 0.25];
        let oracle = vertex_costs.iter().copied().fold(f64::INFINITY, f64::min);
        assert_relative_eq!(t2_distance(&mu, &nu).unwrap(), oracle, epsilon = 1e-14);
        assert_relative_eq!(oracle, 0.25);
    }

    #[test]
    fn too_large_is_capability_error() {
        let pts: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64]).collect();
        let mu = DiscreteMeasure::uniform(pts.clone()).unwrap();
        assert!(matches!(t2_distance(&mu, &mu), Err(Error::Capability(_))));
        assert!(t2_distance_with_limit(&mu, &mu, 1 << 20).is_ok());
    }

    #[test]
    fn dimension_mismatch() {
        let a = DiscreteMeasure::dirac(vec![1.0]).unwrap();
        let b = DiscreteMeasure::dirac(vec![1.0, 0.0]).unwrap();
        assert!(matches!(t2_distance(&a, &b), Err(Error::Input(_))));
    }
}
