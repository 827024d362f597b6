//! Finite-distribution stochastic order checks and the linear-sharing matrix
//! toolkit: stop-loss transforms, convex-order comparison, stochasticity
//! classification, clique pooling and majorization.

use thiserror::Error;

/// Default tolerance for stochasticity and conservation checks.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum OrderingError {
    #[error("distribution needs at least one atom")]
    EmptyDistribution,
    #[error("atom probability {0} must be positive")]
    BadProbability(f64),
    #[error("atom value {0} must be finite")]
    BadValue(f64),
    #[error("probabilities sum to {0}, expected 1")]
    ProbabilitiesOffOne(f64),
    #[error("matrix rows have inconsistent lengths")]
    RaggedMatrix,
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix entry ({i},{j}) = {value} is negative")]
    NegativeEntry { i: usize, j: usize, value: f64 },
    #[error("column {column} sums to {sum}, expected 1")]
    ColumnNotStochastic { column: usize, sum: f64 },
    #[error("dimension mismatch: matrix is {matrix}, operand is {operand}")]
    ShapeMismatch { matrix: usize, operand: usize },
    #[error("partition sums to {got}, expected {expected}")]
    BadPartition { got: usize, expected: usize },
    #[error("partition contains an empty clique")]
    EmptyClique,
    #[error("vectors have lengths {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("exact enumeration limited to {max_vars} variables with {max_atoms} atoms each")]
    EnumerationTooLarge { max_vars: usize, max_atoms: usize },
}

/// Finite discrete distribution: atoms sorted by value, duplicates merged,
/// probabilities positive and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteDist {
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, OrderingError> {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        if atoms.is_empty() {
            return Err(OrderingError::EmptyDistribution);
        }
        let mut total = 0.0;
        for &(value, prob) in &atoms {
            if !value.is_finite() {
                return Err(OrderingError::BadValue(value));
            }
            if !(prob > 0.0) || !prob.is_finite() {
                return Err(OrderingError::BadProbability(prob));
            }
            total += prob;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(OrderingError::ProbabilitiesOffOne(total));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (value, prob) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == value => last.1 += prob,
                _ => merged.push((value, prob)),
            }
        }
        Ok(DiscreteDist { atoms: merged })
    }

    pub fn point(value: f64) -> Self {
        DiscreteDist {
            atoms: vec![(value, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(v, p)| v * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.atoms
            .iter()
            .map(|&(v, p)| p * (v - mean).powi(2))
            .sum()
    }

    /// Stop-loss transform `E[(X - t)+]`.
    pub fn stop_loss(&self, t: f64) -> f64 {
        self.atoms
            .iter()
            .map(|&(v, p)| p * (v - t).max(0.0))
            .sum()
    }
}

/// Stop-loss transform of a finite distribution at threshold `t`.
pub fn stop_loss(dist: &DiscreteDist, t: f64) -> f64 {
    dist.stop_loss(t)
}

/// Outcome of a convex-order comparison between equal-mean risks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvexOrdering {
    /// Stop-loss curves agree within tolerance.
    Equal,
    /// First argument is dominated (less variable).
    XBelow,
    /// Second argument is dominated (less variable).
    YBelow,
    Incomparable,
    MeansDiffer,
}

/// Compares two finite distributions in the convex order by checking the
/// stop-loss transforms at every atom of the union support; for piecewise
/// linear stop-loss curves this is equivalent to dominance everywhere.
pub fn convex_order_compare(x: &DiscreteDist, y: &DiscreteDist, tol: f64) -> ConvexOrdering {
    if (x.mean() - y.mean()).abs() > tol {
        return ConvexOrdering::MeansDiffer;
    }
    let mut breakpoints: Vec<f64> = x
        .atoms()
        .iter()
        .chain(y.atoms())
        .map(|&(v, _)| v)
        .collect();
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();
    let mut x_below = true;
    let mut y_below = true;
    for &t in &breakpoints {
        let sx = x.stop_loss(t);
        let sy = y.stop_loss(t);
        if sx > sy + tol {
            x_below = false;
        }
        if sy > sx + tol {
            y_below = false;
        }
    }
    match (x_below, y_below) {
        (true, true) => ConvexOrdering::Equal,
        (true, false) => ConvexOrdering::XBelow,
        (false, true) => ConvexOrdering::YBelow,
        (false, false) => ConvexOrdering::Incomparable,
    }
}

/// Dense square matrix used for linear risk-sharing analysis. Entries are
/// validated for finiteness only; nonnegativity and stochasticity are
/// checked by the operations that need them.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl ShareMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, OrderingError> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                if rows.iter().any(|r| r.len() != rows[0].len()) {
                    return Err(OrderingError::RaggedMatrix);
                }
                return Err(OrderingError::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(OrderingError::BadValue(v));
                }
                data.push(v);
            }
        }
        Ok(ShareMatrix { n, data })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        ShareMatrix { n, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixClass {
    DoublyStochastic,
    ColumnStochastic,
    Neither,
}

impl std::fmt::Display for MatrixClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            MatrixClass::DoublyStochastic => "doubly_stochastic",
            MatrixClass::ColumnStochastic => "column_stochastic",
            MatrixClass::Neither => "neither",
        };
        f.write_str(tag)
    }
}

/// Classifies a nonnegative matrix by its row and column sums.
pub fn classify_matrix(m: &ShareMatrix, tol: f64) -> Result<MatrixClass, OrderingError> {
    let n = m.n();
    for i in 0..n {
        for j in 0..n {
            let v = m.get(i, j);
            if v < 0.0 {
                return Err(OrderingError::NegativeEntry { i, j, value: v });
            }
        }
    }
    let columns_ok = (0..n).all(|j| ((0..n).map(|i| m.get(i, j)).sum::<f64>() - 1.0).abs() <= tol);
    let rows_ok = (0..n).all(|i| (m.row(i).iter().sum::<f64>() - 1.0).abs() <= tol);
    Ok(match (columns_ok, rows_ok) {
        (true, true) => MatrixClass::DoublyStochastic,
        (true, false) => MatrixClass::ColumnStochastic,
        _ => MatrixClass::Neither,
    })
}

/// Applies a column-stochastic sharing matrix: `xi = M x`. Column sums must
/// be one within `tol` so the total is conserved.
pub fn apply_share(m: &ShareMatrix, x: &[f64], tol: f64) -> Result<Vec<f64>, OrderingError> {
    let n = m.n();
    if x.len() != n {
        return Err(OrderingError::ShapeMismatch {
            matrix: n,
            operand: x.len(),
        });
    }
    for j in 0..n {
        let sum: f64 = (0..n).map(|i| m.get(i, j)).sum();
        if (sum - 1.0).abs() > tol {
            return Err(OrderingError::ColumnNotStochastic { column: j, sum });
        }
    }
    Ok((0..n)
        .map(|i| m.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
        .collect())
}

/// Block-diagonal averaging matrix for a partition of `1..n` into cliques.
pub fn clique_share_matrix(sizes: &[usize]) -> Result<ShareMatrix, OrderingError> {
    if sizes.iter().any(|&k| k == 0) {
        return Err(OrderingError::EmptyClique);
    }
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return Err(OrderingError::EmptyClique);
    }
    let mut block = vec![0usize; n];
    let mut start = 0;
    for (c, &k) in sizes.iter().enumerate() {
        for node in start..start + k {
            block[node] = c;
        }
        start += k;
    }
    let sizes = sizes.to_vec();
    Ok(ShareMatrix::from_fn(n, move |i, j| {
        if block[i] == block[j] {
            1.0 / sizes[block[i]] as f64
        } else {
            0.0
        }
    }))
}

/// Variance of the loss of a uniformly picked node after within-clique
/// averaging of i.i.d. risks with variance `var_x`.
pub fn clique_pool_variance(n: usize, sizes: &[usize], var_x: f64) -> Result<f64, OrderingError> {
    if sizes.iter().any(|&k| k == 0) {
        return Err(OrderingError::EmptyClique);
    }
    let total: usize = sizes.iter().sum();
    if total != n || n == 0 {
        return Err(OrderingError::BadPartition {
            got: total,
            expected: n,
        });
    }
    let inv_sum: f64 = sizes.iter().map(|&k| 1.0 / k as f64).sum();
    Ok(var_x * inv_sum / n as f64)
}

/// `trace(M * Sigma * M^T)`: total variance of `M X` when `Var[X] = Sigma`.
pub fn trace_variance(m: &ShareMatrix, sigma: &ShareMatrix) -> Result<f64, OrderingError> {
    let n = m.n();
    if sigma.n() != n {
        return Err(OrderingError::ShapeMismatch {
            matrix: n,
            operand: sigma.n(),
        });
    }
    let mut trace = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut inner = 0.0;
            for k in 0..n {
                inner += sigma.get(j, k) * m.get(i, k);
            }
            trace += m.get(i, j) * inner;
        }
    }
    Ok(trace)
}

/// Majorization in the ascending-prefix-sum convention: `x` is smaller than
/// `y` when both total the same and every prefix of the ascending sort of
/// `x` is at most the corresponding prefix of `y`.
///
/// Note this is the reverse of the Hardy-Littlewood-Polya descending
/// convention: here the MORE dispersed vector is the smaller one, so e.g.
/// `(3,2,2,1)` majorizes-below `(2,2,2,2)`.
pub fn majorizes(x: &[f64], y: &[f64]) -> Result<bool, OrderingError> {
    if x.len() != y.len() {
        return Err(OrderingError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let total_x: f64 = x.iter().sum();
    let total_y: f64 = y.iter().sum();
    let tol = DEFAULT_TOL * total_x.abs().max(1.0);
    if (total_x - total_y).abs() > tol {
        return Ok(false);
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let mut px = 0.0;
    let mut py = 0.0;
    for k in 0..xs.len() {
        px += xs[k];
        py += ys[k];
        if px > py + tol {
            return Ok(false);
        }
    }
    Ok(true)
}

const MAX_ENUM_VARS: usize = 4;
const MAX_ENUM_ATOMS: usize = 5;

/// Exact per-component distributions of `M X` for `X` i.i.d. with the given
/// marginal, by joint enumeration. Refuses instances beyond 4 variables or
/// 5 atoms rather than approximating.
pub fn share_component_dists(
    m: &ShareMatrix,
    marginal: &DiscreteDist,
) -> Result<Vec<DiscreteDist>, OrderingError> {
    let n = m.n();
    let atoms = marginal.atoms();
    if n > MAX_ENUM_VARS || atoms.len() > MAX_ENUM_ATOMS {
        return Err(OrderingError::EnumerationTooLarge {
            max_vars: MAX_ENUM_VARS,
            max_atoms: MAX_ENUM_ATOMS,
        });
    }
    let outcomes = atoms.len().pow(n as u32);
    let mut per_component: Vec<Vec<(f64, f64)>> = vec![Vec::with_capacity(outcomes); n];
    let mut index = vec![0usize; n];
    for _ in 0..outcomes {
        let prob: f64 = index.iter().map(|&k| atoms[k].1).product();
        for i in 0..n {
            let value: f64 = (0..n).map(|j| m.get(i, j) * atoms[index[j]].0).sum();
            per_component[i].push((value, prob));
        }
        for slot in index.iter_mut() {
            *slot += 1;
            if *slot < atoms.len() {
                break;
            }
            *slot = 0;
        }
    }
    per_component.into_iter().map(DiscreteDist::new).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn bernoulli_scaled(p: f64, value: f64) -> DiscreteDist {
        DiscreteDist::new([(0.0, 1.0 - p), (value, p)]).unwrap()
    }

    #[test]
    fn stop_loss_examples() {
        let point = DiscreteDist::point(100.0);
        assert_eq!(point.stop_loss(40.0), 60.0);
        assert_eq!(point.stop_loss(120.0), 0.0);
        let loss = bernoulli_scaled(0.1, 100.0);
        assert_abs_diff_eq!(loss.stop_loss(0.0), 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(stop_loss(&loss, 50.0), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn dist_constructor_validates_and_merges() {
        assert!(DiscreteDist::new([]).is_err());
        assert!(DiscreteDist::new([(0.0, 0.5), (1.0, 0.6)]).is_err());
        assert!(DiscreteDist::new([(0.0, -0.1), (1.0, 1.1)]).is_err());
        let merged = DiscreteDist::new([(2.0, 0.25), (1.0, 0.5), (2.0, 0.25)]).unwrap();
        assert_eq!(merged.atoms(), &[(1.0, 0.5), (2.0, 0.5)]);
    }

    #[test]
    fn convex_order_reflexive_and_degenerate() {
        let x = bernoulli_scaled(0.3, 50.0);
        assert_eq!(convex_order_compare(&x, &x, 1e-12), ConvexOrdering::Equal);

        let spread = DiscreteDist::new([(0.0, 0.5), (2.0, 0.5)]).unwrap();
        let point = DiscreteDist::point(1.0);
        assert_eq!(
            convex_order_compare(&spread, &point, 1e-12),
            ConvexOrdering::YBelow
        );
        assert_eq!(
            convex_order_compare(&point, &spread, 1e-12),
            ConvexOrdering::XBelow
        );
    }

    #[test]
    fn mixture_of_two_copies_is_dominated() {
        // (X1 + X2) / 2 vs X1 for a small dist, by exact convolution
        let marginal = DiscreteDist::new([(0.0, 0.6), (10.0, 0.3), (40.0, 0.1)]).unwrap();
        let mut pooled: Vec<(f64, f64)> = Vec::new();
        for &(v1, p1) in marginal.atoms() {
            for &(v2, p2) in marginal.atoms() {
                pooled.push(((v1 + v2) / 2.0, p1 * p2));
            }
        }
        let pooled = DiscreteDist::new(pooled).unwrap();
        assert_eq!(
            convex_order_compare(&pooled, &marginal, 1e-12),
            ConvexOrdering::XBelow
        );
    }

    #[test]
    fn means_differ_short_circuits() {
        let x = DiscreteDist::point(1.0);
        let y = DiscreteDist::point(2.0);
        assert_eq!(convex_order_compare(&x, &y, 1e-9), ConvexOrdering::MeansDiffer);
    }

    #[test]
    fn incomparable_crossing_stop_loss() {
        // same mean, stop-loss curves cross at t=1
        let x = DiscreteDist::new([(0.0, 0.5), (2.0, 0.5)]).unwrap();
        let y = DiscreteDist::new([(-1.0, 0.2), (1.0, 0.6), (3.0, 0.2)]).unwrap();
        assert_eq!(x.mean(), y.mean());
        assert_eq!(
            convex_order_compare(&x, &y, 1e-12),
            ConvexOrdering::Incomparable
        );
    }

    fn example_d() -> ShareMatrix {
        ShareMatrix::new(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.5, 0.5],
            vec![0.0, 0.5, 0.5],
        ])
        .unwrap()
    }

    fn example_c(alpha: f64) -> ShareMatrix {
        ShareMatrix::new(vec![
            vec![1.0, alpha, alpha],
            vec![0.0, (1.0 - alpha) / 2.0, (1.0 - alpha) / 2.0],
            vec![0.0, (1.0 - alpha) / 2.0, (1.0 - alpha) / 2.0],
        ])
        .unwrap()
    }

    #[test]
    fn classification_examples() {
        assert_eq!(
            classify_matrix(&example_d(), 1e-9).unwrap(),
            MatrixClass::DoublyStochastic
        );
        assert_eq!(
            classify_matrix(&example_c(0.3), 1e-9).unwrap(),
            MatrixClass::ColumnStochastic
        );
        assert_eq!(
            classify_matrix(&ShareMatrix::identity(4), 1e-9).unwrap(),
            MatrixClass::DoublyStochastic
        );
        let bad = ShareMatrix::new(vec![vec![1.0, -0.1], vec![0.0, 1.1]]).unwrap();
        assert!(matches!(
            classify_matrix(&bad, 1e-9),
            Err(OrderingError::NegativeEntry { .. })
        ));
    }

    #[test]
    fn apply_share_examples() {
        let n = 4;
        let averaging = ShareMatrix::from_fn(n, |_, _| 1.0 / n as f64);
        let x = [1.0, 5.0, 2.0, 8.0];
        let xi = apply_share(&averaging, &x, 1e-9).unwrap();
        for v in &xi {
            assert_abs_diff_eq!(*v, 4.0, epsilon = 1e-12);
        }

        let permutation = ShareMatrix::new(vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let xi = apply_share(&permutation, &[1.0, 2.0, 3.0], 1e-9).unwrap();
        assert_eq!(xi, vec![2.0, 3.0, 1.0]);

        let not_stochastic = ShareMatrix::from_fn(2, |_, _| 0.4);
        assert!(matches!(
            apply_share(&not_stochastic, &[1.0, 1.0], 1e-9),
            Err(OrderingError::ColumnNotStochastic { .. })
        ));
    }

    #[test]
    fn example_matrix_reduces_picked_component_variance_to_two_thirds() {
        // i.i.d. unit-variance marginal, exact enumeration
        let marginal = DiscreteDist::new([(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        assert_abs_diff_eq!(marginal.variance(), 1.0, epsilon = 1e-12);
        let dists = share_component_dists(&example_d(), &marginal).unwrap();
        let picked: f64 = dists.iter().map(DiscreteDist::variance).sum::<f64>() / 3.0;
        assert_abs_diff_eq!(picked, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn clique_matrix_and_pooled_variance() {
        let m = clique_share_matrix(&[2, 2]).unwrap();
        assert_eq!(
            classify_matrix(&m, 1e-12).unwrap(),
            MatrixClass::DoublyStochastic
        );
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m.get(i, j), 0.5);
                assert_eq!(m.get(i + 2, j + 2), 0.5);
                assert_eq!(m.get(i, j + 2), 0.0);
            }
        }
        for sizes in [vec![3usize, 5], vec![1, 1, 6], vec![4, 4]] {
            let m = clique_share_matrix(&sizes).unwrap();
            assert_eq!(
                classify_matrix(&m, 1e-12).unwrap(),
                MatrixClass::DoublyStochastic
            );
        }

        // two cliques (k, n-k)
        assert_abs_diff_eq!(
            clique_pool_variance(8, &[3, 5], 2.0).unwrap(),
            2.0 / (3.0 * 5.0),
            epsilon = 1e-12
        );
        // j equal cliques of size n/j
        assert_abs_diff_eq!(
            clique_pool_variance(12, &[4, 4, 4], 1.0).unwrap(),
            (3.0f64 / 12.0).powi(2),
            epsilon = 1e-12
        );
        // singletons share nothing
        assert_abs_diff_eq!(
            clique_pool_variance(3, &[1, 1, 1], 7.0).unwrap(),
            7.0,
            epsilon = 1e-12
        );
        assert!(clique_pool_variance(5, &[2, 2], 1.0).is_err());
    }

    #[test]
    fn trace_variance_examples() {
        let sigma = ShareMatrix::new(vec![vec![1.0, 0.9], vec![0.9, 1.0]]).unwrap();
        let identity = ShareMatrix::identity(2);
        assert_abs_diff_eq!(trace_variance(&identity, &sigma).unwrap(), 2.0, epsilon = 1e-12);

        // doubly-stochastic family never exceeds the input trace
        for step in 0..=20 {
            let x = step as f64 / 20.0;
            let d = ShareMatrix::new(vec![vec![x, 1.0 - x], vec![1.0 - x, x]]).unwrap();
            assert!(trace_variance(&d, &sigma).unwrap() <= 2.0 + 1e-12);
        }

        // column-stochastic with far-apart diagonal exceeds it under positive
        // correlation
        let c = ShareMatrix::new(vec![vec![0.05, 0.05], vec![0.95, 0.95]]).unwrap();
        assert!(trace_variance(&c, &sigma).unwrap() > 2.0);

        let wrong = ShareMatrix::identity(3);
        assert!(trace_variance(&wrong, &sigma).is_err());
    }

    #[test]
    fn majorization_examples() {
        let x = [3.0, 2.0, 2.0, 1.0];
        assert!(majorizes(&x, &x).unwrap());
        assert!(majorizes(&x, &[2.0, 2.0, 2.0, 2.0]).unwrap());
        assert!(!majorizes(&[2.0, 2.0, 2.0, 2.0], &x).unwrap());
        assert!(majorizes(&[4.0, 0.0], &[1.0, 3.0]).unwrap());
        assert!(!majorizes(&[1.0, 1.0], &[1.0, 2.0]).unwrap()); // totals differ
        assert!(majorizes(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn enumeration_refuses_large_instances() {
        let marginal = DiscreteDist::new([(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let too_big = ShareMatrix::identity(5);
        assert!(matches!(
            share_component_dists(&too_big, &marginal),
            Err(OrderingError::EnumerationTooLarge { .. })
        ));
        let six_atoms = DiscreteDist::new((0..6).map(|k| (k as f64, 1.0 / 6.0))).unwrap();
        assert!(share_component_dists(&ShareMatrix::identity(2), &six_atoms).is_err());
    }

    fn random_doubly_stochastic(n: usize, rng: &mut StdRng) -> ShareMatrix {
        // convex combination of random permutation matrices
        let mut data = vec![vec![0.0; n]; n];
        let mut weights = [0.0; 4];
        let mut total = 0.0;
        for w in &mut weights {
            *w = rng.random_range(0.1..1.0);
            total += *w;
        }
        for &w in &weights {
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            for (i, &j) in perm.iter().enumerate() {
                data[i][j] += w / total;
            }
        }
        ShareMatrix::new(data).unwrap()
    }

    #[test]
    fn doubly_stochastic_sharing_is_componentwise_desirable() {
        let mut rng = StdRng::seed_from_u64(31);
        let marginal = DiscreteDist::new([(0.0, 0.7), (10.0, 0.2), (30.0, 0.1)]).unwrap();
        for _ in 0..20 {
            let n = rng.random_range(2..=4);
            let m = random_doubly_stochastic(n, &mut rng);
            let dists = share_component_dists(&m, &marginal).unwrap();
            for dist in &dists {
                let cmp = convex_order_compare(dist, &marginal, 1e-9);
                assert!(
                    cmp == ConvexOrdering::XBelow || cmp == ConvexOrdering::Equal,
                    "component not dominated: {cmp:?}"
                );
            }
        }
    }

    #[test]
    fn column_stochastic_preserves_totals() {
        let mut rng = StdRng::seed_from_u64(77);
        for _ in 0..50 {
            let n = rng.random_range(2..=6);
            // random column-stochastic matrix
            let mut cols = vec![vec![0.0; n]; n];
            for j in 0..n {
                let mut col: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
                let sum: f64 = col.iter().sum();
                for v in &mut col {
                    *v /= sum;
                }
                for i in 0..n {
                    cols[i][j] = col[i];
                }
            }
            let m = ShareMatrix::new(cols).unwrap();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
            let xi = apply_share(&m, &x, 1e-9).unwrap();
            let total_in: f64 = x.iter().sum();
            let total_out: f64 = xi.iter().sum();
            assert!((total_in - total_out).abs() <= 1e-12 * total_in.max(1.0));
        }
    }

    #[test]
    fn convex_order_transitivity_on_spread_chains() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..20 {
            // chain of mean-preserving spreads: point -> two atoms -> four atoms
            let mean = rng.random_range(1.0..10.0);
            let d0 = DiscreteDist::point(mean);
            let spread = rng.random_range(0.5..2.0);
            let d1 = DiscreteDist::new([(mean - spread, 0.5), (mean + spread, 0.5)]).unwrap();
            let inner = rng.random_range(0.1..spread);
            let d2 = DiscreteDist::new([
                (mean - spread - inner, 0.25),
                (mean - spread + inner, 0.25),
                (mean + spread - inner, 0.25),
                (mean + spread + inner, 0.25),
            ])
            .unwrap();
            assert_eq!(convex_order_compare(&d0, &d1, 1e-9), ConvexOrdering::XBelow);
            assert_eq!(convex_order_compare(&d1, &d2, 1e-9), ConvexOrdering::XBelow);
            assert_eq!(convex_order_compare(&d0, &d2, 1e-9), ConvexOrdering::XBelow);
            assert_eq!(convex_order_compare(&d2, &d0, 1e-9), ConvexOrdering::YBelow);
        }
    }
}
