//! Independent reference implementations used to cross-check the library:
//! exhaustive support search with Gauss-Jordan least squares, ISTA for the
//! lasso, a cyclic Jacobi eigensolver, union-find connected components,
//! and direct block means. None of these share code paths with the crate.

#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]

use dfdl::Dictionary;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Exact least-squares residual of y against the atoms in `support`,
/// solved by Gauss-Jordan elimination on the normal equations. None when
/// the system is numerically singular.
pub fn least_squares_residual(
    y: &ArrayView1<'_, f64>,
    dict: &Dictionary,
    support: &[usize],
) -> Option<f64> {
    let m = support.len();
    if m == 0 {
        return Some(y.dot(y).sqrt());
    }
    let mut g = vec![vec![0.0f64; m + 1]; m];
    for a in 0..m {
        for b in 0..m {
            g[a][b] = dict.atom(support[a]).dot(&dict.atom(support[b]));
        }
        g[a][m] = dict.atom(support[a]).dot(y);
    }
    // Gauss-Jordan with partial pivoting on the augmented system.
    for col in 0..m {
        let mut pivot = col;
        for row in col + 1..m {
            if g[row][col].abs() > g[pivot][col].abs() {
                pivot = row;
            }
        }
        if g[pivot][col].abs() < 1e-12 {
            return None;
        }
        g.swap(col, pivot);
        let p = g[col][col];
        for v in g[col].iter_mut() {
            *v /= p;
        }
        for row in 0..m {
            if row != col {
                let factor = g[row][col];
                for idx in 0..=m {
                    g[row][idx] -= factor * g[col][idx];
                }
            }
        }
    }
    let coefs: Vec<f64> = (0..m).map(|a| g[a][m]).collect();
    let mut sq = 0.0;
    for i in 0..y.len() {
        let mut v = y[i];
        for (a, &atom) in support.iter().enumerate() {
            v -= coefs[a] * dict.atoms()[(i, atom)];
        }
        sq += v * v;
    }
    Some(sq.sqrt())
}

fn supports_of_size(k: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(size);
    fn recurse(k: usize, size: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        for i in start..k {
            current.push(i);
            recurse(k, size, i + 1, current, out);
            current.pop();
        }
    }
    recurse(k, size, 0, &mut current, &mut out);
    out
}

/// Globally optimal residual over every support of size at most
/// `max_support`, plus the support achieving it (sorted ascending).
pub fn best_subset_residual(
    y: &ArrayView1<'_, f64>,
    dict: &Dictionary,
    max_support: usize,
) -> (f64, Vec<usize>) {
    let mut best = y.dot(y).sqrt();
    let mut best_support = Vec::new();
    for size in 1..=max_support {
        for support in supports_of_size(dict.atom_count(), size) {
            if let Some(residual) = least_squares_residual(y, dict, &support) {
                if residual < best {
                    best = residual;
                    best_support = support;
                }
            }
        }
    }
    (best, best_support)
}

/// Lasso objective ||y - D s||_2^2 + lambda ||s||_1.
pub fn lasso_objective(
    y: &ArrayView1<'_, f64>,
    dict: &Dictionary,
    code: &ArrayView1<'_, f64>,
    lambda: f64,
) -> f64 {
    let recon = dict.atoms().dot(code);
    let mut sq = 0.0;
    for (a, b) in y.iter().zip(recon.iter()) {
        let r = a - b;
        sq += r * r;
    }
    sq + lambda * code.iter().map(|v| v.abs()).sum::<f64>()
}

/// ISTA (proximal gradient) for the lasso, run until the objective
/// decrease per step falls below `tol`.
pub fn ista_lasso(
    y: &ArrayView1<'_, f64>,
    dict: &Dictionary,
    lambda: f64,
    tol: f64,
    max_iters: usize,
) -> Array1<f64> {
    let k = dict.atom_count();
    let gram = dict.atoms().t().dot(dict.atoms());
    let lam_max = jacobi_eigenvalues(&gram.view())
        .last()
        .copied()
        .unwrap()
        .max(1e-12);
    let step = 1.0 / (2.0 * lam_max);
    let shrink = step * lambda;
    let mut code: Array1<f64> = Array1::zeros(k);
    let mut prev = lasso_objective(y, dict, &code.view(), lambda);
    for _ in 0..max_iters {
        let residual = &dict.atoms().dot(&code) - y;
        let grad = dict.atoms().t().dot(&residual) * 2.0;
        for j in 0..k {
            let z = code[j] - step * grad[j];
            code[j] = if z > shrink {
                z - shrink
            } else if z < -shrink {
                z + shrink
            } else {
                0.0
            };
        }
        let obj = lasso_objective(y, dict, &code.view(), lambda);
        if prev - obj < tol {
            break;
        }
        prev = obj;
    }
    code
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
/// ascending.
pub fn jacobi_eigenvalues(a: &ArrayView2<'_, f64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "jacobi oracle needs a square matrix");
    let mut m = a.to_owned();
    for _ in 0..200 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() < 1e-13 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = m[(i, p)];
                    let aiq = m[(i, q)];
                    m[(i, p)] = c * aip - s * aiq;
                    m[(i, q)] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = m[(p, i)];
                    let aqi = m[(q, i)];
                    m[(p, i)] = c * api - s * aqi;
                    m[(q, i)] = s * api + c * aqi;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (big, small) = if self.size[ra] >= self.size[rb] {
                (ra, rb)
            } else {
                (rb, ra)
            };
            self.parent[small] = big;
            self.size[big] += self.size[small];
        }
    }
}

/// Connected-component sizes of `target`-labeled cells via union-find,
/// listed in row-major order of each component's first cell. Independent
/// of the library's BFS flood fill.
pub fn component_sizes(
    labels: &[usize],
    rows: usize,
    cols: usize,
    target: usize,
    eight: bool,
) -> Vec<usize> {
    assert_eq!(labels.len(), rows * cols);
    let mut uf = UnionFind::new(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let idx = r * cols + c;
            if labels[idx] != target {
                continue;
            }
            let mut neighbors: Vec<(usize, usize)> = Vec::new();
            if c + 1 < cols {
                neighbors.push((r, c + 1));
            }
            if r + 1 < rows {
                neighbors.push((r + 1, c));
                if eight {
                    if c > 0 {
                        neighbors.push((r + 1, c - 1));
                    }
                    if c + 1 < cols {
                        neighbors.push((r + 1, c + 1));
                    }
                }
            }
            for (nr, nc) in neighbors {
                let nidx = nr * cols + nc;
                if labels[nidx] == target {
                    uf.union(idx, nidx);
                }
            }
        }
    }
    let mut order: Vec<usize> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    let mut seen: Vec<Option<usize>> = vec![None; rows * cols];
    for idx in 0..rows * cols {
        if labels[idx] != target {
            continue;
        }
        let root = uf.find(idx);
        if seen[root].is_none() {
            seen[root] = Some(order.len());
            order.push(root);
            sizes.push(uf.size[root]);
        }
    }
    sizes
}

/// Direct block-mean downsample accumulating source pixels into output
/// bins; loop structure differs from the library's.
pub fn block_mean(pixels: &Array2<f64>, factor: usize) -> Array2<f64> {
    let out_h = pixels.nrows() / factor;
    let out_w = pixels.ncols() / factor;
    let mut out = Array2::zeros((out_h, out_w));
    for r in 0..out_h * factor {
        for c in 0..out_w * factor {
            out[(r / factor, c / factor)] += pixels[(r, c)];
        }
    }
    out.mapv_inplace(|v| v / (factor * factor) as f64);
    out
}

/// Projected-gradient minimization of -2 tr(E D^T) + tr(D F D^T) over
/// dictionaries with columns in the unit ball. F must be PSD.
pub fn projected_gradient_quadratic(
    e: &Array2<f64>,
    f: &Array2<f64>,
    start: &Array2<f64>,
    tol: f64,
    max_iters: usize,
) -> Array2<f64> {
    let lam_max = jacobi_eigenvalues(&f.view())
        .last()
        .copied()
        .unwrap()
        .max(1e-12);
    let step = 1.0 / (2.0 * lam_max);
    let mut d = start.clone();
    let mut prev = quadratic_value(e, f, &d);
    for _ in 0..max_iters {
        let grad = (&d.dot(f) - e) * 2.0;
        d = &d - &(grad * step);
        for mut col in d.columns_mut() {
            let norm = col.dot(&col).sqrt();
            if norm > 1.0 {
                col.mapv_inplace(|v| v / norm);
            }
        }
        let val = quadratic_value(e, f, &d);
        if prev - val < tol {
            break;
        }
        prev = val;
    }
    d
}

/// -2 tr(E D^T) + tr(D F D^T) by explicit loops.
pub fn quadratic_value(e: &Array2<f64>, f: &Array2<f64>, d: &Array2<f64>) -> f64 {
    let (dim, k) = d.dim();
    let mut tr_ed = 0.0;
    for i in 0..dim {
        for j in 0..k {
            tr_ed += e[(i, j)] * d[(i, j)];
        }
    }
    let mut tr_dfd = 0.0;
    for i in 0..dim {
        for a in 0..k {
            for b in 0..k {
                tr_dfd += d[(i, a)] * f[(a, b)] * d[(i, b)];
            }
        }
    }
    -2.0 * tr_ed + tr_dfd
}
