//! Reverse Cuthill-McKee ordering and symmetric permutation of CSC matrices.

use std::collections::VecDeque;

use nalgebra_sparse::CscMatrix;

/// RCM permutation `perm` (new index -> old index) of a structurally
/// symmetric matrix. Each component starts from a pseudo-peripheral vertex.
pub fn reverse_cuthill_mckee(a: &CscMatrix<f64>) -> Vec<usize> {
    let n = a.ncols();
    let (offsets, rows) = (a.col_offsets(), a.row_indices());
    let adj = |j: usize| {
        rows[offsets[j]..offsets[j + 1]]
            .iter()
            .copied()
            .filter(move |&i| i != j)
    };
    let degree: Vec<usize> = (0..n).map(|j| adj(j).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, mark: &mut Vec<usize>, stamp: usize| -> (usize, usize) {
        // returns (eccentricity, a minimum-degree vertex of the last level)
        let mut queue = VecDeque::from([(start, 0usize)]);
        mark[start] = stamp;
        let (mut depth, mut last) = (0, start);
        while let Some((v, d)) = queue.pop_front() {
            if d > depth || (d == depth && degree[v] < degree[last]) {
                depth = d;
                last = v;
            }
            for u in adj(v) {
                if mark[u] != stamp {
                    mark[u] = stamp;
                    queue.push_back((u, d + 1));
                }
            }
        }
        (depth, last)
    };

    let mut mark = vec![usize::MAX; n];
    let mut stamp = 0;
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start: repeat BFS from the far end while the depth grows
        let mut start = seed;
        let (mut ecc, mut far) = bfs_levels(start, &mut mark, stamp);
        stamp += 1;
        loop {
            let (e, f) = bfs_levels(far, &mut mark, stamp);
            stamp += 1;
            if e <= ecc {
                break;
            }
            start = far;
            ecc = e;
            far = f;
        }

        let begin = order.len();
        visited[start] = true;
        order.push(start);
        let mut head = begin;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next: Vec<usize> = adj(v).filter(|&u| !visited[u]).collect();
            next.sort_by_key(|&u| (degree[u], u));
            for u in next {
                visited[u] = true;
                order.push(u);
            }
        }
    }
    order.reverse();
    order
}

/// `P A Pᵀ` with `(P A Pᵀ)[i, j] = A[perm[i], perm[j]]`.
pub fn permute_symmetric(a: &CscMatrix<f64>, perm: &[usize]) -> CscMatrix<f64> {
    let n = a.ncols();
    let mut inv = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let mut offsets = Vec::with_capacity(n + 1);
    let mut rows = Vec::with_capacity(a.nnz());
    let mut vals = Vec::with_capacity(a.nnz());
    offsets.push(0);
    let mut col: Vec<(usize, f64)> = Vec::new();
    for &old_j in perm {
        col.clear();
        let c = a.col(old_j);
        col.extend(c.row_indices().iter().zip(c.values()).map(|(&i, &v)| (inv[i], v)));
        col.sort_unstable_by_key(|e| e.0);
        for &(i, v) in &col {
            rows.push(i);
            vals.push(v);
        }
        offsets.push(rows.len());
    }
    CscMatrix::try_from_csc_data(n, n, offsets, rows, vals).expect("permutation keeps a valid structure")
}

/// Half-bandwidth `max |i - j|` over stored entries.
pub fn bandwidth(a: &CscMatrix<f64>) -> usize {
    a.triplet_iter().map(|(i, j, _)| i.abs_diff(j)).max().unwrap_or(0)
}
