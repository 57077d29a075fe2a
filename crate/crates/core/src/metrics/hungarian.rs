//! Minimum-cost linear assignment.

use crate::real::Real;

/// Minimum-cost assignment for a rectangular cost matrix given as rows.
///
/// Returns `(row, col)` pairs, one per row when `rows <= cols` and one per
/// column otherwise, sorted by row. Among all optimal assignments the
/// lexicographically smallest (by column of row 0, then row 1, ...) is chosen.
pub fn hungarian<T: Real>(cost: &[Vec<T>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    assert!(cost.iter().all(|r| r.len() == cols), "cost matrix must be rectangular");
    let n = rows.max(cols);
    let at = |i: usize, j: usize| -> T {
        if i < rows && j < cols {
            cost[i][j]
        } else {
            T::zero()
        }
    };

    let (row_to_col, u, v) = solve_square(n, &at);

    // edges with zero reduced cost form the set of all optimal assignments
    let scale = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .fold(T::one(), |m, (i, j)| m.max(cost[i][j].abs()));
    let tol = T::epsilon() * T::lit(64.0) * scale * T::from_usize_lossy(n);
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| (at(i, j) - u[i] - v[j]).abs() <= tol).collect())
        .collect();
    let matching = lexicographic_matching(&tight, row_to_col);

    matching
        .into_iter()
        .enumerate()
        .filter(|&(i, j)| i < rows && j < cols)
        .collect()
}

/// Shortest-augmenting-path Hungarian method on an `n x n` matrix.
/// Returns the row-to-column matching with the final dual potentials.
fn solve_square<T: Real>(n: usize, at: &dyn Fn(usize, usize) -> T) -> (Vec<usize>, Vec<T>, Vec<T>) {
    let inf = T::infinity();
    // 1-based with a virtual column 0
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    (row_to_col, u[1..].to_vec(), v[1..].to_vec())
}

/// Lexicographically smallest perfect matching of a bipartite graph, starting
/// from any perfect matching `m`.
fn lexicographic_matching(adj: &[Vec<usize>], mut m: Vec<usize>) -> Vec<usize> {
    let n = m.len();
    let mut col_to_row = vec![0usize; n];
    for (i, &j) in m.iter().enumerate() {
        col_to_row[j] = i;
    }
    let mut fixed_col = vec![false; n];
    for i in 0..n {
        for &j in &adj[i] {
            if fixed_col[j] {
                continue;
            }
            if m[i] == j {
                break;
            }
            // free row r (owner of j) must reach column m[i] through unfixed rows
            let r = col_to_row[j];
            let target = m[i];
            if let Some(path) = alternating_path(adj, &m, &col_to_row, &fixed_col, i, j, r, target) {
                // path: columns visited from r, ending at target
                let mut row = r;
                for &c in &path {
                    let next_row = col_to_row[c];
                    m[row] = c;
                    col_to_row[c] = row;
                    row = next_row;
                }
                m[i] = j;
                col_to_row[j] = i;
                break;
            }
        }
        fixed_col[m[i]] = true;
    }
    m
}

#[allow(clippy::too_many_arguments)]
fn alternating_path(
    adj: &[Vec<usize>],
    m: &[usize],
    col_to_row: &[usize],
    fixed_col: &[bool],
    skip_row: usize,
    skip_col: usize,
    start: usize,
    target: usize,
) -> Option<Vec<usize>> {
    let n = m.len();
    let mut prev_col: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    queue.push_back((start, None::<usize>));
    while let Some((row, via)) = queue.pop_front() {
        for &c in &adj[row] {
            if fixed_col[c] || c == skip_col || seen[c] {
                continue;
            }
            seen[c] = true;
            prev_col[c] = via;
            if c == target {
                let mut path = vec![c];
                let mut cur = via;
                while let Some(pc) = cur {
                    path.push(pc);
                    cur = prev_col[pc];
                }
                path.reverse();
                return Some(path);
            }
            let next = col_to_row[c];
            if next != skip_row {
                queue.push_back((next, Some(c)));
            }
        }
    }
    None
}

/// Total cost of an assignment.
pub fn assignment_cost<T: Real>(cost: &[Vec<T>], assignment: &[(usize, usize)]) -> T {
    assignment.iter().fold(T::zero(), |s, &(i, j)| s + cost[i][j])
}
