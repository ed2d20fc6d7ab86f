//! Compressed sparse column storage for share matrices.

use serde::{Deserialize, Serialize};

/// Square sparse matrix in CSC layout. Column `i` holds the entries `a_ji`
/// (supplier `j`, buyer `i`), row indices sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CscMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            col_ptr: vec![0; n + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Build from per-column `(row, value)` lists. Rows are sorted; explicit
    /// zeros are dropped; duplicate rows are summed.
    pub fn from_columns(n: usize, columns: Vec<Vec<(usize, f64)>>) -> Self {
        assert_eq!(columns.len(), n, "one entry list per column");
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for mut col in columns {
            col.sort_by_key(|&(r, _)| r);
            let mut last: Option<usize> = None;
            for (r, v) in col {
                assert!(r < n, "row index {r} out of range for n = {n}");
                if last == Some(r) {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
                if v == 0.0 {
                    continue;
                }
                row_idx.push(r);
                values.push(v);
                last = Some(r);
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            n,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Strongly connected groups of firms that buy only from each other
    /// (no supplier outside the group), each sorted ascending.
    pub fn closed_classes(&self) -> Vec<Vec<usize>> {
        let n = self.n;
        let suppliers = |i: usize| &self.row_idx[self.col_ptr[i]..self.col_ptr[i + 1]];
        // iterative Tarjan over buyer -> supplier edges
        const UNSEEN: usize = usize::MAX;
        let mut index = vec![UNSEEN; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut comp = vec![UNSEEN; n];
        let mut stack = Vec::new();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut next = 0;
        for root in 0..n {
            if index[root] != UNSEEN {
                continue;
            }
            let mut call: Vec<(usize, usize)> = vec![(root, 0)];
            index[root] = next;
            low[root] = next;
            next += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut k)) = call.last_mut() {
                let adj = suppliers(v);
                if *k < adj.len() {
                    let w = adj[*k];
                    *k += 1;
                    if index[w] == UNSEEN {
                        index[w] = next;
                        low[w] = next;
                        next += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                    continue;
                }
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let id = classes.len();
                    let mut members = Vec::new();
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        comp[w] = id;
                        members.push(w);
                        if w == v {
                            break;
                        }
                    }
                    members.sort_unstable();
                    classes.push(members);
                }
            }
        }
        classes
            .into_iter()
            .enumerate()
            .filter(|(id, members)| {
                members
                    .iter()
                    .all(|&j| !suppliers(j).is_empty() && suppliers(j).iter().all(|&i| comp[i] == *id))
            })
            .map(|(_, members)| members)
            .collect()
    }

    /// Build from a row-major dense matrix.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let columns = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| rows[j][i] != 0.0)
                    .map(|j| (j, rows[j][i]))
                    .collect()
            })
            .collect();
        Self::from_columns(n, columns)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for (j, v) in self.column(i) {
                out[j][i] = v;
            }
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn column(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.col_ptr[i], self.col_ptr[i + 1]);
        self.row_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    /// Iterate all stored entries as `(row, col, value)`, column-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.column(i).map(move |(j, v)| (j, i, v)))
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.column(col)
            .find(|&(r, _)| r == row)
            .map_or(0.0, |(_, v)| v)
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.column(i).map(|(_, v)| v).sum())
            .collect()
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, a) in self.column(i) {
                y[j] += a * xi;
            }
        }
    }

    /// `y = A^T x`; each entry is one column dot product, so the reduction
    /// order is fixed.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.column(i).map(|(j, a)| a * x[j]).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut columns = vec![Vec::new(); self.n];
        for (j, i, v) in self.entries() {
            columns[j].push((i, v));
        }
        Self::from_columns(self.n, columns)
    }

    /// Induced 1-norm (max absolute column sum).
    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|i| self.column(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CscMatrix {
        CscMatrix::from_dense(&[
            vec![0.0, 0.2, 0.1],
            vec![0.3, 0.0, 0.0],
            vec![0.0, 0.4, 0.0],
        ])
    }

    #[test]
    fn products_match_dense() {
        let a = sample();
        let d = a.to_dense();
        let x = [1.0, -2.0, 0.5];
        let y = a.mul_vec(&x);
        let yt = a.tr_mul_vec(&x);
        for r in 0..3 {
            let want: f64 = (0..3).map(|c| d[r][c] * x[c]).sum();
            let want_t: f64 = (0..3).map(|c| d[c][r] * x[c]).sum();
            assert!((y[r] - want).abs() < 1e-15);
            assert!((yt[r] - want_t).abs() < 1e-15);
        }
    }

    #[test]
    fn transpose_and_sums() {
        let a = sample();
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(a.col_sums(), vec![0.3, 0.6000000000000001, 0.1]);
        assert_eq!(a.get(2, 1), 0.4);
        assert_eq!(a.get(2, 2), 0.0);
        assert_eq!(a.nnz(), 4);
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CscMatrix::from_columns(2, vec![vec![(1, 0.25), (1, 0.25)], vec![]]);
        assert_eq!(a.get(1, 0), 0.5);
        assert_eq!(a.nnz(), 1);
    }

    #[test]
    fn closed_classes_of_split_economy() {
        // {0, 1} buy from each other, {2, 3} likewise, 4 buys from 0 and 2
        let cols = vec![
            vec![(1, 1.0)],
            vec![(0, 1.0)],
            vec![(3, 1.0)],
            vec![(2, 1.0)],
            vec![(0, 0.5), (2, 0.5)],
        ];
        let a = CscMatrix::from_columns(5, cols);
        let mut classes = a.closed_classes();
        classes.sort();
        assert_eq!(classes, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(sample().closed_classes(), vec![vec![0, 1, 2]]);
    }
}
