use rayon::prelude::*;

use crate::error::{Error, Result};

/// Symmetric nonnegative weight matrix in CSR form.
///
/// Invariants (checked by [`SparseSym::validate`] and every constructor):
/// entry `(i, j)` is stored iff `(j, i)` is stored with the same value,
/// values are finite and nonnegative, there are no self-loops, and every row
/// has a positive sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    values: Vec<f64>,
}

/// Row sums `d_i = sum_j w_ij`, all strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector(Vec<f64>);

impl DegreeVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Builds a degree vector from explicit values (they must be positive).
    pub fn from_values(d: Vec<f64>) -> Result<Self> {
        if let Some(i) = d.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Graph(format!("degree of node {i} is {} (must be > 0)", d[i])));
        }
        Ok(DegreeVector(d))
    }
}

impl SparseSym {
    /// Assembles a matrix from already-symmetric per-row neighbor lists.
    ///
    /// Rows are sorted by column; self-loops are dropped. Fails if the lists
    /// are not symmetric, contain duplicates, or leave a node without weight.
    pub fn from_rows(n: usize, rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        Error::check_len("SparseSym::from_rows", n, rows.len())?;
        let rows: Vec<Vec<(u32, f64)>> = rows
            .into_par_iter()
            .enumerate()
            .map(|(i, mut r)| {
                r.retain(|&(j, _)| j as usize != i);
                r.sort_unstable_by_key(|&(j, _)| j);
                r
            })
            .collect();
        let m = Self::from_sorted_rows(n, &rows)?;
        m.validate()?;
        Ok(m)
    }

    /// Symmetrizes directed neighbor lists entrywise by `max(w_ij, w_ji)`.
    pub fn from_directed_max(n: usize, rows: &[Vec<(u32, f64)>]) -> Result<Self> {
        Error::check_len("SparseSym::from_directed_max", n, rows.len())?;
        let mut triplets: Vec<(u32, u32, f64)> = Vec::with_capacity(2 * rows.iter().map(Vec::len).sum::<usize>());
        for (i, r) in rows.iter().enumerate() {
            for &(j, w) in r {
                if j as usize == i {
                    continue;
                }
                if j as usize >= n {
                    return Err(Error::Graph(format!("neighbor {j} of node {i} out of range")));
                }
                triplets.push((i as u32, j, w));
                triplets.push((j, i as u32, w));
            }
        }
        triplets.par_sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for (i, j, w) in triplets {
            let row = &mut merged[i as usize];
            match row.last_mut() {
                Some(last) if last.0 == j => last.1 = last.1.max(w),
                _ => row.push((j, w)),
            }
        }
        let m = Self::from_sorted_rows(n, &merged)?;
        m.validate()?;
        Ok(m)
    }

    /// Builds a matrix from an undirected edge list; each `(i, j, w)` sets
    /// both `(i, j)` and `(j, i)`. Repeated edges are summed.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::Graph(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                continue;
            }
            rows[i].push((j as u32, w));
            rows[j].push((i as u32, w));
        }
        for r in rows.iter_mut() {
            r.sort_unstable_by_key(|&(j, _)| j);
            let mut out: Vec<(u32, f64)> = Vec::with_capacity(r.len());
            for &(j, w) in r.iter() {
                match out.last_mut() {
                    Some(last) if last.0 == j => last.1 += w,
                    _ => out.push((j, w)),
                }
            }
            *r = out;
        }
        let m = Self::from_sorted_rows(n, &rows)?;
        m.validate()?;
        Ok(m)
    }

    /// Raw CSR parts; validated.
    pub fn from_csr(
        n: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        Error::check_len("SparseSym row_offsets", n + 1, row_offsets.len())?;
        Error::check_len("SparseSym values", col_indices.len(), values.len())?;
        if row_offsets[0] != 0 || row_offsets[n] != col_indices.len() {
            return Err(Error::Graph("row offsets do not span the column array".into()));
        }
        if row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Graph("row offsets are not monotone".into()));
        }
        let m = SparseSym {
            n,
            row_offsets,
            col_indices,
            values,
        };
        for i in 0..n {
            let (cols, _) = m.row(i);
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Graph(format!("row {i} columns not strictly increasing")));
            }
            if cols.iter().any(|&j| j as usize >= n) {
                return Err(Error::Graph(format!("row {i} has a column out of range")));
            }
        }
        m.validate()?;
        Ok(m)
    }

    fn from_sorted_rows(n: usize, rows: &[Vec<(u32, f64)>]) -> Result<Self> {
        let nnz: usize = rows.iter().map(Vec::len).sum();
        if n > u32::MAX as usize {
            return Err(Error::Graph("graph too large for 32-bit column indices".into()));
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_offsets.push(0);
        for (i, r) in rows.iter().enumerate() {
            for w in r.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::Graph(format!("duplicate entry ({i}, {})", w[0].0)));
                }
            }
            for &(j, w) in r {
                col_indices.push(j);
                values.push(w);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseSym {
            n,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Checks symmetry (bitwise on values), sign, self-loops and connectivity.
    pub fn validate(&self) -> Result<()> {
        let bad = (0..self.n).into_par_iter().find_map_any(|i| {
            let (cols, vals) = self.row(i);
            let mut sum = 0.0;
            for (&j, &w) in cols.iter().zip(vals) {
                let j = j as usize;
                if j == i {
                    return Some(format!("self-loop at node {i}"));
                }
                if !(w >= 0.0 && w.is_finite()) {
                    return Some(format!("invalid weight {w} at ({i}, {j})"));
                }
                match self.get(j, i) {
                    Some(v) if v.to_bits() == w.to_bits() => {}
                    _ => return Some(format!("entry ({i}, {j}) has no symmetric partner")),
                }
                sum += w;
            }
            if sum > 0.0 {
                None
            } else {
                Some(format!("node {i} has zero degree"))
            }
        });
        match bad {
            Some(msg) => Err(Error::Graph(msg)),
            None => Ok(()),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[u32] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    /// Stored value at `(i, j)`, if any.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&(j as u32)).ok().map(|k| vals[k])
    }

    pub fn degrees(&self) -> DegreeVector {
        let d = (0..self.n)
            .into_par_iter()
            .map(|i| self.row(i).1.iter().sum::<f64>())
            .collect();
        DegreeVector(d)
    }

    /// Iterates over stored entries `(i, j, w)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &w)| (i, j as usize, w))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edges_build_symmetric_csr() {
        let w = SparseSym::from_edges(3, &[(0, 1, 0.5), (1, 2, 2.0)]).unwrap();
        assert_eq!(w.nnz(), 4);
        assert_eq!(w.get(1, 0), Some(0.5));
        assert_eq!(w.get(2, 1), Some(2.0));
        assert_eq!(w.get(0, 2), None);
        assert_eq!(w.degrees().as_slice(), &[0.5, 2.5, 2.0]);
    }

    #[test]
    fn isolated_node_is_rejected() {
        let err = SparseSym::from_edges(3, &[(0, 1, 1.0)]).unwrap_err();
        assert!(err.to_string().contains("zero degree"));
    }

    #[test]
    fn asymmetric_rows_are_rejected() {
        let rows = vec![vec![(1, 1.0)], vec![(0, 2.0)]];
        assert!(SparseSym::from_rows(2, rows).is_err());
    }

    #[test]
    fn self_loops_are_dropped() {
        let rows = vec![vec![(0, 5.0), (1, 1.0)], vec![(0, 1.0), (1, 3.0)]];
        let w = SparseSym::from_rows(2, rows).unwrap();
        assert_eq!(w.nnz(), 2);
        assert_eq!(w.degrees().as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn max_symmetrization_keeps_one_sided_edges() {
        let rows = vec![vec![(1, 0.3)], vec![(0, 0.7), (2, 0.1)], vec![]];
        let w = SparseSym::from_directed_max(3, &rows).unwrap();
        assert_eq!(w.get(0, 1), Some(0.7));
        assert_eq!(w.get(1, 0), Some(0.7));
        assert_eq!(w.get(2, 1), Some(0.1));
    }

    #[test]
    fn negative_weight_is_rejected() {
        assert!(SparseSym::from_edges(2, &[(0, 1, -1.0)]).is_err());
    }

    #[test]
    fn csr_round_trip() {
        let w = SparseSym::from_edges(3, &[(0, 1, 0.5), (1, 2, 2.0), (0, 2, 1.0)]).unwrap();
        let back = SparseSym::from_csr(
            3,
            w.row_offsets().to_vec(),
            w.col_indices().to_vec(),
            w.values().to_vec(),
        )
        .unwrap();
        assert_eq!(w, back);
    }
}
