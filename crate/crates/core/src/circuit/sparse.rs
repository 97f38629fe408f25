use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles an `n x n` matrix; duplicate entries are summed.
    pub fn from_triplets(n: usize, triplets: &mut [(usize, usize, f64)]) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in triplets.iter() {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(col, _)| col == c).map_or(0.0, |(_, v)| v)
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    pub fn max_row_nonzeros(&self) -> usize {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    /// Largest `|r - c|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|r| self.row(r).map(move |(c, _)| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == v))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] += v;
            }
        }
        d
    }
}

/// Block-Jacobi preconditioner whose blocks are chains of unknowns (the
/// wires of a tile). Each block is the tridiagonal restriction of the matrix
/// to its chain, factored as `L D L^T`. With singleton chains this is plain
/// Jacobi.
#[derive(Debug, Clone)]
pub struct LinePreconditioner {
    lines: Vec<Vec<usize>>,
    /// Per line: pivots `d_k` and sub-diagonal multipliers `l_k` (l_0 unused).
    pivots: Vec<Vec<f64>>,
    multipliers: Vec<Vec<f64>>,
    covered: usize,
}

impl LinePreconditioner {
    pub fn new(matrix: &CsrMatrix, lines: &[Vec<usize>]) -> Result<Self> {
        let mut seen = vec![false; matrix.dim()];
        let mut pivots = Vec::with_capacity(lines.len());
        let mut multipliers = Vec::with_capacity(lines.len());
        for line in lines {
            let mut d = Vec::with_capacity(line.len());
            let mut l = Vec::with_capacity(line.len());
            for (k, &u) in line.iter().enumerate() {
                if std::mem::replace(&mut seen[u], true) {
                    return Err(Error::InvalidInput(format!("unknown {u} appears in two preconditioner lines")));
                }
                let diag = matrix.get(u, u);
                if k == 0 {
                    l.push(0.0);
                    d.push(diag);
                } else {
                    let off = matrix.get(line[k - 1], u);
                    let m = off / d[k - 1];
                    l.push(m);
                    d.push(diag - m * off);
                }
                if d[k].is_nan() || d[k] <= 0.0 {
                    return Err(Error::NotPositiveDefinite);
                }
            }
            pivots.push(d);
            multipliers.push(l);
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidInput(format!("unknown {missing} is not covered by the preconditioner")));
        }
        Ok(Self {
            lines: lines.to_vec(),
            pivots,
            multipliers,
            covered: matrix.dim(),
        })
    }

    /// `z = M^{-1} r`
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        debug_assert_eq!(r.len(), self.covered);
        for ((line, d), l) in self.lines.iter().zip(&self.pivots).zip(&self.multipliers) {
            // forward: L y = r
            let mut prev = 0.0;
            for (k, &u) in line.iter().enumerate() {
                let y = r[u] - l[k] * prev;
                z[u] = y;
                prev = y;
            }
            // diagonal and backward: L^T z = D^{-1} y
            let mut next = 0.0;
            for k in (0..line.len()).rev() {
                let u = line[k];
                let v = z[u] / d[k] - if k + 1 < line.len() { l[k + 1] * next } else { 0.0 };
                z[u] = v;
                next = v;
            }
        }
    }
}
