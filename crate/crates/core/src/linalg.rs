//! Dense matrices over exact rationals.

use crate::rational::{format_rational, zero, Rational};
use num_traits::Zero;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

/// Outcome of solving `A x = b` exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinearSolution {
    Unique(Vec<Rational>),
    /// Columns are dependent; `rank < cols`.
    RankDeficient {
        rank: usize,
    },
    /// Full column rank but `b` is outside the column space.
    Inconsistent {
        rank: usize,
    },
}

/// Particular solution plus a basis of the null space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralSolution {
    pub particular: Vec<Rational>,
    pub null_basis: Vec<Vec<Rational>>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![zero(); rows * cols],
        }
    }

    /// Builds from row vectors. All rows must have `cols` entries.
    pub fn from_rows(cols: usize, rows: Vec<Vec<Rational>>) -> Self {
        let mut m = Matrix::zeros(rows.len(), cols);
        for (r, row) in rows.into_iter().enumerate() {
            assert_eq!(row.len(), cols, "row {r} has the wrong length");
            for (c, value) in row.into_iter().enumerate() {
                m.set(r, c, value);
            }
        }
        m
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        Matrix::from_rows(
            cols,
            rows.iter()
                .map(|r| r.iter().map(|&v| crate::rational::int(v)).collect())
                .collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Rational {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: Rational) {
        self.data[r * self.cols + c] = value;
    }

    pub fn add_to(&mut self, r: usize, c: usize, value: &Rational) {
        self.data[r * self.cols + c] += value;
    }

    pub fn row(&self, r: usize) -> &[Rational] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Rational> {
        (0..self.rows).map(|r| self.get(r, c).clone()).collect()
    }

    pub fn is_zero_row(&self, r: usize) -> bool {
        self.row(r).iter().all(Zero::is_zero)
    }

    /// Submatrix keeping the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                m.set(i, j, self.get(r, c).clone());
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[Rational]) -> Vec<Rational> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn rank(&self) -> usize {
        let mut rows = self.to_row_vecs();
        eliminate(&mut rows, self.cols).len()
    }

    pub fn solve(&self, rhs: &[Rational]) -> LinearSolution {
        assert_eq!(rhs.len(), self.rows);
        let mut rows = self.augmented(rhs);
        let pivots = eliminate(&mut rows, self.cols);
        let rank = pivots.len();
        if rank < self.cols {
            return LinearSolution::RankDeficient { rank };
        }
        if rows[rank..].iter().any(|row| !row[self.cols].is_zero()) {
            return LinearSolution::Inconsistent { rank };
        }
        let x = back_substitute(&rows, &pivots, self.cols, true, vec![zero(); self.cols]);
        debug_assert_eq!(self.mul_vec(&x), rhs);
        LinearSolution::Unique(x)
    }

    /// Every solution of `A x = b` as a particular solution plus null space,
    /// or `None` when the system has no solution.
    pub fn general_solution(&self, rhs: &[Rational]) -> Option<GeneralSolution> {
        assert_eq!(rhs.len(), self.rows);
        let mut rows = self.augmented(rhs);
        let pivots = eliminate(&mut rows, self.cols);
        if rows[pivots.len()..].iter().any(|row| !row[self.cols].is_zero()) {
            return None;
        }
        let particular = back_substitute(&rows, &pivots, self.cols, true, vec![zero(); self.cols]);
        let mut is_pivot = vec![false; self.cols];
        pivots.iter().for_each(|&c| is_pivot[c] = true);
        let null_basis = (0..self.cols)
            .filter(|&c| !is_pivot[c])
            .map(|free| {
                let mut seed = vec![zero(); self.cols];
                seed[free] = crate::rational::one();
                back_substitute(&rows, &pivots, self.cols, false, seed)
            })
            .collect();
        Some(GeneralSolution { particular, null_basis })
    }

    fn to_row_vecs(&self) -> Vec<Vec<Rational>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    fn augmented(&self, rhs: &[Rational]) -> Vec<Vec<Rational>> {
        (0..self.rows)
            .map(|r| {
                let mut row = self.row(r).to_vec();
                row.push(rhs[r].clone());
                row
            })
            .collect()
    }
}

/// Forward Gaussian elimination over the first `cols` columns, in place.
/// Returns the pivot column of each pivot row; pivot rows end up first.
fn eliminate(rows: &mut [Vec<Rational>], cols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut next = 0;
    for c in 0..cols {
        if next == rows.len() {
            break;
        }
        let Some(p) = (next..rows.len()).find(|&r| !rows[r][c].is_zero()) else {
            continue;
        };
        rows.swap(next, p);
        let (done, rest) = rows.split_at_mut(next + 1);
        let pivot_row = &done[next];
        let support: Vec<usize> = (c..pivot_row.len()).filter(|&k| !pivot_row[k].is_zero()).collect();
        for row in rest.iter_mut() {
            if row[c].is_zero() {
                continue;
            }
            let factor = &row[c] / &pivot_row[c];
            for &k in &support {
                let delta = &factor * &pivot_row[k];
                row[k] -= delta;
            }
        }
        pivots.push(c);
        next += 1;
    }
    pivots
}

/// Solves an echelon system for its pivot variables. Free variables keep
/// the values in `x`; with `augmented` the last column is the right-hand
/// side, otherwise it is zero.
fn back_substitute(
    rows: &[Vec<Rational>],
    pivots: &[usize],
    cols: usize,
    augmented: bool,
    mut x: Vec<Rational>,
) -> Vec<Rational> {
    for (i, &c) in pivots.iter().enumerate().rev() {
        let row = &rows[i];
        let mut value = if augmented { row[cols].clone() } else { zero() };
        for k in c + 1..cols {
            if !row[k].is_zero() && !x[k].is_zero() {
                value -= &row[k] * &x[k];
            }
        }
        x[c] = value / &row[c];
    }
    x
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<String> = self.data.iter().map(format_rational).collect();
        let width = cells.iter().map(String::len).max().unwrap_or(1);
        for r in 0..self.rows {
            let line: Vec<String> = (0..self.cols)
                .map(|c| format!("{:>width$}", cells[r * self.cols + c]))
                .collect();
            writeln!(f, "[{}]", line.join(" "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};
    use proptest::prelude::*;

    fn ints(values: &[i64]) -> Vec<Rational> {
        values.iter().map(|&v| int(v)).collect()
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        assert_eq!(Matrix::zeros(3, 2).rank(), 0);
        assert_eq!(Matrix::zeros(0, 0).rank(), 0);
    }

    #[test]
    fn solves_small_system() {
        let m = Matrix::from_i64(&[&[2, 1], &[1, 3]]);
        assert_eq!(
            m.solve(&ints(&[3, 5])),
            LinearSolution::Unique(vec![frac(4, 5), frac(7, 5)])
        );
    }

    #[test]
    fn distinguishes_deficiency_from_inconsistency() {
        let m = Matrix::from_i64(&[&[1, 2], &[2, 4]]);
        assert_eq!(m.solve(&ints(&[1, 2])), LinearSolution::RankDeficient { rank: 1 });
        let tall = Matrix::from_i64(&[&[1], &[1]]);
        assert_eq!(tall.solve(&ints(&[1, 2])), LinearSolution::Inconsistent { rank: 1 });
        assert_eq!(tall.solve(&ints(&[3, 3])), LinearSolution::Unique(ints(&[3])));
    }

    #[test]
    fn general_solution_spans_null_space() {
        let m = Matrix::from_i64(&[&[1, -1, 0], &[0, 1, -1]]);
        let sol = m.general_solution(&ints(&[1, 1])).unwrap();
        assert_eq!(m.mul_vec(&sol.particular), ints(&[1, 1]));
        assert_eq!(sol.null_basis, vec![ints(&[1, 1, 1])]);
        assert!(m.general_solution(&ints(&[1, 1])).is_some());
        let bad = Matrix::from_i64(&[&[1, 1], &[1, 1]]);
        assert!(bad.general_solution(&ints(&[0, 1])).is_none());
    }

    #[test]
    fn select_keeps_order() {
        let m = Matrix::from_i64(&[&[1, 2, 3], &[4, 5, 6]]);
        assert_eq!(m.select(&[1, 0], &[2, 0]), Matrix::from_i64(&[&[6, 4], &[3, 1]]));
    }

    fn small_matrix() -> impl Strategy<Value = Matrix> {
        (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-3i64..4, r * c).prop_map(move |v| {
                Matrix::from_rows(
                    c,
                    v.chunks(c).map(|row| row.iter().map(|&x| int(x)).collect()).collect(),
                )
            })
        })
    }

    fn transpose(m: &Matrix) -> Matrix {
        Matrix::from_rows(m.rows(), (0..m.cols()).map(|c| m.column(c)).collect())
    }

    proptest! {
        #[test]
        fn rank_is_transpose_invariant(m in small_matrix()) {
            prop_assert_eq!(m.rank(), transpose(&m).rank());
            prop_assert!(m.rank() <= m.rows().min(m.cols()));
        }

        #[test]
        fn unique_solutions_satisfy_the_system(m in small_matrix(), x in proptest::collection::vec(-5i64..6, 5)) {
            let x: Vec<Rational> = x.into_iter().take(m.cols()).map(int).collect();
            prop_assume!(x.len() == m.cols());
            let b = m.mul_vec(&x);
            match m.solve(&b) {
                LinearSolution::Unique(y) => prop_assert_eq!(y, x),
                LinearSolution::RankDeficient { rank } => prop_assert!(rank < m.cols()),
                LinearSolution::Inconsistent { .. } => prop_assert!(false, "b is in the column space"),
            }
        }
    }
}
