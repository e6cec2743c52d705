//! Dense two-phase simplex for `min cᵀx  s.t.  Ax = b, x ≥ 0`.
//!
//! Bland's rule on both the entering and the leaving variable, so the
//! iteration is deterministic and cannot cycle. Meant for the tiny coupling
//! programs only; nothing here is tuned for size.

const TOL: f64 = 1e-12;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub enum SimplexError {
    Infeasible,
    Unbounded,
    PivotLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    active: Vec<bool>,
    rhs: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
        self.basis[r] = col;
    }

    /// Runs Bland pivots over columns `< ncols` until optimal.
    fn run(&mut self, ncols: usize) -> Result<(), SimplexError> {
        for _ in 0..MAX_PIVOTS {
            let Some(col) = (0..ncols).find(|&j| self.obj[j] < -1e-11) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !self.active[i] || row[col] <= TOL {
                    continue;
                }
                let ratio = row[self.rhs] / row[col];
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - TOL || (ratio <= br + TOL && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((r, _)) = best else {
                return Err(SimplexError::Unbounded);
            };
            self.pivot(r, col);
        }
        Err(SimplexError::PivotLimit)
    }
}

/// Solves the program. Rows of `a` may be linearly dependent.
pub fn minimize(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<LpSolution, SimplexError> {
    let m = a.len();
    let n = c.len();
    let rhs = n + m;
    let mut rows = Vec::with_capacity(m);
    for (i, (ai, &bi)) in a.iter().zip(b).enumerate() {
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; n + m + 1];
        for (j, v) in ai.iter().enumerate() {
            row[j] = sign * v;
        }
        row[n + i] = 1.0;
        row[rhs] = sign * bi;
        rows.push(row);
    }
    // phase one: minimize the sum of artificials
    let mut obj = vec![0.0; n + m + 1];
    for row in &rows {
        for j in 0..n {
            obj[j] -= row[j];
        }
        obj[rhs] -= row[rhs];
    }
    let mut t = Tableau {
        rows,
        obj,
        basis: (n..n + m).collect(),
        active: vec![true; m],
        rhs,
    };
    t.run(n + m)?;
    if -t.obj[rhs] > 1e-9 {
        return Err(SimplexError::Infeasible);
    }
    for i in 0..m {
        if t.basis[i] < n {
            continue;
        }
        match (0..n).find(|&j| t.rows[i][j].abs() > 1e-9) {
            Some(j) => t.pivot(i, j),
            None => t.active[i] = false,
        }
    }
    // phase two over the original columns
    let mut obj = vec![0.0; n + m + 1];
    obj[..n].copy_from_slice(c);
    for i in 0..m {
        if !t.active[i] {
            continue;
        }
        let cb = c[t.basis[i]];
        if cb != 0.0 {
            for (v, rv) in obj.iter_mut().zip(&t.rows[i]) {
                *v -= cb * rv;
            }
        }
    }
    for v in obj[n..n + m].iter_mut() {
        *v = 0.0;
    }
    t.obj = obj;
    t.run(n)?;
    let mut x = vec![0.0; n];
    for i in 0..m {
        if t.active[i] && t.basis[i] < n {
            x[t.basis[i]] = t.rows[i][rhs].max(0.0);
        }
    }
    let objective = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
    Ok(LpSolution { objective, x })
}
