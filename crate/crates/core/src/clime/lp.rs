//! Dense dual simplex for `min c^T x  s.t.  A x <= b, x >= 0` with `c >= 0`.
//!
//! With nonnegative costs the all-slack basis is dual feasible, so no phase I is
//! needed. The tableau keeps `B^{-1}` in its slack columns, which lets a solved
//! problem be re-optimized for a new right-hand side without starting over.

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LpError {
    /// The primal problem has no feasible point.
    Infeasible,
    IterationLimit,
    InvalidInput(String),
}

impl std::fmt::Display for LpError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LpError::Infeasible => write!(f, "primal infeasible"),
            LpError::IterationLimit => write!(f, "iteration limit reached"),
            LpError::InvalidInput(s) => write!(f, "invalid input: {s}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DualSimplex {
    rows: usize,
    structural: usize,
    /// Row-major `rows x (structural + rows)`.
    tableau: Vec<f64>,
    rhs: Vec<f64>,
    reduced_cost: Vec<f64>,
    basis: Vec<usize>,
    max_iter: usize,
}

impl DualSimplex {
    /// `a` is row-major `rows x structural`.
    pub fn new(a: &[f64], rows: usize, structural: usize, c: &[f64]) -> Result<Self, LpError> {
        if a.len() != rows * structural || c.len() != structural {
            return Err(LpError::InvalidInput("dimension mismatch".into()));
        }
        if c.iter().any(|&v| !(v >= 0.0)) {
            return Err(LpError::InvalidInput("costs must be nonnegative".into()));
        }
        let width = structural + rows;
        let mut tableau = vec![0.0; rows * width];
        for r in 0..rows {
            tableau[r * width..r * width + structural]
                .copy_from_slice(&a[r * structural..(r + 1) * structural]);
            tableau[r * width + structural + r] = 1.0;
        }
        let mut reduced_cost = vec![0.0; width];
        reduced_cost[..structural].copy_from_slice(c);
        Ok(DualSimplex {
            rows,
            structural,
            tableau,
            rhs: vec![0.0; rows],
            reduced_cost,
            basis: (structural..width).collect(),
            max_iter: 50 * width,
        })
    }

    fn width(&self) -> usize {
        self.structural + self.rows
    }

    /// Re-solves for a new right-hand side, warm-starting from the current basis.
    pub fn solve(&mut self, b: &[f64]) -> Result<Vec<f64>, LpError> {
        if b.len() != self.rows {
            return Err(LpError::InvalidInput("rhs length mismatch".into()));
        }
        let width = self.width();
        // rhs = B^{-1} b, with B^{-1} stored in the slack columns
        for r in 0..self.rows {
            let row = &self.tableau[r * width + self.structural..(r + 1) * width];
            self.rhs[r] = row.iter().zip(b).map(|(x, y)| x * y).sum();
        }

        let bland_after = 10 * width;
        for iter in 0..self.max_iter {
            let bland = iter >= bland_after;
            let Some(leave) = self.leaving_row(bland) else {
                return Ok(self.primal());
            };
            let Some(enter) = self.entering_column(leave, bland) else {
                return Err(LpError::Infeasible);
            };
            self.pivot(leave, enter);
        }
        Err(LpError::IterationLimit)
    }

    fn leaving_row(&self, bland: bool) -> Option<usize> {
        if bland {
            // smallest basic variable index among infeasible rows
            return (0..self.rows)
                .filter(|&r| self.rhs[r] < -FEAS_TOL)
                .min_by_key(|&r| self.basis[r]);
        }
        let mut best = None;
        let mut most_negative = -FEAS_TOL;
        for r in 0..self.rows {
            if self.rhs[r] < most_negative {
                most_negative = self.rhs[r];
                best = Some(r);
            }
        }
        best
    }

    fn entering_column(&self, leave: usize, bland: bool) -> Option<usize> {
        let width = self.width();
        let row = &self.tableau[leave * width..(leave + 1) * width];
        let mut best: Option<(usize, f64, f64)> = None;
        for (k, &alpha) in row.iter().enumerate() {
            if alpha >= -PIVOT_TOL {
                continue;
            }
            let ratio = self.reduced_cost[k].max(0.0) / -alpha;
            best = match best {
                None => Some((k, ratio, alpha)),
                Some((bk, br, ba)) => {
                    let better = if ratio < br - 1e-12 {
                        true
                    } else if ratio <= br + 1e-12 {
                        // ties: larger pivot for stability, lowest index under Bland
                        if bland {
                            false
                        } else {
                            alpha.abs() > ba.abs()
                        }
                    } else {
                        false
                    };
                    if better {
                        Some((k, ratio, alpha))
                    } else {
                        Some((bk, br, ba))
                    }
                }
            };
        }
        best.map(|(k, _, _)| k)
    }

    fn pivot(&mut self, leave: usize, enter: usize) {
        let width = self.width();
        let pivot = self.tableau[leave * width + enter];
        for k in 0..width {
            self.tableau[leave * width + k] /= pivot;
        }
        self.rhs[leave] /= pivot;
        let pivot_row: Vec<f64> = self.tableau[leave * width..(leave + 1) * width].to_vec();
        let pivot_rhs = self.rhs[leave];
        for r in 0..self.rows {
            if r == leave {
                continue;
            }
            let factor = self.tableau[r * width + enter];
            if factor == 0.0 {
                continue;
            }
            let row = &mut self.tableau[r * width..(r + 1) * width];
            for (x, p) in row.iter_mut().zip(&pivot_row) {
                *x -= factor * p;
            }
            row[enter] = 0.0;
            self.rhs[r] -= factor * pivot_rhs;
        }
        let factor = self.reduced_cost[enter];
        if factor != 0.0 {
            for (d, p) in self.reduced_cost.iter_mut().zip(&pivot_row) {
                *d -= factor * p;
            }
            self.reduced_cost[enter] = 0.0;
        }
        self.basis[leave] = enter;
    }

    fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.structural];
        for (r, &var) in self.basis.iter().enumerate() {
            if var < self.structural {
                x[var] = self.rhs[r].max(0.0);
            }
        }
        x
    }
}
