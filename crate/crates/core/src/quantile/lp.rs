//! Dense bounded-variable primal simplex for problems with few equality rows.
//!
//! maximize cᵀx  s.t.  A x = b,  l ≤ x ≤ u   (l finite, u may be +∞)
//!
//! Weighted pinball regression over a `d`-dimensional linear class has a dual
//! of exactly this shape with `d` rows, so the basis stays tiny.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub(crate) struct BoundedLp {
    /// Columns of `A`, each of length `m`.
    pub columns: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    /// Simplex multipliers `y` with `cᵀ_B = yᵀB`.
    pub duals: Vec<f64>,
    pub objective: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau<'a> {
    lp: &'a BoundedLp,
    m: usize,
    /// artificial columns appended after the structural ones
    n_struct: usize,
    art_sign: Vec<f64>,
    cost: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    iterations: usize,
}

const PIVOT_TOL: f64 = 1e-10;

impl<'a> Tableau<'a> {
    fn column(&self, j: usize) -> DVector<f64> {
        if j < self.n_struct {
            DVector::from_column_slice(&self.lp.columns[j])
        } else {
            let mut e = DVector::zeros(self.m);
            e[j - self.n_struct] = self.art_sign[j - self.n_struct];
            e
        }
    }

    fn lower(&self, j: usize) -> f64 {
        if j < self.n_struct {
            self.lp.lower[j]
        } else {
            0.0
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let mut b = DMatrix::zeros(self.m, self.m);
        for (k, &j) in self.basis.iter().enumerate() {
            b.set_column(k, &self.column(j));
        }
        self.binv = b
            .try_inverse()
            .ok_or_else(|| Error::numeric("simplex basis became singular"))?;
        Ok(())
    }

    fn duals(&self) -> DVector<f64> {
        let cb = DVector::from_iterator(self.m, self.basis.iter().map(|&j| self.cost[j]));
        self.binv.tr_mul(&cb)
    }

    /// Runs simplex iterations on the current cost vector.
    fn optimize(&mut self, opt_tol: f64, max_iter: usize) -> Result<()> {
        let total = self.cost.len();
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= max_iter {
                return Err(Error::Solver {
                    context: "bounded simplex".into(),
                    iterations: self.iterations,
                    residual: f64::NAN,
                });
            }
            let y = self.duals();
            // pricing
            let use_bland = degenerate_run > 50;
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..total {
                let st = self.status[j];
                if st == Status::Basic {
                    continue;
                }
                if self.upper[j] - self.lower(j) <= 0.0 {
                    continue;
                }
                let col = self.column(j);
                let d = self.cost[j] - y.dot(&col);
                let improving = (st == Status::AtLower && d > opt_tol)
                    || (st == Status::AtUpper && d < -opt_tol);
                if !improving {
                    continue;
                }
                if use_bland {
                    entering = Some((j, d));
                    break;
                }
                if entering.is_none_or(|(_, best)| d.abs() > best.abs()) {
                    entering = Some((j, d));
                }
            }
            let Some((j, d)) = entering else {
                return Ok(());
            };
            self.iterations += 1;
            let dir = if d > 0.0 { 1.0 } else { -1.0 };
            let u = &self.binv * self.column(j);
            // x_B moves by −dir·θ·u
            let mut step = self.upper[j] - self.lower(j);
            let mut leave: Option<(usize, bool)> = None;
            for k in 0..self.m {
                let delta = -dir * u[k];
                let bj = self.basis[k];
                if delta < -PIVOT_TOL {
                    let room = (self.x[bj] - self.lower(bj)).max(0.0);
                    let t = room / -delta;
                    if t < step {
                        step = t;
                        leave = Some((k, false));
                    }
                } else if delta > PIVOT_TOL && self.upper[bj].is_finite() {
                    let room = (self.upper[bj] - self.x[bj]).max(0.0);
                    let t = room / delta;
                    if t < step {
                        step = t;
                        leave = Some((k, true));
                    }
                }
            }
            if !step.is_finite() {
                return Err(Error::numeric("linear program is unbounded"));
            }
            degenerate_run = if step <= 1e-14 { degenerate_run + 1 } else { 0 };
            for k in 0..self.m {
                let bj = self.basis[k];
                self.x[bj] -= dir * step * u[k];
            }
            self.x[j] += dir * step;
            match leave {
                None => {
                    // bound flip
                    self.status[j] = if dir > 0.0 {
                        self.x[j] = self.upper[j];
                        Status::AtUpper
                    } else {
                        self.x[j] = self.lower(j);
                        Status::AtLower
                    };
                }
                Some((k, to_upper)) => {
                    let out = self.basis[k];
                    if to_upper {
                        self.x[out] = self.upper[out];
                        self.status[out] = Status::AtUpper;
                    } else {
                        self.x[out] = self.lower(out);
                        self.status[out] = Status::AtLower;
                    }
                    self.basis[k] = j;
                    self.status[j] = Status::Basic;
                    self.refactor()?;
                }
            }
        }
    }

    fn recompute_basic_values(&mut self) {
        let mut r = DVector::from_column_slice(&self.lp.rhs);
        for j in 0..self.cost.len() {
            if self.status[j] != Status::Basic && self.x[j] != 0.0 {
                r -= self.column(j) * self.x[j];
            }
        }
        let xb = &self.binv * r;
        for (k, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[k];
        }
    }
}

impl BoundedLp {
    pub fn maximize(&self, opt_tol: f64, max_iter: usize) -> Result<LpSolution> {
        let m = self.rhs.len();
        let n = self.columns.len();
        if self.cost.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::structural("linear program dimensions disagree"));
        }
        if self.lower.iter().any(|l| !l.is_finite()) {
            return Err(Error::structural("simplex requires finite lower bounds"));
        }
        // phase 1: structurals at their lower bounds, artificials absorb the residual
        let mut resid = self.rhs.clone();
        for (col, &l) in self.columns.iter().zip(&self.lower) {
            for (r, a) in resid.iter_mut().zip(col) {
                *r -= a * l;
            }
        }
        let art_sign: Vec<f64> = resid
            .iter()
            .map(|&r| if r >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        let mut x = self.lower.clone();
        x.extend(resid.iter().map(|r| r.abs()));
        let mut upper = self.upper.clone();
        upper.extend(std::iter::repeat_n(f64::INFINITY, m));
        let mut cost = vec![0.0; n];
        cost.extend(std::iter::repeat_n(-1.0, m));
        let mut status = vec![Status::AtLower; n];
        status.extend(std::iter::repeat_n(Status::Basic, m));
        let mut t = Tableau {
            lp: self,
            m,
            n_struct: n,
            art_sign,
            cost,
            upper,
            x,
            status,
            basis: (n..n + m).collect(),
            binv: DMatrix::identity(m, m),
            iterations: 0,
        };
        t.refactor()?;
        let scale = 1.0 + self.rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        t.optimize(1e-12, max_iter)?;
        let infeasibility: f64 = (n..n + m).map(|j| t.x[j]).sum();
        if infeasibility > 1e-9 * scale {
            return Err(Error::numeric(format!(
                "linear program infeasible (phase-1 residual {infeasibility:.3e})"
            )));
        }
        // drive artificials out of the basis where possible
        for k in 0..m {
            let bj = t.basis[k];
            if bj < n {
                continue;
            }
            let row = t.binv.row(k).clone_owned();
            let candidate = (0..n).find(|&j| {
                t.status[j] != Status::Basic
                    && (row.dot(&DVector::from_column_slice(&self.columns[j]).transpose())).abs()
                        > 1e-8
            });
            if let Some(j) = candidate {
                t.basis[k] = j;
                t.status[j] = Status::Basic;
                t.status[bj] = Status::AtLower;
                t.x[bj] = 0.0;
                t.refactor()?;
                t.recompute_basic_values();
            }
        }
        // phase 2: artificials pinned at zero
        for j in n..n + m {
            t.upper[j] = 0.0;
            t.cost[j] = 0.0;
            if t.status[j] != Status::Basic {
                t.x[j] = 0.0;
            }
        }
        t.cost[..n].copy_from_slice(&self.cost);
        t.recompute_basic_values();
        t.optimize(opt_tol, max_iter)?;
        t.recompute_basic_values();
        let y = t.duals();
        let xs: Vec<f64> = t.x[..n].to_vec();
        let objective = xs.iter().zip(&self.cost).map(|(a, c)| a * c).sum();
        Ok(LpSolution {
            x: xs,
            duals: y.iter().copied().collect(),
            objective,
        })
    }
}
