//! Dense two-phase tableau simplex with Bland's anti-cycling rule.

use super::{ConicProgram, Outcome};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 50_000;

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows + 1` rows of `cols + 1` entries; the last row holds reduced
    /// costs and the last column the right-hand side.
    data: Vec<f64>,
    basis: Vec<usize>,
    forbidden: Vec<bool>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let piv = self.at(pr, pc);
        for c in 0..w {
            self.data[pr * w + c] /= piv;
        }
        let (before, rest) = self.data.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for chunk in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = chunk[pc];
            if f != 0.0 {
                for (x, p) in chunk.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                chunk[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
    }

    fn set_costs(&mut self, cost: &[f64]) {
        let w = self.cols + 1;
        let obj = self.rows * w;
        self.data[obj..obj + w].fill(0.0);
        self.data[obj..obj + self.cols].copy_from_slice(cost);
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for c in 0..w {
                    self.data[obj + c] -= cb * self.data[r * w + c];
                }
            }
        }
    }

    /// Runs Bland's rule to optimality; `false` means unbounded.
    fn optimize(&mut self) -> Result<bool, String> {
        for _ in 0..MAX_PIVOTS {
            let enter = (0..self.cols).find(|&c| !self.forbidden[c] && self.at(self.rows, c) < -COST_TOL);
            let Some(pc) = enter else { return Ok(true) };
            let mut best: Option<(f64, usize, usize)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    let better = match best {
                        None => true,
                        Some((br, _, bb)) => ratio < br - 1e-14 || (ratio <= br + 1e-14 && self.basis[r] < bb),
                    };
                    if better {
                        best = Some((ratio, r, self.basis[r]));
                    }
                }
            }
            let Some((_, pr, _)) = best else { return Ok(false) };
            self.pivot(pr, pc);
        }
        Err("pivot limit reached".into())
    }
}

pub(super) fn solve(program: &ConicProgram) -> Outcome {
    let n = program.num_vars;
    let m_eq = program.equalities.len();
    let m_le = program.inequalities.len();
    let m = m_eq + m_le;
    // free variables split as x = x+ - x-
    let nx = 2 * n;
    let cols = nx + m_le + m;
    let w = cols + 1;
    let mut t = Tableau { rows: m, cols, data: vec![0.0; (m + 1) * w], basis: vec![0; m], forbidden: vec![false; cols] };

    let rows = program.equalities.iter().map(|r| (r, false)).chain(program.inequalities.iter().map(|r| (r, true)));
    let mut slack = 0;
    for (r, ((row, rhs), is_le)) in rows.enumerate() {
        let base = r * w;
        for (i, c) in row {
            t.data[base + 2 * i] += c;
            t.data[base + 2 * i + 1] -= c;
        }
        if is_le {
            t.data[base + nx + slack] = 1.0;
            slack += 1;
        }
        t.data[base + cols] = *rhs;
        if *rhs < 0.0 {
            for c in 0..w {
                t.data[base + c] = -t.data[base + c];
            }
        }
        let art = nx + m_le + r;
        t.data[base + art] = 1.0;
        t.basis[r] = art;
    }

    let scale = 1.0 + (0..m).map(|r| t.rhs(r).abs()).fold(0.0, f64::max);
    let mut phase1 = vec![0.0; cols];
    phase1[nx + m_le..].fill(1.0);
    t.set_costs(&phase1);
    match t.optimize() {
        Ok(_) => {}
        Err(e) => return Outcome::NumericalFailure(e),
    }
    if -t.at(m, cols) > 1e-9 * scale {
        return Outcome::Infeasible;
    }
    for c in nx + m_le..cols {
        t.forbidden[c] = true;
    }
    for r in 0..m {
        if t.basis[r] >= nx + m_le {
            if let Some(pc) = (0..nx + m_le).find(|&c| t.at(r, c).abs() > 1e-9) {
                t.pivot(r, pc);
            }
        }
    }

    let mut cost = vec![0.0; cols];
    for (i, c) in &program.objective {
        cost[2 * i] += c;
        cost[2 * i + 1] -= c;
    }
    t.set_costs(&cost);
    match t.optimize() {
        Ok(true) => {}
        Ok(false) => return Outcome::Unbounded,
        Err(e) => return Outcome::NumericalFailure(e),
    }
    let mut split = vec![0.0; cols];
    for r in 0..m {
        split[t.basis[r]] = t.rhs(r);
    }
    let x: Vec<f64> = (0..n).map(|i| split[2 * i] - split[2 * i + 1]).collect();
    let value = program.objective.iter().map(|(i, c)| c * x[*i]).sum();
    Outcome::Optimal { x, value }
}
