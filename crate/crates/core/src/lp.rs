//! Dense two-phase simplex for the small exponent programs, together with the
//! epigraph rewrite of `sum (e_j)+ <= budget` constraints and a probe that
//! compares closed and open budget constraints.

use thiserror::Error;

/// Primal feasibility tolerance, scaled by row magnitude.
pub const TAU_FEAS: f64 = 1e-9;
/// Reduced-cost tolerance.
pub const TAU_OPT: f64 = 1e-9;
/// Gap between closed and open-limit values above which a point is flagged.
pub const TAU_DISC: f64 = 1e-6;

const PIVOT_TOL: f64 = 1e-10;
const DEGENERATE_LIMIT: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint {row} has {got} coefficients, expected {expected}")]
    RowLength { row: usize, got: usize, expected: usize },
    #[error("variable {0} has lower bound above upper bound")]
    InvertedBounds(usize),
    #[error("variable {0} has a nonzero cost but no finite lower bound")]
    UnboundedCostVariable(usize),
    #[error("non-finite data in {0}")]
    NonFinite(&'static str),
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("solution violates constraint {row} by {violation:e}")]
    Verification { row: usize, violation: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const NONNEG: Bounds = Bounds { lower: 0.0, upper: f64::INFINITY };
    pub const FREE: Bounds = Bounds { lower: f64::NEG_INFINITY, upper: f64::INFINITY };

    pub fn new(lower: f64, upper: f64) -> Self {
        Bounds { lower, upper }
    }
}

/// `minimize objective . x + offset` subject to linear rows and box bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub offset: f64,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<Bounds>,
}

impl LpProblem {
    /// Problem with `n` nonnegative variables and zero objective.
    pub fn new(n: usize) -> Self {
        LpProblem {
            objective: vec![0.0; n],
            offset: 0.0,
            constraints: Vec::new(),
            bounds: vec![Bounds::NONNEG; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Appends a variable, widening every existing row with a zero.
    pub fn add_variable(&mut self, cost: f64, bounds: Bounds) -> usize {
        self.objective.push(cost);
        self.bounds.push(bounds);
        for c in &mut self.constraints {
            c.coeffs.push(0.0);
        }
        self.objective.len() - 1
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    /// Adds `expr (relation) rhs` for a sparse affine expression; the
    /// expression's constant is moved to the right-hand side.
    pub fn add_affine(&mut self, expr: &AffineExpr, relation: Relation, rhs: f64) {
        let mut row = vec![0.0; self.num_vars()];
        for &(j, a) in &expr.coeffs {
            row[j] += a;
        }
        self.add_constraint(row, relation, rhs - expr.constant);
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(LpError::RowLength { row: usize::MAX, got: self.bounds.len(), expected: n });
        }
        if self.objective.iter().any(|c| !c.is_finite()) || !self.offset.is_finite() {
            return Err(LpError::NonFinite("objective"));
        }
        for (row, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::RowLength { row, got: c.coeffs.len(), expected: n });
            }
            if c.coeffs.iter().any(|a| !a.is_finite()) || !c.rhs.is_finite() {
                return Err(LpError::NonFinite("constraints"));
            }
        }
        for (j, b) in self.bounds.iter().enumerate() {
            if b.lower.is_nan() || b.upper.is_nan() || b.lower == f64::INFINITY || b.upper == f64::NEG_INFINITY {
                return Err(LpError::NonFinite("bounds"));
            }
            if b.lower > b.upper {
                return Err(LpError::InvertedBounds(j));
            }
            if b.lower == f64::NEG_INFINITY && self.objective[j] != 0.0 {
                return Err(LpError::UnboundedCostVariable(j));
            }
        }
        Ok(())
    }

    /// Largest scaled violation of any row or bound at `x`, with its index
    /// (rows first, then bounds offset by the row count).
    pub fn max_violation(&self, x: &[f64]) -> (usize, f64) {
        let mut worst = (0, 0.0);
        for (i, c) in self.constraints.iter().enumerate() {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let scale = 1.0 + c.rhs.abs() + c.coeffs.iter().zip(x).map(|(a, v)| (a * v).abs()).sum::<f64>();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            } / scale;
            if v > worst.1 {
                worst = (i, v);
            }
        }
        for (j, b) in self.bounds.iter().enumerate() {
            let scale = 1.0 + x[j].abs();
            let v = ((b.lower - x[j]).max(x[j] - b.upper)) / scale;
            if v > worst.1 {
                worst = (self.constraints.len() + j, v);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal value; `+inf` when infeasible and `-inf` when unbounded.
    pub value: f64,
    /// Optimal point; empty unless `status` is `Optimal`.
    pub point: Vec<f64>,
}

impl LpSolution {
    pub fn optimal_value(&self) -> Option<f64> {
        (self.status == LpStatus::Optimal).then_some(self.value)
    }
}

/// Sparse affine expression `sum coeffs + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        AffineExpr { coeffs: Vec::new(), constant: c }
    }

    pub fn term(mut self, var: usize, coeff: f64) -> Self {
        self.coeffs.push((var, coeff));
        self
    }

    pub fn add_term(&mut self, var: usize, coeff: f64) {
        self.coeffs.push((var, coeff));
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|&(j, a)| a * x[j]).sum::<f64>()
    }
}

/// Replaces `sum_j (e_j)+ <= budget` by auxiliaries `s_j >= e_j`, `s_j >= 0`,
/// `sum_j s_j <= budget`. The auxiliaries carry no cost, so the optimum is
/// unchanged.
pub fn epigraph_transform(terms: &[AffineExpr], budget: f64, base: &LpProblem) -> LpProblem {
    let mut p = base.clone();
    let slots: Vec<usize> = terms.iter().map(|_| p.add_variable(0.0, Bounds::NONNEG)).collect();
    for (e, &s) in terms.iter().zip(&slots) {
        // s - e >= 0
        let mut row = vec![0.0; p.num_vars()];
        row[s] = 1.0;
        for &(j, a) in &e.coeffs {
            row[j] -= a;
        }
        p.add_constraint(row, Relation::Ge, e.constant);
    }
    let mut row = vec![0.0; p.num_vars()];
    for &s in &slots {
        row[s] = 1.0;
    }
    p.add_constraint(row, Relation::Le, budget);
    p
}

enum VarMap {
    Shift { col: usize, lower: f64 },
    Mirror { col: usize, upper: f64 },
    Split { pos: usize, neg: usize },
}

impl VarMap {
    fn value(&self, y: &[f64]) -> f64 {
        match *self {
            VarMap::Shift { col, lower } => lower + y[col],
            VarMap::Mirror { col, upper } => upper - y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        }
    }
}

struct Tableau {
    width: usize,
    data: Vec<f64>,
    rows: usize,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let inv = 1.0 / self.data[r * w + c];
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v *= inv;
        }
        self.data[r * w + c] = 1.0;
        let pivot_row: Vec<f64> = self.data[r * w..(r + 1) * w].to_vec();
        for other in 0..self.data.len() / w {
            if other == r {
                continue;
            }
            let f = self.data[other * w + c];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[other * w..(other + 1) * w];
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            row[c] = 0.0;
        }
        for other in 0..self.rows {
            let v = &mut self.data[other * w + w - 1];
            if *v < 0.0 && *v > -1e-11 {
                *v = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Runs simplex on objective row `obj`; columns with `allowed[c] == false`
    /// never enter. Returns `false` if unbounded.
    fn optimize(&mut self, obj: usize, allowed: &[bool], max_iter: usize) -> Result<bool, LpError> {
        let w = self.width;
        let mut degenerate = 0usize;
        let mut bland = false;
        for _ in 0..max_iter {
            let entering = if bland {
                (0..w - 1).find(|&c| allowed[c] && self.at(obj, c) < -TAU_OPT)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for c in 0..w - 1 {
                    let d = self.at(obj, c);
                    if allowed[c] && d < -TAU_OPT && best.map_or(true, |(_, b)| d < b) {
                        best = Some((c, d));
                    }
                }
                best.map(|(c, _)| c)
            };
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - 1e-12 || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(false);
            };
            if ratio <= 1e-12 {
                degenerate += 1;
                if degenerate >= DEGENERATE_LIMIT {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
        }
        Err(LpError::IterationLimit(max_iter))
    }
}

/// Solves `p` with a dense two-phase simplex (Dantzig pricing, switching to
/// Bland's rule after a run of degenerate pivots). Deterministic.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution, LpError> {
    p.validate()?;
    let n = p.num_vars();

    // Standard form over y >= 0.
    let mut cols = 0usize;
    let mut maps = Vec::with_capacity(n);
    for b in &p.bounds {
        if b.lower.is_finite() {
            maps.push(VarMap::Shift { col: cols, lower: b.lower });
            cols += 1;
        } else if b.upper.is_finite() {
            maps.push(VarMap::Mirror { col: cols, upper: b.upper });
            cols += 1;
        } else {
            maps.push(VarMap::Split { pos: cols, neg: cols + 1 });
            cols += 2;
        }
    }
    let ny = cols;
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    let mut cost = vec![0.0; ny];
    let push_coeff = |row: &mut [f64], rhs: &mut f64, map: &VarMap, a: f64| match *map {
        VarMap::Shift { col, lower } => {
            row[col] += a;
            *rhs -= a * lower;
        }
        VarMap::Mirror { col, upper } => {
            row[col] -= a;
            *rhs -= a * upper;
        }
        VarMap::Split { pos, neg } => {
            row[pos] += a;
            row[neg] -= a;
        }
    };
    for (j, map) in maps.iter().enumerate() {
        let mut shift = 0.0;
        push_coeff(&mut cost, &mut shift, map, p.objective[j]);
    }
    for c in &p.constraints {
        let mut row = vec![0.0; ny];
        let mut rhs = c.rhs;
        for (j, map) in maps.iter().enumerate() {
            if c.coeffs[j] != 0.0 {
                push_coeff(&mut row, &mut rhs, map, c.coeffs[j]);
            }
        }
        rows.push((row, c.relation, rhs));
    }
    for (j, b) in p.bounds.iter().enumerate() {
        if let VarMap::Shift { col, lower } = maps[j] {
            if b.upper.is_finite() {
                let mut row = vec![0.0; ny];
                row[col] = 1.0;
                rows.push((row, Relation::Le, b.upper - lower));
            }
        }
    }
    for (row, rel, rhs) in &mut rows {
        if *rhs < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
            *rhs = -*rhs;
            *rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let width = ny + n_slack + n_art + 1;
    let obj2 = m;
    let obj1 = m + 1;
    let mut t = Tableau { width, data: vec![0.0; (m + 2) * width], rows: m, basis: vec![0; m] };
    let mut is_art = vec![false; width - 1];
    let (mut slack, mut art) = (ny, ny + n_slack);
    for (r, (row, rel, rhs)) in rows.iter().enumerate() {
        t.data[r * width..r * width + ny].copy_from_slice(row);
        t.data[r * width + width - 1] = *rhs;
        match rel {
            Relation::Le => {
                t.data[r * width + slack] = 1.0;
                t.basis[r] = slack;
                slack += 1;
            }
            Relation::Ge => {
                t.data[r * width + slack] = -1.0;
                slack += 1;
                t.data[r * width + art] = 1.0;
                is_art[art] = true;
                t.basis[r] = art;
                art += 1;
            }
            Relation::Eq => {
                t.data[r * width + art] = 1.0;
                is_art[art] = true;
                t.basis[r] = art;
                art += 1;
            }
        }
    }
    t.data[obj2 * width..obj2 * width + ny].copy_from_slice(&cost);
    for c in 0..width - 1 {
        if is_art[c] {
            t.data[obj1 * width + c] = 1.0;
        }
    }
    // Price out the initial basis in both objective rows.
    for r in 0..m {
        let b = t.basis[r];
        for obj in [obj1, obj2] {
            let f = t.at(obj, b);
            if f != 0.0 {
                for c in 0..width {
                    t.data[obj * width + c] -= f * t.data[r * width + c];
                }
            }
        }
    }

    let max_iter = 50_000 + 200 * (m + width);
    let all = vec![true; width - 1];
    t.optimize(obj1, &all, max_iter)?;
    let rhs_scale = 1.0 + rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
    if -t.rhs(obj1) > TAU_FEAS * rhs_scale {
        return Ok(LpSolution { status: LpStatus::Infeasible, value: f64::INFINITY, point: Vec::new() });
    }
    // Drive zero-level artificials out of the basis where possible; rows
    // where that fails are redundant and stay inert.
    for r in 0..m {
        if is_art[t.basis[r]] {
            let mut best: Option<(usize, f64)> = None;
            for c in 0..width - 1 {
                let a = t.at(r, c).abs();
                if !is_art[c] && a > 1e-9 && best.map_or(true, |(_, b)| a > b) {
                    best = Some((c, a));
                }
            }
            if let Some((c, _)) = best {
                t.pivot(r, c);
            }
        }
    }
    let allowed: Vec<bool> = is_art.iter().map(|a| !a).collect();
    if !t.optimize(obj2, &allowed, max_iter)? {
        return Ok(LpSolution { status: LpStatus::Unbounded, value: f64::NEG_INFINITY, point: Vec::new() });
    }

    let mut y = vec![0.0; width - 1];
    for r in 0..m {
        y[t.basis[r]] = t.rhs(r).max(0.0);
    }
    let point: Vec<f64> = maps.iter().map(|mp| mp.value(&y)).collect();
    let (row, violation) = p.max_violation(&point);
    if violation > TAU_FEAS * 10.0 {
        return Err(LpError::Verification { row, violation });
    }
    let value = p.offset + p.objective.iter().zip(&point).map(|(c, x)| c * x).sum::<f64>();
    Ok(LpSolution { status: LpStatus::Optimal, value, point })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeReport {
    /// Optimum with the closed constraint `<= budget`.
    pub value_closed: f64,
    /// Extrapolated limit of the optimum under `<= budget - eps` as `eps -> 0`.
    pub value_open_limit: f64,
    pub discontinuous: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("eps list must be nonempty, positive and strictly decreasing")]
    BadEpsList,
    #[error("program infeasible at budget - {eps}")]
    Infeasible { eps: f64 },
    #[error("program infeasible at the closed budget")]
    InfeasibleClosed,
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Builds a probe report from a value oracle. `value_at(b)` returns the
/// optimum under budget `b`, or `None` if infeasible.
pub fn probe_values<F>(mut value_at: F, budget: f64, eps_list: &[f64]) -> Result<ProbeReport, ProbeError>
where
    F: FnMut(f64) -> Result<Option<f64>, ProbeError>,
{
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(ProbeError::BadEpsList);
    }
    let closed = value_at(budget)?.ok_or(ProbeError::InfeasibleClosed)?;
    let mut samples = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let v = value_at(budget - eps)?.ok_or(ProbeError::Infeasible { eps })?;
        samples.push((eps, v));
    }
    let open = match samples.as_slice() {
        [.., (e2, v2), (e1, v1)] => v1 - e1 * (v2 - v1) / (e2 - e1),
        [(_, v)] => *v,
        [] => unreachable!(),
    };
    Ok(ProbeReport { value_closed: closed, value_open_limit: open, discontinuous: (open - closed).abs() > TAU_DISC })
}

/// Solves `build(budget)` and `build(budget - eps)` for each `eps` and
/// reports whether the open-constraint limit differs from the closed optimum.
pub fn strict_inequality_probe<F>(build: F, budget: f64, eps_list: &[f64]) -> Result<ProbeReport, ProbeError>
where
    F: Fn(f64) -> LpProblem,
{
    probe_values(|b| Ok(solve_lp(&build(b))?.optimal_value()), budget, eps_list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn single_active_bound() {
        let mut p = LpProblem::new(1);
        p.objective[0] = 1.0;
        p.bounds[0] = Bounds::new(1.0, f64::INFINITY);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(approx(s.value, 1.0));
    }

    #[test]
    fn degenerate_face() {
        let mut p = LpProblem::new(2);
        p.objective = vec![1.0, 1.0];
        p.add_constraint(vec![1.0, 1.0], Relation::Ge, 2.0);
        assert!(approx(solve_lp(&p).unwrap().value, 2.0));
    }

    #[test]
    fn vertex_optimum() {
        let mut p = LpProblem::new(2);
        p.objective = vec![3.0, 1.0];
        p.add_constraint(vec![1.0, 1.0], Relation::Ge, 1.0);
        let s = solve_lp(&p).unwrap();
        assert!(approx(s.value, 1.0));
        assert!(approx(s.point[0], 0.0) && approx(s.point[1], 1.0));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut p = LpProblem::new(1);
        p.objective[0] = 1.0;
        p.add_constraint(vec![1.0], Relation::Le, -1.0);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);

        let mut p = LpProblem::new(1);
        p.objective[0] = -1.0;
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_negative_and_free_variables() {
        // min x - y, x + y = 1, x in [-2, 3], y <= 0.5 (no lower), z free unused
        let mut p = LpProblem::new(3);
        p.objective = vec![1.0, 0.0, 0.0];
        p.bounds = vec![Bounds::new(-2.0, 3.0), Bounds::new(f64::NEG_INFINITY, 0.5), Bounds::FREE];
        p.add_constraint(vec![1.0, 1.0, 0.0], Relation::Eq, 1.0);
        p.add_constraint(vec![0.0, 1.0, 1.0], Relation::Ge, -10.0);
        let s = solve_lp(&p).unwrap();
        assert!(approx(s.value, 0.5), "{s:?}");
    }

    #[test]
    fn redundant_equalities() {
        let mut p = LpProblem::new(2);
        p.objective = vec![1.0, 2.0];
        p.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0);
        p.add_constraint(vec![2.0, 2.0], Relation::Eq, 2.0);
        let s = solve_lp(&p).unwrap();
        assert!(approx(s.value, 1.0));
    }

    #[test]
    fn structural_errors() {
        let mut p = LpProblem::new(2);
        p.add_constraint(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(solve_lp(&p), Err(LpError::RowLength { .. })));

        let mut p = LpProblem::new(1);
        p.objective[0] = 1.0;
        p.bounds[0] = Bounds::FREE;
        assert_eq!(solve_lp(&p), Err(LpError::UnboundedCostVariable(0)));

        let mut p = LpProblem::new(1);
        p.bounds[0] = Bounds::new(2.0, 1.0);
        assert_eq!(solve_lp(&p), Err(LpError::InvertedBounds(0)));
    }

    #[test]
    fn epigraph_inactive_term() {
        let mut base = LpProblem::new(1);
        base.objective[0] = 1.0;
        let p = epigraph_transform(&[AffineExpr::constant(-1.0).term(0, 1.0)], 0.5, &base);
        let s = solve_lp(&p).unwrap();
        assert!(approx(s.value, 0.0));
    }

    #[test]
    fn epigraph_caps_the_term() {
        let mut base = LpProblem::new(1);
        base.objective[0] = -1.0;
        base.bounds[0] = Bounds::new(0.0, 10.0);
        let p = epigraph_transform(&[AffineExpr::constant(0.0).term(0, 1.0)], 0.5, &base);
        assert!(approx(solve_lp(&p).unwrap().value, -0.5));
    }

    #[test]
    fn epigraph_two_terms_matches_grid() {
        let mut base = LpProblem::new(2);
        base.objective = vec![1.0, 1.0];
        let terms = [AffineExpr::constant(1.0).term(0, -1.0), AffineExpr::constant(1.0).term(1, -1.0)];
        let lp = solve_lp(&epigraph_transform(&terms, 1.0, &base)).unwrap().value;
        let mut best = f64::INFINITY;
        for i in 0..=200 {
            for j in 0..=200 {
                let (a, b) = (i as f64 * 0.01, j as f64 * 0.01);
                if (1.0 - a).max(0.0) + (1.0 - b).max(0.0) <= 1.0 + 1e-12 {
                    best = best.min(a + b);
                }
            }
        }
        assert!(approx(lp, 1.0));
        assert!((best - lp).abs() < 1e-9);
    }

    #[test]
    fn probe_continuous_program() {
        // min a s.t. (1 - a)+ <= budget
        let build = |b: f64| {
            let mut base = LpProblem::new(1);
            base.objective[0] = 1.0;
            epigraph_transform(&[AffineExpr::constant(1.0).term(0, -1.0)], b, &base)
        };
        let r = strict_inequality_probe(build, 0.5, &[1e-3, 1e-4]).unwrap();
        assert!(approx(r.value_closed, 0.5));
        assert!((r.value_open_limit - 0.5).abs() < 1e-7);
        assert!(!r.discontinuous);

        let single = strict_inequality_probe(build, 0.5, &[1e-3]).unwrap();
        assert!((single.value_open_limit - 0.501).abs() < 1e-9);
    }

    #[test]
    fn probe_flags_a_step() {
        // Value jumps from 1 to 0 as the budget reaches 1.
        let step = |b: f64| Ok(Some(if b >= 1.0 { 0.0 } else { 1.0 }));
        let r = probe_values(step, 1.0, &[1e-3, 1e-4]).unwrap();
        assert!(r.discontinuous);
        assert_eq!(r.value_closed, 0.0);
        assert!(approx(r.value_open_limit, 1.0));
    }

    #[test]
    fn probe_reports_failing_eps() {
        let f = |b: f64| Ok(if b >= 0.0 { Some(0.0) } else { None });
        assert_eq!(probe_values(f, 0.0, &[1e-3]), Err(ProbeError::Infeasible { eps: 1e-3 }));
        assert_eq!(probe_values(f, 0.0, &[1e-4, 1e-3]), Err(ProbeError::BadEpsList));
    }

    #[test]
    fn repeated_solves_are_bitwise_identical() {
        let mut p = LpProblem::new(3);
        p.objective = vec![1.0, 2.0, 0.5];
        p.add_constraint(vec![1.0, 1.0, 1.0], Relation::Ge, 1.7);
        p.add_constraint(vec![1.0, -1.0, 0.3], Relation::Le, 0.2);
        let a = solve_lp(&p).unwrap();
        let b = solve_lp(&p).unwrap();
        assert_eq!(a.point.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.point.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn epigraph_matches_grid_on_random_programs(
            cost in proptest::collection::vec(0.1f64..3.0, 2),
            terms in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -1.0f64..2.0), 1..=3),
            budget in 0.0f64..2.0,
        ) {
            let mut base = LpProblem::new(2);
            base.objective = cost.clone();
            for j in 0..2 {
                base.bounds[j] = Bounds::new(0.0, 2.0);
            }
            let exprs: Vec<AffineExpr> = terms.iter().map(|&(a, b, c)| AffineExpr::constant(c).term(0, a).term(1, b)).collect();
            let sol = solve_lp(&epigraph_transform(&exprs, budget, &base)).unwrap();
            let step = 0.01;
            let lip = cost.iter().sum::<f64>();
            let slope = terms.iter().map(|t| t.0.abs() + t.1.abs()).sum::<f64>();
            let mut best = f64::INFINITY;
            for i in 0..=200 {
                for j in 0..=200 {
                    let x = [i as f64 * step, j as f64 * step];
                    let g: f64 = exprs.iter().map(|e| e.eval(&x).max(0.0)).sum();
                    if g <= budget + 1e-12 {
                        best = best.min(cost[0] * x[0] + cost[1] * x[1]);
                    }
                }
            }
            match sol.status {
                LpStatus::Optimal => {
                    prop_assert!(sol.value <= best + 1e-9);
                    let (_, v) = base.max_violation(&sol.point[..2]);
                    prop_assert!(v <= 1e-8);
                    // Rounding the optimum of a tightened program to the grid
                    // keeps it feasible, which bounds the grid minimum.
                    let tight = budget - step * slope;
                    if tight >= 0.0 {
                        let t = solve_lp(&epigraph_transform(&exprs, tight, &base)).unwrap();
                        if let Some(tv) = t.optimal_value() {
                            prop_assert!(best <= tv + step * lip + 1e-9, "grid {best} vs tightened lp {tv}");
                        }
                    }
                }
                LpStatus::Infeasible => prop_assert!(best.is_infinite()),
                LpStatus::Unbounded => prop_assert!(false, "bounded box cannot be unbounded"),
            }
        }
    }
}
