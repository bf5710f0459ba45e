//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Solves `maximize obj . x  s.t.  A x <= b` with `x` free. Problems here are
//! small and dense (tens of rows and columns), so the whole tableau is kept in
//! one row-major buffer.

use ndarray::ArrayView2;

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const PHASE1_TOL: f64 = 1e-10;
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Unbounded,
    Infeasible,
}

struct Tableau {
    rows: usize,
    cols: usize,
    // rows x (cols + 1); last column is the right-hand side
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.cols + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.data[i * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize, cost: &mut [f64]) {
        let w = self.cols + 1;
        let p = self.data[r * w + c];
        for j in 0..w {
            self.data[r * w + j] /= p;
        }
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.data[i * w + c];
            if f != 0.0 {
                for j in 0..w {
                    self.data[i * w + j] -= f * self.data[r * w + j];
                }
                self.data[i * w + c] = 0.0;
            }
        }
        let f = cost[c];
        if f != 0.0 {
            for j in 0..w {
                cost[j] -= f * self.data[r * w + j];
            }
            cost[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Minimizes the reduced-cost row `cost` (length cols + 1, last entry is
    /// minus the objective value) over columns `j < allowed`. Returns false on
    /// an unbounded ray accepted by `real_ray`; rejected rays (rounding noise in
    /// the reduced cost) block their column until the next pivot.
    fn run(
        &mut self,
        cost: &mut [f64],
        allowed: usize,
        pivots: &mut usize,
        real_ray: &dyn Fn(&Tableau, usize) -> bool,
    ) -> Result<bool> {
        let mut blocked = vec![false; allowed];
        loop {
            let entering = (0..allowed).find(|&j| !blocked[j] && cost[j] < -COST_TOL);
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            let tie = (ratio - best).abs() <= 1e-12 * best.abs().max(1.0);
                            if ratio < best && !tie || tie && self.basis[i] < self.basis[r] {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                if real_ray(self, c) {
                    return Ok(false);
                }
                blocked[c] = true;
                continue;
            };
            blocked.iter_mut().for_each(|b| *b = false);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(Error::SolverFailure(format!(
                    "pivot limit {MAX_PIVOTS} exceeded"
                )));
            }
            self.pivot(r, c, cost);
        }
    }
}

/// `maximize obj . x` subject to `a x <= b`, `x` free.
pub(crate) fn maximize(a: ArrayView2<'_, f64>, b: &[f64], obj: &[f64]) -> Result<LpOutcome> {
    let (m, d) = a.dim();
    if b.len() != m || obj.len() != d {
        return Err(Error::Dimension(format!(
            "LP with {m}x{d} constraints, {} bounds and {} objective entries",
            b.len(),
            obj.len()
        )));
    }
    if a.iter().chain(b).chain(obj).any(|v| !v.is_finite()) {
        return Err(Error::SolverFailure("non-finite LP data".into()));
    }
    if m == 0 {
        return Ok(if obj.iter().all(|&v| v == 0.0) {
            LpOutcome::Optimal {
                x: vec![0.0; d],
                value: 0.0,
            }
        } else {
            LpOutcome::Unbounded
        });
    }

    // columns: x+ (d), x- (d), slack (m), artificials (one per negative row)
    let negative: Vec<usize> = (0..m).filter(|&i| b[i] < 0.0).collect();
    let n_art = negative.len();
    let cols = 2 * d + m + n_art;
    let w = cols + 1;
    let mut data = vec![0.0; m * w];
    let mut basis = vec![0; m];
    let mut art_of_row = vec![usize::MAX; m];
    for (k, &i) in negative.iter().enumerate() {
        art_of_row[i] = 2 * d + m + k;
    }
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let row = &mut data[i * w..(i + 1) * w];
        for j in 0..d {
            row[j] = sign * a[[i, j]];
            row[d + j] = -sign * a[[i, j]];
        }
        row[2 * d + i] = sign;
        row[cols] = sign * b[i];
        if b[i] < 0.0 {
            row[art_of_row[i]] = 1.0;
            basis[i] = art_of_row[i];
        } else {
            basis[i] = 2 * d + i;
        }
    }
    let mut t = Tableau {
        rows: m,
        cols,
        data,
        basis,
    };
    let mut pivots = 0;

    if n_art > 0 {
        // phase 1: minimize the sum of artificials
        let mut cost = vec![0.0; w];
        for j in (2 * d + m)..cols {
            cost[j] = 1.0;
        }
        for i in 0..m {
            if t.basis[i] >= 2 * d + m {
                for j in 0..w {
                    cost[j] -= t.at(i, j);
                }
            }
        }
        t.run(&mut cost, cols, &mut pivots, &|_, _| true)?;
        let infeasibility = -cost[cols];
        if infeasibility > PHASE1_TOL {
            return Ok(LpOutcome::Infeasible);
        }
        // drive zero-valued artificials out of the basis where possible
        for i in 0..m {
            if t.basis[i] >= 2 * d + m {
                if let Some(c) = (0..2 * d + m).find(|&j| t.at(i, j).abs() > 1e-9) {
                    t.pivot(i, c, &mut cost);
                }
            }
        }
    }

    // phase 2: minimize -obj over the non-artificial columns
    let mut cost = vec![0.0; w];
    for j in 0..d {
        cost[j] = -obj[j];
        cost[d + j] = obj[j];
    }
    for i in 0..m {
        let cb = cost[t.basis[i]];
        if cb != 0.0 {
            for j in 0..w {
                cost[j] -= cb * t.at(i, j);
            }
        }
    }
    // x = x+ - x-; a ray whose objective gain is at rounding level relative
    // to its motion in x (e.g. an x+/x- pair moving together) is noise
    let real_ray = |t: &Tableau, c: usize| {
        let mut dx = vec![0.0; d];
        let mut add = |j: usize, v: f64| {
            if j < d {
                dx[j] += v;
            } else if j < 2 * d {
                dx[j - d] -= v;
            }
        };
        add(c, 1.0);
        for i in 0..t.rows {
            add(t.basis[i], -t.at(i, c));
        }
        let gain: f64 = obj.iter().zip(&dx).map(|(o, v)| o * v).sum();
        let size = obj.iter().fold(0.0_f64, |m, o| m.max(o.abs()))
            * dx.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        gain > 1e-9 * size && gain > COST_TOL
    };
    let bounded = t.run(&mut cost, 2 * d + m, &mut pivots, &real_ray)?;
    if !bounded {
        return Ok(LpOutcome::Unbounded);
    }
    let mut x = vec![0.0; d];
    for i in 0..m {
        let v = t.rhs(i);
        let j = t.basis[i];
        if j < d {
            x[j] += v;
        } else if j < 2 * d {
            x[j - d] -= v;
        }
    }
    let value = obj.iter().zip(&x).map(|(o, v)| o * v).sum();
    Ok(LpOutcome::Optimal { x, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn box_maximum() {
        let a = array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        let b = [1.0, 1.0, 2.0, 2.0];
        match maximize(a.view(), &b, &[1.0, 1.0]).unwrap() {
            LpOutcome::Optimal { value, .. } => assert!((value - 3.0).abs() < 1e-12),
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn negative_rhs_needs_phase_one() {
        // x >= 1, x <= 3, maximize -x -> -1
        let a = array![[-1.0], [1.0]];
        match maximize(a.view(), &[-1.0, 3.0], &[-1.0]).unwrap() {
            LpOutcome::Optimal { x, value } => {
                assert!((value + 1.0).abs() < 1e-12);
                assert!((x[0] - 1.0).abs() < 1e-12);
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let a = array![[1.0], [-1.0]];
        assert_eq!(
            maximize(a.view(), &[-1.0, -1.0], &[0.0]).unwrap(),
            LpOutcome::Infeasible
        );
        let a = array![[-1.0]];
        assert_eq!(
            maximize(a.view(), &[0.0], &[1.0]).unwrap(),
            LpOutcome::Unbounded
        );
    }

    #[test]
    fn mirrored_column_noise_is_not_a_ray() {
        // Chebyshev LP of a thin sliver; the optimum sits far from the origin
        let rows = [
            [
                0.8206341627161063,
                -0.5709944653404311,
                -0.022910511426643798,
                1.0,
            ],
            [
                0.7038591740595564,
                -0.4066891175283462,
                0.5823969649441988,
                1.0,
            ],
            [
                0.16216322058891294,
                0.12359377905474844,
                -0.9789931908175856,
                1.0,
            ],
            [
                -0.7049441807406782,
                -0.7043990313580185,
                0.08291988098001288,
                1.0,
            ],
            [
                0.7416236826476579,
                0.6691203747638633,
                -0.047667991482683914,
                1.0,
            ],
            [
                -0.6527239335292725,
                -0.7290538347063161,
                0.2059902247634323,
                1.0,
            ],
            [
                -0.6406225599770692,
                -0.7578425274163194,
                0.12360193885077951,
                1.0,
            ],
            [
                0.7240962717866606,
                0.6862498069600057,
                -0.06888970628485491,
                1.0,
            ],
            [
                -0.6412635171071168,
                -0.757447089220071,
                0.12269885353764481,
                1.0,
            ],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let a = ndarray::Array2::from_shape_fn((10, 4), |(i, j)| rows[i][j]);
        let b = [
            0.21933388640148396,
            0.3738646552914529,
            0.7304877947288033,
            -0.3375546654003438,
            0.3650467297059159,
            -1.1367882069007982,
            -0.7722837531691717,
            5.5126258354407796,
            -0.7125768032465701,
            1.0,
        ];
        match maximize(a.view(), &b, &[0.0, 0.0, 0.0, 1.0]).unwrap() {
            LpOutcome::Optimal { value, .. } => assert!((value - 1.0).abs() < 1e-9),
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn degenerate_redundant_rows() {
        // many copies of the same vertex constraints; Bland must not cycle
        let a = array![
            [1.0, 1.0],
            [1.0, 1.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [-1.0, 0.0],
            [0.0, -1.0],
            [1.0, 2.0]
        ];
        let b = [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        match maximize(a.view(), &b, &[1.0, 1.0]).unwrap() {
            LpOutcome::Optimal { value, .. } => assert!((value - 1.0).abs() < 1e-12),
            o => panic!("{o:?}"),
        }
    }
}
