//! Best-first branch and bound over activation pieces.
//!
//! Every open subproblem is a polyhedral part of the input region together
//! with the interval hull of the activation states still possible on it. Its
//! bound is the norm of the elementwise upper envelope of the interval
//! Jacobian. Branching fixes the first undecided neuron of the shallowest
//! undecided layer; children on which the whole network is linear are solved
//! exactly and raise the global lower bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::baselines::sampled_lower_bound;
use crate::error::{Error, Result};
use crate::interval::IntervalMatrix;
use crate::network::{LinearPrefix, Network};
use crate::norms::{induced_norm, NormPair};
use crate::polyhedron::Polyhedron;
use crate::symprop::{distinct, feasible_pieces, row_hull, symprop};

/// Relative gap under which `glb` and `gub` are reported as equal.
pub const EXACT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub norm: NormPair,
    /// Stop once `gub <= theta * glb`.
    pub theta: f64,
    /// Seconds.
    pub time_limit: Option<f64>,
    pub sample_count: usize,
    pub seed: u64,
    pub max_iterations: Option<u64>,
    pub threads: usize,
    /// Per-coordinate sampling range used where the region is unbounded.
    pub sample_box: (f64, f64),
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            norm: NormPair::default(),
            theta: 1.0,
            time_limit: None,
            sample_count: 0,
            seed: 0,
            max_iterations: None,
            threads: 1,
            sample_box: (-10.0, 10.0),
        }
    }
}

impl SolverConfig {
    pub fn new(norm: NormPair) -> Self {
        Self {
            norm,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= 1.0 && self.theta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "approximation factor must be a finite number >= 1, got {}",
                self.theta
            )));
        }
        if let Some(t) = self.time_limit {
            if !(t >= 0.0) {
                return Err(Error::InvalidInput(format!("negative time limit {t}")));
            }
        }
        if self.threads == 0 {
            return Err(Error::InvalidInput(
                "thread count must be at least 1".into(),
            ));
        }
        let (lo, hi) = self.sample_box;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "bad sampling box [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Exact,
    ApproxReached,
    TimeLimit,
    IterationLimit,
}

impl SolveStatus {
    pub fn is_converged(self) -> bool {
        matches!(self, SolveStatus::Exact | SolveStatus::ApproxReached)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub glb: f64,
    pub gub: f64,
    pub status: SolveStatus,
    pub iterations: u64,
    pub subproblems_created: u64,
    pub fathomed_bounds: u64,
    pub fathomed_optimality: u64,
    pub peak_heap_size: usize,
    pub wall_time_s: f64,
}

/// Snapshot handed to progress observers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub iteration: u64,
    pub glb: f64,
    pub gub: f64,
    pub open: usize,
}

#[derive(Debug, Clone)]
pub struct Subproblem {
    region: Polyhedron,
    slopes: Vec<IntervalMatrix>,
    biases: Vec<IntervalMatrix>,
    first_star: usize,
    stars: Vec<Vec<usize>>,
    prefix: LinearPrefix,
    upper: f64,
    id: u64,
}

impl Subproblem {
    /// The subproblem covering all of `omega`, with its bound computed.
    pub fn root(net: &Network, omega: &Polyhedron, np: NormPair) -> Result<Self> {
        let pattern = symprop(net, omega)?;
        let mut slopes = Vec::with_capacity(pattern.layers.len());
        let mut biases = Vec::with_capacity(pattern.layers.len());
        let mut stars = Vec::with_capacity(pattern.layers.len());
        for layer in pattern.layers {
            slopes.push(layer.slopes);
            biases.push(layer.biases);
            stars.push(layer.stars);
        }
        let prefix = net.lin_prop(&slopes, &biases, pattern.first_star)?;
        let mut sub = Subproblem {
            region: omega.clone(),
            slopes,
            biases,
            first_star: pattern.first_star,
            stars,
            prefix,
            upper: 0.0,
            id: 0,
        };
        sub.upper = upper_bound(&sub, net, np)?;
        Ok(sub)
    }

    pub fn region(&self) -> &Polyhedron {
        &self.region
    }

    pub fn slopes(&self) -> &[IntervalMatrix] {
        &self.slopes
    }

    pub fn biases(&self) -> &[IntervalMatrix] {
        &self.biases
    }

    /// First layer with an undecided neuron; the network depth if none.
    pub fn first_star(&self) -> usize {
        self.first_star
    }

    pub fn stars(&self) -> &[Vec<usize>] {
        &self.stars
    }

    /// Map from inputs to the pre-activation of [`Self::first_star`], or to
    /// the output when the subproblem is solved.
    pub fn prefix(&self) -> &LinearPrefix {
        &self.prefix
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn is_solved(&self) -> bool {
        self.first_star == self.slopes.len()
    }
}

/// Upper bound on the Lipschitz constant of `net` over the subproblem.
pub fn upper_bound(sub: &Subproblem, net: &Network, np: NormPair) -> Result<f64> {
    let depth = net.depth();
    if sub.first_star == depth {
        return induced_norm(sub.prefix.jacobian.view(), np);
    }
    let l = sub.first_star;
    let mut m = sub.slopes[l].matmul(&IntervalMatrix::exact(sub.prefix.jacobian.view())?)?;
    for k in l + 1..depth {
        let w = IntervalMatrix::exact(net.layers()[k].weight.view())?;
        m = sub.slopes[k].matmul(&w.matmul(&m)?)?;
    }
    induced_norm(m.abs_upper_envelope().view(), np)
}

/// Re-tests the undecided neurons of the first undecided layer on the
/// subproblem's region, folding every layer that turns out fixed linear into
/// the prefix. Deeper layers are left as they are.
pub fn ffilter(mut sub: Subproblem, net: &Network) -> Result<Subproblem> {
    let depth = net.depth();
    while sub.first_star < depth {
        let l = sub.first_star;
        let act = &net.layers()[l].activation;
        let current = std::mem::take(&mut sub.stars[l]);
        let mut stars = Vec::new();
        let mut done_groups: Vec<usize> = Vec::new();
        for &n in &current {
            let group = act.group_of(n)?;
            if done_groups.contains(&group.neurons[0]) {
                continue;
            }
            done_groups.push(group.neurons[0]);
            let feasible = feasible_pieces(
                &group.pieces,
                &sub.region,
                &sub.prefix.jacobian,
                sub.prefix.offset.view(),
                true,
            )?;
            for &m in group.neurons.iter().filter(|m| current.contains(m)) {
                let rows: Vec<_> = feasible
                    .iter()
                    .map(|(p, _)| p.piece.row_of(m).expect("group pieces fix all members"))
                    .collect();
                let (lo, hi, lo_b, hi_b) = row_hull(&rows);
                sub.slopes[l].set_row(m, &lo, &hi);
                sub.biases[l].set_row(m, &[lo_b], &[hi_b]);
                if distinct(&rows) {
                    stars.push(m);
                }
            }
        }
        stars.sort_unstable();
        if !stars.is_empty() {
            sub.stars[l] = stars;
            break;
        }
        let prefix = std::mem::replace(
            &mut sub.prefix,
            LinearPrefix {
                jacobian: Default::default(),
                offset: Default::default(),
            },
        );
        sub.prefix = net.fold(prefix, &sub.slopes, &sub.biases, l, l + 1)?;
        sub.first_star = l + 1;
    }
    Ok(sub)
}

/// Children of `sub` obtained by fixing its first undecided neuron to each
/// feasible piece. Children have id 0; ids are assigned by the caller.
pub fn branch(sub: &Subproblem, net: &Network, np: NormPair) -> Result<Vec<Subproblem>> {
    if sub.is_solved() {
        return Err(Error::Contract(
            "branching a subproblem without undecided neurons".into(),
        ));
    }
    let l = sub.first_star;
    let n = sub.stars[l][0];
    let group = net.layers()[l].activation.group_of(n)?;
    let mut children = Vec::new();
    for piece in &group.pieces {
        let pre = piece
            .region
            .affine_preimage(sub.prefix.jacobian.view(), sub.prefix.offset.view())?;
        let region = sub.region.stack(&pre)?;
        if !region.has_interior()? {
            continue;
        }
        let mut child = sub.clone();
        child.region = region;
        for &m in piece.fixed_neurons() {
            let (row, t) = piece.piece.row_of(m).expect("fixed neuron has a row");
            child.slopes[l].set_row_exact(m, row.as_slice().expect("contiguous"));
            child.biases[l].set_row_exact(m, &[t]);
        }
        child.stars[l].retain(|m| !piece.fixed_neurons().contains(m));
        let mut child = ffilter(child, net)?;
        child.upper = upper_bound(&child, net, np)?.min(sub.upper);
        children.push(child);
    }
    Ok(children)
}

struct Entry(Subproblem);

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .upper
            .total_cmp(&other.0.upper)
            .then_with(|| other.0.id.cmp(&self.0.id))
    }
}

/// Incremental solver. [`Solver::step`] branches one batch of subproblems;
/// bounds are valid between steps.
pub struct Solver<'a> {
    net: &'a Network,
    cfg: SolverConfig,
    heap: BinaryHeap<Entry>,
    glb: f64,
    gub: f64,
    iterations: u64,
    created: u64,
    fathomed_bounds: u64,
    fathomed_optimality: u64,
    peak_heap_size: usize,
    start: Instant,
    status: Option<SolveStatus>,
}

impl<'a> Solver<'a> {
    /// Runs the initial symbolic pass and, if requested, the sampled lower
    /// bound.
    pub fn new(net: &'a Network, omega: &Polyhedron, cfg: SolverConfig) -> Result<Self> {
        let start = Instant::now();
        cfg.validate()?;
        let root = Subproblem::root(net, omega, cfg.norm)?;
        let mut glb = if cfg.sample_count > 0 {
            sampled_lower_bound(
                net,
                omega,
                cfg.norm,
                cfg.sample_count,
                cfg.seed,
                cfg.sample_box,
            )?
        } else {
            0.0
        };
        let mut solver = Solver {
            net,
            cfg,
            heap: BinaryHeap::new(),
            glb: 0.0,
            gub: 0.0,
            iterations: 0,
            created: 1,
            fathomed_bounds: 0,
            fathomed_optimality: 0,
            peak_heap_size: 0,
            start,
            status: None,
        };
        if root.is_solved() {
            glb = glb.max(root.upper);
            solver.fathomed_optimality += 1;
        } else if root.upper > glb {
            solver.heap.push(Entry(root));
            solver.peak_heap_size = 1;
        } else {
            solver.fathomed_bounds += 1;
        }
        solver.glb = glb;
        solver.refresh_gub();
        Ok(solver)
    }

    pub fn glb(&self) -> f64 {
        self.glb
    }

    pub fn gub(&self) -> f64 {
        self.gub
    }

    pub fn progress(&self) -> Progress {
        Progress {
            iteration: self.iterations,
            glb: self.glb,
            gub: self.gub,
            open: self.heap.len(),
        }
    }

    /// Open subproblems, in no particular order. Entries with a bound at or
    /// below the current lower bound may still be listed.
    pub fn pending(&self) -> impl Iterator<Item = &Subproblem> {
        self.heap.iter().map(|e| &e.0)
    }

    pub fn status(&self) -> Option<SolveStatus> {
        self.status
    }

    fn refresh_gub(&mut self) {
        let top = self.heap.peek().map_or(0.0, |e| e.0.upper);
        self.gub = top.max(self.glb);
    }

    fn stop_reason(&self) -> Option<SolveStatus> {
        if !(self.gub > self.cfg.theta * self.glb) {
            let exact = (self.gub - self.glb).abs() <= EXACT_TOL * self.gub.max(1.0);
            return Some(if exact {
                SolveStatus::Exact
            } else {
                SolveStatus::ApproxReached
            });
        }
        if let Some(limit) = self.cfg.time_limit {
            if self.start.elapsed() >= Duration::from_secs_f64(limit) {
                return Some(SolveStatus::TimeLimit);
            }
        }
        if let Some(max) = self.cfg.max_iterations {
            if self.iterations >= max {
                return Some(SolveStatus::IterationLimit);
            }
        }
        None
    }

    /// Branches up to `threads` open subproblems. Returns `false` once the
    /// search has stopped.
    pub fn step(&mut self) -> Result<bool> {
        if self.status.is_some() {
            return Ok(false);
        }
        if let Some(status) = self.stop_reason() {
            self.status = Some(status);
            return Ok(false);
        }
        let mut limit = self.cfg.threads;
        if let Some(max) = self.cfg.max_iterations {
            limit = limit.min((max - self.iterations) as usize);
        }
        let mut batch = Vec::with_capacity(limit);
        while batch.len() < limit {
            let Some(Entry(sub)) = self.heap.pop() else {
                break;
            };
            if sub.upper <= self.glb {
                self.fathomed_bounds += 1;
            } else {
                batch.push(sub);
            }
        }
        let results = self.branch_batch(&batch)?;
        for children in results {
            self.iterations += 1;
            for mut child in children {
                self.created += 1;
                child.id = self.created - 1;
                if child.is_solved() {
                    self.glb = self.glb.max(child.upper);
                    self.fathomed_optimality += 1;
                } else if child.upper > self.glb {
                    self.heap.push(Entry(child));
                } else {
                    self.fathomed_bounds += 1;
                }
            }
            self.peak_heap_size = self.peak_heap_size.max(self.heap.len());
        }
        self.refresh_gub();
        Ok(true)
    }

    fn branch_batch(&self, batch: &[Subproblem]) -> Result<Vec<Vec<Subproblem>>> {
        let (net, np) = (self.net, self.cfg.norm);
        if batch.len() <= 1 {
            return batch.iter().map(|s| branch(s, net, np)).collect();
        }
        std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|s| scope.spawn(move || branch(s, net, np)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("branch worker panicked"))
                .collect()
        })
    }

    /// Steps until the search stops, calling `observer` once before the first
    /// step and after every step.
    pub fn run_with(mut self, mut observer: impl FnMut(&Progress)) -> Result<SolveResult> {
        observer(&self.progress());
        while self.step()? {
            observer(&self.progress());
        }
        Ok(self.result())
    }

    pub fn run(self) -> Result<SolveResult> {
        self.run_with(|_| {})
    }

    /// Current statistics; the status is `iteration_limit` style only once the
    /// search has stopped, so callers should normally use [`Self::run`].
    pub fn result(&self) -> SolveResult {
        SolveResult {
            glb: self.glb,
            gub: self.gub,
            status: self
                .status
                .or_else(|| self.stop_reason())
                .unwrap_or(SolveStatus::IterationLimit),
            iterations: self.iterations,
            subproblems_created: self.created,
            fathomed_bounds: self.fathomed_bounds,
            fathomed_optimality: self.fathomed_optimality,
            peak_heap_size: self.peak_heap_size,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        }
    }
}

/// Lipschitz constant of `net` on `omega`, or bounds on it when a limit
/// stops the search first.
pub fn solve(net: &Network, omega: &Polyhedron, cfg: SolverConfig) -> Result<SolveResult> {
    Solver::new(net, omega, cfg)?.run()
}

pub fn solve_with_progress(
    net: &Network,
    omega: &Polyhedron,
    cfg: SolverConfig,
    observer: impl FnMut(&Progress),
) -> Result<SolveResult> {
    Solver::new(net, omega, cfg)?.run_with(observer)
}
