use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::accuracy::{bucket_term, restrict_a0};
use super::plan::{CalibrationPlan, PlanConstraints, PlanEntry, TestPose};
use crate::elasto::{design_block, ParameterLayout};
use crate::error::{Error, Result};
use crate::model::{Joints, ManipulatorModel, Wrench, DOF};
use crate::stiffness::COMPENSATED_JOINT;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub starts: usize,
    /// Grid refinement levels; the step shrinks 4× per level.
    pub levels: usize,
    /// Candidates on each side of the current value per coordinate.
    pub grid: usize,
    /// Coordinate sweeps per level (stops early without improvement).
    pub max_sweeps: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            starts: 20,
            levels: 3,
            grid: 4,
            max_sweeps: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedPlan {
    /// Best plan, `score = ρ0²/σ²`.
    pub plan: CalibrationPlan,
    /// Scores of the random starts before descent (infinite when singular).
    pub start_scores: Vec<f64>,
    /// Score after descent per start.
    pub final_scores: Vec<f64>,
    /// Index of the start that produced the plan.
    pub best_start: usize,
    /// Set when descent could not improve on the random starts.
    pub diagnostic: Option<String>,
}

/// Incremental `ρ0²/σ²` evaluator: caches each entry's information block
/// and each bucket's trace term.
struct Evaluator<'a> {
    model: &'a ManipulatorModel,
    locals: Vec<ParameterLayout>,
    a0: DMatrix<f64>,
    blocks: Vec<DMatrix<f64>>,
    terms: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(model: &'a ManipulatorModel, layout: &ParameterLayout, test: &TestPose) -> Result<Self> {
        let included: Vec<usize> = (0..DOF).filter(|j| layout.included(*j)).map(|j| j + 1).collect();
        let locals = if layout.buckets().is_empty() {
            vec![ParameterLayout::new(&included, Vec::new(), layout.tolerance())?]
        } else {
            layout
                .buckets()
                .iter()
                .map(|b| ParameterLayout::new(&included, vec![*b], layout.tolerance()))
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Self {
            model,
            a0: restrict_a0(&test.a0, layout),
            locals,
            blocks: Vec::new(),
            terms: Vec::new(),
        })
    }

    fn block(&self, e: &PlanEntry) -> DMatrix<f64> {
        let b = design_block(self.model, &self.locals[e.bucket], 0, &e.q, &e.wrench)
            .expect("entry q2 equals its bucket angle");
        b.transpose() * b
    }

    fn bucket_info(&self, entries: &[PlanEntry], bucket: usize, replace: Option<(usize, &DMatrix<f64>)>) -> DMatrix<f64> {
        let p = self.locals[0].len();
        let mut info = DMatrix::zeros(p, p);
        for (i, e) in entries.iter().enumerate() {
            if e.bucket != bucket {
                continue;
            }
            match replace {
                Some((r, m)) if r == i => info += m,
                _ => info += &self.blocks[i],
            }
        }
        info
    }

    fn term(&self, info: &DMatrix<f64>, bucket: usize) -> f64 {
        bucket_term(info, &self.a0, bucket).unwrap_or(f64::INFINITY)
    }

    fn reset(&mut self, entries: &[PlanEntry]) -> f64 {
        self.blocks = entries.iter().map(|e| self.block(e)).collect();
        self.terms = (0..self.locals.len())
            .map(|b| self.term(&self.bucket_info(entries, b, None), b))
            .collect();
        self.terms.iter().sum()
    }

    /// Score if entry `i` were replaced by `e`, plus the data to commit it.
    fn try_replace(&self, entries: &[PlanEntry], i: usize, e: &PlanEntry) -> (f64, DMatrix<f64>, f64) {
        let block = self.block(e);
        let b = e.bucket;
        let term = self.term(&self.bucket_info(entries, b, Some((i, &block))), b);
        let total = self.terms.iter().enumerate().map(|(k, t)| if k == b { term } else { *t }).sum();
        (total, block, term)
    }

    fn commit(&mut self, i: usize, block: DMatrix<f64>, bucket: usize, term: f64) {
        self.blocks[i] = block;
        self.terms[bucket] = term;
    }
}

fn sample_joint(rng: &mut ChaCha8Rng, j: usize, constraints: &PlanConstraints) -> f64 {
    if j == 0 {
        let intervals = constraints.q1_intervals();
        let total: f64 = intervals.iter().map(|(a, b)| b - a).sum();
        let mut t = rng.random_range(0.0..=total);
        for (a, b) in &intervals {
            if t <= b - a {
                return a + t;
            }
            t -= b - a;
        }
        intervals.last().map_or(0.0, |(_, b)| *b)
    } else {
        let (lo, hi) = constraints.joint_limits[j];
        rng.random_range(lo..=hi)
    }
}

fn wrench_along(direction: &Vector3<f64>, f_max: f64) -> Wrench {
    let f = direction * f_max;
    Wrench::new(f.x, f.y, f.z, 0.0, 0.0, 0.0)
}

/// Random feasible plan with `per_bucket` entries in every bucket.
pub fn random_plan(
    model: &ManipulatorModel,
    layout: &ParameterLayout,
    constraints: &PlanConstraints,
    per_bucket: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CalibrationPlan> {
    constraints.check_feasible(layout)?;
    let directions = constraints.load_directions(&model.gravity);
    let buckets: Vec<Option<f64>> = if layout.buckets().is_empty() {
        vec![None]
    } else {
        layout.buckets().iter().map(|b| Some(*b)).collect()
    };
    let mut entries = Vec::new();
    for (b, angle) in buckets.iter().enumerate() {
        for _ in 0..per_bucket {
            let mut q = Joints::zeros();
            for j in 0..DOF {
                q[j] = match (j, angle) {
                    (COMPENSATED_JOINT, Some(a)) => *a,
                    _ => sample_joint(rng, j, constraints),
                };
            }
            let d = &directions[rng.random_range(0..directions.len())];
            entries.push(PlanEntry {
                q,
                wrench: wrench_along(d, constraints.f_max),
                bucket: b,
            });
        }
    }
    Ok(CalibrationPlan::new(entries))
}

fn direction_index(directions: &[Vector3<f64>], wrench: &Wrench, f_max: f64) -> usize {
    directions
        .iter()
        .position(|d| (wrench.fixed_rows::<3>(0) - d * f_max).norm() <= 1e-9 * f_max)
        .unwrap_or(0)
}

fn descend(
    eval: &mut Evaluator,
    entries: &mut [PlanEntry],
    layout: &ParameterLayout,
    constraints: &PlanConstraints,
    options: &SearchOptions,
) -> f64 {
    let directions = constraints.load_directions(&eval.model.gravity);
    let mut score = eval.reset(entries);
    let free: Vec<usize> = (0..DOF)
        .filter(|&j| j != COMPENSATED_JOINT || layout.buckets().is_empty())
        .collect();
    let base_step: Vec<f64> = constraints.joint_limits.iter().map(|(lo, hi)| (hi - lo) / 8.0).collect();
    for level in 0..options.levels {
        let shrink = 4f64.powi(level as i32);
        for _ in 0..options.max_sweeps {
            let before = score;
            for i in 0..entries.len() {
                for &j in &free {
                    let step = base_step[j] / shrink;
                    let mut best: Option<(f64, PlanEntry, DMatrix<f64>, f64)> = None;
                    for t in 1..=options.grid {
                        for sign in [-1.0, 1.0] {
                            let mut cand = entries[i];
                            cand.q[j] += sign * step * t as f64;
                            if !constraints.entry_ok(&cand) {
                                continue;
                            }
                            let (s, block, term) = eval.try_replace(entries, i, &cand);
                            if s < best.as_ref().map_or(score, |b| b.0) {
                                best = Some((s, cand, block, term));
                            }
                        }
                    }
                    if let Some((s, cand, block, term)) = best {
                        entries[i] = cand;
                        eval.commit(i, block, cand.bucket, term);
                        score = s;
                    }
                }
                if directions.len() > 1 {
                    let current = direction_index(&directions, &entries[i].wrench, constraints.f_max);
                    for (k, d) in directions.iter().enumerate() {
                        if k == current {
                            continue;
                        }
                        let mut cand = entries[i];
                        cand.wrench = wrench_along(d, constraints.f_max);
                        let (s, block, term) = eval.try_replace(entries, i, &cand);
                        if s < score {
                            entries[i] = cand;
                            eval.commit(i, block, cand.bucket, term);
                            score = s;
                        }
                    }
                }
            }
            if !(score < before * (1.0 - 1e-9)) {
                break;
            }
        }
    }
    // recompute from scratch to drop accumulated round-off
    eval.reset(entries)
}

/// Multi-start coordinate descent on `ρ0²/σ²`.
///
/// Each start draws a random feasible plan (seed `seed + start`), then
/// sweeps over entries and free joints trying grid offsets around the current
/// value; the grid is refined `levels` times. Loads sit at `F_max` along the
/// allowed directions. The lowest final score wins, ties going to the lowest
/// start index.
pub fn optimize_plan(
    model: &ManipulatorModel,
    layout: &ParameterLayout,
    test: &TestPose,
    constraints: &PlanConstraints,
    per_bucket: usize,
    seed: u64,
    options: &SearchOptions,
) -> Result<OptimizedPlan> {
    constraints.check_feasible(layout)?;
    if per_bucket == 0 || options.starts == 0 {
        return Err(Error::invalid("per_bucket/starts", "must be >= 1"));
    }
    Evaluator::new(model, layout, test)?;
    let runs: Vec<Result<(f64, f64, Vec<PlanEntry>)>> = (0..options.starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64));
            let mut eval = Evaluator::new(model, layout, test)?;
            let mut entries = Vec::new();
            let mut start = f64::INFINITY;
            for _ in 0..50 {
                entries = random_plan(model, layout, constraints, per_bucket, &mut rng)?.entries;
                start = eval.reset(&entries);
                if start.is_finite() {
                    break;
                }
            }
            let end = if start.is_finite() {
                descend(&mut eval, &mut entries, layout, constraints, options)
            } else {
                start
            };
            Ok((start, end, entries))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let start_scores: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let final_scores: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let mut best_start = 0;
    for (i, s) in final_scores.iter().enumerate() {
        if *s < final_scores[best_start] {
            best_start = i;
        }
    }
    let best = final_scores[best_start];
    if !best.is_finite() {
        return Err(Error::Infeasible(
            "no start produced an identifiable plan (every bucket information matrix singular)".into(),
        ));
    }
    let best_random = start_scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let diagnostic = (!(best < best_random)).then(|| "descent did not improve on the best random start".to_string());
    let mut plan = CalibrationPlan::new(runs[best_start].2.clone());
    plan.score = best;
    Ok(OptimizedPlan {
        plan,
        start_scores,
        final_scores,
        best_start,
        diagnostic,
    })
}
