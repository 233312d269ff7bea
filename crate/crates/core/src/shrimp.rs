//! Variable-by-variable imputation: each variable with missing cells is
//! regressed on all the others at their current values, its masked cells are
//! redrawn from the fitted model, and the sweep is repeated for a number of
//! cycles. Independent runs give the imputation copies.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{missing_order, regression_view, ClusteredDataset, Scale, ViewOptions};
use crate::distributions::bernoulli;
use crate::error::{Error, Result};
use crate::geweke::Model;
use crate::lme::{self, ChainDraw, LmeState, SamplerConfig};
use crate::logit::{self, LogitState};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputationPlan {
    /// Visiting order; `None` uses ascending missing count.
    pub order: Option<Vec<usize>>,
    pub n_cycles: usize,
    /// Gibbs iterations per variable per cycle.
    pub inner_iterations: usize,
    pub copies: usize,
    pub sampler: SamplerConfig,
    pub include_intercept: bool,
    pub standardize: bool,
}

impl Default for ImputationPlan {
    fn default() -> Self {
        ImputationPlan {
            order: None,
            n_cycles: 10,
            inner_iterations: 20,
            copies: 5,
            sampler: SamplerConfig::default(),
            include_intercept: true,
            standardize: false,
        }
    }
}

impl ImputationPlan {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.n_cycles == 0 || self.inner_iterations == 0 || self.copies == 0 {
            return Err(Error::invalid("cycles, inner iterations and copies must all be at least 1"));
        }
        if let Some(order) = &self.order {
            let mut seen = vec![false; d];
            for &k in order {
                if k >= d || seen[k] {
                    return Err(Error::invalid(format!("order {order:?} is not a permutation of 0..{d}")));
                }
                seen[k] = true;
            }
            if order.len() != d {
                return Err(Error::invalid(format!("order {order:?} is not a permutation of 0..{d}")));
            }
        }
        self.sampler.hyper.validate()
    }

    pub fn resolved_order(&self, ds: &ClusteredDataset) -> Vec<usize> {
        self.order.clone().unwrap_or_else(|| missing_order(ds))
    }

    fn view_options(&self) -> ViewOptions {
        ViewOptions {
            include_intercept: self.include_intercept,
            standardize: self.standardize,
        }
    }
}

/// Warm-start state of one variable's sampler.
#[derive(Debug, Clone, PartialEq)]
pub enum VarState {
    Linear(LmeState),
    Logistic(LogitState),
}

/// One entry per variable visit in a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dispatch {
    pub cycle: usize,
    pub variable: usize,
    pub model: Model,
}

/// Scalar summary of one Gibbs iteration of one variable's sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub cycle: usize,
    pub iteration: usize,
    pub beta: Vec<f64>,
    pub w: f64,
    pub mu0: f64,
    pub sigma0_sq: f64,
    pub sigma_b_sq: f64,
    pub sigma_e_sq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableTrace {
    pub variable: usize,
    pub name: String,
    pub rows: Vec<TraceRow>,
}

/// Per-variable sampler states and the record of a run.
#[derive(Debug, Clone, Default)]
pub struct CopyState {
    pub states: Vec<Option<VarState>>,
    pub dispatch: Vec<Dispatch>,
    pub traces: Vec<VariableTrace>,
    cycle: usize,
}

impl CopyState {
    pub fn new(ds: &ClusteredDataset) -> Self {
        CopyState {
            states: vec![None; ds.n_vars()],
            dispatch: Vec::new(),
            traces: ds
                .specs()
                .iter()
                .enumerate()
                .map(|(k, s)| VariableTrace {
                    variable: k,
                    name: s.name.clone(),
                    rows: Vec::new(),
                })
                .collect(),
            cycle: 0,
        }
    }
}

/// Starting values: continuous cells by a hot-deck draw from the same
/// cluster's observed values (whole column when the cluster has none),
/// binary cells by a Bernoulli draw at the column's observed frequency.
pub fn initialize_fill<R: Rng + ?Sized>(ds: &ClusteredDataset, rng: &mut R) -> Result<ClusteredDataset> {
    let mut out = ds.unfilled();
    for k in 0..ds.n_vars() {
        let cells = ds.missing_cells(k);
        if cells.is_empty() {
            continue;
        }
        let per_cluster: Vec<Vec<f64>> = ds
            .clusters()
            .iter()
            .enumerate()
            .map(|(i, c)| (0..c.n_rows()).filter_map(|j| ds.observed(i, j, k)).collect())
            .collect();
        let column: Vec<f64> = per_cluster.iter().flatten().copied().collect();
        let spec = &ds.specs()[k];
        if column.is_empty() {
            return Err(Error::validation(format!("variable `{}` has no observed values", spec.name)));
        }
        let values: Vec<f64> = match spec.scale {
            Scale::Continuous => cells
                .iter()
                .map(|&(i, _)| {
                    let pool = if per_cluster[i].is_empty() { &column } else { &per_cluster[i] };
                    pool[rng.random_range(0..pool.len())]
                })
                .collect(),
            Scale::Binary => {
                let p = column.iter().sum::<f64>() / column.len() as f64;
                cells.iter().map(|_| bernoulli(rng, p) as u8 as f64).collect()
            }
        };
        out.write_back(k, &values)?;
    }
    Ok(out)
}

fn to_trace_rows(cycle: usize, draws: Vec<ChainDraw>) -> impl Iterator<Item = TraceRow> {
    draws.into_iter().enumerate().map(move |(t, d)| TraceRow {
        cycle,
        iteration: t,
        beta: d.beta,
        w: d.w,
        mu0: d.mu0,
        sigma0_sq: d.sigma0_sq,
        sigma_b_sq: d.sigma_b_sq,
        sigma_e_sq: d.sigma_e_sq,
    })
}

/// One sweep over the variables in plan order. Each variable's sampler runs
/// `inner_iterations` iterations from its previous state and the final draws
/// replace its masked cells.
pub fn run_cycle<R: Rng + ?Sized>(
    ds: &mut ClusteredDataset,
    plan: &ImputationPlan,
    state: &mut CopyState,
    rng: &mut R,
) -> Result<()> {
    if !ds.is_complete() {
        return Err(Error::validation("run_cycle needs every masked cell filled"));
    }
    if state.states.len() != ds.n_vars() {
        return Err(Error::invalid("copy state does not match the dataset"));
    }
    let order = plan.resolved_order(ds);
    let cycle = state.cycle;
    for k in order {
        let view = regression_view(ds, k, plan.view_options())?;
        let policies = view.policies();
        let model = match ds.specs()[k].scale {
            Scale::Continuous => Model::Linear,
            Scale::Binary => Model::Logistic,
        };
        let (imputations, trace) = match (model, state.states[k].take()) {
            (Model::Linear, prev) => {
                let init = match prev {
                    Some(VarState::Linear(s)) => Some(s),
                    _ => None,
                };
                let out = lme::run_chain(&view, &policies, &plan.sampler, rng, plan.inner_iterations, init)?;
                state.states[k] = Some(VarState::Linear(out.state));
                (out.imputations, out.trace)
            }
            (Model::Logistic, prev) => {
                let init = match prev {
                    Some(VarState::Logistic(s)) => Some(s),
                    _ => None,
                };
                let out = logit::run_chain(&view, &policies, &plan.sampler, rng, plan.inner_iterations, init)?;
                state.states[k] = Some(VarState::Logistic(out.state));
                (out.imputations, out.trace)
            }
        };
        ds.write_back(k, &imputations)?;
        state.traces[k].rows.extend(to_trace_rows(cycle, trace));
        state.dispatch.push(Dispatch {
            cycle,
            variable: k,
            model,
        });
    }
    state.cycle += 1;
    Ok(())
}

/// One completed copy with its sampler record.
#[derive(Debug, Clone)]
pub struct CopyResult {
    pub data: ClusteredDataset,
    pub dispatch: Vec<Dispatch>,
    pub traces: Vec<VariableTrace>,
    pub cycle_seconds: Vec<f64>,
}

/// Initial fill followed by `n_cycles` cycles.
pub fn impute_copy(ds: &ClusteredDataset, plan: &ImputationPlan, rng: &mut RngStream) -> Result<CopyResult> {
    plan.validate(ds.n_vars())?;
    let mut data = initialize_fill(ds, rng)?;
    let mut state = CopyState::new(ds);
    let mut cycle_seconds = Vec::with_capacity(plan.n_cycles);
    for _ in 0..plan.n_cycles {
        let start = Instant::now();
        run_cycle(&mut data, plan, &mut state, rng)?;
        cycle_seconds.push(start.elapsed().as_secs_f64());
    }
    Ok(CopyResult {
        data,
        dispatch: state.dispatch,
        traces: state.traces,
        cycle_seconds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingCount {
    pub variable: String,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub rng_path: Vec<u64>,
    pub plan: ImputationPlan,
    pub order: Vec<String>,
    pub n_rows: usize,
    pub n_clusters: usize,
    pub missing_counts: Vec<MissingCount>,
    /// Wall-clock seconds of each cycle, per copy.
    pub cycle_seconds: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ImputationSet {
    pub copies: Vec<ClusteredDataset>,
    /// `traces[copy][variable]`.
    pub traces: Vec<Vec<VariableTrace>>,
    pub dispatch: Vec<Vec<Dispatch>>,
    pub manifest: Manifest,
}

/// `plan.copies` independent runs. Copy c uses the stream `rng.child(c)`.
/// With `threads > 1` copies run on a dedicated pool of that many workers;
/// results do not depend on the thread count.
pub fn multiple_impute(ds: &ClusteredDataset, plan: &ImputationPlan, rng: &RngStream, threads: usize) -> Result<ImputationSet> {
    plan.validate(ds.n_vars())?;
    let run = |c: usize| impute_copy(ds, plan, &mut rng.child(c as u64));
    let results: Vec<CopyResult> = if threads > 1 && plan.copies > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.min(plan.copies))
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(|| (0..plan.copies).into_par_iter().map(run).collect::<Result<Vec<_>>>())?
    } else {
        (0..plan.copies).map(run).collect::<Result<Vec<_>>>()?
    };

    let order = plan.resolved_order(ds);
    let manifest = Manifest {
        seed: rng.seed(),
        rng_path: rng.path().to_vec(),
        plan: plan.clone(),
        order: order.iter().map(|&k| ds.specs()[k].name.clone()).collect(),
        n_rows: ds.n_rows(),
        n_clusters: ds.n_clusters(),
        missing_counts: ds
            .specs()
            .iter()
            .zip(ds.missing_counts())
            .map(|(s, n)| MissingCount {
                variable: s.name.clone(),
                missing: n,
            })
            .collect(),
        cycle_seconds: results.iter().map(|r| r.cycle_seconds.clone()).collect(),
    };
    let mut copies = Vec::with_capacity(results.len());
    let mut traces = Vec::with_capacity(results.len());
    let mut dispatch = Vec::with_capacity(results.len());
    for r in results {
        copies.push(r.data);
        traces.push(r.traces);
        dispatch.push(r.dispatch);
    }
    Ok(ImputationSet {
        copies,
        traces,
        dispatch,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{RowInput, VariableSpec};
    use crate::distributions::normal;

    fn toy(seed: u64, miss: f64) -> ClusteredDataset {
        let mut rng = RngStream::new(seed);
        let specs = vec![
            VariableSpec::continuous("x1"),
            VariableSpec::continuous("x2"),
            VariableSpec::binary("z"),
        ];
        let clusters = (0..4)
            .map(|i| {
                let u = normal(&mut rng, 0.0, 1.0);
                let rows: Vec<RowInput> = (0..15)
                    .map(|_| {
                        let a = u + normal(&mut rng, 0.0, 1.0);
                        let b = 0.5 * a + normal(&mut rng, 0.0, 1.0);
                        let z = (a + b > 0.0) as u8 as f64;
                        [a, b, z]
                            .into_iter()
                            .map(|v| if rng.random::<f64>() < miss { None } else { Some(v) })
                            .collect()
                    })
                    .collect();
                (format!("c{i}"), rows)
            })
            .collect();
        ClusteredDataset::from_clusters(specs, clusters).unwrap()
    }

    fn small_plan() -> ImputationPlan {
        ImputationPlan {
            n_cycles: 2,
            inner_iterations: 5,
            copies: 3,
            ..ImputationPlan::default()
        }
    }

    fn observed_identical(a: &ClusteredDataset, b: &ClusteredDataset) -> bool {
        let d = a.n_vars();
        a.clusters().iter().enumerate().all(|(i, c)| {
            (0..c.n_rows()).all(|j| {
                (0..d).all(|k| match (a.observed(i, j, k), b.observed(i, j, k)) {
                    (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
                    (None, None) => true,
                    _ => false,
                })
            })
        })
    }

    #[test]
    fn fill_is_hot_deck_and_binary_valid() {
        let ds = toy(1, 0.2);
        let filled = initialize_fill(&ds, &mut RngStream::new(2)).unwrap();
        assert!(filled.is_complete());
        assert!(observed_identical(&ds, &filled));
        let dsr = &ds;
        for k in 0..2 {
            let support: Vec<f64> = ds
                .clusters()
                .iter()
                .enumerate()
                .flat_map(|(i, c)| (0..c.n_rows()).filter_map(move |j| dsr.observed(i, j, k)))
                .collect();
            for (i, j) in ds.missing_cells(k) {
                assert!(support.contains(&filled.value(i, j, k)));
            }
        }
        for (i, j) in ds.missing_cells(2) {
            let v = filled.value(i, j, 2);
            assert!(v == 0.0 || v == 1.0);
        }
    }

    #[test]
    fn fill_uses_same_cluster_when_possible() {
        let specs = vec![VariableSpec::continuous("a"), VariableSpec::continuous("b")];
        let ds = ClusteredDataset::from_clusters(
            specs,
            vec![
                ("p".into(), vec![vec![Some(1.0), Some(0.0)], vec![None, Some(0.0)]]),
                ("q".into(), vec![vec![Some(7.0), Some(0.0)], vec![None, Some(0.0)]]),
                ("r".into(), vec![vec![None, Some(0.0)]]),
            ],
        )
        .unwrap();
        let mut rng = RngStream::new(3);
        let mut seen_r = Vec::new();
        for _ in 0..200 {
            let f = initialize_fill(&ds, &mut rng).unwrap();
            assert_eq!(f.value(0, 1, 0), 1.0);
            assert_eq!(f.value(1, 1, 0), 7.0);
            seen_r.push(f.value(2, 0, 0));
        }
        assert!(seen_r.contains(&1.0) && seen_r.contains(&7.0));
    }

    #[test]
    fn binary_frequency_one_fills_ones() {
        let specs = vec![VariableSpec::binary("z"), VariableSpec::continuous("x")];
        let ds = ClusteredDataset::from_clusters(
            specs,
            vec![("a".into(), vec![vec![Some(1.0), Some(0.1)], vec![None, Some(0.2)], vec![None, Some(0.3)]])],
        )
        .unwrap();
        for s in 0..20 {
            let f = initialize_fill(&ds, &mut RngStream::new(s)).unwrap();
            assert_eq!(f.value(0, 1, 0), 1.0);
            assert_eq!(f.value(0, 2, 0), 1.0);
        }
    }

    #[test]
    fn column_without_observations_is_rejected() {
        let specs = vec![VariableSpec::continuous("a"), VariableSpec::continuous("b")];
        let ds = ClusteredDataset::from_clusters(specs, vec![("a".into(), vec![vec![None, Some(1.0)], vec![None, Some(2.0)]])]).unwrap();
        assert!(matches!(initialize_fill(&ds, &mut RngStream::new(0)), Err(Error::Validation(_))));
    }

    #[test]
    fn only_the_incomplete_variable_changes() {
        let specs = vec![VariableSpec::continuous("a"), VariableSpec::continuous("b")];
        let mut rng = RngStream::new(4);
        let rows: Vec<RowInput> = (0..20)
            .map(|j| vec![if j % 4 == 0 { None } else { Some(normal(&mut rng, 0.0, 1.0)) }, Some(j as f64)])
            .collect();
        let ds = ClusteredDataset::from_clusters(specs, vec![("a".into(), rows[..10].to_vec()), ("b".into(), rows[10..].to_vec())]).unwrap();
        let mut filled = initialize_fill(&ds, &mut rng).unwrap();
        let before = filled.clone();
        let mut state = CopyState::new(&ds);
        run_cycle(&mut filled, &small_plan(), &mut state, &mut rng).unwrap();
        assert!(observed_identical(&ds, &filled));
        for i in 0..2 {
            for j in 0..10 {
                assert_eq!(filled.value(i, j, 1), before.value(i, j, 1));
            }
        }
        assert!(ds.missing_cells(0).iter().any(|&(i, j)| filled.value(i, j, 0) != before.value(i, j, 0)));
    }

    #[test]
    fn binary_target_dispatches_to_logistic() {
        let ds = toy(5, 0.15);
        let set = multiple_impute(&ds, &small_plan(), &RngStream::new(6), 1).unwrap();
        for d in &set.dispatch[0] {
            let expected = if d.variable == 2 { Model::Logistic } else { Model::Linear };
            assert_eq!(d.model, expected);
        }
        assert_eq!(set.dispatch[0].len(), 2 * 3);
    }

    #[test]
    fn copies_are_valid_and_reproducible() {
        let ds = toy(7, 0.15);
        let plan = small_plan();
        let a = multiple_impute(&ds, &plan, &RngStream::new(8), 1).unwrap();
        let b = multiple_impute(&ds, &plan, &RngStream::new(8), 2).unwrap();
        assert_eq!(a.copies.len(), 3);
        for (x, y) in a.copies.iter().zip(&b.copies) {
            assert_eq!(x, y);
            assert!(x.is_complete());
            assert!(observed_identical(&ds, x));
            for (i, j) in ds.missing_cells(2) {
                let v = x.value(i, j, 2);
                assert!(v == 0.0 || v == 1.0);
            }
        }
        assert_eq!(a.manifest.cycle_seconds.len(), 3);
        assert_eq!(a.manifest.missing_counts.iter().map(|m| m.missing).sum::<usize>(), ds.total_missing());
    }

    #[test]
    fn copies_differ() {
        for seed in 0..10 {
            let ds = toy(100 + seed, 0.15);
            let plan = ImputationPlan {
                copies: 2,
                n_cycles: 1,
                inner_iterations: 2,
                ..ImputationPlan::default()
            };
            let set = multiple_impute(&ds, &plan, &RngStream::new(seed), 1).unwrap();
            assert_ne!(set.copies[0], set.copies[1]);
        }
    }

    #[test]
    fn single_copy() {
        let ds = toy(9, 0.1);
        let plan = ImputationPlan {
            copies: 1,
            ..small_plan()
        };
        assert_eq!(multiple_impute(&ds, &plan, &RngStream::new(1), 1).unwrap().copies.len(), 1);
    }

    #[test]
    fn complete_input_passes_through() {
        let ds = toy(10, 0.0);
        assert_eq!(ds.total_missing(), 0);
        let set = multiple_impute(&ds, &small_plan(), &RngStream::new(2), 1).unwrap();
        for c in &set.copies {
            assert_eq!(c, &ds);
        }
        assert_eq!(set.dispatch[0].len(), 2 * 3);
    }

    #[test]
    fn invalid_plans_rejected() {
        let ds = toy(11, 0.1);
        for plan in [
            ImputationPlan { copies: 0, ..small_plan() },
            ImputationPlan { n_cycles: 0, ..small_plan() },
            ImputationPlan { order: Some(vec![0, 0, 1]), ..small_plan() },
            ImputationPlan { order: Some(vec![0, 1]), ..small_plan() },
        ] {
            assert!(multiple_impute(&ds, &plan, &RngStream::new(0), 1).is_err());
        }
    }
}
