use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::metrics::{average_residual_curve, break_even, Bep};
use crate::bench::sampling::lhs_sample;
use crate::error::{Error, Result};
use crate::grid_fem::{Discretization, ParamPoint, ProblemId, ProblemSpec};
use crate::krylov::SolveReport;
use crate::msrb::{msrb_train, MsrbTraining};
use crate::multigrid::{HighFidelity, MgConfig};
use crate::reduced_basis::{l1roc_offline, L1rocModel};
use crate::warmstart::{rbi_pcg_solve, MethodConfig, MethodId, TrainedModels};

fn default_base_cells() -> usize {
    4
}
fn default_max_iter() -> usize {
    40
}
fn default_k_max() -> usize {
    crate::msrb::DEFAULT_K_MAX
}
fn default_hf_tol() -> f64 {
    1e-14
}
fn default_hf_max_iter() -> usize {
    100
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    pub method: MethodId,
    /// RB dimensions to try; ignored for `mgcg`.
    #[serde(default)]
    pub rb_dims: Vec<usize>,
}

/// A full benchmark run, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemId,
    /// Number of grid levels; the finest grid has `base_cells * 2^(levels-1)` cells per axis.
    pub grid_levels: usize,
    #[serde(default = "default_base_cells")]
    pub base_cells: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
    pub methods: Vec<MethodEntry>,
    pub deltas: Vec<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Number of per-iteration MSRB spaces.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Relative tolerance of the training solves.
    #[serde(default = "default_hf_tol")]
    pub hf_tol: f64,
    #[serde(default = "default_hf_max_iter")]
    pub hf_max_iter: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    /// Desk-scale Example 1 comparison of the three methods.
    fn default() -> Self {
        Self {
            problem: ProblemId::Example1,
            grid_levels: 3,
            base_cells: default_base_cells(),
            train_size: 40,
            test_size: 20,
            seed: 2024,
            methods: vec![
                MethodEntry { method: MethodId::Mgcg, rb_dims: vec![] },
                MethodEntry { method: MethodId::RbiMgcg, rb_dims: vec![5, 10, 15] },
                MethodEntry { method: MethodId::RbiMsrbcg, rb_dims: vec![10] },
            ],
            deltas: vec![1e-8, 1e-16],
            max_iter: default_max_iter(),
            k_max: default_k_max(),
            hf_tol: default_hf_tol(),
            hf_max_iter: default_hf_max_iter(),
            out: default_out(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.grid_levels == 0 || self.base_cells == 0 {
            return fail("grid_levels and base_cells must be positive".into());
        }
        if self.train_size == 0 || self.test_size == 0 {
            return fail("train_size and test_size must be positive".into());
        }
        if self.deltas.is_empty() {
            return fail("at least one delta is required".into());
        }
        if let Some(d) = self.deltas.iter().find(|&&d| !(d > 0.0 && d <= 1.0)) {
            return fail(format!("delta must lie in (0, 1], got {d}"));
        }
        if self.methods.is_empty() {
            return fail("no methods requested".into());
        }
        for m in &self.methods {
            if m.method.uses_rb() && (m.rb_dims.is_empty() || m.rb_dims.contains(&0)) {
                return fail(format!("{} needs positive rb_dims", m.method));
            }
        }
        if !(self.hf_tol > 0.0) {
            return fail("hf_tol must be positive".into());
        }
        Ok(())
    }

    pub fn spec(&self) -> ProblemSpec {
        ProblemSpec::from_id(self.problem)
    }

    pub fn discretization(&self) -> Result<Discretization> {
        Discretization::build(self.spec(), self.grid_levels, self.base_cells)
    }

    /// Hash of everything that influences the numbers (the output directory excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let digest = Sha256::digest(c.to_toml().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Training and test parameter sets; the test set uses the next seed.
    pub fn samples(&self) -> Result<(Vec<ParamPoint>, Vec<ParamPoint>)> {
        let spec = self.spec();
        let p = spec.param_dim();
        Ok((
            lhs_sample(p, self.train_size, &spec.bounds, self.seed)?,
            lhs_sample(p, self.test_size, &spec.bounds, self.seed.wrapping_add(1))?,
        ))
    }

    pub fn max_rb_dim(&self, method: MethodId) -> Option<usize> {
        self.methods.iter().filter(|m| m.method == method).flat_map(|m| m.rb_dims.iter().copied()).max()
    }
}

/// Offline products of one experiment.
#[derive(Debug, Clone, Default)]
pub struct Trained {
    pub l1roc: Option<L1rocModel>,
    /// One MSRB training per requested `N`.
    pub msrb: BTreeMap<usize, MsrbTraining>,
}

impl Trained {
    /// Offline seconds for `method` at dimension `n`.
    pub fn offline_time(&self, method: MethodId, n: usize) -> f64 {
        match method {
            MethodId::Mgcg => 0.0,
            MethodId::RbiMgcg => self.l1roc.as_ref().map_or(0.0, |m| m.offline_times()[n.min(m.len()) - 1]),
            MethodId::RbiMsrbcg => self.msrb.get(&n).map_or(0.0, |t| t.offline_time),
        }
    }

    /// Models for one method configuration, L1ROC truncated to `n`.
    pub fn models_for(&self, method: MethodId, n: usize) -> Result<TrainedModels> {
        let mut models = TrainedModels::default();
        match method {
            MethodId::Mgcg => {}
            MethodId::RbiMgcg => {
                let m = self.l1roc.as_ref().ok_or_else(|| Error::Config("L1ROC model was not trained".into()))?;
                models.l1roc = Some(m.truncate(n.min(m.len()))?);
            }
            MethodId::RbiMsrbcg => {
                let t = self.msrb.get(&n).ok_or_else(|| Error::Config(format!("no MSRB hierarchy for N = {n}")))?;
                models.msrb = Some(t.hierarchy.clone());
            }
        }
        Ok(models)
    }
}

pub fn high_fidelity<'a>(cfg: &ExperimentConfig, disc: &'a Discretization) -> HighFidelity<'a> {
    HighFidelity::new(disc, MgConfig::default(), cfg.hf_tol, cfg.hf_max_iter)
}

/// Trains every model the configured methods need.
pub fn train_models(cfg: &ExperimentConfig, disc: &Discretization, train: &[ParamPoint]) -> Result<Trained> {
    let hf = high_fidelity(cfg, disc);
    let mut trained = Trained::default();
    if let Some(n) = cfg.max_rb_dim(MethodId::RbiMgcg) {
        let model = l1roc_offline(train, n, cfg.seed, &hf)?;
        if model.len() < n {
            log::warn!("L1ROC saturated at N = {} (requested {n}); larger N use the full model", model.len());
        }
        info!("L1ROC trained: N = {}, {:.3} s", model.len(), model.offline_time());
        trained.l1roc = Some(model);
    }
    let mut msrb_dims: Vec<usize> =
        cfg.methods.iter().filter(|m| m.method == MethodId::RbiMsrbcg).flat_map(|m| m.rb_dims.iter().copied()).collect();
    msrb_dims.sort_unstable();
    msrb_dims.dedup();
    for n in msrb_dims {
        let t = msrb_train(train, n, cfg.k_max, &hf)?;
        info!("MSRB trained: N = {n}, K = {}, {:.3} s", cfg.k_max, t.offline_time);
        trained.msrb.insert(n, t);
    }
    Ok(trained)
}

/// Aggregates of one (method, N, delta) combination over the test set.
#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub label: String,
    pub method: MethodId,
    /// Requested RB dimension, 0 for MGCG.
    pub rb_dim: usize,
    /// Dimension actually available (L1ROC may saturate below the request).
    pub effective_rb_dim: usize,
    pub delta: f64,
    /// `L`: first `k` with `r_ave^(k) <= delta`, `None` when the cap was hit first.
    pub iterations: Option<usize>,
    /// Mean of the per-parameter iteration counts.
    pub mean_iterations: f64,
    pub max_iterations: usize,
    pub converged: usize,
    pub t_off: f64,
    /// Mean online seconds per solve.
    pub t_on: f64,
    /// Against MGCG at the same delta; absent for MGCG itself.
    pub bep: Option<Bep>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodRuns {
    pub summary: MethodSummary,
    pub reports: Vec<SolveReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub n_dofs: usize,
    /// How timings were taken.
    pub timing_protocol: String,
    pub runs: Vec<MethodRuns>,
}

pub const TIMING_PROTOCOL: &str =
    "t_on per solve excludes assembly of A(mu) and f(mu); it includes the RB initial guess, preconditioner setup and PCG iterations. t_off covers all training solves.";

impl SweepReport {
    pub fn summaries(&self) -> impl Iterator<Item = &MethodSummary> {
        self.runs.iter().map(|r| &r.summary)
    }

    pub fn find(&self, method: MethodId, rb_dim: usize, delta: f64) -> Option<&MethodRuns> {
        self.runs
            .iter()
            .find(|r| r.summary.method == method && (method == MethodId::Mgcg || r.summary.rb_dim == rb_dim) && r.summary.delta == delta)
    }

    /// `r_ave^(k)` per method label for one delta, padded to a common length.
    pub fn residual_curves(&self, delta: f64) -> Vec<(String, Vec<f64>)> {
        let mut curves: Vec<(String, Vec<f64>)> = self
            .runs
            .iter()
            .filter(|r| r.summary.delta == delta)
            .map(|r| (r.summary.label.clone(), average_residual_curve(&r.reports)))
            .collect();
        let len = curves.iter().map(|c| c.1.len()).max().unwrap_or(0);
        for (_, c) in &mut curves {
            let last = c.last().copied().unwrap_or(f64::NAN);
            c.resize(len, last);
        }
        curves
    }

    pub fn has_rb_methods(&self) -> bool {
        self.summaries().any(|s| s.method.uses_rb())
    }

    /// Summary table: method, N, delta, L, t_off, t_on and BEP when any RB method ran.
    pub fn summary_csv(&self) -> String {
        let with_bep = self.has_rb_methods();
        let mut s = String::from("method,N,delta,L,mean_L,t_off,t_on");
        s.push_str(if with_bep { ",BEP\n" } else { "\n" });
        for m in self.summaries() {
            write!(
                s,
                "{},{},{:.16e},{},{:.16e},{:.16e},{:.16e}",
                m.method,
                m.effective_rb_dim,
                m.delta,
                self.iterations_label(m),
                m.mean_iterations,
                m.t_off,
                m.t_on
            )
            .unwrap();
            if with_bep {
                match m.bep {
                    Some(b) => write!(s, ",{b}").unwrap(),
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        s
    }

    /// CSV of `r_ave^(k)` with one column per method.
    pub fn residual_csv(&self, delta: f64) -> String {
        let curves = self.residual_curves(delta);
        let mut s = String::from("k");
        for (label, _) in &curves {
            write!(s, ",{label}").unwrap();
        }
        s.push('\n');
        let len = curves.first().map_or(0, |c| c.1.len());
        for k in 0..len {
            write!(s, "{k}").unwrap();
            for (_, c) in &curves {
                write!(s, ",{:.16e}", c[k]).unwrap();
            }
            s.push('\n');
        }
        s
    }

    /// `L` as an integer, or `>=L_max` when the average never reached delta.
    pub fn iterations_label(&self, m: &MethodSummary) -> String {
        m.iterations.map_or(format!(">={}", self.config.max_iter), |l| l.to_string())
    }

    /// Aligned text table for terminals.
    pub fn table(&self) -> String {
        let mut s =
            format!("{:<18} {:>4} {:>9} {:>5} {:>7} {:>10} {:>10} {:>10}\n", "method", "N", "delta", "L", "mean_L", "t_off", "t_on", "BEP");
        for m in self.summaries() {
            let bep = m.bep.map_or("-".to_string(), |b| match b {
                Bep::Finite(v) => format!("{v:.1}"),
                Bep::Infinite => "inf".into(),
            });
            writeln!(
                s,
                "{:<18} {:>4} {:>9.0e} {:>5} {:>7.2} {:>10.4} {:>10.5} {:>10}",
                m.method.as_str(),
                m.effective_rb_dim,
                m.delta,
                self.iterations_label(m),
                m.mean_iterations,
                m.t_off,
                m.t_on,
                bep
            )
            .unwrap();
        }
        s
    }

    pub fn json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `summary.csv`, `summary.json` and one `r_ave_delta_<delta>.csv` per delta.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: String, body: String| -> Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, body)?;
            written.push(p);
            Ok(())
        };
        put("summary.csv".into(), self.summary_csv())?;
        put("summary.json".into(), self.json())?;
        for &d in &self.config.deltas {
            put(format!("r_ave_delta_{d:e}.csv"), self.residual_csv(d))?;
        }
        Ok(written)
    }
}

/// Samples the parameter sets, trains, runs every method on the test set and
/// aggregates the results. Nothing is written; see [`SweepReport::write`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let disc = cfg.discretization()?;
    let (train, test) = cfg.samples()?;
    let trained = train_models(cfg, &disc, &train)?;
    let (runs, _) = sweep(cfg, &disc, &trained, &test)?;
    Ok(SweepReport { config_hash: cfg.hash(), config: cfg.clone(), n_dofs: disc.n_free(), timing_protocol: TIMING_PROTOCOL.into(), runs })
}

fn method_grid(cfg: &ExperimentConfig) -> Vec<(MethodId, usize)> {
    let mut out: Vec<(MethodId, usize)> = Vec::new();
    let mut push = |m, n| {
        if !out.contains(&(m, n)) {
            out.push((m, n));
        }
    };
    // MGCG first: it is the baseline of every BEP
    if cfg.methods.iter().any(|m| m.method.uses_rb()) || cfg.methods.iter().any(|m| m.method == MethodId::Mgcg) {
        push(MethodId::Mgcg, 0);
    }
    for m in cfg.methods.iter().filter(|m| m.method.uses_rb()) {
        for &n in &m.rb_dims {
            push(m.method, n);
        }
    }
    out
}

/// Runs the test sweep with already trained models. The second value lists
/// the baseline MGCG mean online time per delta.
pub fn sweep(cfg: &ExperimentConfig, disc: &Discretization, trained: &Trained, test: &[ParamPoint]) -> Result<(Vec<MethodRuns>, Vec<f64>)> {
    let grid = method_grid(cfg);
    let mut setups = Vec::new();
    for &delta in &cfg.deltas {
        for &(method, n) in &grid {
            let mc = MethodConfig::standard(method, n, delta, cfg.max_iter);
            let models = trained.models_for(method, n)?;
            mc.validate(&models)?;
            setups.push((mc, models, Vec::with_capacity(test.len())));
        }
    }
    for mu in test {
        let sys = disc.assemble(mu).map_err(|e| e.at_stage("assembly", &mu.0))?;
        for (mc, models, reports) in &mut setups {
            let (_, mut rep) =
                rbi_pcg_solve(&sys.matrix, &sys.rhs, disc, mc, models).map_err(|e| e.at_stage(&format!("{} solve", mc.label()), &mu.0))?;
            rep.mu = mu.0.clone();
            reports.push(rep);
        }
    }

    let mean = |v: &[SolveReport], f: &dyn Fn(&SolveReport) -> f64| v.iter().map(f).sum::<f64>() / v.len() as f64;
    let mut runs = Vec::new();
    let mut base_times = Vec::new();
    for (mc, models, reports) in setups {
        let t_on = mean(&reports, &|r| r.wall_time);
        if mc.method == MethodId::Mgcg {
            base_times.push(t_on);
        }
        let base = *base_times.last().unwrap();
        let effective = match mc.method {
            MethodId::Mgcg => 0,
            MethodId::RbiMgcg => models.l1roc.as_ref().map_or(0, |m| m.len()),
            MethodId::RbiMsrbcg => models.msrb.as_ref().map_or(0, |h| h.initial().len()),
        };
        let t_off = trained.offline_time(mc.method, mc.rb_dim);
        let summary = MethodSummary {
            label: mc.label(),
            method: mc.method,
            rb_dim: mc.rb_dim,
            effective_rb_dim: effective,
            delta: mc.delta,
            iterations: average_residual_curve(&reports).iter().position(|&r| r <= mc.delta),
            mean_iterations: mean(&reports, &|r| r.iterations as f64),
            max_iterations: reports.iter().map(|r| r.iterations).max().unwrap_or(0),
            converged: reports.iter().filter(|r| r.converged).count(),
            t_off,
            t_on,
            bep: mc.method.uses_rb().then(|| break_even(t_off, base, t_on)),
        };
        runs.push(MethodRuns { summary, reports });
    }
    Ok((runs, base_times))
}
