use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use rbws::bench::{
    load_model, rb_accuracy_curve, residual_spectrum, run_experiment, save_model, train_models, ExperimentConfig, MethodEntry, Model,
};
use rbws::error::{Error, Result};
use rbws::grid_fem::{ParamPoint, ProblemId};
use rbws::msrb::msrb_train;
use rbws::reduced_basis::l1roc_offline;
use rbws::warmstart::{rbi_pcg_solve, MethodConfig, MethodId, TrainedModels};

#[derive(Parser)]
#[command(name = "rbws", version, about = "Reduced-basis warm-started MGCG benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the reduced models the configured methods need and save them.
    Train(Common),
    /// Solve one parameter instance with one method.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Parameter values, comma separated. Defaults to the first test sample.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Option<Vec<f64>>,
        /// Previously saved model files; training runs when none are given.
        #[arg(long)]
        model: Vec<PathBuf>,
    },
    /// Train, run every method on the test set and write the reports.
    Sweep(Common),
    /// Relative POD spectra of the MSRB half-step residuals per iteration.
    Spectrum(Common),
    /// Worst relative residual of the L1ROC solution over the test set for each N.
    AccuracyCurve(Common),
    /// Print the summary table of a finished sweep.
    Report(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment file; built-in desk-scale defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    grid_levels: Option<usize>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    rb_dim: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn method(&self) -> Result<Option<MethodId>> {
        self.method.as_deref().map(str::parse).transpose()
    }

    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.problem {
            cfg.problem = p.parse::<ProblemId>()?;
        }
        if let Some(l) = self.grid_levels {
            cfg.grid_levels = l;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = self.delta {
            cfg.deltas = vec![d];
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        match (self.method()?, self.rb_dim) {
            (Some(m), n) => {
                let rb_dims = match (m, n) {
                    (MethodId::Mgcg, _) => vec![],
                    (_, Some(n)) => vec![n],
                    (_, None) => cfg.methods.iter().filter(|e| e.method == m).flat_map(|e| e.rb_dims.clone()).collect(),
                };
                cfg.methods = vec![MethodEntry { method: m, rb_dims }];
            }
            (None, Some(n)) => {
                for e in cfg.methods.iter_mut().filter(|e| e.method.uses_rb()) {
                    e.rb_dims = vec![n];
                }
            }
            (None, None) => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// RB dimension for single-model commands.
    fn rb_dim_for(&self, cfg: &ExperimentConfig, method: MethodId, fallback: usize) -> usize {
        self.rb_dim.or(cfg.max_rb_dim(method)).unwrap_or(fallback)
    }
}

fn train(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let disc = cfg.discretization()?;
    let (train, _) = cfg.samples()?;
    let trained = train_models(&cfg, &disc, &train)?;
    std::fs::create_dir_all(&cfg.out)?;
    if let Some(m) = trained.l1roc {
        let p = cfg.out.join("l1roc.rbws");
        println!("l1roc N={} t_off={:.4}s -> {}", m.len(), m.offline_time(), p.display());
        save_model(&Model::L1roc(m), &p)?;
    }
    for (n, t) in trained.msrb {
        let p = cfg.out.join(format!("msrb_N{n}.rbws"));
        println!("msrb N={n} K={} t_off={:.4}s -> {}", t.hierarchy.k_max(), t.offline_time, p.display());
        save_model(&Model::Msrb(t.hierarchy), &p)?;
    }
    Ok(())
}

fn solve(c: &Common, mu: Option<Vec<f64>>, model_paths: &[PathBuf]) -> Result<()> {
    let cfg = c.config()?;
    let method = c.method()?.unwrap_or(MethodId::Mgcg);
    let disc = cfg.discretization()?;
    let (train, test) = cfg.samples()?;
    let mu = mu.map(ParamPoint::new).unwrap_or_else(|| test[0].clone());
    let mut models = TrainedModels::default();
    for p in model_paths {
        match load_model(p)? {
            Model::Pod(m) => models.pod = Some(m),
            Model::L1roc(m) => models.l1roc = Some(m),
            Model::Msrb(m) => models.msrb = Some(m),
        }
    }
    let n = c.rb_dim_for(&cfg, method, 10);
    if model_paths.is_empty() && method.uses_rb() {
        let hf = rbws::bench::high_fidelity(&cfg, &disc);
        match method {
            MethodId::RbiMgcg => models.l1roc = Some(l1roc_offline(&train, n, cfg.seed, &hf)?),
            _ => models.msrb = Some(msrb_train(&train, n, cfg.k_max, &hf)?.hierarchy),
        }
    }
    let mc = MethodConfig::standard(method, n, cfg.deltas[0], cfg.max_iter);
    let sys = disc.assemble(&mu)?;
    let (_, rep) = rbi_pcg_solve(&sys.matrix, &sys.rhs, &disc, &mc, &models)?;
    println!("k,relative_residual");
    for (k, r) in rep.history.iter().enumerate() {
        println!("{k},{r:.16e}");
    }
    eprintln!(
        "{}: {} iterations, converged={}, true residual {:.3e}, {:.4}s",
        rep.method, rep.iterations, rep.converged, rep.true_residual, rep.wall_time
    );
    Ok(())
}

fn sweep(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let report = run_experiment(&cfg)?;
    for p in report.write(&cfg.out)? {
        info!("wrote {}", p.display());
    }
    print!("{}", report.table());
    Ok(())
}

fn spectrum(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let disc = cfg.discretization()?;
    let (train, _) = cfg.samples()?;
    let n = c.rb_dim_for(&cfg, MethodId::RbiMsrbcg, 10);
    let t = msrb_train(&train, n, cfg.k_max, &rbws::bench::high_fidelity(&cfg, &disc))?;
    let spectra = t.half_step_residuals.iter().map(|s| residual_spectrum(s)).collect::<Result<Vec<_>>>()?;
    let rows = spectra.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let mut csv = String::from("n");
    for k in 1..=spectra.len() {
        csv.push_str(&format!(",k{k}"));
    }
    csv.push('\n');
    for i in 0..rows {
        csv.push_str(&(i + 1).to_string());
        for s in &spectra {
            csv.push_str(&format!(",{:.16e}", s.values.get(i).copied().unwrap_or(0.0)));
        }
        csv.push('\n');
    }
    write_out(&cfg.out, "spectrum.csv", &csv)?;
    for (k, s) in spectra.iter().enumerate() {
        println!("k={} eigenvalues above 1e-10: {}{}", k + 1, s.count_above(1e-10), if s.trivial { " (all zero)" } else { "" });
    }
    Ok(())
}

fn accuracy_curve(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let disc = cfg.discretization()?;
    let (train, test) = cfg.samples()?;
    let n = c.rb_dim_for(&cfg, MethodId::RbiMgcg, 20);
    let model = l1roc_offline(&train, n, cfg.seed, &rbws::bench::high_fidelity(&cfg, &disc))?;
    let ns: Vec<usize> = (0..=model.len()).collect();
    let curve = rb_accuracy_curve(&model, &disc, &test, &ns)?;
    let mut csv = String::from("N,r_N,t_off\n");
    for &(n, r) in &curve {
        let t = if n == 0 { 0.0 } else { model.offline_times()[n - 1] };
        csv.push_str(&format!("{n},{r:.16e},{t:.16e}\n"));
        println!("N={n:>3} r_N={r:.3e}");
    }
    write_out(&cfg.out, "accuracy_curve.csv", &csv)
}

fn report(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let path = cfg.out.join("summary.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
    let runs = doc["runs"].as_array().ok_or_else(|| Error::Format("summary has no runs".into()))?;
    println!("config {} ({} DoFs)", doc["config_hash"].as_str().unwrap_or("?"), doc["n_dofs"]);
    let cap = doc["config"]["max_iter"].as_u64().unwrap_or(0);
    println!("{:<18} {:>4} {:>9} {:>5} {:>7} {:>10} {:>10} {:>10}", "method", "N", "delta", "L", "mean_L", "t_off", "t_on", "BEP");
    for r in runs {
        let s = &r["summary"];
        let bep = match &s["bep"] {
            serde_json::Value::Null => "-".to_string(),
            serde_json::Value::String(v) => v.clone(),
            v => format!("{:.1}", v.as_f64().unwrap_or(f64::NAN)),
        };
        println!(
            "{:<18} {:>4} {:>9.0e} {:>5} {:>7.2} {:>10.4} {:>10.5} {:>10}",
            s["method"].as_str().unwrap_or("?"),
            s["effective_rb_dim"].as_u64().unwrap_or(0),
            s["delta"].as_f64().unwrap_or(f64::NAN),
            s["iterations"].as_u64().map_or(format!(">={cap}"), |l| l.to_string()),
            s["mean_iterations"].as_f64().unwrap_or(f64::NAN),
            s["t_off"].as_f64().unwrap_or(f64::NAN),
            s["t_on"].as_f64().unwrap_or(f64::NAN),
            bep
        );
    }
    Ok(())
}

fn write_out(dir: &Path, name: &str, body: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), body)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Train(c) => train(c),
        Command::Solve { common, mu, model } => solve(common, mu.clone(), model),
        Command::Sweep(c) => sweep(c),
        Command::Spectrum(c) => spectrum(c),
        Command::AccuracyCurve(c) => accuracy_curve(c),
        Command::Report(c) => report(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
