//! Convergence experiments for the von Kármán plate solvers.
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde_json::json;
use vkplate::assembly::PenaltyParams;
use vkplate::experiment::{run, Experiment, ExperimentConfig, ExperimentResult};
use vkplate::space::Method;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExperimentArg {
    SquareDg,
    SquareIp,
    LshapeDg,
    LshapeIp,
    LshapeAdaptiveDg,
    LshapeAdaptiveIp,
    LshapeAdaptiveF1,
}

impl From<ExperimentArg> for Experiment {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::SquareDg => Experiment::SquareDg,
            ExperimentArg::SquareIp => Experiment::SquareIp,
            ExperimentArg::LshapeDg => Experiment::LshapeDg,
            ExperimentArg::LshapeIp => Experiment::LshapeIp,
            ExperimentArg::LshapeAdaptiveDg => Experiment::LshapeAdaptiveDg,
            ExperimentArg::LshapeAdaptiveIp => Experiment::LshapeAdaptiveIp,
            ExperimentArg::LshapeAdaptiveF1 => Experiment::LshapeAdaptiveF1,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Parser, Debug)]
#[command(version, about = "Convergence experiments for the von Kármán plate equations")]
struct Args {
    #[arg(long, value_enum)]
    experiment: ExperimentArg,

    /// Uniform levels, or the maximum number of adaptive levels.
    #[arg(long)]
    levels: Option<usize>,

    /// Jump penalty (dG only).
    #[arg(long)]
    sigma1: Option<f64>,

    /// Normal-derivative jump penalty.
    #[arg(long, default_value_t = 20.0)]
    sigma2: f64,

    /// Dörfler bulk parameter.
    #[arg(long, default_value_t = 0.3)]
    theta: f64,

    /// Newton increment tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Table output; stdout when absent. A plot CSV is written next to it.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Final mesh.
    #[arg(long, value_name = "FILE")]
    mesh_out: Option<PathBuf>,

    /// Per-triangle indicators on the final mesh.
    #[arg(long, value_name = "FILE")]
    estimator_out: Option<PathBuf>,

    /// Newton matrix at the final solution; the right-hand side goes to FILE.rhs.
    #[arg(long, value_name = "FILE")]
    dump_system: Option<PathBuf>,

    /// Stop before a level would exceed this many unknowns per field.
    #[arg(long)]
    ndof_budget: Option<usize>,
}

fn config(args: &Args) -> Result<ExperimentConfig, String> {
    let experiment = Experiment::from(args.experiment);
    let method = experiment.method();
    let mut cfg = ExperimentConfig::new(experiment);
    if let Some(levels) = args.levels {
        if levels == 0 {
            return Err("--levels must be at least 1".into());
        }
        cfg.levels = levels;
    }
    if method == Method::Ip && args.sigma1.is_some() {
        eprintln!("warning: --sigma1 has no effect on {experiment}");
    }
    cfg.params = PenaltyParams::new(args.sigma1.unwrap_or(cfg.params.sigma1), args.sigma2);
    cfg.params.validate(method).map_err(|e| e.to_string())?;
    if !(args.theta > 0.0 && args.theta < 1.0) {
        return Err(format!("--theta {} outside (0, 1)", args.theta));
    }
    cfg.theta = args.theta;
    if !(args.tol > 0.0 && args.tol.is_finite()) {
        return Err(format!("--tol {} must be positive", args.tol));
    }
    cfg.newton.tol = args.tol;
    cfg.ndof_budget = args.ndof_budget;
    Ok(cfg)
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn write_table<W: Write>(res: &ExperimentResult, format: Format, mut w: W) -> io::Result<()> {
    match format {
        Format::Csv => res.write_csv(&mut w)?,
        Format::Json => {
            let c = &res.config;
            let doc = json!({
                "experiment": c.experiment.name(),
                "method": c.experiment.method().name(),
                "sigma1": c.params.sigma1,
                "sigma2": c.params.sigma2,
                "theta": c.theta,
                "tol": c.newton.tol,
                "rows": res.rows,
                "triangles": res.triangles,
                "newton": res.newton,
            });
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
    }
    w.flush()
}

fn outputs(args: &Args, res: &ExperimentResult) -> io::Result<()> {
    match &args.out {
        Some(path) => {
            write_table(res, args.format, create(path)?)?;
            let mut plot = create(&path.with_extension("plot.csv"))?;
            res.write_plot_csv(&mut plot)?;
            plot.flush()?;
        }
        None => write_table(res, args.format, io::stdout().lock())?,
    }
    if let Some(path) = &args.mesh_out {
        let mut w = create(path)?;
        res.final_mesh.write_to(&mut w)?;
        w.flush()?;
    }
    if let Some(path) = &args.estimator_out {
        let mut w = create(path)?;
        res.final_estimator.write_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(path) = &args.dump_system {
        let system = res.final_system().map_err(io::Error::other)?;
        let mut w = create(path)?;
        system.write_matrix(&mut w)?;
        w.flush()?;
        let mut rhs = path.clone().into_os_string();
        rhs.push(".rhs");
        let mut w = create(Path::new(&rhs))?;
        system.write_rhs(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match config(&args) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let res = match run(&cfg) {
        Ok(res) => res,
        Err(e) => {
            eprintln!("error: {} failed: {e}", cfg.experiment);
            return ExitCode::from(1);
        }
    };
    if let Err(e) = outputs(&args, &res) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
