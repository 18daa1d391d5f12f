use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bfa_core::bench::{run_experiment, ExperimentConfig, ExperimentKind};
use bfa_core::calibration::{
    estimate_bfa, estimate_bfa_tpn, estimate_full, estimate_grouped, estimate_tpn, run_calibration, CalibrationProtocol,
};
use bfa_core::metrics::{complexity_report, model_fidelity, tv_distance, tv_distance_halved};
use bfa_core::mitigation::{
    clip_and_renormalise, mitigate_inverse_with, mitigate_lsq, mitigate_lsq_reduced, LsqOptions,
};
use bfa_core::model::{boost_correlations, build_tensor, densify, symmetrise, symmetrise_tpn, Model};
use bfa_core::sim::{seeded, DEFAULT_SEED};
use bfa_core::wht::{analytic_inverse_with, SmallEigenvalues, EIGENVALUE_FLOOR};
use bfa_core::{io, Error};
use clap::{Parser, Subcommand, ValueEnum};

const SCHEMAS: &str = "\
File formats (JSON). Outcome vectors are indexed by integer value with qubit 0
as the least significant bit; bit strings print the highest qubit first.

  model        {\"n\", \"format\": \"dense\",    \"columns\": [[p(σ|σ'=0), ...], ...]}
               {\"n\", \"format\": \"syndrome\", \"p_tilde\": [p(s=0), p(s=1), ...]}
               {\"n\", \"format\": \"tpn\",      \"rates\": [[p(1|0), p(0|1)], ...], \"symmetric\": bool}
               {\"n\", \"format\": \"grouped\",  \"groups\": [{\"qubits\": [..], \"p_tilde\": [..]}, ...]}
  inverse      {\"n\", \"format\": \"syndrome-inverse\", \"q_tilde\": [...]}
  counts       {\"n\", \"shots\", \"counts\": {\"0101\": 17, ...}}
  calibration  {\"n\", \"protocol\": \"plain\" | \"bfa\",
                \"tables\": [{\"input\": \"0000\", \"n\", \"shots\", \"counts\"}, ...]}
  support      [\"0000\", \"1111\", ...]
  mitigation   {\"method\", \"quasi\", \"physical\", \"residual\", \"iterations\", \"converged\"}
  bench config {\"kind\", \"n\" | \"n_values\", \"model\": {\"source\": \"synthetic-tpn\" | \"file\" |
                \"example\" | \"identity\", ...}, \"budgets\", \"budget_per_state\",
                \"measurement_shots\", \"trials\", \"seed\", \"method\": \"inverse\" | \"lsq\",
                \"expectation\": \"quasi\" | \"physical\", \"workers\", \"output_csv\", \"output_json\"}

Exit status: 0 success, 1 usage error, 2 domain error. Domain errors are
reported on stderr as {\"error\": {\"kind\", \"detail\"}}.";

#[derive(Parser)]
#[command(name = "bfa", version, about = "Readout-error models, calibration and mitigation with bit-flip averaging", after_long_help = SCHEMAS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the result here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Protocol {
    Full,
    Tpn,
    Bfa,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Full,
    Tpn,
    Bfa,
    BfaTpn,
    Grouped,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Inverse,
    Lsq,
    LsqReduced,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchKind {
    Convergence,
    FixedBudget,
    Graph,
}

#[derive(Subcommand)]
enum Command {
    /// Bit-flip-averaged form of a model.
    Symmetrise { model: PathBuf },
    /// Dense response matrix of any model (n ≤ 14).
    Densify { model: PathBuf },
    /// Multiply each entry by gamma^(adjacent flipped pairs) and renormalise columns.
    Boost {
        #[arg(long)]
        gamma: f64,
        model: PathBuf,
    },
    /// Kronecker product of models; the first acts on the highest qubits.
    Tensor {
        #[arg(required = true)]
        models: Vec<PathBuf>,
    },
    /// Simulate a calibration run against a true model.
    Calibrate {
        #[arg(long, value_enum)]
        protocol: Protocol,
        #[arg(long)]
        model: PathBuf,
        /// Total shot budget, split evenly across the prepared inputs.
        #[arg(long)]
        shots: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Fit a model family to a calibration file.
    Estimate {
        #[arg(long, value_enum)]
        model: Family,
        calibration: PathBuf,
        /// Qubit groups for the grouped model, e.g. "3/2,1/0".
        #[arg(long)]
        partition: Option<String>,
    },
    /// Inverse coefficients of a bit-flip-averaged model.
    Invert {
        model: PathBuf,
        /// Replace eigenvalues below the floor instead of failing.
        #[arg(long)]
        clamp: bool,
    },
    /// Estimate the true distribution behind observed counts.
    Mitigate {
        #[arg(long)]
        model: PathBuf,
        counts: PathBuf,
        #[arg(long, value_enum, default_value = "inverse")]
        method: MethodArg,
        /// Outcome subset for lsq-reduced (a JSON list of bit strings).
        #[arg(long)]
        support_file: Option<PathBuf>,
        /// Clip negative entries and renormalise instead of projecting onto the simplex.
        #[arg(long)]
        clip: bool,
        /// Replace near-zero eigenvalues instead of failing (inverse method).
        #[arg(long)]
        clamp_eigenvalues: bool,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Mean column-wise fidelity of two models.
    Fidelity { a: PathBuf, b: PathBuf },
    /// Total variation distance Σ|p - q| between two counts files.
    Tvd {
        p: PathBuf,
        q: PathBuf,
        /// Report half the sum instead.
        #[arg(long)]
        halved: bool,
    },
    /// Truncation weight, retained outcomes and shot requirement.
    Complexity {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        pe: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        gamma: f64,
    },
    /// Run a seeded experiment from a config file.
    Bench {
        #[arg(value_enum)]
        kind: BenchKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Per-trial table.
        #[arg(long)]
        out_csv: Option<PathBuf>,
        /// Aggregated summary; stdout if neither this nor --output is given.
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
}

enum Failure {
    Domain(Error),
    Io { path: PathBuf, message: String },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type CliResult<T> = Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Io { path: path.into(), message: e.to_string() })
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::Io { path: path.into(), message: e.to_string() })
}

fn read_model(path: &Path) -> CliResult<Model> {
    Ok(io::model_from_json(&read(path)?)?)
}

fn parse_partition(text: &str) -> CliResult<Vec<Vec<usize>>> {
    text.split('/')
        .map(|group| {
            group
                .split(',')
                .map(|q| {
                    q.trim().parse::<usize>().map_err(|_| {
                        Failure::Domain(Error::InvalidPartition(format!("cannot parse qubit {q:?} in {text:?}")))
                    })
                })
                .collect()
        })
        .collect()
}

fn symmetrised(model: Model) -> CliResult<Model> {
    Ok(match model {
        Model::Dense(m) => symmetrise(&m).into(),
        Model::Tpn(t) => symmetrise_tpn(&t).into(),
        Model::Grouped(g) => g.to_syndrome()?.into(),
        already @ Model::Syndrome(_) => already,
    })
}

fn json_value(v: serde_json::Value) -> String {
    serde_json::to_string_pretty(&v).expect("values always serialise")
}

fn dispatch(cli: &Cli) -> CliResult<Option<String>> {
    let text = match &cli.command {
        Command::Symmetrise { model } => io::model_to_json(&symmetrised(read_model(model)?)?),
        Command::Densify { model } => io::model_to_json(&densify(&read_model(model)?)?.into()),
        Command::Boost { gamma, model } => {
            let m = densify(&read_model(model)?)?;
            io::model_to_json(&boost_correlations(&m, *gamma)?.into())
        }
        Command::Tensor { models } => {
            let factors = models.iter().map(|p| Ok(densify(&read_model(p)?)?)).collect::<CliResult<Vec<_>>>()?;
            io::model_to_json(&build_tensor(&factors)?.into())
        }
        Command::Calibrate { protocol, model, shots, seed } => {
            let m = densify(&read_model(model)?)?;
            let protocol = match protocol {
                Protocol::Full => CalibrationProtocol::Full,
                Protocol::Tpn => CalibrationProtocol::Tpn,
                Protocol::Bfa => CalibrationProtocol::Bfa,
            };
            io::calibration_to_json(&run_calibration(&m, protocol, *shots, &mut seeded(*seed))?)
        }
        Command::Estimate { model, calibration, partition } => {
            let c = io::calibration_from_json(&read(calibration)?)?;
            let fitted: Model = match model {
                Family::Full => estimate_full(&c)?.into(),
                Family::Tpn => estimate_tpn(&c)?.into(),
                Family::Bfa => estimate_bfa(&c)?.into(),
                Family::BfaTpn => estimate_bfa_tpn(&c)?.into(),
                Family::Grouped => {
                    let text = partition
                        .as_deref()
                        .ok_or_else(|| Error::MissingInput("--partition is required for the grouped model".into()))?;
                    estimate_grouped(&c, &parse_partition(text)?)?.into()
                }
            };
            io::model_to_json(&fitted)
        }
        Command::Invert { model, clamp } => {
            let model = read_model(model)?;
            let d = model.as_syndrome().ok_or_else(|| Error::InvalidParameter {
                name: "model",
                detail: "only bit-flip-averaged models have an analytic inverse; symmetrise first".into(),
            })??;
            let policy = if *clamp { SmallEigenvalues::Clamp } else { SmallEigenvalues::Reject };
            io::inverse_to_json(&analytic_inverse_with(&d, EIGENVALUE_FLOOR, policy)?)
        }
        Command::Mitigate { model, counts, method, support_file, clip, clamp_eigenvalues, tol, max_iter } => {
            let model = read_model(model)?;
            let counts = io::counts_from_json(&read(counts)?)?;
            if counts.n() != model.n() {
                return Err(Error::WidthMismatch { left: counts.n(), right: model.n() }.into());
            }
            let p_obs = counts.frequencies()?;
            let opts = LsqOptions { tol: *tol, max_iter: *max_iter };
            let mut result = match method {
                MethodArg::Inverse => {
                    let policy = if *clamp_eigenvalues { SmallEigenvalues::Clamp } else { SmallEigenvalues::Reject };
                    mitigate_inverse_with(&p_obs, &model, policy)?
                }
                MethodArg::Lsq => mitigate_lsq(&p_obs, &model, opts)?.check_converged()?,
                MethodArg::LsqReduced => {
                    let path = support_file
                        .as_deref()
                        .ok_or_else(|| Error::MissingInput("--support-file is required for lsq-reduced".into()))?;
                    let (width, support) = io::support_from_json(&read(path)?)?;
                    if width != model.n() {
                        return Err(Error::WidthMismatch { left: width, right: model.n() }.into());
                    }
                    let d = model.as_syndrome().ok_or_else(|| Error::InvalidParameter {
                        name: "model",
                        detail: "lsq-reduced needs a bit-flip-averaged model".into(),
                    })??;
                    mitigate_lsq_reduced(&p_obs, &d, &support, opts)?.check_converged()?
                }
            };
            if *clip {
                result.physical = clip_and_renormalise(&result.quasi)?;
            }
            io::mitigation_to_json(&result)
        }
        Command::Fidelity { a, b } => {
            let f = model_fidelity(&read_model(a)?, &read_model(b)?)?;
            json_value(serde_json::json!({ "fidelity": f, "infidelity": 1.0 - f }))
        }
        Command::Tvd { p, q, halved } => {
            let p = io::counts_from_json(&read(p)?)?;
            let q = io::counts_from_json(&read(q)?)?;
            if p.n() != q.n() {
                return Err(Error::WidthMismatch { left: p.n(), right: q.n() }.into());
            }
            let (pf, qf) = (p.frequencies()?, q.frequencies()?);
            let d = if *halved { tv_distance_halved(&pf, &qf)? } else { tv_distance(&pf, &qf)? };
            json_value(serde_json::json!({ "tvd": d, "halved": halved }))
        }
        Command::Complexity { n, pe, eps, gamma } => {
            serde_json::to_string_pretty(&complexity_report(*n, *pe, *eps, *gamma)?).expect("reports always serialise")
        }
        Command::Bench { kind, config, workers, seed, out_csv, out_json } => {
            let mut c = ExperimentConfig::from_json(&read(config)?)?;
            let kind = match kind {
                BenchKind::Convergence => ExperimentKind::Convergence,
                BenchKind::FixedBudget => ExperimentKind::FixedBudget,
                BenchKind::Graph => ExperimentKind::Graph,
            };
            if c.kind != kind {
                return Err(Error::InvalidParameter {
                    name: "kind",
                    detail: format!("config describes a {:?} experiment", c.kind),
                }
                .into());
            }
            if workers.is_some() {
                c.workers = *workers;
            }
            if let Some(s) = seed {
                c.seed = *s;
            }
            let out = run_experiment(&c)?;
            if let Some(path) = out_csv.as_ref().or(c.output_csv.as_ref()) {
                write(path, &out.to_csv())?;
            }
            let summary = out.summary_json() + "\n";
            match out_json.as_ref().or(c.output_json.as_ref()) {
                Some(path) => {
                    write(path, &summary)?;
                    return Ok(None);
                }
                None => summary.trim_end().to_string(),
            }
        }
    };
    Ok(Some(text))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = dispatch(&cli).and_then(|text| match (text, &cli.output) {
        (Some(t), Some(path)) => write(path, &(t + "\n")),
        (Some(t), None) => match writeln!(std::io::stdout().lock(), "{t}") {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                Err(Failure::Io { path: "<stdout>".into(), message: e.to_string() })
            }
            _ => Ok(()),
        },
        (None, _) => Ok(()),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (kind, detail) = match failure {
                Failure::Domain(e) => (e.kind().to_string(), e.to_string()),
                Failure::Io { path, message } => ("Io".to_string(), format!("{}: {message}", path.display())),
            };
            eprintln!("{}", serde_json::json!({ "error": { "kind": kind, "detail": detail } }));
            ExitCode::from(2)
        }
    }
}
