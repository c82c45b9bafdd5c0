//! `tensornet`: exact evaluation, additive approximation and construction
//! of tensor networks from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 malformed input, 3 resource
//! guard exceeded, 4 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tensornet::bubbling::{bubble_width, greedy_bubbling, scale_with};
use tensornet::circuits::{acceptance_circuit, circuit_order_bubbling, encode_circuit, Circuit};
use tensornet::format::{self, ModelFile};
use tensornet::network::{eval_contract_with, eval_labeling_sum_with, reduce_degrees};
use tensornet::qsim::{approximate, Aggregator, ApproxConfig, Backend};
use tensornet::statmech::{
    build_coloring, build_delta, build_general_with, improve_delta_weights, plane_sweep_bubbling, reduce_delta_degree,
    scale_delta, scale_general, DeltaGraph, DeltaNetwork,
};
use tensornet::{Bubbling, Error, ErrorKind, Guards, TensorNetwork};

#[derive(Parser, Debug)]
#[command(
    name = "tensornet",
    version,
    about = "Exact and approximate tensor-network evaluation"
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the JSON result here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact value of a network.
    Eval {
        network: PathBuf,
        #[command(flatten)]
        order: OrderArgs,
        /// Enumerate all edge labelings instead of contracting.
        #[arg(long)]
        labeling_sum: bool,
    },
    /// Additive approximation by simulating the quantum algorithm.
    Approx {
        network: PathBuf,
        #[command(flatten)]
        order: OrderArgs,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = BackendArg::Amplitude)]
        backend: BackendArg,
        /// Allowed failure probability of the estimate.
        #[arg(long, default_value_t = 0.25)]
        failure: f64,
        /// Combine this many independent runs by their component-wise median.
        #[arg(long)]
        median_of: Option<usize>,
    },
    /// Build a network from a model or circuit file.
    Build {
        #[command(flatten)]
        source: SourceArgs,
        /// Reduce every vertex to at most this degree.
        #[arg(long)]
        max_degree: Option<usize>,
        /// Where to write the construction data of difference-model builds
        /// (defaults to `<output>.delta.json` when --output is given).
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Also write the construction's natural bubbling to this file.
        #[arg(long)]
        bubbling_out: Option<PathBuf>,
    },
    /// Approximation scale of a bubbling, with analytic bounds when a model
    /// is given.
    Scale {
        network: PathBuf,
        #[command(flatten)]
        order: OrderArgs,
    },
    /// Emit the greedy bubbling of a network.
    Bubble { network: PathBuf },
}

#[derive(Args, Debug, Clone)]
struct SourceArgs {
    /// Model file (graph, q, beta, coupling).
    #[arg(long, conflicts_with = "circuit")]
    model: Option<PathBuf>,
    /// Circuit file.
    #[arg(long)]
    circuit: Option<PathBuf>,
    /// Network construction for model files.
    #[arg(long, value_enum, default_value_t = Construction::General)]
    construction: Construction,
    /// Build the acceptance-probability network of the circuit.
    #[arg(long)]
    acceptance: bool,
}

#[derive(Args, Debug, Clone)]
struct OrderArgs {
    /// greedy | plane-sweep | delta | circuit-order | path to a JSON array.
    #[arg(long, default_value = "greedy")]
    bubbling: String,
    #[command(flatten)]
    source: SourceArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Construction {
    /// Identity tensors at vertices, weights at edge midpoints.
    General,
    /// Difference variables on a spanning tree.
    Delta,
    /// Difference construction with redistributed weights.
    DeltaImproved,
    /// Proper-coloring count (ignores the coupling).
    Coloring,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum BackendArg {
    Amplitude,
    Statevector,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Amplitude => Backend::Amplitude,
            BackendArg::Statevector => Backend::Statevector,
        }
    }
}

/// Failures with their exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Usage => 1,
            ErrorKind::Format => 2,
            ErrorKind::Guard => 3,
            ErrorKind::Numeric => 4,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, format!("{text}\n")).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn load_network(path: &Path) -> CliResult<TensorNetwork> {
    Ok(format::network_from_json(&read(path)?)?)
}

fn load_model(args: &SourceArgs) -> CliResult<Option<ModelFile>> {
    args.model
        .as_deref()
        .map(|p| Ok(format::model_from_json(&read(p)?)?))
        .transpose()
}

fn load_circuit(args: &SourceArgs) -> CliResult<Option<Circuit>> {
    let Some(path) = args.circuit.as_deref() else {
        return Ok(None);
    };
    let (c, measured) = format::circuit_from_json(&read(path)?)?;
    Ok(Some(if args.acceptance {
        acceptance_circuit(&c, measured)?
    } else {
        c
    }))
}

fn require_spec(model: &ModelFile) -> CliResult<&tensornet::statmech::ModelSpec> {
    model
        .spec
        .as_ref()
        .ok_or_else(|| usage("the model file has no coupling"))
}

fn delta_network(model: &ModelFile, construction: Construction) -> CliResult<DeltaNetwork> {
    let dn = build_delta(require_spec(model)?)?;
    Ok(if construction == Construction::DeltaImproved {
        improve_delta_weights(&dn)?
    } else {
        dn
    })
}

fn heights(model: &ModelFile) -> Vec<f64> {
    model
        .heights
        .clone()
        .unwrap_or_else(|| (0..model.graph.num_vertices()).map(|v| v as f64).collect())
}

fn pins(model: &ModelFile) -> Vec<(usize, usize)> {
    model.spec.as_ref().map(|s| s.pins.clone()).unwrap_or_default()
}

/// Resolves `--bubbling` against the network and the optional model or
/// circuit it was built from.
fn resolve_bubbling(net: &TensorNetwork, args: &OrderArgs) -> CliResult<Bubbling> {
    let b = match args.bubbling.as_str() {
        "greedy" => greedy_bubbling(net),
        "plane-sweep" => {
            let model = load_model(&args.source)?.ok_or_else(|| usage("--bubbling plane-sweep needs --model"))?;
            plane_sweep_bubbling(&model.graph, &pins(&model), &heights(&model))?.bubbling
        }
        "delta" => {
            let model = load_model(&args.source)?.ok_or_else(|| usage("--bubbling delta needs --model"))?;
            let construction = match args.source.construction {
                Construction::DeltaImproved => Construction::DeltaImproved,
                _ => Construction::Delta,
            };
            delta_network(&model, construction)?.bubbling
        }
        "circuit-order" => {
            let c = load_circuit(&args.source)?.ok_or_else(|| usage("--bubbling circuit-order needs --circuit"))?;
            circuit_order_bubbling(&c)
        }
        path => format::bubbling_from_json(&read(Path::new(path))?)?,
    };
    b.validate(net)?;
    Ok(b)
}

#[derive(Serialize)]
struct EvalOutput {
    value: [f64; 2],
    bubble_width: usize,
}

#[derive(Serialize)]
struct Bounds {
    #[serde(skip_serializing_if = "Option::is_none")]
    general: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    difference_basic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    difference_improved: Option<f64>,
}

#[derive(Serialize)]
struct ScaleOutput {
    delta: f64,
    bubble_width: usize,
    extreme_count: usize,
    norms: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<Bounds>,
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("cannot configure threads: {e}")))?;
    }
    let guards = Guards::from_env()?;
    let emit = |text: String| -> CliResult<()> {
        match &cli.output {
            Some(path) => write(path, &text),
            None => {
                println!("{text}");
                Ok(())
            }
        }
    };
    match &cli.command {
        Command::Eval {
            network,
            order,
            labeling_sum,
        } => {
            let net = load_network(network)?;
            let b = resolve_bubbling(&net, order)?;
            let value = if *labeling_sum {
                eval_labeling_sum_with(&net, &guards)?
            } else {
                eval_contract_with(&net, &b, &guards)?
            };
            emit(format::to_json(&EvalOutput {
                value: [value.re, value.im],
                bubble_width: bubble_width(&net, &b)?,
            })?)
        }
        Command::Approx {
            network,
            order,
            epsilon,
            seed,
            backend,
            failure,
            median_of,
        } => {
            let seed = seed.ok_or_else(|| usage("approx needs --seed for reproducibility"))?;
            let net = load_network(network)?;
            let b = resolve_bubbling(&net, order)?;
            let config = ApproxConfig {
                epsilon: *epsilon,
                failure: *failure,
                seed,
                backend: (*backend).into(),
                aggregator: match median_of {
                    Some(runs) => Aggregator::MedianOfMeans { runs: *runs },
                    None => Aggregator::Mean,
                },
                guards,
            };
            let result = approximate(&net, &b, &config)?;
            emit(format::approx_result_to_json(&result)?)
        }
        Command::Build {
            source,
            max_degree,
            sidecar,
            bubbling_out,
        } => {
            let (net, natural, delta) = build(source, *max_degree)?;
            if let Some(dn) = &delta {
                let target = sidecar
                    .clone()
                    .or_else(|| cli.output.as_ref().map(|o| o.with_extension("delta.json")));
                if let Some(path) = target {
                    write(&path, &format::delta_sidecar_to_json(dn)?)?;
                }
            }
            if let Some(path) = bubbling_out {
                let b = natural.ok_or_else(|| usage("this construction has no natural bubbling"))?;
                write(path, &format::bubbling_to_json(&b)?)?;
            }
            emit(format::network_to_json(&net)?)
        }
        Command::Scale { network, order } => {
            let net = load_network(network)?;
            let b = resolve_bubbling(&net, order)?;
            let report = scale_with(&net, &b, &guards)?;
            let bounds = match load_model(&order.source)? {
                Some(model) => match &model.spec {
                    Some(spec) => {
                        let general = scale_general(spec, report.extreme_count)?;
                        let (basic, improved) = if spec.is_difference() {
                            let (b, i) = scale_delta(spec, &DeltaGraph::new(&spec.graph)?)?;
                            (Some(b), Some(i))
                        } else {
                            (None, None)
                        };
                        Some(Bounds {
                            general: Some(general),
                            difference_basic: basic,
                            difference_improved: improved,
                        })
                    }
                    None => None,
                },
                None => None,
            };
            emit(format::to_json(&ScaleOutput {
                delta: report.delta,
                bubble_width: report.bubble_width,
                extreme_count: report.extreme_count,
                norms: report.per_vertex_norms,
                bounds,
            })?)
        }
        Command::Bubble { network } => {
            let net = load_network(network)?;
            emit(format::bubbling_to_json(&greedy_bubbling(&net))?)
        }
    }
}

/// The network, its natural bubbling (if any) and, for difference builds,
/// the construction data.
fn build(
    source: &SourceArgs,
    max_degree: Option<usize>,
) -> CliResult<(TensorNetwork, Option<Bubbling>, Option<DeltaNetwork>)> {
    if let Some(c) = load_circuit(source)? {
        let net = encode_circuit(&c)?;
        return Ok(match max_degree {
            Some(d) => (reduce_degrees(&net, d)?, None, None),
            None => (net, Some(circuit_order_bubbling(&c)), None),
        });
    }
    let model = load_model(source)?.ok_or_else(|| usage("build needs --model or --circuit"))?;
    match source.construction {
        Construction::General => {
            let spec = require_spec(&model)?;
            let net = build_general_with(spec, max_degree)?;
            let natural = match max_degree {
                None => Some(plane_sweep_bubbling(&model.graph, &spec.pins, &heights(&model))?.bubbling),
                Some(_) => None,
            };
            Ok((net, natural, None))
        }
        Construction::Coloring => {
            let net = build_coloring(&model.graph, model.q)?;
            Ok(match max_degree {
                Some(d) => (reduce_degrees(&net, d)?, None, None),
                None => {
                    let b = plane_sweep_bubbling(&model.graph, &[], &heights(&model))?.bubbling;
                    (net, Some(b), None)
                }
            })
        }
        Construction::Delta | Construction::DeltaImproved => {
            let dn = delta_network(&model, source.construction)?;
            Ok(match max_degree {
                Some(d) => (reduce_delta_degree(&dn, d)?, None, Some(dn)),
                None => (dn.network.clone(), Some(dn.bubbling.clone()), Some(dn)),
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
