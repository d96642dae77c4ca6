//! `tropinv`: command-line access to the tropical, theta, family, graph and
//! bounds pipelines. JSON in, JSON or CSV out; deterministic by default.

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::json;
use std::fmt::Display;
use std::fs;
use std::process::ExitCode;

use tropical_invariants::bounds;
use tropical_invariants::degeneration::{DegenerationError, FitIntegrator, SectionSpec};
use tropical_invariants::graph::GraphPoint;
use tropical_invariants::io;
use tropical_invariants::lattice::{MomentMethod, TorusCoordinate};
use tropical_invariants::theta::{self, Integrator, ThetaError};

#[derive(Parser)]
#[command(name = "tropinv", version, about = "Invariants of polarized real tori, theta functions, metrized graphs and arithmetic bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tropical theta function and moment on a polarized real torus.
    Trop {
        #[command(subcommand)]
        cmd: TropCmd,
    },
    /// Riemann theta evaluation and the abelian invariant.
    Theta {
        #[command(subcommand)]
        cmd: ThetaCmd,
    },
    /// Degenerating period families.
    Family {
        #[command(subcommand)]
        cmd: FamilyCmd,
    },
    /// Metrized graph invariants.
    Graph {
        #[command(subcommand)]
        cmd: GraphCmd,
    },
    /// Arithmetic inequality evaluators.
    Bounds {
        #[command(subcommand)]
        cmd: BoundsCmd,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Grid,
    Qmc,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegratorArg {
    Mc,
    Qmc,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct GramInput {
    /// Path to a Gram matrix JSON file.
    #[arg(long)]
    input: String,
}

#[derive(Subcommand)]
enum TropCmd {
    /// Tropical moment I(Σ) by quadrature.
    Moment {
        #[command(flatten)]
        gram: GramInput,
        #[arg(long, value_enum, default_value = "grid")]
        method: MethodArg,
        #[arg(long, default_value_t = 4096)]
        resolution: usize,
    },
    /// ‖Ψ‖ and its minimizer set at a point.
    Value {
        #[command(flatten)]
        gram: GramInput,
        /// Comma-separated coordinates in the lattice basis.
        #[arg(long)]
        point: String,
    },
}

#[derive(Subcommand)]
enum ThetaCmd {
    /// θ(τ, z) with a certified tail bound.
    Eval {
        /// Path to a period matrix JSON file.
        #[arg(long)]
        input: String,
        /// Comma-separated real parts of z.
        #[arg(long, default_value = "")]
        z_re: String,
        /// Comma-separated imaginary parts of z.
        #[arg(long, default_value = "")]
        z_im: String,
        #[arg(long, default_value_t = 1e-12)]
        eps: f64,
    },
    /// The invariant I(A,Θ) by Monte Carlo or low-discrepancy integration.
    Invariant {
        #[arg(long)]
        input: String,
        #[arg(long, value_enum, default_value = "mc")]
        integrator: IntegratorArg,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct FamilyInput {
    /// Path to a period family JSON file.
    #[arg(long)]
    input: String,
}

#[derive(Args)]
struct SectionArgs {
    /// Comma-separated a-vector of the section (length g).
    #[arg(long)]
    a: String,
    /// Comma-separated b-vector of the section (length g).
    #[arg(long)]
    b: String,
}

#[derive(Subcommand)]
enum FamilyCmd {
    /// The period matrix T_f(t) on a chosen branch.
    Period {
        #[command(flatten)]
        family: FamilyInput,
        #[arg(long)]
        t_re: f64,
        #[arg(long, default_value_t = 0.0)]
        t_im: f64,
        #[arg(long, default_value_t = 0)]
        branch: i64,
    },
    /// Tropicalization of a section.
    Trop {
        #[command(flatten)]
        family: FamilyInput,
        #[command(flatten)]
        section: SectionArgs,
    },
    /// The theta limit value α of a section.
    Alpha {
        #[command(flatten)]
        family: FamilyInput,
        #[command(flatten)]
        section: SectionArgs,
        #[arg(long, default_value_t = 1e-10)]
        eps: f64,
    },
    /// Normalized ‖θ‖ probes along a sequence of |t|.
    Probe {
        #[command(flatten)]
        family: FamilyInput,
        #[command(flatten)]
        section: SectionArgs,
        /// Comma-separated |t| values.
        #[arg(long)]
        t_abs: String,
    },
    /// Fit I(A_t) against c0 + c1·L - c2·log L.
    Fit {
        #[command(flatten)]
        family: FamilyInput,
        /// Comma-separated |t| grid.
        #[arg(long)]
        t_abs: String,
        #[arg(long, value_enum, default_value = "mc")]
        integrator: IntegratorArg,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
}

#[derive(Args)]
struct GraphInput {
    /// Path to a graph JSON file.
    #[arg(long)]
    input: String,
}

#[derive(Subcommand)]
enum GraphCmd {
    /// δ, ε, φ, τ and I(Jac Γ).
    Invariants {
        #[command(flatten)]
        graph: GraphInput,
        #[arg(long, default_value_t = 64)]
        subdivisions: usize,
    },
    /// Gram matrix and cycle basis of the tropical Jacobian.
    Jacobian {
        #[command(flatten)]
        graph: GraphInput,
    },
    /// Identity δ+ε = 12I+2φ and the inequality chain.
    Identity {
        #[command(flatten)]
        graph: GraphInput,
        #[arg(long, default_value_t = 64)]
        subdivisions: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// Effective resistance between two points ("v" or "edge:k:offset").
    Resistance {
        #[command(flatten)]
        graph: GraphInput,
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
    },
}

#[derive(Subcommand)]
enum BoundsCmd {
    /// Aggregate δ(X), φ(X), the Noether residual and the ω̂² lower bound.
    Curve {
        /// Path to a curve arithmetic data JSON file.
        #[arg(long)]
        input: String,
        #[arg(long, default_value_t = 0.0)]
        c1: f64,
        #[arg(long, default_value_t = 0.0)]
        c2: f64,
    },
    /// Height bounds for a tautological cycle Z_{m,α}.
    Tautological {
        #[arg(long)]
        g: u64,
        /// Comma-separated non-zero integers m_1,..,m_r.
        #[arg(long)]
        m: String,
        #[arg(long, default_value_t = 1)]
        d_k: u64,
        #[arg(long)]
        omega_sq: f64,
        #[arg(long, default_value_t = 0.0)]
        phi_x: f64,
    },
    /// The elementary cross-sum estimates for an m-vector.
    Estimates {
        #[arg(long)]
        m: String,
    },
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    fn emit(&self) {
        let (kind, msg) = match self {
            CliError::Validation(m) => ("validation", m),
            CliError::Numerical(m) => ("numerical", m),
        };
        eprintln!("{}", json!({"error": msg, "kind": kind}));
    }
}

fn validation<E: Display>(e: E) -> CliError {
    CliError::Validation(e.to_string())
}

fn from_theta(e: ThetaError) -> CliError {
    match e {
        ThetaError::TruncationFailure { .. } | ThetaError::NonFinite { .. } => {
            CliError::Numerical(e.to_string())
        }
        other => CliError::Validation(other.to_string()),
    }
}

fn from_degeneration(e: DegenerationError) -> CliError {
    match e {
        DegenerationError::Theta(t) => from_theta(t),
        DegenerationError::IllConditionedFit(_) => CliError::Numerical(e.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

fn from_io(e: io::IoError) -> CliError {
    match e {
        io::IoError::Theta(t) => from_theta(t),
        io::IoError::Degeneration(d) => from_degeneration(d),
        other => CliError::Validation(other.to_string()),
    }
}

fn read_file(path: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {path}: {e}")))
}

fn parse_floats(text: &str) -> Result<Vec<f64>, CliError> {
    if text.trim().is_empty() {
        return Ok(vec![]);
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| CliError::Validation(format!("bad number {s:?}: {e}")))
        })
        .collect()
}

fn parse_ints(text: &str) -> Result<Vec<i64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| CliError::Validation(format!("bad integer {s:?}: {e}")))
        })
        .collect()
}

/// "v" for a vertex id, "edge:K:OFFSET" for an interior point.
fn parse_point(
    graph: &tropical_invariants::graph::MetrizedGraph,
    text: &str,
) -> Result<GraphPoint, CliError> {
    if let Some(rest) = text.strip_prefix("edge:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 2 {
            return Err(CliError::Validation(format!(
                "interior point must be edge:K:OFFSET, got {text:?}"
            )));
        }
        let edge = parts[0]
            .parse()
            .map_err(|e| CliError::Validation(format!("bad edge index: {e}")))?;
        let offset = parts[1]
            .parse()
            .map_err(|e| CliError::Validation(format!("bad offset: {e}")))?;
        Ok(GraphPoint::Interior { edge, offset })
    } else {
        graph
            .vertex_index(text)
            .map(GraphPoint::Vertex)
            .ok_or_else(|| CliError::Validation(format!("unknown vertex {text:?}")))
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Trop { cmd } => run_trop(cmd),
        Command::Theta { cmd } => run_theta(cmd),
        Command::Family { cmd } => run_family(cmd),
        Command::Graph { cmd } => run_graph(cmd),
        Command::Bounds { cmd } => run_bounds(cmd),
    }
}

fn run_trop(cmd: TropCmd) -> Result<String, CliError> {
    match cmd {
        TropCmd::Moment {
            gram,
            method,
            resolution,
        } => {
            let lattice = io::parse_gram(&read_file(&gram.input)?).map_err(from_io)?;
            let method = match method {
                MethodArg::Grid => MomentMethod::Grid,
                MethodArg::Qmc => MomentMethod::LowDiscrepancy,
            };
            let est = lattice
                .tropical_moment(method, resolution)
                .map_err(validation)?;
            Ok(io::emit(&io::moment_report(&est)))
        }
        TropCmd::Value { gram, point } => {
            let lattice = io::parse_gram(&read_file(&gram.input)?).map_err(from_io)?;
            let coords = parse_floats(&point)?;
            if coords.len() != lattice.rank() {
                return Err(CliError::Validation(format!(
                    "point has {} coordinates, lattice rank is {}",
                    coords.len(),
                    lattice.rank()
                )));
            }
            let v = lattice.tropical_theta_norm(&TorusCoordinate::new(&coords));
            Ok(io::emit(&io::theta_norm_report(&v)))
        }
    }
}

fn run_theta(cmd: ThetaCmd) -> Result<String, CliError> {
    match cmd {
        ThetaCmd::Eval {
            input,
            z_re,
            z_im,
            eps,
        } => {
            let tau = io::parse_tau(&read_file(&input)?).map_err(from_io)?;
            let re = parse_floats(&z_re)?;
            let im = parse_floats(&z_im)?;
            let g = tau.g();
            if re.len() != g || im.len() != g {
                return Err(CliError::Validation(format!(
                    "z must have {g} components in --z-re and --z-im"
                )));
            }
            let z: Vec<Complex64> = re
                .iter()
                .zip(&im)
                .map(|(&r, &i)| Complex64::new(r, i))
                .collect();
            let ev = theta::riemann_theta(&tau, &z, eps).map_err(from_theta)?;
            Ok(io::emit(&io::theta_eval_report(&ev)))
        }
        ThetaCmd::Invariant {
            input,
            integrator,
            samples,
            seed,
        } => {
            let tau = io::parse_tau(&read_file(&input)?).map_err(from_io)?;
            let integrator = match integrator {
                IntegratorArg::Mc => Integrator::MonteCarlo,
                IntegratorArg::Qmc => Integrator::LowDiscrepancy,
            };
            let est =
                theta::abelian_invariant(&tau, integrator, samples, seed).map_err(from_theta)?;
            Ok(io::emit(&io::invariant_report(&est)))
        }
    }
}

fn section_from_args(s: &SectionArgs) -> Result<SectionSpec, CliError> {
    Ok(SectionSpec::new(parse_floats(&s.a)?, parse_floats(&s.b)?))
}

fn run_family(cmd: FamilyCmd) -> Result<String, CliError> {
    match cmd {
        FamilyCmd::Period {
            family,
            t_re,
            t_im,
            branch,
        } => {
            let fam = io::parse_family(&read_file(&family.input)?).map_err(from_io)?;
            let tau = fam
                .family_period(Complex64::new(t_re, t_im), branch)
                .map_err(from_degeneration)?;
            let g = tau.g();
            let rows: Vec<Vec<serde_json::Value>> = (0..g)
                .map(|i| {
                    (0..g)
                        .map(|j| {
                            let z = tau.tau()[(i, j)];
                            json!({"re": io::sig12(z.re), "im": io::sig12(z.im)})
                        })
                        .collect()
                })
                .collect();
            Ok(io::emit(&json!({"g": g, "tau": rows})))
        }
        FamilyCmd::Trop { family, section } => {
            let fam = io::parse_family(&read_file(&family.input)?).map_err(from_io)?;
            let trop = fam
                .family_trop(&section_from_args(&section)?)
                .map_err(from_degeneration)?;
            Ok(io::emit(&io::trop_data_report(&trop)))
        }
        FamilyCmd::Alpha {
            family,
            section,
            eps,
        } => {
            let fam = io::parse_family(&read_file(&family.input)?).map_err(from_io)?;
            let alpha = fam
                .alpha_of_section(&section_from_args(&section)?, eps)
                .map_err(from_degeneration)?;
            Ok(io::emit(&json!({"alpha": io::num(alpha)})))
        }
        FamilyCmd::Probe {
            family,
            section,
            t_abs,
        } => {
            let fam = io::parse_family(&read_file(&family.input)?).map_err(from_io)?;
            let section = section_from_args(&section)?;
            let ts: Vec<Complex64> = parse_floats(&t_abs)?
                .into_iter()
                .map(|x| Complex64::new(x, 0.0))
                .collect();
            let probes = fam
                .theta_limit_probe(&section, &ts)
                .map_err(from_degeneration)?;
            let alpha = fam
                .alpha_of_section(&section, 1e-10)
                .map_err(from_degeneration)?;
            Ok(io::emit(&io::probe_report(&probes, alpha)))
        }
        FamilyCmd::Fit {
            family,
            t_abs,
            integrator,
            samples,
            seed,
            format,
        } => {
            let fam = io::parse_family(&read_file(&family.input)?).map_err(from_io)?;
            let grid = parse_floats(&t_abs)?;
            let spec = FitIntegrator {
                integrator: match integrator {
                    IntegratorArg::Mc => Integrator::MonteCarlo,
                    IntegratorArg::Qmc => Integrator::LowDiscrepancy,
                },
                samples,
                seed,
            };
            let fit = fam
                .invariant_asymptotic_fit(&grid, spec)
                .map_err(from_degeneration)?;
            Ok(match format {
                FormatArg::Json => io::emit(&io::fit_report(&fit)),
                FormatArg::Csv => io::fit_csv(&fit),
            })
        }
    }
}

fn run_graph(cmd: GraphCmd) -> Result<String, CliError> {
    match cmd {
        GraphCmd::Invariants {
            graph,
            subdivisions,
        } => {
            let (g, pol) = io::parse_graph(&read_file(&graph.input)?).map_err(from_io)?;
            let inv = g.graph_invariants(&pol, subdivisions).map_err(validation)?;
            Ok(io::emit(&io::invariants_report(&inv)))
        }
        GraphCmd::Jacobian { graph } => {
            let (g, _) = io::parse_graph(&read_file(&graph.input)?).map_err(from_io)?;
            let (gram, basis) = g.tropical_jacobian().map_err(validation)?;
            let dto = io::gram_to_dto(&gram);
            Ok(io::emit(&json!({
                "gram": serde_json::to_value(&dto).unwrap(),
                "cycle_basis": basis,
            })))
        }
        GraphCmd::Identity {
            graph,
            subdivisions,
            tol,
        } => {
            let (g, pol) = io::parse_graph(&read_file(&graph.input)?).map_err(from_io)?;
            let report = g
                .identity_and_bounds_check(&pol, subdivisions)
                .map_err(validation)?;
            let scale = (report.invariants.delta + report.invariants.epsilon).abs().max(1.0);
            let mut value = io::identity_report(&report);
            value["within_tol"] = json!(report.identity_residual.abs() <= tol * scale);
            Ok(io::emit(&value))
        }
        GraphCmd::Resistance { graph, p, q } => {
            let (g, _) = io::parse_graph(&read_file(&graph.input)?).map_err(from_io)?;
            let p = parse_point(&g, &p)?;
            let q = parse_point(&g, &q)?;
            let r = g.effective_resistance(&p, &q).map_err(validation)?;
            Ok(io::emit(&json!({"resistance": io::num(r)})))
        }
    }
}

fn run_bounds(cmd: BoundsCmd) -> Result<String, CliError> {
    match cmd {
        BoundsCmd::Curve { input, c1, c2 } => {
            let data = io::parse_curve(&read_file(&input)?).map_err(from_io)?;
            let (delta_x, phi_x) = bounds::aggregate(&data).map_err(validation)?;
            let residual = bounds::noether_residual(&data).map_err(validation)?;
            let phi_bound =
                bounds::phi_lower_bound(data.g, delta_x, c1, c2, Some(data.d_k))
                    .map_err(validation)?;
            let omega_bound = bounds::omega_lower_bound(data.g, data.d_k, data.h_fal, c1, c2)
                .map_err(validation)?;
            Ok(io::emit(&json!({
                "delta_x": io::num(delta_x),
                "phi_x": io::num(phi_x),
                "noether_residual": io::num(residual),
                "phi_lower_bound": io::phi_bound_report(&phi_bound),
                "omega_lower_bound": io::omega_bound_report(&omega_bound),
            })))
        }
        BoundsCmd::Tautological {
            g,
            m,
            d_k,
            omega_sq,
            phi_x,
        } => {
            let m = parse_ints(&m)?;
            let spec = bounds::TautologicalSpec::new(g, m).map_err(validation)?;
            let b = bounds::tautological_height_bound(g, &spec, d_k, omega_sq, phi_x)
                .map_err(validation)?;
            Ok(io::emit(&io::tautological_report(&b)))
        }
        BoundsCmd::Estimates { m } => {
            let m = parse_ints(&m)?;
            if m.is_empty() {
                return Err(CliError::Validation("m must be nonempty".into()));
            }
            let e = bounds::m_vector_estimates(&m);
            Ok(io::emit(&io::m_estimates_report(&e)))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            e.emit();
            ExitCode::from(e.exit_code())
        }
    }
}
