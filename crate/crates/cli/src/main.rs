mod render;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sensorflow_client::{Client, ClientError};
use sensorflow_core::api::{
    self, DiagnoseRequest, DiagnoseResponse, ErrorBody, ErrorKind, ExplainRequest, ExplainResponse, SolveMethod,
    SolveRequest, SolveResponse,
};
use sensorflow_core::scenario::{self, CentroidRule, MonitorRule, RatioRule, ScenarioKind, ScenarioSpec};
use sensorflow_core::{fixtures, FlowDocument, NetworkDocument, RoadNetwork, Verdict};
use sensorflow_service::{AppState, CorsPolicy, DEFAULT_PORT};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "sensorflow",
    version,
    about = "Traffic flow calculability from monitored intersections"
)]
struct Cli {
    /// Send requests to a running service instead of computing locally.
    #[arg(long, global = true, env = "SENSORFLOW_SERVER")]
    server: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Diagnose whether the monitored set determines the flow.
    /// Exit code 0 calculable, 2 not calculable, 3 undetermined, 1 error.
    Verify(VerifyArgs),
    /// Reconstruct every arc flow and balancing flow from the observations.
    Solve(SolveArgs),
    /// Show one component's block and its zero-row rank certificate.
    Explain(ExplainArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Generate a seeded network document.
    Generate(GenerateArgs),
    /// Print a bundled reference document.
    Fixture {
        #[arg(value_enum)]
        name: FixtureName,
    },
    /// Walk through the bundled examples.
    Demo,
}

#[derive(Args)]
struct VerifyArgs {
    file: PathBuf,
    /// Override the document's monitored set (comma separated).
    #[arg(long, value_delimiter = ',')]
    monitored: Option<Vec<String>>,
    /// Reject placements where an adjacent vertex's outflow cannot be deduced.
    #[arg(long)]
    strict: bool,
    /// Leave topologically undecidable components undetermined.
    #[arg(long)]
    no_rank_fallback: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SolveArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    /// Show values rounded to this many decimal places.
    #[arg(long, value_name = "PLACES", num_args = 0..=1, default_missing_value = "4")]
    decimal: Option<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ExplainArgs {
    file: PathBuf,
    #[arg(long)]
    component: usize,
    #[arg(long, value_delimiter = ',')]
    monitored: Option<Vec<String>>,
    /// Cut to certify with instead of the minimum cut (comma separated).
    #[arg(long, value_delimiter = ',')]
    cut: Option<Vec<String>>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServeArgs {
    /// Network document to serve; defaults to the six-vertex reference network.
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long, env = "SENSORFLOW_PORT", default_value_t = DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, value_enum, default_value = "local")]
    cors: CorsArg,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "grid")]
    kind: KindArg,
    #[arg(long, default_value_t = 5)]
    width: usize,
    #[arg(long, default_value_t = 5)]
    height: usize,
    /// Vertex count for random trees and graphs.
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 0.2)]
    density: f64,
    /// `none`, `random:K`, `lattice:P:R:C` or a comma separated list.
    #[arg(long, default_value = "none")]
    centroids: String,
    /// `none`, `random:K`, `tree-inducing` or a comma separated list.
    #[arg(long, default_value = "none")]
    monitors: String,
    /// `uniform` or `random:MAX_DENOMINATOR`.
    #[arg(long, default_value = "uniform")]
    ratios: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Simulate a flow and include what the monitors observe.
    #[arg(long)]
    observe: bool,
    /// With --observe, also write the simulated flow to this file.
    #[arg(long, requires = "observe")]
    truth: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Linear,
    Tree,
}

#[derive(Clone, Copy, ValueEnum)]
enum CorsArg {
    Off,
    Local,
    Any,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Grid,
    Tree,
    Graph,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureName {
    SixVertex,
    Pentagon,
    Grid5Split,
    Grid5Tree,
    Grid18,
    Counterexample,
}

/// A request failure: either a structured service error or anything else.
enum Failure {
    Api(ErrorBody),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Api { body, .. } => Failure::Api(body),
            other => Failure::Other(other.into()),
        }
    }
}

/// Where requests are computed.
enum Backend {
    Local(RoadNetwork),
    Remote(Client),
}

impl Backend {
    async fn open(server: Option<&str>, net: RoadNetwork, file: &Path) -> anyhow::Result<Self> {
        let Some(url) = server else {
            return Ok(Backend::Local(net));
        };
        let client = Client::new(url);
        let served = client
            .network()
            .await
            .with_context(|| format!("cannot reach {url}"))?
            .network()?;
        if served != net {
            bail!("the network served at {url} differs from {}", file.display());
        }
        Ok(Backend::Remote(client))
    }

    async fn diagnose(&self, req: &DiagnoseRequest) -> Result<DiagnoseResponse, Failure> {
        match self {
            Backend::Local(net) => api::diagnose(net, req).map_err(Failure::Api),
            Backend::Remote(c) => Ok(c.diagnose(req).await?),
        }
    }

    async fn solve(&self, req: &SolveRequest) -> Result<SolveResponse, Failure> {
        match self {
            Backend::Local(net) => api::solve(net, req).map_err(Failure::Api),
            Backend::Remote(c) => Ok(c.solve(req).await?),
        }
    }

    async fn explain(&self, req: &ExplainRequest) -> Result<ExplainResponse, Failure> {
        match self {
            Backend::Local(net) => api::explain(net, req).map_err(Failure::Api),
            Backend::Remote(c) => Ok(c.explain(req).await?),
        }
    }
}

fn load(path: &Path) -> anyhow::Result<(NetworkDocument, RoadNetwork)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let doc = NetworkDocument::parse(&text).with_context(|| format!("cannot parse {}", path.display()))?;
    let net = doc
        .network()
        .with_context(|| format!("invalid network in {}", path.display()))?;
    Ok((doc, net))
}

/// Exit status of `verify` for an overall verdict.
fn verify_code(v: Verdict) -> u8 {
    match v {
        Verdict::Calculable => 0,
        Verdict::NotCalculable => 2,
        Verdict::Undetermined => 3,
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("responses serialize"));
}

fn report_failure(f: Failure) -> ExitCode {
    match f {
        Failure::Api(body) => eprintln!("error: {body}"),
        Failure::Other(e) => eprintln!("error: {e:#}"),
    }
    ExitCode::from(1)
}

async fn verify(server: Option<&str>, args: VerifyArgs) -> Result<ExitCode, Failure> {
    let (doc, net) = load(&args.file)?;
    let backend = Backend::open(server, net, &args.file).await?;
    let req = DiagnoseRequest {
        monitored: override_monitored(args.monitored).unwrap_or(doc.monitored),
        rank_fallback: !args.no_rank_fallback,
        strict: args.strict,
    };
    let report = backend.diagnose(&req).await?;
    if args.json {
        print_json(&report);
    } else {
        print!("{}", render::diagnosis(&report));
    }
    Ok(ExitCode::from(verify_code(report.overall)))
}

async fn solve(server: Option<&str>, args: SolveArgs) -> Result<ExitCode, Failure> {
    let (doc, net) = load(&args.file)?;
    let backend = Backend::open(server, net, &args.file).await?;
    let req = SolveRequest {
        monitored: doc.monitored.clone(),
        observations: doc.observations.clone(),
        observed_balancing: doc.observed_balancing.clone(),
        method: match args.method {
            MethodArg::Auto => SolveMethod::Auto,
            MethodArg::Linear => SolveMethod::Linear,
            MethodArg::Tree => SolveMethod::Tree,
        },
    };
    match backend.solve(&req).await {
        Ok(solution) => {
            if args.json {
                print_json(&solution);
            } else {
                print!("{}", render::solution(&solution, args.decimal));
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(Failure::Api(body)) if body.kind == ErrorKind::NotCalculable => {
            if args.json {
                print_json(&body);
                return Ok(ExitCode::from(2));
            }
            eprintln!("the observations do not determine the flow");
            let diagnosis = body.diagnosis.unwrap_or_else(|| DiagnoseResponse {
                overall: Verdict::NotCalculable,
                rank_fallback: true,
                components: Vec::new(),
            });
            eprint!("{}", render::diagnosis(&diagnosis));
            for c in diagnosis.components.iter().filter(|c| c.verdict != Verdict::Calculable) {
                let req = ExplainRequest {
                    monitored: doc.monitored.clone(),
                    component: c.id,
                    cut: None,
                };
                let cert = backend.explain(&req).await?.certificate;
                if cert.obstructs {
                    eprintln!(
                        "component {}: F* rows {} are zero, so its rank is at most {} < {} columns",
                        c.id,
                        cert.zero_rows.join(" "),
                        cert.rank_bound,
                        cert.columns
                    );
                } else if let Some(rank) = c.rank {
                    eprintln!("component {}: block rank {rank} < {} unknowns", c.id, c.unknowns);
                }
            }
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(e),
    }
}

async fn explain(server: Option<&str>, args: ExplainArgs) -> Result<ExitCode, Failure> {
    let (doc, net) = load(&args.file)?;
    let backend = Backend::open(server, net, &args.file).await?;
    let req = ExplainRequest {
        monitored: override_monitored(args.monitored).unwrap_or(doc.monitored),
        component: args.component,
        cut: args.cut,
    };
    let out = backend.explain(&req).await?;
    if args.json {
        print_json(&out);
    } else {
        print!("{}", render::explanation(&out));
    }
    Ok(ExitCode::SUCCESS)
}

async fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let net = match &args.network {
        Some(path) => load(path)?.1,
        None => fixtures::six_vertex_network(),
    };
    api::check_network(&net).map_err(|e| anyhow!("{e}"))?;
    let cors = match args.cors {
        CorsArg::Off => CorsPolicy::Off,
        CorsArg::Local => CorsPolicy::Local,
        CorsArg::Any => CorsPolicy::Any,
    };
    let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port))
        .await
        .with_context(|| format!("cannot bind {}:{}", args.host, args.port))?;
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    eprintln!("loaded {} vertices", net.vertex_count());
    sensorflow_service::serve(listener, sensorflow_service::router(AppState::new(net), cors)).await?;
    Ok(())
}

fn parse_count(rest: &str, what: &str) -> anyhow::Result<usize> {
    rest.parse().with_context(|| format!("bad count in {what}"))
}

fn parse_labels(text: &str) -> Vec<String> {
    text.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn centroid_rule(text: &str) -> anyhow::Result<CentroidRule> {
    Ok(match text.split(':').collect::<Vec<_>>().as_slice() {
        ["none"] => CentroidRule::None,
        ["random", k] => CentroidRule::Random {
            count: parse_count(k, text)?,
        },
        ["lattice", p, r, c] => CentroidRule::Lattice {
            period: parse_count(p, text)?,
            row: parse_count(r, text)?,
            col: parse_count(c, text)?,
        },
        _ => CentroidRule::Explicit(parse_labels(text)),
    })
}

fn monitor_rule(text: &str) -> anyhow::Result<MonitorRule> {
    Ok(match text.split(':').collect::<Vec<_>>().as_slice() {
        ["none"] => MonitorRule::None,
        ["tree-inducing"] => MonitorRule::TreeInducing,
        ["random", k] => MonitorRule::Random {
            count: parse_count(k, text)?,
        },
        _ => MonitorRule::Explicit(parse_labels(text)),
    })
}

fn ratio_rule(text: &str) -> anyhow::Result<RatioRule> {
    match text.split(':').collect::<Vec<_>>().as_slice() {
        ["uniform"] => Ok(RatioRule::Uniform),
        ["random", d] => Ok(RatioRule::Random {
            max_denominator: d.parse().context("bad denominator")?,
        }),
        _ => bail!("ratios must be `uniform` or `random:MAX_DENOMINATOR`"),
    }
}

fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    let spec = ScenarioSpec {
        kind: match args.kind {
            KindArg::Grid => ScenarioKind::Grid {
                width: args.width,
                height: args.height,
            },
            KindArg::Tree => ScenarioKind::RandomTree { n: args.n },
            KindArg::Graph => ScenarioKind::RandomGraph {
                n: args.n,
                density: args.density,
            },
        },
        centroids: centroid_rule(&args.centroids)?,
        monitors: monitor_rule(&args.monitors)?,
        ratios: ratio_rule(&args.ratios)?,
        seed: args.seed,
    };
    let s = scenario::generate(&spec)?;
    let placement = if args.observe {
        let balancing = scenario::random_balancing(&s.network, args.seed);
        let truth = scenario::simulate_ground_truth(&s.network, &balancing, args.seed)?;
        if let Some(path) = &args.truth {
            let text = serde_json::to_string_pretty(&FlowDocument::from_state(&s.network, &truth))?;
            std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
        }
        scenario::observe(&s.network, &truth, &s.monitored)
    } else {
        sensorflow_core::Placement::topological(&s.network, s.monitored.clone())
    };
    println!("{}", NetworkDocument::with_placement(&s.network, &placement).to_json());
    Ok(())
}

fn fixture_document(name: FixtureName) -> anyhow::Result<NetworkDocument> {
    let topological = |net: &RoadNetwork, labels: &[String]| {
        sensorflow_core::Placement::topological(net, fixtures::labels_to_set(net, labels))
    };
    let (title, net, placement) = match name {
        FixtureName::SixVertex => {
            let net = fixtures::six_vertex_network();
            let p = fixtures::six_vertex_placement(&net);
            ("six intersections, monitor at a", net, p)
        }
        FixtureName::Pentagon => {
            let net = fixtures::pentagon_network();
            let p = fixtures::pentagon_placement(&net);
            ("pentagon, monitor at e", net, p)
        }
        FixtureName::Grid5Split => {
            let net = fixtures::grid5_network();
            let p = topological(&net, &fixtures::grid5_split_placement());
            ("5x5 grid, placement leaving a centroid without a B-path", net, p)
        }
        FixtureName::Grid5Tree => {
            let net = fixtures::grid5_network();
            let p = topological(&net, &fixtures::grid5_tree_placement());
            ("5x5 grid, two monitors moved so every component is a tree", net, p)
        }
        FixtureName::Grid18 => {
            let s = scenario::generate(&fixtures::grid18_spec())?;
            let p = sensorflow_core::Placement::topological(&s.network, s.monitored);
            ("18x18 grid, tree-inducing monitors", s.network, p)
        }
        FixtureName::Counterexample => {
            let net = fixtures::counterexample_network();
            let p = topological(&net, &["m".to_string()]);
            ("cycle with enough B-paths but a rank deficient block", net, p)
        }
    };
    let mut doc = NetworkDocument::with_placement(&net, &placement);
    doc.name = Some(title.to_string());
    Ok(doc)
}

fn demo() -> anyhow::Result<()> {
    for name in [
        FixtureName::SixVertex,
        FixtureName::Pentagon,
        FixtureName::Grid5Split,
        FixtureName::Grid5Tree,
        FixtureName::Counterexample,
    ] {
        let doc = fixture_document(name)?;
        let net = doc.network()?;
        println!("== {} ==", doc.name.as_deref().unwrap_or(""));
        let report = api::diagnose(&net, &DiagnoseRequest::new(doc.monitored.clone())).map_err(|e| anyhow!("{e}"))?;
        print!("{}", render::diagnosis(&report));
        if !doc.observations.is_empty() {
            let req = SolveRequest {
                monitored: doc.monitored.clone(),
                observations: doc.observations.clone(),
                observed_balancing: doc.observed_balancing.clone(),
                method: SolveMethod::Auto,
            };
            match api::solve(&net, &req) {
                Ok(s) => print!("{}", render::solution(&s, None)),
                Err(e) => println!("solve refused: {}", e.message),
            }
        }
        println!();
    }
    Ok(())
}

/// `--monitored ""` selects the empty set.
fn override_monitored(list: Option<Vec<String>>) -> Option<Vec<String>> {
    list.map(|l| l.into_iter().filter(|v| !v.is_empty()).collect())
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    let server = cli.server.as_deref();
    let result = match cli.command {
        Command::Verify(args) => verify(server, args).await,
        Command::Solve(args) => solve(server, args).await,
        Command::Explain(args) => explain(server, args).await,
        Command::Serve(args) => serve(args).await.map(|_| ExitCode::SUCCESS).map_err(Failure::Other),
        Command::Generate(args) => generate(args).map(|_| ExitCode::SUCCESS).map_err(Failure::Other),
        Command::Fixture { name } => fixture_document(name)
            .map(|doc| {
                println!("{}", doc.to_json());
                ExitCode::SUCCESS
            })
            .map_err(Failure::Other),
        Command::Demo => demo().map(|_| ExitCode::SUCCESS).map_err(Failure::Other),
    };
    result.unwrap_or_else(report_failure)
}
