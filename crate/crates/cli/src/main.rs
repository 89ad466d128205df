mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sclkit::acceptance;
use sclkit::actions::{
    build_projection_family, classify_isometry, default_k, projection_diameter, projection_test, promote_to_quasitree,
    quasi_axis, scl_pipeline, stable_window, wwpd_xi, ActionError, Budgets, PipelineError,
};
use sclkit::classifier::{
    chi_vector, commutator_witness, exponential_growth_verdict, lower_bound_recipe, partition_classes, witness_bound,
    ClassifierError,
};
use sclkit::counting::{evaluate_report, QmError};
use sclkit::exact::ratio_string;
use sclkit::hypgraph::{parse_graph_text, GraphError};
use sclkit::words::ball;
use sclkit::{Backend, ExplicitAction, NtDecomposition, TreeCountingQm, Verdict, Word, WordError};

use report::Report;

#[derive(Parser)]
#[command(name = "sclkit", version, about = "Counting quasi-morphisms, quasi-trees and scl positivity")]
struct Cli {
    /// Emit the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for randomized routines.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Include wall-clock timing (makes output non-reproducible).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a counting quasi-morphism on the rank-k Cayley tree.
    QmEval(QmEvalArgs),
    /// Geometry of an explicit graph.
    Graph {
        #[command(subcommand)]
        op: GraphOp,
    },
    /// Isometries, axes and projections of a group action.
    Action {
        #[command(subcommand)]
        op: ActionOp,
    },
    /// Classify a symbolic decomposition. Exit 0 = Zero, 10 = Positive.
    Classify(ClassifyArgs),
    /// Run the acceptance suite.
    Selftest,
}

#[derive(Args)]
struct QmEvalArgs {
    #[arg(long)]
    w: String,
    #[arg(long)]
    g: String,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    n_max: usize,
    #[arg(long, default_value = "1")]
    basepoint: String,
    /// Pairs from this ball sample the defect.
    #[arg(long, default_value_t = 3)]
    defect_radius: usize,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Subcommand)]
enum GraphOp {
    Delta(GraphArgs),
    Bottleneck(GraphArgs),
    Manning {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 0)]
        base: usize,
        /// Use this Δ instead of computing the bottleneck constant.
        #[arg(long)]
        delta: Option<u32>,
    },
}

#[derive(Args)]
struct ActionArgs {
    /// `cayley:k` or a graph file with `gen` lines.
    #[arg(long)]
    backend: String,
    #[arg(long)]
    g: String,
    #[arg(long, default_value_t = 2)]
    radius: usize,
    #[arg(long = "K")]
    k: Option<i64>,
    #[arg(long, default_value_t = 1000)]
    n_max: usize,
}

#[derive(Subcommand)]
enum ActionOp {
    Classify(ActionArgs),
    Axis(ActionArgs),
    /// Projection of the axis of `--h` onto the axis of `--g`.
    Project {
        #[command(flatten)]
        action: ActionArgs,
        #[arg(long)]
        h: String,
        #[arg(long, default_value_t = 0)]
        window: usize,
    },
    Wwpd(ActionArgs),
    Promote(ActionArgs),
    Pipeline(ActionArgs),
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    level_mode: bool,
    #[arg(long)]
    witness: bool,
}

/// Exit 2 for bad input, 1 for violated invariants.
enum Failure {
    Input(String),
    Internal(String),
}

impl From<WordError> for Failure {
    fn from(e: WordError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::NotATree { .. } | GraphError::NotQuasiGeodesic { .. } => Failure::Internal(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<ActionError> for Failure {
    fn from(e: ActionError) -> Self {
        match e {
            ActionError::AxiomViolation { .. } | ActionError::PromotionDisconnected { .. } | ActionError::NoPower { .. } => {
                Failure::Internal(e.to_string())
            }
            ActionError::Graph(g) => g.into(),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match Failure::from(e.source.clone()) {
            Failure::Input(_) => Failure::Input(e.to_string()),
            Failure::Internal(_) => Failure::Internal(e.to_string()),
        }
    }
}

impl From<ClassifierError> for Failure {
    fn from(e: ClassifierError) -> Self {
        match e {
            ClassifierError::Parse { .. } | ClassifierError::Inconsistent { .. } | ClassifierError::EmptyMulticurve => {
                Failure::Input(e.to_string())
            }
            _ => Failure::Internal(e.to_string()),
        }
    }
}

impl From<QmError> for Failure {
    fn from(e: QmError) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<(Report, u8), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = match &cli.command {
        Command::QmEval(a) => qm_eval(a, cli.seed),
        Command::Graph { op } => graph(op, cli.seed),
        Command::Action { op } => action(op, cli.seed),
        Command::Classify(a) => classify(a, cli.seed),
        Command::Selftest => selftest(cli.seed),
    };
    match result {
        Ok((mut report, code)) => {
            if cli.timing {
                report.set("timing_seconds", format!("{:.3}", start.elapsed().as_secs_f64()));
            }
            print!("{}", report.render(cli.json));
            ExitCode::from(code)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(1)
        }
    }
}

fn qm_eval(a: &QmEvalArgs, seed: u64) -> Outcome {
    let mut r = Report::new("qm-eval", seed);
    for (k, v) in [("w", &a.w), ("g", &a.g), ("basepoint", &a.basepoint)] {
        r.input(k, v.as_bytes());
    }
    r.input("rank", format!("{:?}", a.rank).as_bytes());
    r.input("n_max", a.n_max.to_string().as_bytes());
    r.input("defect_radius", a.defect_radius.to_string().as_bytes());
    let inferred = || -> Result<usize, WordError> { Ok(Word::parse(&a.w, None)?.rank().max(Word::parse(&a.g, None)?.rank())) };
    let rank = match a.rank {
        Some(k) => k,
        None => inferred()?.max(2),
    };
    let (w, g, x0) = (Word::parse(&a.w, Some(rank))?, Word::parse(&a.g, Some(rank))?, Word::parse(&a.basepoint, Some(rank))?);
    let qm = TreeCountingQm::new(w, x0)?;
    let sample = ball(rank, a.defect_radius);
    let pairs: Vec<(Word, Word)> = sample.iter().flat_map(|x| sample.iter().map(move |y| (x.clone(), y.clone()))).collect();
    let rep = evaluate_report(&qm, &g, a.n_max, &pairs);
    r.set("rank", rank);
    r.set("value", rep.value_samples.get(&g.to_string()).copied());
    r.set("defect_observed", rep.defect_observed);
    r.set("defect_certified", rep.defect_certified);
    r.set("hhat_interval", rep.hhat_interval.to_string());
    r.set("hhat_exact", rep.hhat_exact.as_ref().map(ratio_string));
    r.set("bavard_lower", ratio_string(&rep.bavard_lower));
    r.set("report", &rep);
    Ok((r, 0))
}

fn load_graph(r: &mut Report, path: &Path) -> Result<sclkit::FiniteMetricGraph, Failure> {
    let text = read(path)?;
    r.input("graph", text.as_bytes());
    Ok(parse_graph_text(&text)?.0)
}

fn graph(op: &GraphOp, seed: u64) -> Outcome {
    match op {
        GraphOp::Delta(a) => {
            let mut r = Report::new("graph delta", seed);
            let g = load_graph(&mut r, &a.input)?;
            let h = g.hyperbolicity_delta();
            r.set("vertices", g.vertex_count());
            r.set("delta", ratio_string(&h.value()));
            r.set("exact", h.exact);
            Ok((r, 0))
        }
        GraphOp::Bottleneck(a) => {
            let mut r = Report::new("graph bottleneck", seed);
            let g = load_graph(&mut r, &a.input)?;
            let d = g.bottleneck_constant();
            r.set("vertices", g.vertex_count());
            r.set("bottleneck", d);
            if d > 0 {
                let (x, y, v) = g.bottleneck_witness(d - 1).ok_or_else(|| Failure::Internal("no witness below the constant".into()))?;
                r.set("witness_below", json!({"delta": d - 1, "x": x, "y": y, "v": v}));
            }
            Ok((r, 0))
        }
        GraphOp::Manning { graph, base, delta } => {
            let mut r = Report::new("graph manning", seed);
            let g = load_graph(&mut r, &graph.input)?;
            r.input("base", base.to_string().as_bytes());
            r.input("delta", format!("{delta:?}").as_bytes());
            let tq = g.manning_tree(*delta, *base)?;
            r.set("delta", tq.delta);
            r.set("R", tq.r);
            r.set("base", tq.base);
            r.set("tree_vertices", tq.tree.vertex_count());
            r.set("tree_edges", tq.tree.edges());
            r.set("representatives", &tq.reps);
            r.set("alpha", &tq.alpha);
            match g.check_manning_inequalities(&tq) {
                Ok(()) => r.set("inequalities", "hold"),
                Err((a, b, dt, dq)) => {
                    return Err(Failure::Internal(format!("inequality fails on components {a},{b}: d_T={dt}, d_Q={dq}")))
                }
            }
            Ok((r, 0))
        }
    }
}

fn backend(r: &mut Report, spec: &str) -> Result<Backend, Failure> {
    r.input("backend", spec.as_bytes());
    if let Some(k) = spec.strip_prefix("cayley:") {
        let rank: usize = k.parse().map_err(|_| Failure::Input(format!("bad rank in backend {spec:?}")))?;
        if !(1..=26).contains(&rank) {
            return Err(WordError::BadRank(rank).into());
        }
        return Ok(Backend::CayleyTree { rank });
    }
    let text = read(Path::new(spec))?;
    r.input("backend_file", text.as_bytes());
    let (graph, gens) = parse_graph_text(&text)?;
    Ok(Backend::Explicit(Arc::new(ExplicitAction::new(graph, gens)?)))
}

fn action_setup(name: &str, a: &ActionArgs, seed: u64) -> Result<(Report, Backend, Word), Failure> {
    let mut r = Report::new(name, seed);
    let b = backend(&mut r, &a.backend)?;
    r.input("g", a.g.as_bytes());
    r.input("radius", a.radius.to_string().as_bytes());
    r.input("K", format!("{:?}", a.k).as_bytes());
    r.input("n_max", a.n_max.to_string().as_bytes());
    let g = Word::parse(&a.g, Some(b.rank()))?;
    r.set("backend", b.to_string());
    r.set("g", g.to_string());
    Ok((r, b, g))
}

fn action(op: &ActionOp, seed: u64) -> Outcome {
    match op {
        ActionOp::Classify(a) => {
            let (mut r, b, g) = action_setup("action classify", a, seed)?;
            r.set("isometry", classify_isometry(&b, &g, a.n_max)?);
            Ok((r, 0))
        }
        ActionOp::Axis(a) => {
            let (mut r, b, g) = action_setup("action axis", a, seed)?;
            let ax = quasi_axis(&b, &g)?;
            let (p, root) = ax.line_key();
            r.set("x0", ax.x0.to_string());
            r.set("period", ax.period.to_string());
            r.set("D", ax.d);
            r.set("line_nearest_point", p.to_string());
            r.set("line_period", root.to_string());
            Ok((r, 0))
        }
        ActionOp::Project { action: a, h, window } => {
            let (mut r, b, g) = action_setup("action project", a, seed)?;
            r.input("h", h.as_bytes());
            r.input("window", window.to_string().as_bytes());
            let hw = Word::parse(h, Some(b.rank()))?;
            let (ag, ah) = (quasi_axis(&b, &g)?, quasi_axis(&b, &hw)?);
            let w = (*window).max(stable_window(&ag, &ah));
            r.set("h", hw.to_string());
            r.set("window", w);
            r.set("diameter", projection_diameter(&ag, &ah, w));
            r.set("test", projection_test(&ag, &ah, *window));
            Ok((r, 0))
        }
        ActionOp::Wwpd(a) => {
            let (mut r, b, g) = action_setup("action wwpd", a, seed)?;
            let rep = wwpd_xi(&b, &g, a.radius)?;
            r.set("tau", rep.tau);
            r.set("xi", rep.xi);
            r.set("witness", rep.witness.map(|w| w.to_string()));
            r.set("parallel", rep.parallel.iter().map(Word::to_string).collect::<Vec<_>>());
            r.set("scanned", rep.scanned);
            Ok((r, 0))
        }
        ActionOp::Promote(a) => {
            let (mut r, b, g) = action_setup("action promote", a, seed)?;
            let fam = build_projection_family(&b, &g, a.radius, None)?;
            let k = a.k.unwrap_or_else(|| default_k(fam.eta));
            let pg = promote_to_quasitree(&fam, k)?;
            r.set("members", &fam.labels);
            r.set("xi", fam.xi);
            r.set("eta", fam.eta);
            r.set("least_eta", fam.least_eta());
            r.set("K", k);
            r.set("vertices", pg.graph.vertex_count());
            r.set("joined_pairs", pg.joined_pairs.len());
            r.set("bottleneck", pg.graph.bottleneck_constant());
            r.set("delta", ratio_string(&pg.graph.hyperbolicity_delta().value()));
            Ok((r, 0))
        }
        ActionOp::Pipeline(a) => {
            let (mut r, b, g) = action_setup("action pipeline", a, seed)?;
            let budgets = Budgets { n_max: a.n_max, conj_radius: a.radius, k: a.k, ..Budgets::default() };
            let rep = scl_pipeline(&b, &g, &budgets)?;
            r.set("lower_bound", rep.lower_bound.as_ref().map(ratio_string));
            r.set("N", rep.power_n);
            r.set("xi", rep.xi);
            r.set("M", rep.threshold_m);
            r.set("promoted_bottleneck", rep.promoted.as_ref().map(|p| p.bottleneck));
            r.set("report", &rep);
            Ok((r, 0))
        }
    }
}

fn classify(a: &ClassifyArgs, seed: u64) -> Outcome {
    let mut r = Report::new("classify", seed);
    let text = read(&a.input)?;
    r.input("decomposition", text.as_bytes());
    r.input("level_mode", [a.level_mode as u8].as_slice());
    r.input("witness", [a.witness as u8].as_slice());
    let d = NtDecomposition::parse(&text)?;
    let verdict = sclkit::classifier::scl_verdict(&d);
    let mut positive = verdict.is_positive();
    r.set("N", d.n);
    if a.level_mode {
        positive = exponential_growth_verdict(&d, true)?;
        r.set("mode", "level-subgroup");
    }
    r.set("verdict", if positive { "Positive" } else { "Zero" });
    match &verdict {
        Verdict::Positive { class } => r.set("witness_class", class),
        Verdict::Zero { certificates } => r.set("certificates", certificates),
    }
    r.set("chi", chi_vector(&d).iter().map(|(k, v)| (k.clone(), ratio_string(v))).collect::<std::collections::BTreeMap<_, _>>());
    r.set("classes", partition_classes(&d).classes);
    if let Some(rec) = lower_bound_recipe(&d) {
        r.set("lower_bound_recipe", rec);
    }
    if a.witness && !verdict.is_positive() {
        let b = commutator_witness(&d)?;
        if b.witnesses.iter().any(|w| !w.verified) {
            return Err(Failure::Internal("a commutator witness failed verification".into()));
        }
        r.set("witness_power", b.power);
        r.set("witness_count", b.count);
        r.set("witness_bound", witness_bound(&d));
        let list: Vec<_> = b
            .witnesses
            .iter()
            .map(|w| json!({"expression": w.expression(), "equals": w.target_text(), "verified": w.verified}))
            .collect();
        r.set("witnesses", list);
    }
    Ok((r, if positive { 10 } else { 0 }))
}

fn selftest(seed: u64) -> Outcome {
    let mut r = Report::new("selftest", seed);
    r.input("seed", seed.to_le_bytes().as_slice());
    let results = acceptance::run_all(seed);
    for c in &results {
        r.set(&format!("criterion_{:02}", c.id), c.to_string());
    }
    let failed = results.iter().filter(|c| !c.passed).count();
    r.set("passed", results.len() - failed);
    r.set("failed", failed);
    Ok((r, if failed == 0 { 0 } else { 1 }))
}
