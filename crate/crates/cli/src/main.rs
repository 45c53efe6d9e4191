use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use adlsense_core::cbr::{save_casebase, Case, CaseBase, Label};
use adlsense_core::event::EventStream;
use adlsense_core::pipeline::{
    analyse, build_snapshot, load_events, load_profiles, profiles_to_jsonl, seed_casebase,
    EventSource, PipelineError, SnapshotInputs,
};
use adlsense_core::report::{parse_overlays, Snapshot};
use adlsense_core::segment::episodes_to_jsonl;
use adlsense_core::sim::{builtin_scenarios, find_scenario, simulate};
use adlsense_core::AppConfig;
use adlsense_service::{bind, serve, Loader, ServiceState};
use anyhow::{anyhow, Context as _};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Ambient-sensor ADL analysis: simulate homes, segment events into
/// activities, build daily profiles, score fall-risk factors, retrieve
/// similar cases and render radar charts.
#[derive(Debug, Parser)]
#[command(name = "adlsense", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic event stream (and ground truth) for a scenario.
    Simulate(SimulateArgs),
    /// Segment events into ADL episodes (JSONL).
    Segment(DayArgs),
    /// Build daily profiles (JSONL).
    Profile(DayArgs),
    /// Score the six risk factors against the risky template.
    Score(QueryArgs),
    /// Retrieve the most similar stored cases.
    Retrieve(RetrieveArgs),
    /// Per-factor score series, or self-similarity with --self-similarity.
    Trend(TrendArgs),
    /// Render a radar chart (or a factor trend with --factor) as SVG.
    Render(RenderArgs),
    /// Serve the HTTP API. SIGHUP reloads configuration and data.
    Serve(ServeArgs),
    /// Check a configuration file and report every problem.
    ValidateConfig(ConfigArg),
    /// Run segment, profile and score over an event file and write every artifact.
    Pipeline(PipelineArgs),
    /// Write a case base from profile files or the simulated seed scenarios.
    BuildCasebase(CasebaseArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Configuration file (TOML).
    #[arg(long, env = "ADLSENSE_CONFIG")]
    config: PathBuf,
}

#[derive(Debug, Args)]
struct OutArg {
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Optional configuration; its extra scenarios shadow the built-ins.
    #[arg(long, env = "ADLSENSE_CONFIG")]
    config: Option<PathBuf>,
    /// Scenario name.
    #[arg(long, default_value = "steady_healthy")]
    scenario: String,
    /// Override the scenario's seed.
    #[arg(long, env = "ADLSENSE_SEED")]
    seed: Option<u64>,
    /// Override the number of days.
    #[arg(long)]
    days: Option<u32>,
    /// Also write ground-truth episodes (JSONL) here.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// List the available scenarios and exit.
    #[arg(long)]
    list: bool,
    #[command(flatten)]
    out: OutArg,
}

/// One event file plus an optional date filter.
#[derive(Debug, Args)]
struct DayArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Event file (JSONL).
    #[arg(long)]
    events: PathBuf,
    /// Resident id; defaults to the event file's stem.
    #[arg(long)]
    resident: Option<String>,
    /// First profile date to include (YYYY-MM-DD).
    #[arg(long)]
    from: Option<NaiveDate>,
    /// Last profile date to include.
    #[arg(long)]
    to: Option<NaiveDate>,
    #[command(flatten)]
    out: OutArg,
}

/// Inputs for a snapshot: the same set `serve` accepts.
#[derive(Debug, Clone, Args)]
struct DataArgs {
    /// Event file, as PATH or RESIDENT=PATH; repeatable.
    #[arg(long)]
    events: Vec<String>,
    /// Profile file (JSONL); repeatable.
    #[arg(long)]
    profiles: Vec<PathBuf>,
    /// Case base (JSON); defaults to the simulated seed cases.
    #[arg(long, env = "ADLSENSE_CASEBASE")]
    casebase: Option<PathBuf>,
    /// Include the built-in simulated residents.
    #[arg(long)]
    demo: bool,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    data: DataArgs,
    /// Resident id; names a bare --events path too.
    #[arg(long)]
    resident: Option<String>,
    /// Profile date; the latest when omitted.
    #[arg(long)]
    date: Option<NaiveDate>,
    /// Print the JSON payload the HTTP API returns.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct RetrieveArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// Number of neighbours; the configured k when omitted.
    #[arg(long)]
    k: Option<i64>,
    /// Ignore the resident's own cases.
    #[arg(long)]
    exclude_self: bool,
}

#[derive(Debug, Args)]
struct TrendArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// Factor name (Sleep, SleepDisturbances, RoomTransitions, Activity, Wandering, Toilet).
    #[arg(long, required_unless_present = "self_similarity")]
    factor: Option<String>,
    /// Report self-similarity instead of a factor series.
    #[arg(long)]
    self_similarity: bool,
    /// Self-similarity window in days.
    #[arg(long)]
    window: Option<i64>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// Comma-separated overlays: risky, history.
    #[arg(long, default_value = "")]
    overlay: String,
    /// Render this factor's trend instead of the radar.
    #[arg(long)]
    factor: Option<String>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    data: DataArgs,
    /// Listen address; the configured one when omitted.
    #[arg(long, env = "ADLSENSE_LISTEN")]
    listen: Option<String>,
    /// Disable cross-origin headers.
    #[arg(long)]
    no_cors: bool,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[command(flatten)]
    day: DayArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LabelArg {
    Risky,
    NotRisky,
    Unlabelled,
}

#[derive(Debug, Args)]
struct CasebaseArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Profile file (JSONL); repeatable.
    #[arg(long)]
    profiles: Vec<PathBuf>,
    /// Label for every case from --profiles.
    #[arg(long, value_enum, default_value = "unlabelled")]
    label: LabelArg,
    /// Who or what assigned the label; required for risky and not-risky.
    #[arg(long, default_value = "")]
    label_source: String,
    /// Add the simulated seed scenarios with their labels.
    #[arg(long)]
    seed_scenarios: bool,
    #[command(flatten)]
    out: OutArg,
}

/// Usage and configuration problems exit 2, everything else 1.
enum Failure {
    Usage(anyhow::Error),
    Domain(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Domain(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn load_config(path: &Path) -> Result<AppConfig, Failure> {
    AppConfig::load(path)
        .with_context(|| format!("configuration {}", path.display()))
        .map_err(usage)
}

fn emit(out: &OutArg, text: &str) -> anyhow::Result<()> {
    match &out.out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn json_line(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string(v).expect("JSON value serializes");
    s.push('\n');
    s
}

fn cmd_simulate(a: SimulateArgs) -> Outcome {
    let config = match &a.config {
        Some(p) => load_config(p)?,
        None => AppConfig::default(),
    };
    if a.list {
        let mut names: Vec<String> = builtin_scenarios().into_iter().map(|s| s.name).collect();
        names.extend(config.scenarios.iter().map(|s| s.name.clone()));
        names.dedup();
        return Ok(emit(&a.out, &(names.join("\n") + "\n"))?);
    }
    let mut scenario = find_scenario(&a.scenario, &config.scenarios).map_err(usage)?;
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    if let Some(days) = a.days {
        scenario.days = days;
    }
    let sim = simulate(&scenario).map_err(usage)?;
    if let Some(path) = &a.truth {
        fs::write(path, sim.truth_jsonl()).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(emit(&a.out, &sim.stream.to_jsonl())?)
}

fn read_day_stream(a: &DayArgs) -> Result<(AppConfig, EventStream, Vec<NaiveDate>), Failure> {
    let config = load_config(&a.config.config)?;
    let source = match &a.resident {
        Some(r) => EventSource {
            resident: r.clone(),
            path: a.events.clone(),
        },
        None => a.events.to_string_lossy().parse().map_err(|e: String| usage(anyhow!(e)))?,
    };
    let stream = load_events(&source)?;
    let dates = adlsense_core::event::covered_dates(&stream, config.day_start().0)
        .into_iter()
        .filter(|d| a.from.is_none_or(|f| *d >= f) && a.to.is_none_or(|t| *d <= t))
        .collect();
    Ok((config, stream, dates))
}

fn cmd_segment(a: DayArgs) -> Outcome {
    let (config, stream, dates) = read_day_stream(&a)?;
    let days = analyse(&stream, &config, Some(&dates))?;
    let text: String = days.iter().map(|d| episodes_to_jsonl(&d.episodes)).collect();
    Ok(emit(&a.out, &text)?)
}

fn cmd_profile(a: DayArgs) -> Outcome {
    let (config, stream, dates) = read_day_stream(&a)?;
    let days = analyse(&stream, &config, Some(&dates))?;
    let profiles: Vec<_> = days.into_iter().map(|d| d.profile).collect();
    Ok(emit(&a.out, &profiles_to_jsonl(&profiles))?)
}

fn cmd_pipeline(a: PipelineArgs) -> Outcome {
    let a = a.day;
    let (config, stream, dates) = read_day_stream(&a)?;
    let days = analyse(&stream, &config, Some(&dates))?;
    let dir = a.out.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let profiles: Vec<_> = days.iter().map(|d| d.profile.clone()).collect();
    let episodes: String = days.iter().map(|d| episodes_to_jsonl(&d.episodes)).collect();
    let risks: String = days
        .iter()
        .map(|d| json_line(&serde_json::to_value(&d.risk).expect("risk serializes")))
        .collect();
    let base = adlsense_core::pipeline::casebase_from_profiles(&config, &profiles).context("case base")?;
    let write = |name: &str, text: &str| {
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    };
    write("episodes.jsonl", &episodes)?;
    write("profiles.jsonl", &profiles_to_jsonl(&profiles))?;
    write("risks.jsonl", &risks)?;
    save_casebase(&base, dir.join("casebase.json")).context("case base")?;
    eprintln!("{} day(s) written to {}", days.len(), dir.display());
    Ok(())
}

fn snapshot_inputs(data: &DataArgs, resident: Option<&str>) -> Result<SnapshotInputs, Failure> {
    let mut events = Vec::new();
    for raw in &data.events {
        let mut source: EventSource = raw.parse().map_err(|e: String| usage(anyhow!(e)))?;
        if let Some(r) = resident.filter(|_| !raw.contains('=')) {
            source.resident = r.to_string();
        }
        events.push(source);
    }
    Ok(SnapshotInputs {
        events,
        profiles: data.profiles.clone(),
        casebase: data.casebase.clone(),
        demo: data.demo,
    })
}

fn load_snapshot(q: &QueryArgs) -> Result<(Snapshot, String), Failure> {
    let config = load_config(&q.config.config)?;
    let inputs = snapshot_inputs(&q.data, q.resident.as_deref())?;
    if inputs.events.is_empty() && inputs.profiles.is_empty() && !inputs.demo {
        return Err(usage(anyhow!("no data: pass --events, --profiles or --demo")));
    }
    let snap = build_snapshot(&config, &inputs)?;
    let resident = match &q.resident {
        Some(r) => r.clone(),
        None if snap.residents.len() == 1 => snap.residents.keys().next().expect("one resident").clone(),
        None => {
            return Err(usage(anyhow!(
                "several residents loaded ({}); pick one with --resident",
                snap.residents.keys().cloned().collect::<Vec<_>>().join(", ")
            )))
        }
    };
    Ok((snap, resident))
}

fn report(e: adlsense_core::report::ReportError) -> Failure {
    if matches!(e, adlsense_core::report::ReportError::InvalidParameter(_)) {
        usage(e)
    } else {
        Failure::Domain(e.into())
    }
}

fn fmt_score(v: &serde_json::Value) -> String {
    v.as_f64().map_or_else(|| "  -  ".to_string(), |s| format!("{s:.3}"))
}

fn cmd_score(q: QueryArgs) -> Outcome {
    let (snap, id) = load_snapshot(&q)?;
    let v = snap.risk_json(&id, q.date).map_err(report)?;
    if q.json {
        return Ok(emit(&q.out, &json_line(&v))?);
    }
    let mut text = format!("{} {}\n", v["resident"].as_str().unwrap_or_default(), v["date"].as_str().unwrap_or_default());
    for f in adlsense_core::risk::RiskFactor::ALL {
        let name = f.to_string();
        let flagged = v["flags"].as_array().is_some_and(|a| a.iter().any(|x| x == name.as_str()));
        let source = &v["sources"][&name];
        text.push_str(&format!(
            "  {:<18} {}  template {}  {}={}{}\n",
            name,
            fmt_score(&v["scores"][&name]),
            fmt_score(&v["template"]["scores"][&name]),
            source["feature"].as_str().unwrap_or_default(),
            source["value"],
            if flagged { "  FLAGGED" } else { "" }
        ));
    }
    Ok(emit(&q.out, &text)?)
}

fn cmd_retrieve(a: RetrieveArgs) -> Outcome {
    let (snap, id) = load_snapshot(&a.query)?;
    let v = snap.similar_json(&id, a.query.date, a.k, a.exclude_self).map_err(report)?;
    if a.query.json {
        return Ok(emit(&a.query.out, &json_line(&v))?);
    }
    let mut text = format!(
        "{} {}: recommendation {} (vote {:.3})\n",
        id, v["date"].as_str().unwrap_or_default(), v["recommendation"].as_str().unwrap_or_default(), v["vote_score"].as_f64().unwrap_or(0.0)
    );
    for n in v["neighbours"].as_array().into_iter().flatten() {
        text.push_str(&format!(
            "  {:<40} {:.4}  {}\n",
            n["case_id"].as_str().unwrap_or_default(),
            n["similarity"].as_f64().unwrap_or(0.0),
            n["label"].as_str().unwrap_or_default()
        ));
    }
    Ok(emit(&a.query.out, &text)?)
}

fn cmd_trend(a: TrendArgs) -> Outcome {
    let (snap, id) = load_snapshot(&a.query)?;
    let (v, key) = if a.self_similarity {
        (snap.self_similarity_json(&id, a.window).map_err(report)?, "self_similarity")
    } else {
        let factor = a.factor.as_deref().expect("clap requires --factor");
        (snap.trend_json(&id, factor).map_err(report)?, "score")
    };
    if a.query.json {
        return Ok(emit(&a.query.out, &json_line(&v))?);
    }
    let mut text = String::new();
    for p in v["points"].as_array().into_iter().flatten() {
        let flagged = p["flagged"].as_bool().or(p["flag"].as_bool()).unwrap_or(false);
        text.push_str(&format!(
            "{}  {}{}\n",
            p["date"].as_str().unwrap_or_default(),
            fmt_score(&p[key]),
            if flagged { "  *" } else { "" }
        ));
    }
    if text.is_empty() {
        text.push_str("insufficient history\n");
    }
    Ok(emit(&a.query.out, &text)?)
}

fn cmd_render(a: RenderArgs) -> Outcome {
    let (snap, id) = load_snapshot(&a.query)?;
    let svg = match &a.factor {
        Some(f) => snap.trend_svg(&id, f).map_err(report)?,
        None => {
            let overlays = parse_overlays(&a.overlay).map_err(usage)?;
            snap.radar_svg(&id, a.query.date, &overlays).map_err(report)?
        }
    };
    Ok(emit(&a.query.out, &svg)?)
}

fn cmd_validate(a: ConfigArg) -> Outcome {
    let config = load_config(&a.config)?;
    println!("{}: ok (fingerprint {})", a.config.display(), config.fingerprint());
    Ok(())
}

fn cmd_build_casebase(a: CasebaseArgs) -> Outcome {
    let config = load_config(&a.config.config)?;
    let mut base = if a.seed_scenarios {
        seed_casebase(&config)?
    } else {
        CaseBase::new(config.schema.clone())
    };
    let label = match a.label {
        LabelArg::Risky => Label::Risky,
        LabelArg::NotRisky => Label::NotRisky,
        LabelArg::Unlabelled => Label::Unlabelled,
    };
    for path in &a.profiles {
        for profile in load_profiles(path, &config)? {
            base.insert(Case {
                case_id: format!("{}:{}", profile.resident_id, profile.date),
                profile,
                context: Default::default(),
                label,
                label_source: a.label_source.clone(),
            })
            .context(path.display().to_string())?;
        }
    }
    if base.is_empty() {
        return Err(usage(anyhow!("no cases: pass --profiles or --seed-scenarios")));
    }
    eprintln!("{} case(s)", base.len());
    Ok(emit(&a.out, &base.to_json())?)
}

fn cmd_serve(a: ServeArgs) -> Outcome {
    let config = load_config(&a.config.config)?;
    let inputs = snapshot_inputs(&a.data, None)?;
    let snapshot = build_snapshot(&config, &inputs)?;
    let config_path = a.config.config.clone();
    let loader: Loader = Arc::new(move || {
        let config = AppConfig::load(&config_path).map_err(|e| e.to_string())?;
        build_snapshot(&config, &inputs).map_err(|e| e.to_string())
    });
    let listen = a.listen.unwrap_or_else(|| config.service.listen.clone());
    let cors = config.service.cors && !a.no_cors;
    eprintln!(
        "serving {} resident(s), fingerprint {}, on http://{listen}",
        snapshot.residents.len(),
        snapshot.fingerprint
    );
    let state = ServiceState::new(Some(snapshot), Some(loader));
    let runtime = tokio::runtime::Runtime::new().context("tokio runtime")?;
    runtime.block_on(async {
        let listener = bind(&listen).await.map_err(usage)?;
        serve(listener, state, cors).await.map_err(|e| Failure::Domain(e.into()))
    })
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Segment(a) => cmd_segment(a),
        Command::Profile(a) => cmd_profile(a),
        Command::Score(a) => cmd_score(a),
        Command::Retrieve(a) => cmd_retrieve(a),
        Command::Trend(a) => cmd_trend(a),
        Command::Render(a) => cmd_render(a),
        Command::Serve(a) => cmd_serve(a),
        Command::ValidateConfig(a) => cmd_validate(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::BuildCasebase(a) => cmd_build_casebase(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("ADLSENSE_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
