//! `collider` — fit leaky noisy-OR collider models to probability
//! judgments and read out reasoning signatures.
//!
//! Every analysis run writes its canonical-JSON report first and only then
//! prints a human summary; failing groups are enumerated on stderr and make
//! the exit code nonzero (1 for per-group failures, 2 for errors that stop
//! a run before any group is analyzed).

mod pipeline;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use collider_core::data::{Dataset, PromptStyle};
use collider_core::params::ColliderParams;
use collider_core::report::{load_report, save_report, Report};
use collider_core::signatures::{DEFAULT_BOOTSTRAP, DEFAULT_EPSILON};
use collider_runner::sweep::{run_sweep, EndpointConfig};
use collider_runner::synthetic::{simulate_agent, SyntheticAgent};
use collider_runner::template::PromptTemplate;

use pipeline::{
    analyze_groups, available_groups, reference_battery, select_groups, AnalysisOptions,
};

#[derive(Parser)]
#[command(
    name = "collider",
    version,
    about = "Fit collider causal models to 0-100 probability judgments and diagnose reasoning signatures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Prompt-style filter for analysis commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StyleFilter {
    Direct,
    Cot,
    All,
}

impl StyleFilter {
    fn as_option(self) -> Option<PromptStyle> {
        match self {
            StyleFilter::Direct => Some(PromptStyle::Direct),
            StyleFilter::Cot => Some(PromptStyle::Cot),
            StyleFilter::All => None,
        }
    }
}

/// Elicitation style for collection commands, where "all" is meaningless.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StyleArg {
    Direct,
    Cot,
}

impl From<StyleArg> for PromptStyle {
    fn from(style: StyleArg) -> Self {
        match style {
            StyleArg::Direct => PromptStyle::Direct,
            StyleArg::Cot => PromptStyle::Cot,
        }
    }
}

#[derive(Args)]
struct SelectArgs {
    /// Input dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Agent-id glob; `*` and `?` wildcards.
    #[arg(long, default_value = "*")]
    agent: String,
    /// Restrict the selection to one prompt style.
    #[arg(long, value_enum, default_value_t = StyleFilter::All)]
    prompt_style: StyleFilter,
}

#[derive(Subcommand)]
enum Command {
    /// Fit both model variants per agent group and select by AIC.
    Fit {
        #[command(flatten)]
        select: SelectArgs,
        /// Report JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Seed for the optimizer's random starts and the bootstrap.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Per-group reasoning signatures: EA, MV, bootstrap CIs, LOOCV R².
    Diagnose {
        #[command(flatten)]
        select: SelectArgs,
        /// Report JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Markov-violation threshold on the normalized scale.
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        /// Bootstrap replicates per task.
        #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Agent id whose battery serves as the Spearman reference.
        #[arg(long)]
        reference: Option<String>,
    },
    /// Side-by-side comparison of two agents' batteries.
    Compare {
        #[command(flatten)]
        select: SelectArgs,
        /// Agent id to compare against (side B; --agent names side A).
        #[arg(long)]
        reference: String,
        /// Report JSON path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample a synthetic dataset from known collider parameters.
    Simulate {
        /// Leak probability b.
        #[arg(long)]
        b: f64,
        /// Causal strength of C1.
        #[arg(long)]
        m1: f64,
        /// Causal strength of C2.
        #[arg(long)]
        m2: f64,
        /// Shared cause prior p(C).
        #[arg(long)]
        pc: f64,
        /// Gaussian response noise on the probability scale.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// Responses per task.
        #[arg(long, default_value_t = 20)]
        repeats: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Agent id recorded in the dataset.
        #[arg(long, default_value = "synthetic")]
        agent: String,
        /// Output dataset CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Collect the eleven-task battery from a chat-completion endpoint.
    RunAgent {
        /// Base URL, e.g. http://localhost:8080/v1.
        #[arg(long)]
        endpoint: String,
        /// Model name sent with every request.
        #[arg(long)]
        model: String,
        /// Prompt-skeleton file; the built-in template when omitted.
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = StyleArg::Direct)]
        prompt_style: StyleArg,
        /// Requests per task.
        #[arg(long, default_value_t = 3)]
        repeats: u32,
        /// Bound on simultaneously outstanding requests.
        #[arg(long, default_value_t = 4)]
        max_in_flight: usize,
        /// Environment variable holding the bearer token; skipped if unset.
        #[arg(long, default_value = "COLLIDER_API_KEY")]
        api_key_env: String,
        /// Agent id recorded in the dataset; defaults to the model name.
        #[arg(long)]
        agent: Option<String>,
        /// Content-domain label recorded in the dataset.
        #[arg(long, default_value = "neutral")]
        domain: String,
        /// Output dataset CSV.
        #[arg(long)]
        out: PathBuf,
        /// Raw JSONL transcript; defaults to the output path with .jsonl.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Render a saved report to an SVG figure.
    Report {
        /// Saved report JSON (from fit, diagnose, or compare).
        #[arg(long)]
        data: PathBuf,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Fit { select, out, seed } => {
            let opts = AnalysisOptions {
                epsilon: DEFAULT_EPSILON,
                bootstrap: DEFAULT_BOOTSTRAP,
                seed,
                reference_means: None,
            };
            let (report, failures) = analyze_to_file(&select, &out, opts)?;
            print_fit_summary(&report, &out);
            Ok(exit_for(&failures))
        }
        Command::Diagnose {
            select,
            out,
            epsilon,
            bootstrap,
            seed,
            reference,
        } => {
            let dataset = load_dataset(&select.data)?;
            let reference_means = match &reference {
                Some(agent) => Some(reference_battery(
                    &dataset,
                    agent,
                    select.prompt_style.as_option(),
                )?),
                None => None,
            };
            let opts = AnalysisOptions {
                epsilon,
                bootstrap,
                seed,
                reference_means,
            };
            let (report, failures) = analyze_dataset(&dataset, &select, &out, opts)?;
            print_diagnose_summary(&report, epsilon, &out);
            Ok(exit_for(&failures))
        }
        Command::Compare {
            select,
            reference,
            out,
            epsilon,
            bootstrap,
            seed,
        } => cmd_compare(select, reference, out, epsilon, bootstrap, seed),
        Command::Simulate {
            b,
            m1,
            m2,
            pc,
            sigma,
            repeats,
            seed,
            agent,
            out,
        } => {
            let params = ColliderParams::new(b, m1, m2, pc).map_err(|e| e.to_string())?;
            let agent = SyntheticAgent::new(agent, params, sigma, seed).map_err(|e| e.to_string())?;
            let dataset = simulate_agent(&agent, repeats).map_err(|e| e.to_string())?;
            dataset.write_csv(&out).map_err(|e| e.to_string())?;
            println!(
                "wrote {} ({} records, sigma={sigma}, seed={seed})",
                out.display(),
                dataset.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::RunAgent {
            endpoint,
            model,
            template,
            prompt_style,
            repeats,
            max_in_flight,
            api_key_env,
            agent,
            domain,
            out,
            transcript,
        } => cmd_run_agent(
            endpoint,
            model,
            template,
            prompt_style.into(),
            repeats,
            max_in_flight,
            api_key_env,
            agent,
            domain,
            out,
            transcript,
        ),
        Command::Report { data, out } => {
            let report = load_report(&data).map_err(|e| e.to_string())?;
            let svg = plot::render_svg(&report);
            collider_core::fsutil::write_atomic(&out, svg.as_bytes())
                .map_err(|e| format!("cannot write {}: {e}", out.display()))?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_dataset(path: &Path) -> Result<Dataset, String> {
    Dataset::load_csv(path).map_err(|e| e.to_string())
}

/// Selection + analysis + report write, for commands that start from a path.
fn analyze_to_file(
    select: &SelectArgs,
    out: &Path,
    opts: AnalysisOptions,
) -> Result<(Report, Vec<(String, String)>), String> {
    let dataset = load_dataset(&select.data)?;
    analyze_dataset(&dataset, select, out, opts)
}

/// Runs the per-group pipeline over the selection and writes the report —
/// before any human-readable output, even when some groups failed.
fn analyze_dataset(
    dataset: &Dataset,
    select: &SelectArgs,
    out: &Path,
    opts: AnalysisOptions,
) -> Result<(Report, Vec<(String, String)>), String> {
    let groups = select_groups(dataset, &select.agent, select.prompt_style.as_option());
    if groups.is_empty() {
        return Err(format!(
            "no agent group matches --agent {:?} --prompt-style {:?}; available groups: {}",
            select.agent,
            match select.prompt_style.as_option() {
                Some(s) => s.to_string(),
                None => "all".to_string(),
            },
            available_groups(dataset).join(", ")
        ));
    }
    let (reports, failures) = analyze_groups(&groups, &opts);
    let report = Report::Agents { groups: reports };
    save_report(&report, out).map_err(|e| e.to_string())?;
    for (key, message) in &failures {
        eprintln!("group {key}: {message}");
    }
    Ok((report, failures))
}

fn exit_for(failures: &[(String, String)]) -> ExitCode {
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn print_fit_summary(report: &Report, out: &Path) {
    let Report::Agents { groups } = report else {
        return;
    };
    println!("wrote {} ({} group(s))", out.display(), groups.len());
    for g in groups {
        let p = &g.fit.params;
        println!(
            "{}/{}/{}  {}  b={} m1={} m2={} pC={}  rss={}  aic={}  loocv_r2={}",
            g.agent_id,
            g.prompt_style,
            g.content_domain,
            g.fit.variant,
            p.leak(),
            p.strength_c1(),
            p.strength_c2(),
            p.prior(),
            g.fit.rss,
            g.fit.aic,
            g.consistency.loocv_r2,
        );
    }
}

fn print_diagnose_summary(report: &Report, epsilon: f64, out: &Path) {
    let Report::Agents { groups } = report else {
        return;
    };
    println!("wrote {} ({} group(s))", out.display(), groups.len());
    for g in groups {
        let s = &g.signatures;
        let mv = if s.mv_flag {
            format!("{} (flagged, epsilon={epsilon})", s.mv_magnitude)
        } else {
            format!("{}", s.mv_magnitude)
        };
        let reference = match s.spearman_vs_reference {
            Some(rho) => format!("  spearman_vs_reference={rho}"),
            None => String::new(),
        };
        println!(
            "{}/{}/{}  EA={}  MV={mv}  loocv_r2={}{reference}",
            g.agent_id, g.prompt_style, g.content_domain, s.ea, s.loocv_r2,
        );
    }
}

fn cmd_compare(
    select: SelectArgs,
    reference: String,
    out: PathBuf,
    epsilon: f64,
    bootstrap: usize,
    seed: u64,
) -> Result<ExitCode, String> {
    let dataset = load_dataset(&select.data)?;
    let style = select.prompt_style.as_option();

    let side = |selector: &str, label: &str| -> Result<_, String> {
        let groups = select_groups(&dataset, selector, style);
        match groups.len() {
            0 => Err(format!(
                "{label} selector {selector:?} matched no group; available groups: {}",
                available_groups(&dataset).join(", ")
            )),
            1 => Ok(groups.into_iter().next().expect("length checked")),
            n => Err(format!(
                "{label} selector {selector:?} matched {n} groups; it must identify exactly one"
            )),
        }
    };
    let group_a = side(&select.agent, "--agent")?;
    let group_b = side(&reference, "--reference")?;

    let battery = |group: &collider_core::data::AgentGroup| -> Result<[f64; 11], String> {
        let obs = collider_core::estimator::TaskObservations::from_pairs(
            group.normalized_judgments(),
        )
        .map_err(|e| format!("group {}: {e}", group.key))?;
        obs.complete_means()
            .map_err(|e| format!("group {}: {e}", group.key))
    };
    let battery_a = battery(&group_a)?;
    let battery_b = battery(&group_b)?;

    let rho = collider_core::signatures::spearman(&battery_a, &battery_b).map_err(|e| {
        format!(
            "spearman({}, {}): {e}",
            group_a.key.agent_id, group_b.key.agent_id
        )
    })?;

    let analyze = |group, battery| {
        let opts = AnalysisOptions {
            epsilon,
            bootstrap,
            seed,
            reference_means: Some(battery),
        };
        pipeline::analyze_group(group, &opts)
    };
    let report_a = analyze(&group_a, battery_b).map_err(|e| format!("group {}: {e}", group_a.key))?;
    let report_b = analyze(&group_b, battery_a).map_err(|e| format!("group {}: {e}", group_b.key))?;

    let compare = collider_core::report::CompareReport::new(rho, report_a, report_b);
    let report = Report::Compare(compare);
    save_report(&report, &out).map_err(|e| e.to_string())?;

    let Report::Compare(c) = &report else {
        unreachable!();
    };
    println!("wrote {}", out.display());
    println!(
        "spearman({}, {}) = {}",
        c.agent_a.agent_id, c.agent_b.agent_id, c.spearman
    );
    let mut deltas = c.per_task_delta.clone();
    deltas.sort_by(|x, y| y.delta.abs().total_cmp(&x.delta.abs()));
    for d in deltas.iter().take(3) {
        println!("  {}  mean_a={}  mean_b={}  delta={}", d.task, d.mean_a, d.mean_b, d.delta);
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_run_agent(
    endpoint: String,
    model: String,
    template_path: Option<PathBuf>,
    style: PromptStyle,
    repeats: u32,
    max_in_flight: usize,
    api_key_env: String,
    agent: Option<String>,
    domain: String,
    out: PathBuf,
    transcript: Option<PathBuf>,
) -> Result<ExitCode, String> {
    let template = match template_path {
        Some(path) => PromptTemplate::from_file(style, &path).map_err(|e| e.to_string())?,
        None => PromptTemplate::default_for(style),
    };
    let mut config = EndpointConfig::new(endpoint, model.clone());
    config.api_key_env = Some(api_key_env);
    config.max_in_flight = max_in_flight;
    config.timeout = Duration::from_secs(120);

    let agent_id = agent.unwrap_or_else(|| model.clone());
    let transcript_path = transcript.unwrap_or_else(|| out.with_extension("jsonl"));

    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let outcome = runtime
        .block_on(run_sweep(
            &config,
            &template,
            repeats,
            &agent_id,
            &domain,
            &transcript_path,
        ))
        .map_err(|e| e.to_string())?;

    outcome.dataset.write_csv(&out).map_err(|e| e.to_string())?;
    println!(
        "wrote {} ({} records) and transcript {}",
        out.display(),
        outcome.dataset.len(),
        transcript_path.display()
    );
    for failure in &outcome.failures {
        eprintln!(
            "request {} trial {}: {:?}: {}",
            failure.task_id, failure.trial_index, failure.kind, failure.message
        );
    }
    if outcome.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}
