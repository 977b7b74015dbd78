use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use tropical_supertree::bigm::{format_rational, parse_rational, Rational};
use tropical_supertree::fermat_weber::{config_threshold, FwError};
use tropical_supertree::phylo::{parse_forest, rooted_triplets, tree_to_ultrametric, LengthFormat, PhyloTree, Taxon};
use tropical_supertree::supertree::{
    extend_ultrametric, pareto_audit, safe_numeric_m, topology_stability_probe, tropical_supertree, Mode,
    SupertreeError, SupertreeProblem, SupertreeResult,
};
use tropical_supertree::{fermat_weber, BigM, PointConfig, TorusPoint};

/// Tropical Fermat-Weber medians and supertrees with exact big-M arithmetic.
#[derive(Parser, Debug)]
#[command(name = "tropsuper", version)]
struct Cli {
    /// Worker threads for parallel steps (defaults to all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tropical supertree of equidistant trees (one Newick tree per line).
    Supertree(SupertreeArgs),
    /// Tropical median consensus tree; all trees must share their taxa.
    Consensus(SupertreeArgs),
    /// Fermat-Weber set and tropical median of a point configuration.
    Median(MedianArgs),
    /// Extended ultrametrics of the input trees as JSON.
    Matrix(MatrixArgs),
    /// Rooted triplets displayed by each input tree.
    Triplets(TreesArgs),
    /// Checks that a tree displays every nesting common to the inputs.
    CheckPareto(CheckParetoArgs),
    /// Stabilization threshold of a point configuration, or bounds for trees.
    Threshold(ThresholdArgs),
}

#[derive(Args, Debug)]
struct ModeArgs {
    /// Keep M as a symbol (the default).
    #[arg(long, conflicts_with = "at")]
    symbolic: bool,
    /// Substitute a number for M: a rational literal, or `auto` for the
    /// bound guaranteeing the stable answer.
    #[arg(long, value_name = "M0")]
    at: Option<String>,
}

#[derive(Args, Debug)]
struct TreesArgs {
    /// Newick file, `;`-terminated trees.
    file: PathBuf,
    /// Stretch every tree to the largest input height.
    #[arg(long)]
    rescale_heights: bool,
}

#[derive(Args, Debug)]
struct SupertreeArgs {
    #[command(flatten)]
    trees: TreesArgs,
    #[command(flatten)]
    mode: ModeArgs,
    /// Audit the output for nestings common to all inputs.
    #[arg(long)]
    audit_pareto: bool,
    /// Extra nesting to audit, written `a,b<c,d`; implies --audit-pareto.
    #[arg(long = "nesting", value_name = "X<Y")]
    nestings: Vec<String>,
    /// Compare topologies at these numeric values of M with the symbolic run.
    #[arg(long, value_delimiter = ',', value_name = "M1,M2,...")]
    probe: Vec<String>,
    /// Write diagnostics to this file.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// Print lengths as decimals with this many places.
    #[arg(long, value_name = "K")]
    decimal: Option<usize>,
}

#[derive(Args, Debug)]
struct MedianArgs {
    /// Point configuration: one point per line, entries separated by
    /// whitespace or commas, `#` starts a comment.
    file: PathBuf,
    #[command(flatten)]
    mode: ModeArgs,
    /// Print coordinates as decimals with this many places.
    #[arg(long, value_name = "K")]
    decimal: Option<usize>,
}

#[derive(Args, Debug)]
struct MatrixArgs {
    #[command(flatten)]
    trees: TreesArgs,
    #[command(flatten)]
    mode: ModeArgs,
}

#[derive(Args, Debug)]
struct CheckParetoArgs {
    /// Input trees.
    inputs: PathBuf,
    /// File holding the single tree to audit.
    output: PathBuf,
    /// Extra nesting to audit, written `a,b<c,d`.
    #[arg(long = "nesting", value_name = "X<Y")]
    nestings: Vec<String>,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    file: PathBuf,
    /// Read Newick trees instead of a point configuration.
    #[arg(long)]
    trees: bool,
    #[arg(long, requires = "trees")]
    rescale_heights: bool,
}

/// Failures split by exit status: bad input (1) or a broken invariant (2).
enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

impl From<SupertreeError> for Failure {
    fn from(e: SupertreeError) -> Self {
        if e.is_internal() {
            Failure::Internal(e.into())
        } else {
            Failure::Input(e.into())
        }
    }
}

impl From<FwError> for Failure {
    fn from(e: FwError) -> Self {
        match e {
            FwError::Internal(_) => Failure::Internal(e.into()),
            _ => Failure::Input(e.into()),
        }
    }
}

type Outcome = Result<String, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot start {jobs} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Supertree(args) => supertree(args, false),
        Command::Consensus(args) => supertree(args, true),
        Command::Median(args) => median(args),
        Command::Matrix(args) => matrix(args),
        Command::Triplets(args) => triplets(args),
        Command::CheckPareto(args) => check_pareto(args),
        Command::Threshold(args) => threshold(args),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_trees(path: &Path) -> anyhow::Result<Vec<PhyloTree>> {
    let text = read(path)?;
    let trees = parse_forest(&text, true).map_err(|(line, e)| anyhow!("{}: line {line}: {e}", path.display()))?;
    if trees.is_empty() {
        bail!("{}: no trees found", path.display());
    }
    Ok(trees)
}

fn rational(text: &str) -> anyhow::Result<Rational> {
    parse_rational(text.trim()).map_err(|e| anyhow!("invalid number `{text}`: {e}"))
}

/// `None` means "auto".
fn requested_mode(args: &ModeArgs) -> anyhow::Result<Option<Mode>> {
    match args.at.as_deref() {
        None => Ok(Some(Mode::Symbolic)),
        Some("auto") => Ok(None),
        Some(text) => Ok(Some(Mode::Numeric(rational(text)?))),
    }
}

fn tree_mode(args: &ModeArgs, trees: &[PhyloTree], rescale: bool) -> Result<Mode, Failure> {
    match requested_mode(args)? {
        Some(mode) => Ok(mode),
        None => {
            let problem = SupertreeProblem::new(trees.to_vec(), Mode::Symbolic, rescale)?;
            Ok(Mode::Numeric(safe_numeric_m(problem.trees(), problem.taxa().len())?))
        }
    }
}

fn parse_nesting(text: &str) -> anyhow::Result<(Vec<Taxon>, Vec<Taxon>)> {
    let (x, y) = text.split_once('<').ok_or_else(|| anyhow!("nesting `{text}` must look like `a,b<c`"))?;
    let side = |s: &str| -> anyhow::Result<Vec<Taxon>> {
        let taxa = s
            .split(',')
            .map(|t| Taxon::new(t.trim()).map_err(|e| anyhow!("nesting `{text}`: {e}")))
            .collect::<anyhow::Result<Vec<_>>>()?;
        Ok(taxa)
    };
    Ok((side(x)?, side(y)?))
}

fn length_format(decimal: Option<usize>) -> LengthFormat {
    decimal.map_or(LengthFormat::Symbolic, LengthFormat::SymbolicDecimal)
}

fn scalar(x: &BigM, decimal: Option<usize>) -> String {
    decimal.map_or_else(|| x.to_string(), |k| x.to_decimal_string(k))
}

fn point(x: &TorusPoint, decimal: Option<usize>) -> String {
    let parts: Vec<String> = x.coords().iter().map(|c| scalar(c, decimal)).collect();
    format!("({})", parts.join(", "))
}

fn mode_label(mode: &Mode) -> String {
    match mode {
        Mode::Symbolic => "symbolic".into(),
        Mode::Numeric(m0) => format!("numeric M = {}", format_rational(m0)),
    }
}

fn supertree(args: SupertreeArgs, consensus: bool) -> Outcome {
    let nestings = args.nestings.iter().map(|s| parse_nesting(s)).collect::<anyhow::Result<Vec<_>>>()?;
    let samples = args.probe.iter().map(|s| rational(s)).collect::<anyhow::Result<Vec<_>>>()?;
    let trees = read_trees(&args.trees.file)?;
    let rescale = args.trees.rescale_heights;
    let mode = tree_mode(&args.mode, &trees, rescale)?;
    let problem = if consensus {
        SupertreeProblem::consensus(trees.clone(), mode, rescale)?
    } else {
        SupertreeProblem::new(trees.clone(), mode, rescale)?
    };
    let result = tropical_supertree(&problem)?;
    let newick = result.supertree.to_newick_with(&length_format(args.decimal));

    let mut report = supertree_report(&problem, &result, args.decimal);
    let mut broken = Vec::new();
    if args.audit_pareto || !nestings.is_empty() {
        let audit = pareto_audit(problem.trees(), &result.supertree, &nestings)?;
        let _ = write!(report, "pareto audit:\n{audit}");
        if !audit.passed() {
            broken.push(format!("{} common nestings are not displayed", audit.failures().count()));
        }
    }
    if !samples.is_empty() {
        let base = SupertreeProblem::new(problem.trees().to_vec(), Mode::Symbolic, false)?;
        let probe = topology_stability_probe(&base, &samples)?;
        let _ = write!(report, "stability probe:\n{probe}");
        if !probe.identical() {
            broken.push("topology differs between symbolic and numeric runs".into());
        }
    }
    if let Some(path) = &args.report {
        fs::write(path, &report).with_context(|| format!("cannot write {}", path.display()))?;
    }
    if !broken.is_empty() {
        if args.report.is_none() {
            eprint!("{report}");
        }
        return Err(Failure::Internal(anyhow!(broken.join("; "))));
    }
    Ok(format!("{newick}\n"))
}

fn supertree_report(problem: &SupertreeProblem, result: &SupertreeResult, decimal: Option<usize>) -> String {
    let mut out = String::new();
    let taxa: Vec<&str> = problem.taxa().iter().map(Taxon::as_str).collect();
    let _ = writeln!(out, "mode: {}", mode_label(problem.mode()));
    let _ = writeln!(out, "trees: {}", problem.trees().len());
    let _ = writeln!(out, "taxa: {}", taxa.join(" "));
    let _ = writeln!(out, "objective: {}", scalar(result.objective(), decimal));
    if let Some(t) = &result.stabilization_threshold {
        let _ = writeln!(out, "stabilization threshold: {}", format_rational(t));
    }
    match &result.safe_m {
        Some(m) => {
            let _ = writeln!(out, "safe M: {}", format_rational(m));
        }
        None => {
            let _ = writeln!(out, "safe M: undefined for symbolic input lengths");
        }
    }
    let _ = writeln!(out, "covector graph: {}", result.graph());
    let _ = writeln!(out, "vertices: {}", result.fermat_weber.vertices.len());
    for v in result.vertices() {
        let parts: Vec<String> = v.iter().map(|x| scalar(x, decimal)).collect();
        let _ = writeln!(out, "  ({})", parts.join(", "));
    }
    let _ = writeln!(out, "median ultrametric:");
    let n = result.median.len();
    for i in 0..n {
        for j in i + 1..n {
            let _ = writeln!(out, "  {} {} {}", taxa[i], taxa[j], scalar(result.median.get(i, j), decimal));
        }
    }
    let _ = writeln!(out, "supertree: {}", result.supertree.to_newick_with(&length_format(decimal)));
    out
}

fn median(args: MedianArgs) -> Outcome {
    let text = read(&args.file)?;
    let config = PointConfig::parse(&text).map_err(|e| anyhow!("{}: {e}", args.file.display()))?;
    let mode = match requested_mode(&args.mode)? {
        Some(mode) => mode,
        None => Mode::Numeric(config_threshold(&config)? + Rational::from_integer(1.into())),
    };
    let config = match &mode {
        Mode::Symbolic => config,
        Mode::Numeric(m0) => config.eval(m0),
    };
    let result = fermat_weber(&config)?;
    let mut out = String::new();
    let _ = writeln!(out, "mode: {}", mode_label(&mode));
    let _ = writeln!(out, "vertices:");
    for v in &result.vertices {
        let _ = writeln!(out, "  {}", point(v, args.decimal));
    }
    let _ = writeln!(out, "median: {}", point(&result.median, args.decimal));
    let _ = writeln!(out, "objective: {}", scalar(&result.objective, args.decimal));
    let _ = writeln!(out, "graph: {}", result.graph);
    Ok(out)
}

fn matrix(args: MatrixArgs) -> Outcome {
    let trees = read_trees(&args.trees.file)?;
    let mode = tree_mode(&args.mode, &trees, args.trees.rescale_heights)?;
    let problem = SupertreeProblem::new(trees, mode, args.trees.rescale_heights)?;
    let taxa = problem.taxa();
    let n = taxa.len();
    let pairs: Vec<[&str; 2]> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| [taxa[i].as_str(), taxa[j].as_str()])).collect();
    let mut rows = Vec::new();
    for (k, tree) in problem.trees().iter().enumerate() {
        let d = extend_ultrametric(tree, taxa, problem.mode())?;
        rows.push(serde_json::json!({
            "tree": k + 1,
            "newick": tree.to_newick(),
            "values": d.values().iter().map(ToString::to_string).collect::<Vec<_>>(),
        }));
    }
    let doc = serde_json::json!({
        "mode": mode_label(problem.mode()),
        "taxa": taxa.iter().map(Taxon::as_str).collect::<Vec<_>>(),
        "pairs": pairs,
        "ultrametrics": rows,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Internal(e.into()))?;
    Ok(format!("{text}\n"))
}

fn triplets(args: TreesArgs) -> Outcome {
    let trees = read_trees(&args.file)?;
    let problem = SupertreeProblem::new(trees, Mode::Symbolic, args.rescale_heights)?;
    let mut out = String::new();
    for (k, tree) in problem.trees().iter().enumerate() {
        let d = tree_to_ultrametric(tree).map_err(|e| anyhow!("tree {}: {e}", k + 1))?;
        let list: Vec<String> = rooted_triplets(&d).iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "tree {}: {}", k + 1, list.join(" "));
    }
    Ok(out)
}

fn check_pareto(args: CheckParetoArgs) -> Outcome {
    let nestings = args.nestings.iter().map(|s| parse_nesting(s)).collect::<anyhow::Result<Vec<_>>>()?;
    let inputs = read_trees(&args.inputs)?;
    let outputs = read_trees(&args.output)?;
    let [output] = outputs.as_slice() else {
        return Err(anyhow!("{}: expected exactly one tree, found {}", args.output.display(), outputs.len()).into());
    };
    let report = pareto_audit(&inputs, output, &nestings)?;
    if report.passed() {
        Ok(report.to_string())
    } else {
        print!("{report}");
        Err(anyhow!("{} common nestings are not displayed", report.failures().count()).into())
    }
}

fn threshold(args: ThresholdArgs) -> Outcome {
    if args.trees {
        let trees = read_trees(&args.file)?;
        let problem = SupertreeProblem::new(trees, Mode::Symbolic, args.rescale_heights)?;
        let config = problem.point_config()?;
        let stable = config_threshold(&config)?;
        let bound = safe_numeric_m(problem.trees(), problem.taxa().len())?;
        return Ok(format!(
            "stabilization threshold: {}\nsafe M: {}\n",
            format_rational(&stable),
            format_rational(&bound)
        ));
    }
    let text = read(&args.file)?;
    let config = PointConfig::parse(&text).map_err(|e| anyhow!("{}: {e}", args.file.display()))?;
    Ok(format!("{}\n", format_rational(&config_threshold(&config)?)))
}
