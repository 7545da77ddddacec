use crate::config::CliConfig;
use crate::{Cli, Command, DiagnoseArgs, EngineFlags};
use anyhow::{bail, Context, Result};
use fuzzdx_core::dsl::{parse_lexicon, parse_program, print_lexicon, print_program, Lexicon};
use fuzzdx_core::evaluation::{load_dataset, run_benchmark, AblationMode, BenchmarkReport};
use fuzzdx_core::inference::explain;
use fuzzdx_core::kb::{AuditReport, KnowledgeSnapshot, SnapshotDiff, SnapshotStore};
use fuzzdx_core::learning::{parse_stream, write_log, Learner, LogOddsScorer, PassSummary};
use fuzzdx_core::ranking::{CaseIndex, CaseRecord, Diagnosis, EngineConfig, Overrides};
use fuzzdx_core::Symbol;
use serde::Serialize;
use std::fmt::Write;
use std::fs;
use std::path::{Path, PathBuf};

pub fn run(cli: &Cli) -> Result<String> {
    let config = CliConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Parse { file, lexicon, canonical } => parse(file, lexicon.as_deref(), *canonical, cli.json),
        Command::Diagnose(args) => diagnose(args, &config, cli.json),
        Command::Eval { kb, lexicon, data, mode, index, engine } => {
            eval(kb, lexicon.as_deref(), data, &mode.0, index.as_deref(), engine, &config, cli.json)
        }
        Command::Learn { kb, lexicon, stream, out, passes, induce } => {
            learn(kb, lexicon.as_deref(), stream, out, *passes, *induce, &config, cli.json)
        }
        Command::Diff { a, b, store } => diff(a, b, store.as_deref(), cli.json),
        Command::Audit { store, case, t1, t2, index } => {
            audit(store, case, *t1, *t2, index.as_deref(), &config, cli.json)
        }
        Command::Init { kb, lexicon, store } => init(kb, lexicon.as_deref(), store, cli.json),
        Command::Index { cases, out } => index(cases, out, &config, cli.json),
        Command::Serve { store, listen, index, proof_cap } => {
            serve(store, *listen, index.as_deref(), *proof_cap, &config)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// `--lexicon` if given, else `<stem>.lexicon.tsv` beside the KB, else the
/// built-in hedges.
fn resolve_lexicon(kb: &Path, explicit: Option<&Path>) -> Result<Lexicon> {
    let sibling = kb.with_extension("lexicon.tsv");
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None if sibling.is_file() => sibling,
        None => return Ok(Lexicon::default_hedges()),
    };
    parse_lexicon(&read(&path)?).with_context(|| format!("in {}", path.display()))
}

fn load_snapshot(kb: &Path, lexicon: Option<&Path>, version: u64) -> Result<KnowledgeSnapshot> {
    let lexicon = resolve_lexicon(kb, lexicon)?;
    KnowledgeSnapshot::from_kb_text(&read(kb)?, lexicon, version).with_context(|| format!("in {}", kb.display()))
}

fn load_index(path: Option<&Path>) -> Result<Option<CaseIndex>> {
    path.map(|p| CaseIndex::from_jsonl(&read(p)?).with_context(|| format!("in {}", p.display()))).transpose()
}

fn engine_config(base: &EngineConfig, flags: &EngineFlags) -> Result<EngineConfig> {
    let overrides = Overrides {
        alpha: flags.alpha,
        beta: flags.beta,
        gamma: flags.gamma,
        tnorm: flags.tnorm,
        rescale: flags.rescale,
        ..Default::default()
    };
    overrides.validate()?;
    Ok(overrides.apply(base))
}

fn num(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ParseReport {
    rules: usize,
    facts: usize,
    priors: usize,
    content_hash: String,
    rule_ids: Vec<(String, String)>,
}

fn parse(file: &Path, lexicon: Option<&Path>, canonical: bool, json: bool) -> Result<String> {
    let text = read(file)?;
    let program = parse_program(&text).with_context(|| format!("in {}", file.display()))?;
    let snapshot = KnowledgeSnapshot::from_program(program.clone(), resolve_lexicon(file, lexicon)?, 0)?;
    let report = ParseReport {
        rules: program.rules.len(),
        facts: program.facts.len(),
        priors: program.priors.len(),
        content_hash: snapshot.content_hash().to_string(),
        rule_ids: program.rules.iter().map(|r| (r.id.to_string(), r.disease().to_string())).collect(),
    };
    if json {
        return to_json(&report);
    }
    let mut out = format!("{} rules, {} facts, {} priors\n", report.rules, report.facts, report.priors);
    for (id, disease) in &report.rule_ids {
        writeln!(out, "  {id}  {disease}")?;
    }
    writeln!(out, "content hash {}", report.content_hash)?;
    if canonical {
        out.push('\n');
        out.push_str(&print_program(&program.rules, &program.facts, &program.priors));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------

fn parse_symptoms(spec: &str) -> Result<CaseRecord> {
    let mut items = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, weight) = match part.split_once(':') {
            Some((n, w)) => (n.trim(), w.trim().parse::<f64>().with_context(|| format!("weight in `{part}`"))?),
            None => (part, 1.0),
        };
        Symbol::new(name).with_context(|| format!("symptom `{name}`"))?;
        items.push((name, weight));
    }
    Ok(CaseRecord::from_symptoms("cli", &items))
}

fn load_case(path: &Path) -> Result<CaseRecord> {
    let text = read(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("parsing case {}", path.display()))
    } else {
        Ok(CaseRecord::from_text(&path.display().to_string(), &text))
    }
}

fn diagnose(args: &DiagnoseArgs, config: &CliConfig, json: bool) -> Result<String> {
    let mut snapshot = load_snapshot(&args.kb, args.lexicon.as_deref(), 1)?;
    if let Some(p) = &args.priors {
        let program = parse_program(&read(p)?).with_context(|| format!("in {}", p.display()))?;
        if !program.rules.is_empty() || !program.facts.is_empty() {
            bail!("{} may only contain prior clauses", p.display());
        }
        let mut draft = snapshot.draft();
        draft.priors = program.priors;
        snapshot = draft.build(1, snapshot.timestamp())?;
    }
    let mut engine_config = engine_config(&config.engine, &args.engine)?;
    engine_config.use_priors = args.priors_in_kb || args.priors.is_some();
    let index = load_index(args.index.as_deref())?;
    engine_config.use_retrieval = engine_config.use_retrieval && index.is_some();
    let engine = config.engine(engine_config)?;

    let mut case = match (&args.note, &args.case, &args.symptoms) {
        (Some(note), _, _) => CaseRecord::from_text(&note.display().to_string(), &read(note)?),
        (_, Some(case), _) => load_case(case)?,
        (_, _, Some(symptoms)) => parse_symptoms(symptoms)?,
        _ => unreachable!("clap requires one input"),
    };
    if let Some(age) = args.age {
        case.demographics.age = Some(age);
    }
    if let Some(sex) = &args.sex {
        case.demographics.sex = Some(sex.clone());
    }
    if let Some(region) = &args.region {
        case.demographics.region = Some(region.clone());
    }

    let d = engine.diagnose(&case, &snapshot, index.as_ref(), &Overrides::default())?;
    if json {
        return to_json(&d);
    }
    let mut out = diagnosis_table(&d);
    if args.explain {
        for c in &d.candidates {
            out.push('\n');
            out.push_str(&explain(c, case.text.as_deref()));
        }
        writeln!(out, "\n{:<24} {:>8} {:>8} {:>8} {:>10}", "symptom", "text", "retr", "blended", "activation")?;
        for w in &d.weights {
            writeln!(
                out,
                "{:<24} {:>8.4} {:>8.4} {:>8.4} {:>10.4}",
                w.symptom.as_str(),
                w.w_text,
                w.w_retr,
                w.blended,
                w.activation
            )?;
        }
    }
    Ok(out)
}

fn diagnosis_table(d: &Diagnosis) -> String {
    let mut out = format!("snapshot v{} {}\n", d.snapshot_version, &d.content_hash[..12.min(d.content_hash.len())]);
    if d.candidates.is_empty() {
        out.push_str("no rule fired\n");
        return out;
    }
    let _ = writeln!(out, "{:>3}  {:<28} {:>10} {:>10} {:>8} {:>10}", "#", "disease", "activation", "confidence", "prior", "posterior");
    for (i, c) in d.candidates.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>3}  {:<28} {:>10.4} {:>10.4} {:>8} {:>10}",
            i + 1,
            c.disease.as_str(),
            c.activation,
            c.confidence,
            num(c.prior),
            num(c.posterior)
        );
    }
    out
}

// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn eval(
    kb: &Path,
    lexicon: Option<&Path>,
    data: &Path,
    modes: &[AblationMode],
    index: Option<&Path>,
    flags: &EngineFlags,
    config: &CliConfig,
    json: bool,
) -> Result<String> {
    let snapshot = load_snapshot(kb, lexicon, 1)?;
    let cases = load_dataset(data).with_context(|| format!("in {}", data.display()))?;
    let index = load_index(index)?;
    let engine = config.engine(engine_config(&config.engine, flags)?)?;
    let reports: Vec<BenchmarkReport> = modes
        .iter()
        .map(|m| run_benchmark(&snapshot, &cases, index.as_ref(), *m, &engine))
        .collect::<Result<_, _>>()?;
    if json {
        return if reports.len() == 1 { to_json(&reports[0]) } else { to_json(&reports) };
    }
    let mut out = String::new();
    for r in &reports {
        writeln!(out, "mode {}", r.mode)?;
        out.push_str(&r.metrics.to_table());
        if r.verifier.notes > 0 {
            writeln!(
                out,
                "verifier: {} accepted, {} rejected over {} notes",
                r.verifier.accepted, r.verifier.rejected, r.verifier.notes
            )?;
        }
        out.push('\n');
    }
    Ok(out)
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct LearnReport {
    passes: Vec<PassSummary>,
    events: usize,
    version: u64,
    content_hash: String,
    out: PathBuf,
}

#[allow(clippy::too_many_arguments)]
fn learn(
    kb: &Path,
    lexicon: Option<&Path>,
    stream: &Path,
    out_dir: &Path,
    passes: usize,
    induce: bool,
    config: &CliConfig,
    json: bool,
) -> Result<String> {
    let start = load_snapshot(kb, lexicon, 1)?;
    let cases = parse_stream(&read(stream)?).with_context(|| format!("in {}", stream.display()))?;
    let mut learner = Learner::new(&start, config.learner.clone())?;
    let summaries = learner.train(&cases, passes.max(1))?;
    if induce {
        learner.induce(&cases, &LogOddsScorer);
    }
    let fin = learner.snapshot()?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    fs::write(out_dir.join("snapshot.kb"), fin.kb_text())?;
    fs::write(out_dir.join("snapshot.lexicon.tsv"), print_lexicon(fin.lexicon()))?;
    fs::write(out_dir.join("update_log.jsonl"), write_log(learner.log()))?;
    let report = LearnReport {
        passes: summaries,
        events: learner.log().len(),
        version: fin.version(),
        content_hash: fin.content_hash().to_string(),
        out: out_dir.to_path_buf(),
    };
    if json {
        return to_json(&report);
    }
    let mut out = String::new();
    for p in &report.passes {
        writeln!(out, "pass {}: {} events, {} violations", p.pass, p.events, p.violations)?;
    }
    writeln!(out, "{} events; snapshot v{} {} written to {}", report.events, report.version, report.content_hash, out_dir.display())?;
    Ok(out)
}

// ---------------------------------------------------------------------------

fn diff(a: &str, b: &str, store: Option<&Path>, json: bool) -> Result<String> {
    let d = match store {
        Some(dir) => {
            let store = SnapshotStore::open(dir)?;
            let va = a.parse::<u64>().with_context(|| format!("version `{a}`"))?;
            let vb = b.parse::<u64>().with_context(|| format!("version `{b}`"))?;
            store.diff_versions(va, vb)?
        }
        None => {
            let older = load_snapshot(Path::new(a), None, 1)?;
            let newer = load_snapshot(Path::new(b), None, 2)?;
            fuzzdx_core::kb::diff(&older, &newer)?
        }
    };
    if json {
        return to_json(&d);
    }
    Ok(diff_text(&d))
}

fn diff_text(d: &SnapshotDiff) -> String {
    let mut out = format!("v{} → v{}\n", d.from_version, d.to_version);
    if d.is_empty() {
        out.push_str("no changes\n");
        return out;
    }
    for id in &d.removed_rules {
        let _ = writeln!(out, "- rule {id}");
    }
    for r in &d.added_rules {
        let _ = write!(out, "+ rule {}: {}", r.id, print_program(std::slice::from_ref(r), &[], &[]));
    }
    for w in &d.weight_deltas {
        let _ = writeln!(out, "~ rule {} {}: {} → {}", w.rule_id, w.literal, w.old, w.new);
    }
    for l in &d.lexicon_deltas {
        let _ = writeln!(out, "~ lexicon {}: {} → {}", l.term, num(l.old), num(l.new));
    }
    for p in &d.prior_deltas {
        let show = |e: &Option<fuzzdx_core::dsl::PriorEntry>| num(e.as_ref().map(|e| e.prevalence));
        let _ = writeln!(out, "~ prior {:?}: {} → {}", p.key, show(&p.old), show(&p.new));
    }
    out
}

// ---------------------------------------------------------------------------

fn audit(store: &Path, case: &Path, t1: u64, t2: u64, index: Option<&Path>, config: &CliConfig, json: bool) -> Result<String> {
    let store = SnapshotStore::open(store)?;
    let case = load_case(case)?;
    let index = load_index(index)?;
    let mut engine_config = config.engine.clone();
    engine_config.use_retrieval = engine_config.use_retrieval && index.is_some();
    let engine = config.engine(engine_config)?;
    let report: AuditReport = store.audit(&case, t1, t2, index.as_ref(), &engine)?;
    if json {
        return to_json(&report);
    }
    let mut out = format!("v{t1} → v{t2}\n");
    writeln!(out, "{:<28} {:>10} {:>10} {:>10} {:>6} {:>6}", "disease", "t1", "t2", "delta", "rank1", "rank2")?;
    let rank = |r: Option<usize>| r.map_or_else(|| "-".to_string(), |r| r.to_string());
    for c in &report.changes {
        writeln!(
            out,
            "{:<28} {:>10} {:>10} {:>+10.4} {:>6} {:>6}",
            c.disease.as_str(),
            num(c.posterior_t1.or(c.activation_t1)),
            num(c.posterior_t2.or(c.activation_t2)),
            c.delta,
            rank(c.rank_t1),
            rank(c.rank_t2)
        )?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------

fn init(kb: &Path, lexicon: Option<&Path>, dir: &Path, json: bool) -> Result<String> {
    let snapshot = load_snapshot(kb, lexicon, 1)?;
    let store = SnapshotStore::create(dir, snapshot)?;
    let manifests = store.manifests();
    if json {
        return to_json(&manifests[0]);
    }
    Ok(format!("created store {} at v1 {}\n", dir.display(), manifests[0].content_hash))
}

fn index(cases: &Path, out: &Path, config: &CliConfig, json: bool) -> Result<String> {
    let records = load_dataset(cases).with_context(|| format!("in {}", cases.display()))?;
    let engine = config.engine(config.engine.clone())?;
    let mut idx = CaseIndex::new(engine.embedder.dim());
    for c in &records {
        let Some(symptoms) = &c.symptoms else { bail!("case {} has no symptom list", c.id) };
        let names: Vec<Symbol> = symptoms.iter().map(|s| s.name.clone()).collect();
        idx.insert_case(&c.id, &names, &c.labels, engine.embedder.as_ref())?;
    }
    fs::write(out, idx.to_jsonl()).with_context(|| format!("writing {}", out.display()))?;
    if json {
        return to_json(&serde_json::json!({ "cases": idx.len(), "dim": idx.dim(), "out": out }));
    }
    Ok(format!("indexed {} cases (dim {}) into {}\n", idx.len(), idx.dim(), out.display()))
}

fn serve(store: &Path, listen: std::net::SocketAddr, index: Option<&Path>, proof_cap: usize, config: &CliConfig) -> Result<String> {
    let store = SnapshotStore::open(store)?.with_learner(config.learner.clone());
    let index = load_index(index)?;
    let engine = config.engine(config.engine.clone())?;
    let state = fuzzdx_service::AppState::new(store, engine, index).with_proof_cap(proof_cap);
    eprintln!("listening on {listen}");
    tokio::runtime::Runtime::new()?
        .block_on(fuzzdx_service::serve_state(state, listen))
        .map_err(|e| anyhow::anyhow!(e))?;
    Ok(String::new())
}
