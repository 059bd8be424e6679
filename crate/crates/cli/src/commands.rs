use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;
use trecdl::baseline_search::{generate_candidates, InvertedIndex};
use trecdl::judging::{build_pool, median_reciprocal_ranks, select_candidate_topics, SessionConfig};
use trecdl::metrics::{evaluate_run, write_reports_tsv, Metric, RelevancePolicy};
use trecdl::rank_analysis::{metric_agreement, ndcg_vector_matrix, per_query_delta};
use trecdl::relevance_model::{FeatureSpace, TfIdfLogistic};
use trecdl::simulation::{
    budget_experiment, lou_experiment, simulate_trial, write_budget_tsv, write_lou_tsv, BudgetRow, OfficialReference,
    OracleJudge, SimulationInput, StoppingCriterion, TrialConfig,
};
use trecdl::synthetic::{generate, SyntheticSpec};
use trecdl::trec_io::{
    parse_corpus, parse_qrels, parse_run, parse_run_metadata, parse_topics, save_qrels, save_run, Corpus, MemoryCorpus,
    QrelsSet, RunFile, TopicId,
};
use trecdl::{Bm25Params, MetricReport, Rm3Params};

use crate::manifest::Recorder;
use crate::{
    BudgetsArgs, CollectionArgs, CompareArgs, CriterionArgs, CriterionKind, EvalSetArgs, EvaluateArgs, IndexArgs,
    LouArgs, PlotDataArgs, PoolArgs, Report, SearchArgs, ServeArgs, SimulateArgs, SynthArgs, Usage, ValidateArgs,
};

fn tsv(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn load_runs(paths: &[PathBuf], rec: &mut Recorder) -> Result<Vec<RunFile>> {
    let mut runs = Vec::with_capacity(paths.len());
    for p in paths {
        let (run, _) = parse_run(p).with_context(|| format!("reading run {}", p.display()))?;
        if runs.iter().any(|r: &RunFile| r.tag() == run.tag()) {
            bail!("two runs share the tag `{}`", run.tag());
        }
        rec.input(p);
        runs.push(run);
    }
    Ok(runs)
}

fn load_qrels(path: &Path, rec: &mut Recorder) -> Result<QrelsSet> {
    rec.input(path);
    parse_qrels(path).with_context(|| format!("reading qrels {}", path.display()))
}

/// Topic ids, one per line; blank lines and `#` comments are skipped.
fn load_topic_list(path: &Path, rec: &mut Recorder) -> Result<Vec<TopicId>> {
    rec.input(path);
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut ids: Vec<TopicId> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| TopicId::from(l.split_whitespace().next().unwrap_or(l)))
        .collect();
    ids.sort();
    ids.dedup();
    Ok(ids)
}

struct EvalSet {
    runs: Vec<RunFile>,
    qrels: QrelsSet,
    topics: Vec<TopicId>,
    policy: RelevancePolicy,
}

impl EvalSet {
    fn load(a: &EvalSetArgs, rec: &mut Recorder) -> Result<Self> {
        let runs = load_runs(&a.run, rec)?;
        let qrels = load_qrels(&a.qrels, rec)?;
        let topics = match &a.eval_topics {
            Some(p) => load_topic_list(p, rec)?,
            None => qrels.topic_ids().cloned().collect(),
        };
        if topics.is_empty() {
            bail!("no evaluation topics");
        }
        Ok(Self {
            runs,
            qrels,
            topics,
            policy: RelevancePolicy::for_task(a.task),
        })
    }

    fn reports(&self, sparse: Option<&QrelsSet>) -> Result<Vec<MetricReport>> {
        self.runs
            .iter()
            .map(|r| evaluate_run::<f64>(r, &self.qrels, sparse, &self.policy, &self.topics).with_context(|| format!("evaluating {}", r.tag())))
            .collect()
    }
}

#[derive(Debug, Serialize)]
struct FileCheck {
    kind: &'static str,
    path: PathBuf,
    ok: bool,
    summary: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl FileCheck {
    fn of(kind: &'static str, path: &Path, result: Result<(String, Vec<String>)>) -> Self {
        let (ok, summary, warnings, error) = match result {
            Ok((summary, warnings)) => (true, summary, warnings, None),
            Err(e) => (false, String::new(), Vec::new(), Some(format!("{e:#}"))),
        };
        Self {
            kind,
            path: path.to_path_buf(),
            ok,
            summary,
            warnings,
            error,
        }
    }
}

pub fn validate(out: &Path, a: ValidateArgs) -> Result<Report> {
    let mut rec = Recorder::new(out, "validate", &a)?;
    let mut checks = Vec::new();
    let mut run_tags = Vec::new();
    for p in &a.run {
        let r = parse_run(p).map_err(Into::into).map(|(run, warnings)| {
            run_tags.push(run.tag().to_owned());
            let n_topics = run.topic_ids().count();
            (
                format!("tag {}, {} topics, {} lines", run.tag(), n_topics, run.len()),
                warnings.iter().map(|w| format!("topic {}: {}", w.topic_id, w.message)).collect(),
            )
        });
        checks.push(FileCheck::of("run", p, r));
    }
    for p in &a.qrels {
        let r = parse_qrels(p)
            .map_err(Into::into)
            .map(|q| (format!("{} topics, {} judgments", q.topic_ids().count(), q.len()), Vec::new()));
        checks.push(FileCheck::of("qrels", p, r));
    }
    for p in &a.topics {
        let r = parse_topics(p).map_err(Into::into).map(|t| (format!("{} topics", t.len()), Vec::new()));
        checks.push(FileCheck::of("topics", p, r));
    }
    for p in &a.corpus {
        let r = parse_corpus(p, a.task).map_err(anyhow::Error::from).and_then(|reader| {
            let mut n = 0usize;
            for record in reader {
                record?;
                n += 1;
            }
            Ok((format!("{n} {} records", a.task), Vec::new()))
        });
        checks.push(FileCheck::of("corpus", p, r));
    }
    for p in &a.meta {
        let r = parse_run_metadata(p).map_err(Into::into).map(|meta| {
            let missing: Vec<String> = run_tags
                .iter()
                .filter(|t| !meta.iter().any(|m| &m.run_tag == *t))
                .map(|t| format!("run `{t}` has no metadata line"))
                .collect();
            (format!("{} runs", meta.len()), missing)
        });
        checks.push(FileCheck::of("meta", p, r));
    }
    for p in a.run.iter().chain(&a.qrels).chain(&a.topics).chain(&a.corpus).chain(&a.meta) {
        if p.is_file() {
            rec.input(p);
        }
    }
    let failed = checks.iter().any(|c| !c.ok);
    let json = json!({ "ok": !failed, "files": checks });
    rec.write("validation.json", serde_json::to_string_pretty(&json)? + "\n")?;
    rec.finish()?;

    let mut text = String::new();
    for c in &checks {
        match &c.error {
            None => writeln!(text, "ok    {} {}: {}", c.kind, c.path.display(), c.summary)?,
            Some(e) => writeln!(text, "FAIL  {} {}: {e}", c.kind, c.path.display())?,
        }
        for w in &c.warnings {
            writeln!(text, "      warning: {w}")?;
        }
    }
    Ok(Report { text, json, failed })
}

pub fn synth(out: &Path, a: SynthArgs) -> Result<Report> {
    let mut rec = Recorder::new(out, "synth", &a)?;
    rec.seeds(&[a.seed, a.official_seed]);
    let spec = SyntheticSpec {
        docs: a.docs,
        topics: a.topics,
        seed: a.seed,
        run_depth: a.depth,
    };
    let c = generate(&spec)?;
    c.write_to(out)?;
    for name in ["corpus.tsv", "topics.tsv", "oracle.qrels", "sparse.qrels", "runs.meta"] {
        rec.output(name);
    }
    for run in &c.runs {
        rec.output(&format!("runs/{}.run", run.tag()));
    }

    // A heuristic judging pass over the generated collection stands in for
    // the official judgments.
    let scorer = TfIdfLogistic::new(FeatureSpace::from_corpus(&c.corpus));
    let universe = c.corpus.ids();
    let teams = c.teams();
    let topics = c.topic_texts();
    let policy = RelevancePolicy::document();
    let input = SimulationInput {
        runs: &c.runs,
        teams: &teams,
        topics: &topics,
        sparse: &c.sparse,
        oracle: OracleJudge::new(&c.oracle),
        universe: &universe,
        scorer: &scorer,
        policy: &policy,
    };
    let config = TrialConfig::new(a.official_seed, StoppingCriterion::Heuristic { cap: a.official_cap });
    let pass = simulate_trial(&input, &config, None)?;
    save_qrels(&pass.qrels, &rec.output("official.qrels"))?;
    rec.finish()?;

    let json = json!({
        "docs": c.corpus.len(),
        "topics": c.topics.len(),
        "runs": c.runs.iter().map(|r| r.tag()).collect::<Vec<_>>(),
        "official": { "judgments": pass.total_judgments, "topics": pass.eval_topics.len() },
    });
    let text = format!(
        "wrote {} docs, {} topics, {} runs to {}\nofficial.qrels: {} judgments over {} topics\n",
        c.corpus.len(),
        c.topics.len(),
        c.runs.len(),
        out.display(),
        pass.qrels.len(),
        pass.eval_topics.len()
    );
    Ok(Report { text, json, failed: false })
}

pub fn index(out: &Path, a: IndexArgs) -> Result<Report> {
    let mut rec = Recorder::new(out, "index", &a)?;
    rec.input(&a.corpus);
    let corpus = MemoryCorpus::load(&a.corpus, a.task).with_context(|| format!("reading corpus {}", a.corpus.display()))?;
    let index = InvertedIndex::build(&corpus)?;
    index.save(&rec.output("index.json"))?;
    rec.finish()?;
    let json = json!({
        "docs": index.doc_count(),
        "vocabulary": index.vocabulary_size(),
        "avg_doc_len": index.avg_doc_len(),
    });
    let text = format!(
        "indexed {} {}s, {} terms, mean length {:.1}\n",
        index.doc_count(),
        a.task,
        index.vocabulary_size(),
        index.avg_doc_len()
    );
    Ok(Report { text, json, failed: false })
}

pub fn search(out: &Path, a: SearchArgs) -> Result<Report> {
    let mut rec = Recorder::new(out, "search", &a)?;
    if a.tag.is_empty() || a.tag.contains(char::is_whitespace) || a.tag.contains('/') {
        return Err(Usage(format!("run tag `{}` must be one word without `/`", a.tag)).into());
    }
    rec.input(&a.index);
    rec.input(&a.topics);
    let index = InvertedIndex::load(&a.index).with_context(|| format!("reading index {}", a.index.display()))?;
    let topics = parse_topics(&a.topics).with_context(|| format!("reading topics {}", a.topics.display()))?;
    let bm25 = Bm25Params { k1: a.k1, b: a.b };
    let rm3 = a.rm3.then_some(Rm3Params {
        fb_docs: a.fb_docs,
        fb_terms: a.fb_terms,
        lambda: a.lambda,
    });
    let (run, warnings) = generate_candidates(&index, &topics, a.k, &a.tag, &bm25, rm3.as_ref())?;
    let name = format!("{}.run", a.tag);
    save_run(&run, &rec.output(&name))?;
    rec.finish()?;
    let mut text = format!("{name}: {} topics, {} lines\n", run.topic_ids().count(), run.len());
    for w in &warnings {
        writeln!(text, "warning: {w}")?;
    }
    let json = json!({ "run": name, "topics": run.topic_ids().count(), "lines": run.len(), "warnings": warnings });
    Ok(Report { text, json, failed: false })
}

pub fn pool(out: &Path, a: PoolArgs) -> Result<Report> {
    let mut rec = Recorder::new(out, "pool", &a)?;
    let runs = load_runs(&a.run, &mut rec)?;
    let sparse = load_qrels(&a.sparse, &mut rec)?;
    let sparse_policy = RelevancePolicy::sparse(a.task);
    let medians = median_reciprocal_ranks(&runs, &sparse, &sparse_policy, None);
    let candidates = select_candidate_topics(&runs, &sparse, &sparse_policy);
    let pooled: Vec<TopicId> = if a.all_topics {
        sparse.topic_ids().cloned().collect()
    } else {
        candidates.clone()
    };

    let mut median_tsv = String::from("topic\tmedian_rr\tcandidate\n");
    for (t, m) in &medians {
        writeln!(median_tsv, "{t}\t{m:.4}\t{}", candidates.contains(t))?;
    }
    let mut candidate_txt = String::new();
    for t in &candidates {
        writeln!(candidate_txt, "{t}")?;
    }
    let mut pools_tsv = String::from("topic\tdoc_id\n");
    let mut sizes = BTreeMap::new();
    for t in &pooled {
        let pool = build_pool(&runs, a.depth, &sparse, t);
        for d in &pool {
            writeln!(pools_tsv, "{t}\t{d}")?;
        }
        sizes.insert(t.to_string(), pool.len());
    }
    rec.write("median_rr.tsv", median_tsv)?;
    rec.write("candidates.txt", candidate_txt)?;
    rec.write("pools.tsv", pools_tsv)?;
    rec.finish()?;

    let total: usize = sizes.values().sum();
    let text = format!(
        "{} of {} topics are candidates; pooled {} topics at depth {}, {} documents\n",
        candidates.len(),
        medians.len(),
        pooled.len(),
        a.depth,
        total
    );
    let json = json!({ "candidates": candidates, "topics": medians.len(), "pool_sizes": sizes, "pooled_documents": total });
    Ok(Report { text, json, failed: false })
}

pub fn serve(a: ServeArgs) -> Result<Report> {
    let mut config = trecdl_service::ServiceConfig::from_env();
    if let Some(dir) = a.data_dir {
        config.data_dir = dir;
    }
    let data_dir = config.data_dir.clone();
    let app = trecdl_service::AppState::open(config).with_context(|| format!("opening {}", data_dir.display()))?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    eprintln!("serving {} on http://{}", data_dir.display(), a.bind);
    runtime.block_on(trecdl_service::serve(a.bind, app)).with_context(|| format!("serving on {}", a.bind))?;
    Ok(Report {
        text: String::new(),
        json: json!({ "stopped": true }),
        failed: false,
    })
}

/// A collection in the layout `synth` writes, loaded for simulation.
struct Collection {
    runs: Vec<RunFile>,
    teams: BTreeMap<String, String>,
    topics: BTreeMap<TopicId, String>,
    sparse: QrelsSet,
    oracle: QrelsSet,
    official: QrelsSet,
    universe: Vec<String>,
    scorer: TfIdfLogistic,
    policy: RelevancePolicy,
}

impl Collection {
    fn load(a: &CollectionArgs, rec: &mut Recorder) -> Result<Self> {
        let dir = &a.collection;
        let corpus_path = dir.join("corpus.tsv");
        rec.input(&corpus_path);
        let corpus = MemoryCorpus::load(&corpus_path, a.task).with_context(|| format!("reading {}", corpus_path.display()))?;

        let topics_path = dir.join("topics.tsv");
        rec.input(&topics_path);
        let topics = parse_topics(&topics_path)
            .with_context(|| format!("reading {}", topics_path.display()))?
            .into_iter()
            .map(|t| (t.topic_id, t.text))
            .collect();

        let mut run_paths: Vec<PathBuf> = std::fs::read_dir(dir.join("runs"))
            .with_context(|| format!("listing {}", dir.join("runs").display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "run"))
            .collect();
        run_paths.sort();
        let runs = load_runs(&run_paths, rec)?;
        if runs.is_empty() {
            bail!("no *.run files under {}", dir.join("runs").display());
        }

        let meta_path = dir.join("runs.meta");
        rec.input(&meta_path);
        let meta = parse_run_metadata(&meta_path).with_context(|| format!("reading {}", meta_path.display()))?;
        let teams: BTreeMap<String, String> = meta.into_iter().map(|m| (m.run_tag, m.group)).collect();
        if let Some(r) = runs.iter().find(|r| !teams.contains_key(r.tag())) {
            bail!("run `{}` has no line in {}", r.tag(), meta_path.display());
        }

        let sparse = load_qrels(&dir.join("sparse.qrels"), rec)?;
        let oracle = load_qrels(&a.oracle.clone().unwrap_or_else(|| dir.join("oracle.qrels")), rec)?;
        let official = load_qrels(&a.official.clone().unwrap_or_else(|| dir.join("official.qrels")), rec)?;
        Ok(Self {
            scorer: TfIdfLogistic::new(FeatureSpace::from_corpus(&corpus)),
            universe: corpus.ids(),
            runs,
            teams,
            topics,
            sparse,
            oracle,
            official,
            policy: RelevancePolicy::for_task(a.task),
        })
    }

    fn input(&self) -> SimulationInput<'_, TfIdfLogistic> {
        SimulationInput {
            runs: &self.runs,
            teams: &self.teams,
            topics: &self.topics,
            sparse: &self.sparse,
            oracle: OracleJudge::new(&self.oracle),
            universe: &self.universe,
            scorer: &self.scorer,
            policy: &self.policy,
        }
    }

    fn reference(&self) -> Result<OfficialReference> {
        Ok(OfficialReference::new(&self.runs, &self.official, &self.policy, None)?)
    }

    fn criterion(&self, kind: CriterionKind, budget: Option<usize>, cap: usize) -> Result<StoppingCriterion> {
        Ok(match kind {
            CriterionKind::Original => StoppingCriterion::original_size(&self.official),
            CriterionKind::Budget => StoppingCriterion::FixedBudget {
                budget: budget.ok_or_else(|| Usage("--criterion budget needs --budget".into()))?,
            },
            CriterionKind::Heuristic => StoppingCriterion::Heuristic { cap },
        })
    }
}

fn seed_range(first: u64, n: usize) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(Usage("--seeds must be at least 1".into()).into());
    }
    Ok((0..n as u64).map(|i| first + i).collect())
}

fn criterion_of(c: &Collection, a: &CriterionArgs) -> Result<StoppingCriterion> {
    c.criterion(a.criterion, a.budget, a.cap)
}

pub fn simulate(out: &Path, a: SimulateArgs) -> Result<Report> {
    let mut rec = Recorder::new(out, "simulate", &a)?;
    rec.seeds(&[a.seed]);
    let c = Collection::load(&a.collection, &mut rec)?;
    if let Some(team) = &a.omit_team {
        if !c.teams.values().any(|t| t == team) {
            return Err(Usage(format!("no team `{team}` in runs.meta")).into());
        }
    }
    let config = TrialConfig {
        trace_length: a.trace_length,
        ..TrialConfig::new(a.seed, criterion_of(&c, &a.criterion)?)
    };
    let input = c.input();
    let mut trial = simulate_trial(&input, &config, a.omit_team.as_deref())?;
    if !trial.eval_topics.is_empty() {
        trial.comparison = Some(c.reference()?.compare(&c.runs, &trial, &c.policy)?);
    }
    let json = trial.to_json(a.traces);
    rec.write("trial.json", serde_json::to_string_pretty(&json)? + "\n")?;
    save_qrels(&trial.qrels, &rec.output("trial.qrels"))?;
    rec.finish()?;

    let mut text = format!(
        "{} seed {}: {} judgments, {} of {} topics kept\n",
        trial.criterion,
        trial.seed,
        trial.total_judgments,
        trial.eval_topics.len(),
        trial.topics.len()
    );
    if let Some(cmp) = &trial.comparison {
        writeln!(
            text,
            "MAP tau {:.4} drop {}; P@10 tau {:.4} drop {}",
            cmp.map_tau, cmp.map_drop, cmp.p10_tau, cmp.p10_drop
        )?;
    }
    Ok(Report { text, json, failed: false })
}

pub fn lou(out: &Path, a: LouArgs) -> Result<Report> {
    let mut rec = Recorder::new(out, "lou", &a)?;
    let seeds = seed_range(a.first_seed, a.seeds)?;
    rec.seeds(&seeds);
    let c = Collection::load(&a.collection, &mut rec)?;
    let criterion = criterion_of(&c, &a.criterion)?;
    let (rows, _) = lou_experiment(&c.input(), &c.reference()?, &criterion, &seeds, &SessionConfig::default())?;
    rec.write("lou.tsv", tsv(|w| write_lou_tsv(&rows, w))?)?;
    rec.finish()?;

    let min = |f: fn(&trecdl::simulation::LouRow) -> f64| rows.iter().map(f).fold(f64::INFINITY, f64::min);
    let text = format!(
        "{} trials; worst MAP tau all-teams {:.4}, leave-one-out {:.4} (max drop {})\n",
        rows.len(),
        min(|r| r.all_map_tau),
        min(|r| r.omit_map_tau),
        rows.iter().map(|r| r.omit_map_drop).max().unwrap_or(0)
    );
    Ok(Report {
        text,
        json: json!({ "rows": rows }),
        failed: false,
    })
}

pub fn budgets(out: &Path, a: BudgetsArgs) -> Result<Report> {
    let mut rec = Recorder::new(out, "budgets", &a)?;
    let seeds = seed_range(a.first_seed, a.seeds)?;
    rec.seeds(&seeds);
    if a.criterion.contains(&CriterionKind::Budget) && a.budget.is_empty() {
        return Err(Usage("--criterion budget needs at least one --budget".into()).into());
    }
    let c = Collection::load(&a.collection, &mut rec)?;
    let official = c.reference()?;
    let mut criteria = Vec::new();
    for &kind in &a.criterion {
        if kind == CriterionKind::Budget {
            for &b in &a.budget {
                criteria.push(c.criterion(kind, Some(b), a.cap)?);
            }
        } else {
            criteria.push(c.criterion(kind, None, a.cap)?);
        }
    }
    let input = c.input();
    let mut rows = vec![BudgetRow::official(&official)];
    for criterion in &criteria {
        rows.push(budget_experiment(&input, &official, criterion, &seeds, &SessionConfig::default())?.0);
    }
    rec.write("budgets.tsv", tsv(|w| write_budget_tsv(&rows, w))?)?;
    rec.finish()?;

    let mut text = String::new();
    for r in &rows {
        write!(text, "{:<14} {:>9.1} judgments {:>5.1} topics", r.criterion, r.mean_judgments, r.mean_eval_topics)?;
        if let (Some(tau), Some(drop)) = (r.map_tau, r.map_drop) {
            write!(text, "  MAP tau {tau:.4} drop {drop}")?;
        }
        text.push('\n');
    }
    Ok(Report {
        text,
        json: json!({ "rows": rows }),
        failed: false,
    })
}

pub fn evaluate(out: &Path, a: EvaluateArgs) -> Result<Report> {
    let mut rec = Recorder::new(out, "evaluate", &a)?;
    let set = EvalSet::load(&a.set, &mut rec)?;
    let sparse = a.sparse.as_deref().map(|p| load_qrels(p, &mut rec)).transpose()?;
    let reports = set.reports(sparse.as_ref())?;
    rec.write("report.tsv", tsv(|w| write_reports_tsv(&reports, w))?)?;
    rec.finish()?;

    let mut text = format!("{} topics\n", set.topics.len());
    for r in &reports {
        write!(
            text,
            "{:<20} ndcg@10 {:.4}  ap {:.4}  p@10 {:.4}  rr {:.4}",
            r.run_tag, r.mean.ndcg_10, r.mean.ap, r.mean.p_10, r.mean.rr
        )?;
        if let Some(v) = r.mean.rr_ms {
            write!(text, "  rr_ms {v:.4}")?;
        }
        text.push('\n');
    }
    let means: BTreeMap<&str, _> = reports.iter().map(|r| (r.run_tag.as_str(), &r.mean)).collect();
    Ok(Report {
        text,
        json: json!({ "topics": set.topics, "means": means }),
        failed: false,
    })
}

pub fn compare(out: &Path, a: CompareArgs) -> Result<Report> {
    let mut rec = Recorder::new(out, "compare", &a)?;
    let set = EvalSet::load(
        &EvalSetArgs {
            run: vec![a.run_a.clone(), a.run_b.clone()],
            qrels: a.qrels.clone(),
            task: a.task,
            eval_topics: a.eval_topics.clone(),
        },
        &mut rec,
    )?;
    let reports = set.reports(None)?;
    let (ra, rb) = (&reports[0], &reports[1]);
    let deltas = per_query_delta(ra, rb, a.metric)?;
    rec.write("deltas.tsv", tsv(|w| deltas.write_tsv(w))?)?;
    rec.finish()?;

    let mean = |r: &MetricReport| r.mean_value(a.metric).unwrap_or(f64::NAN);
    let gap = mean(ra) - mean(rb);
    let text = format!(
        "mean {}: {} {:.4} vs {} {:.4} (gap {gap:+.4}); {} wins, {} losses, {} ties over {} topics\n",
        a.metric,
        ra.run_tag,
        mean(ra),
        rb.run_tag,
        mean(rb),
        deltas.wins,
        deltas.losses,
        deltas.ties,
        deltas.deltas.len()
    );
    let json = json!({
        "metric": a.metric,
        "a": { "run": ra.run_tag, "mean": mean(ra) },
        "b": { "run": rb.run_tag, "mean": mean(rb) },
        "gap": gap,
        "wins": deltas.wins,
        "losses": deltas.losses,
        "ties": deltas.ties,
    });
    Ok(Report { text, json, failed: false })
}

pub fn export_matrix(out: &Path, a: EvalSetArgs) -> Result<Report> {
    let mut rec = Recorder::new(out, "export-matrix", &a)?;
    let set = EvalSet::load(&a, &mut rec)?;
    let matrix = ndcg_vector_matrix(&set.reports(None)?)?;
    rec.write("ndcg_matrix.tsv", tsv(|w| matrix.write_tsv(w))?)?;
    rec.finish()?;
    let (runs, topics) = matrix.shape();
    Ok(Report {
        text: format!("ndcg_matrix.tsv: {runs} runs x {topics} topics\n"),
        json: json!({ "runs": runs, "topics": topics }),
        failed: false,
    })
}

pub fn plot_data(out: &Path, a: PlotDataArgs) -> Result<Report> {
    let mut rec = Recorder::new(out, "plot-data", &a)?;
    let set = EvalSet::load(&a.set, &mut rec)?;
    let reports = set.reports(None)?;

    let matrix = ndcg_vector_matrix(&reports)?;
    rec.write("heatmap.tsv", tsv(|w| matrix.write_tsv(w))?)?;

    let shown: Vec<Metric> = Metric::ALL.into_iter().filter(|m| *m != Metric::RrMs).collect();
    let mut scatter = String::from("run");
    for m in &shown {
        write!(scatter, "\t{m}")?;
    }
    scatter.push('\n');
    for r in &reports {
        scatter.push_str(&r.run_tag);
        for m in &shown {
            write!(scatter, "\t{:.4}", r.mean_value(*m).unwrap_or(f64::NAN))?;
        }
        scatter.push('\n');
    }
    rec.write("scatter.tsv", scatter)?;

    let mut agreement = String::from("metric_x\tmetric_y\ttau\n");
    if reports.len() >= 2 {
        for (i, x) in shown.iter().enumerate() {
            for y in &shown[i + 1..] {
                writeln!(agreement, "{x}\t{y}\t{:.4}", metric_agreement(&reports, *x, *y)?)?;
            }
        }
    }
    rec.write("agreement.tsv", agreement)?;

    let mut outputs = vec!["heatmap.tsv", "scatter.tsv", "agreement.tsv"];
    if let Some(pair) = &a.pair {
        let find = |tag: &str| {
            reports
                .iter()
                .find(|r| r.run_tag == tag)
                .ok_or_else(|| Usage(format!("--pair names `{tag}`, which is not among the runs")))
        };
        let deltas = per_query_delta(find(&pair[0])?, find(&pair[1])?, Metric::Ndcg10)?;
        rec.write("per_query.tsv", tsv(|w| deltas.write_tsv(w))?)?;
        outputs.push("per_query.tsv");
    }
    rec.finish()?;
    Ok(Report {
        text: format!("wrote {} to {}\n", outputs.join(", "), out.display()),
        json: json!({ "outputs": outputs }),
        failed: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topic_lists_skip_comments_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        std::fs::write(&path, "# eval\n1037\n\n1000 extra\n1037\n").unwrap();
        let mut rec = Recorder::new(dir.path(), "t", json!({})).unwrap();
        let ids = load_topic_list(&path, &mut rec).unwrap();
        assert_eq!(ids, vec![TopicId::from("1000"), TopicId::from("1037")]);
    }

    #[test]
    fn seed_ranges_start_at_first_seed() {
        assert_eq!(seed_range(3, 3).unwrap(), vec![3, 4, 5]);
        assert!(seed_range(1, 0).unwrap_err().is::<Usage>());
    }
}
