//! The commands behind the binary: generate, train, tag, eval and repro.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use offerner::blstm::{train_blstm, BlstmParams, BlstmTagger};
use offerner::corpus::{combine, generate_dataset, load_templates, split_half, SlotLexicon};
use offerner::crf::{train_crf, CrfModel};
use offerner::embedding::EmbeddingTable;
use offerner::eval::{evaluate, EvalReport, Scope};
use offerner::greedy::{train_greedy, PerceptronModel};
use offerner::modelfile::{sniff_kind_file, ModelKind};
use offerner::seed::{self, STAGE_EMBEDDINGS, STAGE_GENERATE, STAGE_INDIVIDUAL_CRF, STAGE_SPLIT};
use offerner::stacker::{train_hybrid, HybridModel, MANIFEST_FILE};
use offerner::{tokenize, Dataset, Error, Tag, Tagger, Token};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

pub const CRF_FILE: &str = "crf.model";
pub const BLSTM_FILE: &str = "blstm.model";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const GREEDY_FILE: &str = "greedy.model";

/// `D1`, `D2`, ... for the training sources; the test set follows them.
pub fn dataset_name(k: usize) -> String {
    format!("D{}", k + 1)
}

pub fn individual_crf_file(i: usize) -> String {
    format!("crf_D{i}.model")
}

fn training_error(e: Error) -> CliError {
    CliError::Training(e.to_string())
}

/// Model files are written here first and moved into place only once every
/// requested model has been trained, so a failure leaves no partial output.
struct Staging {
    dir: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl Staging {
    fn new(target: &Path) -> CliResult<Staging> {
        let dir = target.join(".staging");
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        Ok(Staging {
            dir,
            target: target.to_path_buf(),
            committed: false,
        })
    }

    fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    fn commit(mut self) -> CliResult<Vec<PathBuf>> {
        let mut names: Vec<_> = fs::read_dir(&self.dir)?
            .map(|e| e.map(|e| e.file_name()))
            .collect::<Result<_, _>>()?;
        names.sort();
        let mut out = Vec::with_capacity(names.len());
        for name in names {
            let dest = self.target.join(&name);
            fs::rename(self.dir.join(&name), &dest)?;
            out.push(dest);
        }
        fs::remove_dir(&self.dir)?;
        self.committed = true;
        Ok(out)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

/// One generated dataset and the number of templates behind it.
pub struct Generated {
    pub source: String,
    pub templates: usize,
    pub dataset: Dataset,
}

/// Bloats every source's templates and writes `data/D*.tsv`.
pub fn generate(config: &PipelineConfig) -> CliResult<Vec<Generated>> {
    config.validate()?;
    let lexicon = SlotLexicon::load(&config.lexicon)
        .map_err(|e| CliError::Config(format!("{}: {e}", config.lexicon.display())))?;
    let master = seed::derive(config.seed, STAGE_GENERATE);
    let jobs = config
        .sources
        .iter()
        .zip(&config.counts)
        .chain([(&config.test_source, &config.test_count)]);
    let mut out = Vec::new();
    for (k, (source, &count)) in jobs.enumerate() {
        let path = config.template_file(source);
        let templates = load_templates(&path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let dataset = generate_dataset(
            &dataset_name(k),
            &templates,
            &lexicon,
            count,
            seed::derive(master, k as u64),
        )
        .map_err(|e| match e {
            Error::MissingLexiconEntry(tag) => CliError::MissingLexicon(tag),
            other => CliError::Config(format!("{}: {other}", path.display())),
        })?;
        out.push(Generated {
            source: source.clone(),
            templates: templates.len(),
            dataset,
        });
    }
    let dir = config.data_dir();
    fs::create_dir_all(&dir)?;
    for g in &out {
        g.dataset
            .save_tsv(&dir.join(format!("{}.tsv", g.dataset.name)))
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(out)
}

pub fn generation_table(generated: &[Generated]) -> String {
    let mut out = format!(
        "{:<8} {:<10} {:>9} {:>7} {:>7}\n",
        "dataset", "source", "templates", "offers", "tokens"
    );
    for g in generated {
        let _ = writeln!(
            out,
            "{:<8} {:<10} {:>9} {:>7} {:>7}",
            g.dataset.name,
            g.source,
            g.templates,
            g.dataset.len(),
            g.dataset.token_count()
        );
    }
    out
}

pub fn load_dataset(path: &Path) -> CliResult<Dataset> {
    Dataset::load_tsv(path).map_err(|e| CliError::DatasetLoad(format!("{}: {e}", path.display())))
}

/// Training sources D1..Dn and the test set, as written by [`generate`].
pub fn load_datasets(config: &PipelineConfig) -> CliResult<(Vec<Dataset>, Dataset)> {
    let dir = config.data_dir();
    let n = config.sources.len();
    let train = (0..n)
        .map(|k| load_dataset(&dir.join(format!("{}.tsv", dataset_name(k)))))
        .collect::<CliResult<Vec<_>>>()?;
    let test = load_dataset(&dir.join(format!("{}.tsv", dataset_name(n))))?;
    Ok((train, test))
}

/// `D_comb` split into the base-model half and the stacker half.
pub fn combined_halves(
    config: &PipelineConfig,
    train: &[Dataset],
) -> CliResult<(Dataset, Dataset)> {
    let refs: Vec<&Dataset> = train.iter().collect();
    let comb = combine(&refs, "D_comb").map_err(training_error)?;
    split_half(&comb, seed::derive(config.seed, STAGE_SPLIT)).map_err(training_error)
}

pub fn embedding_table(config: &PipelineConfig, vocab_from: &Dataset) -> CliResult<EmbeddingTable> {
    if let Some(path) = &config.embeddings {
        return EmbeddingTable::load(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())));
    }
    let words: Vec<&str> = vocab_from
        .sentences
        .iter()
        .flat_map(|s| s.tokens().iter().map(|t| t.text.as_str()))
        .collect();
    Ok(EmbeddingTable::random(
        words,
        config.embedding_dim,
        config.embedding_scale,
        seed::derive(config.seed, STAGE_EMBEDDINGS),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Crf,
    Blstm,
    Greedy,
    Hybrid,
    All,
}

fn train_individual(
    config: &PipelineConfig,
    train: &[Dataset],
    i: usize,
    staging: &Staging,
) -> CliResult<()> {
    let data = train
        .get(i.wrapping_sub(1))
        .ok_or_else(|| CliError::Config(format!("no training source {i}")))?;
    let mut crf_config = config.models.crf.clone();
    crf_config.seed = seed::derive(seed::derive(config.seed, STAGE_INDIVIDUAL_CRF), i as u64);
    let (model, _) = train_crf(data, &crf_config).map_err(training_error)?;
    model
        .save(&staging.path(&individual_crf_file(i)))
        .map_err(|e| CliError::Io(e.to_string()))
}

/// Trains the requested models into the model directory and returns the
/// files written. `individual` selects a single-source CRF instead.
pub fn train(
    config: &PipelineConfig,
    which: Which,
    individual: Option<usize>,
) -> CliResult<Vec<PathBuf>> {
    let (train, _) = load_datasets(config)?;
    let models = config.seeded_models();
    let staging = Staging::new(&config.model_dir)?;
    let io = |e: Error| CliError::Io(e.to_string());

    if let Some(i) = individual {
        if which != Which::Crf {
            return Err(CliError::Config("--individual applies to crf only".into()));
        }
        train_individual(config, &train, i, &staging)?;
        return staging.commit();
    }

    let (first, second) = combined_halves(config, &train)?;
    let data_dir = config.data_dir();
    first.save_tsv(&data_dir.join("D_comb1.tsv")).map_err(io)?;
    second.save_tsv(&data_dir.join("D_comb2.tsv")).map_err(io)?;

    match which {
        Which::Crf => {
            let (m, _) = train_crf(&first, &models.crf).map_err(training_error)?;
            m.save(&staging.path(CRF_FILE)).map_err(io)?;
        }
        Which::Blstm => {
            let refs = [&first, &second];
            let table =
                embedding_table(config, &combine(&refs, "D_comb").map_err(training_error)?)?;
            let (p, _) = train_blstm(&first, &table, &models.blstm).map_err(training_error)?;
            p.save(&staging.path(BLSTM_FILE)).map_err(io)?;
            table.save(&staging.path(EMBEDDINGS_FILE)).map_err(io)?;
        }
        Which::Greedy => {
            let m = train_greedy(&first, &models.greedy).map_err(training_error)?;
            m.save(&staging.path(GREEDY_FILE)).map_err(io)?;
        }
        Which::Hybrid | Which::All => {
            let refs = [&first, &second];
            let table =
                embedding_table(config, &combine(&refs, "D_comb").map_err(training_error)?)?;
            let hybrid = train_hybrid(&first, &second, &table, &models).map_err(training_error)?;
            hybrid.save(&staging.dir).map_err(io)?;
            if which == Which::All {
                for i in 1..=train.len() {
                    train_individual(config, &train, i, &staging)?;
                }
            }
        }
    }
    staging.commit()
}

/// Any model file (or hybrid manifest) loaded behind one tagging interface.
// One instance per command; size is irrelevant.
#[allow(clippy::large_enum_variant)]
pub enum LoadedModel {
    Crf(CrfModel),
    Blstm(BlstmTagger),
    Greedy(PerceptronModel),
    Hybrid(Box<HybridModel>),
}

impl Tagger for LoadedModel {
    fn tag(&self, tokens: &[Token]) -> Vec<Tag> {
        match self {
            LoadedModel::Crf(m) => m.tag(tokens),
            LoadedModel::Blstm(m) => m.tag(tokens),
            LoadedModel::Greedy(m) => m.tag(tokens),
            LoadedModel::Hybrid(m) => m.tag(tokens),
        }
    }
}

/// Loads by header. A BLSTM file takes its vectors from `embeddings.txt` in
/// the same directory.
pub fn load_model(path: &Path) -> CliResult<LoadedModel> {
    let fail = |e: Error| CliError::ModelLoad(format!("{}: {e}", path.display()));
    let model = match sniff_kind_file(path).map_err(fail)? {
        ModelKind::Crf => LoadedModel::Crf(CrfModel::load(path).map_err(fail)?),
        ModelKind::Blstm => LoadedModel::Blstm(BlstmTagger {
            params: BlstmParams::load(path).map_err(fail)?,
            table: EmbeddingTable::load(&path.with_file_name(EMBEDDINGS_FILE)).map_err(fail)?,
        }),
        ModelKind::Greedy => LoadedModel::Greedy(PerceptronModel::load(path).map_err(fail)?),
        ModelKind::Hybrid => LoadedModel::Hybrid(Box::new(HybridModel::load(path).map_err(fail)?)),
        ModelKind::Svm => {
            return Err(CliError::ModelLoad(format!(
                "{}: an SVM file only tags through its hybrid manifest",
                path.display()
            )))
        }
    };
    Ok(model)
}

/// Tags one offer per input line, emitting dataset TSV. Blank lines are
/// skipped.
pub fn tag_text(model: &dyn Tagger, input: &str) -> String {
    let mut out = String::new();
    for line in input.lines() {
        let tokens = tokenize(line);
        if tokens.is_empty() {
            continue;
        }
        for (tok, tag) in tokens.iter().zip(model.tag(&tokens)) {
            let _ = writeln!(out, "{}\t{tag}", tok.text);
        }
        out.push('\n');
    }
    out
}

pub fn eval(model_path: &Path, dataset_path: &Path) -> CliResult<EvalReport> {
    let model = load_model(model_path)?;
    let data = load_dataset(dataset_path)?;
    evaluate(&model, &data).map_err(|e| CliError::ModelLoad(e.to_string()))
}

/// Writes `<prefix>.txt` (table) and `<prefix>.tsv` (metric lines).
pub fn write_report(report: &EvalReport, prefix: &Path) -> CliResult<()> {
    if let Some(dir) = prefix.parent() {
        fs::create_dir_all(dir)?;
    }
    let with_ext = |ext: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(ext);
        PathBuf::from(p)
    };
    fs::write(with_ext(".txt"), report.to_table())?;
    fs::write(with_ext(".tsv"), report.to_lines())?;
    Ok(())
}

/// Test-set results of every model from one `repro` run.
pub struct ReproSummary {
    pub rows: Vec<(String, EvalReport)>,
}

impl ReproSummary {
    pub fn get(&self, label: &str) -> Option<&EvalReport> {
        self.rows.iter().find(|(l, _)| l == label).map(|(_, r)| r)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<10} {:>9} {:>9} {:>9} {:>9}\n",
            "model", "precision", "recall", "f1", "micro-f1"
        );
        for (label, r) in &self.rows {
            let o = r.overall();
            let _ = writeln!(
                out,
                "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                label,
                o.precision,
                o.recall,
                o.f1,
                r.counts.prf(Scope::Micro).f1
            );
        }
        out
    }

    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for (label, r) in &self.rows {
            let o = r.overall();
            let _ = writeln!(out, "f1\t{label}\t{:.4}", o.f1);
            let _ = writeln!(
                out,
                "micro_f1\t{label}\t{:.4}",
                r.counts.prf(Scope::Micro).f1
            );
        }
        out
    }
}

/// generate → train all → evaluate every model on the test set.
pub fn repro(config: &PipelineConfig) -> CliResult<ReproSummary> {
    generate(config)?;
    train(config, Which::All, None)?;
    let n = config.sources.len();
    let test_path = config.data_dir().join(format!("{}.tsv", dataset_name(n)));
    let dir = &config.model_dir;
    let mut models: Vec<(String, PathBuf)> = vec![
        ("M_CRF".into(), dir.join(CRF_FILE)),
        ("M_BLSTM".into(), dir.join(BLSTM_FILE)),
        ("M_GREEDY".into(), dir.join(GREEDY_FILE)),
        ("M_HYBRID".into(), dir.join(MANIFEST_FILE)),
    ];
    for i in 1..=n {
        models.push((format!("M_CRF{i}"), dir.join(individual_crf_file(i))));
    }
    let mut rows = Vec::new();
    for (label, path) in models {
        let report = eval(&path, &test_path)?;
        write_report(&report, &config.report_dir().join(&label))?;
        rows.push((label, report));
    }
    let summary = ReproSummary { rows };
    fs::write(config.report_dir().join("summary.tsv"), summary.to_lines())?;
    Ok(summary)
}
