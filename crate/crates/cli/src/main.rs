use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use csasr::ctc::{read_features, read_labels, train_am, write_labels, AcousticModel, AmConfig, Utterance};
use csasr::decoder::{
    beam_decode, read_nbest, route_rescore, score_wer, split_tag, write_nbest, DecodeConfig, NBestList,
    RescoreModels,
};
use csasr::fst::{read_text, write_text, Fst, Semiring, SymbolTable};
use csasr::graph::{
    build_grammar_fst, build_lexicon_fst, build_multigraph, build_search_graph, build_token_fst, GraphTag, Lexicon,
    UnitInventory, SHARED_LANG,
};
use csasr::ngram::{interpolate, read_arpa, tokenize_lines, train_kn, write_arpa, ArpaModel, KnConfig};
use csasr::nn::{read_params, write_params};
use csasr::pipeline::{generate_data, results_table, run_experiment, write_data, ExperimentConfig, RunDir};
use csasr::rnnlm::{adapt_lm, generate_text, train_lm, AdaptConfig, RescoreMode, RnnConfig, RnnLm, WordScorer};
use csasr::xling::{seed_dictionary, self_learn, train_toy_embeddings, EmbeddingSpace, InductionMode, SelfLearnConfig};
use csasr::{Error, Result};

#[derive(Parser)]
#[command(name = "csasr", version, about = "Code-switching speech recognition toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic lexicon, text corpora and speech sets of a config.
    GenData(GenData),
    /// Train an interpolated Kneser-Ney n-gram LM and write it as ARPA.
    TrainLm(TrainLm),
    /// Linearly interpolate two ARPA models.
    InterpLm(InterpLm),
    /// Train the CTC acoustic model.
    TrainAm(TrainAm),
    /// Map two monolingual embedding spaces into a shared space.
    MapEmbed(MapEmbed),
    /// Train an RNN LM over a frozen embedding layer.
    TrainRnnlm(TrainRnnlm),
    /// Fine-tune an RNN LM on in-domain text.
    AdaptRnnlm(AdaptRnnlm),
    /// Sample sentences from an RNN LM.
    GenText(GenText),
    /// Compose token, lexicon and grammar transducers into a search graph.
    BuildGraph(BuildGraph),
    /// Union tagged search graphs into one multigraph.
    BuildMultigraph(BuildMultigraph),
    /// Beam-search decode features into n-best lists.
    Decode(Decode),
    /// Rescore n-best lists with RNN LMs routed by graph tag.
    Rescore(Rescore),
    /// Score hypotheses against references by language subset.
    Score(Score),
    /// Run the full experiment grid of a config.
    RunExperiment(RunExperiment),
}

#[derive(Args)]
struct GenData {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainLm {
    /// One sentence per line, whitespace-separated words.
    #[arg(long)]
    text: PathBuf,
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Leave `<unk>` out of the vocabulary.
    #[arg(long)]
    closed_vocab: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InterpLm {
    #[arg(long)]
    lm1: PathBuf,
    #[arg(long)]
    lm2: PathBuf,
    /// Weight of the first model.
    #[arg(long)]
    weight: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainAm {
    #[arg(long)]
    units: PathBuf,
    #[arg(long)]
    train_feats: PathBuf,
    #[arg(long)]
    train_labels: PathBuf,
    #[arg(long, requires = "dev_labels")]
    dev_feats: Option<PathBuf>,
    #[arg(long, requires = "dev_feats")]
    dev_labels: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    layers: usize,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    newbob_warmup: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbedInput {
    /// Plain text; embeddings are trained from co-occurrence counts.
    Text,
    /// Embedding files, one word and its vector per line.
    Vectors,
}

#[derive(Clone, Copy, ValueEnum)]
enum Induction {
    Forward,
    Mutual,
}

#[derive(Args)]
struct MapEmbed {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    input: EmbedInput,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    window: usize,
    #[arg(long, default_value_t = 20)]
    max_iterations: usize,
    #[arg(long, value_enum, default_value = "forward")]
    mode: Induction,
    /// Receives src.vec, tgt.vec, mapped.vec, unmapped.vec and dictionary.tsv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TrainRnnlm {
    #[arg(long)]
    text: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 6)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.8)]
    decay: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AdaptRnnlm {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    text: PathBuf,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.8)]
    decay: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenText {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    sentences: usize,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 50)]
    max_len: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildGraph {
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    units: PathBuf,
    #[arg(long)]
    lm: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildMultigraph {
    /// Component as `tag=path`, repeated.
    #[arg(long = "graph", required = true, value_parser = parse_keyed)]
    graphs: Vec<(String, PathBuf)>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Decode {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    am: PathBuf,
    #[arg(long)]
    feats: PathBuf,
    #[arg(long, default_value_t = 16.0)]
    beam: f64,
    #[arg(long, default_value_t = 5000)]
    max_active: usize,
    #[arg(long, default_value_t = 1.0)]
    acoustic_scale: f64,
    #[arg(long, default_value_t = 100)]
    nbest: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write the best hypothesis per utterance.
    #[arg(long)]
    hyp: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Probability,
    LogLinear,
}

#[derive(Args)]
struct Rescore {
    #[arg(long)]
    nbest: PathBuf,
    /// RNN LM per graph tag as `tag=path`; untagged lists use `cs`.
    #[arg(long = "rnn", required = true, value_parser = parse_keyed)]
    rnns: Vec<(String, PathBuf)>,
    /// ARPA model per graph tag as `tag=path`.
    #[arg(long = "ngram", required = true, value_parser = parse_keyed)]
    ngrams: Vec<(String, PathBuf)>,
    #[arg(long, default_value_t = 0.75)]
    weight: f64,
    #[arg(long, value_enum, default_value = "probability")]
    mode: Mode,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    hyp: Option<PathBuf>,
}

#[derive(Args)]
struct Score {
    /// Reference transcripts, `id word...` per line.
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    hyp: PathBuf,
    /// Lexicon giving each word's language.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// The two language names, as `a,b`; taken from the lexicon otherwise.
    #[arg(long, value_delimiter = ',')]
    langs: Option<Vec<String>>,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct RunExperiment {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_keyed(s: &str) -> std::result::Result<(String, PathBuf), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected tag=path, got '{s}'"))?;
    if k.is_empty() || v.is_empty() {
        return Err(format!("expected tag=path, got '{s}'"));
    }
    Ok((k.to_string(), PathBuf::from(v)))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::Io(e).context(&path.display().to_string()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io(e).context(&path.display().to_string()))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn read_text_corpus(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(e).context(&path.display().to_string()))?;
    Ok(tokenize_lines(&text))
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load_arpa(path: &Path) -> Result<ArpaModel> {
    read_arpa(open(path)?).map_err(|e| e.context(&path.display().to_string()))
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

/// Graphs travel as AT&T text plus `.isyms` and `.osyms` symbol tables.
fn load_fst(path: &Path) -> Result<Fst> {
    let isyms = SymbolTable::read(open(&sibling(path, ".isyms"))?)?;
    let osyms = SymbolTable::read(open(&sibling(path, ".osyms"))?)?;
    read_text(open(path)?, Semiring::Tropical, isyms, osyms).map_err(|e| e.context(&path.display().to_string()))
}

fn save_fst(path: &Path, f: &Fst) -> Result<()> {
    write_file(path, |w| write_text(f, w))?;
    write_file(&sibling(path, ".isyms"), |w| f.isyms().write(w))?;
    write_file(&sibling(path, ".osyms"), |w| f.osyms().write(w))
}

fn load_rnn(path: &Path) -> Result<RnnLm> {
    RnnLm::load(open(path)?).map_err(|e| e.context(&path.display().to_string()))
}

fn load_utts(inv: &UnitInventory, feats: &Path, labels: &Path) -> Result<Vec<Utterance>> {
    let feats = read_features(open(feats)?)?;
    let labels: HashMap<String, Vec<String>> = read_labels(open(labels)?)?.into_iter().collect();
    feats
        .into_iter()
        .map(|(id, features)| {
            let units = labels.get(&id).ok_or_else(|| Error::data(format!("no labels for utterance {id}")))?;
            let labels = units
                .iter()
                .map(|u| inv.ctc_index(u).ok_or_else(|| Error::data(format!("{id}: unknown unit '{u}'"))))
                .collect::<Result<_>>()?;
            Ok(Utterance { id, features, labels })
        })
        .collect()
}

fn best_hyps(lists: &[NBestList]) -> Vec<(String, Vec<String>)> {
    lists
        .iter()
        .map(|l| (l.utt_id.clone(), l.best().map(|h| h.words.clone()).unwrap_or_default()))
        .collect()
}

fn gen_data(a: GenData) -> Result<()> {
    let cfg = load_config(&a.config, a.seed)?;
    let data = generate_data(&cfg)?;
    let mut run = RunDir::create(&a.out)?;
    run.stage("data", &[]);
    run.write_str("config.toml", &cfg.to_toml()?)?;
    write_data(&mut run, &data)?;
    run.finish()?;
    Ok(())
}

fn train_lm_cmd(a: TrainLm) -> Result<()> {
    let text = read_text_corpus(&a.text)?;
    let cfg = KnConfig { closed_vocab: a.closed_vocab, ..KnConfig::new(a.order) };
    let lm = train_kn(&text, &cfg)?;
    write_file(&a.out, |w| write_arpa(&lm, w))
}

fn interp_lm(a: InterpLm) -> Result<()> {
    let lm = interpolate(&load_arpa(&a.lm1)?, &load_arpa(&a.lm2)?, a.weight)?;
    write_file(&a.out, |w| write_arpa(&lm, w))
}

fn train_am_cmd(a: TrainAm) -> Result<()> {
    let inv = UnitInventory::read(open(&a.units)?)?;
    let train = load_utts(&inv, &a.train_feats, &a.train_labels)?;
    let dev = match (&a.dev_feats, &a.dev_labels) {
        (Some(f), Some(l)) => load_utts(&inv, f, l)?,
        _ => Vec::new(),
    };
    let cfg = AmConfig {
        layers: a.layers,
        hidden: a.hidden,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        newbob_warmup: a.newbob_warmup,
        seed: a.seed,
        ..AmConfig::default()
    };
    let (am, stats) = train_am(&train, &dev, inv.num_symbols(), &cfg)?;
    for s in &stats {
        log::info!("epoch {} rate {:.3e} loss {:.4} dev UER {:.2}%", s.epoch, s.rate, s.train_loss, s.valid_uer);
    }
    write_file(&a.out, |w| write_params(am.store(), w))
}

fn map_embed(a: MapEmbed) -> Result<()> {
    let load = |p: &Path| -> Result<EmbeddingSpace> {
        match a.input {
            EmbedInput::Text => train_toy_embeddings(&read_text_corpus(p)?, a.dim, a.window)?.normalize(),
            EmbedInput::Vectors => EmbeddingSpace::read(open(p)?)?.normalize(),
        }
    };
    let src = load(&a.src)?;
    let tgt = load(&a.tgt)?;
    let seed = seed_dictionary(src.words(), tgt.words())?;
    let mode = match a.mode {
        Induction::Forward => InductionMode::Forward,
        Induction::Mutual => InductionMode::Mutual,
    };
    let res = self_learn(&src, &tgt, &seed, &SelfLearnConfig { max_iterations: a.max_iterations, mode })?;
    log::info!(
        "{} seed pairs, {} iterations, converged {}, {} induced pairs",
        seed.len(),
        res.iterations,
        res.converged,
        res.dictionary.len()
    );
    let d = &a.out_dir;
    write_file(&d.join("src.vec"), |w| src.write(w))?;
    write_file(&d.join("tgt.vec"), |w| tgt.write(w))?;
    write_file(&d.join("dictionary.tsv"), |w| res.dictionary.write(&src, &tgt, w))?;
    let mapped = src.map(&res.mapping.w_m)?.merge(&tgt.map(&res.mapping.w_n)?)?;
    write_file(&d.join("mapped.vec"), |w| mapped.write(w))?;
    write_file(&d.join("unmapped.vec"), |w| src.merge(&tgt)?.write(w))
}

fn train_rnnlm(a: TrainRnnlm) -> Result<()> {
    let text = read_text_corpus(&a.text)?;
    let emb = EmbeddingSpace::read(open(&a.embeddings)?)?;
    let cfg = RnnConfig {
        hidden: a.hidden,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        decay: a.decay,
        seed: a.seed,
        ..RnnConfig::default()
    };
    let (lm, log) = train_lm(&text, &emb, &cfg)?;
    for e in &log {
        log::info!("{e:?}");
    }
    write_file(&a.out, |w| lm.save(w))
}

fn adapt_rnnlm(a: AdaptRnnlm) -> Result<()> {
    let base = load_rnn(&a.model)?;
    let text = read_text_corpus(&a.text)?;
    let cfg = AdaptConfig { epochs: a.epochs, learning_rate: a.learning_rate, decay: a.decay, seed: a.seed };
    let (lm, log) = adapt_lm(&base, &text, &cfg)?;
    for e in &log {
        log::info!("{e:?}");
    }
    write_file(&a.out, |w| lm.save(w))
}

fn gen_text(a: GenText) -> Result<()> {
    let lm = load_rnn(&a.model)?;
    let text = generate_text(&lm, a.sentences, a.seed, a.temperature, a.max_len)?;
    write_file(&a.out, |w| {
        for s in &text {
            writeln!(w, "{}", s.join(" "))?;
        }
        Ok(())
    })
}

fn build_graph(a: BuildGraph) -> Result<()> {
    let lex = Lexicon::read(open(&a.lexicon)?)?;
    let inv = UnitInventory::read(open(&a.units)?)?;
    let lm = load_arpa(&a.lm)?;
    let t = build_token_fst(&inv);
    let l = build_lexicon_fst(&lex, &inv)?;
    let g = build_grammar_fst(&lm, &lex.word_table())?;
    let tlg = build_search_graph(&t, &l, &g)?;
    log::info!("{} states, {} arcs", tlg.num_states(), tlg.num_arcs());
    save_fst(&a.out, &tlg)
}

fn build_multigraph_cmd(a: BuildMultigraph) -> Result<()> {
    let parts = a
        .graphs
        .iter()
        .map(|(tag, p)| Ok((load_fst(p)?, GraphTag::new(tag.clone())?)))
        .collect::<Result<Vec<_>>>()?;
    let g = build_multigraph(&parts)?;
    save_fst(&a.out, &g)
}

fn decode(a: Decode) -> Result<()> {
    let graph = load_fst(&a.graph)?;
    let am = AcousticModel::from_store(read_params(open(&a.am)?)?)?;
    let feats = read_features(open(&a.feats)?)?;
    let cfg = DecodeConfig { beam: a.beam, max_active: a.max_active, acoustic_scale: a.acoustic_scale, nbest: a.nbest };
    let lists = feats
        .iter()
        .map(|(id, f)| {
            let grid = am.posteriors(f).map_err(|e| e.context(id))?;
            beam_decode(id, &graph, &grid, &cfg).map_err(|e| e.context(id))
        })
        .collect::<Result<Vec<_>>>()?;
    write_file(&a.out, |w| write_nbest(w, &lists))?;
    if let Some(h) = &a.hyp {
        write_file(h, |w| write_labels(w, &best_hyps(&lists)))?;
    }
    Ok(())
}

fn rescore(a: Rescore) -> Result<()> {
    let lists = read_nbest(open(&a.nbest)?)?;
    for l in &lists {
        for h in &l.hyps {
            split_tag(&h.words).map_err(|e| e.context(&l.utt_id))?;
        }
    }
    let rnns: BTreeMap<String, RnnLm> =
        a.rnns.iter().map(|(t, p)| Ok((t.clone(), load_rnn(p)?))).collect::<Result<_>>()?;
    let ngrams: BTreeMap<String, ArpaModel> =
        a.ngrams.iter().map(|(t, p)| Ok((t.clone(), load_arpa(p)?))).collect::<Result<_>>()?;
    let models = RescoreModels {
        rnn: rnns.iter().map(|(t, m)| (t.clone(), m as &dyn WordScorer)).collect(),
        ngram: ngrams.iter().map(|(t, m)| (t.clone(), m as &dyn WordScorer)).collect(),
    };
    let mode = match a.mode {
        Mode::Probability => RescoreMode::Probability,
        Mode::LogLinear => RescoreMode::LogLinear,
    };
    let out = route_rescore(&lists, &models, a.weight, mode)?;
    write_file(&a.out, |w| write_nbest(w, &out))?;
    if let Some(h) = &a.hyp {
        write_file(h, |w| write_labels(w, &best_hyps(&out)))?;
    }
    Ok(())
}

fn score(a: Score) -> Result<()> {
    let refs = read_labels(open(&a.reference)?)?;
    let hyps = read_labels(open(&a.hyp)?)?;
    let (word_lang, lex_langs) = match &a.lexicon {
        Some(p) => {
            let lex = Lexicon::read(open(p)?)?;
            let langs: Vec<String> = lex.languages().into_iter().filter(|l| l != SHARED_LANG).collect();
            (lex.word_languages(), langs)
        }
        None => (HashMap::new(), Vec::new()),
    };
    let langs = match a.langs {
        Some(l) if l.len() == 2 => l,
        Some(l) => return Err(Error::config(format!("--langs needs two names, got {}", l.len()))),
        None if lex_langs.len() == 2 => lex_langs,
        None if a.lexicon.is_none() => vec!["a".to_string(), "b".to_string()],
        None => {
            return Err(Error::config(format!(
                "lexicon has {} languages; pass --langs a,b",
                lex_langs.len()
            )))
        }
    };
    let report = score_wer(&refs, &hyps, &word_lang, [&langs[0], &langs[1]])?;
    print!("{}", report.to_table());
    if let Some(p) = &a.json {
        write_file(p, |w| {
            serde_json::to_writer_pretty(&mut *w, &report).map_err(|e| Error::Io(e.into()))?;
            writeln!(w)?;
            Ok(())
        })?;
    }
    Ok(())
}

fn run_experiment_cmd(a: RunExperiment) -> Result<()> {
    let cfg = load_config(&a.config, a.seed)?;
    let results = run_experiment(&cfg, &a.out)?;
    print!("{}", results_table(&results));
    Ok(())
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenData(a) => gen_data(a),
        Command::TrainLm(a) => train_lm_cmd(a),
        Command::InterpLm(a) => interp_lm(a),
        Command::TrainAm(a) => train_am_cmd(a),
        Command::MapEmbed(a) => map_embed(a),
        Command::TrainRnnlm(a) => train_rnnlm(a),
        Command::AdaptRnnlm(a) => adapt_rnnlm(a),
        Command::GenText(a) => gen_text(a),
        Command::BuildGraph(a) => build_graph(a),
        Command::BuildMultigraph(a) => build_multigraph_cmd(a),
        Command::Decode(a) => decode(a),
        Command::Rescore(a) => rescore(a),
        Command::Score(a) => score(a),
        Command::RunExperiment(a) => run_experiment_cmd(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
