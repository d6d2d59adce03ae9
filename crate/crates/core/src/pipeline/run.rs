use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{lm_names, rnn_names, EvalSet, ExperimentConfig, RescoreKind, SystemConfig, BASELINE_RNN, CS_RNN};
use super::rundir::{RunDir, StageRecord};
use super::synth::{gen_corpus, switched_sentence_fraction, token_switch_rate, Corpora, LanguagePair};
use crate::ctc::{train_am, write_features, write_labels, AcousticModel, AmConfig, FeatureSynth, PosteriorGrid, Utterance};
use crate::decoder::{
    beam_decode, route_rescore, score_wer, write_nbest, NBestList, RescoreModels, SubsetScore, DEFAULT_TAG,
};
use crate::error::{Error, Result};
use crate::fst::{write_text, Fst};
use crate::graph::{
    build_grammar_fst, build_lexicon_fst, build_multigraph, build_search_graph, build_token_fst, GraphTag, Lexicon,
    UnitInventory, SHARED_LANG,
};
use crate::ngram::{interpolate, train_kn, write_arpa, ArpaModel, KnConfig};
use crate::nn::write_params;
use crate::rnnlm::{adapt_lm, lm_perplexity, train_lm, AdaptConfig, RnnConfig, RnnLm, WordScorer};
use crate::xling::{seed_dictionary, self_learn, train_toy_embeddings, EmbeddingSpace, SelfLearnConfig};

type Sentences = Vec<Vec<String>>;

/// One synthetic utterance: transcript, CTC labels and features.
#[derive(Clone, Debug)]
pub struct SpeechUtt {
    pub id: String,
    pub words: Vec<String>,
    pub units: Vec<String>,
    pub labels: Vec<usize>,
    pub features: Vec<Vec<f64>>,
}

/// Everything derived from the corpus spec and the speech settings.
pub struct SyntheticData {
    pub pair: LanguagePair,
    pub corpora: Corpora,
    pub inventory: UnitInventory,
    pub sets: BTreeMap<&'static str, Vec<SpeechUtt>>,
}

impl SyntheticData {
    pub fn lexicon(&self) -> &Lexicon {
        self.pair.lexicon()
    }

    pub fn set(&self, name: &str) -> &[SpeechUtt] {
        self.sets.get(name).map_or(&[], Vec::as_slice)
    }

    pub fn transcripts(&self, name: &str) -> Sentences {
        self.set(name).iter().map(|u| u.words.clone()).collect()
    }

    /// Text for the code-switched n-gram and RNN LMs: both monolingual
    /// samples, the code-switched text and the training transcripts.
    pub fn bilingual_text(&self) -> Sentences {
        let c = &self.corpora;
        let mut out = Vec::with_capacity(c.mono_a.len() + c.mono_b.len() + c.cs.len());
        out.extend(c.mono_a.iter().cloned());
        out.extend(c.mono_b.iter().cloned());
        out.extend(c.cs.iter().cloned());
        out.extend(self.transcripts("train"));
        out
    }

    /// In-domain code-switched text used for adaptation.
    pub fn adaptation_text(&self) -> Sentences {
        let mut out = self.corpora.cs.clone();
        out.extend(self.transcripts("train"));
        out
    }
}

/// Generates the language pair, text corpora and the train/dev/test speech.
pub fn generate_data(cfg: &ExperimentConfig) -> Result<SyntheticData> {
    let pair = LanguagePair::generate(&cfg.corpus, cfg.stage_seed("lexicon"))?;
    let corpora = gen_corpus(&pair, cfg.stage_seed("text"));
    let units: Vec<&String> = cfg.corpus.units_a.iter().chain(&cfg.corpus.units_b).collect();
    let inventory = UnitInventory::new(&units)?;
    let synth = FeatureSynth::new(
        inventory.units().len(),
        cfg.speech.feat_dim,
        cfg.speech.noise_std,
        cfg.stage_seed("feature-means"),
    )?;
    let spelling: HashMap<&str, &[String]> =
        pair.lexicon().entries().iter().map(|e| (e.word.as_str(), e.units.as_slice())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.stage_seed("speech"));
    let mut sets = BTreeMap::new();
    for (name, n) in [("train", cfg.speech.train_utts), ("dev", cfg.speech.dev_utts), ("test", cfg.speech.test_utts)] {
        let mut utts = Vec::with_capacity(n);
        for i in 0..n {
            let words = pair.cs_sentence(&mut rng);
            let word_units: Vec<Vec<usize>> = words
                .iter()
                .map(|w| spelling[w.as_str()].iter().map(|u| inventory.ctc_index(u).expect("unit in inventory")).collect())
                .collect();
            let features = synth.synthesize(&word_units, &mut rng)?;
            let units: Vec<String> = words.iter().flat_map(|w| spelling[w.as_str()].iter().cloned()).collect();
            utts.push(SpeechUtt {
                id: format!("{name}-{i:05}"),
                words,
                labels: word_units.concat(),
                units,
                features,
            });
        }
        sets.insert(name, utts);
    }
    Ok(SyntheticData { pair, corpora, inventory, sets })
}

fn write_corpus(w: &mut dyn std::io::Write, text: &[Vec<String>]) -> Result<()> {
    for s in text {
        writeln!(w, "{}", s.join(" "))?;
    }
    Ok(())
}

/// Writes the lexicon, unit inventory, text corpora and speech sets.
pub fn write_data(run: &mut RunDir, data: &SyntheticData) -> Result<()> {
    let langs = data.pair.languages();
    run.write_with("data/lexicon.txt", |w| data.lexicon().write(w))?;
    run.write_with("data/units.txt", |w| data.inventory.write(w))?;
    let c = &data.corpora;
    let b_large = format!("data/text/{}++.txt", langs[1]);
    for (rel, text) in [
        (format!("data/text/{}.txt", langs[0]), &c.mono_a),
        (format!("data/text/{}.txt", langs[1]), &c.mono_b),
        (b_large, &c.mono_b_large),
        ("data/text/cs.txt".to_string(), &c.cs),
    ] {
        run.write_with(&rel, |w| write_corpus(w, text))?;
    }
    for (name, utts) in &data.sets {
        let feats: Vec<(String, Vec<Vec<f64>>)> = utts.iter().map(|u| (u.id.clone(), u.features.clone())).collect();
        run.write_with(&format!("data/{name}.feats"), |w| write_features(w, &feats))?;
        let labels: Vec<(String, Vec<String>)> = utts.iter().map(|u| (u.id.clone(), u.units.clone())).collect();
        run.write_with(&format!("data/{name}.labels"), |w| write_labels(w, &labels))?;
        let trans: Vec<(String, Vec<String>)> = utts.iter().map(|u| (u.id.clone(), u.words.clone())).collect();
        run.write_with(&format!("data/{name}.trans"), |w| write_labels(w, &trans))?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct InterpPoint {
    pub weight: f64,
    pub dev_perplexity: f64,
}

pub struct NgramModels {
    pub models: BTreeMap<String, ArpaModel>,
    pub interp_trace: Vec<InterpPoint>,
    pub interp_weight: f64,
}

/// Trains the n-gram LMs. The interpolation weight of the code-switched
/// model is picked on a grid by dev-transcript perplexity.
pub fn train_ngrams(cfg: &ExperimentConfig, data: &SyntheticData) -> Result<NgramModels> {
    let names = lm_names(&cfg.corpus);
    let kn = KnConfig::new(cfg.ngram.order);
    let c = &data.corpora;
    let mut models = BTreeMap::new();
    let cs = train_kn(&data.bilingual_text(), &kn)?;
    let large = train_kn(&c.mono_b_large, &kn)?;
    models.insert(names[1].clone(), train_kn(&c.mono_a, &kn)?);
    models.insert(names[2].clone(), train_kn(&c.mono_b, &kn)?);
    let dev = data.transcripts("dev");
    let mut trace = Vec::new();
    let mut best: Option<(f64, f64, ArpaModel)> = None;
    if dev.is_empty() {
        return Err(Error::config("interpolation weight tuning needs dev utterances"));
    }
    for k in 0..=cfg.ngram.interp_steps {
        let w = k as f64 / cfg.ngram.interp_steps as f64;
        let m = interpolate(&cs, &large, w)?;
        let ppl = m.perplexity(&dev)?;
        trace.push(InterpPoint { weight: w, dev_perplexity: ppl });
        if best.as_ref().is_none_or(|b| ppl < b.1) {
            best = Some((w, ppl, m));
        }
    }
    let (weight, _, interp) = best.expect("at least one grid point");
    log::info!("interpolation weight {weight}");
    models.insert(names[0].clone(), cs);
    models.insert(names[3].clone(), large);
    models.insert(names[4].clone(), interp);
    Ok(NgramModels { models, interp_trace: trace, interp_weight: weight })
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbedSummary {
    pub iterations: usize,
    pub converged: bool,
    pub seed_pairs: usize,
    pub induced_pairs: usize,
    /// Fraction of induced pairs that are true translations.
    pub dictionary_accuracy: f64,
    pub objective_trace: Vec<f64>,
}

pub struct Embeddings {
    pub mapped: EmbeddingSpace,
    pub unmapped: EmbeddingSpace,
    pub summary: EmbedSummary,
}

/// Monolingual toy spaces for both languages, mapped into a shared space
/// by self-learning from identically spelled words.
pub fn build_embeddings(run: &mut RunDir, cfg: &ExperimentConfig, data: &SyntheticData) -> Result<Embeddings> {
    let langs = data.pair.languages();
    let c = &data.corpora;
    let ea = train_toy_embeddings(&c.mono_a, cfg.embed.dim, cfg.embed.window)?.normalize()?;
    let eb = train_toy_embeddings(&c.mono_b_large, cfg.embed.dim, cfg.embed.window)?.normalize()?;
    let seed = seed_dictionary(ea.words(), eb.words())?;
    let sl = SelfLearnConfig { max_iterations: cfg.embed.max_iterations, mode: cfg.embed.mode };
    let res = self_learn(&ea, &eb, &seed, &sl)?;
    let ma = ea.map(&res.mapping.w_m)?;
    let mb = eb.map(&res.mapping.w_n)?;
    let truth: std::collections::HashSet<(String, String)> = data.pair.translations().into_iter().collect();
    let correct = res
        .dictionary
        .pairs()
        .iter()
        .filter(|&&(i, j)| truth.contains(&(ea.words()[i].clone(), eb.words()[j].clone())))
        .count();
    let summary = EmbedSummary {
        iterations: res.iterations,
        converged: res.converged,
        seed_pairs: seed.len(),
        induced_pairs: res.dictionary.len(),
        dictionary_accuracy: correct as f64 / res.dictionary.len().max(1) as f64,
        objective_trace: res.trace.clone(),
    };
    run.write_with(&format!("embed/{}.vec", langs[0]), |w| ea.write(w))?;
    run.write_with(&format!("embed/{}.vec", langs[1]), |w| eb.write(w))?;
    run.write_with("embed/dictionary.tsv", |w| res.dictionary.write(&ea, &eb, w))?;
    let mapped = ma.merge(&mb)?;
    let unmapped = ea.merge(&eb)?;
    run.write_with("embed/mapped.vec", |w| mapped.write(w))?;
    run.write_with("embed/unmapped.vec", |w| unmapped.write(w))?;
    run.write_json("embed/summary.json", &summary)?;
    Ok(Embeddings { mapped, unmapped, summary })
}

#[derive(Clone, Debug, Serialize)]
pub struct RnnSummary {
    pub name: String,
    pub train_perplexity: Vec<f64>,
    pub dev_perplexity: f64,
    pub test_perplexity: f64,
}

/// Trains the RNN LMs the systems need. The code-switched model is also
/// reported before adaptation as `cs-rnn-unadapted`.
pub fn train_rnns(
    run: &mut RunDir,
    cfg: &ExperimentConfig,
    data: &SyntheticData,
    emb: &Embeddings,
) -> Result<(BTreeMap<String, RnnLm>, Vec<RnnSummary>)> {
    let names = rnn_names(&cfg.corpus);
    let need = cfg.required_rnns();
    let mut models = BTreeMap::new();
    let mut summaries = Vec::new();
    let dev = data.transcripts("dev");
    let test = data.transcripts("test");
    let bilingual = data.bilingual_text();
    let rnn_cfg = |stage: &str| RnnConfig { seed: cfg.stage_seed(stage), ..cfg.rnnlm.clone() };
    let record = |name: &str, m: &RnnLm, train_ppl: Vec<f64>, summaries: &mut Vec<RnnSummary>| -> Result<()> {
        let ppl = |t: &Sentences| if t.is_empty() { Ok(f64::NAN) } else { lm_perplexity(m, t) };
        summaries.push(RnnSummary {
            name: name.to_string(),
            train_perplexity: train_ppl,
            dev_perplexity: ppl(&dev)?,
            test_perplexity: ppl(&test)?,
        });
        Ok(())
    };
    for name in &names {
        if !need.contains(name) {
            continue;
        }
        let t0 = Instant::now();
        let (model, log) = if name == BASELINE_RNN {
            train_lm(&bilingual, &emb.unmapped, &rnn_cfg("rnn-baseline"))?
        } else if name == CS_RNN {
            let (base, log) = train_lm(&bilingual, &emb.mapped, &rnn_cfg("rnn-cs"))?;
            record("cs-rnn-unadapted", &base, log.iter().map(|e| e.train_perplexity).collect(), &mut summaries)?;
            let acfg = AdaptConfig { seed: cfg.stage_seed("rnn-adapt"), ..cfg.adapt.clone() };
            adapt_lm(&base, &data.adaptation_text(), &acfg)?
        } else if *name == names[2] {
            train_lm(&data.corpora.mono_a, &emb.mapped, &rnn_cfg("rnn-a"))?
        } else {
            train_lm(&data.corpora.mono_b_large, &emb.mapped, &rnn_cfg("rnn-b"))?
        };
        log::info!("rnn {name} trained in {:.1}s", t0.elapsed().as_secs_f64());
        record(name, &model, log.iter().map(|e| e.train_perplexity).collect(), &mut summaries)?;
        run.write_with(&format!("rnnlm/{name}.params"), |w| model.save(w))?;
        models.insert(name.clone(), model);
    }
    Ok((models, summaries))
}

/// Token, lexicon and per-LM search graphs.
pub fn build_graphs(
    cfg: &ExperimentConfig,
    data: &SyntheticData,
    lms: &BTreeMap<String, ArpaModel>,
) -> Result<BTreeMap<String, Fst>> {
    let t = build_token_fst(&data.inventory);
    let l = build_lexicon_fst(data.lexicon(), &data.inventory)?;
    let words = data.lexicon().word_table();
    let mut graphs = BTreeMap::new();
    for s in &cfg.systems {
        for name in &s.graphs {
            if graphs.contains_key(name) {
                continue;
            }
            let g = build_grammar_fst(&lms[name], &words)?;
            let tlg = build_search_graph(&t, &l, &g)?;
            log::info!("graph {name}: {} states, {} arcs", tlg.num_states(), tlg.num_arcs());
            graphs.insert(name.clone(), tlg);
        }
    }
    Ok(graphs)
}

fn system_graph(s: &SystemConfig, graphs: &BTreeMap<String, Fst>) -> Result<Fst> {
    if s.is_union() {
        let parts: Vec<(Fst, GraphTag)> =
            s.graphs.iter().map(|g| Ok((graphs[g].clone(), GraphTag::new(g.clone())?))).collect::<Result<_>>()?;
        build_multigraph(&parts)
    } else {
        Ok(graphs[&s.graphs[0]].clone())
    }
}

fn rescore_models<'a>(
    cfg: &ExperimentConfig,
    s: &SystemConfig,
    lms: &'a BTreeMap<String, ArpaModel>,
    rnns: &'a BTreeMap<String, RnnLm>,
) -> Result<RescoreModels<'a>> {
    let model = |name: &str| -> Result<&'a dyn WordScorer> {
        rnns.get(name)
            .map(|m| m as &dyn WordScorer)
            .ok_or_else(|| Error::Invariant(format!("RNN LM '{name}' was not trained")))
    };
    let mut rnn = BTreeMap::new();
    let mut ngram = BTreeMap::new();
    let tags: Vec<&str> = if s.is_union() {
        s.graphs.iter().map(String::as_str).collect()
    } else {
        vec![DEFAULT_TAG]
    };
    for tag in &tags {
        let lm_name = if s.is_union() { *tag } else { s.graphs[0].as_str() };
        ngram.insert(tag.to_string(), &lms[lm_name] as &dyn WordScorer);
        let rnn_name = match s.rescore {
            RescoreKind::Baseline => BASELINE_RNN,
            _ => cfg.route(if s.is_union() { tag } else { DEFAULT_TAG }),
        };
        rnn.insert(tag.to_string(), model(rnn_name)?);
    }
    Ok(RescoreModels { rnn, ngram })
}

#[derive(Clone, Debug, Serialize)]
pub struct SetResult {
    pub set: String,
    pub subsets: Vec<SubsetScore>,
    pub empty_hypotheses: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SystemResult {
    pub name: String,
    pub graphs: Vec<String>,
    pub union: bool,
    pub rescore: RescoreKind,
    pub sets: Vec<SetResult>,
}

impl SystemResult {
    pub fn wer(&self, set: &str, subset: &str) -> Option<f64> {
        self.sets
            .iter()
            .find(|s| s.set == set)?
            .subsets
            .iter()
            .find(|x| x.name == subset)?
            .wer
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SubsetTally {
    pub set: String,
    pub subset: String,
    pub utterances: usize,
    pub words: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NgramPerplexity {
    pub lm: String,
    pub set: String,
    /// Perplexity on the utterances of the language-B subset.
    pub mono_b_perplexity: f64,
    pub all_perplexity: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResults {
    pub languages: [String; 2],
    pub cs_switched_fraction: f64,
    pub cs_token_switch_rate: f64,
    pub am_final_uer: f64,
    pub am_epochs: usize,
    pub interp_weight: f64,
    pub interp_trace: Vec<InterpPoint>,
    pub ngram_perplexities: Vec<NgramPerplexity>,
    pub embeddings: EmbedSummary,
    pub rnnlms: Vec<RnnSummary>,
    pub tallies: Vec<SubsetTally>,
    pub systems: Vec<SystemResult>,
}

impl ExperimentResults {
    pub fn system(&self, name: &str) -> Option<&SystemResult> {
        self.systems.iter().find(|s| s.name == name)
    }
}

fn subset_names(langs: [&str; 2]) -> [String; 4] {
    [langs[0].to_string(), langs[1].to_string(), format!("{}-{}", langs[0], langs[1]), "all".to_string()]
}

fn fmt_wer(w: Option<f64>) -> String {
    w.map_or_else(|| "-".to_string(), |w| format!("{w:.2}"))
}

/// Renders the results as aligned text tables.
pub fn results_table(r: &ExperimentResults) -> String {
    let langs = [r.languages[0].as_str(), r.languages[1].as_str()];
    let subsets = subset_names(langs);
    let mut out = String::new();
    let _ = writeln!(out, "Reference words per subset");
    let _ = writeln!(out, "{:<6} {:<8} {:>6} {:>8} {:>8} {:>8}", "set", "subset", "utts", langs[0], langs[1], SHARED_LANG);
    for t in &r.tallies {
        let n = |k: &str| t.words.get(k).copied().unwrap_or(0);
        let _ = writeln!(
            out,
            "{:<6} {:<8} {:>6} {:>8} {:>8} {:>8}",
            t.set,
            t.subset,
            t.utterances,
            n(langs[0]),
            n(langs[1]),
            n(SHARED_LANG)
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "n-gram perplexity");
    let _ = writeln!(out, "{:<14} {:<6} {:>10} {:>10}", "lm", "set", langs[1], "all");
    for p in &r.ngram_perplexities {
        let _ = writeln!(out, "{:<14} {:<6} {:>10.2} {:>10.2}", p.lm, p.set, p.mono_b_perplexity, p.all_perplexity);
    }
    let _ = writeln!(out, "interpolation weight: {:.2}", r.interp_weight);
    let _ = writeln!(out);
    if !r.rnnlms.is_empty() {
        let _ = writeln!(out, "RNN LM perplexity");
        let _ = writeln!(out, "{:<18} {:>10} {:>10}", "model", "dev", "test");
        for m in &r.rnnlms {
            let _ = writeln!(out, "{:<18} {:>10.2} {:>10.2}", m.name, m.dev_perplexity, m.test_perplexity);
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(
        out,
        "embeddings: {} iterations, {} induced pairs, accuracy {:.3}",
        r.embeddings.iterations, r.embeddings.induced_pairs, r.embeddings.dictionary_accuracy
    );
    let _ = writeln!(out, "acoustic model unit error rate: {:.2}%", r.am_final_uer);
    let _ = writeln!(out);
    let _ = writeln!(out, "WER (%)");
    let sets: Vec<String> = r.systems.first().map_or(Vec::new(), |s| s.sets.iter().map(|x| x.set.clone()).collect());
    let mut header = format!("{:<26} {:<9}", "system", "rescore");
    for set in &sets {
        for sub in &subsets {
            header.push_str(&format!(" {:>12}", format!("{set}:{sub}")));
        }
    }
    let _ = writeln!(out, "{header}");
    for s in &r.systems {
        let rescore = match s.rescore {
            RescoreKind::None => "-",
            RescoreKind::Baseline => "baseline",
            RescoreKind::Routed => "routed",
        };
        let mut line = format!("{:<26} {:<9}", s.name, rescore);
        for set in &sets {
            for sub in &subsets {
                line.push_str(&format!(" {:>12}", fmt_wer(s.wer(set, sub))));
            }
        }
        let _ = writeln!(out, "{line}");
    }
    out
}

fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t0 = Instant::now();
    let r = f().map_err(|e| e.context(&format!("stage {name}")));
    log::info!("stage {name} finished in {:.1}s", t0.elapsed().as_secs_f64());
    r
}

/// Runs the whole experiment grid, persisting every artifact under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentResults> {
    cfg.validate()?;
    let mut run = RunDir::create(out)?;
    run.stage("config", &[]);
    run.write_str("config.toml", &cfg.to_toml()?)?;

    run.stage("data", &["config.toml"]);
    let data = stage("data", || {
        let d = generate_data(cfg)?;
        write_data(&mut run, &d)?;
        Ok(d)
    })?;
    let langs = data.pair.languages();
    let word_lang = data.lexicon().word_languages();

    run.stage("ngram", &["data/text", "data/train.trans", "data/dev.trans"]);
    let ngrams = stage("ngram", || {
        let n = train_ngrams(cfg, &data)?;
        for (name, m) in &n.models {
            run.write_with(&format!("lm/{name}.arpa"), |w| write_arpa(m, w))?;
        }
        run.write_json("lm/interp.json", &n.interp_trace)?;
        Ok(n)
    })?;

    run.stage("am", &["data/train.feats", "data/train.labels", "data/dev.feats", "data/dev.labels"]);
    let (am, am_stats) = stage("am", || {
        let to_utts = |name: &str| -> Vec<Utterance> {
            data.set(name)
                .iter()
                .map(|u| Utterance { id: u.id.clone(), features: u.features.clone(), labels: u.labels.clone() })
                .collect()
        };
        let am_cfg = AmConfig { seed: cfg.stage_seed("am"), ..cfg.am.clone() };
        let (am, stats) = train_am(&to_utts("train"), &to_utts("dev"), data.inventory.num_symbols(), &am_cfg)?;
        run.write_with("am/am.params", |w| write_params(am.store(), w))?;
        run.write_json("am/train_log.json", &stats)?;
        Ok((am, stats))
    })?;

    let need_rnn = !cfg.required_rnns().is_empty();
    let (rnns, rnn_summaries, embed_summary) = if need_rnn {
        run.stage("embed", &["data/text"]);
        let emb = stage("embed", || build_embeddings(&mut run, cfg, &data))?;
        run.stage("rnnlm", &["embed/mapped.vec", "embed/unmapped.vec", "data/text", "data/train.trans"]);
        let (rnns, summaries) = stage("rnnlm", || train_rnns(&mut run, cfg, &data, &emb))?;
        (rnns, summaries, emb.summary)
    } else {
        (BTreeMap::new(), Vec::new(), EmbedSummary {
            iterations: 0,
            converged: false,
            seed_pairs: 0,
            induced_pairs: 0,
            dictionary_accuracy: 0.0,
            objective_trace: Vec::new(),
        })
    };

    run.stage("graph", &["data/lexicon.txt", "data/units.txt", "lm"]);
    let graphs = stage("graph", || {
        let g = build_graphs(cfg, &data, &ngrams.models)?;
        for (name, f) in &g {
            run.write_with(&format!("graphs/{name}.fst"), |w| write_text(f, w))?;
            run.write_with(&format!("graphs/{name}.fst.isyms"), |w| f.isyms().write(w))?;
            run.write_with(&format!("graphs/{name}.fst.osyms"), |w| f.osyms().write(w))?;
        }
        Ok(g)
    })?;

    let mut eval_sets: Vec<EvalSet> = cfg.speech.eval_sets.clone();
    eval_sets.sort();
    eval_sets.dedup();
    let grids: BTreeMap<EvalSet, Vec<PosteriorGrid>> = stage("posteriors", || {
        eval_sets
            .iter()
            .map(|&set| {
                let grids = posteriors(&am, data.set(set.name()))?;
                Ok((set, grids))
            })
            .collect()
    })?;

    // Systems differing only in rescoring share one first pass.
    let mut first_pass: BTreeMap<(Vec<String>, bool, EvalSet), Vec<NBestList>> = BTreeMap::new();
    let mut systems = Vec::new();
    for s in &cfg.systems {
        run.stage(&format!("decode:{}", s.name), &["am/am.params", "graphs", "rnnlm"]);
        let result = stage(&format!("decode:{}", s.name), || {
            let graph = system_graph(s, &graphs)?;
            let models = match s.rescore {
                RescoreKind::None => None,
                _ => Some(rescore_models(cfg, s, &ngrams.models, &rnns)?),
            };
            let mut sets = Vec::new();
            for &set in &eval_sets {
                let utts = data.set(set.name());
                let key = (s.graphs.clone(), s.is_union(), set);
                let lists = match first_pass.get(&key) {
                    Some(l) => l.clone(),
                    None => {
                        let l: Vec<NBestList> = utts
                            .par_iter()
                            .zip(&grids[&set])
                            .map(|(u, g)| beam_decode(&u.id, &graph, g, &cfg.decode).map_err(|e| e.context(&u.id)))
                            .collect::<Result<_>>()?;
                        first_pass.insert(key, l.clone());
                        l
                    }
                };
                let dir = format!("decode/{}/{}", s.name, set.name());
                run.write_with(&format!("{dir}.nbest"), |w| write_nbest(w, &lists))?;
                let finals = match &models {
                    None => lists,
                    Some(m) => {
                        let r = route_rescore(&lists, m, cfg.rescore.weight, cfg.rescore.mode)?;
                        run.write_with(&format!("{dir}.rescored.nbest"), |w| write_nbest(w, &r))?;
                        r
                    }
                };
                let hyps: Vec<(String, Vec<String>)> = finals
                    .iter()
                    .map(|l| (l.utt_id.clone(), l.best().map(|h| h.words.clone()).unwrap_or_default()))
                    .collect();
                let empty = finals.iter().filter(|l| l.hyps.is_empty()).count();
                if empty > 0 {
                    log::warn!("{}: {empty} utterances without hypotheses on {}", s.name, set.name());
                }
                run.write_with(&format!("{dir}.hyp"), |w| write_labels(w, &hyps))?;
                let refs: Vec<(String, Vec<String>)> = utts.iter().map(|u| (u.id.clone(), u.words.clone())).collect();
                let report = score_wer(&refs, &hyps, &word_lang, langs)?;
                run.write_json(&format!("{dir}.wer.json"), &report)?;
                sets.push(SetResult { set: set.name().to_string(), subsets: report.subsets, empty_hypotheses: empty });
            }
            Ok(SystemResult {
                name: s.name.clone(),
                graphs: s.graphs.clone(),
                union: s.is_union(),
                rescore: s.rescore,
                sets,
            })
        })?;
        systems.push(result);
    }

    run.stage("report", &["decode"]);
    let results = ExperimentResults {
        languages: [langs[0].to_string(), langs[1].to_string()],
        cs_switched_fraction: switched_sentence_fraction(&data.corpora.cs, &word_lang),
        cs_token_switch_rate: token_switch_rate(&data.corpora.cs, &word_lang),
        am_final_uer: am_stats.last().map_or(f64::NAN, |s| s.valid_uer),
        am_epochs: am_stats.len(),
        interp_weight: ngrams.interp_weight,
        interp_trace: ngrams.interp_trace.clone(),
        ngram_perplexities: ngram_perplexities(cfg, &data, &ngrams.models, &word_lang, langs, &eval_sets)?,
        embeddings: embed_summary,
        rnnlms: rnn_summaries,
        tallies: tallies(&data, &word_lang, langs, &eval_sets)?,
        systems,
    };
    run.write_str("report/results.txt", &results_table(&results))?;
    run.write_json("report/results.json", &results)?;
    let _: Vec<StageRecord> = run.finish()?;
    Ok(results)
}

fn posteriors(am: &AcousticModel, utts: &[SpeechUtt]) -> Result<Vec<PosteriorGrid>> {
    utts.par_iter().map(|u| am.posteriors(&u.features).map_err(|e| e.context(&u.id))).collect()
}

fn subset_of(words: &[String], word_lang: &HashMap<String, String>, langs: [&str; 2]) -> usize {
    let has = |l: &str| words.iter().any(|w| word_lang.get(w).is_some_and(|x| x == l));
    match (has(langs[0]), has(langs[1])) {
        (true, true) => 2,
        (false, true) => 1,
        _ => 0,
    }
}

fn tallies(
    data: &SyntheticData,
    word_lang: &HashMap<String, String>,
    langs: [&str; 2],
    sets: &[EvalSet],
) -> Result<Vec<SubsetTally>> {
    let names = subset_names(langs);
    let mut out = Vec::new();
    for &set in sets {
        let mut t: Vec<SubsetTally> = names[..3]
            .iter()
            .map(|n| SubsetTally { set: set.name().into(), subset: n.clone(), utterances: 0, words: BTreeMap::new() })
            .collect();
        for u in data.set(set.name()) {
            let k = subset_of(&u.words, word_lang, langs);
            t[k].utterances += 1;
            for w in &u.words {
                let l = word_lang.get(w).ok_or_else(|| Error::Invariant(format!("word '{w}' missing from lexicon")))?;
                *t[k].words.entry(l.clone()).or_default() += 1;
            }
        }
        out.extend(t);
    }
    Ok(out)
}

fn ngram_perplexities(
    cfg: &ExperimentConfig,
    data: &SyntheticData,
    lms: &BTreeMap<String, ArpaModel>,
    word_lang: &HashMap<String, String>,
    langs: [&str; 2],
    sets: &[EvalSet],
) -> Result<Vec<NgramPerplexity>> {
    let names = lm_names(&cfg.corpus);
    let mut out = Vec::new();
    for &set in sets {
        let all = data.transcripts(set.name());
        let mono_b: Sentences = all.iter().filter(|s| subset_of(s, word_lang, langs) == 1).cloned().collect();
        for name in [&names[0], &names[3], &names[4]] {
            let m = &lms[name];
            out.push(NgramPerplexity {
                lm: name.clone(),
                set: set.name().to_string(),
                mono_b_perplexity: if mono_b.is_empty() { f64::NAN } else { m.perplexity(&mono_b)? },
                all_perplexity: if all.is_empty() { f64::NAN } else { m.perplexity(&all)? },
            });
        }
    }
    Ok(out)
}
