use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use s2t_core::dataset::corpus::multilingual_sentences;
use s2t_core::dataset::{generate_dataset, load_jsonl, save_jsonl, Dataset, GenConfig, GlyphBank, Language};
use s2t_core::eval::{ablate, evaluate, export_attention, monotone_tracking, transcribe, AblationSpec};
use s2t_core::model::{count_params, save_checkpoint, Checkpoint, Model};
use s2t_core::stroke::StrokeSequence;
use s2t_core::tensor::Scalar;
use s2t_core::training::{fit, prepare_examples, transfer_model, TransferMode};
use s2t_core::vocab::{bpe_train, SymbolVocab, Vocab};
use s2t_core::{Error, Result};

use crate::config::{RunConfig, VocabChoice};

fn out_dir(out: Option<&Path>) -> Result<PathBuf> {
    let dir = out.map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_config(config: &RunConfig, dir: &Path) -> Result<()> {
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(config)? + "\n")?;
    Ok(())
}

fn corpus(config: &RunConfig) -> Result<Vec<String>> {
    config.corpus.sentences(config.data.corpus_sentences, config.seed)
}

pub fn generate(config: &RunConfig) -> Result<Dataset> {
    let gen = GenConfig {
        subjects: config.data.subjects,
        sentences_per_subject: config.data.sentences_per_subject,
        max_strokes: config.corpus.max_strokes,
        split: config.data.split.clone(),
        style: config.data.style.clone(),
        seed: config.seed,
        timestamps: config.data.timestamps,
    };
    generate_dataset(&corpus(config)?, &GlyphBank::builtin(), &gen)
}

pub fn gen_data(config: &RunConfig, out: Option<&Path>) -> Result<()> {
    let dir = out_dir(out)?;
    let data = generate(config)?;
    for name in ["train", "val", "test"] {
        save_jsonl(data.split(name).expect("known split"), &dir.join(format!("{name}.jsonl")))?;
    }
    write_config(config, &dir)?;
    println!("{}", json!({"train": data.train.len(), "val": data.val.len(), "test": data.test.len()}));
    Ok(())
}

pub fn build_vocab(config: &RunConfig) -> Result<Vocab> {
    Ok(match &config.vocab {
        VocabChoice::Letters => Vocab::Symbols(SymbolVocab::letters()),
        VocabChoice::Desk => Vocab::Symbols(SymbolVocab::desk()),
        VocabChoice::Punctuated { punctuation } => Vocab::Symbols(SymbolVocab::with_punctuation(punctuation)?),
        VocabChoice::Bpe { path: Some(path), .. } => Vocab::load(path)?,
        VocabChoice::Bpe { size, path: None } => Vocab::Bpe(bpe_train(&bpe_corpus(config), *size)?),
    })
}

/// BPE vocabularies are always learned on the mixed en/fr/de corpus.
fn bpe_corpus(config: &RunConfig) -> Vec<String> {
    multilingual_sentences(config.data.corpus_sentences, config.seed)
}

pub fn train_bpe(config: &RunConfig, out: Option<&Path>) -> Result<()> {
    let VocabChoice::Bpe { size, .. } = config.vocab else {
        return Err(Error::Config("train-bpe needs vocab.kind = \"bpe\"".into()));
    };
    let dir = out_dir(out)?;
    let vocab = Vocab::Bpe(bpe_train(&bpe_corpus(config), size)?);
    let path = dir.join("vocab.txt");
    vocab.save(&path)?;
    println!("{}", json!({"vocab": path, "size": vocab.len()}));
    Ok(())
}

/// A directory of `{split}.jsonl` files, a single JSONL file, or
/// `synthetic[_<language>]` for data generated from the run config.
pub fn load_data(spec: &str, config: Option<&RunConfig>) -> Result<Dataset> {
    let path = Path::new(spec);
    if path.is_dir() {
        let read = |name: &str| {
            let p = path.join(format!("{name}.jsonl"));
            if p.exists() {
                load_jsonl(&p)
            } else {
                Ok(vec![])
            }
        };
        return Ok(Dataset { train: read("train")?, val: read("val")?, test: read("test")? });
    }
    if path.is_file() {
        let all = load_jsonl(path)?;
        return Ok(Dataset { train: all.clone(), val: all.clone(), test: all });
    }
    if let Some(rest) = spec.strip_prefix("synthetic") {
        let config = config.ok_or_else(|| Error::Config("generated data needs a run config".into()))?;
        let mut config = config.clone();
        if let Some(lang) = rest.strip_prefix('_') {
            config.corpus.language = lang.parse::<Language>().map_err(Error::Config)?;
        }
        return generate(&config);
    }
    Err(Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, format!("no data at {spec}"))))
}

fn split<'a>(data: &'a Dataset, name: &str) -> Result<&'a [StrokeSequence]> {
    data.split(name).ok_or_else(|| Error::Config(format!("unknown split {name:?}; use train, val or test")))
}

pub struct TrainArgs<'a> {
    pub data: &'a str,
    pub encoder: Option<&'a Path>,
    pub transfer: TransferMode,
    pub out: Option<&'a Path>,
}

pub fn train(config: &RunConfig, args: &TrainArgs<'_>) -> Result<()> {
    match config.precision {
        64 => train_as::<f64>(config, args),
        _ => train_as::<f32>(config, args),
    }
}

fn train_as<T: Scalar>(config: &RunConfig, args: &TrainArgs<'_>) -> Result<()> {
    let (theta_e, theta_d) = count_params(&config.model);
    println!("{}", json!({"theta_e": theta_e, "theta_d": theta_d}));
    let vocab = build_vocab(config)?;
    if vocab.len() != config.model.vocab_size {
        return Err(Error::Config(format!(
            "vocabulary has {} tokens but model.vocab_size = {}",
            vocab.len(),
            config.model.vocab_size
        )));
    }
    let data = load_data(args.data, Some(config))?;
    let train = prepare_examples(&data.train, &vocab, &config.model)?;
    let val = prepare_examples(&data.val, &vocab, &config.model)?;
    let mut model: Model<T> = match args.encoder {
        Some(path) => transfer_model(&Checkpoint::load(path)?.model, config.model.clone(), args.transfer, config.seed)?,
        None => Model::new(config.model.clone(), config.seed)?,
    };
    let mut train_config = config.train.clone();
    train_config.freeze_encoder |= args.encoder.is_some() && args.transfer == TransferMode::Frozen;
    let dir = out_dir(args.out)?;
    let report = if train_config.max_epochs == 0 {
        None
    } else {
        Some(fit(&mut model, &vocab, &train, &val, &train_config, |m| eprintln!("{}", m.csv_line()))?)
    };
    save_checkpoint(&model, &vocab, &dir.join("model.s2t"))?;
    vocab.save(&dir.join("vocab.txt"))?;
    write_config(config, &dir)?;
    if let Some(r) = &report {
        fs::write(dir.join("metrics.csv"), r.to_csv())?;
    }
    println!(
        "{}",
        json!({
            "checkpoint": dir.join("model.s2t"),
            "best_epoch": report.as_ref().map(|r| r.best_epoch),
            "best_val_xel": report.as_ref().map(|r| r.best_val_xel),
            "steps": report.as_ref().map_or(0, |r| r.steps),
        })
    );
    Ok(())
}

fn load_model<T: Scalar>(path: &Path) -> Result<(Model<T>, Vocab)> {
    let ck = Checkpoint::load(path)?;
    Ok((ck.model.cast(), ck.vocab))
}

pub fn infer(checkpoint: &Path, input: &Path, precision: u32) -> Result<()> {
    match precision {
        64 => infer_as::<f64>(checkpoint, input),
        _ => infer_as::<f32>(checkpoint, input),
    }
}

fn infer_as<T: Scalar>(checkpoint: &Path, input: &Path) -> Result<()> {
    let (model, vocab) = load_model::<T>(checkpoint)?;
    let examples = prepare_examples(&load_jsonl(input)?, &vocab, &model.config)?;
    for e in &examples {
        println!("{}", transcribe(&model, &vocab, e)?.0);
    }
    Ok(())
}

pub struct EvalArgs<'a> {
    pub checkpoint: &'a Path,
    pub data: &'a str,
    pub split: &'a str,
    pub precision: u32,
    pub out: Option<&'a Path>,
}

pub fn eval(args: &EvalArgs<'_>, ablation: Option<&AblationSpec>) -> Result<()> {
    match args.precision {
        64 => eval_as::<f64>(args, ablation),
        _ => eval_as::<f32>(args, ablation),
    }
}

fn eval_as<T: Scalar>(args: &EvalArgs<'_>, ablation: Option<&AblationSpec>) -> Result<()> {
    let (model, vocab) = load_model::<T>(args.checkpoint)?;
    let data = load_data(args.data, None)?;
    let mut seqs = split(&data, args.split)?.to_vec();
    if let Some(spec) = ablation {
        let bank = GlyphBank::builtin();
        seqs = seqs.iter().map(|s| ablate(s, spec, &bank)).collect::<Result<_>>()?;
    }
    let examples = prepare_examples(&seqs, &vocab, &model.config)?;
    let report = evaluate(&model, &vocab, &examples)?;
    let text = serde_json::to_string_pretty(&report)?;
    if let Some(out) = args.out {
        let dir = out_dir(Some(out))?;
        if ablation.is_some() {
            save_jsonl(&seqs, &dir.join("ablated.jsonl"))?;
        }
        fs::write(dir.join("report.json"), text.clone() + "\n")?;
    }
    println!("{text}");
    Ok(())
}

pub fn attn(args: &EvalArgs<'_>, index: usize) -> Result<()> {
    let (model, vocab) = load_model::<f64>(args.checkpoint)?;
    let data = load_data(args.data, None)?;
    let seqs = split(&data, args.split)?;
    let seq = seqs
        .get(index)
        .ok_or_else(|| Error::Config(format!("index {index} out of range for {} examples", seqs.len())))?;
    let example = prepare_examples(std::slice::from_ref(seq), &vocab, &model.config)?.remove(0);
    let (text, decoded) = transcribe(&model, &vocab, &example)?;
    let tokens: Vec<String> = decoded.ids.iter().map(|&id| vocab.token(id).unwrap_or_default()).collect();
    let dir = out_dir(args.out)?;
    let files = export_attention(&decoded.attention, &example.labels, &tokens, &dir)?;
    let monotone: Vec<Vec<Option<f64>>> =
        decoded.attention.layers.iter().map(|heads| heads.iter().map(monotone_tracking).collect()).collect();
    println!(
        "{}",
        json!({"reference": example.reference, "hypothesis": text, "files": files, "monotone_tracking": monotone})
    );
    Ok(())
}
