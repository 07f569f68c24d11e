use anyhow::{anyhow, Context as _};
use serde::Serialize;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use nerboot::audit::api::{self, AuditService};
use nerboot::audit::{AuditLoop, AuditStore};
use nerboot::bootstrap::{assemble_seed, build_vocab, filter_by_vocab, tokenize, RuleConfig, RuleEngine, Vocabulary};
use nerboot::corpus::{dataset_stats, read_dataset, split_dataset, write_dataset, LabeledSentence, Provenance, SentenceId};
use nerboot::eval::{ablation_run, config_hash, evaluate_model, provenance};
use nerboot::mtbr::{fit, load_model, save_model, Variant};
use nerboot::synth::{self, SynthConfig};

use crate::config::RunConfig;
use crate::run::{self, LogSink, RunRecord};
use crate::{
    AblateArgs, BootstrapCmd, Cli, Command, DatasetCmd, EvalArgs, Failure, IterateArgs, ModelFlags, ServeArgs,
    SynthArgs, TrainArgs, VocabCmd,
};

fn data(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Data(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

struct Ctx<'a> {
    cfg: RunConfig,
    explicit_dir: Option<PathBuf>,
    dir: Option<PathBuf>,
    sink: &'a LogSink,
}

impl Ctx<'_> {
    /// Creates the run directory on first use, attaches the log file and
    /// writes `run.json`.
    fn run_dir(&mut self, command: &str) -> Result<PathBuf, Failure> {
        if let Some(d) = &self.dir {
            return Ok(d.clone());
        }
        let hash = config_hash(&self.cfg);
        let dir = run::run_dir(&self.cfg, &hash, self.explicit_dir.as_deref());
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("creating run directory {}", dir.display()))
            .map_err(runtime)?;
        self.sink.attach(&dir.join("run.log")).map_err(runtime)?;
        let record = RunRecord {
            command,
            args: std::env::args().collect(),
            config_hash: hash,
            seed: self.cfg.hyper.seed,
            started: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            nerboot_version: env!("CARGO_PKG_VERSION"),
            provenance: provenance(),
            config: &self.cfg,
        };
        run::write_record(&dir, &record).map_err(runtime)?;
        log::info!("run directory {}", dir.display());
        self.dir = Some(dir.clone());
        Ok(dir)
    }

    fn output(&mut self, given: Option<PathBuf>, default_name: &str, command: &str) -> Result<PathBuf, Failure> {
        match given {
            Some(p) => Ok(p),
            None => Ok(self.run_dir(command)?.join(default_name)),
        }
    }

    fn apply(&mut self, flags: &ModelFlags) -> Result<(), Failure> {
        let h = &mut self.cfg.hyper;
        if let Some(v) = flags.epochs {
            h.epochs = v;
        }
        if let Some(v) = flags.seed {
            h.seed = v;
        }
        if let Some(v) = flags.batch_size {
            h.batch_size = v;
        }
        if let Some(v) = flags.lr {
            self.cfg.optimizer.learning_rate = v;
        }
        if let Some(v) = &flags.variant {
            let variant = Variant::parse(v).ok_or_else(|| Failure::Usage(format!("unknown variant `{v}`")))?;
            self.cfg.variant = variant.flags();
        }
        self.validate()
    }

    fn validate(&self) -> Result<(), Failure> {
        self.cfg.hyper.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        self.cfg.optimizer.validate().map_err(|e| Failure::Usage(e.to_string()))
    }
}

fn need(flag: Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf, Failure> {
    flag.or_else(|| configured.clone())
        .ok_or_else(|| Failure::Usage(format!("no {what} given: pass --{what} or set paths.{what} in the config")))
}

fn exists(path: &Path) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(data(anyhow!("{}: no such file or directory", path.display())))
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .with_context(|| path.display().to_string())
        .map_err(data)
}

fn read_data(path: &Path, provenance: Provenance) -> Result<Vec<LabeledSentence>, Failure> {
    exists(path)?;
    read_dataset(path, provenance)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(data)
}

fn write_data(path: &Path, sentences: &[LabeledSentence]) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(runtime)?;
    }
    write_dataset(path, sentences).map_err(runtime)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(value).map_err(runtime)?;
    std::fs::write(path, json)
        .with_context(|| path.display().to_string())
        .map_err(runtime)
}

pub fn dispatch(cli: Cli, sink: &LogSink) -> Result<(), Failure> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Usage(format!("{e:#}")))?,
        None => RunConfig::default(),
    };
    let mut ctx = Ctx {
        cfg,
        explicit_dir: cli.run_dir,
        dir: None,
        sink,
    };
    match cli.command {
        Command::Vocab(c) => vocab(&mut ctx, c),
        Command::Bootstrap(c) => bootstrap(&mut ctx, c),
        Command::Dataset(c) => dataset(&mut ctx, c),
        Command::Train(a) => train(&mut ctx, a),
        Command::Eval(a) => eval(&mut ctx, a),
        Command::Ablate(a) => ablate(&mut ctx, a),
        Command::Iterate(a) => iterate(&mut ctx, a),
        Command::Serve(a) => serve(&mut ctx, a),
        Command::Synth(a) => synthesize(&mut ctx, a),
    }
}

fn vocab(ctx: &mut Ctx, cmd: VocabCmd) -> Result<(), Failure> {
    let VocabCmd::Build { mut inputs, output, keep_case } = cmd;
    if inputs.is_empty() {
        inputs.push(need(None, &ctx.cfg.paths.corpus, "corpus")?);
    }
    let texts = inputs.iter().map(|p| read_text(p)).collect::<Result<Vec<_>, _>>()?;
    let v = build_vocab(texts.iter().flat_map(|t| t.lines()), !keep_case);
    let out = ctx.output(output, "vocab.txt", "vocab build")?;
    std::fs::write(&out, v.to_text()).map_err(runtime)?;
    println!("{} tokens written to {}", v.len(), out.display());
    Ok(())
}

fn bootstrap(ctx: &mut Ctx, cmd: BootstrapCmd) -> Result<(), Failure> {
    match cmd {
        BootstrapCmd::Filter { source, vocab, output, keep_case } => {
            let source = need(source, &ctx.cfg.paths.homologous, "homologous")?;
            let vocab = need(vocab, &ctx.cfg.paths.vocab, "vocab")?;
            exists(&vocab)?;
            let sentences = read_data(&source, Provenance::Homologous)?;
            let v = Vocabulary::from_text(&read_text(&vocab)?, !keep_case);
            let kept = filter_by_vocab(&sentences, &v);
            let out = ctx.output(output, "filtered.jsonl", "bootstrap filter")?;
            write_data(&out, &kept)?;
            println!("kept {} of {} sentences, written to {}", kept.len(), sentences.len(), out.display());
        }
        BootstrapCmd::Rules { input, rules, homologous, output } => {
            let input = need(input, &ctx.cfg.paths.corpus, "corpus")?;
            let rules = need(rules, &ctx.cfg.paths.rules, "rules")?;
            exists(&input)?;
            exists(&rules)?;
            let config = RuleConfig::from_toml(&read_text(&rules)?)
                .with_context(|| rules.display().to_string())
                .map_err(data)?;
            let engine = RuleEngine::new(&config)
                .with_context(|| rules.display().to_string())
                .map_err(data)?;
            let homologous = homologous
                .map(|p| read_data(&p, Provenance::Homologous))
                .transpose()?
                .unwrap_or_default();
            let source = input
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "corpus".into());
            let raw: Vec<(SentenceId, Vec<String>)> = read_text(&input)?
                .lines()
                .enumerate()
                .map(|(i, l)| (SentenceId::new(&source, i), tokenize(l)))
                .filter(|(_, t)| !t.is_empty())
                .collect();
            let tagged = engine.apply_all(&raw);
            let seed = assemble_seed(&homologous, &tagged);
            let out = ctx.output(output, "seed.jsonl", "bootstrap rules")?;
            write_data(&out, &seed)?;
            println!(
                "{} of {} raw sentences tagged, {} homologous, {} in seed dataset {}",
                tagged.len(),
                raw.len(),
                homologous.len(),
                seed.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn dataset(ctx: &mut Ctx, cmd: DatasetCmd) -> Result<(), Failure> {
    match cmd {
        DatasetCmd::Split { input, seed, out_dir } => {
            let input = need(input, &ctx.cfg.paths.dataset, "dataset")?;
            let sentences = read_data(&input, Provenance::External)?;
            if let Some(s) = seed {
                ctx.cfg.hyper.seed = s;
            }
            let split = split_dataset(&sentences, ctx.cfg.hyper.seed).map_err(data)?;
            let dir = match out_dir {
                Some(d) => d,
                None => ctx.run_dir("dataset split")?,
            };
            std::fs::create_dir_all(&dir).map_err(runtime)?;
            let ext = if input.extension().is_some_and(|e| e == "jsonl") { "jsonl" } else { "bio" };
            for (name, part) in [("train", &split.train), ("dev", &split.dev), ("test", &split.test)] {
                write_data(&dir.join(format!("{name}.{ext}")), part)?;
            }
            println!(
                "train {} / dev {} / test {} written to {}",
                split.train.len(),
                split.dev.len(),
                split.test.len(),
                dir.display()
            );
        }
        DatasetCmd::Stats { input, json } => {
            let input = need(input, &ctx.cfg.paths.dataset, "dataset")?;
            let stats = dataset_stats(&read_data(&input, Provenance::External)?);
            if json {
                println!("{}", serde_json::to_string_pretty(&stats).map_err(runtime)?);
            } else {
                println!("{stats}");
            }
        }
        DatasetCmd::Validate { input } => {
            let input = need(input, &ctx.cfg.paths.dataset, "dataset")?;
            let stats = dataset_stats(&read_data(&input, Provenance::External)?);
            println!("ok: {} sentences, {} tokens", stats.sentence_count, stats.token_count);
        }
    }
    Ok(())
}

fn train(ctx: &mut Ctx, args: TrainArgs) -> Result<(), Failure> {
    ctx.apply(&args.model)?;
    let train_path = need(args.train, &ctx.cfg.paths.train, "train")?;
    let dev_path = args.dev.or_else(|| ctx.cfg.paths.dev.clone());
    let train = read_data(&train_path, Provenance::External)?;
    let dev = dev_path.map(|p| read_data(&p, Provenance::External)).transpose()?;
    let dir = ctx.run_dir("train")?;

    let (trainer, report) = fit(&train, &ctx.cfg.train_config()).map_err(runtime)?;
    let model_dir = dir.join("model");
    save_model(&trainer.model, trainer.rng(), &model_dir).map_err(runtime)?;
    write_json(&dir.join("train_report.json"), &report)?;
    println!("model written to {}", model_dir.display());
    if let Some(dev) = dev {
        let e = evaluate_model(&trainer.model, &dev).map_err(runtime)?;
        write_json(&dir.join("metrics.json"), &e)?;
        println!(
            "dev: precision {:.4} recall {:.4} f1 {:.4} bre {:.4}",
            e.prf.micro.precision, e.prf.micro.recall, e.prf.micro.f1, e.bre.bre_ratio
        );
    }
    Ok(())
}

fn eval(ctx: &mut Ctx, args: EvalArgs) -> Result<(), Failure> {
    let model_dir = need(args.model, &ctx.cfg.paths.model, "model")?;
    let data_path = need(args.data, &ctx.cfg.paths.test, "test")?;
    exists(&model_dir)?;
    let sentences = read_data(&data_path, Provenance::External)?;
    let (model, _) = load_model(&model_dir).map_err(data)?;
    let dir = ctx.run_dir("eval")?;
    let e = evaluate_model(&model, &sentences).map_err(runtime)?;
    write_json(&dir.join("metrics.json"), &e)?;
    println!("type\tprecision\trecall\tf1");
    for (t, s) in &e.prf.per_type {
        println!("{t}\t{:.4}\t{:.4}\t{:.4}", s.precision, s.recall, s.f1);
    }
    let m = &e.prf.micro;
    println!("micro\t{:.4}\t{:.4}\t{:.4}", m.precision, m.recall, m.f1);
    println!("bre\t{:.4}", e.bre.bre_ratio);
    println!("token_accuracy\t{:.4}", e.token_accuracy);
    Ok(())
}

fn ablate(ctx: &mut Ctx, args: AblateArgs) -> Result<(), Failure> {
    ctx.apply(&args.model)?;
    if !args.seeds.is_empty() {
        ctx.cfg.seeds = args.seeds;
    }
    let variants = if args.variants.is_empty() {
        Variant::ALL.to_vec()
    } else {
        args.variants
            .iter()
            .map(|v| Variant::parse(v).ok_or_else(|| Failure::Usage(format!("unknown variant `{v}`"))))
            .collect::<Result<Vec<_>, _>>()?
    };
    let train_path = need(args.train, &ctx.cfg.paths.train, "train")?;
    let test_path = need(args.test, &ctx.cfg.paths.test, "test")?;
    let train = read_data(&train_path, Provenance::External)?;
    let test = read_data(&test_path, Provenance::External)?;
    let dir = ctx.run_dir("ablate")?;

    let mut table = ablation_run(&train, &test, &ctx.cfg.train_config(), &ctx.cfg.seeds, &variants);
    table.config_hash = config_hash(&ctx.cfg);
    std::fs::write(dir.join("ablation.tsv"), table.to_tsv()).map_err(runtime)?;
    write_json(&dir.join("ablation.json"), &table)?;
    print!("{}", table.to_tsv());
    if let Some(r) = table.rows.iter().find(|r| r.runs == 0) {
        return Err(runtime(anyhow!("every run of `{}` failed: {}", r.label, r.failures.join("; "))));
    }
    Ok(())
}

fn iterate(ctx: &mut Ctx, args: IterateArgs) -> Result<(), Failure> {
    ctx.apply(&args.model)?;
    let dataset_path = need(args.dataset, &ctx.cfg.paths.dataset, "dataset")?;
    let store_path = need(args.store, &ctx.cfg.paths.audit_store, "audit_store")?;
    let dev_path = args.dev.or_else(|| ctx.cfg.paths.dev.clone());
    let dataset = read_data(&dataset_path, Provenance::External)?;
    let dev = dev_path.map(|p| read_data(&p, Provenance::External)).transpose()?;
    let mut store = AuditStore::open(&store_path).map_err(data)?;
    if store.reports().last().is_some_and(|r| r.converged) {
        log::warn!("the loop already converged; running another iteration anyway");
    }
    let dir = ctx.run_dir("iterate")?;

    let mut lp = AuditLoop {
        dataset,
        dev,
        train: ctx.cfg.train_config(),
        config: ctx.cfg.audit_loop,
    };
    let report = lp.iterate(&mut store).map_err(runtime)?;
    write_data(&dir.join("dataset.jsonl"), &lp.dataset)?;
    write_json(&dir.join("report.json"), &report)?;
    println!(
        "iteration {}: {} of {} sentences disagree ({:.2}%), {} queued, {} merged{}",
        report.iteration,
        report.disagreement_count,
        report.dataset_size,
        100.0 * report.disagreement_rate,
        report.enqueued_count,
        report.audited_count,
        if report.converged { "; converged" } else { "" }
    );
    Ok(())
}

fn serve(ctx: &mut Ctx, args: ServeArgs) -> Result<(), Failure> {
    let addr: SocketAddr = args
        .addr
        .parse()
        .map_err(|e| Failure::Usage(format!("bad --addr `{}`: {e}", args.addr)))?;
    ctx.validate()?;
    let store_path = need(args.store, &ctx.cfg.paths.audit_store, "audit_store")?;
    if let Some(ui) = &args.ui_dir {
        exists(ui)?;
    }
    let store = AuditStore::open(&store_path).map_err(data)?;
    let mut service = AuditService::new(store);
    if let Some(path) = args.dataset.or_else(|| ctx.cfg.paths.dataset.clone()) {
        let dataset = read_data(&path, Provenance::External)?;
        let dev = ctx
            .cfg
            .paths
            .dev
            .as_deref()
            .map(|p| read_data(p, Provenance::External))
            .transpose()?;
        service.audit_loop = Some(AuditLoop {
            dataset,
            dev,
            train: ctx.cfg.train_config(),
            config: ctx.cfg.audit_loop,
        });
        service.dataset_out = args.dataset_out;
    }
    let shared = Arc::new(Mutex::new(service));
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(runtime)?;
    rt.block_on(api::serve(shared, addr, args.ui_dir))
        .with_context(|| format!("serving on {addr}"))
        .map_err(runtime)
}

fn synthesize(ctx: &mut Ctx, args: SynthArgs) -> Result<(), Failure> {
    let cfg = SynthConfig {
        sentences: args.sentences,
        seed: args.seed,
    };
    let sentences = synth::generate(&cfg);
    let out = ctx.output(args.output, "synth.bio", "synth")?;
    write_data(&out, &sentences)?;
    if let Some(path) = &args.rules_out {
        std::fs::write(path, synth::rule_config().to_toml())
            .with_context(|| path.display().to_string())
            .map_err(runtime)?;
    }
    println!("{} sentences written to {}", sentences.len(), out.display());
    Ok(())
}
