use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Subcommand};
use contrast_core::eval::{
    cooccurrence_ratios, hallucination_ratios, percent, read_jsonl, report, run_mme_subset,
    run_pope, CaptionRecord, CooccurrenceStats, Lexicon, MmeItem, PopeItem, ReportMetadata,
};
use contrast_core::models::{serve_mock, ServerOptions};
use contrast_core::{decode_sequence, MockTable, VisualContextRef};
use serde_json::json;

use crate::config::RunConfig;
use crate::failure::Failure;

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode one answer and print it
    RunDecode(DecodeArgs),
    /// Run a POPE-style yes/no benchmark and write reports
    RunPope,
    /// Run the MME hallucination subset and write reports
    RunMme,
    /// Measure object hallucination in captions
    AnalyzeCooccur(CooccurArgs),
    /// Serve a mock logit table over HTTP
    ServeMock(ServeArgs),
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Visual context id
    #[arg(long = "visual", value_name = "ID")]
    pub visual_id: String,
    #[arg(long)]
    pub question: String,
    /// Write per-step traces as JSON (`-` for stdout)
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CooccurArgs {
    /// Object lexicon (JSON)
    #[arg(long, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,
    /// Restrict to captions whose image contains this object
    #[arg(long)]
    pub anchor: Option<String>,
    /// Keep only the first K rows of each table
    #[arg(long, value_name = "K")]
    pub top_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Mock logit table (JSON)
    #[arg(long, value_name = "FILE")]
    pub table: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub address: String,
    /// Answer 404 for visual ids absent from the table
    #[arg(long)]
    pub strict_visual: bool,
}

pub fn run(command: Command, config: RunConfig) -> Result<(), Failure> {
    match command {
        Command::RunDecode(args) => run_decode(&config, &args),
        Command::RunPope => cmd_run_pope(&config),
        Command::RunMme => cmd_run_mme(&config),
        Command::AnalyzeCooccur(args) => analyze_cooccur(&config, &args),
        Command::ServeMock(args) => serve(&args),
    }
}

fn run_decode(config: &RunConfig, args: &DecodeArgs) -> Result<(), Failure> {
    let model = config.open_model()?;
    let visual = VisualContextRef::new(args.visual_id.clone())?;
    let tree = config.template.instantiate(&visual, &args.question)?;
    let output = decode_sequence(&tree, &model, &config.decode)?;
    match model.info().detokenize(&output.tokens) {
        Some(text) => println!("{text}"),
        None => {
            let ids: Vec<String> = output.tokens.iter().map(|t| t.0.to_string()).collect();
            println!("{}", ids.join(" "));
        }
    }
    if let Some(path) = &args.trace {
        let text = serde_json::to_string_pretty(&json!({
            "tokens": output.tokens,
            "steps": output.traces,
        }))
        .map_err(|e| Failure::config(e.to_string()))?;
        if path.as_os_str() == "-" {
            println!("{text}");
        } else {
            write(path, &(text + "\n"))?;
        }
    }
    Ok(())
}

fn metadata(config: &RunConfig, model: &str) -> ReportMetadata {
    ReportMetadata::new(config.echo(), config.decode.seed, model)
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::io("writing", path, e))
}

fn write_reports(out: &Path, stem: &str, json: String, csv: String) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| Failure::io("creating", out, e))?;
    for (ext, body) in [("json", json), ("csv", csv)] {
        let path = out.join(format!("{stem}.{ext}"));
        write(&path, &body)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_run_pope(config: &RunConfig) -> Result<(), Failure> {
    let items: Vec<PopeItem> = read_jsonl(config.dataset()?)?;
    let model = config.open_model()?;
    let result = run_pope(&items, &config.template, &model, &config.decode, config.workers)?;
    let meta = metadata(config, &model.info().name);
    write_reports(
        &config.out,
        "pope_report",
        report::pope_json(&meta, &result),
        report::pope_csv(&meta, &result),
    )?;
    let m = &result.overall.metrics;
    println!("accuracy  {}", percent(m.accuracy));
    println!("precision {}", percent(m.precision));
    println!("recall    {}", percent(m.recall));
    println!("f1        {}", percent(m.f1));
    println!("ambiguous {}", result.overall.ambiguous);
    Ok(())
}

fn cmd_run_mme(config: &RunConfig) -> Result<(), Failure> {
    let items: Vec<MmeItem> = read_jsonl(config.dataset()?)?;
    let model = config.open_model()?;
    let result = run_mme_subset(&items, &config.template, &model, &config.decode, config.workers)?;
    let meta = metadata(config, &model.info().name);
    write_reports(
        &config.out,
        "mme_report",
        report::mme_json(&meta, &result),
        report::mme_csv(&meta, &result),
    )?;
    for (task, score) in &result.tasks {
        println!("{task:<10} {:.2}", score.score);
    }
    println!("{:<10} {:.2}", "total", result.total);
    Ok(())
}

fn analyze_cooccur(config: &RunConfig, args: &CooccurArgs) -> Result<(), Failure> {
    let captions_path = config.dataset()?;
    let lexicon_path = args
        .lexicon
        .as_deref()
        .ok_or_else(|| Failure::config("--lexicon is required"))?;
    let lexicon = Lexicon::load(lexicon_path)?;
    let records: Vec<CaptionRecord> = read_jsonl(captions_path)?;
    let mut stats = CooccurrenceStats {
        objects: hallucination_ratios(&records, &lexicon),
        conditional: match &args.anchor {
            Some(anchor) => Some(cooccurrence_ratios(&records, &lexicon, anchor)?),
            None => None,
        },
    };
    if let Some(k) = args.top_k {
        stats.objects.rows.truncate(k);
        if let Some(c) = &mut stats.conditional {
            c.rows.truncate(k);
        }
    }
    let echo = json!({
        "captions": captions_path.display().to_string(),
        "lexicon": lexicon_path.display().to_string(),
        "anchor": args.anchor,
        "top_k": args.top_k,
    });
    let meta = ReportMetadata::new(echo, config.decode.seed, "none");
    write_reports(
        &config.out,
        "cooccur_report",
        report::cooccur_json(&meta, &stats),
        report::cooccur_csv(&meta, &stats),
    )?;
    for r in &stats.objects.rows {
        println!(
            "{:<16} {}/{} {:.4}",
            r.object, r.hallucination_count, r.mention_count, r.ratio
        );
    }
    if let Some(c) = &stats.conditional {
        if c.empty {
            println!("anchor {:?}: no caption's image contains it", c.anchor);
        }
        for r in &c.rows {
            println!(
                "{} -> {:<16} {}/{} {:.4}",
                c.anchor,
                r.object,
                r.hallucination_count,
                r.mention_count,
                r.conditional_hallucination_ratio
            );
        }
    }
    Ok(())
}

fn serve(args: &ServeArgs) -> Result<(), Failure> {
    let table = Arc::new(MockTable::load(&args.table)?);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure {
            code: crate::failure::INTERNAL,
            message: format!("starting runtime: {e}"),
        })?;
    let options = ServerOptions {
        strict_visual: args.strict_visual,
    };
    runtime.block_on(serve_mock(table, &args.address, options, async {
        let _ = tokio::signal::ctrl_c().await;
    }))?;
    Ok(())
}

