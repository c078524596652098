use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use scramblenet::experiment::{
    cmd_encode, cmd_eval, cmd_generate, cmd_train, cmd_verify, ExperimentConfig, VerifyRequest,
    CONFIG_KEYS,
};
use scramblenet::Error;

fn cli() -> Command {
    let mut root = Command::new("scramblenet")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Generate correlator images for unitary ensembles and train a classifier on them")
        .subcommand_required(true)
        .arg(Arg::new("config").long("config").value_name("PATH").global(true).help("key = value config file"))
        .arg(Arg::new("out").long("out").value_name("DIR").global(true).help("directory for all output files"));
    for &key in CONFIG_KEYS {
        let dashed: &'static str = Box::leak(key.replace('_', "-").into_boxed_str());
        let mut arg = Arg::new(key).long(dashed).value_name("VALUE").global(true).hide(!matches!(key, "seed" | "threads"));
        if dashed != key {
            arg = arg.alias(key);
        }
        root = root.arg(arg);
    }
    root.subcommand(Command::new("generate").about("Draw sample matrices for both ensemble classes"))
        .subcommand(Command::new("encode").about("Encode a sample file as labelled images"))
        .subcommand(Command::new("train").about("Train the classifier on an image file"))
        .subcommand(
            Command::new("eval")
                .about("Accuracy of a checkpoint on an image file")
                .arg(Arg::new("checkpoint").long("checkpoint").value_name("PATH"))
                .arg(Arg::new("dataset").long("dataset").value_name("PATH")),
        )
        .subcommand(
            Command::new("verify")
                .about("Twirl errors and frame potentials of one ensemble")
                .arg(Arg::new("ensemble").long("ensemble").required(true))
                .arg(Arg::new("trials").long("trials").default_value("1000"))
                .arg(Arg::new("exact").long("exact").action(ArgAction::SetTrue))
                .arg(Arg::new("csv").long("csv").value_name("PATH")),
        )
        .after_help(format!("Config keys (also accepted as --key value): {}", CONFIG_KEYS.join(", ")))
}

fn config_from(matches: &ArgMatches) -> Result<ExperimentConfig, Error> {
    let mut cfg = match matches.get_one::<String>("config") {
        Some(path) => ExperimentConfig::load(Path::new(path))?,
        None => ExperimentConfig::default(),
    };
    if let Some(dir) = matches.get_one::<String>("out") {
        cfg.set_output_dir(Path::new(dir));
    }
    for &key in CONFIG_KEYS {
        if let Some(value) = matches.get_one::<String>(key) {
            cfg.set(key, value)?;
        }
    }
    Ok(cfg)
}

fn parse<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, Error> {
    value.parse().map_err(|_| Error::Argument(format!("invalid --{name} `{value}`")))
}

fn run(matches: &ArgMatches) -> Result<(), Error> {
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let cfg = config_from(sub)?;
    match name {
        "generate" => {
            let s = cmd_generate(&cfg)?;
            for c in &s.calibrations {
                println!("brickwork depth {} at N={}: {}", c.depth, c.requested_qubits, c.rule());
            }
            println!("wrote {} records to {} in {:.1}s", s.records, cfg.samples_path.display(), s.seconds);
        }
        "encode" => {
            let d = cmd_encode(&cfg)?;
            let [a, b] = d.class_counts();
            println!("wrote {} images ({a} + {b}) to {}", d.len(), cfg.images_path.display());
        }
        "train" => {
            let t = cmd_train(&cfg)?;
            println!(
                "trained on {} images, validated on {}, {} epochs in {:.1}s",
                t.train_images,
                t.validation_images,
                t.report.rows.len(),
                t.report.wall_seconds
            );
            if let Some(acc) = t.report.headline_accuracy() {
                println!("validation accuracy (mean of last 10 epochs): {acc:.4}");
            }
            println!("checkpoint {}, metrics {}", cfg.model_path.display(), cfg.metrics_path.display());
        }
        "eval" => {
            let checkpoint = sub.get_one::<String>("checkpoint").map(PathBuf::from).unwrap_or(cfg.model_path.clone());
            let dataset = sub.get_one::<String>("dataset").map(PathBuf::from).unwrap_or(cfg.validation_path.clone());
            let acc = cmd_eval(&checkpoint, &dataset, &cfg.eval_path)?;
            println!("{acc:.4}");
        }
        "verify" => {
            let req = VerifyRequest {
                ensemble: sub.get_one::<String>("ensemble").expect("required").clone(),
                n_qubits: cfg.n_qubits,
                trials: parse("trials", sub.get_one::<String>("trials").expect("default"))?,
                seed: cfg.seed,
                exact: sub.get_flag("exact"),
                brickwork_depth: cfg.brickwork_depth,
            };
            let out = sub
                .get_one::<String>("csv")
                .map(PathBuf::from)
                .unwrap_or_else(|| cfg.eval_path.with_file_name("verify.csv"));
            let rows = cmd_verify(&req, &out)?;
            for r in rows {
                match r.stderr {
                    Some(se) => println!("{} = {:.6} ± {:.6}", r.metric, r.value, se),
                    None => println!("{} = {:.6}", r.metric, r.value),
                }
            }
            println!("wrote {}", out.display());
        }
        _ => unreachable!("unknown subcommand"),
    }
    Ok(())
}

fn report(kind: &str, message: &str) -> ExitCode {
    let flat = message.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
    eprintln!("error kind={kind} msg=\"{flat}\"");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return report("usage", first);
        }
    };
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e.kind(), &e.to_string()),
    }
}
