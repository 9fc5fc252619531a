use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use log::{info, warn};
use rayon::prelude::*;

use wayfind_core::dataset::{
    read_dataset, read_profiles, sidecar_path, split_indices, write_dataset, node_encoder_for,
    Dataset, SplitConfig,
};
use wayfind_core::evaluation::{evaluate, group_eval, per_node_report, GroupBy};
use wayfind_core::experiments::{
    compare_baselines, importance_report, per_task_models, profile_ablation, sweep, usage_stats,
    ExpConfig, ExperimentReport, SweepParam, SweepSpec,
};
use wayfind_core::mapping::{
    extract_with, read_control_points, read_sequences, read_transforms, write_sequences,
    MappingConfig, MappingWarning, Snapper, TrajectoryReader, TransformSet,
};
use wayfind_core::models::{design, mlr_train, rf_train, ForestParams, MlrConfig, Model, ModelFile};
use wayfind_core::network::{validate_numbering, IndoorNetwork};
use wayfind_core::synth::{run_synth, SynthSpec, BAND_FRACTION};
use wayfind_core::textio::read_json;

use crate::exit::input;
use crate::provenance::Provenance;
use crate::*;

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Net(NetCmd::Validate { file }) => net_validate(file),
        Command::Net(NetCmd::Stats { file }) => net_stats(file),
        Command::Synth(a) => synth(cli, a),
        Command::Map(a) => map(cli, a),
        Command::Featurize(a) => featurize(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Eval(a) => eval(cli, a),
        Command::Exp(e) => exp(cli, e),
    }
}

fn net_validate(file: &Path) -> Result<()> {
    let net = IndoorNetwork::load(file)?;
    let violations = validate_numbering(&net);
    let mut out = std::io::stdout().lock();
    for v in &violations {
        writeln!(out, "{}\t{}\t{}", v.node, serde_json::to_string(&v.rule)?.trim_matches('"'), v.detail)?;
    }
    if violations.is_empty() {
        writeln!(out, "ok: {} nodes, {} links", net.len(), net.links().len())?;
        Ok(())
    } else {
        Err(input(format!("{}: {} numbering violation(s)", file.display(), violations.len())))
    }
}

fn net_stats(file: &Path) -> Result<()> {
    let net = IndoorNetwork::load(file)?;
    println!("{}", serde_json::to_string_pretty(&net.stats())?);
    Ok(())
}

fn synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => SynthSpec::load(p)?,
        None => SynthSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec = spec.with_seed(seed);
    }
    if let Some(n) = a.agents {
        spec.synth.n_agents = n;
    }
    if let Some(noise) = a.noise {
        spec.synth.position_noise_m = noise;
    }
    let summary = run_synth(&spec, &a.out_dir)?;
    info!(
        "{} sequences, {} trajectory samples, {} lost",
        summary.sequences,
        summary.trajectory_samples,
        summary.lost.len()
    );
    for l in &summary.lost {
        warn!("agent {} lost on task {}; sequence left out", l.participant, l.task);
    }
    let mut prov = Provenance::new("synth", cli.seed).settings(&spec);
    if let Some(p) = &a.spec {
        prov.input(p)?;
    }
    use wayfind_core::synth::files::*;
    prov.outputs = [NETWORK, CONTROL_POINTS, TRANSFORMS, TRAJECTORIES, SEQUENCES, PROFILES, SUMMARY]
        .iter()
        .map(|s| s.to_string())
        .collect();
    prov.details = serde_json::to_value(&summary)?;
    prov.write(&a.out_dir)
}

fn load_transforms(path: &Path) -> Result<TransformSet> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    Ok(if is_csv {
        TransformSet::from_control_points(&read_control_points(path)?, BAND_FRACTION)?
    } else {
        read_transforms(path)?
    })
}

const MAP_CHUNK: usize = 32;

fn map(cli: &Cli, a: &MapArgs) -> Result<()> {
    let net = IndoorNetwork::load(&a.net)?;
    let transforms = load_transforms(&a.transforms)?;
    let cfg = MappingConfig {
        snap_radius: a.snap_radius,
        ..MappingConfig::default()
    };
    let snapper = Snapper::new(&net, cfg)?;
    let mut reader = TrajectoryReader::open(&a.traj)?;
    let mut sequences = Vec::new();
    let (mut non_adjacent, mut empty, mut unmatched) = (0usize, 0usize, 0usize);
    loop {
        let chunk: Vec<_> = reader.by_ref().take(MAP_CHUNK).collect::<Result<_, _>>()?;
        if chunk.is_empty() {
            break;
        }
        let extracted = chunk
            .par_iter()
            .map(|t| extract_with(t, &net, &transforms, &snapper))
            .collect::<Result<Vec<_>, _>>()?;
        for ex in extracted {
            unmatched += ex.unmatched_samples;
            let mut is_empty = false;
            for w in &ex.warnings {
                match w {
                    MappingWarning::EmptySequence => is_empty = true,
                    MappingWarning::NonAdjacent { index, from, to } => {
                        non_adjacent += 1;
                        warn!(
                            "{}/{}: visit {index} jumps from {from} to {to} (not linked)",
                            ex.sequence.participant, ex.sequence.task
                        );
                    }
                }
            }
            if is_empty || ex.sequence.nodes.is_empty() {
                empty += 1;
                warn!(
                    "{}/{}: no sample within the snap radius; left out",
                    ex.sequence.participant, ex.sequence.task
                );
            } else {
                sequences.push(ex.sequence);
            }
        }
    }
    write_sequences(&a.out, &sequences)?;
    info!("{} sequences written", sequences.len());
    let mut prov = Provenance::new("map", cli.seed).settings(cfg_json(&cfg));
    for p in [&a.net, &a.transforms, &a.traj] {
        prov.input(p)?;
    }
    prov.output(&a.out);
    prov.details = serde_json::json!({
        "sequences": sequences.len(),
        "empty_left_out": empty,
        "non_adjacent_warnings": non_adjacent,
        "unmatched_samples": unmatched,
    });
    prov.write(&a.out)
}

fn cfg_json(cfg: &MappingConfig) -> serde_json::Value {
    serde_json::json!({
        "snap_radius": cfg.snap_radius,
        "warn_on_nonadjacent": cfg.warn_on_nonadjacent,
    })
}

fn featurize(cli: &Cli, a: &FeaturizeArgs) -> Result<()> {
    let net = IndoorNetwork::load(&a.net)?;
    let seqs = read_sequences(&a.sequences)?;
    for s in &seqs {
        s.validate(Some(&net))?;
    }
    let mut ds = Dataset::from_sequences(&seqs, a.lag, node_encoder_for(&net)?)?;
    if let Some(p) = &a.profiles {
        ds = ds.with_profiles(&read_profiles(p)?)?;
    }
    write_dataset(&a.out, &ds)?;
    info!("{} samples, {} features", ds.len(), ds.n_features());
    let mut prov = Provenance::new("featurize", cli.seed)
        .settings(serde_json::json!({ "lag": a.lag, "profiles": a.profiles.is_some() }));
    prov.input(&a.net)?;
    prov.input(&a.sequences)?;
    if let Some(p) = &a.profiles {
        prov.input(p)?;
    }
    prov.output(&a.out);
    prov.output(&sidecar_path(&a.out));
    prov.details = serde_json::json!({ "samples": ds.len(), "dataset_digest": ds.digest() });
    prov.write(&a.out)
}

fn select(ds: &Dataset, split: &SplitArgs, seed: Option<u64>) -> Result<Dataset> {
    if split.split == Part::All {
        return Ok(ds.clone());
    }
    let cfg = SplitConfig {
        train_fraction: split.train_fraction,
        seed: seed.unwrap_or(0),
    };
    let idx = split_indices(ds.len(), &cfg)?;
    Ok(ds.subset(if split.split == Part::Train { &idx.train } else { &idx.test }))
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let full = read_dataset(&a.data)?;
    let ds = select(&full, &a.split, cli.seed)?;
    let (x, y) = design(&ds);
    let (model, settings) = match a.algo {
        Algo::Rf => {
            let mut p: ForestParams = match &a.params {
                Some(f) => read_json(f)?,
                None => ForestParams::default(),
            };
            if let Some(s) = cli.seed {
                p.seed = s;
            }
            (Model::Rf(rf_train(&x, &y, ds.n_classes(), &p)?), serde_json::to_value(p)?)
        }
        Algo::Mlr => {
            let mut c: MlrConfig = match &a.params {
                Some(f) => read_json(f)?,
                None => MlrConfig::default(),
            };
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            let m = mlr_train(&x, &y, ds.n_classes(), &c)?;
            if !m.training_log.converged {
                warn!("logistic regression stopped after {} iterations without converging", m.training_log.iterations);
            }
            (Model::Mlr(m), serde_json::to_value(c)?)
        }
    };
    let file = ModelFile::new(model, &ds, file_name(&sidecar_path(&a.data)));
    file.save(&a.out)?;
    let mut prov = Provenance::new("train", cli.seed).settings(serde_json::json!({
        "algo": a.algo,
        "params": settings,
        "split": a.split,
    }));
    prov.input(&a.data)?;
    if let Some(p) = &a.params {
        prov.input(p)?;
    }
    prov.output(&a.out);
    prov.details = serde_json::json!({ "training_samples": ds.len() });
    prov.write(&a.out)
}

fn group_by(g: GroupArg) -> GroupBy {
    match g {
        GroupArg::None => GroupBy::None,
        GroupArg::Task => GroupBy::Task,
        GroupArg::Gender => GroupBy::Gender,
        GroupArg::Device => GroupBy::Device,
        GroupArg::Familiarity => GroupBy::Familiarity,
        GroupArg::FamiliarityTask => GroupBy::FamiliarityTask,
    }
}

fn eval(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let mf = ModelFile::load(&a.model)?;
    let full = read_dataset(&a.data)?;
    mf.check_compatible(&full)?;
    let ds = select(&full, &a.split, cli.seed)?;
    let by = group_by(a.group_by);
    let profiles = match &a.profiles {
        Some(p) => Some(read_profiles(p)?),
        None if by.needs_profiles() => {
            return Err(input("--group-by on a participant attribute needs --profiles"))
        }
        None => None,
    };
    let report = evaluate(&mf.model, &ds)?;
    let per_node = per_node_report(&report.confusion, &ds.node_encoder);
    let groups = if by == GroupBy::None {
        BTreeMap::new()
    } else {
        group_eval(&mf.model, &ds, by, profiles.as_ref())?
    };
    println!(
        "n={} accuracy={:.6} balanced_accuracy={:.6}",
        report.n, report.accuracy, report.balanced_accuracy
    );
    for (g, r) in &groups {
        println!("{g}\tn={}\taccuracy={:.6}\tbalanced_accuracy={:.6}", r.n, r.accuracy, r.balanced_accuracy);
    }
    let mut prov = Provenance::new("eval", cli.seed).settings(serde_json::json!({ "split": a.split }));
    prov.input(&a.model)?;
    prov.input(&a.data)?;
    if let Some(p) = &a.profiles {
        prov.input(p)?;
    }
    if let Some(out) = &a.recall_out {
        let mut text = String::from("node\trecall\n");
        for (n, r) in &per_node {
            let _ = writeln!(text, "{n}\t{r:.6}");
        }
        std::fs::write(out, text).with_context(|| out.display().to_string())?;
        prov.output(out);
    }
    if let Some(out) = &a.out {
        let groups_json: BTreeMap<&String, serde_json::Value> = groups
            .iter()
            .map(|(k, r)| {
                (k, serde_json::json!({ "n": r.n, "accuracy": r.accuracy, "balanced_accuracy": r.balanced_accuracy }))
            })
            .collect();
        let doc = serde_json::json!({
            "algo": mf.model.algo(),
            "n": report.n,
            "accuracy": report.accuracy,
            "balanced_accuracy": report.balanced_accuracy,
            "per_node_recall": per_node,
            "groups": groups_json,
            "confusion": report.confusion,
        });
        std::fs::write(out, serde_json::to_string_pretty(&doc)? + "\n")
            .with_context(|| out.display().to_string())?;
        prov.output(out);
        prov.write(out)?;
    }
    Ok(())
}

fn exp_config(cli: &Cli, d: &ExpData) -> Result<ExpConfig> {
    let cfg: ExpConfig = match &d.config {
        Some(p) => read_json(p)?,
        None => ExpConfig::default(),
    };
    Ok(match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

/// Writes the rows to `out` (or stdout) and provenance beside `out` (or to stderr).
fn emit(cli: &Cli, name: &str, d: &ExpData, report: &ExperimentReport) -> Result<()> {
    let tsv = report.to_tsv();
    match &d.out {
        Some(out) => {
            std::fs::write(out, &tsv).with_context(|| out.display().to_string())?;
            let mut prov = Provenance::new(name, cli.seed).settings(&report.provenance);
            prov.input(&d.data)?;
            if let Some(c) = &d.config {
                prov.input(c)?;
            }
            prov.output(out);
            prov.details = serde_json::json!({ "reference_values": report.reference_values });
            prov.write(out)
        }
        None => {
            print!("{tsv}");
            eprintln!("{}", report.provenance_json());
            Ok(())
        }
    }
}

fn sweep_values(a: &SweepArgs, param: SweepParam) -> Result<Vec<usize>> {
    if let Some(v) = &a.values {
        return Ok(v.clone());
    }
    match (a.from, a.to, a.step) {
        (Some(f), Some(t), Some(s)) => {
            if s == 0 || f > t {
                return Err(input("--from must not exceed --to and --step must be positive"));
            }
            Ok((f..=t).step_by(s).collect())
        }
        _ => Ok(param.default_grid()),
    }
}

fn exp(cli: &Cli, e: &ExpCmd) -> Result<()> {
    match e {
        ExpCmd::Compare(d) => {
            let r = compare_baselines(&read_dataset(&d.data)?, &exp_config(cli, d)?)?;
            emit(cli, "exp compare", d, &r)
        }
        ExpCmd::PerTask(d) => {
            let r = per_task_models(&read_dataset(&d.data)?, &exp_config(cli, d)?)?;
            emit(cli, "exp per-task", d, &r)
        }
        ExpCmd::Ablate(d) => {
            let r = profile_ablation(&read_dataset(&d.data)?, &exp_config(cli, d)?)?;
            emit(cli, "exp ablate", d, &r)
        }
        ExpCmd::Sweep(a) => {
            let param: SweepParam = a.param.parse()?;
            let cfg = exp_config(cli, &a.data)?;
            let spec = SweepSpec {
                parameter: param,
                values: sweep_values(a, param)?,
                repetitions: a.repetitions,
                seed: cli.seed.unwrap_or(cfg.split.seed),
            };
            let r = sweep(&read_dataset(&a.data.data)?, &spec, &cfg)?;
            emit(cli, "exp sweep", &a.data, &r)
        }
        ExpCmd::Importance { model, out } => {
            let mf = ModelFile::load(model)?;
            let Model::Rf(rf) = &mf.model else {
                return Err(input("importance needs a random forest model"));
            };
            let tsv = importance_report(rf, &mf.feature_names).to_tsv();
            write_or_print(out.as_deref(), &tsv)?;
            if let Some(o) = out {
                let mut prov = Provenance::new("exp importance", cli.seed);
                prov.input(model)?;
                prov.output(o);
                prov.write(o)?;
            }
            Ok(())
        }
        ExpCmd::Usage { sequences, out } => {
            let u = usage_stats(&read_sequences(sequences)?)?;
            let mut text = u.lengths_tsv();
            text.push_str("\nnode\ttask\tcount\n");
            for (task, counts) in &u.node_counts_per_task {
                for (n, c) in counts {
                    let _ = writeln!(text, "{n}\t{task}\t{c}");
                }
            }
            write_or_print(out.as_deref(), &text)?;
            if let Some(o) = out {
                let mut prov = Provenance::new("exp usage", cli.seed);
                prov.input(sequences)?;
                prov.output(o);
                prov.details = serde_json::json!({
                    "reference_values": ["published mean decision points per task: 20, 26, 17, 8"],
                });
                prov.write(o)?;
            }
            Ok(())
        }
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| p.display().to_string()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
