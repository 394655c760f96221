use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Result;
use idcenter::centralize::{aggregate, nfc, pipeline_with_order, select_representative, AggregateParams, NfcParams, PipelineOrder};
use idcenter::cleanse::{build_manifests, outlier_filter, CleanseReport, OutlierConfig, PoseValidConfig};
use idcenter::eval::{evaluate, id2, k_reciprocal_rerank, EvalProtocol, EvalResult, RerankParams};
use idcenter::features::{is_junk, FeatureSet};
use idcenter::io::{read_aux, read_features, read_keypoints, write_aux, write_embeddings, write_json};
use idcenter::manifest::Stage;
use idcenter::synth::{generate, split_queries, SynthConfig};
use serde_json::json;

use crate::run::{with_suffix, Recorder};
use crate::{AggregateArgs, CleanseArgs, Command, EvalArgs, Id2Args, NfcArgs, Order, PipelineArgs, SelectArgs, SynthArgs};

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Nfc(a) => run_nfc(a),
        Command::Aggregate(a) => run_aggregate(a),
        Command::Pipeline(a) => run_pipeline(a),
        Command::Eval(a) => run_eval(a),
        Command::Id2(a) => run_id2(a),
        Command::Cleanse(a) => run_cleanse(a),
        Command::SelectRepresentative(a) => run_select(a),
        Command::Synth(a) => run_synth(a),
    }
}

fn load(rec: &mut Recorder, path: &Path) -> Result<FeatureSet> {
    rec.input(path)?;
    Ok(read_features(path)?)
}

/// Writes `set` and its run record to `OUTPUT.run.json`.
fn save_features(set: &FeatureSet, stages: &[Stage], output: &Path, rec: Recorder) -> Result<()> {
    write_embeddings(set, output)?;
    let record = json!({ "output": output, "stages": stages, "run": rec.finish() });
    write_json(&record, with_suffix(output, ".run.json"))?;
    Ok(())
}

fn run_nfc(a: NfcArgs) -> Result<()> {
    let mut rec = Recorder::new(json!({ "k1": a.k1, "k2": a.k2 }));
    let set = load(&mut rec, &a.input)?;
    let params = NfcParams { k1: a.k1, k2: a.k2 };
    let out = nfc(&set, params)?;
    save_features(&out, &[Stage::Normalize, Stage::Nfc { k1: a.k1, k2: a.k2 }], &a.output, rec)
}

fn run_aggregate(a: AggregateArgs) -> Result<()> {
    let mut rec = Recorder::new(json!({ "eta": a.eta }));
    let set = load(&mut rec, &a.input)?;
    rec.input(&a.aux)?;
    let aux = read_aux(&a.aux)?;
    let out = aggregate(&set, &aux, AggregateParams { eta: a.eta })?;
    let stages = [
        Stage::Normalize,
        Stage::Aggregate {
            eta: a.eta,
            aux_per_sample: aux.per_sample(),
            source: aux.source_tag().to_string(),
        },
    ];
    save_features(&out, &stages, &a.output, rec)
}

fn run_pipeline(a: PipelineArgs) -> Result<()> {
    let nfc_params = match (a.k1, a.k2) {
        (None, None) => None,
        (k1, k2) => {
            let d = NfcParams::default();
            Some(NfcParams {
                k1: k1.unwrap_or(d.k1),
                k2: k2.unwrap_or(d.k2),
            })
        }
    };
    let order = match a.order {
        Order::AggregateFirst => PipelineOrder::AggregateFirst,
        Order::NfcFirst => PipelineOrder::NfcFirst,
    };
    let mut rec = Recorder::new(json!({
        "eta": a.eta,
        "aux": a.aux,
        "nfc": nfc_params.map(|p| json!({ "k1": p.k1, "k2": p.k2 })),
        "order": format!("{:?}", a.order),
    }));
    let set = load(&mut rec, &a.input)?;
    let aux = match &a.aux {
        Some(path) => {
            rec.input(path)?;
            Some(read_aux(path)?)
        }
        None => None,
    };
    let out = pipeline_with_order(&set, aux.as_ref(), AggregateParams { eta: a.eta }, nfc_params, order)?;
    save_features(&out.features, &out.stages, &a.output, rec)
}

fn eval_summary(res: &EvalResult, n_query: usize, n_gallery: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "queries   {n_query} ({} valid)", res.n_valid_queries);
    let _ = writeln!(s, "gallery   {n_gallery}");
    let _ = writeln!(s, "mAP       {:.4}", res.map);
    for k in [1, 5, 10] {
        if k <= res.cmc.len() {
            let _ = writeln!(s, "Rank-{k:<4} {:.4}", res.rank(k));
        }
    }
    let _ = writeln!(s, "ID2       {:.4}", res.id2);
    s
}

fn run_eval(a: EvalArgs) -> Result<()> {
    let rerank = a.rerank.then_some(RerankParams {
        k1: a.rk1,
        k2: a.rk2,
        lambda: a.lambda,
    });
    let protocol = EvalProtocol {
        cam_filter: !a.no_cam_filter,
        max_rank: a.max_rank,
        ..EvalProtocol::default()
    };
    let mut rec = Recorder::new(json!({
        "cam_filter": protocol.cam_filter,
        "max_rank": protocol.max_rank,
        "rerank": rerank.map(|p| json!({ "k1": p.k1, "k2": p.k2, "lambda": p.lambda })),
    }));
    let q = load(&mut rec, &a.query)?;
    let g = load(&mut rec, &a.gallery)?;
    let distances = rerank.map(|p| k_reciprocal_rerank(&q, &g, p)).transpose()?;
    let mut res = evaluate(&q, &g, &protocol, distances.as_ref())?;
    if let Some(p) = rerank {
        // the re-ranked matrix is what "precomputed" refers to
        let at = res.manifest.len().saturating_sub(1);
        res.manifest.insert(at, Stage::Rerank { k1: p.k1, k2: p.k2, lambda: p.lambda });
    }

    let summary = eval_summary(&res, q.len(), g.len());
    print!("{summary}");
    std::fs::write(with_suffix(&a.report, ".txt"), &summary).map_err(|e| idcenter::Error::Io {
        path: with_suffix(&a.report, ".txt"),
        source: e,
    })?;
    let report = json!({
        "map": res.map,
        "rank1": res.rank(1),
        "rank5": res.rank(5),
        "rank10": res.rank(10),
        "cmc": res.cmc,
        "id2": res.id2,
        "n_query": q.len(),
        "n_gallery": g.len(),
        "n_valid_queries": res.n_valid_queries,
        "stages": res.manifest,
        "run": rec.finish(),
    });
    write_json(&report, &a.report)?;
    Ok(())
}

fn run_id2(a: Id2Args) -> Result<()> {
    let mut rec = Recorder::new(json!({}));
    let mut union: Option<FeatureSet> = None;
    for path in &a.input {
        let set = load(&mut rec, path)?;
        union = Some(match union {
            None => set,
            Some(u) => u.concat(&set)?,
        });
    }
    let union = union.expect("clap requires at least one input");
    let value = id2(&union)?;
    println!("ID2 {value:.6}");
    if let Some(report) = &a.report {
        let record = json!({ "id2": value, "n": union.len(), "run": rec.finish() });
        write_json(&record, report)?;
    }
    Ok(())
}

fn manifest_json(kind: &str, set: &FeatureSet, report: &CleanseReport, rec_json: &serde_json::Value) -> serde_json::Value {
    let kept_names: Vec<&Option<String>> = report.kept.iter().map(|&i| &set.names()[i]).collect();
    json!({
        "manifest": kind,
        "total": report.total(),
        "kept": report.kept,
        "kept_names": kept_names,
        "removed": report.removed,
        "per_id": report.per_id,
        "run": rec_json,
    })
}

fn run_cleanse(a: CleanseArgs) -> Result<()> {
    let outliers = OutlierConfig {
        quantile: a.quantile,
        min_samples: a.min_samples,
        epsilon_scale: a.epsilon_scale,
    };
    let pose_config = PoseValidConfig::default();
    let mut rec = Recorder::new(json!({
        "outliers": outliers,
        "pose": a.keypoints.as_ref().map(|_| &pose_config),
    }));
    let set = load(&mut rec, &a.input)?;
    let (reference, target) = match &a.keypoints {
        Some(path) => {
            rec.input(path)?;
            let poses = read_keypoints(path)?;
            build_manifests(&set, &poses, &outliers, &pose_config)?
        }
        // no pose data: the target manifest is the reference one
        None => {
            let r = outlier_filter(&set, &outliers)?;
            (r.clone(), r)
        }
    };
    println!(
        "reference {} of {} kept, target {} of {} kept",
        reference.kept.len(),
        reference.total(),
        target.kept.len(),
        target.total()
    );
    let run = serde_json::to_value(rec.finish())?;
    write_json(&manifest_json("reference", &set, &reference, &run), &a.out_ref)?;
    write_json(&manifest_json("target", &set, &target, &run), &a.out_trg)?;
    Ok(())
}

fn run_select(a: SelectArgs) -> Result<()> {
    let mut rec = Recorder::new(json!({}));
    let set = load(&mut rec, &a.input)?;
    let mut reps = Vec::new();
    for id in set.unique_ids().into_iter().filter(|&id| !is_junk(id)) {
        let index = select_representative(&set, id)?;
        reps.push(json!({ "id": id, "index": index, "name": set.names()[index] }));
    }
    println!("{} representatives", reps.len());
    write_json(&json!({ "representatives": reps, "run": rec.finish() }), &a.report)?;
    Ok(())
}

fn prefixed(prefix: &Path, suffix: &str) -> PathBuf {
    with_suffix(prefix, suffix)
}

fn run_synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_ids: a.ids,
        samples_per_id: a.per_id,
        dim: a.dim,
        sigma: a.sigma,
        aux_per_sample: a.aux_m,
        aux_sigma: a.aux_sigma,
        seed: a.seed,
    };
    let params = json!({
        "ids": a.ids,
        "per_id": a.per_id,
        "dim": a.dim,
        "sigma": a.sigma,
        "aux_m": a.aux_m,
        "aux_sigma": a.aux_sigma,
        "seed": a.seed,
        "queries_per_id": a.queries_per_id,
    });
    let rec = Recorder::new(params);
    let (set, aux) = generate(&cfg)?;
    let (qi, gi) = split_queries(&set, a.queries_per_id);
    let parts: [(&str, FeatureSet, _); 3] = [
        ("all", set.clone(), aux.clone()),
        ("query", set.subset(&qi), aux.subset(&qi)),
        ("gallery", set.subset(&gi), aux.subset(&gi)),
    ];
    let mut outputs = Vec::new();
    for (name, features, aux) in &parts {
        let f = prefixed(&a.out_prefix, &format!(".{name}.p2id"));
        let x = prefixed(&a.out_prefix, &format!(".{name}.aux.p2id"));
        write_embeddings(features, &f)?;
        write_aux(aux, &x)?;
        outputs.push(f);
        outputs.push(x);
    }
    for o in &outputs {
        println!("{}", o.display());
    }
    let record = json!({ "outputs": outputs, "run": rec.finish() });
    write_json(&record, prefixed(&a.out_prefix, ".run.json"))?;
    Ok(())
}
