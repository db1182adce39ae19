//! End-to-end acceptance criteria. Runs without the libtest harness so each
//! criterion prints exactly one PASS/FAIL line; the process fails if any
//! criterion does.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command as Process;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use roomnet::config::RunConfig;
use roomnet::format::{read_graph, read_model, to_bytes, write_graph, write_model};
use roomnet::pipeline::{self, Artifacts, LevelReport, TrialSpec};
use roomnet_core::features::{match_frames, Frame, Keypoint, MatchConfig};
use roomnet_core::policy::score_gradient;
use roomnet_core::rng::rng_from;
use roomnet_core::roomnet::{loss, loss_and_grad};
use roomnet_core::{
    arrival_check, confidence, mask_with_graph, plan, Command, Episode, Inference, MemoryQueues, ModelDims, NavState,
    PlanConfig, RoomGraph, RoomNetModel,
};
use roomnet_core::{FrameFeature, Phase, PolicyConfig};

struct Fixture {
    cfg: RunConfig,
    art: Artifacts,
    held_out: Episode,
    train_time: Duration,
    loss_curve: Vec<f64>,
}

fn fixture() -> anyhow::Result<Fixture> {
    let cfg = RunConfig::default();
    let world = cfg.build_world()?;
    let episodes = pipeline::record_episodes(&cfg, &world)?;
    let graph = pipeline::build_map(&cfg, &world, &episodes)?;
    let start = Instant::now();
    let outcome = pipeline::train_model(&cfg, world.room_count(), &episodes)?;
    let train_time = start.elapsed();
    let held_out = pipeline::held_out_episode(&cfg, &world)?;
    let loss_curve = outcome.loss_curve;
    Ok(Fixture { art: Artifacts { world, graph, model: outcome.model }, cfg, held_out, train_time, loss_curve })
}

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, took: Duration) -> Result<(), String> {
    if took <= limit {
        Ok(())
    } else {
        Err(format!("took {took:.1?}, limit {limit:?}"))
    }
}

// 1 -------------------------------------------------------------------------

fn gradient_check() -> Verdict {
    let start = Instant::now();
    let dims = ModelDims { descriptor: 8, feature: 6, hidden: 4, attention: 4, classes: 3 };
    let model = RoomNetModel::new(dims, 5, 6).map_err(|e| e.to_string())?;
    let mut r = rng_from(17);
    let mut feature = || {
        let v: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        FrameFeature(v.into_iter().map(|x| x / n).collect())
    };
    let mut worst: f64 = 0.0;
    for label in 0..3 {
        let short: Vec<FrameFeature> = (0..3).map(|_| feature()).collect();
        let q = MemoryQueues { current: short[2].clone(), short, long: (0..3).map(|_| feature()).collect(), timestamp: 0.0 };
        let (_, grad) = loss_and_grad(&model, &q, label).map_err(|e| e.to_string())?;
        for (i, &g) in grad.iter().enumerate() {
            let eps = 1e-5;
            let mut hi = model.clone();
            hi.params_mut()[i] += eps;
            let mut lo = model.clone();
            lo.params_mut()[i] -= eps;
            let num = (loss(&hi, &q, label).unwrap() - loss(&lo, &q, label).unwrap()) / (2.0 * eps);
            worst = worst.max((g - num).abs() / g.abs().max(num.abs()).max(1e-6));
        }
    }
    within(Duration::from_secs(10), start.elapsed())?;
    check(worst < 1e-4, format!("worst relative error {worst:.2e} over {} parameters", model.params().len()))
}

// 2 -------------------------------------------------------------------------

fn held_out_accuracy(fx: &Fixture) -> Verdict {
    within(Duration::from_secs(120), fx.train_time)?;
    let acc = pipeline::accuracy(&fx.cfg, &fx.art.model, &fx.held_out).map_err(|e| e.to_string())?;
    let curve = &fx.loss_curve;
    let (first, last) = (curve[0], curve[curve.len() - 1]);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let falling = curve.len() >= 10 && mean(&curve[curve.len() - 5..]) < mean(&curve[..5]);
    check(
        acc >= 0.95 && last < 0.2 * first && falling,
        format!("held-out accuracy {acc:.4}, loss {first:.3} -> {last:.3}, training took {:.1?}", fx.train_time),
    )
}

// 3 -------------------------------------------------------------------------

fn axis_frame(id: u32, axis: usize) -> Frame {
    let mut d = vec![0.0f32; 16];
    d[axis] = 1.0;
    Frame::new(id, 0.0, vec![Keypoint { id: axis as u32, position: [0.5, 0.5], descriptor: d }]).unwrap()
}

fn graph_from_edges(n: usize, edges: &[(usize, usize)]) -> RoomGraph {
    let mut adjacency = vec![false; n * n];
    let mut transitions = BTreeMap::new();
    for &(a, b) in edges {
        adjacency[a * n + b] = true;
        adjacency[b * n + a] = true;
        transitions.insert((a, b), vec![axis_frame(0, 8 + a)]);
        transitions.insert((b, a), vec![axis_frame(0, 8 + b)]);
    }
    let keyframes = (0..n).map(|r| vec![axis_frame(r as u32, r)]).collect();
    RoomGraph::from_parts(n, adjacency, transitions, keyframes, &MatchConfig::default()).unwrap()
}

fn brute_force(n: usize, adj: &[bool], at: usize, goal: usize, seen: &mut [bool], depth: usize) -> Option<usize> {
    if at == goal {
        return Some(depth);
    }
    let mut best = None;
    for next in 0..n {
        if adj[at * n + next] && !seen[next] {
            seen[next] = true;
            if let Some(d) = brute_force(n, adj, next, goal, seen, depth + 1) {
                best = Some(best.map_or(d, |b: usize| b.min(d)));
            }
            seen[next] = false;
        }
    }
    best
}

fn planner_vs_brute_force() -> Verdict {
    let mut r = rng_from(2024);
    let mut pairs = 0;
    for g in 0..200 {
        let n = r.random_range(1..=6);
        let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (r.random_range(0..v), v)).collect();
        for _ in 0..r.random_range(0..6) {
            let (a, b) = (r.random_range(0..n), r.random_range(0..n));
            if a != b && !edges.iter().any(|&(x, y)| (x, y) == (a.min(b), a.max(b)) || (y, x) == (a.min(b), a.max(b))) {
                edges.push((a.min(b), a.max(b)));
            }
        }
        let graph = graph_from_edges(n, &edges);
        for a in 0..n {
            for b in 0..n {
                let mut seen = vec![false; n];
                seen[a] = true;
                let want = brute_force(n, graph.adjacency(), a, b, &mut seen, 0);
                let p = plan(&graph, a, &axis_frame(0, b), &PlanConfig::default()).map_err(|e| format!("graph {g}: {e}"))?;
                let valid = p.validate(&graph).is_ok() && p.hierarchy[0] == a && p.goal_room == b;
                if Some(p.hops()) != want || !valid {
                    return Err(format!("graph {g} {edges:?}: {a}->{b} planned {:?}, shortest {want:?}", p.hierarchy));
                }
                pairs += 1;
            }
        }
    }
    Ok(format!("200 graphs, {pairs} source/goal pairs agree"))
}

// 4 -------------------------------------------------------------------------

fn unit_truths() -> Verdict {
    let mut failed = Vec::new();
    let mut total = 0;
    let mut truth = |name: &str, ok: bool| {
        total += 1;
        if !ok {
            failed.push(name.to_string());
        }
    };
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;

    truth("unanimous confidence", confidence(&[2; 6], 2) == 6.0);
    truth("mixed confidence", close(confidence(&[3, 3, 2], 3), 2.0 + (-1.0f64).exp()));
    truth("score gradient", close(score_gradient(&[0.9, 0.6, 0.5], 2.0, 1).unwrap(), -0.2));
    let cfg = PolicyConfig::default();
    truth("arrival when score falls low", arrival_check(-0.05, 0.3, 3.0, &cfg));
    truth("no arrival while score is high", !arrival_check(-0.05, 0.9, 6.0, &cfg));
    truth("no arrival while score rises", !arrival_check(0.1, 0.0, 0.0, &cfg));

    let chain = graph_from_edges(4, &[(0, 1), (1, 2), (2, 3)]);
    let masked = mask_with_graph(&Inference::from_probs(vec![0.2; 5], 0.0), &chain, 0).unwrap();
    let third = 1.0 / 3.0;
    truth("chain mask", masked.probs.iter().zip([third, third, 0.0, 0.0, third]).all(|(a, b)| close(*a, b)));
    let complete = graph_from_edges(3, &[(0, 1), (1, 2), (0, 2)]);
    let inf = Inference::from_probs(vec![0.1, 0.5, 0.3, 0.1], 0.0);
    truth("complete-graph mask", mask_with_graph(&inf, &complete, 1).unwrap() == inf);

    let axis = |k: usize| {
        let mut v = vec![0.0f32; 256];
        v[k] = 1.0;
        v
    };
    let frame = |ks: &mut dyn Iterator<Item = usize>, base: u32| {
        let kps = ks.enumerate().map(|(i, k)| Keypoint { id: base + i as u32, position: [0.5, 0.5], descriptor: axis(k) });
        Frame::new(0, 0.0, kps.collect()).unwrap()
    };
    let q = frame(&mut (0..100), 0);
    let t = frame(&mut (0..50).chain(150..200), 1000);
    truth("half-shared match score", match_frames(&q, &t, &MatchConfig::default()).unwrap().score == 0.5);

    truth("source equals goal", plan(&chain, 2, &axis_frame(0, 2), &PlanConfig::default()).unwrap().hierarchy == [2]);
    let mut state = NavState::new(axis_frame(0, 1));
    let first = state.update(&axis_frame(0, 5), &Inference::from_probs(vec![0.8, 0.1, 0.1, 0.0, 0.0], 0.0), &chain, &cfg);
    truth("first command rotates", first == Ok(Command::new(0.0, cfg.rot_speed)) && state.phase == Phase::InitRotate);

    if failed.is_empty() {
        Ok(format!("{total} closed-form examples hold"))
    } else {
        Err(format!("failed: {}", failed.join(", ")))
    }
}

// 5, 6 ----------------------------------------------------------------------

fn level(fx: &Fixture, perturbation: f64) -> Result<(LevelReport, Duration), String> {
    let start = Instant::now();
    let report = pipeline::evaluate(&fx.cfg, &fx.art, 100, &[perturbation]).map_err(|e| e.to_string())?;
    Ok((report.levels.into_iter().next().unwrap(), start.elapsed()))
}

fn clean_navigation(clean: &LevelReport, took: Duration) -> Verdict {
    within(Duration::from_secs(300), took)?;
    let ok = clean.successes >= 98 && clean.followed_plan == clean.successes;
    check(
        ok,
        format!(
            "{}/100 reached the goal, {} of them along the planned rooms, in {took:.1?}; failures {:?}",
            clean.successes, clean.followed_plan, clean.failures
        ),
    )
}

fn perturbed_navigation(levels: &[(LevelReport, Duration)]) -> Verdict {
    let took: Duration = levels.iter().map(|l| l.1).sum();
    within(Duration::from_secs(600), took)?;
    let rates: Vec<f64> = levels.iter().map(|l| l.0.success_rate).collect();
    let monotone = rates.windows(2).all(|w| w[1] <= w[0]);
    let heavy = &levels[2].0;
    let summary: Vec<String> = levels.iter().map(|(l, _)| format!("p=q={}: {}/100", l.perturbation, l.successes)).collect();
    check(heavy.successes >= 90 && monotone, format!("{} ({}), in {took:.1?}", summary.join(", "), if monotone { "non-increasing" } else { "NOT monotone" }))
}

// 7 -------------------------------------------------------------------------

fn teleport_replanning(fx: &Fixture) -> Verdict {
    let k = fx.cfg.policy.replan_k;
    let (start_room, goal_room) = (fx.cfg.navigate.start_room, fx.cfg.navigate.goal_room);
    let results = (0..100u64)
        .into_par_iter()
        .map(|trial| {
            let spec = TrialSpec { trial, start_room, goal_room, perturbation: 0.0, teleport_to: Some(1) };
            pipeline::run_trial(&fx.cfg, &fx.art, &spec)
        })
        .collect::<anyhow::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let off_plan = results.iter().filter(|s| !s.planned.contains(&1)).count();
    let prompt = results
        .iter()
        .filter(|s| s.confident_off_plan_before_replan.is_some_and(|n| n <= k))
        .count();
    let reached = results.iter().filter(|s| s.success).count();
    check(
        off_plan == 100 && prompt == 100 && reached >= 95,
        format!("room 1 off the plan in {off_plan}/100; replanned within {k} confident steps in {prompt}/100; {reached}/100 reached the goal"),
    )
}

// 8 -------------------------------------------------------------------------

fn run_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let o = Process::new(env!("CARGO_BIN_EXE_roomnet")).current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&o.stderr)))
    }
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().display().to_string(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn reproducibility(fx: &Fixture) -> Verdict {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    for out in ["first", "second"] {
        for cmd in [&["map"][..], &["train"], &["navigate"]] {
            let mut args = vec!["--out", out];
            args.extend_from_slice(cmd);
            run_cli(tmp.path(), &args)?;
        }
    }
    let (a, b) = (files(&tmp.path().join("first")), files(&tmp.path().join("second")));
    if a != b {
        let differ: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
        return Err(format!("artifacts differ: {differ:?}"));
    }

    // The CLI's model and graph are the ones trained in-process here.
    let model_bytes = to_bytes(&fx.art.model, write_model).map_err(|e| e.to_string())?;
    let graph_bytes = to_bytes(&fx.art.graph, write_graph).map_err(|e| e.to_string())?;
    let same_as_cli = a.get("model.rnmd") == Some(&model_bytes) && a.get("graph.rngr") == Some(&graph_bytes);
    let model = read_model(&mut model_bytes.as_slice()).map_err(|e| e.to_string())?;
    let graph = read_graph(&mut graph_bytes.as_slice(), &fx.cfg.graph).map_err(|e| e.to_string())?;
    let bits = |m: &RoomNetModel| m.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
    let round_trip = bits(&model) == bits(&fx.art.model) && model == fx.art.model && graph == fx.art.graph;
    check(
        same_as_cli && round_trip,
        format!("{} artifacts byte-identical across two runs; model and graph round-trip bit-exact", a.len()),
    )
}

fn main() {
    let mut verdicts: Vec<(&str, Verdict)> = Vec::new();
    verdicts.push(("1 gradient check", gradient_check()));
    verdicts.push(("3 planner equals brute force", planner_vs_brute_force()));
    verdicts.push(("4 unit truths", unit_truths()));

    match fixture() {
        Err(e) => {
            for name in ["2 held-out accuracy", "5 clean navigation", "6 perturbed navigation", "7 teleport replanning", "8 reproducibility"] {
                verdicts.push((name, Err(format!("fixture failed: {e:#}"))));
            }
        }
        Ok(fx) => {
            verdicts.push(("2 held-out accuracy", held_out_accuracy(&fx)));
            let levels: Result<Vec<_>, String> = [0.0, 0.1, 0.3].iter().map(|&p| level(&fx, p)).collect();
            match levels {
                Ok(levels) => {
                    verdicts.push(("5 clean navigation", clean_navigation(&levels[0].0, levels[0].1)));
                    verdicts.push(("6 perturbed navigation", perturbed_navigation(&levels)));
                }
                Err(e) => {
                    verdicts.push(("5 clean navigation", Err(e.clone())));
                    verdicts.push(("6 perturbed navigation", Err(e)));
                }
            }
            verdicts.push(("7 teleport replanning", teleport_replanning(&fx)));
            verdicts.push(("8 reproducibility", reproducibility(&fx)));
        }
    }

    verdicts.sort_by(|a, b| a.0.cmp(b.0));
    let mut failures = 0;
    println!();
    for (name, v) in &verdicts {
        match v {
            Ok(detail) => println!("acceptance {name}: PASS ({detail})"),
            Err(detail) => {
                failures += 1;
                println!("acceptance {name}: FAIL ({detail})");
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", verdicts.len() - failures, verdicts.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
