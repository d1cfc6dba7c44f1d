//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Quaternion, UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use anchorreg::coherence::{distance_embedding, sampson_error, spatial_coherence, CoherenceConfig};
use anchorreg::frames::oracle_descriptor;
use anchorreg::harness::bench::StageTimer;
use anchorreg::harness::eval::{evaluate, evaluate_frames};
use anchorreg::harness::synth::{generate_scene, SceneNoise, SceneParams};
use anchorreg::matching::sinkhorn::SoftMatch;
use anchorreg::matching::{sinkhorn, synchronize_matches, ScoreMatrix};
use anchorreg::pose::sync::synchronize_poses_converged;
use anchorreg::pose::{
    gru_step, register, weighted_kabsch, GruState, GruWeights, RelativePose, WeightedCorrespondences3D,
};
use anchorreg::se3::{angular_error, retract, translation_error};
use anchorreg::{PipelineConfig, Pose, Rotation};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gauss(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_rotation(rng: &mut impl Rng) -> Rotation {
    let q = Quaternion::new(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    Rotation::from_quaternion(&UnitQuaternion::from_quaternion(q))
}

fn random_axis(rng: &mut impl Rng) -> Vector3<f64> {
    Vector3::new(gauss(rng), gauss(rng), gauss(rng)).normalize()
}

fn random_pose(rng: &mut impl Rng, spread: f64) -> Pose {
    let t = Vector3::new(gauss(rng), gauss(rng), gauss(rng)) * spread;
    Pose::new(random_rotation(rng), t)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn kabsch_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let (mut worst_rot, mut worst_tr) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let truth = random_pose(&mut rng, 1.0);
        let n = rng.random_range(4..80);
        let mut c = WeightedCorrespondences3D::default();
        for _ in 0..n {
            let s = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(1.0..4.0),
            );
            c.push(truth.transform_point(&s), s, rng.random_range(0.1..2.0));
        }
        match weighted_kabsch(&c) {
            Ok(p) => {
                worst_rot = worst_rot.max(angular_error(&p.rotation, &truth.rotation));
                worst_tr = worst_tr.max((p.translation - truth.translation).norm());
            }
            Err(e) => return outcome(false, format!("kabsch failed: {e}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_rot < 1e-7 && worst_tr < 1e-9 && secs < 1.0,
        format!("max rotation {worst_rot:.2e} deg, max translation {worst_tr:.2e} m, {secs:.3} s"),
    )
}

fn sinkhorn_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = PipelineConfig::default();
    let start = Instant::now();
    let (mut worst_marginal, mut worst_shift) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let (n, m) = (rng.random_range(1..=256), rng.random_range(1..=256));
        let values = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let scores = ScoreMatrix::new(values).unwrap();
        let shift = rng.random_range(-5.0..5.0);
        let a = sinkhorn(&scores, cfg.sinkhorn_epsilon, cfg.sinkhorn_iters, cfg.slack_score);
        let b = sinkhorn(
            &scores.shifted(shift),
            cfg.sinkhorn_epsilon,
            cfg.sinkhorn_iters,
            cfg.slack_score + shift,
        );
        let (Ok(a), Ok(b)) = (a, b) else {
            return outcome(false, format!("sinkhorn failed on {n}x{m}"));
        };
        for r in 0..n {
            worst_marginal = worst_marginal.max((a.matrix.row(r).sum() - 1.0).abs());
        }
        for s in 0..m {
            worst_marginal = worst_marginal.max((a.matrix.column(s).sum() - 1.0).abs());
        }
        worst_shift = worst_shift.max((&a.matrix - &b.matrix).abs().max());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_marginal <= 1e-6 && worst_shift <= 1e-8 && secs < 30.0,
        format!("max marginal error {worst_marginal:.2e}, max shift change {worst_shift:.2e}, {secs:.2} s"),
    )
}

fn bool_product(a: &DMatrix<u8>, b: &DMatrix<u8>) -> DMatrix<u8> {
    DMatrix::from_fn(a.nrows(), b.ncols(), |r, c| {
        (0..a.ncols()).any(|k| a[(r, k)] == 1 && b[(k, c)] == 1) as u8
    })
}

fn cycle_consistency() -> Outcome {
    const FRAMES: usize = 4;
    const POINTS: usize = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    let (mut violations, mut planted, mut clean_recovered) = (0usize, 0usize, 0usize);
    for trial in 0..100 {
        // keypoint k of frame f observes universe point perms[f][k]
        let perms: Vec<Vec<usize>> = (0..FRAMES)
            .map(|_| {
                let mut p: Vec<usize> = (0..POINTS).collect();
                p.shuffle(&mut rng);
                p
            })
            .collect();
        let corrupt = trial % 2 == 1;
        let mut upper = Vec::new();
        for i in 0..FRAMES {
            for j in i + 1..FRAMES {
                let mut m = DMatrix::zeros(POINTS + 1, POINTS + 1);
                for a in 0..POINTS {
                    let b = perms[j].iter().position(|&u| u == perms[i][a]).unwrap();
                    m[(a, b)] = 0.9;
                    m[(a, POINTS)] = 0.1;
                    m[(POINTS, b)] = 0.1;
                }
                upper.push((i, j, m));
            }
        }
        if corrupt {
            // swap two assignments in a few pairs
            for _ in 0..rng.random_range(1..=3) {
                let k = rng.random_range(0..upper.len());
                let (a, b) = (rng.random_range(0..POINTS), rng.random_range(0..POINTS));
                if a != b {
                    upper[k].2.swap_rows(a, b);
                    planted += 1;
                }
            }
        }
        let mut pairs = Vec::new();
        for (i, j, m) in upper {
            pairs.push(SoftMatch {
                src_frame: j,
                dst_frame: i,
                matrix: m.transpose(),
            });
            pairs.push(SoftMatch {
                src_frame: i,
                dst_frame: j,
                matrix: m,
            });
        }
        let synced = match synchronize_matches(&pairs, &[POINTS; FRAMES], POINTS, 128) {
            Ok(s) => s,
            Err(e) => return outcome(false, format!("synchronization failed: {e}")),
        };
        if !corrupt && synced.complete().count() == POINTS {
            clean_recovered += 1;
        }
        for i in 0..FRAMES {
            for j in 0..FRAMES {
                for k in 0..FRAMES {
                    if i == j || j == k || i == k {
                        continue;
                    }
                    let composed = bool_product(&synced.matching_matrix(i, j), &synced.matching_matrix(j, k));
                    if composed != synced.matching_matrix(i, k) {
                        violations += 1;
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        violations == 0 && secs < 30.0,
        format!("{violations} violated triples, {planted} planted swaps, {clean_recovered}/50 clean instances fully recovered, {secs:.2} s"),
    )
}

fn rigid_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = CoherenceConfig::default();
    let point = |rng: &mut ChaCha8Rng| {
        Vector3::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-1.5..1.5),
            rng.random_range(1.0..5.0),
        )
    };
    let (mut worst_eta, mut worst_emb, mut eta_sum) = (0.0f64, 0.0f64, 0.0);
    for _ in 0..1000 {
        let motion = random_pose(&mut rng, 0.1);
        let anchors_i: Vec<Vector3<f64>> = (0..20).map(|_| point(&mut rng)).collect();
        let anchors_j: Vec<Vector3<f64>> = anchors_i
            .iter()
            .map(|a| {
                motion.transform_point(a) + Vector3::new(gauss(&mut rng), gauss(&mut rng), gauss(&mut rng)) * 0.003
            })
            .collect();
        let x_r = point(&mut rng);
        let x_s = motion.transform_point(&x_r) + Vector3::new(gauss(&mut rng), gauss(&mut rng), gauss(&mut rng)) * 0.01;
        let g = random_pose(&mut rng, 3.0);
        let moved = |v: &[Vector3<f64>]| -> Vec<Vector3<f64>> { v.iter().map(|p| g.transform_point(p)).collect() };
        let eta = spatial_coherence(&x_r, &x_s, &anchors_i, &anchors_j, &cfg).unwrap();
        let eta_g = spatial_coherence(
            &g.transform_point(&x_r),
            &g.transform_point(&x_s),
            &moved(&anchors_i),
            &moved(&anchors_j),
            &cfg,
        )
        .unwrap();
        eta_sum += eta;
        worst_eta = worst_eta.max((eta - eta_g).abs());
        let e = distance_embedding(&x_r, &anchors_i, &cfg, 32).unwrap();
        let e_g = distance_embedding(&g.transform_point(&x_r), &moved(&anchors_i), &cfg, 32).unwrap();
        let diff = e.iter().zip(&e_g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_emb = worst_emb.max(diff);
    }
    outcome(
        worst_eta <= 1e-9 && worst_emb <= 1e-9,
        format!(
            "max coherence change {worst_eta:.2e}, max embedding change {worst_emb:.2e}, mean coherence {:.3}",
            eta_sum / 1000.0
        ),
    )
}

fn sampson_zero() -> Outcome {
    let (mut worst, mut count) = (0.0f64, 0usize);
    for seed in 0..3 {
        let scene = generate_scene(&SceneParams {
            seed,
            ..SceneParams::default()
        })
        .unwrap();
        let k = scene.intrinsics;
        for i in 0..scene.frame_count() {
            let obs_i = scene.observations(i);
            for j in i + 1..scene.frame_count() {
                let pose_ij = scene.poses[i].between(&scene.poses[j]);
                for (id, px_j) in scene.observations(j) {
                    let Some(&(_, px_i)) = obs_i.iter().find(|(o, _)| *o == id) else {
                        continue;
                    };
                    match sampson_error(px_i, px_j, &pose_ij, &k, &k) {
                        Ok(e) => worst = worst.max(e),
                        Err(e) => return outcome(false, format!("sampson failed: {e}")),
                    }
                    count += 1;
                }
            }
        }
    }
    outcome(
        worst <= 1e-8 && count > 0,
        format!("max {worst:.2e} px^2 over {count} correspondences"),
    )
}

fn synchronization_gain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let noise = 2.0f64.to_radians();
    let (mut wins, mut in_sum, mut out_sum) = (0, 0.0, 0.0);
    for _ in 0..100 {
        let mut truth = vec![Pose::identity()];
        for _ in 1..6 {
            let r = Rotation::from_axis_angle(&random_axis(&mut rng), rng.random_range(0.0..0.6));
            truth.push(Pose::new(
                r,
                Vector3::new(gauss(&mut rng), gauss(&mut rng), gauss(&mut rng)) * 0.5,
            ));
        }
        let mut edges = Vec::new();
        let mut input_err = 0.0;
        for i in 0..6 {
            for j in i + 1..6 {
                let exact = truth[i].between(&truth[j]);
                let wobble = Rotation::from_axis_angle(&random_axis(&mut rng), noise * gauss(&mut rng));
                let measured = Pose::new(wobble * exact.rotation, exact.translation);
                input_err += angular_error(&measured.rotation, &exact.rotation);
                edges.push(RelativePose {
                    i,
                    j,
                    pose: measured,
                    weight: 1.0,
                });
            }
        }
        input_err /= edges.len() as f64;
        let Ok(out) = synchronize_poses_converged(6, &edges, None, 1e-10, 100) else {
            return outcome(false, "synchronization failed".into());
        };
        let frame_err = (1..6)
            .map(|k| angular_error(&out[k].rotation, &truth[k].rotation))
            .sum::<f64>()
            / 5.0;
        in_sum += input_err;
        out_sum += frame_err;
        wins += (frame_err < input_err) as usize;
    }
    outcome(
        wins >= 95,
        format!(
            "{wins}/100 trials improved; mean input {:.3} deg, mean frame {:.3} deg",
            in_sum / 100.0,
            out_sum / 100.0
        ),
    )
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let scene = generate_scene(&SceneParams::default()).unwrap();
    let frames = scene.render_all();
    let features = (0..frames.len()).map(|f| oracle_descriptor(&scene, f).set).collect();
    let cfg = PipelineConfig::default();
    let reg = match register(frames, features, &cfg, None, &mut StageTimer::new()) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("registration failed: {e}")),
    };
    let secs = start.elapsed().as_secs_f64();
    let (mut rot, mut tr) = (0.0f64, 0.0f64);
    for (est, gt) in reg.poses().iter().zip(&scene.poses) {
        rot = rot.max(angular_error(&est.rotation, &gt.rotation));
        tr = tr.max(translation_error(est, gt) * 10.0);
    }
    let loss = &reg.state.loss_history;
    let monotone = loss.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-15);
    outcome(
        rot < 0.1 && tr < 1.0 && monotone && loss.len() == cfg.outer_iters && secs < 60.0,
        format!("max rotation {rot:.2e} deg, max translation {tr:.2e} mm, loss {loss:?}, {secs:.1} s"),
    )
}

fn ablation_run(seed: u64, sc: bool, gc: bool) -> f64 {
    let params = SceneParams {
        seed,
        frames: 4,
        noise: SceneNoise {
            depth_sigma: 0.005,
            descriptor_sigma: 0.1,
            outlier_fraction: 0.3,
        },
        ..SceneParams::default()
    };
    let scene = generate_scene(&params).unwrap();
    let frames = scene.render_all();
    let features = (0..frames.len()).map(|f| oracle_descriptor(&scene, f).set).collect();
    let cfg = PipelineConfig {
        inner_iters: 5,
        outer_iters: 2,
        use_spatial_coherence: sc,
        use_geometric_cost: gc,
        ..PipelineConfig::default()
    };
    match register(frames.clone(), features, &cfg, None, &mut StageTimer::new()) {
        Ok(reg) => evaluate_frames("ablation", reg.poses(), &frames, &reg.correspondences)
            .ok()
            .and_then(|r| r.in3d_5)
            .unwrap_or(0.0),
        Err(_) => 0.0,
    }
}

fn ablation_direction() -> Outcome {
    let start = Instant::now();
    let (mut full, mut no_sc, mut no_gc) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..20 {
        full.push(ablation_run(seed, true, true));
        no_sc.push(ablation_run(seed, false, true));
        no_gc.push(ablation_run(seed, true, false));
    }
    let paired = |off: &[f64]| -> f64 {
        let mut d: Vec<f64> = full.iter().zip(off).map(|(a, b)| a - b).collect();
        median(&mut d)
    };
    let (d_sc, d_gc) = (paired(&no_sc), paired(&no_gc));
    let (m_full, m_sc, m_gc) = (
        median(&mut full.clone()),
        median(&mut no_sc.clone()),
        median(&mut no_gc.clone()),
    );
    let secs = start.elapsed().as_secs_f64();
    outcome(
        d_sc > 0.0 && d_gc > 0.0 && m_full > m_sc && m_full > m_gc,
        format!(
            "median in3d@5cm full {m_full:.2}, no-SC {m_sc:.2}, no-GC {m_gc:.2}; median paired gain SC {d_sc:+.2}, GC {d_gc:+.2}; {secs:.1} s"
        ),
    )
}

fn gru_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (hidden, input) = (16, 12);
    let mut saturated = GruWeights::seeded(hidden, input, 5);
    saturated.b_z = DVector::from_element(hidden, 60.0);
    let plain = GruWeights::seeded(hidden, input, 5);
    let (mut worst_hidden, mut worst_retract) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let state = GruState {
            hidden: DVector::from_fn(hidden, |_, _| rng.random_range(-1.0..1.0)),
        };
        let x: Vec<f64> = (0..input).map(|_| gauss(&mut rng)).collect();
        let (next, _) = gru_step(&saturated, &state, &x).unwrap();
        worst_hidden = worst_hidden.max((&next.hidden - &state.hidden).abs().max());
        let (_, delta) = gru_step(&plain, &state, &x).unwrap();
        let pose = random_pose(&mut rng, 1.0);
        let moved = retract(&pose, &delta).unwrap();
        let diff = (moved.rotation.matrix() - pose.rotation.matrix())
            .abs()
            .max()
            .max((moved.translation - pose.translation).abs().max());
        worst_retract = worst_retract.max(diff);
    }
    outcome(
        worst_hidden <= 1e-6 && worst_retract <= 1e-12,
        format!("saturated gate hidden change {worst_hidden:.2e}, zero-head retraction change {worst_retract:.2e}"),
    )
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_anchorreg"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = |p: &str| dir.path().join(p).to_string_lossy().into_owned();
    let (clip, a, b) = (path("clip"), path("a"), path("b"));
    let run = || -> Result<(), String> {
        cli(&[
            "synth",
            &clip,
            "--seed",
            "11",
            "--frames",
            "3",
            "--depth-sigma",
            "0.003",
            "--outliers",
            "0.1",
        ])?;
        for out in [&a, &b] {
            cli(&[
                "register",
                &clip,
                "--out",
                out,
                "--descriptor",
                "oracle",
                "--frames",
                "3",
                "--seed",
                "4",
                "--threads",
                "1",
            ])?;
        }
        Ok(())
    };
    if let Err(e) = run() {
        return outcome(false, format!("cli failed: {e}"));
    }
    let same = |f: &str| {
        let x = std::fs::read(Path::new(&a).join(f)).unwrap_or_default();
        let y = std::fs::read(Path::new(&b).join(f)).unwrap_or_default();
        !x.is_empty() && x == y
    };
    let (traj, dump) = (same("trajectory.txt"), same("correspondences.json"));
    outcome(
        traj && dump,
        format!("trajectory identical: {traj}, correspondence dump identical: {dump}"),
    )
}

fn metric_fidelity() -> Outcome {
    let seven = Pose::new(
        Rotation::from_axis_angle(&Vector3::new(0.3, -1.0, 0.2).normalize(), 7.0f64.to_radians()),
        Vector3::zeros(),
    );
    let r = evaluate(
        "rot",
        &[Pose::identity(), seven],
        &[Some(Pose::identity()), Some(Pose::identity())],
        &[],
        &[],
    )
    .unwrap();
    let shifted = Pose::new(Rotation::identity(), Vector3::new(0.03, 0.04, 0.0));
    let t = evaluate(
        "tr",
        &[Pose::identity(), shifted],
        &[Some(Pose::identity()), Some(Pose::identity())],
        &[],
        &[],
    )
    .unwrap();
    let pass =
        r.rot_acc5 == 0.0 && r.rot_acc10 == 100.0 && (r.rot_mean - 7.0).abs() < 1e-9 && (t.tr_mean - 5.0).abs() < 1e-9;
    outcome(
        pass,
        format!(
            "7 deg: acc5 {} acc10 {} mean {:.9}; 3-4-5: {:.9} cm",
            r.rot_acc5, r.rot_acc10, r.rot_mean, t.tr_mean
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("kabsch exactness", kabsch_exactness),
        ("sinkhorn contract", sinkhorn_contract),
        ("cycle consistency", cycle_consistency),
        ("rigid invariance of coherence", rigid_invariance),
        ("sampson zero case", sampson_zero),
        ("synchronization gain", synchronization_gain),
        ("end-to-end oracle run", end_to_end),
        ("ablation direction", ablation_direction),
        ("gru identities", gru_identities),
        ("determinism", determinism),
        ("metric fidelity", metric_fidelity),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += !o.pass as usize;
        println!(
            "[{}] {:>2}. {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
