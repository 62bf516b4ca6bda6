use std::sync::OnceLock;

use clutterplan::cases::gen_adversarial_case;
use clutterplan::mcts::sample_push_actions;
use clutterplan::par::Execution;
use clutterplan::prior::train::{build_samples, weighted_loss};
use clutterplan::prior::{
    collect_transitions, load_model, make_label, predict_action_q, predict_qmap, save_model, train, CollectConfig, Dataset,
    TrainingConfig,
};
use clutterplan::scene::{ObjectShape, Pose, Scene, SceneObject, WorkspaceSpec};
use clutterplan::tree::PlanEnv;

fn cases(n: u64) -> Vec<(u64, Scene)> {
    (0..n).map(|i| (i, gen_adversarial_case(100 + i, 8).unwrap())).collect()
}

fn small_collect() -> CollectConfig {
    let mut c = CollectConfig::default();
    c.mcts = c.mcts.with_budget(60);
    c
}

fn dataset() -> &'static Dataset {
    static D: OnceLock<Dataset> = OnceLock::new();
    D.get_or_init(|| collect_transitions(&cases(8), &small_collect(), &PlanEnv::default(), 5, Execution::Parallel))
}

fn bytes(d: &Dataset) -> Vec<u8> {
    let mut buf = Vec::new();
    d.write_to(&mut buf).unwrap();
    buf
}

#[test]
fn collection_is_deterministic_in_seed() {
    let env = PlanEnv::default();
    let c = cases(3);
    let a = collect_transitions(&c, &small_collect(), &env, 9, Execution::Sequential);
    let b = collect_transitions(&c, &small_collect(), &env, 9, Execution::Parallel);
    assert!(!a.is_empty());
    assert_eq!(bytes(&a), bytes(&b));
    let other = collect_transitions(&c, &small_collect(), &env, 10, Execution::Sequential);
    assert_ne!(bytes(&a), bytes(&other));
}

#[test]
fn records_are_bounded_and_round_trip() {
    let d = dataset();
    for r in &d.records {
        assert!((0.0..=1.2).contains(&r.q), "q {}", r.q);
        assert!(r.n_visits >= 1);
        assert!((0.0..std::f64::consts::TAU).contains(&r.push_angle));
    }
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.jsonl");
    d.save(&p).unwrap();
    assert_eq!(&Dataset::load(&p).unwrap(), d);
}

#[test]
fn full_budget_search_logs_many_transitions() {
    let mut c = CollectConfig { extra_targets: 0, ..CollectConfig::default() };
    c.mcts = c.mcts.with_budget(300);
    let d = collect_transitions(&cases(1), &c, &PlanEnv::default(), 0, Execution::Sequential);
    assert!(d.len() >= 50, "{} transitions", d.len());
}

#[test]
fn labels_stay_on_the_patch() {
    let (cfg, ws, tip) = (TrainingConfig::default(), WorkspaceSpec::default(), PlanEnv::default().tip);
    for r in dataset().records.iter().step_by(11) {
        let grids = r.grids.decode().unwrap();
        let s = make_label(&grids, r.action_cell, r.q, r.n_visits, &cfg, &ws, &tip);
        assert!(s.cells.len() <= 9);
        for c in &s.cells {
            assert!(c.cell.row.abs_diff(r.action_cell.row) <= 1 && c.cell.col.abs_diff(r.action_cell.col) <= 1);
            assert!(c.weight > 0.0);
            assert!(c.label == r.q || (c.label == 0.0 && (c.weight == cfg.w_collision || c.weight == cfg.w_empty)));
        }
        let w = s.dense_weight();
        let listed = w.iter().filter(|&&x| x > 0.0).count();
        assert_eq!(listed, s.cells.len());
    }
}

#[test]
fn training_is_deterministic_and_monotone() {
    let cfg = TrainingConfig { epochs: 60, ..TrainingConfig::default() };
    let env = PlanEnv::default();
    let (m1, rep) = train(dataset(), &cfg, &WorkspaceSpec::default(), &env.tip, Execution::Parallel).unwrap();
    let (m2, _) = train(dataset(), &cfg, &WorkspaceSpec::default(), &env.tip, Execution::Sequential).unwrap();
    assert_eq!(m1.to_bytes(), m2.to_bytes());
    assert!(rep.train_loss.windows(2).all(|w| w[1] <= w[0]), "{:?}", rep.train_loss);
    assert!(rep.heldout_loss.last().unwrap() < &rep.zero_heldout_loss);
}

#[test]
fn single_sample_is_overfit() {
    let one = Dataset { records: vec![dataset().records[0].clone(); 4] };
    let env = PlanEnv::default();
    let (model, rep) = train(&one, &TrainingConfig::default(), &WorkspaceSpec::default(), &env.tip, Execution::Sequential).unwrap();
    assert!(rep.heldout_is_train);
    let refs: Vec<_> = one.records.iter().collect();
    let samples = build_samples(&refs, &TrainingConfig::default(), &WorkspaceSpec::default(), &env.tip, Execution::Sequential).unwrap();
    let loss = weighted_loss(&model, &samples, 0.8);
    assert!(loss < 0.01, "loss {loss}");
}

fn trained() -> &'static clutterplan::prior::PriorModel {
    static M: OnceLock<clutterplan::prior::PriorModel> = OnceLock::new();
    M.get_or_init(|| {
        let cfg = TrainingConfig { epochs: 80, ..TrainingConfig::default() };
        train(dataset(), &cfg, &WorkspaceSpec::default(), &PlanEnv::default().tip, Execution::Parallel).unwrap().0
    })
}

#[test]
fn saved_model_predicts_identically() {
    let model = trained();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.bin");
    save_model(model, &p).unwrap();
    let back = load_model(&p).unwrap();
    let scene = gen_adversarial_case(3, 9).unwrap();
    let a = predict_qmap(model, &scene).unwrap();
    let b = predict_qmap(&back, &scene).unwrap();
    assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert!(a.values.iter().all(|v| (0.0..=1.2).contains(v)));
}

#[test]
fn symmetric_scene_gives_rotation_invariant_values() {
    let ws = WorkspaceSpec::default();
    let c = ws.center();
    let scene = Scene::new(ws, vec![SceneObject { id: 0, shape: ObjectShape::Disc { radius: 0.025 }, pose: Pose::new(c.x, c.y, 0.0) }], 0).unwrap();
    let env = PlanEnv::default();
    let values: Vec<f64> = sample_push_actions(&scene, 16, &env.tip)
        .iter()
        .map(|a| predict_action_q(trained(), &scene, a).unwrap())
        .collect();
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    assert!(hi - lo <= 0.05, "{values:?}");
}
