mod common;

use std::sync::Arc;

use lightbot::analysis::{analyze, records_from_events, AnalysisOptions, PoolScope, PuzzleNorms};
use lightbot::program::{Instruction, Program};
use lightbot::service::store::parse_jsonl;
use lightbot::service::{ConditionId, EventStore, ExperimentService, ExportFilter, ManualClock, PuzzleSet};
use lightbot::solver::bfs_shortest;
use lightbot::world::Action;
use proptest::prelude::*;

fn service(dir: &std::path::Path) -> (ExperimentService, Arc<ManualClock>) {
    let set = PuzzleSet::load_dir(&common::data_dir().join("puzzles")).unwrap();
    let clock = Arc::new(ManualClock::new(0));
    (ExperimentService::new(set, EventStore::open(dir).unwrap(), clock.clone()).unwrap(), clock)
}

/// Optimal path padded with `extra` useless turns (left/right pairs, then
/// a single left if odd) in front.
fn padded(svc: &ExperimentService, pid: &str, extra: usize) -> Program {
    let mut path = Vec::new();
    for i in 0..extra {
        path.push(if i % 2 == 0 { Action::TurnLeft } else { Action::TurnRight });
    }
    if extra % 2 == 1 {
        path.push(Action::TurnRight);
    }
    path.extend(bfs_shortest(svc.puzzles().get(pid).unwrap()).unwrap());
    Program::flat(&path)
}

/// Runs one full session; the participant pads solutions by `extra`
/// turns and skips the puzzle listed in `skip`.
fn run_session(svc: &ExperimentService, clock: &ManualClock, cond: ConditionId, seed: u64, extra: usize, skip: Option<&str>) {
    let sid = svc.create_session(cond, Some(seed)).unwrap().session_id;
    loop {
        let Ok(view) = svc.current_puzzle(&sid) else { break };
        clock.advance_ms(30_000);
        if Some(view.puzzle_id.as_str()) == skip {
            clock.advance_ms(400_000);
            svc.skip_puzzle(&sid, &view.puzzle_id, None).unwrap();
            continue;
        }
        let r = svc.submit_program(&sid, &view.puzzle_id, &padded(svc, &view.puzzle_id, extra)).unwrap();
        assert!(r.completed);
    }
}

#[test]
fn scripted_sessions_produce_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (svc, clock) = service(dir.path());
    run_session(&svc, &clock, ConditionId::EfficientFlat, 1, 0, None);
    run_session(&svc, &clock, ConditionId::EfficientFlat, 2, 2, Some("puzzle-2"));
    run_session(&svc, &clock, ConditionId::DefaultFlat, 3, 4, None);
    run_session(&svc, &clock, ConditionId::DefaultFlat, 4, 1, None);

    let events = parse_jsonl(&svc.export_sessions(&ExportFilter::default()).unwrap()).unwrap();
    let all = records_from_events(&events).unwrap();
    let skipped: Vec<_> = all.iter().filter(|r| !r.completed).collect();
    assert_eq!(skipped.len(), 1);
    assert_eq!(skipped[0].puzzle_id, "puzzle-2");

    let report = analyze(&events, svc.puzzles(), &AnalysisOptions::default()).unwrap();
    // 4 sessions x 6 test puzzles, one skipped, tutorials dropped
    assert_eq!(report.records.len(), 23);
    assert!(report.records.iter().all(|r| !r.puzzle_id.starts_with("tutorial")));
    for r in &report.records {
        let extra = r.program_length - r.optimal_length;
        let expected = match extra {
            0 => 0.0,
            1 | 2 => extra as f64 / 4.0,
            // odd paddings add one more turn
            _ => 1.0,
        };
        assert!(extra <= 4);
        assert_eq!(r.normalized_distance, Some(expected), "{r:?}");
        assert_eq!(r.normalized_flattened_length, r.normalized_distance);
    }
    let per_cond: Vec<_> = report.per_condition.iter().map(|g| (g.condition, g.n)).collect();
    assert_eq!(per_cond, vec![(ConditionId::EfficientFlat, 11), (ConditionId::DefaultFlat, 12)]);
    assert_eq!(report.comparisons.len(), 3);
    let bonuses: Vec<f64> = report.bonuses.iter().filter_map(|b| b.amount).collect();
    assert!(bonuses.iter().all(|&b| (0.0..=0.5).contains(&b)));
    assert!(report.bonuses.iter().filter(|b| b.condition == ConditionId::DefaultFlat).all(|b| b.amount == Some(0.5)));

    let out = tempfile::tempdir().unwrap();
    report.write_csv(out.path()).unwrap();
    let csv = std::fs::read_to_string(out.path().join("per_condition.csv")).unwrap();
    assert!(csv.starts_with("puzzle_id,condition,n,"));
    assert_eq!(csv.lines().count(), 3);
    for f in ["records.csv", "per_puzzle.csv", "comparisons.csv", "bonuses.csv", "notes.txt"] {
        assert!(out.path().join(f).exists(), "{f}");
    }
}

#[test]
fn degenerate_pools_leave_blanks_and_notes() {
    let dir = tempfile::tempdir().unwrap();
    let (svc, clock) = service(dir.path());
    run_session(&svc, &clock, ConditionId::EfficientHierarchy, 1, 0, None);
    run_session(&svc, &clock, ConditionId::EfficientHierarchy, 2, 0, None);
    let events = parse_jsonl(&svc.export_sessions(&ExportFilter::default()).unwrap()).unwrap();
    let report = analyze(&events, svc.puzzles(), &AnalysisOptions::default()).unwrap();
    assert!(report.records.iter().all(|r| r.normalized_distance.is_none()));
    assert!(report.notes.iter().any(|n| n.contains("degenerate")));
    assert!(report.bonuses.iter().all(|b| b.amount.is_none()));
}

#[test]
fn hierarchical_solutions_are_flattened() {
    let dir = tempfile::tempdir().unwrap();
    let (svc, clock) = service(dir.path());
    let sid = svc.create_session(ConditionId::DefaultHierarchy, Some(5)).unwrap().session_id;
    while let Ok(view) = svc.current_puzzle(&sid) {
        clock.advance_ms(1000);
        let flat = padded(&svc, &view.puzzle_id, 0);
        // wrap the whole path in one subprocess
        let p = Program { main: vec![Instruction::Call(1)], procs: vec![flat.main.clone()] };
        assert!(svc.submit_program(&sid, &view.puzzle_id, &p).unwrap().completed);
    }
    let events = parse_jsonl(&svc.export_sessions(&ExportFilter::default()).unwrap()).unwrap();
    let opts = AnalysisOptions { scope: PoolScope::WithinCondition, ..Default::default() };
    let report = analyze(&events, svc.puzzles(), &opts).unwrap();
    for r in &report.records {
        assert_eq!(r.program_length, r.optimal_length + 1);
        assert_eq!(r.flattened_length, r.optimal_length);
    }
}

proptest! {
    #[test]
    fn normalization_pins_extremes(mut pool in prop::collection::vec(-50i32..50, 2..20)) {
        pool.sort();
        prop_assume!(pool[0] != pool[pool.len() - 1]);
        let norms = PuzzleNorms::from_values(pool.iter().map(|&v| v as f64)).unwrap();
        prop_assert_eq!(norms.normalize(pool[0] as f64).unwrap(), 0.0);
        prop_assert_eq!(norms.normalize(pool[pool.len() - 1] as f64).unwrap(), 1.0);
    }

    #[test]
    fn interior_additions_leave_values_unchanged(pool in prop::collection::vec(-50i32..50, 2..20), pick in any::<prop::sample::Index>()) {
        let lo = *pool.iter().min().unwrap();
        let hi = *pool.iter().max().unwrap();
        prop_assume!(lo != hi);
        let before = PuzzleNorms::from_values(pool.iter().map(|&v| v as f64)).unwrap();
        let inside = lo + (pick.index((hi - lo + 1) as usize) as i32);
        let mut bigger = pool.clone();
        bigger.push(inside);
        let after = PuzzleNorms::from_values(bigger.iter().map(|&v| v as f64)).unwrap();
        for &v in &pool {
            prop_assert_eq!(before.normalize(v as f64).unwrap(), after.normalize(v as f64).unwrap());
        }
    }

    #[test]
    fn welch_t_is_antisymmetric(a in prop::collection::vec(-10.0f64..10.0, 2..12), b in prop::collection::vec(-10.0f64..10.0, 2..12)) {
        if let Ok(ab) = lightbot::analysis::welch_t(&a, &b) {
            let ba = lightbot::analysis::welch_t(&b, &a).unwrap();
            prop_assert_eq!(ab.t, -ba.t);
            prop_assert!((ab.p - ba.p).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab.p));
        }
    }
}
