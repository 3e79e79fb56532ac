use lightbot::program::{
    execute, flatten, program_length, validate_program, ExecutionLimits, ExecutionStatus, Instruction, Program,
    ProgramError,
};
use lightbot::service::ConditionId;
use lightbot::world::{Action, Heading, Pose, Puzzle};
use proptest::prelude::*;

fn arb_action() -> impl Strategy<Value = Action> {
    (0usize..5).prop_map(|i| Action::ALL[i])
}

/// Programs whose procedure k only calls procedures with a larger index,
/// so every unrolling is finite.
fn arb_acyclic_program() -> impl Strategy<Value = Program> {
    (0usize..=4).prop_flat_map(|n| {
        let body = move |k: usize| {
            prop::collection::vec(
                prop_oneof![
                    3 => arb_action().prop_map(Instruction::Primitive),
                    1 => (k + 1..=n.max(k + 1)).prop_map(move |j| {
                        if j <= n { Instruction::Call(j as u8) } else { Instruction::Primitive(Action::Walk) }
                    }),
                ],
                0..6,
            )
        };
        let procs: Vec<_> = (1..=n).map(body).collect();
        (body(0), procs).prop_map(|(main, procs)| Program { main, procs })
    })
}

/// Reference expansion by plain recursion, no tail-call handling.
fn expand(p: &Program, body: &[Instruction], out: &mut Vec<Action>) {
    for ins in body {
        match *ins {
            Instruction::Primitive(a) => out.push(a),
            Instruction::Call(k) => expand(p, &p.procs[k as usize - 1], out),
        }
    }
}

fn corridor() -> Puzzle {
    Puzzle::from_ascii("c", &["0 0 0 0*"], Pose::new(0, 0, Heading::East)).unwrap()
}

proptest! {
    #[test]
    fn length_counts_stored_instructions(p in arb_acyclic_program()) {
        let n = p.main.len() + p.procs.iter().map(|b| b.len()).sum::<usize>();
        prop_assert_eq!(program_length(&p), n);
    }

    #[test]
    fn flatten_matches_recursive_expansion(p in arb_acyclic_program()) {
        let mut reference = Vec::new();
        expand(&p, &p.main, &mut reference);
        let f = flatten(&p, ExecutionLimits::default()).unwrap();
        prop_assert!(!f.truncated);
        prop_assert_eq!(f.actions, reference);
    }

    #[test]
    fn flatten_of_flat_program_is_identity(acts in prop::collection::vec(arb_action(), 0..50)) {
        let p = Program::flat(&acts);
        prop_assert_eq!(program_length(&p), acts.len());
        prop_assert_eq!(flatten(&p, ExecutionLimits::default()).unwrap().actions, acts);
    }

    #[test]
    fn execution_is_a_prefix_of_flattening(p in arb_acyclic_program()) {
        let puzzle = corridor();
        let t = execute(&puzzle, &p, ExecutionLimits::default()).unwrap();
        let f = flatten(&p, ExecutionLimits::default()).unwrap();
        prop_assert!(f.actions.starts_with(&t.actions));
        prop_assert_eq!(t.states.len(), t.actions.len() + 1);
        for (i, a) in t.actions.iter().enumerate() {
            prop_assert_eq!(puzzle.step(t.states[i], *a).0, t.states[i + 1]);
        }
        let completes_at = t.states.iter().position(|s| puzzle.is_complete(s));
        match t.status {
            ExecutionStatus::Completed => prop_assert_eq!(completes_at, Some(t.actions.len())),
            ExecutionStatus::ProgramEnded => {
                prop_assert_eq!(completes_at, None);
                prop_assert_eq!(t.actions.len(), f.actions.len());
            }
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn text_form_round_trips(p in arb_acyclic_program()) {
        prop_assert_eq!(Program::from_text(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn flat_conditions_reject_every_call(p in arb_acyclic_program()) {
        for c in ConditionId::ALL {
            let r = validate_program(&p, &c.spec());
            if c.is_flat() {
                prop_assert_eq!(r.is_ok(), !p.has_calls() && p.procs.iter().all(|b| b.is_empty()));
            } else {
                prop_assert!(r.is_ok());
            }
        }
    }
}

#[test]
fn recursive_program_semantics() {
    use Action::*;
    use Instruction::{Call, Primitive as P};
    // P1 = [walk, light, call1]
    let p = Program { main: vec![Call(1)], procs: vec![vec![P(Walk), P(Light), Call(1)]] };
    let done = execute(&corridor(), &p, ExecutionLimits::default()).unwrap();
    assert_eq!(done.status, ExecutionStatus::Completed);
    assert_eq!(done.actions.len(), 6);
    let blocked = Puzzle::from_ascii("b", &["0 1*"], Pose::new(0, 0, Heading::East)).unwrap();
    let t = execute(&blocked, &p, ExecutionLimits::new(777, 1000)).unwrap();
    assert_eq!(t.status, ExecutionStatus::StepBudgetExhausted);
    assert_eq!(t.actions.len(), 777);
}

#[test]
fn dangling_call_is_an_error() {
    let p = Program { main: vec![Instruction::Call(2)], procs: vec![vec![]] };
    assert_eq!(execute(&corridor(), &p, ExecutionLimits::default()).unwrap_err(), ProgramError::DanglingCall { proc: 2 });
    assert!(validate_program(&p, &ConditionId::DefaultHierarchy.spec()).is_err());
}
