mod common;

use lightbot::compress::{compress, find_best_candidate, recursion_pass, CompressionConfig};
use lightbot::program::{flatten, program_length, ExecutionLimits, Instruction, Program};
use lightbot::world::Action;
use num_rational::Ratio;
use proptest::prelude::*;

fn arb_seq(alphabet: usize, max: usize) -> impl Strategy<Value = Vec<Action>> {
    prop::collection::vec((0..alphabet).prop_map(|i| Action::ALL[i]), 1..max)
}

/// Sequences built from a few repeated blocks, where compression has
/// something to find.
fn arb_structured() -> impl Strategy<Value = Vec<Action>> {
    (prop::collection::vec(arb_seq(5, 5), 1..4), prop::collection::vec(0usize..3, 2..12)).prop_map(|(blocks, picks)| {
        picks.iter().flat_map(|&i| blocks[i % blocks.len()].clone()).collect()
    })
}

fn unrolled_prefix(p: &Program, n: usize) -> Vec<Action> {
    flatten(p, ExecutionLimits::new(n, 1000)).unwrap().actions
}

fn check_reconstruction(s: &[Action], config: &CompressionConfig) -> Result<(), TestCaseError> {
    let r = compress(s, config).unwrap();
    prop_assert!(r.program.procs.len() <= config.max_procs);
    prop_assert_eq!(r.compressed_length, program_length(&r.program));
    prop_assert!(r.compressed_length <= r.flat_length);
    prop_assert_eq!(r.flat_length, s.len());
    prop_assert!(r.compressibility >= Ratio::from_integer(0) && r.compressibility < Ratio::from_integer(1));
    if r.recursion_applied {
        let f = flatten(&r.program, ExecutionLimits::new(s.len() + 1, 1000)).unwrap();
        prop_assert!(f.truncated, "recursive program must run past the input");
        prop_assert_eq!(&f.actions[..s.len()], s);
        prop_assert_eq!(unrolled_prefix(&r.program, s.len()), s.to_vec());
    } else {
        let f = flatten(&r.program, ExecutionLimits::default()).unwrap();
        prop_assert!(!f.truncated);
        prop_assert_eq!(f.actions, s.to_vec());
    }
    Ok(())
}

proptest! {
    #[test]
    fn reconstructs_random(s in arb_seq(5, 120)) {
        check_reconstruction(&s, &CompressionConfig::default())?;
    }

    #[test]
    fn reconstructs_structured(s in arb_structured()) {
        check_reconstruction(&s, &CompressionConfig::default())?;
        check_reconstruction(&s, &CompressionConfig { recursion: false, ..Default::default() })?;
        check_reconstruction(&s, &CompressionConfig { max_procs: 1, ..Default::default() })?;
    }

    #[test]
    fn stored_procs_respect_min_len(s in arb_structured()) {
        let r = compress(&s, &CompressionConfig { recursion: false, ..Default::default() }).unwrap();
        prop_assert!(r.program.procs.iter().all(|b| b.len() >= 2));
        prop_assert!(!r.recursion_applied);
    }

    #[test]
    fn incompressible_input_is_left_verbatim(s in arb_seq(5, 30)) {
        let tokens: Vec<Instruction> = s.iter().map(|&a| a.into()).collect();
        if find_best_candidate(&tokens, &CompressionConfig::default()).is_none() {
            let r = compress(&s, &CompressionConfig::default()).unwrap();
            prop_assert_eq!(r.program, Program::flat(&s));
            prop_assert_eq!(r.compressibility, Ratio::from_integer(0));
        }
    }

    /// Greedy two-subprocess compression without the recursion pass can
    /// never beat the best two-subprocess decomposition.
    #[test]
    fn bounded_by_brute_force_optimum(s in arb_seq(3, 15)) {
        let config = CompressionConfig { max_procs: 2, recursion: false, ..Default::default() };
        let r = compress(&s, &config).unwrap();
        let optimum = common::brute_force_two_proc_optimum(&s);
        prop_assert!(optimum <= r.compressed_length, "optimum {} greedy {}", optimum, r.compressed_length);
        prop_assert!(r.compressed_length <= s.len());
        check_reconstruction(&s, &config)?;
    }

    #[test]
    fn recursion_pass_only_fires_on_repeated_single_call(k in 1u8..=4, n in 1usize..5) {
        let procs: Vec<Vec<Instruction>> = (0..4).map(|_| vec![Action::Walk.into(), Action::Light.into()]).collect();
        let p = Program { main: vec![Instruction::Call(k); n], procs };
        let (q, fired) = recursion_pass(&p);
        prop_assert_eq!(fired, n >= 2);
        if fired {
            prop_assert_eq!(&q.main, &vec![Instruction::Call(k)]);
            prop_assert_eq!(q.procs[k as usize - 1].last(), Some(&Instruction::Call(k)));
        } else {
            prop_assert_eq!(q, p);
        }
    }
}

#[test]
fn brute_force_oracle_sanity() {
    // WWT x3: P1 = WWT, main = 3 calls -> 6
    assert_eq!(common::brute_force_two_proc_optimum(&common::letters("WWTWWTWWT")), 6);
    assert_eq!(common::brute_force_two_proc_optimum(&common::letters("WTJL")), 4);
    // P1 = WW, P2 = [P1, P1]: 2 + 2 + 2 = 6 beats 8 flat
    assert_eq!(common::brute_force_two_proc_optimum(&common::letters("WWWWWWWW")), 6);
}

#[test]
fn worked_examples() {
    let r = compress(&common::letters("WWTWWTWWT"), &CompressionConfig::default()).unwrap();
    assert_eq!(r.compressed_length, 5);
    assert_eq!(r.compressibility, Ratio::new(4, 9));
    assert!(r.recursion_applied);
    let r = compress(&common::letters("WTJL"), &CompressionConfig::default()).unwrap();
    assert_eq!(r.compressibility, Ratio::from_integer(0));
}
