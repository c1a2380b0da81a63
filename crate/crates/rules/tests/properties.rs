use agentchess_rules::{
    apply_move, apply_uci, in_check, is_legal, legal_moves, parse_fen, render_fen, BoardState, MoveUci, Square,
};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_position(seed: u64, plies: usize) -> BoardState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = BoardState::starting_position();
    for _ in 0..plies {
        let moves = legal_moves(&b);
        let Some(m) = moves.choose(&mut rng) else { break };
        b = apply_move(&b, *m).unwrap();
    }
    b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn legal_moves_never_leave_own_king_in_check(seed in any::<u64>(), plies in 0usize..80) {
        let b = random_position(seed, plies);
        let mover = b.side_to_move();
        for m in legal_moves(&b) {
            let after = apply_move(&b, m).unwrap();
            prop_assert!(!in_check(&after, mover));
            prop_assert_eq!(after.side_to_move(), mover.opposite());
        }
    }

    #[test]
    fn every_other_move_is_rejected(seed in any::<u64>(), plies in 0usize..60, from in 0u8..64, to in 0u8..64) {
        prop_assume!(from != to);
        let b = random_position(seed, plies);
        let mv = MoveUci::new(Square::new(from).unwrap(), Square::new(to).unwrap(), None);
        let listed = legal_moves(&b).contains(&mv);
        prop_assert_eq!(is_legal(&b, mv), listed);
        let result = apply_move(&b, mv);
        prop_assert_eq!(result.is_ok(), listed);
        if let Err(e) = result {
            prop_assert_eq!(e.to_string(), format!("illegal uci: '{}' in {}", mv, render_fen(&b)));
        }
    }

    #[test]
    fn fen_round_trip(seed in any::<u64>(), plies in 0usize..150) {
        let b = random_position(seed, plies);
        let fen = render_fen(&b);
        let parsed = parse_fen(&fen).unwrap();
        prop_assert_eq!(&parsed, &b);
        prop_assert_eq!(render_fen(&parsed), fen);
    }

    #[test]
    fn apply_does_not_mutate_input(seed in any::<u64>(), plies in 0usize..60) {
        let b = random_position(seed, plies);
        let before = b.clone();
        for m in legal_moves(&b) {
            let _ = apply_move(&b, m);
        }
        prop_assert_eq!(b, before);
    }
}

#[test]
fn legal_moves_are_sorted_and_unique() {
    for seed in 0..50 {
        let b = random_position(seed, 40);
        let texts: Vec<String> = legal_moves(&b).iter().map(|m| m.to_string()).collect();
        let mut sorted = texts.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(texts, sorted);
    }
}

#[test]
fn garbage_uci_is_rejected_with_reflection_text() {
    let b = BoardState::starting_position();
    for text in ["", "e2", "e2e4e", "z9z9", "e2e2", "E2E4"] {
        let err = apply_uci(&b, text).unwrap_err();
        assert_eq!(err.to_string(), format!("illegal uci: '{}' in {}", text, render_fen(&b)));
    }
}
