use agentchess_rules::{
    apply_move, game_status, is_insufficient_material, legal_moves, parse_fen, perft, render_fen, BoardState,
    GameStatus, PositionHistory, STARTING_FEN,
};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shakmaty::fen::Fen;
use shakmaty::{CastlingMode, Chess, EnPassantMode, Position};

fn oracle_position(fen: &str) -> Chess {
    fen.parse::<Fen>().unwrap().into_position(CastlingMode::Standard).unwrap()
}

fn oracle_fen(pos: &Chess) -> String {
    Fen::from_position(pos.clone(), EnPassantMode::Legal).to_string()
}

fn oracle_moves(pos: &Chess) -> Vec<String> {
    let mut v: Vec<String> =
        pos.legal_moves().iter().map(|m| m.to_uci(CastlingMode::Standard).to_string()).collect();
    v.sort();
    v
}

fn our_moves(board: &BoardState) -> Vec<String> {
    legal_moves(board).iter().map(|m| m.to_string()).collect()
}

// Positions with castling, en passant, promotions and pins.
const POSITIONS: &[(&str, u32)] = &[
    (STARTING_FEN, 4),
    ("r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1", 3),
    ("8/2p5/3p4/KP5r/1R3p1k/8/4P1P1/8 w - - 0 1", 4),
    ("r3k2r/Pppp1ppp/1b3nbN/nP6/BBP1P3/q4N2/Pp1P2PP/R2Q1RK1 w kq - 0 1", 3),
    ("rnbq1k1r/pp1Pbppp/2p5/8/2B5/8/PPP1NnPP/RNBQK2R w KQ - 1 8", 3),
    ("r4rk1/1pp1qppp/p1np1n2/2b1p1B1/2B1P1b1/P1NP1N2/1PP1QPPP/R4RK1 w - - 0 10", 3),
];

#[test]
fn perft_matches_oracle() {
    for (fen, depth) in POSITIONS {
        let ours = parse_fen(fen).unwrap();
        let theirs = oracle_position(fen);
        for d in 1..=*depth {
            assert_eq!(perft(&ours, d), shakmaty::perft(&theirs, d), "{fen} depth {d}");
        }
    }
}

#[test]
fn perft_start_published_counts() {
    let b = BoardState::starting_position();
    assert_eq!(perft(&b, 1), 20);
    assert_eq!(perft(&b, 2), 400);
    assert_eq!(perft(&b, 3), 8902);
    assert_eq!(perft(&b, 4), 197281);
}

#[test]
fn fen_after_e2e4_matches_oracle() {
    let b = BoardState::starting_position();
    let mv = "e2e4".parse().unwrap();
    let after = apply_move(&b, mv).unwrap();
    let pos = oracle_position(STARTING_FEN);
    let m = pos.legal_moves().into_iter().find(|m| m.to_uci(CastlingMode::Standard).to_string() == "e2e4").unwrap();
    let pos = pos.play(&m).unwrap();
    assert_eq!(render_fen(&after), oracle_fen(&pos));
    assert_eq!(render_fen(&after), "rnbqkbnr/pppppppp/8/8/4P3/8/PPPP1PPP/RNBQKBNR b KQkq - 0 1");
}

#[test]
fn fools_mate_matches_oracle() {
    let mut b = BoardState::starting_position();
    let mut h = PositionHistory::starting_from(&b);
    let mut pos = Chess::default();
    for uci in ["f2f3", "e7e5", "g2g4", "d8h4"] {
        b = apply_move(&b, uci.parse().unwrap()).unwrap();
        h.push(&b);
        let m = pos.legal_moves().into_iter().find(|m| m.to_uci(CastlingMode::Standard).to_string() == uci).unwrap();
        pos = pos.play(&m).unwrap();
    }
    assert!(pos.is_checkmate());
    assert_eq!(render_fen(&b), oracle_fen(&pos));
    assert!(matches!(game_status(&b, &h), GameStatus::Checkmate { .. }));
}

#[test]
fn random_playouts_agree_with_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut plies = 0;
    for _ in 0..1000 {
        let mut b = BoardState::starting_position();
        let mut pos = Chess::default();
        for _ in 0..120 {
            let fen = render_fen(&b);
            assert_eq!(fen, oracle_fen(&pos));
            assert_eq!(render_fen(&parse_fen(&fen).unwrap()), fen);
            assert_eq!(is_insufficient_material(&b), pos.is_insufficient_material(), "{fen}");
            let moves = our_moves(&b);
            assert_eq!(moves, oracle_moves(&pos), "{fen}");
            let Some(choice) = moves.choose(&mut rng) else { break };
            b = apply_move(&b, choice.parse().unwrap()).unwrap();
            let m = pos
                .legal_moves()
                .into_iter()
                .find(|m| m.to_uci(CastlingMode::Standard).to_string() == *choice)
                .unwrap();
            pos = pos.play(&m).unwrap();
            plies += 1;
        }
    }
    assert!(plies > 50_000);
}
