use thiserror::Error;

use crate::board::BoardState;
use crate::fen::render_fen;
use crate::moves::MoveUci;
use crate::types::{Color, Piece, PieceKind, Square};

const KNIGHT_STEPS: [(i8, i8); 8] = [(1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2)];
const KING_STEPS: [(i8, i8); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
const ROOK_DIRS: [(i8, i8); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const BISHOP_DIRS: [(i8, i8); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];
const PROMOTIONS: [PieceKind; 4] = [PieceKind::Knight, PieceKind::Bishop, PieceKind::Rook, PieceKind::Queen];

/// Rejected move, carrying what the illegal-move reflection needs.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("illegal uci: '{uci}' in {fen}")]
pub struct IllegalMove {
    pub uci: String,
    pub fen: String,
}

/// Is `sq` attacked by any piece of color `by`?
pub fn is_attacked(board: &BoardState, sq: Square, by: Color) -> bool {
    // Pawns attack diagonally forward, so look backward from the target.
    let back = -by.forward();
    for df in [-1, 1] {
        if let Some(s) = sq.offset(df, back) {
            if board.piece_at(s) == Some(Piece::new(by, PieceKind::Pawn)) {
                return true;
            }
        }
    }
    for (df, dr) in KNIGHT_STEPS {
        if let Some(s) = sq.offset(df, dr) {
            if board.piece_at(s) == Some(Piece::new(by, PieceKind::Knight)) {
                return true;
            }
        }
    }
    for (df, dr) in KING_STEPS {
        if let Some(s) = sq.offset(df, dr) {
            if board.piece_at(s) == Some(Piece::new(by, PieceKind::King)) {
                return true;
            }
        }
    }
    let slides = |dirs: &[(i8, i8)], kinds: [PieceKind; 2]| {
        dirs.iter().any(|&(df, dr)| {
            let mut cur = sq;
            while let Some(next) = cur.offset(df, dr) {
                match board.piece_at(next) {
                    None => cur = next,
                    Some(p) => return p.color == by && kinds.contains(&p.kind),
                }
            }
            false
        })
    };
    slides(&ROOK_DIRS, [PieceKind::Rook, PieceKind::Queen])
        || slides(&BISHOP_DIRS, [PieceKind::Bishop, PieceKind::Queen])
}

pub fn in_check(board: &BoardState, color: Color) -> bool {
    match board.king_square(color) {
        Some(k) => is_attacked(board, k, color.opposite()),
        None => false,
    }
}

fn push_pawn_move(out: &mut Vec<MoveUci>, from: Square, to: Square) {
    if to.rank() == 0 || to.rank() == 7 {
        for p in PROMOTIONS {
            out.push(MoveUci::new(from, to, Some(p)));
        }
    } else {
        out.push(MoveUci::new(from, to, None));
    }
}

/// Pseudo-legal moves: obey piece movement but may leave the king in check.
/// Castling is fully validated here (path clear and not through check).
fn pseudo_legal(board: &BoardState, out: &mut Vec<MoveUci>) {
    let us = board.side_to_move;
    let them = us.opposite();
    for (from, piece) in board.pieces().filter(|(_, p)| p.color == us) {
        match piece.kind {
            PieceKind::Pawn => {
                let fwd = us.forward();
                if let Some(one) = from.offset(0, fwd) {
                    if board.piece_at(one).is_none() {
                        push_pawn_move(out, from, one);
                        let start_rank = if us == Color::White { 1 } else { 6 };
                        if from.rank() == start_rank {
                            if let Some(two) = from.offset(0, 2 * fwd) {
                                if board.piece_at(two).is_none() {
                                    out.push(MoveUci::new(from, two, None));
                                }
                            }
                        }
                    }
                }
                for df in [-1, 1] {
                    if let Some(to) = from.offset(df, fwd) {
                        match board.piece_at(to) {
                            Some(p) if p.color == them => push_pawn_move(out, from, to),
                            None if board.en_passant == Some(to) => out.push(MoveUci::new(from, to, None)),
                            _ => {}
                        }
                    }
                }
            }
            PieceKind::Knight | PieceKind::King => {
                let steps = if piece.kind == PieceKind::Knight { &KNIGHT_STEPS } else { &KING_STEPS };
                for &(df, dr) in steps {
                    if let Some(to) = from.offset(df, dr) {
                        if board.piece_at(to).is_none_or(|p| p.color == them) {
                            out.push(MoveUci::new(from, to, None));
                        }
                    }
                }
            }
            PieceKind::Bishop | PieceKind::Rook | PieceKind::Queen => {
                let dirs: &[(i8, i8)] = match piece.kind {
                    PieceKind::Bishop => &BISHOP_DIRS,
                    PieceKind::Rook => &ROOK_DIRS,
                    _ => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
                };
                for &(df, dr) in dirs {
                    let mut cur = from;
                    while let Some(to) = cur.offset(df, dr) {
                        match board.piece_at(to) {
                            None => out.push(MoveUci::new(from, to, None)),
                            Some(p) => {
                                if p.color == them {
                                    out.push(MoveUci::new(from, to, None));
                                }
                                break;
                            }
                        }
                        cur = to;
                    }
                }
            }
        }
    }
    castling_moves(board, out);
}

fn castling_moves(board: &BoardState, out: &mut Vec<MoveUci>) {
    let us = board.side_to_move;
    let them = us.opposite();
    let home = if us == Color::White { 0 } else { 7 };
    let sq = |file: u8| Square::from_coords(file, home).unwrap();
    let king = Piece::new(us, PieceKind::King);
    let rook = Piece::new(us, PieceKind::Rook);
    if board.piece_at(sq(4)) != Some(king) {
        return;
    }
    let rights = board.castling;
    if !(rights.kingside(us) || rights.queenside(us)) || is_attacked(board, sq(4), them) {
        return;
    }
    if rights.kingside(us)
        && board.piece_at(sq(7)) == Some(rook)
        && board.piece_at(sq(5)).is_none()
        && board.piece_at(sq(6)).is_none()
        && !is_attacked(board, sq(5), them)
        && !is_attacked(board, sq(6), them)
    {
        out.push(MoveUci::new(sq(4), sq(6), None));
    }
    if rights.queenside(us)
        && board.piece_at(sq(0)) == Some(rook)
        && board.piece_at(sq(1)).is_none()
        && board.piece_at(sq(2)).is_none()
        && board.piece_at(sq(3)).is_none()
        && !is_attacked(board, sq(3), them)
        && !is_attacked(board, sq(2), them)
    {
        out.push(MoveUci::new(sq(4), sq(2), None));
    }
}

/// Plays a pseudo-legal move without legality checks. The en-passant field is
/// set to the raw skipped square after any double push; see `canonicalize_en_passant`.
pub(crate) fn make_raw(board: &BoardState, mv: MoveUci) -> BoardState {
    let mut next = board.clone();
    let us = board.side_to_move;
    let piece = board.piece_at(mv.from).expect("move from an empty square");
    let captured = board.piece_at(mv.to);

    next.squares[mv.from.index()] = None;
    let mut placed = piece;
    if let Some(promo) = mv.promotion {
        placed = Piece::new(us, promo);
    }
    next.squares[mv.to.index()] = Some(placed);
    next.en_passant = None;

    match piece.kind {
        PieceKind::Pawn => {
            if captured.is_none() && mv.from.file() != mv.to.file() {
                // En-passant capture removes the pawn behind the target square.
                let victim = Square::from_coords(mv.to.file(), mv.from.rank()).unwrap();
                next.squares[victim.index()] = None;
            }
            if mv.from.rank().abs_diff(mv.to.rank()) == 2 {
                next.en_passant = Square::from_coords(mv.from.file(), (mv.from.rank() + mv.to.rank()) / 2);
            }
        }
        PieceKind::King => {
            next.castling.clear_color(us);
            if mv.from.file() == 4 && mv.to.file().abs_diff(4) == 2 {
                let rank = mv.from.rank();
                let (rook_from, rook_to) = if mv.to.file() == 6 { (7, 5) } else { (0, 3) };
                let rf = Square::from_coords(rook_from, rank).unwrap();
                let rt = Square::from_coords(rook_to, rank).unwrap();
                next.squares[rt.index()] = next.squares[rf.index()].take();
            }
        }
        _ => {}
    }
    next.castling.clear_rook_square(mv.from);
    next.castling.clear_rook_square(mv.to);

    if piece.kind == PieceKind::Pawn || captured.is_some() {
        next.halfmove_clock = 0;
    } else {
        next.halfmove_clock += 1;
    }
    if us == Color::Black {
        next.fullmove_number += 1;
    }
    next.side_to_move = us.opposite();
    next
}

/// Keeps the en-passant square only if some en-passant capture onto it is legal.
pub(crate) fn canonicalize_en_passant(board: &mut BoardState) {
    let Some(ep) = board.en_passant else { return };
    let us = board.side_to_move;
    let pawn = Piece::new(us, PieceKind::Pawn);
    let victim = ep.offset(0, -us.forward()).and_then(|s| board.piece_at(s));
    if victim != Some(Piece::new(us.opposite(), PieceKind::Pawn)) || board.piece_at(ep).is_some() {
        board.en_passant = None;
        return;
    }
    let legal = [-1i8, 1].iter().any(|&df| {
        ep.offset(df, -us.forward())
            .filter(|&from| board.piece_at(from) == Some(pawn))
            .is_some_and(|from| {
                let after = make_raw(board, MoveUci::new(from, ep, None));
                !in_check(&after, us)
            })
    });
    if !legal {
        board.en_passant = None;
    }
}

fn legal_unsorted(board: &BoardState) -> Vec<MoveUci> {
    let mut pseudo = Vec::with_capacity(64);
    pseudo_legal(board, &mut pseudo);
    let us = board.side_to_move;
    pseudo.retain(|&mv| !in_check(&make_raw(board, mv), us));
    pseudo
}

/// All legal moves for the side to move, sorted lexicographically by UCI text.
pub fn legal_moves(board: &BoardState) -> Vec<MoveUci> {
    let mut moves = legal_unsorted(board);
    moves.sort_unstable();
    moves
}

pub fn is_legal(board: &BoardState, mv: MoveUci) -> bool {
    legal_unsorted(board).contains(&mv)
}

/// Applies a legal move, returning the successor state. The input is untouched.
pub fn apply_move(board: &BoardState, mv: MoveUci) -> Result<BoardState, IllegalMove> {
    if !is_legal(board, mv) {
        return Err(IllegalMove { uci: mv.to_string(), fen: render_fen(board) });
    }
    let mut next = make_raw(board, mv);
    canonicalize_en_passant(&mut next);
    Ok(next)
}

/// Parses `uci` and applies it. Unparsable text is reported as illegal, with
/// the raw text echoed back.
pub fn apply_uci(board: &BoardState, uci: &str) -> Result<(MoveUci, BoardState), IllegalMove> {
    let mv: MoveUci = uci
        .parse()
        .map_err(|_| IllegalMove { uci: uci.to_string(), fen: render_fen(board) })?;
    apply_move(board, mv).map(|next| (mv, next))
}

/// Leaf count of the legal move tree to `depth`.
pub fn perft(board: &BoardState, depth: u32) -> u64 {
    if depth == 0 {
        return 1;
    }
    let moves = legal_unsorted(board);
    if depth == 1 {
        return moves.len() as u64;
    }
    moves
        .into_iter()
        .map(|mv| {
            let mut next = make_raw(board, mv);
            canonicalize_en_passant(&mut next);
            perft(&next, depth - 1)
        })
        .sum()
}
