//! Rules engines for the three 6×6 games: Connect Four, Othello and Gobang.
//!
//! Boards are two `u64` bitboards (one per player) with bit `row * 6 + col`,
//! row 0 at the top. States are small `Copy` values; every operation is a pure
//! function of its inputs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Side length of every board.
pub const BOARD_SIDE: usize = 6;
/// Number of cells on the board.
pub const CELLS: usize = BOARD_SIDE * BOARD_SIDE;
/// Othello's explicit pass action id.
pub const OTHELLO_PASS: usize = CELLS;
/// Default in-a-row target for Gobang on the 6×6 board.
pub const GOBANG_WIN_LENGTH: u8 = 5;
/// In-a-row target for Connect Four.
pub const CONNECT_FOUR_WIN_LENGTH: u8 = 4;

const FULL: u64 = (1u64 << CELLS) - 1;
const COL0: u64 = column_mask(0);
const COL5: u64 = column_mask(BOARD_SIDE - 1);
const TOP_ROW: u64 = (1u64 << BOARD_SIDE) - 1;

const fn column_mask(col: usize) -> u64 {
    let mut m = 0u64;
    let mut r = 0;
    while r < BOARD_SIDE {
        m |= 1u64 << (r * BOARD_SIDE + col);
        r += 1;
    }
    m
}

/// Bits that can start a run of `len` cells in direction `(dr, dc)` without
/// leaving the board.
const fn line_start_mask(dr: isize, dc: isize, len: isize) -> u64 {
    let n = BOARD_SIDE as isize;
    let mut m = 0u64;
    let mut r = 0;
    while r < n {
        let mut c = 0;
        while c < n {
            let er = r + dr * (len - 1);
            let ec = c + dc * (len - 1);
            if er >= 0 && er < n && ec >= 0 && ec < n {
                m |= 1u64 << (r * n + c);
            }
            c += 1;
        }
        r += 1;
    }
    m
}

const fn line_masks(dr: isize, dc: isize) -> [u64; BOARD_SIDE + 1] {
    let mut out = [0u64; BOARD_SIDE + 1];
    let mut k = 1;
    while k <= BOARD_SIDE {
        out[k] = line_start_mask(dr, dc, k as isize);
        k += 1;
    }
    out
}

/// (index offset, start masks by run length) for E, S, SE, SW.
const LINE_DIRS: [(u32, [u64; BOARD_SIDE + 1]); 4] = [
    (1, line_masks(0, 1)),
    (6, line_masks(1, 0)),
    (7, line_masks(1, 1)),
    (5, line_masks(1, -1)),
];

fn has_line(bits: u64, len: u8) -> bool {
    let len = len as usize;
    if len == 0 || len > BOARD_SIDE {
        return false;
    }
    LINE_DIRS.iter().any(|&(d, ref masks)| {
        let mut run = bits;
        for i in 1..len as u32 {
            run &= bits >> (i * d);
        }
        run & masks[len] != 0
    })
}

#[inline]
fn shift(x: u64, dir: usize) -> u64 {
    match dir {
        0 => (x << 1) & !COL0 & FULL,
        1 => (x >> 1) & !COL5,
        2 => x >> 6,
        3 => (x << 6) & FULL,
        4 => (x >> 5) & !COL0,
        5 => (x >> 7) & !COL5,
        6 => (x << 7) & !COL0 & FULL,
        _ => (x << 5) & !COL5 & FULL,
    }
}

fn othello_placements(own: u64, opp: u64) -> u64 {
    let empty = !(own | opp) & FULL;
    let mut moves = 0u64;
    for dir in 0..8 {
        let mut t = shift(own, dir) & opp;
        for _ in 0..4 {
            t |= shift(t, dir) & opp;
        }
        moves |= shift(t, dir) & empty;
    }
    moves
}

fn othello_flips(own: u64, opp: u64, square: u64) -> u64 {
    let mut flips = 0u64;
    for dir in 0..8 {
        let mut x = shift(square, dir);
        let mut run = 0u64;
        while x & opp != 0 {
            run |= x;
            x = shift(x, dir);
        }
        if x & own != 0 {
            flips |= run;
        }
    }
    flips
}

/// Which of the three games a state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameId {
    ConnectFour,
    Othello,
    Gobang,
}

impl GameId {
    pub const ALL: [GameId; 3] = [GameId::ConnectFour, GameId::Othello, GameId::Gobang];

    /// Fixed length of the policy vector.
    pub fn action_size(self) -> usize {
        match self {
            GameId::ConnectFour => BOARD_SIDE,
            GameId::Othello => CELLS + 1,
            GameId::Gobang => CELLS,
        }
    }

    /// In-a-row target, if the game is decided by lines.
    pub fn default_win_length(self) -> u8 {
        match self {
            GameId::ConnectFour => CONNECT_FOUR_WIN_LENGTH,
            GameId::Gobang => GOBANG_WIN_LENGTH,
            GameId::Othello => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GameId::ConnectFour => "connect_four",
            GameId::Othello => "othello",
            GameId::Gobang => "gobang",
        }
    }
}

impl fmt::Display for GameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GameId {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "connect_four" | "connectfour" | "connect4" | "c4" => Ok(GameId::ConnectFour),
            "othello" | "reversi" => Ok(GameId::Othello),
            "gobang" | "gomoku" => Ok(GameId::Gobang),
            other => Err(GameError::Parse(format!("unknown game '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    One,
    Two,
}

impl Player {
    #[inline]
    pub fn opponent(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    /// +1 for player one, −1 for player two.
    #[inline]
    pub fn sign(self) -> i8 {
        match self {
            Player::One => 1,
            Player::Two => -1,
        }
    }

    #[inline]
    fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Player::One => 'X',
            Player::Two => 'O',
        }
    }
}

/// An action id in `[0, action_size)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Move(u8);

impl Move {
    pub const fn new(index: usize) -> Move {
        Move(index as u8)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Result of a finished game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Win(Player),
    Draw,
}

impl Outcome {
    /// +1 player one wins, −1 player two wins, 0 draw.
    pub fn value(self) -> i8 {
        match self {
            Outcome::Win(p) => p.sign(),
            Outcome::Draw => 0,
        }
    }

    /// Result from `player`'s point of view.
    pub fn value_for(self, player: Player) -> i8 {
        self.value() * player.sign()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("illegal move {action} in {game}: {reason}")]
    IllegalMove {
        game: GameId,
        action: usize,
        reason: &'static str,
    },
    #[error("no legal moves: position is terminal")]
    Terminal,
    #[error("invalid position: {0}")]
    Invariant(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// A board position together with the side to move.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct GameState {
    game: GameId,
    win_length: u8,
    boards: [u64; 2],
    to_move: Player,
}

impl GameState {
    /// Standard opening position with the game's default rules.
    pub fn initial(game: GameId) -> GameState {
        GameState::initial_with_win_length(game, game.default_win_length())
    }

    /// Opening position with a custom in-a-row target (Gobang sensitivity runs).
    pub fn initial_with_win_length(game: GameId, win_length: u8) -> GameState {
        let boards = match game {
            GameId::Othello => {
                let c = BOARD_SIDE / 2;
                let bit = |r: usize, col: usize| 1u64 << (r * BOARD_SIDE + col);
                [
                    bit(c - 1, c) | bit(c, c - 1),
                    bit(c - 1, c - 1) | bit(c, c),
                ]
            }
            _ => [0, 0],
        };
        GameState {
            game,
            win_length,
            boards,
            to_move: Player::One,
        }
    }

    /// Builds a state from raw bitboards, checking structural invariants.
    pub fn from_boards(
        game: GameId,
        win_length: u8,
        player_one: u64,
        player_two: u64,
        to_move: Player,
    ) -> Result<GameState, GameError> {
        let s = GameState {
            game,
            win_length,
            boards: [player_one, player_two],
            to_move,
        };
        s.validate()?;
        Ok(s)
    }

    #[inline]
    pub fn game(&self) -> GameId {
        self.game
    }

    #[inline]
    pub fn to_move(&self) -> Player {
        self.to_move
    }

    pub fn win_length(&self) -> u8 {
        self.win_length
    }

    /// Bitboard of `player`'s pieces.
    #[inline]
    pub fn pieces(&self, player: Player) -> u64 {
        self.boards[player.index()]
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<Player> {
        let bit = 1u64 << (row * BOARD_SIDE + col);
        if self.boards[0] & bit != 0 {
            Some(Player::One)
        } else if self.boards[1] & bit != 0 {
            Some(Player::Two)
        } else {
            None
        }
    }

    pub fn piece_count(&self) -> u32 {
        (self.boards[0] | self.boards[1]).count_ones()
    }

    /// Compact key identifying board and side to move.
    pub fn key(&self) -> u128 {
        (self.boards[0] as u128)
            | ((self.boards[1] as u128) << CELLS)
            | ((self.to_move.index() as u128) << (2 * CELLS))
    }

    pub fn action_size(&self) -> usize {
        self.game.action_size()
    }

    /// Bitmask over action ids that are playable, ignoring whether the game
    /// has ended. Othello yields only the pass bit when no placement flips.
    pub fn legal_mask(&self) -> u64 {
        let own = self.boards[self.to_move.index()];
        let opp = self.boards[self.to_move.opponent().index()];
        let occupied = own | opp;
        match self.game {
            GameId::ConnectFour => !occupied & TOP_ROW,
            GameId::Gobang => !occupied & FULL,
            GameId::Othello => {
                let placements = othello_placements(own, opp);
                if placements == 0 {
                    1u64 << OTHELLO_PASS
                } else {
                    placements
                }
            }
        }
    }

    /// Legal moves in increasing action id order.
    pub fn legal_moves(&self) -> Result<Vec<Move>, GameError> {
        if self.is_terminal() {
            return Err(GameError::Terminal);
        }
        Ok(mask_moves(self.legal_mask()).collect())
    }

    pub fn is_legal(&self, mv: Move) -> bool {
        mv.index() < self.action_size()
            && !self.is_terminal()
            && self.legal_mask() & (1u64 << mv.index()) != 0
    }

    /// Successor state; the receiver is left untouched.
    pub fn apply_move(&self, mv: Move) -> Result<GameState, GameError> {
        let illegal = |reason| GameError::IllegalMove {
            game: self.game,
            action: mv.index(),
            reason,
        };
        if mv.index() >= self.action_size() {
            return Err(illegal("action id out of range"));
        }
        if self.is_terminal() {
            return Err(illegal("game is already over"));
        }
        if self.legal_mask() & (1u64 << mv.index()) == 0 {
            return Err(illegal(match self.game {
                GameId::ConnectFour => "column is full",
                GameId::Gobang => "cell is occupied",
                GameId::Othello if mv.index() == OTHELLO_PASS => "pass with placements available",
                GameId::Othello => "placement flips nothing",
            }));
        }
        Ok(self.play(mv))
    }

    /// Applies a move known to be in `legal_mask`.
    #[inline]
    pub(crate) fn play(&self, mv: Move) -> GameState {
        let me = self.to_move.index();
        let them = self.to_move.opponent().index();
        let mut next = *self;
        match self.game {
            GameId::ConnectFour => {
                let col = mv.index();
                let occupied = self.boards[0] | self.boards[1];
                let mut row = BOARD_SIDE - 1;
                while occupied & (1u64 << (row * BOARD_SIDE + col)) != 0 {
                    row -= 1;
                }
                next.boards[me] |= 1u64 << (row * BOARD_SIDE + col);
            }
            GameId::Gobang => {
                next.boards[me] |= 1u64 << mv.index();
            }
            GameId::Othello => {
                if mv.index() != OTHELLO_PASS {
                    let sq = 1u64 << mv.index();
                    let flips = othello_flips(self.boards[me], self.boards[them], sq);
                    next.boards[me] |= sq | flips;
                    next.boards[them] &= !flips;
                }
            }
        }
        next.to_move = self.to_move.opponent();
        next
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal_value().is_some()
    }

    /// Outcome of a finished game, `None` while play continues.
    pub fn terminal_value(&self) -> Option<Outcome> {
        let [one, two] = self.boards;
        match self.game {
            GameId::ConnectFour | GameId::Gobang => {
                if has_line(one, self.win_length) {
                    Some(Outcome::Win(Player::One))
                } else if has_line(two, self.win_length) {
                    Some(Outcome::Win(Player::Two))
                } else if (one | two) == FULL {
                    Some(Outcome::Draw)
                } else {
                    None
                }
            }
            GameId::Othello => {
                if othello_placements(one, two) != 0 || othello_placements(two, one) != 0 {
                    return None;
                }
                let (a, b) = (one.count_ones(), two.count_ones());
                Some(match a.cmp(&b) {
                    std::cmp::Ordering::Greater => Outcome::Win(Player::One),
                    std::cmp::Ordering::Less => Outcome::Win(Player::Two),
                    std::cmp::Ordering::Equal => Outcome::Draw,
                })
            }
        }
    }

    /// Board from the side to move's perspective: +1 own, −1 opponent, 0 empty,
    /// row-major over the 6×6 grid.
    pub fn encode<F: Scalar>(&self) -> Vec<F> {
        let mut out = vec![F::zero(); CELLS];
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into<F: Scalar>(&self, out: &mut [F]) {
        let own = self.boards[self.to_move.index()];
        let opp = self.boards[self.to_move.opponent().index()];
        for (i, slot) in out.iter_mut().enumerate().take(CELLS) {
            let bit = 1u64 << i;
            *slot = if own & bit != 0 {
                F::one()
            } else if opp & bit != 0 {
                -F::one()
            } else {
                F::zero()
            };
        }
    }

    /// Checks the per-game structural invariants.
    pub fn validate(&self) -> Result<(), GameError> {
        let [one, two] = self.boards;
        if one & two != 0 {
            return Err(GameError::Invariant("cell occupied by both players".into()));
        }
        if (one | two) & !FULL != 0 {
            return Err(GameError::Invariant("piece outside the board".into()));
        }
        match self.game {
            GameId::ConnectFour => {
                let occupied = one | two;
                for row in 0..BOARD_SIDE - 1 {
                    for col in 0..BOARD_SIDE {
                        let here = 1u64 << (row * BOARD_SIDE + col);
                        let below = here << BOARD_SIDE;
                        if occupied & here != 0 && occupied & below == 0 {
                            return Err(GameError::Invariant(format!(
                                "floating piece at row {row}, column {col}"
                            )));
                        }
                    }
                }
            }
            GameId::Othello => {
                if (one | two).count_ones() < 4 {
                    return Err(GameError::Invariant("othello needs at least 4 pieces".into()));
                }
            }
            GameId::Gobang => {}
        }
        Ok(())
    }

    /// Parses the text diagram written by `Display`: six rows of `.`, `X`, `O`
    /// followed by `X to move` or `O to move`.
    pub fn from_diagram(game: GameId, text: &str) -> Result<GameState, GameError> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        if lines.len() != BOARD_SIDE + 1 {
            return Err(GameError::Parse(format!(
                "expected {} board rows and a side-to-move line, got {} lines",
                BOARD_SIDE,
                lines.len()
            )));
        }
        let mut boards = [0u64; 2];
        for (row, line) in lines[..BOARD_SIDE].iter().enumerate() {
            let chars: Vec<char> = line.chars().filter(|c| !c.is_whitespace()).collect();
            if chars.len() != BOARD_SIDE {
                return Err(GameError::Parse(format!(
                    "row {row} has {} cells, expected {BOARD_SIDE}",
                    chars.len()
                )));
            }
            for (col, ch) in chars.into_iter().enumerate() {
                let bit = 1u64 << (row * BOARD_SIDE + col);
                match ch {
                    '.' => {}
                    'X' | 'x' => boards[0] |= bit,
                    'O' | 'o' => boards[1] |= bit,
                    other => {
                        return Err(GameError::Parse(format!("unexpected cell character '{other}'")))
                    }
                }
            }
        }
        let to_move = match lines[BOARD_SIDE]
            .split_whitespace()
            .collect::<Vec<_>>()
            .as_slice()
        {
            ["X", "to", "move"] => Player::One,
            ["O", "to", "move"] => Player::Two,
            _ => {
                return Err(GameError::Parse(format!(
                    "expected 'X to move' or 'O to move', got '{}'",
                    lines[BOARD_SIDE]
                )))
            }
        };
        GameState::from_boards(game, game.default_win_length(), boards[0], boards[1], to_move)
    }
}

/// Iterates the set bits of a legal mask as moves.
pub fn mask_moves(mut mask: u64) -> impl Iterator<Item = Move> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(Move::new(i))
        }
    })
}

impl fmt::Display for GameState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in 0..BOARD_SIDE {
            for col in 0..BOARD_SIDE {
                let ch = match self.cell(row, col) {
                    Some(p) => p.symbol(),
                    None => '.',
                };
                write!(f, "{ch}")?;
            }
            writeln!(f)?;
        }
        write!(f, "{} to move", self.to_move.symbol())
    }
}

impl fmt::Debug for GameState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} (win length {})", self.game, self.win_length)?;
        fmt::Display::fmt(self, f)
    }
}

/// Opening position for `game`.
pub fn initial_state(game: GameId) -> GameState {
    GameState::initial(game)
}
