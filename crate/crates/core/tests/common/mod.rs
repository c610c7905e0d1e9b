//! Shared helpers for the integration and acceptance suites: array-based
//! reference rules for the three games and random position generators.
#![allow(dead_code)]

pub mod criteria;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use warmstart::game::{BOARD_SIDE, OTHELLO_PASS};
use warmstart::{GameId, GameState, Move, Outcome, Player};

const N: usize = BOARD_SIDE;
const DIRS8: [(i32, i32); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Plain 2-D board: +1 for X, −1 for O, 0 empty. Row 0 is the top.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Board {
    pub game: GameId,
    pub cells: [[i8; N]; N],
    pub to_move: i8,
}

impl Board {
    pub fn new(game: GameId) -> Self {
        let mut cells = [[0i8; N]; N];
        if game == GameId::Othello {
            let c = N / 2;
            cells[c - 1][c - 1] = -1;
            cells[c][c] = -1;
            cells[c - 1][c] = 1;
            cells[c][c - 1] = 1;
        }
        Board { game, cells, to_move: 1 }
    }

    pub fn from_state(s: &GameState) -> Self {
        let mut cells = [[0i8; N]; N];
        for (r, row) in cells.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = match s.cell(r, c) {
                    Some(Player::One) => 1,
                    Some(Player::Two) => -1,
                    None => 0,
                };
            }
        }
        Board {
            game: s.game(),
            cells,
            to_move: if s.to_move() == Player::One { 1 } else { -1 },
        }
    }

    fn in_a_row(&self) -> usize {
        match self.game {
            GameId::ConnectFour => 4,
            GameId::Gobang => 5,
            GameId::Othello => usize::MAX,
        }
    }

    fn has_line(&self, p: i8) -> bool {
        let k = self.in_a_row() as i32;
        for r in 0..N as i32 {
            for c in 0..N as i32 {
                for (dr, dc) in [(0, 1), (1, 0), (1, 1), (1, -1)] {
                    let all = (0..k).all(|i| {
                        let (rr, cc) = (r + dr * i, c + dc * i);
                        (0..N as i32).contains(&rr) && (0..N as i32).contains(&cc) && self.cells[rr as usize][cc as usize] == p
                    });
                    if all {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn flips(&self, r: usize, c: usize, p: i8) -> Vec<(usize, usize)> {
        if self.cells[r][c] != 0 {
            return Vec::new();
        }
        let mut out = Vec::new();
        for (dr, dc) in DIRS8 {
            let mut run = Vec::new();
            let (mut rr, mut cc) = (r as i32 + dr, c as i32 + dc);
            while (0..N as i32).contains(&rr) && (0..N as i32).contains(&cc) && self.cells[rr as usize][cc as usize] == -p {
                run.push((rr as usize, cc as usize));
                rr += dr;
                cc += dc;
            }
            let closed = (0..N as i32).contains(&rr) && (0..N as i32).contains(&cc) && self.cells[rr as usize][cc as usize] == p;
            if closed && !run.is_empty() {
                out.extend(run);
            }
        }
        out
    }

    fn placements(&self, p: i8) -> Vec<usize> {
        (0..N * N).filter(|&i| !self.flips(i / N, i % N, p).is_empty()).collect()
    }

    /// Playable action ids, ignoring whether the game is over.
    pub fn legal(&self) -> Vec<usize> {
        match self.game {
            GameId::ConnectFour => (0..N).filter(|&c| self.cells[0][c] == 0).collect(),
            GameId::Gobang => (0..N * N).filter(|&i| self.cells[i / N][i % N] == 0).collect(),
            GameId::Othello => {
                let p = self.placements(self.to_move);
                if p.is_empty() {
                    vec![OTHELLO_PASS]
                } else {
                    p
                }
            }
        }
    }

    /// +1 X wins, −1 O wins, 0 draw.
    pub fn terminal(&self) -> Option<i8> {
        let full = self.cells.iter().flatten().all(|&v| v != 0);
        match self.game {
            GameId::Othello => {
                if !self.placements(1).is_empty() || !self.placements(-1).is_empty() {
                    return None;
                }
                let sum: i32 = self.cells.iter().flatten().map(|&v| v as i32).sum();
                Some(sum.signum() as i8)
            }
            _ => {
                if self.has_line(1) {
                    Some(1)
                } else if self.has_line(-1) {
                    Some(-1)
                } else if full {
                    Some(0)
                } else {
                    None
                }
            }
        }
    }

    pub fn apply(&self, action: usize) -> Board {
        let mut next = *self;
        let p = self.to_move;
        match self.game {
            GameId::ConnectFour => {
                let row = (0..N).rev().find(|&r| self.cells[r][action] == 0).expect("column has room");
                next.cells[row][action] = p;
            }
            GameId::Gobang => next.cells[action / N][action % N] = p,
            GameId::Othello => {
                if action != OTHELLO_PASS {
                    let (r, c) = (action / N, action % N);
                    for (fr, fc) in self.flips(r, c, p) {
                        next.cells[fr][fc] = p;
                    }
                    next.cells[r][c] = p;
                }
            }
        }
        next.to_move = -p;
        next
    }
}

pub fn outcome_code(o: Outcome) -> i8 {
    match o {
        Outcome::Win(Player::One) => 1,
        Outcome::Win(Player::Two) => -1,
        Outcome::Draw => 0,
    }
}

pub fn mask_ids(mask: u64) -> Vec<usize> {
    (0..64).filter(|i| mask & (1u64 << i) != 0).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every state visited by random playouts until `count` states are collected,
/// terminal ones included.
pub fn random_positions(game: GameId, count: usize, seed: u64) -> Vec<GameState> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut s = GameState::initial(game);
        loop {
            out.push(s);
            if s.is_terminal() || out.len() == count {
                break;
            }
            let moves = s.legal_moves().unwrap();
            s = s.apply_move(*moves.choose(&mut r).unwrap()).unwrap();
        }
    }
    out
}

/// Random non-terminal states, each from a playout of random length.
pub fn random_live_states(game: GameId, count: usize, seed: u64) -> Vec<GameState> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let depth = r.gen_range(0..30);
        let mut s = GameState::initial(game);
        for _ in 0..depth {
            let moves = s.legal_moves().unwrap();
            let next = s.apply_move(*moves.choose(&mut r).unwrap()).unwrap();
            if next.is_terminal() {
                break;
            }
            s = next;
        }
        out.push(s);
    }
    out
}

fn immediate_wins(b: &Board) -> Vec<usize> {
    b.legal()
        .into_iter()
        .filter(|&a| b.apply(a).terminal() == Some(b.to_move))
        .collect()
}

/// True if playing `a` (not itself a win) still wins by force on the next
/// turn: every reply leaves the mover an immediate win.
fn forces_win_in_three(b: &Board, a: usize) -> bool {
    let after = b.apply(a);
    if after.terminal().is_some() {
        return false;
    }
    after.legal().into_iter().all(|r| {
        let reply = after.apply(r);
        reply.terminal().is_none() && !immediate_wins(&reply).is_empty()
    })
}

/// Connect Four positions where the side to move wins at once and no other
/// column also forces a win on the following turn, found with the reference
/// rules. Returns each state with its winning columns.
pub fn win_in_one_positions(count: usize, seed: u64) -> Vec<(GameState, Vec<usize>)> {
    let mut r = rng(seed);
    let mut out: Vec<(GameState, Vec<usize>)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    while out.len() < count {
        let mut s = GameState::initial(GameId::ConnectFour);
        while !s.is_terminal() {
            let b = Board::from_state(&s);
            let wins = immediate_wins(&b);
            if !wins.is_empty() {
                let unique = b
                    .legal()
                    .into_iter()
                    .all(|a| wins.contains(&a) || !forces_win_in_three(&b, a));
                if unique && seen.insert(s.key()) {
                    out.push((s, wins));
                }
                break;
            }
            let moves = s.legal_moves().unwrap();
            s = s.apply_move(*moves.choose(&mut r).unwrap()).unwrap();
        }
    }
    out.truncate(count);
    out
}

pub fn mv(i: usize) -> Move {
    Move::new(i)
}
