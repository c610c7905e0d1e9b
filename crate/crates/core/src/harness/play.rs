use std::io::{BufRead, Write};

use super::HarnessError;
use crate::game::{GameId, GameState, Move, Outcome, Player, BOARD_SIDE, OTHELLO_PASS};
use crate::neural::ModelParams;
use crate::search::{CachedEvaluator, EnhancementKind, Mcts, SearchConfig};

/// Board with column letters and row numbers.
pub fn render(state: &GameState) -> String {
    let mut out = String::from("  ");
    for col in 0..BOARD_SIDE {
        out.push((b'a' + col as u8) as char);
    }
    out.push('\n');
    let diagram = state.to_string();
    for (row, line) in diagram.lines().take(BOARD_SIDE).enumerate() {
        out.push_str(&format!("{} {line}\n", row + 1));
    }
    out.push_str(&format!("{} to move\n", state.to_move().symbol()));
    out
}

/// Parses a human move: a cell such as `c4` (column letter, row number from
/// the top), a bare column for Connect Four, `pass` in Othello, or a raw
/// action id prefixed with `#`.
pub fn parse_move(state: &GameState, text: &str) -> Result<Move, String> {
    let t = text.trim().to_ascii_lowercase();
    let side = BOARD_SIDE as u8;
    let action = if t == "pass" {
        if state.game() != GameId::Othello {
            return Err("only Othello has a pass move".into());
        }
        OTHELLO_PASS
    } else if let Some(id) = t.strip_prefix('#') {
        id.parse::<usize>().map_err(|_| format!("bad action id '{id}'"))?
    } else {
        let bytes = t.as_bytes();
        let col = match bytes.first() {
            Some(&c) if (b'a'..b'a' + side).contains(&c) => (c - b'a') as usize,
            _ => return Err(format!("'{text}': expected a column letter a-f")),
        };
        if state.game() == GameId::ConnectFour {
            if bytes.len() > 2 {
                return Err(format!("'{text}': give a column, e.g. 'c'"));
            }
            col
        } else {
            let row = match (bytes.get(1), bytes.len()) {
                (Some(&r), 2) if (b'1'..b'1' + side).contains(&r) => (r - b'1') as usize,
                _ => return Err(format!("'{text}': expected a cell such as 'c4'")),
            };
            row * BOARD_SIDE + col
        }
    };
    if action >= state.action_size() {
        return Err(format!("action {action} is out of range"));
    }
    let mv = Move::new(action);
    if !state.is_legal(mv) {
        return Err(format!("'{}' is not legal here", text.trim()));
    }
    Ok(mv)
}

/// Interactive game against `params` from `start`, with default search. Illegal input is
/// reported and asked for again. Returns the outcome, or `None` if input
/// ended first.
pub fn play_session<R: BufRead, W: Write>(
    params: &ModelParams<f32>,
    start: GameState,
    simulations: usize,
    human: Player,
    seed: u64,
    mut input: R,
    mut output: W,
) -> Result<Option<Outcome>, HarnessError> {
    let game = start.game();
    if params.arch.actions != game.action_size() {
        return Err(HarnessError::Run(format!(
            "checkpoint has {} actions, {game} needs {}",
            params.arch.actions,
            game.action_size()
        )));
    }
    let eval = CachedEvaluator::new(params);
    let mut search = Mcts::new(SearchConfig::<f32>::new(EnhancementKind::Baseline, simulations, seed))?;
    let mut state = start;
    let mut line = String::new();
    loop {
        writeln!(output, "{}", render(&state))?;
        if let Some(outcome) = state.terminal_value() {
            let text = match outcome {
                Outcome::Draw => "draw".to_string(),
                Outcome::Win(p) if p == human => format!("{} wins (you)", p.symbol()),
                Outcome::Win(p) => format!("{} wins (agent)", p.symbol()),
            };
            writeln!(output, "result: {text}")?;
            return Ok(Some(outcome));
        }
        let mv = if state.to_move() == human {
            loop {
                write!(output, "your move> ")?;
                output.flush()?;
                line.clear();
                if input.read_line(&mut line)? == 0 {
                    writeln!(output)?;
                    return Ok(None);
                }
                match parse_move(&state, &line) {
                    Ok(mv) => break mv,
                    Err(why) => writeln!(output, "{why}; try again")?,
                }
            }
        } else {
            let pi = search.search(&state, &eval)?;
            let mv = pi.argmax();
            writeln!(output, "agent plays #{}", mv.index())?;
            mv
        };
        state = state.apply_move(mv)?;
    }
}
