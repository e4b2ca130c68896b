//! Terminal conversations: a person answers the system's questions.

use std::io::{BufRead, Write};

use cpr_core::engine::{drive, Outcome, Policy, Reply};
use cpr_core::{Answer, AttributeId, Conversation, EmbeddingTable, EpisodeLog, HeteroGraph, ItemId, Move, Responder, Rewards, UserId};

use crate::error::Result;
use crate::names::Names;

pub fn ask_prompt(names: &Names, p: AttributeId) -> String {
    format!("Do you like {}?", names.attribute(p))
}

pub fn recommend_prompt(names: &Names, items: &[ItemId]) -> String {
    let list: Vec<String> = items.iter().map(|&v| names.item(v)).collect();
    format!("How about: {}?", list.join(", "))
}

/// Reads `y`/`n` answers from `input`; end of input quits the session.
pub struct TerminalResponder<'n, R, W> {
    input: R,
    output: W,
    names: &'n Names,
}

impl<'n, R: BufRead, W: Write> TerminalResponder<'n, R, W> {
    pub fn new(input: R, output: W, names: &'n Names) -> Self {
        Self { input, output, names }
    }

    fn ask(&mut self, prompt: &str) -> Reply {
        loop {
            if write!(self.output, "{prompt} [y/n] ").and_then(|_| self.output.flush()).is_err() {
                return Reply::Quit;
            }
            let mut line = String::new();
            match self.input.read_line(&mut line) {
                Ok(0) | Err(_) => {
                    let _ = writeln!(self.output);
                    return Reply::Quit;
                }
                Ok(_) => {}
            }
            match line.trim().to_ascii_lowercase().as_str() {
                "y" | "yes" => return Reply::Answer(Answer::Accept),
                "n" | "no" => return Reply::Answer(Answer::Reject),
                _ => {
                    let _ = writeln!(self.output, "Please answer y or n.");
                }
            }
        }
    }
}

impl<R: BufRead, W: Write> Responder for TerminalResponder<'_, R, W> {
    fn answer_attribute(&mut self, p: AttributeId) -> Reply {
        let prompt = ask_prompt(self.names, p);
        self.ask(&prompt)
    }

    fn answer_recommendation(&mut self, items: &[ItemId]) -> Reply {
        let prompt = recommend_prompt(self.names, items);
        self.ask(&prompt)
    }
}

/// Runs one terminal session and prints the outcome and attribute path.
#[allow(clippy::too_many_arguments)]
pub fn chat<R: BufRead, W: Write>(
    g: &HeteroGraph,
    emb: &EmbeddingTable,
    policy: &mut dyn Policy,
    user: UserId,
    initial: AttributeId,
    k: usize,
    max_turns: u32,
    names: &Names,
    input: R,
    mut output: W,
) -> Result<EpisodeLog> {
    let conv = Conversation::start(g, emb, user, initial, k, max_turns, Rewards::default())?;
    let log = {
        let mut responder = TerminalResponder::new(input, &mut output, names);
        drive(conv, policy, &mut responder, None)?
    };
    let result = match (&log.outcome, log.turns.last().map(|t| &t.mv)) {
        (Outcome::Success { turn }, Some(Move::Recommend(items))) => {
            let list: Vec<String> = items.iter().map(|&v| names.item(v)).collect();
            format!("Accepted at turn {turn}: {}", list.join(", "))
        }
        (Outcome::Failure { reason }, _) => format!("No recommendation accepted ({}).", reason.name()),
        _ => "Finished.".to_string(),
    };
    let path: Vec<String> = log.path.iter().map(|&p| names.attribute(p)).collect();
    let _ = writeln!(output, "{result}");
    let _ = writeln!(output, "Path: {}", path.join(" -> "));
    Ok(log)
}
