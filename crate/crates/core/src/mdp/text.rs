//! Flat text format for MDP fixtures.
//!
//! ```text
//! tabular_mdp 1
//! states 2 actions 1
//! transition
//! 0 1          <- one line per (x, a), row-major, `states` numbers each
//! 0 1
//! reward_extrinsic
//! 1            <- one line per state, `actions` numbers each
//! 0
//! reward_intrinsic
//! 0
//! 0
//! terminal
//! 0 1
//! ```

use super::TabularMdp;
use crate::error::{Error, Result};
use std::fmt::Write as _;

const MAGIC: &str = "tabular_mdp 1";

impl TabularMdp {
    pub fn to_text(&self) -> String {
        let (ns, na) = (self.num_states(), self.num_actions());
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "states {ns} actions {na}").unwrap();
        out.push_str("transition\n");
        for x in 0..ns {
            for a in 0..na {
                let row: Vec<String> = (0..ns).map(|y| fmt(self.transition_prob(x, a, y))).collect();
                writeln!(out, "{}", row.join(" ")).unwrap();
            }
        }
        for (name, table) in [("reward_extrinsic", self.reward_extrinsic()), ("reward_intrinsic", self.reward_intrinsic())] {
            writeln!(out, "{name}").unwrap();
            for row in table.chunks(na) {
                let row: Vec<String> = row.iter().map(|&v| fmt(v)).collect();
                writeln!(out, "{}", row.join(" ")).unwrap();
            }
        }
        out.push_str("terminal\n");
        let mask: Vec<&str> = self.terminal_mask().iter().map(|&t| if t { "1" } else { "0" }).collect();
        writeln!(out, "{}", mask.join(" ")).unwrap();
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("unexpected end of input, expected {what}")));

        if next("header")? != MAGIC {
            return Err(Error::Parse(format!("missing '{MAGIC}' header")));
        }
        let dims: Vec<&str> = next("dimensions")?.split_whitespace().collect();
        let (ns, na) = match dims.as_slice() {
            ["states", s, "actions", a] => (parse_usize(s)?, parse_usize(a)?),
            _ => return Err(Error::Parse("expected 'states <n> actions <m>'".into())),
        };

        expect_section(next("transition")?, "transition")?;
        let mut transition = Vec::with_capacity(ns * na * ns);
        for _ in 0..ns * na {
            transition.extend(parse_row(next("transition row")?, ns)?);
        }
        expect_section(next("reward_extrinsic")?, "reward_extrinsic")?;
        let mut re = Vec::with_capacity(ns * na);
        for _ in 0..ns {
            re.extend(parse_row(next("reward row")?, na)?);
        }
        expect_section(next("reward_intrinsic")?, "reward_intrinsic")?;
        let mut ri = Vec::with_capacity(ns * na);
        for _ in 0..ns {
            ri.extend(parse_row(next("reward row")?, na)?);
        }
        expect_section(next("terminal")?, "terminal")?;
        let terminal = next("terminal mask")?
            .split_whitespace()
            .map(|t| match t {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::Parse(format!("terminal flag must be 0 or 1, got '{other}'"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        TabularMdp::from_dense(ns, na, &transition, re, Some(ri), terminal)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn expect_section(line: &str, name: &str) -> Result<()> {
    if line == name {
        Ok(())
    } else {
        Err(Error::Parse(format!("expected section '{name}', found '{line}'")))
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse(format!("invalid integer '{s}'")))
}

fn parse_row(line: &str, expected: usize) -> Result<Vec<f64>> {
    let row = line
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("invalid number '{t}'"))))
        .collect::<Result<Vec<f64>>>()?;
    if row.len() != expected {
        return Err(Error::Parse(format!("expected {expected} numbers, found {}", row.len())));
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_handwritten_fixture() {
        let text = "tabular_mdp 1\nstates 2 actions 1\ntransition\n0 1\n0 1\nreward_extrinsic\n1\n0\nreward_intrinsic\n0.5\n0\nterminal\n0 1\n";
        let mdp = TabularMdp::from_text(text).unwrap();
        assert_eq!(mdp.num_states(), 2);
        assert_eq!(mdp.transition_prob(0, 0, 1), 1.0);
        assert!(mdp.is_terminal(1));
        assert_eq!(mdp.reward_intrinsic()[0], 0.5);
        assert_eq!(TabularMdp::from_text(&mdp.to_text()).unwrap(), mdp);
    }

    #[test]
    fn rejects_bad_rows() {
        let text = "tabular_mdp 1\nstates 1 actions 1\ntransition\n0.5\nreward_extrinsic\n0\nreward_intrinsic\n0\nterminal\n0\n";
        assert!(matches!(TabularMdp::from_text(text), Err(Error::Domain(_))));
        assert!(matches!(TabularMdp::from_text("nope"), Err(Error::Parse(_))));
    }
}
