//! Normalized scores, windowed returns and the per-run metrics CSV.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::io::{Read, Write};

pub const RETURN_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreTriple {
    pub agent: f64,
    pub human: f64,
    pub random: f64,
}

/// `(agent - random) / (human - random)`
pub fn hns(t: &ScoreTriple) -> Result<f64> {
    let denom = t.human - t.random;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::UndefinedBaseline(t.human));
    }
    Ok((t.agent - t.random) / denom)
}

/// [`hns`] clamped into `[0, 1]`.
pub fn chns(t: &ScoreTriple) -> Result<f64> {
    Ok(hns(t)?.clamp(0.0, 1.0))
}

/// Trailing mean over at most `window` entries.
pub fn windowed_mean(returns: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(returns.len());
    for i in 0..returns.len() {
        let start = (i + 1).saturating_sub(window);
        let slice = &returns[start..=i];
        out.push(slice.iter().sum::<f64>() / slice.len() as f64);
    }
    out
}

/// Final score: the best windowed mean reached during training.
pub fn max_windowed_mean(returns: &[f64], window: usize) -> Option<f64> {
    windowed_mean(returns, window).into_iter().reduce(f64::max)
}

/// Element-wise mean of several runs' series, truncated to the shortest.
pub fn average_series(runs: &[Vec<f64>]) -> Vec<f64> {
    let len = runs.iter().map(Vec::len).min().unwrap_or(0);
    (0..len).map(|i| runs.iter().map(|r| r[i]).sum::<f64>() / runs.len() as f64).collect()
}

/// One row of the training metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub wall_step: u64,
    pub frames: u64,
    pub evaluator_return_mean50: f64,
    pub chosen_arm: usize,
    pub loss_e: f64,
    pub loss_i: f64,
    pub replay_fill: usize,
}

pub const METRICS_HEADER: [&str; 7] =
    ["wall_step", "frames", "evaluator_return_mean50", "chosen_arm", "loss_e", "loss_i", "replay_fill"];

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.wall_step.to_string(),
            r.frames.to_string(),
            format!("{:?}", r.evaluator_return_mean50),
            r.chosen_arm.to_string(),
            format!("{:?}", r.loss_e),
            format!("{:?}", r.loss_i),
            r.replay_fill.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn metrics_csv_string(rows: &[MetricsRow]) -> String {
    let mut buf = Vec::new();
    write_metrics_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = record.get(i).ok_or_else(|| Error::Parse(format!("missing column {}", METRICS_HEADER[i])))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad value `{raw}` in column {}", METRICS_HEADER[i])))
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != METRICS_HEADER {
        return Err(Error::Parse(format!("unexpected metrics header {:?}", header)));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(MetricsRow {
            wall_step: field(&record, 0)?,
            frames: field(&record, 1)?,
            evaluator_return_mean50: field(&record, 2)?,
            chosen_arm: field(&record, 3)?,
            loss_e: field(&record, 4)?,
            loss_i: field(&record, 5)?,
            replay_fill: field(&record, 6)?,
        });
    }
    Ok(rows)
}

/// Per-game normalized score.
#[derive(Debug, Clone, PartialEq)]
pub struct GameScore {
    pub game: String,
    pub hns: f64,
    pub chns: f64,
}

/// Reads `game,score` and `game,human,random` tables (with headers) and
/// normalizes every scored game. Games missing from the baselines are errors.
pub fn normalize_scores<R1: Read, R2: Read>(scores: R1, baselines: R2) -> Result<Vec<GameScore>> {
    let mut base = BTreeMap::new();
    let mut reader = csv::Reader::from_reader(baselines);
    for record in reader.records() {
        let record = record?;
        let game = record.get(0).ok_or_else(|| Error::Parse("baseline row without a game".into()))?.trim().to_string();
        let parse = |i: usize| -> Result<f64> {
            let raw = record.get(i).ok_or_else(|| Error::Parse(format!("baseline row for {game} is short")))?;
            raw.trim().parse().map_err(|_| Error::Parse(format!("bad baseline value `{raw}` for {game}")))
        };
        base.insert(game.clone(), (parse(1)?, parse(2)?));
    }
    let mut out = Vec::new();
    let mut reader = csv::Reader::from_reader(scores);
    for record in reader.records() {
        let record = record?;
        let game = record.get(0).ok_or_else(|| Error::Parse("score row without a game".into()))?.trim().to_string();
        let raw = record.get(1).ok_or_else(|| Error::Parse(format!("score row for {game} is short")))?;
        let agent: f64 = raw.trim().parse().map_err(|_| Error::Parse(format!("bad score `{raw}` for {game}")))?;
        let &(human, random) = base.get(&game).ok_or_else(|| Error::Parse(format!("no baseline for {game}")))?;
        let t = ScoreTriple { agent, human, random };
        out.push(GameScore { game, hns: hns(&t)?, chns: chns(&t)? });
    }
    Ok(out)
}

pub fn write_game_scores<W: Write>(scores: &[GameScore], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["game", "hns", "chns"])?;
    for s in scores {
        w.write_record([s.game.clone(), format!("{:?}", s.hns), format!("{:?}", s.chns)])?;
    }
    w.flush()?;
    Ok(())
}
