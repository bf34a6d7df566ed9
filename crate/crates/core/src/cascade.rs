//! Retweet cascades: data model, JSON-lines IO, filtering, truncation and
//! train/test sampling.
//!
//! A cascade is a rooted tree of events. Event 0 is the source post at time
//! 0; every other event re-shares an earlier event (its parent). Events are
//! kept sorted by time, with ties in input order, so a parent index is always
//! smaller than the child index.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::covariates::{CASCADE_COVARIATES, USER_COVARIATES};
use crate::error::{Error, Result};

/// Fact-checked veracity of a rumor. The false class is the positive class
/// throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Veracity {
    True,
    False,
}

/// Structural covariates derived from the tree, on the raw (pre-log) scale.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StructuralCovariates {
    /// Edges on the path to the root.
    pub depth: u32,
    /// `t_i - t_parent`, 0 for the root.
    pub response_time: f64,
    /// `t_i - t_0`.
    pub elapsed_time: f64,
}

impl StructuralCovariates {
    /// Values in [`STRUCTURAL_COVARIATES`](crate::covariates::STRUCTURAL_COVARIATES) order.
    pub fn as_array(&self) -> [f64; 3] {
        [self.depth as f64, self.response_time, self.elapsed_time]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Hours since the root.
    pub time: f64,
    pub parent: Option<usize>,
    pub user: Vec<f64>,
    pub structural: StructuralCovariates,
}

/// Event as supplied to [`Cascade::new`]; parent indices refer to the
/// supplied order, which need not be sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct EventInput {
    pub time: f64,
    pub parent: Option<usize>,
    pub user: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    id: String,
    label: Option<Veracity>,
    horizon: f64,
    covariates: Vec<f64>,
    events: Vec<Event>,
}

/// Depth, response time and elapsed time for every event of a time-sorted
/// tree given as `(time, parent)` pairs with `parent < index`.
pub fn derive_structural(times: &[f64], parents: &[Option<usize>]) -> Vec<StructuralCovariates> {
    let mut out: Vec<StructuralCovariates> = Vec::with_capacity(times.len());
    for (i, (&t, p)) in times.iter().zip(parents).enumerate() {
        let s = match p {
            Some(p) => {
                debug_assert!(*p < i);
                StructuralCovariates {
                    depth: out[*p].depth + 1,
                    response_time: t - times[*p],
                    elapsed_time: t - times[0],
                }
            }
            None => StructuralCovariates::default(),
        };
        out.push(s);
    }
    out
}

impl Cascade {
    /// Validates, sorts by time (stable; the root goes first among `t = 0`
    /// ties), remaps parent indices and derives structural covariates.
    /// A missing horizon defaults to the last event time.
    pub fn new(
        id: impl Into<String>,
        label: Option<Veracity>,
        horizon: Option<f64>,
        covariates: Vec<f64>,
        events: Vec<EventInput>,
    ) -> Result<Self> {
        let id = id.into();
        let fail = |reason: String| Error::validation(id.clone(), reason);
        let n = events.len();
        if n == 0 {
            return Err(fail("cascade has no events".into()));
        }
        if covariates.len() != CASCADE_COVARIATES.len() || covariates.iter().any(|v| !v.is_finite()) {
            return Err(fail("cascade covariates must be 4 finite values".into()));
        }
        let mut root = None;
        for (i, ev) in events.iter().enumerate() {
            if !ev.time.is_finite() || ev.time < 0.0 {
                return Err(fail(format!("event {i}: time must be finite and nonnegative")));
            }
            if ev.user.len() != USER_COVARIATES.len() || ev.user.iter().any(|v| !v.is_finite()) {
                return Err(fail(format!("event {i}: user covariates must be 4 finite values")));
            }
            match ev.parent {
                None if root.is_some() => return Err(fail("more than one root event".into())),
                None => root = Some(i),
                Some(p) if p >= n || p == i => {
                    return Err(fail(format!("event {i}: parent out of range ({p})")))
                }
                Some(p) if events[p].time > ev.time => {
                    return Err(fail(format!("event {i}: time inversion with parent {p}")))
                }
                Some(_) => {}
            }
        }
        let root = root.ok_or_else(|| fail("no root event".into()))?;
        if events[root].time != 0.0 {
            return Err(fail("root event must be at time 0".into()));
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            events[a]
                .time
                .total_cmp(&events[b].time)
                .then_with(|| (a != root).cmp(&(b != root)))
        });
        let mut new_index = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let mut times = Vec::with_capacity(n);
        let mut parents = Vec::with_capacity(n);
        for (new, &old) in order.iter().enumerate() {
            let p = events[old].parent.map(|p| new_index[p]);
            if let Some(p) = p {
                if p >= new {
                    return Err(fail(format!(
                        "event {old}: parent {} does not precede it in time order",
                        events[old].parent.unwrap()
                    )));
                }
            }
            times.push(events[old].time);
            parents.push(p);
        }
        let last = *times.last().unwrap();
        let horizon = horizon.unwrap_or(last);
        if !horizon.is_finite() || horizon < last {
            return Err(fail(format!("horizon {horizon} precedes last event time {last}")));
        }
        let structural = derive_structural(&times, &parents);
        let mut events = events;
        let sorted = order
            .iter()
            .zip(structural)
            .zip(times.iter().zip(&parents))
            .map(|((&old, s), (&t, &p))| Event {
                time: t,
                parent: p,
                user: std::mem::take(&mut events[old].user),
                structural: s,
            })
            .collect();
        Ok(Self {
            id,
            label,
            horizon,
            covariates,
            events: sorted,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> Option<Veracity> {
        self.label
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Cascade covariates `z` in record order.
    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Number of events including the root.
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn retweets(&self) -> usize {
        self.events.len() - 1
    }

    pub fn times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.time).collect()
    }

    pub fn with_label(mut self, label: Option<Veracity>) -> Self {
        self.label = label;
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    fn prefix(&self, keep: usize, horizon: f64) -> Cascade {
        Cascade {
            id: self.id.clone(),
            label: self.label,
            horizon,
            covariates: self.covariates.clone(),
            events: self.events[..keep].to_vec(),
        }
    }
}

/// How much of a cascade to keep for early detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "by", content = "value")]
pub enum Truncation {
    /// Observation window in hours.
    Time(f64),
    /// Number of observed retweets.
    Count(usize),
}

impl Truncation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Truncation::Time(t) if !(t > 0.0 && t.is_finite()) => {
                Err(Error::Config(format!("truncation time must be positive, got {t}")))
            }
            Truncation::Count(0) => Err(Error::Config("truncation count must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

/// Keeps the root plus events with `t <= T'` (horizon `T'`), or the root plus
/// the first `n'` retweets (horizon at the last kept event). Truncations
/// beyond the observed data return the cascade unchanged.
pub fn truncate(cascade: &Cascade, by: Truncation) -> Result<Cascade> {
    by.validate()?;
    Ok(match by {
        Truncation::Time(t) if t >= cascade.horizon => cascade.clone(),
        Truncation::Time(t) => {
            let keep = cascade.events.partition_point(|e| e.time <= t);
            cascade.prefix(keep, t)
        }
        Truncation::Count(n) if n >= cascade.retweets() => cascade.clone(),
        Truncation::Count(n) => cascade.prefix(n + 1, cascade.events[n].time),
    })
}

/// Drops cascades smaller than `min_size` events and, when `require_label`
/// is set, cascades without a veracity label.
pub fn preprocess(cascades: Vec<Cascade>, min_size: usize, require_label: bool) -> Vec<Cascade> {
    cascades
        .into_iter()
        .filter(|c| c.len() >= min_size && (!require_label || c.label.is_some()))
        .collect()
}

/// Draws `per_class` cascades of each label for training; the remaining
/// labeled cascades form the test set. Both sets keep input order.
pub fn balanced_sample(
    cascades: &[Cascade],
    per_class: usize,
    seed: u64,
) -> Result<(Vec<Cascade>, Vec<Cascade>)> {
    let mut falses: Vec<usize> = Vec::new();
    let mut trues: Vec<usize> = Vec::new();
    for (i, c) in cascades.iter().enumerate() {
        match c.label {
            Some(Veracity::False) => falses.push(i),
            Some(Veracity::True) => trues.push(i),
            None => {}
        }
    }
    if falses.len() < per_class || trues.len() < per_class {
        return Err(Error::Insufficient(format!(
            "need {per_class} cascades per class, have {} false and {} true",
            falses.len(),
            trues.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; cascades.len()];
    for pool in [&mut falses, &mut trues] {
        pool.shuffle(&mut rng);
        for &i in &pool[..per_class] {
            in_train[i] = true;
        }
    }
    let mut train = Vec::with_capacity(2 * per_class);
    let mut test = Vec::new();
    for (i, c) in cascades.iter().enumerate() {
        if in_train[i] {
            train.push(c.clone());
        } else if c.label.is_some() {
            test.push(c.clone());
        }
    }
    Ok((train, test))
}

// ---------------------------------------------------------------------------
// JSON-lines records

#[derive(Debug, Serialize, Deserialize)]
struct CascadeCovariatesRecord {
    pos_emotion: f64,
    neg_emotion: f64,
    surprise: f64,
    topic_political: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct UserCovariatesRecord {
    followers: f64,
    followees: f64,
    account_age_days: f64,
    engagement: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct EventRecord {
    t: f64,
    parent: Option<usize>,
    x: UserCovariatesRecord,
}

#[derive(Debug, Serialize, Deserialize)]
struct CascadeRecord {
    id: String,
    #[serde(default)]
    label: Option<Veracity>,
    #[serde(default)]
    horizon_hours: Option<f64>,
    z: CascadeCovariatesRecord,
    events: Vec<EventRecord>,
}

impl CascadeRecord {
    fn into_cascade(self) -> Result<Cascade> {
        let z = vec![
            self.z.pos_emotion,
            self.z.neg_emotion,
            self.z.surprise,
            self.z.topic_political,
        ];
        let events = self
            .events
            .into_iter()
            .map(|e| EventInput {
                time: e.t,
                parent: e.parent,
                user: vec![e.x.followers, e.x.followees, e.x.account_age_days, e.x.engagement],
            })
            .collect();
        Cascade::new(self.id, self.label, self.horizon_hours, z, events)
    }

    fn from_cascade(c: &Cascade) -> Self {
        let z = &c.covariates;
        CascadeRecord {
            id: c.id.clone(),
            label: c.label,
            horizon_hours: Some(c.horizon),
            z: CascadeCovariatesRecord {
                pos_emotion: z[0],
                neg_emotion: z[1],
                surprise: z[2],
                topic_political: z[3],
            },
            events: c
                .events
                .iter()
                .map(|e| EventRecord {
                    t: e.time,
                    parent: e.parent,
                    x: UserCovariatesRecord {
                        followers: e.user[0],
                        followees: e.user[1],
                        account_age_days: e.user[2],
                        engagement: e.user[3],
                    },
                })
                .collect(),
        }
    }
}

/// Parses one JSON cascade record.
pub fn parse_record(line: &str) -> Result<Cascade> {
    let rec: CascadeRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    rec.into_cascade()
}

/// Reads a JSON-lines cascade stream. Blank lines are skipped; the first bad
/// line aborts the whole read.
pub fn ingest<R: BufRead>(reader: R) -> Result<Vec<Cascade>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CascadeRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let cascade = rec.into_cascade().map_err(|e| match e {
            Error::Validation { id, reason, .. } => Error::Validation {
                id,
                reason,
                line: Some(line_no),
            },
            other => other,
        })?;
        out.push(cascade);
    }
    Ok(out)
}

/// Serializes one cascade as a single JSON line (without newline).
pub fn to_json_line(cascade: &Cascade) -> String {
    serde_json::to_string(&CascadeRecord::from_cascade(cascade)).expect("cascade records serialize")
}

pub fn write_jsonl<W: Write>(mut writer: W, cascades: &[Cascade]) -> Result<()> {
    for c in cascades {
        writeln!(writer, "{}", to_json_line(c))?;
    }
    Ok(())
}
