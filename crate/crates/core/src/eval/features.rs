//! Aggregate per-cascade features for the baseline classifier.

use serde::{Deserialize, Serialize};

use crate::cascade::Cascade;
use crate::simulate::structural_stats;

pub const FEATURE_NAMES: [&str; 16] = [
    "size",
    "max_depth",
    "mean_depth",
    "size_to_depth",
    "mean_response_time",
    "mean_elapsed_time",
    "virality",
    "diffusion_speed",
    "mean_followers",
    "mean_account_age",
    "mean_followees",
    "mean_engagement",
    "topic_political",
    "neg_emotion",
    "pos_emotion",
    "surprise",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub size: f64,
    pub max_depth: f64,
    pub mean_depth: f64,
    pub size_to_depth: f64,
    pub mean_response_time: f64,
    pub mean_elapsed_time: f64,
    pub virality: f64,
    /// Events per hour between the first and last event; `size` when they
    /// coincide.
    pub diffusion_speed: f64,
    pub mean_followers: f64,
    pub mean_account_age: f64,
    pub mean_followees: f64,
    pub mean_engagement: f64,
    pub topic_political: f64,
    pub neg_emotion: f64,
    pub pos_emotion: f64,
    pub surprise: f64,
}

impl FeatureRow {
    /// Values in [`FEATURE_NAMES`] order.
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.size,
            self.max_depth,
            self.mean_depth,
            self.size_to_depth,
            self.mean_response_time,
            self.mean_elapsed_time,
            self.virality,
            self.diffusion_speed,
            self.mean_followers,
            self.mean_account_age,
            self.mean_followees,
            self.mean_engagement,
            self.topic_political,
            self.neg_emotion,
            self.pos_emotion,
            self.surprise,
        ]
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

pub fn extract_features(cascade: &Cascade) -> FeatureRow {
    let st = structural_stats(cascade);
    let ev = cascade.events();
    let rt = &ev[1..];
    let duration = ev.last().map_or(0.0, |e| e.time) - ev[0].time;
    let size = st.size as f64;
    let user = |k: usize| mean(ev.iter().map(|e| e.user[k]));
    let z = cascade.covariates();
    FeatureRow {
        size,
        max_depth: st.max_depth as f64,
        mean_depth: st.mean_depth,
        size_to_depth: st.size_to_depth,
        mean_response_time: mean(rt.iter().map(|e| e.structural.response_time)),
        mean_elapsed_time: mean(rt.iter().map(|e| e.structural.elapsed_time)),
        virality: st.virality,
        diffusion_speed: if duration > 0.0 { size / duration } else { size },
        mean_followers: user(0),
        mean_followees: user(1),
        mean_account_age: user(2),
        mean_engagement: user(3),
        pos_emotion: z[0],
        neg_emotion: z[1],
        surprise: z[2],
        topic_political: z[3],
    }
}
