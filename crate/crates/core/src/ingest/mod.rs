//! Event ingestion: typed records, file parsing, outlet selection, the
//! user-by-outlet count matrix and the retweet graph.

mod counts;
mod graph;
mod outlets;
mod parse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use counts::{build_counts, BipartiteCounts};
pub use graph::{build_retweet_graph, RetweetGraph, RetweetGraphBuilder};
pub use outlets::{outlet_share_counts, rank_outlets, retention, select_top_outlets, Retention};
pub use parse::{
    for_each_event, parse_events, read_events, EventKind, EventList, EventRecord, ParseOptions,
    Parsed, ParsedEvents,
};

/// One tweet carrying a link to a news outlet.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ShareEvent {
    pub user_id: String,
    pub outlet_id: String,
    pub timestamp: i64,
}

/// One retweet; the edge points from the retweeted user to the retweeter.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RetweetEvent {
    pub retweeted_user: String,
    pub retweeting_user: String,
    pub timestamp: i64,
    pub has_news_link: bool,
}

/// Political leaning label attached to a user for a time window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    CL,
    CR,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::CL => "CL",
            Label::CR => "CR",
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::CL => Label::CR,
            Label::CR => Label::CL,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "CL" => Ok(Label::CL),
            "CR" => Ok(Label::CR),
            other => Err(format!("label must be CL or CR, got {other:?}")),
        }
    }
}

/// A user carries `label` over the half-open window `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelInterval {
    pub user_id: String,
    pub start: i64,
    pub end: i64,
    pub label: Label,
}

impl LabelInterval {
    pub fn contains(&self, t: i64) -> bool {
        self.start <= t && t < self.end
    }
}
