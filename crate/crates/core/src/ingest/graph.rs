use std::borrow::Borrow;
use std::collections::HashMap;

use super::RetweetEvent;
use crate::{Error, Result};

/// Directed retweet network. An edge `u -> v` with weight `w` means `v`
/// retweeted `u` a total of `w` times.
///
/// Nodes are ordered by user id; edges are stored as compressed rows by
/// source with targets ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct RetweetGraph {
    nodes: Vec<String>,
    node_lookup: HashMap<String, usize>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<u64>,
}

impl RetweetGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_lookup.get(id).copied()
    }

    pub fn out_edges(&self, u: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        let span = self.offsets[u]..self.offsets[u + 1];
        self.targets[span.clone()]
            .iter()
            .copied()
            .zip(self.weights[span].iter().copied())
    }

    /// All `(source, target, weight)` edges, by source then target.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        (0..self.node_count()).flat_map(move |u| self.out_edges(u).map(move |(v, w)| (u, v, w)))
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.iter().sum()
    }

    /// Weight of `u -> v`, zero when absent.
    pub fn weight(&self, u: &str, v: &str) -> u64 {
        match (self.node_index(u), self.node_index(v)) {
            (Some(u), Some(v)) => self
                .out_edges(u)
                .find(|&(t, _)| t == v)
                .map_or(0, |(_, w)| w),
            _ => 0,
        }
    }
}

/// Incremental form of [`build_retweet_graph`] for streamed input.
#[derive(Debug, Default)]
pub struct RetweetGraphBuilder {
    exclude_news_links: bool,
    interned: HashMap<String, u32>,
    names: Vec<String>,
    arcs: Vec<(u32, u32)>,
}

impl RetweetGraphBuilder {
    pub fn new(exclude_news_links: bool) -> Self {
        RetweetGraphBuilder {
            exclude_news_links,
            ..Default::default()
        }
    }

    fn intern(&mut self, id: &str) -> u32 {
        if let Some(&k) = self.interned.get(id) {
            return k;
        }
        let k = self.names.len() as u32;
        self.names.push(id.to_owned());
        self.interned.insert(id.to_owned(), k);
        k
    }

    pub fn push(&mut self, e: &RetweetEvent) {
        if self.exclude_news_links && e.has_news_link {
            return;
        }
        if e.retweeted_user == e.retweeting_user {
            return;
        }
        let u = self.intern(&e.retweeted_user);
        let v = self.intern(&e.retweeting_user);
        self.arcs.push((u, v));
    }

    pub fn finish(self) -> Result<RetweetGraph> {
        let RetweetGraphBuilder {
            names,
            mut arcs,
            interned,
            ..
        } = self;
        drop(interned);
        if arcs.is_empty() {
            return Err(Error::Empty("no retweet events survive filtering".into()));
        }
        assemble(names, &mut arcs)
    }
}

/// Aggregates retweet events into a weighted directed graph.
///
/// Self-retweets are dropped; with `exclude_news_links`, so are retweets
/// carrying a news link. Users that appear in no surviving event are absent.
pub fn build_retweet_graph<I>(events: I, exclude_news_links: bool) -> Result<RetweetGraph>
where
    I: IntoIterator,
    I::Item: Borrow<RetweetEvent>,
{
    let mut builder = RetweetGraphBuilder::new(exclude_news_links);
    for event in events {
        builder.push(event.borrow());
    }
    builder.finish()
}

fn assemble(names: Vec<String>, arcs: &mut [(u32, u32)]) -> Result<RetweetGraph> {
    let mut order: Vec<u32> = (0..names.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| names[a as usize].cmp(&names[b as usize]));
    let mut rank = vec![0u32; names.len()];
    for (r, &k) in order.iter().enumerate() {
        rank[k as usize] = r as u32;
    }
    for arc in arcs.iter_mut() {
        *arc = (rank[arc.0 as usize], rank[arc.1 as usize]);
    }
    arcs.sort_unstable();

    let n = names.len();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut targets = Vec::new();
    let mut weights: Vec<u64> = Vec::new();
    offsets.push(0);
    let mut source = 0usize;
    let mut prev: Option<(u32, u32)> = None;
    for &arc in arcs.iter() {
        if prev == Some(arc) {
            *weights.last_mut().expect("edge present") += 1;
            continue;
        }
        while source < arc.0 as usize {
            offsets.push(targets.len());
            source += 1;
        }
        targets.push(arc.1 as usize);
        weights.push(1);
        prev = Some(arc);
    }
    while offsets.len() < n + 1 {
        offsets.push(targets.len());
    }

    let mut nodes: Vec<String> = Vec::with_capacity(n);
    let mut slots: Vec<Option<String>> = names.into_iter().map(Some).collect();
    for &k in &order {
        nodes.push(slots[k as usize].take().expect("each name used once"));
    }
    let node_lookup = nodes
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i))
        .collect();

    Ok(RetweetGraph {
        nodes,
        node_lookup,
        offsets,
        targets,
        weights,
    })
}
