use std::collections::{BTreeMap, HashMap};

use log::warn;

use super::ShareEvent;
use crate::{Error, Result};

/// Sparse user-by-outlet share counts `Y`.
///
/// Rows are users in lexicographic id order, columns are outlets in the
/// order they were selected. Storage is compressed sparse rows; only nonzero
/// counts are kept. Every row and every column has at least one nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteCounts {
    users: Vec<String>,
    outlets: Vec<String>,
    user_lookup: HashMap<String, usize>,
    outlet_lookup: HashMap<String, usize>,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<u64>,
    grand_total: u64,
}

fn lookup(ids: &[String], what: &str) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if id.is_empty() {
            return Err(Error::InvalidInput(format!("empty {what} id")));
        }
        if map.insert(id.clone(), i).is_some() {
            return Err(Error::InvalidInput(format!("duplicate {what} id {id:?}")));
        }
    }
    Ok(map)
}

impl BipartiteCounts {
    /// Builds the matrix from `(row, column, count)` triplets.
    ///
    /// Repeated coordinates are summed and zero counts ignored. Fails when an
    /// index is out of range, an id repeats, or a row or column ends up empty.
    pub fn from_triplets<I>(users: Vec<String>, outlets: Vec<String>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, u64)>,
    {
        let user_lookup = lookup(&users, "user")?;
        let outlet_lookup = lookup(&outlets, "outlet")?;
        let (n, m) = (users.len(), outlets.len());

        let mut rows: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); n];
        for (i, j, y) in entries {
            if i >= n || j >= m {
                return Err(Error::InvalidInput(format!(
                    "entry ({i}, {j}) outside a {n}x{m} matrix"
                )));
            }
            if y > 0 {
                *rows[i].entry(j).or_default() += y;
            }
        }

        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut col_seen = vec![false; m];
        row_offsets.push(0);
        for (i, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "user {:?} has no shares",
                    users[i]
                )));
            }
            for (&j, &y) in row {
                col_seen[j] = true;
                col_indices.push(j);
                values.push(y);
            }
            row_offsets.push(col_indices.len());
        }
        if let Some(j) = col_seen.iter().position(|seen| !seen) {
            return Err(Error::InvalidInput(format!(
                "outlet {:?} has no shares",
                outlets[j]
            )));
        }
        let grand_total: u64 = values.iter().sum();
        if grand_total == 0 {
            return Err(Error::Empty("count matrix is empty".into()));
        }

        Ok(BipartiteCounts {
            users,
            outlets,
            user_lookup,
            outlet_lookup,
            row_offsets,
            col_indices,
            values,
            grand_total,
        })
    }

    /// Builds the matrix from dense rows; handy for small examples.
    pub fn from_dense(users: Vec<String>, outlets: Vec<String>, rows: &[Vec<u64>]) -> Result<Self> {
        let entries = rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &y)| (i, j, y)))
            .collect::<Vec<_>>();
        if rows.len() != users.len() || rows.iter().any(|r| r.len() != outlets.len()) {
            return Err(Error::InvalidInput(
                "dense rows do not match the id lists".into(),
            ));
        }
        Self::from_triplets(users, outlets, entries)
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_outlets(&self) -> usize {
        self.outlets.len()
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn outlets(&self) -> &[String] {
        &self.outlets
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_lookup.get(id).copied()
    }

    pub fn outlet_index(&self, id: &str) -> Option<usize> {
        self.outlet_lookup.get(id).copied()
    }

    pub fn grand_total(&self) -> u64 {
        self.grand_total
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzero `(column, count)` pairs of row `i`, by ascending column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// All nonzero `(row, column, count)` triplets in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        (0..self.n_users()).flat_map(move |i| self.row(i).map(move |(j, y)| (i, j, y)))
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.n_users())
            .map(|i| self.row(i).map(|(_, y)| y).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.n_outlets()];
        for (&j, &y) in self.col_indices.iter().zip(&self.values) {
            sums[j] += y;
        }
        sums
    }

    pub fn to_dense(&self) -> Vec<Vec<u64>> {
        let mut dense = vec![vec![0u64; self.n_outlets()]; self.n_users()];
        for (i, j, y) in self.entries() {
            dense[i][j] = y;
        }
        dense
    }
}

/// Counts shares per (user, outlet) over the selected outlets.
///
/// Events for other outlets are ignored, users left without events are
/// absent, and selected outlets nobody shared are dropped with a warning.
pub fn build_counts<'a, I>(events: I, outlets: &[String]) -> Result<BipartiteCounts>
where
    I: IntoIterator<Item = &'a ShareEvent>,
{
    if outlets.is_empty() {
        return Err(Error::InvalidInput("outlet set is empty".into()));
    }
    let column: HashMap<&str, usize> = outlets
        .iter()
        .enumerate()
        .map(|(j, id)| (id.as_str(), j))
        .collect();

    let mut tally: HashMap<&'a str, HashMap<usize, u64>> = HashMap::new();
    let mut col_used = vec![false; outlets.len()];
    for e in events {
        if let Some(&j) = column.get(e.outlet_id.as_str()) {
            *tally.entry(e.user_id.as_str()).or_default().entry(j).or_default() += 1;
            col_used[j] = true;
        }
    }
    if tally.is_empty() {
        return Err(Error::Empty(
            "no share events survive outlet filtering".into(),
        ));
    }

    let mut remap = vec![usize::MAX; outlets.len()];
    let mut kept_outlets = Vec::new();
    for (j, id) in outlets.iter().enumerate() {
        if col_used[j] {
            remap[j] = kept_outlets.len();
            kept_outlets.push(id.clone());
        } else {
            warn!("outlet {id:?} has no shares and is dropped");
        }
    }

    let mut users: Vec<&str> = tally.keys().copied().collect();
    users.sort_unstable();
    let mut entries = Vec::new();
    for (i, user) in users.iter().enumerate() {
        for (&j, &y) in &tally[user] {
            entries.push((i, remap[j], y));
        }
    }
    BipartiteCounts::from_triplets(
        users.into_iter().map(str::to_owned).collect(),
        kept_outlets,
        entries,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(user: &str, outlet: &str, t: i64) -> ShareEvent {
        ShareEvent {
            user_id: user.into(),
            outlet_id: outlet.into(),
            timestamp: t,
        }
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn forced_counting() {
        let events = vec![ev("u1", "A", 1), ev("u1", "A", 2), ev("u2", "B", 3)];
        let y = build_counts(&events, &ids(&["A", "B"])).unwrap();
        assert_eq!(y.to_dense(), vec![vec![2, 0], vec![0, 1]]);
        assert_eq!(y.grand_total(), 3);
        assert_eq!(y.users(), &ids(&["u1", "u2"])[..]);
    }

    #[test]
    fn excluded_outlet_and_duplicate_timestamps() {
        let events = vec![ev("u1", "A", 5), ev("u1", "A", 5), ev("u3", "C", 1)];
        let y = build_counts(&events, &ids(&["A", "B"])).unwrap();
        assert_eq!(y.n_users(), 1);
        // B was never shared, so its column is dropped.
        assert_eq!(y.outlets(), &ids(&["A"])[..]);
        assert_eq!(y.to_dense(), vec![vec![2]]);
    }

    #[test]
    fn nothing_survives() {
        let events = vec![ev("u1", "C", 1)];
        assert!(matches!(
            build_counts(&events, &ids(&["A"])),
            Err(Error::Empty(_))
        ));
        assert!(build_counts(&events, &[]).is_err());
    }

    #[test]
    fn sums_match_event_counts() {
        let events = vec![
            ev("b", "X", 1),
            ev("a", "Y", 1),
            ev("a", "X", 1),
            ev("b", "X", 2),
            ev("c", "Z", 2),
        ];
        let y = build_counts(&events, &ids(&["X", "Y", "Z"])).unwrap();
        assert_eq!(y.grand_total(), 5);
        assert_eq!(y.row_sums(), vec![2, 2, 1]);
        assert_eq!(y.col_sums(), vec![3, 1, 1]);
        assert_eq!(y.user_index("c"), Some(2));
        assert_eq!(y.outlet_index("Y"), Some(1));
    }

    #[test]
    fn invariants_enforced_on_triplets() {
        assert!(BipartiteCounts::from_dense(ids(&["a", "b"]), ids(&["X"]), &[vec![1], vec![0]]).is_err());
        assert!(BipartiteCounts::from_dense(ids(&["a"]), ids(&["X", "Y"]), &[vec![1, 0]]).is_err());
        assert!(BipartiteCounts::from_dense(ids(&["a", "a"]), ids(&["X"]), &[vec![1], vec![1]]).is_err());
        assert!(BipartiteCounts::from_triplets(ids(&["a"]), ids(&["X"]), vec![(0, 3, 1)]).is_err());
    }
}
