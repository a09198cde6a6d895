//! CSV and JSON artifacts exchanged between pipeline stages.
//!
//! Reals are written in Rust's shortest round-trip form, so reading an
//! artifact back yields bit-identical values.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::ideology::IvScore;
use crate::ingest::BipartiteCounts;
use crate::netcomm::CommunityPartition;
use crate::stats::{DensityCurve, DensityGrid};
use crate::{Error, Result};

pub const COUNTS_HEADER: &[&str] = &["user_id", "outlet_id", "count"];
pub const OUTLETS_HEADER: &[&str] = &["outlet_id", "shares"];
pub const USER_MSI_HEADER: &[&str] = &["user_id", "msi"];
pub const OUTLET_MSI_HEADER: &[&str] = &["outlet_id", "msi", "column_mass"];
pub const IV_HEADER: &[&str] = &["user_id", "cr_count", "cl_count", "iv"];
pub const COMMUNITIES_HEADER: &[&str] = &["user_id", "community"];
pub const GROUND_TRUTH_HEADER: &[&str] = &["user_id", "group"];
pub const DENSITY_HEADER: &[&str] = &["x", "density"];
pub const DENSITY_2D_HEADER: &[&str] = &["x", "y", "density"];

/// Writes `header` and then whatever `body` emits, one row per line.
pub fn write_csv<F>(path: &Path, header: &[&str], body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", header.join(","))
        .and_then(|_| body(&mut w))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Rows of a CSV file whose header must equal `header`, with line numbers.
fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(u64, Vec<String>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(std::io::BufReader::new(file));
    let mut rows = Vec::new();
    let mut header_seen = false;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Malformed {
            path: path.to_owned(),
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let fields: Vec<String> = record.iter().map(str::to_owned).collect();
        if !header_seen {
            if fields != header {
                return Err(Error::Header {
                    path: path.to_owned(),
                    found: fields,
                    expected: header.iter().map(|s| s.to_string()).collect(),
                });
            }
            header_seen = true;
            continue;
        }
        if fields.len() == 1 && fields[0].is_empty() {
            continue;
        }
        if fields.len() != header.len() {
            return Err(Error::Malformed {
                path: path.to_owned(),
                line,
                reason: format!("expected {} fields, found {}", header.len(), fields.len()),
            });
        }
        rows.push((line, fields));
    }
    if !header_seen {
        return Err(Error::Header {
            path: path.to_owned(),
            found: Vec::new(),
            expected: header.iter().map(|s| s.to_string()).collect(),
        });
    }
    Ok(rows)
}

fn field<T: FromStr>(path: &Path, line: u64, name: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Malformed {
        path: path.to_owned(),
        line,
        reason: format!("invalid {name} {raw:?}"),
    })
}

fn finite(path: &Path, line: u64, name: &str, raw: &str) -> Result<f64> {
    let v: f64 = field(path, line, name, raw)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Malformed {
            path: path.to_owned(),
            line,
            reason: format!("{name} is not finite"),
        })
    }
}

pub fn write_counts(path: &Path, counts: &BipartiteCounts) -> Result<()> {
    write_csv(path, COUNTS_HEADER, |w| {
        for (i, j, y) in counts.entries() {
            writeln!(w, "{},{},{}", counts.users()[i], counts.outlets()[j], y)?;
        }
        Ok(())
    })
}

/// Reads a count table. Users keep file order; outlets are sorted by id.
pub fn read_counts(path: &Path) -> Result<BipartiteCounts> {
    let rows = read_rows(path, COUNTS_HEADER)?;
    let mut users: Vec<String> = Vec::new();
    let mut user_index: HashMap<String, usize> = HashMap::new();
    let outlets: Vec<String> = rows
        .iter()
        .map(|(_, f)| f[1].clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let outlet_index: HashMap<&str, usize> =
        outlets.iter().enumerate().map(|(j, o)| (o.as_str(), j)).collect();
    let mut entries = Vec::with_capacity(rows.len());
    for (line, f) in &rows {
        let count: u64 = field(path, *line, "count", &f[2])?;
        let i = *user_index.entry(f[0].clone()).or_insert_with(|| {
            users.push(f[0].clone());
            users.len() - 1
        });
        entries.push((i, outlet_index[f[1].as_str()], count));
    }
    BipartiteCounts::from_triplets(users, outlets.clone(), entries)
}

pub fn write_outlets(path: &Path, outlets: &[(String, u64)]) -> Result<()> {
    write_csv(path, OUTLETS_HEADER, |w| {
        for (o, n) in outlets {
            writeln!(w, "{o},{n}")?;
        }
        Ok(())
    })
}

pub fn write_user_msi(path: &Path, users: &[String], msi: &[f64]) -> Result<()> {
    write_csv(path, USER_MSI_HEADER, |w| {
        for (u, s) in users.iter().zip(msi) {
            writeln!(w, "{u},{s}")?;
        }
        Ok(())
    })
}

pub fn read_user_msi(path: &Path) -> Result<Vec<(String, f64)>> {
    read_rows(path, USER_MSI_HEADER)?
        .into_iter()
        .map(|(line, f)| Ok((f[0].clone(), finite(path, line, "msi", &f[1])?)))
        .collect()
}

pub fn write_outlet_msi(path: &Path, outlets: &[String], msi: &[f64], masses: &[f64]) -> Result<()> {
    write_csv(path, OUTLET_MSI_HEADER, |w| {
        for ((o, s), c) in outlets.iter().zip(msi).zip(masses) {
            writeln!(w, "{o},{s},{c}")?;
        }
        Ok(())
    })
}

pub fn write_iv(path: &Path, scores: &[IvScore]) -> Result<()> {
    write_csv(path, IV_HEADER, |w| {
        for s in scores {
            writeln!(w, "{},{},{},{}", s.user_id, s.cr_count, s.cl_count, s.iv)?;
        }
        Ok(())
    })
}

pub fn read_iv(path: &Path) -> Result<Vec<IvScore>> {
    read_rows(path, IV_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            Ok(IvScore {
                user_id: f[0].clone(),
                cr_count: field(path, line, "cr_count", &f[1])?,
                cl_count: field(path, line, "cl_count", &f[2])?,
                iv: finite(path, line, "iv", &f[3])?,
            })
        })
        .collect()
}

pub fn write_communities(path: &Path, nodes: &[String], partition: &CommunityPartition) -> Result<()> {
    write_csv(path, COMMUNITIES_HEADER, |w| {
        for (u, c) in nodes.iter().zip(&partition.assignment) {
            writeln!(w, "{u},{c}")?;
        }
        Ok(())
    })
}

/// Node ids and community ids in file order.
pub fn read_communities(path: &Path) -> Result<(Vec<String>, Vec<usize>)> {
    let rows = read_rows(path, COMMUNITIES_HEADER)?;
    let mut nodes = Vec::with_capacity(rows.len());
    let mut assignment = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        assignment.push(field(path, line, "community", &f[1])?);
        nodes.push(f[0].clone());
    }
    Ok((nodes, assignment))
}

pub fn read_ground_truth(path: &Path) -> Result<HashMap<String, crate::ingest::Label>> {
    read_rows(path, GROUND_TRUTH_HEADER)?
        .into_iter()
        .map(|(line, f)| Ok((f[0].clone(), field(path, line, "group", &f[1])?)))
        .collect()
}

pub fn write_density(path: &Path, curve: &DensityCurve) -> Result<()> {
    write_csv(path, DENSITY_HEADER, |w| {
        for (x, d) in curve.grid.iter().zip(&curve.density) {
            writeln!(w, "{x},{d}")?;
        }
        Ok(())
    })
}

pub fn write_density_2d(path: &Path, grid: &DensityGrid) -> Result<()> {
    write_csv(path, DENSITY_2D_HEADER, |w| {
        for (x, row) in grid.x_grid.iter().zip(&grid.density) {
            for (y, d) in grid.y_grid.iter().zip(row) {
                writeln!(w, "{x},{y},{d}")?;
            }
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("counts.csv");
        let counts = BipartiteCounts::from_dense(
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y".into()],
            &[vec![1, 2], vec![0, 3]],
        )
        .unwrap();
        write_counts(&path, &counts).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "user_id,outlet_id,count\na,x,1\na,y,2\nb,y,3\n");
        assert_eq!(read_counts(&path).unwrap(), counts);
    }

    #[test]
    fn reals_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("msi.csv");
        let users = vec!["a".to_string(), "b".to_string()];
        let msi = vec![0.1 + 0.2, -1.0 / 3.0];
        write_user_msi(&path, &users, &msi).unwrap();
        let back = read_user_msi(&path).unwrap();
        assert_eq!(back, vec![("a".to_string(), msi[0]), ("b".to_string(), msi[1])]);
    }

    #[test]
    fn header_and_field_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("iv.csv");
        std::fs::write(&path, "user,iv\n").unwrap();
        assert!(matches!(read_iv(&path), Err(Error::Header { .. })));
        std::fs::write(&path, "user_id,cr_count,cl_count,iv\nu,1,x,0\n").unwrap();
        match read_iv(&path) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
