//! Reading numeric CSV tables and edge lists; writing datasets, labels and
//! ROC curves.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::ClusterLabels;
use crate::kernels::{Dataset, Graph, KernelSpec};

/// Vertex ids at or above this are remapped to a dense range.
pub const MAX_DENSE_VERTEX_ID: u64 = 1 << 20;

pub const DEFAULT_MISSING_TOKENS: [&str; 3] = ["", "NA", "NaN"];

#[derive(Clone, Debug, Default, PartialEq)]
pub enum Columns {
    #[default]
    All,
    /// Zero-based column indices, in output order.
    Indices(Vec<usize>),
    /// Every column except those whose header matches one of these names.
    ExceptNamed(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvOptions {
    pub has_header: bool,
    pub missing_tokens: Vec<String>,
    pub columns: Columns,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            has_header: false,
            missing_tokens: DEFAULT_MISSING_TOKENS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            columns: Columns::All,
        }
    }
}

/// Parsed CSV with the header names of the kept columns.
#[derive(Clone, Debug)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub data: Dataset,
}

pub fn read_csv_numeric(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    Ok(parse_csv_numeric(File::open(path)?, options)?.data)
}

pub fn read_csv_table(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Table> {
    parse_csv_numeric(File::open(path)?, options)
}

/// Parses numeric CSV. Rows and columns in errors are 1-based and count data rows only.
pub fn parse_csv_numeric(reader: impl Read, options: &CsvOptions) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header: Option<Vec<String>> = if options.has_header {
        Some(rdr.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut keep: Option<Vec<usize>> = None;
    let mut width: Option<usize> = header.as_ref().map(Vec::len);
    let mut values = Vec::new();
    let mut present = Vec::new();
    let mut n = 0usize;

    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Parse {
                row,
                col: record.len().min(w) + 1,
                msg: format!("expected {w} fields, found {}", record.len()),
            });
        }
        let cols =
            keep.get_or_insert_with(|| select_columns(&options.columns, header.as_deref(), w));
        if let Some(&bad) = cols.iter().find(|&&c| c >= w) {
            return Err(Error::Parse {
                row,
                col: bad + 1,
                msg: format!("column out of range (row has {w} fields)"),
            });
        }
        let mut any = false;
        for &c in cols.iter() {
            let cell = &record[c];
            if options.missing_tokens.iter().any(|t| t == cell) {
                values.push(f64::NAN);
                present.push(false);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                col: c + 1,
                msg: format!("cannot parse '{cell}' as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    col: c + 1,
                    msg: format!("non-finite value '{cell}'"),
                });
            }
            values.push(v);
            present.push(true);
            any = true;
        }
        if !any {
            return Err(Error::Parse {
                row,
                col: 1,
                msg: "row has no observed values".into(),
            });
        }
        n += 1;
    }
    let cols = keep
        .unwrap_or_else(|| select_columns(&options.columns, header.as_deref(), width.unwrap_or(0)));
    let kept_header = header.map(|h| cols.iter().filter_map(|&c| h.get(c).cloned()).collect());
    Ok(Table {
        header: kept_header,
        data: Dataset::new(n, cols.len(), values, present)?,
    })
}

fn select_columns(columns: &Columns, header: Option<&[String]>, width: usize) -> Vec<usize> {
    match columns {
        Columns::All => (0..width).collect(),
        Columns::Indices(ix) => ix.clone(),
        Columns::ExceptNamed(names) => (0..width)
            .filter(|&c| header.is_none_or(|h| !names.iter().any(|n| h.get(c) == Some(n))))
            .collect(),
    }
}

/// Writes a dataset as CSV; missing cells are empty.
pub fn write_csv_dataset(
    mut w: impl Write,
    data: &Dataset,
    header: Option<&[String]>,
) -> Result<()> {
    if let Some(h) = header {
        writeln!(w, "{}", h.join(","))?;
    }
    for i in 0..data.n_rows() {
        let cells: Vec<String> = (0..data.n_cols())
            .map(|j| data.get(i, j).map(|v| v.to_string()).unwrap_or_default())
            .collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Writes a 2-D dataset with its labels as `x,y,label`.
pub fn write_points_csv(mut w: impl Write, data: &Dataset, labels: &ClusterLabels) -> Result<()> {
    if data.n_cols() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: data.n_cols(),
        });
    }
    writeln!(w, "x,y,label")?;
    for i in 0..data.n_rows() {
        let r = data.row(i);
        writeln!(w, "{},{},{}", r[0], r[1], labels.get(i))?;
    }
    Ok(())
}

/// Reads class labels from a CSV with a header. Uses the column called
/// `column`, else one named `label` or `class`, else the last column.
/// Distinct strings become ids in order of first appearance.
pub fn read_class_labels(path: impl AsRef<Path>, column: Option<&str>) -> Result<Vec<usize>> {
    parse_class_labels(File::open(path)?, column)
}

pub fn parse_class_labels(reader: impl Read, column: Option<&str>) -> Result<Vec<usize>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let find = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let col = match column {
        Some(name) => find(name)
            .ok_or_else(|| Error::InvalidParameter(format!("no column named '{name}'")))?,
        None => find("label")
            .or_else(|| find("class"))
            .unwrap_or(header.len().saturating_sub(1)),
    };
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = record.get(col).ok_or_else(|| Error::Parse {
            row: r + 1,
            col: col + 1,
            msg: "missing label".into(),
        })?;
        let next = ids.len();
        out.push(*ids.entry(cell.to_string()).or_insert(next));
    }
    Ok(out)
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    parse_edge_list(BufReader::new(File::open(path)?))
}

/// Parses `u v` lines. Blank lines and `#` comments are skipped; duplicate
/// and reversed edges collapse. Ids below [`MAX_DENSE_VERTEX_ID`] are used
/// directly (vertex count = max id + 1); larger id spaces are remapped in
/// sorted id order.
pub fn parse_edge_list(reader: impl BufRead) -> Result<Graph> {
    let mut raw: Vec<(u64, u64)> = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = k + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut parts = text.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<u64> {
            tok.and_then(|t| t.parse().ok()).ok_or_else(|| Error::Line {
                line: line_no,
                msg: format!("expected two non-negative integer ids, found '{text}'"),
            })
        };
        let u = parse(parts.next())?;
        let v = parse(parts.next())?;
        if parts.next().is_some() {
            return Err(Error::Line {
                line: line_no,
                msg: format!("expected two ids, found '{text}'"),
            });
        }
        if u == v {
            return Err(Error::Line {
                line: line_no,
                msg: format!("self-loop on vertex {u}"),
            });
        }
        raw.push((u, v));
    }
    let max_id = raw.iter().map(|&(u, v)| u.max(v)).max();
    match max_id {
        None => Graph::from_edges(0, []),
        Some(m) if m < MAX_DENSE_VERTEX_ID => Graph::from_edges(
            m as usize + 1,
            raw.into_iter().map(|(u, v)| (u as usize, v as usize)),
        ),
        Some(_) => {
            let ids: Vec<u64> = raw
                .iter()
                .flat_map(|&(u, v)| [u, v])
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let index: HashMap<u64, usize> =
                ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
            let edges = raw.iter().map(|(u, v)| (index[u], index[v]));
            Ok(Graph::from_edges(ids.len(), edges)?.with_ids(ids))
        }
    }
}

/// On-disk flat clustering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelsFile {
    pub n: usize,
    pub n_clusters: usize,
    pub labels: Vec<usize>,
    pub seed: u64,
    pub kernel: Option<KernelSpec>,
}

impl LabelsFile {
    pub fn new(labels: &ClusterLabels, seed: u64, kernel: Option<KernelSpec>) -> Self {
        LabelsFile {
            n: labels.len(),
            n_clusters: labels.n_clusters(),
            labels: labels.assignments().to_vec(),
            seed,
            kernel,
        }
    }

    pub fn cluster_labels(&self) -> Result<ClusterLabels> {
        if self.labels.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: self.labels.len(),
            });
        }
        Ok(ClusterLabels::from_raw(&self.labels))
    }
}

pub fn write_labels_json(path: impl AsRef<Path>, labels: &LabelsFile) -> Result<()> {
    let mut text = serde_json::to_string(labels)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_labels_json(path: impl AsRef<Path>) -> Result<LabelsFile> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<Dataset> {
        parse_csv_numeric(s.as_bytes(), &CsvOptions::default()).map(|t| t.data)
    }

    #[test]
    fn missing_cells() {
        let d = parse("1.0,,3.0\n").unwrap();
        assert_eq!(d.get(0, 0), Some(1.0));
        assert_eq!(d.get(0, 1), None);
        assert_eq!(d.get(0, 2), Some(3.0));
        let d = parse("1,NA,NaN,4\n").unwrap();
        assert_eq!(d.mask(0), &[true, false, false, true]);
    }

    #[test]
    fn plain_grid() {
        let d = parse("1,2\r\n3,4\r\n").unwrap();
        assert_eq!((d.n_rows(), d.n_cols()), (2, 2));
        assert!(d.is_complete());
        assert_eq!(d.values(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse("1,x\n"),
            Err(Error::Parse { row: 1, col: 2, .. })
        ));
        assert!(matches!(
            parse("1,2\n3\n"),
            Err(Error::Parse { row: 2, .. })
        ));
        assert!(matches!(
            parse("1,2\n,NA\n"),
            Err(Error::Parse { row: 2, .. })
        ));
        assert!(matches!(
            parse("1,inf\n"),
            Err(Error::Parse { row: 1, col: 2, .. })
        ));
    }

    #[test]
    fn header_and_columns() {
        let opts = CsvOptions {
            has_header: true,
            columns: Columns::ExceptNamed(vec!["label".into()]),
            ..Default::default()
        };
        let t = parse_csv_numeric("x,y,label\n1,2,0\n3,4,1\n".as_bytes(), &opts).unwrap();
        assert_eq!(t.header.unwrap(), vec!["x", "y"]);
        assert_eq!(t.data.values(), &[1.0, 2.0, 3.0, 4.0]);

        let opts = CsvOptions {
            columns: Columns::Indices(vec![2, 0]),
            ..Default::default()
        };
        let t = parse_csv_numeric("1,2,3\n4,5,6\n".as_bytes(), &opts).unwrap();
        assert_eq!(t.data.values(), &[3.0, 1.0, 6.0, 4.0]);
    }

    #[test]
    fn edge_list_basics() {
        let g = parse_edge_list("0 1\n1 0\n1 2\n".as_bytes()).unwrap();
        assert_eq!((g.n_vertices(), g.n_edges()), (3, 2));
        assert_eq!(g.degrees(), vec![1, 2, 1]);
        let g = parse_edge_list("".as_bytes()).unwrap();
        assert_eq!((g.n_vertices(), g.n_edges()), (0, 0));
    }

    #[test]
    fn edge_list_errors() {
        assert!(matches!(
            parse_edge_list("0 1\n2 2\n".as_bytes()),
            Err(Error::Line { line: 2, .. })
        ));
        assert!(matches!(
            parse_edge_list("# comment\n0 a\n".as_bytes()),
            Err(Error::Line { line: 2, .. })
        ));
        assert!(matches!(
            parse_edge_list("0 1 2\n".as_bytes()),
            Err(Error::Line { line: 1, .. })
        ));
    }

    #[test]
    fn sparse_ids_are_remapped() {
        let g = parse_edge_list("5000000000 7\n7 12\n".as_bytes()).unwrap();
        assert_eq!(g.n_vertices(), 3);
        assert_eq!(g.ids().unwrap(), &[7, 12, 5_000_000_000]);
        assert!(g.is_adjacent(0, 2));
        assert!(g.is_adjacent(0, 1));
    }

    #[test]
    fn class_labels() {
        let l = parse_class_labels("x,y,label\n0,0,b\n1,1,a\n2,2,b\n".as_bytes(), None).unwrap();
        assert_eq!(l, vec![0, 1, 0]);
        let l = parse_class_labels("id,kind\n0,q\n1,r\n".as_bytes(), None).unwrap();
        assert_eq!(l, vec![0, 1]);
        assert!(parse_class_labels("a\n1\n".as_bytes(), Some("zzz")).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip(
            rows in proptest::collection::vec(
                proptest::collection::vec(proptest::option::weighted(0.8, -1e6f64..1e6), 3), 1..20),
        ) {
            prop_assume!(rows.iter().all(|r| r.iter().any(Option::is_some)));
            let n = rows.len();
            let values = rows.iter().flatten().map(|v| v.unwrap_or(0.0)).collect();
            let present = rows.iter().flatten().map(Option::is_some).collect();
            let d = Dataset::new(n, 3, values, present).unwrap();
            let mut buf = Vec::new();
            write_csv_dataset(&mut buf, &d, None).unwrap();
            let back = parse_csv_numeric(buf.as_slice(), &CsvOptions::default()).unwrap().data;
            prop_assert_eq!(back.present(), d.present());
            for i in 0..n {
                for j in 0..3 {
                    prop_assert_eq!(back.get(i, j), d.get(i, j));
                }
            }
        }

        #[test]
        fn edge_order_is_irrelevant(
            edges in proptest::collection::vec((0usize..30, 0usize..30), 1..80),
            seed in any::<u64>(),
        ) {
            let edges: Vec<_> = edges.into_iter().filter(|(u, v)| u != v).collect();
            prop_assume!(!edges.is_empty());
            let text = |es: &[(usize, usize)]| es.iter().map(|(u, v)| format!("{u} {v}\n")).collect::<String>();
            let mut shuffled = edges.clone();
            let mut r = crate::rng::seeded(seed);
            use rand::seq::SliceRandom;
            shuffled.shuffle(&mut r);
            let a = parse_edge_list(text(&edges).as_bytes()).unwrap();
            let b = parse_edge_list(text(&shuffled).as_bytes()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
