//! Dataset CSV serialization.
//!
//! One observation per row; the header carries variable names. A
//! multi-dimensional variable occupies consecutive columns suffixed
//! `name:0, name:1, …`. Values are written with 17 significant digits,
//! which round-trips every finite `f64` exactly.

use crate::Failure;
use hoi_core::kernel::{Dataset, VariableSamples};
use ndarray::Array2;
use std::io::{Read, Write};
use std::path::Path;

/// Header column labels for one variable.
fn column_labels(v: &VariableSamples) -> Vec<String> {
    if v.width() == 1 {
        vec![v.name().to_string()]
    } else {
        (0..v.width()).map(|j| format!("{}:{j}", v.name())).collect()
    }
}

pub fn write_dataset<W: Write>(data: &Dataset, out: W) -> Result<(), Failure> {
    let mut writer = csv::Writer::from_writer(out);
    let header: Vec<String> = data.variables().iter().flat_map(column_labels).collect();
    writer
        .write_record(&header)
        .map_err(|e| Failure::Data(format!("writing CSV header: {e}")))?;
    for i in 0..data.n() {
        let mut row = Vec::with_capacity(header.len());
        for v in data.variables() {
            for j in 0..v.width() {
                row.push(format!("{:.16e}", v.values()[[i, j]]));
            }
        }
        writer
            .write_record(&row)
            .map_err(|e| Failure::Data(format!("writing CSV row {}: {e}", i + 1)))?;
    }
    writer
        .flush()
        .map_err(|e| Failure::Data(format!("flushing CSV: {e}")))
}

pub fn write_dataset_to(data: &Dataset, path: Option<&Path>) -> Result<(), Failure> {
    match path {
        Some(p) => {
            let file = std::fs::File::create(p)
                .map_err(|e| Failure::Data(format!("creating {}: {e}", p.display())))?;
            write_dataset(data, file)
        }
        None => write_dataset(data, std::io::stdout().lock()),
    }
}

/// One variable's slot in the header: its columns in file order.
struct HeaderGroup {
    name: String,
    columns: Vec<usize>,
    indices: Vec<Option<usize>>,
}

fn group_header(header: &[String]) -> Result<Vec<HeaderGroup>, Failure> {
    let mut groups: Vec<HeaderGroup> = Vec::new();
    for (col, label) in header.iter().enumerate() {
        let (name, index) = match label.rsplit_once(':') {
            Some((base, suffix)) => match suffix.parse::<usize>() {
                Ok(ix) if !base.is_empty() => (base.to_string(), Some(ix)),
                _ => (label.clone(), None),
            },
            None => (label.clone(), None),
        };
        if name.is_empty() {
            return Err(Failure::Data(format!("empty variable name in column {}", col + 1)));
        }
        match groups.iter_mut().find(|g| g.name == name) {
            Some(g) => {
                g.columns.push(col);
                g.indices.push(index);
            }
            None => groups.push(HeaderGroup {
                name,
                columns: vec![col],
                indices: vec![index],
            }),
        }
    }
    for g in &groups {
        let plain = g.indices.iter().filter(|ix| ix.is_none()).count();
        if g.columns.len() == 1 && plain == 1 {
            continue;
        }
        if plain > 0 {
            return Err(Failure::Data(format!(
                "variable `{}` mixes plain and `name:index` columns",
                g.name
            )));
        }
        let mut seen: Vec<usize> = g.indices.iter().map(|ix| ix.unwrap()).collect();
        seen.sort_unstable();
        if seen != (0..g.columns.len()).collect::<Vec<_>>() {
            return Err(Failure::Data(format!(
                "variable `{}` needs contiguous component indices 0..{}, found {:?}",
                g.name,
                g.columns.len(),
                seen
            )));
        }
    }
    Ok(groups)
}

pub fn read_dataset<R: Read>(
    input: R,
    selection: Option<&[String]>,
) -> Result<Dataset, Failure> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Failure::Data(format!("reading CSV header: {e}")))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let groups = group_header(&header)?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Failure::Data(format!("reading CSV row {}: {e}", i + 2)))?;
        if record.len() != header.len() {
            return Err(Failure::Data(format!(
                "row {} has {} fields, header has {}",
                i + 2,
                record.len(),
                header.len()
            )));
        }
        let mut row = Vec::with_capacity(header.len());
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| {
                Failure::Data(format!(
                    "row {}, column `{}`: `{}` is not a number",
                    i + 2,
                    header[col],
                    field.trim()
                ))
            })?;
            if !value.is_finite() {
                return Err(Failure::Data(format!(
                    "row {}, column `{}`: non-finite value",
                    i + 2,
                    header[col]
                )));
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Failure::Data("the CSV contains no observation rows".into()));
    }

    let chosen: Vec<&HeaderGroup> = match selection {
        None => groups.iter().collect(),
        Some(names) => {
            let mut picked = Vec::with_capacity(names.len());
            for name in names {
                let g = groups.iter().find(|g| &g.name == name).ok_or_else(|| {
                    let known: Vec<&str> = groups.iter().map(|g| g.name.as_str()).collect();
                    Failure::Data(format!(
                        "unknown variable `{name}`; the file has: {}",
                        known.join(", ")
                    ))
                })?;
                picked.push(g);
            }
            picked
        }
    };

    let n = rows.len();
    let mut variables = Vec::with_capacity(chosen.len());
    for g in chosen {
        // Column order within a group follows the component index.
        let mut ordered = g.columns.clone();
        if g.columns.len() > 1 {
            let mut with_ix: Vec<(usize, usize)> = g
                .indices
                .iter()
                .zip(&g.columns)
                .map(|(ix, c)| (ix.unwrap(), *c))
                .collect();
            with_ix.sort_unstable();
            ordered = with_ix.into_iter().map(|(_, c)| c).collect();
        }
        let mut values = Array2::zeros((n, ordered.len()));
        for (i, row) in rows.iter().enumerate() {
            for (j, &col) in ordered.iter().enumerate() {
                values[[i, j]] = row[col];
            }
        }
        variables.push(
            VariableSamples::new(g.name.clone(), values)
                .map_err(|e| Failure::Data(e.to_string()))?,
        );
    }
    Dataset::new(variables).map_err(|e| Failure::Data(e.to_string()))
}

pub fn read_dataset_from(path: &Path, selection: Option<&[String]>) -> Result<Dataset, Failure> {
    let file = std::fs::File::open(path)
        .map_err(|e| Failure::Data(format!("opening {}: {e}", path.display())))?;
    read_dataset(file, selection)
}
